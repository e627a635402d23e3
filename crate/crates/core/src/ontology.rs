//! Triggering-source ontology: concept taxonomy, categorized properties, instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};

pub const SOURCE_ONTOLOGY_VERSION: &str = "trigcond.source-ontology/1";

/// Top-level classification of a triggering source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConceptKind {
    InteractiveEntity,
    DisturbingEntity,
    EnvironmentalModification,
}

impl ConceptKind {
    pub const ALL: [ConceptKind; 3] = [
        ConceptKind::InteractiveEntity,
        ConceptKind::DisturbingEntity,
        ConceptKind::EnvironmentalModification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConceptKind::InteractiveEntity => "InteractiveEntity",
            ConceptKind::DisturbingEntity => "DisturbingEntity",
            ConceptKind::EnvironmentalModification => "EnvironmentalModification",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_entity(self) -> bool {
        !matches!(self, ConceptKind::EnvironmentalModification)
    }

    /// Property categories a concept of this kind may carry.
    pub fn allowed_categories(self) -> &'static [PropertyCategory] {
        use PropertyCategory::*;
        match self {
            ConceptKind::InteractiveEntity | ConceptKind::DisturbingEntity => &[
                ReflectivityRelated,
                ReflectionAreaRelated,
                DataGenerationRelated,
                FeatureVariabilityRelated,
            ],
            ConceptKind::EnvironmentalModification => &[ReflectivityRelated, TransmittanceRelated],
        }
    }

    pub fn allows(self, category: PropertyCategory) -> bool {
        self.allowed_categories().contains(&category)
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PropertyCategory {
    ReflectivityRelated,
    ReflectionAreaRelated,
    DataGenerationRelated,
    FeatureVariabilityRelated,
    TransmittanceRelated,
}

impl PropertyCategory {
    pub const ALL: [PropertyCategory; 5] = [
        PropertyCategory::ReflectivityRelated,
        PropertyCategory::ReflectionAreaRelated,
        PropertyCategory::DataGenerationRelated,
        PropertyCategory::FeatureVariabilityRelated,
        PropertyCategory::TransmittanceRelated,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyCategory::ReflectivityRelated => "ReflectivityRelated",
            PropertyCategory::ReflectionAreaRelated => "ReflectionAreaRelated",
            PropertyCategory::DataGenerationRelated => "DataGenerationRelated",
            PropertyCategory::FeatureVariabilityRelated => "FeatureVariabilityRelated",
            PropertyCategory::TransmittanceRelated => "TransmittanceRelated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for PropertyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProperty {
    pub name: String,
    pub category: PropertyCategory,
    /// Physical meaning of the property.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl SourceProperty {
    pub fn new(name: impl Into<String>, category: PropertyCategory) -> Self {
        Self {
            name: name.into(),
            category,
            note: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceConcept {
    pub name: String,
    pub kind: ConceptKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(default)]
    pub properties: Vec<SourceProperty>,
    #[serde(default)]
    pub instances: Vec<String>,
}

impl SourceConcept {
    pub fn new(name: impl Into<String>, kind: ConceptKind) -> Self {
        Self {
            name: name.into(),
            kind,
            parent: None,
            note: String::new(),
            properties: Vec::new(),
            instances: Vec::new(),
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent = Some(parent.into());
        self
    }

    pub fn with_property(mut self, name: impl Into<String>, category: PropertyCategory) -> Self {
        self.properties.push(SourceProperty::new(name, category));
        self
    }

    pub fn with_instance(mut self, name: impl Into<String>) -> Self {
        self.instances.push(name.into());
        self
    }

    /// Categories carried by the property named `name` (one property name may
    /// appear under several categories).
    pub fn categories_of(&self, name: &str) -> BTreeSet<PropertyCategory> {
        self.properties
            .iter()
            .filter(|p| p.name == name)
            .map(|p| p.category)
            .collect()
    }

    /// Distinct property names in canonical order.
    pub fn property_names(&self) -> Vec<&str> {
        let names: BTreeSet<&str> = self.properties.iter().map(|p| p.name.as_str()).collect();
        names.into_iter().collect()
    }

    pub fn has_property(&self, name: &str) -> bool {
        self.properties.iter().any(|p| p.name == name)
    }

    pub fn has_category(&self, category: PropertyCategory) -> bool {
        self.properties.iter().any(|p| p.category == category)
    }

    fn canonicalize(&mut self) {
        self.properties
            .sort_by(|a, b| (&a.name, a.category).cmp(&(&b.name, b.category)));
        self.instances.sort();
    }
}

/// Validated, canonically ordered triggering-source ontology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceOntology {
    pub schema_version: String,
    concepts: Vec<SourceConcept>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOntology {
    schema_version: String,
    #[serde(default)]
    concepts: Vec<RawConcept>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConcept {
    name: String,
    kind: String,
    #[serde(default)]
    parent: Option<String>,
    #[serde(default)]
    note: String,
    #[serde(default)]
    properties: Vec<RawProperty>,
    #[serde(default)]
    instances: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProperty {
    name: String,
    category: String,
    #[serde(default)]
    note: String,
}

impl Default for SourceOntology {
    fn default() -> Self {
        Self::empty()
    }
}

impl SourceOntology {
    pub fn empty() -> Self {
        Self {
            schema_version: SOURCE_ONTOLOGY_VERSION.to_string(),
            concepts: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    /// Validates and canonicalizes a concept list.
    pub fn new(concepts: Vec<SourceConcept>) -> DataResult<Self> {
        Self::build(concepts).map_err(|mut errs| errs.swap_remove(0))
    }

    /// Like [`SourceOntology::new`] but reports every violation.
    pub fn build(mut concepts: Vec<SourceConcept>) -> Result<Self, Vec<DataError>> {
        let errors = validate_concepts(&concepts);
        if !errors.is_empty() {
            return Err(errors);
        }
        for c in &mut concepts {
            c.canonicalize();
        }
        concepts.sort_by(|a, b| a.name.cmp(&b.name));
        let index = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.clone(), i))
            .collect();
        Ok(Self {
            schema_version: SOURCE_ONTOLOGY_VERSION.to_string(),
            concepts,
            index,
        })
    }

    pub fn concepts(&self) -> &[SourceConcept] {
        &self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn lookup_concept(&self, name: &str) -> Option<&SourceConcept> {
        self.index.get(name).map(|&i| &self.concepts[i])
    }

    /// Returns a new ontology with `concept` added.
    pub fn with_concept(&self, concept: SourceConcept) -> DataResult<Self> {
        let mut concepts = self.concepts.clone();
        concepts.push(concept);
        Self::new(concepts)
    }

    /// Number of parent edges from `name` up to `family`, if `family` is `name`
    /// or one of its ancestors.
    pub fn family_distance(&self, name: &str, family: &str) -> Option<usize> {
        let mut current = Some(name);
        let mut distance = 0;
        while let Some(n) = current {
            if n == family {
                return Some(distance);
            }
            current = self.lookup_concept(n).and_then(|c| c.parent.as_deref());
            distance += 1;
        }
        None
    }

    pub fn in_family(&self, name: &str, family: &str) -> bool {
        self.family_distance(name, family).is_some()
    }

    /// Concepts with no parent.
    pub fn roots(&self) -> impl Iterator<Item = &SourceConcept> {
        self.concepts.iter().filter(|c| c.parent.is_none())
    }
}

pub fn load_source_ontology(text: &str, format: DocFormat) -> DataResult<SourceOntology> {
    load_source_ontology_report(text, format).map_err(|mut e| e.swap_remove(0))
}

/// Loads an ontology, returning every violation found (each located in `text`).
pub fn load_source_ontology_report(
    text: &str,
    format: DocFormat,
) -> Result<SourceOntology, Vec<DataError>> {
    let raw: RawOntology = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, SOURCE_ONTOLOGY_VERSION)
        .map_err(|e| vec![e.locate_in(text)])?;

    let mut errors = Vec::new();
    let mut concepts = Vec::new();
    for rc in raw.concepts {
        let Some(kind) = ConceptKind::parse(&rc.kind) else {
            errors.push(
                DataError::new(
                    ErrorCode::UnknownKind,
                    format!("concept `{}` has unknown kind `{}`", rc.name, rc.kind),
                )
                .about(rc.kind.clone()),
            );
            continue;
        };
        let mut properties = Vec::new();
        for rp in rc.properties {
            match PropertyCategory::parse(&rp.category) {
                Some(category) => properties.push(SourceProperty {
                    name: rp.name,
                    category,
                    note: rp.note,
                }),
                None => errors.push(
                    DataError::new(
                        ErrorCode::UnknownCategory,
                        format!(
                            "property `{}` of `{}` has unknown category `{}`",
                            rp.name, rc.name, rp.category
                        ),
                    )
                    .about(rp.category.clone()),
                ),
            }
        }
        concepts.push(SourceConcept {
            name: rc.name,
            kind,
            parent: rc.parent,
            note: rc.note,
            properties,
            instances: rc.instances,
        });
    }
    if !errors.is_empty() {
        return Err(errors.into_iter().map(|e| e.locate_in(text)).collect());
    }
    SourceOntology::build(concepts)
        .map_err(|errs| errs.into_iter().map(|e| e.locate_in(text)).collect())
}

/// Canonical document: concepts, properties and instances sorted by name.
pub fn serialize_source_ontology(ontology: &SourceOntology, format: DocFormat) -> String {
    format::render(ontology, format)
}

fn validate_concepts(concepts: &[SourceConcept]) -> Vec<DataError> {
    let mut errors = Vec::new();
    let mut by_name: BTreeMap<&str, &SourceConcept> = BTreeMap::new();
    for c in concepts {
        if c.name.trim().is_empty() {
            errors.push(DataError::new(ErrorCode::EmptyField, "concept with empty name"));
            continue;
        }
        if c.name == crate::relationship::SENSOR || ConceptKind::parse(&c.name).is_some() {
            errors.push(
                DataError::new(ErrorCode::ReservedName, format!("`{}` is reserved and cannot name a concept", c.name))
                    .about(c.name.clone()),
            );
        }
        if by_name.insert(c.name.as_str(), c).is_some() {
            errors.push(
                DataError::new(ErrorCode::DuplicateName, format!("concept `{}` defined twice", c.name))
                    .about(c.name.clone()),
            );
        }
    }

    for c in concepts {
        let mut seen = BTreeSet::new();
        for p in &c.properties {
            if p.name.trim().is_empty() {
                errors.push(
                    DataError::new(ErrorCode::EmptyField, format!("`{}` has a property with empty name", c.name))
                        .about(c.name.clone()),
                );
            }
            if !seen.insert((p.name.as_str(), p.category)) {
                errors.push(
                    DataError::new(
                        ErrorCode::DuplicateName,
                        format!("property `{}` ({}) repeated in `{}`", p.name, p.category, c.name),
                    )
                    .about(p.name.clone()),
                );
            }
            if !c.kind.allows(p.category) {
                errors.push(
                    DataError::new(
                        ErrorCode::IllegalCategoryForKind,
                        format!(
                            "property `{}` of `{}` uses {} which is not allowed for {}",
                            p.name, c.name, p.category, c.kind
                        ),
                    )
                    .about(p.name.clone()),
                );
            }
        }
        let mut inst = BTreeSet::new();
        for i in &c.instances {
            if !inst.insert(i.as_str()) {
                errors.push(
                    DataError::new(
                        ErrorCode::DuplicateInstance,
                        format!("instance `{i}` repeated in `{}`", c.name),
                    )
                    .about(i.clone()),
                );
            }
        }
        if let Some(parent) = &c.parent {
            match by_name.get(parent.as_str()) {
                None => errors.push(
                    DataError::new(
                        ErrorCode::DanglingParent,
                        format!("`{}` names unknown parent `{parent}`", c.name),
                    )
                    .about(parent.clone()),
                ),
                Some(p) if p.kind != c.kind => errors.push(
                    DataError::new(
                        ErrorCode::CrossKindParent,
                        format!("`{}` ({}) has parent `{parent}` of kind {}", c.name, c.kind, p.kind),
                    )
                    .about(c.name.clone()),
                ),
                Some(_) => {}
            }
        }
    }

    // Cycle detection over resolvable parent edges.
    let mut reported = BTreeSet::new();
    for c in concepts {
        let mut path = BTreeSet::new();
        let mut current = Some(c.name.as_str());
        while let Some(name) = current {
            if !path.insert(name) {
                if reported.insert(name) {
                    errors.push(
                        DataError::new(
                            ErrorCode::TaxonomyCycle,
                            format!("taxonomy cycle through `{name}`"),
                        )
                        .about(name.to_string()),
                    );
                }
                break;
            }
            current = by_name.get(name).and_then(|c| c.parent.as_deref());
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;

    const VEHICLE: &str = r#"
schema_version = "trigcond.source-ontology/1"

[[concepts]]
name = "Vehicle"
kind = "InteractiveEntity"
instances = ["PassengerCar", "Minibus", "Bus", "Truck", "Motorcycle"]
properties = [
  { name = "SurfaceMaterial", category = "ReflectivityRelated" },
  { name = "Color", category = "ReflectivityRelated" },
  { name = "Structure", category = "ReflectivityRelated" },
  { name = "PerspectiveShape", category = "ReflectionAreaRelated" },
  { name = "Velocity", category = "DataGenerationRelated" },
  { name = "Accessory", category = "FeatureVariabilityRelated" },
]
"#;

    fn rainfall(extra: &str) -> String {
        format!(
            r#"
schema_version = "trigcond.source-ontology/1"

[[concepts]]
name = "Rainfall"
kind = "EnvironmentalModification"
instances = ["Drizzle", "ModerateRain", "RainWithWind", "Sleet"]
properties = [
  {{ name = "Composition", category = "ReflectivityRelated" }},
  {{ name = "Density", category = "ReflectivityRelated" }},
  {{ name = "Density", category = "TransmittanceRelated" }},
  {{ name = "ParticleSize", category = "TransmittanceRelated" }},
  {extra}
]
"#
        )
    }

    #[test]
    fn vehicle_concept_loads() {
        let o = load_source_ontology(VEHICLE, DocFormat::Toml).unwrap();
        let v = o.lookup_concept("Vehicle").unwrap();
        assert_eq!(v.kind, ConceptKind::InteractiveEntity);
        assert_eq!(v.properties.len(), 6);
        assert_eq!(
            v.instances,
            vec!["Bus", "Minibus", "Motorcycle", "PassengerCar", "Truck"]
        );
        assert_eq!(
            v.categories_of("PerspectiveShape"),
            BTreeSet::from([PropertyCategory::ReflectionAreaRelated])
        );
    }

    #[test]
    fn rainfall_concept_loads_with_density_in_two_categories() {
        let o = load_source_ontology(&rainfall(""), DocFormat::Toml).unwrap();
        let r = o.lookup_concept("Rainfall").unwrap();
        assert_eq!(r.categories_of("Density").len(), 2);
        assert_eq!(r.property_names(), vec!["Composition", "Density", "ParticleSize"]);
    }

    #[test]
    fn rainfall_with_data_generation_property_is_rejected() {
        let doc = rainfall(r#"{ name = "Velocity", category = "DataGenerationRelated" },"#);
        let err = load_source_ontology(&doc, DocFormat::Toml).unwrap_err();
        assert_eq!(err.code, ErrorCode::IllegalCategoryForKind);
        assert!(err.position.is_some());
    }

    #[test]
    fn each_defect_has_its_own_code() {
        let base = |body: &str| format!("schema_version = \"{SOURCE_ONTOLOGY_VERSION}\"\n{body}");
        let cases = [
            (
                "[[concepts]]\nname = \"A\"\nkind = \"Alien\"\n",
                ErrorCode::UnknownKind,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\nproperties = [{ name = \"X\", category = \"Smell\" }]\n",
                ErrorCode::UnknownCategory,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\nparent = \"Ghost\"\n",
                ErrorCode::DanglingParent,
            ),
            (
                "[[concepts]]\nname = \"Sensor\"\nkind = \"InteractiveEntity\"\n",
                ErrorCode::ReservedName,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\n[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\n",
                ErrorCode::DuplicateName,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\nparent = \"B\"\n[[concepts]]\nname = \"B\"\nkind = \"DisturbingEntity\"\n",
                ErrorCode::CrossKindParent,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\nparent = \"B\"\n[[concepts]]\nname = \"B\"\nkind = \"InteractiveEntity\"\nparent = \"A\"\n",
                ErrorCode::TaxonomyCycle,
            ),
            (
                "[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\ninstances = [\"x\", \"x\"]\n",
                ErrorCode::DuplicateInstance,
            ),
            ("[[concepts]]\nname = \"A\"\n", ErrorCode::SyntaxError),
        ];
        for (body, code) in cases {
            let err = load_source_ontology(&base(body), DocFormat::Toml).unwrap_err();
            assert_eq!(err.code, code, "{body}");
        }
        let err = load_source_ontology("schema_version = \"v0\"\n", DocFormat::Toml).unwrap_err();
        assert_eq!(err.code, ErrorCode::UnsupportedVersion);
    }

    #[test]
    fn report_collects_all_errors() {
        let doc = format!(
            "schema_version = \"{SOURCE_ONTOLOGY_VERSION}\"\n[[concepts]]\nname = \"A\"\nkind = \"InteractiveEntity\"\nparent = \"Ghost\"\n[[concepts]]\nname = \"B\"\nkind = \"InteractiveEntity\"\nparent = \"Phantom\"\n"
        );
        let errs = load_source_ontology_report(&doc, DocFormat::Toml).unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.code == ErrorCode::DanglingParent));
        assert_eq!(errs[0].position.unwrap().line, 5);
    }

    #[test]
    fn empty_ontology_serializes_to_canonical_empty_document() {
        let o = SourceOntology::empty();
        let toml = serialize_source_ontology(&o, DocFormat::Toml);
        assert_eq!(
            toml,
            format!("schema_version = \"{SOURCE_ONTOLOGY_VERSION}\"\nconcepts = []\n")
        );
        assert_eq!(load_source_ontology(&toml, DocFormat::Toml).unwrap(), o);
        let json = serialize_source_ontology(&o, DocFormat::Json);
        assert_eq!(load_source_ontology(&json, DocFormat::Json).unwrap(), o);
    }

    #[test]
    fn vehicle_round_trips() {
        let o = load_source_ontology(VEHICLE, DocFormat::Toml).unwrap();
        for format in [DocFormat::Toml, DocFormat::Json] {
            let text = serialize_source_ontology(&o, format);
            assert_eq!(load_source_ontology(&text, format).unwrap(), o);
        }
    }

    #[test]
    fn lookup_missing_concept_is_absent() {
        let o = load_source_ontology(VEHICLE, DocFormat::Toml).unwrap();
        assert!(o.lookup_concept("Unicorn").is_none());
    }

    #[test]
    fn family_distance_walks_parents() {
        let o = SourceOntology::new(vec![
            SourceConcept::new("Obstacle", ConceptKind::InteractiveEntity),
            SourceConcept::new("RoadsideStructure", ConceptKind::InteractiveEntity).with_parent("Obstacle"),
            SourceConcept::new("TemporaryStructure", ConceptKind::InteractiveEntity)
                .with_parent("RoadsideStructure"),
        ])
        .unwrap();
        assert_eq!(o.family_distance("TemporaryStructure", "Obstacle"), Some(2));
        assert_eq!(o.family_distance("Obstacle", "Obstacle"), Some(0));
        assert_eq!(o.family_distance("Obstacle", "TemporaryStructure"), None);
        assert_eq!(o.roots().count(), 1);
    }

    #[test]
    fn zero_property_concept_is_valid() {
        let o = SourceOntology::new(vec![SourceConcept::new("TargetObject", ConceptKind::InteractiveEntity)]);
        assert!(o.is_ok());
    }
}
