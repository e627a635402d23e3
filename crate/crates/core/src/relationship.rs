//! Relationships between triggering sources and the compatibility matrix that
//! says which relationship kinds may hold between which concepts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::ontology::{ConceptKind, PropertyCategory, SourceConcept, SourceOntology};

pub const COMPATIBILITY_VERSION: &str = "trigcond.compatibility/1";

/// Reserved partner name standing for the sensor itself (lens, window, shell).
pub const SENSOR: &str = "Sensor";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SpatialPosition {
    Overlay,
    Occlusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurfaceTreatment {
    Cover,
    Lighten,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RelationshipKind {
    SpatialPosition(SpatialPosition),
    SurfaceTreatment(SurfaceTreatment),
    Possess,
    CognitiveFeature,
}

impl RelationshipKind {
    pub const ALL: [RelationshipKind; 6] = [
        RelationshipKind::SpatialPosition(SpatialPosition::Overlay),
        RelationshipKind::SpatialPosition(SpatialPosition::Occlusion),
        RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover),
        RelationshipKind::SurfaceTreatment(SurfaceTreatment::Lighten),
        RelationshipKind::Possess,
        RelationshipKind::CognitiveFeature,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipKind::SpatialPosition(SpatialPosition::Overlay) => "SpatialPosition.Overlay",
            RelationshipKind::SpatialPosition(SpatialPosition::Occlusion) => "SpatialPosition.Occlusion",
            RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover) => "SurfaceTreatment.Cover",
            RelationshipKind::SurfaceTreatment(SurfaceTreatment::Lighten) => "SurfaceTreatment.Lighten",
            RelationshipKind::Possess => "Possess",
            RelationshipKind::CognitiveFeature => "CognitiveFeature",
        }
    }

    /// Predicate name used in catalog tables, e.g. `Occludedby(Pedestrian, Barrel)`.
    pub fn predicate(self) -> &'static str {
        match self {
            RelationshipKind::SpatialPosition(SpatialPosition::Overlay) => "Overlayedby",
            RelationshipKind::SpatialPosition(SpatialPosition::Occlusion) => "Occludedby",
            RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover) => "Coveredby",
            RelationshipKind::SurfaceTreatment(SurfaceTreatment::Lighten) => "Lightenedby",
            RelationshipKind::Possess => "Possess",
            RelationshipKind::CognitiveFeature => "Similarwith",
        }
    }

    /// Categories of the focal concept a relationship of this kind perturbs
    /// when the matrix does not override them.
    pub fn default_perturbed(self) -> BTreeSet<PropertyCategory> {
        use PropertyCategory::*;
        match self {
            RelationshipKind::SpatialPosition(_) => {
                BTreeSet::from([ReflectionAreaRelated, FeatureVariabilityRelated])
            }
            RelationshipKind::SurfaceTreatment(_) => BTreeSet::from([ReflectivityRelated]),
            RelationshipKind::Possess | RelationshipKind::CognitiveFeature => {
                BTreeSet::from([FeatureVariabilityRelated])
            }
        }
    }

    /// Kinds that alter the focal entity's recognition features.
    pub fn perturbs_features(self) -> bool {
        !matches!(self, RelationshipKind::SurfaceTreatment(_))
    }
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown relationship kind `{s}`"))
    }
}

impl TryFrom<String> for RelationshipKind {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<RelationshipKind> for String {
    fn from(k: RelationshipKind) -> Self {
        k.as_str().to_string()
    }
}

/// One side of a matrix entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ConceptPattern {
    Kind(ConceptKind),
    /// Matches the named concept and its taxonomy descendants.
    Concept(String),
    Sensor,
}

impl From<String> for ConceptPattern {
    fn from(s: String) -> Self {
        if s == SENSOR {
            ConceptPattern::Sensor
        } else if let Some(kind) = ConceptKind::parse(&s) {
            ConceptPattern::Kind(kind)
        } else {
            ConceptPattern::Concept(s)
        }
    }
}

impl From<ConceptPattern> for String {
    fn from(p: ConceptPattern) -> Self {
        p.to_string()
    }
}

impl fmt::Display for ConceptPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConceptPattern::Kind(k) => f.write_str(k.as_str()),
            ConceptPattern::Concept(n) => f.write_str(n),
            ConceptPattern::Sensor => f.write_str(SENSOR),
        }
    }
}

/// How closely a pattern matches: name patterns beat kind patterns, nearer
/// ancestors beat farther ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Specificity {
    named: bool,
    closeness: i64,
}

impl ConceptPattern {
    fn matches(&self, ontology: &SourceOntology, name: &str) -> Option<Specificity> {
        match self {
            ConceptPattern::Sensor => (name == SENSOR).then_some(Specificity {
                named: true,
                closeness: 0,
            }),
            _ if name == SENSOR => None,
            ConceptPattern::Kind(kind) => ontology
                .lookup_concept(name)
                .filter(|c| c.kind == *kind)
                .map(|_| Specificity {
                    named: false,
                    closeness: 0,
                }),
            ConceptPattern::Concept(family) => ontology.family_distance(name, family).map(|d| Specificity {
                named: true,
                closeness: -(d as i64),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub focal: ConceptPattern,
    pub partner: ConceptPattern,
    pub kinds: BTreeSet<RelationshipKind>,
    /// Per-kind override of the perturbed categories.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub perturbs: BTreeMap<RelationshipKind, BTreeSet<PropertyCategory>>,
    /// Provenance annotation.
    pub source: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityMatrix {
    pub schema_version: String,
    /// Overrides of the module-level default perturbation per kind.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub default_perturbs: BTreeMap<RelationshipKind, BTreeSet<PropertyCategory>>,
    pub entries: Vec<MatrixEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    schema_version: String,
    #[serde(default)]
    default_perturbs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    focal: String,
    partner: String,
    kinds: Vec<String>,
    #[serde(default)]
    perturbs: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    source: String,
    #[serde(default)]
    note: String,
}

impl CompatibilityMatrix {
    pub fn new(entries: Vec<MatrixEntry>) -> Self {
        let mut m = Self {
            schema_version: COMPATIBILITY_VERSION.to_string(),
            default_perturbs: BTreeMap::new(),
            entries,
        };
        m.canonicalize();
        m
    }

    fn canonicalize(&mut self) {
        self.entries
            .sort_by(|a, b| (&a.focal, &a.partner).cmp(&(&b.focal, &b.partner)));
    }

    fn best_entry(&self, ontology: &SourceOntology, focal: &str, partner: &str) -> Option<&MatrixEntry> {
        let mut best: Option<((u8, i64, Specificity), &MatrixEntry)> = None;
        for e in &self.entries {
            let (Some(f), Some(p)) = (e.focal.matches(ontology, focal), e.partner.matches(ontology, partner)) else {
                continue;
            };
            let score = (u8::from(f.named) + u8::from(p.named), f.closeness + p.closeness, f);
            // Entries are canonically sorted, so the first maximum wins ties.
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, e));
            }
        }
        best.map(|(_, e)| e)
    }

    fn perturbed_for(&self, entry: &MatrixEntry, kind: RelationshipKind) -> BTreeSet<PropertyCategory> {
        entry
            .perturbs
            .get(&kind)
            .or_else(|| self.default_perturbs.get(&kind))
            .cloned()
            .unwrap_or_else(|| kind.default_perturbed())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationshipInstance {
    pub kind: RelationshipKind,
    /// The perturbed entity at the centre of the relationship.
    pub focal: String,
    pub partner: String,
    pub perturbed: BTreeSet<PropertyCategory>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl RelationshipInstance {
    pub fn involves(&self, name: &str) -> bool {
        self.focal == name || self.partner == name
    }

    pub fn covers_sensor(&self) -> bool {
        self.kind == RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover) && self.partner == SENSOR
    }

    /// `SpatialPosition.Occlusion(TemporaryStructure)`
    pub fn signature(&self) -> String {
        format!("{}({})", self.kind, self.partner)
    }

    /// `Occludedby(Pedestrian, TemporaryStructure)`
    pub fn predicate_form(&self) -> String {
        format!("{}({}, {})", self.kind.predicate(), self.focal, self.partner)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RelationshipError {
    #[error("{kind} is not applicable between `{focal}` and `{partner}`")]
    IncompatiblePair {
        kind: RelationshipKind,
        focal: String,
        partner: String,
    },
    #[error("relation {relation} is not centred on `{focal}`")]
    MixedFocal { focal: String, relation: String },
    #[error("bundle of {size} relationships exceeds limit {limit}")]
    BundleTooLarge { size: usize, limit: usize },
}

/// Relationship kinds that may hold with `focal` at the centre and `partner`
/// (a concept name or [`SENSOR`]) on the other side.
pub fn applicable_relationships(
    ontology: &SourceOntology,
    focal: &SourceConcept,
    partner: &str,
    matrix: &CompatibilityMatrix,
) -> BTreeSet<RelationshipKind> {
    let Some(entry) = matrix.best_entry(ontology, &focal.name, partner) else {
        return BTreeSet::new();
    };
    let mut kinds = entry.kinds.clone();
    if focal.name == partner {
        kinds.retain(|k| *k == RelationshipKind::Possess);
    }
    kinds
}

pub fn instantiate_relationship(
    ontology: &SourceOntology,
    kind: RelationshipKind,
    focal: &SourceConcept,
    partner: &str,
    matrix: &CompatibilityMatrix,
) -> Result<RelationshipInstance, RelationshipError> {
    let incompatible = || RelationshipError::IncompatiblePair {
        kind,
        focal: focal.name.clone(),
        partner: partner.to_string(),
    };
    if !applicable_relationships(ontology, focal, partner, matrix).contains(&kind) {
        return Err(incompatible());
    }
    let entry = matrix.best_entry(ontology, &focal.name, partner).ok_or_else(incompatible)?;
    let mut perturbed = matrix.perturbed_for(entry, kind);
    perturbed.retain(|c| focal.kind.allows(*c));
    Ok(RelationshipInstance {
        kind,
        focal: focal.name.clone(),
        partner: partner.to_string(),
        perturbed,
        note: String::new(),
    })
}

/// Relations sharing one focal concept, deduplicated and canonically ordered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipBundle {
    pub focal: String,
    pub relations: Vec<RelationshipInstance>,
    pub perturbed: BTreeSet<PropertyCategory>,
}

impl RelationshipBundle {
    pub fn bare(focal: impl Into<String>) -> Self {
        Self {
            focal: focal.into(),
            relations: Vec::new(),
            perturbed: BTreeSet::new(),
        }
    }

    pub fn is_bare(&self) -> bool {
        self.relations.is_empty()
    }

    /// Relation signatures joined with ` + `; empty for a bare bundle.
    pub fn signature(&self) -> String {
        self.relations
            .iter()
            .map(RelationshipInstance::signature)
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// Concept names involved, focal first; the sensor is not a source.
    pub fn sources(&self) -> Vec<String> {
        let mut out = vec![self.focal.clone()];
        let partners: BTreeSet<&str> = self
            .relations
            .iter()
            .map(|r| r.partner.as_str())
            .filter(|p| *p != SENSOR && *p != self.focal)
            .collect();
        out.extend(partners.into_iter().map(str::to_string));
        out
    }
}

pub fn compose_bundle(
    focal: &SourceConcept,
    relations: Vec<RelationshipInstance>,
    limit: usize,
) -> Result<RelationshipBundle, RelationshipError> {
    let mut unique: BTreeMap<(RelationshipKind, String), RelationshipInstance> = BTreeMap::new();
    for r in relations {
        if r.focal != focal.name {
            return Err(RelationshipError::MixedFocal {
                focal: focal.name.clone(),
                relation: r.predicate_form(),
            });
        }
        unique.entry((r.kind, r.partner.clone())).or_insert(r);
    }
    if unique.len() > limit {
        return Err(RelationshipError::BundleTooLarge {
            size: unique.len(),
            limit,
        });
    }
    let relations: Vec<_> = unique.into_values().collect();
    let perturbed = relations.iter().flat_map(|r| r.perturbed.iter().copied()).collect();
    Ok(RelationshipBundle {
        focal: focal.name.clone(),
        relations,
        perturbed,
    })
}

// ---------------------------------------------------------------------------
// Loading

fn parse_categories(
    values: &[String],
    errors: &mut Vec<DataError>,
) -> BTreeSet<PropertyCategory> {
    values
        .iter()
        .filter_map(|v| {
            let c = PropertyCategory::parse(v);
            if c.is_none() {
                errors.push(
                    DataError::new(ErrorCode::UnknownCategory, format!("unknown category `{v}`")).about(v.clone()),
                );
            }
            c
        })
        .collect()
}

fn parse_kind(value: &str, errors: &mut Vec<DataError>) -> Option<RelationshipKind> {
    match value.parse() {
        Ok(k) => Some(k),
        Err(msg) => {
            errors.push(DataError::new(ErrorCode::UnknownRelationshipKind, msg).about(value.to_string()));
            None
        }
    }
}

fn parse_perturbs(
    raw: BTreeMap<String, Vec<String>>,
    errors: &mut Vec<DataError>,
) -> BTreeMap<RelationshipKind, BTreeSet<PropertyCategory>> {
    raw.into_iter()
        .filter_map(|(k, v)| parse_kind(&k, errors).map(|kind| (kind, parse_categories(&v, errors))))
        .collect()
}

pub fn load_compatibility_matrix(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> DataResult<CompatibilityMatrix> {
    load_compatibility_matrix_report(text, format, ontology).map_err(|mut e| e.swap_remove(0))
}

pub fn load_compatibility_matrix_report(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> Result<CompatibilityMatrix, Vec<DataError>> {
    let raw: RawMatrix = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, COMPATIBILITY_VERSION)
        .map_err(|e| vec![e.locate_in(text)])?;
    let mut errors = Vec::new();
    let default_perturbs = parse_perturbs(raw.default_perturbs, &mut errors);
    let mut entries = Vec::new();
    let mut keys = BTreeSet::new();
    for re in raw.entries {
        let focal = ConceptPattern::from(re.focal.clone());
        let partner = ConceptPattern::from(re.partner.clone());
        let kinds: BTreeSet<_> = re.kinds.iter().filter_map(|k| parse_kind(k, &mut errors)).collect();
        let perturbs = parse_perturbs(re.perturbs, &mut errors);

        for (side, pattern) in [("focal", &focal), ("partner", &partner)] {
            if let ConceptPattern::Concept(name) = pattern {
                if ontology.lookup_concept(name).is_none() {
                    errors.push(
                        DataError::new(ErrorCode::UnknownConcept, format!("{side} pattern `{name}` is not a concept"))
                            .about(name.clone()),
                    );
                }
            }
        }
        if focal == ConceptPattern::Sensor {
            errors.push(
                DataError::new(ErrorCode::NonInteractiveFocal, "the sensor cannot be a focal concept")
                    .about(re.focal.clone()),
            );
        }
        if partner == ConceptPattern::Sensor
            && kinds
                .iter()
                .any(|k| *k != RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover))
        {
            errors.push(
                DataError::new(
                    ErrorCode::UnknownRelationshipKind,
                    format!("only {} may target the sensor", RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover)),
                )
                .about(re.focal.clone()),
            );
        }
        let focal_can_be_interactive = match &focal {
            ConceptPattern::Kind(k) => *k == ConceptKind::InteractiveEntity,
            ConceptPattern::Concept(n) => ontology
                .lookup_concept(n)
                .is_none_or(|c| c.kind == ConceptKind::InteractiveEntity),
            ConceptPattern::Sensor => true,
        };
        if !focal_can_be_interactive && kinds.iter().any(|k| k.perturbs_features()) {
            errors.push(
                DataError::new(
                    ErrorCode::NonInteractiveFocal,
                    format!("entry ({focal}, {partner}) perturbs recognition features but its focal side cannot be an interactive entity"),
                )
                .about(re.focal.clone()),
            );
        }
        for k in perturbs.keys() {
            if !kinds.contains(k) {
                errors.push(
                    DataError::new(
                        ErrorCode::UnknownRelationshipKind,
                        format!("entry ({focal}, {partner}) overrides {k}, which it does not permit"),
                    )
                    .about(re.focal.clone()),
                );
            }
        }
        if re.source.trim().is_empty() {
            errors.push(
                DataError::new(ErrorCode::EmptyField, format!("entry ({focal}, {partner}) lacks a source annotation"))
                    .about(re.focal.clone()),
            );
        }
        if !keys.insert((focal.clone(), partner.clone())) {
            errors.push(
                DataError::new(ErrorCode::DuplicateEntry, format!("entry ({focal}, {partner}) repeated"))
                    .about(re.focal.clone()),
            );
        }
        entries.push(MatrixEntry {
            focal,
            partner,
            kinds,
            perturbs,
            source: re.source,
            note: re.note,
        });
    }
    if !errors.is_empty() {
        return Err(errors.into_iter().map(|e| e.locate_in(text)).collect());
    }
    let mut m = CompatibilityMatrix {
        schema_version: raw.schema_version,
        default_perturbs,
        entries,
    };
    m.canonicalize();
    Ok(m)
}

pub fn serialize_compatibility_matrix(matrix: &CompatibilityMatrix, format: DocFormat) -> String {
    format::render(matrix, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ConceptKind::*;
    use PropertyCategory::*;

    const OCCLUSION: RelationshipKind = RelationshipKind::SpatialPosition(SpatialPosition::Occlusion);
    const COVER: RelationshipKind = RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover);
    const LIGHTEN: RelationshipKind = RelationshipKind::SurfaceTreatment(SurfaceTreatment::Lighten);

    fn ontology() -> SourceOntology {
        SourceOntology::new(vec![
            SourceConcept::new("TargetObject", InteractiveEntity),
            SourceConcept::new("Pedestrian", InteractiveEntity)
                .with_parent("TargetObject")
                .with_property("Accessory", FeatureVariabilityRelated),
            SourceConcept::new("Vehicle", InteractiveEntity).with_parent("TargetObject"),
            SourceConcept::new("Obstacle", InteractiveEntity),
            SourceConcept::new("MovableObstacle", InteractiveEntity).with_parent("Obstacle"),
            SourceConcept::new("RoadsideStructure", InteractiveEntity).with_parent("Obstacle"),
            SourceConcept::new("TemporaryStructure", InteractiveEntity).with_parent("RoadsideStructure"),
            SourceConcept::new("RoadSurface", InteractiveEntity),
            SourceConcept::new("Rainfall", EnvironmentalModification),
            SourceConcept::new("NaturalLight", EnvironmentalModification),
            SourceConcept::new("ArtificialLight", EnvironmentalModification),
            SourceConcept::new("Litter", DisturbingEntity),
        ])
        .unwrap()
    }

    fn entry(focal: &str, partner: &str, kinds: &[RelationshipKind]) -> MatrixEntry {
        MatrixEntry {
            focal: focal.to_string().into(),
            partner: partner.to_string().into(),
            kinds: kinds.iter().copied().collect(),
            perturbs: BTreeMap::new(),
            source: "test".into(),
            note: String::new(),
        }
    }

    fn matrix() -> CompatibilityMatrix {
        CompatibilityMatrix::new(vec![
            entry("InteractiveEntity", "DisturbingEntity", &[OCCLUSION]),
            entry("InteractiveEntity", "EnvironmentalModification", &[COVER, LIGHTEN]),
            entry("InteractiveEntity", "ArtificialLight", &[LIGHTEN]),
            entry("TargetObject", "Obstacle", &[OCCLUSION, RelationshipKind::CognitiveFeature]),
            entry("Rainfall", SENSOR, &[COVER]),
        ])
    }

    fn concept<'a>(o: &'a SourceOntology, name: &str) -> &'a SourceConcept {
        o.lookup_concept(name).unwrap()
    }

    #[test]
    fn family_patterns_cover_descendants() {
        let o = ontology();
        let m = matrix();
        let kinds = applicable_relationships(&o, concept(&o, "Pedestrian"), "TemporaryStructure", &m);
        assert!(kinds.contains(&OCCLUSION));
        let kinds = applicable_relationships(&o, concept(&o, "Pedestrian"), "MovableObstacle", &m);
        assert!(kinds.contains(&RelationshipKind::CognitiveFeature));
        let kinds = applicable_relationships(&o, concept(&o, "RoadSurface"), "Rainfall", &m);
        assert!(kinds.contains(&COVER));
    }

    #[test]
    fn name_patterns_shadow_kind_patterns() {
        let o = ontology();
        let m = matrix();
        let kinds = applicable_relationships(&o, concept(&o, "Vehicle"), "ArtificialLight", &m);
        assert_eq!(kinds, BTreeSet::from([LIGHTEN]));
        for _ in 0..3 {
            assert_eq!(applicable_relationships(&o, concept(&o, "Vehicle"), "ArtificialLight", &m), kinds);
        }
    }

    #[test]
    fn unknown_pairs_yield_empty_set() {
        let o = ontology();
        let m = matrix();
        assert!(applicable_relationships(&o, concept(&o, "Litter"), "Pedestrian", &m).is_empty());
        assert!(applicable_relationships(&o, concept(&o, "Pedestrian"), SENSOR, &m).is_empty());
        assert_eq!(
            applicable_relationships(&o, concept(&o, "Rainfall"), SENSOR, &m),
            BTreeSet::from([COVER])
        );
    }

    #[test]
    fn instantiate_uses_default_perturbation() {
        let o = ontology();
        let m = matrix();
        let occl = instantiate_relationship(&o, OCCLUSION, concept(&o, "Pedestrian"), "TemporaryStructure", &m).unwrap();
        assert_eq!(occl.perturbed, BTreeSet::from([ReflectionAreaRelated, FeatureVariabilityRelated]));
        assert_eq!(occl.predicate_form(), "Occludedby(Pedestrian, TemporaryStructure)");
        let cover = instantiate_relationship(&o, COVER, concept(&o, "RoadSurface"), "Rainfall", &m).unwrap();
        assert_eq!(cover.perturbed, BTreeSet::from([ReflectivityRelated]));
    }

    #[test]
    fn instantiate_rejects_forbidden_pair() {
        let o = ontology();
        let m = matrix();
        let err = instantiate_relationship(
            &o,
            RelationshipKind::Possess,
            concept(&o, "Vehicle"),
            "ArtificialLight",
            &m,
        )
        .unwrap_err();
        assert!(matches!(err, RelationshipError::IncompatiblePair { .. }));
    }

    #[test]
    fn perturbation_override_is_honoured_and_clipped_to_kind() {
        let o = ontology();
        let mut e = entry("RoadSurface", "DisturbingEntity", &[OCCLUSION]);
        e.perturbs.insert(OCCLUSION, BTreeSet::from([ReflectivityRelated, TransmittanceRelated]));
        let m = CompatibilityMatrix::new(vec![e]);
        let r = instantiate_relationship(&o, OCCLUSION, concept(&o, "RoadSurface"), "Litter", &m).unwrap();
        assert_eq!(r.perturbed, BTreeSet::from([ReflectivityRelated]));
    }

    #[test]
    fn self_relation_only_for_possess() {
        let o = ontology();
        let m = CompatibilityMatrix::new(vec![entry(
            "InteractiveEntity",
            "InteractiveEntity",
            &[OCCLUSION, RelationshipKind::Possess],
        )]);
        let kinds = applicable_relationships(&o, concept(&o, "Vehicle"), "Vehicle", &m);
        assert_eq!(kinds, BTreeSet::from([RelationshipKind::Possess]));
    }

    #[test]
    fn bundle_unions_and_deduplicates() {
        let o = ontology();
        let m = matrix();
        let road = concept(&o, "RoadSurface");
        let cover = instantiate_relationship(&o, COVER, road, "Rainfall", &m).unwrap();
        let lighten = instantiate_relationship(&o, LIGHTEN, road, "NaturalLight", &m).unwrap();
        let b = compose_bundle(road, vec![lighten.clone(), cover.clone(), cover.clone()], 2).unwrap();
        assert_eq!(b.relations, vec![cover, lighten]);
        assert_eq!(b.perturbed, BTreeSet::from([ReflectivityRelated]));
        assert_eq!(b.sources(), vec!["RoadSurface", "NaturalLight", "Rainfall"]);
    }

    #[test]
    fn empty_bundle_is_bare() {
        let o = ontology();
        let b = compose_bundle(concept(&o, "Pedestrian"), vec![], 2).unwrap();
        assert!(b.is_bare());
        assert!(b.perturbed.is_empty());
        assert_eq!(b.signature(), "");
    }

    #[test]
    fn bundle_errors() {
        let o = ontology();
        let m = matrix();
        let road = concept(&o, "RoadSurface");
        let cover = instantiate_relationship(&o, COVER, road, "Rainfall", &m).unwrap();
        let lighten = instantiate_relationship(&o, LIGHTEN, road, "NaturalLight", &m).unwrap();
        assert!(matches!(
            compose_bundle(concept(&o, "Pedestrian"), vec![cover.clone()], 2),
            Err(RelationshipError::MixedFocal { .. })
        ));
        assert_eq!(
            compose_bundle(road, vec![cover, lighten], 1),
            Err(RelationshipError::BundleTooLarge { size: 2, limit: 1 })
        );
    }

    #[test]
    fn kind_strings_round_trip() {
        for k in RelationshipKind::ALL {
            assert_eq!(k.as_str().parse::<RelationshipKind>().unwrap(), k);
        }
        assert!("Teleport".parse::<RelationshipKind>().is_err());
    }

    #[test]
    fn loader_validates_entries() {
        let o = ontology();
        let doc = |body: &str| format!("schema_version = \"{COMPATIBILITY_VERSION}\"\n{body}");
        let ok = doc(
            "[[entries]]\nfocal = \"TargetObject\"\npartner = \"Obstacle\"\nkinds = [\"SpatialPosition.Occlusion\"]\nsource = \"x\"\n",
        );
        let m = load_compatibility_matrix(&ok, DocFormat::Toml, &o).unwrap();
        assert_eq!(m.entries.len(), 1);
        let text = serialize_compatibility_matrix(&m, DocFormat::Toml);
        assert_eq!(load_compatibility_matrix(&text, DocFormat::Toml, &o).unwrap(), m);

        let cases = [
            ("[[entries]]\nfocal = \"Ghost\"\npartner = \"Obstacle\"\nkinds = [\"Possess\"]\nsource = \"x\"\n", ErrorCode::UnknownConcept),
            ("[[entries]]\nfocal = \"Litter\"\npartner = \"Obstacle\"\nkinds = [\"Possess\"]\nsource = \"x\"\n", ErrorCode::NonInteractiveFocal),
            ("[[entries]]\nfocal = \"Pedestrian\"\npartner = \"Obstacle\"\nkinds = [\"Hug\"]\nsource = \"x\"\n", ErrorCode::UnknownRelationshipKind),
            ("[[entries]]\nfocal = \"Pedestrian\"\npartner = \"Obstacle\"\nkinds = [\"Possess\"]\n", ErrorCode::EmptyField),
            ("[[entries]]\nfocal = \"Rainfall\"\npartner = \"Sensor\"\nkinds = [\"SurfaceTreatment.Lighten\"]\nsource = \"x\"\n", ErrorCode::UnknownRelationshipKind),
        ];
        for (body, code) in cases {
            assert_eq!(load_compatibility_matrix(&doc(body), DocFormat::Toml, &o).unwrap_err().code, code, "{body}");
        }
    }
}
