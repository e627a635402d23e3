//! Generation matrices, the worst-case filter and condition synthesis.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assessment::AssessmentClass;
use crate::effects::{EffectEntry, EffectsKb};
use crate::ontology::{SourceConcept, SourceOntology};
use crate::perception::{
    affected_stages, PerceptionError, PerceptionSystemSpec, Stage, StageProperty, StageRules, VehicleSystem,
};
use crate::relationship::{
    applicable_relationships, compose_bundle, instantiate_relationship, CompatibilityMatrix, RelationshipBundle,
    RelationshipError, RelationshipInstance, SENSOR,
};
use crate::templates::{TemplateQuery, TemplateSet};

pub const CATALOG_VERSION: &str = "trigcond.catalog/1";
pub const DEFAULT_THRESHOLD: u8 = 2;
pub const DEFAULT_BUNDLE_LIMIT: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggeringCondition {
    pub id: String,
    pub sensor: String,
    /// Focal concept first, then partners.
    pub sources: Vec<String>,
    #[serde(default)]
    pub relationships: Vec<RelationshipInstance>,
    /// Concept owning `property`; differs from the focal concept for partner rows.
    pub property_owner: String,
    pub property: String,
    pub stage: Stage,
    pub effect: EffectEntry,
    pub description: String,
    pub distance_augmented: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<AssessmentClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u8>,
}

impl TriggeringCondition {
    pub fn focal(&self) -> &str {
        &self.sources[0]
    }

    pub fn relationship_signature(&self) -> String {
        self.relationships
            .iter()
            .map(RelationshipInstance::signature)
            .collect::<Vec<_>>()
            .join(" + ")
    }

    /// "Triggering sources" cell: relations in predicate form, or the bare source.
    pub fn sources_label(&self) -> String {
        if self.relationships.is_empty() {
            self.sources.join(", ")
        } else {
            self.relationships
                .iter()
                .map(RelationshipInstance::predicate_form)
                .collect::<Vec<_>>()
                .join("; ")
        }
    }

    /// Property name, owner-qualified for partner rows.
    pub fn property_label(&self) -> String {
        qualified(self.focal(), &self.property_owner, &self.property)
    }

    fn canonical_key(&self) -> (&str, &[String], String, &str, &str, Stage, bool, &str) {
        (
            &self.sensor,
            &self.sources,
            self.relationship_signature(),
            &self.property_owner,
            &self.property,
            self.stage,
            self.distance_augmented,
            &self.description,
        )
    }
}

fn qualified(focal: &str, owner: &str, property: &str) -> String {
    if owner == focal {
        property.to_string()
    } else {
        format!("{owner}.{property}")
    }
}

/// Stable id: `TC-` and 12 hex digits of a SHA-256 over the identifying fields.
#[allow(clippy::too_many_arguments)]
pub fn condition_id(
    sensor: &str,
    sources: &[String],
    relationships: &[RelationshipInstance],
    owner: &str,
    property: &str,
    stage: Stage,
    distance_augmented: bool,
    ordinal: usize,
) -> String {
    let mut relations: Vec<String> = relationships
        .iter()
        .map(|r| format!("{}|{}|{}", r.kind, r.focal, r.partner))
        .collect();
    relations.sort();
    let fields = [
        sensor.to_string(),
        sources.join(","),
        relations.join(","),
        owner.to_string(),
        property.to_string(),
        stage.as_str().to_string(),
        distance_augmented.to_string(),
        ordinal.to_string(),
    ];
    let digest = Sha256::digest(fields.join("\u{1f}").as_bytes());
    format!("TC-{}", &hex::encode(digest)[..12])
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("threshold {0} outside 1..=3")]
    InvalidThreshold(u8),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Relationship(#[from] RelationshipError),
    #[error("while generating for {sensor}/{focal}: {source}")]
    Context {
        sensor: String,
        focal: String,
        source: Box<GenerationError>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatrixRow {
    pub owner: String,
    pub property: String,
}

/// Cross table of source properties against the quality properties of the
/// affected stages. Every cell is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GenerationMatrix {
    pub sensor: String,
    pub bundle: RelationshipBundle,
    pub stages: BTreeSet<Stage>,
    pub rows: Vec<MatrixRow>,
    pub columns: Vec<(Stage, StageProperty)>,
    /// Row-major.
    pub cells: Vec<Vec<EffectEntry>>,
}

impl GenerationMatrix {
    pub fn cell(&self, owner: &str, property: &str, stage: Stage, stage_property: StageProperty) -> Option<&EffectEntry> {
        let r = self.rows.iter().position(|r| r.owner == owner && r.property == property)?;
        let c = self.columns.iter().position(|c| *c == (stage, stage_property))?;
        Some(&self.cells[r][c])
    }

    fn iter_cells(&self) -> impl Iterator<Item = &EffectEntry> {
        self.cells.iter().flatten()
    }
}

fn concept<'a>(ontology: &'a SourceOntology, name: &str) -> Result<&'a SourceConcept, GenerationError> {
    ontology
        .lookup_concept(name)
        .ok_or_else(|| GenerationError::UnknownConcept(name.to_string()))
}

/// Rows: the focal concept's properties plus, for each relation, the
/// partner's properties in that relation's perturbed categories.
pub fn matrix_rows(ontology: &SourceOntology, bundle: &RelationshipBundle) -> Result<Vec<MatrixRow>, GenerationError> {
    let focal = concept(ontology, &bundle.focal)?;
    let mut rows = BTreeSet::new();
    for p in &focal.properties {
        rows.insert(MatrixRow {
            owner: focal.name.clone(),
            property: p.name.clone(),
        });
    }
    for r in &bundle.relations {
        if r.partner == SENSOR {
            continue;
        }
        let partner = concept(ontology, &r.partner)?;
        for p in partner.properties.iter().filter(|p| r.perturbed.contains(&p.category)) {
            rows.insert(MatrixRow {
                owner: partner.name.clone(),
                property: p.name.clone(),
            });
        }
    }
    Ok(rows.into_iter().collect())
}

pub fn build_matrix(
    ontology: &SourceOntology,
    rules: &StageRules,
    bundle: &RelationshipBundle,
    system: &PerceptionSystemSpec,
    effects: &EffectsKb,
) -> Result<GenerationMatrix, GenerationError> {
    let focal = concept(ontology, &bundle.focal)?;
    let stages = affected_stages(ontology, rules, focal, &bundle.relations, system)?;
    let rows = matrix_rows(ontology, bundle)?;
    let columns: Vec<(Stage, StageProperty)> = stages
        .iter()
        .flat_map(|s| s.quality_properties().iter().map(move |q| (*s, *q)))
        .collect();
    let cells = rows
        .iter()
        .map(|row| {
            columns
                .iter()
                .map(|(s, q)| effects.cell(&row.owner, &row.property, *s, *q))
                .collect()
        })
        .collect();
    Ok(GenerationMatrix {
        sensor: system.sensor.clone(),
        bundle: bundle.clone(),
        stages,
        rows,
        columns,
        cells,
    })
}

pub fn check_threshold(threshold: u8) -> Result<u8, GenerationError> {
    if (1..=3).contains(&threshold) {
        Ok(threshold)
    } else {
        Err(GenerationError::InvalidThreshold(threshold))
    }
}

/// Cells with degree ≤ −threshold, row-major.
pub fn worst_case_filter(matrix: &GenerationMatrix, threshold: u8) -> Result<Vec<EffectEntry>, GenerationError> {
    let limit = -(check_threshold(threshold)? as i8);
    Ok(matrix
        .iter_cells()
        .filter(|c| c.degree.value() <= limit)
        .cloned()
        .collect())
}

/// Cells with a positive degree; reported as diagnostics only.
pub fn positive_cells(matrix: &GenerationMatrix) -> Vec<EffectEntry> {
    matrix.iter_cells().filter(|c| c.degree.value() > 0).cloned().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Synthesis {
    pub conditions: Vec<TriggeringCondition>,
    pub warnings: Vec<String>,
}

/// One condition per (owner, property, stage) group and template wording,
/// plus a distance-augmented companion for sensing stages.
pub fn synthesize_conditions(
    entries: &[EffectEntry],
    bundle: &RelationshipBundle,
    system: &PerceptionSystemSpec,
    templates: &TemplateSet,
) -> Synthesis {
    let mut groups: BTreeMap<(String, String, Stage), EffectEntry> = BTreeMap::new();
    for e in entries {
        let key = (e.source.clone(), e.property.clone(), e.stage);
        let replace = groups.get(&key).is_none_or(|cur| {
            (e.degree, e.stage_property.as_str()) < (cur.degree, cur.stage_property.as_str())
        });
        if replace {
            groups.insert(key, e.clone());
        }
    }

    let sources = bundle.sources();
    let signature = bundle.signature();
    let relations: Vec<String> = bundle.relations.iter().map(RelationshipInstance::predicate_form).collect();
    let mut out = Synthesis::default();
    for ((owner, property, stage), effect) in groups {
        let label = qualified(&bundle.focal, &owner, &property);
        let rendered = templates.render(&TemplateQuery {
            source: &bundle.focal,
            relationship: &signature,
            property: &label,
            stage,
            sensor: &system.sensor,
            relations: &relations,
        });
        if rendered.generic {
            out.warnings.push(format!(
                "no template for {} / {} / `{}` / {} / {}; generic wording used",
                system.sensor, bundle.focal, signature, label, stage
            ));
        }
        for (ordinal, wording) in rendered.wordings.iter().enumerate() {
            let variants: &[bool] = if stage.is_sensing() { &[false, true] } else { &[false] };
            for &distance in variants {
                let description = if distance {
                    templates.distance_variant(wording)
                } else {
                    wording.clone()
                };
                out.conditions.push(TriggeringCondition {
                    id: condition_id(
                        &system.sensor,
                        &sources,
                        &bundle.relations,
                        &owner,
                        &property,
                        stage,
                        distance,
                        ordinal,
                    ),
                    sensor: system.sensor.clone(),
                    sources: sources.clone(),
                    relationships: bundle.relations.clone(),
                    property_owner: owner.clone(),
                    property: property.clone(),
                    stage,
                    effect: effect.clone(),
                    description,
                    distance_augmented: distance,
                    assessment: None,
                    priority: None,
                });
            }
        }
    }
    out.conditions.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    out
}

/// Every bundle centred on `focal` with at most `limit` relations, the bare
/// bundle included. Partners are concepts with properties, plus the sensor.
pub fn enumerate_bundles(
    ontology: &SourceOntology,
    matrix: &CompatibilityMatrix,
    focal: &SourceConcept,
    limit: usize,
) -> Result<Vec<RelationshipBundle>, GenerationError> {
    let mut partners: Vec<&str> = ontology
        .concepts()
        .iter()
        .filter(|c| !c.properties.is_empty())
        .map(|c| c.name.as_str())
        .collect();
    partners.push(SENSOR);
    partners.sort();

    let mut instances = Vec::new();
    for partner in partners {
        for kind in applicable_relationships(ontology, focal, partner, matrix) {
            instances.push(instantiate_relationship(ontology, kind, focal, partner, matrix)?);
        }
    }

    let mut bundles = Vec::new();
    let mut chosen = Vec::new();
    collect_subsets(&instances, 0, limit, &mut chosen, &mut |subset| {
        bundles.push(subset.to_vec());
    });
    bundles
        .into_iter()
        .map(|relations| compose_bundle(focal, relations, limit).map_err(GenerationError::from))
        .collect()
}

fn collect_subsets(
    items: &[RelationshipInstance],
    start: usize,
    remaining: usize,
    chosen: &mut Vec<RelationshipInstance>,
    emit: &mut impl FnMut(&[RelationshipInstance]),
) {
    emit(chosen);
    if remaining == 0 {
        return;
    }
    for i in start..items.len() {
        chosen.push(items[i].clone());
        collect_subsets(items, i + 1, remaining - 1, chosen, emit);
        chosen.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub threshold: u8,
    pub bundle_limit: usize,
    /// Focal sources to analyse; empty means every concept with properties.
    #[serde(default)]
    pub focal_sources: Vec<String>,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            bundle_limit: DEFAULT_BUNDLE_LIMIT,
            focal_sources: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GenerationInputs<'a> {
    pub ontology: &'a SourceOntology,
    pub system: &'a VehicleSystem,
    pub matrix: &'a CompatibilityMatrix,
    pub effects: &'a EffectsKb,
    pub templates: &'a TemplateSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Catalog {
    pub schema_version: String,
    pub threshold: u8,
    pub bundle_limit: usize,
    pub total: usize,
    pub conditions: Vec<TriggeringCondition>,
}

impl Catalog {
    pub fn new(threshold: u8, bundle_limit: usize, conditions: Vec<TriggeringCondition>) -> Self {
        Self {
            schema_version: CATALOG_VERSION.to_string(),
            threshold,
            bundle_limit,
            total: conditions.len(),
            conditions,
        }
    }

    pub fn get(&self, id: &str) -> Option<&TriggeringCondition> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Beneficial cells met during generation; never turned into conditions.
    pub positive_cells: Vec<EffectEntry>,
    pub warnings: Vec<String>,
}

/// Focal concepts a run analyses: the configured list, or every concept with
/// properties. Zero-property concepts generate nothing and are skipped.
pub fn focal_concepts<'a>(
    ontology: &'a SourceOntology,
    params: &GenerationParams,
) -> Result<Vec<&'a SourceConcept>, GenerationError> {
    let mut out = Vec::new();
    if params.focal_sources.is_empty() {
        out.extend(ontology.concepts().iter().filter(|c| !c.properties.is_empty()));
    } else {
        let names: BTreeSet<&str> = params.focal_sources.iter().map(String::as_str).collect();
        for name in names {
            let c = concept(ontology, name)?;
            if !c.properties.is_empty() {
                out.push(c);
            }
        }
    }
    Ok(out)
}

pub fn generate_catalog(
    inputs: GenerationInputs<'_>,
    params: &GenerationParams,
) -> Result<(Catalog, Diagnostics), GenerationError> {
    check_threshold(params.threshold)?;
    let focals = focal_concepts(inputs.ontology, params)?;
    let rules = &inputs.system.stage_rules;
    let mut conditions = Vec::new();
    let mut positives = BTreeMap::new();
    let mut warnings = BTreeSet::new();
    for system in &inputs.system.sensors {
        for focal in &focals {
            let context = |e: GenerationError| GenerationError::Context {
                sensor: system.sensor.clone(),
                focal: focal.name.clone(),
                source: Box::new(e),
            };
            let bundles = enumerate_bundles(inputs.ontology, inputs.matrix, focal, params.bundle_limit).map_err(context)?;
            for bundle in bundles {
                let m = build_matrix(inputs.ontology, rules, &bundle, system, inputs.effects).map_err(context)?;
                for p in positive_cells(&m) {
                    positives.insert((p.source.clone(), p.property.clone(), p.stage, p.stage_property), p);
                }
                let kept = worst_case_filter(&m, params.threshold).map_err(context)?;
                let s = synthesize_conditions(&kept, &bundle, system, inputs.templates);
                conditions.extend(s.conditions);
                warnings.extend(s.warnings);
            }
        }
    }
    conditions.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));
    conditions.dedup_by(|a, b| a.id == b.id);
    let catalog = Catalog::new(params.threshold, params.bundle_limit, conditions);
    let diagnostics = Diagnostics {
        positive_cells: positives.into_values().collect(),
        warnings: warnings.into_iter().collect(),
    };
    Ok((catalog, diagnostics))
}

pub fn system_for<'a>(system: &'a VehicleSystem, sensor: &str) -> Result<&'a PerceptionSystemSpec, GenerationError> {
    system
        .sensor(sensor)
        .ok_or_else(|| GenerationError::UnknownSensor(sensor.to_string()))
}
