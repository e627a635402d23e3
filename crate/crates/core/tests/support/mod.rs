//! Seeded random inputs and independent brute-force oracles shared by the
//! integration and acceptance suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use trigcond::effects::{EffectDegree, EffectEntry, EffectsKb};
use trigcond::generation::condition_id;
use trigcond::ontology::{ConceptKind, PropertyCategory, SourceConcept, SourceOntology};
use trigcond::perception::{
    PerceptionSystemSpec, SensorClass, Stage, StageRules, VehicleSystem, SYSTEM_SPEC_VERSION,
};
use trigcond::relationship::{
    CompatibilityMatrix, ConceptPattern, MatrixEntry, RelationshipInstance, RelationshipKind,
    SurfaceTreatment, SENSOR,
};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn read_data(name: &str) -> String {
    std::fs::read_to_string(data_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

const PROPERTY_NAMES: [&str; 7] = [
    "SurfaceMaterial",
    "Color",
    "PerspectiveShape",
    "Accessory",
    "Density",
    "Composition",
    "LightAngle",
];

const OBSTRUCTION_FAMILY: &str = "C0";

pub struct World {
    pub ontology: SourceOntology,
    pub matrix: CompatibilityMatrix,
    pub system: VehicleSystem,
    pub effects: EffectsKb,
}

pub fn random_ontology(rng: &mut ChaCha8Rng, max_concepts: usize) -> SourceOntology {
    let n = rng.gen_range(1..=max_concepts);
    let mut concepts: Vec<SourceConcept> = Vec::new();
    for i in 0..n {
        let kind = *ConceptKind::ALL.choose(rng).unwrap();
        let mut c = SourceConcept::new(format!("C{i}"), kind);
        let same_kind: Vec<&SourceConcept> = concepts.iter().filter(|p| p.kind == kind).collect();
        if !same_kind.is_empty() && rng.gen_bool(0.4) {
            c = c.with_parent(same_kind.choose(rng).unwrap().name.clone());
        }
        let allowed = kind.allowed_categories();
        let mut names = PROPERTY_NAMES.to_vec();
        names.shuffle(rng);
        for name in names.into_iter().take(rng.gen_range(0..=3)) {
            c = c.with_property(name, *allowed.choose(rng).unwrap());
        }
        if rng.gen_bool(0.3) {
            c = c.with_instance(format!("instance-{i}"));
        }
        concepts.push(c);
    }
    concepts.shuffle(rng);
    SourceOntology::new(concepts).expect("generated ontologies are valid")
}

fn random_kinds(rng: &mut ChaCha8Rng, pool: &[RelationshipKind]) -> BTreeSet<RelationshipKind> {
    pool.iter().copied().filter(|_| rng.gen_bool(0.5)).collect()
}

/// Kind-level matrix: one entry per (focal kind, partner kind) and per
/// (kind, sensor), each with a random subset of relationship kinds.
pub fn random_matrix(rng: &mut ChaCha8Rng) -> CompatibilityMatrix {
    let mut entries = Vec::new();
    for focal in ConceptKind::ALL {
        for partner in ConceptKind::ALL {
            let kinds = random_kinds(rng, &RelationshipKind::ALL);
            if kinds.is_empty() {
                continue;
            }
            let mut perturbs = BTreeMap::new();
            for k in &kinds {
                if rng.gen_bool(0.2) {
                    let cats: BTreeSet<PropertyCategory> =
                        PropertyCategory::ALL.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
                    perturbs.insert(*k, cats);
                }
            }
            entries.push(MatrixEntry {
                focal: ConceptPattern::Kind(focal),
                partner: ConceptPattern::Kind(partner),
                kinds,
                perturbs,
                source: "random".into(),
                note: String::new(),
            });
        }
        if rng.gen_bool(0.5) {
            entries.push(MatrixEntry {
                focal: ConceptPattern::Kind(focal),
                partner: ConceptPattern::Sensor,
                kinds: BTreeSet::from([RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover)]),
                perturbs: BTreeMap::new(),
                source: "random".into(),
                note: String::new(),
            });
        }
    }
    entries.shuffle(rng);
    CompatibilityMatrix::new(entries)
}

/// Sensors may declare any stages, applicable to their class or not, so
/// stage-rule cross contamination would be visible.
pub fn random_sensor(rng: &mut ChaCha8Rng, name: &str) -> PerceptionSystemSpec {
    let class = if rng.gen_bool(0.5) {
        SensorClass::ActivePerception
    } else {
        SensorClass::PassivePerception
    };
    let mut stages: Vec<Stage> = Stage::ALL.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
    if stages.is_empty() {
        stages.push(*Stage::ALL.choose(rng).unwrap());
    }
    PerceptionSystemSpec {
        sensor: name.to_string(),
        class,
        working_principle: String::new(),
        stages,
        intended_functionality: Vec::new(),
        odd: Vec::new(),
    }
}

pub fn random_system(rng: &mut ChaCha8Rng) -> VehicleSystem {
    let n = rng.gen_range(1..=2);
    VehicleSystem {
        schema_version: SYSTEM_SPEC_VERSION.to_string(),
        vehicle: "random".into(),
        functions: Vec::new(),
        stage_rules: StageRules {
            obstruction_families: vec![OBSTRUCTION_FAMILY.to_string()],
        },
        sensors: (0..n).map(|i| random_sensor(rng, &format!("S{i}"))).collect(),
    }
}

pub fn random_effects(rng: &mut ChaCha8Rng, ontology: &SourceOntology) -> EffectsKb {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for c in ontology.concepts() {
        for p in c.property_names() {
            for stage in Stage::ALL {
                for &q in stage.quality_properties() {
                    if !rng.gen_bool(0.25) || !seen.insert((c.name.clone(), p.to_string(), stage, q)) {
                        continue;
                    }
                    let degree = loop {
                        let v = rng.gen_range(-3i8..=3);
                        if v != 0 {
                            break EffectDegree::new(v).unwrap();
                        }
                    };
                    entries.push(EffectEntry {
                        source: c.name.clone(),
                        property: p.to_string(),
                        stage,
                        stage_property: q,
                        degree,
                        principle: "random principle".into(),
                        worst_case: String::new(),
                        provenance: String::new(),
                    });
                }
            }
        }
    }
    entries.shuffle(rng);
    EffectsKb::new(entries, ontology).expect("generated effects are valid")
}

pub fn random_world(rng: &mut ChaCha8Rng, max_concepts: usize) -> World {
    let ontology = random_ontology(rng, max_concepts);
    let matrix = random_matrix(rng);
    let system = random_system(rng);
    let effects = random_effects(rng, &ontology);
    World {
        ontology,
        matrix,
        system,
        effects,
    }
}

// ---------------------------------------------------------------------------
// Oracles. Written from the rule statements, sharing no code with the
// library beyond data types and the id hash.

fn categories_perturbed(kind: RelationshipKind) -> BTreeSet<PropertyCategory> {
    use PropertyCategory::*;
    match kind {
        RelationshipKind::SpatialPosition(_) => [ReflectionAreaRelated, FeatureVariabilityRelated].into(),
        RelationshipKind::SurfaceTreatment(_) => [ReflectivityRelated].into(),
        RelationshipKind::Possess | RelationshipKind::CognitiveFeature => [FeatureVariabilityRelated].into(),
    }
}

fn kind_allows(kind: ConceptKind, cat: PropertyCategory) -> bool {
    use PropertyCategory::*;
    match kind {
        ConceptKind::EnvironmentalModification => matches!(cat, ReflectivityRelated | TransmittanceRelated),
        _ => cat != TransmittanceRelated,
    }
}

/// Relations of every kind the kind-level matrix permits between `focal` and a partner.
pub fn oracle_instances(w: &World, focal: &SourceConcept) -> Vec<RelationshipInstance> {
    let mut partners: Vec<(String, ConceptPattern)> = w
        .ontology
        .concepts()
        .iter()
        .filter(|c| !c.properties.is_empty())
        .map(|c| (c.name.clone(), ConceptPattern::Kind(c.kind)))
        .collect();
    partners.push((SENSOR.to_string(), ConceptPattern::Sensor));
    let mut out = Vec::new();
    for (name, pattern) in partners {
        let Some(entry) = w
            .matrix
            .entries
            .iter()
            .find(|e| e.focal == ConceptPattern::Kind(focal.kind) && e.partner == pattern)
        else {
            continue;
        };
        for &kind in &entry.kinds {
            if name == focal.name && kind != RelationshipKind::Possess {
                continue;
            }
            let perturbed = entry
                .perturbs
                .get(&kind)
                .cloned()
                .unwrap_or_else(|| categories_perturbed(kind))
                .into_iter()
                .filter(|c| kind_allows(focal.kind, *c))
                .collect();
            out.push(RelationshipInstance {
                kind,
                focal: focal.name.clone(),
                partner: name.clone(),
                perturbed,
                note: String::new(),
            });
        }
    }
    out
}

fn is_ancestor_or_self(ontology: &SourceOntology, name: &str, family: &str) -> bool {
    let mut cur = ontology.lookup_concept(name);
    while let Some(c) = cur {
        if c.name == family {
            return true;
        }
        cur = c.parent.as_deref().and_then(|p| ontology.lookup_concept(p));
    }
    false
}

/// Affected stages, restated rule by rule.
pub fn oracle_stages(
    ontology: &SourceOntology,
    rules: &StageRules,
    source: &SourceConcept,
    relations: &[RelationshipInstance],
    sensor: &PerceptionSystemSpec,
) -> BTreeSet<Stage> {
    let active = sensor.class == SensorClass::ActivePerception;
    let sensing = |a: &[Stage], p: &[Stage]| -> Vec<Stage> { if active { a.to_vec() } else { p.to_vec() } };
    let mut out = BTreeSet::new();
    let entity = source.kind != ConceptKind::EnvironmentalModification;
    if entity
        && source
            .properties
            .iter()
            .any(|p| p.category == PropertyCategory::ReflectionAreaRelated)
    {
        out.extend(sensing(&[Stage::SignalReflection], &[Stage::LightReceiving]));
    }
    if source.kind == ConceptKind::EnvironmentalModification {
        out.extend(sensing(&[Stage::SignalPropagation], &[Stage::LightReceiving]));
    }
    let covered = relations.iter().any(|r| {
        r.kind == RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover)
            && (r.partner == SENSOR || r.focal == SENSOR)
            && (r.partner == source.name || r.focal == source.name)
    });
    let obstructs = source.kind == ConceptKind::DisturbingEntity
        && rules
            .obstruction_families
            .iter()
            .any(|f| is_ancestor_or_self(ontology, &source.name, f));
    if covered || obstructs {
        out.extend(sensing(
            &[Stage::SignalTransmission, Stage::SignalReceiving],
            &[Stage::LightReceiving],
        ));
    }
    let interactive_focal = source.kind == ConceptKind::InteractiveEntity
        || relations.iter().any(|r| {
            (r.focal == source.name || r.partner == source.name)
                && ontology
                    .lookup_concept(&r.focal)
                    .is_some_and(|f| f.kind == ConceptKind::InteractiveEntity)
        });
    if interactive_focal {
        out.extend([
            Stage::FeatureExtraction,
            Stage::SemanticSegmentation,
            Stage::TargetClassification,
            Stage::TargetTracking,
        ]);
    }
    out.retain(|s| sensor.stages.contains(s));
    out
}

/// Subsets of `items` of size at most `limit` (limit ≤ 2), by exhaustive index loops.
fn small_subsets<T: Clone>(items: &[T], limit: usize) -> Vec<Vec<T>> {
    assert!(limit <= 2, "oracle enumerates bundles of at most two relations");
    let mut out = vec![Vec::new()];
    if limit >= 1 {
        for i in 0..items.len() {
            out.push(vec![items[i].clone()]);
            if limit >= 2 {
                for j in i + 1..items.len() {
                    out.push(vec![items[i].clone(), items[j].clone()]);
                }
            }
        }
    }
    out
}

fn is_sensing(stage: Stage) -> bool {
    matches!(
        stage,
        Stage::SignalTransmission
            | Stage::SignalPropagation
            | Stage::SignalReflection
            | Stage::SignalReceiving
            | Stage::LightReceiving
    )
}

/// Condition ids the generator must produce when no description template
/// applies (one wording per group).
pub fn oracle_condition_ids(w: &World, threshold: u8, limit: usize) -> BTreeSet<String> {
    let bound = -(threshold as i8);
    let mut ids = BTreeSet::new();
    for sensor in &w.system.sensors {
        for focal in w.ontology.concepts().iter().filter(|c| !c.properties.is_empty()) {
            let instances = oracle_instances(w, focal);
            for relations in small_subsets(&instances, limit) {
                let stages = oracle_stages(&w.ontology, &w.system.stage_rules, focal, &relations, sensor);
                let mut rows: BTreeSet<(String, String)> =
                    focal.properties.iter().map(|p| (focal.name.clone(), p.name.clone())).collect();
                for r in relations.iter().filter(|r| r.partner != SENSOR) {
                    let partner = w.ontology.lookup_concept(&r.partner).unwrap();
                    for p in partner.properties.iter().filter(|p| r.perturbed.contains(&p.category)) {
                        rows.insert((partner.name.clone(), p.name.clone()));
                    }
                }
                let mut sources = vec![focal.name.clone()];
                let partners: BTreeSet<String> = relations
                    .iter()
                    .map(|r| r.partner.clone())
                    .filter(|p| p != SENSOR && *p != focal.name)
                    .collect();
                sources.extend(partners);
                for (owner, property) in &rows {
                    for &stage in &stages {
                        let adverse = w.effects.entries().iter().any(|e| {
                            e.source == *owner
                                && e.property == *property
                                && e.stage == stage
                                && stage.quality_properties().contains(&e.stage_property)
                                && e.degree.value() <= bound
                        });
                        if !adverse {
                            continue;
                        }
                        ids.insert(condition_id(&sensor.sensor, &sources, &relations, owner, property, stage, false, 0));
                        if is_sensing(stage) {
                            ids.insert(condition_id(&sensor.sensor, &sources, &relations, owner, property, stage, true, 0));
                        }
                    }
                }
            }
        }
    }
    ids
}
