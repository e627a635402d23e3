//! Perception-stage ontology, the error propagation chain, and the rules that
//! decide which stages a triggering source can reach.
//!
//! The stage ontology is closed: sensing and recognition sub-stages and their
//! quality properties are fixed enums so the rule set can be checked
//! exhaustively.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::ontology::{ConceptKind, PropertyCategory, SourceConcept, SourceOntology};
use crate::relationship::{RelationshipInstance, RelationshipKind, SurfaceTreatment, SENSOR};

pub const SYSTEM_SPEC_VERSION: &str = "trigcond.system/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensorClass {
    ActivePerception,
    PassivePerception,
}

impl SensorClass {
    pub const ALL: [SensorClass; 2] = [SensorClass::ActivePerception, SensorClass::PassivePerception];

    pub fn as_str(self) -> &'static str {
        match self {
            SensorClass::ActivePerception => "ActivePerception",
            SensorClass::PassivePerception => "PassivePerception",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StagePhase {
    Sensing,
    Recognition,
}

/// Quality property of a perception stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StageProperty {
    SignalIntensity,
    SignalAmount,
    SignalNoise,
    Brightness,
    Contrast,
    Purity,
    Variety,
    Similarity,
    Contradiction,
    Visibility,
}

impl StageProperty {
    pub const ALL: [StageProperty; 10] = [
        StageProperty::SignalIntensity,
        StageProperty::SignalAmount,
        StageProperty::SignalNoise,
        StageProperty::Brightness,
        StageProperty::Contrast,
        StageProperty::Purity,
        StageProperty::Variety,
        StageProperty::Similarity,
        StageProperty::Contradiction,
        StageProperty::Visibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StageProperty::SignalIntensity => "SignalIntensity",
            StageProperty::SignalAmount => "SignalAmount",
            StageProperty::SignalNoise => "SignalNoise",
            StageProperty::Brightness => "Brightness",
            StageProperty::Contrast => "Contrast",
            StageProperty::Purity => "Purity",
            StageProperty::Variety => "Variety",
            StageProperty::Similarity => "Similarity",
            StageProperty::Contradiction => "Contradiction",
            StageProperty::Visibility => "Visibility",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

impl fmt::Display for StageProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const ACTIVE_SENSING_QUALITY: [StageProperty; 3] = [
    StageProperty::SignalIntensity,
    StageProperty::SignalAmount,
    StageProperty::SignalNoise,
];
const PASSIVE_SENSING_QUALITY: [StageProperty; 3] =
    [StageProperty::Brightness, StageProperty::Contrast, StageProperty::Purity];
const RECOGNITION_QUALITY: [StageProperty; 4] = [
    StageProperty::Variety,
    StageProperty::Similarity,
    StageProperty::Contradiction,
    StageProperty::Visibility,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    SignalTransmission,
    SignalPropagation,
    SignalReflection,
    SignalReceiving,
    LightReceiving,
    FeatureExtraction,
    SemanticSegmentation,
    TargetClassification,
    TargetTracking,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::SignalTransmission,
        Stage::SignalPropagation,
        Stage::SignalReflection,
        Stage::SignalReceiving,
        Stage::LightReceiving,
        Stage::FeatureExtraction,
        Stage::SemanticSegmentation,
        Stage::TargetClassification,
        Stage::TargetTracking,
    ];

    pub const RECOGNITION: [Stage; 4] = [
        Stage::FeatureExtraction,
        Stage::SemanticSegmentation,
        Stage::TargetClassification,
        Stage::TargetTracking,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::SignalTransmission => "SignalTransmission",
            Stage::SignalPropagation => "SignalPropagation",
            Stage::SignalReflection => "SignalReflection",
            Stage::SignalReceiving => "SignalReceiving",
            Stage::LightReceiving => "LightReceiving",
            Stage::FeatureExtraction => "FeatureExtraction",
            Stage::SemanticSegmentation => "SemanticSegmentation",
            Stage::TargetClassification => "TargetClassification",
            Stage::TargetTracking => "TargetTracking",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.as_str() == s)
    }

    pub fn phase(self) -> StagePhase {
        if Self::RECOGNITION.contains(&self) {
            StagePhase::Recognition
        } else {
            StagePhase::Sensing
        }
    }

    pub fn is_sensing(self) -> bool {
        self.phase() == StagePhase::Sensing
    }

    pub fn applies_to(self, class: SensorClass) -> bool {
        match self {
            Stage::SignalTransmission
            | Stage::SignalPropagation
            | Stage::SignalReflection
            | Stage::SignalReceiving => class == SensorClass::ActivePerception,
            Stage::LightReceiving => class == SensorClass::PassivePerception,
            _ => true,
        }
    }

    pub fn quality_properties(self) -> &'static [StageProperty] {
        match self {
            Stage::SignalTransmission
            | Stage::SignalPropagation
            | Stage::SignalReflection
            | Stage::SignalReceiving => &ACTIVE_SENSING_QUALITY,
            Stage::LightReceiving => &PASSIVE_SENSING_QUALITY,
            _ => &RECOGNITION_QUALITY,
        }
    }

    pub fn has_quality(self, property: StageProperty) -> bool {
        self.quality_properties().contains(&property)
    }

    /// "Signal reflection" style label.
    pub fn label(self) -> String {
        humanize(self.as_str())
    }

    pub fn describe(self) -> PerceptionStage {
        PerceptionStage {
            name: self,
            phase: self.phase(),
            classes: SensorClass::ALL.into_iter().filter(|c| self.applies_to(*c)).collect(),
            quality_properties: self.quality_properties().to_vec(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Descriptive view of one stage node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerceptionStage {
    pub name: Stage,
    pub phase: StagePhase,
    pub classes: BTreeSet<SensorClass>,
    pub quality_properties: Vec<StageProperty>,
}

/// Splits a CamelCase identifier into a sentence-case label.
pub fn humanize(ident: &str) -> String {
    let mut out = String::with_capacity(ident.len() + 4);
    for (i, ch) in ident.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push(' ');
            out.extend(ch.to_lowercase());
        } else {
            out.push(ch);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Propagation chain

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChainEvent {
    PhysicalInfluence,
    UnsatisfyingSignal,
    RawDataDegrading,
    FeatureMissing,
    RecognitionError,
}

impl ChainEvent {
    /// The full chain, root first.
    pub const CHAIN: [ChainEvent; 5] = [
        ChainEvent::PhysicalInfluence,
        ChainEvent::UnsatisfyingSignal,
        ChainEvent::RawDataDegrading,
        ChainEvent::FeatureMissing,
        ChainEvent::RecognitionError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChainEvent::PhysicalInfluence => "PhysicalInfluence",
            ChainEvent::UnsatisfyingSignal => "UnsatisfyingSignal",
            ChainEvent::RawDataDegrading => "RawDataDegrading",
            ChainEvent::FeatureMissing => "FeatureMissing",
            ChainEvent::RecognitionError => "RecognitionError",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::CHAIN.into_iter().find(|e| e.as_str() == s)
    }

    fn position(self) -> usize {
        Self::CHAIN.iter().position(|e| *e == self).expect("event in chain")
    }

    pub fn successor(self) -> Option<ChainEvent> {
        Self::CHAIN.get(self.position() + 1).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagationPattern {
    PhysicalConditionBased,
    TargetFeatureBased,
}

impl PropagationPattern {
    /// Canonical event chain of the pattern.
    pub fn chain(self) -> &'static [ChainEvent] {
        match self {
            PropagationPattern::PhysicalConditionBased => &ChainEvent::CHAIN,
            PropagationPattern::TargetFeatureBased => &ChainEvent::CHAIN[3..],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropagationTrace {
    pub events: Vec<ChainEvent>,
    pub pattern: PropagationPattern,
}

pub fn trace_event(root: ChainEvent) -> PropagationTrace {
    let start = root.position();
    let pattern = if start < 3 {
        PropagationPattern::PhysicalConditionBased
    } else {
        PropagationPattern::TargetFeatureBased
    };
    PropagationTrace {
        events: ChainEvent::CHAIN[start..].to_vec(),
        pattern,
    }
}

pub fn trace_propagation(root_event: &str) -> Result<PropagationTrace, PerceptionError> {
    ChainEvent::parse(root_event)
        .map(trace_event)
        .ok_or_else(|| PerceptionError::UnknownEvent(root_event.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PerceptionError {
    #[error("unknown chain event `{0}`")]
    UnknownEvent(String),
    #[error("sensor `{0}` declares no perception stages")]
    EmptySystemStages(String),
}

// ---------------------------------------------------------------------------
// System specification

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntendedFunction {
    /// Concept name of the perceived target.
    pub target: String,
    pub task: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceptionSystemSpec {
    pub sensor: String,
    pub class: SensorClass,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub working_principle: String,
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub intended_functionality: Vec<IntendedFunction>,
    #[serde(default)]
    pub odd: Vec<String>,
}

impl PerceptionSystemSpec {
    pub fn declares(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    pub fn target_names(&self) -> BTreeSet<&str> {
        self.intended_functionality.iter().map(|f| f.target.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleFunction {
    pub function: String,
    pub driving_task: String,
    pub operational_conditions: String,
}

/// Project-overridable inputs of the stage rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRules {
    /// Disturbing-entity families that obstruct a sensor without an explicit
    /// covering relation.
    pub obstruction_families: Vec<String>,
}

impl Default for StageRules {
    fn default() -> Self {
        Self {
            obstruction_families: vec!["FloatingObject".to_string()],
        }
    }
}

/// The vehicle-level perception system: one spec per sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VehicleSystem {
    pub schema_version: String,
    pub vehicle: String,
    #[serde(default)]
    pub functions: Vec<VehicleFunction>,
    #[serde(default)]
    pub stage_rules: StageRules,
    pub sensors: Vec<PerceptionSystemSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVehicleSystem {
    schema_version: String,
    vehicle: String,
    #[serde(default)]
    functions: Vec<VehicleFunction>,
    #[serde(default)]
    stage_rules: Option<StageRules>,
    #[serde(default)]
    sensors: Vec<RawSensor>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSensor {
    sensor: String,
    class: String,
    #[serde(default)]
    working_principle: String,
    #[serde(default)]
    stages: Vec<String>,
    #[serde(default)]
    intended_functionality: Vec<IntendedFunction>,
    #[serde(default)]
    odd: Vec<String>,
}

impl VehicleSystem {
    pub fn sensor(&self, name: &str) -> Option<&PerceptionSystemSpec> {
        self.sensors.iter().find(|s| s.sensor == name)
    }

    pub fn sensor_names(&self) -> Vec<&str> {
        self.sensors.iter().map(|s| s.sensor.as_str()).collect()
    }
}

pub fn load_vehicle_system(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> DataResult<VehicleSystem> {
    load_vehicle_system_report(text, format, ontology).map_err(|mut e| e.swap_remove(0))
}

pub fn load_vehicle_system_report(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> Result<VehicleSystem, Vec<DataError>> {
    let raw: RawVehicleSystem = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, SYSTEM_SPEC_VERSION)
        .map_err(|e| vec![e.locate_in(text)])?;
    let mut errors = Vec::new();
    let mut sensors = Vec::new();
    let mut names = BTreeSet::new();
    for rs in raw.sensors {
        if !names.insert(rs.sensor.clone()) {
            errors.push(
                DataError::new(ErrorCode::DuplicateName, format!("sensor `{}` declared twice", rs.sensor))
                    .about(rs.sensor.clone()),
            );
        }
        let Some(class) = SensorClass::parse(&rs.class) else {
            errors.push(
                DataError::new(
                    ErrorCode::UnknownSensorClass,
                    format!("sensor `{}` has unknown class `{}`", rs.sensor, rs.class),
                )
                .about(rs.class.clone()),
            );
            continue;
        };
        let mut stages = Vec::new();
        for s in &rs.stages {
            match Stage::parse(s) {
                None => errors.push(
                    DataError::new(ErrorCode::UnknownStage, format!("sensor `{}` declares unknown stage `{s}`", rs.sensor))
                        .about(s.clone()),
                ),
                Some(stage) if !stage.applies_to(class) => errors.push(
                    DataError::new(
                        ErrorCode::StageNotApplicable,
                        format!("stage {stage} does not apply to {} sensor `{}`", class.as_str(), rs.sensor),
                    )
                    .about(s.clone()),
                ),
                Some(stage) if stages.contains(&stage) => errors.push(
                    DataError::new(ErrorCode::DuplicateEntry, format!("stage {stage} repeated for `{}`", rs.sensor))
                        .about(s.clone()),
                ),
                Some(stage) => stages.push(stage),
            }
        }
        if rs.stages.is_empty() {
            errors.push(
                DataError::new(ErrorCode::EmptyField, format!("sensor `{}` declares no stages", rs.sensor))
                    .about(rs.sensor.clone()),
            );
        }
        for f in &rs.intended_functionality {
            if ontology.lookup_concept(&f.target).is_none() {
                errors.push(
                    DataError::new(
                        ErrorCode::UnknownConcept,
                        format!("intended functionality of `{}` targets unknown concept `{}`", rs.sensor, f.target),
                    )
                    .about(f.target.clone()),
                );
            }
        }
        stages.sort();
        sensors.push(PerceptionSystemSpec {
            sensor: rs.sensor,
            class,
            working_principle: rs.working_principle,
            stages,
            intended_functionality: rs.intended_functionality,
            odd: rs.odd,
        });
    }
    let stage_rules = raw.stage_rules.unwrap_or_default();
    for family in &stage_rules.obstruction_families {
        match ontology.lookup_concept(family) {
            None => errors.push(
                DataError::new(ErrorCode::UnknownConcept, format!("obstruction family `{family}` is not a concept"))
                    .about(family.clone()),
            ),
            Some(c) if c.kind != ConceptKind::DisturbingEntity => errors.push(
                DataError::new(
                    ErrorCode::IllegalCategoryForKind,
                    format!("obstruction family `{family}` must be a disturbing entity"),
                )
                .about(family.clone()),
            ),
            Some(_) => {}
        }
    }
    if !errors.is_empty() {
        return Err(errors.into_iter().map(|e| e.locate_in(text)).collect());
    }
    sensors.sort_by(|a, b| a.sensor.cmp(&b.sensor));
    Ok(VehicleSystem {
        schema_version: raw.schema_version,
        vehicle: raw.vehicle,
        functions: raw.functions,
        stage_rules,
        sensors,
    })
}

pub fn serialize_vehicle_system(system: &VehicleSystem, format: DocFormat) -> String {
    format::render(system, format)
}

// ---------------------------------------------------------------------------
// Stage rules

/// Stages of `system` that `source` can affect, given the relations it takes part in.
///
/// R1 reflective-area entities reach the reflection (active) or light-receiving
/// (passive) stage. R2 interactive entities reach every declared recognition
/// stage. R3 environmental modifications reach propagation / light receiving.
/// R4 sensor coverage or obstruction reaches transmission and receiving /
/// light receiving. R5 other sources reach recognition only through a relation
/// centred on an interactive entity.
pub fn affected_stages(
    ontology: &SourceOntology,
    rules: &StageRules,
    source: &SourceConcept,
    relations: &[RelationshipInstance],
    system: &PerceptionSystemSpec,
) -> Result<BTreeSet<Stage>, PerceptionError> {
    if system.stages.is_empty() {
        return Err(PerceptionError::EmptySystemStages(system.sensor.clone()));
    }
    let active = system.class == SensorClass::ActivePerception;
    let mut stages = BTreeSet::new();

    if source.kind.is_entity() && source.has_category(PropertyCategory::ReflectionAreaRelated) {
        stages.insert(if active { Stage::SignalReflection } else { Stage::LightReceiving });
    }
    if source.kind == ConceptKind::EnvironmentalModification {
        stages.insert(if active { Stage::SignalPropagation } else { Stage::LightReceiving });
    }

    let covers_sensor = relations.iter().any(|r| {
        r.kind == RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover)
            && r.involves(SENSOR)
            && r.involves(&source.name)
    });
    let obstructs = source.kind == ConceptKind::DisturbingEntity
        && rules
            .obstruction_families
            .iter()
            .any(|f| ontology.in_family(&source.name, f));
    if covers_sensor || obstructs {
        if active {
            stages.insert(Stage::SignalTransmission);
            stages.insert(Stage::SignalReceiving);
        } else {
            stages.insert(Stage::LightReceiving);
        }
    }

    let reaches_recognition = source.kind == ConceptKind::InteractiveEntity
        || relations.iter().any(|r| {
            r.involves(&source.name)
                && ontology
                    .lookup_concept(&r.focal)
                    .is_some_and(|f| f.kind == ConceptKind::InteractiveEntity)
        });
    if reaches_recognition {
        stages.extend(Stage::RECOGNITION);
    }

    stages.retain(|s| system.declares(*s));
    Ok(stages)
}

/// Stage labels grouped by phase, used by the `stages` report.
pub fn stage_table(system: &PerceptionSystemSpec) -> BTreeMap<StagePhase, Vec<Stage>> {
    let mut table: BTreeMap<StagePhase, Vec<Stage>> = BTreeMap::new();
    for s in &system.stages {
        table.entry(s.phase()).or_default().push(*s);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relationship::{RelationshipKind, SpatialPosition};

    fn ontology() -> SourceOntology {
        use ConceptKind::*;
        use PropertyCategory::*;
        SourceOntology::new(vec![
            SourceConcept::new("Pedestrian", InteractiveEntity)
                .with_property("PerspectiveShape", ReflectionAreaRelated),
            SourceConcept::new("MovableObstacle", InteractiveEntity)
                .with_property("SurfaceMaterial", ReflectivityRelated)
                .with_property("PerspectiveShape", ReflectionAreaRelated),
            SourceConcept::new("Rainfall", EnvironmentalModification)
                .with_property("Density", TransmittanceRelated),
            SourceConcept::new("FloatingObject", DisturbingEntity)
                .with_property("PerspectiveShape", ReflectionAreaRelated),
            SourceConcept::new("Leaf", DisturbingEntity)
                .with_parent("FloatingObject")
                .with_property("PerspectiveShape", ReflectionAreaRelated),
            SourceConcept::new("Litter", DisturbingEntity)
                .with_property("PerspectiveShape", ReflectionAreaRelated),
        ])
        .unwrap()
    }

    fn lidar() -> PerceptionSystemSpec {
        PerceptionSystemSpec {
            sensor: "LiDAR".into(),
            class: SensorClass::ActivePerception,
            working_principle: String::new(),
            stages: vec![
                Stage::SignalTransmission,
                Stage::SignalPropagation,
                Stage::SignalReflection,
                Stage::SignalReceiving,
            ],
            intended_functionality: vec![],
            odd: vec![],
        }
    }

    fn camera() -> PerceptionSystemSpec {
        PerceptionSystemSpec {
            sensor: "Camera".into(),
            class: SensorClass::PassivePerception,
            working_principle: String::new(),
            stages: vec![Stage::LightReceiving, Stage::FeatureExtraction, Stage::TargetClassification],
            intended_functionality: vec![],
            odd: vec![],
        }
    }

    fn relation(kind: RelationshipKind, focal: &str, partner: &str) -> RelationshipInstance {
        RelationshipInstance {
            kind,
            focal: focal.into(),
            partner: partner.into(),
            perturbed: BTreeSet::new(),
            note: String::new(),
        }
    }

    fn stages(source: &str, relations: &[RelationshipInstance], system: &PerceptionSystemSpec) -> BTreeSet<Stage> {
        let o = ontology();
        let c = o.lookup_concept(source).unwrap().clone();
        affected_stages(&o, &StageRules::default(), &c, relations, system).unwrap()
    }

    #[test]
    fn physical_influence_traces_full_chain() {
        let t = trace_propagation("PhysicalInfluence").unwrap();
        assert_eq!(t.events, ChainEvent::CHAIN.to_vec());
        assert_eq!(t.pattern, PropagationPattern::PhysicalConditionBased);
    }

    #[test]
    fn feature_missing_is_target_feature_based() {
        let t = trace_propagation("FeatureMissing").unwrap();
        assert_eq!(t.events, vec![ChainEvent::FeatureMissing, ChainEvent::RecognitionError]);
        assert_eq!(t.pattern, PropagationPattern::TargetFeatureBased);
        assert_eq!(t.events, PropagationPattern::TargetFeatureBased.chain());
    }

    #[test]
    fn recognition_error_is_its_own_suffix() {
        let t = trace_propagation("RecognitionError").unwrap();
        assert_eq!(t.events, vec![ChainEvent::RecognitionError]);
        assert_eq!(t.pattern, PropagationPattern::TargetFeatureBased);
    }

    #[test]
    fn unknown_event_is_rejected() {
        assert_eq!(
            trace_propagation("Meteor"),
            Err(PerceptionError::UnknownEvent("Meteor".into()))
        );
    }

    #[test]
    fn trace_suffix_concatenation_law() {
        for e in ChainEvent::CHAIN {
            let t = trace_event(e);
            assert_eq!(*t.events.last().unwrap(), ChainEvent::RecognitionError);
            match e.successor() {
                Some(next) => assert_eq!(t.events[1..], trace_event(next).events[..]),
                None => assert_eq!(t.events.len(), 1),
            }
        }
    }

    #[test]
    fn stage_ontology_is_closed() {
        let active: Vec<_> = Stage::ALL
            .into_iter()
            .filter(|s| s.is_sensing() && s.applies_to(SensorClass::ActivePerception))
            .collect();
        assert_eq!(
            active,
            vec![
                Stage::SignalTransmission,
                Stage::SignalPropagation,
                Stage::SignalReflection,
                Stage::SignalReceiving
            ]
        );
        let passive: Vec<_> = Stage::ALL
            .into_iter()
            .filter(|s| s.is_sensing() && s.applies_to(SensorClass::PassivePerception))
            .collect();
        assert_eq!(passive, vec![Stage::LightReceiving]);
        assert_eq!(
            Stage::LightReceiving.quality_properties(),
            &[StageProperty::Brightness, StageProperty::Contrast, StageProperty::Purity]
        );
        for s in Stage::RECOGNITION {
            assert!(s.applies_to(SensorClass::ActivePerception) && s.applies_to(SensorClass::PassivePerception));
            assert_eq!(s.quality_properties().len(), 4);
        }
        assert_eq!(Stage::SignalReflection.label(), "Signal reflection");
    }

    #[test]
    fn rain_without_relations_reaches_propagation() {
        assert_eq!(stages("Rainfall", &[], &lidar()), BTreeSet::from([Stage::SignalPropagation]));
    }

    #[test]
    fn rain_covering_sensor_adds_transmission_and_receiving() {
        let cover = relation(
            RelationshipKind::SurfaceTreatment(SurfaceTreatment::Cover),
            "Rainfall",
            SENSOR,
        );
        assert_eq!(
            stages("Rainfall", &[cover], &lidar()),
            BTreeSet::from([Stage::SignalTransmission, Stage::SignalPropagation, Stage::SignalReceiving])
        );
    }

    #[test]
    fn movable_obstacle_reaches_reflection_and_recognition() {
        let mut all = lidar();
        all.stages.extend(Stage::RECOGNITION);
        let expected: BTreeSet<Stage> = std::iter::once(Stage::SignalReflection)
            .chain(Stage::RECOGNITION)
            .collect();
        assert_eq!(stages("MovableObstacle", &[], &all), expected);
        // Declared stages bound the output.
        assert_eq!(stages("MovableObstacle", &[], &lidar()), BTreeSet::from([Stage::SignalReflection]));
    }

    #[test]
    fn floating_object_family_obstructs_sensor() {
        assert_eq!(
            stages("Leaf", &[], &lidar()),
            BTreeSet::from([Stage::SignalTransmission, Stage::SignalReflection, Stage::SignalReceiving])
        );
        assert_eq!(stages("Litter", &[], &lidar()), BTreeSet::from([Stage::SignalReflection]));
    }

    #[test]
    fn disturbing_entity_reaches_recognition_only_via_interactive_focal() {
        assert_eq!(stages("Litter", &[], &camera()), BTreeSet::from([Stage::LightReceiving]));
        let occl = relation(
            RelationshipKind::SpatialPosition(SpatialPosition::Occlusion),
            "Pedestrian",
            "Litter",
        );
        assert_eq!(
            stages("Litter", &[occl], &camera()),
            BTreeSet::from([Stage::LightReceiving, Stage::FeatureExtraction, Stage::TargetClassification])
        );
    }

    #[test]
    fn empty_system_is_an_error() {
        let o = ontology();
        let mut sys = camera();
        sys.stages.clear();
        let c = o.lookup_concept("Pedestrian").unwrap();
        assert_eq!(
            affected_stages(&o, &StageRules::default(), c, &[], &sys),
            Err(PerceptionError::EmptySystemStages("Camera".into()))
        );
    }
}
