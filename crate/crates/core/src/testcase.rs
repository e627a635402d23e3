//! Test cases: triggering conditions embedded in hazardous events, and the
//! verdict ledger for observed outcomes.

use std::collections::BTreeSet;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::generation::TriggeringCondition;
use crate::ontology::SourceOntology;
use crate::perception::VehicleSystem;

pub const HAZARDS_VERSION: &str = "trigcond.hazards/1";
pub const TESTCASES_VERSION: &str = "trigcond.testcases/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardousEvent {
    pub id: String,
    pub function: String,
    pub operational_situation: String,
    pub ego_status: String,
    pub unintended_behavior: String,
    /// Concept name of the target involved.
    pub target_class: String,
    /// Expected behavior; the negation of `unintended_behavior`.
    pub pass_criterion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HazardousEvents {
    pub schema_version: String,
    #[serde(default)]
    pub events: Vec<HazardousEvent>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvents {
    schema_version: String,
    #[serde(default)]
    events: Vec<HazardousEvent>,
}

pub fn load_hazardous_events(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> DataResult<HazardousEvents> {
    load_hazardous_events_report(text, format, ontology).map_err(|mut e| e.swap_remove(0))
}

pub fn load_hazardous_events_report(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> Result<HazardousEvents, Vec<DataError>> {
    let raw: RawEvents = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, HAZARDS_VERSION).map_err(|e| vec![e.locate_in(text)])?;
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for e in &raw.events {
        if !ids.insert(e.id.as_str()) {
            errors.push(DataError::new(ErrorCode::DuplicateName, format!("event `{}` defined twice", e.id)).about(e.id.clone()));
        }
        if ontology.lookup_concept(&e.target_class).is_none() {
            errors.push(
                DataError::new(ErrorCode::UnknownConcept, format!("target class `{}` is not a concept", e.target_class))
                    .about(e.target_class.clone()),
            );
        }
        for (field, value) in [
            ("unintended_behavior", &e.unintended_behavior),
            ("pass_criterion", &e.pass_criterion),
        ] {
            if value.trim().is_empty() {
                errors.push(
                    DataError::new(ErrorCode::EmptyField, format!("event `{}` has an empty {field}", e.id)).about(e.id.clone()),
                );
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors.into_iter().map(|e| e.locate_in(text)).collect());
    }
    let mut events = raw.events;
    events.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(HazardousEvents {
        schema_version: raw.schema_version,
        events,
    })
}

pub fn serialize_hazardous_events(events: &HazardousEvents, format: DocFormat) -> String {
    format::render(events, format)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub id: String,
    pub event: String,
    pub conditions: Vec<String>,
    pub sensor: String,
    pub scenario: String,
    pub pass_criterion: String,
    pub fail_criterion: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestSheet {
    pub schema_version: String,
    pub cases: Vec<TestCase>,
}

impl TestSheet {
    pub fn new(cases: Vec<TestCase>) -> Self {
        Self {
            schema_version: TESTCASES_VERSION.to_string(),
            cases,
        }
    }

    pub fn get(&self, id: &str) -> Option<&TestCase> {
        self.cases.iter().find(|c| c.id == id)
    }
}

pub fn load_test_sheet(text: &str, format: DocFormat) -> DataResult<TestSheet> {
    let sheet: TestSheet = format::parse(text, format)?;
    format::check_version(&sheet.schema_version, TESTCASES_VERSION)?;
    Ok(sheet)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComposePolicy {
    /// Compose conditions that carry no assessment.
    pub allow_unrated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum ComposeError {
    #[error("condition {condition} has no compatible hazardous event")]
    NoCompatibleEvent { condition: String },
    #[error("condition {condition} names sensor `{sensor}`, which the perception system does not declare")]
    UnknownSensor { condition: String, sensor: String },
    #[error("condition {0} is unrated and the policy requires ratings")]
    Unrated(String),
    #[error("unknown test case `{0}`")]
    UnknownTestCase(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Composition {
    pub cases: Vec<TestCase>,
    /// Per-condition, non-fatal.
    pub unmatched: Vec<ComposeError>,
}

impl Composition {
    pub fn count_for(&self, event: &str) -> usize {
        self.cases.iter().filter(|c| c.event == event).count()
    }
}

/// Target classes a condition bears on: its focal concept when that falls
/// under some event's target class, else the sensor's intended targets.
pub fn condition_targets(
    ontology: &SourceOntology,
    condition: &TriggeringCondition,
    system: &VehicleSystem,
    events: &[HazardousEvent],
) -> BTreeSet<String> {
    let focal = condition.focal();
    if events.iter().any(|e| ontology.in_family(focal, &e.target_class)) {
        return BTreeSet::from([focal.to_string()]);
    }
    system
        .sensor(&condition.sensor)
        .map(|s| s.target_names().into_iter().map(str::to_string).collect())
        .unwrap_or_default()
}

pub fn is_compatible(ontology: &SourceOntology, targets: &BTreeSet<String>, event: &HazardousEvent) -> bool {
    targets.iter().any(|t| ontology.in_family(t, &event.target_class))
}

pub fn scenario_text(event: &HazardousEvent, condition: &TriggeringCondition) -> String {
    format!(
        "{}; ego vehicle {}. Triggering condition: {}",
        event.operational_situation,
        lower_first(&event.ego_status),
        condition.description
    )
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

pub fn compose(
    ontology: &SourceOntology,
    conditions: &[TriggeringCondition],
    events: &[HazardousEvent],
    system: &VehicleSystem,
    policy: ComposePolicy,
) -> Result<Composition, ComposeError> {
    let mut out = Composition::default();
    for c in conditions {
        if system.sensor(&c.sensor).is_none() {
            return Err(ComposeError::UnknownSensor {
                condition: c.id.clone(),
                sensor: c.sensor.clone(),
            });
        }
        if c.assessment.is_none() && !policy.allow_unrated {
            return Err(ComposeError::Unrated(c.id.clone()));
        }
        let targets = condition_targets(ontology, c, system, events);
        let mut matched = false;
        for e in events.iter().filter(|e| is_compatible(ontology, &targets, e)) {
            matched = true;
            out.cases.push(TestCase {
                id: format!("{}/{}", e.id, c.id),
                event: e.id.clone(),
                conditions: vec![c.id.clone()],
                sensor: c.sensor.clone(),
                scenario: scenario_text(e, c),
                pass_criterion: e.pass_criterion.clone(),
                fail_criterion: e.unintended_behavior.clone(),
                priority: c.priority,
            });
        }
        if !matched {
            out.unmatched.push(ComposeError::NoCompatibleEvent {
                condition: c.id.clone(),
            });
        }
    }
    out.cases.sort_by(|a, b| {
        a.event
            .cmp(&b.event)
            .then_with(|| b.priority.cmp(&a.priority))
            .then_with(|| a.conditions.cmp(&b.conditions))
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Outcomes

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BehaviorClass {
    NearCollision,
    RiskyBehaviorWrongClassification,
    HesitantBehavior,
    UnintendedNoHazard,
    Nominal,
}

impl BehaviorClass {
    pub const ALL: [BehaviorClass; 5] = [
        BehaviorClass::NearCollision,
        BehaviorClass::RiskyBehaviorWrongClassification,
        BehaviorClass::HesitantBehavior,
        BehaviorClass::UnintendedNoHazard,
        BehaviorClass::Nominal,
    ];

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| format!("{b:?}") == s)
    }

    pub fn verdict(self) -> Verdict {
        match self {
            BehaviorClass::NearCollision | BehaviorClass::RiskyBehaviorWrongClassification => Verdict::Fail,
            BehaviorClass::HesitantBehavior | BehaviorClass::UnintendedNoHazard => Verdict::Marginal,
            BehaviorClass::Nominal => Verdict::Pass,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Marginal,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictEntry {
    pub case: String,
    pub behavior: BehaviorClass,
    pub verdict: Verdict,
    pub recorded_at: String,
}

pub fn outcome_record(case: &TestCase, behavior: BehaviorClass, at: DateTime<Utc>) -> VerdictEntry {
    VerdictEntry {
        case: case.id.clone(),
        behavior,
        verdict: behavior.verdict(),
        recorded_at: at.to_rfc3339_opts(SecondsFormat::Secs, true),
    }
}

/// Looks the case up in `sheet`, then appends the verdict to the ledger.
pub fn record_outcome(
    sheet: &TestSheet,
    case_id: &str,
    behavior: BehaviorClass,
    ledger: &Path,
) -> Result<VerdictEntry, RecordError> {
    let case = sheet
        .get(case_id)
        .ok_or_else(|| ComposeError::UnknownTestCase(case_id.to_string()))?;
    let entry = outcome_record(case, behavior, Utc::now());
    append_ledger(ledger, &entry)?;
    Ok(entry)
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("results ledger: {0}")]
    Io(#[from] std::io::Error),
    #[error("results ledger line {line}: {message}")]
    Corrupt { line: usize, message: String },
}

pub fn append_ledger(path: &Path, entry: &VerdictEntry) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let line = serde_json::to_string(entry).expect("verdict entries serialize");
    writeln!(file, "{line}")
}

/// Reads every ledger entry and checks that each case id resolves in `sheet`.
pub fn read_ledger(path: &Path, sheet: &TestSheet) -> Result<Vec<VerdictEntry>, RecordError> {
    let file = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: VerdictEntry = serde_json::from_str(&line).map_err(|e| RecordError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        if sheet.get(&entry.case).is_none() {
            return Err(ComposeError::UnknownTestCase(entry.case).into());
        }
        out.push(entry);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_table() {
        use BehaviorClass::*;
        let got: Vec<_> = BehaviorClass::ALL.iter().map(|b| b.verdict()).collect();
        assert_eq!(got, [Verdict::Fail, Verdict::Fail, Verdict::Marginal, Verdict::Marginal, Verdict::Pass]);
        assert_eq!(BehaviorClass::parse("HesitantBehavior"), Some(HesitantBehavior));
        assert_eq!(BehaviorClass::parse("Crash"), None);
    }

    fn case(id: &str) -> TestCase {
        TestCase {
            id: id.into(),
            event: "E".into(),
            conditions: vec!["TC-1".into()],
            sensor: "Camera".into(),
            scenario: String::new(),
            pass_criterion: String::new(),
            fail_criterion: String::new(),
            priority: None,
        }
    }

    #[test]
    fn ledger_appends_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.jsonl");
        let sheet = TestSheet::new(vec![case("E/TC-1")]);
        record_outcome(&sheet, "E/TC-1", BehaviorClass::Nominal, &path).unwrap();
        record_outcome(&sheet, "E/TC-1", BehaviorClass::NearCollision, &path).unwrap();
        let entries = read_ledger(&path, &sheet).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[1].verdict, Verdict::Fail);
        let err = record_outcome(&sheet, "nope", BehaviorClass::Nominal, &path).unwrap_err();
        assert!(matches!(err, RecordError::Compose(ComposeError::UnknownTestCase(_))));
        assert!(read_ledger(&path, &TestSheet::new(vec![])).is_err());
    }
}
