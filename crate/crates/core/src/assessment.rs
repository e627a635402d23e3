//! Exposure/criticality rating and ranking of triggering conditions.
//!
//! Priority is E × C. Equal priorities are ordered by higher C, then higher E,
//! then id, which makes the order over the sixteen classes strict.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::generation::TriggeringCondition;
use crate::perception::Stage;

pub const RATINGS_VERSION: &str = "trigcond.ratings/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Exposure {
    E1,
    E2,
    E3,
    E4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criticality {
    C1,
    C2,
    C3,
    C4,
}

impl Exposure {
    pub const ALL: [Exposure; 4] = [Exposure::E1, Exposure::E2, Exposure::E3, Exposure::E4];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| format!("{e:?}") == s)
    }
}

impl Criticality {
    pub const ALL: [Criticality; 4] = [Criticality::C1, Criticality::C2, Criticality::C3, Criticality::C4];

    pub fn index(self) -> u8 {
        self as u8 + 1
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| format!("{c:?}") == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AssessmentClass {
    pub exposure: Exposure,
    pub criticality: Criticality,
}

impl AssessmentClass {
    pub fn new(exposure: Exposure, criticality: Criticality) -> Self {
        Self { exposure, criticality }
    }

    pub fn all() -> impl Iterator<Item = AssessmentClass> {
        Exposure::ALL
            .into_iter()
            .flat_map(|e| Criticality::ALL.into_iter().map(move |c| AssessmentClass::new(e, c)))
    }

    pub fn priority(self) -> u8 {
        self.exposure.index() * self.criticality.index()
    }

    /// Descending urgency: the more urgent class compares as `Less`.
    pub fn urgency_cmp(self, other: Self) -> Ordering {
        (other.priority(), other.criticality, other.exposure).cmp(&(self.priority(), self.criticality, self.exposure))
    }
}

impl fmt::Display for AssessmentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}/{:?}", self.exposure, self.criticality)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AssessmentError {
    #[error("condition {0} is already assessed; pass the reassess flag to overwrite")]
    AlreadyAssessed(String),
}

pub fn assess(
    mut condition: TriggeringCondition,
    rating: AssessmentClass,
    reassess: bool,
) -> Result<TriggeringCondition, AssessmentError> {
    if condition.assessment.is_some() && !reassess {
        return Err(AssessmentError::AlreadyAssessed(condition.id));
    }
    condition.assessment = Some(rating);
    condition.priority = Some(rating.priority());
    Ok(condition)
}

fn rank_cmp(a: &TriggeringCondition, b: &TriggeringCondition) -> Ordering {
    match (a.assessment, b.assessment) {
        (Some(x), Some(y)) => x.urgency_cmp(y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.id.cmp(&b.id))
}

/// Most urgent first; unrated conditions last, by id.
pub fn rank(mut conditions: Vec<TriggeringCondition>) -> Vec<TriggeringCondition> {
    conditions.sort_by(rank_cmp);
    conditions
}

// ---------------------------------------------------------------------------
// Ratings file

/// Rating applied to every condition the selector matches. Absent selector
/// fields match anything; the most specific matching rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor: Option<String>,
    /// Focal source concept.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub exposure: Exposure,
    pub criticality: Criticality,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl RatingRule {
    fn specificity(&self) -> u8 {
        // An id pins a single condition and outranks any combination of the rest.
        4 * u8::from(self.id.is_some())
            + u8::from(self.sensor.is_some())
            + u8::from(self.source.is_some())
            + u8::from(self.property.is_some())
            + u8::from(self.stage.is_some())
    }

    fn matches(&self, c: &TriggeringCondition) -> bool {
        self.id.as_deref().is_none_or(|v| v == c.id)
            && self.sensor.as_deref().is_none_or(|v| v == c.sensor)
            && self.source.as_deref().is_none_or(|v| v == c.focal())
            && self.property.as_deref().is_none_or(|v| v == c.property)
            && self.stage.is_none_or(|v| v == c.stage)
    }

    pub fn class(&self) -> AssessmentClass {
        AssessmentClass::new(self.exposure, self.criticality)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratings {
    pub schema_version: String,
    #[serde(default)]
    pub ratings: Vec<RatingRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRatings {
    schema_version: String,
    #[serde(default)]
    ratings: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    id: Option<String>,
    sensor: Option<String>,
    source: Option<String>,
    property: Option<String>,
    stage: Option<String>,
    exposure: String,
    criticality: String,
    #[serde(default)]
    note: String,
}

pub fn load_ratings(text: &str, format: DocFormat) -> DataResult<Ratings> {
    let raw: RawRatings = format::parse(text, format)?;
    format::check_version(&raw.schema_version, RATINGS_VERSION).map_err(|e| e.locate_in(text))?;
    let mut ratings = Vec::new();
    for r in raw.ratings {
        let invalid = |what: &str, v: &str| {
            DataError::new(ErrorCode::InvalidRating, format!("{what} `{v}` is not valid"))
                .about(v.to_string())
                .locate_in(text)
        };
        let exposure = Exposure::parse(&r.exposure).ok_or_else(|| invalid("exposure", &r.exposure))?;
        let criticality = Criticality::parse(&r.criticality).ok_or_else(|| invalid("criticality", &r.criticality))?;
        let stage = match r.stage {
            Some(s) => Some(Stage::parse(&s).ok_or_else(|| {
                DataError::new(ErrorCode::UnknownStage, format!("unknown stage `{s}`"))
                    .about(s.clone())
                    .locate_in(text)
            })?),
            None => None,
        };
        ratings.push(RatingRule {
            id: r.id,
            sensor: r.sensor,
            source: r.source,
            property: r.property,
            stage,
            exposure,
            criticality,
            note: r.note,
        });
    }
    Ok(Ratings {
        schema_version: raw.schema_version,
        ratings,
    })
}

pub fn serialize_ratings(ratings: &Ratings, format: DocFormat) -> String {
    format::render(ratings, format)
}

/// Rates every condition some rule matches. Equally specific rules that
/// disagree on a condition are reported as `AmbiguousRating`.
pub fn apply_ratings(
    conditions: Vec<TriggeringCondition>,
    ratings: &Ratings,
    reassess: bool,
) -> Result<Vec<TriggeringCondition>, Vec<DataError>> {
    let mut errors = Vec::new();
    let mut out = Vec::with_capacity(conditions.len());
    for c in conditions {
        let mut best: Option<(u8, AssessmentClass)> = None;
        let mut ambiguous = false;
        for rule in ratings.ratings.iter().filter(|r| r.matches(&c)) {
            let s = rule.specificity();
            match best {
                Some((bs, _)) if s < bs => {}
                Some((bs, class)) if s == bs => ambiguous |= class != rule.class(),
                _ => {
                    best = Some((s, rule.class()));
                    ambiguous = false;
                }
            }
        }
        if ambiguous {
            errors.push(
                DataError::new(
                    ErrorCode::AmbiguousRating,
                    format!("equally specific ratings disagree for condition {}", c.id),
                )
                .about(c.id.clone()),
            );
            out.push(c);
            continue;
        }
        match best {
            Some((_, class)) => match assess(c, class, reassess) {
                Ok(rated) => out.push(rated),
                Err(e) => {
                    let AssessmentError::AlreadyAssessed(id) = &e;
                    errors.push(DataError::new(ErrorCode::InvalidRating, e.to_string()).about(id.clone()));
                }
            },
            None => out.push(c),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn priority_extremes() {
        assert_eq!(AssessmentClass::new(Exposure::E4, Criticality::C4).priority(), 16);
        assert_eq!(AssessmentClass::new(Exposure::E1, Criticality::C1).priority(), 1);
        assert_eq!(AssessmentClass::new(Exposure::E2, Criticality::C3).priority(), 6);
    }

    #[test]
    fn c_major_tiebreak() {
        let a = AssessmentClass::new(Exposure::E2, Criticality::C3);
        let b = AssessmentClass::new(Exposure::E3, Criticality::C2);
        assert_eq!(a.urgency_cmp(b), Ordering::Less);
    }

    #[test]
    fn ratings_parse() {
        let text = format!(
            "schema_version = \"{RATINGS_VERSION}\"\n[[ratings]]\nsensor = \"Camera\"\nexposure = \"E3\"\ncriticality = \"C2\"\n"
        );
        let r = load_ratings(&text, DocFormat::Toml).unwrap();
        assert_eq!(r.ratings[0].class(), AssessmentClass::new(Exposure::E3, Criticality::C2));
        assert_eq!(load_ratings(&serialize_ratings(&r, DocFormat::Json), DocFormat::Json).unwrap(), r);
        let bad = text.replace("E3", "E9");
        assert_eq!(load_ratings(&bad, DocFormat::Toml).unwrap_err().code, ErrorCode::InvalidRating);
    }
}
