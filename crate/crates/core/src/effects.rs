//! Graded effects of source properties on stage quality properties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::ontology::SourceOntology;
use crate::perception::{Stage, StageProperty};

pub const EFFECTS_VERSION: &str = "trigcond.effects/1";

/// Principle recorded on matrix cells the knowledge base says nothing about.
pub const UNASSESSED: &str = "unassessed";

const MINUS: char = '\u{2212}';

/// Signed effect in −3..=3; 0 means no effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub struct EffectDegree(i8);

impl EffectDegree {
    pub const ZERO: EffectDegree = EffectDegree(0);

    pub fn new(value: i8) -> Option<Self> {
        (-3..=3).contains(&value).then_some(Self(value))
    }

    pub fn all() -> impl Iterator<Item = EffectDegree> {
        (-3..=3).map(EffectDegree)
    }

    pub fn value(self) -> i8 {
        self.0
    }

    pub fn is_adverse(self) -> bool {
        self.0 < 0
    }

    /// Figure-style marks: `− − −`, `+ +`, blank for zero.
    pub fn glyphs(self) -> String {
        self.marks(if self.0 < 0 { MINUS } else { '+' })
    }

    /// Same marks with ASCII hyphen-minus, for CSV.
    pub fn ascii(self) -> String {
        self.marks(if self.0 < 0 { '-' } else { '+' })
    }

    fn marks(self, mark: char) -> String {
        let n = self.0.unsigned_abs() as usize;
        let mut out = String::with_capacity(n * 4);
        for i in 0..n {
            if i > 0 {
                out.push(' ');
            }
            out.push(mark);
        }
        out
    }

    /// Accepts glyph or ASCII marks, with or without spaces, or a plain integer.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        if t.is_empty() {
            return Some(Self::ZERO);
        }
        if let Ok(v) = t.parse::<i8>() {
            return Self::new(v);
        }
        let marks: Vec<char> = t.chars().filter(|c| !c.is_whitespace()).collect();
        let n = i8::try_from(marks.len()).ok()?;
        if marks.iter().all(|c| *c == MINUS || *c == '-') {
            Self::new(-n)
        } else if marks.iter().all(|c| *c == '+') {
            Self::new(n)
        } else {
            None
        }
    }
}

impl TryFrom<i8> for EffectDegree {
    type Error = String;

    fn try_from(value: i8) -> Result<Self, Self::Error> {
        Self::new(value).ok_or_else(|| format!("effect degree {value} outside -3..=3"))
    }
}

impl From<EffectDegree> for i8 {
    fn from(d: EffectDegree) -> Self {
        d.0
    }
}

impl fmt::Display for EffectDegree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectEntry {
    /// Concept owning the property.
    pub source: String,
    pub property: String,
    pub stage: Stage,
    pub stage_property: StageProperty,
    pub degree: EffectDegree,
    pub principle: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub worst_case: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
}

impl EffectEntry {
    pub fn unassessed(source: &str, property: &str, stage: Stage, stage_property: StageProperty) -> Self {
        Self {
            source: source.to_string(),
            property: property.to_string(),
            stage,
            stage_property,
            degree: EffectDegree::ZERO,
            principle: UNASSESSED.to_string(),
            worst_case: String::new(),
            provenance: String::new(),
        }
    }

    fn key(&self) -> EffectKey {
        (
            self.source.clone(),
            self.property.clone(),
            self.stage,
            self.stage_property,
        )
    }
}

type EffectKey = (String, String, Stage, StageProperty);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EffectsKb {
    pub schema_version: String,
    entries: Vec<EffectEntry>,
    #[serde(skip)]
    index: BTreeMap<EffectKey, usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKb {
    schema_version: String,
    #[serde(default)]
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    source: String,
    property: String,
    stage: String,
    stage_property: String,
    degree: i64,
    #[serde(default)]
    principle: String,
    #[serde(default)]
    worst_case: String,
    #[serde(default)]
    provenance: String,
}

impl EffectsKb {
    pub fn new(entries: Vec<EffectEntry>, ontology: &SourceOntology) -> Result<Self, Vec<DataError>> {
        let mut errors = Vec::new();
        let mut seen = BTreeSet::new();
        for e in &entries {
            check_entry(e, ontology, &mut errors);
            if !seen.insert(e.key()) {
                errors.push(
                    DataError::new(
                        ErrorCode::DuplicateEntry,
                        format!(
                            "effect of {}.{} on {}.{} given twice",
                            e.source, e.property, e.stage, e.stage_property
                        ),
                    )
                    .about(e.source.clone()),
                );
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        Ok(Self::from_valid(entries))
    }

    fn from_valid(mut entries: Vec<EffectEntry>) -> Self {
        entries.sort_by_key(EffectEntry::key);
        let index = entries.iter().enumerate().map(|(i, e)| (e.key(), i)).collect();
        Self {
            schema_version: EFFECTS_VERSION.to_string(),
            entries,
            index,
        }
    }

    pub fn empty() -> Self {
        Self::from_valid(Vec::new())
    }

    pub fn entries(&self) -> &[EffectEntry] {
        &self.entries
    }

    pub fn lookup(
        &self,
        source: &str,
        property: &str,
        stage: Stage,
        stage_property: StageProperty,
    ) -> Option<&EffectEntry> {
        self.index
            .get(&(source.to_string(), property.to_string(), stage, stage_property))
            .map(|i| &self.entries[*i])
    }

    /// The knowledge-base cell, or a zero-degree "unassessed" placeholder.
    pub fn cell(&self, source: &str, property: &str, stage: Stage, stage_property: StageProperty) -> EffectEntry {
        self.lookup(source, property, stage, stage_property)
            .cloned()
            .unwrap_or_else(|| EffectEntry::unassessed(source, property, stage, stage_property))
    }
}

fn check_entry(e: &EffectEntry, ontology: &SourceOntology, errors: &mut Vec<DataError>) {
    match ontology.lookup_concept(&e.source) {
        None => errors.push(
            DataError::new(ErrorCode::UnknownConcept, format!("unknown concept `{}`", e.source)).about(e.source.clone()),
        ),
        Some(c) if !c.has_property(&e.property) => errors.push(
            DataError::new(
                ErrorCode::UnknownProperty,
                format!("`{}` has no property `{}`", e.source, e.property),
            )
            .about(e.property.clone()),
        ),
        Some(_) => {}
    }
    if !e.stage.has_quality(e.stage_property) {
        errors.push(
            DataError::new(
                ErrorCode::UnknownStageProperty,
                format!("{} is not a quality property of {}", e.stage_property, e.stage),
            )
            .about(e.stage_property.as_str()),
        );
    }
    if e.principle.trim().is_empty() {
        errors.push(
            DataError::new(
                ErrorCode::EmptyField,
                format!("effect of {}.{} on {} lacks a principle", e.source, e.property, e.stage),
            )
            .about(e.source.clone()),
        );
    }
}

pub fn load_effects(text: &str, format: DocFormat, ontology: &SourceOntology) -> DataResult<EffectsKb> {
    load_effects_report(text, format, ontology).map_err(|mut e| e.swap_remove(0))
}

pub fn load_effects_report(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> Result<EffectsKb, Vec<DataError>> {
    let raw: RawKb = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, EFFECTS_VERSION).map_err(|e| vec![e.locate_in(text)])?;
    let mut errors = Vec::new();
    let mut entries = Vec::new();
    for r in raw.entries {
        let stage = Stage::parse(&r.stage);
        let stage_property = StageProperty::parse(&r.stage_property);
        let degree = i8::try_from(r.degree).ok().and_then(EffectDegree::new);
        if stage.is_none() {
            errors.push(DataError::new(ErrorCode::UnknownStage, format!("unknown stage `{}`", r.stage)).about(r.stage.clone()));
        }
        if stage_property.is_none() {
            errors.push(
                DataError::new(ErrorCode::UnknownStageProperty, format!("unknown stage property `{}`", r.stage_property))
                    .about(r.stage_property.clone()),
            );
        }
        if degree.is_none() {
            errors.push(
                DataError::new(ErrorCode::InvalidDegree, format!("degree {} outside -3..=3", r.degree))
                    .about(r.property.clone()),
            );
        }
        if let (Some(stage), Some(stage_property), Some(degree)) = (stage, stage_property, degree) {
            entries.push(EffectEntry {
                source: r.source,
                property: r.property,
                stage,
                stage_property,
                degree,
                principle: r.principle,
                worst_case: r.worst_case,
                provenance: r.provenance,
            });
        }
    }
    let kb = EffectsKb::new(entries, ontology);
    match kb {
        Ok(kb) if errors.is_empty() => Ok(kb),
        Ok(_) => Err(errors.into_iter().map(|e| e.locate_in(text)).collect()),
        Err(more) => {
            errors.extend(more);
            Err(errors.into_iter().map(|e| e.locate_in(text)).collect())
        }
    }
}

pub fn serialize_effects(kb: &EffectsKb, format: DocFormat) -> String {
    format::render(kb, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{ConceptKind, PropertyCategory, SourceConcept};

    #[test]
    fn degree_rendering_is_a_bijection() {
        let glyphs: BTreeSet<String> = EffectDegree::all().map(EffectDegree::glyphs).collect();
        assert_eq!(glyphs.len(), 7);
        for d in EffectDegree::all() {
            assert_eq!(EffectDegree::parse(&d.glyphs()), Some(d));
            assert_eq!(EffectDegree::parse(&d.ascii()), Some(d));
        }
        assert_eq!(EffectDegree::new(-3).unwrap().glyphs(), "\u{2212} \u{2212} \u{2212}");
        assert_eq!(EffectDegree::new(-1).unwrap().glyphs(), "\u{2212}");
        assert_eq!(EffectDegree::new(2).unwrap().glyphs(), "+ +");
        assert_eq!(EffectDegree::ZERO.glyphs(), "");
        assert_eq!(EffectDegree::new(-2).unwrap().ascii(), "- -");
    }

    #[test]
    fn degree_range_enforced() {
        assert!(EffectDegree::new(4).is_none());
        assert!(EffectDegree::new(-4).is_none());
        assert!(EffectDegree::parse("- - - -").is_none());
        assert!(EffectDegree::parse("+-").is_none());
    }

    fn ontology() -> SourceOntology {
        SourceOntology::new(vec![SourceConcept::new("MovableObstacle", ConceptKind::InteractiveEntity)
            .with_property("SurfaceMaterial", PropertyCategory::ReflectivityRelated)])
        .unwrap()
    }

    fn doc(body: &str) -> String {
        format!("schema_version = \"{EFFECTS_VERSION}\"\n{body}")
    }

    const GOOD: &str = "[[entries]]\nsource = \"MovableObstacle\"\nproperty = \"SurfaceMaterial\"\nstage = \"SignalReflection\"\nstage_property = \"SignalIntensity\"\ndegree = -3\nprinciple = \"low reflectivity\"\n";

    #[test]
    fn load_and_lookup() {
        let kb = load_effects(&doc(GOOD), DocFormat::Toml, &ontology()).unwrap();
        let cell = kb.cell("MovableObstacle", "SurfaceMaterial", Stage::SignalReflection, StageProperty::SignalIntensity);
        assert_eq!(cell.degree.value(), -3);
        let missing = kb.cell("MovableObstacle", "SurfaceMaterial", Stage::SignalReflection, StageProperty::SignalNoise);
        assert_eq!(missing.degree, EffectDegree::ZERO);
        assert_eq!(missing.principle, UNASSESSED);
        for format in [DocFormat::Toml, DocFormat::Json] {
            let text = serialize_effects(&kb, format);
            assert_eq!(load_effects(&text, format, &ontology()).unwrap(), kb);
        }
    }

    #[test]
    fn validation_codes() {
        let o = ontology();
        let cases = [
            (GOOD.replace("MovableObstacle", "Ghost"), ErrorCode::UnknownConcept),
            (GOOD.replace("\"SurfaceMaterial\"", "\"Mood\""), ErrorCode::UnknownProperty),
            (GOOD.replace("SignalReflection", "Telepathy"), ErrorCode::UnknownStage),
            (GOOD.replace("SignalIntensity", "Brightness"), ErrorCode::UnknownStageProperty),
            (GOOD.replace("-3", "-5"), ErrorCode::InvalidDegree),
            (format!("{GOOD}{GOOD}"), ErrorCode::DuplicateEntry),
        ];
        for (body, code) in cases {
            assert_eq!(load_effects(&doc(&body), DocFormat::Toml, &o).unwrap_err().code, code);
        }
    }
}
