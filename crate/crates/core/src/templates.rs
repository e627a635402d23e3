//! Description templates for triggering conditions.
//!
//! A template is keyed on (source, relationship signature, property, stage).
//! An empty relationship matches only bare bundles and `*` matches any
//! bundle; property and stage may be omitted to match anything. The most
//! specific matching template wins.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{DataError, DataResult, ErrorCode};
use crate::format::{self, DocFormat};
use crate::ontology::SourceOntology;
use crate::perception::Stage;

pub const TEMPLATES_VERSION: &str = "trigcond.templates/1";

pub const ANY_RELATIONSHIP: &str = "*";

const DEFAULT_GENERIC: &str = "{source} with a worst-case {property} degrades {stage_label} of the {sensor}{relations}";
const DEFAULT_DISTANCE: &str = "{description}, with the target near the limit of the detection distance";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptionTemplate {
    pub source: String,
    #[serde(default)]
    pub relationship: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<Stage>,
    pub wordings: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
}

impl DescriptionTemplate {
    fn key(&self) -> (&str, &str, Option<&str>, Option<Stage>) {
        (&self.source, &self.relationship, self.property.as_deref(), self.stage)
    }

    fn specificity(&self) -> u8 {
        u8::from(self.relationship != ANY_RELATIONSHIP)
            + u8::from(self.property.is_some())
            + u8::from(self.stage.is_some())
    }

    fn matches(&self, q: &TemplateQuery<'_>) -> bool {
        self.source == q.source
            && (self.relationship == ANY_RELATIONSHIP || self.relationship == q.relationship)
            && self.property.as_deref().is_none_or(|p| p == q.property)
            && self.stage.is_none_or(|s| s == q.stage)
    }
}

/// What a condition needs from the template set.
#[derive(Debug, Clone, Copy)]
pub struct TemplateQuery<'a> {
    pub source: &'a str,
    /// Bundle signature; empty for a bare source.
    pub relationship: &'a str,
    pub property: &'a str,
    pub stage: Stage,
    pub sensor: &'a str,
    /// Predicate forms of the bundle relations, for the generic wording.
    pub relations: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateSet {
    pub schema_version: String,
    /// Fallback wording; placeholders `{source}`, `{property}`, `{stage}`,
    /// `{stage_label}`, `{sensor}`, `{relations}`.
    #[serde(default = "default_generic")]
    pub generic: String,
    /// Wording of distance-augmented variants; `{description}` is the base text.
    #[serde(default = "default_distance")]
    pub distance: String,
    #[serde(default)]
    pub templates: Vec<DescriptionTemplate>,
}

fn default_generic() -> String {
    DEFAULT_GENERIC.to_string()
}

fn default_distance() -> String {
    DEFAULT_DISTANCE.to_string()
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            schema_version: TEMPLATES_VERSION.to_string(),
            generic: default_generic(),
            distance: default_distance(),
            templates: Vec::new(),
        }
    }
}

/// Result of a template lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub wordings: Vec<String>,
    /// True when no template matched and the generic wording was used.
    pub generic: bool,
}

impl TemplateSet {
    pub fn new(templates: Vec<DescriptionTemplate>) -> Self {
        let mut set = Self {
            templates,
            ..Self::default()
        };
        set.canonicalize();
        set
    }

    fn canonicalize(&mut self) {
        for t in &mut self.templates {
            t.wordings.sort();
            t.wordings.dedup();
        }
        self.templates.sort_by(|a, b| a.key().cmp(&b.key()));
    }

    pub fn best(&self, q: &TemplateQuery<'_>) -> Option<&DescriptionTemplate> {
        // First maximum in canonical order.
        let mut best: Option<&DescriptionTemplate> = None;
        for t in self.templates.iter().filter(|t| t.matches(q)) {
            if best.is_none_or(|b| t.specificity() > b.specificity()) {
                best = Some(t);
            }
        }
        best
    }

    pub fn render(&self, q: &TemplateQuery<'_>) -> Rendered {
        match self.best(q) {
            Some(t) => Rendered {
                wordings: t.wordings.clone(),
                generic: false,
            },
            None => {
                let relations = if q.relations.is_empty() {
                    String::new()
                } else {
                    format!(" when {}", q.relations.join(" and "))
                };
                let property = match q.property.split_once('.') {
                    Some((owner, prop)) => format!("{} {}", crate::perception::humanize(owner), crate::perception::humanize(prop)),
                    None => crate::perception::humanize(q.property),
                };
                let text = self
                    .generic
                    .replace("{source}", q.source)
                    .replace("{property}", &property.to_lowercase())
                    .replace("{stage_label}", &q.stage.label().to_lowercase())
                    .replace("{stage}", q.stage.as_str())
                    .replace("{sensor}", q.sensor)
                    .replace("{relations}", &relations);
                Rendered {
                    wordings: vec![text],
                    generic: true,
                }
            }
        }
    }

    pub fn distance_variant(&self, description: &str) -> String {
        self.distance.replace("{description}", description)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    schema_version: String,
    #[serde(default = "default_generic")]
    generic: String,
    #[serde(default = "default_distance")]
    distance: String,
    #[serde(default)]
    templates: Vec<RawTemplate>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemplate {
    source: String,
    #[serde(default)]
    relationship: String,
    #[serde(default)]
    property: Option<String>,
    #[serde(default)]
    stage: Option<String>,
    #[serde(default)]
    wordings: Vec<String>,
    #[serde(default)]
    provenance: String,
}

pub fn load_templates(text: &str, format: DocFormat, ontology: &SourceOntology) -> DataResult<TemplateSet> {
    load_templates_report(text, format, ontology).map_err(|mut e| e.swap_remove(0))
}

pub fn load_templates_report(
    text: &str,
    format: DocFormat,
    ontology: &SourceOntology,
) -> Result<TemplateSet, Vec<DataError>> {
    let raw: RawSet = format::parse(text, format).map_err(|e| vec![e])?;
    format::check_version(&raw.schema_version, TEMPLATES_VERSION).map_err(|e| vec![e.locate_in(text)])?;
    let mut errors = Vec::new();
    let mut templates = Vec::new();
    let mut keys = BTreeSet::new();
    for r in raw.templates {
        let stage = match r.stage.as_deref().map(|s| (s, Stage::parse(s))) {
            Some((s, None)) => {
                errors.push(DataError::new(ErrorCode::UnknownStage, format!("unknown stage `{s}`")).about(s));
                continue;
            }
            Some((_, st)) => st,
            None => None,
        };
        match ontology.lookup_concept(&r.source) {
            None => errors.push(
                DataError::new(ErrorCode::UnknownConcept, format!("unknown concept `{}`", r.source)).about(r.source.clone()),
            ),
            Some(c) => {
                if let Some(p) = &r.property {
                    // Partner rows are addressed as `Owner.Property`.
                    let known = match p.split_once('.') {
                        Some((owner, name)) => ontology.lookup_concept(owner).is_some_and(|o| o.has_property(name)),
                        None => c.has_property(p),
                    };
                    if !known {
                        errors.push(
                            DataError::new(ErrorCode::UnknownProperty, format!("`{}` has no property `{p}`", r.source))
                                .about(p.clone()),
                        );
                    }
                }
            }
        }
        if r.wordings.iter().all(|w| w.trim().is_empty()) {
            errors.push(
                DataError::new(ErrorCode::EmptyField, format!("template for `{}` has no wording", r.source))
                    .about(r.source.clone()),
            );
        }
        if !keys.insert((r.source.clone(), r.relationship.clone(), r.property.clone(), stage)) {
            errors.push(
                DataError::new(
                    ErrorCode::AmbiguousTemplate,
                    format!(
                        "two templates share the key ({}, `{}`, {}, {})",
                        r.source,
                        r.relationship,
                        r.property.as_deref().unwrap_or("*"),
                        stage.map_or("*", Stage::as_str)
                    ),
                )
                .about(r.source.clone()),
            );
        }
        templates.push(DescriptionTemplate {
            source: r.source,
            relationship: r.relationship,
            property: r.property,
            stage,
            wordings: r.wordings,
            provenance: r.provenance,
        });
    }
    if !errors.is_empty() {
        return Err(errors.into_iter().map(|e| e.locate_in(text)).collect());
    }
    let mut set = TemplateSet {
        schema_version: raw.schema_version,
        generic: raw.generic,
        distance: raw.distance,
        templates,
    };
    set.canonicalize();
    Ok(set)
}

pub fn serialize_templates(set: &TemplateSet, format: DocFormat) -> String {
    format::render(set, format)
}
