//! Project configuration, run manifests and the subcommand implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use trigcond::assessment::{apply_ratings, load_ratings, rank, Ratings};
use trigcond::effects::{load_effects_report, EffectsKb};
use trigcond::error::DataError;
use trigcond::format::{self, DocFormat};
use trigcond::generation::{
    build_matrix, check_threshold, focal_concepts, generate_catalog, system_for, Catalog, Diagnostics,
    GenerationInputs, GenerationParams, DEFAULT_BUNDLE_LIMIT, DEFAULT_THRESHOLD,
};
use trigcond::ontology::{load_source_ontology_report, SourceOntology};
use trigcond::perception::{affected_stages, load_vehicle_system_report, stage_table, VehicleSystem};
use trigcond::relationship::{load_compatibility_matrix_report, CompatibilityMatrix, RelationshipBundle};
use trigcond::report;
use trigcond::templates::{load_templates_report, TemplateSet};
use trigcond::testcase::{
    compose, load_hazardous_events_report, load_test_sheet, record_outcome, BehaviorClass, ComposeError, ComposePolicy,
    HazardousEvents, TestSheet,
};

pub const PROJECT_VERSION: &str = "trigcond.project/1";
pub const MANIFEST_VERSION: &str = "trigcond.manifest/1";
/// Condition total reported by the original analysis; recorded for comparison only.
pub const REFERENCE_TOTAL: usize = 87;

pub const CATALOG_JSON: &str = "catalog.json";
pub const TESTCASES_JSON: &str = "testcases.json";
pub const RESULTS_LEDGER: &str = "results.jsonl";

// ---------------------------------------------------------------------------
// Configuration

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub ontology: PathBuf,
    pub compatibility: PathBuf,
    pub effects: PathBuf,
    pub system: PathBuf,
    pub hazards: PathBuf,
    pub templates: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default = "default_bundle_limit")]
    pub bundle_limit: usize,
    #[serde(default)]
    pub focal_sources: Vec<String>,
}

fn default_threshold() -> u8 {
    DEFAULT_THRESHOLD
}

fn default_bundle_limit() -> usize {
    DEFAULT_BUNDLE_LIMIT
}

impl Default for Parameters {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            bundle_limit: DEFAULT_BUNDLE_LIMIT,
            focal_sources: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
            ReportFormat::Markdown => "md",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "default_out_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<ReportFormat> {
    ReportFormat::ALL.to_vec()
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            directory: default_out_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    pub schema_version: String,
    pub inputs: InputPaths,
    #[serde(default)]
    pub parameters: Parameters,
    #[serde(default)]
    pub output: OutputSettings,
    /// Directory relative paths are resolved against; the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ProjectConfig {
    pub fn load(path: &Path) -> Result<Self, WorkbenchError> {
        let text = fs::read_to_string(path)
            .map_err(|e| WorkbenchError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Err(WorkbenchError::Usage(format!("config {} is empty", path.display())));
        }
        let mut config: ProjectConfig = format::parse(&text, DocFormat::from_path(path))
            .map_err(|e| WorkbenchError::Usage(format!("config {}: {e}", path.display())))?;
        format::check_version(&config.schema_version, PROJECT_VERSION)
            .map_err(|e| WorkbenchError::Usage(format!("config {}: {e}", path.display())))?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output.directory)
    }
}

/// Command-line overrides of configured values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub threshold: Option<u8>,
    pub bundle_limit: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub format: Option<ReportFormat>,
}

// ---------------------------------------------------------------------------
// Errors and diagnostics

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub file: String,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Diagnostic {
    fn from_data(file: &str, e: &DataError, severity: Severity) -> Self {
        Self {
            severity,
            file: file.to_string(),
            code: e.code.to_string(),
            message: e.message.clone(),
            line: e.position.map(|p| p.line),
            column: e.position.map(|p| p.column),
        }
    }

    fn warning(file: &str, code: &str, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            file: file.to_string(),
            code: code.to_string(),
            message: message.into(),
            line: None,
            column: None,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "{}:{l}:{c}: {sev} {}: {}", self.file, self.code, self.message),
            _ => write!(f, "{}: {sev} {}: {}", self.file, self.code, self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum WorkbenchError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{} data error(s)", .0.len())]
    Data(Vec<Diagnostic>),
    #[error("{0}")]
    Failed(String),
}

impl WorkbenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            WorkbenchError::Usage(_) => 2,
            WorkbenchError::Data(_) | WorkbenchError::Failed(_) => 1,
        }
    }
}

// ---------------------------------------------------------------------------
// Loaded inputs

pub struct Inputs {
    pub ontology: SourceOntology,
    pub system: VehicleSystem,
    pub matrix: CompatibilityMatrix,
    pub effects: EffectsKb,
    pub templates: TemplateSet,
    pub hazards: HazardousEvents,
    pub ratings: Option<Ratings>,
    pub ratings_label: String,
    pub warnings: Vec<Diagnostic>,
}

impl Inputs {
    pub fn generation(&self) -> GenerationInputs<'_> {
        GenerationInputs {
            ontology: &self.ontology,
            system: &self.system,
            matrix: &self.matrix,
            effects: &self.effects,
            templates: &self.templates,
        }
    }
}

struct Reader<'a> {
    config: &'a ProjectConfig,
    digests: &'a mut BTreeMap<String, String>,
}

impl Reader<'_> {
    fn read(&mut self, p: &Path) -> Result<(String, String, DocFormat), Diagnostic> {
        let path = self.config.resolve(p);
        let label = p.display().to_string();
        let text = fs::read_to_string(&path).map_err(|e| Diagnostic {
            severity: Severity::Error,
            file: label.clone(),
            code: "UnreadableFile".into(),
            message: format!("cannot read {}: {e}", path.display()),
            line: None,
            column: None,
        })?;
        self.digests.insert(label.clone(), sha256_hex(text.as_bytes()));
        Ok((text, label, DocFormat::from_path(&path)))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn collect<T>(
    label: &str,
    result: Result<T, Vec<DataError>>,
    diagnostics: &mut Vec<Diagnostic>,
) -> Option<T> {
    match result {
        Ok(v) => Some(v),
        Err(errors) => {
            diagnostics.extend(errors.iter().map(|e| Diagnostic::from_data(label, e, Severity::Error)));
            None
        }
    }
}

/// Runs every loader. Digests of the input texts are recorded as they are read.
pub fn load_inputs(config: &ProjectConfig, digests: &mut BTreeMap<String, String>) -> Result<Inputs, WorkbenchError> {
    let mut reader = Reader { config, digests };
    let mut diags = Vec::new();
    let ins = &config.inputs;

    let (text, label, fmt) = reader.read(&ins.ontology).map_err(|d| WorkbenchError::Data(vec![d]))?;
    let ontology = collect(&label, load_source_ontology_report(&text, fmt), &mut diags)
        .ok_or_else(|| WorkbenchError::Data(diags.clone()))?;
    let mut warnings = Vec::new();
    for c in ontology.concepts().iter().filter(|c| c.properties.is_empty()) {
        let mut d = Diagnostic::warning(&label, "ZeroPropertyConcept", format!("concept `{}` has no properties and generates nothing", c.name));
        if let Some(p) = DataError::new(trigcond::ErrorCode::EmptyField, "").about(c.name.clone()).locate_in(&text).position {
            d.line = Some(p.line);
            d.column = Some(p.column);
        }
        warnings.push(d);
    }

    let mut load = |p: &Path, diags: &mut Vec<Diagnostic>| match reader.read(p) {
        Ok(t) => Some(t),
        Err(d) => {
            diags.push(d);
            None
        }
    };
    let system = load(&ins.system, &mut diags)
        .and_then(|(t, l, f)| collect(&l, load_vehicle_system_report(&t, f, &ontology), &mut diags));
    let matrix = load(&ins.compatibility, &mut diags)
        .and_then(|(t, l, f)| collect(&l, load_compatibility_matrix_report(&t, f, &ontology), &mut diags));
    let effects = load(&ins.effects, &mut diags)
        .and_then(|(t, l, f)| collect(&l, load_effects_report(&t, f, &ontology), &mut diags));
    let templates = load(&ins.templates, &mut diags)
        .and_then(|(t, l, f)| collect(&l, load_templates_report(&t, f, &ontology), &mut diags));
    let hazards = load(&ins.hazards, &mut diags)
        .and_then(|(t, l, f)| collect(&l, load_hazardous_events_report(&t, f, &ontology), &mut diags));
    let ratings = match &ins.ratings {
        Some(p) => load(p, &mut diags).and_then(|(t, l, f)| collect(&l, load_ratings(&t, f).map_err(|e| vec![e]), &mut diags)),
        None => None,
    };

    if !diags.is_empty() {
        return Err(WorkbenchError::Data(diags));
    }
    let hazards = hazards.expect("loaded without diagnostics");
    if hazards.events.is_empty() {
        warnings.push(Diagnostic::warning(
            &ins.hazards.display().to_string(),
            "NoEvents",
            "hazardous events file lists no events; composition yields no test cases",
        ));
    }
    Ok(Inputs {
        ontology,
        system: system.expect("loaded without diagnostics"),
        matrix: matrix.expect("loaded without diagnostics"),
        effects: effects.expect("loaded without diagnostics"),
        templates: templates.expect("loaded without diagnostics"),
        hazards,
        ratings,
        ratings_label: ins.ratings.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// Manifest

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: String,
    pub inputs: BTreeMap<String, String>,
    pub parameters: Parameters,
    pub outputs: Vec<OutputRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_total: Option<usize>,
    pub reference_total: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_from_reference: Option<i64>,
    pub elapsed_ms: f64,
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Validate,
    Stages,
    Matrix { sensor: Option<String>, source: Option<String> },
    Generate,
    Assess { reassess: bool },
    Compose,
    Report,
    Record { case: String, behavior: BehaviorClass },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Stages => "stages",
            Command::Matrix { .. } => "matrix",
            Command::Generate => "generate",
            Command::Assess { .. } => "assess",
            Command::Compose => "compose",
            Command::Report => "report",
            Command::Record { .. } => "record",
        }
    }
}

/// What a command printed and wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<Diagnostic>,
    pub outputs: Vec<OutputRecord>,
    pub condition_total: Option<usize>,
}

struct Run {
    out_dir: PathBuf,
    outcome: Outcome,
}

impl Run {
    fn write(&mut self, name: &str, contents: &str) -> Result<(), WorkbenchError> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| WorkbenchError::Failed(format!("cannot create {}: {e}", self.out_dir.display())))?;
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|e| WorkbenchError::Failed(format!("cannot write {}: {e}", path.display())))?;
        self.outcome.outputs.push(OutputRecord {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    fn read(&self, name: &str, what: &str) -> Result<String, WorkbenchError> {
        let path = self.out_dir.join(name);
        fs::read_to_string(&path).map_err(|e| {
            WorkbenchError::Failed(format!("{what} {} not found ({e}); run the producing command first", path.display()))
        })
    }
}

pub fn effective_parameters(config: &ProjectConfig, overrides: &Overrides) -> Result<Parameters, WorkbenchError> {
    let mut p = config.parameters.clone();
    if let Some(t) = overrides.threshold {
        p.threshold = t;
    }
    if let Some(l) = overrides.bundle_limit {
        p.bundle_limit = l;
    }
    check_threshold(p.threshold).map_err(|e| WorkbenchError::Usage(e.to_string()))?;
    Ok(p)
}

/// Loads the config, runs `command` and writes the run manifest.
/// The manifest is written whether or not the command succeeds.
pub fn execute(config_path: &Path, overrides: &Overrides, command: &Command) -> Result<Outcome, WorkbenchError> {
    let started = Instant::now();
    let config = ProjectConfig::load(config_path)?;
    let params = effective_parameters(&config, overrides)?;
    let out_dir = overrides.out_dir.clone().unwrap_or_else(|| config.out_dir());
    let mut digests = BTreeMap::new();
    let mut run = Run {
        out_dir,
        outcome: Outcome::default(),
    };
    let result = load_inputs(&config, &mut digests)
        .and_then(|inputs| dispatch(&config, &inputs, &params, overrides, command, &mut run).map(|()| inputs));
    let status = match &result {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("error: {e}"),
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_VERSION.to_string(),
        tool: "trigcond".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.name().to_string(),
        status,
        inputs: digests,
        parameters: params,
        outputs: run.outcome.outputs.clone(),
        condition_total: run.outcome.condition_total,
        reference_total: REFERENCE_TOTAL,
        delta_from_reference: run.outcome.condition_total.map(|t| t as i64 - REFERENCE_TOTAL as i64),
        elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
    };
    let manifest_name = format!("manifest-{}.json", command.name());
    if fs::create_dir_all(&run.out_dir).is_ok() {
        // A manifest that cannot be written must not mask the command's own result.
        let _ = fs::write(run.out_dir.join(&manifest_name), report::to_json(&manifest));
    }
    let inputs = result?;
    run.outcome.warnings.splice(0..0, inputs.warnings);
    Ok(run.outcome)
}

fn dispatch(
    config: &ProjectConfig,
    inputs: &Inputs,
    params: &Parameters,
    overrides: &Overrides,
    command: &Command,
    run: &mut Run,
) -> Result<(), WorkbenchError> {
    match command {
        Command::Validate => cmd_validate(inputs, run),
        Command::Stages => cmd_stages(inputs, params, run),
        Command::Matrix { sensor, source } => cmd_matrix(inputs, params, sensor.as_deref(), source.as_deref(), overrides, run),
        Command::Generate => cmd_generate(config, inputs, params, run),
        Command::Assess { reassess } => cmd_assess(config, inputs, *reassess, run),
        Command::Compose => cmd_compose(config, inputs, run),
        Command::Report => cmd_report(overrides.format.unwrap_or(ReportFormat::Markdown), run),
        Command::Record { case, behavior } => cmd_record(case, *behavior, run),
    }
}

fn generation_params(p: &Parameters) -> GenerationParams {
    GenerationParams {
        threshold: p.threshold,
        bundle_limit: p.bundle_limit,
        focal_sources: p.focal_sources.clone(),
    }
}

fn cmd_validate(inputs: &Inputs, run: &mut Run) -> Result<(), WorkbenchError> {
    run.outcome.stdout = format!(
        "ok: {} concepts, {} sensors, {} compatibility entries, {} effect entries, {} templates, {} hazardous events\n",
        inputs.ontology.concepts().len(),
        inputs.system.sensors.len(),
        inputs.matrix.entries.len(),
        inputs.effects.entries().len(),
        inputs.templates.templates.len(),
        inputs.hazards.events.len()
    );
    Ok(())
}

fn cmd_stages(inputs: &Inputs, params: &Parameters, run: &mut Run) -> Result<(), WorkbenchError> {
    let mut out = String::new();
    let focals = focal_concepts(&inputs.ontology, &generation_params(params)).map_err(failed)?;
    for system in &inputs.system.sensors {
        out.push_str(&format!("{} ({})\n", system.sensor, system.class.as_str()));
        for (phase, stages) in stage_table(system) {
            let names: Vec<&str> = stages.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("  {phase:?}: {}\n", names.join(", ")));
        }
        for focal in &focals {
            let stages = affected_stages(&inputs.ontology, &inputs.system.stage_rules, focal, &[], system).map_err(failed)?;
            let names: Vec<&str> = stages.iter().map(|s| s.as_str()).collect();
            out.push_str(&format!("  {} -> {}\n", focal.name, if names.is_empty() { "-".to_string() } else { names.join(", ") }));
        }
    }
    run.outcome.stdout = out.clone();
    run.write("stages.txt", &out)
}

fn failed(e: impl fmt::Display) -> WorkbenchError {
    WorkbenchError::Failed(e.to_string())
}

fn cmd_matrix(
    inputs: &Inputs,
    params: &Parameters,
    sensor: Option<&str>,
    source: Option<&str>,
    overrides: &Overrides,
    run: &mut Run,
) -> Result<(), WorkbenchError> {
    let format = overrides.format.unwrap_or(ReportFormat::Markdown);
    let sensors: Vec<_> = match sensor {
        Some(s) => vec![system_for(&inputs.system, s).map_err(failed)?],
        None => inputs.system.sensors.iter().collect(),
    };
    let focals = match source {
        Some(s) => {
            let c = inputs
                .ontology
                .lookup_concept(s)
                .ok_or_else(|| WorkbenchError::Failed(format!("unknown concept `{s}`")))?;
            vec![c]
        }
        None => focal_concepts(&inputs.ontology, &generation_params(params)).map_err(failed)?,
    };
    let mut matrices = Vec::new();
    for system in sensors {
        for focal in &focals {
            let bundle = RelationshipBundle::bare(focal.name.clone());
            matrices.push(
                build_matrix(&inputs.ontology, &inputs.system.stage_rules, &bundle, system, &inputs.effects).map_err(failed)?,
            );
        }
    }
    let text = match format {
        ReportFormat::Markdown => matrices.iter().map(report::matrix_markdown).collect::<Vec<_>>().join("\n"),
        ReportFormat::Csv => matrices.iter().map(report::matrix_csv).collect::<Vec<_>>().join("\n"),
        ReportFormat::Json => report::to_json(&matrices),
    };
    run.outcome.stdout = text.clone();
    run.write(&format!("matrix.{}", format.extension()), &text)
}

fn write_catalog_views(run: &mut Run, stem: &str, conditions: &[trigcond::generation::TriggeringCondition], formats: &[ReportFormat]) -> Result<(), WorkbenchError> {
    for f in formats {
        match f {
            ReportFormat::Csv => run.write(&format!("{stem}.csv"), &report::catalog_csv(conditions))?,
            ReportFormat::Markdown => run.write(&format!("{stem}.md"), &report::catalog_markdown(conditions))?,
            ReportFormat::Json => {}
        }
    }
    Ok(())
}

fn rated(inputs: &Inputs, catalog: Catalog, reassess: bool) -> Result<Catalog, WorkbenchError> {
    let Some(ratings) = &inputs.ratings else {
        return Ok(catalog);
    };
    let conditions = apply_ratings(catalog.conditions, ratings, reassess).map_err(|errs| {
        WorkbenchError::Data(
            errs.iter()
                .map(|e| Diagnostic::from_data(&inputs.ratings_label, e, Severity::Error))
                .collect(),
        )
    })?;
    Ok(Catalog::new(catalog.threshold, catalog.bundle_limit, conditions))
}

fn cmd_generate(config: &ProjectConfig, inputs: &Inputs, params: &Parameters, run: &mut Run) -> Result<(), WorkbenchError> {
    let (catalog, diagnostics): (Catalog, Diagnostics) =
        generate_catalog(inputs.generation(), &generation_params(params)).map_err(failed)?;
    run.write(CATALOG_JSON, &report::catalog_json(&catalog))?;
    write_catalog_views(run, "catalog", &catalog.conditions, &config.output.formats)?;
    run.write("diagnostics.json", &report::to_json(&diagnostics))?;
    run.outcome.condition_total = Some(catalog.total);
    run.outcome.stdout = format!(
        "{} triggering conditions ({} template fallbacks, {} beneficial cells); reference analysis reported {}\n",
        catalog.total,
        diagnostics.warnings.len(),
        diagnostics.positive_cells.len(),
        REFERENCE_TOTAL
    );
    Ok(())
}

fn read_catalog(run: &Run) -> Result<Catalog, WorkbenchError> {
    let text = run.read(CATALOG_JSON, "catalog")?;
    format::parse(&text, DocFormat::Json).map_err(|e| WorkbenchError::Failed(format!("{CATALOG_JSON}: {e}")))
}

fn cmd_assess(config: &ProjectConfig, inputs: &Inputs, reassess: bool, run: &mut Run) -> Result<(), WorkbenchError> {
    if inputs.ratings.is_none() {
        return Err(WorkbenchError::Usage("assess needs `inputs.ratings` in the config".into()));
    }
    let catalog = rated(inputs, read_catalog(run)?, reassess)?;
    let ranked = rank(catalog.conditions.clone());
    run.write(CATALOG_JSON, &report::catalog_json(&catalog))?;
    run.write("ranked.json", &report::to_json(&ranked))?;
    write_catalog_views(run, "ranked", &ranked, &config.output.formats)?;
    let rated = ranked.iter().filter(|c| c.assessment.is_some()).count();
    run.outcome.condition_total = Some(catalog.total);
    run.outcome.stdout = format!("{rated} of {} conditions rated\n", ranked.len());
    Ok(())
}

fn cmd_compose(config: &ProjectConfig, inputs: &Inputs, run: &mut Run) -> Result<(), WorkbenchError> {
    let catalog = read_catalog(run)?;
    let composition = compose(
        &inputs.ontology,
        &catalog.conditions,
        &inputs.hazards.events,
        &inputs.system,
        ComposePolicy { allow_unrated: true },
    )
    .map_err(|e| WorkbenchError::Failed(format!("{}: {e}", compose_code(&e))))?;
    let sheet = TestSheet::new(composition.cases.clone());
    run.write(TESTCASES_JSON, &report::to_json(&sheet))?;
    for f in &config.output.formats {
        match f {
            ReportFormat::Csv => run.write("testcases.csv", &report::testcases_csv(&sheet))?,
            ReportFormat::Markdown => run.write("testcases.md", &report::testcases_markdown(&sheet))?,
            ReportFormat::Json => {}
        }
    }
    let mut summary: Vec<String> = inputs
        .hazards
        .events
        .iter()
        .map(|e| format!("{}: {} cases", e.id, composition.count_for(&e.id)))
        .collect();
    summary.push(format!("unmatched conditions: {}", composition.unmatched.len()));
    run.outcome.stdout = format!("{}\n", summary.join("; "));
    for u in &composition.unmatched {
        run.outcome.warnings.push(Diagnostic::warning(CATALOG_JSON, "NoCompatibleEvent", u.to_string()));
    }
    Ok(())
}

fn compose_code(e: &ComposeError) -> &'static str {
    match e {
        ComposeError::NoCompatibleEvent { .. } => "NoCompatibleEvent",
        ComposeError::UnknownSensor { .. } => "UnknownSensor",
        ComposeError::Unrated(_) => "Unrated",
        ComposeError::UnknownTestCase(_) => "UnknownTestCase",
    }
}

fn cmd_report(format: ReportFormat, run: &mut Run) -> Result<(), WorkbenchError> {
    let catalog = read_catalog(run)?;
    let text = match format {
        ReportFormat::Json => report::catalog_json(&catalog),
        ReportFormat::Csv => report::catalog_csv(&catalog.conditions),
        ReportFormat::Markdown => report::catalog_markdown(&catalog.conditions),
    };
    run.write(&format!("report.{}", format.extension()), &text)?;
    run.outcome.stdout = text;
    Ok(())
}

fn cmd_record(case: &str, behavior: BehaviorClass, run: &mut Run) -> Result<(), WorkbenchError> {
    let text = run.read(TESTCASES_JSON, "test-case sheet")?;
    let sheet = load_test_sheet(&text, DocFormat::Json).map_err(failed)?;
    let entry = record_outcome(&sheet, case, behavior, &run.out_dir.join(RESULTS_LEDGER)).map_err(failed)?;
    run.outcome.stdout = format!("{} {:?} -> {:?}\n", entry.case, entry.behavior, entry.verdict);
    Ok(())
}
