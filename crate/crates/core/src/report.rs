//! CSV, Markdown and JSON renderings of catalogs, matrices and test sheets,
//! with parsers for reading them back.

use serde::Serialize;

use crate::generation::{Catalog, GenerationMatrix, TriggeringCondition};
use crate::testcase::TestSheet;

pub const CATALOG_HEADER: [&str; 6] = [
    "No.",
    "Sensor",
    "Triggering sources",
    "Properties",
    "Process stage",
    "Triggering condition",
];

const MD_CATALOG_EXTRA: [&str; 2] = ["Effect", "Rating"];
const TESTCASE_HEADER: [&str; 7] = ["Case", "Event", "Conditions", "Sensor", "Scenario", "Pass criterion", "Fail criterion"];

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header {found:?}")]
    Header { found: Vec<String> },
    #[error("markdown table: {0}")]
    Markdown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct CatalogRow {
    #[serde(rename = "No.")]
    pub no: String,
    #[serde(rename = "Sensor")]
    pub sensor: String,
    #[serde(rename = "Triggering sources")]
    pub sources: String,
    #[serde(rename = "Properties")]
    pub properties: String,
    #[serde(rename = "Process stage")]
    pub stage: String,
    #[serde(rename = "Triggering condition")]
    pub condition: String,
}

impl CatalogRow {
    pub fn of(c: &TriggeringCondition) -> Self {
        Self {
            no: c.id.clone(),
            sensor: c.sensor.clone(),
            sources: c.sources_label(),
            properties: c.property_label(),
            stage: c.stage.as_str().to_string(),
            condition: c.description.clone(),
        }
    }

    fn cells(&self) -> [&str; 6] {
        [&self.no, &self.sensor, &self.sources, &self.properties, &self.stage, &self.condition]
    }
}

fn rating_label(c: &TriggeringCondition) -> String {
    match (c.assessment, c.priority) {
        (Some(a), Some(p)) => format!("{a} ({p})"),
        _ => "unrated".to_string(),
    }
}

fn write_csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn catalog_csv(conditions: &[TriggeringCondition]) -> String {
    write_csv(
        CATALOG_HEADER,
        conditions
            .iter()
            .map(|c| CatalogRow::of(c).cells().map(str::to_string).to_vec()),
    )
}

pub fn parse_catalog_csv(text: &str) -> Result<Vec<CatalogRow>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CATALOG_HEADER {
        return Err(ReportError::Header { found: header });
    }
    r.deserialize().map(|row| row.map_err(ReportError::from)).collect()
}

fn md_escape(cell: &str) -> String {
    cell.replace('|', "\\|").replace('\n', " ")
}

fn md_table(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&format!("| {} |\n", header.join(" | ")));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| md_escape(c)).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

pub fn catalog_markdown(conditions: &[TriggeringCondition]) -> String {
    let header: Vec<&str> = CATALOG_HEADER.iter().chain(MD_CATALOG_EXTRA.iter()).copied().collect();
    md_table(
        &header,
        conditions.iter().map(|c| {
            let mut cells: Vec<String> = CatalogRow::of(c).cells().map(str::to_string).to_vec();
            cells.push(c.effect.degree.glyphs());
            cells.push(rating_label(c));
            cells
        }),
    )
}

/// A parsed Markdown pipe table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkdownTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn split_md_row(line: &str) -> Option<Vec<String>> {
    let inner = line.trim().strip_prefix('|')?.strip_suffix('|')?;
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars().peekable();
    while let Some(ch) = chars.next() {
        match ch {
            '\\' if chars.peek() == Some(&'|') => {
                cur.push('|');
                chars.next();
            }
            '|' => cells.push(std::mem::take(&mut cur).trim().to_string()),
            _ => cur.push(ch),
        }
    }
    cells.push(cur.trim().to_string());
    Some(cells)
}

/// Parses the first pipe table in `text`.
pub fn parse_markdown_table(text: &str) -> Result<MarkdownTable, ReportError> {
    let mut lines = text.lines().skip_while(|l| !l.trim_start().starts_with('|'));
    let header = lines
        .next()
        .and_then(split_md_row)
        .ok_or_else(|| ReportError::Markdown("no table found".into()))?;
    let sep = lines
        .next()
        .and_then(split_md_row)
        .ok_or_else(|| ReportError::Markdown("missing separator row".into()))?;
    if sep.len() != header.len() || !sep.iter().all(|c| !c.is_empty() && c.chars().all(|ch| ch == '-' || ch == ':')) {
        return Err(ReportError::Markdown("malformed separator row".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.take_while(|l| l.trim_start().starts_with('|')).enumerate() {
        let row = split_md_row(line).ok_or_else(|| ReportError::Markdown(format!("row {} is not a table row", i + 1)))?;
        if row.len() != header.len() {
            return Err(ReportError::Markdown(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(MarkdownTable { header, rows })
}

fn matrix_header(m: &GenerationMatrix) -> Vec<String> {
    let mut h = vec!["Property".to_string()];
    h.extend(m.columns.iter().map(|(s, q)| format!("{s}.{q}")));
    h
}

fn matrix_rows<'a>(m: &'a GenerationMatrix, glyph: fn(crate::effects::EffectDegree) -> String) -> impl Iterator<Item = Vec<String>> + 'a {
    m.rows.iter().zip(&m.cells).map(move |(row, cells)| {
        let mut out = vec![if row.owner == m.bundle.focal {
            row.property.clone()
        } else {
            format!("{}.{}", row.owner, row.property)
        }];
        out.extend(cells.iter().map(|c| glyph(c.degree)));
        out
    })
}

/// Matrix view with figure-style degree marks.
pub fn matrix_markdown(m: &GenerationMatrix) -> String {
    let header = matrix_header(m);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let title = if m.bundle.is_bare() {
        format!("{} × {}", m.bundle.focal, m.sensor)
    } else {
        format!("{} [{}] × {}", m.bundle.focal, m.bundle.signature(), m.sensor)
    };
    format!("### {title}\n\n{}", md_table(&header, matrix_rows(m, |d| d.glyphs())))
}

/// Matrix view with ASCII degree marks.
pub fn matrix_csv(m: &GenerationMatrix) -> String {
    let header = matrix_header(m);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&header).expect("in-memory csv write");
    for r in matrix_rows(m, |d| d.ascii()) {
        w.write_record(&r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn testcases_csv(sheet: &TestSheet) -> String {
    write_csv(
        TESTCASE_HEADER,
        sheet.cases.iter().map(|c| {
            vec![
                c.id.clone(),
                c.event.clone(),
                c.conditions.join(" "),
                c.sensor.clone(),
                c.scenario.clone(),
                c.pass_criterion.clone(),
                c.fail_criterion.clone(),
            ]
        }),
    )
}

pub fn parse_testcases_csv(text: &str) -> Result<Vec<Vec<String>>, ReportError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TESTCASE_HEADER {
        return Err(ReportError::Header { found: header });
    }
    r.records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()).map_err(ReportError::from))
        .collect()
}

pub fn testcases_markdown(sheet: &TestSheet) -> String {
    md_table(
        &TESTCASE_HEADER,
        sheet.cases.iter().map(|c| {
            vec![
                c.id.clone(),
                c.event.clone(),
                c.conditions.join(" "),
                c.sensor.clone(),
                c.scenario.clone(),
                c.pass_criterion.clone(),
                c.fail_criterion.clone(),
            ]
        }),
    )
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    crate::format::render(value, crate::format::DocFormat::Json)
}

pub fn catalog_json(catalog: &Catalog) -> String {
    to_json(catalog)
}
