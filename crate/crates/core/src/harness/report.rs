use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::learner::LossRecord;
use crate::metrics::{delta_report, ClassScore, DeltaReport, MetricReport};
use crate::nightshift::EpochRecord;
use crate::panoptic::ClassCatalog;

/// One evaluated (model, dataset) pair with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub model: String,
    pub dataset: String,
    /// Extra iterations of a refinement stage; `None` outside refinement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    pub report: MetricReport,
    pub checkpoint_hash: String,
    pub manifest_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaEntry {
    pub name: String,
    pub delta: DeltaReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    /// Evaluation class names in catalog order.
    pub class_names: Vec<String>,
    pub table1: Vec<Cell>,
    #[serde(default)]
    pub table3: Vec<Cell>,
    pub deltas: Vec<DeltaEntry>,
    /// Segmenter loss traces keyed by model name, every tenth step.
    pub traces: BTreeMap<String, Vec<LossRecord>>,
    #[serde(default)]
    pub translator_trace: Vec<EpochRecord>,
    /// Manifest name to file hash.
    pub manifests: BTreeMap<String, String>,
    /// Checkpoint name to file hash.
    pub checkpoints: BTreeMap<String, String>,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("result serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn cell(&self, model: &str, dataset: &str) -> Option<&Cell> {
        self.table1
            .iter()
            .chain(&self.table3)
            .find(|c| c.model == model && c.dataset == dataset)
    }

    pub fn delta(&self, name: &str) -> Option<&DeltaReport> {
        self.deltas.iter().find(|d| d.name == name).map(|d| &d.delta)
    }

    /// Main metric table as CSV, one row per cell.
    pub fn table1_csv(&self) -> String {
        metric_csv(&self.table1, false)
    }

    pub fn table2_csv(&self) -> String {
        let mut out = String::from("Model,Dataset");
        for n in &self.class_names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for c in &self.table1 {
            out.push_str(&format!("{},{}", c.model, c.dataset));
            for n in &self.class_names {
                out.push(',');
                out.push_str(&fmt_value(c.report.class_pq(n)));
            }
            out.push('\n');
        }
        out
    }

    pub fn table3_csv(&self) -> String {
        metric_csv(&self.table3, true)
    }

    pub fn deltas_csv(&self) -> String {
        let mut out = String::from("comparison,metric,delta\n");
        for d in &self.deltas {
            for line in d.delta.to_csv().lines().skip(1) {
                out.push_str(&format!("{},{line}\n", d.name));
            }
        }
        out
    }

    /// Aligned text rendering of every table and delta.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Approach-1\n");
        out.push_str(&metric_text(&self.table1, false));
        out.push_str("\nPer-class PQ\n");
        let mut rows = vec![header(&["Model", "Dataset"], self.class_names.iter().map(String::as_str))];
        for c in &self.table1 {
            let mut r = vec![c.model.clone(), c.dataset.clone()];
            r.extend(self.class_names.iter().map(|n| fmt_value(c.report.class_pq(n))));
            rows.push(r);
        }
        out.push_str(&align(&rows, 2));
        if !self.table3.is_empty() {
            out.push_str("\nApproach-2\n");
            out.push_str(&metric_text(&self.table3, true));
        }
        for d in &self.deltas {
            out.push_str(&format!("\n{}\n", d.name));
            out.push_str(&d.delta.to_text());
        }
        out
    }
}

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    }
}

fn header<'a>(lead: &[&'a str], rest: impl Iterator<Item = &'a str>) -> Vec<String> {
    lead.iter().copied().chain(rest).map(String::from).collect()
}

fn metric_rows(cells: &[Cell], itr: bool) -> Vec<Vec<String>> {
    let lead: &[&str] = if itr { &["Model", "Dataset", "Itr"] } else { &["Model", "Dataset"] };
    let mut rows = vec![header(lead, MetricReport::COLUMN_NAMES.iter().copied())];
    for c in cells {
        let mut r = vec![c.model.clone(), c.dataset.clone()];
        if itr {
            r.push(c.iterations.map_or("-".into(), |i| i.to_string()));
        }
        r.extend(c.report.columns().iter().map(|v| fmt_value(*v)));
        rows.push(r);
    }
    rows
}

fn metric_csv(cells: &[Cell], itr: bool) -> String {
    metric_rows(cells, itr).iter().map(|r| r.join(",") + "\n").collect()
}

fn metric_text(cells: &[Cell], itr: bool) -> String {
    align(&metric_rows(cells, itr), if itr { 3 } else { 2 })
}

/// Left-aligns the first `lead` columns and right-aligns the rest.
fn align(rows: &[Vec<String>], lead: usize) -> String {
    let n = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..n)
        .map(|j| rows.iter().filter_map(|r| r.get(j)).map(String::len).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, s)| {
                if j < lead {
                    format!("{s:<w$}", w = widths[j])
                } else {
                    format!("{s:>w$}", w = widths[j])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Text];
}

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportFiles {
    pub json: Option<PathBuf>,
    pub csv: Vec<PathBuf>,
    pub text: Option<PathBuf>,
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes `report.json`, one CSV per table plus `deltas.csv`, and
/// `report.txt` into `dir`. The Approach-2 table is skipped when empty.
pub fn emit_report(r: &ExperimentResult, formats: &[ReportFormat], dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = ReportFiles::default();
    if formats.contains(&ReportFormat::Json) {
        files.json = Some(write(dir.join("report.json"), &r.to_json())?);
    }
    if formats.contains(&ReportFormat::Csv) {
        files.csv.push(write(dir.join("table1.csv"), &r.table1_csv())?);
        files.csv.push(write(dir.join("table2.csv"), &r.table2_csv())?);
        if !r.table3.is_empty() {
            files.csv.push(write(dir.join("table3.csv"), &r.table3_csv())?);
        }
        files.csv.push(write(dir.join("deltas.csv"), &r.deltas_csv())?);
    }
    if formats.contains(&ReportFormat::Text) {
        files.text = Some(write(dir.join("report.txt"), &r.to_text())?);
    }
    Ok(files)
}

const REFERENCE_MAIN: [(&str, &str, [f64; 15]); 4] = [
    (
        "Baseline",
        "Original",
        [53.78, 78.91, 66.62, 41.55, 76.65, 53.94, 62.68, 80.55, 75.85, 73.24, 91.36, 81.67, 95.31, 20.13, 39.1],
    ),
    (
        "Retrained",
        "Original",
        [53.15, 78.59, 66.05, 41.29, 76.49, 53.74, 61.78, 80.12, 75.0, 72.11, 91.21, 80.94, 95.22, 21.89, 41.29],
    ),
    (
        "Baseline",
        "Converted",
        [34.65, 73.81, 44.74, 26.22, 72.8, 35.47, 40.78, 74.54, 51.47, 49.18, 78.8, 59.46, 87.4, 9.96, 21.71],
    ),
    (
        "Retrained",
        "Converted",
        [45.28, 76.73, 57.01, 35.25, 75.7, 46.23, 52.59, 77.48, 64.87, 63.61, 86.77, 73.74, 92.59, 16.06, 31.78],
    ),
];

const REFERENCE_PER_CLASS: [[f64; 19]; 4] = [
    [
        97.0, 73.0, 87.2, 28.9, 33.5, 51.5, 44.5, 66.2, 88.5, 33.5, 85.7, 43.4, 36.9, 58.0, 40.0, 56.6, 31.8, 31.0, 34.7,
    ],
    [
        97.2, 71.9, 87.3, 24.7, 32.3, 51.3, 45.3, 66.3, 88.4, 29.9, 85.1, 41.7, 37.3, 56.9, 38.4, 55.0, 36.9, 30.6, 33.6,
    ],
    [
        90.1, 38.9, 68.2, 9.2, 12.3, 20.3, 14.1, 44.6, 80.5, 20.2, 50.2, 32.3, 29.6, 49.1, 17.4, 35.2, 8.9, 12.2, 25.0,
    ],
    [
        94.2, 58.8, 80.7, 17.4, 21.4, 33.2, 29.3, 56.6, 84.3, 22.1, 80.5, 36.0, 33.0, 53.7, 34.3, 48.5, 29.3, 20.3, 26.9,
    ],
];

/// Reference Cityscapes results as a result grid over the Cityscapes
/// catalog, with the Retrained minus Baseline deltas filled in.
pub fn table1_fixture() -> ExperimentResult {
    let catalog = ClassCatalog::cityscapes();
    let table1: Vec<Cell> = REFERENCE_MAIN
        .iter()
        .zip(REFERENCE_PER_CLASS)
        .map(|((model, dataset, cols), pcs)| {
            let mut report = MetricReport::from_columns(cols.map(Some));
            report.per_class = catalog
                .classes()
                .iter()
                .zip(pcs)
                .map(|(c, pq)| ClassScore {
                    class_id: c.id,
                    name: c.name.clone(),
                    is_thing: c.is_thing,
                    pq: Some(pq),
                    sq: None,
                    rq: None,
                })
                .collect();
            Cell {
                model: model.to_string(),
                dataset: dataset.to_string(),
                iterations: None,
                report,
                checkpoint_hash: String::new(),
                manifest_hash: String::new(),
            }
        })
        .collect();
    let deltas = ["Original", "Converted"]
        .iter()
        .map(|d| {
            let get = |m: &str| &table1.iter().find(|c| c.model == m && c.dataset == *d).expect("cell").report;
            DeltaEntry {
                name: format!("Retrained - Baseline ({d})"),
                delta: delta_report(get("Baseline"), get("Retrained")),
            }
        })
        .collect();
    ExperimentResult {
        config: ExperimentConfig {
            catalog: "cityscapes".into(),
            ..Default::default()
        },
        class_names: catalog.classes().iter().map(|c| c.name.clone()).collect(),
        table1,
        table3: Vec::new(),
        deltas,
        traces: BTreeMap::new(),
        translator_trace: Vec::new(),
        manifests: BTreeMap::new(),
        checkpoints: BTreeMap::new(),
    }
}
