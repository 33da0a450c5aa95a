use serde::{Deserialize, Serialize};

use super::report::MetricReport;

/// `b − a` in absolute percentage points, per column and per class.
/// A delta is `None` when either side is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub columns: Vec<(String, Option<f64>)>,
    pub per_class: Vec<(String, Option<f64>)>,
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(b? - a?)
}

pub fn delta_report(a: &MetricReport, b: &MetricReport) -> DeltaReport {
    let columns = MetricReport::COLUMN_NAMES
        .iter()
        .zip(a.columns().iter().zip(b.columns()))
        .map(|(name, (x, y))| (name.to_string(), diff(*x, y)))
        .collect();
    let per_class = a
        .per_class
        .iter()
        .map(|ca| {
            let cb = b.per_class.iter().find(|c| c.name == ca.name).and_then(|c| c.pq);
            (ca.name.clone(), diff(ca.pq, cb))
        })
        .collect();
    DeltaReport { columns, per_class }
}

/// Signed two-decimal rendering used by every delta output, `-` when absent.
pub(crate) fn fmt_delta(v: Option<f64>) -> String {
    match v {
        // normalise -0.00 to +0.00
        Some(d) if d.abs() < 0.005 => "+0.00".to_string(),
        Some(d) => format!("{d:+.2}"),
        None => "-".to_string(),
    }
}

impl DeltaReport {
    pub fn get(&self, column: &str) -> Option<f64> {
        self.columns.iter().find(|(n, _)| n == column).and_then(|(_, v)| *v)
    }

    pub fn formatted(&self, column: &str) -> String {
        fmt_delta(self.get(column))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,delta\n");
        for (n, v) in &self.columns {
            out.push_str(&format!("{n},{}\n", fmt_delta(*v)));
        }
        for (n, v) in &self.per_class {
            out.push_str(&format!("PQ[{n}],{}\n", fmt_delta(*v)));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self
            .columns
            .iter()
            .chain(&self.per_class)
            .map(|(n, _)| n.len() + 4)
            .max()
            .unwrap_or(8);
        let mut out = String::new();
        for (n, v) in &self.columns {
            out.push_str(&format!("{n:<width$} {:>8}\n", fmt_delta(*v)));
        }
        if !self.per_class.is_empty() {
            out.push('\n');
            for (n, v) in &self.per_class {
                out.push_str(&format!("{:<width$} {:>8}\n", format!("PQ[{n}]"), fmt_delta(*v)));
            }
        }
        out
    }
}
