use serde::{Deserialize, Serialize};

use crate::panoptic::ClassId;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupScores {
    pub all: Option<f64>,
    pub things: Option<f64>,
    pub stuff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class_id: ClassId,
    pub name: String,
    pub is_thing: bool,
    pub pq: Option<f64>,
    pub sq: Option<f64>,
    pub rq: Option<f64>,
}

/// Dataset-level metrics, all in percent. `None` marks a value that is
/// undefined for the data (for example AP without any ground-truth
/// instances).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pq: GroupScores,
    pub sq: GroupScores,
    pub rq: GroupScores,
    /// One entry per evaluation class, in catalog order.
    pub per_class: Vec<ClassScore>,
    pub miou: Option<f64>,
    pub fwiou: Option<f64>,
    pub macc: Option<f64>,
    pub pacc: Option<f64>,
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub images: u64,
}

impl MetricReport {
    /// The fifteen table columns: PQ SQ RQ for all/things/stuff, then
    /// mIoU fwIoU mACC pACC AP AP50.
    pub fn columns(&self) -> [Option<f64>; 15] {
        [
            self.pq.all,
            self.sq.all,
            self.rq.all,
            self.pq.things,
            self.sq.things,
            self.rq.things,
            self.pq.stuff,
            self.sq.stuff,
            self.rq.stuff,
            self.miou,
            self.fwiou,
            self.macc,
            self.pacc,
            self.ap,
            self.ap50,
        ]
    }

    pub const COLUMN_NAMES: [&'static str; 15] = [
        "PQ", "SQ", "RQ", "PQ_th", "SQ_th", "RQ_th", "PQ_st", "SQ_st", "RQ_st", "mIoU", "fwIoU", "mACC", "pACC",
        "AP", "AP50",
    ];

    /// A report carrying only the table columns, in [`Self::COLUMN_NAMES`]
    /// order.
    pub fn from_columns(values: [Option<f64>; 15]) -> Self {
        let g = |i: usize| GroupScores {
            all: values[i],
            things: values[i + 3],
            stuff: values[i + 6],
        };
        MetricReport {
            pq: g(0),
            sq: g(1),
            rq: g(2),
            per_class: Vec::new(),
            miou: values[9],
            fwiou: values[10],
            macc: values[11],
            pacc: values[12],
            ap: values[13],
            ap50: values[14],
            images: 0,
        }
    }

    pub fn class_pq(&self, name: &str) -> Option<f64> {
        self.per_class.iter().find(|c| c.name == name).and_then(|c| c.pq)
    }

    /// Aligned two-line tables: the fifteen columns, then per-class PQ.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
        let table = |names: Vec<String>, values: Vec<String>| {
            let w: Vec<usize> = names.iter().zip(&values).map(|(a, b)| a.len().max(b.len())).collect();
            let line = |cells: &[String]| {
                let parts: Vec<String> = cells.iter().zip(&w).map(|(c, w)| format!("{c:>w$}")).collect();
                parts.join("  ") + "\n"
            };
            line(&names) + &line(&values)
        };
        let mut out = table(
            Self::COLUMN_NAMES.iter().map(|s| s.to_string()).collect(),
            self.columns().iter().map(|v| fmt(*v)).collect(),
        );
        if !self.per_class.is_empty() {
            out.push('\n');
            out += &table(
                self.per_class.iter().map(|c| c.name.clone()).collect(),
                self.per_class.iter().map(|c| fmt(c.pq)).collect(),
            );
        }
        out
    }
}
