//! Answer, supporting-sentence and evidence-triple scoring, joint metrics,
//! performance drops and multi-run aggregation.

mod scores;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::corpus::{EvidenceTriple, QaExample, SupportingFact};

pub use scores::{
    answer_scores, ent_scores, harmonic, joint_scores, normalize_triple, sent_scores, JointScore,
    TaskScores,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("malformed predictions: {0}")]
    Predictions(String),
    #[error("unknown task {0:?} (expected ans, sent or ent)")]
    UnknownTask(String),
    #[error("no task selected")]
    NoTasks,
    #[error("nothing to aggregate")]
    NoReports,
    #[error("shape mismatch at cell {cell:?}: present in run {present_in} but not run {missing_in}")]
    ShapeMismatch {
        cell: String,
        present_in: usize,
        missing_in: usize,
    },
    #[error("malformed score table: {0}")]
    Table(String),
}

/// Which of the three tasks are scored. Unscored tasks count as perfect in the joint metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tasks {
    pub ans: bool,
    pub sent: bool,
    pub ent: bool,
}

impl Tasks {
    pub const ALL: Tasks = Tasks {
        ans: true,
        sent: true,
        ent: true,
    };

    pub fn parse(spec: &str) -> Result<Self, MetricsError> {
        let mut t = Tasks {
            ans: false,
            sent: false,
            ent: false,
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "ans" => t.ans = true,
                "sent" | "sp" => t.sent = true,
                "ent" | "evidence" => t.ent = true,
                other => return Err(MetricsError::UnknownTask(other.to_string())),
            }
        }
        if !(t.ans || t.sent || t.ent) {
            return Err(MetricsError::NoTasks);
        }
        Ok(t)
    }

    pub fn names(&self) -> Vec<&'static str> {
        [("ans", self.ans), ("sent", self.sent), ("ent", self.ent)]
            .into_iter()
            .filter_map(|(n, on)| on.then_some(n))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Prediction {
    pub answer: String,
    pub sp: Vec<SupportingFact>,
    pub evidence: Vec<EvidenceTriple>,
}

pub type Predictions = BTreeMap<String, Prediction>;

fn pred_err(msg: impl Into<String>) -> MetricsError {
    MetricsError::Predictions(msg.into())
}

fn parse_sp(v: &Value, at: &str) -> Result<Vec<SupportingFact>, MetricsError> {
    let items = v.as_array().ok_or_else(|| pred_err(format!("{at}: expected an array")))?;
    items
        .iter()
        .enumerate()
        .map(|(i, pair)| match pair.as_array().map(Vec::as_slice) {
            Some([Value::String(t), idx]) => idx
                .as_u64()
                .map(|n| SupportingFact::new(t.clone(), n as usize))
                .ok_or_else(|| pred_err(format!("{at}[{i}][1]: expected a sentence index"))),
            _ => Err(pred_err(format!("{at}[{i}]: expected [title, index]"))),
        })
        .collect()
}

fn parse_evidence(v: &Value, at: &str) -> Result<Vec<EvidenceTriple>, MetricsError> {
    let items = v.as_array().ok_or_else(|| pred_err(format!("{at}: expected an array")))?;
    items
        .iter()
        .enumerate()
        .map(|(i, t)| match t.as_array().map(Vec::as_slice) {
            Some([Value::String(s), Value::String(r), Value::String(o)]) => {
                Ok(EvidenceTriple::new(s.clone(), r.clone(), o.clone()))
            }
            _ => Err(pred_err(format!("{at}[{i}]: expected [subject, relation, object]"))),
        })
        .collect()
}

/// Reads predictions keyed by id (`{id: {answer, sp, evidence}}`), or the
/// official per-task layout (`{answer: {id: ..}, sp: {id: ..}, evidence: {id: ..}}`).
pub fn parse_predictions(text: &str) -> Result<Predictions, MetricsError> {
    let root: Value = serde_json::from_str(text).map_err(|e| pred_err(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| pred_err("root must be an object"))?;
    let mut preds = Predictions::new();

    let per_task = matches!(obj.get("answer"), Some(Value::Object(_)))
        || matches!(obj.get("sp"), Some(Value::Object(_)));
    if per_task {
        if let Some(Value::Object(m)) = obj.get("answer") {
            for (id, a) in m {
                let ans = a
                    .as_str()
                    .ok_or_else(|| pred_err(format!("answer.{id}: expected a string")))?;
                preds.entry(id.clone()).or_default().answer = ans.to_string();
            }
        }
        if let Some(Value::Object(m)) = obj.get("sp") {
            for (id, v) in m {
                preds.entry(id.clone()).or_default().sp = parse_sp(v, &format!("sp.{id}"))?;
            }
        }
        if let Some(Value::Object(m)) = obj.get("evidence") {
            for (id, v) in m {
                preds.entry(id.clone()).or_default().evidence =
                    parse_evidence(v, &format!("evidence.{id}"))?;
            }
        }
        return Ok(preds);
    }

    for (id, v) in obj {
        let rec = v
            .as_object()
            .ok_or_else(|| pred_err(format!("{id}: expected an object")))?;
        let mut p = Prediction::default();
        if let Some(a) = rec.get("answer") {
            p.answer = a
                .as_str()
                .ok_or_else(|| pred_err(format!("{id}.answer: expected a string")))?
                .to_string();
        }
        if let Some(sp) = rec.get("sp") {
            p.sp = parse_sp(sp, &format!("{id}.sp"))?;
        }
        if let Some(ev) = rec.get("evidence") {
            p.evidence = parse_evidence(ev, &format!("{id}.evidence"))?;
        }
        preds.insert(id.clone(), p);
    }
    Ok(preds)
}

/// Writes predictions in the per-id layout, keys sorted.
pub fn predictions_to_json(preds: &Predictions) -> String {
    let map: serde_json::Map<String, Value> = preds
        .iter()
        .map(|(id, p)| {
            let v = serde_json::json!({
                "answer": p.answer,
                "sp": p.sp.iter().map(|sf| serde_json::json!([sf.title, sf.sentence])).collect::<Vec<_>>(),
                "evidence": p.evidence.iter().map(|t| serde_json::json!([t.subject, t.relation, t.object])).collect::<Vec<_>>(),
            });
            (id.clone(), v)
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("predictions serialize");
    s.push('\n');
    s
}

/// Per-example scores for the selected tasks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleScores {
    pub id: String,
    pub ans: TaskScores,
    pub sent: TaskScores,
    pub ent: TaskScores,
    pub joint: JointScore,
}

pub fn score_example(pred: &Prediction, gold: &QaExample, tasks: Tasks) -> ExampleScores {
    let ans = if tasks.ans {
        answer_scores(&pred.answer, &gold.answer)
    } else {
        TaskScores::PERFECT
    };
    let sent = if tasks.sent {
        sent_scores(&pred.sp, &gold.supporting_facts)
    } else {
        TaskScores::PERFECT
    };
    let ent = if tasks.ent {
        ent_scores(&pred.evidence, gold.evidence())
    } else {
        TaskScores::PERFECT
    };
    let joint = joint_scores(&ans, &sent, &ent);
    ExampleScores {
        id: gold.id.clone(),
        ans,
        sent,
        ent,
        joint,
    }
}

/// Dataset-level scores: unweighted means over gold examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub count: usize,
    pub missing: usize,
    pub tasks: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ans: Option<TaskScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sent: Option<TaskScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ent: Option<TaskScores>,
    pub joint: JointScore,
    pub metadata: BTreeMap<String, String>,
}

fn mean_task(rows: &[TaskScores]) -> TaskScores {
    let n = rows.len().max(1) as f64;
    TaskScores {
        em: rows.iter().map(|s| s.em).sum::<f64>() / n,
        f1: rows.iter().map(|s| s.f1).sum::<f64>() / n,
        precision: rows.iter().map(|s| s.precision).sum::<f64>() / n,
        recall: rows.iter().map(|s| s.recall).sum::<f64>() / n,
    }
}

/// Scores every gold example; a missing prediction scores as an empty one.
pub fn evaluate(preds: &Predictions, gold: &[QaExample], tasks: Tasks) -> JointReport {
    let empty = Prediction::default();
    let mut missing = 0;
    let rows: Vec<ExampleScores> = gold
        .iter()
        .map(|g| {
            let p = preds.get(&g.id).unwrap_or_else(|| {
                missing += 1;
                &empty
            });
            score_example(p, g, tasks)
        })
        .collect();
    let pick = |f: fn(&ExampleScores) -> TaskScores| rows.iter().map(f).collect::<Vec<_>>();
    let joint_rows: Vec<TaskScores> = rows
        .iter()
        .map(|r| TaskScores {
            em: r.joint.em,
            f1: r.joint.f1,
            precision: r.joint.precision,
            recall: r.joint.recall,
        })
        .collect();
    let j = mean_task(&joint_rows);
    let mut metadata = BTreeMap::new();
    metadata.insert(
        "answer_normalization".into(),
        "lowercase, strip ASCII punctuation, drop a/an/the, collapse whitespace".into(),
    );
    if tasks.ent {
        metadata.insert(
            "triple_normalization".into(),
            "element-wise answer normalization, exact match".into(),
        );
    }
    JointReport {
        count: gold.len(),
        missing,
        tasks: tasks.names().into_iter().map(String::from).collect(),
        ans: tasks.ans.then(|| mean_task(&pick(|r| r.ans))),
        sent: tasks.sent.then(|| mean_task(&pick(|r| r.sent))),
        ent: tasks.ent.then(|| mean_task(&pick(|r| r.ent))),
        joint: JointScore {
            em: j.em,
            f1: j.f1,
            precision: j.precision,
            recall: j.recall,
        },
        metadata,
    }
}

/// Flat cell name → value table, the common shape for drops and aggregation.
/// `None` marks an undefined value (e.g. a drop against a zero base).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreTable {
    pub cells: BTreeMap<String, Option<f64>>,
}

impl ScoreTable {
    pub fn get(&self, cell: &str) -> Option<f64> {
        self.cells.get(cell).copied().flatten()
    }

    /// Reads the `cells` object of any report written by this toolkit.
    pub fn from_json(text: &str) -> Result<Self, MetricsError> {
        let v: Value = serde_json::from_str(text).map_err(|e| MetricsError::Table(e.to_string()))?;
        let cells = v
            .get("cells")
            .ok_or_else(|| MetricsError::Table("missing \"cells\" object".into()))?;
        serde_json::from_value(serde_json::json!({ "cells": cells }))
            .map_err(|e| MetricsError::Table(e.to_string()))
    }

    /// Two-column TSV; values printed with two decimals, undefined as `NA`.
    pub fn to_tsv(&self, scale: f64) -> String {
        let mut out = String::from("cell\tvalue\n");
        for (k, v) in &self.cells {
            match v {
                Some(x) => writeln!(out, "{k}\t{:.2}", x * scale).unwrap(),
                None => writeln!(out, "{k}\tNA").unwrap(),
            }
        }
        out
    }
}

impl JointReport {
    /// Cells `<task>.<metric>` for every scored task plus `joint.*`.
    pub fn to_table(&self) -> ScoreTable {
        let mut cells = BTreeMap::new();
        let mut put = |task: &str, s: &TaskScores| {
            cells.insert(format!("{task}.em"), Some(s.em));
            cells.insert(format!("{task}.f1"), Some(s.f1));
            cells.insert(format!("{task}.precision"), Some(s.precision));
            cells.insert(format!("{task}.recall"), Some(s.recall));
        };
        for (name, s) in [("ans", &self.ans), ("sent", &self.sent), ("ent", &self.ent)] {
            if let Some(s) = s {
                put(name, s);
            }
        }
        put(
            "joint",
            &TaskScores {
                em: self.joint.em,
                f1: self.joint.f1,
                precision: self.joint.precision,
                recall: self.joint.recall,
            },
        );
        ScoreTable { cells }
    }

    /// Report JSON with the structured fields and the flat `cells` table.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["kind"] = Value::from("eval");
        v["cells"] = serde_json::to_value(&self.to_table().cells).expect("cells serialize");
        let mut s = serde_json::to_string_pretty(&v).expect("report serializes");
        s.push('\n');
        s
    }
}

pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Relative drop in percent, `100 (base - perturbed) / base`, unrounded.
/// Negative values mean the perturbed score improved. `None` when base is not positive.
pub fn performance_drop(base: f64, perturbed: f64) -> Option<f64> {
    if base > 0.0 && base.is_finite() && perturbed.is_finite() {
        Some(100.0 * (base - perturbed) / base)
    } else {
        None
    }
}

/// Drop per cell shared by both tables, rounded to two decimals.
pub fn drop_table(base: &ScoreTable, perturbed: &ScoreTable) -> ScoreTable {
    let cells = base
        .cells
        .iter()
        .filter_map(|(k, b)| {
            let p = perturbed.cells.get(k)?;
            let d = match (b, p) {
                (Some(b), Some(p)) => performance_drop(*b, *p).map(round2),
                _ => None,
            };
            Some((k.clone(), d))
        })
        .collect();
    ScoreTable { cells }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    /// Arithmetic mean per cell.
    pub cells: BTreeMap<String, Option<f64>>,
    /// Sample standard deviation per cell (0 for a single run).
    pub std: BTreeMap<String, Option<f64>>,
}

impl Aggregate {
    pub fn mean_table(&self) -> ScoreTable {
        ScoreTable {
            cells: self.cells.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("aggregate serializes");
        v["kind"] = Value::from("aggregate");
        let mut s = serde_json::to_string_pretty(&v).expect("aggregate serializes");
        s.push('\n');
        s
    }

    pub fn to_tsv(&self, scale: f64) -> String {
        let mut out = format!("cell\tmean\tstd\t(runs={})\n", self.runs);
        for (k, m) in &self.cells {
            let sd = self.std.get(k).copied().flatten();
            let fmt = |x: Option<f64>| x.map_or("NA".to_string(), |x| format!("{:.2}", x * scale));
            writeln!(out, "{k}\t{}\t{}\t", fmt(*m), fmt(sd)).unwrap();
        }
        out
    }
}

/// Cell-wise mean (and sample std) of identically shaped tables.
pub fn aggregate_runs(tables: &[ScoreTable]) -> Result<Aggregate, MetricsError> {
    let first = tables.first().ok_or(MetricsError::NoReports)?;
    for (i, t) in tables.iter().enumerate().skip(1) {
        if let Some(cell) = first.cells.keys().find(|k| !t.cells.contains_key(*k)) {
            return Err(MetricsError::ShapeMismatch {
                cell: cell.clone(),
                present_in: 0,
                missing_in: i,
            });
        }
        if let Some(cell) = t.cells.keys().find(|k| !first.cells.contains_key(*k)) {
            return Err(MetricsError::ShapeMismatch {
                cell: cell.clone(),
                present_in: i,
                missing_in: 0,
            });
        }
    }
    let n = tables.len();
    let mut cells = BTreeMap::new();
    let mut std = BTreeMap::new();
    for key in first.cells.keys() {
        let vals: Option<Vec<f64>> = tables.iter().map(|t| t.cells[key]).collect();
        match vals {
            Some(vals) => {
                let mean = vals.iter().sum::<f64>() / n as f64;
                let sd = if n > 1 {
                    (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
                } else {
                    0.0
                };
                cells.insert(key.clone(), Some(mean));
                std.insert(key.clone(), Some(sd));
            }
            None => {
                cells.insert(key.clone(), None);
                std.insert(key.clone(), None);
            }
        }
    }
    Ok(Aggregate { runs: n, cells, std })
}
