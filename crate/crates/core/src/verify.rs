//! Hand-traced fixtures checked by `hopkit verify`.

use std::collections::BTreeSet;
use std::fmt;

use serde::Deserialize;

use crate::corpus::{EvidenceTriple, Paragraph, Provenance, QaExample, QuestionType, SupportingFact};
use crate::metrics::{
    aggregate_runs, answer_scores, ent_scores, joint_scores, performance_drop, round2, sent_scores,
    ScoreTable, TaskScores,
};
use crate::probe::{surrounding_window, verdict_from_sets};
use crate::runconfig::sha256_hex;
use crate::text::Stopwords;

pub const BUNDLED_FIXTURES: &str = include_str!("../data/fixtures.json");

const SCORE_TOL: f64 = 1e-9;

type Sf = (String, usize);
type Triple = (String, String, String);

#[derive(Debug, Clone, Deserialize)]
pub struct ShortcutExpect {
    #[serde(default)]
    pub surrounding: Option<Vec<String>>,
    pub overlap: Vec<String>,
    pub is_shortcut: bool,
    #[serde(default)]
    pub answer_found: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ShortcutCase {
    pub name: String,
    pub question: String,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub context: Option<Vec<(String, Vec<String>)>>,
    /// Given window; skips the window step when present.
    #[serde(default)]
    pub surrounding: Option<Vec<String>>,
    /// Overrides the bundled stopword list.
    #[serde(default)]
    pub stopwords: Option<Vec<String>>,
    pub expect: ShortcutExpect,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct ScoreExpect {
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum MetricInput {
    Ans { pred: String, gold: String },
    Sent { pred: Vec<Sf>, gold: Vec<Sf> },
    Ent { pred: Vec<Triple>, gold: Vec<Triple> },
}

#[derive(Debug, Clone, Deserialize)]
pub struct MetricCase {
    pub name: String,
    #[serde(flatten)]
    pub input: MetricInput,
    pub expect: ScoreExpect,
}

#[derive(Debug, Clone, Deserialize)]
pub struct JointCase {
    pub name: String,
    pub ans: (String, String),
    pub sent: (Vec<Sf>, Vec<Sf>),
    pub ent: (Vec<Triple>, Vec<Triple>),
    pub expect: ScoreExpect,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DropCase {
    pub name: String,
    pub base: f64,
    pub pert: f64,
    pub expect: Option<f64>,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AggregateCase {
    pub name: String,
    pub runs: Vec<f64>,
    pub expect: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Fixtures {
    pub shortcut: Vec<ShortcutCase>,
    pub metrics: Vec<MetricCase>,
    pub joint: Vec<JointCase>,
    pub drop: Vec<DropCase>,
    pub aggregate: Vec<AggregateCase>,
}

impl Fixtures {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_FIXTURES).expect("bundled fixtures parse")
    }

    pub fn len(&self) -> usize {
        self.shortcut.len() + self.metrics.len() + self.joint.len() + self.drop.len() + self.aggregate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn fixtures_digest(text: &str) -> String {
    sha256_hex(text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub group: &'static str,
    pub name: String,
    /// Empty when the check passed.
    pub failures: Vec<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            write!(f, "PASS  {}/{}", self.group, self.name)
        } else {
            write!(f, "FAIL  {}/{}: {}", self.group, self.name, self.failures.join("; "))
        }
    }
}

fn set(words: &[String]) -> BTreeSet<String> {
    words.iter().cloned().collect()
}

fn sfs(v: &[Sf]) -> Vec<SupportingFact> {
    v.iter().map(|(t, i)| SupportingFact::new(t.clone(), *i)).collect()
}

fn triples(v: &[Triple]) -> Vec<EvidenceTriple> {
    v.iter().map(|(s, r, o)| EvidenceTriple::new(s.clone(), r.clone(), o.clone())).collect()
}

fn compare(out: &mut Vec<String>, field: &str, got: f64, want: f64, tol: f64) {
    if (got - want).abs() > tol {
        out.push(format!("{field}: got {got}, expected {want}"));
    }
}

fn compare_scores(out: &mut Vec<String>, got: &TaskScores, want: &ScoreExpect) {
    compare(out, "em", got.em, want.em, SCORE_TOL);
    compare(out, "f1", got.f1, want.f1, SCORE_TOL);
    compare(out, "precision", got.precision, want.precision, SCORE_TOL);
    compare(out, "recall", got.recall, want.recall, SCORE_TOL);
}

fn check_shortcut(c: &ShortcutCase, default_sw: &Stopwords) -> Vec<String> {
    let mut out = Vec::new();
    let (surrounding, found) = match (&c.surrounding, &c.context) {
        (Some(s), _) => (set(s), true),
        (None, Some(ctx)) => {
            let ex = QaExample {
                id: c.name.clone(),
                question: c.question.clone(),
                answer: c.answer.clone().unwrap_or_default(),
                qtype: QuestionType::Bridge,
                context: ctx.iter().map(|(t, s)| Paragraph::new(t.clone(), s.clone())).collect(),
                supporting_facts: vec![],
                evidence_sets: vec![],
                provenance: Provenance::default(),
                extra: Default::default(),
            };
            let sw = c.stopwords.as_ref().map(Stopwords::from_words);
            let w = surrounding_window(&ex, sw.as_ref().unwrap_or(default_sw));
            (w.words, w.answer_found)
        }
        (None, None) => return vec!["case needs `surrounding` or `context`".into()],
    };
    let v = verdict_from_sets(&c.name, surrounding, &c.question, found);
    if let Some(s) = &c.expect.surrounding {
        if v.surrounding != set(s) {
            out.push(format!("S: got {:?}, expected {:?}", v.surrounding, set(s)));
        }
    }
    if v.overlap != set(&c.expect.overlap) {
        out.push(format!("O: got {:?}, expected {:?}", v.overlap, set(&c.expect.overlap)));
    }
    if v.is_shortcut != c.expect.is_shortcut {
        out.push(format!("is_shortcut: got {}, expected {}", v.is_shortcut, c.expect.is_shortcut));
    }
    if let Some(f) = c.expect.answer_found {
        if v.answer_found != f {
            out.push(format!("answer_found: got {}, expected {f}", v.answer_found));
        }
    }
    out
}

/// Runs every fixture; one result per case, in file order.
pub fn verify_fixtures(fx: &Fixtures) -> Vec<CheckResult> {
    let sw = Stopwords::default();
    let mut results = Vec::with_capacity(fx.len());
    for c in &fx.shortcut {
        results.push(CheckResult {
            group: "shortcut",
            name: c.name.clone(),
            failures: check_shortcut(c, &sw),
        });
    }
    for c in &fx.metrics {
        let got = match &c.input {
            MetricInput::Ans { pred, gold } => answer_scores(pred, gold),
            MetricInput::Sent { pred, gold } => sent_scores(&sfs(pred), &sfs(gold)),
            MetricInput::Ent { pred, gold } => ent_scores(&triples(pred), &triples(gold)),
        };
        let mut failures = Vec::new();
        compare_scores(&mut failures, &got, &c.expect);
        results.push(CheckResult {
            group: "metrics",
            name: c.name.clone(),
            failures,
        });
    }
    for c in &fx.joint {
        let a = answer_scores(&c.ans.0, &c.ans.1);
        let s = sent_scores(&sfs(&c.sent.0), &sfs(&c.sent.1));
        let e = ent_scores(&triples(&c.ent.0), &triples(&c.ent.1));
        let j = joint_scores(&a, &s, &e);
        let got = TaskScores {
            em: j.em,
            f1: j.f1,
            precision: j.precision,
            recall: j.recall,
        };
        let mut failures = Vec::new();
        compare_scores(&mut failures, &got, &c.expect);
        results.push(CheckResult {
            group: "joint",
            name: c.name.clone(),
            failures,
        });
    }
    for c in &fx.drop {
        let got = performance_drop(c.base, c.pert).map(round2);
        let failures = match (got, c.expect) {
            (Some(g), Some(w)) if (g - w).abs() <= c.tol + 1e-9 => vec![],
            (None, None) => vec![],
            _ => vec![format!("drop: got {got:?}, expected {:?}", c.expect)],
        };
        results.push(CheckResult {
            group: "drop",
            name: c.name.clone(),
            failures,
        });
    }
    for c in &fx.aggregate {
        let tables: Vec<ScoreTable> = c
            .runs
            .iter()
            .map(|v| ScoreTable {
                cells: [("value".to_string(), Some(*v))].into_iter().collect(),
            })
            .collect();
        let failures = match aggregate_runs(&tables) {
            Ok(a) => {
                let mean = a.cells["value"].map(round2);
                match mean {
                    Some(m) if (m - c.expect).abs() <= c.tol + 1e-9 => vec![],
                    _ => vec![format!("mean: got {mean:?}, expected {}", c.expect)],
                }
            }
            Err(e) => vec![e.to_string()],
        };
        results.push(CheckResult {
            group: "aggregate",
            name: c.name.clone(),
            failures,
        });
    }
    results
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixtures_all_pass() {
        let fx = Fixtures::bundled();
        assert!(fx.shortcut.len() >= 12);
        let results = verify_fixtures(&fx);
        let failed: Vec<String> = results.iter().filter(|r| !r.passed()).map(|r| r.to_string()).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn tampered_value_fails_by_name() {
        let tampered = BUNDLED_FIXTURES.replacen("\"expect\": 23.69", "\"expect\": 23.79", 1);
        assert_ne!(tampered, BUNDLED_FIXTURES);
        let results = verify_fixtures(&Fixtures::from_json(&tampered).unwrap());
        let failed: Vec<&CheckResult> = results.iter().filter(|r| !r.passed()).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "reduction-52.89-40.36");
        assert!(failed[0].to_string().starts_with("FAIL  drop/reduction-52.89-40.36"));
    }
}
