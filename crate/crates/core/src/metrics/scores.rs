use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{EvidenceTriple, SupportingFact};
use crate::text::{answer_tokens, normalize_answer};

/// Answers that never earn partial token credit against a different answer.
const CLOSED_ANSWERS: &[&str] = &["yes", "no", "noanswer"];

/// EM, F1, precision and recall for one task (per example, or a dataset mean).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaskScores {
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

impl TaskScores {
    pub const ZERO: TaskScores = TaskScores {
        em: 0.0,
        f1: 0.0,
        precision: 0.0,
        recall: 0.0,
    };

    /// Stand-in for a task that is not evaluated.
    pub const PERFECT: TaskScores = TaskScores {
        em: 1.0,
        f1: 1.0,
        precision: 1.0,
        recall: 1.0,
    };

    pub fn from_pr(em: bool, precision: f64, recall: f64) -> Self {
        Self {
            em: if em { 1.0 } else { 0.0 },
            f1: harmonic(precision, recall),
            precision,
            recall,
        }
    }
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Exact match and bag-of-tokens F1 over normalized answers.
pub fn answer_scores(pred: &str, gold: &str) -> TaskScores {
    let np = normalize_answer(pred);
    let ng = normalize_answer(gold);
    let em = np == ng;
    if !em && (CLOSED_ANSWERS.contains(&np.as_str()) || CLOSED_ANSWERS.contains(&ng.as_str())) {
        return TaskScores::ZERO;
    }
    let pt = answer_tokens(pred);
    let gt = answer_tokens(gold);
    if pt.is_empty() && gt.is_empty() {
        return TaskScores::PERFECT;
    }
    let same = common_count(&pt, &gt);
    if same == 0 {
        return TaskScores::from_pr(em, 0.0, 0.0);
    }
    let precision = same as f64 / pt.len() as f64;
    let recall = same as f64 / gt.len() as f64;
    TaskScores::from_pr(em, precision, recall)
}

/// Size of the multiset intersection of two token lists.
fn common_count(a: &[String], b: &[String]) -> usize {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in a {
        *counts.entry(t).or_default() += 1;
    }
    let mut same = 0;
    for t in b {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                same += 1;
            }
        }
    }
    same
}

fn set_scores<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> TaskScores {
    if pred.is_empty() && gold.is_empty() {
        return TaskScores::PERFECT;
    }
    let tp = pred.intersection(gold).count() as f64;
    let fp = pred.len() as f64 - tp;
    let fn_ = gold.len() as f64 - tp;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    TaskScores::from_pr(fp == 0.0 && fn_ == 0.0, precision, recall)
}

/// Set precision/recall over exact (title, sentence index) membership.
pub fn sent_scores(pred: &[SupportingFact], gold: &[SupportingFact]) -> TaskScores {
    let p: BTreeSet<&SupportingFact> = pred.iter().collect();
    let g: BTreeSet<&SupportingFact> = gold.iter().collect();
    set_scores(&p, &g)
}

/// Triple with every element passed through answer normalization.
pub fn normalize_triple(t: &EvidenceTriple) -> (String, String, String) {
    (
        normalize_answer(&t.subject),
        normalize_answer(&t.relation),
        normalize_answer(&t.object),
    )
}

/// Set scores over element-wise normalized triples.
pub fn ent_scores(pred: &[EvidenceTriple], gold: &[EvidenceTriple]) -> TaskScores {
    let p: BTreeSet<_> = pred.iter().map(normalize_triple).collect();
    let g: BTreeSet<_> = gold.iter().map(normalize_triple).collect();
    set_scores(&p, &g)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointScore {
    pub em: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Per-example joint metric: precision and recall are products over tasks,
/// EM is the conjunction. Pass [`TaskScores::PERFECT`] for an unevaluated task.
pub fn joint_scores(ans: &TaskScores, sent: &TaskScores, ent: &TaskScores) -> JointScore {
    let precision = ans.precision * ent.precision * sent.precision;
    let recall = ans.recall * ent.recall * sent.recall;
    let all_exact = ans.em == 1.0 && sent.em == 1.0 && ent.em == 1.0;
    JointScore {
        em: if all_exact { 1.0 } else { 0.0 },
        f1: harmonic(precision, recall),
        precision,
        recall,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn answer_examples() {
        let s = answer_scores("yes", "yes");
        assert_eq!((s.em, s.f1), (1.0, 1.0));
        let s = answer_scores("Obama", "Barack Obama");
        assert_eq!(s.em, 0.0);
        assert!(close(s.precision, 1.0) && close(s.recall, 0.5) && close(s.f1, 2.0 / 3.0));
        assert_eq!(answer_scores("yes", "no"), TaskScores::ZERO);
    }

    #[test]
    fn yes_no_never_partially_matches_spans() {
        assert_eq!(answer_scores("yes it was", "yes"), TaskScores::ZERO);
        assert_eq!(answer_scores("no", "no way"), TaskScores::ZERO);
    }

    #[test]
    fn normalization_applies_before_matching() {
        let s = answer_scores("the Beatles.", "Beatles");
        assert_eq!(s, TaskScores::PERFECT);
    }

    #[test]
    fn empty_answers_are_an_exact_match() {
        assert_eq!(answer_scores("", "the"), TaskScores::PERFECT);
        assert_eq!(answer_scores("", "x"), TaskScores::ZERO);
    }

    #[test]
    fn sentence_sets() {
        let gold = vec![SupportingFact::new("A", 0), SupportingFact::new("B", 1)];
        assert_eq!(sent_scores(&gold, &gold), TaskScores::PERFECT);
        let mut pred = gold.clone();
        pred.push(SupportingFact::new("C", 2));
        let s = sent_scores(&pred, &gold);
        assert!(close(s.precision, 2.0 / 3.0) && close(s.recall, 1.0) && close(s.f1, 0.8));
        assert_eq!(s.em, 0.0);
        assert_eq!(sent_scores(&[], &gold), TaskScores::ZERO);
        // duplicates collapse as a set
        let dup = vec![gold[0].clone(), gold[0].clone(), gold[1].clone()];
        assert_eq!(sent_scores(&dup, &gold), TaskScores::PERFECT);
    }

    #[test]
    fn triple_sets() {
        let g = EvidenceTriple::new("Polish-Russian War", "director", "Xawery Żuławski");
        assert_eq!(ent_scores(std::slice::from_ref(&g), std::slice::from_ref(&g)).em, 1.0);
        let gold = vec![EvidenceTriple::new("A", "director", "The Smith")];
        let pred = vec![EvidenceTriple::new("A", "director", "Smith")];
        assert_eq!(ent_scores(&pred, &gold).em, 1.0);

        let gold = vec![g.clone(), EvidenceTriple::new("X", "country", "Canada")];
        let pred = vec![g, EvidenceTriple::new("X", "country", "France")];
        let s = ent_scores(&pred, &gold);
        assert!(close(s.precision, 0.5) && close(s.recall, 0.5) && close(s.f1, 0.5));
    }

    #[test]
    fn joint_examples() {
        let j = joint_scores(&TaskScores::PERFECT, &TaskScores::PERFECT, &TaskScores::PERFECT);
        assert_eq!((j.em, j.f1), (1.0, 1.0));

        let half = TaskScores { em: 0.0, f1: harmonic(0.5, 1.0), precision: 0.5, recall: 1.0 };
        let j = joint_scores(&TaskScores::PERFECT, &half, &TaskScores::PERFECT);
        assert!(close(j.precision, 0.5) && close(j.recall, 1.0) && close(j.f1, 2.0 / 3.0));
        assert_eq!(j.em, 0.0);

        let j = joint_scores(&TaskScores::PERFECT, &TaskScores::ZERO, &TaskScores::PERFECT);
        assert_eq!(j.f1, 0.0);
    }
}
