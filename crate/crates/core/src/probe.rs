//! Position-bias counts, the word-overlap shortcut heuristic, and two
//! non-neural baselines that exploit those shortcuts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{CoarseType, QaExample, SupportingFact};
use crate::metrics::{Prediction, Predictions};
use crate::text::{find_run, mentions_answer, tokenize, Stopwords};

/// Words on each side of the answer span that form the surrounding set.
pub const WINDOW: usize = 5;
/// Minimum overlap size for a shortcut.
pub const MIN_OVERLAP: usize = 2;
/// Overlap ratio threshold |O|/|S| >= 65/100, compared in integers.
pub const RATIO_NUM: usize = 65;
pub const RATIO_DEN: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PositionCounts {
    pub n_position0: usize,
    pub n_position_other: usize,
    pub fraction_position0: f64,
    pub fraction_other: f64,
}

impl PositionCounts {
    fn add(&mut self, sentence: usize) {
        if sentence == 0 {
            self.n_position0 += 1;
        } else {
            self.n_position_other += 1;
        }
    }

    fn finish(mut self) -> Self {
        let total = self.n_position0 + self.n_position_other;
        if total > 0 {
            self.fraction_position0 = self.n_position0 as f64 / total as f64;
            self.fraction_other = self.n_position_other as f64 / total as f64;
        }
        self
    }

    pub fn total(&self) -> usize {
        self.n_position0 + self.n_position_other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBiasReport {
    #[serde(flatten)]
    pub overall: PositionCounts,
    pub by_qtype: BTreeMap<CoarseType, PositionCounts>,
}

/// Counts every supporting fact once, at position 0 or elsewhere.
pub fn position_histogram(examples: &[QaExample]) -> PositionBiasReport {
    let mut overall = PositionCounts::default();
    let mut by_qtype: BTreeMap<CoarseType, PositionCounts> = BTreeMap::new();
    for ex in examples {
        let bucket = by_qtype.entry(ex.qtype.coarse()).or_default();
        for sf in &ex.supporting_facts {
            overall.add(sf.sentence);
            bucket.add(sf.sentence);
        }
    }
    PositionBiasReport {
        overall: overall.finish(),
        by_qtype: by_qtype.into_iter().map(|(k, v)| (k, v.finish())).collect(),
    }
}

/// Surrounding words of the first answer occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Window {
    pub words: BTreeSet<String>,
    pub answer_found: bool,
    /// Paragraph title where the answer was anchored.
    pub anchor: Option<String>,
}

/// Up to five tokens either side of the first answer occurrence, stopwords removed.
/// The window stays inside the anchoring paragraph but may cross sentences.
pub fn surrounding_window(example: &QaExample, stopwords: &Stopwords) -> Window {
    let needle = tokenize(&example.answer);
    if needle.is_empty() {
        return Window::default();
    }
    for p in &example.context {
        let tokens: Vec<String> = p.sentences.iter().flat_map(|s| tokenize(s)).collect();
        if let Some(start) = find_run(&tokens, &needle) {
            let end = start + needle.len();
            let left = &tokens[start.saturating_sub(WINDOW)..start];
            let right = &tokens[end..(end + WINDOW).min(tokens.len())];
            let words = left
                .iter()
                .chain(right)
                .filter(|t| !stopwords.contains(t))
                .cloned()
                .collect();
            return Window {
                words,
                answer_found: true,
                anchor: Some(p.title.clone()),
            };
        }
    }
    Window::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortcutVerdict {
    pub example_id: String,
    pub surrounding: BTreeSet<String>,
    pub overlap: BTreeSet<String>,
    /// |O|/|S|; `None` when S is empty.
    pub ratio: Option<f64>,
    pub is_shortcut: bool,
    pub answer_found: bool,
}

/// Threshold rule on set sizes: |O| >= 2, |S| > 0 and |O|/|S| >= 0.65.
pub fn is_shortcut(overlap: usize, surrounding: usize) -> bool {
    overlap >= MIN_OVERLAP && surrounding > 0 && overlap * RATIO_DEN >= surrounding * RATIO_NUM
}

pub fn verdict_from_sets(
    example_id: &str,
    surrounding: BTreeSet<String>,
    question: &str,
    answer_found: bool,
) -> ShortcutVerdict {
    let q: BTreeSet<String> = tokenize(question).into_iter().collect();
    let overlap: BTreeSet<String> = surrounding.intersection(&q).cloned().collect();
    let ratio = (!surrounding.is_empty()).then(|| overlap.len() as f64 / surrounding.len() as f64);
    ShortcutVerdict {
        example_id: example_id.to_string(),
        is_shortcut: is_shortcut(overlap.len(), surrounding.len()),
        surrounding,
        overlap,
        ratio,
        answer_found,
    }
}

pub fn detect_overlap_shortcut(example: &QaExample, stopwords: &Stopwords) -> ShortcutVerdict {
    let w = surrounding_window(example, stopwords);
    verdict_from_sets(&example.id, w.words, &example.question, w.answer_found)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub considered: usize,
    pub flagged: usize,
    pub answer_not_found: usize,
    pub bridge_only: bool,
    pub stopwords_digest: String,
    pub stopword_count: usize,
    #[serde(skip)]
    pub verdicts: Vec<ShortcutVerdict>,
}

/// Runs the heuristic over a dataset, by default on bridge questions only.
pub fn overlap_report(
    examples: &[QaExample],
    stopwords: &Stopwords,
    bridge_only: bool,
) -> OverlapReport {
    let verdicts: Vec<ShortcutVerdict> = examples
        .iter()
        .filter(|e| !bridge_only || e.qtype.coarse() == CoarseType::Bridge)
        .map(|e| detect_overlap_shortcut(e, stopwords))
        .collect();
    OverlapReport {
        considered: verdicts.len(),
        flagged: verdicts.iter().filter(|v| v.is_shortcut).count(),
        answer_not_found: verdicts.iter().filter(|v| !v.answer_found).count(),
        bridge_only,
        stopwords_digest: stopwords.digest(),
        stopword_count: stopwords.len(),
        verdicts,
    }
}

/// Predicted answer-bearing sentences and whether they contain the gold answer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePrediction {
    pub sentences: Vec<SupportingFact>,
    pub hit: bool,
}

fn score_hit(example: &QaExample, sentences: Vec<SupportingFact>) -> SentencePrediction {
    let hit = sentences
        .iter()
        .filter_map(|sf| example.sentence(sf))
        .any(|s| mentions_answer(s, &example.answer));
    SentencePrediction { sentences, hit }
}

/// Predicts the first sentence of every gold paragraph.
pub fn baseline_position0(example: &QaExample) -> SentencePrediction {
    let sentences = example
        .gold_titles()
        .into_iter()
        .filter(|t| example.paragraph(t).is_some_and(|p| !p.sentences.is_empty()))
        .map(|t| SupportingFact::new(t, 0))
        .collect();
    score_hit(example, sentences)
}

/// Predicts the context sentence sharing the most non-stopword tokens with the question.
/// Ties go to the earlier paragraph, then the lower sentence index.
pub fn baseline_overlap(example: &QaExample, stopwords: &Stopwords) -> SentencePrediction {
    let q: BTreeSet<String> = tokenize(&example.question)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect();
    let mut best: Option<(usize, SupportingFact)> = None;
    for p in &example.context {
        for (i, s) in p.sentences.iter().enumerate() {
            let words: BTreeSet<String> = tokenize(s).into_iter().collect();
            let n = words.intersection(&q).count();
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, SupportingFact::new(p.title.clone(), i)));
            }
        }
    }
    score_hit(example, best.map(|(_, sf)| vec![sf]).unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Position0,
    Overlap,
}

impl BaselineKind {
    pub fn run(self, example: &QaExample, stopwords: &Stopwords) -> SentencePrediction {
        match self {
            BaselineKind::Position0 => baseline_position0(example),
            BaselineKind::Overlap => baseline_overlap(example, stopwords),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HitRate {
    pub examples: usize,
    pub hits: usize,
    pub rate: f64,
}

pub fn hit_rate<'a, I>(examples: I, kind: BaselineKind, stopwords: &Stopwords) -> HitRate
where
    I: IntoIterator<Item = &'a QaExample>,
{
    let (mut n, mut hits) = (0, 0);
    for ex in examples {
        n += 1;
        if kind.run(ex, stopwords).hit {
            hits += 1;
        }
    }
    HitRate {
        examples: n,
        hits,
        rate: if n > 0 { hits as f64 / n as f64 } else { 0.0 },
    }
}

/// Baseline output as a prediction file: predicted sentences as `sp`,
/// the first predicted sentence's text as the answer.
pub fn baseline_predictions(
    examples: &[QaExample],
    kind: BaselineKind,
    stopwords: &Stopwords,
) -> Predictions {
    examples
        .iter()
        .map(|ex| {
            let pred = kind.run(ex, stopwords);
            let answer = pred
                .sentences
                .first()
                .and_then(|sf| ex.sentence(sf))
                .unwrap_or_default()
                .to_string();
            (
                ex.id.clone(),
                Prediction {
                    answer,
                    sp: pred.sentences,
                    evidence: Vec::new(),
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paragraph, Provenance, QuestionType};

    fn ex(question: &str, answer: &str, paragraphs: &[(&str, &[&str])], sfs: &[(&str, usize)]) -> QaExample {
        QaExample {
            id: "t".into(),
            question: question.into(),
            answer: answer.into(),
            qtype: QuestionType::Bridge,
            context: paragraphs
                .iter()
                .map(|(t, s)| Paragraph::new(*t, s.iter().map(|x| x.to_string()).collect()))
                .collect(),
            supporting_facts: sfs.iter().map(|(t, i)| SupportingFact::new(*t, *i)).collect(),
            evidence_sets: vec![],
            provenance: Provenance::default(),
            extra: Default::default(),
        }
    }

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn histogram_examples() {
        let sents: &[&str] = &["a", "b", "c"];
        let r = position_histogram(&[ex("q", "a", &[("P", sents)], &[("P", 0), ("P", 0)])]);
        assert_eq!(r.overall.fraction_position0, 1.0);
        let r = position_histogram(&[ex("q", "a", &[("P", sents)], &[("P", 0), ("P", 2)])]);
        assert_eq!((r.overall.fraction_position0, r.overall.fraction_other), (0.5, 0.5));
        let r = position_histogram(&[]);
        assert_eq!(r.overall, PositionCounts::default());
    }

    #[test]
    fn window_with_explicit_stopwords() {
        let e = ex("q", "James Cameron", &[("P", &["James Cameron directed the film Titanic himself"])], &[]);
        let w = surrounding_window(&e, &Stopwords::from_words(["the"]));
        assert!(w.answer_found);
        assert_eq!(w.words, set(&["directed", "film", "titanic", "himself"]));
    }

    #[test]
    fn window_james_cameron_trace() {
        let e = ex("q", "James Cameron", &[("P", &["James Cameron directed the film Titanic in 1997"])], &[]);
        let w = surrounding_window(&e, &Stopwords::default());
        // right window: directed the film titanic in; "1997" is the sixth token
        assert_eq!(w.words, set(&["directed", "film", "titanic"]));
    }

    #[test]
    fn window_crosses_sentences_not_paragraphs() {
        let e = ex(
            "q",
            "Rome",
            &[
                ("P1", &["Alpha beta gamma delta.", "Rome epsilon zeta."]),
                ("P2", &["eta theta iota kappa lambda"]),
            ],
            &[],
        );
        let w = surrounding_window(&e, &Stopwords::empty());
        assert_eq!(w.words, set(&["beta", "gamma", "delta", "epsilon", "zeta", "alpha"]));
        assert_eq!(w.anchor.as_deref(), Some("P1"));
    }

    #[test]
    fn window_uses_first_occurrence() {
        let e = ex("q", "Rome", &[("A", &["x Rome y"]), ("B", &["p Rome q"])], &[]);
        let w = surrounding_window(&e, &Stopwords::empty());
        assert_eq!(w.words, set(&["x", "y"]));
    }

    #[test]
    fn window_not_found_is_flagged() {
        let e = ex("q", "Paris", &[("A", &["nothing here"])], &[]);
        let w = surrounding_window(&e, &Stopwords::default());
        assert!(!w.answer_found && w.words.is_empty());
        let v = detect_overlap_shortcut(&e, &Stopwords::default());
        assert!(!v.is_shortcut && v.ratio.is_none() && !v.answer_found);
    }

    #[test]
    fn threshold_semantics() {
        assert!(is_shortcut(2, 3));
        assert!(!is_shortcut(2, 4));
        assert!(is_shortcut(13, 20));
        assert!(!is_shortcut(12, 20));
        assert!(!is_shortcut(1, 1));
        assert!(!is_shortcut(0, 0));
    }

    #[test]
    fn titanic_question_is_flagged() {
        let v = verdict_from_sets(
            "t",
            set(&["directed", "film", "titanic", "1997"]),
            "Who directed the film Titanic released in 1997",
            true,
        );
        assert_eq!(v.overlap, v.surrounding);
        assert_eq!(v.ratio, Some(1.0));
        assert!(v.is_shortcut);
    }

    #[test]
    fn position0_baseline() {
        let e = ex("q", "Paris", &[("A", &["Paris is big.", "x"]), ("B", &["y"])], &[("A", 1)]);
        let p = baseline_position0(&e);
        assert_eq!(p.sentences, vec![SupportingFact::new("A", 0)]);
        assert!(p.hit);
        let e = ex("q", "Paris", &[("A", &["a", "b", "c", "Paris is big."])], &[("A", 3)]);
        assert!(!baseline_position0(&e).hit);
    }

    #[test]
    fn overlap_baseline_and_tie_break() {
        let e = ex(
            "Which river flows through Vienna",
            "Danube",
            &[("A", &["Unrelated words here.", "Which river flows through Vienna Danube"])],
            &[],
        );
        let p = baseline_overlap(&e, &Stopwords::default());
        assert_eq!(p.sentences, vec![SupportingFact::new("A", 1)]);
        assert!(p.hit);

        let e = ex("river Vienna", "x", &[("A", &["no"]), ("B", &["the river", "Vienna too"]), ("C", &["river"])], &[]);
        let p = baseline_overlap(&e, &Stopwords::default());
        assert_eq!(p.sentences, vec![SupportingFact::new("B", 0)]);
    }

    #[test]
    fn baselines_are_pure() {
        let e = ex("river Vienna", "Vienna", &[("B", &["the river", "Vienna too"])], &[("B", 1)]);
        let sw = Stopwords::default();
        assert_eq!(baseline_overlap(&e, &sw), baseline_overlap(&e, &sw));
        assert_eq!(baseline_position0(&e), baseline_position0(&e));
    }
}
