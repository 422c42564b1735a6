//! Dataset ingestion, validation, re-splitting and annotation selection.

mod io;
mod model;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

pub use io::{
    load_dataset, load_overlay, merge_overlay, parse_dataset, parse_overlay, parse_record,
    to_json_string, to_record, write_dataset, Format, LoadOptions, Loaded, Overlay, RecordError,
};
pub use model::{
    CoarseType, EvidenceTriple, FieldIssue, Paragraph, Provenance, ProvenanceKind, QaExample,
    QuestionType, SupportingFact,
};

use crate::seed;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Syntax { line: Option<usize>, message: String },
    #[error("{} invalid record(s); first: {}", .0.len(), .0[0])]
    Invalid(Vec<RecordError>),
    #[error("overlay ids with no base example: {}", .0.join(", "))]
    OrphanOverlay(Vec<String>),
    #[error("an r4c overlay must be merged onto previously loaded HotpotQA examples")]
    OverlayNeedsBase,
    #[error("requested {requested} examples but only {available} are available (short by {})", requested - available)]
    Insufficient { requested: usize, available: usize },
    #[error("example {0} has no evidence set")]
    NoEvidence(String),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SplitOptions {
    /// Allocate each coarse question type proportionally across train and dev.
    pub stratified: bool,
}

/// Seeded disjoint train/dev split of exactly the requested sizes.
///
/// Examples are ordered by id before shuffling so the result does not depend on
/// input order. Each split is returned in id order.
pub fn build_small_split(
    examples: &[QaExample],
    train_size: usize,
    dev_size: usize,
    seed: u64,
    opts: SplitOptions,
) -> Result<(Vec<QaExample>, Vec<QaExample>), CorpusError> {
    let requested = train_size + dev_size;
    if requested > examples.len() {
        return Err(CorpusError::Insufficient {
            requested,
            available: examples.len(),
        });
    }
    if let Some(ex) = examples.iter().find(|e| e.evidence_sets.is_empty()) {
        return Err(CorpusError::NoEvidence(ex.id.clone()));
    }

    let mut sorted: Vec<&QaExample> = examples.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rng = seed::rng_from(seed);

    let (mut train, mut dev): (Vec<&QaExample>, Vec<&QaExample>) = if opts.stratified {
        stratified_pick(sorted, train_size, dev_size, &mut rng)
    } else {
        sorted.shuffle(&mut rng);
        let train = sorted[..train_size].to_vec();
        let dev = sorted[train_size..requested].to_vec();
        (train, dev)
    };
    train.sort_by(|a, b| a.id.cmp(&b.id));
    dev.sort_by(|a, b| a.id.cmp(&b.id));
    Ok((
        train.into_iter().cloned().collect(),
        dev.into_iter().cloned().collect(),
    ))
}

// Largest-remainder allocation of both split sizes over coarse question types.
fn stratified_pick<'a>(
    sorted: Vec<&'a QaExample>,
    train_size: usize,
    dev_size: usize,
    rng: &mut seed::SeededRng,
) -> (Vec<&'a QaExample>, Vec<&'a QaExample>) {
    let mut groups: BTreeMap<CoarseType, Vec<&QaExample>> = BTreeMap::new();
    for ex in sorted {
        groups.entry(ex.qtype.coarse()).or_default().push(ex);
    }
    for g in groups.values_mut() {
        g.shuffle(rng);
    }
    let total: usize = groups.values().map(Vec::len).sum();
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let train_quota = allocate(&sizes, total, train_size);
    let remaining: Vec<usize> = sizes.iter().zip(&train_quota).map(|(s, t)| s - t).collect();
    let dev_quota = allocate(&remaining, remaining.iter().sum(), dev_size);

    let mut train = Vec::with_capacity(train_size);
    let mut dev = Vec::with_capacity(dev_size);
    for ((group, t), d) in groups.values().zip(&train_quota).zip(&dev_quota) {
        train.extend_from_slice(&group[..*t]);
        dev.extend_from_slice(&group[*t..t + d]);
    }
    (train, dev)
}

fn allocate(sizes: &[usize], total: usize, want: usize) -> Vec<usize> {
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<usize> = sizes.iter().map(|s| s * want / total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // larger fractional remainder first, then group order
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * want) % total));
    let mut left = want - quota.iter().sum::<usize>();
    while left > 0 {
        let mut progressed = false;
        for &i in &order {
            if left > 0 && quota[i] < sizes[i] {
                quota[i] += 1;
                left -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    quota
}

/// Keeps one evidence annotation chosen uniformly per (example id, seed).
pub fn select_annotation(example: &QaExample, seed: u64) -> Result<QaExample, CorpusError> {
    if example.evidence_sets.is_empty() {
        return Err(CorpusError::NoEvidence(example.id.clone()));
    }
    let mut out = example.clone();
    if example.evidence_sets.len() > 1 {
        let mut rng = seed::rng_for(seed, "select-annotation", &example.id);
        let pick = rng.gen_range(0..example.evidence_sets.len());
        out.evidence_sets = vec![example.evidence_sets[pick].clone()];
    }
    Ok(out)
}

/// Index of the annotation [`select_annotation`] keeps.
pub fn selected_annotation_index(example: &QaExample, seed: u64) -> Option<usize> {
    match example.evidence_sets.len() {
        0 => None,
        1 => Some(0),
        n => Some(seed::rng_for(seed, "select-annotation", &example.id).gen_range(0..n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn example(id: &str, n_sets: usize) -> QaExample {
        QaExample {
            id: id.into(),
            question: "Who is the father of Joan of Valois?".into(),
            answer: "Charles of Valois".into(),
            qtype: QuestionType::Compositional,
            context: vec![Paragraph::new(
                "Joan of Valois",
                vec!["Joan of Valois was the daughter of Charles of Valois.".into()],
            )],
            supporting_facts: vec![SupportingFact::new("Joan of Valois", 0)],
            evidence_sets: (0..n_sets)
                .map(|i| vec![EvidenceTriple::new("Joan of Valois", format!("r{i}"), "Charles of Valois")])
                .collect(),
            provenance: Provenance::default(),
            extra: Default::default(),
        }
    }

    fn record() -> serde_json::Value {
        json!({
            "_id": "q1",
            "question": "Who was born first, A or B?",
            "answer": "A",
            "type": "comparison",
            "level": "hard",
            "context": [["A", ["A was born in 1900.", "A was a painter."]], ["B", ["B was born in 1910."]]],
            "supporting_facts": [["A", 0], ["B", 0]],
            "evidences": [["A", "date of birth", "1900"], ["B", "date of birth", "1910"]]
        })
    }

    #[test]
    fn empty_array_loads_nothing() {
        let loaded = parse_dataset("[]", LoadOptions::default()).unwrap();
        assert!(loaded.examples.is_empty() && loaded.rejected.is_empty());
        let loaded = parse_dataset("  \n", LoadOptions::default()).unwrap();
        assert!(loaded.examples.is_empty());
    }

    #[test]
    fn parses_array_and_ndjson_alike() {
        let arr = serde_json::to_string(&json!([record()])).unwrap();
        let nd = serde_json::to_string(&record()).unwrap() + "\n";
        let a = parse_dataset(&arr, LoadOptions::default()).unwrap().examples;
        let b = parse_dataset(&nd, LoadOptions::default()).unwrap().examples;
        assert_eq!(a, b);
        assert_eq!(a[0].evidence_sets.len(), 1);
        assert_eq!(a[0].extra["level"], json!("hard"));
    }

    #[test]
    fn absent_title_is_named() {
        let mut r = record();
        r["supporting_facts"] = json!([["Nowhere", 0]]);
        let text = serde_json::to_string(&json!([r])).unwrap();
        let err = parse_dataset(&text, LoadOptions::default()).unwrap_err();
        match err {
            CorpusError::Invalid(errs) => {
                assert_eq!(errs.len(), 1);
                assert_eq!(errs[0].index, 0);
                assert_eq!(errs[0].path, "supporting_facts[0][0]");
                assert!(errs[0].message.contains("\"Nowhere\""), "{}", errs[0].message);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_field_reports_index_and_path() {
        let mut bad = record();
        bad["context"][1][1][0] = json!(5);
        let text = serde_json::to_string(&json!([record(), bad])).unwrap();
        let err = parse_dataset(&text, LoadOptions::default()).unwrap_err();
        let CorpusError::Invalid(errs) = err else { panic!() };
        assert_eq!(errs[0].index, 1);
        assert_eq!(errs[0].path, "context[1][1][0]");
    }

    #[test]
    fn lenient_drops_after_reporting() {
        let mut bad = record();
        bad["_id"] = json!("q2");
        bad["supporting_facts"] = json!([["B", 4]]);
        bad["answer"] = json!("");
        let text = serde_json::to_string(&json!([record(), bad])).unwrap();
        let loaded = parse_dataset(&text, LoadOptions { lenient: true }).unwrap();
        assert_eq!(loaded.examples.len(), 1);
        // one entry per record, listing every violated invariant
        assert_eq!(loaded.rejected.len(), 1);
        assert_eq!(loaded.rejected[0].id.as_deref(), Some("q2"));
        assert!(loaded.rejected[0].message.contains("answer is empty"));
        assert!(loaded.rejected[0].message.contains("out of range"));
    }

    #[test]
    fn duplicate_titles_and_blank_triples_rejected() {
        let mut r = record();
        r["context"] = json!([["A", ["x"]], ["A", ["y"]]]);
        r["supporting_facts"] = json!([]);
        r["evidences"] = json!([["A", " ", "B"]]);
        let ex = parse_record(&r).unwrap();
        let paths: Vec<String> = ex.validate().into_iter().map(|i| i.path).collect();
        assert!(paths.contains(&"context[1][0]".to_string()));
        assert!(paths.contains(&"evidence_sets[0][0].relation".to_string()));
    }

    #[test]
    fn overlay_merges_and_reports_orphans() {
        let base = vec![example("a", 0), example("b", 0)];
        let overlay = parse_overlay(
            r#"{"a": [
                {"Joan of Valois": [[0, ["Joan of Valois", "is daughter of", "Charles of Valois"]]]},
                [["Joan of Valois", "father", "Charles of Valois"]]
            ]}"#,
        )
        .unwrap();
        assert_eq!(overlay["a"].len(), 2);
        let merged = merge_overlay(base.clone(), &overlay, true).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].evidence_sets[0][0].relation, "is daughter of");
        assert_eq!(merge_overlay(base.clone(), &overlay, false).unwrap().len(), 2);

        let orphan = parse_overlay(r#"{"zz": [["x", "y", "z"]]}"#).unwrap();
        match merge_overlay(base, &orphan, false) {
            Err(CorpusError::OrphanOverlay(ids)) => assert_eq!(ids, vec!["zz".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_sizes_and_errors() {
        let pool: Vec<_> = (0..30).map(|i| example(&format!("id{i:02}"), 1)).collect();
        let (t, d) = build_small_split(&pool, 0, 0, 1, SplitOptions::default()).unwrap();
        assert!(t.is_empty() && d.is_empty());
        let (t, d) = build_small_split(&pool, 20, 7, 1, SplitOptions::default()).unwrap();
        assert_eq!((t.len(), d.len()), (20, 7));
        let err = build_small_split(&pool, 25, 7, 1, SplitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("short by 2"), "{err}");
        let mut bare = pool.clone();
        bare[3].evidence_sets.clear();
        assert!(matches!(
            build_small_split(&bare, 1, 1, 1, SplitOptions::default()),
            Err(CorpusError::NoEvidence(_))
        ));
    }

    #[test]
    fn stratified_split_keeps_type_proportions() {
        let mut pool: Vec<_> = (0..40).map(|i| example(&format!("id{i:02}"), 1)).collect();
        for ex in pool.iter_mut().take(10) {
            ex.qtype = QuestionType::Comparison;
        }
        let opts = SplitOptions { stratified: true };
        let (t, d) = build_small_split(&pool, 20, 8, 3, opts).unwrap();
        assert_eq!((t.len(), d.len()), (20, 8));
        let comp = |v: &[QaExample]| v.iter().filter(|e| e.qtype.coarse() == CoarseType::Comparison).count();
        assert_eq!(comp(&t), 5);
        assert_eq!(comp(&d), 2);
    }

    #[test]
    fn select_annotation_edge_cases() {
        let one = example("x", 1);
        assert_eq!(select_annotation(&one, 9).unwrap(), one);
        assert!(matches!(select_annotation(&example("y", 0), 9), Err(CorpusError::NoEvidence(_))));
        let three = example("z", 3);
        for seed in 0..20 {
            let out = select_annotation(&three, seed).unwrap();
            assert_eq!(out.evidence_sets.len(), 1);
            assert!(three.evidence_sets.contains(&out.evidence_sets[0]));
            assert_eq!(out.question, three.question);
            assert_eq!(out.context, three.context);
        }
    }

    #[test]
    fn annotation_choice_is_uniform() {
        // Chi-square against the uniform 1/3 oracle, plus the stated ±0.05 band.
        let n = 1000;
        let mut counts = [0usize; 3];
        for i in 0..n {
            let ex = example(&format!("ex-{i}"), 3);
            let out = select_annotation(&ex, 2024).unwrap();
            let idx = ex.evidence_sets.iter().position(|s| *s == out.evidence_sets[0]).unwrap();
            counts[idx] += 1;
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // df = 2, p = 0.001 critical value
        assert!(chi2 < 13.816, "chi2 {chi2} counts {counts:?}");
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() <= 0.05, "{counts:?}");
        }
    }
}
