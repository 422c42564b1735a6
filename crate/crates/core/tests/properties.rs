use proptest::prelude::*;

use hopkit::metrics::{answer_scores, joint_scores, TaskScores};
use hopkit::taskprep::{generate_entity_pairs, Mention, RuleSet};

fn words() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec!["the", "a", "Film", "river", "yes", "no", "1997", "city", "North,", "old"]),
        0..7,
    )
    .prop_map(|w| w.join(" "))
}

fn task() -> impl Strategy<Value = TaskScores> {
    (any::<bool>(), 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(em, p, r)| TaskScores::from_pr(em, p, r))
}

proptest! {
    #[test]
    fn f1_is_symmetric_and_bounded(p in words(), g in words()) {
        let a = answer_scores(&p, &g);
        let b = answer_scores(&g, &p);
        prop_assert!((a.f1 - b.f1).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.f1));
        prop_assert_eq!(a.precision, b.recall);
    }

    #[test]
    fn joint_never_exceeds_any_task(a in task(), s in task(), e in task()) {
        let j = joint_scores(&a, &s, &e);
        prop_assert!(j.em <= a.em.min(s.em).min(e.em));
        prop_assert!(j.precision <= a.precision.min(s.precision).min(e.precision) + 1e-12);
        prop_assert!(j.recall <= a.recall.min(s.recall).min(e.recall) + 1e-12);
    }

    #[test]
    fn relation_normalization_is_idempotent(raw in "[A-Za-z0-9 ]{0,40}") {
        let rules = RuleSet::bundled();
        let once = rules.normalize(&raw).canonical;
        prop_assert_eq!(rules.normalize(&once).canonical, once);
    }

    #[test]
    fn pair_count_is_n_times_n_minus_one(n in 0usize..40) {
        let mentions: Vec<Mention> = (0..n).map(|k| Mention { text: format!("e{k}"), span: None }).collect();
        prop_assert_eq!(generate_entity_pairs("x", &mentions).len(), n * n.saturating_sub(1));
    }
}
