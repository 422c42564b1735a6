//! Debiased evaluation sets: every context paragraph gets one or two extra
//! sentences (unrelated, related, or both in either order) and the gold
//! supporting-fact indices are remapped.

mod pool;
mod templates;

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Provenance, ProvenanceKind, QaExample};
use crate::seed::{self, SeededRng};
use crate::text::mentions_answer;

pub use pool::{
    length_ok, sample_unrelated, token_count, PooledSentence, SentencePool, BUNDLED_POOL,
    MAX_TOKENS_EXCLUSIVE, MIN_TOKENS_EXCLUSIVE,
};
pub use templates::{
    detect_entity_type, render_related, EntityHints, Rendered, TemplateSet, BUNDLED_TEMPLATES,
    GENERIC, PLACEHOLDER,
};

#[derive(Debug, Error)]
pub enum DebiasError {
    #[error("sentence pool is empty")]
    EmptyPool,
    #[error("pool sentence has {tokens} tokens (need 12 to 20): {text:?}")]
    PoolSentenceLength { text: String, tokens: usize },
    #[error("every pool sentence mentions the answer of example {0}")]
    UnrelatedCollide(String),
    #[error("templates for paragraph {paragraph:?} of example {example} all contain the answer")]
    TemplatesCollide { example: String, paragraph: String },
    #[error("template set has no generic templates")]
    NoGenericTemplates,
    #[error("template for {entity_type:?} lacks the #Name placeholder: {template:?}")]
    TemplateWithoutPlaceholder {
        entity_type: String,
        template: String,
    },
    #[error("malformed resource: {0}")]
    Resource(String),
    #[error("seed {0} is repeated; runs need distinct seeds")]
    DuplicateSeed(u64),
    #[error("between 1 and 5 runs are supported, got {0}")]
    RunCount(usize),
    #[error("unknown variant {0:?}")]
    UnknownVariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    AddUnrelated,
    AddRelated,
    Add2,
    Add2Swap,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::AddUnrelated,
        Variant::AddRelated,
        Variant::Add2,
        Variant::Add2Swap,
    ];

    pub fn parse(s: &str) -> Result<Self, DebiasError> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "add-unrelated" | "addunrelated" => Variant::AddUnrelated,
            "add-related" | "addrelated" => Variant::AddRelated,
            "add2" => Variant::Add2,
            "add2swap" | "add2-swap" => Variant::Add2Swap,
            _ => return Err(DebiasError::UnknownVariant(s.to_string())),
        })
    }

    pub fn slug(self) -> &'static str {
        match self {
            Variant::AddUnrelated => "add-unrelated",
            Variant::AddRelated => "add-related",
            Variant::Add2 => "add2",
            Variant::Add2Swap => "add2swap",
        }
    }

    /// Inserted sentence kinds, top to bottom as they appear in the paragraph.
    pub fn layout(self) -> &'static [SentenceKind] {
        match self {
            Variant::AddUnrelated => &[SentenceKind::Unrelated],
            Variant::AddRelated => &[SentenceKind::Related],
            Variant::Add2 => &[SentenceKind::Related, SentenceKind::Unrelated],
            Variant::Add2Swap => &[SentenceKind::Unrelated, SentenceKind::Related],
        }
    }

    fn needs(self, kind: SentenceKind) -> bool {
        self.layout().contains(&kind)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentenceKind {
    Related,
    Unrelated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InsertAt {
    #[default]
    Front,
    Random,
    Back,
}

impl InsertAt {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "front" => Some(Self::Front),
            "random" => Some(Self::Random),
            "back" => Some(Self::Back),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerturbOptions {
    pub insert_at: InsertAt,
    /// Only perturb paragraphs that hold a supporting fact.
    pub gold_only: bool,
}

/// Sentence pool, templates and optional entity hints used by every perturbation.
#[derive(Debug, Clone)]
pub struct Resources {
    pub pool: SentencePool,
    pub templates: TemplateSet,
    pub hints: Option<EntityHints>,
}

impl Resources {
    pub fn bundled() -> Self {
        Self {
            pool: SentencePool::bundled(),
            templates: TemplateSet::bundled(),
            hints: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub paragraph_title: String,
    pub position: usize,
    pub text: String,
    pub kind: SentenceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub answer_via_title: bool,
}

/// `old_to_new[i]` is the new index of original sentence `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParagraphRemap {
    pub title: String,
    pub old_to_new: Vec<usize>,
}

/// Audit trail of one perturbed example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerturbationRecord {
    pub example_id: String,
    pub variant: Variant,
    pub insertions: Vec<Insertion>,
    pub index_remap: Vec<ParagraphRemap>,
    pub seed: u64,
    pub run_id: u32,
}

impl PerturbationRecord {
    pub fn key(run_id: u32, variant: Variant, example_id: &str) -> String {
        format!("run{run_id}/{}/{example_id}", variant.slug())
    }
}

const UNRELATED_RETRIES: usize = 16;

fn draw_unrelated(
    pool: &SentencePool,
    example: &QaExample,
    existing: &[String],
    rng: &mut SeededRng,
) -> Result<String, DebiasError> {
    let ok = |s: &str| !mentions_answer(s, &example.answer) && !existing.iter().any(|e| e == s);
    for _ in 0..UNRELATED_RETRIES {
        let s = sample_unrelated(pool, rng)?;
        if ok(s) {
            return Ok(s.to_string());
        }
    }
    let n = pool.len();
    let start = rng.gen_range(0..n);
    (0..n)
        .map(|k| pool.sentences()[(start + k) % n].text.as_str())
        .find(|s| ok(s))
        .map(str::to_string)
        .ok_or_else(|| DebiasError::UnrelatedCollide(example.id.clone()))
}

/// Inserts the variant's sentences into every (or every gold) paragraph.
///
/// Draw order per paragraph is always related, then unrelated, then position,
/// so `Add2` and `Add2Swap` driven by equal generators insert the same pair.
pub fn perturb(
    example: &QaExample,
    variant: Variant,
    resources: &Resources,
    rng: &mut SeededRng,
    opts: PerturbOptions,
    seed: u64,
    run_id: u32,
) -> Result<(QaExample, PerturbationRecord), DebiasError> {
    let gold: HashSet<&str> = example.gold_titles().into_iter().collect();
    let mut out = example.clone();
    let mut insertions = Vec::new();
    let mut index_remap = Vec::new();

    for (pi, para) in example.context.iter().enumerate() {
        if opts.gold_only && !gold.contains(para.title.as_str()) {
            continue;
        }
        let related = if variant.needs(SentenceKind::Related) {
            Some(render_related(
                para,
                example,
                &resources.templates,
                rng,
                resources.hints.as_ref(),
            )?)
        } else {
            None
        };
        let unrelated = if variant.needs(SentenceKind::Unrelated) {
            Some(draw_unrelated(&resources.pool, example, &para.sentences, rng)?)
        } else {
            None
        };
        let len = para.sentences.len();
        let position = match opts.insert_at {
            InsertAt::Front => 0,
            InsertAt::Back => len,
            InsertAt::Random => rng.gen_range(0..=len),
        };

        let block: Vec<Insertion> = variant
            .layout()
            .iter()
            .enumerate()
            .map(|(k, kind)| match kind {
                SentenceKind::Related => {
                    let r = related.as_ref().expect("drawn for this variant");
                    Insertion {
                        paragraph_title: para.title.clone(),
                        position: position + k,
                        text: r.text.clone(),
                        kind: *kind,
                        entity_type: Some(r.entity_type.clone()),
                        answer_via_title: r.answer_via_title,
                    }
                }
                SentenceKind::Unrelated => Insertion {
                    paragraph_title: para.title.clone(),
                    position: position + k,
                    text: unrelated.clone().expect("drawn for this variant"),
                    kind: *kind,
                    entity_type: None,
                    answer_via_title: false,
                },
            })
            .collect();

        let shift = block.len();
        let sentences = &mut out.context[pi].sentences;
        for (k, ins) in block.iter().enumerate() {
            sentences.insert(position + k, ins.text.clone());
        }
        index_remap.push(ParagraphRemap {
            title: para.title.clone(),
            old_to_new: (0..len).map(|i| if i >= position { i + shift } else { i }).collect(),
        });
        insertions.extend(block);
    }

    for sf in &mut out.supporting_facts {
        if let Some(remap) = index_remap.iter().find(|r| r.title == sf.title) {
            if let Some(&new) = remap.old_to_new.get(sf.sentence) {
                sf.sentence = new;
            }
        }
    }
    out.provenance = Provenance {
        kind: ProvenanceKind::Debiased,
        record: Some(PerturbationRecord::key(run_id, variant, &example.id)),
        flags: Vec::new(),
    };
    let record = PerturbationRecord {
        example_id: example.id.clone(),
        variant,
        insertions,
        index_remap,
        seed,
        run_id,
    };
    Ok((out, record))
}

/// Perturbs with the generator derived from (run seed, example id).
pub fn perturb_seeded(
    example: &QaExample,
    variant: Variant,
    resources: &Resources,
    opts: PerturbOptions,
    seed: u64,
    run_id: u32,
) -> Result<(QaExample, PerturbationRecord), DebiasError> {
    let mut rng = seed::rng_for(seed, "debias", &example.id);
    perturb(example, variant, resources, &mut rng, opts, seed, run_id)
}

#[derive(Debug, Clone)]
pub struct VariantSet {
    pub run_id: u32,
    pub seed: u64,
    pub variant: Variant,
    pub examples: Vec<QaExample>,
    pub records: Vec<PerturbationRecord>,
}

/// Builds one variant set; any per-example error aborts the set.
pub fn generate_variant(
    dataset: &[QaExample],
    variant: Variant,
    resources: &Resources,
    opts: PerturbOptions,
    seed: u64,
    run_id: u32,
) -> Result<VariantSet, DebiasError> {
    let mut examples = Vec::with_capacity(dataset.len());
    let mut records = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let (e, r) = perturb_seeded(ex, variant, resources, opts, seed, run_id)?;
        examples.push(e);
        records.push(r);
    }
    Ok(VariantSet {
        run_id,
        seed,
        variant,
        examples,
        records,
    })
}

pub fn check_seeds(seeds: &[u64]) -> Result<(), DebiasError> {
    if seeds.is_empty() || seeds.len() > 5 {
        return Err(DebiasError::RunCount(seeds.len()));
    }
    let mut seen = HashSet::new();
    for s in seeds {
        if !seen.insert(*s) {
            return Err(DebiasError::DuplicateSeed(*s));
        }
    }
    Ok(())
}

/// One set per (run, variant); run ids are 1-based in seed order.
pub fn generate_debiased_suite(
    dataset: &[QaExample],
    seeds: &[u64],
    variants: &[Variant],
    resources: &Resources,
    opts: PerturbOptions,
) -> Result<Vec<VariantSet>, DebiasError> {
    check_seeds(seeds)?;
    let mut sets = Vec::with_capacity(seeds.len() * variants.len());
    for (i, &s) in seeds.iter().enumerate() {
        for &v in variants {
            sets.push(generate_variant(dataset, v, resources, opts, s, i as u32 + 1)?);
        }
    }
    Ok(sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paragraph, QuestionType, SupportingFact};

    fn example() -> QaExample {
        QaExample {
            id: "ex1".into(),
            question: "Who directed the film Titanic?".into(),
            answer: "James Cameron".into(),
            qtype: QuestionType::Compositional,
            context: vec![
                Paragraph::new(
                    "Titanic (1997 film)",
                    vec![
                        "Titanic is a 1997 film directed by James Cameron.".into(),
                        "It stars Leonardo DiCaprio.".into(),
                    ],
                ),
                Paragraph::new("Other", vec!["Nothing relevant.".into()]),
            ],
            supporting_facts: vec![SupportingFact::new("Titanic (1997 film)", 0)],
            evidence_sets: vec![vec![crate::corpus::EvidenceTriple::new(
                "Titanic",
                "director",
                "James Cameron",
            )]],
            provenance: Provenance::default(),
            extra: Default::default(),
        }
    }

    #[test]
    fn single_and_double_front_insertion_shift() {
        let res = Resources::bundled();
        let ex = example();
        let (out, rec) = perturb_seeded(&ex, Variant::AddUnrelated, &res, PerturbOptions::default(), 1, 1).unwrap();
        assert_eq!(out.supporting_facts[0].sentence, 1);
        assert_eq!(rec.insertions.len(), 2);
        let (out, rec) = perturb_seeded(&ex, Variant::Add2, &res, PerturbOptions::default(), 1, 1).unwrap();
        assert_eq!(out.supporting_facts[0].sentence, 2);
        assert_eq!(rec.insertions.len(), 4);
        assert_eq!(rec.insertions[0].kind, SentenceKind::Related);
        assert_eq!(rec.insertions[1].kind, SentenceKind::Unrelated);
    }

    #[test]
    fn add2_and_swap_share_the_pair() {
        let res = Resources::bundled();
        let ex = example();
        let (a, ra) = perturb_seeded(&ex, Variant::Add2, &res, PerturbOptions::default(), 9, 1).unwrap();
        let (b, rb) = perturb_seeded(&ex, Variant::Add2Swap, &res, PerturbOptions::default(), 9, 1).unwrap();
        for (pa, pb) in a.context.iter().zip(&b.context) {
            assert_eq!(pa.sentences[0], pb.sentences[1]);
            assert_eq!(pa.sentences[1], pb.sentences[0]);
        }
        assert_eq!(ra.insertions.len(), rb.insertions.len());
    }

    #[test]
    fn remap_preserves_content_and_unchanged_fields() {
        let res = Resources::bundled();
        let ex = example();
        for insert_at in [InsertAt::Front, InsertAt::Random, InsertAt::Back] {
            for v in Variant::ALL {
                let opts = PerturbOptions { insert_at, gold_only: false };
                let (out, rec) = perturb_seeded(&ex, v, &res, opts, 4, 2).unwrap();
                assert_eq!(out.question, ex.question);
                assert_eq!(out.answer, ex.answer);
                assert_eq!(out.evidence_sets, ex.evidence_sets);
                assert_eq!(out.supporting_facts.len(), ex.supporting_facts.len());
                for (old, new) in ex.supporting_facts.iter().zip(&out.supporting_facts) {
                    assert_eq!(ex.sentence(old), out.sentence(new));
                }
                for (p, q) in ex.context.iter().zip(&out.context) {
                    assert_eq!(q.sentences.len(), p.sentences.len() + v.layout().len());
                }
                for r in &rec.index_remap {
                    assert!(r.old_to_new.windows(2).all(|w| w[0] < w[1]));
                }
                assert_eq!(out.provenance.kind, ProvenanceKind::Debiased);
            }
        }
    }

    #[test]
    fn gold_only_leaves_distractors() {
        let res = Resources::bundled();
        let ex = example();
        let opts = PerturbOptions { insert_at: InsertAt::Front, gold_only: true };
        let (out, rec) = perturb_seeded(&ex, Variant::AddRelated, &res, opts, 1, 1).unwrap();
        assert_eq!(out.context[1], ex.context[1]);
        assert_eq!(rec.insertions.len(), 1);
    }

    #[test]
    fn unrelated_guard_skips_answer_mentions() {
        let sentences = [
            "James Cameron once said that every single story deserves a careful and patient reader.",
            "The library will open an hour later than usual on the first Monday of the month.",
        ];
        let pool = SentencePool::new(sentences, "t").unwrap();
        let res = Resources { pool, templates: TemplateSet::bundled(), hints: None };
        for s in 0..20 {
            let (out, _) = perturb_seeded(&example(), Variant::AddUnrelated, &res, PerturbOptions::default(), s, 1).unwrap();
            assert_eq!(out.context[0].sentences[0], sentences[1]);
        }
        let only_bad = SentencePool::new([sentences[0]], "t").unwrap();
        let res = Resources { pool: only_bad, templates: TemplateSet::bundled(), hints: None };
        assert!(matches!(
            perturb_seeded(&example(), Variant::AddUnrelated, &res, PerturbOptions::default(), 1, 1),
            Err(DebiasError::UnrelatedCollide(_))
        ));
    }

    #[test]
    fn seed_checks() {
        assert!(check_seeds(&[1, 2, 3, 4, 5]).is_ok());
        assert!(matches!(check_seeds(&[1, 2, 1]), Err(DebiasError::DuplicateSeed(1))));
        assert!(matches!(check_seeds(&[]), Err(DebiasError::RunCount(0))));
        assert!(matches!(check_seeds(&[1, 2, 3, 4, 5, 6]), Err(DebiasError::RunCount(6))));
    }

    #[test]
    fn suite_shape() {
        let data = vec![example(); 3]
            .into_iter()
            .enumerate()
            .map(|(i, mut e)| {
                e.id = format!("e{i}");
                e
            })
            .collect::<Vec<_>>();
        let sets = generate_debiased_suite(&data, &[1, 2, 3, 4, 5], &Variant::ALL, &Resources::bundled(), PerturbOptions::default()).unwrap();
        assert_eq!(sets.len(), 20);
        assert!(sets.iter().all(|s| s.examples.len() == 3 && (1..=5).contains(&s.run_id)));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(Variant::parse(v.slug()).unwrap(), v);
        }
        assert!(Variant::parse("add3").is_err());
    }
}
