//! Adversarial sets for 2Wiki-style data: comparison questions get their
//! operation inverted, bridge questions are pruned to their first-hop sub-question.

mod lexicon;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CoarseType, EvidenceTriple, Provenance, ProvenanceKind, QaExample};
use crate::runconfig::sha256_hex;
use crate::text::{mentions_answer, normalize_answer};

pub use lexicon::{AnswerRule, InversionLexicon, LexiconEntry, PatternMatch, BUNDLED_LEXICON};

pub const BUNDLED_RELATION_TEMPLATES: &str = include_str!("../../data/relation_templates.json");
pub const SUBJECT: &str = "#Subject";

#[derive(Debug, Error)]
pub enum AdversarialError {
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("invalid relation templates: {0}")]
    Templates(String),
}

/// Why an example produced no adversarial counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    NotComparison,
    NotBridge,
    RuleExcluded,
    NoPatternMatch,
    CandidatesNotRecoverable,
    GoldNotCandidate,
    NotYesNo,
    NotInvolutive,
    TripleCheckUnavailable,
    TripleCheckFailed,
    EvidenceSetCount,
    NoSubjectInQuestion,
}

impl SkipReason {
    pub fn code(self) -> &'static str {
        match self {
            Self::NotComparison => "not-comparison",
            Self::NotBridge => "not-bridge",
            Self::RuleExcluded => "rule-excluded",
            Self::NoPatternMatch => "no-pattern-match",
            Self::CandidatesNotRecoverable => "candidates-not-recoverable",
            Self::GoldNotCandidate => "gold-not-candidate",
            Self::NotYesNo => "not-yes-no",
            Self::NotInvolutive => "not-involutive",
            Self::TripleCheckUnavailable => "triple-check-unavailable",
            Self::TripleCheckFailed => "triple-check-failed",
            Self::EvidenceSetCount => "evidence-set-count",
            Self::NoSubjectInQuestion => "no-subject-in-question",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Interrogative template per relation, with `#Subject` as the slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationQuestionTemplates {
    by_relation: BTreeMap<String, String>,
}

impl RelationQuestionTemplates {
    pub fn new(by_relation: BTreeMap<String, String>) -> Result<Self, AdversarialError> {
        if let Some((r, _)) = by_relation.iter().find(|(_, t)| !t.contains(SUBJECT)) {
            return Err(AdversarialError::Templates(format!("template for {r:?} lacks {SUBJECT}")));
        }
        let by_relation = by_relation
            .into_iter()
            .map(|(r, t)| (relation_key(&r), t))
            .collect();
        Ok(Self { by_relation })
    }

    pub fn from_json(text: &str) -> Result<Self, AdversarialError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| AdversarialError::Templates(e.to_string()))?;
        Self::new(map)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_RELATION_TEMPLATES).expect("bundled relation templates are valid")
    }

    /// Sub-question for (relation, subject); the flag is true when the generic
    /// "What is the <relation> of <subject>?" form was used.
    pub fn render(&self, relation: &str, subject: &str) -> (String, bool) {
        match self.by_relation.get(&relation_key(relation)) {
            Some(t) => (t.replace(SUBJECT, subject), false),
            None => (format!("What is the {} of {subject}?", relation.trim()), true),
        }
    }

    pub fn has(&self, relation: &str) -> bool {
        self.by_relation.contains_key(&relation_key(relation))
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(&self.by_relation).expect("templates serialize").as_bytes())
    }
}

fn relation_key(r: &str) -> String {
    r.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct InvertOptions {
    /// Cross-check yes/no flips against the evidence triples.
    pub verify_with_triples: bool,
}

/// The two compared entities, from the "..., A or B?" tail or from evidence subjects.
pub fn comparison_candidates(example: &QaExample) -> Option<(String, String)> {
    let from_tail = tail_candidates(&example.question);
    if let Some((a, b)) = &from_tail {
        if gold_side(&example.answer, a, b).is_some() {
            return from_tail;
        }
    }
    subject_candidates(example).or(from_tail)
}

fn tail_candidates(question: &str) -> Option<(String, String)> {
    let q = question.trim_end().trim_end_matches('?').trim_end();
    let or = q.rfind(" or ")?;
    let b = q[or + 4..].trim();
    let head = &q[..or];
    let a = head[head.rfind(", ")? + 2..].trim();
    (!a.is_empty() && !b.is_empty()).then(|| (a.to_string(), b.to_string()))
}

fn subject_candidates(example: &QaExample) -> Option<(String, String)> {
    let mut subjects: Vec<&str> = Vec::new();
    for t in example.evidence() {
        if mentions_answer(&example.question, &t.subject)
            && !subjects.iter().any(|s| normalize_answer(s) == normalize_answer(&t.subject))
        {
            subjects.push(&t.subject);
        }
    }
    match subjects.as_slice() {
        [a, b] => Some((a.to_string(), b.to_string())),
        _ => None,
    }
}

fn gold_side(answer: &str, a: &str, b: &str) -> Option<bool> {
    let g = normalize_answer(answer);
    match (normalize_answer(a) == g, normalize_answer(b) == g) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

fn flip_yes_no(answer: &str) -> Option<String> {
    let flipped = match normalize_answer(answer).as_str() {
        "yes" => "no",
        "no" => "yes",
        _ => return None,
    };
    Some(if answer.trim_start().starts_with(char::is_uppercase) {
        lexicon::capitalize(flipped)
    } else {
        flipped.to_string()
    })
}

/// One application of the lexicon without involution or triple checks.
fn invert_once(example: &QaExample, lexicon: &InversionLexicon) -> Result<QaExample, SkipReason> {
    if example.qtype.coarse() != CoarseType::Comparison {
        return Err(SkipReason::NotComparison);
    }
    let (question, entry) = lexicon.apply(&example.question).ok_or(SkipReason::NoPatternMatch)?;
    let answer = match entry.rule {
        AnswerRule::FlipYesno => flip_yes_no(&example.answer).ok_or(SkipReason::NotYesNo)?,
        AnswerRule::FlipCandidate => {
            let (a, b) = comparison_candidates(example).ok_or(SkipReason::CandidatesNotRecoverable)?;
            match gold_side(&example.answer, &a, &b) {
                Some(true) => b,
                Some(false) => a,
                None => return Err(SkipReason::GoldNotCandidate),
            }
        }
    };
    let mut out = example.clone();
    out.question = question;
    out.answer = answer;
    Ok(out)
}

/// Whether two entities share a value of some relation, from the evidence triples.
/// Uses the first relation (in triple order) that covers exactly two subjects.
pub fn triples_agree(evidence: &[EvidenceTriple]) -> Option<bool> {
    let mut order: Vec<String> = Vec::new();
    let mut by_relation: BTreeMap<String, BTreeMap<String, Vec<String>>> = BTreeMap::new();
    for t in evidence {
        let r = normalize_answer(&t.relation);
        if !order.contains(&r) {
            order.push(r.clone());
        }
        by_relation
            .entry(r)
            .or_default()
            .entry(normalize_answer(&t.subject))
            .or_default()
            .push(normalize_answer(&t.object));
    }
    order.iter().find_map(|r| {
        let subjects = &by_relation[r];
        if subjects.len() != 2 {
            return None;
        }
        let mut it = subjects.values();
        let (x, y) = (it.next()?, it.next()?);
        Some(x.iter().any(|o| y.contains(o)))
    })
}

fn asks_sameness(question: &str) -> Option<bool> {
    let q = question.to_lowercase();
    let has = |w: &str| q.split(|c: char| !c.is_alphanumeric()).any(|t| t == w);
    match (has("same"), has("different")) {
        (true, false) => Some(true),
        (false, true) => Some(false),
        _ => None,
    }
}

fn is_yes(answer: &str) -> bool {
    normalize_answer(answer) == "yes"
}

/// Replaces the comparison operation and derives the new gold answer.
/// Only emitted when inverting the result restores the original question and answer.
pub fn invert_comparison(
    example: &QaExample,
    lexicon: &InversionLexicon,
    opts: InvertOptions,
) -> Result<QaExample, SkipReason> {
    let inverted = invert_once(example, lexicon)?;
    let back = invert_once(&inverted, lexicon).map_err(|_| SkipReason::NotInvolutive)?;
    if back.question != example.question || back.answer != example.answer {
        return Err(SkipReason::NotInvolutive);
    }
    let entry = lexicon.find(&example.question).expect("matched above").entry;
    let mut flags = vec!["rule=invert".to_string()];
    if opts.verify_with_triples && entry.rule == AnswerRule::FlipYesno {
        let agree = triples_agree(example.evidence()).ok_or(SkipReason::TripleCheckUnavailable)?;
        let same = asks_sameness(&inverted.question).ok_or(SkipReason::TripleCheckUnavailable)?;
        if is_yes(&inverted.answer) != (agree == same) {
            return Err(SkipReason::TripleCheckFailed);
        }
        flags.push("verified-with-triples".into());
    }
    let mut out = inverted;
    out.provenance = Provenance {
        kind: ProvenanceKind::Adversarial,
        record: Some(format!("invert/{}", example.id)),
        flags,
    };
    Ok(out)
}

/// The first-hop triple: subject mentioned in the question, longest subject first,
/// then triple order.
pub fn first_hop(example: &QaExample) -> Option<&EvidenceTriple> {
    let mut best: Option<&EvidenceTriple> = None;
    for t in example.evidence() {
        if !mentions_answer(&example.question, &t.subject) {
            continue;
        }
        let len = normalize_answer(&t.subject).chars().count();
        if best.is_none_or(|b| len > normalize_answer(&b.subject).chars().count()) {
            best = Some(t);
        }
    }
    best
}

/// Replaces a bridge question with its first-hop sub-question; the object of the
/// first-hop triple becomes the answer.
///
/// Supporting facts are restricted to the gold paragraph whose supporting
/// sentences mention the object (preferring the subject's own paragraph). If no
/// such paragraph exists they are left unchanged. Both outcomes are flagged.
pub fn prune_bridge(
    example: &QaExample,
    templates: &RelationQuestionTemplates,
) -> Result<QaExample, SkipReason> {
    if example.qtype.coarse() != CoarseType::Bridge {
        return Err(SkipReason::NotBridge);
    }
    if example.evidence_sets.len() != 1 {
        return Err(SkipReason::EvidenceSetCount);
    }
    let hop = first_hop(example).ok_or(SkipReason::NoSubjectInQuestion)?.clone();
    let (question, generic) = templates.render(&hop.relation, &hop.subject);

    let mut flags = vec!["rule=prune".to_string()];
    if generic {
        flags.push("generic-template".into());
    }

    let holds_object = |title: &str| {
        example
            .supporting_facts
            .iter()
            .filter(|sf| sf.title == title)
            .filter_map(|sf| example.sentence(sf))
            .any(|s| mentions_answer(s, &hop.object))
    };
    let gold = example.gold_titles();
    let chosen = gold
        .iter()
        .find(|t| normalize_answer(t) == normalize_answer(&hop.subject) && holds_object(t))
        .or_else(|| gold.iter().find(|t| holds_object(t)))
        .map(|t| t.to_string());

    let mut out = example.clone();
    match chosen {
        Some(title) => {
            out.supporting_facts.retain(|sf| sf.title == title);
            flags.push("sf-restricted".into());
        }
        None => flags.push("sf-unchanged".into()),
    }
    out.question = question;
    out.answer = hop.object.clone();
    out.provenance = Provenance {
        kind: ProvenanceKind::Adversarial,
        record: Some(format!("prune/{}", example.id)),
        flags,
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Invert,
    Prune,
    Both,
}

impl Rule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "invert" => Some(Self::Invert),
            "prune" => Some(Self::Prune),
            "both" => Some(Self::Both),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct AdversarialSet {
    pub examples: Vec<QaExample>,
    pub skipped: Vec<(String, SkipReason)>,
}

impl AdversarialSet {
    pub fn skip_counts(&self) -> BTreeMap<SkipReason, usize> {
        let mut counts = BTreeMap::new();
        for (_, r) in &self.skipped {
            *counts.entry(*r).or_default() += 1;
        }
        counts
    }

    /// `id<TAB>reason` per skipped example, then `# reason<TAB>count` totals.
    pub fn skip_report_tsv(&self) -> String {
        let mut out = String::from("id\treason\n");
        for (id, r) in &self.skipped {
            out.push_str(&format!("{id}\t{r}\n"));
        }
        for (r, n) in self.skip_counts() {
            out.push_str(&format!("# {r}\t{n}\n"));
        }
        out.push_str(&format!("# emitted\t{}\n", self.examples.len()));
        out
    }
}

/// Routes comparison questions to inversion and bridge questions to pruning,
/// keeping input order. Every input is either emitted or skipped with a reason.
pub fn build_adversarial_set(
    dataset: &[QaExample],
    lexicon: &InversionLexicon,
    templates: &RelationQuestionTemplates,
    rule: Rule,
    opts: InvertOptions,
) -> AdversarialSet {
    let mut set = AdversarialSet::default();
    for ex in dataset {
        let result = match (ex.qtype.coarse(), rule) {
            (CoarseType::Comparison, Rule::Invert | Rule::Both) => invert_comparison(ex, lexicon, opts),
            (CoarseType::Bridge, Rule::Prune | Rule::Both) => prune_bridge(ex, templates),
            _ => Err(SkipReason::RuleExcluded),
        };
        match result {
            Ok(e) => set.examples.push(e),
            Err(r) => set.skipped.push((ex.id.clone(), r)),
        }
    }
    set
}
