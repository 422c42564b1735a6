//! Entity-level reasoning task: relation grouping and entity-pair instances.

mod rules;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{EvidenceTriple, QaExample};
use crate::text::normalize_answer;

pub use rules::{Normalized, RelationGroupMap, Rule, RuleError, RuleSet, BUNDLED_RULES};

pub const NO_RELATION: &str = "NO_RELATION";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RelationInventory {
    pub raw: BTreeMap<String, usize>,
    pub grouped: BTreeMap<String, usize>,
}

impl RelationInventory {
    pub fn raw_count(&self) -> usize {
        self.raw.len()
    }

    pub fn grouped_count(&self) -> usize {
        self.grouped.len()
    }

    /// Classifier labels: grouped relations plus the non-relation type.
    pub fn labels(&self) -> Vec<String> {
        if self.grouped.is_empty() {
            return Vec::new();
        }
        let mut out: Vec<String> = self.grouped.keys().cloned().collect();
        out.push(NO_RELATION.to_string());
        out
    }

    pub fn merge(&mut self, other: &RelationInventory) {
        for (k, v) in &other.raw {
            *self.raw.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.grouped {
            *self.grouped.entry(k.clone()).or_default() += v;
        }
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# raw\t{}\n# grouped\t{}\n# labels\t{}\nrelation\tcount\n",
            self.raw_count(),
            self.grouped_count(),
            self.labels().len()
        );
        for (r, n) in &self.grouped {
            out.push_str(&format!("{r}\t{n}\n"));
        }
        out
    }
}

/// Relation frequencies over every evidence set of the training examples.
pub fn build_relation_inventory(training: &[QaExample], rules: &RuleSet) -> (RelationInventory, RelationGroupMap) {
    let mut inv = RelationInventory::default();
    for ex in training {
        for t in ex.evidence_sets.iter().flatten() {
            *inv.raw.entry(t.relation.clone()).or_default() += 1;
        }
    }
    let map = RelationGroupMap::build(inv.raw.keys().map(String::as_str), rules);
    for (raw, n) in &inv.raw {
        *inv.grouped.entry(map.canonical(raw)).or_default() += n;
    }
    (inv, map)
}

/// Where a mention sits: paragraph, sentence index and char offsets in that sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub title: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mention {
    pub text: String,
    /// Absent when the mention could not be found in the context.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl Mention {
    pub fn located(&self) -> bool {
        self.span.is_some()
    }
}

/// Precomputed mentions per example id.
pub type SpanFile = BTreeMap<String, Vec<Mention>>;

pub fn parse_span_file(text: &str) -> Result<SpanFile, serde_json::Error> {
    serde_json::from_str(text)
}

fn char_find(hay: &str, needle: &str) -> Option<(usize, usize)> {
    let byte = hay.find(needle).or_else(|| {
        let lower = hay.to_lowercase();
        // lowercasing may change byte lengths; only trust it when it does not
        (lower.len() == hay.len()).then(|| lower.find(&needle.to_lowercase())).flatten()
    })?;
    let start = hay[..byte].chars().count();
    Some((start, start + needle.chars().count()))
}

/// First occurrence of `text` in the context, exact match before case-insensitive.
pub fn locate(example: &QaExample, text: &str) -> Option<Span> {
    if text.trim().is_empty() {
        return None;
    }
    example.context.iter().find_map(|p| {
        p.sentences.iter().enumerate().find_map(|(i, s)| {
            char_find(s, text).map(|(start, end)| Span {
                title: p.title.clone(),
                sentence: i,
                start,
                end,
            })
        })
    })
}

/// Triple subjects and objects, one mention per normalized text, in triple order.
pub fn mentions_from_triples(example: &QaExample) -> Vec<Mention> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in example.evidence_sets.iter().flatten() {
        for text in [&t.subject, &t.object] {
            if seen.insert(normalize_answer(text)) {
                out.push(Mention {
                    text: text.clone(),
                    span: locate(example, text),
                });
            }
        }
    }
    out
}

/// Drops repeated (text, span) mentions, keeping first occurrences.
pub fn dedup_mentions(mentions: Vec<Mention>) -> Vec<Mention> {
    let mut seen = BTreeSet::new();
    mentions.into_iter().filter(|m| seen.insert(m.clone())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityPairInstance {
    pub example_id: String,
    pub subject: Mention,
    pub object: Mention,
    pub label: String,
}

/// All ordered pairs of distinct mentions, labelled NO_RELATION.
pub fn generate_entity_pairs(example_id: &str, entities: &[Mention]) -> Vec<EntityPairInstance> {
    let mut out = Vec::with_capacity(entities.len() * entities.len().saturating_sub(1));
    for (i, a) in entities.iter().enumerate() {
        for (j, b) in entities.iter().enumerate() {
            if i != j {
                out.push(EntityPairInstance {
                    example_id: example_id.to_string(),
                    subject: a.clone(),
                    object: b.clone(),
                    label: NO_RELATION.to_string(),
                });
            }
        }
    }
    out
}

/// Labels a pair with the canonical relation of the first unused gold triple whose
/// normalized subject and object equal the pair's; each triple labels at most one pair.
pub fn label_pairs(pairs: &mut [EntityPairInstance], gold: &[EvidenceTriple], map: &RelationGroupMap) {
    let keys: Vec<(String, String)> = gold
        .iter()
        .map(|t| (normalize_answer(&t.subject), normalize_answer(&t.object)))
        .collect();
    let mut used = vec![false; gold.len()];
    for p in pairs.iter_mut() {
        let s = normalize_answer(&p.subject.text);
        let o = normalize_answer(&p.object.text);
        let hit = keys.iter().enumerate().position(|(k, (ks, ko))| !used[k] && *ks == s && *ko == o);
        p.label = match hit {
            Some(k) => {
                used[k] = true;
                map.canonical(&gold[k].relation)
            }
            None => NO_RELATION.to_string(),
        };
    }
}

/// Relabels pairs whose relation is outside the inventory as NO_RELATION and
/// returns how many were relabelled.
pub fn restrict_labels(pairs: &mut [EntityPairInstance], inventory: &RelationInventory) -> usize {
    let mut n = 0;
    for p in pairs.iter_mut() {
        if p.label != NO_RELATION && !inventory.grouped.contains_key(&p.label) {
            p.label = NO_RELATION.to_string();
            n += 1;
        }
    }
    n
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PairExport {
    pub instances: Vec<EntityPairInstance>,
    pub examples: usize,
    pub unlocated_mentions: usize,
    pub labelled: usize,
    /// Labels dropped to NO_RELATION because the training inventory lacks them.
    pub out_of_inventory: usize,
}

impl PairExport {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for i in &self.instances {
            out.push_str(&serde_json::to_string(i).expect("instance serializes"));
            out.push('\n');
        }
        out
    }
}

/// Pairs for every example, using span-file mentions when given for an id and
/// triple-derived mentions otherwise. Labels come from the first evidence set.
/// With an inventory, labels outside it become NO_RELATION.
pub fn export_pairs(
    examples: &[QaExample],
    spans: Option<&SpanFile>,
    map: &RelationGroupMap,
    inventory: Option<&RelationInventory>,
) -> PairExport {
    let mut export = PairExport {
        examples: examples.len(),
        ..Default::default()
    };
    for ex in examples {
        let mentions = match spans.and_then(|s| s.get(&ex.id)) {
            Some(m) => dedup_mentions(m.clone()),
            None => mentions_from_triples(ex),
        };
        export.unlocated_mentions += mentions.iter().filter(|m| !m.located()).count();
        let mut pairs = generate_entity_pairs(&ex.id, &mentions);
        label_pairs(&mut pairs, ex.evidence(), map);
        if let Some(inv) = inventory {
            export.out_of_inventory += restrict_labels(&mut pairs, inv);
        }
        export.labelled += pairs.iter().filter(|p| p.label != NO_RELATION).count();
        export.instances.extend(pairs);
    }
    export
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Paragraph, Provenance, QuestionType, SupportingFact};

    fn valois() -> QaExample {
        QaExample {
            id: "v".into(),
            question: "Who is the paternal grandfather of Joan of Valois?".into(),
            answer: "Philip III of France".into(),
            qtype: QuestionType::Inference,
            context: vec![
                Paragraph::new("Joan of Valois", vec!["Joan was a daughter of Charles of Valois.".into()]),
                Paragraph::new(
                    "Charles of Valois",
                    vec!["Charles of Valois was the son of king Philip III of France.".into()],
                ),
            ],
            supporting_facts: vec![SupportingFact::new("Joan of Valois", 0)],
            evidence_sets: vec![vec![
                EvidenceTriple::new("Joan of Valois", "father", "Charles of Valois"),
                EvidenceTriple::new("Charles of Valois", "father", "Philip III of France"),
            ]],
            provenance: Provenance::default(),
            extra: Default::default(),
        }
    }

    fn m(text: &str) -> Mention {
        Mention { text: text.into(), span: None }
    }

    #[test]
    fn pair_counts() {
        for n in [0usize, 1, 2, 3, 50] {
            let ents: Vec<Mention> = (0..n).map(|i| m(&format!("e{i}"))).collect();
            assert_eq!(generate_entity_pairs("x", &ents).len(), n * n.saturating_sub(1));
        }
    }

    #[test]
    fn directional_labels() {
        let map = RelationGroupMap::build(["father"], &RuleSet::bundled());
        let ents = vec![m("Charles of Valois"), m("Philip III of France")];
        let mut pairs = generate_entity_pairs("x", &ents);
        label_pairs(&mut pairs, &[EvidenceTriple::new("Charles of Valois", "father", "Philip III of France")], &map);
        assert_eq!(pairs[0].label, "father");
        assert_eq!(pairs[1].label, NO_RELATION);

        let mut pairs = generate_entity_pairs("x", &ents);
        label_pairs(&mut pairs, &[], &map);
        assert!(pairs.iter().all(|p| p.label == NO_RELATION));
    }

    #[test]
    fn labels_use_canonical_relation() {
        let map = RelationGroupMap::build(["is located in the"], &RuleSet::bundled());
        let mut pairs = generate_entity_pairs("x", &[m("Paris"), m("France")]);
        label_pairs(&mut pairs, &[EvidenceTriple::new("paris", "is located in the", "France")], &map);
        assert_eq!(pairs[0].label, "is in");
    }

    #[test]
    fn triple_mentions_are_located() {
        let ex = valois();
        let ms = mentions_from_triples(&ex);
        assert_eq!(ms.len(), 3);
        let charles = ms[1].span.as_ref().unwrap();
        assert_eq!((charles.title.as_str(), charles.sentence), ("Joan of Valois", 0));
        assert_eq!(&"Joan was a daughter of Charles of Valois."[charles.start..charles.end], "Charles of Valois");
        // "Joan of Valois" itself never occurs in a sentence
        assert!(ms[0].span.is_none());
    }

    #[test]
    fn export_counts() {
        let ex = valois();
        let map = RelationGroupMap::build(["father"], &RuleSet::bundled());
        let e = export_pairs(&[ex], None, &map, None);
        assert_eq!(e.instances.len(), 6);
        assert_eq!(e.labelled, 2);
        assert_eq!(e.unlocated_mentions, 1);
        assert_eq!(e.to_jsonl().lines().count(), 6);

        let mut other = valois();
        other.evidence_sets = vec![vec![EvidenceTriple::new("x", "mother", "y")]];
        let (inv, _) = build_relation_inventory(&[other], &RuleSet::bundled());
        let e = export_pairs(&[valois()], None, &map, Some(&inv));
        assert_eq!((e.labelled, e.out_of_inventory), (0, 2));
        assert!(e.instances.iter().all(|p| p.label == NO_RELATION));
    }

    #[test]
    fn span_file_overrides_triples() {
        let ex = valois();
        let mut spans = SpanFile::new();
        spans.insert("v".into(), vec![m("Charles of Valois"), m("Charles of Valois"), m("Philip III of France")]);
        let map = RelationGroupMap::build(["father"], &RuleSet::bundled());
        let e = export_pairs(&[ex], Some(&spans), &map, None);
        assert_eq!(e.instances.len(), 2);
        assert_eq!(e.labelled, 1);
        let parsed = parse_span_file(r#"{"v":[{"text":"A","span":{"title":"T","sentence":0,"start":0,"end":1}},{"text":"B"}]}"#).unwrap();
        assert!(parsed["v"][0].located() && !parsed["v"][1].located());
    }

    #[test]
    fn inventory_counts_and_labels() {
        let mut ex = valois();
        ex.evidence_sets[0].push(EvidenceTriple::new("a", "is located in the", "b"));
        ex.evidence_sets[0].push(EvidenceTriple::new("c", "is in", "d"));
        let (inv, _) = build_relation_inventory(&[ex], &RuleSet::bundled());
        assert_eq!(inv.raw_count(), 3);
        assert_eq!(inv.grouped_count(), 2);
        assert_eq!(inv.grouped["is in"], 2);
        assert_eq!(inv.labels().len(), 3);
        let (empty, _) = build_relation_inventory(&[], &RuleSet::bundled());
        assert!(empty.labels().is_empty());
    }
}
