use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub title: String,
    pub sentences: Vec<String>,
}

impl Paragraph {
    pub fn new(title: impl Into<String>, sentences: Vec<String>) -> Self {
        Self { title: title.into(), sentences }
    }
}

/// A (paragraph title, 0-based sentence index) pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportingFact {
    pub title: String,
    pub sentence: usize,
}

impl SupportingFact {
    pub fn new(title: impl Into<String>, sentence: usize) -> Self {
        Self { title: title.into(), sentence }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl EvidenceTriple {
    pub fn new(
        subject: impl Into<String>,
        relation: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

/// Question types across the HotpotQA and 2Wiki vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuestionType {
    Comparison,
    Bridge,
    Inference,
    Compositional,
    BridgeComparison,
}

/// Two-way grouping used for analysis: inference and compositional count as bridge,
/// bridge-comparison counts as comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseType {
    Comparison,
    Bridge,
}

impl fmt::Display for CoarseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoarseType::Comparison => "comparison",
            CoarseType::Bridge => "bridge",
        })
    }
}

impl QuestionType {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "comparison" => Self::Comparison,
            "bridge" => Self::Bridge,
            "inference" => Self::Inference,
            "compositional" => Self::Compositional,
            "bridge_comparison" | "bridge-comparison" => Self::BridgeComparison,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Comparison => "comparison",
            Self::Bridge => "bridge",
            Self::Inference => "inference",
            Self::Compositional => "compositional",
            Self::BridgeComparison => "bridge_comparison",
        }
    }

    pub fn coarse(self) -> CoarseType {
        match self {
            Self::Comparison | Self::BridgeComparison => CoarseType::Comparison,
            Self::Bridge | Self::Inference | Self::Compositional => CoarseType::Bridge,
        }
    }
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProvenanceKind {
    #[default]
    Original,
    Debiased,
    Adversarial,
}

/// Where an example came from. `record` links to a sidecar perturbation record.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Provenance {
    pub fn is_original(&self) -> bool {
        self.kind == ProvenanceKind::Original && self.record.is_none() && self.flags.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QaExample {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub qtype: QuestionType,
    pub context: Vec<Paragraph>,
    pub supporting_facts: Vec<SupportingFact>,
    pub evidence_sets: Vec<Vec<EvidenceTriple>>,
    pub provenance: Provenance,
    /// Unrecognized top-level fields, written back unchanged.
    pub extra: BTreeMap<String, Value>,
}

/// One invariant violation inside a record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub path: String,
    pub message: String,
}

impl QaExample {
    pub fn paragraph(&self, title: &str) -> Option<&Paragraph> {
        self.context.iter().find(|p| p.title == title)
    }

    pub fn paragraph_index(&self, title: &str) -> Option<usize> {
        self.context.iter().position(|p| p.title == title)
    }

    /// Text of the sentence a supporting fact points at.
    pub fn sentence(&self, sf: &SupportingFact) -> Option<&str> {
        self.paragraph(&sf.title)
            .and_then(|p| p.sentences.get(sf.sentence))
            .map(String::as_str)
    }

    /// Titles of paragraphs holding at least one supporting fact, in context order.
    pub fn gold_titles(&self) -> Vec<&str> {
        self.context
            .iter()
            .filter(|p| self.supporting_facts.iter().any(|sf| sf.title == p.title))
            .map(|p| p.title.as_str())
            .collect()
    }

    /// The single evidence set used for scoring (the first one).
    pub fn evidence(&self) -> &[EvidenceTriple] {
        self.evidence_sets.first().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Checks every type invariant; an empty result means the example is valid.
    pub fn validate(&self) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        let mut push = |path: String, message: String| issues.push(FieldIssue { path, message });

        if self.id.trim().is_empty() {
            push("_id".into(), "id is empty".into());
        }
        if self.answer.trim().is_empty() {
            push("answer".into(), "answer is empty".into());
        }

        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, p) in self.context.iter().enumerate() {
            if p.title.trim().is_empty() {
                push(format!("context[{i}][0]"), "paragraph title is empty".into());
            }
            if let Some(first) = seen.insert(p.title.as_str(), i) {
                push(
                    format!("context[{i}][0]"),
                    format!("duplicate paragraph title {:?} (also at context[{first}])", p.title),
                );
            }
        }

        for (i, sf) in self.supporting_facts.iter().enumerate() {
            let matches: Vec<&Paragraph> =
                self.context.iter().filter(|p| p.title == sf.title).collect();
            match matches.as_slice() {
                [] => push(
                    format!("supporting_facts[{i}][0]"),
                    format!("supporting fact names absent title {:?}", sf.title),
                ),
                [p] => {
                    if sf.sentence >= p.sentences.len() {
                        push(
                            format!("supporting_facts[{i}][1]"),
                            format!(
                                "sentence index {} out of range for {:?} ({} sentences)",
                                sf.sentence,
                                sf.title,
                                p.sentences.len()
                            ),
                        );
                    }
                }
                _ => push(
                    format!("supporting_facts[{i}][0]"),
                    format!("title {:?} matches more than one paragraph", sf.title),
                ),
            }
        }

        for (s, set) in self.evidence_sets.iter().enumerate() {
            for (t, triple) in set.iter().enumerate() {
                for (field, value) in [
                    ("subject", &triple.subject),
                    ("relation", &triple.relation),
                    ("object", &triple.object),
                ] {
                    if value.trim().is_empty() {
                        push(
                            format!("evidence_sets[{s}][{t}].{field}"),
                            format!("evidence triple {field} is empty"),
                        );
                    }
                }
            }
        }
        issues
    }
}
