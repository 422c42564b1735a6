use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::AdversarialError;
use crate::runconfig::sha256_hex;

pub const BUNDLED_LEXICON: &str = include_str!("../../data/lexicon.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerRule {
    /// The answer becomes the other of the two compared entities.
    FlipCandidate,
    /// The answer flips between yes and no.
    FlipYesno,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub replacement: String,
    pub rule: AnswerRule,
}

/// Comparison-operation phrases and their inverses. Every pattern occurs once and
/// its replacement is itself a pattern mapping back, so inversion is an involution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InversionLexicon {
    entries: Vec<LexiconEntry>,
}

/// A located lexicon pattern inside a question (byte offsets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternMatch<'a> {
    pub start: usize,
    pub end: usize,
    pub entry: &'a LexiconEntry,
}

impl InversionLexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Result<Self, AdversarialError> {
        let mut by_pattern: BTreeMap<&str, &LexiconEntry> = BTreeMap::new();
        for e in &entries {
            let p = e.pattern.as_str();
            if p.trim().is_empty() || e.replacement.trim().is_empty() {
                return Err(AdversarialError::Lexicon("empty pattern or replacement".into()));
            }
            if p != p.to_ascii_lowercase() || e.replacement != e.replacement.to_ascii_lowercase() {
                return Err(AdversarialError::Lexicon(format!("{p:?}: phrases must be lowercase")));
            }
            if by_pattern.insert(p, e).is_some() {
                return Err(AdversarialError::Lexicon(format!("pattern {p:?} listed twice")));
            }
        }
        for e in &entries {
            match by_pattern.get(e.replacement.as_str()) {
                Some(back) if back.replacement == e.pattern && back.rule == e.rule => {}
                _ => {
                    return Err(AdversarialError::Lexicon(format!(
                        "{:?} -> {:?} has no inverse entry",
                        e.pattern, e.replacement
                    )))
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn from_json(text: &str) -> Result<Self, AdversarialError> {
        let entries: Vec<LexiconEntry> =
            serde_json::from_str(text).map_err(|e| AdversarialError::Lexicon(e.to_string()))?;
        Self::new(entries)
    }

    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn digest(&self) -> String {
        sha256_hex(serde_json::to_string(&self.entries).expect("lexicon serializes").as_bytes())
    }

    /// Earliest word-bounded pattern occurrence (case-insensitive); the longest
    /// pattern wins when several start at the same offset.
    pub fn find<'a>(&'a self, question: &str) -> Option<PatternMatch<'a>> {
        let lower = question.to_ascii_lowercase();
        let mut best: Option<PatternMatch<'a>> = None;
        for entry in &self.entries {
            if let Some(start) = find_word_bounded(&lower, &entry.pattern) {
                let end = start + entry.pattern.len();
                let better = match &best {
                    None => true,
                    Some(b) => start < b.start || (start == b.start && end > b.end),
                };
                if better {
                    best = Some(PatternMatch { start, end, entry });
                }
            }
        }
        best
    }

    /// Replaces the first matching pattern, keeping a leading capital.
    pub fn apply<'a>(&'a self, question: &str) -> Option<(String, &'a LexiconEntry)> {
        let m = self.find(question)?;
        let original = &question[m.start..m.end];
        let mut replacement = m.entry.replacement.clone();
        if original.chars().next().is_some_and(char::is_uppercase) {
            replacement = capitalize(&replacement);
        }
        let mut out = String::with_capacity(question.len() + replacement.len());
        out.push_str(&question[..m.start]);
        out.push_str(&replacement);
        out.push_str(&question[m.end..]);
        Some((out, m.entry))
    }
}

pub(crate) fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

fn find_word_bounded(haystack: &str, needle: &str) -> Option<usize> {
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(rel) = haystack[from..].find(needle) {
        let start = from + rel;
        let end = start + needle.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]);
        if left_ok && right_ok {
            return Some(start);
        }
        from = start + haystack[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_is_involutive() {
        let lex = InversionLexicon::bundled();
        for e in lex.entries() {
            let q = format!("Which one came {} here?", e.pattern);
            let (once, _) = lex.apply(&q).unwrap();
            let (twice, _) = lex.apply(&once).unwrap();
            assert_eq!(twice, q, "{:?}", e.pattern);
        }
    }

    #[test]
    fn first_last_pair() {
        let lex = InversionLexicon::bundled();
        let (q, e) = lex.apply("Who was born first, A or B?").unwrap();
        assert_eq!(q, "Who was born later, A or B?");
        assert_eq!(e.rule, AnswerRule::FlipCandidate);
    }

    #[test]
    fn longest_match_at_same_offset() {
        let lex = InversionLexicon::bundled();
        let (q, e) = lex.apply("Are X and Y located in different countries?").unwrap();
        assert_eq!(q, "Are X and Y located in the same country?");
        assert_eq!(e.rule, AnswerRule::FlipYesno);
    }

    #[test]
    fn word_boundaries_respected() {
        let lex = InversionLexicon::bundled();
        assert!(lex.find("Which is the firstborn?").is_none());
        assert!(lex.find("Moreover nothing").is_none());
        let (q, _) = lex.apply("First, who?").unwrap();
        assert_eq!(q, "Later, who?");
    }

    #[test]
    fn rejects_non_involutive_lexicons() {
        let e = |p: &str, r: &str| LexiconEntry {
            pattern: p.into(),
            replacement: r.into(),
            rule: AnswerRule::FlipCandidate,
        };
        assert!(InversionLexicon::new(vec![e("first", "later")]).is_err());
        assert!(InversionLexicon::new(vec![e("first", "later"), e("later", "earlier"), e("earlier", "later")]).is_err());
        assert!(InversionLexicon::new(vec![e("first", "later"), e("later", "first")]).is_ok());
    }
}
