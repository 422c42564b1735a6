//! Text normalization shared by scoring, probing and triple matching.

use std::collections::BTreeSet;

/// Stopword list shipped with the toolkit. Recorded by digest in every report.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

/// Set of lowercase words removed before overlap comparisons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords {
    words: BTreeSet<String>,
}

impl Stopwords {
    /// Parses one word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect(),
        }
    }

    pub fn empty() -> Self {
        Self { words: BTreeSet::new() }
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Stable digest of the word list, for report metadata.
    pub fn digest(&self) -> String {
        let joined = self.words.iter().cloned().collect::<Vec<_>>().join("\n");
        crate::runconfig::sha256_hex(joined.as_bytes())
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }
}

/// Answer normalization used by the HotpotQA / 2Wiki evaluation scripts:
/// lowercase, drop ASCII punctuation, drop the articles a/an/the, collapse whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lowered = s.to_lowercase();
    let no_punct: String = lowered.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let no_articles = remove_articles(&no_punct);
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

// Mirrors `re.sub(r'\b(a|an|the)\b', ' ', text)`.
fn remove_articles(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if matches!(word.as_str(), "a" | "an" | "the") {
            out.push(' ');
        } else {
            out.push_str(word);
        }
        word.clear();
    };
    for c in text.chars() {
        if is_word_char(c) {
            word.push(c);
        } else {
            flush(&mut word, &mut out);
            out.push(c);
        }
    }
    flush(&mut word, &mut out);
    out
}

/// Whitespace tokens of `normalize_answer(s)`.
pub fn answer_tokens(s: &str) -> Vec<String> {
    normalize_answer(s)
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Probe tokenizer: whitespace split, trim leading/trailing punctuation, lowercase.
/// Tokens that are pure punctuation vanish.
pub fn tokenize(s: &str) -> Vec<String> {
    s.split_whitespace()
        .filter_map(|raw| {
            let t = raw.trim_matches(|c: char| !c.is_alphanumeric());
            (!t.is_empty()).then(|| t.to_lowercase())
        })
        .collect()
}

/// Whether `needle` occurs as a contiguous run inside `haystack`.
pub fn contains_run<T: PartialEq>(haystack: &[T], needle: &[T]) -> bool {
    find_run(haystack, needle).is_some()
}

/// Start offset of the first contiguous occurrence of `needle` in `haystack`.
pub fn find_run<T: PartialEq>(haystack: &[T], needle: &[T]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack.windows(needle.len()).position(|w| w == needle)
}

/// True when the normalized answer appears as a whole-token run in the normalized text.
pub fn mentions_answer(text: &str, answer: &str) -> bool {
    let needle = answer_tokens(answer);
    !needle.is_empty() && contains_run(&answer_tokens(text), &needle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_answer("The Beatles!"), "beatles");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("A  Romance of the Air"), "romance of air");
    }

    #[test]
    fn articles_only_removed_as_whole_words() {
        assert_eq!(normalize_answer("Theatre and anthem"), "theatre and anthem");
        assert_eq!(normalize_answer("an apple a day"), "apple day");
    }

    #[test]
    fn unicode_punctuation_kept_like_the_official_script() {
        assert_eq!(normalize_answer("1890–1957"), "1890–1957");
    }

    #[test]
    fn tokenize_strips_edge_punctuation() {
        assert_eq!(
            tokenize("James Cameron directed \"Titanic.\" (1997)"),
            vec!["james", "cameron", "directed", "titanic", "1997"]
        );
        assert!(tokenize(" -- , ").is_empty());
        assert_eq!(tokenize("Polish-Russian"), vec!["polish-russian"]);
    }

    #[test]
    fn mentions_answer_respects_token_boundaries() {
        assert!(mentions_answer("He was born in Paris, France.", "paris"));
        assert!(!mentions_answer("Parisian cafes", "Paris"));
        assert!(!mentions_answer("anything", ""));
    }

    #[test]
    fn default_stopwords_pinned() {
        let sw = Stopwords::default();
        assert!(sw.contains("the") && sw.contains("in"));
        assert!(!sw.contains("directed") && !sw.contains("film"));
        assert_eq!(sw.len(), 127);
    }
}
