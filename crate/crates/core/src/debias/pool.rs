use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DebiasError;
use crate::runconfig::sha256_hex;
use crate::seed::SeededRng;

pub const BUNDLED_POOL: &str = include_str!("../../data/unrelated_pool.txt");

/// Pooled sentences must have strictly more than this many tokens...
pub const MIN_TOKENS_EXCLUSIVE: usize = 11;
/// ...and strictly fewer than this many.
pub const MAX_TOKENS_EXCLUSIVE: usize = 21;

pub fn token_count(s: &str) -> usize {
    s.split_whitespace().count()
}

pub fn length_ok(tokens: usize) -> bool {
    tokens > MIN_TOKENS_EXCLUSIVE && tokens < MAX_TOKENS_EXCLUSIVE
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PooledSentence {
    pub text: String,
    pub tokens: usize,
}

/// Sentences unrelated to any paragraph, all 12 to 20 tokens long.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePool {
    sentences: Vec<PooledSentence>,
    source_tag: String,
}

impl SentencePool {
    /// Strict constructor: every sentence must satisfy the length bound.
    pub fn new<I, S>(sentences: I, source_tag: impl Into<String>) -> Result<Self, DebiasError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut pooled = Vec::new();
        for s in sentences {
            let text: String = s.into();
            let tokens = token_count(&text);
            if !length_ok(tokens) {
                return Err(DebiasError::PoolSentenceLength { text, tokens });
            }
            pooled.push(PooledSentence { text, tokens });
        }
        Ok(Self {
            sentences: pooled,
            source_tag: source_tag.into(),
        })
    }

    /// One sentence per line; `#` comments and blank lines skipped, sentences
    /// outside the length bound dropped. Returns the pool and the number dropped.
    pub fn from_text(text: &str, source_tag: impl Into<String>) -> (Self, usize) {
        let mut dropped = 0;
        let sentences = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let tokens = token_count(l);
                if length_ok(tokens) {
                    Some(PooledSentence {
                        text: l.to_string(),
                        tokens,
                    })
                } else {
                    dropped += 1;
                    None
                }
            })
            .collect();
        (
            Self {
                sentences,
                source_tag: source_tag.into(),
            },
            dropped,
        )
    }

    pub fn bundled() -> Self {
        Self::from_text(BUNDLED_POOL, "bundled").0
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn sentences(&self) -> &[PooledSentence] {
        &self.sentences
    }

    pub fn digest(&self) -> String {
        let joined: Vec<&str> = self.sentences.iter().map(|s| s.text.as_str()).collect();
        sha256_hex(joined.join("\n").as_bytes())
    }
}

/// Uniform draw from the pool.
pub fn sample_unrelated<'a>(pool: &'a SentencePool, rng: &mut SeededRng) -> Result<&'a str, DebiasError> {
    if pool.is_empty() {
        return Err(DebiasError::EmptyPool);
    }
    let i = rng.gen_range(0..pool.len());
    Ok(&pool.sentences[i].text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    const TWELVE: &str = "one two three four five six seven eight nine ten eleven twelve";

    #[test]
    fn bundled_pool_respects_bounds() {
        let (pool, dropped) = SentencePool::from_text(BUNDLED_POOL, "bundled");
        assert_eq!(dropped, 0);
        assert!(pool.len() >= 40);
        assert!(pool.sentences().iter().all(|s| (12..=20).contains(&s.tokens)));
    }

    #[test]
    fn bounds_are_exclusive() {
        assert!(!length_ok(11) && length_ok(12) && length_ok(20) && !length_ok(21));
        let eleven = "a b c d e f g h i j k";
        assert!(matches!(
            SentencePool::new([eleven], "t"),
            Err(DebiasError::PoolSentenceLength { tokens: 11, .. })
        ));
        let (p, dropped) = SentencePool::from_text(&format!("{eleven}\n{TWELVE}\n"), "t");
        assert_eq!((p.len(), dropped), (1, 1));
    }

    #[test]
    fn singleton_and_empty_pools() {
        let pool = SentencePool::new([TWELVE], "t").unwrap();
        let mut rng = rng_from(3);
        for _ in 0..5 {
            assert_eq!(sample_unrelated(&pool, &mut rng).unwrap(), TWELVE);
        }
        let empty = SentencePool::new(Vec::<String>::new(), "t").unwrap();
        assert!(matches!(sample_unrelated(&empty, &mut rng), Err(DebiasError::EmptyPool)));
    }

    #[test]
    fn draws_are_uniform() {
        let sentences: Vec<String> = (0..10).map(|i| format!("{TWELVE} s{i}")).collect();
        let pool = SentencePool::new(sentences.clone(), "t").unwrap();
        let mut rng = rng_from(11);
        let mut counts = vec![0usize; 10];
        let n = 10_000;
        for _ in 0..n {
            let s = sample_unrelated(&pool, &mut rng).unwrap();
            counts[sentences.iter().position(|x| x == s).unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.1).abs() <= 0.02, "{c}");
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let pool = SentencePool::bundled();
        let a: Vec<_> = {
            let mut r = rng_from(5);
            (0..20).map(|_| sample_unrelated(&pool, &mut r).unwrap().to_string()).collect()
        };
        let b: Vec<_> = {
            let mut r = rng_from(5);
            (0..20).map(|_| sample_unrelated(&pool, &mut r).unwrap().to_string()).collect()
        };
        assert_eq!(a, b);
    }
}
