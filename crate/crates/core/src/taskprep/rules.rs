use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::runconfig::sha256_hex;

pub const BUNDLED_RULES: &str = include_str!("../../data/relation_rules.txt");

const MAX_PASSES: usize = 64;

const ORDINAL_WORDS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
    "eleventh", "twelfth", "thirteenth", "fourteenth", "fifteenth", "sixteenth", "seventeenth",
    "eighteenth", "nineteenth", "twentieth",
];

#[derive(Debug, Error, PartialEq, Eq)]
#[error("rule line {line}: {message}")]
pub struct RuleError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rule {
    Lowercase,
    CollapseWhitespace,
    DeleteYears,
    DeleteOrdinals,
    /// Drops trailing tokens found in the list.
    StripTail(Vec<String>),
    /// Rewrites every article token to the given one.
    UnifyArticles(String),
    /// Token-bounded phrase replacement.
    Replace { from: Vec<String>, to: Vec<String> },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::Lowercase => f.write_str("lowercase"),
            Rule::CollapseWhitespace => f.write_str("collapse-whitespace"),
            Rule::DeleteYears => f.write_str("delete-years"),
            Rule::DeleteOrdinals => f.write_str("delete-ordinals"),
            Rule::StripTail(words) => write!(f, "strip-tail {}", words.join(" ")),
            Rule::UnifyArticles(a) => write!(f, "unify-articles {a}"),
            Rule::Replace { from, to } => write!(f, "replace {} => {}", from.join(" "), to.join(" ")),
        }
    }
}

fn is_year(t: &str) -> bool {
    let digits = t.strip_suffix('s').unwrap_or(t);
    digits.len() == 4
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (1000..2100).contains(&digits.parse::<u32>().unwrap_or(0))
}

fn is_ordinal(t: &str) -> bool {
    if ORDINAL_WORDS.contains(&t) {
        return true;
    }
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    split > 0 && matches!(&t[split..], "st" | "nd" | "rd" | "th")
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

impl Rule {
    pub fn parse(line: &str) -> Result<Self, String> {
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let words = || rest.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>();
        let rule = match head {
            "lowercase" => Rule::Lowercase,
            "collapse-whitespace" => Rule::CollapseWhitespace,
            "delete-years" => Rule::DeleteYears,
            "delete-ordinals" => Rule::DeleteOrdinals,
            "strip-tail" if !rest.is_empty() => Rule::StripTail(words()),
            "unify-articles" if words().len() == 1 => Rule::UnifyArticles(words().remove(0)),
            "replace" => {
                let (from, to) = rest.split_once("=>").ok_or("replace needs `from => to`")?;
                let from: Vec<String> = from.split_whitespace().map(str::to_lowercase).collect();
                let to: Vec<String> = to.split_whitespace().map(str::to_lowercase).collect();
                if from.is_empty() {
                    return Err("replace needs a non-empty pattern".into());
                }
                if to.len() > from.len() {
                    return Err("replacement may not be longer than its pattern".into());
                }
                Rule::Replace { from, to }
            }
            other => return Err(format!("unknown or malformed rule {other:?}")),
        };
        if rule.to_string() != line.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
            && !matches!(rule, Rule::Replace { .. })
        {
            return Err(format!("unexpected arguments in {line:?}"));
        }
        Ok(rule)
    }

    pub fn apply(&self, s: &str) -> String {
        match self {
            Rule::Lowercase => s.to_lowercase(),
            Rule::CollapseWhitespace => tokens(s).join(" "),
            Rule::DeleteYears => tokens(s).into_iter().filter(|t| !is_year(t)).collect::<Vec<_>>().join(" "),
            Rule::DeleteOrdinals => {
                tokens(s).into_iter().filter(|t| !is_ordinal(t)).collect::<Vec<_>>().join(" ")
            }
            Rule::StripTail(words) => {
                let mut toks = tokens(s);
                while toks.last().is_some_and(|t| words.iter().any(|w| w == t)) {
                    toks.pop();
                }
                toks.join(" ")
            }
            Rule::UnifyArticles(a) => tokens(s)
                .into_iter()
                .map(|t| if matches!(t, "a" | "an") { a.as_str() } else { t })
                .collect::<Vec<_>>()
                .join(" "),
            Rule::Replace { from, to } => {
                let toks = tokens(s);
                let mut out: Vec<&str> = Vec::with_capacity(toks.len());
                let mut i = 0;
                while i < toks.len() {
                    if toks.len() - i >= from.len() && toks[i..i + from.len()].iter().zip(from).all(|(a, b)| a == b) {
                        out.extend(to.iter().map(String::as_str));
                        i += from.len();
                    } else {
                        out.push(toks[i]);
                        i += 1;
                    }
                }
                out.join(" ")
            }
        }
    }
}

/// Ordered rule list; applied top to bottom, repeated until nothing changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Normalized {
    pub canonical: String,
    /// Rules that changed the string, in firing order.
    pub trace: Vec<String>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    pub fn parse(text: &str) -> Result<Self, RuleError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rules.push(Rule::parse(line).map_err(|message| RuleError { line: i + 1, message })?);
        }
        Ok(Self { rules })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_RULES).expect("bundled rules are valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn digest(&self) -> String {
        let lines: Vec<String> = self.rules.iter().map(Rule::to_string).collect();
        sha256_hex(lines.join("\n").as_bytes())
    }

    /// Canonical form of a raw relation. A raw string that every rule would erase
    /// keeps its whitespace-collapsed lowercase form.
    pub fn normalize(&self, raw: &str) -> Normalized {
        let fallback = tokens(&raw.to_lowercase()).join(" ");
        let mut current = raw.to_string();
        let mut trace = Vec::new();
        for _ in 0..MAX_PASSES {
            let before = current.clone();
            for rule in &self.rules {
                let next = rule.apply(&current);
                if next != current {
                    trace.push(rule.to_string());
                    current = next;
                }
            }
            if current == before {
                break;
            }
        }
        if current.trim().is_empty() {
            current = fallback;
        }
        Normalized { canonical: current, trace }
    }
}

/// Raw relation string to canonical relation, with the rules that fired.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RelationGroupMap {
    entries: BTreeMap<String, Normalized>,
}

impl RelationGroupMap {
    pub fn build<'a, I: IntoIterator<Item = &'a str>>(raws: I, rules: &RuleSet) -> Self {
        let mut entries = BTreeMap::new();
        for raw in raws {
            entries.entry(raw.to_string()).or_insert_with(|| rules.normalize(raw));
        }
        Self { entries }
    }

    pub fn get(&self, raw: &str) -> Option<&Normalized> {
        self.entries.get(raw)
    }

    /// Canonical relation; strings never seen at build time only get whitespace
    /// and case cleanup.
    pub fn canonical(&self, raw: &str) -> String {
        match self.entries.get(raw) {
            Some(n) => n.canonical.clone(),
            None => tokens(&raw.to_lowercase()).join(" "),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Normalized)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `raw<TAB>canonical<TAB>trace` with rules joined by `|`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("raw\tcanonical\ttrace\n");
        for (raw, n) in &self.entries {
            out.push_str(&format!("{raw}\t{}\t{}\n", n.canonical, n.trace.join("|")));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grouping_examples() {
        let r = RuleSet::bundled();
        assert_eq!(r.normalize("is located in the").canonical, "is in");
        assert_eq!(r.normalize("is a 2015 book by").canonical, "is a book by");
        assert_eq!(r.normalize("is in").canonical, "is in");
        assert!(r.normalize("is in").trace.is_empty());
        for raw in ["is in", "is located in", "is in the", "is located in the", "Is  Located In THE"] {
            assert_eq!(r.normalize(raw).canonical, "is in", "{raw}");
        }
        assert_eq!(r.normalize("was the second album by").canonical, "was the album by");
        assert_eq!(r.normalize("is an 1990s film by").canonical, "is a film by");
    }

    #[test]
    fn trace_names_fired_rules() {
        let n = RuleSet::bundled().normalize("is located in the");
        assert_eq!(n.trace, vec!["strip-tail the a an", "replace is located in => is in"]);
    }

    #[test]
    fn fully_erased_relation_keeps_itself() {
        let r = RuleSet::bundled();
        assert_eq!(r.normalize("2015").canonical, "2015");
        assert_eq!(r.normalize(&r.normalize("2015").canonical).canonical, "2015");
    }

    #[test]
    fn rule_file_errors_carry_line() {
        let e = RuleSet::parse("lowercase\n\nfrobnicate\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(RuleSet::parse("replace a b\n").is_err());
        assert!(RuleSet::parse("replace in => is located in\n").is_err());
        assert!(RuleSet::parse("lowercase please\n").is_err());
        assert_eq!(RuleSet::parse(BUNDLED_RULES).unwrap().rules().len(), 9);
    }

    #[test]
    fn map_is_idempotent() {
        let r = RuleSet::bundled();
        let raws = ["is located in the", "is a 2015 book by", "was born in", "is the 3rd son of"];
        let m = RelationGroupMap::build(raws.iter().copied(), &r);
        for raw in raws {
            let c = m.canonical(raw);
            assert_eq!(r.normalize(&c).canonical, c);
        }
        assert!(m.to_tsv().starts_with("raw\tcanonical\ttrace\n"));
    }
}
