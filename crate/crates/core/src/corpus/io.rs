//! Reading and writing the HotpotQA-style record layout.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::model::{
    EvidenceTriple, FieldIssue, Paragraph, Provenance, QaExample, QuestionType, SupportingFact,
};
use super::CorpusError;

/// Input schema of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    HotpotQa,
    TwoWiki,
    /// Derivation annotations keyed by id, merged onto loaded HotpotQA examples.
    R4cOverlay,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "hotpotqa" => Some(Self::HotpotQa),
            "2wiki" => Some(Self::TwoWiki),
            "r4c-overlay" => Some(Self::R4cOverlay),
            _ => None,
        }
    }
}

/// A record rejected during loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub index: usize,
    pub id: Option<String>,
    pub path: String,
    pub message: String,
}

impl fmt::Display for RecordError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "record {}", self.index)?;
        if let Some(id) = &self.id {
            write!(f, " ({id})")?;
        }
        write!(f, " at {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop invalid records after reporting them instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub examples: Vec<QaExample>,
    pub rejected: Vec<RecordError>,
}

/// Loads a HotpotQA or 2Wiki file (JSON array or newline-delimited JSON).
pub fn load_dataset(
    path: &Path,
    format: Format,
    opts: LoadOptions,
) -> Result<Loaded, CorpusError> {
    if format == Format::R4cOverlay {
        return Err(CorpusError::OverlayNeedsBase);
    }
    let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_dataset(&text, opts)
}

/// Parses dataset text; see [`load_dataset`].
pub fn parse_dataset(text: &str, opts: LoadOptions) -> Result<Loaded, CorpusError> {
    let records = split_records(text)?;
    let mut loaded = Loaded::default();
    for (index, value) in records.into_iter().enumerate() {
        match parse_record(&value) {
            Ok(example) => {
                let issues = example.validate();
                if issues.is_empty() {
                    loaded.examples.push(example);
                } else {
                    loaded.rejected.push(RecordError {
                        index,
                        id: Some(example.id.clone()),
                        path: issues[0].path.clone(),
                        message: issues
                            .iter()
                            .map(|i| format!("{}: {}", i.path, i.message))
                            .collect::<Vec<_>>()
                            .join("; "),
                    });
                }
            }
            Err(issue) => loaded.rejected.push(RecordError {
                index,
                id: value.get("_id").and_then(Value::as_str).map(str::to_owned),
                path: issue.path,
                message: issue.message,
            }),
        }
    }
    if !opts.lenient && !loaded.rejected.is_empty() {
        return Err(CorpusError::Invalid(loaded.rejected));
    }
    Ok(loaded)
}

fn split_records(text: &str) -> Result<Vec<Value>, CorpusError> {
    let trimmed = text.trim_start();
    if trimmed.is_empty() {
        return Ok(Vec::new());
    }
    if trimmed.starts_with('[') {
        return match serde_json::from_str::<Value>(text) {
            Ok(Value::Array(items)) => Ok(items),
            Ok(_) => Err(CorpusError::Syntax {
                line: None,
                message: "top-level value is not an array".into(),
            }),
            Err(e) => Err(CorpusError::Syntax {
                line: Some(e.line()),
                message: e.to_string(),
            }),
        };
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::Syntax {
                line: Some(i + 1),
                message: e.to_string(),
            })
        })
        .collect()
}

fn issue(path: impl Into<String>, message: impl Into<String>) -> FieldIssue {
    FieldIssue {
        path: path.into(),
        message: message.into(),
    }
}

fn req_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, FieldIssue> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(issue(key, "expected a string")),
        None => Err(issue(key, "missing field")),
    }
}

fn as_str_at<'a>(v: &'a Value, path: &str) -> Result<&'a str, FieldIssue> {
    v.as_str().ok_or_else(|| issue(path, "expected a string"))
}

fn as_array_at<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, FieldIssue> {
    v.as_array().ok_or_else(|| issue(path, "expected an array"))
}

fn parse_triple(v: &Value, path: &str) -> Result<EvidenceTriple, FieldIssue> {
    let items = as_array_at(v, path)?;
    if items.len() != 3 {
        return Err(issue(path, format!("expected [subject, relation, object], got {} items", items.len())));
    }
    Ok(EvidenceTriple::new(
        as_str_at(&items[0], &format!("{path}[0]"))?,
        as_str_at(&items[1], &format!("{path}[1]"))?,
        as_str_at(&items[2], &format!("{path}[2]"))?,
    ))
}

fn parse_triple_list(v: &Value, path: &str) -> Result<Vec<EvidenceTriple>, FieldIssue> {
    as_array_at(v, path)?
        .iter()
        .enumerate()
        .map(|(i, t)| parse_triple(t, &format!("{path}[{i}]")))
        .collect()
}

const KNOWN_FIELDS: &[&str] = &[
    "_id",
    "question",
    "answer",
    "type",
    "context",
    "supporting_facts",
    "evidences",
    "evidence_sets",
    "provenance",
];

/// Converts one JSON record into an example without checking cross-field invariants.
pub fn parse_record(value: &Value) -> Result<QaExample, FieldIssue> {
    let obj = value
        .as_object()
        .ok_or_else(|| issue("$", "record is not an object"))?;

    let id = req_str(obj, "_id")?.to_owned();
    let question = req_str(obj, "question")?.to_owned();
    let answer = req_str(obj, "answer")?.to_owned();
    let type_str = req_str(obj, "type")?;
    let qtype = QuestionType::parse(type_str)
        .ok_or_else(|| issue("type", format!("unknown question type {type_str:?}")))?;

    let ctx = obj.get("context").ok_or_else(|| issue("context", "missing field"))?;
    let mut context = Vec::new();
    for (i, entry) in as_array_at(ctx, "context")?.iter().enumerate() {
        let path = format!("context[{i}]");
        let pair = as_array_at(entry, &path)?;
        if pair.len() != 2 {
            return Err(issue(path, "expected [title, [sentences]]"));
        }
        let title = as_str_at(&pair[0], &format!("{path}[0]"))?;
        let sentences = as_array_at(&pair[1], &format!("{path}[1]"))?
            .iter()
            .enumerate()
            .map(|(j, s)| as_str_at(s, &format!("{path}[1][{j}]")).map(str::to_owned))
            .collect::<Result<Vec<_>, _>>()?;
        context.push(Paragraph::new(title, sentences));
    }

    let sfs = obj
        .get("supporting_facts")
        .ok_or_else(|| issue("supporting_facts", "missing field"))?;
    let mut supporting_facts = Vec::new();
    for (i, entry) in as_array_at(sfs, "supporting_facts")?.iter().enumerate() {
        let path = format!("supporting_facts[{i}]");
        let pair = as_array_at(entry, &path)?;
        if pair.len() != 2 {
            return Err(issue(path, "expected [title, sentence_index]"));
        }
        let title = as_str_at(&pair[0], &format!("{path}[0]"))?;
        let index = pair[1]
            .as_u64()
            .ok_or_else(|| issue(format!("{path}[1]"), "expected a non-negative integer"))?;
        supporting_facts.push(SupportingFact::new(title, index as usize));
    }

    let mut evidence_sets = Vec::new();
    if let Some(sets) = obj.get("evidence_sets") {
        for (i, set) in as_array_at(sets, "evidence_sets")?.iter().enumerate() {
            evidence_sets.push(parse_triple_list(set, &format!("evidence_sets[{i}]"))?);
        }
    } else if let Some(ev) = obj.get("evidences") {
        evidence_sets.push(parse_triple_list(ev, "evidences")?);
    }

    let provenance = match obj.get("provenance") {
        Some(v) => serde_json::from_value::<Provenance>(v.clone())
            .map_err(|e| issue("provenance", e.to_string()))?,
        None => Provenance::default(),
    };

    let extra: BTreeMap<String, Value> = obj
        .iter()
        .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok(QaExample {
        id,
        question,
        answer,
        qtype,
        context,
        supporting_facts,
        evidence_sets,
        provenance,
        extra,
    })
}

fn triple_value(t: &EvidenceTriple) -> Value {
    json!([t.subject, t.relation, t.object])
}

/// Writes an example back in the record layout it was read from.
/// A single evidence set goes to `evidences`; several go to `evidence_sets`.
pub fn to_record(ex: &QaExample) -> Value {
    let mut obj = Map::new();
    obj.insert("_id".into(), json!(ex.id));
    obj.insert("question".into(), json!(ex.question));
    obj.insert("answer".into(), json!(ex.answer));
    obj.insert("type".into(), json!(ex.qtype.as_str()));
    obj.insert(
        "context".into(),
        Value::Array(
            ex.context
                .iter()
                .map(|p| json!([p.title, p.sentences]))
                .collect(),
        ),
    );
    obj.insert(
        "supporting_facts".into(),
        Value::Array(
            ex.supporting_facts
                .iter()
                .map(|sf| json!([sf.title, sf.sentence]))
                .collect(),
        ),
    );
    match ex.evidence_sets.len() {
        0 => {}
        1 => {
            obj.insert(
                "evidences".into(),
                Value::Array(ex.evidence_sets[0].iter().map(triple_value).collect()),
            );
        }
        _ => {
            obj.insert(
                "evidence_sets".into(),
                Value::Array(
                    ex.evidence_sets
                        .iter()
                        .map(|set| Value::Array(set.iter().map(triple_value).collect()))
                        .collect(),
                ),
            );
        }
    }
    if !ex.provenance.is_original() {
        obj.insert(
            "provenance".into(),
            serde_json::to_value(&ex.provenance).expect("provenance serializes"),
        );
    }
    for (k, v) in &ex.extra {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

/// Serializes examples as a pretty JSON array (stable key order).
pub fn to_json_string(examples: &[QaExample]) -> String {
    let arr = Value::Array(examples.iter().map(to_record).collect());
    let mut s = serde_json::to_string_pretty(&arr).expect("records serialize");
    s.push('\n');
    s
}

pub fn write_dataset(path: &Path, examples: &[QaExample]) -> Result<(), CorpusError> {
    fs::write(path, to_json_string(examples)).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Derivation annotations per example id; each entry is one annotator's triple set.
pub type Overlay = BTreeMap<String, Vec<Vec<EvidenceTriple>>>;

pub fn load_overlay(path: &Path) -> Result<Overlay, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_overlay(&text)
}

/// Accepts, per id, either one annotation or a list of annotations. An annotation is
/// a list of `[head, relation, tail]` triples or the title-keyed form
/// `{title: [[sentence_index, [head, relation, tail]], ...]}`.
pub fn parse_overlay(text: &str) -> Result<Overlay, CorpusError> {
    let root: Value = serde_json::from_str(text).map_err(|e| CorpusError::Syntax {
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| CorpusError::Syntax {
        line: None,
        message: "overlay root must be an object keyed by example id".into(),
    })?;
    let mut overlay = Overlay::new();
    let mut errors = Vec::new();
    for (index, (id, v)) in obj.iter().enumerate() {
        match parse_annotations(v, id) {
            Ok(sets) => {
                overlay.insert(id.clone(), sets);
            }
            Err(e) => errors.push(RecordError {
                index,
                id: Some(id.clone()),
                path: e.path,
                message: e.message,
            }),
        }
    }
    if errors.is_empty() {
        Ok(overlay)
    } else {
        Err(CorpusError::Invalid(errors))
    }
}

fn is_triple(v: &Value) -> bool {
    matches!(v, Value::Array(items) if items.len() == 3 && items.iter().all(Value::is_string))
}

fn parse_annotations(v: &Value, id: &str) -> Result<Vec<Vec<EvidenceTriple>>, FieldIssue> {
    match v {
        Value::Object(_) => Ok(vec![parse_annotation(v, id)?]),
        Value::Array(items) if items.iter().all(is_triple) => {
            Ok(vec![parse_triple_list(v, id)?])
        }
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, a)| parse_annotation(a, &format!("{id}[{i}]")))
            .collect(),
        _ => Err(issue(id, "expected an annotation object or array")),
    }
}

fn parse_annotation(v: &Value, path: &str) -> Result<Vec<EvidenceTriple>, FieldIssue> {
    match v {
        Value::Array(_) => parse_triple_list(v, path),
        Value::Object(by_title) => {
            let mut triples = Vec::new();
            for (title, derivs) in by_title {
                let tpath = format!("{path}.{title}");
                for (i, d) in as_array_at(derivs, &tpath)?.iter().enumerate() {
                    let dpath = format!("{tpath}[{i}]");
                    let pair = as_array_at(d, &dpath)?;
                    match pair.as_slice() {
                        [_, t] => triples.push(parse_triple(t, &format!("{dpath}[1]"))?),
                        [t] if is_triple(t) => triples.push(parse_triple(t, &dpath)?),
                        _ => return Err(issue(dpath, "expected [sentence_index, [head, relation, tail]]")),
                    }
                }
            }
            Ok(triples)
        }
        _ => Err(issue(path, "expected an annotation")),
    }
}

/// Attaches overlay annotations to base examples by id. With `annotated_only`,
/// examples without an overlay entry are dropped.
pub fn merge_overlay(
    base: Vec<QaExample>,
    overlay: &Overlay,
    annotated_only: bool,
) -> Result<Vec<QaExample>, CorpusError> {
    let ids: HashMap<&str, ()> = base.iter().map(|e| (e.id.as_str(), ())).collect();
    let orphans: Vec<String> = overlay
        .keys()
        .filter(|id| !ids.contains_key(id.as_str()))
        .cloned()
        .collect();
    if !orphans.is_empty() {
        return Err(CorpusError::OrphanOverlay(orphans));
    }
    let merged: Vec<QaExample> = base
        .into_iter()
        .filter_map(|mut ex| match overlay.get(&ex.id) {
            Some(sets) => {
                ex.evidence_sets = sets.clone();
                Some(ex)
            }
            None if annotated_only => None,
            None => Some(ex),
        })
        .collect();
    let errors: Vec<RecordError> = merged
        .iter()
        .enumerate()
        .filter_map(|(index, ex)| {
            let issues = ex.validate();
            let first = issues.first()?;
            Some(RecordError {
                index,
                id: Some(ex.id.clone()),
                path: first.path.clone(),
                message: first.message.clone(),
            })
        })
        .collect();
    if errors.is_empty() {
        Ok(merged)
    } else {
        Err(CorpusError::Invalid(errors))
    }
}
