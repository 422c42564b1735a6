use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use super::*;
use crate::adversarial::{self, InversionLexicon, InvertOptions, RelationQuestionTemplates};
use crate::corpus::{
    build_small_split, load_dataset, load_overlay, merge_overlay, select_annotation, to_json_string,
    Format, LoadOptions, QaExample, SplitOptions,
};
use crate::debias::{self, EntityHints, InsertAt, PerturbOptions, Resources, SentencePool, TemplateSet, Variant};
use crate::metrics::{self, aggregate_runs, drop_table, evaluate, parse_predictions, ScoreTable, Tasks};
use crate::probe::{self, BaselineKind};
use crate::runconfig::{sha256_hex, RunConfig};
use crate::taskprep::{self, RelationGroupMap, RuleSet};
use crate::synth as gen;
use crate::text::Stopwords;
use crate::verify::{verify_fixtures, Fixtures, BUNDLED_FIXTURES};

pub(super) fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(SplitCommand::Small(a)) => split_small(a),
        Command::Probe(ProbeCommand::PositionBias(a)) => position_bias(a),
        Command::Probe(ProbeCommand::Overlap(a)) => overlap(a),
        Command::Probe(ProbeCommand::Baseline(a)) => baseline(a),
        Command::Gen(GenCommand::Debias(a)) => gen_debias(a),
        Command::Gen(GenCommand::Adversarial(a)) => gen_adversarial(a),
        Command::Prep(PrepCommand::GroupRelations(a)) => group_relations(a),
        Command::Prep(PrepCommand::ExportPairs(a)) => export_pairs(a),
        Command::Eval(a) => eval(a),
        Command::Report(ReportCommand::Drop(a)) => report_drop(a),
        Command::Report(ReportCommand::Aggregate(a)) => report_aggregate(a),
        Command::Verify(a) => verify(a),
        Command::Synth(a) => synth(a),
    }
}

fn data_dir() -> Option<PathBuf> {
    env::var_os(DATA_DIR_ENV).map(PathBuf::from)
}

/// Explicit flag first, then a same-named file in the data directory.
fn resource_path(explicit: &Option<PathBuf>, name: &str) -> Option<PathBuf> {
    explicit
        .clone()
        .or_else(|| data_dir().map(|d| d.join(name)).filter(|p| p.is_file()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> Result<Vec<QaExample>> {
    Ok(load_dataset(path, Format::HotpotQa, LoadOptions::default())?.examples)
}

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("cannot write {}", path.display()))
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

/// Inputs are never overwritten.
fn guard(inputs: &[&Path], outputs: &[&Path]) -> Result<()> {
    for o in outputs {
        if let Some(i) = inputs.iter().find(|i| same_file(i, o)) {
            bail!("output {} would overwrite input {}", o.display(), i.display());
        }
    }
    Ok(())
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// JSON and TSV siblings of a report path.
fn report_paths(out: &Path) -> (PathBuf, PathBuf) {
    match out.extension().and_then(|e| e.to_str()) {
        Some("tsv") => (out.with_extension("json"), out.to_path_buf()),
        _ => (out.to_path_buf(), out.with_extension("tsv")),
    }
}

fn finish(rc: &mut RunConfig, outputs: &[&Path]) -> Result<()> {
    for o in outputs {
        rc.output(o);
    }
    let primary = outputs.first().ok_or_else(|| anyhow!("no output to attach a run config to"))?;
    rc.write_sidecar(primary)
        .with_context(|| format!("cannot write run config for {}", primary.display()))?;
    Ok(())
}

fn stopwords(explicit: &Option<PathBuf>) -> Result<Stopwords> {
    Ok(match resource_path(explicit, "stopwords.txt") {
        Some(p) => Stopwords::parse(&read_text(&p)?),
        None => Stopwords::default(),
    })
}

fn ingest(a: &IngestArgs) -> Result<Outcome> {
    guard(&[&a.input], &[&a.out])?;
    let format = Format::parse(&a.format).ok_or_else(|| anyhow!("unknown format {:?}", a.format))?;
    let loaded = load_dataset(&a.input, format, LoadOptions { lenient: a.lenient })?;
    let mut examples = loaded.examples;
    let mut rc = RunConfig::new(["ingest"]);
    rc.arg("format", a.format.as_str()).arg("lenient", a.lenient).input(&a.input)?;
    if let Some(ov) = &a.overlay {
        guard(&[ov], &[&a.out])?;
        let overlay = load_overlay(ov)?;
        examples = merge_overlay(examples, &overlay, a.annotated_only)?;
        rc.arg("annotated_only", a.annotated_only).input(ov)?;
    }
    if a.select_annotation {
        let seed = a.seed.expect("clap requires --seed");
        examples = examples.iter().map(|e| select_annotation(e, seed)).collect::<Result<_, _>>()?;
        rc.seeds = vec![seed];
        rc.arg("select_annotation", true);
    }
    write(&a.out, &to_json_string(&examples))?;
    let mut outputs = vec![a.out.clone()];
    if !loaded.rejected.is_empty() {
        let rejected: Vec<Value> = loaded
            .rejected
            .iter()
            .map(|r| json!({ "index": r.index, "id": r.id, "path": r.path, "message": r.message }))
            .collect();
        let p = PathBuf::from(format!("{}.rejected.json", a.out.display()));
        write(&p, &json_text(&Value::Array(rejected)))?;
        outputs.push(p);
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    finish(&mut rc, &refs)?;
    Ok(Outcome::ok(
        format!(
            "ingested {} examples ({} rejected) -> {}",
            examples.len(),
            loaded.rejected.len(),
            a.out.display()
        ),
        json!({ "examples": examples.len(), "rejected": loaded.rejected.len(), "out": a.out.display().to_string() }),
    ))
}

fn split_small(a: &SplitArgs) -> Result<Outcome> {
    let train_path = a.out_dir.join("train.json");
    let dev_path = a.out_dir.join("dev.json");
    guard(&[&a.input], &[&train_path, &dev_path])?;
    let examples = load(&a.input)?;
    let (train, dev) = build_small_split(
        &examples,
        a.train,
        a.dev,
        a.seed,
        SplitOptions {
            stratified: a.stratified,
        },
    )?;
    write(&train_path, &to_json_string(&train))?;
    write(&dev_path, &to_json_string(&dev))?;
    for (part, path) in [("train", &train_path), ("dev", &dev_path)] {
        let mut rc = RunConfig::new(["split", "small"]);
        rc.arg("train", a.train)
            .arg("dev", a.dev)
            .arg("stratified", a.stratified)
            .arg("part", part)
            .input(&a.input)?;
        rc.seeds = vec![a.seed];
        finish(&mut rc, &[path])?;
    }
    Ok(Outcome::ok(
        format!(
            "train {} -> {}\ndev {} -> {}",
            train.len(),
            train_path.display(),
            dev.len(),
            dev_path.display()
        ),
        json!({ "train": train.len(), "dev": dev.len() }),
    ))
}

fn position_bias(a: &PositionArgs) -> Result<Outcome> {
    let examples = load(&a.input)?;
    let report = probe::position_histogram(&examples);
    let mut tsv = String::from("scope\tn_position0\tn_position_other\tfraction_position0\tfraction_other\n");
    let mut row = |scope: &str, c: &probe::PositionCounts| {
        tsv.push_str(&format!(
            "{scope}\t{}\t{}\t{:.4}\t{:.4}\n",
            c.n_position0, c.n_position_other, c.fraction_position0, c.fraction_other
        ));
    };
    row("all", &report.overall);
    let mut v = serde_json::to_value(&report)?;
    if a.by_qtype {
        for (t, c) in &report.by_qtype {
            row(&t.to_string(), c);
        }
    } else if let Value::Object(m) = &mut v {
        m.remove("by_qtype");
    }
    v["kind"] = Value::from("position-bias");
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        guard(&[&a.input], &[&jp, &tp])?;
        write(&jp, &json_text(&v))?;
        write(&tp, &tsv)?;
        let mut rc = RunConfig::new(["probe", "position-bias"]);
        rc.arg("by_qtype", a.by_qtype).input(&a.input)?;
        finish(&mut rc, &[&jp, &tp])?;
    }
    Ok(Outcome::ok(tsv, v))
}

fn overlap(a: &OverlapArgs) -> Result<Outcome> {
    let examples = load(&a.input)?;
    let sw = stopwords(&a.stopwords)?;
    let report = probe::overlap_report(&examples, &sw, !a.all_types);
    let fraction = if report.considered > 0 {
        report.flagged as f64 / report.considered as f64
    } else {
        0.0
    };
    let mut v = serde_json::to_value(&report)?;
    v["kind"] = Value::from("overlap");
    v["fraction_flagged"] = Value::from(fraction);
    let tsv = format!(
        "considered\tflagged\tanswer_not_found\tfraction_flagged\n{}\t{}\t{}\t{:.4}\n",
        report.considered, report.flagged, report.answer_not_found, fraction
    );
    let mut rc = RunConfig::new(["probe", "overlap"]);
    rc.arg("bridge_only", !a.all_types)
        .input(&a.input)?
        .resource("stopwords", sw.digest());
    let mut outputs: Vec<PathBuf> = Vec::new();
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        write(&jp, &json_text(&v))?;
        write(&tp, &tsv)?;
        outputs.extend([jp, tp]);
    }
    if let Some(dump) = &a.dump_verdicts {
        let mut lines = String::new();
        for verdict in &report.verdicts {
            lines.push_str(&serde_json::to_string(verdict)?);
            lines.push('\n');
        }
        write(dump, &lines)?;
        outputs.push(dump.clone());
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    guard(&[&a.input], &refs)?;
    if !refs.is_empty() {
        finish(&mut rc, &refs)?;
    }
    Ok(Outcome::ok(tsv, v))
}

fn baseline(a: &BaselineArgs) -> Result<Outcome> {
    let examples = load(&a.input)?;
    let sw = stopwords(&a.stopwords)?;
    let kind = match a.kind.as_str() {
        "overlap" => BaselineKind::Overlap,
        _ => BaselineKind::Position0,
    };
    let rate = probe::hit_rate(&examples, kind, &sw);
    let mut v = serde_json::to_value(rate)?;
    v["kind"] = Value::from("baseline");
    v["baseline"] = Value::from(a.kind.as_str());
    let tsv = format!(
        "baseline\texamples\thits\thit_rate\n{}\t{}\t{}\t{:.4}\n",
        a.kind, rate.examples, rate.hits, rate.rate
    );
    let mut rc = RunConfig::new(["probe", "baseline"]);
    rc.arg("kind", a.kind.as_str()).input(&a.input)?.resource("stopwords", sw.digest());
    let mut outputs: Vec<PathBuf> = Vec::new();
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        write(&jp, &json_text(&v))?;
        write(&tp, &tsv)?;
        outputs.extend([jp, tp]);
    }
    if let Some(p) = &a.predictions {
        let preds = probe::baseline_predictions(&examples, kind, &sw);
        write(p, &metrics::predictions_to_json(&preds))?;
        outputs.push(p.clone());
    }
    let refs: Vec<&Path> = outputs.iter().map(PathBuf::as_path).collect();
    guard(&[&a.input], &refs)?;
    if !refs.is_empty() {
        finish(&mut rc, &refs)?;
    }
    Ok(Outcome::ok(tsv, v))
}

fn expand_variants(names: &[String]) -> Result<Vec<Variant>> {
    let mut out: Vec<Variant> = Vec::new();
    for n in names {
        let add: Vec<Variant> = if n == "all" {
            Variant::ALL.to_vec()
        } else {
            vec![Variant::parse(n)?]
        };
        for v in add {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn run_seeds(seeds: &[u64], runs: Option<usize>) -> Result<Vec<u64>> {
    match runs {
        None => Ok(seeds.to_vec()),
        Some(r) if seeds.len() == 1 => Ok((0..r as u64).map(|i| seeds[0].wrapping_add(i)).collect()),
        Some(r) if seeds.len() == r => Ok(seeds.to_vec()),
        Some(r) => bail!("--runs {r} needs one --seed or exactly {r} of them, got {}", seeds.len()),
    }
}

/// `{stem}.run{r}.{variant}.{ext}` when a call produces several sets.
fn set_path(out: &Path, run: u32, variant: Variant, several: bool) -> PathBuf {
    if !several {
        return out.to_path_buf();
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = out.extension().and_then(|e| e.to_str()).unwrap_or("json");
    out.with_file_name(format!("{stem}.run{run}.{}.{ext}", variant.slug()))
}

fn debias_resources(a: &DebiasArgs) -> Result<(Resources, usize)> {
    let (pool, dropped) = match resource_path(&a.pool, "unrelated_pool.txt") {
        Some(p) => SentencePool::from_text(&read_text(&p)?, p.display().to_string()),
        None => (SentencePool::bundled(), 0),
    };
    let templates = match resource_path(&a.templates, "related_templates.json") {
        Some(p) => TemplateSet::from_json(&read_text(&p)?)?,
        None => TemplateSet::bundled(),
    };
    let hints = match &a.hints {
        Some(p) => Some(
            serde_json::from_str::<EntityHints>(&read_text(p)?)
                .with_context(|| format!("malformed hints file {}", p.display()))?,
        ),
        None => None,
    };
    Ok((Resources { pool, templates, hints }, dropped))
}

fn gen_debias(a: &DebiasArgs) -> Result<Outcome> {
    let variants = expand_variants(&a.variant)?;
    let seeds = run_seeds(&a.seed, a.runs)?;
    debias::check_seeds(&seeds)?;
    let (res, dropped) = debias_resources(a)?;
    let opts = PerturbOptions {
        insert_at: InsertAt::parse(&a.insert_at).ok_or_else(|| anyhow!("unknown position {:?}", a.insert_at))?,
        gold_only: a.gold_only,
    };
    let examples = load(&a.input)?;
    let sets = debias::generate_debiased_suite(&examples, &seeds, &variants, &res, opts)?;
    let several = sets.len() > 1;
    let paths: Vec<PathBuf> = sets.iter().map(|s| set_path(&a.out, s.run_id, s.variant, several)).collect();
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    guard(&[&a.input], &refs)?;

    let mut lines = Vec::new();
    let mut files = Vec::new();
    for (set, path) in sets.iter().zip(&paths) {
        write(path, &to_json_string(&set.examples))?;
        let records_path = PathBuf::from(format!("{}.records.json", path.display()));
        write(&records_path, &json_text(&serde_json::to_value(&set.records)?))?;
        let mut rc = RunConfig::new(["gen", "debias"]);
        rc.arg("variant", set.variant.slug())
            .arg("run", set.run_id)
            .arg("insert_at", a.insert_at.as_str())
            .arg("gold_only", a.gold_only)
            .input(&a.input)?
            .resource("pool", res.pool.digest())
            .resource("templates", res.templates.digest());
        if let Some(h) = &a.hints {
            rc.input(h)?;
        }
        rc.seeds = vec![set.seed];
        finish(&mut rc, &[path, &records_path])?;
        lines.push(format!(
            "run {} seed {} {}: {} examples -> {}",
            set.run_id,
            set.seed,
            set.variant.slug(),
            set.examples.len(),
            path.display()
        ));
        files.push(json!({
            "run": set.run_id,
            "seed": set.seed,
            "variant": set.variant.slug(),
            "examples": set.examples.len(),
            "path": path.display().to_string(),
        }));
    }
    if dropped > 0 {
        lines.push(format!("{dropped} pool sentences outside the 12-20 token bound were dropped"));
    }
    Ok(Outcome::ok(lines.join("\n"), json!({ "sets": files, "pool_dropped": dropped })))
}

fn gen_adversarial(a: &AdversarialArgs) -> Result<Outcome> {
    let lexicon = match resource_path(&a.lexicon, "lexicon.json") {
        Some(p) => InversionLexicon::from_json(&read_text(&p)?)?,
        None => InversionLexicon::bundled(),
    };
    let templates = match resource_path(&a.templates, "relation_templates.json") {
        Some(p) => RelationQuestionTemplates::from_json(&read_text(&p)?)?,
        None => RelationQuestionTemplates::bundled(),
    };
    let rule = adversarial::Rule::parse(&a.rule).ok_or_else(|| anyhow!("unknown rule {:?}", a.rule))?;
    let mut outs: Vec<&Path> = vec![&a.out];
    if let Some(s) = &a.skip_report {
        outs.push(s);
    }
    guard(&[&a.input], &outs)?;
    let examples = load(&a.input)?;
    let set = adversarial::build_adversarial_set(
        &examples,
        &lexicon,
        &templates,
        rule,
        InvertOptions {
            verify_with_triples: a.verify_triples,
        },
    );
    write(&a.out, &to_json_string(&set.examples))?;
    if let Some(s) = &a.skip_report {
        write(s, &set.skip_report_tsv())?;
    }
    let mut rc = RunConfig::new(["gen", "adversarial"]);
    rc.arg("rule", a.rule.as_str())
        .arg("verify_triples", a.verify_triples)
        .input(&a.input)?
        .resource("lexicon", lexicon.digest())
        .resource("relation_templates", templates.digest());
    finish(&mut rc, &outs)?;
    let counts: BTreeMap<String, usize> = set.skip_counts().into_iter().map(|(r, n)| (r.to_string(), n)).collect();
    let mut text = format!(
        "emitted {} of {} -> {}\n",
        set.examples.len(),
        examples.len(),
        a.out.display()
    );
    for (r, n) in &counts {
        text.push_str(&format!("skipped {r}: {n}\n"));
    }
    Ok(Outcome::ok(
        text,
        json!({ "input": examples.len(), "emitted": set.examples.len(), "skipped": counts }),
    ))
}

fn rules(explicit: &Option<PathBuf>) -> Result<RuleSet> {
    Ok(match resource_path(explicit, "relation_rules.txt") {
        Some(p) => RuleSet::parse(&read_text(&p)?)?,
        None => RuleSet::bundled(),
    })
}

fn group_relations(a: &GroupArgs) -> Result<Outcome> {
    let rules = rules(&a.rules)?;
    let stem = a.out.with_extension("");
    let inv_json = PathBuf::from(format!("{}.inventory.json", stem.display()));
    let inv_tsv = PathBuf::from(format!("{}.inventory.tsv", stem.display()));
    guard(&[&a.input], &[&a.out, &inv_json, &inv_tsv])?;
    let examples = load(&a.input)?;
    let (inv, map) = taskprep::build_relation_inventory(&examples, &rules);
    write(&a.out, &map.to_tsv())?;
    let mut v = serde_json::to_value(&inv)?;
    v["kind"] = Value::from("relation-inventory");
    v["raw_count"] = Value::from(inv.raw_count());
    v["grouped_count"] = Value::from(inv.grouped_count());
    v["labels"] = serde_json::to_value(inv.labels())?;
    write(&inv_json, &json_text(&v))?;
    write(&inv_tsv, &inv.to_tsv())?;
    let mut rc = RunConfig::new(["prep", "group-relations"]);
    rc.input(&a.input)?.resource("rules", rules.digest());
    finish(&mut rc, &[&a.out, &inv_json, &inv_tsv])?;
    Ok(Outcome::ok(
        format!(
            "relations: {} raw, {} grouped, {} labels -> {}",
            inv.raw_count(),
            inv.grouped_count(),
            inv.labels().len(),
            a.out.display()
        ),
        json!({ "raw": inv.raw_count(), "grouped": inv.grouped_count(), "labels": inv.labels().len() }),
    ))
}

fn export_pairs(a: &PairArgs) -> Result<Outcome> {
    let mut inputs: Vec<&Path> = vec![&a.input];
    inputs.extend(a.spans.as_deref());
    inputs.extend(a.train.as_deref());
    guard(&inputs, &[&a.out])?;
    let rules = rules(&a.rules)?;
    let examples = load(&a.input)?;
    let train = match &a.train {
        Some(p) => Some(load(p)?),
        None => None,
    };
    let raws: Vec<&str> = examples
        .iter()
        .chain(train.iter().flatten())
        .flat_map(|e| e.evidence_sets.iter().flatten())
        .map(|t| t.relation.as_str())
        .collect();
    let map = RelationGroupMap::build(raws, &rules);
    let inventory = train.as_ref().map(|t| taskprep::build_relation_inventory(t, &rules).0);
    let spans = match &a.spans {
        Some(p) => Some(
            taskprep::parse_span_file(&read_text(p)?)
                .with_context(|| format!("malformed span file {}", p.display()))?,
        ),
        None => None,
    };
    let export = taskprep::export_pairs(&examples, spans.as_ref(), &map, inventory.as_ref());
    write(&a.out, &export.to_jsonl())?;
    let mut rc = RunConfig::new(["prep", "export-pairs"]);
    for p in &inputs {
        rc.input(p)?;
    }
    rc.resource("rules", rules.digest());
    finish(&mut rc, &[&a.out])?;
    Ok(Outcome::ok(
        format!(
            "{} pairs from {} examples ({} labelled, {} unlocated mentions, {} outside the training inventory) -> {}",
            export.instances.len(),
            export.examples,
            export.labelled,
            export.unlocated_mentions,
            export.out_of_inventory,
            a.out.display()
        ),
        json!({
            "pairs": export.instances.len(),
            "examples": export.examples,
            "labelled": export.labelled,
            "unlocated_mentions": export.unlocated_mentions,
            "out_of_inventory": export.out_of_inventory,
        }),
    ))
}

fn eval(a: &EvalArgs) -> Result<Outcome> {
    let tasks = Tasks::parse(&a.tasks)?;
    let preds = parse_predictions(&read_text(&a.pred)?)?;
    let gold = load(&a.gold)?;
    let report = evaluate(&preds, &gold, tasks);
    let tsv = report.to_table().to_tsv(100.0);
    let text = report.to_json();
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        guard(&[&a.pred, &a.gold], &[&jp, &tp])?;
        write(&jp, &text)?;
        write(&tp, &tsv)?;
        let mut rc = RunConfig::new(["eval"]);
        rc.arg("tasks", tasks.names().join(",")).input(&a.pred)?.input(&a.gold)?;
        finish(&mut rc, &[&jp, &tp])?;
    }
    Ok(Outcome::ok(tsv, serde_json::from_str(&text)?))
}

fn table_kind(text: &str) -> String {
    serde_json::from_str::<Value>(text)
        .ok()
        .and_then(|v| v.get("kind").and_then(Value::as_str).map(str::to_owned))
        .unwrap_or_default()
}

fn report_drop(a: &DropArgs) -> Result<Outcome> {
    let base_text = read_text(&a.base)?;
    let base = ScoreTable::from_json(&base_text)?;
    let pert = ScoreTable::from_json(&read_text(&a.pert)?)?;
    let table = drop_table(&base, &pert);
    if table.cells.is_empty() {
        bail!("{} and {} share no cells", a.base.display(), a.pert.display());
    }
    let scale = if table_kind(&base_text) == "eval" { 100.0 } else { 1.0 };
    let v = json!({
        "kind": "drop",
        "unit": "percent",
        "base": a.base.display().to_string(),
        "pert": a.pert.display().to_string(),
        "base_scale": scale,
        "cells": table.cells,
    });
    let tsv = table.to_tsv(1.0);
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        guard(&[&a.base, &a.pert], &[&jp, &tp])?;
        write(&jp, &json_text(&v))?;
        write(&tp, &tsv)?;
        let mut rc = RunConfig::new(["report", "drop"]);
        rc.input(&a.base)?.input(&a.pert)?;
        finish(&mut rc, &[&jp, &tp])?;
    }
    Ok(Outcome::ok(tsv, v))
}

fn report_aggregate(a: &AggregateArgs) -> Result<Outcome> {
    let mut tables = Vec::with_capacity(a.reports.len());
    let mut kinds = Vec::with_capacity(a.reports.len());
    for p in &a.reports {
        let text = read_text(p)?;
        kinds.push(table_kind(&text));
        tables.push(ScoreTable::from_json(&text).with_context(|| format!("in {}", p.display()))?);
    }
    let agg = aggregate_runs(&tables)?;
    let scale = if kinds.iter().all(|k| k == "eval") { 100.0 } else { 1.0 };
    let tsv = agg.to_tsv(scale);
    let text = agg.to_json();
    if let Some(out) = &a.out {
        let (jp, tp) = report_paths(out);
        let ins: Vec<&Path> = a.reports.iter().map(PathBuf::as_path).collect();
        guard(&ins, &[&jp, &tp])?;
        write(&jp, &text)?;
        write(&tp, &tsv)?;
        let mut rc = RunConfig::new(["report", "aggregate"]);
        for p in &a.reports {
            rc.input(p)?;
        }
        finish(&mut rc, &[&jp, &tp])?;
    }
    Ok(Outcome::ok(tsv, serde_json::from_str(&text)?))
}

fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let text = match resource_path(&a.fixtures, "fixtures.json") {
        Some(p) => read_text(&p)?,
        None => BUNDLED_FIXTURES.to_string(),
    };
    let fx = Fixtures::from_json(&text).context("malformed fixture file")?;
    let results = verify_fixtures(&fx);
    let failed = results.iter().filter(|r| !r.passed()).count();
    let mut out = String::new();
    for r in &results {
        out.push_str(&format!("{r}\n"));
    }
    out.push_str(&format!("{} of {} fixtures passed\n", results.len() - failed, results.len()));
    let json = json!({
        "fixtures_sha256": sha256_hex(text.as_bytes()),
        "passed": results.len() - failed,
        "failed": results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| json!({ "group": r.group, "name": r.name, "failures": r.failures }))
            .collect::<Vec<_>>(),
    });
    Ok(Outcome {
        text: out,
        json,
        status: if failed > 0 { 1 } else { 0 },
    })
}

fn synth(a: &SynthArgs) -> Result<Outcome> {
    let examples = match a.kind.as_str() {
        "position0" => gen::position0_corpus(a.n),
        "comparison" => gen::comparison_suite(a.n),
        "bridge" => gen::bridge_suite(a.n),
        _ => gen::toy_corpus(a.n),
    };
    write(&a.out, &to_json_string(&examples))?;
    let mut rc = RunConfig::new(["synth"]);
    rc.arg("kind", a.kind.as_str()).arg("n", a.n);
    finish(&mut rc, &[&a.out])?;
    Ok(Outcome::ok(
        format!("{} {} examples -> {}", examples.len(), a.kind, a.out.display()),
        json!({ "examples": examples.len() }),
    ))
}
