//! Command-line front end. `run` maps argv to an exit status:
//! 0 on success, 1 on a module error, 2 on a usage error.

mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::corpus::CorpusError;

pub const DATA_DIR_ENV: &str = "HOPKIT_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "hopkit", version, about = "Shortcut probes, debiased/adversarial sets and joint metrics for multi-hop QA corpora")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Print nothing on success.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print machine-readable JSON summaries and errors.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, validate and normalize a dataset (optionally merging an R4C overlay).
    Ingest(IngestArgs),
    /// Seeded train/dev re-splits.
    #[command(subcommand)]
    Split(SplitCommand),
    /// Position bias, word-overlap shortcuts and non-neural baselines.
    #[command(subcommand)]
    Probe(ProbeCommand),
    /// Debiased and adversarial evaluation sets.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Relation grouping and entity-pair export.
    #[command(subcommand)]
    Prep(PrepCommand),
    /// Score predictions against gold.
    Eval(EvalArgs),
    /// Performance drops and multi-run aggregation.
    #[command(subcommand)]
    Report(ReportCommand),
    /// Check the bundled hand-traced fixtures.
    Verify(VerifyArgs),
    /// Write a generated corpus with planted structure.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "hotpotqa", value_parser = ["hotpotqa", "2wiki"])]
    pub format: String,
    /// R4C derivation file keyed by id, merged onto the input.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Keep only examples that have an overlay entry.
    #[arg(long, requires = "overlay")]
    pub annotated_only: bool,
    /// Keep one evidence annotation per example, chosen with --seed.
    #[arg(long, requires = "seed")]
    pub select_annotation: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop invalid records after reporting them.
    #[arg(long)]
    pub lenient: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SplitCommand {
    /// Disjoint train/dev split of exact sizes.
    Small(SplitArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub train: usize,
    #[arg(long)]
    pub dev: usize,
    #[arg(long)]
    pub seed: u64,
    /// Allocate coarse question types proportionally.
    #[arg(long)]
    pub stratified: bool,
    /// Directory receiving train.json and dev.json.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    PositionBias(PositionArgs),
    Overlap(OverlapArgs),
    Baseline(BaselineArgs),
}

#[derive(Debug, Args)]
pub struct PositionArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Include the comparison/bridge breakdown in the table.
    #[arg(long)]
    pub by_qtype: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Run on every question instead of bridge questions only.
    #[arg(long)]
    pub all_types: bool,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// One ShortcutVerdict per line.
    #[arg(long)]
    pub dump_verdicts: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "position0", value_parser = ["position0", "overlap"])]
    pub kind: String,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Write baseline output as a prediction file.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    Debias(DebiasArgs),
    Adversarial(AdversarialArgs),
}

#[derive(Debug, Args)]
pub struct DebiasArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Repeatable; `all` selects the four variants.
    #[arg(long, required = true, value_parser = ["add-unrelated", "add-related", "add2", "add2swap", "all"])]
    pub variant: Vec<String>,
    /// Run seed; repeat once per run.
    #[arg(long, required = true)]
    pub seed: Vec<u64>,
    /// With a single --seed s, runs use seeds s, s+1, ...
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// JSON object mapping paragraph titles to entity types.
    #[arg(long)]
    pub hints: Option<PathBuf>,
    #[arg(long, default_value = "front", value_parser = ["front", "random", "back"])]
    pub insert_at: String,
    /// Only perturb paragraphs holding a supporting fact.
    #[arg(long)]
    pub gold_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AdversarialArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = ["invert", "prune", "both"])]
    pub rule: String,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Check yes/no inversions against the evidence triples.
    #[arg(long)]
    pub verify_triples: bool,
    #[arg(long)]
    pub skip_report: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum PrepCommand {
    GroupRelations(GroupArgs),
    ExportPairs(PairArgs),
}

#[derive(Debug, Args)]
pub struct GroupArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub spans: Option<PathBuf>,
    /// Training set whose relation inventory bounds the labels.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value = "ans,sent,ent")]
    pub tasks: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    Drop(DropArgs),
    Aggregate(AggregateArgs),
}

#[derive(Debug, Args)]
pub struct DropArgs {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub pert: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Fixture file replacing the bundled one.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = ["toy", "position0", "comparison", "bridge"])]
    pub kind: String,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command prints: a human summary and its JSON form.
pub struct Outcome {
    pub text: String,
    pub json: Value,
    /// Nonzero when the command ran but found failures (verify).
    pub status: i32,
}

impl Outcome {
    fn ok(text: impl Into<String>, json: Value) -> Self {
        Self {
            text: text.into(),
            json,
            status: 0,
        }
    }
}

fn error_payload(err: &anyhow::Error) -> Value {
    let causes: Vec<String> = err.chain().skip(1).map(|c| c.to_string()).collect();
    let mut v = json!({ "error": { "message": err.to_string(), "causes": causes } });
    if let Some(CorpusError::Invalid(records)) = err.downcast_ref::<CorpusError>() {
        v["error"]["records"] = records
            .iter()
            .map(|r| json!({ "index": r.index, "id": r.id, "path": r.path, "message": r.message }))
            .collect();
    }
    v
}

/// Parses argv and runs the command, writing to the given streams.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(out) => {
            if !cli.quiet || out.status != 0 {
                if cli.json {
                    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&out.json).unwrap_or_default());
                } else if !out.text.is_empty() {
                    let _ = write!(stdout, "{}", out.text);
                    if !out.text.ends_with('\n') {
                        let _ = writeln!(stdout);
                    }
                }
            }
            out.status
        }
        Err(e) => {
            if cli.json {
                let _ = writeln!(stderr, "{}", serde_json::to_string_pretty(&error_payload(&e)).unwrap_or_default());
            } else {
                let _ = writeln!(stderr, "error: {e:#}");
                if let Some(CorpusError::Invalid(records)) = e.downcast_ref::<CorpusError>() {
                    for r in records {
                        let _ = writeln!(stderr, "  {r}");
                    }
                }
            }
            1
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}
