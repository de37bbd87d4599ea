//! The `trace-gauge` command line.
//!
//! Every subcommand reads JSONL from `--in` (default stdin) and writes to
//! `--out` (default stdout). Records that fail are replaced in the output by
//! `{"line": N, "error": "..."}` and counted on stderr. Exit codes: 0 on
//! success, 1 on input or schema errors, 2 on usage errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::answer::{normalize_answer, score_response, ResponseScore};
use crate::mask::{build_masked_example_with_policy, project_to_tokens, MaskSet, TokenAlignment};
use crate::metrics::{
    BootstrapConfig, EvalConfig, EvalTally, MetricsDoc, TraceStats, DEFAULT_LEVEL,
    DEFAULT_MIN_VALID, DEFAULT_RESAMPLES, DEFAULT_SEED, MIN_RESAMPLES,
};
use crate::parse::{parse_response, ParsedResponse, TraceStatus};
use crate::profile::{builtin_profile, load_profile, FormatProfile, ProfileError, BUILTIN_PROFILE_NAMES};
use crate::render::{render_prompt, render_training_example, Conversation, MissingPolicy, RenderedExample};
use crate::report::{
    detect_collapse, evaluate_run, sample_subset, series_to_csv, series_to_json, CollapseThresholds,
    RunRecord, DEFAULT_RPASS1_TOLERANCE, DEFAULT_VR_DROP,
};

pub const SEED_ENV: &str = "TRACE_GAUGE_SEED";
const CHUNK: usize = 4096;

#[derive(Debug, Parser)]
#[command(name = "trace-gauge", version, about = "Reasoning-trace parsing, metrics and loss masking")]
struct Cli {
    /// Worker threads for per-record subcommands; output order is unaffected.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render conversations into prompts or segmented training targets.
    Render(RenderArgs),
    /// Classify generations into reasoning and answer.
    Parse(ProfileIo),
    /// Parse and score generations against gold answers or external labels.
    Score(ProfileIo),
    /// Aggregate parsed or scored records into metrics JSON.
    Stats(StatsArgs),
    /// Build loss-masked training examples.
    Mask(MaskArgs),
    /// Evaluate a run per task and step, and detect reasoning collapse.
    Report(ReportArgs),
    /// Check predicted answers against gold answers.
    CheckAnswers(Io),
}

#[derive(Debug, Args)]
struct Io {
    /// Input JSONL (default: stdin).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ProfileIo {
    #[command(flatten)]
    io: Io,
    /// Builtin profile name or path to a profile JSON document.
    #[arg(long, default_value = "in-text-think")]
    profile: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RenderMode {
    Prompt,
    Train,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    EmptyThink,
    NoThink,
    ProfileDefault,
}

impl From<PolicyArg> for MissingPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::EmptyThink => MissingPolicy::EmptyThink,
            PolicyArg::NoThink => MissingPolicy::NoThink,
            PolicyArg::ProfileDefault => MissingPolicy::ProfileDefault,
        }
    }
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    common: ProfileIo,
    #[arg(long, value_enum, default_value = "train")]
    mode: RenderMode,
    /// Missing-reasoning representation for training targets.
    #[arg(long, value_enum, default_value = "profile-default")]
    policy: PolicyArg,
    /// Seed the reasoning block of a prompt.
    #[arg(long)]
    think_prefix: Option<String>,
    /// Close the reasoning block and seed the answer of a prompt.
    #[arg(long)]
    response_prefix: Option<String>,
}

#[derive(Debug, Args)]
struct BootstrapArgs {
    /// Bootstrap seed (default: $TRACE_GAUGE_SEED or 42).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
    #[arg(long, default_value_t = DEFAULT_LEVEL)]
    level: f64,
    /// Rpass@1 is reported only above this many valid responses.
    #[arg(long, default_value_t = DEFAULT_MIN_VALID)]
    min_valid: u64,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[command(flatten)]
    io: Io,
    #[command(flatten)]
    bootstrap: BootstrapArgs,
}

#[derive(Debug, Args)]
struct MaskArgs {
    #[command(flatten)]
    common: ProfileIo,
    /// Comma-joined regions to exclude from the loss: prompt, think.
    #[arg(long, default_value = "")]
    mask: String,
    #[arg(long, value_enum, default_value = "empty-think")]
    policy: PolicyArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    common: ProfileIo,
    #[command(flatten)]
    bootstrap: BootstrapArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
    /// Minimum VR drop flagged as a fall.
    #[arg(long, default_value_t = DEFAULT_VR_DROP)]
    delta_vr: f64,
    /// Largest Rpass@1 decline still treated as stable.
    #[arg(long, default_value_t = DEFAULT_RPASS1_TOLERANCE)]
    delta_rp: f64,
    /// Restrict each task to a fixed random subset of this many ids.
    #[arg(long)]
    subset: Option<usize>,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(String),
    Input(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

type CliResult<T> = Result<T, Failure>;

/// Runs the command line and returns the process exit code.
pub fn run_cli<I, T>(
    args: I,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{e}");
                    2
                }
            };
        }
    };
    match dispatch(cli, stdin, stdout, stderr) {
        Ok(0) => 0,
        Ok(failed) => {
            let _ = writeln!(stderr, "trace-gauge: {failed} record(s) failed");
            1
        }
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "trace-gauge: usage error: {msg}");
            2
        }
        Err(Failure::Input(e)) => {
            let _ = writeln!(stderr, "trace-gauge: error: {e:#}");
            1
        }
    }
}

fn dispatch(
    cli: Cli,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    _stderr: &mut dyn Write,
) -> CliResult<usize> {
    let jobs = cli.jobs as usize;
    match cli.command {
        Command::Render(args) => {
            let profile = resolve_profile(&args.common.profile)?;
            let mode = args.mode;
            let policy = MissingPolicy::from(args.policy);
            let (think, resp) = (args.think_prefix, args.response_prefix);
            with_io(&args.common.io, stdin, stdout, |input, output| {
                map_lines(input, output, jobs, |line| {
                    let conv: Conversation = serde_json::from_str(line)?;
                    let rendered = match mode {
                        RenderMode::Prompt => {
                            render_prompt(&conv, &profile, think.as_deref(), resp.as_deref())?
                        }
                        RenderMode::Train => render_training_example(&conv, &profile, policy)?,
                    };
                    Ok(serde_json::to_string(&RenderedRecord::new(&rendered))?)
                })
            })
        }
        Command::Parse(args) => {
            let profile = resolve_profile(&args.profile)?;
            with_io(&args.io, stdin, stdout, |input, output| {
                map_lines(input, output, jobs, |line| {
                    let rec: GenerationRecord = serde_json::from_str(line)?;
                    let parsed = parse_response(&rec.generation, &profile);
                    Ok(serde_json::to_string(&ParsedRecord::new(rec.id, &parsed))?)
                })
            })
        }
        Command::Score(args) => {
            let profile = resolve_profile(&args.profile)?;
            with_io(&args.io, stdin, stdout, |input, output| {
                map_lines(input, output, jobs, |line| {
                    let rec: GenerationRecord = serde_json::from_str(line)?;
                    let parsed = parse_response(&rec.generation, &profile);
                    let score =
                        score_response(&parsed, rec.gold.as_deref(), rec.external_result)?;
                    Ok(serde_json::to_string(&ScoredRecord {
                        parsed: ParsedRecord::new(rec.id, &parsed),
                        answered: score.answered,
                        correct: score.correct,
                        extracted: score.extracted,
                    })?)
                })
            })
        }
        Command::Stats(args) => {
            let config = eval_config(&args.bootstrap)?;
            with_io(&args.io, stdin, stdout, |input, output| run_stats(input, output, &config))
        }
        Command::Mask(args) => {
            let profile = resolve_profile(&args.common.profile)?;
            let mask: MaskSet = args.mask.parse().map_err(Failure::Usage)?;
            let policy = MissingPolicy::from(args.policy);
            with_io(&args.common.io, stdin, stdout, |input, output| {
                map_lines(input, output, jobs, |line| {
                    let rec: MaskInput = serde_json::from_str(line)?;
                    let conv = Conversation {
                        messages: rec.messages,
                    };
                    let ex = build_masked_example_with_policy(&conv, &profile, mask, policy)?;
                    let token_labels = match rec.token_spans {
                        Some(spans) => Some(
                            project_to_tokens(&ex, &TokenAlignment { token_spans: spans })?
                                .into_iter()
                                .map(|l| l.bit())
                                .collect(),
                        ),
                        None => None,
                    };
                    let segments = ex
                        .segments
                        .iter()
                        .zip(ex.char_spans())
                        .map(|(s, (start, end))| SegmentRecord {
                            kind: s.kind.to_string(),
                            start,
                            end,
                            masked: Some(s.masked),
                        })
                        .collect();
                    Ok(serde_json::to_string(&MaskedRecord {
                        text: ex.text,
                        segments,
                        strategy: ex.strategy_name,
                        token_labels,
                    })?)
                })
            })
        }
        Command::Report(args) => {
            let profile = resolve_profile(&args.common.profile)?;
            let config = eval_config(&args.bootstrap)?;
            for (name, v) in [("--delta-vr", args.delta_vr), ("--delta-rp", args.delta_rp)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(Failure::Usage(format!("{name} must be in (0, 1), got {v}")));
                }
            }
            if args.subset == Some(0) {
                return Err(Failure::Usage("--subset must be positive".into()));
            }
            let thresholds = CollapseThresholds {
                vr_drop: args.delta_vr,
                rpass1_tolerance: args.delta_rp,
            };
            let seed = config.bootstrap.seed;
            with_io(&args.common.io, stdin, stdout, |input, output| {
                run_report(input, output, &profile, &config, &thresholds, args.format, args.subset, seed)
            })
        }
        Command::CheckAnswers(io) => with_io(&io, stdin, stdout, |input, output| {
            map_lines(input, output, jobs, |line| {
                let rec: AnswerPair = serde_json::from_str(line)?;
                let pred = normalize_answer(&rec.pred);
                let gold = normalize_answer(&rec.gold);
                Ok(serde_json::to_string(&CheckedPair {
                    equivalent: pred == gold,
                    pred_canonical: pred.to_string(),
                    gold_canonical: gold.to_string(),
                    pred: rec.pred,
                    gold: rec.gold,
                })?)
            })
        }),
    }
}

fn resolve_profile(name_or_path: &str) -> CliResult<FormatProfile> {
    match builtin_profile(name_or_path) {
        Ok(p) => Ok(p),
        Err(ProfileError::UnknownProfile(_)) if Path::new(name_or_path).is_file() => {
            let doc = std::fs::read_to_string(name_or_path)
                .with_context(|| format!("reading profile {name_or_path}"))?;
            Ok(load_profile(&doc).with_context(|| format!("loading profile {name_or_path}"))?)
        }
        Err(_) => Err(Failure::Usage(format!(
            "profile `{name_or_path}` is neither a builtin ({}) nor a readable file",
            BUILTIN_PROFILE_NAMES.join(", ")
        ))),
    }
}

fn default_seed() -> CliResult<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

fn eval_config(args: &BootstrapArgs) -> CliResult<EvalConfig> {
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    if args.resamples < MIN_RESAMPLES {
        return Err(Failure::Usage(format!("--resamples must be at least {MIN_RESAMPLES}")));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Failure::Usage(format!("--level must be in (0, 1), got {}", args.level)));
    }
    Ok(EvalConfig {
        min_valid: args.min_valid,
        bootstrap: BootstrapConfig {
            level: args.level,
            resamples: args.resamples,
            seed,
        },
    })
}

fn with_io<F>(
    io: &Io,
    stdin: &mut dyn BufRead,
    stdout: &mut dyn Write,
    body: F,
) -> CliResult<usize>
where
    F: FnOnce(&mut dyn BufRead, &mut dyn Write) -> CliResult<usize>,
{
    let mut file_in;
    let input: &mut dyn BufRead = match &io.input {
        Some(path) => {
            file_in = BufReader::new(
                File::open(path).with_context(|| format!("opening {}", path.display()))?,
            );
            &mut file_in
        }
        None => stdin,
    };
    match &io.out {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            let n = body(input, &mut w)?;
            w.flush().context("flushing output")?;
            Ok(n)
        }
        None => {
            let n = body(input, stdout)?;
            stdout.flush().context("flushing output")?;
            Ok(n)
        }
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    line: usize,
    error: &'a str,
}

fn write_outcome(
    output: &mut dyn Write,
    line_no: usize,
    outcome: anyhow::Result<String>,
    failed: &mut usize,
) -> anyhow::Result<()> {
    match outcome {
        Ok(json) => writeln!(output, "{json}")?,
        Err(e) => {
            *failed += 1;
            let msg = format!("{e:#}");
            let rec = serde_json::to_string(&ErrorRecord {
                line: line_no,
                error: &msg,
            })?;
            writeln!(output, "{rec}")?;
        }
    }
    Ok(())
}

/// Maps every non-blank input line through `f`, in bounded chunks, keeping
/// input order. Returns the number of failed records.
fn map_lines<F>(input: &mut dyn BufRead, output: &mut dyn Write, jobs: usize, f: F) -> CliResult<usize>
where
    F: Fn(&str) -> anyhow::Result<String> + Sync,
{
    let pool = if jobs > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .context("starting worker pool")?,
        )
    } else {
        None
    };
    let mut failed = 0;
    let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK);
    let mut lines = input.lines().enumerate();
    loop {
        chunk.clear();
        for (i, line) in lines.by_ref() {
            let line = line.context("reading input")?;
            if line.trim().is_empty() {
                continue;
            }
            chunk.push((i + 1, line));
            if chunk.len() == CHUNK {
                break;
            }
        }
        if chunk.is_empty() {
            return Ok(failed);
        }
        let outcomes: Vec<anyhow::Result<String>> = match &pool {
            Some(pool) => pool.install(|| chunk.par_iter().map(|(_, l)| f(l)).collect()),
            None => chunk.iter().map(|(_, l)| f(l)).collect(),
        };
        for ((line_no, _), outcome) in chunk.iter().zip(outcomes) {
            write_outcome(output, *line_no, outcome, &mut failed)?;
        }
    }
}

#[derive(Deserialize)]
struct GenerationRecord {
    #[serde(default)]
    id: Value,
    #[serde(alias = "text")]
    generation: String,
    #[serde(default)]
    gold: Option<String>,
    #[serde(default)]
    external_result: Option<bool>,
}

/// Parsed JSONL record.
#[derive(Debug, Serialize, Deserialize)]
struct ParsedRecord {
    id: Value,
    status: TraceStatus,
    reasoning: Option<String>,
    answer: Option<String>,
    raw_length: usize,
}

impl ParsedRecord {
    fn new(id: Value, p: &ParsedResponse) -> Self {
        Self {
            id,
            status: p.status,
            reasoning: p.reasoning.clone(),
            answer: p.answer.clone(),
            raw_length: p.raw_length,
        }
    }
}

#[derive(Debug, Serialize)]
struct ScoredRecord {
    #[serde(flatten)]
    parsed: ParsedRecord,
    answered: bool,
    correct: bool,
    extracted: Option<String>,
}

#[derive(Serialize)]
struct SegmentRecord {
    kind: String,
    start: usize,
    end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    masked: Option<bool>,
}

#[derive(Serialize)]
struct RenderedRecord {
    text: String,
    segments: Vec<SegmentRecord>,
}

impl RenderedRecord {
    fn new(r: &RenderedExample) -> Self {
        Self {
            text: r.text.clone(),
            segments: r
                .segments
                .iter()
                .zip(r.char_spans())
                .map(|(s, (start, end))| SegmentRecord {
                    kind: s.kind.to_string(),
                    start,
                    end,
                    masked: None,
                })
                .collect(),
        }
    }
}

#[derive(Deserialize)]
struct MaskInput {
    messages: Vec<crate::render::Message>,
    #[serde(default)]
    token_spans: Option<Vec<(usize, usize)>>,
}

#[derive(Serialize)]
struct MaskedRecord {
    text: String,
    segments: Vec<SegmentRecord>,
    strategy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    token_labels: Option<Vec<u8>>,
}

#[derive(Deserialize)]
struct AnswerPair {
    pred: String,
    gold: String,
}

#[derive(Serialize)]
struct CheckedPair {
    pred: String,
    gold: String,
    pred_canonical: String,
    gold_canonical: String,
    equivalent: bool,
}

/// Parsed or scored record as consumed by `stats`.
#[derive(Deserialize)]
struct StatsInput {
    status: TraceStatus,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    answered: Option<bool>,
    #[serde(default)]
    correct: Option<bool>,
}

fn run_stats(input: &mut dyn BufRead, output: &mut dyn Write, config: &EvalConfig) -> CliResult<usize> {
    let mut stats = TraceStats::default();
    let mut tally = EvalTally::default();
    let mut all_scored = true;
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: StatsInput = serde_json::from_str(&line)
            .with_context(|| format!("line {}: not a parsed or scored record", i + 1))?;
        let answered = rec.answered.unwrap_or_else(|| {
            rec.status != TraceStatus::Truncated
                && rec.answer.as_deref().is_some_and(|a| !a.trim().is_empty())
        });
        stats.observe(rec.status, answered);
        match rec.correct {
            Some(correct) => tally.observe(&ResponseScore {
                answered,
                correct,
                extracted: None,
                status: rec.status,
            }),
            None => all_scored = false,
        }
    }
    if stats.n == 0 {
        return Err(Failure::Input(anyhow::anyhow!("no records to aggregate")));
    }
    let doc = if all_scored {
        let result = tally.finish(config).map_err(anyhow::Error::from)?;
        MetricsDoc::from(&result)
    } else {
        MetricsDoc::from(&stats)
    };
    let json = serde_json::to_string_pretty(&doc).context("serializing metrics")?;
    writeln!(output, "{json}").context("writing output")?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn run_report(
    input: &mut dyn BufRead,
    output: &mut dyn Write,
    profile: &FormatProfile,
    config: &EvalConfig,
    thresholds: &CollapseThresholds,
    format: FormatArg,
    subset: Option<usize>,
    seed: u64,
) -> CliResult<usize> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.context("reading input")?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RunRecord = serde_json::from_str(&line)
            .with_context(|| format!("line {}: invalid run record", i + 1))?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Failure::Input(anyhow::anyhow!("no records to report")));
    }
    if let Some(n) = subset {
        records = restrict_to_subset(records, n, seed)?;
    }
    let series = evaluate_run(records, profile, config).map_err(anyhow::Error::from)?;
    let mut findings = Vec::new();
    for s in &series {
        if s.points.len() >= 2 {
            findings.extend(detect_collapse(s, thresholds).map_err(anyhow::Error::from)?);
        }
    }
    let text = match format {
        FormatArg::Json => series_to_json(&series, findings),
        FormatArg::Csv => series_to_csv(&series),
    };
    output.write_all(text.as_bytes()).context("writing output")?;
    Ok(0)
}

/// Keeps, per task, only records whose id falls in a seeded subset of that
/// task's ids (ids ordered by first appearance).
fn restrict_to_subset(records: Vec<RunRecord>, n: usize, seed: u64) -> anyhow::Result<Vec<RunRecord>> {
    use std::collections::{BTreeMap, HashSet};
    let mut ids: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    for r in &records {
        if seen.insert((&r.task, &r.id)) {
            ids.entry(&r.task).or_default().push(&r.id);
        }
    }
    let mut keep: HashSet<(String, String)> = HashSet::new();
    for (task, task_ids) in &ids {
        let picked = sample_subset(task_ids, n, seed)
            .with_context(|| format!("task `{task}`"))?;
        keep.extend(picked.into_iter().map(|id| (task.to_string(), id.to_string())));
    }
    if keep.is_empty() {
        bail!("subset is empty");
    }
    Ok(records
        .into_iter()
        .filter(|r| keep.contains(&(r.task.clone(), r.id.clone())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str], input: &str) -> (u8, String, String) {
        let mut stdin = input.as_bytes();
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["trace-gauge"];
        argv.extend_from_slice(args);
        let code = run_cli(argv, &mut stdin, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        let (code, out, err) = run(&["frobnicate"], "");
        assert_eq!(code, 2);
        assert!(out.is_empty());
        assert!(!err.is_empty());
    }

    #[test]
    fn parse_from_stdin() {
        let (code, out, _) = run(
            &["parse", "--profile", "in-text-think"],
            "{\"id\":\"a\",\"generation\":\"<think>x</think>4\"}\n",
        );
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(out.trim()).unwrap();
        assert_eq!(v["status"], "valid");
        assert_eq!(v["answer"], "4");
        assert_eq!(v["raw_length"], 17);
    }

    #[test]
    fn bad_record_becomes_error_line() {
        let (code, out, err) = run(
            &["parse"],
            "{\"id\":1,\"generation\":\"a\"}\nnot json\n{\"id\":3,\"generation\":\"b\"}\n",
        );
        assert_eq!(code, 1);
        let lines: Vec<Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1]["line"], 2);
        assert!(lines[1]["error"].is_string());
        assert!(err.contains("1 record(s) failed"));
    }

    #[test]
    fn unknown_profile_is_usage_error() {
        let (code, _, _) = run(&["parse", "--profile", "no-such-profile"], "");
        assert_eq!(code, 2);
    }

    #[test]
    fn bad_mask_flag_is_usage_error() {
        let (code, _, _) = run(&["mask", "--mask", "prompt,answers"], "");
        assert_eq!(code, 2);
    }

    #[test]
    fn report_delta_out_of_range() {
        let (code, _, _) = run(&["report", "--delta-vr", "1.5"], "");
        assert_eq!(code, 2);
    }
}
