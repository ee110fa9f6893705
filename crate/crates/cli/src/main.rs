//! `pvtx`: explain why a data-driven system fails on one dataset but not another.

mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvtx_core::engine::{
    decision_tree_explain, discriminative_pvts, explain, rank_candidates, A3Mode, Algorithm, EngineConfig,
    LabeledDataset,
};
use pvtx_core::graph::build_pvt_attribute_graph;
use pvtx_core::oracle::{BuiltinOracle, ExternalOracle, ExternalOracleSpec, Oracle, SEED_ENV};
use pvtx_core::profiles::{discover_profiles, enumerate_selectivity_predicates, DiscoveryConfig};
use pvtx_core::synth::{generate, ScenarioSpec};
use pvtx_core::tabular::{load_csv, load_csv_pair, save_csv, ColumnType, CsvOptions, Dataset};
use pvtx_core::{Error, PvtTriplet};

use report::{DiffRow, Outcome, Report};

pub const EXIT_OK: u8 = 0;
pub const EXIT_NO_EXPLANATION: u8 = 2;
pub const EXIT_ORACLE: u8 = 3;
pub const EXIT_USAGE: u8 = 64;
pub const EXIT_INVALID: u8 = 65;
pub const EXIT_IO: u8 = 66;

#[derive(Parser, Debug)]
#[command(
    name = "pvtx",
    version,
    about = "Explain data-driven system failures with profile interventions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Find a minimal set of profile repairs that makes the failing dataset pass.
    Explain(ExplainArgs),
    /// List the profiles that hold on one dataset.
    Profile(ProfileArgs),
    /// List the triplets that discriminate a passing dataset from a failing one.
    Diff(DiffArgs),
    /// Write a synthetic scenario with planted causes.
    Synth(SynthArgs),
    /// Score a CSV with a built-in oracle config (usable as an external oracle).
    #[command(hide = true)]
    Score(ScoreArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AlgorithmArg {
    Greedy,
    Gt,
    GtRandom,
    Dtree,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Greedy => Algorithm::Greedy,
            AlgorithmArg::Gt => Algorithm::GroupTest,
            AlgorithmArg::GtRandom => Algorithm::GroupTestRandom,
            AlgorithmArg::Dtree => Algorithm::DecisionTree,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum A3Arg {
    Warn,
    Strict,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// JSON object mapping column names to categorical, numerical or text.
    #[arg(long)]
    schema: Option<PathBuf>,
    /// Extra cell value read as missing (repeatable).
    #[arg(long = "missing-token", value_name = "TOKEN")]
    missing_tokens: Vec<String>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long, value_name = "CSV")]
    pass: PathBuf,
    #[arg(long, value_name = "CSV")]
    fail: PathBuf,
    /// Oracle command run as `<cmd> <csv>`, or `builtin:<config.json>`.
    #[arg(long)]
    oracle: String,
    /// Largest malfunction score that still counts as passing.
    #[arg(long)]
    tau: f64,
    #[arg(long, value_enum, default_value = "greedy")]
    algorithm: AlgorithmArg,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_interventions: usize,
    /// Seconds before an external oracle call is abandoned.
    #[arg(long, default_value_t = 60.0)]
    oracle_timeout: f64,
    /// Behaviour when group testing loses its monotonicity assumption.
    #[arg(long, value_enum, default_value = "warn")]
    a3: A3Arg,
    /// More passing datasets for the decision tree (repeatable).
    #[arg(long, value_name = "CSV")]
    also_pass: Vec<PathBuf>,
    /// More failing datasets for the decision tree (repeatable).
    #[arg(long, value_name = "CSV")]
    also_fail: Vec<PathBuf>,
    #[arg(long, value_name = "CSV")]
    out_repaired: Option<PathBuf>,
    /// Where to write the JSON report; stdout when absent.
    #[arg(long, value_name = "JSON")]
    report: Option<PathBuf>,
    /// Print a table instead of JSON on stdout.
    #[arg(long)]
    human: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[arg(long, value_name = "CSV")]
    data: PathBuf,
    /// Write the profile/attribute graph as DOT.
    #[arg(long, value_name = "DOT")]
    graph: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    report: Option<PathBuf>,
    #[arg(long)]
    human: bool,
    #[command(flatten)]
    data_opts: DataArgs,
}

#[derive(Args, Debug)]
struct DiffArgs {
    #[arg(long, value_name = "CSV")]
    pass: PathBuf,
    #[arg(long, value_name = "CSV")]
    fail: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Write the triplet/attribute graph as DOT.
    #[arg(long, value_name = "DOT")]
    graph: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    report: Option<PathBuf>,
    #[arg(long)]
    human: bool,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_name = "JSON")]
    spec: PathBuf,
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long, value_name = "JSON")]
    config: PathBuf,
    csv: PathBuf,
    #[command(flatten)]
    data: DataArgs,
}

/// Exit status for a library error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoExplanation { .. } => EXIT_NO_EXPLANATION,
        e if e.is_oracle_error() => EXIT_ORACLE,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

fn csv_options(args: &DataArgs) -> Result<CsvOptions, Error> {
    let mut opts = CsvOptions::default();
    opts.missing_tokens.extend(args.missing_tokens.iter().cloned());
    if let Some(path) = &args.schema {
        let types: BTreeMap<String, ColumnType> = serde_json::from_str(&fs::read_to_string(path)?)?;
        opts.column_types = types;
    }
    Ok(opts)
}

fn build_oracle(spec: &str, timeout: f64, seed: u64) -> Result<Oracle, Error> {
    if let Some(path) = spec.strip_prefix("builtin:") {
        let cfg = BuiltinOracle::from_json(&fs::read_to_string(path)?)?;
        return Ok(Oracle::new(cfg));
    }
    let mut s = ExternalOracleSpec::parse(spec, timeout)?;
    s.seed = seed;
    Ok(Oracle::new(ExternalOracle::new(s)))
}

fn write_or_print(report: &Report, path: Option<&Path>, human: bool) -> Result<(), Error> {
    let json = report.to_json();
    if let Some(path) = path {
        fs::write(path, &json)?;
    }
    if human {
        print!("{}", report.render_human());
    } else if path.is_none() {
        print!("{json}");
    }
    Ok(())
}

fn finish(mut report: Report, started: Instant, path: Option<&Path>, human: bool) -> ExitCode {
    report.set_elapsed(started.elapsed());
    let code = report.status.exit_code;
    if let Err(e) = write_or_print(&report, path, human) {
        eprintln!("pvtx: cannot write report: {e}");
        return ExitCode::from(EXIT_IO);
    }
    if let Some(msg) = &report.status.message {
        if code != EXIT_OK {
            eprintln!("pvtx: {msg}");
        }
    }
    ExitCode::from(code)
}

fn cmd_explain(args: &ExplainArgs, argv: Vec<String>) -> ExitCode {
    let started = Instant::now();
    let cfg = EngineConfig {
        tau: args.tau,
        seed: args.seed,
        max_interventions: args.max_interventions,
        algorithm: args.algorithm.into(),
        a3: match args.a3 {
            A3Arg::Warn => A3Mode::Warn,
            A3Arg::Strict => A3Mode::Strict,
        },
        ..EngineConfig::default()
    };
    let mut report = Report::new("explain", argv);
    report.config = Some(serde_json::json!({
        "engine": &cfg,
        "oracle": &args.oracle,
        "oracle_timeout_secs": args.oracle_timeout,
    }));
    let result = run_explain(args, &cfg);
    match result {
        Ok((e, repaired_written)) => {
            report.status = Outcome::ok("explanation found");
            report.repaired_csv = repaired_written;
            report.explanation = Some(e);
        }
        Err(e) => {
            if let Error::NoExplanation { log, .. } = &e {
                report.log = Some((**log).clone());
            }
            report.status = Outcome::error(exit_code(&e), &e);
        }
    }
    finish(report, started, args.report.as_deref(), args.human)
}

fn run_explain(args: &ExplainArgs, cfg: &EngineConfig) -> Result<(pvtx_core::Explanation, Option<String>), Error> {
    cfg.validate()?;
    let opts = csv_options(&args.data)?;
    let (pass, fail) = load_csv_pair(&args.pass, &args.fail, &opts)?;
    let mut oracle = build_oracle(&args.oracle, args.oracle_timeout, args.seed)?;
    let e = if cfg.algorithm == Algorithm::DecisionTree && !(args.also_pass.is_empty() && args.also_fail.is_empty()) {
        let fixed = CsvOptions {
            column_types: pass.schema().into_iter().collect(),
            ..opts.clone()
        };
        let mut labeled = vec![LabeledDataset::pass(pass.clone())];
        for p in &args.also_pass {
            labeled.push(LabeledDataset::pass(load_csv(p, &fixed)?));
        }
        for p in &args.also_fail {
            labeled.push(LabeledDataset::fail(load_csv(p, &fixed)?));
        }
        labeled.push(LabeledDataset::fail(fail.clone()));
        decision_tree_explain(&labeled, &fail, &mut oracle, cfg)?
    } else {
        explain(&pass, &fail, &mut oracle, cfg)?
    };
    let written = match &args.out_repaired {
        Some(path) => {
            save_csv(&e.repaired, path)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    Ok((e, written))
}

fn cmd_profile(args: &ProfileArgs, argv: Vec<String>) -> ExitCode {
    let started = Instant::now();
    let mut report = Report::new("profile", argv);
    match run_profile(args) {
        Ok(profiles) => {
            report.status = Outcome::ok(format!("{} profiles", profiles.len()));
            report.profiles = Some(profiles);
        }
        Err(e) => report.status = Outcome::error(exit_code(&e), &e),
    }
    finish(report, started, args.report.as_deref(), args.human)
}

fn run_profile(args: &ProfileArgs) -> Result<Vec<serde_json::Value>, Error> {
    let opts = csv_options(&args.data_opts)?;
    let d = load_csv(&args.data, &opts)?;
    let cfg = EngineConfig::default();
    let dc = DiscoveryConfig {
        outlier_k: cfg.outlier_k,
        selectivity_predicates: enumerate_selectivity_predicates(&d, &d, &cfg.selectivity),
    };
    let profiles = discover_profiles(&d, &dc);
    if let Some(path) = &args.graph {
        let xs: Vec<PvtTriplet> = profiles.iter().flat_map(PvtTriplet::for_profile).collect();
        fs::write(path, build_pvt_attribute_graph(&xs, &d)?.to_dot())?;
    }
    profiles
        .iter()
        .map(|p| serde_json::from_str(&p.canonical_json()).map_err(Error::from))
        .collect()
}

fn cmd_diff(args: &DiffArgs, argv: Vec<String>) -> ExitCode {
    let started = Instant::now();
    let mut report = Report::new("diff", argv);
    match run_diff(args) {
        Ok((rows, degrees)) => {
            report.status = Outcome::ok(format!("{} discriminative triplets", rows.len()));
            report.discriminative = Some(rows);
            report.degrees = Some(degrees);
        }
        Err(e) => report.status = Outcome::error(exit_code(&e), &e),
    }
    finish(report, started, args.report.as_deref(), args.human)
}

fn run_diff(args: &DiffArgs) -> Result<(Vec<DiffRow>, BTreeMap<String, usize>), Error> {
    let opts = csv_options(&args.data)?;
    let (pass, fail) = load_csv_pair(&args.pass, &args.fail, &opts)?;
    let cfg = EngineConfig {
        seed: args.seed,
        ..EngineConfig::default()
    };
    let xs = discriminative_pvts(&pass, &fail, &cfg)?;
    let g = build_pvt_attribute_graph(&xs, &fail)?;
    if let Some(path) = &args.graph {
        fs::write(path, g.to_dot())?;
    }
    let rows = rank_candidates(&xs, &fail, &cfg)
        .into_iter()
        .map(DiffRow::from)
        .collect();
    Ok((rows, g.degrees()))
}

fn cmd_synth(args: &SynthArgs) -> ExitCode {
    match run_synth(args) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("pvtx: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run_synth(args: &SynthArgs) -> Result<Vec<String>, Error> {
    let spec = ScenarioSpec::from_json(&fs::read_to_string(&args.spec)?)?;
    let s = generate(&spec)?;
    fs::create_dir_all(&args.out_dir)?;
    let dir = &args.out_dir;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: String| -> Result<(), Error> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        written.push(path.display().to_string());
        Ok(())
    };
    put("pass.csv", pvtx_core::tabular::to_csv_string(&s.pass)?)?;
    put("fail.csv", pvtx_core::tabular::to_csv_string(&s.fail)?)?;
    put("oracle.json", pretty(&s.oracle)?)?;
    put("ground-truth.json", pretty(&s.truth)?)?;
    let schema: BTreeMap<String, ColumnType> = s.pass.schema().into_iter().collect();
    put("schema.json", pretty(&schema)?)?;
    // datasets beyond the main pair, for the decision tree
    let extra: Vec<&Dataset> = s
        .labeled
        .iter()
        .filter(|l| !l.passing && l.dataset.fingerprint() != s.fail.fingerprint())
        .map(|l| &l.dataset)
        .collect();
    for (i, d) in extra.iter().enumerate() {
        put(
            &format!("fail-extra-{}.csv", i + 1),
            pvtx_core::tabular::to_csv_string(d)?,
        )?;
    }
    Ok(written)
}

fn pretty<T: serde::Serialize>(v: &T) -> Result<String, Error> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn cmd_score(args: &ScoreArgs) -> ExitCode {
    let run = || -> Result<f64, Error> {
        let opts = csv_options(&args.data)?;
        let oracle = BuiltinOracle::from_json(&fs::read_to_string(&args.config)?)?;
        oracle.evaluate(&load_csv(&args.csv, &opts)?)
    };
    match run() {
        Ok(v) => {
            println!("{v}");
            ExitCode::from(EXIT_OK)
        }
        Err(e) => {
            eprintln!("pvtx: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    let echo: Vec<String> = argv.into_iter().skip(1).collect();
    match &cli.command {
        Command::Explain(a) => cmd_explain(a, echo),
        Command::Profile(a) => cmd_profile(a, echo),
        Command::Diff(a) => cmd_diff(a, echo),
        Command::Synth(a) => cmd_synth(a),
        Command::Score(a) => cmd_score(a),
    }
}
