//! `gatling` — goal recognition experiments on gridworlds.
//!
//! Verbs mirror the solver phases: `train` builds per-goal Q-tables,
//! `adapt` synthesizes tables for new goals from a trained library,
//! `infer` recognizes a trace against a library, `gen-traces` produces
//! observation fixtures, and `run` / `compare` drive whole scenario files.
//!
//! Failures print `error[<class>]: <message>` on stderr and exit nonzero;
//! `<class>` is a stable kebab-case token. `GATLING_WORKERS` caps the
//! per-goal training/adaptation fan-out; no other environment is read.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use gatling_core::error::Error as CoreError;
use gatling_core::grid::{Goal, GridSpec, GridState};
use gatling_core::qlearn::{train, TrainConfig};
use gatling_core::recognize::{infer, PolicyRule, RecognizerConfig};
use gatling_core::report::{self, ReportFormat};
use gatling_core::scenario::{compare, run_scenario, Scenario};
use gatling_core::seeding;
use gatling_core::trace::{generate_trace, subsample, ObservationTrace, SampleMode};
use gatling_core::transfer::{adapt_goals, Aggregation, GoalLibrary, TransferOptions, WeightScheme};
use gatling_core::{qlearn, scenario};

#[derive(Parser)]
#[command(name = "gatling", version, about = "Goal recognition on gridworlds via Q-function transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one Q-table per base goal and write the library.
    Train(TrainArgs),
    /// Synthesize Q-tables for new goals from a trained library.
    Adapt(AdaptArgs),
    /// Recognize the goal of a trace file against a library.
    Infer(InferArgs),
    /// Run a scenario file end to end.
    Run(RunArgs),
    /// Run a scenario under both recognizers and report timings side by side.
    Compare(RunArgs),
    /// Generate observation traces toward a goal.
    GenTraces(GenTracesArgs),
}

#[derive(Args)]
struct DomainArg {
    /// Domain: `empty:N`, `crossing:N[:SEED]`, or a grid JSON path.
    #[arg(long)]
    domain: String,
}

impl DomainArg {
    fn build(&self) -> anyhow::Result<Arc<GridSpec>> {
        let parts: Vec<&str> = self.domain.split(':').collect();
        match parts.as_slice() {
            ["empty", n] => Ok(GridSpec::make_empty(n.parse()?)?),
            ["crossing", n] => Ok(GridSpec::make_simple_crossing(n.parse()?, 0)?),
            ["crossing", n, seed] => Ok(GridSpec::make_simple_crossing(n.parse()?, seed.parse()?)?),
            [path] => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CoreError::Io(std::io::Error::new(e.kind(), format!("{path}: {e}"))))?;
                Ok(GridSpec::from_json(&text)?)
            }
            _ => anyhow::bail!(CoreError::InvalidInput(format!(
                "unrecognized domain '{}'",
                self.domain
            ))),
        }
    }
}

/// Read a file with the path folded into the error, so failures carry a
/// stable `io-error` class.
fn read_file(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CoreError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))).into()
    })
}

fn parse_cell(text: &str) -> anyhow::Result<GridState> {
    let (x, y) = text
        .split_once(',')
        .ok_or_else(|| CoreError::InvalidInput(format!("expected X,Y coordinates, got '{text}'")))?;
    Ok(GridState::new(x.trim().parse()?, y.trim().parse()?))
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    domain: DomainArg,
    /// Base goal as `X,Y`; repeat per goal. Defaults to the playable corners.
    #[arg(long = "goal")]
    goals: Vec<String>,
    /// Q-learning episodes per goal.
    #[arg(long, default_value_t = TrainConfig::default().episodes)]
    episodes: u64,
    #[arg(long, default_value_t = TrainConfig::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = TrainConfig::default().gamma)]
    gamma: f64,
    #[arg(long, default_value_t = TrainConfig::default().explore_epsilon)]
    explore_epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Library JSON output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdaptArgs {
    #[command(flatten)]
    domain: DomainArg,
    /// Trained base library JSON.
    #[arg(long)]
    library: PathBuf,
    /// Dynamic goal as `X,Y`; repeat per goal.
    #[arg(long = "goal", required = true)]
    goals: Vec<String>,
    #[arg(long, default_value = "dynamic")]
    weights: String,
    #[arg(long, default_value = "softmax")]
    aggregation: String,
    /// Apply the per-state sharpening factor.
    #[arg(long)]
    scaling: bool,
    #[arg(long, default_value_t = 0.5)]
    temperature: f64,
    /// Adapted library JSON output path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    domain: DomainArg,
    /// Candidate library JSON.
    #[arg(long)]
    library: PathBuf,
    /// Trace file (JSON document, or JSONL with one observation per line).
    #[arg(long)]
    trace: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    smoothing: f64,
    /// Policy rule for scoring: `softmax` or `ratio`.
    #[arg(long, default_value = "softmax")]
    policy: String,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output format: csv, markdown or json.
    #[arg(long, default_value = "markdown")]
    format: String,
    /// Write reports here instead of stdout.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenTracesArgs {
    #[command(flatten)]
    domain: DomainArg,
    /// True goal the actor walks toward.
    #[arg(long)]
    goal: String,
    /// Start cell `X,Y`; sampled per trace when omitted.
    #[arg(long)]
    start: Option<String>,
    /// Traces per observability level.
    #[arg(long, default_value_t = 1)]
    count: u32,
    /// Comma-separated observability fractions, e.g. `0.1,0.3,0.5,1.0`.
    #[arg(long, default_value = "1.0")]
    observability: String,
    /// Subsampling mode: `random` or `prefix`.
    #[arg(long, default_value = "random")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().gamma)]
    gamma: f64,
    /// Directory the trace JSON files are written into.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_weights(s: &str) -> anyhow::Result<WeightScheme> {
    match s {
        "static" => Ok(WeightScheme::Static),
        "dynamic" => Ok(WeightScheme::Dynamic),
        other => anyhow::bail!(CoreError::InvalidInput(format!(
            "unknown weight scheme '{other}' (expected static or dynamic)"
        ))),
    }
}

fn parse_aggregation(s: &str) -> anyhow::Result<Aggregation> {
    match s {
        "normalize" => Ok(Aggregation::Normalize),
        "softmax" => Ok(Aggregation::SoftmaxWeights),
        "max" => Ok(Aggregation::Max),
        other => anyhow::bail!(CoreError::InvalidInput(format!(
            "unknown aggregation '{other}' (expected normalize, softmax or max)"
        ))),
    }
}

fn parse_mode(s: &str) -> anyhow::Result<SampleMode> {
    match s {
        "random" => Ok(SampleMode::Random),
        "prefix" => Ok(SampleMode::Prefix),
        other => anyhow::bail!(CoreError::InvalidInput(format!(
            "unknown sampling mode '{other}' (expected random or prefix)"
        ))),
    }
}

fn write_or_print(path: Option<&Path>, name: &str, content: &str) -> anyhow::Result<()> {
    match path {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let file = dir.join(name);
            std::fs::write(&file, content)?;
            eprintln!("wrote {}", file.display());
        }
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let spec = args.domain.build()?;
    let goals: Vec<Goal> = if args.goals.is_empty() {
        scenario::default_base_goals(&spec)
    } else {
        args.goals
            .iter()
            .map(|g| parse_cell(g).map(Goal))
            .collect::<anyhow::Result<_>>()?
    };
    let base_cfg = TrainConfig {
        alpha: args.alpha,
        gamma: args.gamma,
        episodes: args.episodes,
        explore_epsilon: args.explore_epsilon,
        ..TrainConfig::default()
    };
    let mut tables = Vec::with_capacity(goals.len());
    for (i, g) in goals.iter().enumerate() {
        let cfg = TrainConfig {
            seed: seeding::mix_all(args.seed, &[i as u64]),
            ..base_cfg.clone()
        };
        eprintln!("training goal {g} ({} episodes)", cfg.episodes);
        tables.push(train(&spec, *g, &cfg)?);
    }
    let library = GoalLibrary::new(spec, tables)?;
    std::fs::write(&args.out, library.to_json())?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_adapt(args: AdaptArgs) -> anyhow::Result<()> {
    let spec = args.domain.build()?;
    let text = read_file(&args.library)?;
    let base = GoalLibrary::from_json(&text, &spec)?;
    let goals: Vec<Goal> = args
        .goals
        .iter()
        .map(|g| parse_cell(g).map(Goal))
        .collect::<anyhow::Result<_>>()?;
    let opts = TransferOptions {
        weight_scheme: parse_weights(&args.weights)?,
        aggregation: parse_aggregation(&args.aggregation)?,
        scaling_enabled: args.scaling,
        scaling_temperature: args.temperature,
    };
    let adaptation = adapt_goals(&base, &goals, &opts)?;
    std::fs::write(&args.out, adaptation.library.to_json())?;
    eprintln!(
        "adapted {} goal(s) in {} us (fallback states: {}, clamped entries: {})",
        goals.len(),
        adaptation.elapsed.as_micros(),
        adaptation.diagnostics.normalize_fallback_states,
        adaptation.diagnostics.clamped_entries,
    );
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_infer(args: InferArgs) -> anyhow::Result<()> {
    let spec = args.domain.build()?;
    let text = read_file(&args.library)?;
    let library = GoalLibrary::from_json(&text, &spec)?;
    let trace_text = read_file(&args.trace)?;
    let trace = if args.trace.extension().is_some_and(|e| e == "jsonl") {
        ObservationTrace::from_jsonl(&trace_text, spec.name(), 1.0)?
    } else {
        ObservationTrace::from_json(&trace_text)?
    };
    let cfg = RecognizerConfig {
        smoothing: args.smoothing,
        policy: match args.policy.as_str() {
            "softmax" => PolicyRule::Softmax { beta: args.beta },
            "ratio" => PolicyRule::Ratio,
            other => anyhow::bail!(CoreError::InvalidInput(format!(
                "unknown policy rule '{other}' (expected softmax or ratio)"
            ))),
        },
    };
    let result = infer(&library, &trace, &cfg)?;
    println!("{}", result.to_json());
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let mut scenario = Scenario::from_toml_path(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let format = ReportFormat::from_str(&args.format)?;
    let outcome = run_scenario(&scenario)?;
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
        ReportFormat::Json => "json",
    };
    let body = match format {
        ReportFormat::Json => report::scenario_json(&outcome),
        _ => report::emit_cells(&outcome.cells, format),
    };
    write_or_print(
        args.out_dir.as_deref(),
        &format!("{}-{}.{ext}", outcome.name, outcome.recognizer),
        &body,
    )?;
    if let (Some(r), Some(dir)) = (&outcome.report, args.out_dir.as_deref()) {
        write_or_print(
            Some(dir),
            &format!("{}-{}-pooled.{ext}", outcome.name, outcome.recognizer),
            &report::eval_report(r, format),
        )?;
    }
    Ok(())
}

fn cmd_compare(args: RunArgs) -> anyhow::Result<()> {
    let mut scenario = Scenario::from_toml_path(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let format = ReportFormat::from_str(&args.format)?;
    let cmp = compare(&scenario)?;
    let ext = match format {
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
        ReportFormat::Json => "json",
    };
    write_or_print(
        args.out_dir.as_deref(),
        &format!("{}-compare.{ext}", scenario.name),
        &report::comparison(&cmp, format),
    )?;
    Ok(())
}

fn cmd_gen_traces(args: GenTracesArgs) -> anyhow::Result<()> {
    let spec = args.domain.build()?;
    let goal = Goal(parse_cell(&args.goal)?);
    spec.check_goal(goal)?;
    let mode = parse_mode(&args.mode)?;
    let levels: Vec<f64> = args
        .observability
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()?;
    let actor = qlearn::value_iteration(&spec, goal, args.gamma, 1e-9)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut written = 0u32;
    for (li, level) in levels.iter().enumerate() {
        for k in 0..args.count {
            let salt = (li as u64) << 32 | k as u64;
            let start = match &args.start {
                Some(s) => parse_cell(s)?,
                None => scenario::sample_start(&spec, goal, seeding::mix_all(args.seed, &[10, salt])),
            };
            let full = generate_trace(
                &spec,
                &actor,
                start,
                goal,
                seeding::mix_all(args.seed, &[11, salt]),
            )?;
            let trace = if *level < 1.0 {
                subsample(&full, *level, mode, seeding::mix_all(args.seed, &[12, salt]))?
            } else {
                full
            };
            let name = format!(
                "trace-{}-{}-obs{}-{}.json",
                goal.state().x,
                goal.state().y,
                level,
                k
            );
            std::fs::write(args.out_dir.join(&name), trace.to_json())?;
            written += 1;
        }
    }
    eprintln!("wrote {written} trace(s) to {}", args.out_dir.display());
    Ok(())
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train(a) => cmd_train(a),
        Command::Adapt(a) => cmd_adapt(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenTraces(a) => cmd_gen_traces(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let class = err
                .downcast_ref::<CoreError>()
                .map(CoreError::class)
                .or_else(|| err.downcast_ref::<std::io::Error>().map(|_| "io-error"))
                .unwrap_or("internal");
            eprintln!("error[{class}]: {err}");
            ExitCode::FAILURE
        }
    }
}
