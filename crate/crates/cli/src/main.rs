use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;
use wslrr::datagen::{dataset_from_json, dataset_to_json, sample_weak_dataset, SampleSizes};
use wslrr::risk::{classification_risk, Mutation};
use wslrr::scenarios::observed_distribution;
use wslrr::train::{train_erm, TrainConfig};
use wslrr::verify::{scenario_checks, verify_all, Report, VerifyConfig};
use wslrr::{Error, FiniteJoint, LossSpec, ScenarioSpec};

#[derive(Parser)]
#[command(name = "wslrr", version, about = "Risk rewrites for weakly supervised classification on finite distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every single-scenario check on one joint.
    Verify(VerifyArgs),
    /// Run the full seeded harness.
    VerifyAll(VerifyAllArgs),
    /// Sample a weak dataset from a joint.
    Simulate(SimulateArgs),
    /// Corrected-loss ERM on a weak dataset.
    Train(TrainArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario name, or a path to a scenario JSON file.
    #[arg(long)]
    scenario: String,
    /// Scenario parameters as JSON.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    joint: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Replaces every check's tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyAllArgs {
    #[arg(long = "K", default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 6)]
    nx: usize,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Comma-separated scenario names; all by default.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    /// Negate the first channel's corrected loss in risk-equality checks.
    #[arg(long)]
    mutate: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    joint: PathBuf,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Samples per channel, either one number or `label=n,...`.
    #[arg(long)]
    n: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    joint: PathBuf,
    #[arg(long, default_value = "logistic")]
    loss: String,
    #[arg(long)]
    lr: f64,
    #[arg(long)]
    epochs: usize,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Initialization seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Loss-trace CSV; defaults to the model path with a `.trace.csv` suffix.
    #[arg(long)]
    trace: Option<PathBuf>,
}

/// Failure that maps to an exit code.
enum Fail {
    Usage(String),
    Check(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::Diverged { .. } => Fail::Check(e.to_string()),
            other => Fail::Usage(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| Fail::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Fail> {
    fs::write(path, text).map_err(|e| Fail::Usage(format!("cannot write {}: {e}", path.display())))
}

fn load_joint(path: &Path) -> Result<FiniteJoint, Fail> {
    Ok(FiniteJoint::from_json(&read(path)?)?)
}

fn load_scenario(args: &ScenarioArgs) -> Result<ScenarioSpec, Fail> {
    let path = Path::new(&args.scenario);
    if path.is_file() {
        if args.params.is_some() {
            return Err(Fail::Usage("--params cannot be combined with a scenario file".into()));
        }
        return Ok(ScenarioSpec::from_json(&read(path)?)?);
    }
    let params: Value = match &args.params {
        Some(text) => serde_json::from_str(text).map_err(|e| Fail::Usage(format!("--params is not JSON: {e}")))?,
        None => Value::Object(Default::default()),
    };
    Ok(ScenarioSpec::from_name(&args.scenario, params)?)
}

fn summarize(report: &Report) {
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for c in &report.checks {
        let e = counts.entry(&c.name).or_default();
        e.0 += c.pass as usize;
        e.1 += 1;
    }
    for (name, (ok, total)) in counts {
        println!("{name:<30} {ok}/{total}");
    }
    for c in report.failures() {
        let detail = c.error.clone().unwrap_or_else(|| format!("err {:e} > tol {:e}", c.max_abs_err.unwrap_or(f64::NAN), c.tol));
        println!("FAIL {} [{}] seed {}: {detail}", c.name, c.scenario, c.seed);
    }
    println!("{} checks, {}", report.checks.len(), if report.pass { "all passed" } else { "FAILED" });
}

fn finish_report(report: &Report, out: Option<&Path>) -> Result<(), Fail> {
    summarize(report);
    if let Some(path) = out {
        write(path, &report.to_json())?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(Fail::Check("some checks failed".into()))
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Fail> {
    let j = load_joint(&args.joint)?;
    let spec = load_scenario(&args.scenario)?;
    observed_distribution(&spec, &j)?;
    if let Some(t) = args.tol {
        if !(t >= 0.0) {
            return Err(Fail::Usage(format!("--tol must be non-negative, got {t}")));
        }
    }
    let mut checks = scenario_checks(&spec, &j, args.seed, Mutation::None);
    if let Some(t) = args.tol {
        for c in &mut checks {
            c.tol = t;
            c.pass = c.max_abs_err.is_some_and(|e| e <= t);
        }
    }
    finish_report(&Report::new(args.seed, checks), args.out.as_deref())
}

fn cmd_verify_all(args: VerifyAllArgs) -> Result<(), Fail> {
    let defaults = VerifyConfig::default();
    let cfg = VerifyConfig {
        k: args.k,
        nx: args.nx,
        trials: args.trials,
        seed: args.seed,
        scenarios: args.scenarios.unwrap_or(defaults.scenarios.clone()),
        mutation: if args.mutate { Mutation::FlipFirstChannel } else { Mutation::None },
        ..defaults
    };
    cfg.validate()?;
    finish_report(&verify_all(&cfg), args.out.as_deref())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Fail> {
    let j = load_joint(&args.joint)?;
    let spec = load_scenario(&args.scenario)?;
    let n: SampleSizes = args.n.parse()?;
    let ds = sample_weak_dataset(&spec, &j, &n, args.seed)?;
    write(&args.out, &dataset_to_json(&ds))?;
    let sizes: Vec<String> = ds.channels.iter().filter(|c| !c.items.is_empty()).map(|c| format!("{}={}", c.label, c.items.len())).collect();
    println!("{spec}: {} samples ({}) -> {}", ds.len(), sizes.join(", "), args.out.display());
    Ok(())
}

fn trace_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    model.with_file_name(format!("{stem}.trace.csv"))
}

fn cmd_train(args: TrainArgs) -> Result<(), Fail> {
    let ls: LossSpec = args.loss.parse()?;
    let j = load_joint(&args.joint)?;
    let ds = dataset_from_json(&read(&args.data)?)?;
    let cfg = TrainConfig { lr: args.lr, epochs: args.epochs, seed: args.seed, l2: args.l2 };
    let out = train_erm(&ds, &j, ls, &cfg)?;
    write(&args.out, &out.model.to_json())?;
    let trace = args.trace.unwrap_or_else(|| trace_path(&args.out));
    let mut w = csv::Writer::from_path(&trace).map_err(|e| Fail::Usage(format!("cannot write {}: {e}", trace.display())))?;
    let csv_err = |e: csv::Error| Fail::Usage(format!("cannot write {}: {e}", trace.display()));
    w.write_record(["epoch", "risk"]).map_err(csv_err)?;
    for (epoch, risk) in out.trace.iter().enumerate() {
        w.write_record([(epoch + 1).to_string(), risk.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Fail::Usage(e.to_string()))?;
    let exact = classification_risk(&j, &out.model, ls)?;
    let err01 = classification_risk(&j, &out.model, LossSpec::ZeroOne)?;
    println!("final empirical risk {:.6}", out.trace.last().copied().unwrap_or(f64::NAN));
    println!("exact {} risk {exact:.6}", ls.as_str());
    println!("exact zero-one risk {err01:.6}");
    println!("model -> {}, trace -> {}", args.out.display(), trace.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => cmd_verify(a),
        Command::VerifyAll(a) => cmd_verify_all(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Train(a) => cmd_train(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Fail::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
