use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use valuevac_core::gateway::{self, load_config, GatewayConfig};
use valuevac_core::harness::{
    replay, run_scenario, run_trials, ConsistencyReport, RunOptions, RunUntil, Scenario, DEFAULT_ACCELERATION,
};
use valuevac_core::pipeline::backend::{BackendDescriptor, BackendKind, StubScript, StubServer};
use valuevac_core::pipeline::Pipeline;
use valuevac_core::world::FloorPlan;

#[derive(Parser)]
#[command(name = "valuevac", version, about = "Simulated value-aware vacuum robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-loop run of one scenario; prints each decision
    Run(RunArgs),
    /// Start the operator HTTP/WebSocket service
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat a scenario to its first decision and report consistency
    Eval(EvalArgs),
    /// Rebuild and check the mode timeline of a JSONL log
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Mock,
    Stub,
    Remote,
}

#[derive(Args)]
struct BackendArgs {
    /// Config file supplying backend, cadence, speeds and prompt settings
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Chat-completions URL; a stub without one runs a local stub server
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Env var holding the bearer credential
    #[arg(long)]
    credential_env: Option<String>,
    /// Sim seconds per real second; 0 runs unpaced (mock only)
    #[arg(long)]
    acceleration: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    /// Bundled scenario name or scenario file
    #[arg(long)]
    scenario: Option<String>,
    /// Floorplan file for a run without a scenario
    #[arg(long)]
    floorplan: Option<PathBuf>,
    /// Keep running for this many sim seconds instead of stopping at the
    /// first decision
    #[arg(long)]
    seconds: Option<f64>,
    /// Write the run log here as JSONL
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[command(flatten)]
    backend: BackendArgs,
}

/// A failed run: message plus exit code.
struct Failure(u8, String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(1, e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Serve { config } => cmd_serve(&config),
        Command::Eval(args) => cmd_eval(args),
        Command::Replay { log } => cmd_replay(&log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

/// Pipeline and run options from the config file and flags. The returned
/// stub server, if any, must outlive the run.
fn setup(args: &BackendArgs) -> Result<(Pipeline, RunOptions, Option<StubServer>), Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let loaded = load_config(path)?;
            for w in &loaded.warnings {
                log::warn!("{w}");
            }
            loaded.config
        }
        None => GatewayConfig::default(),
    };
    let mut stub = None;
    if let Some(choice) = args.backend {
        let kind = match choice {
            BackendChoice::Mock => BackendKind::Mock,
            BackendChoice::Stub => BackendKind::Stub,
            BackendChoice::Remote => BackendKind::Remote,
        };
        if kind != config.backend.kind {
            config.backend = BackendDescriptor {
                kind,
                ..BackendDescriptor::default()
            };
        }
    }
    if let Some(e) = &args.endpoint {
        config.backend.endpoint = Some(e.clone());
    }
    if let Some(m) = &args.model {
        config.backend.model = m.clone();
    }
    if let Some(c) = &args.credential_env {
        config.backend.credential_env = Some(c.clone());
    }
    if config.backend.kind == BackendKind::Stub && config.backend.endpoint.is_none() {
        let server = StubServer::start(StubScript::default())?;
        config.backend.endpoint = Some(server.endpoint());
        stub = Some(server);
    }
    let pipeline = config.pipeline().map_err(|e| usage(format!("backend: {e}")))?;
    let acceleration = match args.acceleration {
        Some(a) => a,
        None if pipeline.deterministic() => 0.0,
        None if args.config.is_some() => config.clock_acceleration,
        None => DEFAULT_ACCELERATION,
    };
    let options = RunOptions {
        acceleration,
        cadence: config.cadence,
        speeds: config.speeds,
        ..RunOptions::default()
    };
    Ok((pipeline, options, stub))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let scenario = match (&args.scenario, &args.floorplan) {
        (Some(s), _) => Scenario::resolve(s)?,
        (None, Some(f)) => {
            let plan = FloorPlan::load(f)?;
            Scenario::empty("interactive", plan, "09:00".parse().expect("literal clock"), 0)
        }
        (None, None) => return Err(usage("run needs --scenario or --floorplan")),
    };
    let (pipeline, mut options, _stub) = setup(&args.backend)?;
    if let Some(s) = args.seconds {
        if !(s > 0.0 && s.is_finite()) {
            return Err(usage("--seconds must be > 0"));
        }
        options.until = RunUntil::SimSeconds(s);
    }
    let log = run_scenario(&scenario, &pipeline, &options)?;
    if let Some(path) = &args.log {
        std::fs::write(path, log.to_jsonl())?;
    }
    let mut first = None;
    for rec in log.records.iter().filter(|r| r.decision().is_some()) {
        let d = rec.decision().expect("filtered");
        first.get_or_insert(d.decision.token);
        println!(
            "[{:>8.2} s {}] {} -> {}",
            rec.sim_time,
            rec.wall_clock,
            d.mode,
            d.decision.token
        );
        println!("    {}", d.summary);
        if let Some(f) = &d.failure {
            println!("    failure: {f}");
        }
    }
    for t in &log.timeline {
        println!("mode {} -> {} at {:.2} s (record {})", t.from, t.to, t.sim_time, t.cause);
    }
    match (first, scenario.expected) {
        (None, _) => Err(Failure(1, "no decision was made".into())),
        (Some(got), Some(want)) if got != want => Err(Failure(1, format!("expected {want}, got {got}"))),
        _ => Ok(()),
    }
}

fn print_report(r: &ConsistencyReport) {
    println!("scenario   {}", r.scenario);
    println!("backend    {}", r.backend_id);
    println!("trials     {}", r.trials);
    for (token, n) in &r.histogram {
        println!("  {:<10} {n}", token.to_string());
    }
    println!("agreement  {:.3}", r.agreement_rate);
    if let Some(e) = r.expected {
        println!("expected   {e} ({})", if r.passed == Some(true) { "pass" } else { "FAIL" });
    }
    println!("{:<10} {:>10} {:>10}", "stage", "mean ms", "p95 ms");
    for (stage, s) in &r.latency_ms {
        println!("{stage:<10} {:>10.1} {:>10.1}", s.mean, s.p95);
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(usage("--trials must be >= 1"));
    }
    let scenario = Scenario::resolve(&args.scenario)?;
    let (pipeline, options, _stub) = setup(&args.backend)?;
    let report = run_trials(&scenario, args.trials, &pipeline, &options)?;
    print_report(&report);
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed == Some(false) {
        return Err(Failure(1, "decisions did not match the expected outcome".into()));
    }
    Ok(())
}

fn cmd_serve(path: &std::path::Path) -> Result<(), Failure> {
    let loaded = load_config(path)?;
    for w in &loaded.warnings {
        log::warn!("{w}");
    }
    let handle = gateway::serve(&loaded.config)?;
    println!("listening on http://{}", handle.local_addr());
    handle.wait();
    Ok(())
}

fn cmd_replay(path: &std::path::Path) -> Result<(), Failure> {
    let timeline = replay(path)?;
    for t in &timeline {
        println!("{:>10.2} s  {} -> {}  (cause {}, record {})", t.sim_time, t.from, t.to, t.cause, t.record_id);
    }
    println!("{} mode changes, log consistent", timeline.len());
    Ok(())
}
