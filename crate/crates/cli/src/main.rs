//! `dispersive`: runs verification scenarios and writes JSON reports and CSV series.
//!
//! Exit status: 0 when every verdict passes, 1 when any fails, 2 on bad input.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dispersive_core::dispersion::RelationSpec;
use dispersive_core::error::Error;
use dispersive_core::exec::Execution;
use dispersive_core::scenario::{self, Command, Report, Scenario};

#[derive(Parser)]
#[command(name = "dispersive", version, about = "Decay, Strichartz and Picard checks for dispersive equations")]
struct Cli {
    /// Directory for report.json and CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized checks (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Slack on fitted exponents.
    #[arg(long, global = true)]
    slack: Option<f64>,
    /// Run every sweep on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct ScenarioArgs {
    /// JSON scenario file; without it the command's default scenario runs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin relation: klein_gordon, beam, schrodinger4, wave or power(m).
    #[arg(long)]
    relation: Option<String>,
    /// Spatial dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Dyadic scale.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<i32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Runs a config file holding one scenario or {"scenarios": [...]}.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Checks (H1)-(H4) for the builtin relations.
    Hypotheses(ScenarioArgs),
    /// Sup-norm decay of one dyadic kernel.
    KernelDecay(ScenarioArgs),
    /// Sup-norm decay of the summed low-frequency kernel.
    LowfreqDecay(ScenarioArgs),
    /// Growth of the kernel sup across dyadic scales at fixed time.
    DyadicScaling(ScenarioArgs),
    /// Besov-norm decay of the Klein-Gordon, beam or fourth-order group.
    GroupDecay(ScenarioArgs),
    /// Small-time L^q bound of the beam group.
    SmallTime(ScenarioArgs),
    /// Bounded-ratio Strichartz check.
    Strichartz(ScenarioArgs),
    /// Bounded-ratio convolution (HLS-type) check.
    Hls(ScenarioArgs),
    /// Picard iteration for small-data NLKG / NLB.
    Nonlinear(ScenarioArgs),
    /// Bessel function self-test.
    BesselSelftest(ScenarioArgs),
    /// Concatenates reports and recomputes the aggregate verdict.
    Merge {
        #[arg(required = false)]
        reports: Vec<PathBuf>,
    },
}

enum Failure {
    Input(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, Failure> {
    scenario::parse_config(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn command_scenarios(name: &str, args: &ScenarioArgs) -> Result<Vec<Scenario>, Failure> {
    let mut scenarios = match &args.config {
        Some(path) => load_scenarios(path)?,
        None => vec![Scenario {
            name: Some(name.to_string()),
            command: Command::default_for(name)?,
        }],
    };
    for s in &mut scenarios {
        if s.command.name() != name {
            return Err(Failure::Input(format!(
                "config holds a `{}` scenario, not `{name}`",
                s.command.name()
            )));
        }
        if let Some(r) = &args.relation {
            s.command.set_relation(RelationSpec::Named(r.clone()));
        }
        match &mut s.command {
            Command::KernelDecay(p) => {
                p.n = args.n.unwrap_or(p.n);
                p.k = args.k.unwrap_or(p.k);
            }
            Command::LowfreqDecay(p) => p.n = args.n.unwrap_or(p.n),
            Command::DyadicScaling(p) => p.n = args.n.unwrap_or(p.n),
            _ => {}
        }
    }
    Ok(scenarios)
}

fn write_outputs(out: &Path, report: &Report, artifacts: &[scenario::Artifact]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Input(format!("{}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join("report.json"), report.to_json()?).map_err(io)?;
    for a in artifacts {
        fs::write(out.join(&a.file_name), &a.contents).map_err(io)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Report, Failure> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let (name, args) = match &cli.command {
        Cmd::Run { config } => ("", ScenarioArgs {
            config: Some(config.clone()),
            ..Default::default()
        }),
        Cmd::Merge { reports } => {
            let mut parsed = Vec::new();
            for p in reports {
                let r: Report = serde_json::from_str(&read(p)?)
                    .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
                parsed.push(r);
            }
            let merged = scenario::merge(&parsed);
            write_outputs(&cli.out, &merged, &[])?;
            return Ok(merged);
        }
        Cmd::Hypotheses(a) => ("hypotheses", a.clone()),
        Cmd::KernelDecay(a) => ("kernel-decay", a.clone()),
        Cmd::LowfreqDecay(a) => ("lowfreq-decay", a.clone()),
        Cmd::DyadicScaling(a) => ("dyadic-scaling", a.clone()),
        Cmd::GroupDecay(a) => ("group-decay", a.clone()),
        Cmd::SmallTime(a) => ("small-time", a.clone()),
        Cmd::Strichartz(a) => ("strichartz", a.clone()),
        Cmd::Hls(a) => ("hls", a.clone()),
        Cmd::Nonlinear(a) => ("nonlinear", a.clone()),
        Cmd::BesselSelftest(a) => ("bessel-selftest", a.clone()),
    };
    let mut scenarios = if name.is_empty() {
        load_scenarios(args.config.as_deref().expect("run has a config"))?
    } else {
        command_scenarios(name, &args)?
    };
    for s in &mut scenarios {
        if let Some(seed) = cli.seed {
            s.command.set_seed(seed);
        }
        if let Some(slack) = cli.slack {
            s.command.set_slack(slack);
        }
    }
    let (report, artifacts) = scenario::run_suite(&scenarios, Some(cli.seed.unwrap_or(0)), exec)?;
    write_outputs(&cli.out, &report, &artifacts)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = cli.out.clone();
    match run(cli) {
        Ok(report) if report.pass => {
            println!("{:?}: {} record(s), report in {}", report.status, report.records.len(), out.join("report.json").display());
            ExitCode::SUCCESS
        }
        Ok(report) => {
            for r in report.failures() {
                eprintln!(
                    "FAIL {} ({}): predicted {:?}, fitted {:?}, slack {:?}",
                    r.scenario, r.command, r.predicted, r.fitted, r.slack
                );
            }
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
