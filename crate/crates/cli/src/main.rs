use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ccsim::harness::CellOutcome;
use ccsim::scenario::presets;
use ccsim::{preset, run_matrix, run_scenario, summarize, CcaKind, Direction, Error, MatrixSpec, QdiscKind, RunSummary, ScenarioConfig};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

#[derive(Parser)]
#[command(name = "ccsim", version, about = "TCP congestion-control simulator over a shared AQM bottleneck")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write `<name>-seed<N>.jsonl` plus its summary.
    Run(RunArgs),
    /// Run CUBIC against each listed CCA for every AQM, direction and seed.
    Matrix(MatrixArgs),
    /// Recompute the summary of an existing log and print it as JSON.
    Summarize { log: PathBuf },
    /// List builtin presets.
    ListPresets,
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = "CCSIM_OUT_DIR", default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Builtin preset name (see `list-presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct MatrixArgs {
    #[arg(long, value_delimiter = ',', value_parser = parse_cca, default_values = ["bbr1", "bbr2", "bbr3"])]
    ccas: Vec<CcaKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_aqm, default_values = ["pfifo", "fq_codel", "cake"])]
    aqms: Vec<QdiscKind>,
    #[arg(long, value_delimiter = ',', value_parser = parse_direction, default_values = ["up", "down"])]
    directions: Vec<Direction>,
    #[arg(long, value_delimiter = ',', default_values = ["1"])]
    seeds: Vec<u64>,
    #[command(flatten)]
    out: OutDir,
}

fn parse_cca(s: &str) -> Result<CcaKind, String> {
    CcaKind::parse(s).ok_or_else(|| format!("unknown CCA `{s}` (cubic, bbr1, bbr2, bbr3)"))
}

fn parse_aqm(s: &str) -> Result<QdiscKind, String> {
    QdiscKind::parse(s).ok_or_else(|| format!("unknown AQM `{s}` (pfifo, fq_codel, cake)"))
}

fn parse_direction(s: &str) -> Result<Direction, String> {
    Direction::parse(s).ok_or_else(|| format!("unknown direction `{s}` (up, down)"))
}

enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Summarize { log } => cmd_summarize(&log),
        Command::ListPresets => {
            for p in presets() {
                println!("{:<28} {}", p.name, p.description);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn load_scenario(args: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&args.scenario, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            ScenarioConfig::from_json(&text)?
        }
        (None, Some(name)) => preset(name, 1)?,
        (None, None) => unreachable!("clap requires one of --scenario/--preset"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_scenario(&args)?;
    let r = run_scenario(&cfg, &args.out.out)?;
    print_summary(&r.summary);
    println!("log:     {}", r.log_path.display());
    println!("summary: {}", r.summary_path.display());
    println!("wall:    {:.2} s", r.wall_clock_s);
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!("{} seed {} (window {:.1}-{:.1} s)", s.scenario, s.seed, s.window_start, s.window_end);
    for f in &s.flows {
        println!(
            "  flow {} {:<5} mean {:>6.3} Mbps  share {:.3}  CoV {:.3}  rtx {}",
            f.flow_id,
            f.cca.as_str(),
            f.mean_goodput / 1e6,
            f.share,
            f.goodput_cov,
            f.retransmissions
        );
    }
    let conv = s.convergence_time.map_or("absent".to_string(), |t| format!("{t:.1} s"));
    println!("  jain {:.4}  convergence {conv}", s.jain_index);
}

fn cmd_matrix(args: MatrixArgs) -> Result<(), Failure> {
    let spec = MatrixSpec {
        ccas: args.ccas,
        aqms: args.aqms,
        directions: args.directions,
        seeds: args.seeds,
    };
    let report = run_matrix(&spec, &args.out.out)?;
    for c in &report.cells {
        match &c.outcome {
            CellOutcome::Ok { jain_index, .. } => println!("ok     {} seed {} jain {jain_index:.4}", c.scenario, c.seed),
            CellOutcome::Failed { error } => println!("FAILED {} seed {}: {error}", c.scenario, c.seed),
        }
    }
    println!("index: {}", report.index_path.display());
    match report.failures() {
        0 => Ok(()),
        n => Err(Failure::Runtime(format!("{n} of {} cells failed", report.cells.len()))),
    }
}

fn cmd_summarize(log: &Path) -> Result<(), Failure> {
    let s = summarize(log)?;
    println!("{}", serde_json::to_string_pretty(&s).expect("summary serializes"));
    Ok(())
}
