use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use skyharvest::scenario::CostMode;
use skyharvest_cli::{run, verify, Mode, RunManifest, RunResult, Sweep};

#[derive(Parser)]
#[command(name = "skyharvest", version, about = "Plan and audit multi-UAV data-harvesting missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostArg {
    Power,
    Time,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a mission (or a sweep of missions) and write the artifacts.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "pipeline")]
        mode: Mode,
        /// Comma-separated average power budgets in watts.
        #[arg(long, value_delimiter = ',', conflicts_with = "sweep_uavs")]
        sweep_pavg: Option<Vec<f64>>,
        /// Comma-separated fleet sizes.
        #[arg(long, value_delimiter = ',')]
        sweep_uavs: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
        /// Measure latency as transmission time only.
        #[arg(long)]
        literal_delta: bool,
        #[arg(long, value_enum)]
        cost: Option<CostArg>,
        #[arg(long)]
        mc_samples: Option<usize>,
    },
    /// Replay a finished run directory and check the mission constraints.
    Verify {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { scenario, seed, mode, sweep_pavg, sweep_uavs, out, literal_delta, cost, mc_samples } => {
            let sweep = match (sweep_pavg, sweep_uavs) {
                (Some(p), _) => Sweep::PAvg(p),
                (None, Some(u)) => Sweep::Uavs(u),
                (None, None) => Sweep::None,
            };
            let manifest = RunManifest {
                scenario,
                seed,
                mode,
                sweep,
                out,
                literal_delta,
                cost: cost.map(|c| match c {
                    CostArg::Power => CostMode::Power,
                    CostArg::Time => CostMode::Time,
                }),
                mc_samples,
            };
            match run(&manifest) {
                Ok(RunResult::Single(s)) => {
                    println!(
                        "{} seed {}: total reward {:.6e}, {} GNs served -> {}",
                        s.mode.label(),
                        s.seed,
                        s.total_reward,
                        s.served_count,
                        manifest.out.display()
                    );
                    ExitCode::SUCCESS
                }
                Ok(RunResult::Sweep(rows)) => {
                    for r in rows {
                        println!("{} = {}: total reward {:.6e}, {} GNs served", r.axis, r.value, r.total_reward, r.served_count);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify { out } => match verify(&out) {
            Ok(report) => {
                for line in report.lines() {
                    println!("{line}");
                }
                for v in &report.violations {
                    println!("  {v}");
                }
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
