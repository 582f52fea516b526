use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use rdrcb::harness::{
    complexity_report, desk_plan, emit_csv, render_complexity, render_summary, run_experiment,
    run_selftest, ExperimentPlan,
};

#[derive(Parser)]
#[command(name = "rdrcb", version, about = "Reduced-dimension robust Capon beamforming experiments")]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path (overrides the plan's output).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the number of Monte-Carlo trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan and write SINR-versus-SNR results.
    Simulate {
        /// Plan file (JSON). Omit to run the built-in desk plan.
        plan: Option<PathBuf>,
    },
    /// Print flop counts of the reducer constructions.
    Complexity {
        /// Number of array elements.
        #[arg(short = 'm', long, default_value_t = 320)]
        elements: u64,
        /// Reduced dimensions; defaults to 1, 10, 100 and M.
        #[arg(short = 'n', long, value_delimiter = ',')]
        n: Vec<u64>,
    },
    /// Run the built-in oracle-equivalence checks.
    Selftest,
    /// Print the built-in desk plan as JSON.
    DefaultPlan,
}

fn simulate(cli: &Cli, plan_path: Option<&PathBuf>) -> anyhow::Result<()> {
    let mut plan = match plan_path {
        Some(p) => ExperimentPlan::load(p)?,
        None => desk_plan(),
    };
    if let Some(seed) = cli.seed {
        plan.scenario.seed = seed;
    }
    if let Some(t) = cli.trials {
        plan.trials = t;
    }
    if let Some(out) = &cli.out {
        plan.outputs.csv = Some(out.clone());
    }
    let out = run_experiment(&plan)?;
    print!("{}", render_summary(&out.rows));
    if !out.failures.is_empty() {
        eprintln!("{} trial(s) failed and were excluded:", out.failures.len());
        for f in out.failures.iter().take(10) {
            eprintln!("  {} @ {} dB, trial {}: {}", f.method, f.snr_db, f.trial, f.reason);
        }
        if out.failures.len() > 10 {
            eprintln!("  ...");
        }
    }
    if let Some(path) = &plan.outputs.csv {
        emit_csv(&out.rows, path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match &cli.command {
        Command::Simulate { plan } => simulate(cli, plan.as_ref()),
        Command::Complexity { elements, n } => {
            let grid = if n.is_empty() {
                let mut g: Vec<u64> = [1, 10, 100].into_iter().filter(|&k| k < *elements).collect();
                g.push(*elements);
                g
            } else {
                n.clone()
            };
            let rows = complexity_report(*elements, &grid)?;
            print!("{}", render_complexity(*elements, &rows));
            Ok(())
        }
        Command::Selftest => {
            let checks = run_selftest(cli.seed.unwrap_or(1))?;
            let mut failed = 0;
            for c in &checks {
                let status = if c.passed() { "PASS" } else { "FAIL" };
                println!(
                    "{status}  {:<40} worst {:.3e} (tol {:.0e}, {} cases)",
                    c.name, c.worst, c.tolerance, c.cases
                );
                failed += usize::from(!c.passed());
            }
            if failed > 0 {
                bail!("{failed} self-test check(s) failed");
            }
            Ok(())
        }
        Command::DefaultPlan => {
            println!("{}", desk_plan().to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
