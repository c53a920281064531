use std::process::ExitCode;

use clap::{Parser, Subcommand};
use depgrid::commands::{
    self, CompareArgs, ConfigArgs, ObserveArgs, PlotArgs, PredictArgs, RunArgs, SampleArgs,
};
use depgrid::reproduce::{self, ReproduceArgs};
use depgrid::CliError;
use depgrid_core::EstimatorError;

/// Predict a policy's dependability under shifted operating conditions from
/// partition-level test outcomes.
#[derive(Debug, Parser)]
#[command(name = "depgrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw scenarios from a condition set.
    Sample(SampleArgs),
    /// Run the policy on every scenario of a scenario file.
    Run(RunArgs),
    /// Predict dependability under a target condition from test records.
    Predict(PredictArgs),
    /// Observed rates of a record file.
    Observe(ObserveArgs),
    /// Compare a predicted with an observed report.
    Compare(CompareArgs),
    /// Scatter plot of failure scenarios.
    Plot(PlotArgs),
    /// Run the whole pipeline with the built-in conditions.
    Reproduce(ReproduceArgs),
    /// Print the built-in config.
    Config(ConfigArgs),
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sample(a) => {
            let n = commands::sample(&a)?;
            eprintln!("wrote {n} scenarios to {}", a.out.display());
        }
        Command::Run(a) => {
            let m = commands::run(&a)?;
            eprintln!("wrote {} records to {}", m.record_count, m.records_path);
        }
        Command::Predict(a) => {
            let r = commands::predict_cmd(&a)?;
            if let Some(renorm) = &r.renormalization {
                eprintln!(
                    "warning: dropped {} untested region(s) carrying mass {:.6} and renormalized",
                    renorm.dropped_regions.len(),
                    renorm.dropped_mass
                );
            }
            println!(
                "{}: D={:.4} UT={:.4} UH={:.4}",
                r.condition, r.dependability, r.task_undependability, r.harmful_undependability
            );
        }
        Command::Observe(a) => {
            let r = commands::observe(&a)?;
            if a.out.is_some() {
                println!(
                    "{}: D={:.4} UT={:.4} UH={:.4} (n={})",
                    r.condition,
                    r.dependability,
                    r.task_undependability,
                    r.harmful_undependability,
                    r.n_records
                );
            }
        }
        Command::Compare(a) => {
            commands::compare_cmd(&a)?;
        }
        Command::Plot(a) => {
            let n = commands::plot(&a)?;
            eprintln!("plotted {n} failures to {}", a.out.display());
        }
        Command::Reproduce(a) => {
            let s = reproduce::reproduce(&a)?;
            println!("{}", s.to_markdown());
        }
        Command::Config(a) => commands::config_cmd(&a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Estimator(EstimatorError::EmptyPartition { regions, .. }) = &e {
                eprintln!("untested regions with target mass (bin index per dimension):");
                for r in regions {
                    eprintln!("  {r:?}");
                }
                eprintln!("sample more scenarios there or pass --renormalize-empty");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
