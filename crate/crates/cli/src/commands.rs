//! Subcommand drivers. Every command that produces series funnels through
//! report::write_analysis over an ExperimentRun, whether the run was just
//! executed or rebuilt from an archive.

use crate::config::{self, Resolved};
use crate::{archive, report, AnalyzeArgs, CliError, RunArgs};
use chanmix::experiment::{run, ExperimentRun, Mode};
use std::path::Path;

pub(crate) fn cmd_ideal(args: &RunArgs) -> Result<(), CliError> {
    let Resolved { config, out_dir } = config::resolve(Mode::Ideal, args)?;
    let outcome = run(config)?;
    emit(&outcome, &out_dir)
}

pub(crate) fn cmd_simulate(args: &RunArgs) -> Result<(), CliError> {
    let Resolved { config, out_dir } = config::resolve(Mode::Simulated, args)?;
    let outcome = run(config)?;
    print_summary(&outcome);
    emit(&outcome, &out_dir)
}

pub(crate) fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let doc = archive::load(&args.archive)?;
    let outcome = archive::to_run(&doc)?;
    let out_dir = args.out.clone().unwrap_or_else(config::default_out_dir);
    if outcome.config.mode == Mode::Simulated {
        print_summary(&outcome);
    }
    for path in report::write_analysis(&outcome, &out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn emit(outcome: &ExperimentRun, out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let archive_path = out_dir.join("archive.json");
    archive::write(outcome, &archive_path)?;
    println!("wrote {}", archive_path.display());
    for path in report::write_analysis(outcome, out_dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Per-cell reconstruction quality, mean process fidelity with the n-1
/// sample deviation across replicas.
fn print_summary(outcome: &ExperimentRun) {
    println!("member   t            mean_fp      std_fp       converged");
    for cell in &outcome.cells {
        if cell.replicas.is_empty() {
            continue;
        }
        let n = cell.replicas.len();
        let mean = cell.replicas.iter().map(|r| r.fidelity).sum::<f64>() / n as f64;
        let std = if n > 1 {
            (cell.replicas.iter().map(|r| (r.fidelity - mean).powi(2)).sum::<f64>()
                / (n as f64 - 1.0))
                .sqrt()
        } else {
            0.0
        };
        let converged = cell.replicas.iter().filter(|r| r.converged).count();
        println!(
            "{:<8} {:<12} {:<12} {:<12} {}/{}",
            cell.member.label(),
            report::fmt_f64(outcome.grid.times[cell.time_idx]),
            report::fmt_f64(mean),
            report::fmt_f64(std),
            converged,
            n
        );
    }
}
