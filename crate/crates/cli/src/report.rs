//! Plot-ready CSV series. Both the run commands and the archive analyzer
//! funnel through write_analysis, so regenerating from a stored archive
//! reproduces the inline output byte for byte. Column layouts are described
//! in docs/csv-schema.md.

use crate::CliError;
use chanmix::experiment::{
    blp_of, fidelity_summary, gbar_series, lambda_points, probability_columns,
    probability_values, rhp_of, ExperimentRun, GbarMode,
};
use std::path::{Path, PathBuf};

/// Shortest-roundtrip decimal encoding; the same digits serde_json writes
/// into the archive, so CSV and archive never disagree on a value.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        ryu::Buffer::new().format_finite(v).to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn save(out: &Path, name: &str, body: String) -> Result<PathBuf, CliError> {
    let path = out.join(name);
    std::fs::write(&path, body)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_probabilities(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = probability_columns(run.config.scenario).join(",");
    body.push('\n');
    for &t in &run.grid.times {
        let values = probability_values(run.config.scenario, t)?;
        body.push_str(&fmt_f64(t));
        for v in values {
            body.push(',');
            body.push_str(&fmt_f64(v));
        }
        body.push('\n');
    }
    save(out, "probabilities.csv", body)
}

fn write_lambda_min(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,s,t,mean,median,std,p05,p95,n_used,n_flagged\n");
    for &member in &run.config.members {
        for p in lambda_points(run, member)? {
            body.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                member.label(),
                fmt_f64(p.s),
                fmt_f64(p.t),
                fmt_f64(p.mean),
                fmt_f64(p.median),
                fmt_f64(p.std),
                fmt_f64(p.p05),
                fmt_f64(p.p95),
                p.n_used,
                p.n_flagged
            ));
        }
    }
    save(out, "lambda_min.csv", body)
}

fn write_gbar(
    run: &ExperimentRun,
    out: &Path,
    mode: GbarMode,
    name: &str,
) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,t,gbar,std,sem,flagged\n");
    for &member in &run.config.members {
        for p in gbar_series(run, member, mode)? {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                member.label(),
                fmt_f64(p.t),
                fmt_f64(p.gbar),
                fmt_opt(p.std),
                fmt_opt(p.sem),
                p.flagged
            ));
        }
    }
    save(out, name, body)
}

fn write_trace_distance(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,t,d,std\n");
    for &member in &run.config.members {
        for p in chanmix::experiment::trace_distance_series(run, member)? {
            body.push_str(&format!(
                "{},{},{},{}\n",
                member.label(),
                fmt_f64(p.t),
                fmt_f64(p.d),
                fmt_opt(p.std)
            ));
        }
    }
    save(out, "trace_distance.csv", body)
}

fn write_measures(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,metric,value,numerator,denominator,excluded\n");
    for &member in &run.config.members {
        for (metric, mode) in [
            ("rhp_pairwise", GbarMode::PairwiseReplicas),
            ("rhp_averaged", GbarMode::AveragedChi),
        ] {
            let m = rhp_of(run, member, mode)?;
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                member.label(),
                metric,
                fmt_f64(m.value),
                fmt_f64(m.numerator),
                fmt_f64(m.denominator),
                m.excluded
            ));
        }
        let blp = blp_of(run, member)?;
        body.push_str(&format!("{},blp,{},,,\n", member.label(), fmt_f64(blp)));
    }
    save(out, "measures.csv", body)
}

fn write_fidelity(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,t,mean,min,n_replicas,n_converged\n");
    for &member in &run.config.members {
        for p in fidelity_summary(run, member)? {
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                member.label(),
                fmt_f64(p.t),
                fmt_f64(p.mean),
                fmt_f64(p.min),
                p.n_replicas,
                p.n_converged
            ));
        }
    }
    save(out, "fidelity.csv", body)
}

fn write_flagged(run: &ExperimentRun, out: &Path) -> Result<PathBuf, CliError> {
    let mut body = String::from("member,t_start,t_end,reason\n");
    for pair in &run.grid.pairs {
        for member in &pair.flagged {
            body.push_str(&format!(
                "{},{},{},non-invertible start\n",
                member.label(),
                fmt_f64(run.grid.times[pair.start_idx]),
                fmt_f64(run.grid.times[pair.end_idx])
            ));
        }
    }
    save(out, "flagged.csv", body)
}

pub(crate) fn write_analysis(run: &ExperimentRun, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    Ok(vec![
        write_probabilities(run, out)?,
        write_lambda_min(run, out)?,
        write_gbar(run, out, GbarMode::PairwiseReplicas, "gbar_pairwise.csv")?,
        write_gbar(run, out, GbarMode::AveragedChi, "gbar_averaged.csv")?,
        write_trace_distance(run, out)?,
        write_measures(run, out)?,
        write_fidelity(run, out)?,
        write_flagged(run, out)?,
    ])
}
