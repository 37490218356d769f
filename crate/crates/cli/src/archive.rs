//! Persisted runs: one JSON document carrying the configuration, the time
//! grid and every reconstructed chi matrix. Complex entries are [re, im]
//! pairs in row-major order over the fixed operator basis (I, sx, sy, sz).
//! Floats are encoded shortest-roundtrip, so write -> read -> write
//! reproduces the document byte for byte.

use crate::config::{
    member_of, mode_label, mode_of, resampling_label, resampling_of, scenario_label, scenario_of,
};
use crate::CliError;
use chanmix::channels::{transfer_of_chi, ChiMatrix, Member};
use chanmix::experiment::{
    CellEstimate, ExperimentRun, GridPair, Mode, RunConfig, TimeCell, TimeGrid,
};
use chanmix::linalg::{cx, CMatrix};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub(crate) const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ChiArchive {
    pub(crate) format_version: u32,
    pub(crate) tool_version: String,
    pub(crate) meta: Meta,
    pub(crate) grid: GridDoc,
    pub(crate) cells: Vec<CellDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct Meta {
    pub(crate) scenario: String,
    pub(crate) mode: String,
    pub(crate) members: Vec<String>,
    pub(crate) shots: u64,
    pub(crate) replicas: usize,
    pub(crate) base_seed: u64,
    pub(crate) epsilon: f64,
    pub(crate) resampling: String,
    pub(crate) ideal_zero_threshold: f64,
    pub(crate) cond_limit: f64,
    pub(crate) s_values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GridDoc {
    pub(crate) times: Vec<f64>,
    pub(crate) pairs: Vec<PairDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PairDoc {
    pub(crate) start_idx: usize,
    pub(crate) end_idx: usize,
    pub(crate) flagged: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct CellDoc {
    pub(crate) member: String,
    pub(crate) time_index: usize,
    pub(crate) ideal_chi: Vec<[f64; 2]>,
    pub(crate) replicas: Vec<ReplicaDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ReplicaDoc {
    pub(crate) chi: Vec<[f64; 2]>,
    pub(crate) fidelity: f64,
    pub(crate) converged: bool,
}

fn encode_matrix(m: &CMatrix) -> Vec<[f64; 2]> {
    m.entries().iter().map(|z| [z.re, z.im]).collect()
}

fn decode_chi(pairs: &[[f64; 2]], what: &str) -> Result<ChiMatrix, CliError> {
    if pairs.len() != 16 {
        return Err(CliError::Schema(format!(
            "{what}: expected 16 matrix entries, found {}",
            pairs.len()
        )));
    }
    if pairs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Schema(format!("{what}: non-finite matrix entry")));
    }
    let raw: Vec<_> = pairs.iter().map(|[re, im]| cx(*re, *im)).collect();
    ChiMatrix::new(CMatrix::from_row_major(4, &raw))
        .map_err(|e| CliError::Schema(format!("{what}: {e}")))
}

pub(crate) fn of_run(run: &ExperimentRun) -> ChiArchive {
    let config = &run.config;
    ChiArchive {
        format_version: FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        meta: Meta {
            scenario: scenario_label(config.scenario).to_string(),
            mode: mode_label(config.mode).to_string(),
            members: config.members.iter().map(|m| m.label().to_string()).collect(),
            shots: config.shots,
            replicas: config.replicas,
            base_seed: config.base_seed,
            epsilon: config.epsilon,
            resampling: resampling_label(config.resampling).to_string(),
            ideal_zero_threshold: config.ideal_zero_threshold,
            cond_limit: config.cond_limit,
            s_values: config.s_values.clone(),
        },
        grid: GridDoc {
            times: run.grid.times.clone(),
            pairs: run
                .grid
                .pairs
                .iter()
                .map(|p| PairDoc {
                    start_idx: p.start_idx,
                    end_idx: p.end_idx,
                    flagged: p.flagged.iter().map(|m| m.label().to_string()).collect(),
                })
                .collect(),
        },
        cells: run
            .cells
            .iter()
            .map(|cell| CellDoc {
                member: cell.member.label().to_string(),
                time_index: cell.time_idx,
                ideal_chi: encode_matrix(cell.ideal_chi.matrix()),
                replicas: cell
                    .replicas
                    .iter()
                    .map(|rep| ReplicaDoc {
                        chi: encode_matrix(rep.chi.matrix()),
                        fidelity: rep.fidelity,
                        converged: rep.converged,
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Rebuilds the full run. The transfer matrices are recomputed from the
/// stored chi matrices, which is the same arithmetic the run itself used,
/// so analysis of a loaded archive matches inline analysis exactly.
pub(crate) fn to_run(doc: &ChiArchive) -> Result<ExperimentRun, CliError> {
    let scenario = scenario_of(&doc.meta.scenario)?;
    let mode = mode_of(&doc.meta.mode)?;
    let members: Vec<Member> =
        doc.meta.members.iter().map(|n| member_of(n)).collect::<Result<_, _>>()?;
    if members.is_empty() {
        return Err(CliError::Schema("archive lists no members".into()));
    }

    if doc.grid.times.iter().any(|t| !t.is_finite()) {
        return Err(CliError::Schema("grid contains a non-finite time".into()));
    }
    let mut pairs = Vec::with_capacity(doc.grid.pairs.len());
    for p in &doc.grid.pairs {
        if p.start_idx >= doc.grid.times.len() || p.end_idx >= doc.grid.times.len() {
            return Err(CliError::Schema(format!(
                "grid pair ({}, {}) points past the {} stored times",
                p.start_idx,
                p.end_idx,
                doc.grid.times.len()
            )));
        }
        let flagged: Vec<Member> =
            p.flagged.iter().map(|n| member_of(n)).collect::<Result<_, _>>()?;
        pairs.push(GridPair { start_idx: p.start_idx, end_idx: p.end_idx, flagged });
    }
    let grid = TimeGrid { scenario, times: doc.grid.times.clone(), pairs, epsilon: doc.meta.epsilon };

    let config = RunConfig {
        scenario,
        mode,
        members: members.clone(),
        shots: doc.meta.shots,
        replicas: doc.meta.replicas,
        base_seed: doc.meta.base_seed,
        epsilon: doc.meta.epsilon,
        resampling: resampling_of(&doc.meta.resampling)?,
        ideal_zero_threshold: doc.meta.ideal_zero_threshold,
        cond_limit: doc.meta.cond_limit,
        s_values: doc.meta.s_values.clone(),
        grid: Some(grid.clone()),
    };

    let mut by_key: HashMap<(Member, usize), &CellDoc> = HashMap::new();
    for cell in &doc.cells {
        let member = member_of(&cell.member)?;
        if cell.time_index >= grid.times.len() {
            return Err(CliError::Schema(format!(
                "cell for {} points at time index {} past the {} stored times",
                cell.member,
                cell.time_index,
                grid.times.len()
            )));
        }
        if by_key.insert((member, cell.time_index), cell).is_some() {
            return Err(CliError::Schema(format!(
                "duplicate cell for {} at time index {}",
                cell.member, cell.time_index
            )));
        }
    }

    let mut cells = Vec::with_capacity(members.len() * grid.times.len());
    for &member in &members {
        for time_idx in 0..grid.times.len() {
            let cell = by_key.remove(&(member, time_idx)).ok_or_else(|| {
                CliError::Schema(format!(
                    "archive is missing the cell for {} at time index {time_idx}",
                    member.label()
                ))
            })?;
            let what = format!("cell {} at time index {time_idx}", member.label());
            let ideal_chi = decode_chi(&cell.ideal_chi, &format!("{what} (ideal)"))?;
            if mode == Mode::Ideal && !cell.replicas.is_empty() {
                return Err(CliError::Schema(format!(
                    "{what}: ideal-mode archive carries replicas"
                )));
            }
            if mode == Mode::Simulated && cell.replicas.len() != doc.meta.replicas {
                return Err(CliError::Schema(format!(
                    "{what}: expected {} replicas, found {}",
                    doc.meta.replicas,
                    cell.replicas.len()
                )));
            }
            let mut replicas = Vec::with_capacity(cell.replicas.len());
            for (ri, rep) in cell.replicas.iter().enumerate() {
                let chi = decode_chi(&rep.chi, &format!("{what} replica {ri}"))?;
                if !rep.fidelity.is_finite() {
                    return Err(CliError::Schema(format!(
                        "{what} replica {ri}: non-finite fidelity"
                    )));
                }
                let transfer = transfer_of_chi(&chi);
                replicas.push(CellEstimate {
                    chi,
                    transfer,
                    fidelity: rep.fidelity,
                    converged: rep.converged,
                });
            }
            cells.push(TimeCell { member, time_idx, ideal_chi, replicas });
        }
    }
    if !by_key.is_empty() {
        let (member, time_idx) = *by_key.keys().next().unwrap();
        return Err(CliError::Schema(format!(
            "archive carries a cell for {} at time index {time_idx} outside the configured run",
            member.label()
        )));
    }

    Ok(ExperimentRun { config, grid, cells })
}

pub(crate) fn write(run: &ExperimentRun, path: &Path) -> Result<(), CliError> {
    let doc = of_run(run);
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| CliError::Numeric(format!("archive encoding: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

/// The format version is checked before strict decoding so a future-format
/// document fails with the version mismatch, not a field error.
pub(crate) fn load(path: &Path) -> Result<ChiArchive, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("cannot read archive {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Schema(format!("archive {}: {e}", path.display())))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| {
            CliError::Schema(format!("archive {}: missing format_version", path.display()))
        })?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(CliError::Schema(format!(
            "archive format version mismatch: expected {FORMAT_VERSION}, found {found}"
        )));
    }
    serde_json::from_value(value)
        .map_err(|e| CliError::Schema(format!("archive {}: {e}", path.display())))
}
