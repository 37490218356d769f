//! Grid sweeps tying the channel families, simulated tomography and the
//! memory diagnostics together.
//!
//! A run walks a time grid, reconstructs every requested channel member at
//! every grid time (or takes the ideal maps directly), and exposes series
//! builders for the divisibility witness, the finite-difference rate gbar,
//! trace distances and the two scalar measures. Every replica draws from its
//! own counter-derived RNG stream, so results are identical regardless of
//! how work is scheduled across threads.

use crate::channels::{
    apply, apply_chi, chi_of, mixture_weights, pauli, pauli_mixing_of, probability,
    transfer_of_chi, ChannelError, ChannelModel, ChiMatrix, DensityMatrix, Member, Scenario,
    TransferMatrix,
};
use crate::linalg::{CMatrix, LinalgError};
use crate::markovianity::{
    blp_measure, blp_trace_distance, gbar, ideal_transfer, intermediate_map, min_choi_eigenvalue,
    rhp_g, rhp_measure, GbarPoint, MarkovianityError, RhpMeasure, TraceDistancePoint,
    ZeroThreshold,
};
use crate::tomography::{
    mle_state, outcome_probabilities, probe_states, process_fidelity, process_tomography,
    simulate_counts, simulate_counts_per_shot, CountTable, TomographyError,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Markovianity(#[from] MarkovianityError),
    #[error(transparent)]
    Tomography(#[from] TomographyError),
}

pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_COND_LIMIT: f64 = 1e8;
pub const DEFAULT_IDEAL_ZERO_THRESHOLD: f64 = 1e-6;

/// Matching tolerance for locating a time on the grid.
const TIME_MATCH: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Ideal,
    Simulated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resampling {
    /// Poisson totals drawn around exact outcome probabilities.
    ParametricBootstrap,
    /// every shot routed through a sampled mixture branch
    PerShot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GbarMode {
    /// one gbar value per ordered replica pair, then summary statistics
    PairwiseReplicas,
    /// single gbar from the replica-averaged reconstructions
    AveragedChi,
}

/// A witness pair (s, s + epsilon) by grid indices, with the members whose
/// ideal map cannot be inverted at s.
#[derive(Clone, Debug)]
pub struct GridPair {
    pub start_idx: usize,
    pub end_idx: usize,
    pub flagged: Vec<Member>,
}

#[derive(Clone, Debug)]
pub struct TimeGrid {
    pub scenario: Scenario,
    /// sorted, distinct
    pub times: Vec<f64>,
    pub pairs: Vec<GridPair>,
    pub epsilon: f64,
}

impl TimeGrid {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= TIME_MATCH * t.abs().max(1.0))
    }
}

fn push_distinct(times: &mut Vec<f64>, t: f64) {
    if !times.iter().any(|&x| (x - t).abs() <= TIME_MATCH * t.abs().max(1.0)) {
        times.push(t);
    }
}

/// Grid over explicit base times: every base gets an epsilon partner, and
/// each resulting pair is probed once per member against the ideal maps to
/// flag non-invertible starting points up front.
pub fn grid_from_bases(
    scenario: Scenario,
    bases: &[f64],
    epsilon: f64,
    cond_limit: f64,
) -> Result<TimeGrid, ExperimentError> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(ExperimentError::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    if bases.is_empty() {
        return Err(ExperimentError::Config("at least one base time required".into()));
    }
    let mut sorted = bases.to_vec();
    if sorted.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(ExperimentError::Config("base times must be finite and nonnegative".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup_by(|a, b| (*a - *b).abs() <= TIME_MATCH * a.abs().max(1.0));

    let mut times = Vec::with_capacity(2 * sorted.len());
    for &b in &sorted {
        push_distinct(&mut times, b);
        push_distinct(&mut times, b + epsilon);
    }
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let grid_stub = TimeGrid { scenario, times, pairs: Vec::new(), epsilon };
    let mut pairs = Vec::with_capacity(sorted.len());
    for &b in &sorted {
        let start_idx = grid_stub.index_of(b).expect("base was inserted");
        let end_idx = grid_stub.index_of(b + epsilon).expect("partner was inserted");
        let s = grid_stub.times[start_idx];
        let t = grid_stub.times[end_idx];
        let mut flagged = Vec::new();
        for member in Member::ALL {
            let model = ChannelModel::new(scenario, member);
            let f_t = ideal_transfer(model, t)?;
            let f_s = ideal_transfer(model, s)?;
            match intermediate_map(&f_t, &f_s, s, t, cond_limit) {
                Ok(v) if !v.ill_conditioned => {}
                Ok(_) => flagged.push(member),
                Err(MarkovianityError::Linalg(LinalgError::Singular { .. })) => {
                    flagged.push(member)
                }
                Err(e) => return Err(e.into()),
            }
        }
        pairs.push(GridPair { start_idx, end_idx, flagged });
    }
    Ok(TimeGrid { pairs, ..grid_stub })
}

/// Default sweep: case A walks half-unit steps to 3.5; case B walks eighths
/// of pi to 5 pi / 4 and inserts pi/4 + epsilon so the sweep resumes right
/// after the singular point of the second member.
pub fn default_grid(scenario: Scenario, epsilon: f64) -> Result<TimeGrid, ExperimentError> {
    let bases: Vec<f64> = match scenario {
        Scenario::CaseA => (0..8).map(|k| 0.5 * k as f64).collect(),
        Scenario::CaseB => {
            let mut b: Vec<f64> = (0..=10).map(|k| PI / 8.0 * k as f64).collect();
            b.push(FRAC_PI_4 + epsilon);
            b
        }
    };
    grid_from_bases(scenario, &bases, epsilon, DEFAULT_COND_LIMIT)
}

pub fn default_s_values(scenario: Scenario) -> Vec<f64> {
    match scenario {
        Scenario::CaseA => vec![0.5, 1.0, 1.5],
        Scenario::CaseB => vec![FRAC_PI_4 + DEFAULT_EPSILON],
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub mode: Mode,
    pub members: Vec<Member>,
    pub shots: u64,
    pub replicas: usize,
    pub base_seed: u64,
    pub epsilon: f64,
    pub resampling: Resampling,
    pub ideal_zero_threshold: f64,
    pub cond_limit: f64,
    /// anchor times for the divisibility sweep; must lie on the grid
    pub s_values: Vec<f64>,
    /// replaces the default grid when set
    pub grid: Option<TimeGrid>,
}

impl RunConfig {
    pub fn ideal(scenario: Scenario) -> Self {
        RunConfig {
            scenario,
            mode: Mode::Ideal,
            members: Member::ALL.to_vec(),
            shots: 10_000,
            replicas: 0,
            base_seed: 0,
            epsilon: DEFAULT_EPSILON,
            resampling: Resampling::ParametricBootstrap,
            ideal_zero_threshold: DEFAULT_IDEAL_ZERO_THRESHOLD,
            cond_limit: DEFAULT_COND_LIMIT,
            s_values: default_s_values(scenario),
            grid: None,
        }
    }

    pub fn simulated(scenario: Scenario, shots: u64, replicas: usize, base_seed: u64) -> Self {
        RunConfig {
            mode: Mode::Simulated,
            shots,
            replicas,
            base_seed,
            ..RunConfig::ideal(scenario)
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.members.is_empty() {
            return Err(ExperimentError::Config("no members requested".into()));
        }
        if self.mode == Mode::Simulated {
            if self.replicas == 0 {
                return Err(ExperimentError::Config("simulated mode needs replicas >= 1".into()));
            }
            if self.shots == 0 {
                return Err(ExperimentError::Config("simulated mode needs shots >= 1".into()));
            }
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(ExperimentError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.s_values.iter().any(|s| !s.is_finite()) {
            return Err(ExperimentError::Config("s values must be finite".into()));
        }
        if let Some(g) = &self.grid {
            if g.scenario != self.scenario {
                return Err(ExperimentError::Config(
                    "supplied grid was built for a different scenario".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One reconstructed replica of one channel at one grid time.
#[derive(Clone, Debug)]
pub struct CellEstimate {
    pub chi: ChiMatrix,
    pub transfer: TransferMatrix,
    /// process fidelity against the ideal channel
    pub fidelity: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct TimeCell {
    pub member: Member,
    pub time_idx: usize,
    pub ideal_chi: ChiMatrix,
    /// empty in ideal mode
    pub replicas: Vec<CellEstimate>,
}

#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub config: RunConfig,
    pub grid: TimeGrid,
    pub cells: Vec<TimeCell>,
}

impl ExperimentRun {
    pub fn cell(&self, member: Member, time_idx: usize) -> Result<&TimeCell, ExperimentError> {
        self.cells
            .iter()
            .find(|c| c.member == member && c.time_idx == time_idx)
            .ok_or_else(|| {
                ExperimentError::Config(format!(
                    "no cell for {} at time index {time_idx}",
                    member.label()
                ))
            })
    }
}

fn member_rank(member: Member) -> u64 {
    Member::ALL.iter().position(|m| *m == member).unwrap() as u64
}

/// Stream counter for one (member, time, replica) cell. Fixed field layout
/// keeps every cell's randomness independent of which members or times a
/// particular run requests.
fn stream_id(member: Member, time_idx: usize, replica: usize) -> u64 {
    (member_rank(member) << 56) | ((time_idx as u64) << 40) | replica as u64
}

fn reconstruct_replica(
    config: &RunConfig,
    t: f64,
    member: Member,
    time_idx: usize,
    ideal_chi: &ChiMatrix,
    replica: usize,
) -> Result<CellEstimate, ExperimentError> {
    let model = ChannelModel::new(config.scenario, member);
    let mix = pauli_mixing_of(model, t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.base_seed);
    rng.set_stream(stream_id(member, time_idx, replica));

    let probes = probe_states();
    let mut outputs = Vec::with_capacity(4);
    let mut tables = Vec::with_capacity(4);
    let mut converged = true;
    for probe in &probes {
        let counts = match config.resampling {
            Resampling::ParametricBootstrap => {
                let image = apply(&mix, probe);
                simulate_counts(&outcome_probabilities(&image), config.shots, &mut rng)
            }
            Resampling::PerShot => {
                simulate_counts_per_shot(&mix, probe, config.shots, &mut rng)
            }
        };
        let fit = mle_state(&counts, None)?;
        converged &= fit.converged;
        outputs.push(fit.estimate);
        tables.push(counts);
    }
    let outputs: [DensityMatrix; 4] = outputs.try_into().expect("four probes");
    let tables: [CountTable; 4] = tables.try_into().expect("four probes");
    let fit = process_tomography(&outputs, &tables)?;
    converged &= fit.converged;
    let fidelity = process_fidelity(&fit.estimate, ideal_chi)?;
    let transfer = transfer_of_chi(&fit.estimate);
    Ok(CellEstimate { chi: fit.estimate, transfer, fidelity, converged })
}

pub fn run(config: RunConfig) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    let grid = match &config.grid {
        Some(g) => g.clone(),
        None => default_grid(config.scenario, config.epsilon)?,
    };

    let mut cells = Vec::with_capacity(config.members.len() * grid.times.len());
    for &member in &config.members {
        let model = ChannelModel::new(config.scenario, member);
        for (time_idx, &t) in grid.times.iter().enumerate() {
            let mix = pauli_mixing_of(model, t)?;
            cells.push(TimeCell {
                member,
                time_idx,
                ideal_chi: chi_of(&mix),
                replicas: Vec::new(),
            });
        }
    }

    if config.mode == Mode::Simulated {
        let tasks: Vec<(usize, usize)> = (0..cells.len())
            .flat_map(|ci| (0..config.replicas).map(move |r| (ci, r)))
            .collect();
        let results: Result<Vec<CellEstimate>, ExperimentError> = tasks
            .par_iter()
            .map(|&(ci, replica)| {
                let cell = &cells[ci];
                let t = grid.times[cell.time_idx];
                reconstruct_replica(&config, t, cell.member, cell.time_idx, &cell.ideal_chi, replica)
            })
            .collect();
        for (&(ci, _), estimate) in tasks.iter().zip(results?) {
            cells[ci].replicas.push(estimate);
        }
    }

    Ok(ExperimentRun { config, grid, cells })
}

/// Summary of a sample with flagged entries counted, not interpolated away.
#[derive(Clone, Copy, Debug)]
pub struct LambdaPoint {
    pub s: f64,
    pub t: f64,
    pub member: Member,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub p05: f64,
    pub p95: f64,
    pub n_used: usize,
    pub n_flagged: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// (mean, median, std, p05, p95); std is the n-1 sample deviation.
fn sample_stats(vals: &mut Vec<f64>) -> (f64, f64, f64, f64, f64) {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let std = if vals.len() > 1 {
        (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, percentile(vals, 0.5), std, percentile(vals, 0.05), percentile(vals, 0.95))
}

fn nan_lambda_point(s: f64, t: f64, member: Member, n_flagged: usize) -> LambdaPoint {
    LambdaPoint {
        s,
        t,
        member,
        mean: f64::NAN,
        median: f64::NAN,
        std: f64::NAN,
        p05: f64::NAN,
        p95: f64::NAN,
        n_used: 0,
        n_flagged,
    }
}

/// Divisibility witness sweep: for every configured anchor s and every later
/// grid time t, the smallest Choi eigenvalue of the intermediate map. In
/// simulated mode the sample runs over all ordered replica pairs, and the
/// spread is reported against sqrt(replicas) effective draws.
pub fn lambda_points(
    run: &ExperimentRun,
    member: Member,
) -> Result<Vec<LambdaPoint>, ExperimentError> {
    let model = ChannelModel::new(run.config.scenario, member);
    let mut out = Vec::new();
    for &s in &run.config.s_values {
        let s_idx = run.grid.index_of(s).ok_or_else(|| {
            ExperimentError::Config(format!("s value {s} is not on the time grid"))
        })?;
        let s = run.grid.times[s_idx];
        for (t_idx, &t) in run.grid.times.iter().enumerate() {
            if t <= s + TIME_MATCH {
                continue;
            }
            let point = match run.config.mode {
                Mode::Ideal => {
                    let f_t = ideal_transfer(model, t)?;
                    let f_s = ideal_transfer(model, s)?;
                    match intermediate_map(&f_t, &f_s, s, t, run.config.cond_limit) {
                        Ok(v) if !v.ill_conditioned => {
                            let l = min_choi_eigenvalue(&v)?;
                            LambdaPoint {
                                s,
                                t,
                                member,
                                mean: l,
                                median: l,
                                std: 0.0,
                                p05: l,
                                p95: l,
                                n_used: 1,
                                n_flagged: 0,
                            }
                        }
                        Ok(_) => nan_lambda_point(s, t, member, 1),
                        Err(MarkovianityError::Linalg(LinalgError::Singular { .. })) => {
                            nan_lambda_point(s, t, member, 1)
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
                Mode::Simulated => {
                    let cell_s = run.cell(member, s_idx)?;
                    let cell_t = run.cell(member, t_idx)?;
                    let mut vals = Vec::with_capacity(
                        cell_s.replicas.len() * cell_t.replicas.len(),
                    );
                    let mut n_flagged = 0usize;
                    for rep_t in &cell_t.replicas {
                        for rep_s in &cell_s.replicas {
                            match intermediate_map(
                                &rep_t.transfer,
                                &rep_s.transfer,
                                s,
                                t,
                                run.config.cond_limit,
                            ) {
                                Ok(v) if !v.ill_conditioned => {
                                    match min_choi_eigenvalue(&v) {
                                        Ok(l) => vals.push(l),
                                        Err(_) => n_flagged += 1,
                                    }
                                }
                                _ => n_flagged += 1,
                            }
                        }
                    }
                    if vals.is_empty() {
                        nan_lambda_point(s, t, member, n_flagged)
                    } else {
                        let n_used = vals.len();
                        let (mean, median, std, p05, p95) = sample_stats(&mut vals);
                        LambdaPoint {
                            s,
                            t,
                            member,
                            mean,
                            median,
                            std,
                            p05,
                            p95,
                            n_used,
                            n_flagged,
                        }
                    }
                }
            };
            out.push(point);
        }
    }
    Ok(out)
}

fn mean_chi(replicas: &[CellEstimate]) -> Result<ChiMatrix, ExperimentError> {
    if replicas.is_empty() {
        return Err(ExperimentError::Config("no replicas to average".into()));
    }
    let mut acc = CMatrix::zeros(4);
    for rep in replicas {
        acc = &acc + rep.chi.matrix();
    }
    let mean = acc.scale(crate::linalg::cx(1.0 / replicas.len() as f64, 0.0));
    // a convex combination of CPTP chi matrices stays CPTP
    Ok(ChiMatrix::new(mean.herm_part())?)
}

fn flagged_gbar_point(t: f64) -> GbarPoint {
    GbarPoint { t, gbar: f64::NAN, std: None, sem: None, flagged: true }
}

/// gbar(t) over the grid's witness pairs. Points whose starting map is
/// singular for this member are emitted flagged. In simulated pairwise mode
/// the value is the mean over ordered replica pairs with sem against
/// sqrt(replicas); the averaged mode instead inverts the replica-averaged
/// reconstruction and borrows its error bar from the diagonal pairs.
pub fn gbar_series(
    run: &ExperimentRun,
    member: Member,
    mode: GbarMode,
) -> Result<Vec<GbarPoint>, ExperimentError> {
    let model = ChannelModel::new(run.config.scenario, member);
    let r = run.config.replicas.max(1) as f64;
    let mut out = Vec::with_capacity(run.grid.pairs.len());
    for pair in &run.grid.pairs {
        let s = run.grid.times[pair.start_idx];
        let t = run.grid.times[pair.end_idx];
        if pair.flagged.contains(&member) {
            out.push(flagged_gbar_point(s));
            continue;
        }
        match run.config.mode {
            Mode::Ideal => {
                let f_t = ideal_transfer(model, t)?;
                let f_s = ideal_transfer(model, s)?;
                let v = intermediate_map(&f_t, &f_s, s, t, run.config.cond_limit)?;
                if v.ill_conditioned {
                    out.push(flagged_gbar_point(s));
                    continue;
                }
                let g = rhp_g(&v)?;
                out.push(GbarPoint { t: s, gbar: gbar(g), std: None, sem: None, flagged: false });
            }
            Mode::Simulated => {
                let cell_s = run.cell(member, pair.start_idx)?;
                let cell_t = run.cell(member, pair.end_idx)?;
                let diag_or_all = |diagonal_only: bool| -> (Vec<f64>, usize) {
                    let mut vals = Vec::new();
                    let mut flagged = 0usize;
                    for (i, rep_t) in cell_t.replicas.iter().enumerate() {
                        for (j, rep_s) in cell_s.replicas.iter().enumerate() {
                            if diagonal_only && i != j {
                                continue;
                            }
                            match intermediate_map(
                                &rep_t.transfer,
                                &rep_s.transfer,
                                s,
                                t,
                                run.config.cond_limit,
                            ) {
                                Ok(v) if !v.ill_conditioned => match rhp_g(&v) {
                                    Ok(g) => vals.push(gbar(g)),
                                    Err(_) => flagged += 1,
                                },
                                _ => flagged += 1,
                            }
                        }
                    }
                    (vals, flagged)
                };
                match mode {
                    GbarMode::PairwiseReplicas => {
                        let (mut vals, _) = diag_or_all(false);
                        if vals.is_empty() {
                            out.push(flagged_gbar_point(s));
                        } else {
                            let (mean, _, std, _, _) = sample_stats(&mut vals);
                            out.push(GbarPoint {
                                t: s,
                                gbar: mean,
                                std: Some(std),
                                sem: Some(std / r.sqrt()),
                                flagged: false,
                            });
                        }
                    }
                    GbarMode::AveragedChi => {
                        let chi_s = mean_chi(&cell_s.replicas)?;
                        let chi_t = mean_chi(&cell_t.replicas)?;
                        let v = match intermediate_map(
                            &transfer_of_chi(&chi_t),
                            &transfer_of_chi(&chi_s),
                            s,
                            t,
                            run.config.cond_limit,
                        ) {
                            Ok(v) if !v.ill_conditioned => v,
                            _ => {
                                out.push(flagged_gbar_point(s));
                                continue;
                            }
                        };
                        let g = match rhp_g(&v) {
                            Ok(g) => g,
                            Err(_) => {
                                out.push(flagged_gbar_point(s));
                                continue;
                            }
                        };
                        let (mut diag, _) = diag_or_all(true);
                        let (std, sem) = if diag.len() > 1 {
                            let (_, _, std, _, _) = sample_stats(&mut diag);
                            (Some(std), Some(std / r.sqrt()))
                        } else {
                            (None, None)
                        };
                        out.push(GbarPoint { t: s, gbar: gbar(g), std, sem, flagged: false });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn bloch_of(m: &CMatrix) -> [f64; 3] {
    let mut r = [0.0; 3];
    for (k, slot) in r.iter_mut().enumerate() {
        *slot = (m * &pauli(k + 1)).trace().re;
    }
    r
}

fn distance_of_chi(chi: &ChiMatrix) -> f64 {
    let rh = bloch_of(&apply_chi(chi, DensityMatrix::h().matrix()));
    let rv = bloch_of(&apply_chi(chi, DensityMatrix::v().matrix()));
    0.5 * ((rh[0] - rv[0]).powi(2) + (rh[1] - rv[1]).powi(2) + (rh[2] - rv[2]).powi(2)).sqrt()
}

/// Trace distance of the evolved +z/-z pair at every grid time. Simulated
/// runs take the central value from the replica-averaged reconstruction and
/// the spread from per-replica distances.
pub fn trace_distance_series(
    run: &ExperimentRun,
    member: Member,
) -> Result<Vec<TraceDistancePoint>, ExperimentError> {
    let model = ChannelModel::new(run.config.scenario, member);
    let mut out = Vec::with_capacity(run.grid.times.len());
    for (time_idx, &t) in run.grid.times.iter().enumerate() {
        match run.config.mode {
            Mode::Ideal => {
                let mix = pauli_mixing_of(model, t)?;
                let d = blp_trace_distance(
                    &apply(&mix, &DensityMatrix::h()),
                    &apply(&mix, &DensityMatrix::v()),
                );
                out.push(TraceDistancePoint { t, d, std: None });
            }
            Mode::Simulated => {
                let cell = run.cell(member, time_idx)?;
                let mut per_replica: Vec<f64> =
                    cell.replicas.iter().map(|rep| distance_of_chi(&rep.chi)).collect();
                let d = distance_of_chi(&mean_chi(&cell.replicas)?);
                let std = if per_replica.len() > 1 {
                    let (_, _, std, _, _) = sample_stats(&mut per_replica);
                    Some(std)
                } else {
                    None
                };
                out.push(TraceDistancePoint { t, d, std });
            }
        }
    }
    Ok(out)
}

/// Normalized divisibility measure for one member: ideal series use the
/// configured fixed support cutoff, replica series their own per-point sem.
pub fn rhp_of(
    run: &ExperimentRun,
    member: Member,
    mode: GbarMode,
) -> Result<RhpMeasure, ExperimentError> {
    let series = gbar_series(run, member, mode)?;
    let threshold = match run.config.mode {
        Mode::Ideal => ZeroThreshold::Fixed(run.config.ideal_zero_threshold),
        Mode::Simulated => ZeroThreshold::PerPointSem,
    };
    Ok(rhp_measure(&series, threshold)?)
}

/// Information backflow measure for one member over the grid.
pub fn blp_of(run: &ExperimentRun, member: Member) -> Result<f64, ExperimentError> {
    let series = trace_distance_series(run, member)?;
    Ok(blp_measure(&series)?)
}

#[derive(Clone, Copy, Debug)]
pub struct FidelityPoint {
    pub t: f64,
    pub mean: f64,
    pub min: f64,
    pub n_replicas: usize,
    pub n_converged: usize,
}

/// Reconstruction quality per grid time; empty in ideal mode.
pub fn fidelity_summary(
    run: &ExperimentRun,
    member: Member,
) -> Result<Vec<FidelityPoint>, ExperimentError> {
    if run.config.mode == Mode::Ideal {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(run.grid.times.len());
    for (time_idx, &t) in run.grid.times.iter().enumerate() {
        let cell = run.cell(member, time_idx)?;
        let n = cell.replicas.len();
        let mean = cell.replicas.iter().map(|r| r.fidelity).sum::<f64>() / n as f64;
        let min = cell.replicas.iter().map(|r| r.fidelity).fold(f64::INFINITY, f64::min);
        let n_converged = cell.replicas.iter().filter(|r| r.converged).count();
        out.push(FidelityPoint { t, mean, min, n_replicas: n, n_converged });
    }
    Ok(out)
}

/// Column labels for the mixing-probability table of a scenario.
pub fn probability_columns(scenario: Scenario) -> &'static [&'static str] {
    match scenario {
        Scenario::CaseA => &["t", "p_total"],
        Scenario::CaseB => &["t", "p1", "p2", "p_total", "weighted_sum"],
    }
}

/// Values matching `probability_columns` minus the leading time column.
pub fn probability_values(scenario: Scenario, t: f64) -> Result<Vec<f64>, ExperimentError> {
    match scenario {
        Scenario::CaseA => {
            let p = probability(ChannelModel::new(scenario, Member::Total), t)?;
            Ok(vec![p])
        }
        Scenario::CaseB => {
            let p1 = probability(ChannelModel::new(scenario, Member::Ch1), t)?;
            let p2 = probability(ChannelModel::new(scenario, Member::Ch2), t)?;
            let p = probability(ChannelModel::new(scenario, Member::Total), t)?;
            let w = mixture_weights(scenario);
            Ok(vec![p1, p2, p, w[0] * p1 + w[1] * p2])
        }
    }
}
