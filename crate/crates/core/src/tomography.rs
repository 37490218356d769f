//! State and process estimation from photon-counting statistics.
//!
//! The measurement model is six projective settings per state (both
//! eigenstates of each Pauli axis), each collected for a fixed nominal shot
//! number with Poisson-distributed totals. States are estimated by linear
//! inversion followed by a likelihood refinement over a triangular
//! factorization, which keeps every iterate positive and unit trace. A
//! process is estimated from the images of four probe states, assembled into
//! a transfer matrix, converted to chi, projected onto the physical set and
//! refined against all 24 count cells at once.

use crate::channels::{
    chi_of_choi, choi_of_transfer, pauli, ChannelError, ChiMatrix, DensityMatrix, PauliMixing,
    TransferMatrix,
};
use crate::linalg::{cx, herm_eig, psd_sqrt, CMatrix, EigDecomposition, LinalgError, TOL};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Probe inputs for process estimation, in the order the transfer assembly
/// expects: +z, -z, +x, +y.
pub fn probe_states() -> [DensityMatrix; 4] {
    [
        DensityMatrix::h(),
        DensityMatrix::v(),
        DensityMatrix::plus(),
        DensityMatrix::plus_y(),
    ]
}

pub const PROBE_LABELS: [&str; 4] = ["h", "v", "plus", "plus_y"];

/// Detection settings in fixed order: +z, -z, +x, -x, +y, -y.
pub const PROJECTOR_LABELS: [&str; 6] = ["h", "v", "d", "a", "r", "l"];

const PROJECTOR_AXES: [[f64; 3]; 6] = [
    [0.0, 0.0, 1.0],
    [0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0],
    [-1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
];

/// Projector for detection setting k, (I + n.sigma)/2.
pub fn projector(k: usize) -> CMatrix {
    let n = PROJECTOR_AXES[k];
    let mut m = CMatrix::identity(2);
    for (axis, w) in n.iter().enumerate() {
        if *w != 0.0 {
            m = &m + &pauli(axis + 1).scale(cx(*w, 0.0));
        }
    }
    m.scale(cx(0.5, 0.0))
}

#[derive(Clone, Copy, Debug)]
pub struct OutcomeProbabilities {
    pub p: [f64; 6],
}

pub fn outcome_probabilities(rho: &DensityMatrix) -> OutcomeProbabilities {
    let mut p = [0.0; 6];
    for (k, slot) in p.iter_mut().enumerate() {
        *slot = (&projector(k) * rho.matrix()).trace().re.clamp(0.0, 1.0);
    }
    OutcomeProbabilities { p }
}

/// Raw per-setting totals. Counts are kept as f64 so exact expectations
/// (noise-free runs) can carry fractional values; sampled counts are whole.
#[derive(Clone, Copy, Debug)]
pub struct CountTable {
    pub counts: [f64; 6],
    pub shots_per_projector: u64,
}

impl CountTable {
    /// Exact expected counts, the noise-free limit of the samplers.
    pub fn expected(probs: &OutcomeProbabilities, shots: u64) -> CountTable {
        let mut counts = [0.0; 6];
        for k in 0..6 {
            counts[k] = shots as f64 * probs.p[k];
        }
        CountTable { counts, shots_per_projector: shots }
    }

    pub fn validate(&self) -> Result<(), TomographyError> {
        if self.shots_per_projector == 0 {
            return Err(TomographyError::InvalidCounts("zero shots per setting".into()));
        }
        for (k, c) in self.counts.iter().enumerate() {
            if !c.is_finite() || *c < 0.0 {
                return Err(TomographyError::InvalidCounts(format!(
                    "count[{k}] = {c} is not a finite nonnegative number"
                )));
            }
        }
        Ok(())
    }
}

/// Below this rate a draw is zero to f64 accuracy (P(k >= 1) <= 1e-12), and
/// the library sampler cannot be trusted anyway: exp(-lambda) rounds to 1
/// and its small-rate loop underflows to -1.
const POISSON_RATE_FLOOR: f64 = 1e-12;

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> f64 {
    if lambda > POISSON_RATE_FLOOR {
        Poisson::new(lambda).expect("positive finite rate").sample(rng)
    } else {
        0.0
    }
}

/// Poisson totals around the exact expectations, the probability-level
/// resampling path.
pub fn simulate_counts<R: Rng + ?Sized>(
    probs: &OutcomeProbabilities,
    shots: u64,
    rng: &mut R,
) -> CountTable {
    let mut counts = [0.0; 6];
    for k in 0..6 {
        counts[k] = poisson_draw(shots as f64 * probs.p[k], rng);
    }
    CountTable { counts, shots_per_projector: shots }
}

/// Draw which mixture branch acts on a single shot.
pub fn sample_shot_channel<R: Rng + ?Sized>(mix: &PauliMixing, rng: &mut R) -> usize {
    let q = mix.q();
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (i, qi) in q.iter().enumerate() {
        cum += qi;
        if u < cum {
            return i;
        }
    }
    3
}

/// Shot-level resampling: a Poisson number of input shots per setting, each
/// routed through one sampled mixture branch and detected as a Bernoulli
/// click. Marginally identical to `simulate_counts` by Poisson thinning.
pub fn simulate_counts_per_shot<R: Rng + ?Sized>(
    mix: &PauliMixing,
    probe: &DensityMatrix,
    shots: u64,
    rng: &mut R,
) -> CountTable {
    // click probability per branch and setting
    let mut p_branch = [[0.0f64; 6]; 4];
    for (i, row) in p_branch.iter_mut().enumerate() {
        let rotated = &(&pauli(i) * probe.matrix()) * &pauli(i);
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = (&projector(k) * &rotated).trace().re.clamp(0.0, 1.0);
        }
    }
    let mut counts = [0.0; 6];
    for (k, slot) in counts.iter_mut().enumerate() {
        let n_events = poisson_draw(shots as f64, rng) as u64;
        let mut clicks = 0u64;
        for _ in 0..n_events {
            let branch = sample_shot_channel(mix, rng);
            if rng.gen::<f64>() < p_branch[branch][k] {
                clicks += 1;
            }
        }
        *slot = clicks as f64;
    }
    CountTable { counts, shots_per_projector: shots }
}

/// Clip negative eigenvalues and renormalize the trace to one.
fn project_psd_unit_trace(op: &CMatrix) -> Result<CMatrix, TomographyError> {
    let eig = herm_eig(&op.herm_part(), TOL.hermiticity)?;
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(TomographyError::InvalidCounts(
            "projection collapsed to the zero matrix".into(),
        ));
    }
    let scaled: Vec<f64> = clipped.iter().map(|l| l / total).collect();
    let dec = EigDecomposition { eigenvalues: scaled, eigenvectors: eig.eigenvectors };
    Ok(dec.reassemble())
}

/// Bloch components straight from count ratios, projected back to the
/// physical set when sampling noise pushes the raw point outside it.
pub fn linear_inversion_state(counts: &CountTable) -> Result<DensityMatrix, TomographyError> {
    counts.validate()?;
    let axis = |plus: f64, minus: f64, name: &str| -> Result<f64, TomographyError> {
        let total = plus + minus;
        if total <= 0.0 {
            return Err(TomographyError::InvalidCounts(format!(
                "no counts recorded on the {name} axis"
            )));
        }
        Ok((plus - minus) / total)
    };
    let z = axis(counts.counts[0], counts.counts[1], "z")?;
    let x = axis(counts.counts[2], counts.counts[3], "x")?;
    let y = axis(counts.counts[4], counts.counts[5], "y")?;
    let mut raw = CMatrix::identity(2);
    for (axis_idx, r) in [x, y, z].iter().enumerate() {
        raw = &raw + &pauli(axis_idx + 1).scale(cx(*r, 0.0));
    }
    let projected = project_psd_unit_trace(&raw.scale(cx(0.5, 0.0)))?;
    Ok(DensityMatrix::new(projected)?)
}

/// Estimator output plus the optimizer diagnostics callers aggregate.
#[derive(Clone, Debug)]
pub struct ReconstructionResult<T> {
    pub estimate: T,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Cholesky factor of a PSD matrix: lower L with L L^H = herm(a). A pivot at
/// or below the rounding floor means the whole column vanishes for a PSD
/// input, so rank-deficient matrices (routine after eigenvalue clipping)
/// factor exactly instead of picking up a regularization offset.
fn chol_psd(a: &CMatrix) -> CMatrix {
    let dim = a.dim();
    let h = a.herm_part();
    let tiny = 1e-15 * h.max_norm().max(1e-300);
    let mut l = CMatrix::zeros(dim);
    for j in 0..dim {
        let mut d = h[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= tiny {
            continue;
        }
        l[(j, j)] = cx(d.sqrt(), 0.0);
        for i in (j + 1)..dim {
            let mut v = h[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / l[(j, j)];
        }
    }
    l
}

/// Optimizer coordinates of a lower-triangular factor: real diagonal first,
/// then the strictly lower entries row-major as (re, im) pairs.
fn params_of_lower(l: &CMatrix) -> Vec<f64> {
    let dim = l.dim();
    let mut p = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        p.push(l[(i, i)].re);
    }
    for i in 0..dim {
        for j in 0..i {
            p.push(l[(i, j)].re);
            p.push(l[(i, j)].im);
        }
    }
    p
}

fn lower_of_params(dim: usize, p: &[f64]) -> CMatrix {
    debug_assert_eq!(p.len(), dim * dim);
    let mut l = CMatrix::zeros(dim);
    for i in 0..dim {
        l[(i, i)] = cx(p[i], 0.0);
    }
    let mut k = dim;
    for i in 0..dim {
        for j in 0..i {
            l[(i, j)] = cx(p[k], p[k + 1]);
            k += 2;
        }
    }
    l
}

/// L L^H normalized to unit trace; None when the factor has collapsed.
fn unit_trace_of_params(dim: usize, p: &[f64]) -> Option<CMatrix> {
    let l = lower_of_params(dim, p);
    let m = &l * &l.adjoint();
    let tr = m.trace().re;
    if !tr.is_finite() || tr <= 1e-300 {
        return None;
    }
    Some(m.scale(cx(1.0 / tr, 0.0)))
}

/// Poisson log-likelihood with the saturated model subtracted off, so the
/// optimum sits near zero instead of minus millions of counts. Keeping the
/// objective small preserves the significance of sub-1e-9 improvements that
/// the raw form would round away.
fn centered_poisson_ll(count: f64, rate: f64) -> f64 {
    if count > 0.0 {
        if rate <= 0.0 {
            return f64::NEG_INFINITY;
        }
        count * (rate / count).ln() + count - rate
    } else {
        -rate
    }
}

/// Uncentered Poisson log-likelihood without factorial terms, for reporting.
fn reported_poisson_ll(count: f64, rate: f64) -> f64 {
    count * rate.max(1e-300).ln() - rate
}

fn state_probability(rho: &CMatrix, k: usize) -> f64 {
    (&projector(k) * rho).trace().re.max(0.0)
}

fn centered_ll_state(counts: &CountTable, rho: &CMatrix) -> f64 {
    let shots = counts.shots_per_projector as f64;
    (0..6)
        .map(|k| centered_poisson_ll(counts.counts[k], shots * state_probability(rho, k)))
        .sum()
}

fn reported_ll_state(counts: &CountTable, rho: &CMatrix) -> f64 {
    let shots = counts.shots_per_projector as f64;
    (0..6)
        .map(|k| reported_poisson_ll(counts.counts[k], shots * state_probability(rho, k)))
        .sum()
}

mod simplex {
    //! Derivative-free simplex minimizer with a tie threshold: a candidate
    //! replaces a vertex only when it wins by more than `tie_eps`, so
    //! rounding noise around an exact optimum cannot walk the best vertex
    //! away from it.

    pub struct Options {
        pub max_iters: usize,
        /// extra rounds restarted from the incumbent with a tenth of the step
        pub restarts: usize,
        pub param_tol: f64,
        pub fn_tol: f64,
        pub initial_step: f64,
        pub tie_eps: f64,
    }

    impl Default for Options {
        fn default() -> Self {
            Options {
                max_iters: 20_000,
                restarts: 1,
                param_tol: 1e-9,
                fn_tol: 1e-10,
                initial_step: 0.1,
                tie_eps: 1e-12,
            }
        }
    }

    pub struct Outcome {
        pub x: Vec<f64>,
        pub fx: f64,
        pub iterations: usize,
        pub converged: bool,
    }

    fn eval(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64]) -> f64 {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    pub fn minimize(
        f: &mut dyn FnMut(&[f64]) -> f64,
        x0: &[f64],
        opts: &Options,
    ) -> Outcome {
        let mut best = x0.to_vec();
        let mut best_f = eval(f, &best);
        let mut used = 0;
        let mut converged = false;
        for round in 0..=opts.restarts {
            if used >= opts.max_iters {
                break;
            }
            let step = opts.initial_step * 0.1f64.powi(round as i32);
            let out = run(f, &best, best_f, step, opts, opts.max_iters - used);
            used += out.iterations;
            best = out.x;
            best_f = out.fx;
            converged = out.converged;
        }
        Outcome { x: best, fx: best_f, iterations: used, converged }
    }

    fn run(
        f: &mut dyn FnMut(&[f64]) -> f64,
        x0: &[f64],
        f0: f64,
        step: f64,
        opts: &Options,
        iter_budget: usize,
    ) -> Outcome {
        let n = x0.len();
        let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut fvals: Vec<f64> = Vec::with_capacity(n + 1);
        verts.push(x0.to_vec());
        fvals.push(f0);
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] += step * v[i].abs().max(0.25);
            fvals.push(eval(f, &v));
            verts.push(v);
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < iter_budget {
            iterations += 1;
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| fvals[a].partial_cmp(&fvals[b]).unwrap());
            let ib = order[0];
            let isw = order[n - 1];
            let iw = order[n];

            let f_spread = fvals[iw] - fvals[ib];
            let x_spread = verts
                .iter()
                .flat_map(|v| v.iter().zip(&verts[ib]).map(|(a, b)| (a - b).abs()))
                .fold(0.0f64, f64::max);
            if f_spread <= opts.fn_tol || x_spread <= opts.param_tol {
                converged = true;
                break;
            }

            let mut centroid = vec![0.0; n];
            for (idx, v) in verts.iter().enumerate() {
                if idx == iw {
                    continue;
                }
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x;
                }
            }
            for c in centroid.iter_mut() {
                *c /= n as f64;
            }

            let blend = |a: f64, v: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(v)
                    .map(|(c, x)| c + a * (c - x))
                    .collect()
            };
            let xr = blend(1.0, &verts[iw]);
            let fr = eval(f, &xr);

            if fr < fvals[ib] - opts.tie_eps {
                let xe = blend(2.0, &verts[iw]);
                let fe = eval(f, &xe);
                if fe < fr - opts.tie_eps {
                    verts[iw] = xe;
                    fvals[iw] = fe;
                } else {
                    verts[iw] = xr;
                    fvals[iw] = fr;
                }
                continue;
            }
            if fr < fvals[isw] - opts.tie_eps {
                verts[iw] = xr;
                fvals[iw] = fr;
                continue;
            }
            let (xc, fc) = if fr < fvals[iw] - opts.tie_eps {
                let xc = blend(0.5, &verts[iw]);
                let fc = eval(f, &xc);
                (xc, fc)
            } else {
                let xc: Vec<f64> = centroid
                    .iter()
                    .zip(&verts[iw])
                    .map(|(c, x)| 0.5 * (c + x))
                    .collect();
                let fc = eval(f, &xc);
                (xc, fc)
            };
            if fc < fvals[iw].min(fr) - opts.tie_eps {
                verts[iw] = xc;
                fvals[iw] = fc;
                continue;
            }
            // shrink toward the incumbent
            let anchor = verts[ib].clone();
            for idx in 0..=n {
                if idx == ib {
                    continue;
                }
                for (x, a) in verts[idx].iter_mut().zip(&anchor) {
                    *x = a + 0.5 * (*x - a);
                }
                fvals[idx] = eval(f, &verts[idx]);
            }
        }

        let mut ib = 0;
        for i in 1..=n {
            if fvals[i] < fvals[ib] {
                ib = i;
            }
        }
        Outcome { x: verts.swap_remove(ib), fx: fvals[ib], iterations, converged }
    }
}

pub use simplex::{Options as SimplexOptions, Outcome as SimplexOutcome};

/// Expose the minimizer for reuse and for direct testing.
pub fn minimize_simplex(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexOutcome {
    simplex::minimize(f, x0, opts)
}

/// Absolute rounding floor of the centered log-likelihood, per recorded
/// count. Gains smaller than this are f64 noise, not signal: accepting them
/// lets the optimizer drift away from an exactly optimal starting point.
const LL_FLOOR_PER_COUNT: f64 = 1e-14;

fn genuine_refinement(f_start: f64, f_end: f64, total_counts: f64) -> bool {
    f_start - f_end > total_counts.max(1.0) * LL_FLOOR_PER_COUNT
}

/// Maximum-likelihood state estimate. Starts from `init` or from linear
/// inversion; an exhausted iteration budget is reported through `converged`,
/// not as an error.
pub fn mle_state(
    counts: &CountTable,
    init: Option<&DensityMatrix>,
) -> Result<ReconstructionResult<DensityMatrix>, TomographyError> {
    counts.validate()?;
    let start = match init {
        Some(r) => r.clone(),
        None => linear_inversion_state(counts)?,
    };
    let p0 = params_of_lower(&chol_psd(start.matrix()));
    let mut objective = |p: &[f64]| -> f64 {
        match unit_trace_of_params(2, p) {
            Some(m) => -centered_ll_state(counts, &m),
            None => f64::INFINITY,
        }
    };
    let f0 = objective(&p0);
    let out = simplex::minimize(&mut objective, &p0, &SimplexOptions::default());
    let total: f64 = counts.counts.iter().sum();
    let (estimate, converged) = if genuine_refinement(f0, out.fx, total) {
        let m = unit_trace_of_params(2, &out.x).ok_or_else(|| {
            TomographyError::InvalidCounts("optimizer collapsed the factor".into())
        })?;
        (DensityMatrix::new(m.herm_part())?, out.converged)
    } else {
        (start, true)
    };
    let log_likelihood = reported_ll_state(counts, estimate.matrix());
    Ok(ReconstructionResult {
        estimate,
        log_likelihood,
        iterations: out.iterations,
        converged,
    })
}

/// Transfer matrix from the images of the four probes (+z, -z, +x, +y).
/// Off-diagonal basis images follow from linearity:
///   L(|0><1|) = L(rho_x) + i L(rho_y) - (1+i)/2 (L(rho_z+) + L(rho_z-))
/// and its adjoint, since the estimated images are Hermitian.
pub fn assemble_transfer(outputs: &[DensityMatrix; 4]) -> TransferMatrix {
    let lh = outputs[0].matrix();
    let lv = outputs[1].matrix();
    let lx = outputs[2].matrix();
    let ly = outputs[3].matrix();
    let sum_hv = lh + lv;
    let g1 = &(lx + &ly.scale(cx(0.0, 1.0))) - &sum_hv.scale(cx(0.5, 0.5));
    let g2 = g1.adjoint();
    let images = [lh.clone(), g1, g2, lv.clone()];
    let mut f = CMatrix::zeros(4);
    for (beta, image) in images.iter().enumerate() {
        for alpha in 0..4 {
            f[(alpha, beta)] = image[(alpha / 2, alpha % 2)];
        }
    }
    TransferMatrix::new(f).expect("assembled from finite estimates")
}

/// tr(Pi_j sigma_m rho_k sigma_n) for probe k, setting j: the linear form
/// mapping chi to every modeled count rate. Built once.
fn basis_tensor() -> &'static [Complex64] {
    static TENSOR: OnceLock<Vec<Complex64>> = OnceLock::new();
    TENSOR.get_or_init(|| {
        let probes = probe_states();
        let mut tensor = vec![cx(0.0, 0.0); 4 * 6 * 16];
        for (k, probe) in probes.iter().enumerate() {
            for j in 0..6 {
                let pi = projector(j);
                for m in 0..4 {
                    for n in 0..4 {
                        let op = &(&pauli(m) * probe.matrix()) * &pauli(n);
                        tensor[((k * 6 + j) * 4 + m) * 4 + n] = (&pi * &op).trace();
                    }
                }
            }
        }
        tensor
    })
}

fn process_probability(chi: &CMatrix, k: usize, j: usize) -> f64 {
    let tensor = basis_tensor();
    let base = (k * 6 + j) * 16;
    let mut acc = cx(0.0, 0.0);
    for m in 0..4 {
        for n in 0..4 {
            acc += chi[(m, n)] * tensor[base + m * 4 + n];
        }
    }
    acc.re.max(0.0)
}

fn centered_ll_process(counts: &[CountTable; 4], chi: &CMatrix) -> f64 {
    let mut ll = 0.0;
    for (k, table) in counts.iter().enumerate() {
        let shots = table.shots_per_projector as f64;
        for j in 0..6 {
            ll += centered_poisson_ll(table.counts[j], shots * process_probability(chi, k, j));
        }
    }
    ll
}

fn reported_ll_process(counts: &[CountTable; 4], chi: &CMatrix) -> f64 {
    let mut ll = 0.0;
    for (k, table) in counts.iter().enumerate() {
        let shots = table.shots_per_projector as f64;
        for j in 0..6 {
            ll += reported_poisson_ll(table.counts[j], shots * process_probability(chi, k, j));
        }
    }
    ll
}

/// Process estimate from per-probe output states plus the raw counts they
/// were fit to. Assembly gives the linear-inversion chi; the likelihood
/// refinement then reconciles all 24 cells under the CPTP constraint.
pub fn process_tomography(
    outputs: &[DensityMatrix; 4],
    counts: &[CountTable; 4],
) -> Result<ReconstructionResult<ChiMatrix>, TomographyError> {
    for table in counts {
        table.validate()?;
    }
    let f = assemble_transfer(outputs);
    let chi_lin = chi_of_choi(&choi_of_transfer(&f))?;
    let chi0 = project_psd_unit_trace(chi_lin.matrix())?;
    let p0 = params_of_lower(&chol_psd(&chi0));
    let mut objective = |p: &[f64]| -> f64 {
        match unit_trace_of_params(4, p) {
            Some(m) => -centered_ll_process(counts, &m),
            None => f64::INFINITY,
        }
    };
    let f0 = objective(&p0);
    let out = simplex::minimize(&mut objective, &p0, &SimplexOptions::default());
    let total: f64 = counts.iter().flat_map(|t| t.counts.iter()).sum();
    let (estimate, converged) = if genuine_refinement(f0, out.fx, total) {
        let m = unit_trace_of_params(4, &out.x).ok_or_else(|| {
            TomographyError::InvalidCounts("optimizer collapsed the factor".into())
        })?;
        (ChiMatrix::new(m.herm_part())?, out.converged)
    } else {
        (ChiMatrix::new(chi0)?, true)
    };
    let log_likelihood = reported_ll_process(counts, estimate.matrix());
    Ok(ReconstructionResult {
        estimate,
        log_likelihood,
        iterations: out.iterations,
        converged,
    })
}

fn fidelity_of(a: &CMatrix, b: &CMatrix) -> Result<f64, TomographyError> {
    let tr_a = a.trace().re;
    let tr_b = b.trace().re;
    if !(tr_a > 0.0 && tr_b > 0.0) {
        return Err(TomographyError::InvalidCounts("fidelity of a traceless operand".into()));
    }
    let sa = psd_sqrt(&a.herm_part())?;
    let inner = &(&sa * &b.herm_part()) * &sa;
    let eig = herm_eig(&inner.herm_part(), TOL.hermiticity)?;
    let s: f64 = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    Ok(s * s / (tr_a * tr_b))
}

pub fn state_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64, TomographyError> {
    fidelity_of(a.matrix(), b.matrix())
}

pub fn process_fidelity(a: &ChiMatrix, b: &ChiMatrix) -> Result<f64, TomographyError> {
    fidelity_of(a.matrix(), b.matrix())
}
