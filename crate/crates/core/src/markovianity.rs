//! Memory diagnostics for time-parameterized channels.
//!
//! Two complementary criteria are implemented. The divisibility route builds
//! the intermediate map V(t, s) = F(t) F(s)^-1 and inspects its Choi matrix:
//! a negative eigenvalue means the step from s to t is not completely
//! positive. The distinguishability route watches the trace distance of a
//! fixed state pair; any increase in time signals information flowing back.

use crate::channels::{
    chi_of, choi_of_transfer, pauli_mixing_of, transfer_of_chi, ChannelError, ChannelModel,
    ChoiMatrix, DensityMatrix, TransferMatrix,
};
use crate::linalg::{herm_eig, inverse, trace_norm, LinalgError};
use thiserror::Error;

/// Hermitian-defect gate for Choi matrices assembled from reconstructed
/// transfer products. Inversion noise scales with the condition number, so
/// this is looser than the kernel default; anything worse is a real error.
const CHOI_HERM_GATE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MarkovianityError {
    #[error("series needs at least two usable points, got {0}")]
    EmptyPair(usize),
    #[error("series times must strictly increase: t[{index}] = {t} follows {prev}")]
    UnsortedSeries { index: usize, t: f64, prev: f64 },
    #[error("intermediate map needs t > s, got s = {s}, t = {t}")]
    BadInterval { s: f64, t: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Intermediate map V(t, s) = F(t) F(s)^-1 in the unit-matrix basis.
///
/// `condition` estimates the conditioning of the F(s) inversion;
/// `ill_conditioned` marks results past the caller's limit, which are still
/// returned but should be excluded from aggregate measures.
#[derive(Clone, Debug)]
pub struct IntermediateMap {
    pub s: f64,
    pub t: f64,
    pub transfer: TransferMatrix,
    pub condition: f64,
    pub ill_conditioned: bool,
}

pub fn intermediate_map(
    f_t: &TransferMatrix,
    f_s: &TransferMatrix,
    s: f64,
    t: f64,
    cond_limit: f64,
) -> Result<IntermediateMap, MarkovianityError> {
    if !(t > s) {
        return Err(MarkovianityError::BadInterval { s, t });
    }
    let inv = inverse(f_s.matrix())?;
    let v = f_t.matrix() * &inv.inverse;
    Ok(IntermediateMap {
        s,
        t,
        transfer: TransferMatrix::new(v)?,
        condition: inv.condition,
        ill_conditioned: inv.condition > cond_limit,
    })
}

/// Choi matrix of the intermediate map.
pub fn intermediate_choi(v: &IntermediateMap) -> Result<ChoiMatrix, MarkovianityError> {
    let w = choi_of_transfer(&v.transfer);
    let defect = w.matrix().herm_defect();
    if defect > CHOI_HERM_GATE {
        return Err(MarkovianityError::Linalg(LinalgError::NonHermitian {
            defect,
            tol: CHOI_HERM_GATE,
        }));
    }
    Ok(w)
}

/// Smallest Choi eigenvalue of the intermediate map; negative values witness
/// a non-CP step.
pub fn min_choi_eigenvalue(v: &IntermediateMap) -> Result<f64, MarkovianityError> {
    let w = intermediate_choi(v)?;
    let eig = herm_eig(&w.matrix().herm_part(), CHOI_HERM_GATE)?;
    Ok(eig.eigenvalues[0])
}

/// Finite-difference divisibility rate g = (||W(t+eps, t)||_1 - 1) / eps for
/// the step map carried by `v` (eps = v.t - v.s). Clamped at zero: the trace
/// norm of a unit-trace Choi matrix cannot drop below one, only rounding can.
pub fn rhp_g(v: &IntermediateMap) -> Result<f64, MarkovianityError> {
    let w = intermediate_choi(v)?;
    let tn = trace_norm(&w.matrix().herm_part())?;
    let eps = v.t - v.s;
    Ok(((tn - 1.0) / eps).max(0.0))
}

/// Bounded witness fed to the measure integrals.
pub fn gbar(g: f64) -> f64 {
    g.max(0.0).tanh()
}

/// One point of a gbar(t) series.
#[derive(Clone, Copy, Debug)]
pub struct GbarPoint {
    pub t: f64,
    pub gbar: f64,
    /// spread across replica pairs, when replicas exist
    pub std: Option<f64>,
    /// standard error of the mean across replicas
    pub sem: Option<f64>,
    /// excluded from measure integrals (singular or ill-conditioned origin)
    pub flagged: bool,
}

/// One point of a trace-distance series D(t).
#[derive(Clone, Copy, Debug)]
pub struct TraceDistancePoint {
    pub t: f64,
    pub d: f64,
    pub std: Option<f64>,
}

/// Cutoff deciding which gbar values count as genuinely nonzero in the
/// support integral.
#[derive(Clone, Copy, Debug)]
pub enum ZeroThreshold {
    Fixed(f64),
    /// one standard error of the point's own estimate
    PerPointSem,
}

#[derive(Clone, Copy, Debug)]
pub struct RhpMeasure {
    pub value: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// flagged points dropped before integrating
    pub excluded: usize,
}

/// Normalized divisibility measure: the trapezoidal integral of gbar divided
/// by the trapezoidal integral of its support indicator, 0/0 read as 0.
pub fn rhp_measure(
    series: &[GbarPoint],
    threshold: ZeroThreshold,
) -> Result<RhpMeasure, MarkovianityError> {
    let usable: Vec<&GbarPoint> = series.iter().filter(|p| !p.flagged).collect();
    let excluded = series.len() - usable.len();
    if usable.len() < 2 {
        return Err(MarkovianityError::EmptyPair(usable.len()));
    }
    for (i, win) in usable.windows(2).enumerate() {
        if win[1].t <= win[0].t {
            return Err(MarkovianityError::UnsortedSeries {
                index: i + 1,
                t: win[1].t,
                prev: win[0].t,
            });
        }
    }
    let zeta = |p: &GbarPoint| -> f64 {
        let cut = match threshold {
            ZeroThreshold::Fixed(v) => v,
            ZeroThreshold::PerPointSem => p.sem.unwrap_or(0.0),
        };
        if p.gbar > cut {
            1.0
        } else {
            0.0
        }
    };
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    for win in usable.windows(2) {
        let dt = win[1].t - win[0].t;
        numerator += 0.5 * dt * (win[0].gbar + win[1].gbar);
        denominator += 0.5 * dt * (zeta(win[0]) + zeta(win[1]));
    }
    let value = if denominator > 0.0 { numerator / denominator } else { 0.0 };
    Ok(RhpMeasure { value, numerator, denominator, excluded })
}

/// Trace distance of two qubit states: half the Euclidean distance of their
/// Bloch vectors, which for qubits equals (1/2)||rho1 - rho2||_1.
pub fn blp_trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> f64 {
    let a = r1.bloch();
    let b = r2.bloch();
    0.5 * ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Information backflow: the positive variation of D(t) over the series.
pub fn blp_measure(series: &[TraceDistancePoint]) -> Result<f64, MarkovianityError> {
    if series.len() < 2 {
        return Err(MarkovianityError::EmptyPair(series.len()));
    }
    for (i, win) in series.windows(2).enumerate() {
        if win[1].t <= win[0].t {
            return Err(MarkovianityError::UnsortedSeries {
                index: i + 1,
                t: win[1].t,
                prev: win[0].t,
            });
        }
    }
    Ok(series.windows(2).map(|w| (w[1].d - w[0].d).max(0.0)).sum())
}

/// Ideal transfer matrix of a model at time t, the common entry point for
/// analytic series.
pub fn ideal_transfer(model: ChannelModel, t: f64) -> Result<TransferMatrix, MarkovianityError> {
    Ok(transfer_of_chi(&chi_of(&pauli_mixing_of(model, t)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{apply, Member, Scenario};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn model(scenario: Scenario, member: Member) -> ChannelModel {
        ChannelModel::new(scenario, member)
    }

    fn ideal_intermediate(
        m: ChannelModel,
        s: f64,
        t: f64,
    ) -> Result<IntermediateMap, MarkovianityError> {
        intermediate_map(&ideal_transfer(m, t)?, &ideal_transfer(m, s)?, s, t, 1e8)
    }

    #[test]
    fn case_a_total_witness_matches_spectral_oracle() {
        // transfer eigenvalues of the (s, t) step are (1, a, a, b); the Choi
        // spectrum follows from the even-sign combinations (1 +- a +- a +- b)/4
        let (s, t) = (1.0f64, 1.5f64);
        let a = (1.0 + (-t).exp()) / (1.0 + (-s).exp());
        let b = (-(t - s)).exp();
        let oracle = [
            0.25 * (1.0 + 2.0 * a + b),
            0.25 * (1.0 - b),
            0.25 * (1.0 - b),
            0.25 * (1.0 - 2.0 * a + b),
        ];
        let omin = oracle.iter().cloned().fold(f64::INFINITY, f64::min);

        let v = ideal_intermediate(model(Scenario::CaseA, Member::Total), s, t).unwrap();
        let lmin = min_choi_eigenvalue(&v).unwrap();
        assert_abs_diff_eq!(lmin, omin, epsilon = 1e-12);
        assert_abs_diff_eq!(lmin, -0.045457, epsilon = 1e-6);
        assert!(!v.ill_conditioned);
    }

    #[test]
    fn case_a_members_stay_divisible() {
        for member in [Member::Ch1, Member::Ch2] {
            for (s, t) in [(0.5, 0.6), (1.0, 2.0), (2.5, 3.6)] {
                let v = ideal_intermediate(model(Scenario::CaseA, member), s, t).unwrap();
                let lmin = min_choi_eigenvalue(&v).unwrap();
                assert!(lmin.abs() <= 1e-12, "{member:?} ({s},{t}): {lmin}");
            }
        }
    }

    #[test]
    fn case_b_total_intermediate_spectrum() {
        let (s, t) = (PI / 4.0 + 0.1, PI / 2.0);
        let r = (-(t - s)).exp();
        let v = ideal_intermediate(model(Scenario::CaseB, Member::Total), s, t).unwrap();
        let w = intermediate_choi(&v).unwrap();
        let eig = herm_eig(w.matrix(), 1e-10).unwrap();
        let mut want = [0.0, 0.0, 0.5 * (1.0 - r), 0.5 * (1.0 + r)];
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        for (got, want) in eig.eigenvalues.iter().zip(want) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn case_b_ch2_singular_start_is_an_error() {
        let m = model(Scenario::CaseB, Member::Ch2);
        match ideal_intermediate(m, PI / 4.0, PI / 2.0) {
            Err(MarkovianityError::Linalg(LinalgError::Singular { .. })) => {}
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn case_b_ch2_revival_witness() {
        let (s, t) = (PI / 4.0 + 0.1, PI / 2.0);
        let r: f64 = (2.0 * t).cos() / (2.0 * s).cos();
        let v = ideal_intermediate(model(Scenario::CaseB, Member::Ch2), s, t).unwrap();
        let lmin = min_choi_eigenvalue(&v).unwrap();
        assert_abs_diff_eq!(lmin, 0.5 * (1.0 - r.abs()), epsilon = 1e-10);
        assert!(lmin < -1e-3);
    }

    #[test]
    fn ill_conditioned_start_is_flagged_not_fatal() {
        let m = model(Scenario::CaseB, Member::Ch2);
        let s = PI / 4.0 + 1e-9;
        let v = ideal_intermediate(m, s, PI / 2.0).unwrap();
        assert!(v.condition > 1e8);
        assert!(v.ill_conditioned);
    }

    #[test]
    fn rhp_rate_matches_closed_form() {
        // case A total: g(t) -> (1/2) tanh(t/2) as eps -> 0+
        let m = model(Scenario::CaseA, Member::Total);
        let eps = 1e-6;
        for t in [0.25, 0.5, 1.0, 2.0, 3.5] {
            let v = ideal_intermediate(m, t, t + eps).unwrap();
            let g = rhp_g(&v).unwrap();
            assert_abs_diff_eq!(g, 0.5 * (t / 2.0).tanh(), epsilon = 1e-5);
        }
        let v = ideal_intermediate(m, 1.0, 1.0 + eps).unwrap();
        let g = rhp_g(&v).unwrap();
        assert_abs_diff_eq!(g, 0.231059, epsilon = 1e-5);
        assert_abs_diff_eq!(gbar(g), 0.227025, epsilon = 1e-5);
    }

    #[test]
    fn trace_norm_excess_equals_twice_negative_part() {
        let v = ideal_intermediate(model(Scenario::CaseA, Member::Total), 1.0, 1.5).unwrap();
        let w = intermediate_choi(&v).unwrap();
        let tn = trace_norm(w.matrix()).unwrap();
        let eig = herm_eig(w.matrix(), 1e-10).unwrap();
        let neg: f64 = eig.eigenvalues.iter().filter(|l| **l < 0.0).map(|l| -l).sum();
        assert_abs_diff_eq!(tn - 1.0, 2.0 * neg, epsilon = 1e-12);
        assert_abs_diff_eq!(tn, 1.0909, epsilon = 1e-4);
    }

    #[test]
    fn rhp_measure_of_constant_series() {
        let pts: Vec<GbarPoint> = (0..11)
            .map(|k| GbarPoint {
                t: k as f64 * 0.35,
                gbar: 0.2,
                std: None,
                sem: None,
                flagged: false,
            })
            .collect();
        let m = rhp_measure(&pts, ZeroThreshold::Fixed(1e-6)).unwrap();
        assert_abs_diff_eq!(m.value, 0.2, epsilon = 1e-12);
        assert_eq!(m.excluded, 0);
    }

    #[test]
    fn rhp_measure_zero_support_is_zero() {
        let pts: Vec<GbarPoint> = (0..5)
            .map(|k| GbarPoint { t: k as f64, gbar: 1e-9, std: None, sem: None, flagged: false })
            .collect();
        let m = rhp_measure(&pts, ZeroThreshold::Fixed(1e-6)).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.denominator, 0.0);
    }

    #[test]
    fn rhp_measure_respects_flags_and_order() {
        let mut pts: Vec<GbarPoint> = (0..4)
            .map(|k| GbarPoint {
                t: k as f64,
                gbar: 0.1,
                std: None,
                sem: None,
                flagged: false,
            })
            .collect();
        pts[2].flagged = true;
        let m = rhp_measure(&pts, ZeroThreshold::Fixed(1e-6)).unwrap();
        assert_eq!(m.excluded, 1);
        assert_abs_diff_eq!(m.value, 0.1, epsilon = 1e-12);

        let unsorted = vec![
            GbarPoint { t: 0.0, gbar: 0.1, std: None, sem: None, flagged: false },
            GbarPoint { t: 0.0, gbar: 0.1, std: None, sem: None, flagged: false },
        ];
        assert!(matches!(
            rhp_measure(&unsorted, ZeroThreshold::Fixed(0.0)),
            Err(MarkovianityError::UnsortedSeries { .. })
        ));
        assert!(matches!(
            rhp_measure(&pts[..1], ZeroThreshold::Fixed(0.0)),
            Err(MarkovianityError::EmptyPair(1))
        ));
    }

    #[test]
    fn per_point_sem_threshold() {
        let pts = vec![
            GbarPoint { t: 0.0, gbar: 0.05, std: Some(0.1), sem: Some(0.1), flagged: false },
            GbarPoint { t: 1.0, gbar: 0.05, std: Some(0.01), sem: Some(0.01), flagged: false },
        ];
        // first point sits below its own error bar, second above
        let m = rhp_measure(&pts, ZeroThreshold::PerPointSem).unwrap();
        assert_abs_diff_eq!(m.denominator, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trace_distance_of_dephased_pair() {
        let m = model(Scenario::CaseB, Member::Total);
        for t in [0.0, 0.5, 1.0, 2.0] {
            let mix = pauli_mixing_of(m, t).unwrap();
            let d = blp_trace_distance(
                &apply(&mix, &DensityMatrix::h()),
                &apply(&mix, &DensityMatrix::v()),
            );
            assert_abs_diff_eq!(d, (-t).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_distance_agrees_with_trace_norm_route() {
        let mix = pauli_mixing_of(model(Scenario::CaseB, Member::Ch1), 0.7).unwrap();
        let r1 = apply(&mix, &DensityMatrix::plus());
        let r2 = apply(&mix, &DensityMatrix::v());
        let direct = blp_trace_distance(&r1, &r2);
        let via_norm = 0.5 * trace_norm(&(r1.matrix() - r2.matrix())).unwrap();
        assert_abs_diff_eq!(direct, via_norm, epsilon = 1e-12);
    }

    #[test]
    fn blp_measure_is_positive_variation() {
        let series: Vec<TraceDistancePoint> = [1.0, 0.4, 0.7, 0.6]
            .iter()
            .enumerate()
            .map(|(k, &d)| TraceDistancePoint { t: k as f64, d, std: None })
            .collect();
        assert_abs_diff_eq!(blp_measure(&series).unwrap(), 0.3, epsilon = 1e-15);
    }
}
