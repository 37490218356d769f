//! Exact models of the two studied channel families and conversions among the
//! process-matrix (chi), transfer-matrix, and Choi representations.
//!
//! Both families are convex mixtures of Pauli maps applied to one qubit. Case
//! A mixes two dephasing-like members with equal weights; case B mixes an
//! engineered pair with weights 2/3 and 1/3 so that the sum is an exact
//! exponential-decay dephasing channel. All representations use fixed basis
//! conventions:
//!
//! * chi: Pauli basis {I, sx, sy, sz}
//! * transfer: unit-matrix basis {|H><H|, |H><V|, |V><H|, |V><V|}
//! * Choi: W = (I (x) L)|psi+><psi+| scaled so trace(W) = 1 for TP maps

use crate::linalg::{cx, herm_eig, CMatrix, LinalgError, TOL};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("time must be nonnegative, got {t}")]
    NegativeTime { t: f64 },
    #[error("invalid mixing distribution: {0}")]
    InvalidMixing(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Pauli matrix by index: 0 -> I, 1 -> sigma_x, 2 -> sigma_y, 3 -> sigma_z.
pub fn pauli(k: usize) -> CMatrix {
    let e = |a: [[(f64, f64); 2]; 2]| CMatrix::from_fn(2, |i, j| cx(a[i][j].0, a[i][j].1));
    match k {
        0 => e([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]]),
        1 => e([[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]]),
        2 => e([[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]]),
        3 => e([[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]]),
        _ => panic!("pauli index {k} out of range"),
    }
}

/// Unit-matrix basis element G_alpha = |r><c| with alpha enumerating
/// (r, c) = (0,0), (0,1), (1,0), (1,1).
pub fn unit_basis(alpha: usize) -> CMatrix {
    assert!(alpha < 4, "unit basis index {alpha} out of range");
    let mut g = CMatrix::zeros(2);
    g[(alpha / 2, alpha % 2)] = cx(1.0, 0.0);
    g
}

/// Columns are the Bell vectors (I (x) E_m)|psi+>, the eigenvectors of every
/// Pauli-mixture Choi matrix. Used to move between Choi and chi.
fn bell_matrix() -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let cols: [[Complex64; 4]; 4] = [
        [cx(s, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(s, 0.0)],
        [cx(0.0, 0.0), cx(s, 0.0), cx(s, 0.0), cx(0.0, 0.0)],
        [cx(0.0, 0.0), cx(0.0, s), cx(0.0, -s), cx(0.0, 0.0)],
        [cx(s, 0.0), cx(0.0, 0.0), cx(0.0, 0.0), cx(-s, 0.0)],
    ];
    CMatrix::from_fn(4, |i, m| cols[m][i])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    CaseA,
    CaseB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Member {
    Ch1,
    Ch2,
    Total,
}

impl Member {
    pub const ALL: [Member; 3] = [Member::Ch1, Member::Ch2, Member::Total];

    pub fn label(self) -> &'static str {
        match self {
            Member::Ch1 => "ch1",
            Member::Ch2 => "ch2",
            Member::Total => "total",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ChannelModel {
    pub scenario: Scenario,
    pub member: Member,
}

impl ChannelModel {
    pub fn new(scenario: Scenario, member: Member) -> Self {
        ChannelModel { scenario, member }
    }
}

/// Convex weights (w1, w2) with which Ch1 and Ch2 are combined into Total.
pub fn mixture_weights(scenario: Scenario) -> [f64; 2] {
    match scenario {
        Scenario::CaseA => [0.5, 0.5],
        Scenario::CaseB => [2.0 / 3.0, 1.0 / 3.0],
    }
}

/// Mixing probability of the model at time t: the weight on the identity-like
/// branch for case A (shared by all members), p1/p2/p for case B.
pub fn probability(model: ChannelModel, t: f64) -> Result<f64, ChannelError> {
    if t < 0.0 {
        return Err(ChannelError::NegativeTime { t });
    }
    let p = 0.5 * (1.0 + (-t).exp());
    Ok(match model.scenario {
        Scenario::CaseA => p,
        Scenario::CaseB => match model.member {
            Member::Ch1 => 0.75 * (1.0 + (-t).exp()) - 0.5 * t.cos().powi(2),
            Member::Ch2 => t.cos().powi(2),
            Member::Total => p,
        },
    })
}

/// Probability distribution over {I, sx, sy, sz} defining a Pauli mixture
/// rho -> sum_i q_i s_i rho s_i.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliMixing {
    q: [f64; 4],
}

impl PauliMixing {
    pub fn new(q: [f64; 4]) -> Result<Self, ChannelError> {
        for (i, &qi) in q.iter().enumerate() {
            if !qi.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&qi) {
                return Err(ChannelError::InvalidMixing(format!(
                    "component {i} = {qi} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = q.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(ChannelError::InvalidMixing(format!("components sum to {sum}")));
        }
        Ok(PauliMixing { q })
    }

    #[inline]
    pub fn q(&self) -> [f64; 4] {
        self.q
    }

    /// Convex combination. Weights must be nonnegative and sum to one.
    pub fn mix(parts: &[(f64, &PauliMixing)]) -> Result<PauliMixing, ChannelError> {
        let wsum: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| *w < 0.0) || (wsum - 1.0).abs() > 1e-12 {
            return Err(ChannelError::InvalidMixing(format!(
                "weights must be nonnegative and sum to 1, got sum {wsum}"
            )));
        }
        let mut q = [0.0; 4];
        for (w, m) in parts {
            for i in 0..4 {
                q[i] += w * m.q[i];
            }
        }
        PauliMixing::new(q)
    }
}

/// Mixing distribution of the model at time t.
pub fn pauli_mixing_of(model: ChannelModel, t: f64) -> Result<PauliMixing, ChannelError> {
    let p = probability(model, t)?;
    let q = match (model.scenario, model.member) {
        (Scenario::CaseA, Member::Ch1) => [p, 1.0 - p, 0.0, 0.0],
        (Scenario::CaseA, Member::Ch2) => [p, 0.0, 1.0 - p, 0.0],
        (Scenario::CaseA, Member::Total) => [p, 0.5 * (1.0 - p), 0.5 * (1.0 - p), 0.0],
        (Scenario::CaseB, _) => [p, 1.0 - p, 0.0, 0.0],
    };
    PauliMixing::new(q)
}

/// Qubit density matrix: Hermitian, unit trace, PSD within tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: CMatrix,
}

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self, ChannelError> {
        if m.dim() != 2 {
            return Err(ChannelError::InvalidState(format!("dimension {} != 2", m.dim())));
        }
        if !m.is_finite() {
            return Err(ChannelError::InvalidState("non-finite entry".into()));
        }
        let defect = m.herm_defect();
        if defect > TOL.hermiticity {
            return Err(ChannelError::InvalidState(format!("Hermitian defect {defect:.3e}")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-12 {
            return Err(ChannelError::InvalidState(format!("trace {tr} != 1")));
        }
        let eig = herm_eig(&m, TOL.hermiticity)?;
        if eig.eigenvalues[0] < TOL.psd_floor {
            return Err(ChannelError::InvalidState(format!(
                "negative eigenvalue {:.3e}",
                eig.eigenvalues[0]
            )));
        }
        Ok(DensityMatrix { m })
    }

    pub fn from_bloch(r: [f64; 3]) -> Result<Self, ChannelError> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if len > 1.0 + 1e-12 {
            return Err(ChannelError::InvalidState(format!("Bloch length {len} > 1")));
        }
        let m = CMatrix::from_fn(2, |i, j| {
            let mut z = if i == j { cx(0.5, 0.0) } else { cx(0.0, 0.0) };
            for (k, &rk) in r.iter().enumerate() {
                z += pauli(k + 1)[(i, j)] * (0.5 * rk);
            }
            z
        });
        Ok(DensityMatrix { m })
    }

    pub fn h() -> Self {
        Self::from_bloch([0.0, 0.0, 1.0]).unwrap()
    }

    pub fn v() -> Self {
        Self::from_bloch([0.0, 0.0, -1.0]).unwrap()
    }

    pub fn plus() -> Self {
        Self::from_bloch([1.0, 0.0, 0.0]).unwrap()
    }

    pub fn plus_y() -> Self {
        Self::from_bloch([0.0, 1.0, 0.0]).unwrap()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn bloch(&self) -> [f64; 3] {
        let mut r = [0.0; 3];
        for (k, rk) in r.iter_mut().enumerate() {
            *rk = (&pauli(k + 1) * &self.m).trace().re;
        }
        r
    }
}

/// Apply the Pauli mixture to a state.
pub fn apply(mix: &PauliMixing, rho: &DensityMatrix) -> DensityMatrix {
    let mut out = CMatrix::zeros(2);
    for (i, &qi) in mix.q().iter().enumerate() {
        if qi == 0.0 {
            continue;
        }
        let s = pauli(i);
        let term = &(&s * rho.matrix()) * &s;
        out = &out + &term.scale(cx(qi, 0.0));
    }
    // exact mixtures of unitary conjugations preserve all state invariants
    DensityMatrix { m: out.herm_part() }
}

/// Process matrix in the Pauli basis: L(rho) = sum_mn chi_mn E_m rho E_n.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiMatrix {
    m: CMatrix,
}

impl ChiMatrix {
    pub fn new(m: CMatrix) -> Result<Self, ChannelError> {
        if m.dim() != 4 {
            return Err(ChannelError::InvalidMixing(format!("chi dimension {} != 4", m.dim())));
        }
        if !m.is_finite() {
            return Err(ChannelError::InvalidMixing("non-finite chi entry".into()));
        }
        let defect = m.herm_defect();
        if defect > TOL.hermiticity {
            return Err(ChannelError::InvalidMixing(format!(
                "chi Hermitian defect {defect:.3e}"
            )));
        }
        Ok(ChiMatrix { m })
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Deviations from the CPTP set: (most negative eigenvalue, |trace - 1|,
    /// max entry of |sum_mn chi_mn E_n E_m - I|).
    pub fn cptp_defects(&self) -> Result<(f64, f64, f64), ChannelError> {
        let eig = herm_eig(&self.m, TOL.hermiticity)?;
        let min_eig = eig.eigenvalues[0].min(0.0);
        let tr_dev = (self.m.trace().re - 1.0).abs();
        let mut tp = CMatrix::zeros(2);
        for m_i in 0..4 {
            for n_i in 0..4 {
                let coeff = self.m[(m_i, n_i)];
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                tp = &tp + &(&pauli(n_i) * &pauli(m_i)).scale(coeff);
            }
        }
        let tp_dev = (&tp - &CMatrix::identity(2)).max_norm();
        Ok((min_eig, tr_dev, tp_dev))
    }

    pub fn is_cptp(&self) -> Result<bool, ChannelError> {
        let (min_eig, tr_dev, tp_dev) = self.cptp_defects()?;
        Ok(min_eig >= TOL.psd_floor && tr_dev <= 1e-8 && tp_dev <= 1e-8)
    }
}

/// chi of an exact Pauli mixture: diagonal with the mixing probabilities.
pub fn chi_of(mix: &PauliMixing) -> ChiMatrix {
    ChiMatrix { m: CMatrix::diag_re(&mix.q()) }
}

/// Apply a chi-represented map to an arbitrary 2x2 operator.
pub fn apply_chi(chi: &ChiMatrix, op: &CMatrix) -> CMatrix {
    assert_eq!(op.dim(), 2);
    let mut out = CMatrix::zeros(2);
    for m_i in 0..4 {
        for n_i in 0..4 {
            let coeff = chi.matrix()[(m_i, n_i)];
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            let term = &(&pauli(m_i) * op) * &pauli(n_i);
            out = &out + &term.scale(coeff);
        }
    }
    out
}

/// Transfer matrix over the unit-matrix basis: F_ab = tr(G_a^H L(G_b)), so
/// vec(L(rho)) = F vec(rho) with row-major vectorization.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    m: CMatrix,
}

impl TransferMatrix {
    pub fn new(m: CMatrix) -> Result<Self, ChannelError> {
        if m.dim() != 4 || !m.is_finite() {
            return Err(ChannelError::InvalidMixing("transfer must be finite 4x4".into()));
        }
        Ok(TransferMatrix { m })
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    /// Trace preservation shows up as rows 0 and 3 summing to (1, 0, 0, 1).
    pub fn tp_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for b in 0..4 {
            let want = if b == 0 || b == 3 { 1.0 } else { 0.0 };
            worst = worst.max((self.m[(0, b)] + self.m[(3, b)] - cx(want, 0.0)).norm());
        }
        worst
    }
}

/// Choi matrix W = 1/2 sum_ab F_ab G_b (x) G_a, normalized to unit trace for
/// TP maps.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix {
    m: CMatrix,
}

impl ChoiMatrix {
    pub fn new(m: CMatrix) -> Result<Self, ChannelError> {
        if m.dim() != 4 || !m.is_finite() {
            return Err(ChannelError::InvalidMixing("Choi must be finite 4x4".into()));
        }
        Ok(ChoiMatrix { m })
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }
}

pub fn transfer_of_chi(chi: &ChiMatrix) -> TransferMatrix {
    let mut f = CMatrix::zeros(4);
    for beta in 0..4 {
        let image = apply_chi(chi, &unit_basis(beta));
        for alpha in 0..4 {
            // tr(G_a^H X) picks out entry (r_a, c_a)
            f[(alpha, beta)] = image[(alpha / 2, alpha % 2)];
        }
    }
    TransferMatrix { m: f }
}

pub fn choi_of_transfer(tm: &TransferMatrix) -> ChoiMatrix {
    let mut w = CMatrix::zeros(4);
    for alpha in 0..4 {
        for beta in 0..4 {
            let coeff = tm.m[(alpha, beta)] * 0.5;
            if coeff.norm_sqr() == 0.0 {
                continue;
            }
            w = &w + &unit_basis(beta).kron(&unit_basis(alpha)).scale(coeff);
        }
    }
    ChoiMatrix { m: w }
}

/// Inverse of `choi_of_transfer`: F_ab = 2 tr[W (G_b^T (x) G_a^H)].
pub fn transfer_of_choi(w: &ChoiMatrix) -> TransferMatrix {
    let mut f = CMatrix::zeros(4);
    for alpha in 0..4 {
        for beta in 0..4 {
            let probe = unit_basis(beta).transpose().kron(&unit_basis(alpha).adjoint());
            f[(alpha, beta)] = (&w.m * &probe).trace() * 2.0;
        }
    }
    TransferMatrix { m: f }
}

/// chi extracted from the Choi matrix by congruence with the Bell basis.
pub fn chi_of_choi(w: &ChoiMatrix) -> Result<ChiMatrix, ChannelError> {
    let b = bell_matrix();
    let chi = &(&b.adjoint() * &w.m) * &b;
    ChiMatrix::new(chi)
}
