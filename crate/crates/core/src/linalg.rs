//! Small dense complex-matrix kernel for the 2x2 and 4x4 problems the rest of
//! the crate works with.
//!
//! The eigensolver is a cyclic Jacobi iteration on the Hermitian part of the
//! input. At these sizes Jacobi is simple, allocation-light, and accurate to
//! near machine precision, which matters because downstream quantities
//! (eigenvalues of Choi matrices close to the positivity boundary) are
//! differences of nearly equal numbers.

use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Sub};
use thiserror::Error;

/// Shorthand constructor used throughout the crate.
#[inline]
pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Numerical gates used by the kernel, grouped so every threshold lives in
/// one place.
#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    /// largest |M - M^H| entry accepted before a matrix is rejected as non-Hermitian
    pub hermiticity: f64,
    /// Jacobi stop: converged once the largest off-diagonal magnitude falls below this
    pub jacobi_off_diag: f64,
    /// hard sweep cap for the Jacobi iteration
    pub jacobi_max_sweeps: usize,
    /// pivot threshold for inversion, relative to the largest entry magnitude
    pub pivot_rel: f64,
    /// most negative eigenvalue psd_sqrt will clip to zero
    pub psd_floor: f64,
}

pub const TOL: Tolerances = Tolerances {
    hermiticity: 1e-10,
    jacobi_off_diag: 1e-12,
    jacobi_max_sweeps: 100,
    pivot_rel: 1e-14,
    psd_floor: -1e-10,
};

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds {tol:.3e}")]
    NonHermitian { defect: f64, tol: f64 },
    #[error("Jacobi did not converge in {sweeps} sweeps (off-diagonal {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("matrix is numerically singular (pivot {pivot:.3e} below {threshold:.3e})")]
    Singular { pivot: f64, threshold: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:.3e})")]
    NotPsd { eigenvalue: f64 },
    #[error("non-finite entry produced")]
    NonFinite,
}

/// Dense row-major complex matrix, dimension 2 or 4.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 4, "only 2x2 and 4x4 supported, got {dim}");
        CMatrix { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = cx(1.0, 0.0);
        }
        m
    }

    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Self {
        assert!(dim == 2 || dim == 4, "only 2x2 and 4x4 supported, got {dim}");
        assert_eq!(entries.len(), dim * dim);
        CMatrix { dim, data: entries.to_vec() }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diag_re(entries: &[f64]) -> Self {
        let mut m = CMatrix::zeros(entries.len());
        for (i, &d) in entries.iter().enumerate() {
            m[(i, i)] = cx(d, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, a: Complex64) -> CMatrix {
        CMatrix { dim: self.dim, data: self.data.iter().map(|z| z * a).collect() }
    }

    /// Kronecker product; only 2x2 (x) 2x2 stays inside the supported sizes.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.dim * other.dim, 4, "kron result must be 4x4");
        let d = other.dim;
        CMatrix::from_fn(self.dim * d, |i, j| self[(i / d, j / d)] * other[(i % d, j % d)])
    }

    /// Largest entry magnitude.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Maximum absolute column sum (induced 1-norm).
    pub fn one_norm(&self) -> f64 {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn herm_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                d = d.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// Hermitian part (M + M^H) / 2.
    pub fn herm_part(&self) -> CMatrix {
        CMatrix::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }
}

/// Result of a Hermitian eigendecomposition. Eigenvalues ascending;
/// eigenvector k is column k of `eigenvectors`.
#[derive(Clone, Debug)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigDecomposition {
    /// V diag(lambda) V^H, for reconstruction checks.
    pub fn reassemble(&self) -> CMatrix {
        let n = self.eigenvectors.dim();
        CMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| {
                    self.eigenvectors[(i, k)]
                        * self.eigenvalues[k]
                        * self.eigenvectors[(j, k)].conj()
                })
                .sum()
        })
    }
}

/// Cyclic Jacobi eigendecomposition of the Hermitian part of `m`.
///
/// Rejects inputs whose Hermitian defect exceeds `hermiticity_tol`; sweeps
/// until every off-diagonal magnitude falls below `TOL.jacobi_off_diag` or the
/// sweep cap is hit.
pub fn herm_eig(m: &CMatrix, hermiticity_tol: f64) -> Result<EigDecomposition, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let defect = m.herm_defect();
    if defect > hermiticity_tol {
        return Err(LinalgError::NonHermitian { defect, tol: hermiticity_tol });
    }
    let n = m.dim();
    let mut h = m.herm_part();
    let mut v = CMatrix::identity(n);

    let off = |h: &CMatrix| -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max(h[(i, j)].norm());
                }
            }
        }
        worst
    };

    let mut sweeps = 0;
    while off(&h) > TOL.jacobi_off_diag {
        if sweeps >= TOL.jacobi_max_sweeps {
            return Err(LinalgError::NoConvergence { sweeps, off: off(&h) });
        }
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let hpq = h[(p, q)];
                let abs_pq = hpq.norm();
                if abs_pq <= TOL.jacobi_off_diag * 1e-3 {
                    continue;
                }
                let phase = hpq / abs_pq;
                let tau = (h[(q, q)].re - h[(p, p)].re) / (2.0 * abs_pq);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // plane rotation J: J[p][p]=c, J[p][q]=s*phase, J[q][p]=-s*conj(phase), J[q][q]=c
                let mut j_rot = CMatrix::identity(n);
                j_rot[(p, p)] = cx(c, 0.0);
                j_rot[(q, q)] = cx(c, 0.0);
                j_rot[(p, q)] = phase * s;
                j_rot[(q, p)] = -(phase.conj()) * s;
                h = &(&j_rot.adjoint() * &h) * &j_rot;
                v = &v * &j_rot;
            }
        }
        // symmetrize: rounding can leave a ~1e-17 skew part behind
        h = h.herm_part();
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h[(a, a)].re.partial_cmp(&h[(b, b)].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&k| h[(k, k)].re).collect();
    let eigenvectors = CMatrix::from_fn(n, |i, j| v[(i, order[j])]);
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}

/// Inverse together with a one-norm condition estimate.
#[derive(Clone, Debug)]
pub struct InverseResult {
    pub inverse: CMatrix,
    pub condition: f64,
}

/// Gauss-Jordan inversion with partial pivoting. A pivot below
/// `TOL.pivot_rel * max_norm(M)` is reported as singular.
pub fn inverse(m: &CMatrix) -> Result<InverseResult, LinalgError> {
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.dim();
    let scale = m.max_norm();
    let threshold = TOL.pivot_rel * scale;
    if scale == 0.0 {
        return Err(LinalgError::Singular { pivot: 0.0, threshold });
    }
    let mut a = m.clone();
    let mut inv = CMatrix::identity(n);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[(r, col)].norm()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot_mag <= threshold {
            return Err(LinalgError::Singular { pivot: pivot_mag, threshold });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = a[(col, j)];
                a[(col, j)] = a[(pivot_row, j)];
                a[(pivot_row, j)] = tmp;
                let tmp = inv[(col, j)];
                inv[(col, j)] = inv[(pivot_row, j)];
                inv[(pivot_row, j)] = tmp;
            }
        }
        let pivot = a[(col, col)];
        for j in 0..n {
            a[(col, j)] /= pivot;
            inv[(col, j)] /= pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[(r, col)];
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                let s = a[(col, j)];
                a[(r, j)] -= factor * s;
                let s = inv[(col, j)];
                inv[(r, j)] -= factor * s;
            }
        }
    }
    if !inv.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let condition = m.one_norm() * inv.one_norm();
    Ok(InverseResult { inverse: inv, condition })
}

/// Sum of singular values.
///
/// Hermitian inputs take the direct route sum |lambda_k|; that route keeps
/// full absolute precision for eigenvalues near zero, which the divisibility
/// witness depends on at small epsilon. General inputs go through the
/// eigenvalues of M^H M.
pub fn trace_norm(m: &CMatrix) -> Result<f64, LinalgError> {
    if m.herm_defect() <= TOL.hermiticity {
        let eig = herm_eig(m, TOL.hermiticity)?;
        return Ok(eig.eigenvalues.iter().map(|l| l.abs()).sum());
    }
    let gram = &m.adjoint() * m;
    let eig = herm_eig(&gram, TOL.hermiticity.max(gram.max_norm() * 1e-14))?;
    Ok(eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum())
}

/// Principal square root of a PSD matrix. Eigenvalues in [TOL.psd_floor, 0)
/// are clipped to zero; anything below the floor is rejected.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = herm_eig(m, TOL.hermiticity)?;
    if let Some(&lo) = eig.eigenvalues.first() {
        if lo < TOL.psd_floor {
            return Err(LinalgError::NotPsd { eigenvalue: lo });
        }
    }
    let n = m.dim();
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let out = CMatrix::from_fn(n, |i, j| {
        (0..n)
            .map(|k| eig.eigenvectors[(i, k)] * roots[k] * eig.eigenvectors[(j, k)].conj())
            .sum()
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mat2(a: [[(f64, f64); 2]; 2]) -> CMatrix {
        CMatrix::from_fn(2, |i, j| cx(a[i][j].0, a[i][j].1))
    }

    #[test]
    fn identity_eig_is_exact() {
        let eig = herm_eig(&CMatrix::identity(4), TOL.hermiticity).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0, 1.0]);
        let diff = &eig.reassemble() - &CMatrix::identity(4);
        assert!(diff.max_norm() <= 1e-14);
    }

    #[test]
    fn diagonal_eig_sorts_ascending() {
        let m = CMatrix::diag_re(&[0.7, 0.2, 0.1, 0.0]);
        let eig = herm_eig(&m, TOL.hermiticity).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0, 0.1, 0.2, 0.7]);
        assert!((&eig.reassemble() - &m).max_norm() <= 1e-14);
    }

    #[test]
    fn pauli_x_eigensystem() {
        let sx = mat2([[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]]);
        let eig = herm_eig(&sx, TOL.hermiticity).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 1.0, epsilon = 1e-14);
        // eigenvector components have equal magnitude 1/sqrt(2)
        for k in 0..2 {
            for i in 0..2 {
                assert_abs_diff_eq!(
                    eig.eigenvectors[(i, k)].norm(),
                    std::f64::consts::FRAC_1_SQRT_2,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn complex_hermitian_2x2() {
        // [[1, -i], [i, 1]] has eigenvalues 0 and 2
        let m = mat2([[(1.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (1.0, 0.0)]]);
        let eig = herm_eig(&m, TOL.hermiticity).unwrap();
        assert_abs_diff_eq!(eig.eigenvalues[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.eigenvalues[1], 2.0, epsilon = 1e-14);
        assert!((&eig.reassemble() - &m).max_norm() <= 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::identity(4);
        m[(0, 1)] = cx(1e-6, 0.0);
        match herm_eig(&m, TOL.hermiticity) {
            Err(LinalgError::NonHermitian { defect, .. }) => {
                assert_abs_diff_eq!(defect, 1e-6, epsilon = 1e-18)
            }
            other => panic!("expected NonHermitian, got {other:?}"),
        }
    }

    #[test]
    fn inverse_of_diagonal() {
        let m = CMatrix::diag_re(&[1.0, 0.5, 0.25, 0.125]);
        let r = inverse(&m).unwrap();
        for (i, want) in [1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
            assert_abs_diff_eq!(r.inverse[(i, i)].re, want, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(r.condition, 8.0, epsilon = 1e-9);
    }

    #[test]
    fn inverse_round_trip() {
        let m = CMatrix::from_fn(4, |i, j| {
            cx(1.0 / (1.0 + i as f64 + j as f64), if i == j { 0.0 } else { 0.1 * (i as f64 - j as f64) })
        });
        let r = inverse(&m).unwrap();
        let diff = &(&m * &r.inverse) - &CMatrix::identity(4);
        assert!(diff.max_norm() <= 1e-8 * r.condition);
    }

    #[test]
    fn singular_matrix_rejected() {
        // rank 1
        let m = CMatrix::from_fn(4, |i, j| cx((i as f64 + 1.0) * (j as f64 + 1.0), 0.0));
        match inverse(&m) {
            Err(LinalgError::Singular { .. }) => {}
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn zero_matrix_is_singular() {
        match inverse(&CMatrix::zeros(2)) {
            Err(LinalgError::Singular { .. }) => {}
            other => panic!("expected Singular, got {other:?}"),
        }
    }

    #[test]
    fn trace_norm_of_hermitian_mixed_signs() {
        let m = CMatrix::diag_re(&[0.5, -0.25, 0.0, 0.75]);
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn trace_norm_general_matches_singular_values() {
        // [[0, 2], [0, 0]] has singular values {2, 0}
        let m = mat2([[(0.0, 0.0), (2.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)]]);
        assert_abs_diff_eq!(trace_norm(&m).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let p = (1.0 + (-1.0f64).exp()) / 2.0;
        let m = CMatrix::diag_re(&[p, 1.0 - p]);
        let s = psd_sqrt(&m).unwrap();
        assert_abs_diff_eq!(s[(0, 0)].re, p.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s[(1, 1)].re, (1.0 - p).sqrt(), epsilon = 1e-14);
        assert!((&(&s * &s) - &m).max_norm() <= 1e-12);
    }

    #[test]
    fn psd_sqrt_clips_tiny_negative() {
        let m = CMatrix::diag_re(&[1.0, -5e-11]);
        let s = psd_sqrt(&m).unwrap();
        assert_eq!(s[(1, 1)].re, 0.0);
    }

    #[test]
    fn psd_sqrt_rejects_negative() {
        let m = CMatrix::diag_re(&[1.0, -0.1]);
        match psd_sqrt(&m) {
            Err(LinalgError::NotPsd { eigenvalue }) => {
                assert_abs_diff_eq!(eigenvalue, -0.1, epsilon = 1e-14)
            }
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn kron_of_unit_matrices() {
        let mut g2 = CMatrix::zeros(2); // |0><1|
        g2[(0, 1)] = cx(1.0, 0.0);
        let mut g3 = CMatrix::zeros(2); // |1><0|
        g3[(1, 0)] = cx(1.0, 0.0);
        let k = g2.kron(&g3);
        // |0><1| (x) |1><0| = |01><10|, i.e. entry (1, 2)
        for i in 0..4 {
            for j in 0..4 {
                let want = if (i, j) == (1, 2) { 1.0 } else { 0.0 };
                assert_eq!(k[(i, j)].re, want);
            }
        }
    }
}
