//! Shared EKF algebra.

use nalgebra::{SMatrix, SVector};

/// Outcome of a measurement update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Applied,
    /// An innovation component exceeded the gate; the state was left untouched.
    Gated,
}

pub fn symmetrize<const N: usize>(p: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (p + p.transpose()) * 0.5
}

/// Symmetric within `1e-9` and smallest eigenvalue at least `-1e-9`.
pub fn is_valid_covariance<const N: usize>(p: &SMatrix<f64, N, N>) -> bool {
    let asym = (p - p.transpose()).amax();
    if !(asym <= 1e-9) || p.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let sym = symmetrize(p);
    let dynamic = nalgebra::DMatrix::from_fn(N, N, |i, j| sym[(i, j)]);
    dynamic.symmetric_eigenvalues().min() >= -1e-9
}

/// Normalized estimation error squared `e^T P^-1 e`.
pub fn nees<const N: usize>(err: &SVector<f64, N>, p: &SMatrix<f64, N, N>) -> Option<f64> {
    let c = p.cholesky()?;
    Some(err.dot(&c.solve(err)))
}

/// Joseph-form correction with per-component innovation gating at `gate` sigma.
pub fn joseph_update<const N: usize, const M: usize>(
    x: &mut SVector<f64, N>,
    p: &mut SMatrix<f64, N, N>,
    h: &SMatrix<f64, M, N>,
    r: &SMatrix<f64, M, M>,
    innovation: &SVector<f64, M>,
    gate: f64,
) -> UpdateOutcome {
    let s = h * *p * h.transpose() + r;
    for i in 0..M {
        if innovation[i].abs() > gate * s[(i, i)].max(0.0).sqrt() {
            return UpdateOutcome::Gated;
        }
    }
    let Some(s_inv) = symmetrize(&s).try_inverse() else {
        return UpdateOutcome::Gated;
    };
    let k = *p * h.transpose() * s_inv;
    *x += k * innovation;
    let ikh = SMatrix::<f64, N, N>::identity() - k * h;
    *p = symmetrize(&(ikh * *p * ikh.transpose() + k * r * k.transpose()));
    UpdateOutcome::Applied
}
