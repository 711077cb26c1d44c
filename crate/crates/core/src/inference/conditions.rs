use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::likelihood::{psi_gaussian, psi_laplacian, ForwardOp, NoiseKind};
use crate::measures::has_stabilized;
use crate::spectral::{CoeffVec, SpectralBasis};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearConditionReport {
    pub truncations: Vec<usize>,
    /// `Σ_{k≤n} |κ_k| / √λ_k` at each grid point.
    pub partial_sums: Vec<f64>,
    /// Partial sum at the largest truncation.
    pub constant: f64,
    pub stabilized: bool,
    /// Stabilized and below the user threshold.
    pub satisfied: bool,
}

/// Summability check `Σ_k |κ_k| / √λ_k ≤ C` for a diagonal forward operator
/// against Laplacian noise variances `λ_k`. Under it, `u ↦ Φ(u, y)` is
/// Lipschitz with constant `√2 C`.
pub fn check_linear_condition(
    basis: &SpectralBasis,
    forward: &ForwardOp,
    variances: &[f64],
    grid: &[usize],
    threshold: f64,
) -> Result<LinearConditionReport> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("truncation grid must be non-empty and strictly increasing from 1".into()));
    }
    let n_max = *grid.last().unwrap();
    if variances.len() < n_max {
        return Err(Error::LengthMismatch { left: variances.len(), right: n_max });
    }
    let kappa = forward
        .singular_values(basis, n_max)?
        .ok_or_else(|| Error::Domain("linear condition check needs a diagonal forward operator".into()))?;
    let mut partial_sums = Vec::with_capacity(grid.len());
    let mut acc = crate::numeric::CompensatedSum::new();
    let mut k = 0;
    for &n in grid {
        while k < n {
            acc.add(kappa[k].abs() / variances[k].sqrt());
            k += 1;
        }
        partial_sums.push(acc.value());
    }
    let constant = *partial_sums.last().unwrap();
    let stabilized = has_stabilized(&partial_sums);
    Ok(LinearConditionReport {
        truncations: grid.to_vec(),
        partial_sums,
        constant,
        stabilized,
        satisfied: stabilized && constant <= threshold,
    })
}

/// `sup_x Σ_k ‖F'(x)* e_k‖ / √λ_k` over the supplied points, for a
/// differentiable forward map given through its derivative adjoint
/// `adjoint(x, k) = F'(x)* e_k` (`k` 0-based).
pub fn nonlinear_condition_constant<F>(points: &[CoeffVec], variances: &[f64], adjoint: F) -> f64
where
    F: Fn(&CoeffVec, usize) -> CoeffVec,
{
    points
        .iter()
        .map(|x| {
            variances
                .iter()
                .enumerate()
                .map(|(k, l)| adjoint(x, k).norm() / l.sqrt())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessReport {
    pub n: usize,
    pub u_n: CoeffVec,
    pub phi_value: f64,
    /// `-√2 H_n` when every `σ_k = √λ_k ≤ 1` for `k ≤ n` (Laplacian only).
    pub harmonic_certificate: Option<f64>,
}

/// Builds `y_k = 1/k` and `u^n = Σ_{k≤n} y_k φ_k` for the identity forward map
/// and evaluates `Φ(u^n, y)`. With `y ∉ ran(Q^{1/2})` the values decrease
/// without bound in `n`:
/// - Gaussian: `Φ = -Σ_{k≤n} y_k² / (2λ_k)`;
/// - Laplacian: `Φ = -√2 Σ_{k≤n} 1 / (k √λ_k)`.
///
/// Coordinates beyond `n` do not contribute since `u^n` vanishes there.
pub fn unbounded_phi_witness(kind: NoiseKind, variances: &[f64], n: usize) -> Result<WitnessReport> {
    if n == 0 {
        return Err(Error::Domain("witness index n starts at 1".into()));
    }
    if variances.len() < n {
        return Err(Error::LengthMismatch { left: variances.len(), right: n });
    }
    let lam = &variances[..n];
    let y = CoeffVec::new((1..=n).map(|k| 1.0 / k as f64).collect())?;
    let u_n = y.clone();
    let phi_value = match kind {
        NoiseKind::Gaussian => psi_gaussian(lam, &u_n, &y)?,
        NoiseKind::Laplacian => psi_laplacian(lam, &u_n, &y)?,
    };
    let harmonic_certificate = (kind == NoiseKind::Laplacian && lam.iter().all(|l| l.sqrt() <= 1.0))
        .then(|| -SQRT_2 * (1..=n).map(|k| 1.0 / k as f64).sum::<f64>());
    Ok(WitnessReport {
        n,
        u_n,
        phi_value,
        harmonic_certificate,
    })
}

/// `Φ(u^n, y)` for each `n` in `ns`.
pub fn witness_sequence(kind: NoiseKind, variances: &[f64], ns: &[usize]) -> Result<Vec<f64>> {
    ns.iter()
        .map(|&n| unbounded_phi_witness(kind, variances, n).map(|w| w.phi_value))
        .collect()
}
