use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::compensated_sum;
use crate::spectral::{CoeffVec, SpectralBasis};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Laplacian,
}

/// Additive noise with covariance `b² A^{-β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub b: f64,
    pub beta: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, b: f64, beta: f64, basis: &SpectralBasis) -> Result<Self> {
        let noise = NoiseModel { kind, b, beta };
        noise.validate(basis)?;
        Ok(noise)
    }

    pub fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::constraint("b > 0", format!("b = {}", self.b)));
        }
        if !(self.beta > basis.half_dim()) || !self.beta.is_finite() {
            return Err(Error::constraint(
                "beta > d/2",
                format!("beta = {}, d/2 = {}", self.beta, basis.half_dim()),
            ));
        }
        Ok(())
    }

    /// `λ_k = b² α_k^{-β}` for `k = 1..=n`.
    pub fn variances(&self, basis: &SpectralBasis, n: usize) -> Result<Vec<f64>> {
        let b2 = self.b * self.b;
        Ok(basis
            .eigenvalues(n)?
            .into_iter()
            .map(|a| b2 * a.powf(-self.beta))
            .collect())
    }
}

/// Linear forward operators acting on truncated coefficient vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardOp {
    /// `K = e^{-A}`.
    DiagonalHeat,
    /// `K φ_k = κ_k e_k`.
    DiagonalGeneral(Vec<f64>),
    /// Row-major `rows × cols` matrix.
    Dense { rows: usize, cols: usize, data: Vec<f64> },
}

impl ForwardOp {
    pub fn dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(data.len(), rows * cols)?;
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("dense forward operator has non-finite entries".into()));
        }
        Ok(ForwardOp::Dense { rows, cols, data })
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, ForwardOp::Dense { .. })
    }

    /// Diagonal entries `κ_1..κ_n`; `None` for dense operators.
    pub fn singular_values(&self, basis: &SpectralBasis, n: usize) -> Result<Option<Vec<f64>>> {
        match self {
            ForwardOp::DiagonalHeat => Ok(Some(basis.eigenvalues(n)?.into_iter().map(|a| (-a).exp()).collect())),
            ForwardOp::DiagonalGeneral(kappa) => {
                if kappa.len() < n {
                    return Err(Error::LengthMismatch { left: kappa.len(), right: n });
                }
                Ok(Some(kappa[..n].to_vec()))
            }
            ForwardOp::Dense { .. } => Ok(None),
        }
    }

    pub fn apply(&self, basis: &SpectralBasis, u: &CoeffVec) -> Result<CoeffVec> {
        match self {
            ForwardOp::Dense { rows, cols, data } => {
                check_len(u.len(), *cols)?;
                let out = (0..*rows)
                    .map(|i| compensated_sum(data[i * cols..(i + 1) * cols].iter().zip(u.iter()).map(|(a, x)| a * x)))
                    .collect();
                CoeffVec::new(out)
            }
            _ => {
                let kappa = self.singular_values(basis, u.len())?.unwrap();
                CoeffVec::new(kappa.iter().zip(u.iter()).map(|(k, x)| k * x).collect())
            }
        }
    }
}

/// Gaussian-noise potential (Cameron–Martin formula):
/// `Ψ(z, y) = Σ_k (z_k² / (2λ_k) - z_k y_k / λ_k)`.
pub fn psi_gaussian(variances: &[f64], z: &CoeffVec, y: &CoeffVec) -> Result<f64> {
    check_len(z.len(), y.len())?;
    check_len(z.len(), variances.len())?;
    Ok(compensated_sum(
        variances
            .iter()
            .zip(z.iter().zip(y.iter()))
            .map(|(l, (zk, yk))| zk * zk / (2.0 * l) - zk * yk / l),
    ))
}

/// Laplacian-noise potential `Ψ(z, y) = √2 Σ_k (|y_k - z_k| - |y_k|) / √λ_k`.
pub fn psi_laplacian(variances: &[f64], z: &CoeffVec, y: &CoeffVec) -> Result<f64> {
    check_len(z.len(), y.len())?;
    check_len(z.len(), variances.len())?;
    Ok(SQRT_2
        * compensated_sum(
            variances
                .iter()
                .zip(z.iter().zip(y.iter()))
                .map(|(l, (zk, yk))| ((yk - zk).abs() - yk.abs()) / l.sqrt()),
        ))
}

/// Negative log-likelihood of the heat problem with Laplacian noise
/// `b² A^{-β}`: `Φ(u, y) = (√2 / b) Σ_k α_k^{β/2} (|y_k - e^{-α_k} u_k| - |y_k|)`.
///
/// Terms are accumulated in ascending `k` with compensation.
pub fn phi_heat(basis: &SpectralBasis, b: f64, beta: f64, u: &CoeffVec, y: &CoeffVec) -> Result<f64> {
    check_len(u.len(), y.len())?;
    let alphas = basis.eigenvalues(u.len())?;
    Ok(phi_heat_slice(&alphas, b, beta, u.as_slice(), y.as_slice()))
}

pub(crate) fn phi_heat_slice(alphas: &[f64], b: f64, beta: f64, u: &[f64], y: &[f64]) -> f64 {
    let sum = compensated_sum(alphas.iter().zip(u.iter().zip(y)).map(|(a, (uk, yk))| {
        a.powf(beta / 2.0) * ((yk - (-a).exp() * uk).abs() - yk.abs())
    }));
    SQRT_2 / b * sum
}

/// Lipschitz and cone constants of `u ↦ Φ(u, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LipschitzInfo {
    /// Global Lipschitz constant.
    pub l: f64,
    /// `|Φ(u,y) - Φ(0,y)| ≤ l0 ‖u‖`.
    pub l0: f64,
    /// Lower cone: `Φ(u,y) ≥ Φ(0,y) - l_lower ‖u‖`.
    pub l_lower: f64,
}

/// `L = (√2 / b) β^β e^{-β} (Tr A^{-β})^{1/2}`, with the trace replaced by
/// the upper end of the bracket from [`SpectralBasis::trace_power`].
///
/// Uses `sup_{α>0} α^β e^{-α} = β^β e^{-β}`.
pub fn lipschitz_bound(basis: &SpectralBasis, b: f64, beta: f64, n: usize) -> Result<f64> {
    let trace = basis.trace_power(beta, n)?.upper();
    Ok(SQRT_2 / b * (beta * beta.ln() - beta).exp() * trace.sqrt())
}

/// For the heat potential all three constants coincide with [`lipschitz_bound`].
pub fn lipschitz_info(basis: &SpectralBasis, b: f64, beta: f64, n: usize) -> Result<LipschitzInfo> {
    let l = lipschitz_bound(basis, b, beta, n)?;
    Ok(LipschitzInfo { l, l0: l, l_lower: l })
}
