//! Gaussian and Laplacian product measures in coefficient space.
//!
//! Both families are diagonal in the fixed eigenbasis: coordinate `k` is an
//! independent scalar law with variance `q_k` (Gaussian) or `λ_k` (Laplace).
//! The scalar Laplace law is parameterized by its mean `a` and variance `λ`,
//! with density `(2λ)^{-1/2} exp(-√2 |x - a| / √λ)`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::{compensated_sum, excess_over_log1p, laplace_quantile};
use crate::rng::{self, StreamRng};
use crate::spectral::{CoeffVec, SpectralBasis};

/// Gaussian prior `N(0, r² A^{-τ})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub r: f64,
    pub tau: f64,
}

impl PriorSpec {
    pub fn new(r: f64, tau: f64, basis: &SpectralBasis) -> Result<Self> {
        let prior = PriorSpec { r, tau };
        prior.validate(basis)?;
        Ok(prior)
    }

    pub fn validate(&self, basis: &SpectralBasis) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::constraint("r > 0", format!("r = {}", self.r)));
        }
        if !(self.tau > basis.half_dim()) || !self.tau.is_finite() {
            return Err(Error::constraint(
                "tau > d/2",
                format!("tau = {}, d/2 = {}", self.tau, basis.half_dim()),
            ));
        }
        Ok(())
    }

    /// `q_k = r² α_k^{-τ}` for `k = 1..=n`.
    pub fn variances(&self, basis: &SpectralBasis, n: usize) -> Result<Vec<f64>> {
        let r2 = self.r * self.r;
        Ok(basis
            .eigenvalues(n)?
            .into_iter()
            .map(|a| r2 * a.powf(-self.tau))
            .collect())
    }
}

fn check_variances(variances: &[f64]) -> Result<()> {
    if let Some(k) = variances.iter().position(|q| !(*q > 0.0 && q.is_finite())) {
        return Err(Error::constraint(
            "variance_k > 0",
            format!("variance {} = {}", k + 1, variances[k]),
        ));
    }
    Ok(())
}

/// Centered Gaussian product measure `N_Q` with `Q = diag(q_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianProductMeasure {
    variances: Vec<f64>,
}

impl GaussianProductMeasure {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        check_variances(&variances)?;
        Ok(Self { variances })
    }

    pub fn from_prior(prior: &PriorSpec, basis: &SpectralBasis, n: usize) -> Result<Self> {
        prior.validate(basis)?;
        Self::new(prior.variances(basis, n)?)
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    pub fn trace(&self) -> f64 {
        compensated_sum(self.variances.iter().copied())
    }

    /// Karhunen–Loève draw into `out`.
    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for (x, q) in out.iter_mut().zip(&self.variances) {
            *x = q.sqrt() * rng::standard_normal(rng);
        }
    }

    pub fn sample_with(&self, rng: &mut StreamRng) -> CoeffVec {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        CoeffVec::from_vec_unchecked(out)
    }

    /// Draw from stream 0 of `seed`.
    pub fn sample(&self, seed: u64) -> CoeffVec {
        self.sample_with(&mut rng::stream(seed, 0))
    }

    /// `log dN_{h,Q}/dN_Q (x) = Σ_k (h_k x_k / q_k - h_k² / (2 q_k))`.
    pub fn shift_log_density(&self, h: &CoeffVec, x: &CoeffVec) -> Result<f64> {
        check_len(h.len(), self.dim())?;
        check_len(x.len(), self.dim())?;
        Ok(self.shift_log_density_slice(h.as_slice(), x.as_slice()))
    }

    pub(crate) fn shift_log_density_slice(&self, h: &[f64], x: &[f64]) -> f64 {
        compensated_sum(
            self.variances
                .iter()
                .zip(h.iter().zip(x))
                .map(|(q, (hk, xk))| hk * xk / q - hk * hk / (2.0 * q)),
        )
    }

    /// `‖h‖_E = ‖Q^{-1/2} h‖`.
    pub fn cameron_martin_norm(&self, h: &CoeffVec) -> Result<f64> {
        check_len(h.len(), self.dim())?;
        Ok(compensated_sum(self.variances.iter().zip(h.iter()).map(|(q, hk)| hk * hk / q)).sqrt())
    }
}

/// Laplacian product measure `L_{a,Q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianProductMeasure {
    mean: CoeffVec,
    variances: Vec<f64>,
}

impl LaplacianProductMeasure {
    pub fn new(mean: CoeffVec, variances: Vec<f64>) -> Result<Self> {
        check_len(mean.len(), variances.len())?;
        check_variances(&variances)?;
        Ok(Self { mean, variances })
    }

    pub fn centered(variances: Vec<f64>) -> Result<Self> {
        Self::new(CoeffVec::zeros(variances.len()), variances)
    }

    pub fn mean(&self) -> &CoeffVec {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn dim(&self) -> usize {
        self.variances.len()
    }

    /// Inverse-CDF draw into `out`, one open-interval uniform per coordinate.
    pub fn sample_into(&self, rng: &mut StreamRng, out: &mut [f64]) {
        for ((x, a), lam) in out.iter_mut().zip(self.mean.iter()).zip(&self.variances) {
            *x = laplace_quantile(rng::open_uniform(rng), *a, *lam);
        }
    }

    pub fn sample_with(&self, rng: &mut StreamRng) -> CoeffVec {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        CoeffVec::from_vec_unchecked(out)
    }

    pub fn sample(&self, seed: u64) -> CoeffVec {
        self.sample_with(&mut rng::stream(seed, 0))
    }

    /// Log-density of the measure shifted by `a` with respect to this one:
    /// `-√2 Σ_k (|x_k - m_k - a_k| - |x_k - m_k|) / √λ_k`.
    pub fn shift_log_density(&self, a: &CoeffVec, x: &CoeffVec) -> Result<f64> {
        check_len(a.len(), self.dim())?;
        check_len(x.len(), self.dim())?;
        Ok(-SQRT_2
            * compensated_sum(self.variances.iter().enumerate().map(|(k, lam)| {
                let centered = x[k] - self.mean[k];
                ((centered - a[k]).abs() - centered.abs()) / lam.sqrt()
            })))
    }
}

/// Hellinger affinity `∫ √(dν/dμ) dμ` of scalar Laplace laws with equal
/// variance `λ` and means `0` and `a`: `(1 + t) e^{-t}` with `t = |a| / √(2λ)`.
pub fn hellinger_component(a: f64, lambda: f64) -> f64 {
    let t = a.abs() / (2.0 * lambda).sqrt();
    (1.0 + t) * (-t).exp()
}

/// `-ln` of [`hellinger_component`], accurate for tiny shifts.
pub fn neg_log_hellinger_component(a: f64, lambda: f64) -> f64 {
    excess_over_log1p(a.abs() / (2.0 * lambda).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Equivalent,
    Singular,
    Inconclusive,
}

/// Equivalent when the last [`STABLE_WINDOW`] grid increments of `-ln H_n`
/// sum below this.
pub const STABLE_TOLERANCE: f64 = 1e-6;
pub const STABLE_WINDOW: usize = 10;
/// Singular when `-ln H_n` exceeds this with a non-decreasing trend.
pub const SINGULAR_THRESHOLD: f64 = 30.0;

/// Partial Hellinger products `H_n = Π_{k≤n} H_k` on a truncation grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KakutaniReport {
    pub truncations: Vec<usize>,
    pub affinities: Vec<f64>,
    pub neg_log_affinities: Vec<f64>,
    /// Σ a_k²/(12 λ_k) over coordinates `k ≤ n` with `|a_k| / √(2λ_k) < 1`.
    pub bracket_lower: Vec<f64>,
    /// Σ a_k²/(4 λ_k) over the same coordinates.
    pub bracket_upper: Vec<f64>,
    /// `-ln H_n` restricted to the same coordinates; lies in the bracket.
    pub bracketed_part: Vec<f64>,
    pub verdict: Verdict,
}

/// Decides equivalence (`H > 0`) or singularity (`H = 0`) of `L_{a,Q}` and
/// `L_Q` from truncated Hellinger products.
///
/// Truncation cannot prove a limit; the verdict is "equivalent" when the tail
/// increments have died out, "singular" once `-ln H_n` is past
/// [`SINGULAR_THRESHOLD`] and the per-coordinate increments are not shrinking,
/// and "inconclusive" otherwise.
pub fn kakutani_diagnostic(a: &CoeffVec, variances: &[f64], grid: &[usize]) -> Result<KakutaniReport> {
    if grid.is_empty() {
        return Err(Error::Domain("truncation grid is empty".into()));
    }
    if grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("truncation grid must be strictly increasing and start at 1 or later".into()));
    }
    let n_max = *grid.last().unwrap();
    if a.len() < n_max || variances.len() < n_max {
        return Err(Error::Domain(format!(
            "grid reaches n = {n_max} but shift has {} and variances {} entries",
            a.len(),
            variances.len()
        )));
    }
    check_variances(&variances[..n_max])?;

    let mut neg_log = crate::numeric::CompensatedSum::new();
    let mut lower = 0.0;
    let mut upper = 0.0;
    let mut bracketed = crate::numeric::CompensatedSum::new();
    let mut report = KakutaniReport {
        truncations: grid.to_vec(),
        affinities: Vec::with_capacity(grid.len()),
        neg_log_affinities: Vec::with_capacity(grid.len()),
        bracket_lower: Vec::with_capacity(grid.len()),
        bracket_upper: Vec::with_capacity(grid.len()),
        bracketed_part: Vec::with_capacity(grid.len()),
        verdict: Verdict::Inconclusive,
    };
    let mut k = 0;
    for &n in grid {
        while k < n {
            let (ak, lam) = (a[k], variances[k]);
            let inc = neg_log_hellinger_component(ak, lam);
            neg_log.add(inc);
            if ak.abs() / (2.0 * lam).sqrt() < 1.0 {
                let rel = ak * ak / lam;
                lower += rel / 12.0;
                upper += rel / 4.0;
                bracketed.add(inc);
            }
            k += 1;
        }
        let v = neg_log.value();
        report.neg_log_affinities.push(v);
        report.affinities.push((-v).exp());
        report.bracket_lower.push(lower);
        report.bracket_upper.push(upper);
        report.bracketed_part.push(bracketed.value());
    }
    report.verdict = classify(grid, &report.neg_log_affinities);
    Ok(report)
}

/// Grid increments of a monotone partial-sum sequence, the first one measured
/// from zero.
pub(crate) fn grid_increments(values: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    values
        .iter()
        .map(|&v| {
            let inc = v - prev;
            prev = v;
            inc
        })
        .collect()
}

/// True when the last [`STABLE_WINDOW`] increments sum below [`STABLE_TOLERANCE`].
pub(crate) fn has_stabilized(values: &[f64]) -> bool {
    let incs = grid_increments(values);
    let window = &incs[incs.len().saturating_sub(STABLE_WINDOW)..];
    window.iter().sum::<f64>() < STABLE_TOLERANCE
}

fn classify(grid: &[usize], neg_log: &[f64]) -> Verdict {
    if has_stabilized(neg_log) {
        return Verdict::Equivalent;
    }
    let last = *neg_log.last().unwrap();
    if last > SINGULAR_THRESHOLD {
        let incs = grid_increments(neg_log);
        let mut prev_n = 0;
        let per_coord: Vec<f64> = grid
            .iter()
            .zip(&incs)
            .map(|(&n, inc)| {
                let width = (n - prev_n) as f64;
                prev_n = n;
                inc / width
            })
            .collect();
        let window = &per_coord[per_coord.len().saturating_sub(STABLE_WINDOW)..];
        let non_decreasing = window.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        if non_decreasing {
            return Verdict::Singular;
        }
    }
    Verdict::Inconclusive
}
