use std::f64::consts::SQRT_2;

use crate::error::{check_len, Result};
use crate::inference::likelihood::{phi_heat_slice, psi_gaussian, psi_laplacian, ForwardOp, NoiseKind, NoiseModel};
use crate::inference::solver::{self, MapSolution, SolverOptions};
use crate::measures::{GaussianProductMeasure, PriorSpec};
use crate::numeric::{compensated_sum, laplace_quantile, scale_by_exp};
use crate::rng::{self, StreamRng};
use crate::spectral::{CoeffVec, SpectralBasis};

/// The linear inverse problem `y = e^{-A} u + η` truncated at `n`, with prior
/// `N(0, r² A^{-τ})` and noise covariance `b² A^{-β}`.
#[derive(Clone, Debug)]
pub struct HeatProblem {
    basis: SpectralBasis,
    prior: PriorSpec,
    noise: NoiseModel,
    alphas: Vec<f64>,
    noise_variances: Vec<f64>,
    prior_variances: Vec<f64>,
}

impl HeatProblem {
    pub fn new(basis: SpectralBasis, prior: PriorSpec, noise: NoiseModel, n: usize) -> Result<Self> {
        basis.validate()?;
        prior.validate(&basis)?;
        noise.validate(&basis)?;
        let alphas = basis.eigenvalues(n)?;
        let noise_variances = noise.variances(&basis, n)?;
        let prior_variances = prior.variances(&basis, n)?;
        Ok(Self {
            basis,
            prior,
            noise,
            alphas,
            noise_variances,
            prior_variances,
        })
    }

    pub fn truncation(&self) -> usize {
        self.alphas.len()
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.alphas
    }

    /// `λ_k = b² α_k^{-β}`.
    pub fn noise_variances(&self) -> &[f64] {
        &self.noise_variances
    }

    /// `q_k = r² α_k^{-τ}`.
    pub fn prior_variances(&self) -> &[f64] {
        &self.prior_variances
    }

    pub fn prior_measure(&self) -> GaussianProductMeasure {
        GaussianProductMeasure::new(self.prior_variances.clone()).expect("validated at construction")
    }

    /// Same problem with a different noise level `b` (and prior scale `r`).
    pub fn with_levels(&self, b: f64, r: f64) -> Result<Self> {
        let prior = PriorSpec { r, tau: self.prior.tau };
        let noise = NoiseModel { b, ..self.noise };
        Self::new(self.basis.clone(), prior, noise, self.truncation())
    }

    fn check(&self, v: &CoeffVec) -> Result<()> {
        check_len(v.len(), self.truncation())
    }

    /// `Φ(u, y) = Ψ(e^{-A} u, y)` for the configured noise kind.
    pub fn phi(&self, u: &CoeffVec, y: &CoeffVec) -> Result<f64> {
        self.check(u)?;
        self.check(y)?;
        Ok(self.phi_slice(u.as_slice(), y.as_slice()))
    }

    /// [`Self::phi`] on raw slices, both of length [`Self::truncation`].
    pub fn phi_slice(&self, u: &[f64], y: &[f64]) -> f64 {
        debug_assert!(u.len() == self.truncation() && y.len() == self.truncation());
        match self.noise.kind {
            NoiseKind::Laplacian => phi_heat_slice(&self.alphas, self.noise.b, self.noise.beta, u, y),
            NoiseKind::Gaussian => compensated_sum(self.alphas.iter().zip(&self.noise_variances).zip(u.iter().zip(y)).map(
                |((a, l), (uk, yk))| {
                    let z = (-a).exp() * uk;
                    z * z / (2.0 * l) - z * yk / l
                },
            )),
        }
    }

    /// `Φ(u, y)` for an arbitrary linear forward operator.
    pub fn phi_with(&self, forward: &ForwardOp, u: &CoeffVec, y: &CoeffVec) -> Result<f64> {
        self.check(u)?;
        self.check(y)?;
        let z = forward.apply(&self.basis, u)?;
        match self.noise.kind {
            NoiseKind::Laplacian => psi_laplacian(&self.noise_variances, &z, y),
            NoiseKind::Gaussian => psi_gaussian(&self.noise_variances, &z, y),
        }
    }

    /// `(1 / 2r²) ‖u‖²_{X^τ} = Σ_k α_k^τ u_k² / (2r²)`, i.e. half the squared
    /// Cameron–Martin norm of the prior.
    pub fn penalty(&self, u: &CoeffVec) -> Result<f64> {
        self.check(u)?;
        Ok(self.penalty_slice(u.as_slice()))
    }

    fn penalty_slice(&self, u: &[f64]) -> f64 {
        compensated_sum(self.prior_variances.iter().zip(u).map(|(q, uk)| uk * uk / (2.0 * q)))
    }

    /// Onsager–Machlup functional `I^y(u) = Φ(u, y) + (1/2r²) ‖u‖²_{X^τ}`.
    pub fn om_functional(&self, y: &CoeffVec, u: &CoeffVec) -> Result<f64> {
        Ok(self.phi(u, y)? + self.penalty(u)?)
    }

    /// `I^y` with an arbitrary linear forward operator.
    pub fn om_functional_with(&self, forward: &ForwardOp, y: &CoeffVec, u: &CoeffVec) -> Result<f64> {
        Ok(self.phi_with(forward, u, y)? + self.penalty(u)?)
    }

    /// Scalar summand `f_k` of `I^y`, so that `I^y(u) = Σ_k f_k(u_k)`.
    /// `k` is 1-based.
    pub fn coordinate_objective(&self, k: usize, y_k: f64, u_k: f64) -> f64 {
        let a = self.alphas[k - 1];
        let l = self.noise_variances[k - 1];
        let penalty = u_k * u_k / (2.0 * self.prior_variances[k - 1]);
        let z = (-a).exp() * u_k;
        let data = match self.noise.kind {
            NoiseKind::Laplacian => SQRT_2 / self.noise.b * a.powf(self.noise.beta / 2.0) * ((z - y_k).abs() - y_k.abs()),
            NoiseKind::Gaussian => z * z / (2.0 * l) - z * y_k / l,
        };
        penalty + data
    }

    /// Half-widths `S_k = (r²/b) √2 α_k^{β/2 - τ} e^{-α_k}` of the interval the
    /// Laplacian MAP estimate is projected onto.
    pub fn clip_radii(&self) -> Vec<f64> {
        self.alphas.iter().map(|&a| self.clip_radius_from_alpha(a)).collect()
    }

    fn log_clip_radius(&self, a: f64) -> f64 {
        let r2 = self.prior.r * self.prior.r;
        (r2 / self.noise.b * SQRT_2).ln() + (self.noise.beta / 2.0 - self.prior.tau) * a.ln() - a
    }

    fn clip_radius_from_alpha(&self, a: f64) -> f64 {
        self.log_clip_radius(a).exp()
    }

    /// Closed-form MAP estimate for Laplacian noise: each `e^{α_k} y_k` is
    /// projected onto `[-S_k, S_k]`.
    ///
    /// The comparison runs in log space so `e^{α_k}` never has to be formed.
    pub fn map_laplacian_closed_form(&self, y: &CoeffVec) -> Result<CoeffVec> {
        self.check(y)?;
        let out = self
            .alphas
            .iter()
            .zip(y.iter())
            .map(|(&a, &yk)| {
                if yk == 0.0 {
                    return 0.0;
                }
                let log_radius = self.log_clip_radius(a);
                if yk.abs().ln() + a >= log_radius {
                    yk.signum() * log_radius.exp()
                } else {
                    scale_by_exp(yk, a)
                }
            })
            .collect();
        CoeffVec::new(out)
    }

    /// Closed-form MAP estimate for Gaussian noise:
    /// `u_k = κ_k y_k q_k / (κ_k² q_k + λ_k)` with `κ_k = e^{-α_k}`.
    pub fn map_gaussian_closed_form(&self, y: &CoeffVec) -> Result<CoeffVec> {
        self.check(y)?;
        let out = self
            .alphas
            .iter()
            .zip(&self.noise_variances)
            .zip(&self.prior_variances)
            .zip(y.iter())
            .map(|(((a, l), q), yk)| {
                let kappa = (-a).exp();
                kappa * yk * q / (kappa * kappa * q + l)
            })
            .collect();
        CoeffVec::new(out)
    }

    /// Closed-form MAP estimate for the configured noise kind.
    pub fn map_closed_form(&self, y: &CoeffVec) -> Result<CoeffVec> {
        match self.noise.kind {
            NoiseKind::Laplacian => self.map_laplacian_closed_form(y),
            NoiseKind::Gaussian => self.map_gaussian_closed_form(y),
        }
    }

    /// Draws `y = e^{-A} u† + η` with `η` from the configured noise law.
    pub fn sample_data(&self, u_dagger: &CoeffVec, rng: &mut StreamRng) -> Result<CoeffVec> {
        self.check(u_dagger)?;
        let mut y = vec![0.0; self.truncation()];
        self.sample_data_into(u_dagger.as_slice(), rng, &mut y);
        CoeffVec::new(y)
    }

    pub(crate) fn sample_data_into(&self, u_dagger: &[f64], rng: &mut StreamRng, out: &mut [f64]) {
        for (k, y) in out.iter_mut().enumerate() {
            let lam = self.noise_variances[k];
            let eta = match self.noise.kind {
                NoiseKind::Laplacian => laplace_quantile(rng::open_uniform(rng), 0.0, lam),
                NoiseKind::Gaussian => lam.sqrt() * rng::standard_normal(rng),
            };
            *y = scale_by_exp(u_dagger[k], -self.alphas[k]) + eta;
        }
    }

    /// Numerical minimization of `I^y` for a linear forward operator.
    ///
    /// Diagonal operators are solved coordinatewise by bisection on the
    /// subdifferential. Dense operators use a primal–dual scheme (Laplacian
    /// noise) or conjugate gradients (Gaussian noise).
    pub fn map_numeric(&self, forward: &ForwardOp, y: &CoeffVec, opts: &SolverOptions) -> Result<MapSolution> {
        self.check(y)?;
        solver::solve(self, forward, y, None, opts)
    }

    /// [`Self::map_numeric`] started from `init`.
    pub fn map_numeric_from(
        &self,
        forward: &ForwardOp,
        y: &CoeffVec,
        init: &CoeffVec,
        opts: &SolverOptions,
    ) -> Result<MapSolution> {
        self.check(y)?;
        self.check(init)?;
        solver::solve(self, forward, y, Some(init), opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn problem(kind: NoiseKind, n: usize) -> HeatProblem {
        let basis = SpectralBasis::exact_power(1.0, 2).unwrap();
        HeatProblem::new(
            basis,
            PriorSpec { r: 0.8, tau: 2.0 },
            NoiseModel { kind, b: 0.2, beta: 2.0 },
            n,
        )
        .unwrap()
    }

    fn cv(v: &[f64]) -> CoeffVec {
        CoeffVec::new(v.to_vec()).unwrap()
    }

    fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> CoeffVec {
        cv(&(0..n).map(|_| rng.random_range(-scale..scale)).collect::<Vec<_>>())
    }

    #[test]
    fn om_vanishes_at_zero() {
        let p = problem(NoiseKind::Laplacian, 6);
        let y = cv(&[0.3, -0.1, 0.05, 0.0, 1.0, -2.0]);
        assert_eq!(p.om_functional(&y, &CoeffVec::zeros(6)).unwrap(), 0.0);
        let g = problem(NoiseKind::Gaussian, 6);
        assert_eq!(g.om_functional(&y, &CoeffVec::zeros(6)).unwrap(), 0.0);
    }

    #[test]
    fn om_is_sum_of_coordinate_objectives() {
        for kind in [NoiseKind::Laplacian, NoiseKind::Gaussian] {
            let p = problem(kind, 5);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
            let y = random_vec(&mut rng, 5, 0.5);
            let u = random_vec(&mut rng, 5, 2.0);
            let total: f64 = (1..=5).map(|k| p.coordinate_objective(k, y[k - 1], u[k - 1])).sum();
            assert_relative_eq!(p.om_functional(&y, &u).unwrap(), total, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_objective_by_hand() {
        // n = 1: α = 1, r = 0.8, τ = 2, b = 0.2, β = 2
        let p = problem(NoiseKind::Laplacian, 1);
        let (y, u) = (0.4, 0.7);
        let e = (-1.0f64).exp();
        let hand = u * u / (2.0 * 0.64) + SQRT_2 / 0.2 * ((e * u - y).abs() - y.abs());
        assert_relative_eq!(p.om_functional(&cv(&[y]), &cv(&[u])).unwrap(), hand, epsilon = 1e-14);
    }

    #[test]
    fn om_is_midpoint_convex() {
        for kind in [NoiseKind::Laplacian, NoiseKind::Gaussian] {
            let p = problem(kind, 8);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
            for _ in 0..1000 {
                let y = random_vec(&mut rng, 8, 0.5);
                let u = random_vec(&mut rng, 8, 3.0);
                let v = random_vec(&mut rng, 8, 3.0);
                let mid = cv(&u.iter().zip(v.iter()).map(|(a, b)| 0.5 * (a + b)).collect::<Vec<_>>());
                let lhs = p.om_functional(&y, &mid).unwrap();
                let rhs = 0.5 * (p.om_functional(&y, &u).unwrap() + p.om_functional(&y, &v).unwrap());
                assert!(lhs <= rhs + 1e-12 * (1.0 + rhs.abs()), "{lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn laplacian_map_examples() {
        let p = problem(NoiseKind::Laplacian, 6);
        assert_eq!(p.map_laplacian_closed_form(&CoeffVec::zeros(6)).unwrap(), CoeffVec::zeros(6));
        // interior coordinate: exact inversion
        let radii = p.clip_radii();
        let inside = 0.5 * radii[1] * (-2.0f64).exp();
        let u = p.map_laplacian_closed_form(&cv(&[0.0, inside, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(u[1], inside * 2f64.exp(), max_relative = 1e-14);
        // far outside: clipped to ±S_k
        let u = p.map_laplacian_closed_form(&cv(&[10.0, -10.0, 0.0, 0.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(u[0], radii[0], max_relative = 1e-14);
        assert_relative_eq!(u[1], -radii[1], max_relative = 1e-14);
    }

    #[test]
    fn laplacian_map_boundary_is_continuous() {
        let p = problem(NoiseKind::Laplacian, 3);
        let s = p.clip_radii();
        for k in 0..3 {
            let edge = s[k] * (-((k + 1) as f64)).exp();
            let mut y = vec![0.0; 3];
            y[k] = edge;
            let at = p.map_laplacian_closed_form(&cv(&y)).unwrap()[k];
            y[k] = edge * (1.0 + 1e-12);
            let past = p.map_laplacian_closed_form(&cv(&y)).unwrap()[k];
            assert_relative_eq!(at, s[k], max_relative = 1e-12);
            assert_relative_eq!(past, s[k], max_relative = 1e-12);
        }
    }

    #[test]
    fn laplacian_map_first_order_optimality() {
        let p = problem(NoiseKind::Laplacian, 10);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..100 {
            let y = random_vec(&mut rng, 10, 0.3);
            let u = p.map_laplacian_closed_form(&y).unwrap();
            for k in 1..=10 {
                let f0 = p.coordinate_objective(k, y[k - 1], u[k - 1]);
                for delta in [1e-4, 1e-2] {
                    assert!(f0 <= p.coordinate_objective(k, y[k - 1], u[k - 1] + delta));
                    assert!(f0 <= p.coordinate_objective(k, y[k - 1], u[k - 1] - delta));
                }
            }
        }
    }

    #[test]
    fn laplacian_map_beats_random_points() {
        let p = problem(NoiseKind::Laplacian, 5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let y = random_vec(&mut rng, 5, 0.3);
        let best = p.om_functional(&y, &p.map_laplacian_closed_form(&y).unwrap()).unwrap();
        for _ in 0..10_000 {
            let u = random_vec(&mut rng, 5, 2.0);
            assert!(best <= p.om_functional(&y, &u).unwrap());
        }
    }

    #[test]
    fn gaussian_map_examples() {
        let p = problem(NoiseKind::Gaussian, 4);
        assert_eq!(p.map_gaussian_closed_form(&CoeffVec::zeros(4)).unwrap(), CoeffVec::zeros(4));
        // vanishing noise: data term dominates and the estimate inverts e^{-A}
        let tiny = HeatProblem::new(
            p.basis().clone(),
            *p.prior(),
            NoiseModel { kind: NoiseKind::Gaussian, b: 1e-5, beta: 2.0 },
            1,
        )
        .unwrap();
        let b = tiny.basis().eigenvalue(1).unwrap();
        let l = tiny.noise_variances()[0];
        assert_relative_eq!(l, 1e-10);
        let y = cv(&[0.2]);
        let u = tiny.map_gaussian_closed_form(&y).unwrap();
        assert_relative_eq!(u[0], b.exp() * 0.2, max_relative = 1e-6);
    }

    #[test]
    fn large_alpha_does_not_overflow() {
        let basis = SpectralBasis::exact_power(400.0, 2).unwrap();
        let p = HeatProblem::new(
            basis,
            PriorSpec { r: 1.0, tau: 2.0 },
            NoiseModel { kind: NoiseKind::Laplacian, b: 0.1, beta: 2.0 },
            3,
        )
        .unwrap();
        let u = p.map_laplacian_closed_form(&cv(&[1e-300, 1.0, -1.0])).unwrap();
        assert!(u.iter().all(|x| x.is_finite()));
        assert_eq!(u[2], -0.0);
    }
}
