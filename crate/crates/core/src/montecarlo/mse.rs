use std::f64::consts::SQRT_2;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::exec::{block_count, block_range, Execution};
use crate::inference::{HeatProblem, NoiseKind};
use crate::numeric::{clipping_loss, ls_slope, CompensatedSum};
use crate::rng;
use crate::spectral::{CoeffVec, SpectralBasis};

const REPLICATE_BLOCK: usize = 1024;

/// Source condition `u† = A^{β/2 - τ} e^{-A} w` with `sup_k |w_k| ≤ ρ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SourceCondition {
    w: CoeffVec,
    rho: f64,
}

impl SourceCondition {
    pub fn new(w: CoeffVec, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::constraint("rho > 0", format!("rho = {rho}")));
        }
        let sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup > rho {
            return Err(Error::constraint("sup |w_k| <= rho", format!("sup |w_k| = {sup}, rho = {rho}")));
        }
        Ok(Self { w, rho })
    }

    pub fn w(&self) -> &CoeffVec {
        &self.w
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn source(&self, basis: &SpectralBasis, beta: f64, tau: f64) -> Result<CoeffVec> {
        build_source(basis, beta, tau, &self.w, self.rho)
    }
}

/// `u†_k = α_k^{β/2 - τ} e^{-α_k} w_k`, after checking `sup_k |w_k| ≤ ρ`.
pub fn build_source(basis: &SpectralBasis, beta: f64, tau: f64, w: &CoeffVec, rho: f64) -> Result<CoeffVec> {
    SourceCondition::new(w.clone(), rho)?;
    let s = beta / 2.0 - tau;
    let out = w
        .iter()
        .enumerate()
        .map(|(i, wk)| Ok(basis.heat_power_factor(i + 1, s)? * wk))
        .collect::<Result<Vec<f64>>>()?;
    CoeffVec::new(out)
}

/// `f(t) / t²` with `f(t) = 1 - e^{-t} - t e^{-t}`; tends to `1/2` at `0`.
fn clipping_loss_ratio(t: f64) -> f64 {
    if t < 1e-150 {
        0.5
    } else {
        clipping_loss(t) / (t * t)
    }
}

/// Exact `E(û_k - u†_k)²` of the Laplacian MAP estimate in coordinate `k`
/// (1-based) when `|u†_k|` lies inside the clipping interval `[-S_k, S_k]`.
///
/// With `s_k = b / c_k`, `c_k = √2 α_k^{β/2} e^{-α_k}`, the Laplace scale of
/// `e^{α_k} η_k`, the value is `s_k² [f((S_k + |u†_k|)/s_k) + f((S_k - |u†_k|)/s_k)]`.
/// Returns `None` for Gaussian noise or when `|u†_k| > S_k`.
pub fn mse_component_analytic(problem: &HeatProblem, u_dagger_k: f64, k: usize) -> Option<f64> {
    if problem.noise().kind != NoiseKind::Laplacian || k == 0 || k > problem.truncation() {
        return None;
    }
    let alpha = problem.eigenvalues()[k - 1];
    let noise = problem.noise();
    let radius = problem.clip_radii()[k - 1];
    let u = u_dagger_k.abs();
    if u > radius {
        return None;
    }
    let log_scale = noise.b.ln() - (SQRT_2.ln() + noise.beta / 2.0 * alpha.ln() - alpha);
    let term = |x: f64| {
        let t = (x.ln() - log_scale).exp();
        x * x * clipping_loss_ratio(t)
    };
    let outer = radius + u;
    let inner = radius - u;
    Some(term(outer) + if inner > 0.0 { term(inner) } else { 0.0 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MseReport {
    /// `Σ_k per_component[k]`.
    pub mse: f64,
    /// Standard error of the mean of `‖û - u†‖²` over replicates.
    pub std_err: f64,
    pub per_component: Vec<f64>,
    pub per_component_std_err: Vec<f64>,
    pub replicates: usize,
}

struct ReplicateSums {
    comp: Vec<f64>,
    comp_sq: Vec<f64>,
    total: f64,
    total_sq: f64,
}

/// Monte Carlo risk of the closed-form MAP estimate: replicate `i` draws
/// `y = e^{-A} u† + η` from stream `i` of `seed`.
pub fn mse_monte_carlo(
    problem: &HeatProblem,
    u_dagger: &CoeffVec,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<MseReport> {
    let n = problem.truncation();
    check_len(u_dagger.len(), n)?;
    if replicates < 2 {
        return Err(Error::constraint("replicates >= 2", format!("replicates = {replicates}")));
    }
    let blocks = block_count(replicates, REPLICATE_BLOCK);
    let partials = exec.map_indexed(blocks, |b| -> Result<ReplicateSums> {
        let (start, len) = block_range(replicates, REPLICATE_BLOCK, b);
        let mut acc = ReplicateSums {
            comp: vec![0.0; n],
            comp_sq: vec![0.0; n],
            total: 0.0,
            total_sq: 0.0,
        };
        let mut y = vec![0.0; n];
        for i in start..start + len {
            let mut rng = rng::stream(seed, i as u64);
            problem.sample_data_into(u_dagger.as_slice(), &mut rng, &mut y);
            let est = problem.map_closed_form(&CoeffVec::from_vec_unchecked(y.clone()))?;
            let mut total = 0.0;
            for k in 0..n {
                let e = (est[k] - u_dagger[k]).powi(2);
                acc.comp[k] += e;
                acc.comp_sq[k] += e * e;
                total += e;
            }
            acc.total += total;
            acc.total_sq += total * total;
        }
        Ok(acc)
    });

    let mut comp = vec![CompensatedSum::new(); n];
    let mut comp_sq = vec![CompensatedSum::new(); n];
    let mut total = CompensatedSum::new();
    let mut total_sq = CompensatedSum::new();
    for part in partials {
        let part = part?;
        for k in 0..n {
            comp[k].add(part.comp[k]);
            comp_sq[k].add(part.comp_sq[k]);
        }
        total.add(part.total);
        total_sq.add(part.total_sq);
    }
    let m = replicates as f64;
    let std_err = |sum: f64, sq: f64| {
        let mean = sum / m;
        ((sq / m - mean * mean).max(0.0) * m / (m - 1.0) / m).sqrt()
    };
    let per_component: Vec<f64> = comp.iter().map(|c| c.value() / m).collect();
    let per_component_std_err = comp.iter().zip(&comp_sq).map(|(c, s)| std_err(c.value(), s.value())).collect();
    Ok(MseReport {
        mse: per_component.iter().sum(),
        std_err: std_err(total.value(), total_sq.value()),
        per_component,
        per_component_std_err,
        replicates,
    })
}

/// Noise-level sweep with the prior scale coupled as `r² = C b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateSettings {
    /// Strictly decreasing positive noise levels.
    pub b_grid: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub b: f64,
    pub r2: f64,
    pub mse: f64,
    pub std_err: f64,
    /// `2 C (Σ_{k≤n} α_k^{-τ}) b`.
    pub bound: f64,
    /// `mse ≤ bound + 3 std_err`.
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `ln mse` against `ln b` over rows whose standard
    /// error is below 10% of the estimate; `None` with fewer than two such rows.
    pub slope: Option<f64>,
    pub slope_points: usize,
    pub trace: f64,
    pub all_pass: bool,
}

/// Runs [`mse_monte_carlo`] at each `b` with `r = √(C b)` and compares
/// against the bound `2 C Tr(A^{-τ}) b`, the trace taken over the truncation.
/// The same replicate streams are reused at every grid point.
pub fn rate_experiment(
    problem: &HeatProblem,
    source: &SourceCondition,
    settings: &RateSettings,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<RateReport> {
    if problem.noise().kind != NoiseKind::Laplacian {
        return Err(Error::constraint("noise kind = laplacian", "rate experiment requires Laplacian noise"));
    }
    let grid = &settings.b_grid;
    if grid.is_empty() || grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::constraint("b_grid entries > 0", format!("b_grid = {grid:?}")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::constraint("b_grid strictly decreasing", format!("b_grid = {grid:?}")));
    }
    let min_c = source.rho() / SQRT_2;
    if !(settings.c >= min_c) || !settings.c.is_finite() {
        return Err(Error::constraint("C >= rho/sqrt(2)", format!("C = {}, rho/sqrt(2) = {min_c}", settings.c)));
    }
    let tau = problem.prior().tau;
    let beta = problem.noise().beta;
    let n = problem.truncation();
    check_len(source.w().len(), n)?;
    let u_dagger = source.source(problem.basis(), beta, tau)?;
    let trace = problem.basis().trace_power(tau, n)?.partial;

    let mut rows = Vec::with_capacity(grid.len());
    for &b in grid {
        let r2 = settings.c * b;
        let p = problem.with_levels(b, r2.sqrt())?;
        let report = mse_monte_carlo(&p, &u_dagger, replicates, seed, exec)?;
        let bound = 2.0 * settings.c * trace * b;
        rows.push(RateRow {
            b,
            r2,
            mse: report.mse,
            std_err: report.std_err,
            bound,
            pass: report.mse <= bound + 3.0 * report.std_err,
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.mse > 0.0 && r.std_err < 0.1 * r.mse)
        .map(|r| (r.b.ln(), r.mse.ln()))
        .unzip();
    let slope = if xs.len() >= 2 { ls_slope(&xs, &ys) } else { None };
    Ok(RateReport {
        all_pass: rows.iter().all(|r| r.pass),
        rows,
        slope,
        slope_points: xs.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::NoiseModel;
    use crate::measures::PriorSpec;
    use approx::assert_relative_eq;

    fn problem(b: f64, r: f64, n: usize) -> HeatProblem {
        HeatProblem::new(
            SpectralBasis::exact_power(1.0, 2).unwrap(),
            PriorSpec { r, tau: 2.0 },
            NoiseModel {
                kind: NoiseKind::Laplacian,
                b,
                beta: 2.0,
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn clipping_loss_values() {
        assert_eq!(clipping_loss(0.0), 0.0);
        assert_relative_eq!(clipping_loss(1.0), 1.0 - 2.0 / 1f64.exp(), max_relative = 1e-15);
        assert_relative_eq!(clipping_loss(1.0), 0.264241, epsilon = 1e-6);
        assert_relative_eq!(clipping_loss_ratio(1e-200), 0.5);
        assert_relative_eq!(clipping_loss_ratio(1e-4), 0.5 - 1e-4 / 3.0, max_relative = 1e-8);
    }

    #[test]
    fn source_examples() {
        let basis = SpectralBasis::exact_power(1.0, 2).unwrap();
        let zero = build_source(&basis, 2.0, 2.0, &CoeffVec::zeros(4), 1.0).unwrap();
        assert!(zero.iter().all(|x| *x == 0.0));
        let e1 = build_source(&basis, 2.0, 2.0, &CoeffVec::new(vec![1.0, 0.0, 0.0]).unwrap(), 1.0).unwrap();
        assert_relative_eq!(e1[0], (-1.0f64).exp(), max_relative = 1e-15);
        let err = build_source(&basis, 2.0, 2.0, &CoeffVec::new(vec![1.5]).unwrap(), 1.0).unwrap_err();
        assert_eq!(err.constraint_name(), Some("sup |w_k| <= rho"));
    }

    #[test]
    fn source_stays_inside_clipping_interval() {
        // |u†_k| ≤ S_k whenever r² ≥ ρ b / √2
        let rho = 1.0;
        for b in [0.1, 0.01, 0.001] {
            let r2 = rho * b / SQRT_2;
            let p = problem(b, r2.sqrt(), 40);
            let w = CoeffVec::new((0..40).map(|k| if k % 2 == 0 { rho } else { -rho }).collect()).unwrap();
            let u = build_source(p.basis(), 2.0, 2.0, &w, rho).unwrap();
            for (uk, s) in u.iter().zip(p.clip_radii()) {
                assert!(uk.abs() <= s * (1.0 + 1e-12), "{uk} > {s}");
            }
        }
    }

    #[test]
    fn analytic_component_for_zero_truth() {
        let p = problem(0.1, 0.5, 8);
        for k in 1..=8 {
            let alpha = k as f64;
            let c = SQRT_2 * alpha * (-alpha).exp();
            let s = p.clip_radii()[k - 1];
            let expected = 2.0 * (0.1 / c).powi(2) * clipping_loss(c * s / 0.1);
            assert_relative_eq!(mse_component_analytic(&p, 0.0, k).unwrap(), expected, max_relative = 1e-10);
        }
        assert!(mse_component_analytic(&p, 1e3, 1).is_none());
        assert!(mse_component_analytic(&p, 0.0, 9).is_none());
    }

    #[test]
    fn analytic_component_survives_extreme_alpha() {
        let p = HeatProblem::new(
            SpectralBasis::explicit(vec![1.0, 900.0], 2, 1.0, 900.0).unwrap(),
            PriorSpec { r: 1.0, tau: 2.0 },
            NoiseModel {
                kind: NoiseKind::Laplacian,
                b: 0.1,
                beta: 2.0,
            },
            2,
        )
        .unwrap();
        let v = mse_component_analytic(&p, 0.0, 2).unwrap();
        let s = p.clip_radii()[1];
        assert!(v.is_finite());
        assert_relative_eq!(v, s * s, max_relative = 1e-12);
    }

    #[test]
    fn monte_carlo_matches_analytic() {
        let p = problem(0.05, 0.3, 6);
        let w = CoeffVec::new(vec![0.5, -0.3, 0.2, 0.0, 0.1, -0.4]).unwrap();
        let u = build_source(p.basis(), 2.0, 2.0, &w, 1.0).unwrap();
        let report = mse_monte_carlo(&p, &u, 40_000, 17, Execution::Parallel).unwrap();
        for k in 1..=6 {
            if let Some(exact) = mse_component_analytic(&p, u[k - 1], k) {
                let (est, se) = (report.per_component[k - 1], report.per_component_std_err[k - 1]);
                assert!((est - exact).abs() <= 4.0 * se, "k={k}: {est} vs {exact} ± {se}");
            }
        }
        assert_eq!(report.mse, report.per_component.iter().sum::<f64>());
    }

    #[test]
    fn monte_carlo_is_reproducible_across_execution() {
        let p = problem(0.1, 0.3, 5);
        let u = CoeffVec::new(vec![0.1, 0.05, 0.0, 0.0, 0.0]).unwrap();
        let a = mse_monte_carlo(&p, &u, 3000, 1, Execution::Parallel).unwrap();
        let b = mse_monte_carlo(&p, &u, 3000, 1, Execution::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_truth_respects_hyperrectangle_bound() {
        let p = problem(10.0, 0.7, 16);
        let report = mse_monte_carlo(&p, &CoeffVec::zeros(16), 5000, 3, Execution::Parallel).unwrap();
        let bound = 2.0 * 0.49 * p.basis().trace_power(2.0, 16).unwrap().partial;
        assert!(report.mse <= bound);
    }

    #[test]
    fn rate_experiment_validation() {
        let p = problem(0.1, 1.0, 8);
        let source = SourceCondition::new(CoeffVec::new(vec![1.0; 8]).unwrap(), 1.0).unwrap();
        let run = |grid: Vec<f64>, c: f64| {
            rate_experiment(&p, &source, &RateSettings { b_grid: grid, c }, 100, 0, Execution::Parallel)
        };
        assert_eq!(run(vec![0.1, 0.2], 1.0).unwrap_err().constraint_name(), Some("b_grid strictly decreasing"));
        assert_eq!(run(vec![0.1], 0.5).unwrap_err().constraint_name(), Some("C >= rho/sqrt(2)"));
        let single = run(vec![0.1], 1.0).unwrap();
        assert_eq!(single.rows.len(), 1);
        assert!(single.slope.is_none());
        assert!(single.all_pass);
    }

    #[test]
    fn rate_bound_holds_and_mse_decreases() {
        let p = problem(0.1, 1.0, 32);
        let source = SourceCondition::new(CoeffVec::new(vec![1.0; 32]).unwrap(), 1.0).unwrap();
        let settings = RateSettings {
            b_grid: vec![1e-1, 1e-2, 1e-3],
            c: 1.0,
        };
        let report = rate_experiment(&p, &source, &settings, 2000, 5, Execution::Parallel).unwrap();
        assert!(report.all_pass);
        assert!(report.rows.windows(2).all(|w| w[1].mse < w[0].mse));
        assert!(report.slope.unwrap() > 0.9);
    }
}
