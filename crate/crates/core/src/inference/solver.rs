//! Numerical minimization of the Onsager–Machlup functional.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::inference::likelihood::{ForwardOp, NoiseKind};
use crate::inference::problem::HeatProblem;
use crate::spectral::CoeffVec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bisection: bracket width relative to `max(1, |u_k|)`. Primal–dual:
    /// duality gap relative to `max(1, |I|)`. Conjugate gradients: residual
    /// relative to the right-hand side.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// `max_iter` was reached; the solution holds the best iterate seen.
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MapSolution {
    pub u: CoeffVec,
    pub objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
}

impl MapSolution {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

pub(crate) fn solve(
    problem: &HeatProblem,
    forward: &ForwardOp,
    y: &CoeffVec,
    init: Option<&CoeffVec>,
    opts: &SolverOptions,
) -> Result<MapSolution> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::constraint("tol > 0 and max_iter >= 1", format!("{opts:?}")));
    }
    match forward {
        ForwardOp::Dense { rows, cols, data } => {
            let n = problem.truncation();
            check_len(*rows, n)?;
            check_len(*cols, n)?;
            let dense = Dense { n, data };
            let start = init.map_or_else(|| vec![0.0; n], |u| u.as_slice().to_vec());
            match problem.noise().kind {
                NoiseKind::Laplacian => primal_dual(problem, forward, &dense, y, start, opts),
                NoiseKind::Gaussian => conjugate_gradient(problem, forward, &dense, y, start, opts),
            }
        }
        _ => {
            let kappa = forward.singular_values(problem.basis(), problem.truncation())?.unwrap();
            diagonal(problem, forward, &kappa, y, init, opts)
        }
    }
}

/// One-dimensional convex objective `a u²/2 + D(κ u)`.
struct Scalar {
    /// Penalty curvature `1/q_k`.
    a: f64,
    kappa: f64,
    y: f64,
    kind: NoiseKind,
    /// Laplacian: `√2/√λ_k`; Gaussian: `1/λ_k`.
    weight: f64,
}

impl Scalar {
    /// Left and right derivatives at `u`.
    fn derivatives(&self, u: f64) -> (f64, f64) {
        let quad = self.a * u;
        match self.kind {
            NoiseKind::Gaussian => {
                let d = quad + self.kappa * (self.kappa * u - self.y) * self.weight;
                (d, d)
            }
            NoiseKind::Laplacian => {
                let r = self.kappa * u - self.y;
                let slope = self.weight * self.kappa.abs();
                if r == 0.0 || self.kappa == 0.0 {
                    (quad - slope, quad + slope)
                } else {
                    let d = quad + self.weight * self.kappa * r.signum();
                    (d, d)
                }
            }
        }
    }

    /// Bisection on the monotone subdifferential, bracketing from `start`.
    /// Returns `(u, iterations, hit_max)`.
    fn minimize(&self, start: f64, tol: f64, max_iter: usize) -> (f64, usize, bool) {
        let (left0, right0) = self.derivatives(start);
        if left0 <= 0.0 && right0 >= 0.0 {
            return (start, 0, false);
        }
        // strong convexity with modulus a bounds the distance to the minimizer
        let radius = left0.abs().max(right0.abs()) / self.a;
        let (mut lo, mut hi) = if right0 < 0.0 { (start, start + radius) } else { (start - radius, start) };
        let mut iter = 0;
        while hi - lo > tol * lo.abs().max(hi.abs()).max(1.0) {
            if iter == max_iter {
                return (0.5 * (lo + hi), iter, true);
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (left, right) = self.derivatives(mid);
            if left > 0.0 {
                hi = mid;
            } else if right < 0.0 {
                lo = mid;
            } else {
                return (mid, iter + 1, false);
            }
            iter += 1;
        }
        (0.5 * (lo + hi), iter, false)
    }
}

fn diagonal(
    problem: &HeatProblem,
    forward: &ForwardOp,
    kappa: &[f64],
    y: &CoeffVec,
    init: Option<&CoeffVec>,
    opts: &SolverOptions,
) -> Result<MapSolution> {
    let kind = problem.noise().kind;
    let mut u = Vec::with_capacity(kappa.len());
    let mut iterations = 0;
    let mut hit_max = false;
    for (k, &kap) in kappa.iter().enumerate() {
        let lam = problem.noise_variances()[k];
        let scalar = Scalar {
            a: 1.0 / problem.prior_variances()[k],
            kappa: kap,
            y: y[k],
            kind,
            weight: match kind {
                NoiseKind::Laplacian => SQRT_2 / lam.sqrt(),
                NoiseKind::Gaussian => 1.0 / lam,
            },
        };
        let (uk, it, capped) = scalar.minimize(init.map_or(0.0, |u| u[k]), opts.tol, opts.max_iter);
        u.push(uk);
        iterations = iterations.max(it);
        hit_max |= capped;
    }
    let u = CoeffVec::new(u)?;
    let objective = problem.om_functional_with(forward, y, &u)?;
    Ok(MapSolution {
        u,
        objective,
        iterations,
        status: if hit_max { SolveStatus::MaxIterations } else { SolveStatus::Converged },
    })
}

struct Dense<'a> {
    n: usize,
    data: &'a [f64],
}

impl Dense<'_> {
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    fn apply_adjoint(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.data[i * self.n..(i + 1) * self.n]) {
                *o += a * xi;
            }
        }
    }

    /// `‖K‖₂` by power iteration on `KᵀK`.
    fn operator_norm(&self) -> f64 {
        const ITERATIONS: usize = 50;
        const TOL: f64 = 1e-8;
        let mut v = vec![1.0 / (self.n as f64).sqrt(); self.n];
        let mut kv = vec![0.0; self.n];
        let mut w = vec![0.0; self.n];
        let mut estimate = 0.0;
        for _ in 0..ITERATIONS {
            self.apply(&v, &mut kv);
            self.apply_adjoint(&kv, &mut w);
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v.iter_mut().zip(&w).for_each(|(vi, wi)| *vi = wi / norm);
            let converged = (norm - estimate).abs() <= TOL * norm;
            estimate = norm;
            if converged {
                break;
            }
        }
        estimate.sqrt()
    }
}

/// Accelerated primal–dual iteration for
/// `min_u Σ a_k u_k²/2 + Σ_i w_i (|(Ku)_i - y_i| - |y_i|)`.
///
/// The penalty is strongly convex with modulus `min a_k`, which drives the
/// step-size acceleration. Stops once the duality gap falls below
/// `tol · max(1, |objective|)`; the iterate is then within `√(2 gap / γ)` of
/// the minimizer, `γ = min a_k`.
fn primal_dual(
    problem: &HeatProblem,
    forward: &ForwardOp,
    k: &Dense<'_>,
    y: &CoeffVec,
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<MapSolution> {
    let n = k.n;
    let a: Vec<f64> = problem.prior_variances().iter().map(|q| 1.0 / q).collect();
    let w: Vec<f64> = problem.noise_variances().iter().map(|l| SQRT_2 / l.sqrt()).collect();
    let y = y.as_slice();
    let offset: f64 = w.iter().zip(y).map(|(wi, yi)| wi * yi.abs()).sum();
    let gamma = a.iter().cloned().fold(f64::INFINITY, f64::min);

    let norm = k.operator_norm().max(f64::MIN_POSITIVE);
    let mut tau = 0.99 / norm;
    let mut sigma = 0.99 / norm;

    let mut u = start;
    let mut u_bar = u.clone();
    let mut p = vec![0.0; n];
    let mut ku = vec![0.0; n];
    let mut ktp = vec![0.0; n];
    let mut u_prev = vec![0.0; n];

    let primal = |u: &[f64], ku: &mut [f64]| {
        k.apply(u, ku);
        let g: f64 = a.iter().zip(u).map(|(ak, uk)| 0.5 * ak * uk * uk).sum();
        let f: f64 = w.iter().zip(ku.iter().zip(y)).map(|(wi, (v, yi))| wi * (v - yi).abs()).sum();
        g + f - offset
    };

    let mut best_u = u.clone();
    let mut best_obj = primal(&u, &mut ku);
    for iter in 1..=opts.max_iter {
        // dual ascent: prox of σF* is a shifted clamp
        k.apply(&u_bar, &mut ku);
        for i in 0..n {
            p[i] = (p[i] + sigma * ku[i] - sigma * y[i]).clamp(-w[i], w[i]);
        }
        // primal descent: prox of τG is a diagonal shrink
        k.apply_adjoint(&p, &mut ktp);
        u_prev.copy_from_slice(&u);
        for j in 0..n {
            u[j] = (u[j] - tau * ktp[j]) / (1.0 + tau * a[j]);
        }
        let theta = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
        tau *= theta;
        sigma /= theta;
        for j in 0..n {
            u_bar[j] = u[j] + theta * (u[j] - u_prev[j]);
        }

        let obj = primal(&u, &mut ku);
        if obj < best_obj {
            best_obj = obj;
            best_u.copy_from_slice(&u);
        }
        // dual objective -G*(-Kᵀp) - F*(p), with F*(p) = <p, y> + offset on |p| ≤ w
        let dual = -ktp.iter().zip(&a).map(|(z, ak)| z * z / (2.0 * ak)).sum::<f64>()
            - p.iter().zip(y).map(|(pi, yi)| pi * yi).sum::<f64>()
            - offset;
        let gap = best_obj - dual;
        if gap <= opts.tol * best_obj.abs().max(1.0) {
            let u = CoeffVec::new(best_u)?;
            let objective = problem.om_functional_with(forward, &CoeffVec::new(y.to_vec())?, &u)?;
            return Ok(MapSolution {
                u,
                objective,
                iterations: iter,
                status: SolveStatus::Converged,
            });
        }
    }
    let u = CoeffVec::new(best_u)?;
    let objective = problem.om_functional_with(forward, &CoeffVec::new(y.to_vec())?, &u)?;
    Ok(MapSolution {
        u,
        objective,
        iterations: opts.max_iter,
        status: SolveStatus::MaxIterations,
    })
}

/// Conjugate gradients on `(KᵀΛ⁻¹K + diag(1/q)) u = KᵀΛ⁻¹y`.
fn conjugate_gradient(
    problem: &HeatProblem,
    forward: &ForwardOp,
    k: &Dense<'_>,
    y: &CoeffVec,
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<MapSolution> {
    let n = k.n;
    let lam = problem.noise_variances();
    let a: Vec<f64> = problem.prior_variances().iter().map(|q| 1.0 / q).collect();
    let mut tmp = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut hessian = |x: &[f64], res: &mut [f64]| {
        k.apply(x, &mut tmp);
        tmp.iter_mut().zip(lam).for_each(|(t, l)| *t /= l);
        k.apply_adjoint(&tmp, &mut out);
        for j in 0..n {
            res[j] = out[j] + a[j] * x[j];
        }
    };
    let weighted: Vec<f64> = y.iter().zip(lam).map(|(yi, l)| yi / l).collect();
    let mut rhs = vec![0.0; n];
    k.apply_adjoint(&weighted, &mut rhs);
    let rhs_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut x = start;
    let mut hd = vec![0.0; n];
    hessian(&x, &mut hd);
    let mut r: Vec<f64> = rhs.iter().zip(&hd).map(|(b, h)| b - h).collect();
    let mut d = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let mut status = SolveStatus::MaxIterations;
    let mut iterations = opts.max_iter;
    for iter in 0..opts.max_iter {
        if rr.sqrt() <= opts.tol * rhs_norm.max(f64::MIN_POSITIVE) {
            status = SolveStatus::Converged;
            iterations = iter;
            break;
        }
        hessian(&d, &mut hd);
        let step = rr / d.iter().zip(&hd).map(|(p, q)| p * q).sum::<f64>();
        for j in 0..n {
            x[j] += step * d[j];
            r[j] -= step * hd[j];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let ratio = rr_new / rr;
        rr = rr_new;
        for j in 0..n {
            d[j] = r[j] + ratio * d[j];
        }
    }
    if status == SolveStatus::MaxIterations && rr.sqrt() <= opts.tol * rhs_norm.max(f64::MIN_POSITIVE) {
        status = SolveStatus::Converged;
    }
    let u = CoeffVec::new(x)?;
    let objective = problem.om_functional_with(forward, y, &u)?;
    Ok(MapSolution {
        u,
        objective,
        iterations,
        status,
    })
}
