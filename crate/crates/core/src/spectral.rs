//! Truncated spectral calculus for a positive self-adjoint operator `A`.
//!
//! `A` is given by its eigenvalue law `α_k` in a fixed orthonormal basis.
//! Powers act coordinatewise, `A^s x = Σ α_k^s x_k φ_k`, the Hilbert scale
//! norm is `‖x‖_s = ‖A^{s/2} x‖`, and the forward operator is `K = e^{-A}`.
//! Truncation is always explicit: a [`CoeffVec`] of length `n` carries the
//! first `n` coordinates.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numeric::compensated_sum;

/// Coordinates of an element in the eigenbasis, truncated at `n = len()`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoeffVec(Vec<f64>);

impl CoeffVec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if let Some(i) = coeffs.iter().position(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("coefficient {} is not finite", i + 1)));
        }
        Ok(CoeffVec(coeffs))
    }

    pub fn zeros(n: usize) -> Self {
        CoeffVec(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    /// Euclidean norm of the coefficients, i.e. the norm of `X`.
    pub fn norm(&self) -> f64 {
        compensated_sum(self.0.iter().map(|x| x * x)).sqrt()
    }

    pub fn sub(&self, other: &CoeffVec) -> Result<CoeffVec> {
        check_len(self.len(), other.len())?;
        Ok(CoeffVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn max_abs_diff(&self, other: &CoeffVec) -> Result<f64> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        CoeffVec(coeffs)
    }
}

impl TryFrom<Vec<f64>> for CoeffVec {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        CoeffVec::new(v)
    }
}

impl From<CoeffVec> for Vec<f64> {
    fn from(v: CoeffVec) -> Self {
        v.0
    }
}

impl Index<usize> for CoeffVec {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for CoeffVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Exponent `s` of the Hilbert scale `X^s = dom(A^{s/2})`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HilbertScale(pub f64);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenLaw {
    /// `α_k = p · k^{2/d}`.
    ExactPower { p: f64 },
    /// `α_1, α_2, …` listed explicitly; only the listed indices are available.
    Explicit(Vec<f64>),
}

/// Eigenvalue law of `A` together with its Weyl-type growth bounds
/// `c_- k^{2/d} ≤ α_k ≤ c_+ k^{2/d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBasis {
    pub d: u32,
    pub law: EigenLaw,
    pub c_minus: f64,
    pub c_plus: f64,
}

/// `partial = Σ_{k≤n} α_k^{-a}`; the full trace lies in
/// `[partial, partial + tail_bound]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceBracket {
    pub partial: f64,
    pub tail_bound: f64,
}

impl TraceBracket {
    pub fn upper(&self) -> f64 {
        self.partial + self.tail_bound
    }
}

impl SpectralBasis {
    pub fn exact_power(p: f64, d: u32) -> Result<Self> {
        let basis = SpectralBasis {
            d,
            law: EigenLaw::ExactPower { p },
            c_minus: p,
            c_plus: p,
        };
        basis.validate()?;
        Ok(basis)
    }

    pub fn explicit(values: Vec<f64>, d: u32, c_minus: f64, c_plus: f64) -> Result<Self> {
        let basis = SpectralBasis {
            d,
            law: EigenLaw::Explicit(values),
            c_minus,
            c_plus,
        };
        basis.validate()?;
        Ok(basis)
    }

    /// Checks the type invariants; deserialized values must pass through here.
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::constraint("d >= 1", "spatial dimension is zero"));
        }
        if !(self.c_minus > 0.0 && self.c_minus.is_finite()) {
            return Err(Error::constraint("c_minus > 0", format!("c_minus = {}", self.c_minus)));
        }
        if !(self.c_plus >= self.c_minus && self.c_plus.is_finite()) {
            return Err(Error::constraint(
                "c_plus >= c_minus",
                format!("c_minus = {}, c_plus = {}", self.c_minus, self.c_plus),
            ));
        }
        match &self.law {
            EigenLaw::ExactPower { p } => {
                if !(*p > 0.0 && p.is_finite()) {
                    return Err(Error::constraint("p > 0", format!("p = {p}")));
                }
                if *p < self.c_minus || *p > self.c_plus {
                    return Err(Error::constraint(
                        "c_minus <= p <= c_plus",
                        format!("p = {p} outside [{}, {}]", self.c_minus, self.c_plus),
                    ));
                }
            }
            EigenLaw::Explicit(values) => {
                let mut prev = 0.0;
                for (i, &a) in values.iter().enumerate() {
                    let k = i + 1;
                    if !(a > 0.0 && a.is_finite()) {
                        return Err(Error::constraint("alpha_k > 0", format!("alpha_{k} = {a}")));
                    }
                    if a < prev {
                        return Err(Error::constraint(
                            "alpha_k non-decreasing",
                            format!("alpha_{k} = {a} < alpha_{} = {prev}", k - 1),
                        ));
                    }
                    let growth = self.growth(k);
                    // relative slack absorbs rounding in user-supplied lists
                    if a < self.c_minus * growth * (1.0 - 1e-12) || a > self.c_plus * growth * (1.0 + 1e-12) {
                        return Err(Error::constraint(
                            "c_minus k^(2/d) <= alpha_k <= c_plus k^(2/d)",
                            format!("alpha_{k} = {a}"),
                        ));
                    }
                    prev = a;
                }
            }
        }
        Ok(())
    }

    pub fn half_dim(&self) -> f64 {
        self.d as f64 / 2.0
    }

    fn growth(&self, k: usize) -> f64 {
        (k as f64).powf(2.0 / self.d as f64)
    }

    /// Largest truncation this law can represent.
    pub fn max_truncation(&self) -> Option<usize> {
        match &self.law {
            EigenLaw::ExactPower { .. } => None,
            EigenLaw::Explicit(values) => Some(values.len()),
        }
    }

    /// `α_k` for `k ≥ 1`.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("eigenvalue index starts at 1".into()));
        }
        let a = match &self.law {
            EigenLaw::ExactPower { p } => p * self.growth(k),
            EigenLaw::Explicit(values) => *values.get(k - 1).ok_or_else(|| {
                Error::Domain(format!("explicit law lists {} eigenvalues, asked for k = {k}", values.len()))
            })?,
        };
        if a.is_finite() && a > 0.0 {
            Ok(a)
        } else {
            Err(Error::Domain(format!("alpha_{k} = {a} is not a positive finite number")))
        }
    }

    /// `α_1, …, α_n`.
    pub fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|k| self.eigenvalue(k)).collect()
    }

    /// `A^s x`.
    pub fn apply_power(&self, s: HilbertScale, x: &CoeffVec) -> Result<CoeffVec> {
        let alphas = self.eigenvalues(x.len())?;
        Ok(CoeffVec(
            alphas.iter().zip(x.iter()).map(|(a, xk)| a.powf(s.0) * xk).collect(),
        ))
    }

    /// `‖x‖_{X^s} = (Σ α_k^s x_k²)^{1/2}`.
    pub fn scale_norm(&self, s: HilbertScale, x: &CoeffVec) -> Result<f64> {
        let alphas = self.eigenvalues(x.len())?;
        Ok(compensated_sum(alphas.iter().zip(x.iter()).map(|(a, xk)| a.powf(s.0) * xk * xk)).sqrt())
    }

    /// `K u = e^{-A} u`. Coordinates with large `α_k` underflow to zero.
    pub fn forward_heat(&self, u: &CoeffVec) -> Result<CoeffVec> {
        let alphas = self.eigenvalues(u.len())?;
        Ok(CoeffVec(alphas.iter().zip(u.iter()).map(|(a, uk)| (-a).exp() * uk).collect()))
    }

    /// `α_k^s e^{-α_k}` evaluated in log space.
    pub fn heat_power_factor(&self, k: usize, s: f64) -> Result<f64> {
        let a = self.eigenvalue(k)?;
        Ok((s * a.ln() - a).exp())
    }

    /// Bracket for `Tr A^{-alpha} = Σ_k α_k^{-alpha}`, finite iff `alpha > d/2`.
    ///
    /// The tail beyond `n` is bounded by `c_-^{-alpha} ∫_n^∞ x^{-2 alpha/d} dx`.
    pub fn trace_power(&self, alpha: f64, n: usize) -> Result<TraceBracket> {
        if !(alpha > self.half_dim()) {
            return Err(Error::Divergence {
                exponent: alpha,
                half_dim: self.half_dim(),
            });
        }
        let alphas = self.eigenvalues(n)?;
        let partial = compensated_sum(alphas.iter().map(|a| a.powf(-alpha)));
        let s = 2.0 * alpha / self.d as f64;
        let integral = if n == 0 {
            // Σ_{k≥1} k^{-s} ≤ 1 + ∫_1^∞ x^{-s} dx
            s / (s - 1.0)
        } else {
            (n as f64).powf(1.0 - s) / (s - 1.0)
        };
        Ok(TraceBracket {
            partial,
            tail_bound: self.c_minus.powf(-alpha) * integral,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn basis(p: f64, d: u32) -> SpectralBasis {
        SpectralBasis::exact_power(p, d).unwrap()
    }

    fn cv(v: &[f64]) -> CoeffVec {
        CoeffVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn eigenvalue_examples() {
        assert_relative_eq!(basis(1.0, 2).eigenvalue(3).unwrap(), 3.0);
        assert_relative_eq!(basis(2.0, 2).eigenvalue(5).unwrap(), 10.0);
        assert_relative_eq!(basis(1.0, 1).eigenvalue(4).unwrap(), 16.0);
        assert!(matches!(basis(1.0, 2).eigenvalue(0), Err(Error::Domain(_))));
    }

    #[test]
    fn explicit_law_is_validated() {
        assert!(SpectralBasis::explicit(vec![1.0, 2.0, 3.0], 2, 1.0, 1.0).is_ok());
        let err = SpectralBasis::explicit(vec![1.0, 0.5], 2, 0.1, 2.0).unwrap_err();
        assert_eq!(err.constraint_name(), Some("alpha_k non-decreasing"));
        let err = SpectralBasis::explicit(vec![1.0, 5.0], 2, 1.0, 2.0).unwrap_err();
        assert_eq!(err.constraint_name(), Some("c_minus k^(2/d) <= alpha_k <= c_plus k^(2/d)"));
        let short = SpectralBasis::explicit(vec![1.0, 2.0], 2, 1.0, 1.0).unwrap();
        assert!(short.eigenvalue(3).is_err());
    }

    #[test]
    fn coeffvec_rejects_non_finite() {
        assert!(CoeffVec::new(vec![1.0, f64::NAN]).is_err());
        assert!(CoeffVec::new(vec![f64::INFINITY]).is_err());
        let e = cv(&[1.0]).sub(&cv(&[1.0, 2.0])).unwrap_err();
        assert_eq!(e, Error::LengthMismatch { left: 1, right: 2 });
    }

    #[test]
    fn apply_power_examples() {
        let b = basis(1.0, 2);
        let x = cv(&[1.0, -2.0, 0.5]);
        assert_eq!(b.apply_power(HilbertScale(0.0), &x).unwrap(), x);
        assert_eq!(
            b.apply_power(HilbertScale(1.0), &cv(&[1.0, 1.0, 1.0])).unwrap(),
            cv(&[1.0, 2.0, 3.0])
        );
        let back = b
            .apply_power(HilbertScale(1.0), &b.apply_power(HilbertScale(-1.0), &x).unwrap())
            .unwrap();
        for (a, e) in back.iter().zip(x.iter()) {
            assert_relative_eq!(a, e, max_relative = 1e-12);
        }
    }

    #[test]
    fn scale_norm_examples() {
        let b = basis(1.0, 2);
        assert_relative_eq!(b.scale_norm(HilbertScale(0.0), &cv(&[3.0, 4.0])).unwrap(), 5.0);
        assert_eq!(b.scale_norm(HilbertScale(1.7), &CoeffVec::zeros(4)).unwrap(), 0.0);
        assert_relative_eq!(
            b.scale_norm(HilbertScale(2.0), &cv(&[1.0, 1.0])).unwrap(),
            5f64.sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn forward_heat_examples() {
        let b = basis(1.0, 2);
        assert_eq!(b.forward_heat(&CoeffVec::zeros(3)).unwrap(), CoeffVec::zeros(3));
        let y = b.forward_heat(&cv(&[1.0, 0.0, 0.0])).unwrap();
        assert_relative_eq!(y[0], (-1.0f64).exp());
        assert_eq!(&y.as_slice()[1..], &[0.0, 0.0]);
        let u = cv(&[0.3, -1.2, 2.0, 0.7]);
        let y = b.forward_heat(&u).unwrap();
        for k in 0..4 {
            let back = y[k] * ((k + 1) as f64).exp();
            assert_relative_eq!(back, u[k], max_relative = 1e-14);
        }
        // underflow is accepted
        let far = basis(1000.0, 2).forward_heat(&cv(&[1.0])).unwrap();
        assert_eq!(far[0], 0.0);
    }

    #[test]
    fn trace_power_examples() {
        let b = basis(1.0, 2);
        let t3 = b.trace_power(2.0, 3).unwrap();
        assert_relative_eq!(t3.partial, 1.0 + 0.25 + 1.0 / 9.0, epsilon = 1e-15);
        // ζ(2) lies in the bracket and the bracket tightens with n
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        let t = b.trace_power(2.0, 10_000).unwrap();
        assert!(t.partial <= zeta2 && zeta2 <= t.upper());
        assert!(t.upper() - t.partial < 1.01e-4);
        assert!(matches!(b.trace_power(1.0, 10), Err(Error::Divergence { .. })));
        assert!(b.trace_power(0.5, 10).is_err());
    }

    fn brute_trace(b: &SpectralBasis, alpha: f64, n: usize) -> f64 {
        // sum from the far end so small terms are not swallowed
        (1..=n).rev().map(|k| b.eigenvalue(k).unwrap().powf(-alpha)).sum()
    }

    #[test]
    fn trace_bracket_contains_high_truncation_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let p = rng.random_range(0.5..3.0);
            let d = rng.random_range(1..=3u32);
            let alpha = d as f64 / 2.0 + 0.1 + rng.random_range(0.0..2.0);
            let b = basis(p, d);
            let n = rng.random_range(1..50usize);
            let bracket = b.trace_power(alpha, n).unwrap();
            let oracle = brute_trace(&b, alpha, 200_000);
            assert!(bracket.partial <= oracle * (1.0 + 1e-12), "{p} {d} {alpha} {n}");
            assert!(oracle <= bracket.upper(), "{p} {d} {alpha} {n}: {oracle} > {}", bracket.upper());
        }
    }

    proptest! {
        #[test]
        fn power_composition(
            xs in prop::collection::vec(-10.0f64..10.0, 1..20),
            s1 in -3.0f64..3.0,
            s2 in -3.0f64..3.0,
            p in 0.1f64..4.0,
        ) {
            let b = basis(p, 2);
            let x = cv(&xs);
            let lhs = b.apply_power(HilbertScale(s1), &b.apply_power(HilbertScale(s2), &x).unwrap()).unwrap();
            let rhs = b.apply_power(HilbertScale(s1 + s2), &x).unwrap();
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() <= 1e-12 * r.abs().max(1e-300));
            }
        }

        #[test]
        fn scale_norm_is_a_norm(
            xs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..12),
            c in -4.0f64..4.0,
            s in -2.0f64..2.0,
        ) {
            let b = basis(1.0, 2);
            let x = cv(&xs.iter().map(|p| p.0).collect::<Vec<_>>());
            let y = cv(&xs.iter().map(|p| p.1).collect::<Vec<_>>());
            let cx = cv(&x.iter().map(|v| c * v).collect::<Vec<_>>());
            let xy = cv(&x.iter().zip(y.iter()).map(|(a, b)| a + b).collect::<Vec<_>>());
            let s = HilbertScale(s);
            let nx = b.scale_norm(s, &x).unwrap();
            let ny = b.scale_norm(s, &y).unwrap();
            prop_assert!((b.scale_norm(s, &cx).unwrap() - c.abs() * nx).abs() <= 1e-10 * (1.0 + nx));
            prop_assert!(b.scale_norm(s, &xy).unwrap() <= nx + ny + 1e-10);
        }

        #[test]
        fn heat_is_contraction(xs in prop::collection::vec(-10.0f64..10.0, 1..30), p in 0.01f64..3.0) {
            let b = basis(p, 2);
            let x = cv(&xs);
            let y = b.forward_heat(&x).unwrap();
            prop_assert!(y.norm() <= x.norm());
        }
    }
}
