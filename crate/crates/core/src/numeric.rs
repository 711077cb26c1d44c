//! Small numerical kernels shared by the other modules.

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// Quantile function of the scalar Laplace law with the given mean and
/// variance, evaluated at `u ∈ (0, 1)`.
#[inline]
pub fn laplace_quantile(u: f64, mean: f64, variance: f64) -> f64 {
    let scale = (0.5 * variance).sqrt();
    let centered = u - 0.5;
    // ln(1 - 2|u - 1/2|) written with ln_1p so draws near the median keep precision
    mean - scale * centered.signum() * (-2.0 * centered.abs()).ln_1p()
}

/// `f(t) = 1 - e^{-t} - t e^{-t}` for `t ≥ 0`.
///
/// The direct formula cancels catastrophically for small `t` (both terms are
/// `≈ t`), so a Taylor branch is used below `t = 0.1`.
pub fn clipping_loss(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < 0.1 {
        // f(t) = Σ_{m≥2} (-1)^m (m-1) t^m / m!
        let mut term = t * t / 2.0; // t^m / m! at m = 2
        let mut total = 0.0;
        for m in 2..20u32 {
            let signed = if m % 2 == 0 { term } else { -term };
            total += (m - 1) as f64 * signed;
            term *= t / (m + 1) as f64;
        }
        total
    } else {
        -(-t).exp_m1() - t * (-t).exp()
    }
}

/// `t - ln(1 + t)` for `t ≥ 0` without cancellation near zero.
pub fn excess_over_log1p(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t < 1e-3 {
        // t²/2 - t³/3 + t⁴/4 - t⁵/5
        let t2 = t * t;
        t2 * (0.5 - t / 3.0 + t2 / 4.0 - t2 * t / 5.0)
    } else {
        t - t.ln_1p()
    }
}

/// Sign-preserving `x · e^{s}` evaluated as `exp(s + ln|x|)` so that large
/// `s` with tiny `x` does not overflow in the intermediate.
#[inline]
pub fn scale_by_exp(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * (s + x.abs().ln()).exp()
    }
}

/// Least-squares slope of `ys` against `xs`. `None` for fewer than two
/// distinct abscissae.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
