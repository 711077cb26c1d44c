use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::exec::{block_count, block_range, Execution};
use crate::inference::HeatProblem;
use crate::measures::GaussianProductMeasure;
use crate::numeric::CompensatedSum;
use crate::rng;
use crate::spectral::CoeffVec;

/// Samples per RNG stream.
pub const SAMPLE_BLOCK: usize = 65_536;
pub const MIN_SAMPLES: usize = 1_000;
/// Largest truncation for which ball searches are attempted; hit rates of
/// small balls vanish quickly with dimension.
pub const MAX_SMALLBALL_DIM: usize = 5;

/// Stream reserved for drawing random candidate centers.
const CANDIDATE_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McBudget {
    pub samples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl McBudget {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            exec: Execution::default(),
        }
    }

    pub fn with_exec(self, exec: Execution) -> Self {
        Self { exec, ..self }
    }

    fn check(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::constraint("n_samples >= 1000", format!("n_samples = {}", self.samples)));
        }
        Ok(())
    }
}

/// Open ball `B_ε(center)` in the `X^0` norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallQuery {
    center: CoeffVec,
    radius: f64,
}

impl BallQuery {
    pub fn new(center: CoeffVec, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::constraint("radius > 0", format!("radius = {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn center(&self) -> &CoeffVec {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_slice(x)
    }

    fn contains_slice(&self, x: &[f64]) -> bool {
        let r2 = self.radius * self.radius;
        let mut d2 = 0.0;
        for (xi, ci) in x.iter().zip(self.center.iter()) {
            let d = xi - ci;
            d2 += d * d;
            if d2 >= r2 {
                return false;
            }
        }
        true
    }
}

/// `Φ(x)` evaluated on prior draws. Posterior ball masses are prior
/// expectations of `e^{-Φ} 1_B`.
pub type Potential<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Per-ball sums over the prior sample of `X = e^{-(Φ - Φ_ref)} 1_B`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BallStats {
    pub hits: u64,
    pub weight_sum: f64,
    pub weight_sq_sum: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallProbability {
    pub estimate: f64,
    pub std_err: f64,
    pub hits: u64,
    pub samples: usize,
    /// One-sided 95% upper bound `1 - 0.05^{1/N}`, reported only with zero hits.
    pub zero_hit_upper: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallRatio {
    pub ratio: f64,
    /// Delta-method standard error, including the covariance of the two sums.
    pub std_err: f64,
    pub numerator: BallStats,
    pub denominator: BallStats,
    /// `Σ X_1 X_2` over draws lying in both balls.
    pub cross_sum: f64,
    pub samples: usize,
}

impl BallRatio {
    /// `None` when the numerator ball received no hits.
    pub fn log_ratio(&self) -> Option<f64> {
        (self.ratio > 0.0).then(|| self.ratio.ln())
    }

    pub fn log_std_err(&self) -> Option<f64> {
        (self.ratio > 0.0).then(|| self.std_err / self.ratio)
    }
}

struct Sweep {
    stats: Vec<BallStats>,
    cross: Vec<f64>,
}

#[derive(Default)]
struct BlockSums {
    hits: Vec<u64>,
    sum: Vec<f64>,
    sq: Vec<f64>,
    cross: Vec<f64>,
}

/// One pass over a common prior sample, accumulating every query and the
/// cross sums of the listed pairs.
fn sweep(
    prior: &GaussianProductMeasure,
    potential: Potential<'_>,
    reference: f64,
    queries: &[BallQuery],
    pairs: &[(usize, usize)],
    budget: &McBudget,
) -> Sweep {
    let n = prior.dim();
    let m = queries.len();
    let blocks = block_count(budget.samples, SAMPLE_BLOCK);
    let partials = budget.exec.map_indexed(blocks, |b| {
        let (_, len) = block_range(budget.samples, SAMPLE_BLOCK, b);
        let mut rng = rng::stream(budget.seed, b as u64);
        let mut x = vec![0.0; n];
        let mut inside = vec![false; m];
        let mut acc = BlockSums {
            hits: vec![0; m],
            sum: vec![0.0; m],
            sq: vec![0.0; m],
            cross: vec![0.0; pairs.len()],
        };
        for _ in 0..len {
            prior.sample_into(&mut rng, &mut x);
            let mut any = false;
            for (flag, q) in inside.iter_mut().zip(queries) {
                *flag = q.contains_slice(&x);
                any |= *flag;
            }
            if !any {
                continue;
            }
            let w = (reference - potential(&x)).exp();
            for (j, &flag) in inside.iter().enumerate() {
                if flag {
                    acc.hits[j] += 1;
                    acc.sum[j] += w;
                    acc.sq[j] += w * w;
                }
            }
            for (p, &(i, j)) in pairs.iter().enumerate() {
                if inside[i] && inside[j] {
                    acc.cross[p] += w * w;
                }
            }
        }
        acc
    });

    let mut hits = vec![0u64; m];
    let mut sum: Vec<CompensatedSum> = vec![CompensatedSum::new(); m];
    let mut sq: Vec<CompensatedSum> = vec![CompensatedSum::new(); m];
    let mut cross: Vec<CompensatedSum> = vec![CompensatedSum::new(); pairs.len()];
    for part in &partials {
        for j in 0..m {
            hits[j] += part.hits[j];
            sum[j].add(part.sum[j]);
            sq[j].add(part.sq[j]);
        }
        for (c, v) in cross.iter_mut().zip(&part.cross) {
            c.add(*v);
        }
    }
    Sweep {
        stats: (0..m)
            .map(|j| BallStats {
                hits: hits[j],
                weight_sum: sum[j].value(),
                weight_sq_sum: sq[j].value(),
            })
            .collect(),
        cross: cross.iter().map(|c| c.value()).collect(),
    }
}

fn reference_potential(potential: Potential<'_>, queries: &[BallQuery]) -> f64 {
    queries
        .iter()
        .map(|q| potential(q.center.as_slice()))
        .fold(f64::INFINITY, f64::min)
}

fn check_queries(prior: &GaussianProductMeasure, queries: &[BallQuery]) -> Result<()> {
    for q in queries {
        check_len(q.center.len(), prior.dim())?;
    }
    Ok(())
}

/// Plain Monte Carlo estimate of `μ_0(B_ε(x))` with binomial standard error.
pub fn prior_ball_prob(prior: &GaussianProductMeasure, query: &BallQuery, budget: &McBudget) -> Result<BallProbability> {
    budget.check()?;
    check_queries(prior, std::slice::from_ref(query))?;
    let zero = |_: &[f64]| 0.0;
    let sweep = sweep(prior, &zero, 0.0, std::slice::from_ref(query), &[], budget);
    let hits = sweep.stats[0].hits;
    let n = budget.samples as f64;
    let p = hits as f64 / n;
    Ok(BallProbability {
        estimate: p,
        std_err: (p * (1.0 - p) / n).sqrt(),
        hits,
        samples: budget.samples,
        zero_hit_upper: (hits == 0).then(|| -(0.05f64.ln() / n).exp_m1()),
    })
}

fn ratio_from(stats: &[BallStats], cross: f64, i: usize, j: usize, samples: usize) -> Result<BallRatio> {
    let (num, den) = (stats[i], stats[j]);
    if den.hits == 0 {
        return Err(Error::UndefinedRatio {
            numerator_hits: num.hits,
            denominator_hits: den.hits,
        });
    }
    let n = samples as f64;
    let m1 = num.weight_sum / n;
    let m2 = den.weight_sum / n;
    let v11 = num.weight_sq_sum / n - m1 * m1;
    let v22 = den.weight_sq_sum / n - m2 * m2;
    let v12 = cross / n - m1 * m2;
    let ratio = num.weight_sum / den.weight_sum;
    if i == j {
        return Ok(BallRatio {
            ratio,
            std_err: 0.0,
            numerator: num,
            denominator: den,
            cross_sum: cross,
            samples,
        });
    }
    let var = (v11 / (m2 * m2) - 2.0 * m1 * v12 / (m2 * m2 * m2) + m1 * m1 * v22 / (m2 * m2 * m2 * m2)) / n;
    Ok(BallRatio {
        ratio,
        std_err: var.max(0.0).sqrt(),
        numerator: num,
        denominator: den,
        cross_sum: cross,
        samples,
    })
}

/// Ratios `mass(B_i) / mass(B_j)` for each listed pair `(i, j)`, all estimated
/// from one common prior sample. Weights are `e^{-(Φ - Φ_ref)}` with `Φ_ref`
/// the smallest potential over the query centers, so the normalizing
/// constant never appears.
pub fn ball_ratios_with(
    prior: &GaussianProductMeasure,
    potential: Potential<'_>,
    queries: &[BallQuery],
    pairs: &[(usize, usize)],
    budget: &McBudget,
) -> Result<Vec<Result<BallRatio>>> {
    budget.check()?;
    if queries.is_empty() {
        return Err(Error::Domain("at least one ball query is required".into()));
    }
    check_queries(prior, queries)?;
    if let Some(&(i, j)) = pairs.iter().find(|(i, j)| *i >= queries.len() || *j >= queries.len()) {
        return Err(Error::Domain(format!("pair ({i}, {j}) out of range for {} queries", queries.len())));
    }
    let reference = reference_potential(potential, queries);
    let sweep = sweep(prior, potential, reference, queries, pairs, budget);
    Ok(pairs
        .iter()
        .zip(&sweep.cross)
        .map(|(&(i, j), &c)| ratio_from(&sweep.stats, c, i, j, budget.samples))
        .collect())
}

/// `μ^y(B_1) / μ^y(B_2)` with `μ^y ∝ e^{-Φ(·, y)} μ_0`.
pub fn posterior_ball_ratio(
    problem: &HeatProblem,
    y: &CoeffVec,
    q1: &BallQuery,
    q2: &BallQuery,
    budget: &McBudget,
) -> Result<BallRatio> {
    check_len(q1.center.len(), q2.center.len())?;
    check_len(y.len(), problem.truncation())?;
    let phi = |x: &[f64]| problem.phi_slice(x, y.as_slice());
    let prior = problem.prior_measure();
    ball_ratios_with(&prior, &phi, &[q1.clone(), q2.clone()], &[(0, 1)], budget)?
        .pop()
        .unwrap()
}

/// Candidate centers for [`amf_search`]: a lattice around an anchor point plus
/// random prior draws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CandidateStrategy {
    /// Lattice points per axis on each side of the anchor.
    pub half_width: usize,
    /// Lattice spacing as a fraction of `ε`.
    pub spacing: f64,
    pub prior_draws: usize,
    /// Full lattices larger than this fall back to an axis stencil.
    pub max_lattice: usize,
}

impl Default for CandidateStrategy {
    fn default() -> Self {
        Self {
            half_width: 5,
            spacing: 0.25,
            prior_draws: 100,
            max_lattice: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateLayout {
    FullLattice,
    AxisStencil,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AmfReport {
    /// Candidate with the largest estimated ball mass.
    pub center: CoeffVec,
    pub radius: f64,
    /// Unnormalized mass estimate `E_0[e^{-(Φ - Φ_ref)} 1_B]` of the chosen
    /// ball, `Φ_ref` the smallest potential over the candidate centers.
    pub mass: f64,
    /// Chosen mass over the candidate maximum; `1` by construction.
    pub achieved_ratio: f64,
    pub anchor_mass: f64,
    /// Anchor mass over the candidate maximum.
    pub anchor_ratio: f64,
    pub candidates: usize,
    pub layout: CandidateLayout,
    pub samples: usize,
}

fn lattice(anchor: &[f64], step: f64, half: usize, max_lattice: usize) -> (Vec<Vec<f64>>, CandidateLayout) {
    let n = anchor.len();
    let side = 2 * half + 1;
    let full = side.checked_pow(n as u32).filter(|&c| c <= max_lattice);
    let offset = |i: usize| (i as f64 - half as f64) * step;
    match full {
        Some(count) => {
            let points = (0..count)
                .map(|mut idx| {
                    let mut p = anchor.to_vec();
                    for coord in p.iter_mut() {
                        *coord += offset(idx % side);
                        idx /= side;
                    }
                    p
                })
                .collect();
            (points, CandidateLayout::FullLattice)
        }
        None => {
            let mut points = vec![anchor.to_vec()];
            for axis in 0..n {
                for i in (0..side).filter(|&i| i != half) {
                    let mut p = anchor.to_vec();
                    p[axis] += offset(i);
                    points.push(p);
                }
            }
            (points, CandidateLayout::AxisStencil)
        }
    }
}

/// Searches for the center of the heaviest `ε`-ball among a lattice around
/// `anchor` and a set of random prior draws. The anchor is always candidate 0.
pub fn amf_search_with(
    prior: &GaussianProductMeasure,
    potential: Potential<'_>,
    anchor: &CoeffVec,
    eps: f64,
    strategy: &CandidateStrategy,
    budget: &McBudget,
) -> Result<AmfReport> {
    budget.check()?;
    let n = prior.dim();
    if n > MAX_SMALLBALL_DIM {
        return Err(Error::constraint("n <= 5", format!("ball search requested at truncation n = {n}")));
    }
    check_len(anchor.len(), n)?;
    if !(strategy.spacing > 0.0) {
        return Err(Error::constraint("spacing > 0", format!("spacing = {}", strategy.spacing)));
    }
    BallQuery::new(anchor.clone(), eps)?;

    let (mut centers, layout) = lattice(anchor.as_slice(), strategy.spacing * eps, strategy.half_width, strategy.max_lattice);
    // lattice index of the anchor itself
    if layout == CandidateLayout::FullLattice {
        let mid = centers.len() / 2;
        centers.swap(0, mid);
    }
    let mut draw_rng = rng::stream(budget.seed, CANDIDATE_STREAM);
    for _ in 0..strategy.prior_draws {
        centers.push(prior.sample_with(&mut draw_rng).into_vec());
    }
    let queries: Vec<BallQuery> = centers
        .into_iter()
        .map(|c| BallQuery::new(CoeffVec::new(c)?, eps))
        .collect::<Result<_>>()?;

    let reference = reference_potential(potential, &queries);
    let sweep = sweep(prior, potential, reference, &queries, &[], budget);
    let (best, stats) = sweep
        .stats
        .iter()
        .enumerate()
        .fold((0, sweep.stats[0]), |acc, (i, s)| if s.weight_sum > acc.1.weight_sum { (i, *s) } else { acc });
    if stats.hits == 0 {
        return Err(Error::NoHits {
            candidates: queries.len(),
            samples: budget.samples,
        });
    }
    let scale = budget.samples as f64;
    Ok(AmfReport {
        center: queries[best].center.clone(),
        radius: eps,
        mass: stats.weight_sum / scale,
        achieved_ratio: 1.0,
        anchor_mass: sweep.stats[0].weight_sum / scale,
        anchor_ratio: sweep.stats[0].weight_sum / stats.weight_sum,
        candidates: queries.len(),
        layout,
        samples: budget.samples,
    })
}

/// [`amf_search_with`] for the posterior of `problem` given `y`, anchored at
/// the closed-form MAP estimate.
pub fn amf_search(
    problem: &HeatProblem,
    y: &CoeffVec,
    eps: f64,
    strategy: &CandidateStrategy,
    budget: &McBudget,
) -> Result<AmfReport> {
    let anchor = problem.map_closed_form(y)?;
    let phi = |x: &[f64]| problem.phi_slice(x, y.as_slice());
    amf_search_with(&problem.prior_measure(), &phi, &anchor, eps, strategy, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{NoiseKind, NoiseModel};
    use crate::measures::PriorSpec;
    use crate::spectral::SpectralBasis;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn cv(v: &[f64]) -> CoeffVec {
        CoeffVec::new(v.to_vec()).unwrap()
    }

    fn toy(kind: NoiseKind) -> HeatProblem {
        HeatProblem::new(
            SpectralBasis::exact_power(1.0, 2).unwrap(),
            PriorSpec { r: 1.0, tau: 2.0 },
            NoiseModel { kind, b: 0.3, beta: 2.0 },
            2,
        )
        .unwrap()
    }

    #[test]
    fn ball_membership_is_open() {
        let q = BallQuery::new(cv(&[0.0, 0.0]), 1.0).unwrap();
        assert!(q.contains(&[0.6, 0.79]));
        assert!(!q.contains(&[1.0, 0.0]));
        assert!(BallQuery::new(cv(&[0.0]), 0.0).is_err());
        assert!(BallQuery::new(cv(&[0.0]), f64::NAN).is_err());
    }

    #[test]
    fn scalar_ball_matches_normal_cdf() {
        let prior = GaussianProductMeasure::new(vec![1.0]).unwrap();
        let q = BallQuery::new(cv(&[0.0]), 1.0).unwrap();
        let est = prior_ball_prob(&prior, &q, &McBudget::new(200_000, 7)).unwrap();
        let exact = 2.0 * Normal::standard().cdf(1.0) - 1.0;
        assert_relative_eq!(exact, 0.682689, epsilon = 1e-6);
        assert!((est.estimate - exact).abs() <= 3.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn huge_ball_holds_all_mass() {
        let prior = GaussianProductMeasure::new(vec![1.0, 0.25, 0.1]).unwrap();
        let radius = 50.0 * prior.trace().sqrt();
        let est = prior_ball_prob(&prior, &BallQuery::new(CoeffVec::zeros(3), radius).unwrap(), &McBudget::new(10_000, 1))
            .unwrap();
        assert_eq!(est.estimate, 1.0);
        assert!(est.zero_hit_upper.is_none());
    }

    #[test]
    fn zero_hits_report_upper_bound() {
        let prior = GaussianProductMeasure::new(vec![1.0]).unwrap();
        let est = prior_ball_prob(&prior, &BallQuery::new(cv(&[40.0]), 1e-3).unwrap(), &McBudget::new(5_000, 1)).unwrap();
        assert_eq!(est.hits, 0);
        assert_relative_eq!(est.zero_hit_upper.unwrap(), 1.0 - 0.05f64.powf(1.0 / 5000.0), max_relative = 1e-12);
        assert!(prior_ball_prob(&prior, &BallQuery::new(cv(&[0.0]), 1.0).unwrap(), &McBudget::new(999, 1)).is_err());
    }

    #[test]
    fn centered_ball_is_heaviest() {
        // Anderson: the centered ball dominates a shift of Cameron–Martin norm 2
        let prior = GaussianProductMeasure::new(vec![1.0, 0.25]).unwrap();
        let h = cv(&[2.0f64.sqrt(), 0.5f64.sqrt()]);
        assert_relative_eq!(prior.cameron_martin_norm(&h).unwrap(), 2.0, max_relative = 1e-12);
        let zero = |_: &[f64]| 0.0;
        let queries = [BallQuery::new(CoeffVec::zeros(2), 0.5).unwrap(), BallQuery::new(h, 0.5).unwrap()];
        let r = ball_ratios_with(&prior, &zero, &queries, &[(1, 0)], &McBudget::new(400_000, 3)).unwrap();
        let r = r[0].as_ref().unwrap();
        assert!(r.ratio + 3.0 * r.std_err < 1.0, "{r:?}");
    }

    #[test]
    fn identical_and_swapped_queries() {
        let p = toy(NoiseKind::Laplacian);
        let y = cv(&[0.8, 0.4]);
        let q1 = BallQuery::new(cv(&[0.3, 0.1]), 0.25).unwrap();
        let q2 = BallQuery::new(cv(&[0.6, -0.2]), 0.25).unwrap();
        let budget = McBudget::new(50_000, 11);
        let same = posterior_ball_ratio(&p, &y, &q1, &q1, &budget).unwrap();
        assert_eq!(same.ratio, 1.0);
        let fwd = posterior_ball_ratio(&p, &y, &q1, &q2, &budget).unwrap();
        let back = posterior_ball_ratio(&p, &y, &q2, &q1, &budget).unwrap();
        assert_eq!(fwd.numerator.hits, back.denominator.hits);
        assert_eq!(fwd.denominator.hits, back.numerator.hits);
        assert_eq!(fwd.cross_sum, back.cross_sum);
        assert_relative_eq!(fwd.ratio * back.ratio, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_potential_reduces_to_prior_ratio() {
        let prior = GaussianProductMeasure::new(vec![1.0, 0.25]).unwrap();
        let zero = |_: &[f64]| 0.0;
        let q1 = BallQuery::new(cv(&[0.3, 0.1]), 0.5).unwrap();
        let q2 = BallQuery::new(cv(&[0.6, -0.2]), 0.5).unwrap();
        let budget = McBudget::new(100_000, 5);
        let r = ball_ratios_with(&prior, &zero, &[q1.clone(), q2.clone()], &[(0, 1)], &budget).unwrap();
        let p1 = prior_ball_prob(&prior, &q1, &budget).unwrap();
        let p2 = prior_ball_prob(&prior, &q2, &budget).unwrap();
        assert_relative_eq!(r[0].as_ref().unwrap().ratio, p1.estimate / p2.estimate, max_relative = 1e-14);
    }

    #[test]
    fn empty_denominator_is_an_error() {
        let p = toy(NoiseKind::Gaussian);
        let y = cv(&[0.2, 0.05]);
        let q1 = BallQuery::new(cv(&[0.0, 0.0]), 0.5).unwrap();
        let far = BallQuery::new(cv(&[50.0, 50.0]), 0.01).unwrap();
        let err = posterior_ball_ratio(&p, &y, &q1, &far, &McBudget::new(10_000, 1)).unwrap_err();
        assert!(matches!(err, Error::UndefinedRatio { denominator_hits: 0, numerator_hits } if numerator_hits > 0));
        let zero_num = posterior_ball_ratio(&p, &y, &far, &q1, &McBudget::new(10_000, 1)).unwrap();
        assert_eq!(zero_num.ratio, 0.0);
        assert!(zero_num.log_ratio().is_none());
    }

    #[test]
    fn results_do_not_depend_on_execution() {
        let p = toy(NoiseKind::Laplacian);
        let y = cv(&[0.8, 0.4]);
        let q1 = BallQuery::new(cv(&[0.3, 0.1]), 0.25).unwrap();
        let q2 = BallQuery::new(cv(&[0.6, -0.2]), 0.25).unwrap();
        let budget = McBudget::new(3 * SAMPLE_BLOCK + 17, 9);
        let par = posterior_ball_ratio(&p, &y, &q1, &q2, &budget.with_exec(Execution::Parallel)).unwrap();
        let seq = posterior_ball_ratio(&p, &y, &q1, &q2, &budget.with_exec(Execution::Sequential)).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn lattice_layouts() {
        let (full, layout) = lattice(&[0.0, 0.0], 0.1, 5, 20_000);
        assert_eq!(layout, CandidateLayout::FullLattice);
        assert_eq!(full.len(), 121);
        let (stencil, layout) = lattice(&[0.0; 5], 0.1, 5, 20_000);
        assert_eq!(layout, CandidateLayout::AxisStencil);
        assert_eq!(stencil.len(), 1 + 5 * 10);
    }

    #[test]
    fn amf_without_data_concentrates_at_origin() {
        let prior = GaussianProductMeasure::new(vec![1.0, 0.25]).unwrap();
        let zero = |_: &[f64]| 0.0;
        let anchor = cv(&[0.2, -0.1]);
        let r = amf_search_with(&prior, &zero, &anchor, 0.4, &CandidateStrategy::default(), &McBudget::new(400_000, 2))
            .unwrap();
        assert!(r.center.norm() < 0.1, "{:?}", r.center);
        assert_eq!(r.achieved_ratio, 1.0);
        assert!(r.anchor_ratio <= 1.0);
    }

    #[test]
    fn amf_large_radius_accepts_anchor() {
        let p = toy(NoiseKind::Laplacian);
        let y = cv(&[0.8, 0.4]);
        let eps = 10.0;
        let r = amf_search(&p, &y, eps, &CandidateStrategy::default(), &McBudget::new(20_000, 4)).unwrap();
        assert!(r.anchor_ratio >= 1.0 - 0.05);
        assert_eq!(r.candidates, 121 + 100);
    }

    #[test]
    fn amf_refuses_large_truncation() {
        let prior = GaussianProductMeasure::new(vec![1.0; 6]).unwrap();
        let zero = |_: &[f64]| 0.0;
        let err = amf_search_with(&prior, &zero, &CoeffVec::zeros(6), 0.5, &CandidateStrategy::default(), &McBudget::new(1000, 1))
            .unwrap_err();
        assert_eq!(err.constraint_name(), Some("n <= 5"));
    }
}
