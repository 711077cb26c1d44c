use std::fs;
use std::path::{Path, PathBuf};

use omap::config::{ExperimentConfig, MapConfig};
use omap::exec::configure_threads;
use omap::inference::{
    check_linear_condition, lipschitz_info, witness_sequence, ForwardOp, NoiseKind, SolverOptions,
};
use omap::measures::kakutani_diagnostic;
use omap::montecarlo::{ball_ratios_with, rate_experiment, BallQuery, McBudget};
use omap::{rng, CoeffVec, Error, Execution};
use serde::Serialize;

use crate::io::{fmt_f64, read_coeffs, sibling, write_coeffs, write_csv, write_json};
use crate::manifest::{unix_now, RunManifest};
use crate::{CliError, Common};

struct Run {
    cfg: ExperimentConfig,
    manifest: RunManifest,
}

fn load(common: &Common, subcommand: &'static str) -> Result<Run, CliError> {
    let bytes = fs::read(&common.config).map_err(|e| CliError::io(&common.config, e))?;
    let mut cfg: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::validation("config is valid JSON for ExperimentConfig", e.to_string()))?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(r) = common.replicates {
        match subcommand {
            "smallball" => {
                if let Some(sb) = cfg.smallball.as_mut() {
                    sb.samples = r;
                }
            }
            _ => cfg.replicates = r,
        }
    }
    cfg.validate()?;
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::validation("threads >= 1", "threads = 0"));
        }
        configure_threads(t);
    }
    let mut manifest = RunManifest::new(subcommand, &common.config, &bytes, cfg.seed, cfg.replicates);
    manifest.threads = common.threads;
    Ok(Run { cfg, manifest })
}

fn finish(mut manifest: RunManifest, out: &Path, outputs: Vec<PathBuf>) -> Result<(), CliError> {
    manifest.outputs = outputs;
    manifest.finished_unix = unix_now();
    write_json(&sibling(out, "manifest.json"), &manifest)
}

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref()
        .ok_or_else(|| CliError::validation(&format!("{name} section present"), format!("config has no `{name}` section")))
}

#[derive(Serialize)]
struct CheckReport<'a> {
    max_abs_deviation: f64,
    tol: f64,
    pass: bool,
    iterations: usize,
    status: omap::inference::SolveStatus,
    numeric: &'a CoeffVec,
}

pub fn map(common: &Common, y_path: Option<&Path>, synthesize: bool, check: bool) -> Result<(), CliError> {
    let Run { cfg, manifest } = load(common, "map")?;
    let problem = cfg.problem()?;
    let n = problem.truncation();
    let map_cfg = cfg.map.clone().unwrap_or(MapConfig {
        u_dagger: None,
        check_tol: 1e-8,
        solver: SolverOptions::default(),
    });
    let mut outputs = vec![common.out.clone()];

    let y = match (y_path, synthesize) {
        (Some(path), _) => {
            let y = read_coeffs(path)?;
            if y.len() != n {
                return Err(CliError::validation(
                    "len(y) = truncation",
                    format!("{} coefficients, truncation {n}", y.len()),
                ));
            }
            y
        }
        (None, true) => {
            let spec = map_cfg
                .u_dagger
                .as_ref()
                .ok_or_else(|| CliError::validation("map.u_dagger present", "--synthesize needs map.u_dagger"))?;
            let u_dagger = spec.expand(n, "u_dagger")?;
            let y = problem.sample_data(&u_dagger, &mut rng::stream(cfg.seed, 0))?;
            let y_out = sibling(&common.out, "y.txt");
            write_coeffs(&y_out, &y, &cfg.spec, "synthesized_data")?;
            outputs.push(y_out);
            y
        }
        (None, false) => return Err(CliError::validation("data source", "pass --y <file> or --synthesize")),
    };

    let u = problem.map_closed_form(&y)?;
    write_coeffs(&common.out, &u, &cfg.spec, "map_closed_form")?;

    let mut failure = None;
    if check {
        let sol = problem.map_numeric(&ForwardOp::DiagonalHeat, &y, &map_cfg.solver)?;
        let dev = sol.u.max_abs_diff(&u)?;
        let pass = dev <= map_cfg.check_tol;
        let report = CheckReport {
            max_abs_deviation: dev,
            tol: map_cfg.check_tol,
            pass,
            iterations: sol.iterations,
            status: sol.status,
            numeric: &sol.u,
        };
        let check_out = sibling(&common.out, "check.json");
        write_json(&check_out, &report)?;
        outputs.push(check_out);
        if !pass {
            failure = Some(CliError::check(format!(
                "closed-form/numeric deviation {} exceeds {}",
                fmt_f64(dev),
                fmt_f64(map_cfg.check_tol)
            )));
        }
    }
    finish(manifest, &common.out, outputs)?;
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct RateSummary {
    slope: Option<f64>,
    slope_points: usize,
    trace: f64,
    all_pass: bool,
    replicates: usize,
    seed: u64,
    c: f64,
    rho: f64,
}

pub fn rate(common: &Common) -> Result<(), CliError> {
    let Run { cfg, manifest } = load(common, "rate")?;
    let rate_cfg = section(&cfg.rate, "rate")?;
    let problem = cfg.problem()?;
    let report = rate_experiment(
        &problem,
        &cfg.source()?,
        &cfg.rate_settings()?,
        cfg.replicates,
        cfg.seed,
        Execution::Parallel,
    )?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.b),
                fmt_f64(r.r2),
                fmt_f64(r.mse),
                fmt_f64(r.std_err),
                fmt_f64(r.bound),
                r.pass.to_string(),
            ]
        })
        .collect();
    write_csv(&common.out, &["b", "r2", "mse", "std_err", "bound", "pass"], &rows)?;
    let summary_out = sibling(&common.out, "summary.json");
    write_json(
        &summary_out,
        &RateSummary {
            slope: report.slope,
            slope_points: report.slope_points,
            trace: report.trace,
            all_pass: report.all_pass,
            replicates: cfg.replicates,
            seed: cfg.seed,
            c: rate_cfg.c,
            rho: rate_cfg.rho,
        },
    )?;
    finish(manifest, &common.out, vec![common.out.clone(), summary_out])?;
    if report.all_pass {
        Ok(())
    } else {
        let failed: Vec<String> = report.rows.iter().filter(|r| !r.pass).map(|r| fmt_f64(r.b)).collect();
        Err(CliError::check(format!("rate bound violated beyond 3 std. err. at b = {}", failed.join(", "))))
    }
}

pub fn smallball(common: &Common) -> Result<(), CliError> {
    let Run { cfg, manifest } = load(common, "smallball")?;
    let sb = section(&cfg.smallball, "smallball")?;
    let problem = cfg.problem()?;
    let prior = problem.prior_measure();
    let centers: Vec<CoeffVec> = sb.centers.iter().map(|c| CoeffVec::new(c.coeffs.clone())).collect::<Result<_, _>>()?;

    let y = match (&sb.y, sb.prior_only) {
        (Some(y), false) => Some(CoeffVec::new(y.clone())?),
        _ => None,
    };
    let om = |h: &CoeffVec| -> Result<f64, Error> {
        match &y {
            Some(y) => problem.om_functional(y, h),
            None => Ok(0.5 * prior.cameron_martin_norm(h)?.powi(2)),
        }
    };
    let reference_om = om(&centers[0])?;
    let predictions: Vec<f64> = centers
        .iter()
        .map(|c| om(c).map(|i| (reference_om - i).exp()))
        .collect::<Result<_, _>>()?;

    let y_slice: Option<&[f64]> = y.as_ref().map(|v| v.as_slice());
    let phi = |x: &[f64]| y_slice.map_or(0.0, |y| problem.phi_slice(x, y));
    let budget = McBudget::new(sb.samples, cfg.seed);
    let pairs: Vec<(usize, usize)> = (0..centers.len()).map(|i| (i, 0)).collect();

    let mut rows = Vec::new();
    for &eps in &sb.eps_grid {
        let queries: Vec<BallQuery> = centers
            .iter()
            .map(|c| BallQuery::new(c.clone(), eps))
            .collect::<Result<_, _>>()?;
        let ratios = ball_ratios_with(&prior, &phi, &queries, &pairs, &budget)?;
        for ((center, ratio), prediction) in sb.centers.iter().zip(ratios).zip(&predictions) {
            let (ratio, std_err, status) = match ratio {
                Ok(r) => (fmt_f64(r.ratio), fmt_f64(r.std_err), "ok".to_string()),
                Err(Error::UndefinedRatio { .. }) => (String::new(), String::new(), "zero_hits".to_string()),
                Err(e) => return Err(e.into()),
            };
            rows.push(vec![fmt_f64(eps), center.label.clone(), ratio, std_err, fmt_f64(*prediction), status]);
        }
    }
    write_csv(&common.out, &["eps", "center", "ratio", "std_err", "om_prediction", "status"], &rows)?;
    finish(manifest, &common.out, vec![common.out.clone()])
}

#[derive(Serialize)]
struct ShiftVerdict {
    label: String,
    #[serde(flatten)]
    report: omap::measures::KakutaniReport,
}

#[derive(Serialize)]
struct WitnessRow {
    n: usize,
    phi_value: f64,
}

#[derive(Serialize)]
struct Diagnosis {
    kakutani: Vec<ShiftVerdict>,
    lipschitz: Option<omap::inference::LipschitzInfo>,
    linear_condition: omap::inference::LinearConditionReport,
    witness: Vec<WitnessRow>,
    witness_strictly_decreasing: bool,
}

pub fn diagnose(common: &Common) -> Result<(), CliError> {
    let Run { cfg, manifest } = load(common, "diagnose")?;
    let diag = cfg.diagnose.clone().unwrap_or(omap::config::DiagnoseConfig {
        shifts: Vec::new(),
        grid: None,
        witness_ns: Vec::new(),
        linear_threshold: None,
    });
    let n = cfg.truncation;
    let grid = diag.grid_or_default(n);
    let lam = cfg.noise.variances(&cfg.spec, n)?;

    let kakutani = diag
        .shifts
        .iter()
        .map(|s| {
            let a = s.coefficients(&lam)?;
            Ok(ShiftVerdict {
                label: s.label().to_string(),
                report: kakutani_diagnostic(&a, &lam, &grid)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let lipschitz = match cfg.noise.kind {
        NoiseKind::Laplacian => Some(lipschitz_info(&cfg.spec, cfg.noise.b, cfg.noise.beta, n)?),
        NoiseKind::Gaussian => None,
    };
    let linear_condition = check_linear_condition(
        &cfg.spec,
        &ForwardOp::DiagonalHeat,
        &lam,
        &grid,
        diag.linear_threshold.unwrap_or(f64::MAX),
    )?;

    let witness_max = diag.witness_ns.iter().copied().max().unwrap_or(0);
    let witness = if witness_max == 0 {
        Vec::new()
    } else {
        let lam_w = cfg.noise.variances(&cfg.spec, witness_max)?;
        let values = witness_sequence(cfg.noise.kind, &lam_w, &diag.witness_ns)?;
        diag.witness_ns
            .iter()
            .zip(values)
            .map(|(&n, phi_value)| WitnessRow { n, phi_value })
            .collect()
    };
    let witness_strictly_decreasing = witness.windows(2).all(|w| w[1].phi_value < w[0].phi_value);

    write_json(
        &common.out,
        &Diagnosis {
            kakutani,
            lipschitz,
            linear_condition,
            witness,
            witness_strictly_decreasing,
        },
    )?;
    finish(manifest, &common.out, vec![common.out.clone()])
}
