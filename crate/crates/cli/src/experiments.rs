//! One runner per subcommand.

use std::path::{Path, PathBuf};

use eulerexit::estimate::{
    check_exponential_moment, check_moment_recursion, crossing_probability, estimate_l_hat, exit_tail, mc_mean,
    modulus_tail, moment_profile, strong_euler_error, McEstimate, MomentProfile, Source,
};
use eulerexit::harness::{
    boundary_moment_experiment, coupled_study, fit_rate_with_drop, pilot_horizon, BoundaryConfig, RateFit, RateTable,
    StudyConfig, DEFAULT_REF_FACTOR, MIN_R_SQUARED,
};
use eulerexit::model::zoo::{build, DomainParams, ZooModel};
use eulerexit::model::{band_points, check_lipschitz, check_noncharacteristic, AssumptionReport, BoxSampler};
use eulerexit::simulate::{simulate_many, CoupledConfig, Layout, ReferenceMode, Track};

use crate::config::{Config, ExperimentSection, MetaSection, RunSection};
use crate::output::{fit_csv, results_csv, Row};
use crate::{exit_code, CliError, Common, Experiment};

/// What a run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub summary: Vec<String>,
    pub out_dir: PathBuf,
}

/// Rows and verdict of one experiment.
#[derive(Debug, Default)]
struct Report {
    rows: Vec<Row>,
    fits: Vec<(String, RateFit)>,
    /// `None` when the experiment has no acceptance window.
    passed: Option<bool>,
    summary: Vec<String>,
    l_hat: Option<f64>,
}

impl Report {
    fn check(&mut self, ok: bool) {
        self.passed = Some(self.passed.unwrap_or(true) && ok);
    }
}

const DEFAULT_POINTS: usize = 2000;

/// By-product errors below this are rounding noise (the scheme is exact).
const ROUNDING_LEVEL: f64 = 1e-12;

fn allowed_keys(exp: Experiment) -> &'static [&'static str] {
    const BASE: [&str; 3] = ["seed", "out", "points"];
    match exp {
        Experiment::VerifyAssumptions => &BASE,
        Experiment::ExitRate => &["seed", "out", "points", "n", "meshes", "horizon", "ref_factor", "p", "window_lo", "window_hi"],
        Experiment::StoppedRate => &["seed", "out", "points", "n", "meshes", "horizon", "ref_factor", "window_lo", "window_hi"],
        Experiment::BoundaryMoments => {
            &["seed", "out", "points", "n", "h", "start_distances", "mesh_ratio", "horizon", "ref_factor"]
        }
        Experiment::Moments => &["seed", "out", "points", "n", "h", "horizon", "ref_factor", "powers", "exp_c", "l_hat_n"],
        Experiment::Crossing => &["seed", "out", "points", "n", "h", "alpha"],
        Experiment::Modulus => {
            &["seed", "out", "points", "n", "meshes", "horizon", "rho", "ref_factor", "window_lo", "window_hi"]
        }
        Experiment::EulerStrongError => {
            &["seed", "out", "points", "n", "meshes", "horizon", "q", "ref_factor", "window_lo", "window_hi"]
        }
        Experiment::Tails => &["seed", "out", "points", "n", "h", "horizon", "unit"],
    }
}

/// Loads the config named by `common` and runs `exp`.
pub fn run(exp: Experiment, common: &Common) -> Result<Outcome, CliError> {
    let path = common.config.as_ref().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let cfg = Config::load(path)?;
    run_config(exp, cfg, common.out.clone(), common.seed)
}

/// Runs `exp` on a parsed config. `out` and `seed` override the config.
pub fn run_config(exp: Experiment, mut cfg: Config, out: Option<PathBuf>, seed: Option<u64>) -> Result<Outcome, CliError> {
    if let Some(e) = &cfg.experiment {
        if e.name != exp.name() {
            return Err(CliError::Config(format!("config is for experiment {}, not {}", e.name, exp.name())));
        }
    }
    if let Some(s) = seed {
        cfg.run.seed = Some(s);
    }
    let seed = cfg.run.seed.ok_or_else(|| CliError::Config("a seed is required".into()))?;
    let out_dir = out
        .or_else(|| cfg.run.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Config("an output directory is required".into()))?;
    let allowed = allowed_keys(exp);
    if let Some(k) = cfg.run.present().into_iter().find(|k| !allowed.contains(k)) {
        return Err(CliError::Config(format!("key run.{k} does not apply to {}", exp.name())));
    }

    let zoo = build(
        &cfg.model.id,
        &cfg.model.params,
        DomainParams { r: cfg.domain.r, clamp_band: cfg.domain.clamp_band },
    )?;
    cfg.model.params = zoo.params.clone();
    cfg.domain.r = Some(zoo.r);
    cfg.domain.clamp_band = Some(zoo.clamp_band);
    cfg.experiment = Some(ExperimentSection { name: exp.name().to_string() });

    let points = *cfg.run.points.get_or_insert(DEFAULT_POINTS);
    let assumptions = verify(&zoo, seed, points)?;
    let mut report = if exp == Experiment::VerifyAssumptions {
        assumption_report(&zoo, &assumptions)
    } else if !assumptions.passed() {
        let mut summary = vec![format!("{} {}: assumption check failed", exp.name(), zoo.id)];
        summary.extend(assumptions.violations.iter().take(5).map(|v| {
            format!("  {} = {} violates {} at {:?}", v.quantity, v.observed, v.required, v.location)
        }));
        return Ok(Outcome { code: exit_code::ASSUMPTION, summary, out_dir });
    } else {
        let run = &mut cfg.run;
        match exp {
            Experiment::VerifyAssumptions => unreachable!(),
            Experiment::ExitRate | Experiment::StoppedRate => rate(exp, &zoo, run, seed)?,
            Experiment::BoundaryMoments => boundary(&zoo, run, seed)?,
            Experiment::Moments => moments(&zoo, run, seed)?,
            Experiment::Crossing => crossing(&zoo, run, seed)?,
            Experiment::Modulus => modulus(&zoo, run, seed)?,
            Experiment::EulerStrongError => strong(&zoo, run, seed)?,
            Experiment::Tails => tails(&zoo, run, seed)?,
        }
    };

    // the output directory is a property of the invocation, not the run
    cfg.run.out = None;
    cfg.meta = Some(MetaSection {
        version: eulerexit::VERSION.to_string(),
        lipschitz: zoo.problem.lip(),
        r: zoo.r,
        l_hat: report.l_hat,
    });
    write_outputs(&out_dir, &cfg, &report)?;

    let code = if exp == Experiment::VerifyAssumptions && !assumptions.passed() {
        exit_code::ASSUMPTION
    } else if exp != Experiment::VerifyAssumptions && report.passed == Some(false) {
        exit_code::WINDOW
    } else {
        exit_code::OK
    };
    report.summary.insert(0, format!("{} {}: {}", exp.name(), zoo.id, verdict(exp, report.passed, code)));
    Ok(Outcome { code, summary: report.summary, out_dir })
}

fn verdict(exp: Experiment, passed: Option<bool>, code: i32) -> &'static str {
    match (code, passed) {
        (exit_code::ASSUMPTION, _) => "assumption check failed",
        (_, Some(true)) if exp == Experiment::VerifyAssumptions => "all checks pass",
        (_, Some(true)) => "within window",
        (_, Some(false)) => "outside window",
        (_, None) => "done",
    }
}

fn write_outputs(dir: &Path, cfg: &Config, report: &Report) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    std::fs::write(dir.join("results.csv"), results_csv(&report.rows)).map_err(io)?;
    std::fs::write(dir.join("meta.txt"), cfg.to_text()).map_err(io)?;
    let fit = dir.join("fit.csv");
    if report.fits.is_empty() {
        if fit.exists() {
            std::fs::remove_file(fit).map_err(io)?;
        }
    } else {
        std::fs::write(fit, fit_csv(&report.fits)).map_err(io)?;
    }
    Ok(())
}

fn verify(zoo: &ZooModel, seed: u64, points: usize) -> Result<AssumptionReport, CliError> {
    if points == 0 {
        return Err(CliError::Config("run.points must be positive".into()));
    }
    let problem = &zoo.problem;
    let mut report = check_noncharacteristic(problem, &band_points(&problem.domain, seed, points))?;
    let sampler = BoxSampler::new(&problem.domain, seed);
    let pairs: Vec<_> = (0..points as u64).map(|i| sampler.pair(i)).collect();
    report.merge(check_lipschitz(problem, &pairs));
    Ok(report)
}

fn assumption_report(zoo: &ZooModel, a: &AssumptionReport) -> Report {
    let n = a.checked_points;
    let mut rows = vec![
        Row::exact(None, n, "effective_lipschitz", zoo.problem.lip()),
        Row::exact(None, n, "radius", zoo.r),
        Row::exact(None, n, "violations", a.violations.len() as f64),
    ];
    rows.extend(a.worst.iter().map(|(k, v)| Row::exact(None, n, format!("worst_{k}"), *v)));
    let passed = a.passed();
    let mut summary = vec![format!("checked {n} points, {} violations", a.violations.len())];
    summary.extend(a.violations.iter().take(5).map(|v| {
        format!("  {} = {} violates {} at {:?}", v.quantity, v.observed, v.required, v.location)
    }));
    Report { rows, summary, passed: Some(passed), ..Report::default() }
}

fn dyadic(range: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    range.map(|k| 2f64.powi(-k)).collect()
}

fn window(run: &mut RunSection, default: Option<(f64, f64)>) -> Option<(f64, f64)> {
    match (run.window_lo, run.window_hi, default) {
        (Some(lo), Some(hi), _) => Some((lo, hi)),
        (None, None, d) => {
            if let Some((lo, hi)) = d {
                run.window_lo = Some(lo);
                run.window_hi = Some(hi);
            }
            d
        }
        (lo, hi, d) => {
            let (dlo, dhi) = d.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            let w = (lo.unwrap_or(dlo), hi.unwrap_or(dhi));
            run.window_lo = Some(w.0);
            run.window_hi = Some(w.1);
            Some(w)
        }
    }
}

fn horizon_or_pilot(zoo: &ZooModel, run: &mut RunSection, h: f64, coarsest: f64, seed: u64) -> Result<f64, CliError> {
    match run.horizon {
        Some(t) => Ok(t),
        None => {
            let t = pilot_horizon(&zoo.problem, h, coarsest, seed)?;
            run.horizon = Some(t);
            Ok(t)
        }
    }
}

fn table_rows(table: &RateTable) -> Vec<Row> {
    table
        .meshes
        .iter()
        .zip(&table.errors)
        .zip(&table.censor_bias)
        .map(|((&h, e), &b)| Row::estimate(Some(h), table.metric.to_string(), e).with_censor_bias(b))
        .collect()
}

fn fit_line(name: &str, f: &RateFit) -> String {
    format!(
        "  {name}: slope {:.4} ± {:.4}, r2 {:.4}{}",
        f.slope,
        f.slope_stderr,
        f.r_squared,
        if f.dropped_coarsest { ", coarsest mesh dropped" } else { "" }
    )
}

fn rate(exp: Experiment, zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let meshes = run.meshes.get_or_insert_with(|| dyadic(4..=9)).clone();
    let n = *run.n.get_or_insert(20_000);
    let ref_factor = *run.ref_factor.get_or_insert(DEFAULT_REF_FACTOR);
    let coarsest = *meshes.first().ok_or_else(|| CliError::Config("run.meshes is empty".into()))?;
    let horizon = horizon_or_pilot(zoo, run, coarsest, coarsest, seed)?;
    let p = if exp == Experiment::ExitRate { *run.p.get_or_insert(1) } else { 1 };
    let default_window = match exp {
        Experiment::ExitRate if p == 1 => Some((0.40, 0.60)),
        Experiment::StoppedRate => Some((0.15, 0.35)),
        _ => None,
    };
    let win = window(run, default_window);

    let mut study_cfg = StudyConfig::new(meshes, horizon, n, seed);
    study_cfg.ref_factor = ref_factor;
    study_cfg.exit_powers = vec![p];
    let study = coupled_study(&zoo.problem, &study_cfg)?;

    let mut report = Report::default();
    let reference_mesh = study.stopped.meshes.last().copied().unwrap_or(coarsest) / ref_factor as f64;
    report.rows.push(
        Row::estimate(Some(reference_mesh), "reference_exit_mean", &study.reference_mean)
            .with_censor_bias(study.reference_censored * study.horizon),
    );
    let tables: Vec<&RateTable> = match exp {
        Experiment::ExitRate => vec![&study.exit[0], &study.stopped, &study.gap],
        _ => vec![&study.stopped, &study.gap],
    };
    for t in &tables {
        report.rows.extend(table_rows(t));
    }
    for (i, t) in tables.iter().enumerate() {
        let name = t.metric.to_string();
        if i > 0 && t.errors.iter().all(|e| e.mean <= ROUNDING_LEVEL) {
            report.summary.push(format!("  {name}: zero up to rounding, no fit"));
            continue;
        }
        match fit_rate_with_drop(t) {
            Ok(fit) => {
                report.summary.push(fit_line(&name, &fit));
                if i == 0 {
                    if let Some((lo, hi)) = win {
                        report.check((lo..=hi).contains(&fit.slope) && fit.r_squared >= MIN_R_SQUARED);
                    }
                }
                report.fits.push((name, fit));
            }
            // the first table is the headline; a degenerate by-product table is only reported
            Err(e) if i > 0 => report.summary.push(format!("  {name}: no fit ({e})")),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some((lo, hi)) = win {
        report.summary.push(format!("  window [{lo}, {hi}], r2 >= {MIN_R_SQUARED}"));
    }
    let worst = study.censored.iter().copied().fold(0.0, f64::max);
    report.summary.push(format!("  horizon {}, censored fraction <= {worst}", study.horizon));
    Ok(report)
}

fn boundary(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let h = *run.h.get_or_insert(2f64.powi(-6));
    let ratio = *run.mesh_ratio.get_or_insert(4);
    if ratio < 2 {
        return Err(CliError::Config("run.mesh_ratio must be at least 2".into()));
    }
    let r = zoo.r;
    let starts = run
        .start_distances
        .get_or_insert_with(|| (1..).map(|k| 0.0125 * k as f64).take_while(|p| *p <= r).collect())
        .clone();
    let n = *run.n.get_or_insert(20_000);
    let ref_factor = *run.ref_factor.get_or_insert(DEFAULT_REF_FACTOR);
    let horizon = horizon_or_pilot(zoo, run, h, h, seed)?;

    let mut report = Report::default();
    let mut results = Vec::new();
    for mesh in [h, h / ratio as f64] {
        let cfg = BoundaryConfig {
            h: mesh,
            start_distances: starts.clone(),
            n,
            horizon,
            ref_factor,
            seed,
        };
        let out = boundary_moment_experiment(&zoo.problem, &zoo.boundary_direction, &cfg)?;
        for row in &out.rows {
            let b = row.censored * horizon;
            report.rows.push(Row::estimate(Some(mesh), format!("discrete_exit_mean_p0_{}", row.p0), &row.discrete).with_censor_bias(b));
            report.rows.push(Row::estimate(Some(mesh), format!("reference_exit_mean_p0_{}", row.p0), &row.reference).with_censor_bias(b));
        }
        report.rows.push(Row::exact(Some(mesh), n, "affine_constant", out.d));
        results.push(out);
    }
    let (coarse, fine) = (&results[0], &results[1]);
    let stability = fine.d / coarse.d;
    let first = coarse.rows.first().expect("at least one start");
    let contrast = first.discrete.mean / first.reference.mean;
    report.rows.push(Row::exact(None, n, "affine_constant_ratio", stability));
    report.rows.push(Row::exact(Some(h), n, "boundary_contrast", contrast));
    report.check((0.5..=2.0).contains(&stability) && contrast >= 3.0);
    report.summary.push(format!("  D({h}) = {:.4}, D({}) = {:.4}, ratio {stability:.4}", coarse.d, h / ratio as f64, fine.d));
    report.summary.push(format!(
        "  at p0 = {}: E[theta^pi] = {:.5}, E[theta_ref] = {:.5}, contrast {contrast:.2}",
        first.p0, first.discrete.mean, first.reference.mean
    ));
    Ok(report)
}

fn moments(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let h = *run.h.get_or_insert(2f64.powi(-6));
    let n = *run.n.get_or_insert(20_000);
    let ref_factor = *run.ref_factor.get_or_insert(DEFAULT_REF_FACTOR);
    let powers = run.powers.get_or_insert_with(|| vec![1, 2, 3]).clone();
    if !powers.contains(&1) {
        return Err(CliError::Config("run.powers must include 1".into()));
    }
    let l_hat_n = *run.l_hat_n.get_or_insert(4000);
    let horizon = horizon_or_pilot(zoo, run, h, h, seed)?;
    // L_hat gets its own paths so that the checks are not tuned to the sample
    let l_hat = estimate_l_hat(&zoo.problem, &zoo.start_family, h, horizon, l_hat_n, seed.wrapping_add(1))?;
    let c = *run.exp_c.get_or_insert(0.5 / l_hat.value);

    let layout = Layout::new(&CoupledConfig {
        meshes: vec![h],
        ref_factor,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Bridge,
        track: Track::Exit,
        seed,
    })?;
    let t = layout.horizon();
    let paths = simulate_many(&zoo.problem, &layout, n)?;
    let discrete: Vec<f64> = paths.iter().map(|p| p.levels[0].exit.capped(t)).collect();
    let reference: Vec<f64> =
        paths.iter().map(|p| p.reference.as_ref().expect("reference is on").exit.capped(t)).collect();
    let censored = paths.iter().filter(|p| p.levels[0].exit.is_censored()).count() as f64 / n as f64;

    let mut report = Report { l_hat: Some(l_hat.value), ..Report::default() };
    report.rows.push(Row::exact(Some(h), l_hat_n, "l_hat", l_hat.value));
    let ref_mesh = h / ref_factor as f64;
    for (source, samples, mesh, label) in
        [(Source::Discrete, &discrete, h, "discrete"), (Source::Continuous, &reference, ref_mesh, "reference")]
    {
        let profiles: Vec<MomentProfile> =
            powers.iter().map(|&p| moment_profile(samples, p, source)).collect::<Result<_, _>>()?;
        for m in &profiles {
            report.rows.push(Row::estimate(Some(mesh), format!("moment_p{}_{label}", m.p), &m.raw).with_censor_bias(censored * t.powi(m.p as i32)));
        }
        for chk in check_moment_recursion(&profiles, l_hat.value)? {
            report.rows.push(Row::exact(Some(mesh), n, format!("recursion_bound_p{}_{label}", chk.p), chk.bound));
            report.rows.push(Row::exact(Some(mesh), n, format!("recursion_margin_p{}_{label}", chk.p), chk.margin));
            report.rows.push(Row::exact(Some(mesh), n, format!("recursion_literal_bound_p{}_{label}", chk.p), chk.loose_bound));
            report.check(chk.passed);
            report.summary.push(format!(
                "  {label} p={}: E[theta^p] = {:.5} vs bound {:.5} (+{:.5}) {}; literal constant {:.5} {}",
                chk.p,
                chk.lhs.mean,
                chk.bound,
                chk.margin,
                if chk.passed { "ok" } else { "FAIL" },
                chk.loose_bound,
                if chk.passed_loose { "ok" } else { "FAIL" }
            ));
        }
        let e = check_exponential_moment(samples, l_hat.value, c)?;
        report.rows.push(Row::estimate(Some(mesh), format!("exp_moment_{label}"), &e.estimate));
        report.rows.push(Row::exact(Some(mesh), n, format!("exp_moment_bound_{label}"), e.bound));
        report.check(e.passed);
        report.summary.push(format!(
            "  {label} c={c:.5}: E[exp(c theta)] = {:.5} vs bound {:.5} {}",
            e.estimate.mean,
            e.bound,
            if e.passed { "ok" } else { "FAIL" }
        ));
    }
    report.summary.insert(0, format!("  L_hat = {:.5} (horizon {t}, censored {censored})", l_hat.value));
    Ok(report)
}

fn crossing(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let h = *run.h.get_or_insert(2f64.powi(-8));
    let n = *run.n.get_or_insert(100_000);
    let alpha = *run.alpha.get_or_insert(0.75);
    let est = crossing_probability(&zoo.problem, h, &zoo.boundary_starts, n, seed)?;
    let mut report = Report::default();
    report.rows.push(Row::estimate(Some(h), "inside_probability", &est.overall));
    for (i, e) in est.per_start.iter().enumerate() {
        report.rows.push(Row::estimate(Some(h), format!("inside_probability_start{i}"), e));
    }
    let worst = est.per_start.iter().map(|e| e.mean).fold(est.overall.mean, f64::max);
    report.check(worst <= alpha);
    report.summary.push(format!(
        "  inside probability {:.5} ± {:.5}, worst start {worst:.5}, alpha {alpha}",
        est.overall.mean, est.overall.stderr
    ));
    Ok(report)
}

fn modulus(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let meshes = run.meshes.get_or_insert_with(|| dyadic(4..=5)).clone();
    let coarsest = *meshes.first().ok_or_else(|| CliError::Config("run.meshes is empty".into()))?;
    let horizon = *run.horizon.get_or_insert(coarsest);
    let rho = *run.rho.get_or_insert(1.5 * horizon.sqrt());
    let n = *run.n.get_or_insert(20_000);
    let ref_factor = *run.ref_factor.get_or_insert(DEFAULT_REF_FACTOR);
    let (lo, hi) = window(run, Some((0.33, 0.67))).expect("default window");
    let est = modulus_tail(&zoo.problem, &meshes, horizon, rho, n, ref_factor, seed)?;
    let mut report = Report::default();
    for e in &est {
        report.rows.push(Row::estimate(Some(e.h), "modulus_exceedance", &e.probability));
        report.rows.push(Row::exact(Some(e.h), n, "modulus_events", e.events as f64));
        report.rows.push(Row::exact(Some(e.h), n, "kappa", e.kappa));
    }
    const MIN_EVENTS: usize = 100;
    report.check(est.iter().all(|e| e.events >= MIN_EVENTS));
    for w in est.windows(2) {
        let ratio = w[1].probability.mean / w[0].probability.mean;
        report.rows.push(Row::exact(Some(w[1].h), n, "exceedance_ratio", ratio));
        report.check((lo..=hi).contains(&ratio));
        report.summary.push(format!("  h {} -> {}: ratio {ratio:.4} (events {} / {})", w[0].h, w[1].h, w[0].events, w[1].events));
    }
    report.summary.push(format!("  T = {horizon}, rho = {rho}, window [{lo}, {hi}], at least {MIN_EVENTS} events"));
    Ok(report)
}

fn strong(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let meshes = run.meshes.get_or_insert_with(|| dyadic(3..=8)).clone();
    let horizon = *run.horizon.get_or_insert(1.0);
    let q = *run.q.get_or_insert(4);
    let n = *run.n.get_or_insert(4000);
    let ref_factor = *run.ref_factor.get_or_insert(DEFAULT_REF_FACTOR);
    let win = window(run, Some((0.40, 0.60)));
    let out = strong_euler_error(&zoo.problem, &meshes, horizon, q, n, ref_factor, seed)?;
    let mut report = Report::default();
    report.rows.extend(table_rows(&out.table));
    if out.degenerate {
        report.summary.push("  scheme is exact for this model; no rate fitted".into());
        return Ok(report);
    }
    let fit = fit_rate_with_drop(&out.table)?;
    report.summary.push(fit_line(&out.table.metric.to_string(), &fit));
    if let Some((lo, hi)) = win {
        report.check((lo..=hi).contains(&fit.slope));
        report.summary.push(format!("  window [{lo}, {hi}]"));
    }
    report.fits.push((out.table.metric.to_string(), fit));
    Ok(report)
}

fn tails(zoo: &ZooModel, run: &mut RunSection, seed: u64) -> Result<Report, CliError> {
    let h = *run.h.get_or_insert(2f64.powi(-6));
    let n = *run.n.get_or_insert(20_000);
    let horizon = match run.horizon {
        Some(t) => t,
        // survival needs a longer window than the mean
        None => *run.horizon.insert(2.0 * pilot_horizon(&zoo.problem, h, h, seed)?),
    };
    let unit = *run.unit.get_or_insert(horizon / 32.0);
    let layout = Layout::new(&CoupledConfig {
        meshes: vec![h],
        ref_factor: 1,
        horizon,
        level: 0.0,
        reference: ReferenceMode::Off,
        track: Track::Exit,
        seed,
    })?;
    let t = layout.horizon();
    let paths = simulate_many(&zoo.problem, &layout, n)?;
    let samples: Vec<f64> = paths.iter().map(|p| p.levels[0].exit.capped(t)).collect();
    let censored = paths.iter().filter(|p| p.levels[0].exit.is_censored()).count() as f64 / n as f64;
    let table = exit_tail(&samples, unit)?;
    let mut report = Report::default();
    report.rows.push(Row::estimate(Some(h), "exit_mean", &mc_mean(&samples)?).with_censor_bias(censored * t));
    for &(k, s, count) in &table.survival {
        let se = (s * (1.0 - s) / n as f64).sqrt();
        let e = McEstimate::new(s, se, n);
        report.rows.push(Row::estimate(Some(h), format!("survival_k{k}"), &e));
        let _ = count;
    }
    if let Some(beta) = table.beta {
        report.rows.push(Row::exact(Some(h), n, "tail_rate", beta));
        report.rows.push(Row::exact(Some(h), n, "tail_r_squared", table.r_squared.unwrap_or(f64::NAN)));
        report.summary.push(format!("  tail rate {beta:.4} per unit time, r2 {:.4}", table.r_squared.unwrap_or(f64::NAN)));
    } else {
        report.summary.push("  too few populated cells for a tail fit".into());
    }
    let (c, alpha) = table.escape_pair;
    report.rows.push(Row::exact(Some(h), n, "escape_time", c));
    report.rows.push(Row::exact(Some(h), n, "escape_probability", alpha));
    report.summary.push(format!("  P(theta >= {c:.4}) = {alpha:.4}, censored {censored}"));
    Ok(report)
}
