//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line per criterion and fails if any criterion fails.
//!
//! Runtime budgets assume a release-grade build; the workspace test profile
//! is optimised for that reason.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use eulerexit::harness::reference_exit_mean;
use eulerexit::model::zoo::{build, DomainParams};

const SEED: u64 = 20_240_601;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    /// Runs an experiment; returns the exit code, stdout and the output dir.
    fn run(&self, exp: &str, name: &str, config: &str, extra: &[&str]) -> (i32, String, PathBuf) {
        let cfg = self.path(&format!("{name}.toml"));
        std::fs::write(&cfg, config).unwrap();
        let out = self.path(name);
        let res = Command::new(env!("CARGO_BIN_EXE_eulerexit"))
            .arg(exp)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .args(extra)
            .output()
            .expect("binary runs");
        let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
        let stderr = String::from_utf8_lossy(&res.stderr);
        (res.status.code().unwrap_or(-1), format!("{stdout}{stderr}"), out)
    }
}

/// `metric -> [(h, value, stderr)]` from a results file.
fn results(dir: &Path) -> BTreeMap<String, Vec<(f64, f64, f64)>> {
    let text = std::fs::read_to_string(dir.join("results.csv")).unwrap();
    let mut out: BTreeMap<String, Vec<(f64, f64, f64)>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let h = f[0].parse().unwrap_or(f64::NAN);
        out.entry(f[2].to_string()).or_default().push((h, f[3].parse().unwrap(), f[4].parse().unwrap()));
    }
    out
}

/// `metric -> (slope, r_squared, dropped)` from a fit file.
fn fits(dir: &Path) -> BTreeMap<String, (f64, f64, bool)> {
    let text = std::fs::read_to_string(dir.join("fit.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[0].to_string(), (f[1].parse().unwrap(), f[3].parse().unwrap(), f[5] == "true"))
        })
        .collect()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn rate_config(model: &str) -> String {
    format!(
        "[model]\nid = \"{model}\"\n\n[run]\nseed = {SEED}\nn = 20000\nmeshes = [0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125]\nhorizon = 8.0\nref_factor = 64\np = 1\n"
    )
}

fn exact_interval_means() -> Verdict {
    let (checks, took) = timed(|| {
        [0.6, 0.75, 0.9]
            .map(|z0| {
                let params = BTreeMap::from([("z0".to_string(), z0)]);
                let zoo = build("interval_bm", &params, DomainParams::default()).unwrap();
                let m = reference_exit_mean(&zoo.problem, 1e-4, 8.0, 200_000, SEED).unwrap();
                let exact = 1.0 - z0;
                let tol = (3.0 * m.mean.stderr).max(0.005 * exact);
                ((m.mean.mean - exact).abs() <= tol, format!("z0={z0}: {:.5} vs {exact:.2} (tol {tol:.5})", m.mean.mean))
            })
            .to_vec()
    });
    let ok = checks.iter().all(|c| c.0) && took <= Duration::from_secs(120);
    let parts: Vec<String> = checks.into_iter().map(|c| c.1).collect();
    verdict(ok, format!("{}; {:.0?}", parts.join(", "), took))
}

fn ball_mean() -> Verdict {
    let (m, took) = timed(|| {
        let zoo = build("bm_ball", &BTreeMap::new(), DomainParams::default()).unwrap();
        reference_exit_mean(&zoo.problem, 1e-4, 8.0, 100_000, SEED).unwrap()
    });
    let ok = (m.mean.mean - 0.5).abs() <= 3.0 * m.mean.stderr && took <= Duration::from_secs(120);
    verdict(ok, format!("{:.5} ± {:.5} vs 0.5; {took:.0?}", m.mean.mean, m.mean.stderr))
}

struct RateRuns {
    dirs: Vec<(String, PathBuf, i32)>,
    took: Duration,
}

fn rate_runs(ws: &Workspace) -> RateRuns {
    let (dirs, took) = timed(|| {
        ["interval_bm", "ou_interval"]
            .iter()
            .map(|m| {
                let (code, _, dir) = ws.run("exit-rate", &format!("rate_{m}"), &rate_config(m), &["--workers", "1"]);
                (m.to_string(), dir, code)
            })
            .collect()
    });
    RateRuns { dirs, took }
}

fn slope_check(runs: &RateRuns, metric: &str, lo: f64, hi: f64, need_exit_zero: bool) -> Verdict {
    let mut ok = runs.took <= Duration::from_secs(600);
    let mut parts = Vec::new();
    for (model, dir, code) in &runs.dirs {
        let (slope, r2, dropped) = fits(dir)[metric];
        let inside = (lo..=hi).contains(&slope) && r2 >= 0.95 && (!need_exit_zero || *code == 0);
        ok &= inside;
        parts.push(format!("{model} slope {slope:.4} r2 {r2:.4}{}", if dropped { " (drop)" } else { "" }));
    }
    verdict(ok, format!("{}; {:.0?}", parts.join(", "), runs.took))
}

fn boundary_moments(ws: &Workspace) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for model in ["interval_bm", "ou_interval"] {
        let cfg = format!("[model]\nid = \"{model}\"\n\n[run]\nseed = {SEED}\nn = 20000\nh = 0.015625\nmesh_ratio = 4\nstart_distances = [0.0125, 0.025]\nhorizon = 4.0\n");
        let (code, _, dir) = ws.run("boundary-moments", &format!("bm_{model}"), &cfg, &[]);
        let r = results(&dir);
        let d: Vec<(f64, f64, f64)> = r["affine_constant"].clone();
        let (d_h, d_fine) = (d[0].1, d[1].1);
        let ratio = d_fine / d_h;
        // the constant fitted at h must also cover the finer mesh
        let fine_h = d[1].0;
        let affine = ["0.0125", "0.025"].iter().all(|p0| {
            let row = r[&format!("discrete_exit_mean_p0_{p0}")].iter().find(|x| x.0 == fine_h).copied().unwrap();
            let p0: f64 = p0.parse().unwrap();
            row.1 <= d_h * (p0 + fine_h.sqrt()) + 3.0 * row.2
        });
        let contrast = r["boundary_contrast"][0].1;
        let pass = code == 0 && affine && (0.5..=2.0).contains(&ratio) && contrast >= 3.0;
        ok &= pass;
        parts.push(format!("{model} D {d_h:.3}/{d_fine:.3} contrast {contrast:.1}"));
    }
    verdict(ok, parts.join(", "))
}

fn moments(ws: &Workspace) -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for model in ["interval_bm", "ou_interval"] {
        let cfg = format!("[model]\nid = \"{model}\"\n\n[run]\nseed = {SEED}\nn = 20000\nh = 0.015625\npowers = [1, 2, 3]\n");
        let (code, _, dir) = ws.run("moments", &format!("mom_{model}"), &cfg, &[]);
        let r = results(&dir);
        let l_hat = r["l_hat"][0].1;
        // recheck the printed numbers rather than trusting the exit code alone
        let mut pass = code == 0;
        for src in ["discrete", "reference"] {
            for p in [2, 3] {
                let lhs = r[&format!("moment_p{p}_{src}")][0].1;
                let bound = r[&format!("recursion_bound_p{p}_{src}")][0].1;
                let margin = r[&format!("recursion_margin_p{p}_{src}")][0].1;
                pass &= lhs <= bound + margin;
            }
            let e = r[&format!("exp_moment_{src}")][0];
            pass &= e.1 <= r[&format!("exp_moment_bound_{src}")][0].1 + 3.0 * e.2;
        }
        ok &= pass;
        parts.push(format!("{model} L_hat {l_hat:.4}"));
    }
    verdict(ok, parts.join(", "))
}

fn crossing(ws: &Workspace) -> Verdict {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut symmetric = String::new();
    for model in ["interval_bm", "ou_interval", "bm_ball", "time_band", "gbm_clamped"] {
        for h in [0.00390625, 0.0009765625] {
            let cfg = format!("[model]\nid = \"{model}\"\n\n[run]\nseed = {SEED}\nn = 100000\nh = {h}\nalpha = 0.75\n");
            let (code, _, dir) = ws.run("crossing", &format!("cross_{model}_{h}"), &cfg, &[]);
            let r = results(&dir);
            let (_, p, se) = r["inside_probability"][0];
            ok &= code == 0 && p <= 0.75;
            worst = worst.max(p);
            if model == "interval_bm" {
                ok &= (p - 0.5).abs() <= 3.0 * se;
                symmetric.push_str(&format!(" {p:.4}±{se:.4}"));
            }
        }
    }
    verdict(ok, format!("largest {worst:.4}; interval_bm{symmetric}"))
}

fn modulus(ws: &Workspace) -> Verdict {
    let cfg = format!("[model]\nid = \"interval_bm\"\n\n[run]\nseed = {SEED}\nn = 20000\nmeshes = [0.0625, 0.03125]\nhorizon = 0.0625\nrho = 0.375\n");
    let (code, _, dir) = ws.run("modulus", "modulus", &cfg, &[]);
    let r = results(&dir);
    let ratio = r["exceedance_ratio"][0].1;
    let events: Vec<f64> = r["modulus_events"].iter().map(|x| x.1).collect();
    let ok = code == 0 && (0.33..=0.67).contains(&ratio) && events.iter().all(|&e| e >= 100.0);
    verdict(ok, format!("ratio {ratio:.4}, events {events:?}"))
}

fn strong_error(ws: &Workspace) -> Verdict {
    let cfg = format!("[model]\nid = \"gbm_clamped\"\n\n[run]\nseed = {SEED}\nn = 4000\nmeshes = [0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625]\nhorizon = 1.0\nq = 4\nref_factor = 64\n");
    let (code, _, dir) = ws.run("euler-strong-error", "strong", &cfg, &[]);
    let (slope, r2, _) = fits(&dir)["L4_sup_path"];
    verdict(code == 0 && (0.4..=0.6).contains(&slope), format!("slope {slope:.4}, r2 {r2:.4}"))
}

fn determinism(ws: &Workspace, runs: &RateRuns) -> Verdict {
    let (_, first, _) = &runs.dirs[0];
    let (_, _, again) = ws.run("exit-rate", "rate_interval_bm_w8", &rate_config("interval_bm"), &["--workers", "8"]);
    let same = ["results.csv", "fit.csv"]
        .iter()
        .all(|f| std::fs::read(first.join(f)).unwrap() == std::fs::read(again.join(f)).unwrap());
    verdict(same, if same { "results.csv and fit.csv identical for 1 and 8 workers" } else { "outputs differ" })
}

#[test]
fn acceptance() {
    let ws = Workspace::new();
    let mut lines = Vec::new();
    let mut record = |id: u32, name: &str, v: Verdict| {
        let line = format!("criterion {id:>2} {}: {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        // straight to stderr: the test harness only captures the print macros
        let _ = writeln!(std::io::stderr(), "{line}");
        lines.push((v.passed, line));
    };
    record(1, "interval exact mean", exact_interval_means());
    record(2, "ball exact mean", ball_mean());
    let runs = rate_runs(&ws);
    record(3, "L1 exit-time rate", slope_check(&runs, "L1_exit_time", 0.40, 0.60, true));
    record(4, "L2 stopped-position rate", slope_check(&runs, "L2_stopped_position", 0.15, 0.35, false));
    record(5, "boundary moments", boundary_moments(&ws));
    record(6, "moment recursion", moments(&ws));
    record(7, "crossing probability", crossing(&ws));
    record(8, "modulus scaling", modulus(&ws));
    record(9, "Euler strong error", strong_error(&ws));
    record(10, "worker determinism", determinism(&ws, &runs));
    let failed: Vec<&String> = lines.iter().filter(|l| !l.0).map(|l| &l.1).collect();
    assert!(failed.is_empty(), "failed criteria:\n{failed:#?}");
}
