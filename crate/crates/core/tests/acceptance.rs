//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taylor_audit::expansion::{DerivationConstants, TiedExpansion, TiedLogExpansion1D, TiedLogExpansion2D};
use taylor_audit::fitting::{fit_function_1d, FitConfig};
use taylor_audit::oracles::{
    adaptive_simpson, brute_force_hjb_max, central_diff, cn_solve_heat, cn_solve_rcd, self_convergence_order,
    QuadratureSpec,
};
use taylor_audit::pde::{Derivatives, HeatParams, PdeEquation, RcdParams};
use taylor_audit::portfolio::{
    ansatz_optimal_pi, combined_std_err, hjb_residual, policy_tournament, MarketParams, Policy, SimConfig,
};
use taylor_audit::report::{self, Experiment, RunConfig};
use taylor_audit::Grid1D;

type Check = Result<String, String>;
type Captured = (Vec<(String, Vec<u8>)>, Vec<String>, report::RunManifest);
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

fn remainder_vanishes() -> Check {
    let mut g = rng(1);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let c = loop {
            let c: f64 = g.random_range(-5.0..=5.0);
            if c != 0.0 {
                break c;
            }
        };
        let d = DerivationConstants::new(
            c,
            g.random_range(0.1..=10.0),
            g.random_range(-10.0..=10.0),
            g.random_range(-10.0..=10.0),
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max(d.remainder_closed_form(c).map_err(|e| e.to_string())?.abs());
    }
    ensure(worst <= 1e-12, || format!("max |R(c)| = {worst:e}"))?;
    Ok(format!("max |R(c)| = {worst:e} over 1000 draws"))
}

/// `|a − b| ≤ tol · max(|a|, 1)`
fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(1.0)
}

fn derivative_identities() -> Check {
    let mut g = rng(2);
    let xs = Grid1D::new(0.5, 3.0, 50).unwrap().nodes();
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let (a1, a2, a3) = (
            g.random_range(-2.0..=2.0),
            g.random_range(-2.0..=2.0),
            g.random_range(0.5..=3.0),
        );
        let e = TiedLogExpansion2D::new(a1, a2, a3).map_err(|e| e.to_string())?;
        let t: f64 = g.random_range(0.0..=1.0);
        for &x in &xs {
            let f = |s: f64| e.eval(s, t);
            let fx = central_diff(f, x, 1e-5).map_err(|e| e.to_string())?;
            let fxx = (f(x + 2e-4).unwrap() - 2.0 * f(x).unwrap() + f(x - 2e-4).unwrap()) / 4e-8;
            let ft = central_diff(|s| e.eval(x, s), t, 1e-5).map_err(|e| e.to_string())?;
            let pairs = [
                (e.d_dx(x).unwrap(), fx),
                (e.d2_dx2(x).unwrap(), fxx),
                (e.d_dt(), ft),
            ];
            for (analytic, numeric) in pairs {
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(1.0));
                ensure(close(analytic, numeric, 1e-6), || {
                    format!("a=({a1},{a2},{a3}) x={x} t={t}: analytic {analytic} vs fd {numeric}")
                })?;
            }
        }
    }
    Ok(format!("worst relative error {worst:e} over 100 x 50 points"))
}

fn quadrature_oracle() -> Check {
    let spec = QuadratureSpec::default();
    let zero = adaptive_simpson(|_| Ok(0.0), 0.3, 4.0, &spec).map_err(|e| e.to_string())?;
    ensure(zero == 0.0, || format!("zero integrand gave {zero}"))?;
    let (c, w, alpha, fp) = (1.0, 2.5, 1.0, 0.7);
    let inner = adaptive_simpson(|u| Ok(fp / (w - u + alpha)), c, w, &spec).map_err(|e| e.to_string())?;
    let exact = fp * ((w - c + alpha) / alpha).ln();
    ensure((inner - exact).abs() <= 1e-8, || format!("log ratio {inner} vs {exact}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = config(
        Experiment::RemainderAudit,
        &[("c", "1"), ("alpha", "1"), ("x_min", "1"), ("x_max", "3")],
        dir.path(),
    );
    let manifest = report::run(&cfg).map_err(|e| e.to_string())?;
    let csv = fs::read_to_string(dir.path().join("remainder_audit.csv")).map_err(|e| e.to_string())?;
    let mut lines = csv.lines();
    ensure(lines.next() == Some("x,closed_form,quadrature,abs_diff"), || "bad header".into())?;
    let mut rows = 0;
    for line in lines {
        let diff: f64 = line.rsplit(',').next().unwrap().parse().map_err(|_| format!("bad row {line}"))?;
        ensure(diff.is_finite(), || format!("non-finite abs_diff in {line}"))?;
        rows += 1;
    }
    let max_diff = manifest.summary_value("max_abs_diff").unwrap_or("?").to_string();
    Ok(format!("log-ratio err {:e}; audit rows {rows}, max abs_diff {max_diff}", (inner - exact).abs()))
}

fn transformed_equations() -> Check {
    let xs = Grid1D::new(0.1, 3.0, 100).unwrap();
    let ts = Grid1D::new(0.0, 1.0, 100).unwrap();
    let mut worst = 0.0_f64;
    let eqs = [
        PdeEquation::Rcd(RcdParams::new(0.05, 0.2).unwrap()),
        PdeEquation::Heat(HeatParams::new(0.7).unwrap()),
    ];
    for (a1, a2, a3) in [(0.5, -1.0, 2.0), (1.3, 0.4, 0.25), (-2.0, 3.0, 0.0)] {
        let e = TiedLogExpansion2D::new(a1, a2, a3).unwrap();
        for eq in &eqs {
            for t in ts.nodes() {
                for x in xs.nodes() {
                    let transformed = eq.residual(&e, x, t).map_err(|e| e.to_string())?;
                    let d = Derivatives::analytic(&e, x, t).map_err(|e| e.to_string())?;
                    worst = worst.max((transformed - eq.generic_residual(x, &d)).abs());
                }
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max difference {worst:e}"))?;
    Ok(format!("max difference {worst:e}"))
}

fn max_err(sol: &taylor_audit::oracles::CnSolution, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let (xg, tg) = (sol.grid(), sol.t_grid());
    let mut worst = 0.0_f64;
    for it in 0..tg.len() {
        for ix in 0..xg.len() {
            worst = worst.max((sol.value(it, ix) - exact(xg.node(ix), tg.node(it))).abs());
        }
    }
    worst
}

fn reference_solvers() -> Check {
    let e = |err: taylor_audit::Error| err.to_string();
    let (r, sigma, k, big_t) = (0.05, 0.2, 1.0, 1.0);
    let xg = Grid1D::new(0.1, 3.0, 200).unwrap();
    let tg = Grid1D::new(0.0, big_t, 200).unwrap();
    let linear = max_err(&cn_solve_rcd(r, sigma, |x| x, &xg, &tg).map_err(e)?, |x, _| x);
    let growth = max_err(
        &cn_solve_rcd(r, sigma, |_| (r * big_t).exp(), &xg, &tg).map_err(e)?,
        |_, t| (r * t).exp(),
    );
    let ug = Grid1D::new(0.0, 1.0, 200).unwrap();
    let quad = |x: f64, t: f64| x * x + 2.0 * k * t;
    let heat = max_err(
        &cn_solve_heat(k, |x| quad(x, 0.0), (|t| quad(0.0, t), |t| quad(1.0, t)), &ug, &tg).map_err(e)?,
        quad,
    );
    for (name, err) in [("V=x", linear), ("V=e^(rt)", growth), ("V=x^2+2kt", heat)] {
        ensure(err <= 1e-8, || format!("{name}: max error {err:e}"))?;
    }

    let t0 = 0.25;
    let gauss = move |x: f64, t: f64| (t0 / (t0 + t)).sqrt() * (-x * x / (4.0 * k * (t0 + t))).exp();
    let heat_level = |n: usize| {
        let (xg, tg) = (Grid1D::new(-2.0, 2.0, n).unwrap(), Grid1D::new(0.0, 0.5, n).unwrap());
        cn_solve_heat(k, |x| gauss(x, 0.0), (|t| gauss(-2.0, t), |t| gauss(2.0, t)), &xg, &tg)
    };
    let heat_order =
        self_convergence_order(&heat_level(21).map_err(e)?, &heat_level(41).map_err(e)?, &heat_level(81).map_err(e)?, 0.5)
            .map_err(e)?;
    let strike = 1.0;
    let w = 0.1 * strike;
    let call = move |x: f64| w * ((x - strike) / w).exp().ln_1p();
    let rcd_level = |n: usize| {
        let (xg, tg) = (Grid1D::new(0.1, 3.0, n).unwrap(), Grid1D::new(0.0, big_t, n).unwrap());
        cn_solve_rcd(r, sigma, call, &xg, &tg)
    };
    let rcd_order =
        self_convergence_order(&rcd_level(21).map_err(e)?, &rcd_level(41).map_err(e)?, &rcd_level(81).map_err(e)?, 0.0)
            .map_err(e)?;
    for (name, p) in [("heat", heat_order), ("rcd", rcd_order)] {
        ensure((1.7..=2.2).contains(&p), || format!("{name} observed order {p}"))?;
    }
    Ok(format!(
        "errors {linear:e}/{growth:e}/{heat:e}; orders heat {heat_order:.3}, rcd {rcd_order:.3}"
    ))
}

fn exact_fit_recovery() -> Check {
    let truth = TiedLogExpansion1D::new(0.5, -1.0, 2.0).unwrap();
    let samples: Vec<(f64, f64)> = Grid1D::new(0.0, 5.0, 50)
        .unwrap()
        .nodes()
        .into_iter()
        .map(|x| (x, truth.eval(x).unwrap()))
        .collect();
    let rep = fit_function_1d(&samples, &FitConfig::default()).map_err(|e| e.to_string())?;
    let (a1, a2, a3) = rep.params.coefficients();
    let perr = (a1 - 0.5).abs().max((a2 + 1.0).abs()).max((a3 - 2.0).abs());
    ensure(rep.rmse <= 1e-8 && perr <= 1e-6, || {
        format!("rmse {:e}, parameter error {perr:e}", rep.rmse)
    })?;
    Ok(format!("rmse {:e}, parameter error {perr:e}", rep.rmse))
}

fn config(exp: Experiment, flags: &[(&str, &str)], out: &Path) -> RunConfig {
    let mut pairs: Vec<(String, String)> = flags.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    pairs.push(("out".into(), out.display().to_string()));
    RunConfig::from_pairs(Some(exp), Vec::new(), pairs).expect("valid config")
}

/// Runs an experiment into a fresh directory; returns every CSV's bytes and the checksum lines.
fn run_capture(exp: Experiment) -> Result<Captured, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = report::run(&config(exp, &[], dir.path())).map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for a in &manifest.artifacts {
        let bytes = fs::read(dir.path().join(&a.file_name)).map_err(|e| e.to_string())?;
        ensure(report::sha256_hex(&bytes) == a.sha256, || format!("{} checksum mismatch", a.file_name))?;
        files.push((a.file_name.clone(), bytes));
    }
    let text = fs::read_to_string(&manifest.path).map_err(|e| e.to_string())?;
    let sums = text.lines().filter(|l| l.starts_with("sha256 ")).map(str::to_string).collect();
    Ok((files, sums, manifest))
}

fn falsifiability_probe() -> Check {
    let (first, _, manifest) = run_capture(Experiment::FitFunction)?;
    for _ in 0..2 {
        let (again, _, _) = run_capture(Experiment::FitFunction)?;
        ensure(again == first, || "fit_report.csv differs between reruns".into())?;
    }
    let rmse = manifest
        .summary_value("rmse")
        .ok_or("rmse missing from manifest")?
        .to_string();
    Ok(format!("sin on [0.1, 2]: rmse {rmse}, identical across 3 runs"))
}

fn hjb_first_order_condition() -> Check {
    let mut g = rng(8);
    let pi_grid = Grid1D::new(-10.0, 10.0, 20_001).unwrap();
    let step = pi_grid.step();
    let (mut done, mut worst_gap, mut worst_slope) = (0, 0.0_f64, 0.0_f64);
    while done < 1000 {
        let m = MarketParams::new(
            g.random_range(0.0..=0.2),
            g.random_range(0.0..=0.1),
            g.random_range(0.1..=0.5),
            1.0,
            1.0,
        )
        .unwrap();
        let e = TiedLogExpansion2D::new(
            g.random_range(-2.0..=2.0),
            -g.random_range(0.1..=3.0),
            g.random_range(0.0..=2.0),
        )
        .unwrap();
        let x: f64 = g.random_range(0.1..=3.0);
        let Ok(pi_star) = ansatz_optimal_pi(&e, &m, x) else { continue };
        if pi_star.abs() > 9.5 {
            continue;
        }
        let brute = brute_force_hjb_max(e.d_dx(x).unwrap(), e.d2_dx2(x).unwrap(), m.mu(), m.r(), m.sigma(), &pi_grid)
            .map_err(|e| e.to_string())?;
        let gap = (brute - pi_star).abs();
        let slope = central_diff(|p| hjb_residual(&e, &m, p, x, 0.0), pi_star, 1e-3).map_err(|e| e.to_string())?;
        ensure(gap <= step, || format!("pi* {pi_star} vs grid max {brute}"))?;
        ensure(slope.abs() <= 1e-6, || format!("slope {slope:e} at pi* {pi_star}"))?;
        worst_gap = worst_gap.max(gap);
        worst_slope = worst_slope.max(slope.abs());
        done += 1;
    }
    Ok(format!("1000 instances: max |pi* - grid| {worst_gap:e}, max slope {worst_slope:e}"))
}

fn portfolio_dominance() -> Check {
    let m = MarketParams::new(0.10, 0.05, 0.2, 1.0, 1.0).unwrap();
    let mut policies = vec![Policy::Merton { gamma: 1.0 }];
    for (a1, a2, a3) in [(0.0, -1.0, 0.0), (0.0, -1.0, 1.0), (0.5, -0.3, 2.0), (0.0, 1.0, 0.5)] {
        policies.push(Policy::Ansatz(TiedLogExpansion2D::new(a1, a2, a3).unwrap()));
    }
    let est = policy_tournament(&m, &policies, &SimConfig::new(10_000, 252, 2024)).map_err(|e| e.to_string())?;
    let merton = &est[0];
    let exact = m.merton_log_value();
    let z = (merton.mean - exact) / merton.std_err;
    ensure(z.abs() <= 3.0, || format!("Merton mean {} vs {exact}, z = {z:.2}", merton.mean))?;
    for a in &est[1..] {
        let bound = merton.mean + 3.0 * combined_std_err(merton, a);
        ensure(a.mean <= bound, || format!("{} mean {} exceeds {bound}", a.label, a.mean))?;
    }
    Ok(format!("Merton z = {z:.3}; {} ansatz policies within bound", est.len() - 1))
}

fn end_to_end_determinism() -> Check {
    for exp in Experiment::ALL {
        let (files_a, sums_a, _) = run_capture(exp)?;
        let (files_b, sums_b, _) = run_capture(exp)?;
        ensure(files_a == files_b, || format!("{exp}: CSV bytes differ"))?;
        ensure(sums_a == sums_b && !sums_a.is_empty(), || format!("{exp}: checksums differ"))?;
    }
    Ok(format!("{} experiments reproduced byte for byte", Experiment::ALL.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("remainder vanishes at the expansion point", Duration::from_secs(1), remainder_vanishes),
        ("analytic derivatives match finite differences", Duration::from_secs(1), derivative_identities),
        ("quadrature oracle and remainder audit", Duration::from_secs(5), quadrature_oracle),
        ("transformed residuals match generic operators", Duration::from_secs(1), transformed_equations),
        ("reference solvers: exact solutions and order", Duration::from_secs(30), reference_solvers),
        ("exact-family fit recovery", Duration::from_secs(1), exact_fit_recovery),
        ("sin fit is deterministic and reported", Duration::from_secs(2), falsifiability_probe),
        ("HJB first-order condition", Duration::from_secs(5), hjb_first_order_condition),
        ("portfolio dominance audit", Duration::from_secs(20), portfolio_dominance),
        ("end-to-end determinism", Duration::from_secs(60), end_to_end_determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= *budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({elapsed:.2?}): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
