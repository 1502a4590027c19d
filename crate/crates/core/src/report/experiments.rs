use crate::error::Error;
use crate::expansion::{DerivationConstants, TiedExpansion, TiedLogExpansion1D, TiedLogExpansion2D};
use crate::fitting::{fit_function_1d, fit_pde_residual, BoundarySample, FitConfig, FitReport};
use crate::grid::Grid1D;
use crate::oracles::{
    cn_solve_heat, cn_solve_rcd, double_quadrature_remainder, double_quadrature_remainder_frozen,
    CnSolution, QuadratureSpec,
};
use crate::pde::{residual_sweep, HeatParams, PdeEquation, RcdParams, ResidualReport};
use crate::portfolio::{
    combined_std_err, policy_tournament, MarketParams, Policy, SimConfig, Utility, DEFAULT_UTILITY_CAP,
};

use super::{format_f64, ConfigError, CsvTable, Experiment, Outcome, RunConfig, RunError};

type Run<T> = std::result::Result<T, RunError>;

/// Base grid of the self-convergence studies; each level halves both steps.
const CONVERGENCE_BASE_NODES: usize = 21;
const GAUSSIAN_T0: f64 = 0.25;
/// Width of the softplus-smoothed call, relative to the strike.
const SMOOTHING_WIDTH: f64 = 0.1;

pub(super) fn dispatch(cfg: &RunConfig) -> Run<Outcome> {
    let exp = cfg.experiment;
    match exp {
        Experiment::ExpandEval => expand_eval(cfg),
        Experiment::RemainderAudit => remainder_audit(cfg),
        Experiment::FitFunction => fit_function(cfg),
        Experiment::FitPde => fit_pde(cfg),
        Experiment::PdeResidual => pde_residual(cfg),
        Experiment::HeatBench => heat_bench(cfg),
        Experiment::RcdBench => rcd_bench(cfg),
        Experiment::PortfolioBench => portfolio_bench(cfg),
    }
    .map_err(|e| match e {
        Failure::Numeric(source) => RunError::Numeric {
            experiment: exp,
            source,
        },
        Failure::Config(c) => RunError::Config(c),
    })
}

enum Failure {
    Numeric(Error),
    Config(ConfigError),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

type Step<T> = std::result::Result<T, Failure>;

fn grid(cfg: &RunConfig, lo: &str, hi: &str, n: &str) -> Step<Grid1D> {
    Ok(Grid1D::new(cfg.req_real(lo), cfg.req_real(hi), cfg.req_usize(n))?)
}

fn fit_config(cfg: &RunConfig) -> Step<FitConfig> {
    let shift_search = match (cfg.real("shift_lo"), cfg.real("shift_hi")) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        (Some(_), None) => return Err(cfg.invalid("shift_hi", "required when shift_lo is set").into()),
        (None, Some(_)) => return Err(cfg.invalid("shift_lo", "required when shift_hi is set").into()),
    };
    let mut fc = FitConfig {
        shift_search,
        n_shift_probes: cfg.req_usize("n_probes"),
        refine_tol: cfg.req_real("refine_tol"),
        fixed_a2: cfg.real("fixed_a2"),
        ..FitConfig::default()
    };
    if let Some(w) = cfg.real("bc_penalty_weight") {
        fc.bc_penalty_weight = w;
    }
    Ok(fc)
}

fn equation(cfg: &RunConfig) -> Step<PdeEquation> {
    Ok(match cfg.req_text("equation") {
        "rcd" => PdeEquation::Rcd(RcdParams::new(cfg.req_real("r"), cfg.req_real("sigma"))?),
        "heat" => PdeEquation::Heat(HeatParams::new(cfg.req_real("k"))?),
        other => {
            return Err(cfg
                .invalid("equation", format!("expected rcd or heat, found {other:?}"))
                .into())
        }
    })
}

fn fit_table(rep: &FitReport) -> CsvTable {
    let (a1, a2, a3) = rep.params.coefficients();
    let mut t = CsvTable::new("fit_report.csv", "a1,a2,a3,rmse,max_abs_err,n_samples,converged");
    t.push_row([
        format_f64(a1),
        format_f64(a2),
        format_f64(a3),
        format_f64(rep.rmse),
        format_f64(rep.max_abs_err),
        rep.n_samples.to_string(),
        rep.converged.to_string(),
    ]);
    t
}

fn fit_summary(out: &mut Outcome, rep: &FitReport) {
    let (a1, a2, a3) = rep.params.coefficients();
    out.scalar("a1", a1);
    out.scalar("a2", a2);
    out.scalar("a3", a3);
    out.scalar("rmse", rep.rmse);
    out.scalar("max_abs_err", rep.max_abs_err);
    out.scalar("objective", rep.objective);
    out.text("converged", rep.converged);
    out.text("shift_identified", rep.shift_identified);
}

fn residual_table(rep: &ResidualReport) -> CsvTable {
    let mut t = CsvTable::new("residual_report.csv", "x,t,residual");
    for s in &rep.samples {
        t.push_row([format_f64(s.x), format_f64(s.t), format_f64(s.residual)]);
    }
    t
}

fn expand_eval(cfg: &RunConfig) -> Step<Outcome> {
    let e = TiedLogExpansion1D::new(cfg.req_real("a1"), cfg.req_real("a2"), cfg.req_real("a3"))?;
    let g = grid(cfg, "x_min", "x_max", "n")?;
    let mut t = CsvTable::new("expand_eval.csv", "x,value,d_dx,d2_dx2");
    for x in g.nodes() {
        t.push_row([
            format_f64(x),
            format_f64(e.eval(x)?),
            format_f64(e.d_dx(x)?),
            format_f64(e.d2_dx2(x)?),
        ]);
    }
    let mut out = Outcome::default();
    out.text("rows", g.len());
    out.tables.push(t);
    Ok(out)
}

fn remainder_audit(cfg: &RunConfig) -> Step<Outcome> {
    let d = DerivationConstants::new(
        cfg.req_real("c"),
        cfg.req_real("alpha"),
        cfg.req_real("f_c"),
        cfg.req_real("fprime_c"),
    )?;
    let max_depth = u32::try_from(cfg.req_int("max_depth"))
        .map_err(|_| cfg.invalid("max_depth", "too large"))?;
    let spec = QuadratureSpec::new(cfg.req_real("abs_tol"), max_depth)?;
    let g = grid(cfg, "x_min", "x_max", "n")?;

    let mut t = CsvTable::new("remainder_audit.csv", "x,closed_form,quadrature,abs_diff");
    let (mut max_diff, mut max_diff_negated, mut max_diff_frozen) = (0.0_f64, 0.0_f64, 0.0_f64);
    for x in g.nodes() {
        let closed = d.remainder_closed_form(x)?;
        let quad = double_quadrature_remainder(&d, x, &spec)?;
        let frozen = double_quadrature_remainder_frozen(&d, x, &spec)?;
        let diff = (closed - quad).abs();
        max_diff = max_diff.max(diff);
        max_diff_negated = max_diff_negated.max((closed + quad).abs());
        max_diff_frozen = max_diff_frozen.max((closed - frozen).abs());
        t.push_row([format_f64(x), format_f64(closed), format_f64(quad), format_f64(diff)]);
    }

    let g_exp = d.expansion();
    let mut out = Outcome::default();
    out.scalar("max_abs_diff", max_diff);
    out.scalar("max_abs_diff_negated_quadrature", max_diff_negated);
    out.scalar("max_abs_diff_frozen_quadrature", max_diff_frozen);
    out.scalar("expansion_b0", g_exp.b0);
    out.scalar("expansion_b1", g_exp.b1);
    out.scalar("expansion_b_log", g_exp.b_log);
    out.scalar("expansion_shift", g_exp.shift);
    out.scalar("tie_gap", g_exp.tie_gap());
    out.text("tied_form_reproduced", g_exp.is_tied(1e-12));
    out.tables.push(t);
    Ok(out)
}

fn target_fn(cfg: &RunConfig) -> Step<Box<dyn Fn(f64) -> f64>> {
    Ok(match cfg.req_text("target") {
        "sin" => Box::new(f64::sin),
        "cos" => Box::new(f64::cos),
        "exp" => Box::new(f64::exp),
        "sqrt" => Box::new(f64::sqrt),
        "log1p" => Box::new(f64::ln_1p),
        "tied" => {
            let e = TiedLogExpansion1D::new(cfg.req_real("a1"), cfg.req_real("a2"), cfg.req_real("a3"))?;
            Box::new(move |x| e.eval(x).unwrap_or(f64::NAN))
        }
        other => {
            return Err(cfg
                .invalid("target", format!("expected sin, cos, exp, sqrt, log1p or tied, found {other:?}"))
                .into())
        }
    })
}

fn fit_function(cfg: &RunConfig) -> Step<Outcome> {
    let f = target_fn(cfg)?;
    let g = grid(cfg, "x_min", "x_max", "n")?;
    let samples: Vec<(f64, f64)> = g.nodes().into_iter().map(|x| (x, f(x))).collect();
    if let Some(&(x, _)) = samples.iter().find(|(_, y)| !y.is_finite()) {
        return Err(Error::Domain {
            context: "fit target",
            argument: x,
        }
        .into());
    }
    let rep = fit_function_1d(&samples, &fit_config(cfg)?)?;
    let mut out = Outcome::default();
    out.text("target", cfg.req_text("target"));
    fit_summary(&mut out, &rep);
    out.tables.push(fit_table(&rep));
    Ok(out)
}

/// Exact solution used for boundary data and the reference comparison:
/// `V = x` for the discounted equation, `V = x² + 2kt` for the heat equation.
fn pde_reference(eq: &PdeEquation, xg: &Grid1D, tg: &Grid1D) -> Step<(Vec<BoundarySample>, CnSolution)> {
    let (sol, boundary_t) = match *eq {
        PdeEquation::Rcd(p) => (cn_solve_rcd(p.r(), p.sigma(), |x| x, xg, tg)?, tg.x_max()),
        PdeEquation::Heat(p) => {
            let k = p.k();
            let exact = move |x: f64, t: f64| x * x + 2.0 * k * t;
            let (xl, xr) = (xg.x_min(), xg.x_max());
            let sol = cn_solve_heat(
                k,
                |x| exact(x, tg.x_min()),
                (move |t| exact(xl, t), move |t| exact(xr, t)),
                xg,
                tg,
            )?;
            (sol, tg.x_min())
        }
    };
    let it_edge = if boundary_t == tg.x_min() { 0 } else { tg.len() - 1 };
    let mut boundary = Vec::new();
    for ix in 0..xg.len() {
        boundary.push(BoundarySample {
            x: xg.node(ix),
            t: boundary_t,
            value: sol.value(it_edge, ix),
        });
    }
    for it in 0..tg.len() {
        if it == it_edge {
            continue;
        }
        for ix in [0, xg.len() - 1] {
            boundary.push(BoundarySample {
                x: xg.node(ix),
                t: tg.node(it),
                value: sol.value(it, ix),
            });
        }
    }
    Ok((boundary, sol))
}

fn fit_pde(cfg: &RunConfig) -> Step<Outcome> {
    let eq = equation(cfg)?;
    let xg = grid(cfg, "x_min", "x_max", "n")?;
    let tg = grid(cfg, "t_min", "t_max", "nt")?;
    let (boundary, reference) = pde_reference(&eq, &xg, &tg)?;
    let rep = fit_pde_residual(&eq, &xg, &tg, &boundary, &fit_config(cfg)?)?;
    let (a1, a2, a3) = rep.params.coefficients();
    let fitted = TiedLogExpansion2D::new(a1, a2, a3)?;
    let mut sweep = residual_sweep(&fitted, &eq, &xg, &tg)?;
    sweep.attach_reference(&fitted, &reference)?;

    let mut out = Outcome::default();
    out.text("equation", cfg.req_text("equation"));
    fit_summary(&mut out, &rep);
    out.scalar("rms_residual", sweep.rms_residual);
    out.scalar("max_abs_residual", sweep.max_abs_residual);
    out.scalar("rms_error_vs_reference", sweep.rms_error_vs_reference.unwrap_or(f64::NAN));
    out.tables.push(fit_table(&rep));
    out.tables.push(residual_table(&sweep));
    Ok(out)
}

fn pde_residual(cfg: &RunConfig) -> Step<Outcome> {
    let eq = equation(cfg)?;
    let e = TiedLogExpansion2D::new(cfg.req_real("a1"), cfg.req_real("a2"), cfg.req_real("a3"))?;
    let xg = grid(cfg, "x_min", "x_max", "n")?;
    let tg = grid(cfg, "t_min", "t_max", "nt")?;
    let rep = residual_sweep(&e, &eq, &xg, &tg)?;
    let mut out = Outcome::default();
    out.text("equation", cfg.req_text("equation"));
    out.scalar("rms_residual", rep.rms_residual);
    out.scalar("max_abs_residual", rep.max_abs_residual);
    out.text("rows", rep.samples.len());
    out.tables.push(residual_table(&rep));
    Ok(out)
}

fn max_abs_error(sol: &CnSolution, exact: impl Fn(f64, f64) -> f64) -> f64 {
    let (xg, tg) = (sol.grid(), sol.t_grid());
    let mut worst = 0.0_f64;
    for it in 0..tg.len() {
        for ix in 0..xg.len() {
            worst = worst.max((sol.value(it, ix) - exact(xg.node(ix), tg.node(it))).abs());
        }
    }
    worst
}

/// Max difference between two refinement levels over the coarse nodes at time `t`.
fn level_diff(coarse: &CnSolution, fine: &CnSolution, t: f64) -> Step<f64> {
    let mut worst = 0.0_f64;
    for x in coarse.grid().nodes() {
        worst = worst.max((coarse.interpolate(x, t)? - fine.interpolate(x, t)?).abs());
    }
    Ok(worst)
}

/// Solves on `levels` successively halved grids and tabulates level-to-level
/// differences at time `t` with the observed order between consecutive rows.
fn convergence_table<S>(cfg: &RunConfig, xg: Grid1D, tg: Grid1D, t: f64, solve: S) -> Step<(CsvTable, f64)>
where
    S: Fn(&Grid1D, &Grid1D) -> crate::Result<CnSolution>,
{
    let levels = cfg.req_usize("levels");
    if levels < 3 {
        return Err(cfg.invalid("levels", "need at least 3 refinement levels").into());
    }
    let mut sols = Vec::with_capacity(levels);
    for l in 0..levels {
        let f = 1 << l;
        sols.push(solve(&xg.refined(f), &tg.refined(f))?);
    }
    let mut table = CsvTable::new("convergence.csv", "level,nx,nt,max_diff,observed_order");
    let mut prev: Option<f64> = None;
    let mut order = f64::NAN;
    for l in 0..levels - 1 {
        let d = level_diff(&sols[l], &sols[l + 1], t)?;
        let order_field = match prev {
            Some(p) => {
                order = (p / d).log2();
                format_f64(order)
            }
            None => String::new(),
        };
        table.push_row([
            l.to_string(),
            sols[l].grid().len().to_string(),
            sols[l].t_grid().len().to_string(),
            format_f64(d),
            order_field,
        ]);
        prev = Some(d);
    }
    Ok((table, order))
}

fn heat_bench(cfg: &RunConfig) -> Step<Outcome> {
    let k = cfg.req_real("k");
    let t_max = cfg.req_real("t_max");
    let unit = Grid1D::new(0.0, 1.0, cfg.req_usize("n"))?;
    let tg = Grid1D::new(0.0, t_max, cfg.req_usize("nt"))?;

    let quad = move |x: f64, t: f64| x * x + 2.0 * k * t;
    let sol = cn_solve_heat(k, |x| quad(x, 0.0), (|t| quad(0.0, t), |t| quad(1.0, t)), &unit, &tg)?;
    let quadratic_err = max_abs_error(&sol, quad);
    let sol = cn_solve_heat(k, |_| 1.0, (|_| 1.0, |_| 1.0), &unit, &tg)?;
    let constant_err = max_abs_error(&sol, |_, _| 1.0);

    let gauss = move |x: f64, t: f64| {
        let s = GAUSSIAN_T0 + t;
        (GAUSSIAN_T0 / s).sqrt() * (-x * x / (4.0 * k * s)).exp()
    };
    let solve = |xg: &Grid1D, tg: &Grid1D| {
        let (xl, xr) = (xg.x_min(), xg.x_max());
        cn_solve_heat(k, |x| gauss(x, 0.0), (move |t| gauss(xl, t), move |t| gauss(xr, t)), xg, tg)
    };
    let base_x = Grid1D::new(-2.0, 2.0, CONVERGENCE_BASE_NODES)?;
    let base_t = Grid1D::new(0.0, t_max, CONVERGENCE_BASE_NODES)?;
    let (table, order) = convergence_table(cfg, base_x, base_t, t_max, solve)?;
    let gauss_err = max_abs_error(&solve(&base_x, &base_t)?, gauss);

    let mut out = Outcome::default();
    out.scalar("quadratic_max_abs_err", quadratic_err);
    out.scalar("constant_max_abs_err", constant_err);
    out.scalar("gaussian_base_max_abs_err", gauss_err);
    out.scalar("observed_order", order);
    out.tables.push(table);
    Ok(out)
}

fn softplus_call(strike: f64) -> impl Fn(f64) -> f64 {
    let w = SMOOTHING_WIDTH * strike;
    move |x| {
        let z = (x - strike) / w;
        w * if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() }
    }
}

fn rcd_bench(cfg: &RunConfig) -> Step<Outcome> {
    let (r, sigma) = (cfg.req_real("r"), cfg.req_real("sigma"));
    let t_max = cfg.req_real("t_max");
    let xg = grid(cfg, "x_min", "x_max", "n")?;
    let tg = Grid1D::new(0.0, t_max, cfg.req_usize("nt"))?;

    let linear_err = max_abs_error(&cn_solve_rcd(r, sigma, |x| x, &xg, &tg)?, |x, _| x);
    let discount = |_: f64, t: f64| (-r * (t_max - t)).exp();
    let discount_err = max_abs_error(&cn_solve_rcd(r, sigma, |_| 1.0, &xg, &tg)?, discount);

    let strike = crate::error::require_positive("strike", cfg.req_real("strike"))?;
    let payoff = softplus_call(strike);
    let base_x = Grid1D::new(xg.x_min(), xg.x_max(), CONVERGENCE_BASE_NODES)?;
    let base_t = Grid1D::new(0.0, t_max, CONVERGENCE_BASE_NODES)?;
    let (table, order) = convergence_table(cfg, base_x, base_t, 0.0, |x, t| {
        cn_solve_rcd(r, sigma, &payoff, x, t)
    })?;

    let mut out = Outcome::default();
    out.scalar("linear_max_abs_err", linear_err);
    out.scalar("discount_max_abs_err", discount_err);
    out.scalar("observed_order", order);
    out.tables.push(table);
    Ok(out)
}

fn portfolio_bench(cfg: &RunConfig) -> Step<Outcome> {
    let m = MarketParams::new(
        cfg.req_real("mu"),
        cfg.req_real("r"),
        cfg.req_real("sigma"),
        cfg.req_real("horizon"),
        cfg.req_real("x0"),
    )?;
    let n_steps = match cfg.int("n_steps") {
        Some(n) => n as usize,
        None => m.default_steps(),
    };
    let mut sim = SimConfig::new(cfg.req_usize("n_paths"), n_steps, cfg.seed);
    sim.utility = match cfg.req_text("utility") {
        "log" => Utility::Log,
        "capped-log" => Utility::CappedLog {
            cap: DEFAULT_UTILITY_CAP,
        },
        other => {
            return Err(cfg
                .invalid("utility", format!("expected log or capped-log, found {other:?}"))
                .into())
        }
    };
    let gamma = cfg.req_real("gamma");
    let policies = [
        Policy::Merton { gamma },
        Policy::Constant {
            pi: cfg.req_real("constant_pi"),
        },
        Policy::Ansatz(TiedLogExpansion2D::new(
            cfg.req_real("a1"),
            cfg.req_real("a2"),
            cfg.req_real("a3"),
        )?),
    ];
    let est = policy_tournament(&m, &policies, &sim)?;

    let mut t = CsvTable::new(
        "mc_report.csv",
        "policy,n_paths,n_steps,seed,mean_utility,std_err,bankrupt_paths",
    );
    for e in &est {
        t.push_row([
            e.label.clone(),
            e.n_paths.to_string(),
            e.n_steps.to_string(),
            e.seed.to_string(),
            format_f64(e.mean),
            format_f64(e.std_err),
            e.bankrupt_paths.to_string(),
        ]);
    }

    let (merton, ansatz) = (&est[0], &est[2]);
    let bound = 3.0 * combined_std_err(merton, ansatz);
    let mut out = Outcome::default();
    if gamma == 1.0 && sim.utility == Utility::Log {
        let exact = m.merton_log_value();
        out.scalar("merton_closed_form", exact);
        out.scalar("merton_z_score", (merton.mean - exact) / merton.std_err);
    }
    out.scalar("ansatz_minus_merton", ansatz.mean - merton.mean);
    out.text("ansatz_within_merton_bound", ansatz.mean <= merton.mean + bound);
    out.text("ansatz_policy_violation_paths", ansatz.policy_violation_paths);
    out.text("ansatz_concavity_violation", ansatz.concavity_violation);
    out.tables.push(t);
    Ok(out)
}
