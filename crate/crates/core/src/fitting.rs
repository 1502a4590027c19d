//! Least-squares determination of the tied-expansion constants.
//!
//! For a fixed shift `a3` every objective here is linear in `(a1, a2)`, so the
//! shift is profiled: a geometric probe sweep over the admissible interval,
//! then golden-section refinement around the best probe. The linear
//! subproblem is solved by a two-column QR (Gram–Schmidt with one
//! reorthogonalization pass).

use crate::error::{Error, Result};
use crate::expansion::{TiedLogExpansion1D, TiedLogExpansion2D};
use crate::grid::Grid1D;
use crate::par::Execution;
use crate::pde::PdeEquation;
use crate::stats::{pairwise_sum, rms_and_max};

/// Offset of the lowest probe from the log-domain boundary.
const DOMAIN_MARGIN: f64 = 1e-6;
const MAX_REFINE_ITERS: usize = 400;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Search interval for `a3`. `None` uses `(−x_min + 1e−6, −x_min + 10·max(1, span)]`.
    pub shift_search: Option<(f64, f64)>,
    pub n_shift_probes: usize,
    /// Relative width at which golden-section refinement stops.
    pub refine_tol: f64,
    pub bc_penalty_weight: f64,
    /// Pins `a2` and leaves only `a1` (and the shift) free.
    pub fixed_a2: Option<f64>,
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            shift_search: None,
            n_shift_probes: 64,
            refine_tol: 1e-10,
            bc_penalty_weight: 1e3,
            fixed_a2: None,
            execution: Execution::default(),
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.n_shift_probes < 3 {
            return Err(Error::InvalidParameter {
                name: "n_shift_probes",
                value: self.n_shift_probes as f64,
                reason: "need at least 3 probes",
            });
        }
        if !(self.refine_tol > 0.0 && self.refine_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "refine_tol",
                value: self.refine_tol,
                reason: "must be finite and > 0",
            });
        }
        if !(self.bc_penalty_weight >= 0.0 && self.bc_penalty_weight.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bc_penalty_weight",
                value: self.bc_penalty_weight,
                reason: "must be finite and >= 0",
            });
        }
        if let Some(a2) = self.fixed_a2 {
            crate::error::require_finite("fixed_a2", a2)?;
        }
        Ok(())
    }

    /// The `a3` interval to search for data whose smallest abscissa is `x_min`.
    pub fn shift_interval(&self, x_min: f64, x_max: f64) -> Result<(f64, f64)> {
        let (lo, hi) = match self.shift_search {
            Some(interval) => interval,
            None => {
                let span = (x_max - x_min).max(1.0);
                (-x_min + DOMAIN_MARGIN, -x_min + 10.0 * span)
            }
        };
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter {
                name: "shift_search",
                value: lo,
                reason: "interval must be finite with lo < hi",
            });
        }
        if !(x_min + lo > 0.0) {
            return Err(Error::Domain {
                context: "shift_search",
                argument: x_min + lo,
            });
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FittedExpansion {
    OneD(TiedLogExpansion1D),
    TwoD(TiedLogExpansion2D),
}

impl FittedExpansion {
    /// `(a1, a2, a3)`
    pub fn coefficients(&self) -> (f64, f64, f64) {
        match self {
            FittedExpansion::OneD(e) => (e.a1, e.a2, e.a3),
            FittedExpansion::TwoD(e) => (e.a1, e.a2, e.a3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub params: FittedExpansion,
    pub rmse: f64,
    pub max_abs_err: f64,
    pub n_samples: usize,
    /// Golden-section refinement reached `refine_tol`.
    pub converged: bool,
    /// False when the data cannot see `a3` (`a2 = 0` and no `y` variation);
    /// `a3` is then set by convention to the admissible value closest to 0.
    pub shift_identified: bool,
    /// Minimized objective (sum of squares, including any boundary penalty).
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RankPolicy {
    Reject,
    /// Coefficients of vanishing columns are set to 0.
    MinNorm,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least squares for `y ≈ c1·col1 + c2·col2`.
fn lstsq2(col1: &[f64], col2: &[f64], y: &[f64], policy: RankPolicy) -> Result<[f64; 2]> {
    let n1 = dot(col1, col1).sqrt();
    let n2 = dot(col2, col2).sqrt();
    let tiny = 1e-300;
    let single = |col: &[f64], norm: f64| dot(col, y) / (norm * norm);
    match (n1 > tiny, n2 > tiny) {
        (false, false) if policy == RankPolicy::MinNorm => return Ok([0.0, 0.0]),
        (false, true) if policy == RankPolicy::MinNorm => return Ok([0.0, single(col2, n2)]),
        (true, false) if policy == RankPolicy::MinNorm => return Ok([single(col1, n1), 0.0]),
        (true, true) => {}
        _ => return Err(Error::DegenerateDesign("zero basis column")),
    }
    let q1: Vec<f64> = col1.iter().map(|v| v / n1).collect();
    let mut proj = dot(&q1, col2);
    let mut v: Vec<f64> = col2.iter().zip(&q1).map(|(c, q)| c - proj * q).collect();
    let again = dot(&q1, &v);
    v.iter_mut().zip(&q1).for_each(|(vi, q)| *vi -= again * q);
    proj += again;
    let nv = dot(&v, &v).sqrt();
    if nv <= 1e-10 * n2 {
        return match policy {
            RankPolicy::MinNorm => Ok([single(col1, n1), 0.0]),
            RankPolicy::Reject => Err(Error::DegenerateDesign(
                "basis columns are collinear (no variation in x)",
            )),
        };
    }
    let c2 = dot(&v, y) / (nv * nv);
    let c1 = (dot(&q1, y) - proj * c2) / n1;
    Ok([c1, c2])
}

fn lstsq1(col: &[f64], y: &[f64]) -> f64 {
    let nn = dot(col, col);
    if nn > 0.0 {
        dot(col, y) / nn
    } else {
        0.0
    }
}

/// Weighted rows `offset + c1·col1 + c2·col2` whose squares are summed.
struct LinearRows {
    col1: Vec<f64>,
    col2: Vec<f64>,
    offset: Vec<f64>,
}

impl LinearRows {
    fn with_capacity(n: usize) -> Self {
        Self {
            col1: Vec::with_capacity(n),
            col2: Vec::with_capacity(n),
            offset: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, weight: f64, c1: f64, c2: f64, offset: f64) {
        self.col1.push(weight * c1);
        self.col2.push(weight * c2);
        self.offset.push(weight * offset);
    }

    /// Minimizes the row sum of squares over `(a1, a2)`; returns `(a1, a2, sse)`.
    fn solve(&self, fixed_a2: Option<f64>, policy: RankPolicy) -> Result<(f64, f64, f64)> {
        let target: Vec<f64> = self.offset.iter().map(|o| -o).collect();
        let (a1, a2) = match fixed_a2 {
            Some(a2) => {
                let y: Vec<f64> = target.iter().zip(&self.col2).map(|(t, c)| t - a2 * c).collect();
                (lstsq1(&self.col1, &y), a2)
            }
            None => {
                let [a1, a2] = lstsq2(&self.col1, &self.col2, &target, policy)?;
                (a1, a2)
            }
        };
        let sq: Vec<f64> = (0..self.offset.len())
            .map(|i| {
                let r = self.offset[i] + a1 * self.col1[i] + a2 * self.col2[i];
                r * r
            })
            .collect();
        Ok((a1, a2, pairwise_sum(&sq)))
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    a1: f64,
    a2: f64,
    a3: f64,
    sse: f64,
}

impl Candidate {
    /// Lower objective wins; equal objectives go to the smaller `|a3|`.
    fn beats(&self, other: &Candidate) -> bool {
        let (s, o) = (sanitize(self.sse), sanitize(other.sse));
        s < o || (s == o && self.a3.abs() < other.a3.abs())
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

struct SearchOutcome {
    best: Candidate,
    best_probe: Candidate,
    converged: bool,
}

/// Probe sweep over `a3 ∈ [lo, hi]` (geometric in `a3 + x_min`) followed by
/// golden-section refinement between the neighbours of the best probe.
fn profile_shift<F>(profile: F, x_min: f64, lo: f64, hi: f64, cfg: &FitConfig) -> Result<SearchOutcome>
where
    F: Fn(f64) -> Result<Candidate> + Sync + Send,
{
    let (d_lo, d_hi) = (lo + x_min, hi + x_min);
    let n = cfg.n_shift_probes;
    let ratio = (d_hi / d_lo).ln() / (n - 1) as f64;
    let shifts: Vec<f64> = (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                d_lo * (ratio * k as f64).exp() - x_min
            }
        })
        .collect();
    let probes = cfg.execution.try_map_indices(n, |k| profile(shifts[k]))?;

    let mut k_best = 0;
    for k in 1..n {
        if probes[k].beats(&probes[k_best]) {
            k_best = k;
        }
    }
    let best_probe = probes[k_best];
    let mut best = best_probe;

    let mut a = shifts[k_best.saturating_sub(1)];
    let mut b = shifts[(k_best + 1).min(n - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = profile(c)?;
    let mut fd = profile(d)?;
    let mut converged = false;
    for _ in 0..MAX_REFINE_ITERS {
        for cand in [fc, fd] {
            if cand.beats(&best) {
                best = cand;
            }
        }
        if (b - a) <= cfg.refine_tol * (0.5 * (a + b)).abs().max(1.0) {
            converged = true;
            break;
        }
        if sanitize(fc.sse) <= sanitize(fd.sse) {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = profile(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = profile(d)?;
        }
    }
    Ok(SearchOutcome {
        best,
        best_probe,
        converged,
    })
}

fn log_basis(x: f64, a3: f64) -> Result<f64> {
    let z = x + a3;
    if !(z > 0.0) {
        return Err(Error::Domain {
            context: "fit basis",
            argument: z,
        });
    }
    Ok(x + z * z.ln())
}

fn extent(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    })
}

fn check_samples<const N: usize>(samples: &[[f64; N]], min: usize) -> Result<()> {
    if samples.len() < min {
        return Err(Error::DegenerateDesign("too few samples"));
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateDesign("non-finite sample"));
    }
    Ok(())
}

/// Shift used when `a3` is unidentifiable: 0 if admissible, else the
/// admissible value closest to 0.
fn conventional_shift(lo: f64, hi: f64) -> f64 {
    0.0_f64.clamp(lo, hi)
}

/// Fits `a1 + a2 x + a2 (x + a3) ln(x + a3)` to `(x, f(x))` samples.
pub fn fit_function_1d(samples: &[(f64, f64)], cfg: &FitConfig) -> Result<FitReport> {
    let rows: Vec<[f64; 3]> = samples.iter().map(|&(x, f)| [x, 0.0, f]).collect();
    fit_samples(&rows, cfg, false)
}

/// Fits `a1 + a2 x + a3 y + a2 (x + a3) ln(x + a3)` to `(x, y, f(x, y))` samples.
pub fn fit_function_2d(samples: &[(f64, f64, f64)], cfg: &FitConfig) -> Result<FitReport> {
    let rows: Vec<[f64; 3]> = samples.iter().map(|&(x, y, f)| [x, y, f]).collect();
    fit_samples(&rows, cfg, true)
}

fn fit_samples(samples: &[[f64; 3]], cfg: &FitConfig, two_d: bool) -> Result<FitReport> {
    cfg.validate()?;
    check_samples(samples, if two_d { 4 } else { 3 })?;
    let (x_min, x_max) = extent(samples.iter().map(|s| s[0]));
    if x_min == x_max {
        return Err(Error::DegenerateDesign("all x equal"));
    }
    let (lo, hi) = cfg.shift_interval(x_min, x_max)?;

    let profile = |a3: f64| -> Result<Candidate> {
        let mut rows = LinearRows::with_capacity(samples.len());
        for s in samples {
            rows.push(1.0, 1.0, log_basis(s[0], a3)?, a3 * s[1] - s[2]);
        }
        let (a1, a2, sse) = rows.solve(cfg.fixed_a2, RankPolicy::Reject)?;
        Ok(Candidate { a1, a2, a3, sse })
    };
    let outcome = profile_shift(profile, x_min, lo, hi, cfg)?;
    debug_assert!(!outcome.best_probe.beats(&outcome.best));
    let mut best = outcome.best;

    let y_varies = samples.iter().any(|s| s[1] != samples[0][1]);
    let scale_f = samples.iter().fold(1.0_f64, |m, s| m.max(s[2].abs()));
    let scale_phi = samples
        .iter()
        .map(|s| log_basis(s[0], best.a3).unwrap_or(0.0).abs())
        .fold(1.0_f64, f64::max);
    let a2_invisible = cfg.fixed_a2.map_or(best.a2.abs() * scale_phi <= 1e-12 * scale_f, |a2| a2 == 0.0);
    let shift_identified = two_d && y_varies || !a2_invisible;
    if !shift_identified {
        let a3 = conventional_shift(lo, hi);
        let mut cand = profile(a3)?;
        if cfg.fixed_a2.is_none() {
            let f: Vec<f64> = samples.iter().map(|s| s[2] - a3 * s[1]).collect();
            cand.a1 = pairwise_sum(&f) / f.len() as f64;
            cand.a2 = 0.0;
        }
        best = cand;
    }

    let (params, residuals) = if two_d {
        let e = TiedLogExpansion2D::new(best.a1, best.a2, best.a3)?;
        let r = samples
            .iter()
            .map(|s| Ok(e.eval(s[0], s[1])? - s[2]))
            .collect::<Result<Vec<f64>>>()?;
        (FittedExpansion::TwoD(e), r)
    } else {
        let e = TiedLogExpansion1D::new(best.a1, best.a2, best.a3)?;
        let r = samples
            .iter()
            .map(|s| Ok(e.eval(s[0])? - s[2]))
            .collect::<Result<Vec<f64>>>()?;
        (FittedExpansion::OneD(e), r)
    };
    let (rmse, max_abs_err) = rms_and_max(&residuals);
    let sq: Vec<f64> = residuals.iter().map(|r| r * r).collect();
    Ok(FitReport {
        params,
        rmse,
        max_abs_err,
        n_samples: samples.len(),
        converged: outcome.converged,
        shift_identified,
        objective: pairwise_sum(&sq),
    })
}

/// A condition sample `V(x, t) = value` on the boundary of the fit region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub x: f64,
    pub t: f64,
    pub value: f64,
}

/// Chooses `(a1, a2, a3)` of the bivariate ansatz `V(x, t)` minimizing the
/// squared PDE residual over the grid plus `bc_penalty_weight` times the
/// squared mismatch at the boundary samples.
///
/// The reported `rmse`/`max_abs_err` are those of the PDE residual alone.
pub fn fit_pde_residual(
    equation: &PdeEquation,
    x_grid: &Grid1D,
    t_grid: &Grid1D,
    boundary: &[BoundarySample],
    cfg: &FitConfig,
) -> Result<FitReport> {
    cfg.validate()?;
    let w = cfg.bc_penalty_weight;
    if w > 0.0 && boundary.is_empty() {
        return Err(Error::DegenerateDesign(
            "boundary samples required when bc_penalty_weight > 0",
        ));
    }
    let xs = x_grid.nodes();
    let ts = t_grid.nodes();
    let (bx_min, bx_max) = extent(boundary.iter().map(|b| b.x));
    let x_min = x_grid.x_min().min(bx_min);
    let x_max = x_grid.x_max().max(bx_max);
    let (lo, hi) = cfg.shift_interval(x_min, x_max)?;
    let sw = w.sqrt();

    let profile = |a3: f64| -> Result<Candidate> {
        let mut rows = LinearRows::with_capacity(xs.len() * ts.len() + boundary.len());
        for &t in &ts {
            for &x in &xs {
                let (c1, c2, off) = equation.linear_residual_terms(x, t, a3)?;
                rows.push(1.0, c1, c2, off);
            }
        }
        if w > 0.0 {
            for b in boundary {
                rows.push(sw, 1.0, log_basis(b.x, a3)?, a3 * b.t - b.value);
            }
        }
        let (a1, a2, sse) = rows.solve(cfg.fixed_a2, RankPolicy::MinNorm)?;
        Ok(Candidate { a1, a2, a3, sse })
    };
    let outcome = profile_shift(profile, x_min, lo, hi, cfg)?;
    let best = outcome.best;
    let e = TiedLogExpansion2D::new(best.a1, best.a2, best.a3)?;
    let mut residuals = Vec::with_capacity(xs.len() * ts.len());
    for &t in &ts {
        for &x in &xs {
            residuals.push(equation.residual(&e, x, t)?);
        }
    }
    let (rmse, max_abs_err) = rms_and_max(&residuals);
    Ok(FitReport {
        params: FittedExpansion::TwoD(e),
        rmse,
        max_abs_err,
        n_samples: residuals.len(),
        converged: outcome.converged,
        shift_identified: true,
        objective: best.sse,
    })
}
