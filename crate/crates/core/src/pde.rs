//! Residuals of the two model PDEs under the bivariate tied ansatz `V(x, t)`.
//!
//! * reaction-convection-diffusion: `V_t + r x V_x + ½ σ² x² V_xx − r V = 0`
//! * heat: `V_t − k V_xx = 0`
//!
//! Substituting `V_t = a3`, `V_x = a2 (2 + ln(x + a3))` and
//! `V_xx = a2 / (x + a3)` turns both into algebraic expressions in `(x, t)`;
//! [`rcd_residual`] and [`heat_residual`] evaluate those directly, while
//! [`PdeEquation::generic_residual`] works from any set of [`Derivatives`].

use crate::error::{require_finite, require_positive, Error, Result};
use crate::expansion::{TiedExpansion, TiedLogExpansion2D};
use crate::grid::Grid1D;
use crate::oracles::{central_diff, second_central_diff, CnSolution};
use crate::par::Execution;
use crate::stats::rms_and_max;

/// Cap on per-node rows carried in a [`ResidualReport`].
pub const MAX_REPORT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcdParams {
    r: f64,
    sigma: f64,
}

impl RcdParams {
    pub fn new(r: f64, sigma: f64) -> Result<Self> {
        Ok(Self {
            r: require_finite("r", r)?,
            sigma: require_positive("sigma", sigma)?,
        })
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatParams {
    k: f64,
}

impl HeatParams {
    pub fn new(k: f64) -> Result<Self> {
        Ok(Self {
            k: require_positive("k", k)?,
        })
    }
    pub fn k(&self) -> f64 {
        self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdeEquation {
    Rcd(RcdParams),
    Heat(HeatParams),
}

/// Value and partial derivatives of a candidate solution at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub v: f64,
    pub v_t: f64,
    pub v_x: f64,
    pub v_xx: f64,
}

impl Derivatives {
    /// From the analytic derivative operations of the ansatz.
    pub fn analytic(e: &TiedLogExpansion2D, x: f64, t: f64) -> Result<Self> {
        Ok(Self {
            v: e.eval(x, t)?,
            v_t: e.d_dt(),
            v_x: e.d_dx(x)?,
            v_xx: e.d2_dx2(x)?,
        })
    }

    /// Central differences of `f` with step `h` in each variable.
    pub fn numeric<F>(f: F, x: f64, t: f64, h: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        Ok(Self {
            v: f(x, t)?,
            v_t: central_diff(|s| f(x, s), t, h)?,
            v_x: central_diff(|s| f(s, t), x, h)?,
            v_xx: second_central_diff(|s| f(s, t), x, h)?,
        })
    }
}

impl PdeEquation {
    /// The PDE operator applied to the supplied derivatives.
    pub fn generic_residual(&self, x: f64, d: &Derivatives) -> f64 {
        match self {
            PdeEquation::Rcd(p) => {
                d.v_t + p.r * x * d.v_x + 0.5 * p.sigma * p.sigma * x * x * d.v_xx - p.r * d.v
            }
            PdeEquation::Heat(p) => d.v_t - p.k * d.v_xx,
        }
    }

    /// Transformed (substituted) residual of the ansatz at `(x, t)`.
    pub fn residual(&self, e: &TiedLogExpansion2D, x: f64, t: f64) -> Result<f64> {
        match self {
            PdeEquation::Rcd(p) => rcd_residual(e, p, x, t),
            PdeEquation::Heat(p) => heat_residual(e, p, x),
        }
    }

    /// The residual written as `offset + c1·a1 + c2·a2` for a fixed shift `a3`.
    pub(crate) fn linear_residual_terms(&self, x: f64, t: f64, a3: f64) -> Result<(f64, f64, f64)> {
        let z = x + a3;
        if !(z > 0.0) {
            return Err(Error::Domain {
                context: "pde residual",
                argument: z,
            });
        }
        let l = z.ln();
        Ok(match self {
            PdeEquation::Rcd(p) => {
                let (r, s2) = (p.r, p.sigma * p.sigma);
                let c2 = r * x * (2.0 + l) + 0.5 * s2 * x * x / z - r * (x + z * l);
                (-r, c2, a3 - r * a3 * t)
            }
            PdeEquation::Heat(p) => (0.0, -p.k / z, a3),
        })
    }
}

/// `a3 + r x a2 (2 + ln(x + a3)) + ½ a2 σ² x² / (x + a3) − r V(x, t)`.
pub fn rcd_residual(e: &TiedLogExpansion2D, p: &RcdParams, x: f64, t: f64) -> Result<f64> {
    let v = e.eval(x, t)?;
    let z = x + e.a3;
    Ok(e.a3 + p.r * x * e.a2 * (2.0 + z.ln()) + 0.5 * e.a2 * p.sigma * p.sigma * x * x / z - p.r * v)
}

/// `a3 − k a2 / (x + a3)`, independent of `t`.
pub fn heat_residual(e: &TiedLogExpansion2D, p: &HeatParams, x: f64) -> Result<f64> {
    let z = x + e.a3;
    if !(z > 0.0) {
        return Err(Error::Domain {
            context: "heat_residual",
            argument: z,
        });
    }
    Ok(e.a3 - p.k * e.a2 / z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub x: f64,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub nx: usize,
    pub nt: usize,
    pub rms_residual: f64,
    pub max_abs_residual: f64,
    pub rms_error_vs_reference: Option<f64>,
    /// Per-node rows in (t, x) order, thinned by a uniform stride to at most
    /// [`MAX_REPORT_SAMPLES`].
    pub samples: Vec<ResidualSample>,
}

impl ResidualReport {
    fn from_nodes(nx: usize, nt: usize, nodes: Vec<ResidualSample>) -> Self {
        let values: Vec<f64> = nodes.iter().map(|s| s.residual).collect();
        let (rms, max) = rms_and_max(&values);
        let stride = nodes.len().div_ceil(MAX_REPORT_SAMPLES).max(1);
        Self {
            nx,
            nt,
            rms_residual: rms,
            max_abs_residual: max,
            rms_error_vs_reference: None,
            samples: nodes.into_iter().step_by(stride).collect(),
        }
    }

    /// Records the RMS difference between `e` and a reference solution.
    pub fn attach_reference(&mut self, e: &TiedLogExpansion2D, reference: &CnSolution) -> Result<()> {
        self.rms_error_vs_reference = Some(compare_to_reference(e, reference)?.rms_residual);
        Ok(())
    }
}

pub fn residual_sweep(
    e: &TiedLogExpansion2D,
    equation: &PdeEquation,
    x_grid: &Grid1D,
    t_grid: &Grid1D,
) -> Result<ResidualReport> {
    residual_sweep_with(e, equation, x_grid, t_grid, Execution::default())
}

/// Residual at every grid node. A domain violation aborts the sweep and names
/// the first offending node.
pub fn residual_sweep_with(
    e: &TiedLogExpansion2D,
    equation: &PdeEquation,
    x_grid: &Grid1D,
    t_grid: &Grid1D,
    exec: Execution,
) -> Result<ResidualReport> {
    let (nx, nt) = (x_grid.len(), t_grid.len());
    let nodes = exec.try_map_indices(nx * nt, |k| {
        let (x, t) = (x_grid.node(k % nx), t_grid.node(k / nx));
        equation
            .residual(e, x, t)
            .map(|residual| ResidualSample { x, t, residual })
            .map_err(|err| err.at_node(x, t))
    })?;
    Ok(ResidualReport::from_nodes(nx, nt, nodes))
}

/// `e(x, t) − reference(x, t)` at every reference node.
pub fn compare_to_reference(e: &TiedLogExpansion2D, reference: &CnSolution) -> Result<ResidualReport> {
    let (xg, tg) = (reference.grid(), reference.t_grid());
    let mut nodes = Vec::with_capacity(xg.len() * tg.len());
    for it in 0..tg.len() {
        let t = tg.node(it);
        for ix in 0..xg.len() {
            let x = xg.node(ix);
            let v = e.eval(x, t).map_err(|err| err.at_node(x, t))?;
            nodes.push(ResidualSample {
                x,
                t,
                residual: v - reference.value(it, ix),
            });
        }
    }
    let mut rep = ResidualReport::from_nodes(xg.len(), tg.len(), nodes);
    rep.rms_error_vs_reference = Some(rep.rms_residual);
    Ok(rep)
}

/// `a − b` on the nodes of `a`, with `b` bilinearly interpolated.
pub fn compare_solutions(a: &CnSolution, b: &CnSolution) -> Result<ResidualReport> {
    let same = |u: &Grid1D, v: &Grid1D| u.x_min() == v.x_min() && u.x_max() == v.x_max();
    if !same(a.grid(), b.grid()) || !same(a.t_grid(), b.t_grid()) {
        return Err(Error::GridMismatch("solution extents differ".into()));
    }
    let (xg, tg) = (a.grid(), a.t_grid());
    let mut nodes = Vec::with_capacity(xg.len() * tg.len());
    for it in 0..tg.len() {
        let t = tg.node(it);
        for ix in 0..xg.len() {
            let x = xg.node(ix);
            nodes.push(ResidualSample {
                x,
                t,
                residual: a.value(it, ix) - b.interpolate(x, t)?,
            });
        }
    }
    let mut rep = ResidualReport::from_nodes(xg.len(), tg.len(), nodes);
    rep.rms_error_vs_reference = Some(rep.rms_residual);
    Ok(rep)
}
