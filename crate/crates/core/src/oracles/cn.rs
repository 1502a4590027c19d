//! Crank–Nicolson reference solvers for the heat equation `V_t = k V_xx`
//! (marched forward from initial data) and the Black–Scholes-type operator
//! `V_t + r x V_x + ½ σ² x² V_xx − r V = 0` (marched backward from terminal data).

use crate::error::{require_finite, require_positive, Error, Result};
use crate::grid::Grid1D;

/// Node values of a Crank–Nicolson run, one row per time node in ascending `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnSolution {
    grid: Grid1D,
    t_grid: Grid1D,
    values: Vec<f64>,
    scheme_order: (u32, u32),
}

impl CnSolution {
    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn t_grid(&self) -> &Grid1D {
        &self.t_grid
    }

    /// Expected (space, time) order of accuracy on smooth data.
    pub fn scheme_order(&self) -> (u32, u32) {
        self.scheme_order
    }

    pub fn value(&self, it: usize, ix: usize) -> f64 {
        self.values[it * self.grid.len() + ix]
    }

    pub fn row(&self, it: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[it * n..(it + 1) * n]
    }

    /// Builds a solution table directly from node values.
    pub fn from_values(grid: Grid1D, t_grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * t_grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                t_grid.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Unstable {
                step: pos / grid.len(),
            });
        }
        Ok(Self {
            grid,
            t_grid,
            values,
            scheme_order: (2, 2),
        })
    }

    /// Tabulates `f` on the given grids.
    pub fn sample<F>(grid: Grid1D, t_grid: Grid1D, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        let mut values = Vec::with_capacity(grid.len() * t_grid.len());
        for it in 0..t_grid.len() {
            let t = t_grid.node(it);
            for ix in 0..grid.len() {
                values.push(f(grid.node(ix), t)?);
            }
        }
        Self::from_values(grid, t_grid, values)
    }

    /// Bilinear interpolation inside the grid extents.
    pub fn interpolate(&self, x: f64, t: f64) -> Result<f64> {
        let (ix, wx) = locate(&self.grid, x)?;
        let (it, wt) = locate(&self.t_grid, t)?;
        let v00 = self.value(it, ix);
        let v01 = self.value(it, ix + 1);
        let v10 = self.value(it + 1, ix);
        let v11 = self.value(it + 1, ix + 1);
        let lower = v00 + wx * (v01 - v00);
        let upper = v10 + wx * (v11 - v10);
        Ok(lower + wt * (upper - lower))
    }
}

fn locate(g: &Grid1D, x: f64) -> Result<(usize, f64)> {
    let tol = 1e-12 * (g.x_max() - g.x_min());
    if x < g.x_min() - tol || x > g.x_max() + tol {
        return Err(Error::GridMismatch(format!(
            "{x} outside [{}, {}]",
            g.x_min(),
            g.x_max()
        )));
    }
    let s = ((x - g.x_min()) / g.step()).clamp(0.0, (g.len() - 1) as f64);
    let i = (s.floor() as usize).min(g.len() - 2);
    Ok((i, s - i as f64))
}

/// Thomas algorithm for `lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1] = rhs[i]`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    let mut c_prime = vec![0.0; n];
    let mut denom = diag[0];
    c_prime[0] = upper[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c_prime[i - 1];
        c_prime[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_prime[i] * rhs[i + 1];
    }
}

/// Spatial operator `L V_i = a_i V_{i-1} + b_i V_i + c_i V_{i+1}` for all nodes.
/// Rows whose value is imposed (Dirichlet) are flagged and left untouched.
struct Operator {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

impl Operator {
    fn apply(&self, v: &[f64], i: usize) -> f64 {
        let mut s = self.b[i] * v[i];
        if i > 0 {
            s += self.a[i] * v[i - 1];
        }
        if i + 1 < v.len() {
            s += self.c[i] * v[i + 1];
        }
        s
    }
}

/// One CN step `(I − dt/2 L) v_new = (I + dt/2 L) v_old`; `dirichlet` gives
/// imposed end values when present.
fn cn_step(op: &Operator, dt: f64, old: &[f64], dirichlet: Option<(f64, f64)>) -> Vec<f64> {
    let n = old.len();
    let h = 0.5 * dt;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        lower[i] = -h * op.a[i];
        diag[i] = 1.0 - h * op.b[i];
        upper[i] = -h * op.c[i];
        rhs[i] = old[i] + h * op.apply(old, i);
    }
    if let Some((left, right)) = dirichlet {
        lower[0] = 0.0;
        diag[0] = 1.0;
        upper[0] = 0.0;
        rhs[0] = left;
        lower[n - 1] = 0.0;
        diag[n - 1] = 1.0;
        upper[n - 1] = 0.0;
        rhs[n - 1] = right;
    }
    solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
    rhs
}

fn check_row(row: &[f64], step: usize) -> Result<()> {
    if row.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Unstable { step })
    }
}

fn check_space_grid(grid: &Grid1D) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::InvalidGrid("CN solver needs at least 3 space nodes"));
    }
    Ok(())
}

/// Forward CN solution of `V_t = k V_xx` with Dirichlet data `boundary = (left(t), right(t))`.
pub fn cn_solve_heat<I, L, R>(
    k: f64,
    initial: I,
    boundary: (L, R),
    grid: &Grid1D,
    t_grid: &Grid1D,
) -> Result<CnSolution>
where
    I: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
    R: Fn(f64) -> f64,
{
    require_positive("k", k)?;
    check_space_grid(grid)?;
    let n = grid.len();
    let dx = grid.step();
    let coef = k / (dx * dx);
    let op = Operator {
        a: vec![coef; n],
        b: vec![-2.0 * coef; n],
        c: vec![coef; n],
    };
    let (left, right) = boundary;

    let mut values = Vec::with_capacity(n * t_grid.len());
    let mut row: Vec<f64> = grid.nodes().into_iter().map(&initial).collect();
    check_row(&row, 0)?;
    values.extend_from_slice(&row);
    for step in 1..t_grid.len() {
        let dt = t_grid.node(step) - t_grid.node(step - 1);
        let t = t_grid.node(step);
        row = cn_step(&op, dt, &row, Some((left(t), right(t))));
        check_row(&row, step)?;
        values.extend_from_slice(&row);
    }
    Ok(CnSolution {
        grid: *grid,
        t_grid: *t_grid,
        values,
        scheme_order: (2, 2),
    })
}

/// Boundary treatment for [`cn_solve_rcd_with`].
pub enum RcdBoundary<'a> {
    /// `V_xx = 0` at both ends, with one-sided first differences pointing into
    /// the domain. Exact for solutions linear in `x` near the boundary.
    Linearity,
    /// Imposed values `(left(t), right(t))`.
    Dirichlet(&'a dyn Fn(f64) -> f64, &'a dyn Fn(f64) -> f64),
}

/// Backward CN solution from `terminal` at `t_grid.x_max()` using the
/// linearity boundary condition at both ends.
pub fn cn_solve_rcd<F>(
    r: f64,
    sigma: f64,
    terminal: F,
    grid: &Grid1D,
    t_grid: &Grid1D,
) -> Result<CnSolution>
where
    F: Fn(f64) -> f64,
{
    cn_solve_rcd_with(r, sigma, terminal, grid, t_grid, RcdBoundary::Linearity)
}

pub fn cn_solve_rcd_with<F>(
    r: f64,
    sigma: f64,
    terminal: F,
    grid: &Grid1D,
    t_grid: &Grid1D,
    boundary: RcdBoundary<'_>,
) -> Result<CnSolution>
where
    F: Fn(f64) -> f64,
{
    require_finite("r", r)?;
    require_positive("sigma", sigma)?;
    check_space_grid(grid)?;
    if !(grid.x_min() > 0.0) {
        return Err(Error::InvalidParameter {
            name: "x_min",
            value: grid.x_min(),
            reason: "space grid must start above 0",
        });
    }
    let n = grid.len();
    let dx = grid.step();
    let xs = grid.nodes();

    // time-to-maturity form: V_τ = r x V_x + ½ σ² x² V_xx − r V
    let mut op = Operator {
        a: vec![0.0; n],
        b: vec![0.0; n],
        c: vec![0.0; n],
    };
    for i in 1..n - 1 {
        let diff = 0.5 * sigma * sigma * xs[i] * xs[i] / (dx * dx);
        let conv = r * xs[i] / (2.0 * dx);
        op.a[i] = diff - conv;
        op.b[i] = -2.0 * diff - r;
        op.c[i] = diff + conv;
    }
    op.b[0] = -r * xs[0] / dx - r;
    op.c[0] = r * xs[0] / dx;
    op.a[n - 1] = -r * xs[n - 1] / dx;
    op.b[n - 1] = r * xs[n - 1] / dx - r;

    let nt = t_grid.len();
    let mut rows = vec![Vec::new(); nt];
    let mut row: Vec<f64> = xs.iter().map(|&x| terminal(x)).collect();
    check_row(&row, nt - 1)?;
    rows[nt - 1] = row.clone();
    for step in (0..nt - 1).rev() {
        let dt = t_grid.node(step + 1) - t_grid.node(step);
        let t = t_grid.node(step);
        let imposed = match &boundary {
            RcdBoundary::Linearity => None,
            RcdBoundary::Dirichlet(left, right) => Some((left(t), right(t))),
        };
        row = cn_step(&op, dt, &row, imposed);
        check_row(&row, step)?;
        rows[step] = row.clone();
    }
    Ok(CnSolution {
        grid: *grid,
        t_grid: *t_grid,
        values: rows.concat(),
        scheme_order: (2, 2),
    })
}

/// Observed order `log2(|u_h − u_{h/2}| / |u_{h/2} − u_{h/4}|)` in the max norm
/// over the coarse space nodes at time `t`. The three solutions must be on
/// successively halved grids of the same extent.
pub fn self_convergence_order(
    coarse: &CnSolution,
    mid: &CnSolution,
    fine: &CnSolution,
    t: f64,
) -> Result<f64> {
    for s in [mid, fine] {
        if s.grid.x_min() != coarse.grid.x_min()
            || s.grid.x_max() != coarse.grid.x_max()
            || s.t_grid.x_min() != coarse.t_grid.x_min()
            || s.t_grid.x_max() != coarse.t_grid.x_max()
        {
            return Err(Error::GridMismatch("refinement levels differ in extent".into()));
        }
    }
    let mut e1 = 0.0_f64;
    let mut e2 = 0.0_f64;
    for x in coarse.grid.nodes() {
        let (uc, um, uf) = (
            coarse.interpolate(x, t)?,
            mid.interpolate(x, t)?,
            fine.interpolate(x, t)?,
        );
        e1 = e1.max((uc - um).abs());
        e2 = e2.max((um - uf).abs());
    }
    Ok((e1 / e2).log2())
}
