use crate::error::{Error, Result};
use crate::expansion::DerivationConstants;

/// Denominators below this are treated as a singularity of `1/(w − u + α)`.
const SINGULARITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    abs_tol: f64,
    max_depth: u32,
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, max_depth: u32) -> Result<Self> {
        if !(abs_tol.is_finite() && abs_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "abs_tol",
                value: abs_tol,
                reason: "must be finite and > 0",
            });
        }
        if max_depth < 10 {
            return Err(Error::InvalidParameter {
                name: "max_depth",
                value: max_depth as f64,
                reason: "must be >= 10",
            });
        }
        Ok(Self { abs_tol, max_depth })
    }

    pub fn abs_tol(&self) -> f64 {
        self.abs_tol
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_depth: 50,
        }
    }
}

struct Panel {
    a: f64,
    m: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) * (fa + 4.0 * fm + fb) / 6.0
}

fn refine<F>(f: &mut F, p: Panel, tol: f64, depth: u32, max_depth: u32) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let Panel {
        a,
        m,
        b,
        fa,
        fm,
        fb,
        whole,
    } = p;
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth >= max_depth {
        return Err(Error::NonConvergence { a, b, max_depth });
    }
    let l = Panel {
        a,
        m: lm,
        b: m,
        fa,
        fm: flm,
        fb: fm,
        whole: left,
    };
    let r = Panel {
        a: m,
        m: rm,
        b,
        fa: fm,
        fm: frm,
        fb,
        whole: right,
    };
    Ok(refine(f, l, 0.5 * tol, depth + 1, max_depth)?
        + refine(f, r, 0.5 * tol, depth + 1, max_depth)?)
}

/// Adaptive Simpson integration of `f` over `[a, b]` (either orientation).
///
/// The tolerance is split between halves at each level; exhausting
/// `max_depth` on any panel is an error rather than a silent estimate.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let m = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo)?, f(m)?, f(hi)?);
    let p = Panel {
        a: lo,
        m,
        b: hi,
        fa,
        fm,
        fb,
        whole: simpson(lo, hi, fa, fm, fb),
    };
    Ok(sign * refine(&mut f, p, spec.abs_tol, 0, spec.max_depth)?)
}

fn remainder_integrand(d: &DerivationConstants, w: f64, u: f64) -> Result<f64> {
    let den = w - u + d.alpha;
    if den < SINGULARITY_GUARD {
        return Err(Error::Singularity {
            at: u,
            denominator: den,
        });
    }
    Ok(d.fprime_c / den)
}

fn check_region(d: &DerivationConstants, x: f64) -> Result<()> {
    // smallest w − u + α over the triangle/rectangle is at w = x, u = c when x < c
    let worst = (x - d.c).min(0.0) + d.alpha;
    if worst < SINGULARITY_GUARD {
        return Err(Error::Singularity {
            at: d.c,
            denominator: worst,
        });
    }
    Ok(())
}

/// `∫_c^x [∫_c^w f'(c) / (w − u + α) du] dw` by nested adaptive Simpson.
///
/// The outer variable is the running upper limit of the inner integral. Half
/// of `abs_tol` goes to the outer rule; the inner tolerance is scaled by the
/// outer interval length so the accumulated inner error stays within the
/// other half.
pub fn double_quadrature_remainder(
    d: &DerivationConstants,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_region(d, x)?;
    if x == d.c {
        return Ok(0.0);
    }
    let half = spec.abs_tol / 2.0;
    let inner_spec = QuadratureSpec {
        abs_tol: half / (x - d.c).abs().max(1.0),
        ..*spec
    };
    let outer_spec = QuadratureSpec {
        abs_tol: half,
        ..*spec
    };
    adaptive_simpson(
        |w| adaptive_simpson(|u| remainder_integrand(d, w, u), d.c, w, &inner_spec),
        d.c,
        x,
        &outer_spec,
    )
}

/// `∫_c^x ∫_c^x f'(c) / (x − u + α) du dv` with `x` frozen in the integrand.
pub fn double_quadrature_remainder_frozen(
    d: &DerivationConstants,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_region(d, x)?;
    if x == d.c {
        return Ok(0.0);
    }
    let half = spec.abs_tol / 2.0;
    let inner_spec = QuadratureSpec {
        abs_tol: half / (x - d.c).abs().max(1.0),
        ..*spec
    };
    let outer_spec = QuadratureSpec {
        abs_tol: half,
        ..*spec
    };
    adaptive_simpson(
        |_v| adaptive_simpson(|u| remainder_integrand(d, x, u), d.c, x, &inner_spec),
        d.c,
        x,
        &outer_spec,
    )
}
