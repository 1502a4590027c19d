//! Log-augmented expansion families and the closed-form Taylor remainder.
//!
//! The tied families share one coefficient between the linear and the
//! `(x + a3) ln(x + a3)` term:
//!
//! ```text
//! 1-D:  a1 + a2 x + a2 (x + a3) ln(x + a3)
//! 2-D:  a1 + a2 x + a3 y + a2 (x + a3) ln(x + a3)
//! ```
//!
//! [`GeneralLogAnsatz`] drops the tie and is what the first-order expansion
//! plus the closed-form remainder actually produces.

use crate::error::{require_finite, require_positive, Error, Result};

/// Returns `x + shift` if it is a valid log argument.
fn log_argument(context: &'static str, x: f64, shift: f64) -> Result<f64> {
    let z = x + shift;
    if z > 0.0 {
        Ok(z)
    } else {
        Err(Error::Domain {
            context,
            argument: z,
        })
    }
}

/// Members of the tied families that expose the shared `a2`/`a3` pair.
///
/// The x-derivatives are identical for both families.
pub trait TiedExpansion {
    fn a2(&self) -> f64;
    fn a3(&self) -> f64;

    /// `a2 (2 + ln(x + a3))`
    fn d_dx(&self, x: f64) -> Result<f64> {
        let z = log_argument("d_dx", x, self.a3())?;
        Ok(self.a2() * (2.0 + z.ln()))
    }

    /// `a2 / (x + a3)`
    fn d2_dx2(&self, x: f64) -> Result<f64> {
        let z = log_argument("d2_dx2", x, self.a3())?;
        Ok(self.a2() / z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiedLogExpansion1D {
    pub(crate) a1: f64,
    pub(crate) a2: f64,
    pub(crate) a3: f64,
}

impl TiedLogExpansion1D {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        Ok(Self {
            a1: require_finite("a1", a1)?,
            a2: require_finite("a2", a2)?,
            a3: require_finite("a3", a3)?,
        })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let z = log_argument("eval_tied_1d", x, self.a3)?;
        Ok(self.a1 + self.a2 * x + self.a2 * z * z.ln())
    }

    /// The same function as an untied ansatz (`b1 = bL = a2`).
    pub fn to_general(&self) -> GeneralLogAnsatz {
        GeneralLogAnsatz {
            b0: self.a1,
            b1: self.a2,
            b_log: self.a2,
            shift: self.a3,
        }
    }
}

impl TiedExpansion for TiedLogExpansion1D {
    fn a2(&self) -> f64 {
        self.a2
    }
    fn a3(&self) -> f64 {
        self.a3
    }
}

/// Bivariate family; `a3` is both the `y` coefficient and the log shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiedLogExpansion2D {
    pub(crate) a1: f64,
    pub(crate) a2: f64,
    pub(crate) a3: f64,
}

impl TiedLogExpansion2D {
    pub fn new(a1: f64, a2: f64, a3: f64) -> Result<Self> {
        Ok(Self {
            a1: require_finite("a1", a1)?,
            a2: require_finite("a2", a2)?,
            a3: require_finite("a3", a3)?,
        })
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let z = log_argument("eval_tied_2d", x, self.a3)?;
        Ok(self.a1 + self.a2 * x + self.a3 * y + self.a2 * z * z.ln())
    }

    /// Derivative in the second variable (`t` when used as `V(x, t)`): the constant `a3`.
    pub fn d_dt(&self) -> f64 {
        self.a3
    }

    /// Restriction to `y = 0`.
    pub fn slice_1d(&self) -> TiedLogExpansion1D {
        TiedLogExpansion1D {
            a1: self.a1,
            a2: self.a2,
            a3: self.a3,
        }
    }
}

impl TiedExpansion for TiedLogExpansion2D {
    fn a2(&self) -> f64 {
        self.a2
    }
    fn a3(&self) -> f64 {
        self.a3
    }
}

/// Expansion point, shift constant and the two Taylor coefficients of the
/// first-order expansion `f(c) + f'(c)(x - c) + R1(x)`.
///
/// For the bivariate expansion, `c` is `c1` and `fprime_c` is the partial
/// `f_x(c1, c2)`; the remainder lives in `x` only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivationConstants {
    pub(crate) c: f64,
    pub(crate) alpha: f64,
    pub(crate) f_c: f64,
    pub(crate) fprime_c: f64,
}

impl DerivationConstants {
    pub const DEFAULT_ALPHA: f64 = 1.0;

    pub fn new(c: f64, alpha: f64, f_c: f64, fprime_c: f64) -> Result<Self> {
        require_finite("c", c)?;
        if c == 0.0 {
            return Err(Error::ZeroExpansionPoint);
        }
        Ok(Self {
            c,
            alpha: require_positive("alpha", alpha)?,
            f_c: require_finite("f_c", f_c)?,
            fprime_c: require_finite("fprime_c", fprime_c)?,
        })
    }

    pub fn with_default_alpha(c: f64, f_c: f64, fprime_c: f64) -> Result<Self> {
        Self::new(c, Self::DEFAULT_ALPHA, f_c, fprime_c)
    }

    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn f_c(&self) -> f64 {
        self.f_c
    }
    pub fn fprime_c(&self) -> f64 {
        self.fprime_c
    }

    /// Closed-form first-order remainder
    /// `f'(c) [α ln α + x − ((x − c + α) ln(x − c + α) + c)]`.
    pub fn remainder_closed_form(&self, x: f64) -> Result<f64> {
        let Self {
            c, alpha, fprime_c, ..
        } = *self;
        let z = x - c + alpha;
        if !(z > 0.0) {
            return Err(Error::Domain {
                context: "remainder_closed_form",
                argument: z,
            });
        }
        Ok(fprime_c * (alpha * alpha.ln() + x - (z * z.ln() + c)))
    }

    /// The expansion `f(c) + f'(c)(x − c) + R1(x)` collected into ansatz form.
    ///
    /// Expanding the bracket gives `b1 = 2 f'(c)` and `bL = −f'(c)` with shift
    /// `α − c`; the coefficients are tied only when `f'(c) = 0`.
    pub fn expansion(&self) -> GeneralLogAnsatz {
        let Self {
            c,
            alpha,
            f_c,
            fprime_c,
        } = *self;
        GeneralLogAnsatz {
            b0: f_c - 2.0 * fprime_c * c + fprime_c * alpha * alpha.ln(),
            b1: 2.0 * fprime_c,
            b_log: -fprime_c,
            shift: alpha - c,
        }
    }

    /// `f(c) + f'(c)(x − c) + R1(x)` evaluated term by term.
    pub fn taylor_with_remainder(&self, x: f64) -> Result<f64> {
        Ok(self.f_c + self.fprime_c * (x - self.c) + self.remainder_closed_form(x)?)
    }
}

/// `b0 + b1 x + bL (x + s) ln(x + s)` with independent linear and log coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralLogAnsatz {
    pub b0: f64,
    pub b1: f64,
    pub b_log: f64,
    pub shift: f64,
}

impl GeneralLogAnsatz {
    pub fn eval(&self, x: f64) -> Result<f64> {
        let z = log_argument("eval_general", x, self.shift)?;
        Ok(self.b0 + self.b1 * x + self.b_log * z * z.ln())
    }

    /// `|b1 − bL|`, zero exactly for members of the tied family.
    pub fn tie_gap(&self) -> f64 {
        (self.b1 - self.b_log).abs()
    }

    pub fn is_tied(&self, tol: f64) -> bool {
        self.tie_gap() <= tol
    }

    /// The tied expansion this ansatz equals, if it is tied within `tol`.
    pub fn as_tied(&self, tol: f64) -> Option<TiedLogExpansion1D> {
        self.is_tied(tol).then_some(TiedLogExpansion1D {
            a1: self.b0,
            a2: self.b1,
            a3: self.shift,
        })
    }
}

impl From<TiedLogExpansion1D> for GeneralLogAnsatz {
    fn from(e: TiedLogExpansion1D) -> Self {
        e.to_general()
    }
}
