use crate::error::{Error, Result};

/// Uniform grid of `n >= 2` nodes on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(Error::InvalidGrid("grid bounds must be finite"));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid("x_min must be < x_max"));
        }
        if n < 2 {
            return Err(Error::InvalidGrid("grid needs at least 2 nodes"));
        }
        Ok(Self { x_min, x_max, n })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    /// Node `i`; the last node is exactly `x_max`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n);
        if i + 1 == self.n {
            self.x_max
        } else {
            self.x_min + i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Same extent with `(n - 1) * factor + 1` nodes; every original node is kept.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n: (self.n - 1) * factor + 1,
            ..*self
        }
    }
}
