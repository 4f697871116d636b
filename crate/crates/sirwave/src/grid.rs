//! Uniform truncation grids and sampled functions with constant tails.
//!
//! Every profile in the pipeline lives on one shared uniform grid and carries
//! its two asymptotic values explicitly; anything off the grid is the tail
//! constant. Convolutions and shifted evaluations rely on this instead of
//! pretending the function vanishes outside the window.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// `len` equally spaced points `start, start + dx, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub dx: f64,
    pub len: usize,
}

impl Grid {
    /// `len` points spanning `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, len: usize) -> Self {
        assert!(len >= 2 && half_width > 0.0);
        Grid {
            start: -half_width,
            dx: 2.0 * half_width / (len - 1) as f64,
            len,
        }
    }

    /// Odd-length grid with spacing `dx`, zero as the middle node, covering
    /// at least `[-half_width, half_width]`.
    pub fn centered(half_width: f64, dx: f64) -> Self {
        assert!(dx > 0.0 && half_width > 0.0);
        let m = (half_width / dx - 1e-9).ceil() as usize;
        Grid {
            start: -(m as f64) * dx,
            dx,
            len: 2 * m + 1,
        }
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        self.start + i as f64 * self.dx
    }

    pub fn end(&self) -> f64 {
        self.point(self.len - 1)
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.point(i)).collect()
    }

    /// Same spacing (to 1e-12 relative) and node alignment.
    pub fn check_compatible(&self, other: &Grid) -> Result<()> {
        if ((self.dx - other.dx) / self.dx).abs() > 1e-12 {
            return Err(Error::GridMismatch(format!(
                "spacing {} vs {}",
                self.dx, other.dx
            )));
        }
        let off = (other.start - self.start) / self.dx;
        if (off - off.round()).abs() > 1e-6 {
            return Err(Error::GridMismatch(format!(
                "nodes offset by {off} cells"
            )));
        }
        Ok(())
    }
}

/// Samples on a grid plus the values at `-inf` and `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub left: f64,
    pub right: f64,
}

impl ProfileFunction {
    pub fn new(grid: Grid, values: Vec<f64>, left: f64, right: f64) -> Self {
        assert_eq!(grid.len, values.len());
        ProfileFunction {
            grid,
            values,
            left,
            right,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64, left: f64, right: f64) -> Self {
        let values = (0..grid.len).map(|i| f(grid.point(i))).collect();
        Self::new(grid, values, left, right)
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        Self::new(grid, vec![v; grid.len], v, v)
    }

    /// Sample `k`, with out-of-range indices mapped to the tail constants.
    #[inline]
    pub fn sample(&self, k: isize) -> f64 {
        if k < 0 {
            self.left
        } else if k as usize >= self.values.len() {
            self.right
        } else {
            self.values[k as usize]
        }
    }

    #[inline]
    fn locate(&self, t: f64) -> (isize, f64) {
        let s = (t - self.grid.start) / self.grid.dx;
        let j = s.floor();
        (j as isize, s - j)
    }

    /// Piecewise-linear value; tails beyond the grid.
    pub fn eval_linear(&self, t: f64) -> f64 {
        let (j, u) = self.locate(t);
        if j < -1 {
            return self.left;
        }
        if j >= self.grid.len as isize {
            return self.right;
        }
        (1.0 - u) * self.sample(j) + u * self.sample(j + 1)
    }

    /// Four-point cubic Lagrange value.
    pub fn eval(&self, t: f64) -> f64 {
        let (j, u) = self.locate(t);
        if j < -2 {
            return self.left;
        }
        if j > self.grid.len as isize {
            return self.right;
        }
        let w = [
            -u * (u - 1.0) * (u - 2.0) / 6.0,
            (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0,
            (u + 1.0) * u * (u - 1.0) / 6.0,
        ];
        (0..4).map(|m| w[m] * self.sample(j - 1 + m as isize)).sum()
    }

    /// Derivative of the four-point cubic Lagrange interpolant.
    pub fn derivative(&self, t: f64) -> f64 {
        let (j, u) = self.locate(t);
        if j < -2 || j > self.grid.len as isize {
            return 0.0;
        }
        let w = [
            -(3.0 * u * u - 6.0 * u + 2.0) / 6.0,
            (3.0 * u * u - 4.0 * u - 1.0) / 2.0,
            -(3.0 * u * u - 2.0 * u - 2.0) / 2.0,
            (3.0 * u * u - 1.0) / 6.0,
        ];
        (0..4).map(|m| w[m] * self.sample(j - 1 + m as isize)).sum::<f64>() / self.grid.dx
    }

    /// Centered second difference at node `i` (tails supply the neighbours).
    pub fn second_difference(&self, i: usize) -> f64 {
        let i = i as isize;
        (self.sample(i - 1) - 2.0 * self.sample(i) + self.sample(i + 1))
            / (self.grid.dx * self.grid.dx)
    }

    /// `t -> self(t - s)` resampled on the same grid with cubic interpolation.
    pub fn shifted(&self, s: f64) -> Self {
        let g = self.grid;
        let values = (0..g.len).map(|i| self.eval(g.point(i) - s)).collect();
        Self::new(g, values, self.left, self.right)
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .fold(self.left.abs().max(self.right.abs()), |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(
            self.grid,
            self.values.iter().map(|&v| f(v)).collect(),
            f(self.left),
            f(self.right),
        )
    }
}
