//! Uniform meshes and node-aligned fields.

use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform 1D mesh with `2m + 1` nodes spanning `[x_min, x_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub m: usize,
    pub dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        if m == 0 || !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid needs x_min < x_max and m >= 1 (got [{x_min}, {x_max}], m = {m})"
            )));
        }
        let dx = (x_max - x_min) / (2 * m) as f64;
        Ok(Self {
            x_min,
            x_max,
            m,
            dx,
        })
    }

    /// Builds the grid from a target spacing; the extent must hold an even
    /// number of cells of that size.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        if !(dx > 0.0) {
            return Err(Error::InvalidArgument(format!("dx must be positive, got {dx}")));
        }
        let cells = (x_max - x_min) / dx;
        let rounded = cells.round();
        if (cells - rounded).abs() > 1e-6 * cells.max(1.0) || rounded < 2.0 || !(rounded as usize).is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "extent {} is not an even multiple of dx = {dx}",
                x_max - x_min
            )));
        }
        Self::new(x_min, x_max, rounded as usize / 2)
    }

    /// Symmetric grid `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, dx: f64) -> Result<Self> {
        Self::with_spacing(-half_width, half_width, dx)
    }

    pub fn len(&self) -> usize {
        2 * self.m + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `i` (0-based, `i = 0` is `x_min`).
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x_min) / self.dx).round();
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from((0..self.len()).map(|i| f(self.x(i))).collect::<Vec<_>>())
    }

    pub fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::GridMismatch {
                expected: self.len(),
                found: field.len(),
            });
        }
        Ok(())
    }
}

/// Square-cell 2D mesh on `[-half_width, half_width]^2`, `2m + 1` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid2D {
    pub half_width: f64,
    pub m: usize,
    pub dx: f64,
}

impl Grid2D {
    pub fn new(half_width: f64, m: usize) -> Result<Self> {
        if m == 0 || !(half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "2D grid needs half_width > 0 and m >= 1 (got {half_width}, {m})"
            )));
        }
        Ok(Self {
            half_width,
            m,
            dx: half_width / m as f64,
        })
    }

    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        let axis = Grid1D::symmetric(half_width, dx)?;
        Self::new(half_width, axis.m)
    }

    /// Nodes per axis.
    pub fn side(&self) -> usize {
        2 * self.m + 1
    }

    pub fn len(&self) -> usize {
        self.side() * self.side()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.side() + i
    }

    /// The 1D grid along either axis.
    pub fn axis(&self) -> Grid1D {
        Grid1D {
            x_min: -self.half_width,
            x_max: self.half_width,
            m: self.m,
            dx: self.dx,
        }
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Field2D {
        let s = self.side();
        let mut values = Vec::with_capacity(s * s);
        for j in 0..s {
            for i in 0..s {
                values.push(f(self.coord(i), self.coord(j)));
            }
        }
        Field2D { side: s, values }
    }
}

/// Node values on a 1D grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn zeros(len: usize) -> Self {
        Field(vec![0.0; len])
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Field(vec![value; len])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `dx * sum(values)`.
    pub fn integral(&self, dx: f64) -> f64 {
        dx * self.0.iter().sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        max_abs_diff(&self.0, other)
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major node values on a square 2D grid (x index fastest).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Field2D {
    pub side: usize,
    pub values: Vec<f64>,
}

impl Field2D {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            values: vec![0.0; side * side],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.side + i]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.side..(j + 1) * self.side]
    }

    pub fn max_abs_diff(&self, other: &Field2D) -> f64 {
        max_abs_diff(&self.values, &other.values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_count() {
        let g = Grid1D::new(-5.0, 5.0, 320).unwrap();
        assert_eq!(g.len(), 641);
        assert_eq!(g.x(0), -5.0);
        let last = g.x(g.len() - 1);
        assert!((last - 5.0).abs() <= f64::EPSILON * 5.0, "{last}");
        assert!((g.dx - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn spacing_must_divide_extent() {
        assert!(Grid1D::with_spacing(-5.0, 5.0, 0.025).is_ok());
        assert!(Grid1D::with_spacing(-5.0, 5.0, 0.3).is_err());
        assert!(Grid1D::with_spacing(-5.0, 5.0, -0.1).is_err());
        assert!(Grid1D::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn grid2d_is_symmetric() {
        let g = Grid2D::with_spacing(8.0, 0.05).unwrap();
        assert_eq!(g.side(), 321);
        assert_eq!(g.coord(0), -8.0);
        assert!(g.coord(g.m).abs() < 1e-12);
        let f = g.sample(|x, y| x + 10.0 * y);
        assert_eq!(f.at(1, 0), g.coord(1) + 10.0 * g.coord(0));
    }
}
