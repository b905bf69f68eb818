//! Uniform cell-centred grids on the cube [-L, L]³ and the fields sampled on them.
//!
//! Samples are stored row-major with x₁ varying fastest: the cell `(i, j, k)`
//! lives at `i + n (j + n k)` and its centre is `(-L + (i + ½)h, …)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncation of the whole space to the centred cube [-L, L]³ with `n` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid3 {
    n: usize,
    half_width: f64,
}

impl Grid3 {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidPointCount(n));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidHalfWidth(half_width));
        }
        Ok(Self { n, half_width })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Quadrature weight of one cell, h³.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn volume(&self) -> f64 {
        (2.0 * self.half_width).powi(3)
    }

    /// Centre coordinate of cell `k` along any axis.
    #[inline]
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + (k as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx % n, (idx / n) % n, idx / (n * n)]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let [i, j, k] = self.unravel(idx);
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Index of the cell whose centre is nearest to `x` (clamped to the box).
    pub fn nearest(&self, x: [f64; 3]) -> [usize; 3] {
        let h = self.spacing();
        let clamp = |v: f64| {
            let k = ((v + self.half_width) / h - 0.5).round();
            k.clamp(0.0, (self.n - 1) as f64) as usize
        };
        [clamp(x[0]), clamp(x[1]), clamp(x[2])]
    }

    /// Distance (in cells) from cell `c` to the nearest box face.
    pub fn cells_to_boundary(&self, c: [usize; 3]) -> usize {
        c.iter().map(|&k| k.min(self.n - 1 - k)).min().unwrap_or(0)
    }
}

/// A real function sampled at the cell centres of a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    data: Vec<f64>,
}

impl ScalarField {
    /// Wraps raw samples; rejects a wrong sample count or non-finite values.
    pub fn new(grid: Grid3, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::SampleCount {
                expected: grid.len(),
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field samples"));
        }
        Ok(Self { grid, data })
    }

    pub(crate) fn from_raw(grid: Grid3, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), grid.len());
        Self { grid, data }
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::from_raw(grid, vec![0.0; grid.len()])
    }

    pub fn constant(grid: Grid3, value: f64) -> Self {
        Self::from_raw(grid, vec![value; grid.len()])
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> f64) -> Self {
        let data = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self::from_raw(grid, data)
    }

    #[inline]
    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.grid.index(i, j, k)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn ensure_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    pub fn same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Result<Self> {
        self.same_grid(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + c * b)
            .collect();
        Ok(Self::from_raw(self.grid, data))
    }

    pub(crate) fn axpy_in_place(&mut self, c: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.same_grid(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(Self::from_raw(self.grid, data))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Shifts samples by whole cells, filling vacated cells with zero.
    pub fn shifted(&self, by: [i64; 3]) -> Self {
        let g = self.grid;
        let n = g.n() as i64;
        let mut out = vec![0.0; g.len()];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let (si, sj, sk) = (i - by[0], j - by[1], k - by[2]);
                    if (0..n).contains(&si) && (0..n).contains(&sj) && (0..n).contains(&sk) {
                        out[g.index(i as usize, j as usize, k as usize)] =
                            self.data[g.index(si as usize, sj as usize, sk as usize)];
                    }
                }
            }
        }
        Self::from_raw(g, out)
    }
}

/// Three scalar components on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField3 {
    components: [ScalarField; 3],
}

impl VectorField3 {
    pub fn new(u1: ScalarField, u2: ScalarField, u3: ScalarField) -> Result<Self> {
        u1.same_grid(&u2)?;
        u1.same_grid(&u3)?;
        Ok(Self {
            components: [u1, u2, u3],
        })
    }

    pub(crate) fn from_components(components: [ScalarField; 3]) -> Self {
        Self { components }
    }

    pub fn zeros(grid: Grid3) -> Self {
        Self::from_components(std::array::from_fn(|_| ScalarField::zeros(grid)))
    }

    pub fn from_fn(grid: Grid3, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let mut data: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(grid.len()));
        for idx in 0..grid.len() {
            let v = f(grid.point(idx));
            for c in 0..3 {
                data[c].push(v[c]);
            }
        }
        Self::from_components(data.map(|d| ScalarField::from_raw(grid, d)))
    }

    #[inline]
    pub fn grid(&self) -> &Grid3 {
        self.components[0].grid()
    }

    #[inline]
    pub fn component(&self, c: usize) -> &ScalarField {
        &self.components[c]
    }

    pub fn components(&self) -> &[ScalarField; 3] {
        &self.components
    }

    pub fn into_components(self) -> [ScalarField; 3] {
        self.components
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }

    pub fn same_grid(&self, other: &VectorField3) -> Result<()> {
        self.components[0].same_grid(&other.components[0])
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self::from_components(std::array::from_fn(|c| f(&self.components[c])))
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map_components(|u| u.scaled(c))
    }

    pub fn add_scaled(&self, c: f64, other: &VectorField3) -> Result<Self> {
        self.same_grid(other)?;
        Ok(Self::from_components(std::array::from_fn(|i| {
            let mut out = self.components[i].clone();
            out.axpy_in_place(c, &other.components[i]);
            out
        })))
    }

    pub fn add(&self, other: &VectorField3) -> Result<Self> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &VectorField3) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let g = *self.grid();
        let [a, b, c] = &self.components;
        let data = (0..g.len())
            .map(|i| {
                let (x, y, z) = (a.samples()[i], b.samples()[i], c.samples()[i]);
                (x * x + y * y + z * z).sqrt()
            })
            .collect();
        ScalarField::from_raw(g, data)
    }

    pub fn shifted(&self, by: [i64; 3]) -> Self {
        self.map_components(|u| u.shifted(by))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = Grid3::new(8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.len(), 512);
        assert_eq!(g.coord(0), -3.5);
        let g = Grid3::new(64, 8.0).unwrap();
        assert_eq!(g.spacing(), 0.25);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        let err = Grid3::new(7, 4.0).unwrap_err();
        assert!(err.to_string().contains("n must be even ≥ 8"));
        assert!(Grid3::new(6, 4.0).is_err());
        assert_eq!(Grid3::new(8, 0.0), Err(Error::InvalidHalfWidth(0.0)));
        assert!(Grid3::new(8, -1.0).is_err());
        assert!(Grid3::new(8, f64::NAN).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid3::new(10, 1.0).unwrap();
        for idx in [0, 7, 123, 999] {
            let [i, j, k] = g.unravel(idx);
            assert_eq!(g.index(i, j, k), idx);
        }
        assert_eq!(g.index(1, 0, 0), 1);
        assert_eq!(g.index(0, 1, 0), 10);
    }

    #[test]
    fn field_validation() {
        let g = Grid3::new(8, 1.0).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 10]).is_err());
        let mut v = vec![0.0; 512];
        v[3] = f64::NAN;
        assert_eq!(ScalarField::new(g, v), Err(Error::NonFinite("field samples")));
    }

    #[test]
    fn mismatched_grids_do_not_combine() {
        let a = ScalarField::zeros(Grid3::new(8, 1.0).unwrap());
        let b = ScalarField::zeros(Grid3::new(8, 2.0).unwrap());
        assert_eq!(a.add(&b), Err(Error::GridMismatch));
        assert!(VectorField3::new(a.clone(), b, a).is_err());
    }

    #[test]
    fn shift_moves_samples() {
        let g = Grid3::new(8, 4.0).unwrap();
        let u = ScalarField::from_fn(g, |x| x[0]);
        let s = u.shifted([1, 0, 0]);
        assert_eq!(s.at(0, 2, 2), 0.0);
        assert_eq!(s.at(3, 2, 2), u.at(2, 2, 2));
    }
}
