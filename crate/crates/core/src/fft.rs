//! Zero-padded FFT convolution on cell-centred grids.
//!
//! A kernel with offsets in [-s, s]³ (in cells) convolved with an n³ field needs
//! a periodic box of at least n + s cells per axis for the n³ outputs to be free
//! of wrap-around. Kernel values are supplied already multiplied by the cell
//! volume, so a spectrum product followed by [`Convolver::to_field`] evaluates
//! h³ Σ_y K(x − y) U(y).

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid3, ScalarField};

pub type Spectrum = Vec<Complex64>;

/// Smallest 2^a 3^b 5^c that is ≥ `m`.
pub fn fast_size(m: usize) -> usize {
    let mut k = m.max(1);
    loop {
        let mut r = k;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

pub struct Convolver {
    grid: Grid3,
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    /// Plans transforms for kernels whose half-width is at most `support` cells.
    pub fn new(grid: Grid3, support: usize) -> Self {
        let support = support.min(grid.n() - 1);
        let size = fast_size(grid.n() + support);
        let mut planner = FftPlanner::new();
        Self {
            grid,
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    fn wrap(&self, d: i64) -> usize {
        d.rem_euclid(self.size as i64) as usize
    }

    /// Spectrum of a real kernel sampled at integer cell offsets |d|∞ ≤ support.
    pub fn kernel_spectrum(&self, support: usize, f: impl Fn([i64; 3]) -> f64) -> Spectrum {
        self.kernel_pair_spectrum(support, |d| (f(d), 0.0)).0
    }

    /// Spectra of two real kernels computed with a single complex transform.
    pub fn kernel_pair_spectrum(
        &self,
        support: usize,
        f: impl Fn([i64; 3]) -> (f64, f64),
    ) -> (Spectrum, Spectrum) {
        let s = support.min(self.grid.n() - 1) as i64;
        let m = self.size;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
        for dz in -s..=s {
            for dy in -s..=s {
                for dx in -s..=s {
                    let (a, b) = f([dx, dy, dz]);
                    let idx = self.wrap(dx) + m * (self.wrap(dy) + m * self.wrap(dz));
                    buf[idx] = Complex64::new(a, b);
                }
            }
        }
        self.transform(&mut buf, false);
        self.split_real_pair(&buf)
    }

    /// Separates Z = F(a + i b) into F(a) and F(b) for real a, b.
    fn split_real_pair(&self, z: &[Complex64]) -> (Spectrum, Spectrum) {
        let m = self.size;
        let neg = |k: usize| (m - k) % m;
        let mut fa = vec![Complex64::new(0.0, 0.0); z.len()];
        let mut fb = vec![Complex64::new(0.0, 0.0); z.len()];
        for kz in 0..m {
            for ky in 0..m {
                for kx in 0..m {
                    let i = kx + m * (ky + m * kz);
                    let j = neg(kx) + m * (neg(ky) + m * neg(kz));
                    let zc = z[j].conj();
                    fa[i] = (z[i] + zc) * 0.5;
                    fb[i] = (z[i] - zc) * Complex64::new(0.0, -0.5);
                }
            }
        }
        (fa, fb)
    }

    fn embed(&self, a: &ScalarField, b: Option<&ScalarField>) -> Spectrum {
        let n = self.grid.n();
        let m = self.size;
        let mut buf = vec![Complex64::new(0.0, 0.0); m * m * m];
        for k in 0..n {
            for j in 0..n {
                let src = n * (j + n * k);
                let dst = m * (j + m * k);
                for i in 0..n {
                    let im = b.map_or(0.0, |b| b.samples()[src + i]);
                    buf[dst + i] = Complex64::new(a.samples()[src + i], im);
                }
            }
        }
        buf
    }

    pub fn field_spectrum(&self, u: &ScalarField) -> Spectrum {
        debug_assert_eq!(u.grid(), &self.grid);
        let mut buf = self.embed(u, None);
        self.transform(&mut buf, false);
        buf
    }

    pub fn field_pair_spectrum(&self, a: &ScalarField, b: &ScalarField) -> (Spectrum, Spectrum) {
        let mut buf = self.embed(a, Some(b));
        self.transform(&mut buf, false);
        self.split_real_pair(&buf)
    }

    /// Convolves one field with one kernel.
    pub fn convolve(&self, kernel: &[Complex64], u: &ScalarField) -> ScalarField {
        let mut buf = self.embed(u, None);
        self.transform(&mut buf, false);
        multiply(&mut buf, kernel);
        self.to_field_pair(buf).0
    }

    /// Convolves two fields with the same real kernel in one transform pair.
    pub fn convolve_pair(
        &self,
        kernel: &[Complex64],
        a: &ScalarField,
        b: &ScalarField,
    ) -> (ScalarField, ScalarField) {
        let mut buf = self.embed(a, Some(b));
        self.transform(&mut buf, false);
        multiply(&mut buf, kernel);
        self.to_field_pair(buf)
    }

    /// Inverse transform of a spectrum; returns (real part, imaginary part) restricted to the grid.
    pub fn to_field_pair(&self, mut buf: Spectrum) -> (ScalarField, ScalarField) {
        self.transform(&mut buf, true);
        let n = self.grid.n();
        let m = self.size;
        let scale = 1.0 / (m * m * m) as f64;
        let mut re = Vec::with_capacity(n * n * n);
        let mut im = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                let row = m * (j + m * k);
                for c in &buf[row..row + n] {
                    re.push(c.re * scale);
                    im.push(c.im * scale);
                }
            }
        }
        (
            ScalarField::from_raw(self.grid, re),
            ScalarField::from_raw(self.grid, im),
        )
    }

    pub fn to_field(&self, buf: Spectrum) -> ScalarField {
        self.to_field_pair(buf).0
    }

    /// In-place 3-D transform along all three axes.
    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let m = self.size;
        let plan = if inverse { &self.inverse } else { &self.forward };
        let plane = m * m;

        // axis 1: contiguous lines
        buf.par_chunks_mut(plane).for_each(|chunk| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            plan.process_with_scratch(chunk, &mut scratch);
        });

        // axis 2: lines inside one z-plane, stride m
        buf.par_chunks_mut(plane).for_each(|chunk| {
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let mut lines = vec![Complex64::new(0.0, 0.0); plane];
            for i in 0..m {
                for j in 0..m {
                    lines[i * m + j] = chunk[i + m * j];
                }
            }
            plan.process_with_scratch(&mut lines, &mut scratch);
            for i in 0..m {
                for j in 0..m {
                    chunk[i + m * j] = lines[i * m + j];
                }
            }
        });

        // axis 3: lines across planes, gathered per y-row
        let src: &[Complex64] = buf;
        let rows: Vec<Vec<Complex64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
                let mut lines = vec![Complex64::new(0.0, 0.0); plane];
                for i in 0..m {
                    for k in 0..m {
                        lines[i * m + k] = src[i + m * (j + m * k)];
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                lines
            })
            .collect();
        for (j, lines) in rows.into_iter().enumerate() {
            for i in 0..m {
                for k in 0..m {
                    buf[i + m * (j + m * k)] = lines[i * m + k];
                }
            }
        }
    }
}

pub fn multiply(buf: &mut [Complex64], kernel: &[Complex64]) {
    for (a, k) in buf.iter_mut().zip(kernel) {
        *a *= k;
    }
}

/// h³ Σ_y K(x − y) U(y) by brute force; `kernel` receives integer offsets x − y.
/// Reference path for small grids.
pub fn direct_convolve(u: &ScalarField, support: usize, kernel: impl Fn([i64; 3]) -> f64) -> ScalarField {
    let g = *u.grid();
    let n = g.n() as i64;
    let s = support.min(g.n() - 1) as i64;
    let mut out = vec![0.0; g.len()];
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for qz in (z - s).max(0)..=(z + s).min(n - 1) {
                    for qy in (y - s).max(0)..=(y + s).min(n - 1) {
                        for qx in (x - s).max(0)..=(x + s).min(n - 1) {
                            let v = u.samples()[g.index(qx as usize, qy as usize, qz as usize)];
                            if v != 0.0 {
                                acc += kernel([x - qx, y - qy, z - qz]) * v;
                            }
                        }
                    }
                }
                out[g.index(x as usize, y as usize, z as usize)] = acc;
            }
        }
    }
    ScalarField::from_raw(g, out)
}
