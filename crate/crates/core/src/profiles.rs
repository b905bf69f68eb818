//! Analytic test fields: Gaussian bumps, seeded random mixtures, solenoidal
//! fields built as curls of Gaussian potentials, and a decaying swirl.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{Grid3, ScalarField, VectorField3};

/// a·exp(−|x − c|²/(2σ²))
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianBump {
    pub amplitude: f64,
    pub centre: [f64; 3],
    pub sigma: f64,
}

impl GaussianBump {
    pub fn new(amplitude: f64, centre: [f64; 3], sigma: f64) -> Self {
        Self {
            amplitude,
            centre,
            sigma,
        }
    }

    /// Unit-amplitude, unit-width bump at the origin.
    pub fn standard() -> Self {
        Self::new(1.0, [0.0; 3], 1.0)
    }

    fn offset(&self, x: [f64; 3]) -> [f64; 3] {
        [x[0] - self.centre[0], x[1] - self.centre[1], x[2] - self.centre[2]]
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        let d = self.offset(x);
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        self.amplitude * (-r2 / (2.0 * self.sigma * self.sigma)).exp()
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let d = self.offset(x);
        let v = self.value(x) / (self.sigma * self.sigma);
        [-d[0] * v, -d[1] * v, -d[2] * v]
    }

    /// Second derivatives ∂²/∂x_a∂x_b.
    pub fn hessian(&self, x: [f64; 3]) -> [[f64; 3]; 3] {
        let d = self.offset(x);
        let s2 = self.sigma * self.sigma;
        let v = self.value(x);
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let delta = if a == b { 1.0 } else { 0.0 };
                v * (d[a] * d[b] / s2 - delta) / s2
            })
        })
    }

    pub fn sample(&self, grid: Grid3) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.value(x))
    }

    pub fn sample_gradient(&self, grid: Grid3) -> VectorField3 {
        VectorField3::from_fn(grid, |x| self.gradient(x))
    }
}

/// Sum of Gaussian bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub bumps: Vec<GaussianBump>,
}

impl GaussianMixture {
    /// `count` bumps with amplitudes in [−1, 1], centres within `spread` of the
    /// origin per axis and widths in [0.6, 1.2]·`sigma`.
    pub fn random(seed: u64, count: usize, spread: f64, sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::random_with(&mut rng, count, spread, sigma)
    }

    pub fn random_with(rng: &mut impl Rng, count: usize, spread: f64, sigma: f64) -> Self {
        let bumps = (0..count)
            .map(|_| {
                let amplitude = rng.gen_range(-1.0..=1.0);
                let centre = std::array::from_fn(|_| rng.gen_range(-spread..=spread));
                let width = sigma * rng.gen_range(0.6..=1.2);
                GaussianBump::new(amplitude, centre, width)
            })
            .collect();
        Self { bumps }
    }

    pub fn value(&self, x: [f64; 3]) -> f64 {
        self.bumps.iter().map(|b| b.value(x)).sum()
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for b in &self.bumps {
            let d = b.gradient(x);
            for a in 0..3 {
                g[a] += d[a];
            }
        }
        g
    }

    pub fn sample(&self, grid: Grid3) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.value(x))
    }

    pub fn sample_gradient(&self, grid: Grid3) -> VectorField3 {
        VectorField3::from_fn(grid, |x| self.gradient(x))
    }

    /// Largest reach of any bump, |c|∞ + 6σ; fields decay below quadrature
    /// tolerance outside this half-width.
    pub fn reach(&self) -> f64 {
        self.bumps
            .iter()
            .map(|b| b.centre.iter().fold(0.0f64, |m, c| m.max(c.abs())) + 6.0 * b.sigma)
            .fold(0.0, f64::max)
    }
}

/// Divergence-free field u = ∇ × A with each A_k a Gaussian mixture,
/// evaluated analytically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurlField {
    pub potential: [GaussianMixture; 3],
}

impl CurlField {
    pub fn random(seed: u64, bumps_per_component: usize, spread: f64, sigma: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let potential = std::array::from_fn(|_| {
            GaussianMixture::random_with(&mut rng, bumps_per_component, spread, sigma)
        });
        Self { potential }
    }

    /// Single Gaussian potential (0, 0, ψ) giving the swirl (∂₂ψ, −∂₁ψ, 0).
    pub fn single(bump: GaussianBump) -> Self {
        let empty = GaussianMixture { bumps: vec![] };
        Self {
            potential: [
                empty.clone(),
                empty,
                GaussianMixture { bumps: vec![bump] },
            ],
        }
    }

    pub fn value(&self, x: [f64; 3]) -> [f64; 3] {
        let g: [[f64; 3]; 3] = std::array::from_fn(|k| self.potential[k].gradient(x));
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }

    pub fn sample(&self, grid: Grid3) -> VectorField3 {
        VectorField3::from_fn(grid, |x| self.value(x))
    }
}

/// The decaying swirl w = (−x₂ψ, x₁ψ, 0) with ψ = exp(−|x|²/2), which is
/// ∇ × (0, 0, −ψ) and hence solenoidal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Swirl;

impl Swirl {
    pub fn value(x: [f64; 3]) -> [f64; 3] {
        let psi = (-0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
        [-x[1] * psi, x[0] * psi, 0.0]
    }

    /// Δw = (r² − 5)·w.
    pub fn laplacian(x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let w = Self::value(x);
        [(r2 - 5.0) * w[0], (r2 - 5.0) * w[1], 0.0]
    }

    pub fn sample(grid: Grid3) -> VectorField3 {
        VectorField3::from_fn(grid, Self::value)
    }

    pub fn sample_laplacian(grid: Grid3) -> VectorField3 {
        VectorField3::from_fn(grid, Self::laplacian)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{derive, divergence, laplacian};

    #[test]
    fn bump_derivatives_match_differences() {
        let b = GaussianBump::new(0.7, [0.3, -0.2, 0.5], 0.9);
        let x = [0.1, 0.4, -0.3];
        let e = 1e-5;
        let g = b.gradient(x);
        let hs = b.hessian(x);
        for a in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[a] += e;
            xm[a] -= e;
            let fd = (b.value(xp) - b.value(xm)) / (2.0 * e);
            assert!((fd - g[a]).abs() < 1e-9);
            let gp = b.gradient(xp);
            let gm = b.gradient(xm);
            for c in 0..3 {
                assert!(((gp[c] - gm[c]) / (2.0 * e) - hs[a][c]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn random_mixtures_are_reproducible() {
        let a = GaussianMixture::random(7, 4, 1.0, 1.0);
        let b = GaussianMixture::random(7, 4, 1.0, 1.0);
        let c = GaussianMixture::random(8, 4, 1.0, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.reach() <= 1.0 + 7.2 + 1e-12);
    }

    #[test]
    fn curl_fields_are_solenoidal() {
        let f = CurlField::random(3, 2, 0.8, 1.0);
        let g = Grid3::new(48, 6.0).unwrap();
        let u = f.sample(g);
        let d = divergence(&u);
        let scale = derive(u.component(0), 2, 1).unwrap().max_abs();
        assert!(d.max_abs() < 0.05 * scale, "{} vs {}", d.max_abs(), scale);
    }

    #[test]
    fn swirl_laplacian_matches_stencil() {
        let g = Grid3::new(64, 6.0).unwrap();
        let w = Swirl::sample(g);
        let exact = Swirl::sample_laplacian(g);
        let fd = laplacian(w.component(0));
        let err = fd.sub(exact.component(0)).unwrap().max_abs();
        assert!(err < 0.05 * exact.component(0).max_abs(), "{err}");
    }
}
