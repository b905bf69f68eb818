//! The heat semigroup u′ = G(·, νt) ∗ u₀, G the Gaussian kernel
//! (4πνt)^{-3/2} e^{−r²/4νt}.

use crate::error::{Error, Result};
use crate::fft::{direct_convolve, Convolver, Spectrum};
use crate::grid::{Grid3, ScalarField, VectorField3};

use super::FluidParams;

/// Half-width of the truncated kernel in standard deviations.
pub const HEAT_TRUNCATION_SIGMAS: f64 = 6.0;

/// Sampled heat kernel for one value of νt, normalized to unit discrete mass.
pub(crate) struct HeatKernel {
    conv: Convolver,
    spec: Spectrum,
}

fn support(grid: &Grid3, nu_t: f64) -> usize {
    let sigma = (2.0 * nu_t).sqrt();
    ((HEAT_TRUNCATION_SIGMAS * sigma / grid.spacing()).ceil() as usize).min(grid.n() - 1)
}

/// Normalized weights as a closure over integer offsets.
fn weights(grid: &Grid3, nu_t: f64) -> (usize, impl Fn([i64; 3]) -> f64) {
    let s = support(grid, nu_t);
    let h = grid.spacing();
    let a = h * h / (4.0 * nu_t);
    // separable: the 3-D mass is the cube of the 1-D mass
    let line: f64 = (-(s as i64)..=s as i64)
        .map(|d| (-a * (d * d) as f64).exp())
        .sum();
    let norm = 1.0 / line.powi(3);
    (s, move |d: [i64; 3]| {
        norm * (-a * (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).exp()
    })
}

impl HeatKernel {
    pub(crate) fn new(grid: Grid3, nu_t: f64) -> Self {
        let (s, w) = weights(&grid, nu_t);
        let conv = Convolver::new(grid, s);
        let spec = conv.kernel_spectrum(s, w);
        Self { conv, spec }
    }

    pub(crate) fn apply(&self, u: &VectorField3) -> VectorField3 {
        let [a, b, c] = u.components();
        let (a, b) = self.conv.convolve_pair(&self.spec, a, b);
        let c = self.conv.convolve(&self.spec, c);
        VectorField3::from_components([a, b, c])
    }
}

fn checked_nu_t(grid: &Grid3, params: &FluidParams, t: f64) -> Result<Option<f64>> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("time must be finite and ≥ 0, got {t}"),
        });
    }
    if t == 0.0 {
        return Ok(None);
    }
    let nu_t = params.nu() * t;
    let width = (2.0 * nu_t).sqrt();
    if width < grid.spacing() {
        return Err(Error::UnderResolved {
            width,
            spacing: grid.spacing(),
        });
    }
    Ok(Some(nu_t))
}

/// Componentwise Gaussian smoothing; t = 0 returns `u0` unchanged.
pub fn heat_propagate(u0: &VectorField3, params: &FluidParams, t: f64) -> Result<VectorField3> {
    match checked_nu_t(u0.grid(), params, t)? {
        None => Ok(u0.clone()),
        Some(nu_t) => Ok(HeatKernel::new(*u0.grid(), nu_t).apply(u0)),
    }
}

/// Direct-sum reference for [`heat_propagate`]; meant for grids up to 24³.
pub fn heat_propagate_direct(
    u0: &VectorField3,
    params: &FluidParams,
    t: f64,
) -> Result<VectorField3> {
    match checked_nu_t(u0.grid(), params, t)? {
        None => Ok(u0.clone()),
        Some(nu_t) => {
            let (s, w) = weights(u0.grid(), nu_t);
            Ok(u0.map_components(|c| direct_convolve(c, s, &w)))
        }
    }
}

/// Scalar version used for single fields.
pub fn heat_propagate_scalar(u0: &ScalarField, params: &FluidParams, t: f64) -> Result<ScalarField> {
    let g = *u0.grid();
    let v = VectorField3::from_components([u0.clone(), ScalarField::zeros(g), ScalarField::zeros(g)]);
    Ok(heat_propagate(&v, params, t)?.into_components()[0].clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{divergence, sup_norm};
    use crate::profiles::CurlField;

    fn params() -> FluidParams {
        FluidParams::new(1.0, 1.0).unwrap()
    }

    fn gaussian(g: Grid3, s2: f64) -> VectorField3 {
        VectorField3::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            let v = (-r2 / (2.0 * s2)).exp();
            [v, 0.5 * v, 0.0]
        })
    }

    #[test]
    fn closed_form_spread() {
        let g = Grid3::new(64, 8.0).unwrap();
        let u = heat_propagate(&gaussian(g, 1.0), &params(), 0.5).unwrap();
        let exact = ScalarField::from_fn(g, |x| {
            let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
            (-r2 / (2.0 * 2.0)).exp() * (1.0f64 / 2.0).powf(1.5)
        });
        let err = u.component(0).sub(&exact).unwrap().max_abs() / exact.max_abs();
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn edge_cases() {
        let g = Grid3::new(16, 4.0).unwrap();
        let u = gaussian(g, 1.0);
        assert_eq!(heat_propagate(&u, &params(), 0.0).unwrap(), u);
        let z = VectorField3::zeros(g);
        assert_eq!(heat_propagate(&z, &params(), 0.3).unwrap().component(0).max_abs(), 0.0);
        assert!(matches!(
            heat_propagate(&u, &params(), 0.01),
            Err(Error::UnderResolved { .. })
        ));
        assert!(heat_propagate(&u, &params(), -1.0).is_err());
        let c = VectorField3::from_fn(g, |_| [2.0, 2.0, 2.0]);
        let out = heat_propagate(&c, &params(), 0.15).unwrap();
        // the truncated kernel around cell 8 stays inside the box
        let mid = g.index(8, 8, 8);
        assert!((out.component(1).samples()[mid] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn fft_matches_direct() {
        let g = Grid3::new(16, 4.0).unwrap();
        let u = gaussian(g, 0.8);
        let a = heat_propagate(&u, &params(), 0.4).unwrap();
        let b = heat_propagate_direct(&u, &params(), 0.4).unwrap();
        assert!(a.sub(&b).unwrap().magnitude().max_abs() < 1e-12);
    }

    #[test]
    fn semigroup_and_monotone() {
        let g = Grid3::new(48, 8.0).unwrap();
        let p = params();
        let u0 = gaussian(g, 1.0);
        let two = heat_propagate(&heat_propagate(&u0, &p, 0.3).unwrap(), &p, 0.5).unwrap();
        let one = heat_propagate(&u0, &p, 0.8).unwrap();
        assert!(two.sub(&one).unwrap().magnitude().max_abs() < 1e-6 * sup_norm(&one));
        assert!(sup_norm(&one) <= sup_norm(&u0) * (1.0 + 1e-12));
    }

    #[test]
    fn divergence_preserved() {
        let g = Grid3::new(32, 6.0).unwrap();
        let u0 = CurlField::random(4, 1, 1.0, 1.0).sample(g);
        let u = heat_propagate(&u0, &params(), 0.3).unwrap();
        let d0 = divergence(&u0).max_abs();
        let d = divergence(&u).max_abs();
        assert!(d <= d0 * 1.001 + 1e-14, "{d} {d0}");
    }
}
