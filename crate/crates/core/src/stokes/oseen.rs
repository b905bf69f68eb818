//! The Oseen tensor T_ij(x, τ) = δ_ij G + ∂_i∂_j Ψ and the Duhamel integral
//! u″(t) = ∫₀ᵗ T(·, τ) ∗ X(·, t − τ) dτ.
//!
//! G = (4πντ)^{-3/2} e^{−r²/4ντ} is the heat kernel and Ψ = C·Φ with
//! Φ(r) = (1/r) ∫₀^r e^{−α²/4ντ} dα and C = 1/(4π^{3/2}√(ντ)), so that Ψ is the
//! Newtonian potential of G and T is the heat kernel composed with the
//! projection onto solenoidal fields.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::calculus::vector_laplacian;
use crate::error::{Error, Result};
use crate::fft::{Convolver, Spectrum};
use crate::grid::{Grid3, VectorField3};
use crate::quadrature::{adaptive, gauss_legendre};

use super::heat::HeatKernel;
use super::pressure::leray_project;
use super::{FluidParams, ForcingField};

/// Below this value of r²/4ντ the radial derivatives come from the power series of Φ.
const SERIES_LIMIT: f64 = 1.0;
const SERIES_TERMS: usize = 40;

/// Radial description of T at one (r, τ): T_ij = diag·δ_ij + outer·z_i z_j.
#[derive(Debug, Clone, Copy)]
struct Radial {
    diag: f64,
    outer: f64,
}

struct OseenProfile {
    c: f64,
    heat_norm: f64,
    psi_scale: f64,
}

impl OseenProfile {
    fn new(nu_tau: f64) -> Self {
        let c = 4.0 * nu_tau;
        Self {
            c,
            heat_norm: (PI * c).powf(-1.5),
            psi_scale: 1.0 / (4.0 * PI.powf(1.5) * nu_tau.sqrt()),
        }
    }

    /// Φ = f(x) with x = r²/c; returns (f′, f″) from the series Σ (−x)^k/(k!(2k+1)).
    fn series(x: f64) -> (f64, f64) {
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        // a_k x^{k−1} and a_k x^{k−2} built incrementally
        let mut fact = 1.0;
        for k in 1..SERIES_TERMS {
            fact *= k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let a = sign / (fact * (2 * k + 1) as f64);
            d1 += k as f64 * a * x.powi(k as i32 - 1);
            if k >= 2 {
                d2 += (k * (k - 1)) as f64 * a * x.powi(k as i32 - 2);
            }
        }
        (d1, d2)
    }

    /// ∫₀^r e^{−α²/c} dα by adaptive quadrature.
    fn primitive(&self, r: f64) -> f64 {
        let c = self.c;
        adaptive(|a| (-a * a / c).exp(), 0.0, r, 1e-300, 1e-14)
    }

    fn radial(&self, r: f64) -> Radial {
        let c = self.c;
        let x = r * r / c;
        let (a, b) = if x < SERIES_LIMIT {
            let (d1, d2) = Self::series(x);
            (2.0 * d1 / c, 4.0 * d2 / (c * c))
        } else {
            let e = (-x).exp();
            let f = self.primitive(r);
            let d1 = e / r - f / (r * r);
            let d2 = -2.0 * e / c - 2.0 * e / (r * r) + 2.0 * f / (r * r * r);
            let a = d1 / r;
            (a, (d2 - a) / (r * r))
        };
        Radial {
            diag: self.heat_norm * (-x).exp() + self.psi_scale * a,
            outer: self.psi_scale * b,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: format!("time lag must be positive and finite, got {tau}"),
        });
    }
    Ok(())
}

fn tensor(rad: Radial, z: [f64; 3]) -> [[f64; 3]; 3] {
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let d = if i == j { rad.diag } else { 0.0 };
            d + rad.outer * z[i] * z[j]
        })
    })
}

/// T_ij(dx, τ). The singular point dx = 0 is rejected.
pub fn oseen_tensor_eval(dx: [f64; 3], tau: f64, params: &FluidParams) -> Result<[[f64; 3]; 3]> {
    check_tau(tau)?;
    let r = (dx[0] * dx[0] + dx[1] * dx[1] + dx[2] * dx[2]).sqrt();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter {
            name: "dx",
            reason: "displacement must be nonzero and finite".into(),
        });
    }
    let prof = OseenProfile::new(params.nu() * tau);
    Ok(tensor(prof.radial(r), dx))
}

/// Tensors for a batch of displacements plus the smallest A with
/// |T_ij| ≤ A/(r² + ντ)^{3/2} over the batch.
#[derive(Debug, Clone, PartialEq)]
pub struct OseenBatch {
    pub tensors: Vec<[[f64; 3]; 3]>,
    pub decay_constant: f64,
}

pub fn oseen_tensor_batch(points: &[[f64; 3]], tau: f64, params: &FluidParams) -> Result<OseenBatch> {
    let mut tensors = Vec::with_capacity(points.len());
    let mut a: f64 = 0.0;
    for p in points {
        let t = oseen_tensor_eval(*p, tau, params)?;
        let r2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let w = (r2 + params.nu() * tau).powf(1.5);
        for row in &t {
            for v in row {
                a = a.max(v.abs() * w);
            }
        }
        tensors.push(t);
    }
    Ok(OseenBatch {
        tensors,
        decay_constant: a,
    })
}

/// Cell weights h³·T_ij(d h, τ) on all offsets of the box, in the order
/// (00, 11, 22, 01, 02, 12); the offset 0 takes the limit (2/3)G(0)δ_ij.
fn kernel_spectra(conv: &Convolver, tau: f64, params: &FluidParams) -> [Spectrum; 6] {
    let g = conv.grid();
    let h = g.spacing();
    let vol = g.cell_volume();
    let s = g.n() - 1;
    let prof = OseenProfile::new(params.nu() * tau);
    let qmax = 3 * s * s;
    let table: Vec<Radial> = (0..=qmax)
        .map(|q| {
            if q == 0 {
                Radial {
                    diag: 2.0 / 3.0 * prof.heat_norm,
                    outer: 0.0,
                }
            } else {
                prof.radial((q as f64).sqrt() * h)
            }
        })
        .collect();
    let entry = |d: [i64; 3], i: usize, j: usize| {
        let q = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as usize;
        let rad = table[q];
        let z = [d[0] as f64 * h, d[1] as f64 * h, d[2] as f64 * h];
        let diag = if i == j { rad.diag } else { 0.0 };
        (diag + rad.outer * z[i] * z[j]) * vol
    };
    let (t00, t11) = conv.kernel_pair_spectrum(s, |d| (entry(d, 0, 0), entry(d, 1, 1)));
    let (t22, t01) = conv.kernel_pair_spectrum(s, |d| (entry(d, 2, 2), entry(d, 0, 1)));
    let (t02, t12) = conv.kernel_pair_spectrum(s, |d| (entry(d, 0, 2), entry(d, 1, 2)));
    [t00, t11, t22, t01, t02, t12]
}

/// Nodes and weights of the lag quadrature plus the length of the final
/// subinterval [0, τ_floor) that is handled by the identity-action rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelRule {
    pub nodes: Vec<(f64, f64)>,
    pub floor: f64,
}

/// Geometric ratio between consecutive lag subintervals.
pub const DUHAMEL_RATIO: f64 = 0.5;
pub const DUHAMEL_POINTS: usize = 3;

/// Lag subintervals [t q^{k+1}, t q^k] while the lower end stays above the
/// resolution floor h²/2ν (heat-kernel width equal to the spacing).
pub fn duhamel_rule(grid: &Grid3, params: &FluidParams, t: f64) -> DuhamelRule {
    let tau_floor = grid.spacing().powi(2) / (2.0 * params.nu());
    let (x, w) = gauss_legendre(DUHAMEL_POINTS);
    let mut nodes = Vec::new();
    let mut hi = t;
    while hi * DUHAMEL_RATIO >= tau_floor {
        let lo = hi * DUHAMEL_RATIO;
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push((c + r * xi, r * wi));
        }
        hi = lo;
    }
    DuhamelRule { nodes, floor: hi }
}

fn check_forced(x: &ForcingField, t: f64) -> Result<bool> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("time must be finite and ≥ 0, got {t}"),
        });
    }
    x.at(0.0)?;
    x.at(t)?;
    Ok(t == 0.0 || x.is_zero())
}

/// Contribution of the last lag subinterval [0, τ_f]: T acts as P there, and
/// ∫₀^{τ_f} e^{ντΔ} dτ ≈ τ_f + ντ_f²Δ/2 with PX taken at t − τ_f/2.
fn floor_term(x: &ForcingField, params: &FluidParams, t: f64, floor: f64) -> Result<VectorField3> {
    let px = leray_project(&x.at(t - 0.5 * floor)?)?;
    let lap = vector_laplacian(&px);
    px.scaled(floor)
        .add_scaled(0.5 * params.nu() * floor * floor, &lap)
}

/// Duhamel integral with the Oseen tensor sampled on the grid.
pub fn forced_response(x: &ForcingField, params: &FluidParams, t: f64) -> Result<VectorField3> {
    let g = *x.grid();
    if check_forced(x, t)? {
        return Ok(VectorField3::zeros(g));
    }
    let rule = duhamel_rule(&g, params, t);
    let conv = Convolver::new(g, g.n() - 1);
    let snap: Vec<[Spectrum; 3]> = x
        .snapshots()
        .iter()
        .map(|s| {
            let [a, b, c] = s.components();
            let (fa, fb) = conv.field_pair_spectrum(a, b);
            [fa, fb, conv.field_spectrum(c)]
        })
        .collect();
    let len = conv.size().pow(3);
    let zero = Complex64::new(0.0, 0.0);
    let mut acc = [vec![zero; len], vec![zero; len], vec![zero; len]];
    for &(tau, w) in &rule.nodes {
        let k = kernel_spectra(&conv, tau, params);
        let (ia, ib, theta) = x.bracket(t - tau)?;
        let xs = |j: usize, m: usize| {
            if ib == ia {
                snap[ia][j][m]
            } else {
                snap[ia][j][m] * (1.0 - theta) + snap[ib][j][m] * theta
            }
        };
        for m in 0..len {
            let (x0, x1, x2) = (xs(0, m), xs(1, m), xs(2, m));
            acc[0][m] += (k[0][m] * x0 + k[3][m] * x1 + k[4][m] * x2) * w;
            acc[1][m] += (k[3][m] * x0 + k[1][m] * x1 + k[5][m] * x2) * w;
            acc[2][m] += (k[4][m] * x0 + k[5][m] * x1 + k[2][m] * x2) * w;
        }
    }
    let [a0, a1, a2] = acc;
    let packed: Spectrum = a0
        .iter()
        .zip(&a1)
        .map(|(p, q)| p + q * Complex64::new(0.0, 1.0))
        .collect();
    let (u0, u1) = conv.to_field_pair(packed);
    let u2 = conv.to_field(a2);
    let u = VectorField3::from_components([u0, u1, u2]);
    u.add(&floor_term(x, params, t, rule.floor)?)
}

/// The same Duhamel integral evaluated as ∫ G(τ) ∗ P X(t − τ) dτ: heat kernel
/// applied to the projected forcing. Independent of the sampled Oseen tensor.
pub fn forced_response_projected(
    x: &ForcingField,
    params: &FluidParams,
    t: f64,
) -> Result<VectorField3> {
    let g = *x.grid();
    if check_forced(x, t)? {
        return Ok(VectorField3::zeros(g));
    }
    let rule = duhamel_rule(&g, params, t);
    let projected = x
        .snapshots()
        .iter()
        .map(leray_project)
        .collect::<Result<Vec<_>>>()?;
    let mut u = floor_term(x, params, t, rule.floor)?;
    for &(tau, w) in &rule.nodes {
        let (ia, ib, theta) = x.bracket(t - tau)?;
        let px = if ia == ib {
            projected[ia].clone()
        } else {
            projected[ia]
                .scaled(1.0 - theta)
                .add_scaled(theta, &projected[ib])?
        };
        let heat = HeatKernel::new(g, params.nu() * tau).apply(&px);
        u = u.add_scaled(w, &heat)?;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::loglog_slope;
    use crate::profiles::{CurlField, Swirl};

    fn params() -> FluidParams {
        FluidParams::new(0.7, 1.0).unwrap()
    }

    #[test]
    fn symmetric_and_rejects_singular_point() {
        let t = oseen_tensor_eval([0.3, -0.4, 1.1], 0.2, &params()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t[i][j], t[j][i]);
            }
        }
        assert!(oseen_tensor_eval([0.0; 3], 0.2, &params()).is_err());
        assert!(oseen_tensor_eval([1.0, 0.0, 0.0], 0.0, &params()).is_err());
    }

    #[test]
    fn series_and_quadrature_branches_agree() {
        let p = OseenProfile::new(0.25);
        // x = r²/c = 1 at r = 1
        let below = p.radial(1.0 - 1e-9);
        let above = p.radial(1.0 + 1e-9);
        assert!((below.diag - above.diag).abs() < 1e-7 * below.diag.abs());
        assert!((below.outer - above.outer).abs() < 1e-7 * below.outer.abs());
    }

    #[test]
    fn hessian_matches_finite_differences() {
        // Ψ = erf(r/√c)/(4πr): compare ∂²Ψ against differences of Ψ computed by quadrature
        let nu_tau = 0.3;
        let prof = OseenProfile::new(nu_tau);
        let psi = |z: [f64; 3]| {
            let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
            prof.psi_scale * prof.primitive(r) / r
        };
        let heat = |z: [f64; 3]| {
            let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
            prof.heat_norm * (-r2 / prof.c).exp()
        };
        let e = 1e-3;
        for z in [[0.3f64, 0.2, -0.1], [1.2, -0.7, 0.5], [2.5, 0.1, 0.0]] {
            let t = tensor(prof.radial((z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()), z);
            for i in 0..3 {
                for j in 0..3 {
                    let shift = |si: f64, sj: f64| {
                        let mut y = z;
                        y[i] += si * e;
                        y[j] += sj * e;
                        psi(y)
                    };
                    let fd = (shift(1.0, 1.0) - shift(1.0, -1.0) - shift(-1.0, 1.0) + shift(-1.0, -1.0))
                        / (4.0 * e * e);
                    let d = if i == j { heat(z) } else { 0.0 };
                    assert!((t[i][j] - d - fd).abs() < 1e-5, "{z:?} {i}{j}");
                }
            }
        }
    }

    #[test]
    fn far_field_decay() {
        let p = params();
        let rs = [4.0, 8.0, 16.0, 32.0];
        let mags: Vec<f64> = rs
            .iter()
            .map(|&r| {
                let t = oseen_tensor_eval([r * 0.6, r * 0.8, 0.0], 0.1, &p).unwrap();
                t.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        let slope = loglog_slope(&rs, &mags).unwrap();
        assert!((slope + 3.0).abs() < 0.2, "{slope}");
        let pts: Vec<[f64; 3]> = rs.iter().map(|&r| [r, 0.0, 0.0]).collect();
        let b = oseen_tensor_batch(&pts, 0.1, &p).unwrap();
        assert!(b.decay_constant.is_finite() && b.decay_constant > 0.0);
    }

    #[test]
    fn rule_covers_the_lag_interval() {
        let g = Grid3::new(32, 5.0).unwrap();
        let p = FluidParams::new(1.0, 1.0).unwrap();
        let r = duhamel_rule(&g, &p, 1.0);
        let total: f64 = r.nodes.iter().map(|n| n.1).sum::<f64>() + r.floor;
        assert!((total - 1.0).abs() < 1e-14);
        let floor = g.spacing().powi(2) / 2.0;
        assert!(r.floor < 2.0 * floor && r.floor >= floor);
        let tiny = duhamel_rule(&g, &p, 0.01);
        assert!(tiny.nodes.is_empty() && tiny.floor == 0.01);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let g = Grid3::new(16, 4.0).unwrap();
        let x = ForcingField::constant(VectorField3::zeros(g));
        let u = forced_response(&x, &params(), 0.5).unwrap();
        assert_eq!(u.magnitude().max_abs(), 0.0);
    }

    #[test]
    fn small_time_error_is_first_order() {
        // wide field so that νt|k|² is small
        let g = Grid3::new(32, 10.0).unwrap();
        let p = FluidParams::new(1.0, 1.0).unwrap();
        let f = CurlField::single(crate::profiles::GaussianBump::new(1.0, [0.0; 3], 2.0)).sample(g);
        let x = ForcingField::constant(f.clone());
        let rel = |t: f64| {
            let u = forced_response(&x, &p, t).unwrap();
            let err = u.sub(&f.scaled(t)).unwrap();
            crate::calculus::energy(&err).sqrt() / (t * crate::calculus::energy(&f).sqrt())
        };
        let (a, b) = (rel(0.2), rel(0.1));
        assert!(b < 0.2 && (1.6..2.4).contains(&(a / b)), "{a} {b}");
    }

    #[test]
    fn oseen_route_matches_projected_route() {
        let g = Grid3::new(24, 5.0).unwrap();
        let p = FluidParams::new(1.0, 1.0).unwrap();
        let w = Swirl::sample(g);
        let x = ForcingField::new(vec![0.0, 1.0], vec![w.clone(), w.scaled(0.5)]).unwrap();
        let a = forced_response(&x, &p, 0.6).unwrap();
        let b = forced_response_projected(&x, &p, 0.6).unwrap();
        let rel = crate::calculus::energy(&a.sub(&b).unwrap()).sqrt() / crate::calculus::energy(&b).sqrt();
        assert!(rel < 0.01, "{rel}");
    }

    #[test]
    fn gradient_forcing_is_annihilated() {
        let g = Grid3::new(32, 6.0).unwrap();
        let p = FluidParams::new(1.0, 1.0).unwrap();
        let x = crate::profiles::GaussianBump::new(1.0, [0.4, 0.0, 0.0], 1.0).sample_gradient(g);
        let u = forced_response(&ForcingField::constant(x.clone()), &p, 0.5).unwrap();
        let rel = crate::calculus::energy(&u).sqrt() / (0.5 * crate::calculus::energy(&x).sqrt());
        assert!(rel < 0.03, "{rel}");
    }
}
