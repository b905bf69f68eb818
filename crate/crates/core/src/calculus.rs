//! Quadrature, finite-difference derivatives and the norm diagnostics W, J_m, V, D_m.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VectorField3};

/// Midpoint-rule inner product h³ Σ U V.
pub fn integrate(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.same_grid(v)?;
    Ok(dot(u.samples(), v.samples()) * u.grid().cell_volume())
}

/// Midpoint-rule integral h³ Σ U.
pub fn integral(u: &ScalarField) -> f64 {
    u.samples().iter().sum::<f64>() * u.grid().cell_volume()
}

/// ∭ U² δx.
pub fn norm_sq(u: &ScalarField) -> f64 {
    dot(u.samples(), u.samples()) * u.grid().cell_volume()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_axis(axis: usize) -> Result<usize> {
    if (1..=3).contains(&axis) {
        Ok(axis - 1)
    } else {
        Err(Error::InvalidAxis(axis))
    }
}

/// Finite-difference derivative of order 1 or 2 along `axis` (1-based).
///
/// Interior cells use the centred three-point stencil; the two boundary cells of
/// every line use second-order one-sided stencils.
pub fn derive(u: &ScalarField, axis: usize, order: usize) -> Result<ScalarField> {
    let a = check_axis(axis)?;
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let g = *u.grid();
    let n = g.n();
    let h = g.spacing();
    let stride = n.pow(a as u32);
    let src = u.samples();
    let mut out = vec![0.0; g.len()];

    for base in line_starts(n, a) {
        let at = |k: usize| src[base + k * stride];
        let put = |out: &mut Vec<f64>, k: usize, v: f64| out[base + k * stride] = v;
        if order == 1 {
            let c = 0.5 / h;
            put(&mut out, 0, c * (-3.0 * at(0) + 4.0 * at(1) - at(2)));
            for k in 1..n - 1 {
                put(&mut out, k, c * (at(k + 1) - at(k - 1)));
            }
            put(
                &mut out,
                n - 1,
                c * (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)),
            );
        } else {
            let c = 1.0 / (h * h);
            put(
                &mut out,
                0,
                c * (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)),
            );
            for k in 1..n - 1 {
                put(&mut out, k, c * (at(k + 1) - 2.0 * at(k) + at(k - 1)));
            }
            put(
                &mut out,
                n - 1,
                c * (2.0 * at(n - 1) - 5.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)),
            );
        }
    }
    Ok(ScalarField::from_raw(g, out))
}

/// Flat index of the first cell of every grid line running along axis `a` (0-based).
pub(crate) fn line_starts(n: usize, a: usize) -> impl Iterator<Item = usize> {
    (0..n * n).map(move |m| {
        let (p, q) = (m % n, m / n);
        match a {
            0 => n * (p + n * q),
            1 => p + n * n * q,
            _ => p + n * q,
        }
    })
}

/// ∂²U/∂x_k∂x_l for 1-based axes; repeated axes use the second-order stencil.
pub fn derive2(u: &ScalarField, k: usize, l: usize) -> Result<ScalarField> {
    if k == l {
        derive(u, k, 2)
    } else {
        derive(&derive(u, k, 1)?, l, 1)
    }
}

pub fn gradient(u: &ScalarField) -> Result<VectorField3> {
    Ok(VectorField3::from_components([
        derive(u, 1, 1)?,
        derive(u, 2, 1)?,
        derive(u, 3, 1)?,
    ]))
}

/// Σ_j ∂u_j/∂x_j.
pub fn divergence(u: &VectorField3) -> ScalarField {
    let mut out = ScalarField::zeros(*u.grid());
    for j in 0..3 {
        // axis/order are valid by construction
        let d = derive(u.component(j), j + 1, 1).expect("valid axis");
        out.axpy_in_place(1.0, &d);
    }
    out
}

pub fn curl(a: &VectorField3) -> VectorField3 {
    let d = |c: usize, axis: usize| derive(a.component(c), axis, 1).expect("valid axis");
    let c1 = d(2, 2).sub(&d(1, 3)).expect("shared grid");
    let c2 = d(0, 3).sub(&d(2, 1)).expect("shared grid");
    let c3 = d(1, 1).sub(&d(0, 2)).expect("shared grid");
    VectorField3::from_components([c1, c2, c3])
}

/// Componentwise Laplacian Σ_k ∂²/∂x_k².
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(*u.grid());
    for k in 1..=3 {
        out.axpy_in_place(1.0, &derive(u, k, 2).expect("valid axis"));
    }
    out
}

pub fn vector_laplacian(u: &VectorField3) -> VectorField3 {
    u.map_components(laplacian)
}

/// Maximum over the grid of the pointwise magnitude.
pub trait SupNorm {
    fn sup_norm(&self) -> f64;
}

impl SupNorm for ScalarField {
    fn sup_norm(&self) -> f64 {
        self.max_abs()
    }
}

impl SupNorm for VectorField3 {
    fn sup_norm(&self) -> f64 {
        self.magnitude().max_abs()
    }
}

pub fn sup_norm<F: SupNorm + ?Sized>(u: &F) -> f64 {
    u.sup_norm()
}

/// W = ∭ u_i u_i δx.
pub fn energy(u: &VectorField3) -> f64 {
    u.components().iter().map(norm_sq).sum()
}

/// J_m: square root of the summed squared L² norms of all m-th derivatives of
/// all components (ordered index tuples, so mixed second derivatives count twice).
pub fn seminorm_jm(u: &VectorField3, m: usize) -> Result<f64> {
    let mut total = 0.0;
    match m {
        1 => {
            for c in u.components() {
                for k in 1..=3 {
                    total += norm_sq(&derive(c, k, 1)?);
                }
            }
        }
        2 => {
            for c in u.components() {
                for k in 1..=3 {
                    let dk = derive(c, k, 1)?;
                    for l in 1..=3 {
                        let d = if k == l { derive(c, k, 2)? } else { derive(&dk, l, 1)? };
                        total += norm_sq(&d);
                    }
                }
            }
        }
        _ => {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: format!("seminorm order must be 1 or 2, got {m}"),
            })
        }
    }
    Ok(total.sqrt())
}

/// D_m: maximum of |∂^m u_i| over all components and multi-indices of order m (m ≤ 2).
pub fn sup_derivative(u: &VectorField3, m: usize) -> Result<f64> {
    let mut best: f64 = 0.0;
    match m {
        0 => {
            for c in u.components() {
                best = best.max(c.max_abs());
            }
        }
        1 => {
            for c in u.components() {
                for k in 1..=3 {
                    best = best.max(derive(c, k, 1)?.max_abs());
                }
            }
        }
        2 => {
            for c in u.components() {
                for k in 1..=3 {
                    for l in k..=3 {
                        best = best.max(derive2(c, k, l)?.max_abs());
                    }
                }
            }
        }
        _ => return Err(Error::InvalidOrder(m)),
    }
    Ok(best)
}

/// One row of the time diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSample {
    pub t: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "J1")]
    pub j1: f64,
    #[serde(rename = "J2")]
    pub j2: f64,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
}

pub fn diagnostics(u: &VectorField3, t: f64) -> DiagnosticsSample {
    DiagnosticsSample {
        t,
        w: energy(u),
        j1: seminorm_jm(u, 1).expect("m = 1"),
        j2: seminorm_jm(u, 2).expect("m = 2"),
        v: u.sup_norm(),
        d1: sup_derivative(u, 1).expect("m = 1"),
    }
}
