//! Pressure p″ = −(ρ/4π) ∂_j ∭ X_j(y)/|x − y| δy and the Leray projection
//! PX = X − ∇p″/ρ it induces.

use std::f64::consts::PI;

use crate::calculus::{derive, gradient};
use crate::error::Result;
use crate::fft::{direct_convolve, Convolver};
use crate::grid::{ScalarField, VectorField3};
use crate::singular::{centred_table, SingularKernel};

use super::FluidParams;

/// Newtonian potentials N_j = (1/r) ∗ X_j over the whole box.
fn potentials(x: &VectorField3, direct: bool) -> [ScalarField; 3] {
    let g = *x.grid();
    let h = g.spacing();
    let vol = g.cell_volume();
    let s = g.n() - 1;
    let table = centred_table(SingularKernel::InvR);
    let w = |d: [i64; 3]| table.cell_value(d, h) * vol;
    let [a, b, c] = x.components();
    if direct {
        return [direct_convolve(a, s, w), direct_convolve(b, s, w), direct_convolve(c, s, w)];
    }
    let conv = Convolver::new(g, s);
    let spec = conv.kernel_spectrum(s, w);
    let (na, nb) = conv.convolve_pair(&spec, a, b);
    [na, nb, conv.convolve(&spec, c)]
}

fn kinematic(x: &VectorField3, direct: bool) -> Result<ScalarField> {
    for c in x.components() {
        c.ensure_finite("forcing")?;
    }
    let n = potentials(x, direct);
    let mut q = ScalarField::zeros(*x.grid());
    for (j, nj) in n.iter().enumerate() {
        q.axpy_in_place(-1.0 / (4.0 * PI), &derive(nj, j + 1, 1)?);
    }
    Ok(q)
}

/// p″ for the forcing snapshot `x_t`.
pub fn pressure_field(x_t: &VectorField3, params: &FluidParams) -> Result<ScalarField> {
    Ok(kinematic(x_t, false)?.scaled(params.rho()))
}

/// Direct-sum reference for [`pressure_field`]; meant for grids up to 24³.
pub fn pressure_field_direct(x_t: &VectorField3, params: &FluidParams) -> Result<ScalarField> {
    Ok(kinematic(x_t, true)?.scaled(params.rho()))
}

/// Solenoidal part X − ∇p″/ρ.
pub fn leray_project(x: &VectorField3) -> Result<VectorField3> {
    let q = kinematic(x, false)?;
    x.sub(&gradient(&q)?)
}
