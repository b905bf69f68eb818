//! Solution operators for the linearized system
//! ∂u/∂t = νΔu − ∇p/ρ + X, ∇·u = 0 on the whole space: the heat semigroup for
//! the initial data, the Oseen-tensor Duhamel integral for the forcing, and
//! their superposition.

mod heat;
mod oseen;
mod pressure;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::VerificationReport;
use crate::calculus::{divergence, gradient, norm_sq, sup_derivative, vector_laplacian};
use crate::error::{Error, Result};
use crate::grid::{Grid3, ScalarField, VectorField3};
use crate::lerf::{self, FieldData, LerfError};

pub use heat::{heat_propagate, heat_propagate_direct, heat_propagate_scalar, HEAT_TRUNCATION_SIGMAS};
pub use oseen::{
    duhamel_rule, forced_response, forced_response_projected, oseen_tensor_batch,
    oseen_tensor_eval, DuhamelRule, OseenBatch, DUHAMEL_POINTS, DUHAMEL_RATIO,
};
pub use pressure::{leray_project, pressure_field, pressure_field_direct};

/// Kinematic viscosity ν and density ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    nu: f64,
    rho: f64,
}

impl FluidParams {
    pub fn new(nu: f64, rho: f64) -> Result<Self> {
        for (name, v) in [("nu", nu), ("rho", rho)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, got {v}"),
                });
            }
        }
        Ok(Self { nu, rho })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Velocity and pressure at time t.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: VectorField3,
    pub p: ScalarField,
}

impl FlowState {
    pub fn new(t: f64, u: VectorField3, p: ScalarField) -> Result<Self> {
        u.component(0).same_grid(&p)?;
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidTimes);
        }
        Ok(Self { t, u, p })
    }

    pub fn grid(&self) -> &Grid3 {
        self.u.grid()
    }
}

/// External force X(x, t) given by snapshots, linear in t between them.
/// A single snapshot means a force constant in time.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingField {
    times: Vec<f64>,
    snapshots: Vec<VectorField3>,
}

impl ForcingField {
    pub fn new(times: Vec<f64>, snapshots: Vec<VectorField3>) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Empty("forcing"));
        }
        if times.len() != snapshots.len() {
            return Err(Error::SampleCount {
                expected: snapshots.len(),
                got: times.len(),
            });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTimes);
        }
        for s in &snapshots {
            s.same_grid(&snapshots[0])?;
            if !s.is_finite() {
                return Err(Error::NonFinite("forcing"));
            }
        }
        Ok(Self { times, snapshots })
    }

    pub fn constant(x: VectorField3) -> Self {
        Self {
            times: vec![0.0],
            snapshots: vec![x],
        }
    }

    pub fn zero(grid: Grid3) -> Self {
        Self::constant(VectorField3::zeros(grid))
    }

    /// Samples `f(x, t)` at the given times.
    pub fn from_fn(grid: Grid3, times: Vec<f64>, f: impl Fn([f64; 3], f64) -> [f64; 3]) -> Result<Self> {
        let snaps = times
            .iter()
            .map(|&t| VectorField3::from_fn(grid, |x| f(x, t)))
            .collect();
        Self::new(times, snaps)
    }

    pub fn grid(&self) -> &Grid3 {
        self.snapshots[0].grid()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn snapshots(&self) -> &[VectorField3] {
        &self.snapshots
    }

    pub fn is_zero(&self) -> bool {
        self.snapshots
            .iter()
            .all(|s| s.components().iter().all(|c| c.max_abs() == 0.0))
    }

    /// (lower snapshot, upper snapshot, weight of the upper one) at time `t`.
    pub(crate) fn bracket(&self, t: f64) -> Result<(usize, usize, f64)> {
        if self.times.len() == 1 {
            return Ok((0, 0, 0.0));
        }
        let first = self.times[0];
        let last = *self.times.last().expect("nonempty");
        let slack = 1e-12 * (last - first);
        if !(t >= first - slack && t <= last + slack) {
            return Err(Error::ForcingOutOfRange(t));
        }
        let t = t.clamp(first, last);
        let k = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1);
        let (a, b) = (self.times[k - 1], self.times[k]);
        Ok((k - 1, k, (t - a) / (b - a)))
    }

    pub fn at(&self, t: f64) -> Result<VectorField3> {
        let (a, b, theta) = self.bracket(t)?;
        if a == b || theta == 0.0 {
            return Ok(self.snapshots[a].clone());
        }
        if theta == 1.0 {
            return Ok(self.snapshots[b].clone());
        }
        self.snapshots[a].scaled(1.0 - theta).add_scaled(theta, &self.snapshots[b])
    }

    /// √(∭ X_i X_i δx) at time `t`.
    pub fn norm(&self, t: f64) -> Result<f64> {
        let x = self.at(t)?;
        Ok(x.components().iter().map(norm_sq).sum::<f64>().sqrt())
    }
}

/// Largest admissible sup|∇·u₀| relative to D₁(u₀).
pub const SOLENOIDAL_RTOL: f64 = 0.1;

fn relative_divergence(u: &VectorField3) -> f64 {
    let d1 = sup_derivative(u, 1).expect("m = 1");
    let div = divergence(u).max_abs();
    if d1 > 0.0 {
        div / d1
    } else {
        0.0
    }
}

/// u = heat_propagate(u₀) + forced_response(X), p = pressure_field(X(t)) at each time.
pub fn solve_linearized(
    u0: &VectorField3,
    x: &ForcingField,
    params: &FluidParams,
    times: &[f64],
) -> Result<Vec<FlowState>> {
    u0.same_grid(&x.snapshots()[0])?;
    if times.is_empty() {
        return Err(Error::Empty("times"));
    }
    if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidTimes);
    }
    let rel = relative_divergence(u0);
    if rel > SOLENOIDAL_RTOL {
        return Err(Error::NotSolenoidal(rel));
    }
    let g = *u0.grid();
    let unforced = x.is_zero();
    times
        .iter()
        .map(|&t| {
            let mut u = heat_propagate(u0, params, t)?;
            let p = if unforced {
                ScalarField::zeros(g)
            } else {
                u = u.add(&forced_response(x, params, t)?)?;
                pressure_field(&x.at(t)?, params)?
            };
            FlowState::new(t, u, p)
        })
        .collect()
}

/// Default relative tolerance of [`residual_check`].
pub const RESIDUAL_RTOL: f64 = 0.05;

/// Residual of ν∆u − ∂u/∂t − ∇p/ρ + X between two states, evaluated at the
/// midpoint: spatial terms on the averaged state, ∂u/∂t by the difference
/// quotient, `x_mid` the forcing at the mid time.
pub fn residual_check(
    state: &FlowState,
    prev: &FlowState,
    x_mid: &VectorField3,
    params: &FluidParams,
) -> Result<VerificationReport> {
    residual_check_with_tolerance(state, prev, x_mid, params, RESIDUAL_RTOL)
}

pub fn residual_check_with_tolerance(
    state: &FlowState,
    prev: &FlowState,
    x_mid: &VectorField3,
    params: &FluidParams,
    rtol: f64,
) -> Result<VerificationReport> {
    let dt = state.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!("states must be in increasing time order (Δt = {dt})"),
        });
    }
    state.u.same_grid(&prev.u)?;
    state.u.same_grid(x_mid)?;
    let ubar = state.u.add(&prev.u)?.scaled(0.5);
    let pbar = state.p.add(&prev.p)?.scaled(0.5);
    let visc = vector_laplacian(&ubar).scaled(params.nu());
    let dudt = state.u.sub(&prev.u)?.scaled(1.0 / dt);
    let gradp = gradient(&pbar)?.scaled(1.0 / params.rho());
    let r = visc.sub(&dudt)?.sub(&gradp)?.add(x_mid)?;

    let l2 = |v: &VectorField3| v.components().iter().map(norm_sq).sum::<f64>().sqrt();
    let res_l2 = l2(&r);
    let res_max = r.magnitude().max_abs();
    let scale = l2(&visc) + l2(&dudt) + l2(&gradp) + l2(x_mid);
    let rel = if scale > 0.0 { res_l2 / scale } else { 0.0 };
    Ok(VerificationReport::with_tolerance("linearized_residual", rel, rtol, 0.0)
        .with_meta("residual_l2", res_l2)
        .with_meta("residual_max", res_max)
        .with_meta("scale_l2", scale)
        .with_meta("dt", dt)
        .with_meta("t", state.t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

impl From<&Grid3> for GridInfo {
    fn from(g: &Grid3) -> Self {
        Self {
            n: g.n(),
            half_width: g.half_width(),
        }
    }
}

/// Manifest written next to the per-time LERF files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateManifest {
    pub times: Vec<f64>,
    pub nu: f64,
    pub rho: f64,
    pub grid: GridInfo,
}

const COMPONENTS: [&str; 4] = ["u1", "u2", "u3", "p"];

fn component_file(name: &str, k: usize) -> String {
    format!("{name}_{k:04}.lerf")
}

/// Writes one LERF file per component (u1, u2, u3, p) per time and `manifest.json`.
pub fn write_states(dir: &Path, states: &[FlowState], params: &FluidParams) -> std::result::Result<(), LerfError> {
    fs::create_dir_all(dir)?;
    for (k, s) in states.iter().enumerate() {
        let fields = [s.u.component(0), s.u.component(1), s.u.component(2), &s.p];
        for (name, f) in COMPONENTS.iter().zip(fields) {
            lerf::write_field(dir.join(component_file(name, k)), &FieldData::Scalar(f.clone()))?;
        }
    }
    let grid = states
        .first()
        .map(|s| GridInfo::from(s.grid()))
        .unwrap_or(GridInfo { n: 0, half_width: 0.0 });
    let manifest = StateManifest {
        times: states.iter().map(|s| s.t).collect(),
        nu: params.nu(),
        rho: params.rho(),
        grid,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

/// Reads back a directory produced by [`write_states`].
pub fn read_states(dir: &Path) -> std::result::Result<(StateManifest, Vec<FlowState>), LerfError> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: StateManifest = serde_json::from_str(&text)
        .map_err(|e| LerfError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    let mut states = Vec::with_capacity(manifest.times.len());
    for (k, &t) in manifest.times.iter().enumerate() {
        let mut parts = Vec::with_capacity(4);
        for name in COMPONENTS {
            match lerf::read_field(dir.join(component_file(name, k)))? {
                FieldData::Scalar(s) => parts.push(s),
                FieldData::Vector(_) => return Err(LerfError::ComponentCount(3)),
            }
        }
        let p = parts.pop().expect("4 parts");
        let u3 = parts.pop().expect("4 parts");
        let u2 = parts.pop().expect("4 parts");
        let u1 = parts.pop().expect("4 parts");
        let u = VectorField3::new(u1, u2, u3)?;
        states.push(FlowState::new(t, u, p)?);
    }
    Ok((manifest, states))
}
