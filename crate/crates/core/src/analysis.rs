//! Numerical certificates for the integral inequalities and identities used in
//! the existence theory: Schwarz, Minkowski in time, Young-type convolution
//! bounds, strong and weak convergence probes, the representation formula, the
//! Hardy inequality and quasi-derivative residuals.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::calculus::{derive, integral, integrate, norm_sq};
use crate::error::{Error, Result};
use crate::fft::Convolver;
use crate::grid::{ScalarField, VectorField3};
use crate::profiles::GaussianBump;
use crate::singular::{centred_table, corner_inv_r2_table, SingularKernel};

/// Relative slack allowed on inequality checks.
pub const INEQUALITY_RTOL: f64 = 1e-12;

/// Outcome of one check: pass ⇔ lhs ≤ rhs + tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
    pub metadata: BTreeMap<String, Value>,
}

impl VerificationReport {
    /// lhs ≤ rhs with an explicit absolute tolerance.
    pub fn with_tolerance(name: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("tolerance".to_string(), Value::from(tolerance));
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            pass: lhs <= rhs + tolerance,
            metadata,
        }
    }

    /// lhs ≤ rhs up to 1e−12·max(|lhs|, |rhs|).
    pub fn inequality(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let tol = INEQUALITY_RTOL * lhs.abs().max(rhs.abs());
        Self::with_tolerance(name, lhs, rhs, tol)
    }

    /// An identity residual compared against its tolerance (lhs = |residual|, rhs = tolerance).
    pub fn identity(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let mut r = Self::with_tolerance(name, residual.abs(), tolerance, 0.0);
        r.metadata.insert("residual".into(), Value::from(residual));
        r
    }

    pub fn tolerance(&self) -> f64 {
        self.metadata
            .get("tolerance")
            .and_then(Value::as_f64)
            .unwrap_or(0.0)
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// (∭UV)² ≤ ∭U²·∭V².
pub fn schwarz_check(u: &ScalarField, v: &ScalarField) -> Result<VerificationReport> {
    let uv = integrate(u, v)?;
    Ok(VerificationReport::inequality("schwarz", uv * uv, norm_sq(u) * norm_sq(v)))
}

/// Trapezoid weights for the nodes `times`.
pub fn trapezoid_weights(times: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; times.len()];
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        w[k - 1] += 0.5 * dt;
        w[k] += 0.5 * dt;
    }
    w
}

pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    trapezoid_weights(times)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidTimes);
    }
    Ok(())
}

/// ‖∫V dt′‖ ≤ ∫‖V‖ dt′ with trapezoid weights on the supplied nodes.
pub fn time_minkowski_check(times: &[f64], family: &[ScalarField]) -> Result<VerificationReport> {
    if family.is_empty() {
        return Err(Error::Empty("time family"));
    }
    if times.len() != family.len() {
        return Err(Error::SampleCount {
            expected: family.len(),
            got: times.len(),
        });
    }
    check_times(times)?;
    let w = trapezoid_weights(times);
    let mut acc = ScalarField::zeros(*family[0].grid());
    let mut rhs = 0.0;
    for (f, wk) in family.iter().zip(&w) {
        acc.same_grid(f)?;
        acc.axpy_in_place(*wk, f);
        rhs += wk * norm_sq(f).sqrt();
    }
    Ok(VerificationReport::inequality("time_minkowski", norm_sq(&acc).sqrt(), rhs)
        .with_meta("nodes", times.len()))
}

/// ‖H ∗ U‖² ≤ (∭|H|)²·∭U² for a radial profile H(r) sampled on all cell offsets of the box.
pub fn convolution_bound_check(
    profile: impl Fn(f64) -> f64,
    u: &ScalarField,
) -> Result<VerificationReport> {
    let g = *u.grid();
    let h = g.spacing();
    let s = g.n() - 1;
    let si = s as i64;
    let weight = |d: [i64; 3]| {
        let r = ((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) as f64).sqrt() * h;
        profile(r) * g.cell_volume()
    };
    let mut mass = 0.0;
    for a in -si..=si {
        for b in -si..=si {
            for c in -si..=si {
                let w = weight([a, b, c]);
                if !w.is_finite() {
                    return Err(Error::NonFinite("convolution kernel"));
                }
                mass += w.abs();
            }
        }
    }
    let conv = Convolver::new(g, s);
    let spec = conv.kernel_spectrum(s, weight);
    let hu = conv.convolve(&spec, u);
    Ok(
        VerificationReport::inequality("convolution_bound", norm_sq(&hu), mass * mass * norm_sq(u))
            .with_meta("kernel_l1", mass),
    )
}

/// ∭ (U* − U)² δx.
pub fn strong_mean_distance(u_star: &ScalarField, u: &ScalarField) -> Result<f64> {
    Ok(norm_sq(&u_star.sub(u)?))
}

/// One member U*_n of a probe family.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceProbe {
    pub label: String,
    pub index: usize,
    pub field: ScalarField,
}

impl SequenceProbe {
    pub fn new(label: impl Into<String>, index: usize, field: ScalarField) -> Self {
        Self {
            label: label.into(),
            index,
            field,
        }
    }
}

/// Pairings ∭U*_n A with the norms ∭U*_n² that bound the family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingSequence {
    pub indices: Vec<usize>,
    pub pairings: Vec<f64>,
    pub norms_sq: Vec<f64>,
}

impl PairingSequence {
    /// sup_n ∭U*_n², the boundedness half of the weak-convergence criterion.
    pub fn norm_bound(&self) -> f64 {
        self.norms_sq.iter().cloned().fold(0.0, f64::max)
    }

    /// Least-squares slope of log|pairing| against log n.
    pub fn loglog_slope(&self) -> Result<f64> {
        let x: Vec<f64> = self.indices.iter().map(|&n| n as f64).collect();
        let y: Vec<f64> = self.pairings.iter().map(|p| p.abs()).collect();
        loglog_slope(&x, &y)
    }
}

fn check_family(family: &[SequenceProbe]) -> Result<()> {
    if family.windows(2).any(|w| w[1].index <= w[0].index) {
        return Err(Error::InvalidParameter {
            name: "family",
            reason: "probe indices must be strictly increasing".into(),
        });
    }
    Ok(())
}

pub fn weak_pairing_probe(family: &[SequenceProbe], a: &ScalarField) -> Result<PairingSequence> {
    check_family(family)?;
    let mut out = PairingSequence {
        indices: Vec::with_capacity(family.len()),
        pairings: Vec::with_capacity(family.len()),
        norms_sq: Vec::with_capacity(family.len()),
    };
    for p in family {
        out.indices.push(p.index);
        out.pairings.push(integrate(&p.field, a)?);
        out.norms_sq.push(norm_sq(&p.field));
    }
    Ok(out)
}

/// ∭U² ≤ min over the tail of ∭U*_n² (the tail is the last half of the family).
pub fn lower_semicontinuity_check(
    family: &[SequenceProbe],
    u: &ScalarField,
) -> Result<VerificationReport> {
    if family.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: family.len(),
        });
    }
    check_family(family)?;
    let tail = &family[family.len() / 2..];
    let mut rhs = f64::INFINITY;
    for p in tail {
        p.field.same_grid(u)?;
        rhs = rhs.min(norm_sq(&p.field));
    }
    Ok(VerificationReport::inequality("lower_semicontinuity", norm_sq(u), rhs)
        .with_meta("tail_len", tail.len()))
}

/// Least-squares slope of ln y on ln x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::SampleCount {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Degenerate("log-log regression needs positive finite data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("log-log regression needs distinct abscissae"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Default reconstruction tolerance: relative L² error ≤ 0.15·h.
pub const RECONSTRUCTION_TOL_PER_H: f64 = 0.15;

/// Rebuilds u = (1/4π) Σ_i ∂(1/r)/∂y_i ∗ ∂u/∂y_i over the whole box.
pub fn representation_reconstruct(u: &ScalarField) -> Result<(ScalarField, VerificationReport)> {
    u.ensure_finite("u")?;
    let g = *u.grid();
    let h = g.spacing();
    let s = g.n() - 1;
    let conv = Convolver::new(g, s);
    let vol = g.cell_volume();
    let t: [_; 3] = std::array::from_fn(|a| centred_table(SingularKernel::GradInvR(a)));
    let (k0, k1) = conv.kernel_pair_spectrum(s, |d| (t[0].cell_value(d, h) * vol, t[1].cell_value(d, h) * vol));
    let k2 = conv.kernel_spectrum(s, |d| t[2].cell_value(d, h) * vol);
    let d: [ScalarField; 3] = std::array::from_fn(|a| derive(u, a + 1, 1).expect("valid axis"));
    let (f0, f1) = conv.field_pair_spectrum(&d[0], &d[1]);
    let f2 = conv.field_spectrum(&d[2]);
    let c = 1.0 / (4.0 * PI);
    let spec: Vec<_> = (0..f0.len())
        .map(|i| (k0[i] * f0[i] + k1[i] * f1[i] + k2[i] * f2[i]) * c)
        .collect();
    let rec = conv.to_field(spec);

    let norm = norm_sq(u).sqrt();
    let err = norm_sq(&rec.sub(u)?).sqrt();
    let rel = if norm > 0.0 { err / norm } else { err };
    let tol = RECONSTRUCTION_TOL_PER_H * h;
    let report = VerificationReport::with_tolerance("representation", rel, tol, 0.0)
        .with_meta("relative_l2_error", rel)
        .with_meta("n", g.n())
        .with_meta("L", g.half_width());
    Ok((rec, report))
}

/// ∭u²/r² ≤ 4∭|∇u|² with r measured from the origin (a cell corner).
pub fn hardy_check(u: &ScalarField) -> Result<VerificationReport> {
    let g = *u.grid();
    let n = g.n();
    let h = g.spacing();
    let table = corner_inv_r2_table();
    let half = (n / 2) as i64;
    let mut lhs = 0.0;
    for (idx, v) in u.samples().iter().enumerate() {
        if *v == 0.0 {
            continue;
        }
        let [i, j, k] = g.unravel(idx);
        let d = [i as i64 - half, j as i64 - half, k as i64 - half];
        lhs += v * v * table.cell_value(d, h);
    }
    lhs *= g.cell_volume();
    let mut grad = 0.0;
    for a in 1..=3 {
        grad += norm_sq(&derive(u, a, 1)?);
    }
    Ok(VerificationReport::inequality("hardy", lhs, 4.0 * grad).with_meta("ratio", if grad > 0.0 { lhs / (4.0 * grad) } else { 0.0 }))
}

/// ∭ [U ∂a/∂y_i + U_i a] δy with ∂a by finite differences.
pub fn quasi_derivative_residual(
    u: &ScalarField,
    u_i: &ScalarField,
    axis: usize,
    a: &ScalarField,
) -> Result<f64> {
    u.same_grid(u_i)?;
    u.same_grid(a)?;
    let da = derive(a, axis, 1)?;
    Ok(integrate(u, &da)? + integrate(u_i, a)?)
}

/// As [`quasi_derivative_residual`] but with the test function's exact gradient.
pub fn quasi_derivative_residual_exact(
    u: &ScalarField,
    u_i: &ScalarField,
    axis: usize,
    a: &GaussianBump,
) -> Result<f64> {
    u.same_grid(u_i)?;
    if !(1..=3).contains(&axis) {
        return Err(Error::InvalidAxis(axis));
    }
    let g = *u.grid();
    let av = a.sample(g);
    let da = ScalarField::from_fn(g, |x| a.gradient(x)[axis - 1]);
    Ok(integrate(u, &da)? + integrate(u_i, &av)?)
}

/// ∭ [Θ a + U_i ∂a/∂y_i] δy with ∂a by finite differences.
pub fn quasi_divergence_residual(
    u: &VectorField3,
    theta: &ScalarField,
    a: &ScalarField,
) -> Result<f64> {
    theta.same_grid(a)?;
    theta.same_grid(u.component(0))?;
    let mut r = integrate(theta, a)?;
    for i in 0..3 {
        r += integrate(u.component(i), &derive(a, i + 1, 1)?)?;
    }
    Ok(r)
}

/// As [`quasi_divergence_residual`] with the exact gradient of the test function.
pub fn quasi_divergence_residual_exact(
    u: &VectorField3,
    theta: &ScalarField,
    a: &GaussianBump,
) -> Result<f64> {
    theta.same_grid(u.component(0))?;
    let g = *theta.grid();
    let mut r = integrate(theta, &a.sample(g))?;
    let da = a.sample_gradient(g);
    for i in 0..3 {
        r += integrate(u.component(i), da.component(i))?;
    }
    Ok(r)
}

/// ∭ a, the residual expected when the claimed derivative is off by one.
pub fn test_function_mass(a: &ScalarField) -> f64 {
    integral(a)
}

/// C in |residual| ≈ C·h^order, estimated from a coarse/fine pair; returns
/// (C_coarse, C_fine).
pub fn refinement_constants(coarse: (f64, f64), fine: (f64, f64), order: i32) -> (f64, f64) {
    (
        coarse.1.abs() / coarse.0.powi(order),
        fine.1.abs() / fine.0.powi(order),
    )
}
