//! Batch experiments: a JSON configuration, four fixed pipelines and the files
//! they write (LERF states, diagnostics CSV, report JSON).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::analysis::{hardy_check, representation_reconstruct, VerificationReport};
use crate::calculus::norm_sq;
use crate::energy::{
    bound_suite, continuity_probe, diagnostics_series_forced, energy_balance_residual, energy_inequality_check,
    DiagnosticsSeries,
};
use crate::error::Error;
use crate::grid::{Grid3, ScalarField, VectorField3};
use crate::lerf::LerfError;
use crate::mollifier::mollifier_study;
use crate::profiles::{CurlField, GaussianBump, Swirl};
use crate::stokes::{
    read_states, residual_check, solve_linearized, write_states, FlowState, FluidParams, ForcingField, GridInfo,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub nu: f64,
    #[serde(default = "one")]
    pub rho: f64,
}

/// `count` equispaced samples from `start` to `end` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

fn one() -> f64 {
    1.0
}

fn default_bumps() -> usize {
    2
}

/// Initial velocity generators; all are divergence-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    /// a·w(x/ℓ) with w = (−x₂, x₁, 0)e^{−|x|²/2}.
    GaussianSwirl {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Curl of a seeded random Gaussian-mixture potential.
    RandomCurl {
        seed: u64,
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default = "one")]
        spread: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    #[default]
    None,
    /// X = a[w(x/ℓ) − (νt/ℓ²)∆w(x/ℓ)], for which u = heat part + t·a·w(x/ℓ) and p = 0.
    ManufacturedSwirl {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Time-constant curl of a seeded random mixture.
    RandomCurl {
        seed: u64,
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default = "one")]
        spread: f64,
        #[serde(default = "one")]
        sigma: f64,
    },
    /// Time-constant ∇(a e^{−|x|²/2σ²}); balanced entirely by pressure.
    Gradient {
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    EnergyBalance,
    EnergyInequality,
    Bounds,
    Residual,
    Continuity,
    Hardy,
    Representation,
    /// Negative control: the residual check on a deliberately corrupted state. Fails by design.
    CorruptedState,
}

impl FromStr for CheckName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(Value::String(s.replace('-', "_"))).map_err(|_| format!("unknown check {s:?}"))
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub params: ParamSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    pub times: TimeSpec,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub checks: Vec<CheckName>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("config error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Numerics(#[from] Error),
    #[error(transparent)]
    Field(#[from] LerfError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn bad(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn positive(field: &str, v: f64) -> Result<(), ExperimentError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, format!("must be positive and finite, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(|e| bad("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.grid.n < 8 || self.grid.n % 2 != 0 {
            return Err(bad("grid.n", format!("must be even and ≥ 8, got {}", self.grid.n)));
        }
        positive("grid.L", self.grid.half_width)?;
        positive("params.nu", self.params.nu)?;
        positive("params.rho", self.params.rho)?;
        let t = &self.times;
        if !(t.start >= 0.0 && t.start.is_finite()) {
            return Err(bad("times.start", format!("must be finite and ≥ 0, got {}", t.start)));
        }
        if !(t.end > t.start && t.end.is_finite()) {
            return Err(bad("times.end", format!("must exceed times.start, got {}", t.end)));
        }
        if t.count < 2 {
            return Err(bad("times.count", format!("must be ≥ 2, got {}", t.count)));
        }
        for (i, e) in self.epsilons.iter().enumerate() {
            positive(&format!("epsilons[{i}]"), *e)?;
        }
        match &self.initial {
            InitialSpec::Zero => {}
            InitialSpec::GaussianSwirl { scale, amplitude } => {
                positive("initial.scale", *scale)?;
                finite("initial.amplitude", *amplitude)?;
            }
            InitialSpec::RandomCurl { bumps, spread, sigma, .. } => {
                mixture("initial", *bumps, *spread, *sigma)?;
            }
        }
        match &self.forcing {
            ForcingSpec::None => {}
            ForcingSpec::ManufacturedSwirl { scale, amplitude } | ForcingSpec::Gradient { sigma: scale, amplitude } => {
                positive("forcing.scale", *scale)?;
                finite("forcing.amplitude", *amplitude)?;
            }
            ForcingSpec::RandomCurl { bumps, spread, sigma, .. } => {
                mixture("forcing", *bumps, *spread, *sigma)?;
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid3, ExperimentError> {
        Grid3::new(self.grid.n, self.grid.half_width).map_err(|e| bad("grid", e.to_string()))
    }

    pub fn fluid(&self) -> Result<FluidParams, ExperimentError> {
        FluidParams::new(self.params.nu, self.params.rho).map_err(|e| bad("params", e.to_string()))
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let t = &self.times;
        let dt = (t.end - t.start) / (t.count - 1) as f64;
        (0..t.count)
            .map(|k| if k + 1 == t.count { t.end } else { t.start + k as f64 * dt })
            .collect()
    }

    /// Point values of the initial-condition generator.
    pub fn initial_profile(&self) -> Box<dyn Fn([f64; 3]) -> [f64; 3]> {
        match self.initial.clone() {
            InitialSpec::Zero => Box::new(|_| [0.0; 3]),
            InitialSpec::GaussianSwirl { scale: l, amplitude: a } => {
                Box::new(move |x| Swirl::value([x[0] / l, x[1] / l, x[2] / l]).map(|v| a * v))
            }
            InitialSpec::RandomCurl {
                seed,
                bumps,
                spread,
                sigma,
            } => {
                let f = CurlField::random(seed, bumps, spread, sigma);
                Box::new(move |x| f.value(x))
            }
        }
    }

    pub fn initial_field(&self, g: Grid3) -> VectorField3 {
        VectorField3::from_fn(g, self.initial_profile())
    }

    pub fn forcing_field(&self, g: Grid3) -> Result<ForcingField, ExperimentError> {
        let nu = self.params.nu;
        Ok(match &self.forcing {
            ForcingSpec::None => ForcingField::zero(g),
            ForcingSpec::ManufacturedSwirl { scale, amplitude } => {
                let (l, a) = (*scale, *amplitude);
                ForcingField::from_fn(g, vec![0.0, self.times.end], |x, t| {
                    let y = [x[0] / l, x[1] / l, x[2] / l];
                    let (w, lw) = (Swirl::value(y), Swirl::laplacian(y));
                    [0, 1, 2].map(|i| a * (w[i] - nu * t / (l * l) * lw[i]))
                })?
            }
            ForcingSpec::RandomCurl {
                seed,
                bumps,
                spread,
                sigma,
            } => ForcingField::constant(CurlField::random(*seed, *bumps, *spread, *sigma).sample(g)),
            ForcingSpec::Gradient { sigma, amplitude } => {
                ForcingField::constant(GaussianBump::new(*amplitude, [0.0; 3], *sigma).sample_gradient(g))
            }
        })
    }

    /// The configuration as echoed in reports: the output directory is left out
    /// so reruns into different directories compare equal.
    fn echo(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Value::Object(m) = &mut v {
            m.remove("output");
        }
        v
    }
}

fn finite(field: &str, v: f64) -> Result<(), ExperimentError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(field, "must be finite"))
    }
}

fn mixture(prefix: &str, bumps: usize, spread: f64, sigma: f64) -> Result<(), ExperimentError> {
    if bumps == 0 {
        return Err(bad(&format!("{prefix}.bumps"), "must be ≥ 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(bad(&format!("{prefix}.spread"), "must be finite and ≥ 0"));
    }
    positive(&format!("{prefix}.sigma"), sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    Solve,
    Verify,
    MollifyStudy,
    ConvergenceStudy,
}

impl Pipeline {
    fn name(self) -> &'static str {
        match self {
            Pipeline::Solve => "solve",
            Pipeline::Verify => "verify",
            Pipeline::MollifyStudy => "mollify-study",
            Pipeline::ConvergenceStudy => "convergence-study",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub pass: bool,
    pub reports: Vec<VerificationReport>,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> u8 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

impl ExperimentError {
    /// All errors are configuration-level (exit 2); check failures are not errors.
    pub fn exit_code(&self) -> u8 {
        2
    }
}

const DEFAULT_CHECKS: [CheckName; 2] = [CheckName::EnergyBalance, CheckName::EnergyInequality];

pub fn run_experiment(pipeline: Pipeline, config: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let out = &config.output;
    fs::create_dir_all(out)?;
    let (reports, mut files) = match pipeline {
        Pipeline::Solve => solve_pipeline(config)?,
        Pipeline::Verify => verify_pipeline(config)?,
        Pipeline::MollifyStudy => mollify_pipeline(config)?,
        Pipeline::ConvergenceStudy => convergence_pipeline(config)?,
    };
    let pass = reports.iter().all(|r| r.pass);
    let doc = json!({
        "command": pipeline.name(),
        "config": config.echo(),
        "pass": pass,
        "checks": reports,
    });
    let path = out.join("report.json");
    fs::write(&path, serde_json::to_string_pretty(&doc).expect("report serializes") + "\n")?;
    files.push(path);
    Ok(RunOutcome { pass, reports, files })
}

type Produced = (Vec<VerificationReport>, Vec<PathBuf>);

fn solve_pipeline(c: &ExperimentConfig) -> Result<Produced, ExperimentError> {
    let g = c.grid()?;
    let params = c.fluid()?;
    let u0 = c.initial_field(g);
    let forcing = c.forcing_field(g)?;
    let states = solve_linearized(&u0, &forcing, &params, &c.sample_times())?;
    let dir = c.output.join("states");
    write_states(&dir, &states, &params)?;
    let (reports, mut files) = audit(c, &u0, &states, &forcing, &params)?;
    files.insert(0, dir);
    Ok((reports, files))
}

fn verify_pipeline(c: &ExperimentConfig) -> Result<Produced, ExperimentError> {
    let g = c.grid()?;
    let params = c.fluid()?;
    let (manifest, states) = read_states(&c.output.join("states"))?;
    if manifest.grid != GridInfo::from(&g) {
        return Err(bad("grid", "does not match the stored states"));
    }
    if manifest.nu != params.nu() || manifest.rho != params.rho() {
        return Err(bad("params", "do not match the stored states"));
    }
    let u0 = c.initial_field(g);
    let forcing = c.forcing_field(g)?;
    audit(c, &u0, &states, &forcing, &params)
}

fn audit(
    c: &ExperimentConfig,
    u0: &VectorField3,
    states: &[FlowState],
    forcing: &ForcingField,
    params: &FluidParams,
) -> Result<Produced, ExperimentError> {
    let series = diagnostics_series_forced(states, forcing)?;
    let csv = c.output.join("diagnostics.csv");
    series.write_csv_file(&csv)?;
    let checks: Vec<CheckName> = if c.checks.is_empty() {
        DEFAULT_CHECKS.to_vec()
    } else {
        let mut v = c.checks.clone();
        v.sort();
        v.dedup();
        v
    };
    let mut reports = Vec::new();
    for check in checks {
        reports.extend(run_check(check, c, u0, states, forcing, params, &series)?);
    }
    Ok((reports, vec![csv]))
}

fn residual_sweep(
    name: &str,
    states: &[FlowState],
    forcing: &ForcingField,
    params: &FluidParams,
) -> Result<VerificationReport, ExperimentError> {
    let mut worst: Option<VerificationReport> = None;
    let mut all = true;
    let mut per_step = Vec::new();
    for w in states.windows(2) {
        let x_mid = forcing.at(0.5 * (w[0].t + w[1].t))?;
        let r = residual_check(&w[1], &w[0], &x_mid, params)?;
        all &= r.pass;
        per_step.push(r.lhs);
        if worst.as_ref().map_or(true, |b| r.lhs > b.lhs) {
            worst = Some(r);
        }
    }
    let mut r = worst.ok_or(Error::TooFewSamples { needed: 2, got: states.len() })?;
    r.name = name.to_string();
    r.pass = all;
    Ok(r.with_meta("per_step", per_step))
}

fn nonzero_components(u: &VectorField3) -> Vec<(usize, &ScalarField)> {
    u.components().iter().enumerate().filter(|(_, c)| norm_sq(c) > 0.0).collect()
}

fn run_check(
    check: CheckName,
    c: &ExperimentConfig,
    u0: &VectorField3,
    states: &[FlowState],
    forcing: &ForcingField,
    params: &FluidParams,
    series: &DiagnosticsSeries,
) -> Result<Vec<VerificationReport>, ExperimentError> {
    Ok(match check {
        CheckName::EnergyBalance => vec![energy_balance_residual(series, states, forcing, params)?],
        CheckName::EnergyInequality => vec![energy_inequality_check(series)?],
        CheckName::Bounds => bound_suite(u0, states, forcing, params)?,
        CheckName::Residual => vec![residual_sweep("linearized_residual", states, forcing, params)?],
        CheckName::Continuity => {
            let (a, b) = (c.times.start, c.times.end);
            let t0 = a + 0.5 * (b - a);
            let span = b - a;
            continuity_probe(u0, forcing, params, t0.max(b * 1e-12), &[span / 4.0, span / 8.0, span / 16.0])?
        }
        CheckName::Hardy => nonzero_components(u0)
            .into_iter()
            .map(|(i, f)| Ok(component_report(hardy_check(f)?, i)))
            .collect::<Result<_, Error>>()?,
        CheckName::Representation => nonzero_components(u0)
            .into_iter()
            .map(|(i, f)| Ok(component_report(representation_reconstruct(f)?.1, i)))
            .collect::<Result<_, Error>>()?,
        CheckName::CorruptedState => {
            let mut bad_states = states.to_vec();
            let k = bad_states.len() / 2;
            let g = *bad_states[k].grid();
            let bump = GaussianBump::new(1.0, [0.0; 3], g.half_width() / 4.0).sample(g);
            let scale = 0.1 * crate::calculus::sup_norm(&bad_states[k].u).max(1.0);
            let [a, b, cc] = bad_states[k].u.components().clone();
            bad_states[k].u = VectorField3::new(a.add_scaled(scale, &bump)?, b, cc)?;
            vec![residual_sweep("negative_control_corrupted_state", &bad_states, forcing, params)?]
        }
    })
}

fn component_report(mut r: VerificationReport, i: usize) -> VerificationReport {
    r.name = format!("{}_u{}", r.name, i + 1);
    r.with_meta("component", i + 1)
}

fn mollify_pipeline(c: &ExperimentConfig) -> Result<Produced, ExperimentError> {
    if c.epsilons.is_empty() {
        return Err(bad("epsilons", "mollify-study needs at least one epsilon"));
    }
    let g = c.grid()?;
    let u0 = c.initial_field(g);
    let idx = u0
        .components()
        .iter()
        .enumerate()
        .max_by(|a, b| norm_sq(a.1).total_cmp(&norm_sq(b.1)))
        .map(|(i, _)| i)
        .expect("three components");
    let profile = c.initial_profile();
    let reports = mollifier_study(|x| profile(x)[idx], g, &c.epsilons)?;
    let path = c.output.join("mollify.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["epsilon", "norm_ratio", "adjoint_residual"])?;
    let mut eps = c.epsilons.clone();
    eps.sort_by(|a, b| b.total_cmp(a));
    for e in eps {
        let norm = reports.iter().find(|r| r.name == format!("mollifier_norm_eps_{e}"));
        let adj = reports.iter().find(|r| r.name == format!("mollifier_adjoint_eps_{e}"));
        if let (Some(n), Some(a)) = (norm, adj) {
            let ratio = if n.rhs > 0.0 { n.lhs / n.rhs } else { 0.0 };
            w.write_record([e.to_string(), ratio.to_string(), a.lhs.to_string()])?;
        }
    }
    w.flush()?;
    Ok((reports, vec![path]))
}

/// Energy-balance and solver residuals at (n, Δt) and (2n, Δt/2).
fn convergence_pipeline(c: &ExperimentConfig) -> Result<Produced, ExperimentError> {
    let params = c.fluid()?;
    let mut rows = Vec::new();
    for level in 0..2u32 {
        let mut cl = c.clone();
        cl.grid.n = c.grid.n << level;
        cl.times.count = (c.times.count - 1) * (1 << level) + 1;
        let g = cl.grid()?;
        let u0 = cl.initial_field(g);
        let forcing = cl.forcing_field(g)?;
        let states = solve_linearized(&u0, &forcing, &params, &cl.sample_times())?;
        let series = diagnostics_series_forced(&states, &forcing)?;
        let balance = energy_balance_residual(&series, &states, &forcing, &params)?;
        let residual = residual_sweep("linearized_residual", &states, &forcing, &params)?;
        let dt = (c.times.end - c.times.start) / (cl.times.count - 1) as f64;
        rows.push((cl.grid.n, g.spacing(), dt, balance.lhs, residual.lhs));
    }
    let (coarse, fine) = (rows[0], rows[1]);
    let mut reports = Vec::new();
    reports.push(
        VerificationReport::with_tolerance("energy_balance_halves", fine.3, 0.5 * coarse.3, 0.0)
            .with_meta("coarse", coarse.3)
            .with_meta("fine", fine.3),
    );
    let mut r = VerificationReport::with_tolerance("solver_residual_decreases", fine.4, coarse.4, 0.0)
        .with_meta("coarse", coarse.4)
        .with_meta("fine", fine.4);
    r.pass = fine.4 < coarse.4 || coarse.4 == 0.0;
    reports.push(r);
    let path = c.output.join("convergence.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["n", "h", "dt", "energy_residual", "solver_residual"])?;
    for (n, h, dt, e, s) in rows {
        w.write_record([n.to_string(), h.to_string(), dt.to_string(), e.to_string(), s.to_string()])?;
    }
    w.flush()?;
    Ok((reports, vec![path]))
}
