//! Monte Carlo scenario factory.
//!
//! Turbine penetrations share a farm-level factor plus a bounded local
//! deviation whose half-width is calibrated to a target correlation.
//! Scenarios are generated in batches until the short-circuit levels seen
//! at the IED are resolved to within a current tolerance.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feeder::FeederSpec;
use crate::oracle::{solve_fault, FaultSpec, FaultType, IbrControlConfig, PenetrationVector, ScenarioRecord};

/// Variance of the farm-level factor, uniform on [0, 1].
const FARM_VARIANCE: f64 = 1.0 / 12.0;

fn default_locations() -> Vec<f64> {
    (1..=17).map(|i| i as f64 / 17.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub r_max: f64,
    /// Number of turbines; defaults to the feeder's tap count.
    pub n_taps: Option<usize>,
    pub fault_locations: Vec<f64>,
    pub fault_types: Vec<FaultType>,
    /// Fault resistances in ohms, converted on the feeder's impedance base.
    pub resistances_ohm: Vec<f64>,
    pub inception_angles: Vec<f64>,
    /// Short-circuit resolution target in amperes.
    pub tol_amps: f64,
    pub percentile: f64,
    pub seed: u64,
    pub max_scenarios: usize,
    pub batch_size: usize,
    /// Fixes the deviation half-width instead of calibrating it from
    /// `r_max`; zero gives equal penetrations on every turbine.
    pub delta_override: Option<f64>,
    pub control: IbrControlConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            r_max: 0.97,
            n_taps: None,
            fault_locations: default_locations(),
            fault_types: vec![FaultType::AG, FaultType::AB, FaultType::ABG, FaultType::ABC],
            resistances_ohm: vec![0.0, 5.0, 10.0, 25.0, 40.0, 50.0],
            inception_angles: vec![0.0],
            tol_amps: 10.0,
            percentile: 99.0,
            seed: 0x5eed,
            max_scenarios: 50_000,
            batch_size: 256,
            delta_override: None,
            control: IbrControlConfig::default(),
        }
    }
}

impl McConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self, spec: &FeederSpec) -> Result<()> {
        if !(self.r_max > 0.0 && self.r_max < 1.0) {
            return Err(Error::Config(format!("r_max {} outside (0, 1)", self.r_max)));
        }
        if !(self.tol_amps > 0.0) {
            return Err(Error::Config("tol_amps must be > 0".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(Error::Config("percentile must lie in (0, 100]".into()));
        }
        if self.n_taps.is_some_and(|n| n != spec.taps.len()) {
            return Err(Error::Config(format!(
                "n_taps {} does not match the feeder's {} taps",
                self.n_taps.unwrap_or_default(),
                spec.taps.len()
            )));
        }
        if self.fault_locations.is_empty()
            || self.fault_types.is_empty()
            || self.resistances_ohm.is_empty()
            || self.inception_angles.is_empty()
        {
            return Err(Error::Config("scenario parameter lists must be non-empty".into()));
        }
        if let Some(d) = self.fault_locations.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::Config(format!("fault location {d} outside [0, 1]")));
        }
        if let Some(r) = self.resistances_ohm.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("fault resistance {r} must be finite and >= 0")));
        }
        if self.batch_size == 0 || self.max_scenarios < 2 {
            return Err(Error::Config("batch_size must be >= 1 and max_scenarios >= 2".into()));
        }
        if self.delta_override.is_some_and(|d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::Config("delta_override must be finite and >= 0".into()));
        }
        self.control.validate()
    }

    /// Deviation half-width in effect for this configuration.
    pub fn delta(&self) -> Result<f64> {
        match self.delta_override {
            Some(d) => Ok(d),
            None => calibrate_delta(self.r_max),
        }
    }

    /// Resolution target converted to per-unit current on the feeder base.
    pub fn tol_pu(&self, spec: &FeederSpec) -> f64 {
        self.tol_amps / spec.base_current_amp()
    }
}

/// Half-width of the turbine deviation giving correlation `r_max` between
/// each turbine and the farm factor before clipping.
pub fn calibrate_delta(r_max: f64) -> Result<f64> {
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(Error::Range(format!("r_max {r_max} outside (0, 1)")));
    }
    Ok((3.0 * FARM_VARIANCE * (1.0 / (r_max * r_max) - 1.0)).sqrt())
}

/// Pre-clip correlation between a turbine and the farm factor for
/// deviations uniform on [-delta, delta].
pub fn analytic_correlation(delta: f64) -> f64 {
    let deviation_variance = delta * delta / 3.0;
    (FARM_VARIANCE / (FARM_VARIANCE + deviation_variance)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationDraw {
    pub p_farm: f64,
    pub epsilons: Vec<f64>,
    pub clipped: PenetrationVector,
}

impl PenetrationDraw {
    /// Turbine penetrations before clipping.
    pub fn unclipped(&self) -> Vec<f64> {
        self.epsilons.iter().map(|e| self.p_farm + e).collect()
    }
}

/// Sample correlation between the first turbine and the farm factor,
/// before and after clipping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCorrelation {
    pub draws: usize,
    pub pre_clip: f64,
    pub post_clip: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn empirical_correlation(delta: f64, draws: usize, seed: u64) -> Result<EmpiricalCorrelation> {
    if draws < 2 {
        return Err(Error::InsufficientData(format!("{draws} draws; need at least 2")));
    }
    let mut rng = scenario_rng(seed, 0);
    let (mut farm, mut pre, mut post) =
        (Vec::with_capacity(draws), Vec::with_capacity(draws), Vec::with_capacity(draws));
    for _ in 0..draws {
        let d = sample_penetration(&mut rng, delta, 1);
        farm.push(d.p_farm);
        pre.push(d.unclipped()[0]);
        post.push(d.clipped.0[0]);
    }
    Ok(EmpiricalCorrelation { draws, pre_clip: pearson(&farm, &pre), post_clip: pearson(&farm, &post) })
}

pub fn sample_penetration<R: Rng + ?Sized>(rng: &mut R, delta: f64, n_taps: usize) -> PenetrationDraw {
    let p_farm: f64 = rng.random();
    let epsilons: Vec<f64> = (0..n_taps).map(|_| delta * (2.0 * rng.random::<f64>() - 1.0)).collect();
    let clipped = PenetrationVector(epsilons.iter().map(|e| (p_farm + e).clamp(0.0, 1.0)).collect());
    PenetrationDraw { p_farm, epsilons, clipped }
}

/// One scenario tuple: penetrations plus fault type, location,
/// resistance and inception angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDraw {
    pub fault: FaultSpec,
    pub penetration: PenetrationDraw,
}

fn pick<'a, T, R: Rng + ?Sized>(rng: &mut R, items: &'a [T], what: &str) -> Result<&'a T> {
    if items.is_empty() {
        return Err(Error::Config(format!("no {what} configured")));
    }
    Ok(&items[rng.random_range(0..items.len())])
}

pub fn sample_scenario<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &McConfig,
    spec: &FeederSpec,
    delta: f64,
) -> Result<ScenarioDraw> {
    let n = cfg.n_taps.unwrap_or(spec.taps.len());
    let penetration = sample_penetration(rng, delta, n);
    let fault_type = *pick(rng, &cfg.fault_types, "fault types")?;
    let distance = *pick(rng, &cfg.fault_locations, "fault locations")?;
    let ohm = *pick(rng, &cfg.resistances_ohm, "fault resistances")?;
    let inception_angle = *pick(rng, &cfg.inception_angles, "inception angles")?;
    let fault = FaultSpec {
        fault_type,
        distance,
        resistance: ohm / spec.base_impedance_ohm(),
        resistance_ohm: Some(ohm),
        inception_angle,
    };
    Ok(ScenarioDraw { fault, penetration })
}

/// Independent random stream of scenario `index`.
pub fn scenario_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ index)
}

/// Linear interpolation between closest ranks of ascending `sorted`.
pub fn percentile(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InsufficientData("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::Range(format!("percentile {p} outside [0, 100]")));
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64))
}

fn nearest_gaps(sorted: &[f64]) -> Vec<f64> {
    let n = sorted.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { sorted[i] - sorted[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { sorted[i + 1] - sorted[i] } else { f64::INFINITY };
            left.min(right)
        })
        .collect()
}

/// p-th percentile of each value's distance to its nearest neighbour.
pub fn nn_resolution(values: &[f64], p: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!("{} values; need at least 2", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite short-circuit level".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gaps = nearest_gaps(&sorted);
    gaps.sort_by(f64::total_cmp);
    percentile(&gaps, p)
}

/// Resolution after each generated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    /// `epsilon[n - 1]` is the resolution of the first `n` levels; infinite
    /// for `n = 1`, where no neighbour exists.
    pub epsilon: Vec<f64>,
    pub converged_at: Option<usize>,
}

impl ConvergenceTrace {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n", "epsilon_p"]).map_err(csv_err)?;
        for (i, e) in self.epsilon.iter().enumerate() {
            w.write_record([(i + 1).to_string(), e.to_string()]).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub records: Vec<ScenarioRecord>,
    pub trace: ConvergenceTrace,
    pub delta: f64,
    /// `max_scenarios` was reached before the resolution target.
    pub hit_cap: bool,
}

/// Accumulates levels in sorted order and reports the resolution.
struct Resolution {
    sorted: Vec<f64>,
    p: f64,
}

impl Resolution {
    fn push(&mut self, v: f64) -> f64 {
        let at = self.sorted.partition_point(|x| *x < v);
        self.sorted.insert(at, v);
        if self.sorted.len() < 2 {
            return f64::INFINITY;
        }
        let mut gaps = nearest_gaps(&self.sorted);
        let rank = self.p / 100.0 * (gaps.len() - 1) as f64;
        let lo = rank.floor() as usize;
        let hi = rank.ceil() as usize;
        let (_, a, rest) = gaps.select_nth_unstable_by(lo, f64::total_cmp);
        let a = *a;
        let b = if hi == lo { a } else { rest.iter().copied().fold(f64::INFINITY, f64::min) };
        a + (b - a) * (rank - lo as f64)
    }
}

/// Generates scenarios in parallel batches with the given oracle until the
/// resolution of the short-circuit levels meets the configured tolerance,
/// checked at batch boundaries. Output order is by scenario index.
pub fn run_until_converged_with<F>(spec: &FeederSpec, cfg: &McConfig, oracle: F) -> Result<McRun>
where
    F: Fn(&FeederSpec, &FaultSpec, &PenetrationVector) -> Result<ScenarioRecord> + Sync,
{
    spec.validate().into_result()?;
    cfg.validate(spec)?;
    let delta = cfg.delta()?;
    let tol = cfg.tol_pu(spec);
    let mut records: Vec<ScenarioRecord> = Vec::new();
    let mut epsilon = Vec::new();
    let mut res = Resolution { sorted: Vec::new(), p: cfg.percentile };
    let mut converged_at = None;

    while records.len() < cfg.max_scenarios {
        let start = records.len() as u64;
        let end = (records.len() + cfg.batch_size).min(cfg.max_scenarios) as u64;
        let batch: Vec<ScenarioRecord> = (start..end)
            .into_par_iter()
            .map(|idx| {
                let mut rng = scenario_rng(cfg.seed, idx);
                let draw = sample_scenario(&mut rng, cfg, spec, delta)?;
                let mut rec = oracle(spec, &draw.fault, &draw.penetration.clipped)?;
                rec.scenario_id = idx;
                Ok(rec)
            })
            .collect::<Result<_>>()?;
        for rec in batch {
            epsilon.push(res.push(rec.short_circuit_current));
            records.push(rec);
        }
        if epsilon.last().is_some_and(|e| *e <= tol) {
            converged_at = Some(records.len());
            break;
        }
    }
    let hit_cap = converged_at.is_none();
    Ok(McRun { records, trace: ConvergenceTrace { epsilon, converged_at }, delta, hit_cap })
}

/// [`run_until_converged_with`] using the quasi-static oracle and the
/// configuration's control settings.
pub fn run_until_converged(spec: &FeederSpec, cfg: &McConfig) -> Result<McRun> {
    run_until_converged_with(spec, cfg, |s, f, p| solve_fault(s, f, p, &cfg.control))
}
