use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use faultloc::bench::{
    aggregate, check_units, load_records, load_samples, run_benchmark, save_records, save_samples, BenchConfig,
    GroupKey, RecordFileHeader,
};
use faultloc::oracle::solve_fault;
use faultloc::scenario::{analytic_correlation, calibrate_delta, empirical_correlation, run_until_converged, McConfig};
use faultloc::{
    CurrentSource, Error, FaultSpec, FaultType, FeederSpec, IbrControlConfig, Method, PenetrationVector, Result,
};
use serde::Deserialize;

const SEED_VAR: &str = "FAULTLOC_SEED";

#[derive(Parser)]
#[command(name = "faultloc", version, about = "Compensated fault location on radial collector feeders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deviation half-width for a target turbine/farm correlation.
    Calibrate {
        #[arg(long = "rmax")]
        r_max: f64,
        /// Draws used for the empirical correlation check.
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
    },
    /// Solve a list of fault scenarios and write a record file.
    Simulate {
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate scenarios until the short-circuit levels are resolved.
    Montecarlo {
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Locate every record with the selected methods and write the errors.
    Locate {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "takz,takz_new,takn,taks,reactance,impedance,proposed")]
        methods: Vec<String>,
        #[arg(long = "current-source", default_value = "proxy")]
        current_source: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grouped error statistics as JSON.
    Report {
        #[arg(long)]
        errors: PathBuf,
        #[arg(long = "group-by", value_delimiter = ',', default_value = "method,fault_type")]
        group_by: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// One entry of a scenario file.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioEntry {
    #[serde(rename = "type")]
    fault_type: FaultType,
    distance: f64,
    #[serde(default)]
    resistance_pu: Option<f64>,
    #[serde(default)]
    resistance_ohm: Option<f64>,
    #[serde(default)]
    inception_deg: f64,
    penetration: PenetrationVector,
}

impl ScenarioEntry {
    fn fault(&self, spec: &FeederSpec) -> Result<FaultSpec> {
        let resistance = match (self.resistance_pu, self.resistance_ohm) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give resistance_pu or resistance_ohm, not both".into()));
            }
            (Some(pu), None) => pu,
            (None, Some(ohm)) => ohm / spec.base_impedance_ohm(),
            (None, None) => 0.0,
        };
        Ok(FaultSpec {
            fault_type: self.fault_type,
            distance: self.distance,
            resistance,
            resistance_ohm: self.resistance_ohm,
            inception_angle: self.inception_deg,
        })
    }
}

/// A bare list of scenarios, or the list with control settings.
#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    List(Vec<ScenarioEntry>),
    WithControl {
        #[serde(default)]
        control: IbrControlConfig,
        scenarios: Vec<ScenarioEntry>,
    },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), message: format!("{}: {e}", path.display()) })
}

fn load_feeder(path: &Path) -> Result<FeederSpec> {
    let spec: FeederSpec = read_json(path)?;
    spec.validate().into_result()?;
    Ok(spec)
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{SEED_VAR}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

fn calibrate(r_max: f64, draws: usize) -> Result<()> {
    let delta = calibrate_delta(r_max)?;
    let seed = seed_override()?.unwrap_or(McConfig::default().seed);
    let empirical = empirical_correlation(delta, draws, seed)?;
    let out = serde_json::json!({
        "r_max": r_max,
        "delta": delta,
        "analytic_correlation": analytic_correlation(delta),
        "empirical": empirical,
    });
    println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    Ok(())
}

fn simulate(feeder: &Path, scenarios: &Path, out: &Path) -> Result<()> {
    let spec = load_feeder(feeder)?;
    let (control, entries) = match read_json::<ScenarioFile>(scenarios)? {
        ScenarioFile::List(s) => (IbrControlConfig::default(), s),
        ScenarioFile::WithControl { control, scenarios } => (control, scenarios),
    };
    let mut records = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let mut r = solve_fault(&spec, &e.fault(&spec)?, &e.penetration, &control)?;
        r.scenario_id = i as u64;
        records.push(r);
    }
    save_records(out, &RecordFileHeader::for_feeder(&spec), &records)?;
    eprintln!("{} records written to {}", records.len(), out.display());
    Ok(())
}

/// Runs the Monte Carlo loop. Outputs are written even when the cap is
/// reached; the caller then reports non-convergence.
fn montecarlo(feeder: &Path, config: &Path, out: &Path, trace: Option<&Path>) -> Result<bool> {
    let spec = load_feeder(feeder)?;
    let text = std::fs::read_to_string(config)?;
    let mut cfg = McConfig::from_json(&text)?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    let run = run_until_converged(&spec, &cfg)?;
    save_records(out, &RecordFileHeader::for_feeder(&spec), &run.records)?;
    if let Some(t) = trace {
        run.trace.save_csv(t)?;
    }
    eprintln!(
        "{} scenarios (delta {:.6}, seed {}); resolution {:.4} A against {} A{}",
        run.records.len(),
        run.delta,
        cfg.seed,
        run.trace.epsilon.last().copied().unwrap_or(f64::INFINITY) * spec.base_current_amp(),
        cfg.tol_amps,
        if run.hit_cap { "; scenario cap reached before convergence" } else { "" }
    );
    Ok(!run.hit_cap)
}

fn locate(records: &Path, feeder: &Path, methods: &[String], source: &str, out: &Path) -> Result<()> {
    let spec = load_feeder(feeder)?;
    let methods = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let current_source: CurrentSource = source.parse()?;
    let (header, recs) = load_records(records)?;
    check_units(&header, &spec)?;
    let cfg = BenchConfig { current_source, ..BenchConfig::default() };
    let samples = run_benchmark(&recs, &methods, &spec, &cfg)?;
    save_samples(&samples, out)?;
    let unconverged = samples.iter().filter(|s| !s.converged).count();
    eprintln!("{} estimates written to {} ({unconverged} unconverged)", samples.len(), out.display());
    Ok(())
}

fn report(errors: &Path, group_by: &[String], out: &Path) -> Result<()> {
    let keys = group_by.iter().map(|k| k.parse()).collect::<Result<Vec<GroupKey>>>()?;
    let samples = load_samples(errors)?;
    let table = aggregate(&samples, &keys)?;
    std::fs::write(out, table.to_json())?;
    eprintln!("{} groups written to {}", table.groups.len(), out.display());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } => 2,
        Error::NoConvergence { .. } => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Calibrate { r_max, draws } => calibrate(r_max, draws).map(|_| true),
        Command::Simulate { feeder, scenarios, out } => simulate(&feeder, &scenarios, &out).map(|_| true),
        Command::Montecarlo { feeder, config, out, trace } => montecarlo(&feeder, &config, &out, trace.as_deref()),
        Command::Locate { records, feeder, methods, current_source, out } => {
            locate(&records, &feeder, &methods, &current_source, &out).map(|_| true)
        }
        Command::Report { errors, group_by, out } => report(&errors, &group_by, &out).map(|_| true),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are successes; bad arguments are
            // configuration errors.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
