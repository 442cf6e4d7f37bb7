//! Command-line front end: `simulate`, `verify` and `gains`.
//!
//! Exit codes: 0 success, 1 a verification suite failed, 2 configuration
//! or schema error, 3 inadmissible parameters, 4 numerical failure.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

pub use config::{parse_config, Experiment, ExperimentConfig, LawKind, Outputs, PlantKind, SimSection};

use crate::error::Error;
use crate::feedback::{
    gain_g, gain_h, nested_gain_threshold, slider_k4_threshold, BoundedLaw, DesingularizedLaw,
    GainSet, NestedLaw, SliderLaw, SliderOptions, StateFeedback, UnicycleLaw,
};
use crate::hompow::{dilate, sample_unit_sphere, seeded_rng, Weight};
use crate::plants::{
    double_integrator, modified_double_integrator, slider_body, slider_inertial,
    slider_law_for_body, slider_law_for_inertial, slider_quadratic, unicycle_exact,
    unicycle_quadratic, SliderParams, VectorField,
};
use crate::sim::{gain_autotune, run_many, write_trajectory_csv, SimConfig, Trajectory, STEPS_PER_PERIOD};
use crate::verify::{report_json, run_suite, Suite};

/// A command failure with its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Verification,
    Config(String),
    Inadmissible(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Verification => 1,
            Failure::Config(_) => 2,
            Failure::Inadmissible(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> String {
        let prefixed = |prefix: &str, m: &str| {
            if m.starts_with(prefix) {
                m.to_string()
            } else {
                format!("{prefix}: {m}")
            }
        };
        match self {
            Failure::Verification => "verification failed".into(),
            Failure::Config(m) => prefixed("configuration error", m),
            Failure::Inadmissible(m) => prefixed("inadmissible parameters", m),
            Failure::Numerical(m) => prefixed("numerical failure", m),
        }
    }
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

fn lib_failure(e: Error) -> Failure {
    match e {
        Error::Inadmissible { .. } | Error::Domain(_) => Failure::Inadmissible(e.to_string()),
        Error::NonFinite(_) | Error::Search(_) => Failure::Numerical(e.to_string()),
        Error::Config(_) | Error::Dimension { .. } => Failure::Config(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "smalltime", version, about = "Simulate and check small-time stabilizing feedback laws")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every initial condition of a JSON experiment; writes one CSV per
    /// run and a JSON summary.
    Simulate { config: PathBuf },
    /// Run a property campaign and print its JSON report.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Print the analytic gain threshold of a law, optionally with the
    /// smallest gain that settles a fan of initial conditions in simulation.
    Gains(GainsArgs),
}

#[derive(Debug, clap::Args)]
pub struct GainsArgs {
    #[arg(value_enum)]
    pub law: LawKind,
    #[arg(long)]
    pub l: Option<f64>,
    /// Degree of the law (`kappa1` for the two-phase laws).
    #[arg(long, alias = "kappa1", allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa2: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub k2: Option<f64>,
    #[arg(long)]
    pub k3: Option<f64>,
    #[arg(long)]
    pub k4: Option<f64>,
    /// Also search the tuned gain empirically.
    #[arg(long)]
    pub autotune: bool,
    /// Plant for the search; defaults to the first model the law drives.
    #[arg(long, value_parser = parse_plant)]
    pub plant: Option<PlantKind>,
    /// Period of the two-phase laws.
    #[arg(long, default_value_t = 1.0)]
    pub period: f64,
    /// Homogeneous radius of the initial conditions.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 8)]
    pub directions: usize,
    /// Simulation horizon; two periods plus the dwell for two-phase laws.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Start of the doubling search.
    #[arg(long)]
    pub k_min: Option<f64>,
    /// `k6 / k5` for the slider search, which tunes `k5`.
    #[arg(long, default_value_t = 1.5)]
    pub k6_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_plant(s: &str) -> Result<PlantKind, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate { config } => cmd_simulate(&config),
        Command::Verify { suite, seed, samples } => cmd_verify(suite, seed, samples),
        Command::Gains(args) => cmd_gains(&args),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.exit_code()
        }
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    index: usize,
    initial_condition: &'a [f64],
    csv: String,
    steps: usize,
    dt: f64,
    dt_adjusted: bool,
    weight: &'a Weight,
    settling: &'a crate::sim::SettlingReport,
    events: &'a [crate::sim::Event],
    final_state: &'a [f64],
    abort: &'a Option<String>,
}

/// Loads, checks and runs an experiment. Returns the summary JSON.
pub fn simulate_config(path: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    let verbatim: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("invalid JSON in {}: {e}", path.display())))?;
    let exp = parse_config(&text)?.build(path)?;
    std::fs::create_dir_all(&exp.out_dir).map_err(|e| {
        Failure::Config(format!("cannot create {}: {e}", exp.out_dir.display()))
    })?;

    let Experiment { config, field, sim, out_dir } = exp;
    let runs: Vec<Trajectory> = run_many(&field, &config.initial_conditions, &sim)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(lib_failure)?;

    let mut summaries = Vec::with_capacity(runs.len());
    for (i, traj) in runs.iter().enumerate() {
        let name = format!("{}_{i:03}.csv", config.outputs.prefix);
        write_trajectory_csv(traj, &out_dir.join(&name)).map_err(lib_failure)?;
        summaries.push(RunSummary {
            index: i,
            initial_condition: &config.initial_conditions[i],
            csv: name,
            steps: traj.len().saturating_sub(1),
            dt: traj.dt,
            dt_adjusted: traj.dt_adjusted,
            weight: &traj.weight,
            settling: &traj.settling,
            events: &traj.events,
            final_state: traj.final_state(),
            abort: &traj.abort,
        });
    }
    let aborted: Vec<usize> = runs
        .iter()
        .enumerate()
        .filter(|(_, t)| t.abort.is_some())
        .map(|(i, _)| i)
        .collect();
    let summary = json!({
        "config": verbatim,
        "resolved": {
            "plant": config.plant,
            "law": config.law,
            "field": field.label(),
            "period": field.period(),
            "sim": sim,
            "slider": config.slider.unwrap_or_default(),
            "slider_options": config.slider_options.unwrap_or_default(),
            "law_parameters": field.feedback().map(|f| f.parameters().to_vec()),
        },
        "runs": summaries,
        "completed": aborted.is_empty(),
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let summary_path = out_dir.join(&config.outputs.summary);
    std::fs::write(&summary_path, &text)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", summary_path.display())))?;
    if !aborted.is_empty() {
        let reasons: Vec<String> = aborted
            .iter()
            .map(|&i| format!("run {i}: {}", runs[i].abort.as_deref().unwrap_or("")))
            .collect();
        return Err(Failure::Numerical(reasons.join("; ")));
    }
    Ok(summary)
}

fn cmd_simulate(path: &Path) -> Result<(), Failure> {
    let summary = simulate_config(path)?;
    emit(&serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn cmd_verify(suite: Suite, seed: u64, samples: usize) -> Result<(), Failure> {
    let report = run_suite(suite, seed, samples).map_err(lib_failure)?;
    emit(&report_json(&report));
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn need(v: Option<f64>, flag: &str) -> Result<f64, Failure> {
    v.ok_or_else(|| Failure::Config(format!("--{flag} is required for this law")))
}

/// Analytic threshold on the tuned gain, with the condition it encodes.
fn threshold(a: &GainsArgs) -> Result<(Option<f64>, &'static str), Failure> {
    Ok(match a.law {
        LawKind::DiBounded => (None, "k1, k2 > 0"),
        LawKind::DiNested => (
            Some(nested_gain_threshold(need(a.kappa, "kappa")?, need(a.k1, "k1")?).map_err(lib_failure)?),
            "k2 > nested threshold(kappa, k1)",
        ),
        LawKind::DiBackstep => (
            Some(gain_g(need(a.l, "l")?, need(a.kappa, "kappa")?, need(a.k1, "k1")?).map_err(lib_failure)?),
            "k2 > g(l, kappa, k1)",
        ),
        LawKind::Mdi => (
            Some(
                gain_h(need(a.l, "l")?, need(a.kappa, "kappa")?, need(a.nu, "nu")?, need(a.k1, "k1")?)
                    .map_err(lib_failure)?,
            ),
            "k2 > h(l, kappa, nu, k1)",
        ),
        LawKind::Unicycle => (
            Some(
                gain_h(need(a.l, "l")?, need(a.kappa2, "kappa2")?, need(a.nu, "nu")?, need(a.k2, "k2")?)
                    .map_err(lib_failure)?,
            ),
            "k3 > h(l, kappa2, nu, k2)",
        ),
        LawKind::Slider => (
            Some(slider_k4_threshold(need(a.kappa2, "kappa2")?, need(a.k3, "k3")?).map_err(lib_failure)?),
            "k4 > 2^(-2 kappa2) k3^(1/(1+kappa2))",
        ),
    })
}

type Family = Box<dyn Fn(f64) -> crate::Result<StateFeedback> + Sync>;

/// Plant, law family in the tuned gain, and the weight for the initial
/// conditions of a gain search.
fn search_setup(a: &GainsArgs) -> Result<(VectorField, Family, Weight, &'static str), Failure> {
    let plant_kind = a.plant.unwrap_or(a.law.compatible_plants()[0]);
    if !a.law.compatible_plants().contains(&plant_kind) {
        return Err(Failure::Config(format!("law {:?} cannot drive plant {plant_kind:?}", a.law)));
    }
    let params = SliderParams::default();
    let plant = match plant_kind {
        PlantKind::Di => double_integrator(),
        PlantKind::Mdi => modified_double_integrator(need(a.nu, "nu")?).map_err(lib_failure)?,
        PlantKind::UnicycleExact => unicycle_exact(),
        PlantKind::UnicycleQuad => unicycle_quadratic(),
        PlantKind::SliderInertial => slider_inertial(params).map_err(lib_failure)?,
        PlantKind::SliderBody => slider_body(params).map_err(lib_failure)?,
        PlantKind::SliderQuad => slider_quadratic(),
    };
    let adapt = move |law: StateFeedback| -> crate::Result<StateFeedback> {
        match plant_kind {
            PlantKind::SliderInertial => slider_law_for_inertial(&law, params),
            PlantKind::SliderBody => slider_law_for_body(&law, params),
            _ => Ok(law),
        }
    };
    let gains = GainSet {
        kappa1: a.kappa,
        kappa2: a.kappa2,
        nu: a.nu,
        mu: a.mu,
        l: a.l,
        k1: a.k1,
        k2: a.k2,
        k3: a.k3,
        k4: a.k4,
        ..Default::default()
    };
    let period = a.period;
    let ratio = a.k6_ratio;
    Ok(match a.law {
        LawKind::DiBounded | LawKind::DiNested | LawKind::DiBackstep | LawKind::Mdi => {
            let (k1, kappa) = (need(a.k1, "k1")?, need(a.kappa, "kappa")?);
            let law = a.law;
            let (l, nu) = match law {
                LawKind::DiBackstep => (need(a.l, "l")?, 0.0),
                LawKind::Mdi => (need(a.l, "l")?, need(a.nu, "nu")?),
                _ => (1.0, 0.0),
            };
            let family: Family = Box::new(move |k| {
                Ok(match law {
                    LawKind::DiBounded => BoundedLaw::new_unchecked(k1, k, kappa).into_feedback(),
                    LawKind::DiNested => NestedLaw::new_unchecked(k1, k, kappa).into_feedback(),
                    _ => DesingularizedLaw::new_unchecked(k1, k, kappa, nu, l).into_feedback(),
                })
            });
            let w = Weight::new(vec![1.0, 1.0 + kappa - nu]).map_err(lib_failure)?;
            (plant, family, w, "k2")
        }
        LawKind::Unicycle => {
            let mut probe = gains.clone();
            probe.k3 = Some(1.0);
            let w = UnicycleLaw::new_unchecked(&probe, period)
                .map_err(lib_failure)?
                .phase_one_claim()
                .weight;
            let family: Family = Box::new(move |k| {
                let mut g = gains.clone();
                g.k3 = Some(k);
                adapt(UnicycleLaw::new_unchecked(&g, period)?.into_feedback())
            });
            (plant, family, w, "k3")
        }
        LawKind::Slider => {
            let mut probe = gains.clone();
            probe.k5 = Some(1.0);
            probe.k6 = Some(ratio);
            let w = SliderLaw::new(&probe, period, SliderOptions::default())
                .map_err(lib_failure)?
                .phase_one_weight();
            let family: Family = Box::new(move |k| {
                let mut g = gains.clone();
                g.k5 = Some(k);
                g.k6 = Some(ratio * k);
                adapt(SliderLaw::new(&g, period, SliderOptions::default())?.into_feedback())
            });
            (plant, family, w, "k5")
        }
    })
}

fn cmd_gains(a: &GainsArgs) -> Result<(), Failure> {
    let (bound, condition) = threshold(a)?;
    let mut out = json!({
        "law": a.law,
        "threshold": bound,
        "condition": condition,
    });
    if a.autotune {
        let (plant, family, w, tuned) = search_setup(a)?;
        let periodic = a.law.is_periodic();
        let dt = a.dt.unwrap_or(if periodic { a.period / STEPS_PER_PERIOD } else { 1e-4 });
        let horizon = a.horizon.unwrap_or(if periodic { 2.0 * a.period + 10.0 * dt } else { 20.0 });
        let cfg = SimConfig::new(dt, horizon).with_weight(w.clone());
        let mut rng = seeded_rng(a.seed);
        let ics = (0..a.directions.max(1))
            .map(|_| dilate(&w, a.radius, &sample_unit_sphere(&w, &mut rng)))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(lib_failure)?;
        let k_min = a.k_min.unwrap_or(match (a.law, bound) {
            (LawKind::DiBounded, _) | (LawKind::Slider, _) | (_, None) => 0.01,
            (_, Some(b)) => b / 16.0,
        });
        let report = gain_autotune(&plant, &family, &ics, &cfg, k_min).map_err(lib_failure)?;
        out["autotune"] = json!({
            "tuned_gain": tuned,
            "plant": a.plant.unwrap_or(a.law.compatible_plants()[0]),
            "radius": a.radius,
            "directions": ics.len(),
            "horizon": horizon,
            "dt": dt,
            "k_min": k_min,
            "report": report,
        });
    }
    emit(&serde_json::to_string_pretty(&out).expect("report serializes"));
    Ok(())
}
