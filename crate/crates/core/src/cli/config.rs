//! JSON experiment configuration and the closed loops it describes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Failure;
use crate::error::Error;
use crate::feedback::{
    di_law_backstep, di_law_bounded, di_law_nested, mdi_law, slider_controller_with,
    unicycle_controller, GainSet, SliderOptions, StateFeedback,
};
use crate::hompow::Weight;
use crate::plants::{
    double_integrator, modified_double_integrator, slider_body, slider_inertial,
    slider_law_for_body, slider_law_for_inertial, slider_quadratic, unicycle_exact,
    unicycle_quadratic, SliderParams, VectorField,
};
use crate::sim::{SimConfig, STEPS_PER_PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Di,
    Mdi,
    UnicycleExact,
    UnicycleQuad,
    SliderInertial,
    SliderBody,
    SliderQuad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum LawKind {
    DiBounded,
    DiNested,
    DiBackstep,
    Mdi,
    Unicycle,
    Slider,
}

impl LawKind {
    pub fn compatible_plants(self) -> &'static [PlantKind] {
        use PlantKind::*;
        match self {
            LawKind::DiBounded | LawKind::DiNested | LawKind::DiBackstep => &[Di],
            LawKind::Mdi => &[Mdi],
            LawKind::Unicycle => &[UnicycleExact, UnicycleQuad],
            LawKind::Slider => &[SliderInertial, SliderBody, SliderQuad],
        }
    }

    pub fn is_periodic(self) -> bool {
        matches!(self, LawKind::Unicycle | LawKind::Slider)
    }
}

/// Simulation settings; every field except `t_end` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Defaults to `T/20000` for periodic laws and `1e-4` otherwise.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub settle_tol: Option<f64>,
    #[serde(default)]
    pub settle_dwell: Option<f64>,
    #[serde(default)]
    pub snap_radius: Option<f64>,
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub weight: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Directory for CSV files and the summary, relative to the config file.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    #[serde(default = "default_summary")]
    pub summary: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            dir: default_dir(),
            prefix: default_prefix(),
            summary: default_summary(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

fn default_prefix() -> String {
    "traj".into()
}

fn default_summary() -> String {
    "summary.json".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantKind,
    pub law: LawKind,
    pub gains: GainSet,
    /// Required by the periodic laws.
    #[serde(default)]
    pub period: Option<f64>,
    /// Mass and inertia of the slider models.
    #[serde(default)]
    pub slider: Option<SliderParams>,
    #[serde(default)]
    pub slider_options: Option<SliderOptions>,
    pub sim: SimSection,
    pub initial_conditions: Vec<Vec<f64>>,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Everything derived from a config before any simulation runs.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub field: VectorField,
    pub sim: SimConfig,
    pub out_dir: PathBuf,
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

/// Maps library errors raised while building a law: parameter violations
/// are admissibility failures, anything else is a configuration problem.
fn build_err(e: Error) -> Failure {
    match e {
        Error::Inadmissible { .. } | Error::Domain(_) => Failure::Inadmissible(e.to_string()),
        _ => Failure::Config(e.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("at '{path}': {}", e.into_inner()))
    })
}

impl ExperimentConfig {
    fn plant(&self) -> Result<VectorField, Failure> {
        let params = self.slider.unwrap_or_default();
        Ok(match self.plant {
            PlantKind::Di => double_integrator(),
            PlantKind::Mdi => {
                let nu = self.gains.get("nu").map_err(config_err)?;
                modified_double_integrator(nu).map_err(build_err)?
            }
            PlantKind::UnicycleExact => unicycle_exact(),
            PlantKind::UnicycleQuad => unicycle_quadratic(),
            PlantKind::SliderInertial => slider_inertial(params).map_err(build_err)?,
            PlantKind::SliderBody => slider_body(params).map_err(build_err)?,
            PlantKind::SliderQuad => slider_quadratic(),
        })
    }

    fn law(&self) -> Result<StateFeedback, Failure> {
        let g = &self.gains;
        let get = |name: &str| g.get(name).map_err(config_err);
        let law = match self.law {
            LawKind::DiBounded => di_law_bounded(get("k1")?, get("k2")?, get("kappa1")?),
            LawKind::DiNested => di_law_nested(get("k1")?, get("k2")?, get("kappa1")?),
            LawKind::DiBackstep => {
                di_law_backstep(get("k1")?, get("k2")?, get("kappa1")?, get("l")?)
            }
            LawKind::Mdi => mdi_law(get("k1")?, get("k2")?, get("kappa1")?, get("nu")?, get("l")?),
            LawKind::Unicycle => unicycle_controller(g, self.period_required()?),
            LawKind::Slider => slider_controller_with(
                g,
                self.period_required()?,
                self.slider_options.unwrap_or_default(),
            ),
        };
        let law = law.map_err(build_err)?;
        let params = self.slider.unwrap_or_default();
        match self.plant {
            PlantKind::SliderInertial => slider_law_for_inertial(&law, params).map_err(build_err),
            PlantKind::SliderBody => slider_law_for_body(&law, params).map_err(build_err),
            _ => Ok(law),
        }
    }

    fn period_required(&self) -> Result<f64, Failure> {
        self.period
            .ok_or_else(|| Failure::Config("at 'period': required by periodic laws".into()))
    }

    /// Simulation settings with every default filled in.
    pub fn resolved_sim(&self) -> SimConfig {
        let s = &self.sim;
        let dt = s.dt.unwrap_or(match self.period {
            Some(t) if self.law.is_periodic() => t / STEPS_PER_PERIOD,
            _ => 1e-4,
        });
        let mut cfg = SimConfig::new(dt, s.t_end);
        if let Some(v) = s.settle_tol {
            cfg.settle_tol = v;
        }
        cfg.settle_dwell = Some(s.settle_dwell.unwrap_or(10.0 * dt));
        if let Some(v) = s.snap_radius {
            cfg.snap_radius = v;
        }
        cfg.rng_seed = s.rng_seed.unwrap_or(0);
        cfg
    }

    pub fn build(self, config_path: &Path) -> Result<Experiment, Failure> {
        if !self.law.compatible_plants().contains(&self.plant) {
            return Err(Failure::Config(format!(
                "at 'law': {:?} cannot drive plant {:?} (compatible: {:?})",
                self.law,
                self.plant,
                self.law.compatible_plants()
            )));
        }
        if self.initial_conditions.is_empty() {
            return Err(Failure::Config(
                "at 'initial_conditions': at least one initial condition is required".into(),
            ));
        }
        let plant = self.plant()?;
        let n = plant.state_dim();
        for (i, x0) in self.initial_conditions.iter().enumerate() {
            if x0.len() != n {
                return Err(Failure::Config(format!(
                    "at 'initial_conditions[{i}]': expected {n} components, got {}",
                    x0.len()
                )));
            }
        }
        let field = plant.close_loop(self.law()?).map_err(build_err)?;
        let mut sim = self.resolved_sim();
        sim.validate().map_err(|e| Failure::Config(format!("at 'sim': {e}")))?;
        sim.weight = match &self.sim.weight {
            Some(w) => Some(
                Weight::new(w.clone()).map_err(|e| Failure::Config(format!("at 'sim.weight': {e}")))?,
            ),
            None => field.claim().map(|c| c.weight.clone()),
        };
        let base = config_path.parent().unwrap_or(Path::new("."));
        let out_dir = base.join(&self.outputs.dir);
        Ok(Experiment {
            config: self,
            field,
            sim,
            out_dir,
        })
    }
}
