//! Run configuration: one JSON document per invocation.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use washout_core::model::{Controller, DriftVector, PlantModel, SamplingBounds, UncertaintySample};
use washout_core::sdp::SolveOptions;
use washout_core::synthesis::{Objective, SynthesisSpec, DEFAULT_TRACE_BOUND};

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "PlantModel::example")]
    pub plant: PlantModel,
    #[serde(default)]
    pub bounds: Option<SamplingBounds>,
    #[serde(default)]
    pub degree: Option<usize>,
    #[serde(default)]
    pub synthesis: SynthesisOptions,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    pub objective: Objective,
    pub eps_flow: Option<f64>,
    pub eps_jump: Option<f64>,
    pub flow_half_degree: Option<usize>,
    pub jump_half_degree: Option<usize>,
    pub trace_bound: f64,
    pub decay_rate: f64,
    pub solver: SolveOptions,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            objective: Objective::default(),
            eps_flow: None,
            eps_jump: None,
            flow_half_degree: None,
            jump_half_degree: None,
            trace_bound: DEFAULT_TRACE_BOUND,
            decay_rate: 0.0,
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub degrees: Vec<usize>,
    /// Defaults to `T1`.
    pub lo: Option<f64>,
    pub hi: f64,
    pub tol: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            degrees: (1..=5).collect(),
            lo: None,
            hi: 5.0,
            tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// Gaps uniform in `[T1, T2]` of `bounds`.
    UniformRandom,
    /// Defaults to `T2` of `bounds`.
    Periodic {
        period: Option<f64>,
    },
    Explicit {
        instants: Vec<f64>,
    },
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig::UniformRandom
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Defaults to zero.
    pub delta: Option<UncertaintySample>,
    /// Defaults to zero.
    pub d: Option<DriftVector>,
    /// Defaults to the origin.
    pub z0: Option<Vec<f64>>,
    pub horizon: f64,
    pub schedule: ScheduleConfig,
    pub seed: u64,
    pub tau0: f64,
    pub resolution: usize,
    /// Inline controller; otherwise `result` must name a synth output.
    pub controller: Option<Controller>,
    pub result: Option<PathBuf>,
    /// Tolerance of the tail check.
    pub tol: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            delta: None,
            d: None,
            z0: None,
            horizon: 60.0,
            schedule: ScheduleConfig::default(),
            seed: 0,
            tau0: 0.0,
            resolution: washout_core::sim::DEFAULT_RESOLUTION,
            controller: None,
            result: None,
            tol: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Stored synth output; defaults to `synth.json` in the output directory.
    pub result: Option<PathBuf>,
    /// Certificate margin; defaults to half the synthesis margin.
    pub margin: Option<f64>,
    pub periods: usize,
    /// Defaults to zero and ±1 along each unit direction.
    pub deltas: Option<Vec<UncertaintySample>>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            result: None,
            margin: None,
            periods: 20,
            deltas: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.simulation.result, &mut cfg.verify.result]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        if s.degrees.is_empty() {
            return Err(CliError::Config("sweep.degrees must not be empty".into()));
        }
        if !(s.tol > 0.0 && s.hi.is_finite()) {
            return Err(CliError::Config("sweep needs tol > 0 and a finite hi".into()));
        }
        let sim = &self.simulation;
        if !(sim.horizon.is_finite() && sim.horizon >= 0.0) {
            return Err(CliError::Config(
                "simulation.horizon must be finite and nonnegative".into(),
            ));
        }
        if !(sim.tol > 0.0) || sim.resolution == 0 {
            return Err(CliError::Config("simulation needs tol > 0 and resolution > 0".into()));
        }
        if self.verify.periods == 0 {
            return Err(CliError::Config("verify.periods must be positive".into()));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<SamplingBounds, CliError> {
        self.bounds
            .ok_or_else(|| CliError::Config("bounds {\"T1\", \"T2\"} are required".into()))
    }

    pub fn synthesis_spec(&self, degree: usize, bounds: SamplingBounds) -> SynthesisSpec {
        let o = &self.synthesis;
        let mut spec = SynthesisSpec::new(self.plant.clone(), bounds, degree);
        spec.objective = o.objective;
        spec.eps_flow = o.eps_flow;
        spec.eps_jump = o.eps_jump;
        spec.flow_half_degree = o.flow_half_degree;
        spec.jump_half_degree = o.jump_half_degree;
        spec.trace_bound = o.trace_bound;
        spec.decay_rate = o.decay_rate;
        spec.solver = o.solver;
        spec
    }
}
