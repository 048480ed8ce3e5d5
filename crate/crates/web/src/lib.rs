//! Browser bindings: closed-loop simulation, spectral radius against the
//! sampling period, and small synthesis runs. Inputs and outputs are JSON.

use serde::{Deserialize, Serialize};
use washout_core::linalg::{from_rows, Vector};
use washout_core::model::{
    unforced_equilibrium, Controller, DriftVector, PlantModel, SamplingBounds, UncertaintySample,
};
use washout_core::sim::{generate_schedule, simulate as run_sim, ScheduleMode, SimulationOptions};
use washout_core::synthesis::{synthesize as run_synth, SynthesisSpec};
use washout_core::verification::{check_certificate, monodromy_oracle, DEFAULT_GRID};
use wasm_bindgen::prelude::*;

/// Largest degree accepted from the page; higher degrees take too long in a tab.
pub const MAX_WEB_DEGREE: usize = 4;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub lambda: f64,
    pub pi: [f64; 2],
    pub delta: f64,
    pub d: [f64; 2],
    pub x0: [f64; 2],
    pub t1: f64,
    pub t2: f64,
    pub horizon: f64,
    pub seed: u64,
    pub resolution: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            lambda: 1.0521,
            pi: [-1.383, -2.1917],
            delta: 1.0,
            d: [1.0, 10.0],
            x0: [10.0, 1.0],
            t1: 0.5,
            t2: 1.0,
            horizon: 60.0,
            seed: 0,
            resolution: 20,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimView {
    pub t: Vec<f64>,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub xi: Vec<f64>,
    pub q: Vec<f64>,
    pub jumps: Vec<f64>,
    pub xbar: [f64; 2],
}

fn controller(lambda: f64, pi: [f64; 2]) -> Result<Controller, String> {
    Controller::washout(from_rows(&[vec![lambda]]), from_rows(&[pi.to_vec()])).map_err(|e| e.to_string())
}

pub fn simulate_view(p: &SimParams) -> Result<SimView, String> {
    let plant = PlantModel::example();
    let c = controller(p.lambda, p.pi)?;
    let delta = UncertaintySample::scalar(p.delta).map_err(|e| e.to_string())?;
    let d = DriftVector::new(Vector::from_vec(p.d.to_vec())).map_err(|e| e.to_string())?;
    let mode = ScheduleMode::UniformRandom {
        t1: p.t1,
        t2: p.t2,
        seed: p.seed,
    };
    let schedule = generate_schedule(mode, p.horizon).map_err(|e| e.to_string())?;
    let z0 = Vector::from_vec(vec![p.x0[0], p.x0[1], 0.0, 0.0]);
    let opts = SimulationOptions {
        resolution: p.resolution.max(1),
        tau0: 0.0,
    };
    let traj = run_sim(&plant, &delta, &d, &c, &schedule, &z0, &opts).map_err(|e| e.to_string())?;
    let (a, _) = plant.realize(&delta).map_err(|e| e.to_string())?;
    let xbar = unforced_equilibrium(&a, &d).map_err(|e| e.to_string())?;
    let s = &traj.samples;
    Ok(SimView {
        t: s.iter().map(|s| s.t).collect(),
        x1: s.iter().map(|s| s.state.xp[0]).collect(),
        x2: s.iter().map(|s| s.state.xp[1]).collect(),
        xi: s.iter().map(|s| s.state.xi[0]).collect(),
        q: s.iter().map(|s| s.state.q[0]).collect(),
        jumps: schedule.instants,
        xbar: [xbar[0], xbar[1]],
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhoParams {
    pub lambda: f64,
    pub pi: [f64; 2],
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
}

impl Default for RhoParams {
    fn default() -> Self {
        Self {
            lambda: 1.0521,
            pi: [-1.383, -2.1917],
            t_min: 0.05,
            t_max: 2.0,
            points: 200,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RhoView {
    pub period: Vec<f64>,
    /// One curve per `Δ ∈ {−1, 0, 1}`.
    pub rho: [Vec<f64>; 3],
}

pub fn spectral_radius_view(p: &RhoParams) -> Result<RhoView, String> {
    let plant = PlantModel::example();
    let c = controller(p.lambda, p.pi)?;
    let bounds = SamplingBounds::new(p.t_min, p.t_max).map_err(|e| e.to_string())?;
    let deltas: Vec<_> = [-1.0, 0.0, 1.0]
        .iter()
        .map(|&v| UncertaintySample::scalar(v).unwrap())
        .collect();
    let r = monodromy_oracle(&plant, &c, &bounds, p.points.max(2), &deltas).map_err(|e| e.to_string())?;
    let mut rho: [Vec<f64>; 3] = Default::default();
    for e in &r.entries {
        rho[e.delta_index].push(e.rho);
    }
    Ok(RhoView { period: r.periods, rho })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub t1: f64,
    pub t2: f64,
    pub degree: usize,
    pub decay_rate: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            t1: 0.5,
            t2: 1.0,
            degree: 4,
            decay_rate: 0.0,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SynthView {
    pub status: String,
    pub lambda: Option<f64>,
    pub pi: Option<[f64; 2]>,
    pub certified: bool,
    pub max_rho: Option<f64>,
}

pub fn synthesize_view(p: &SynthParams) -> Result<SynthView, String> {
    if p.degree > MAX_WEB_DEGREE {
        return Err(format!("degree is limited to {MAX_WEB_DEGREE} here"));
    }
    let bounds = SamplingBounds::new(p.t1, p.t2).map_err(|e| e.to_string())?;
    let mut spec = SynthesisSpec::new(PlantModel::example(), bounds, p.degree);
    spec.decay_rate = p.decay_rate;
    let r = run_synth(&spec).map_err(|e| e.to_string())?;
    let mut view = SynthView {
        status: format!("{:?}", r.status),
        lambda: None,
        pi: None,
        certified: false,
        max_rho: None,
    };
    if let (Some(c), Some(w), Some(d)) = (&r.controller, &r.w, &r.diagnostics) {
        let (lambda, pi) = (c.lambda().unwrap(), c.pi().unwrap());
        view.lambda = Some(lambda[(0, 0)]);
        view.pi = Some([pi[(0, 0)], pi[(0, 1)]]);
        let margin = 0.5 * d.flow_margin.min(d.jump_margin);
        let cert = check_certificate(w, &spec.plant, c, &bounds, DEFAULT_GRID, margin).map_err(|e| e.to_string())?;
        let oracle =
            monodromy_oracle(&spec.plant, c, &bounds, 20, &spec.plant.vertex_samples()).map_err(|e| e.to_string())?;
        view.certified = cert.passes;
        view.max_rho = Some(oracle.max_rho);
    }
    Ok(view)
}

fn call<P, V>(json: &str, f: impl Fn(&P) -> Result<V, String>) -> Result<String, String>
where
    P: for<'de> Deserialize<'de>,
    V: Serialize,
{
    let p: P = serde_json::from_str(json).map_err(|e| e.to_string())?;
    serde_json::to_string(&f(&p)?).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn simulate(params: &str) -> Result<String, JsError> {
    call(params, simulate_view).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn spectral_radius(params: &str) -> Result<String, JsError> {
    call(params, spectral_radius_view).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn synthesize(params: &str) -> Result<String, JsError> {
    call(params, synthesize_view).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_simulation_settles() {
        let v = simulate_view(&SimParams::default()).unwrap();
        assert_eq!(v.t.len(), v.x1.len());
        assert!((v.xbar[0] + 11.25).abs() < 1e-12 && (v.xbar[1] - 1.25).abs() < 1e-12);
        assert!(v.jumps.windows(2).all(|w| (0.5..=1.0).contains(&(w[1] - w[0]))));
        let n = v.t.len() - 1;
        assert!((v.x1[n] - v.xbar[0]).abs() < 0.5, "{}", v.x1[n]);
    }

    #[test]
    fn rho_curves() {
        let p = RhoParams {
            points: 10,
            ..RhoParams::default()
        };
        let v = spectral_radius_view(&p).unwrap();
        assert_eq!(v.period.len(), 10);
        assert!(v.rho.iter().all(|c| c.len() == 10));
        // stable at T = 0.75, not at T = 2
        let k = v.period.iter().position(|&t| t >= 0.75).unwrap();
        assert!(v.rho.iter().all(|c| c[k] < 1.0));
        assert!(v.rho.iter().any(|c| c[9] > 1.0));
    }

    #[test]
    fn small_synthesis() {
        let v = synthesize_view(&SynthParams::default()).unwrap();
        assert_eq!(v.status, "Feasible");
        assert!(v.certified);
        assert!(v.max_rho.unwrap() < 1.0);
        let too_big = SynthParams {
            degree: 9,
            ..SynthParams::default()
        };
        assert!(synthesize_view(&too_big).is_err());
    }

    #[test]
    fn json_round_trip() {
        let out = call(r#"{"points": 3}"#, spectral_radius_view).unwrap();
        assert!(out.contains("\"period\""));
        assert!(call::<RhoParams, RhoView>(r#"{"bogus": 1}"#, spectral_radius_view).is_err());
    }
}
