//! Closed-loop hybrid simulation under aperiodic sampling.
//!
//! Between samples the lifted state obeys `ż = F z + B_f d`, which is
//! propagated exactly through the exponential of the augmented matrix
//! `[[F, B_f d], [0, 0]]`. At a sampling instant `z⁺ = J z` and the timer
//! resets.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{assemble_realized, Controller, DriftVector, PlantModel, SamplingBounds, UncertaintySample};
use crate::polymatrix::{inverse_at, PolyMatrix};

/// Default number of recorded sub-steps per flow interval.
pub const DEFAULT_RESOLUTION: usize = 100;

/// Relative slack when comparing instants against bounds and the horizon.
const TIME_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleMode {
    /// `t_k = k T`.
    Periodic { period: f64 },
    /// `t_1 ~ U[T1, T2]`, gaps `~ U[T1, T2]`.
    UniformRandom { t1: f64, t2: f64, seed: u64 },
    /// Given instants, validated against `[T1, T2]`.
    Explicit { t1: f64, t2: f64, instants: Vec<f64> },
}

impl ScheduleMode {
    pub fn bounds(&self) -> Result<SamplingBounds> {
        match *self {
            ScheduleMode::Periodic { period } => SamplingBounds::new(period, period),
            ScheduleMode::UniformRandom { t1, t2, .. } | ScheduleMode::Explicit { t1, t2, .. } => {
                SamplingBounds::new(t1, t2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingSchedule {
    pub mode: ScheduleMode,
    pub bounds: SamplingBounds,
    pub horizon: f64,
    /// Jump instants `t_1 < t_2 < …`, all `≤ horizon`.
    pub instants: Vec<f64>,
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    let s = TIME_SLACK * hi.abs().max(1.0);
    x >= lo - s && x <= hi + s
}

pub fn generate_schedule(mode: ScheduleMode, horizon: f64) -> Result<SamplingSchedule> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(validation(format!(
            "horizon must be finite and nonnegative, got {horizon}"
        )));
    }
    let bounds = mode.bounds()?;
    let slack = TIME_SLACK * horizon.max(1.0);
    let instants = match &mode {
        ScheduleMode::Periodic { period } => (1..)
            .map(|k| k as f64 * period)
            .take_while(|&t| t <= horizon + slack)
            .collect(),
        ScheduleMode::UniformRandom { t1, t2, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::new();
            let mut t = 0.0;
            loop {
                let gap = if t1 == t2 { *t1 } else { rng.gen_range(*t1..=*t2) };
                t += gap;
                if t > horizon + slack {
                    break;
                }
                out.push(t);
            }
            out
        }
        ScheduleMode::Explicit { instants, .. } => {
            let (t1, t2) = (bounds.t1(), bounds.t2());
            let mut prev = 0.0;
            for (i, &t) in instants.iter().enumerate() {
                let gap = t - prev;
                let ok = if i == 0 {
                    within(gap, 0.0, t2)
                } else {
                    within(gap, t1, t2)
                };
                if !ok {
                    return Err(validation(format!(
                        "sampling instant at index {} (t = {t}) violates {} <= gap <= {t2} (gap {gap})",
                        i + 1,
                        if i == 0 { 0.0 } else { t1 },
                    )));
                }
                prev = t;
            }
            let kept: Vec<f64> = instants.iter().copied().filter(|&t| t <= horizon + slack).collect();
            let last = kept.last().copied().unwrap_or(0.0);
            if horizon - last > t2 + slack {
                return Err(validation(format!(
                    "explicit instants stop at t = {last}; the horizon {horizon} needs a sample every {t2}"
                )));
            }
            kept
        }
    };
    Ok(SamplingSchedule {
        mode,
        bounds,
        horizon,
        instants,
    })
}

/// `x = (x_p, ξ, q, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridState {
    pub xp: Vec<f64>,
    pub xi: Vec<f64>,
    pub q: Vec<f64>,
    pub tau: f64,
}

impl HybridState {
    pub fn from_z(z: &Vector, np: usize, nc: usize, tau: f64) -> Self {
        let s = z.as_slice();
        Self {
            xp: s[..np].to_vec(),
            xi: s[np..np + nc].to_vec(),
            q: s[np + nc..].to_vec(),
            tau,
        }
    }

    pub fn z(&self) -> Vector {
        Vector::from_iterator(
            self.xp.len() + self.xi.len() + self.q.len(),
            self.xp.iter().chain(&self.xi).chain(&self.q).copied(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub j: usize,
    pub state: HybridState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridTrajectory {
    pub samples: Vec<TrajectorySample>,
    /// `[t_j, t_{j+1}]` for each `j`.
    pub intervals: Vec<(f64, f64)>,
    pub np: usize,
    pub nc: usize,
    pub nu: usize,
}

impl HybridTrajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples
            .last()
            .expect("trajectories hold at least the initial sample")
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    pub fn jumps(&self) -> usize {
        self.last().j
    }

    /// Indices `(before, after)` of the two samples recorded at each jump.
    pub fn jump_pairs(&self) -> Vec<(usize, usize)> {
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].j == w[0].j + 1)
            .map(|(i, _)| (i, i + 1))
            .collect()
    }

    pub fn csv_header(&self, with_v: bool) -> String {
        let mut cols = vec!["t".to_string(), "j".to_string()];
        cols.extend((1..=self.np).map(|i| format!("xp{i}")));
        cols.extend((1..=self.nc).map(|i| format!("xi{i}")));
        cols.extend((1..=self.nu).map(|i| format!("q{i}")));
        cols.push("tau".into());
        if with_v {
            cols.push("V".into());
        }
        cols.join(",")
    }

    /// One row per recorded sample; `v` must be aligned with the samples.
    pub fn to_csv(&self, v: Option<&[f64]>) -> Result<String> {
        if let Some(v) = v {
            if v.len() != self.samples.len() {
                return Err(validation("V series length differs from the trajectory"));
            }
        }
        let mut out = self.csv_header(v.is_some());
        out.push('\n');
        for (i, s) in self.samples.iter().enumerate() {
            write!(out, "{},{}", s.t, s.j).unwrap();
            for x in s.state.xp.iter().chain(&s.state.xi).chain(&s.state.q) {
                write!(out, ",{x}").unwrap();
            }
            write!(out, ",{}", s.state.tau).unwrap();
            if let Some(v) = v {
                write!(out, ",{}", v[i]).unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// `exp([[F, B_f d], [0, 0]] dt)`.
pub fn flow_propagator(f: &Mat, bf: &Mat, d: &Vector, dt: f64) -> Mat {
    let n = f.nrows();
    let mut m = Mat::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(f);
    m.view_mut((0, n), (n, 1)).copy_from(&(bf * d));
    linalg::expm(&(m * dt))
}

fn apply(phi: &Mat, z: &Vector) -> Vector {
    let n = z.len();
    phi.view((0, 0), (n, n)) * z + phi.view((0, n), (n, 1)).column(0)
}

/// Exact solution of `ż = F z + B_f d` after `dt`.
pub fn flow_step(z: &Vector, f: &Mat, bf: &Mat, d: &Vector, dt: f64) -> Vector {
    assert!(dt >= 0.0, "flow_step needs dt >= 0");
    apply(&flow_propagator(f, bf, d, dt), z)
}

pub fn jump(z: &Vector, j: &Mat) -> Vector {
    j * z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    /// Recorded sub-steps per flow interval.
    pub resolution: usize,
    /// Initial timer `τ(0, 0)`.
    pub tau0: f64,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            tau0: 0.0,
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn simulate(
    plant: &PlantModel,
    delta: &UncertaintySample,
    d: &DriftVector,
    controller: &Controller,
    schedule: &SamplingSchedule,
    z0: &Vector,
    options: &SimulationOptions,
) -> Result<HybridTrajectory> {
    let cl = assemble_realized(plant, controller, delta)?;
    let (np, nc, nu) = (cl.np, cl.nc, cl.nu);
    if z0.len() != cl.n() {
        return Err(validation(format!("z0 has length {}, expected {}", z0.len(), cl.n())));
    }
    if d.as_vector().len() != np {
        return Err(validation("drift length differs from n_p"));
    }
    let t2 = schedule.bounds.t2();
    let first = schedule.instants.first().copied().unwrap_or(schedule.horizon);
    if !(options.tau0 >= 0.0 && within(options.tau0 + first, 0.0, t2)) {
        return Err(validation(format!(
            "initial timer {} leaves the flow set before the first sample at {first}",
            options.tau0
        )));
    }
    let res = options.resolution.max(1);
    let dvec = d.as_vector();

    let mut samples = Vec::new();
    let mut intervals = Vec::new();
    let mut z = z0.clone();
    let mut t = 0.0;
    let mut tau = options.tau0;
    let mut j = 0;
    let flow_to = |z: &mut Vector, t: &mut f64, tau: &mut f64, j: usize, end: f64, out: &mut Vec<TrajectorySample>| {
        let span = (end - *t).max(0.0);
        let phi = flow_propagator(&cl.f, &cl.bf, dvec, span / res as f64);
        let (t0, tau0) = (*t, *tau);
        for k in 1..=res {
            *z = apply(&phi, z);
            let s = span * k as f64 / res as f64;
            *t = if k == res { end } else { t0 + s };
            *tau = tau0 + s;
            out.push(TrajectorySample {
                t: *t,
                j,
                state: HybridState::from_z(z, np, nc, *tau),
            });
        }
    };

    samples.push(TrajectorySample {
        t,
        j,
        state: HybridState::from_z(&z, np, nc, tau),
    });
    for &tk in &schedule.instants {
        let start = t;
        flow_to(&mut z, &mut t, &mut tau, j, tk, &mut samples);
        intervals.push((start, tk));
        z = jump(&z, &cl.j);
        tau = 0.0;
        j += 1;
        samples.push(TrajectorySample {
            t,
            j,
            state: HybridState::from_z(&z, np, nc, tau),
        });
    }
    if schedule.horizon > t {
        let start = t;
        flow_to(&mut z, &mut t, &mut tau, j, schedule.horizon, &mut samples);
        intervals.push((start, schedule.horizon));
    } else {
        intervals.push((t, t));
    }
    Ok(HybridTrajectory {
        samples,
        intervals,
        np,
        nc,
        nu,
    })
}

/// `V = z̃ᵀ W(τ)⁻¹ z̃` with `z̃ = z − shift` at every recorded sample.
pub fn lyapunov_trace(traj: &HybridTrajectory, w: &PolyMatrix, shift: &Vector) -> Result<Vec<f64>> {
    if w.size() != shift.len() || shift.len() != traj.np + traj.nc + traj.nu {
        return Err(validation("certificate, shift and trajectory dimensions differ"));
    }
    traj.samples
        .iter()
        .map(|s| {
            let zt = s.state.z() - shift;
            let p = inverse_at(&w.eval(s.state.tau), s.state.tau)?;
            Ok(zt.dot(&(p * &zt)))
        })
        .collect()
}
