use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use washout_core::linalg::Vector;
use washout_core::model::{lifted_equilibrium, unforced_equilibrium, DriftVector, UncertaintySample};
use washout_core::polymatrix::PolyMatrix;
use washout_core::sdp::SolveStatus;
use washout_core::sim::{generate_schedule, lyapunov_trace, simulate as run_sim, ScheduleMode, SimulationOptions};
use washout_core::synthesis::{sweep_t2, synthesize, SweepSearch, SynthesisResult, SynthesisSpec};
use washout_core::verification::{
    check_certificate, check_observability, check_rank_condition, monodromy_oracle, omega_limit_check,
    CertificateReport, OmegaReport, OracleReport,
};
use washout_core::Error;

use crate::config::{RunConfig, ScheduleConfig};
use crate::{CliError, Outcome};

/// Relative tolerance of the rank tests.
const RANK_TOL: f64 = 1e-9;

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub grid: usize,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Checks {
    pub certificate: CertificateReport,
    pub rank_condition: bool,
    pub observability: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthOutput {
    pub spec: SynthesisSpec,
    pub result: SynthesisResult,
    pub checks: Option<Checks>,
    pub certified: bool,
}

/// Half of the smaller synthesis margin.
fn default_margin(result: &SynthesisResult) -> f64 {
    result
        .diagnostics
        .as_ref()
        .map_or(0.0, |d| 0.5 * d.flow_margin.min(d.jump_margin))
}

fn run_checks(
    spec: &SynthesisSpec,
    result: &SynthesisResult,
    grid: usize,
    margin: f64,
) -> Result<Option<Checks>, CliError> {
    let (Some(w), Some(c)) = (&result.w, &result.controller) else {
        return Ok(None);
    };
    let certificate = check_certificate(w, &spec.plant, c, &spec.bounds, grid, margin)?;
    Ok(Some(Checks {
        certificate,
        rank_condition: check_rank_condition(c, RANK_TOL),
        observability: check_observability(c.l(), c.k(), RANK_TOL),
    }))
}

fn checks_pass(c: &Checks) -> bool {
    c.certificate.passes && c.rank_condition && c.observability
}

pub fn synth(ctx: &Context) -> Result<Outcome, CliError> {
    let degree = ctx
        .cfg
        .degree
        .ok_or_else(|| CliError::Config("degree is required for synth".into()))?;
    let spec = ctx.cfg.synthesis_spec(degree, ctx.cfg.bounds()?);
    let result = synthesize(&spec)?;
    let margin = ctx.cfg.verify.margin.unwrap_or_else(|| default_margin(&result));
    let checks = run_checks(&spec, &result, ctx.grid, margin)?;
    let certified = result.is_feasible() && checks.as_ref().is_some_and(checks_pass);

    println!("status      {:?}", result.status);
    if let Some(c) = &result.controller {
        if let (Some(l), Some(p)) = (c.lambda(), c.pi()) {
            println!("Lambda      {:?}", l.iter().collect::<Vec<_>>());
            println!("Pi          {:?}", washout_core::linalg::to_rows(p));
        }
    }
    if let Some(ch) = &checks {
        println!(
            "certificate {} (flow {:.3e}, jump {:.3e}, W(0) {:.3e}, margin {:.1e})",
            pass_str(ch.certificate.passes),
            ch.certificate.flow.value,
            ch.certificate.jump.value,
            ch.certificate.w0_min_eig,
            margin
        );
        println!("rank        {}", pass_str(ch.rank_condition));
        println!("observable  {}", pass_str(ch.observability));
    }
    write_json(
        &ctx.out.join("synth.json"),
        &SynthOutput {
            spec,
            result,
            checks,
            certified,
        },
    )?;
    Ok(if certified { Outcome::Success } else { Outcome::Negative })
}

fn pass_str(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    degree: usize,
    t2_max: Option<f64>,
    trace: Vec<washout_core::synthesis::SweepProbe>,
}

pub fn sweep(ctx: &Context) -> Result<Outcome, CliError> {
    let bounds = ctx.cfg.bounds()?;
    let sc = &ctx.cfg.sweep;
    let search = SweepSearch {
        lo: sc.lo.unwrap_or(bounds.t1()),
        hi: sc.hi,
        tol: sc.tol,
    };
    let rows: Vec<Result<SweepRow, CliError>> = sc
        .degrees
        .par_iter()
        .map(|&g| {
            let spec = ctx.cfg.synthesis_spec(g, bounds);
            match sweep_t2(&spec, search) {
                Ok(o) => Ok(SweepRow {
                    degree: g,
                    t2_max: Some(o.t2_max),
                    trace: o.trace,
                }),
                Err(Error::NoFeasibleT2 { .. }) => Ok(SweepRow {
                    degree: g,
                    t2_max: None,
                    trace: Vec::new(),
                }),
                Err(e) => Err(e.into()),
            }
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::from("g,T2max\n");
    println!("{:>3}  {:>8}", "g", "T2max");
    for r in &rows {
        let v = r.t2_max.map_or("none".to_string(), |t| format!("{t:.4}"));
        println!("{:>3}  {:>8}", r.degree, v);
        csv.push_str(&format!("{},{v}\n", r.degree));
    }
    write(&ctx.out.join("sweep.csv"), &csv)?;
    write_json(&ctx.out.join("sweep.json"), &rows)?;
    Ok(if rows.iter().all(|r| r.t2_max.is_some()) {
        Outcome::Success
    } else {
        Outcome::Negative
    })
}

fn load_synth(path: &Path) -> Result<SynthOutput, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Serialize)]
struct LyapunovSummary {
    v0: f64,
    v_end: f64,
    min_v: f64,
    jumps: usize,
    /// Jumps across which `V` did not strictly decrease.
    non_decreasing_jumps: usize,
}

#[derive(Debug, Serialize)]
struct SimulateOutput {
    seed: u64,
    instants: usize,
    samples: usize,
    omega: OmegaReport,
    lyapunov: Option<LyapunovSummary>,
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.cfg;
    let sim = &cfg.simulation;
    let stored = match &sim.result {
        Some(p) => Some(load_synth(p)?),
        None => None,
    };
    let controller = match (&sim.controller, &stored) {
        (Some(c), _) => c.clone(),
        (None, Some(s)) => s
            .result
            .controller
            .clone()
            .ok_or_else(|| CliError::Config("stored result has no controller".into()))?,
        (None, None) => {
            return Err(CliError::Config(
                "simulation needs an inline controller or a synth result".into(),
            ))
        }
    };
    let w: Option<PolyMatrix> = stored.as_ref().and_then(|s| s.result.w.clone());
    let plant = &cfg.plant;
    let bounds = || match (cfg.bounds, &stored) {
        (Some(b), _) => Ok(b),
        (None, Some(s)) => Ok(s.spec.bounds),
        (None, None) => cfg.bounds(),
    };
    let seed = ctx.seed.unwrap_or(sim.seed);
    let mode = match &sim.schedule {
        ScheduleConfig::UniformRandom => {
            let b = bounds()?;
            ScheduleMode::UniformRandom {
                t1: b.t1(),
                t2: b.t2(),
                seed,
            }
        }
        ScheduleConfig::Periodic { period: Some(period) } => ScheduleMode::Periodic { period: *period },
        ScheduleConfig::Periodic { period: None } => ScheduleMode::Periodic { period: bounds()?.t2() },
        ScheduleConfig::Explicit { instants } => {
            let b = bounds()?;
            ScheduleMode::Explicit {
                t1: b.t1(),
                t2: b.t2(),
                instants: instants.clone(),
            }
        }
    };
    let schedule = generate_schedule(mode, sim.horizon)?;
    let delta = sim
        .delta
        .clone()
        .unwrap_or_else(|| UncertaintySample::zero(plant.n_delta(), plant.m_delta()));
    let d = sim.d.clone().unwrap_or_else(|| DriftVector::zero(plant.np()));
    let n = plant.np() + controller.nc() + controller.nu();
    let z0 = match &sim.z0 {
        Some(v) => Vector::from_vec(v.clone()),
        None => Vector::zeros(n),
    };
    let options = SimulationOptions {
        resolution: sim.resolution,
        tau0: sim.tau0,
    };
    let traj = run_sim(plant, &delta, &d, &controller, &schedule, &z0, &options)?;
    let omega = omega_limit_check(&traj, plant, &delta, &d, &controller, sim.tol)?;

    let (v, lyapunov) = match &w {
        Some(w) => {
            let (a, _) = plant.realize(&delta)?;
            let shift = lifted_equilibrium(&controller, &unforced_equilibrium(&a, &d)?)?;
            let v = lyapunov_trace(&traj, w, &shift)?;
            let pairs = traj.jump_pairs();
            let summary = LyapunovSummary {
                v0: v[0],
                v_end: *v.last().expect("nonempty"),
                min_v: v.iter().copied().fold(f64::INFINITY, f64::min),
                jumps: pairs.len(),
                non_decreasing_jumps: pairs.iter().filter(|&&(a, b)| !(v[b] < v[a])).count(),
            };
            (Some(v), Some(summary))
        }
        None => (None, None),
    };
    write(&ctx.out.join("trajectory.csv"), &traj.to_csv(v.as_deref())?)?;

    println!(
        "tail        {} (x_p {:.3e}, xi {:.3e}, q {:.3e}, tol {:.1e})",
        pass_str(omega.passes),
        omega.max_dev_xp,
        omega.max_dev_xi,
        omega.max_abs_q,
        omega.tol
    );
    let mut ok = omega.passes;
    if let Some(l) = &lyapunov {
        let good = l.non_decreasing_jumps == 0 && l.min_v >= 0.0;
        println!(
            "lyapunov    {} (V0 {:.3e}, V_end {:.3e}, {} jumps)",
            pass_str(good),
            l.v0,
            l.v_end,
            l.jumps
        );
        ok &= good;
    }
    write_json(
        &ctx.out.join("simulate.json"),
        &SimulateOutput {
            seed,
            instants: schedule.instants.len(),
            samples: traj.samples.len(),
            omega,
            lyapunov,
        },
    )?;
    Ok(if ok { Outcome::Success } else { Outcome::Negative })
}

#[derive(Debug, Serialize)]
struct VerifyOutput {
    status: SolveStatus,
    checks: Option<Checks>,
    oracle: Option<OracleReport>,
    passes: bool,
}

pub fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let path = ctx
        .cfg
        .verify
        .result
        .clone()
        .unwrap_or_else(|| ctx.out.join("synth.json"));
    let stored = load_synth(&path)?;
    let spec = &stored.spec;
    let result = &stored.result;
    let margin = ctx.cfg.verify.margin.unwrap_or_else(|| default_margin(result));
    let checks = run_checks(spec, result, ctx.grid, margin)?;
    let oracle = match &result.controller {
        Some(c) => {
            let deltas = ctx
                .cfg
                .verify
                .deltas
                .clone()
                .unwrap_or_else(|| spec.plant.vertex_samples());
            Some(monodromy_oracle(
                &spec.plant,
                c,
                &spec.bounds,
                ctx.cfg.verify.periods,
                &deltas,
            )?)
        }
        None => None,
    };
    let passes =
        result.is_feasible() && checks.as_ref().is_some_and(checks_pass) && oracle.as_ref().is_some_and(|o| o.passes);
    println!("status      {:?}", result.status);
    if let Some(ch) = &checks {
        println!("certificate {}", pass_str(ch.certificate.passes));
        println!("rank        {}", pass_str(ch.rank_condition));
        println!("observable  {}", pass_str(ch.observability));
    }
    if let Some(o) = &oracle {
        println!("oracle      {} (max rho {:.6})", pass_str(o.passes), o.max_rho);
    }
    write_json(
        &ctx.out.join("verify.json"),
        &VerifyOutput {
            status: result.status,
            checks,
            oracle,
            passes,
        },
    )?;
    Ok(if passes { Outcome::Success } else { Outcome::Negative })
}
