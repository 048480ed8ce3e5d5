//! Checks on synthesized controllers and certificates.
//!
//! Structural tests (rank, observability), the analysis inequalities in
//! `P = W⁻¹` on a grid, and brute-force oracles: the spectral radius of the
//! periodic monodromy map and the tail of simulated trajectories.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{self, block, Mat};
use crate::model::{
    assemble_nominal, assemble_realized, jump_matrix, lifted_equilibrium, unforced_equilibrium, Controller,
    DriftVector, PlantModel, SamplingBounds, UncertaintySample,
};
use crate::polymatrix::{uniform_grid, PolyMatrix};
use crate::sim::HybridTrajectory;

/// Default number of grid points for certificate checks.
pub const DEFAULT_GRID: usize = 1001;

/// Monodromy oracle passes iff `max ρ < 1 − ORACLE_GAP`.
pub const ORACLE_GAP: f64 = 1e-6;

/// `rank [[R, K], [G, L − I]]` and `rank [[K], [L − I]]`.
pub fn rank_pair(c: &Controller, tol: f64) -> (usize, usize) {
    let nc = c.nc();
    let lmi = c.l() - Mat::identity(nc, nc);
    let lhs = block(&[vec![Some(c.r()), Some(c.k())], vec![Some(c.g()), Some(&lmi)]]);
    let rhs = block(&[vec![Some(c.k())], vec![Some(&lmi)]]);
    (linalg::rank(&lhs, tol), linalg::rank(&rhs, tol))
}

/// Necessary condition for preserving every equilibrium: the image of
/// `[R; G]` lies in that of `[K; L − I]`.
pub fn check_rank_condition(c: &Controller, tol: f64) -> bool {
    let (lhs, rhs) = rank_pair(c, tol);
    lhs == rhs
}

/// Full column rank of `O = [K; KL; …; KL^{n_c − 1}]`.
pub fn check_observability(l: &Mat, k: &Mat, tol: f64) -> bool {
    let nc = l.nrows();
    assert_eq!(nc, l.ncols(), "L must be square");
    if nc == 0 {
        return true;
    }
    let mut rows = Vec::with_capacity(nc);
    let mut cur = k.clone();
    for _ in 0..nc {
        rows.push(cur.clone());
        cur = &cur * l;
    }
    let o = block(&rows.iter().map(|m| vec![Some(m)]).collect::<Vec<_>>());
    linalg::rank(&o, tol) == nc
}

/// Worst value of one condition over the grid and where it occurs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub value: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `λ_max` of the flow condition on `[0, T2]` after the congruence
    /// `diag(W, I, I)`, which restores the scale of the design program.
    pub flow: Witness,
    /// `λ_max(W (J̄ᵀP(0)J̄ − P) W)` on `[T1, T2]`.
    pub jump: Witness,
    /// `λ_min(W(0))`.
    pub w0_min_eig: f64,
    /// Unscaled `λ_max` of the flow condition in `P`.
    pub flow_raw: Witness,
    /// Unscaled `λ_max(J̄ᵀP(0)J̄ − P(τ))`.
    pub jump_raw: Witness,
    /// `λ_min(P(0))`.
    pub p0_min_eig: f64,
    /// `λ_min(P(τ))` on `[0, T2]`.
    pub p_min_eig: Witness,
    pub grid_n: usize,
    pub margin: f64,
    pub flow_passes: bool,
    pub jump_passes: bool,
    pub p0_passes: bool,
    pub passes: bool,
}

fn worst<I: Iterator<Item = (f64, f64)>>(it: I, pick_max: bool) -> Witness {
    let mut w = Witness {
        value: if pick_max { f64::NEG_INFINITY } else { f64::INFINITY },
        tau: f64::NAN,
    };
    for (tau, v) in it {
        if (pick_max && v > w.value) || (!pick_max && v < w.value) {
            w = Witness { value: v, tau };
        }
    }
    w
}

/// Grid check of the analysis inequalities with `P = W⁻¹` and
/// `Ṗ = −P Ẇ P`: the flow condition on `[0, T2]`, the jump condition on
/// `[T1, T2]` and `P(0) ≻ 0`. Each must hold with `margin` to spare in the
/// design scale (see the field docs of [`CertificateReport`]).
pub fn check_certificate(
    w: &PolyMatrix,
    plant: &PlantModel,
    controller: &Controller,
    bounds: &SamplingBounds,
    grid_n: usize,
    margin: f64,
) -> Result<CertificateReport> {
    let cl = assemble_nominal(plant, controller)?;
    let n = cl.n();
    if w.size() != n {
        return Err(crate::error::validation(format!(
            "certificate has size {}, closed loop has {n}",
            w.size()
        )));
    }
    let (t1, t2) = (bounds.t1(), bounds.t2());
    let mut grid = uniform_grid(0.0, t2, grid_n);
    if !grid.iter().any(|&t| t == t1) {
        let at = grid.partition_point(|&t| t < t1);
        grid.insert(at, t1);
    }
    let p = w.inverse_on_grid(&grid)?;
    let wdot = w.derivative();
    let (nd, md) = (cl.d.ncols(), cl.e.nrows());
    let minus_i_d = -Mat::identity(nd, nd);
    let minus_i_m = -Mat::identity(md, md);
    let et = cl.e.transpose();
    let id_d = Mat::identity(nd, nd);
    let id_m = Mat::identity(md, md);

    let mut flow_raw = Vec::with_capacity(grid.len());
    let mut flow = Vec::with_capacity(grid.len());
    for (&tau, p) in grid.iter().zip(&p) {
        let pdot = -(p * wdot.eval(tau) * p);
        let top = linalg::sym(&(pdot + linalg::he(&(p * &cl.f0))));
        let pd = p * &cl.d;
        let m = block(&[
            vec![Some(&top), Some(&pd), Some(&et)],
            vec![Some(&pd.transpose()), Some(&minus_i_d), None],
            vec![Some(&cl.e), None, Some(&minus_i_m)],
        ]);
        let wt = w.eval(tau);
        let t = block(&[
            vec![Some(&wt), None, None],
            vec![None, Some(&id_d), None],
            vec![None, None, Some(&id_m)],
        ]);
        flow_raw.push((tau, linalg::max_eig(&m)));
        flow.push((tau, linalg::max_eig(&(&t * m * &t))));
    }

    let jbar = jump_matrix(controller);
    let p0 = &p[0];
    let jpj = jbar.transpose() * p0 * &jbar;
    let mut jump_raw = Vec::new();
    let mut jump = Vec::new();
    for (&tau, p) in grid.iter().zip(&p).filter(|(&tau, _)| tau >= t1) {
        let diff = &jpj - p;
        let wt = w.eval(tau);
        jump_raw.push((tau, linalg::max_eig(&diff)));
        jump.push((tau, linalg::max_eig(&(&wt * diff * &wt))));
    }

    let flow = worst(flow.into_iter(), true);
    let jump = worst(jump.into_iter(), true);
    let w0_min_eig = linalg::min_eig(&w.eval(0.0));
    let p_min_eig = worst(grid.iter().zip(&p).map(|(&tau, p)| (tau, linalg::min_eig(p))), false);
    let flow_passes = flow.value <= -margin;
    let jump_passes = jump.value <= -margin;
    let p0_passes = w0_min_eig >= margin && p_min_eig.value > 0.0;
    Ok(CertificateReport {
        flow,
        jump,
        w0_min_eig,
        flow_raw: worst(flow_raw.into_iter(), true),
        jump_raw: worst(jump_raw.into_iter(), true),
        p0_min_eig: linalg::min_eig(p0),
        p_min_eig,
        grid_n: grid.len(),
        margin,
        flow_passes,
        jump_passes,
        p0_passes,
        passes: flow_passes && jump_passes && p0_passes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub period: f64,
    pub delta_index: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub periods: Vec<f64>,
    pub deltas: Vec<UncertaintySample>,
    pub entries: Vec<OracleEntry>,
    pub max_rho: f64,
    /// Entry attaining `max_rho`.
    pub worst: Option<OracleEntry>,
    pub passes: bool,
}

/// `ρ(exp(F T) J)` for periodic sampling at each `T` of a uniform grid on
/// `[T1, T2]` and each uncertainty sample.
pub fn monodromy_oracle(
    plant: &PlantModel,
    controller: &Controller,
    bounds: &SamplingBounds,
    periods_n: usize,
    deltas: &[UncertaintySample],
) -> Result<OracleReport> {
    let periods = uniform_grid(bounds.t1(), bounds.t2(), periods_n);
    let mut entries = Vec::with_capacity(periods.len() * deltas.len());
    for (k, delta) in deltas.iter().enumerate() {
        let cl = assemble_realized(plant, controller, delta)?;
        for &t in &periods {
            let m = linalg::expm(&(&cl.f * t)) * &cl.j;
            entries.push(OracleEntry {
                period: t,
                delta_index: k,
                rho: linalg::spectral_radius(&m),
            });
        }
    }
    let worst = entries.iter().copied().max_by(|a, b| a.rho.total_cmp(&b.rho));
    let max_rho = worst.map_or(0.0, |e| e.rho);
    Ok(OracleReport {
        periods,
        deltas: deltas.to_vec(),
        entries,
        max_rho,
        worst,
        passes: max_rho < 1.0 - ORACLE_GAP,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaReport {
    pub xbar: Vec<f64>,
    pub xibar: Vec<f64>,
    /// Start of the inspected tail (last 10% of the time span).
    pub tail_from: f64,
    pub tail_samples: usize,
    pub max_dev_xp: f64,
    pub max_dev_xi: f64,
    pub max_abs_q: f64,
    pub tol: f64,
    pub passes: bool,
}

/// Compares the tail of a trajectory with `(x̄, ξ̄, 0)`, where `A x̄ + d = 0`
/// and `ξ̄` is the controller's fixed point.
pub fn omega_limit_check(
    traj: &HybridTrajectory,
    plant: &PlantModel,
    delta: &UncertaintySample,
    d: &DriftVector,
    controller: &Controller,
    tol: f64,
) -> Result<OmegaReport> {
    let (a, _) = plant.realize(delta)?;
    let xbar = unforced_equilibrium(&a, d)?;
    let zbar = lifted_equilibrium(controller, &xbar)?;
    let (np, nc) = (traj.np, traj.nc);
    let span = traj.final_time() - traj.samples[0].t;
    let tail_from = traj.final_time() - 0.1 * span;
    let mut dev = [0.0f64; 3];
    let mut count = 0;
    for s in traj.samples.iter().filter(|s| s.t >= tail_from) {
        count += 1;
        let z = s.state.z();
        let diff = z - &zbar;
        for (i, v) in diff.iter().enumerate() {
            let slot = if i < np {
                0
            } else if i < np + nc {
                1
            } else {
                2
            };
            dev[slot] = dev[slot].max(v.abs());
        }
    }
    let passes = count > 0 && dev.iter().all(|&v| v <= tol);
    Ok(OmegaReport {
        xbar: xbar.iter().copied().collect(),
        xibar: zbar.rows(np, nc).iter().copied().collect(),
        tail_from,
        tail_samples: count,
        max_dev_xp: dev[0],
        max_dev_xi: dev[1],
        max_abs_q: dev[2],
        tol,
        passes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_rows, Vector};
    use crate::sim::{generate_schedule, simulate, ScheduleMode, SimulationOptions};

    fn paper_gains() -> Controller {
        Controller::washout(from_rows(&[vec![1.0521]]), from_rows(&[vec![-1.3830, -2.1917]])).unwrap()
    }

    fn m(rows: &[&[f64]]) -> Mat {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn rank_condition_examples() {
        let c = paper_gains();
        assert_eq!(rank_pair(&c, 1e-9), (1, 1));
        assert!(check_rank_condition(&c, 1e-9));

        let i = Mat::identity(2, 2);
        let bad = Controller::new(i.clone(), i.clone(), Mat::zeros(1, 2), Mat::zeros(1, 2)).unwrap();
        assert_eq!(rank_pair(&bad, 1e-9), (2, 0));
        assert!(!check_rank_condition(&bad, 1e-9));

        let l = m(&[&[0.3, 1.0], &[0.0, 2.0]]);
        let k = m(&[&[1.0, -1.0]]);
        let zero_io = Controller::new(l, Mat::zeros(2, 2), k, Mat::zeros(1, 2)).unwrap();
        assert!(check_rank_condition(&zero_io, 1e-9));
    }

    #[test]
    fn observability_examples() {
        assert!(check_observability(&m(&[&[1.0521]]), &m(&[&[0.0521]]), 1e-9));
        assert!(!check_observability(&m(&[&[1.0521]]), &m(&[&[0.0]]), 1e-9));
        assert!(!check_observability(
            &m(&[&[1.0, 0.0], &[0.0, 2.0]]),
            &m(&[&[1.0, 0.0]]),
            1e-9
        ));
        assert!(check_observability(
            &m(&[&[1.0, 1.0], &[0.0, 2.0]]),
            &m(&[&[1.0, 0.0]]),
            1e-9
        ));
    }

    #[test]
    fn oracle_scalar_decay() {
        let z1 = Mat::zeros(1, 1);
        let plant = PlantModel::new(m(&[&[-1.0]]), m(&[&[1.0]]), z1.clone(), z1.clone(), z1.clone()).unwrap();
        let c = Controller::new(z1.clone(), z1.clone(), z1.clone(), z1).unwrap();
        let bounds = SamplingBounds::new(1.0, 1.0).unwrap();
        let r = monodromy_oracle(&plant, &c, &bounds, 3, &[UncertaintySample::zero(1, 1)]).unwrap();
        assert!((r.max_rho - (-1.0f64).exp()).abs() < 1e-12, "{}", r.max_rho);
        assert!(r.passes);
    }

    #[test]
    fn oracle_open_loop_is_unstable() {
        let plant = PlantModel::example();
        let c = Controller::new(
            Mat::identity(1, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let bounds = SamplingBounds::new(0.5, 1.0).unwrap();
        let r = monodromy_oracle(&plant, &c, &bounds, 20, &plant.vertex_samples()).unwrap();
        // eigenvalue (1 + √5)/2 of A0 gives at least exp(φ T1)
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!(r.max_rho >= (phi * 0.5).exp() - 1e-9);
        assert!(!r.passes);
        assert_eq!(r.entries.len(), 20 * 3);
    }

    #[test]
    fn oracle_with_reference_gains() {
        let plant = PlantModel::example();
        let bounds = SamplingBounds::new(0.5, 1.0).unwrap();
        let r = monodromy_oracle(&plant, &paper_gains(), &bounds, 20, &plant.vertex_samples()).unwrap();
        assert!(r.passes, "max rho {}", r.max_rho);
    }

    fn run(
        c: &Controller,
        d: [f64; 2],
        horizon: f64,
    ) -> (HybridTrajectory, PlantModel, UncertaintySample, DriftVector) {
        let plant = PlantModel::example();
        let delta = UncertaintySample::scalar(1.0).unwrap();
        let d = DriftVector::new(Vector::from_vec(d.to_vec())).unwrap();
        let s = generate_schedule(ScheduleMode::Periodic { period: 0.75 }, horizon).unwrap();
        let z0 = Vector::from_vec(vec![10.0, 1.0, 0.0, 0.0]);
        let t = simulate(&plant, &delta, &d, c, &s, &z0, &SimulationOptions::default()).unwrap();
        (t, plant, delta, d)
    }

    #[test]
    fn omega_reports_equilibrium() {
        let c = paper_gains();
        let (t, plant, delta, d) = run(&c, [1.0, 10.0], 10.0);
        let r = omega_limit_check(&t, &plant, &delta, &d, &c, 1e-2).unwrap();
        assert!((r.xbar[0] + 11.25).abs() < 1e-12 && (r.xbar[1] - 1.25).abs() < 1e-12);
        // ξ̄ = Λ ξ̄ + Π x̄
        let xi = -(-1.3830 * -11.25 + -2.1917 * 1.25) / 0.0521;
        assert!((r.xibar[0] - xi).abs() < 1e-9 * xi.abs());
        assert!(r.tail_samples > 0);
    }

    #[test]
    fn omega_fails_for_destabilized_gains() {
        let c = Controller::washout(from_rows(&[vec![1.0521]]), from_rows(&[vec![8.617, 7.8083]])).unwrap();
        let (t, plant, delta, d) = run(&c, [1.0, 10.0], 20.0);
        let r = omega_limit_check(&t, &plant, &delta, &d, &c, 1e-2).unwrap();
        assert!(!r.passes);
    }
}
