//! Controller synthesis from the clock-dependent design inequalities and the
//! maximum-`T2` sweep.
//!
//! Decision variables: the coefficients `W_0..W_g` of `W(τ) = Σ τ^k W_k`,
//! `Y`, and the blocks of `S = [[S11, 0], [S21, S22]]`. Two interval
//! constraints are compiled:
//!
//! ```text
//! jump, τ ∈ [T1, T2]:  [[−W_0, J0 S + B_J [Y 0]], [*, W(τ) − He(S)]] ≺ 0
//! flow, τ ∈ [0, T2]:   [[−Ẇ + He(F0 W), D, W Eᵀ], [*, −I, 0], [*, *, −I]] ≺ 0
//! ```
//!
//! Gains follow from `[Π Λ] = Y S11⁻¹`. A positive decay rate `α` replaces
//! `F0` by `F0 + (α/2) I` in the flow constraint.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::linalg::{self, Mat};
use crate::model::{assemble_nominal, ClosedLoopMatrices, Controller, PlantModel, SamplingBounds};
use crate::polymatrix::{uniform_grid, PolyMatrix};
use crate::sdp::{
    self, BlockId, BlockKind, ConicBackend, ConicProblem, InteriorPoint, SolveOptions, SolveStatus, VarRef,
};
use crate::sos::{self, AffinePolyMatrix, IntervalNegativityConstraint, Margin, SosCertificate, SosHandle};

/// Upper bound on `cond(S11)` for gain recovery.
pub const MAX_S11_COND: f64 = 1e10;

/// Default bound on the summed trace of the Gram matrices. The design
/// inequalities admit directions of unbounded growth; the bound makes the
/// feasible set compact so both primal and dual programs are strictly
/// feasible.
pub const DEFAULT_TRACE_BOUND: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Strict inequalities with fixed margins.
    #[default]
    Feasibility,
    /// Maximize a common margin `t`; feasible iff `t ≥ max(ε_flow, ε_jump)`.
    MaxMargin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSpec {
    pub plant: PlantModel,
    pub bounds: SamplingBounds,
    pub degree: usize,
    /// Strictness of the flow constraint; `None` picks a scale-aware default.
    #[serde(default)]
    pub eps_flow: Option<f64>,
    #[serde(default)]
    pub eps_jump: Option<f64>,
    #[serde(default)]
    pub objective: Objective,
    /// Half-degree of the Gram multiplier for each constraint.
    #[serde(default)]
    pub flow_half_degree: Option<usize>,
    #[serde(default)]
    pub jump_half_degree: Option<usize>,
    /// Bound on the summed trace of all Gram matrices.
    #[serde(default = "default_trace_bound")]
    pub trace_bound: f64,
    /// Guaranteed flow decay rate `α ≥ 0`: the flow condition uses
    /// `F0 + (α/2) I`, so `V̇ ≤ −α V` between samples.
    #[serde(default)]
    pub decay_rate: f64,
    #[serde(default)]
    pub solver: SolveOptions,
}

fn default_trace_bound() -> f64 {
    DEFAULT_TRACE_BOUND
}

impl SynthesisSpec {
    pub fn new(plant: PlantModel, bounds: SamplingBounds, degree: usize) -> Self {
        Self {
            plant,
            bounds,
            degree,
            eps_flow: None,
            eps_jump: None,
            objective: Objective::default(),
            flow_half_degree: None,
            jump_half_degree: None,
            trace_bound: DEFAULT_TRACE_BOUND,
            decay_rate: 0.0,
            solver: SolveOptions::default(),
        }
    }

    pub fn with_bounds(&self, bounds: SamplingBounds) -> Self {
        Self { bounds, ..self.clone() }
    }

    fn check(&self) -> Result<()> {
        if !(self.trace_bound > 0.0) {
            return Err(validation("trace bound must be positive"));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(validation("decay rate must be finite and nonnegative"));
        }
        for eps in [self.eps_flow, self.eps_jump].into_iter().flatten() {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(validation("synthesis margins must be positive"));
            }
        }
        Ok(())
    }
}

/// Handles into a built design program.
#[derive(Debug, Clone)]
pub struct DesignProgram {
    pub problem: ConicProblem,
    pub w: Vec<BlockId>,
    pub y: BlockId,
    pub s11: BlockId,
    pub s21: BlockId,
    pub s22: BlockId,
    pub margin: Option<VarRef>,
    pub flow: IntervalNegativityConstraint,
    pub jump: IntervalNegativityConstraint,
    pub flow_handle: SosHandle,
    pub jump_handle: SosHandle,
    pub eps_flow: f64,
    pub eps_jump: f64,
}

fn sym_unit(n: usize, i: usize, j: usize) -> Mat {
    let mut b = Mat::zeros(n, n);
    b[(i, j)] = 1.0;
    b[(j, i)] = 1.0;
    b
}

fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Mat {
    let mut b = Mat::zeros(rows, cols);
    b[(i, j)] = 1.0;
    b
}

/// Adds `m` at block `(r0, c0)` of `target` and, off the diagonal, `mᵀ` at
/// `(c0, r0)`.
fn place(target: &mut Mat, r0: usize, c0: usize, m: &Mat) {
    let mut v = target.view_mut((r0, c0), m.shape());
    v += m;
    if r0 != c0 {
        let mut v = target.view_mut((c0, r0), (m.ncols(), m.nrows()));
        v += m.transpose();
    }
}

/// Polynomial from sparse `(power, coefficient)` pairs.
fn poly(size: usize, parts: Vec<(usize, Mat)>) -> PolyMatrix {
    let top = parts.iter().map(|(p, _)| *p).max().unwrap_or(0);
    let mut coeffs = vec![Mat::zeros(size, size); top + 1];
    for (p, m) in parts {
        coeffs[p] += m;
    }
    PolyMatrix::new(size, coeffs).expect("square coefficients")
}

pub fn build_program(spec: &SynthesisSpec) -> Result<DesignProgram> {
    spec.check()?;
    let plant = &spec.plant;
    let (np, nu) = (plant.np(), plant.nu());
    let (nd, md) = (plant.n_delta(), plant.m_delta());
    let n = np + 2 * nu;
    let nx = np + nu;
    let g = spec.degree;
    let lifted = lifted_blocks(plant)?;
    let f0 = &lifted.f0 + Mat::identity(n, n) * (0.5 * spec.decay_rate);

    let mut problem = ConicProblem::new();
    let w: Vec<BlockId> = (0..=g)
        .map(|k| problem.add_block(format!("W{k}"), BlockKind::Symmetric, n, n))
        .collect();
    let y = problem.add_block("Y", BlockKind::Free, nu, nx);
    let s11 = problem.add_block("S11", BlockKind::Free, nx, nx);
    let s21 = problem.add_block("S21", BlockKind::Free, nu, nx);
    let s22 = problem.add_block("S22", BlockKind::Free, nu, nu);
    let margin = (spec.objective == Objective::MaxMargin).then(|| {
        let t = problem.add_block("t", BlockKind::Free, 1, 1);
        problem.entry(t, 0, 0)
    });

    // Flow constraint.
    let nf = n + nd + md;
    let mut flow = AffinePolyMatrix::new(nf);
    let mut fc = Mat::zeros(nf, nf);
    place(&mut fc, 0, n, &lifted.d);
    place(&mut fc, n, n, &-Mat::identity(nd, nd));
    place(&mut fc, n + nd, n + nd, &-Mat::identity(md, md));
    flow.add_constant(&PolyMatrix::constant(&fc)?)?;
    for (k, &wk) in w.iter().enumerate() {
        for i in 0..n {
            for j in i..n {
                let b = sym_unit(n, i, j);
                let mut cur = Mat::zeros(nf, nf);
                place(&mut cur, 0, 0, &linalg::he(&(&f0 * &b)));
                place(&mut cur, 0, n + nd, &(&b * lifted.e.transpose()));
                let mut parts = vec![(k, cur)];
                if k > 0 {
                    let mut der = Mat::zeros(nf, nf);
                    place(&mut der, 0, 0, &(&b * -(k as f64)));
                    parts.push((k - 1, der));
                }
                flow.add_term(problem.entry(wk, i, j), poly(nf, parts))?;
            }
        }
    }

    // Jump constraint.
    let nj = 2 * n;
    let mut jump = AffinePolyMatrix::new(nj);
    for (k, &wk) in w.iter().enumerate() {
        for i in 0..n {
            for j in i..n {
                let b = sym_unit(n, i, j);
                let mut cur = Mat::zeros(nj, nj);
                place(&mut cur, n, n, &b);
                let mut parts = vec![(k, cur)];
                if k == 0 {
                    let mut w0 = Mat::zeros(nj, nj);
                    place(&mut w0, 0, 0, &-&b);
                    parts.push((0, w0));
                }
                jump.add_term(problem.entry(wk, i, j), poly(nj, parts))?;
            }
        }
    }
    let s_blocks = [(s11, 0, 0, nx, nx), (s21, nx, 0, nu, nx), (s22, nx, nx, nu, nu)];
    for (id, r0, c0, rows, cols) in s_blocks {
        for r in 0..rows {
            for c in 0..cols {
                let e = unit(n, n, r0 + r, c0 + c);
                let mut m = Mat::zeros(nj, nj);
                place(&mut m, 0, n, &(&lifted.j0 * &e));
                place(&mut m, n, n, &-linalg::he(&e));
                jump.add_term(problem.entry(id, r, c), PolyMatrix::constant(&m)?)?;
            }
        }
    }
    for r in 0..nu {
        for c in 0..nx {
            let mut m = Mat::zeros(nj, nj);
            place(&mut m, 0, n, &(&lifted.bj * unit(nu, n, r, c)));
            jump.add_term(problem.entry(y, r, c), PolyMatrix::constant(&m)?)?;
        }
    }

    let eps_flow = spec
        .eps_flow
        .unwrap_or_else(|| IntervalNegativityConstraint::default_margin(&flow));
    let eps_jump = spec
        .eps_jump
        .unwrap_or_else(|| IntervalNegativityConstraint::default_margin(&jump));
    let (flow_margin, jump_margin) = match margin {
        Some(t) => (Margin::Variable(t), Margin::Variable(t)),
        None => (Margin::Fixed(eps_flow), Margin::Fixed(eps_jump)),
    };
    let mut flow = IntervalNegativityConstraint::new(flow, 0.0, spec.bounds.t2(), flow_margin)?;
    flow.half_degree = spec.flow_half_degree;
    let mut jump = IntervalNegativityConstraint::new(jump, spec.bounds.t1(), spec.bounds.t2(), jump_margin)?;
    jump.half_degree = spec.jump_half_degree;
    let flow_handle = sos::compile(&flow, &mut problem)?;
    let jump_handle = sos::compile(&jump, &mut problem)?;
    if spec.trace_bound.is_finite() {
        let slack = problem.add_block("trace_slack", BlockKind::Psd, 1, 1);
        let w = 1.0 / spec.trace_bound;
        let mut row = vec![(problem.entry(slack, 0, 0), w)];
        for h in [&flow_handle, &jump_handle] {
            for id in std::iter::once(h.q0).chain(h.q1) {
                for i in 0..problem.block(id).rows {
                    row.push((problem.entry(id, i, i), w));
                }
            }
        }
        problem.add_constraint(row, 1.0)?;
    }
    if let Some(t) = margin {
        problem.set_objective(vec![(t, -1.0)])?;
    }
    Ok(DesignProgram {
        problem,
        w,
        y,
        s11,
        s21,
        s22,
        margin,
        flow,
        jump,
        flow_handle,
        jump_handle,
        eps_flow,
        eps_jump,
    })
}

/// Lifted blocks `F0, D, E, J0, B_J` for a washout controller of matching size.
fn lifted_blocks(plant: &PlantModel) -> Result<ClosedLoopMatrices> {
    let nu = plant.nu();
    let placeholder = Controller::washout(Mat::zeros(nu, nu), Mat::zeros(nu, plant.np()))?;
    assemble_nominal(plant, &placeholder)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisDiagnostics {
    pub cond_s11: f64,
    /// Margin enforced by the program (fixed `ε` or the optimal `t`).
    pub flow_margin: f64,
    pub jump_margin: f64,
    /// `−λ_max` of each design matrix over a 201-point grid.
    pub flow_grid_margin: f64,
    pub jump_grid_margin: f64,
    pub flow_residual: f64,
    pub jump_residual: f64,
    /// `λ_min(He(S))`.
    pub min_eig_he_s: f64,
    pub det_lambda_minus_i: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub status: SolveStatus,
    pub degree: usize,
    pub bounds: SamplingBounds,
    /// Optimal margin of the maximization phase (max-margin objective only).
    pub max_margin: Option<f64>,
    pub w: Option<PolyMatrix>,
    #[serde(with = "crate::serde_matrix::option")]
    pub y: Option<Mat>,
    #[serde(with = "crate::serde_matrix::option")]
    pub s11: Option<Mat>,
    #[serde(with = "crate::serde_matrix::option")]
    pub s21: Option<Mat>,
    #[serde(with = "crate::serde_matrix::option")]
    pub s22: Option<Mat>,
    pub controller: Option<Controller>,
    pub flow_certificate: Option<SosCertificate>,
    pub jump_certificate: Option<SosCertificate>,
    pub diagnostics: Option<SynthesisDiagnostics>,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }

    fn without_solution(status: SolveStatus, spec: &SynthesisSpec) -> Self {
        Self {
            status,
            degree: spec.degree,
            bounds: spec.bounds,
            max_margin: None,
            w: None,
            y: None,
            s11: None,
            s21: None,
            s22: None,
            controller: None,
            flow_certificate: None,
            jump_certificate: None,
            diagnostics: None,
        }
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl FnOnce() -> f64 {
    let start = std::time::Instant::now();
    move || start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl FnOnce() -> f64 {
    || 0.0
}

fn grid_margin(c: &IntervalNegativityConstraint, m: &PolyMatrix) -> f64 {
    uniform_grid(c.lo, c.hi, 201)
        .into_iter()
        .map(|t| -linalg::max_eig(&m.eval(t)))
        .fold(f64::INFINITY, f64::min)
}

/// `[Π Λ] = Y S11⁻¹`.
pub fn recover_gains(y: &Mat, s11: &Mat, np: usize) -> Result<(Mat, Mat)> {
    let cond = linalg::cond(s11);
    if !(cond <= MAX_S11_COND) {
        return Err(Error::RecoveryIllConditioned { cond });
    }
    // Y S11⁻¹ = (S11⁻ᵀ Yᵀ)ᵀ
    let gains = s11
        .transpose()
        .lu()
        .solve(&y.transpose())
        .ok_or(Error::RecoveryIllConditioned { cond })?
        .transpose();
    let nu = y.nrows();
    let pi = gains.columns(0, np).into_owned();
    let lambda = gains.columns(np, nu).into_owned();
    Ok((pi, lambda))
}

pub fn synthesize(spec: &SynthesisSpec) -> Result<SynthesisResult> {
    let elapsed = clock();
    let mut max_margin = None;
    let mut certify = spec.clone();
    if spec.objective == Objective::MaxMargin {
        // Margin maximization ends on the boundary of the Gram cones, where the
        // certificate cannot be validated. Its optimum decides feasibility; a
        // second solve at half that margin yields an interior certificate.
        let prog = build_program(spec)?;
        let sol = InteriorPoint.solve(&prog.problem, &spec.solver);
        let eps = prog.eps_flow.max(prog.eps_jump);
        let status = match (sol.status, prog.margin.map(|t| sol.scalar(t))) {
            (SolveStatus::Feasible, Some(t)) if t.is_finite() => {
                max_margin = Some(t);
                if t < eps {
                    SolveStatus::Infeasible
                } else {
                    certify.eps_flow = Some(prog.eps_flow.max(0.5 * t));
                    certify.eps_jump = Some(prog.eps_jump.max(0.5 * t));
                    SolveStatus::Feasible
                }
            }
            (SolveStatus::Infeasible, _) => SolveStatus::Infeasible,
            _ => SolveStatus::NumericalTrouble,
        };
        if status != SolveStatus::Feasible {
            let mut out = SynthesisResult::without_solution(status, spec);
            out.max_margin = max_margin;
            return Ok(out);
        }
        certify.objective = Objective::Feasibility;
    }
    let prog = build_program(&certify)?;
    let sol = sdp::solve(&prog.problem, &spec.solver);
    let seconds = elapsed();
    if sol.status != SolveStatus::Feasible {
        let mut out = SynthesisResult::without_solution(sol.status, spec);
        out.max_margin = max_margin;
        return Ok(out);
    }

    let coeffs: Vec<Mat> = prog.w.iter().map(|&b| sol.value(&prog.problem, b)).collect();
    let n = spec.plant.np() + 2 * spec.plant.nu();
    let w = PolyMatrix::new(n, coeffs)?;
    let y = sol.value(&prog.problem, prog.y);
    let s11 = sol.value(&prog.problem, prog.s11);
    let s21 = sol.value(&prog.problem, prog.s21);
    let s22 = sol.value(&prog.problem, prog.s22);
    let np = spec.plant.np();
    let nu = spec.plant.nu();
    let (pi, lambda) = recover_gains(&y, &s11, np)?;

    let lmi = &lambda - Mat::identity(nu, nu);
    let det = (&lmi / linalg::max_abs(&lmi).max(1.0)).determinant();
    if det.abs() <= 1e-9 {
        return Err(Error::NonWashout {
            cond: linalg::cond(&lmi),
        });
    }
    let controller = Controller::washout(lambda, pi)?;

    let mut s = Mat::zeros(n, n);
    s.view_mut((0, 0), s11.shape()).copy_from(&s11);
    s.view_mut((np + nu, 0), s21.shape()).copy_from(&s21);
    s.view_mut((np + nu, np + nu), s22.shape()).copy_from(&s22);

    let flow_value = prog.flow.expr.evaluate(&sol);
    let jump_value = prog.jump.expr.evaluate(&sol);
    let diagnostics = SynthesisDiagnostics {
        cond_s11: linalg::cond(&s11),
        flow_margin: prog.eps_flow,
        jump_margin: prog.eps_jump,
        flow_grid_margin: grid_margin(&prog.flow, &flow_value),
        jump_grid_margin: grid_margin(&prog.jump, &jump_value),
        flow_residual: prog.flow_handle.residual(&prog.flow, &prog.problem, &sol),
        jump_residual: prog.jump_handle.residual(&prog.jump, &prog.problem, &sol),
        min_eig_he_s: linalg::min_eig(&linalg::he(&s)),
        det_lambda_minus_i: lmi.determinant(),
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        solve_seconds: seconds,
    };
    Ok(SynthesisResult {
        status: SolveStatus::Feasible,
        degree: spec.degree,
        bounds: spec.bounds,
        max_margin,
        w: Some(w),
        y: Some(y),
        s11: Some(s11),
        s21: Some(s21),
        s22: Some(s22),
        controller: Some(controller),
        flow_certificate: Some(prog.flow_handle.certificate(&prog.problem, &sol)),
        jump_certificate: Some(prog.jump_handle.certificate(&prog.problem, &sol)),
        diagnostics: Some(diagnostics),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl SweepSearch {
    /// Bracket `[T1, 5]`, tolerance 0.01.
    pub fn default_for(t1: f64) -> Self {
        Self {
            lo: t1,
            hi: 5.0,
            tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepProbe {
    pub t2: f64,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub degree: usize,
    pub t1: f64,
    pub t2_max: f64,
    /// Probes in evaluation order.
    pub trace: Vec<SweepProbe>,
}

/// Bisection on `T2` with `T1` and every other setting taken from `base`.
/// Assumes feasibility is monotone in `T2`.
pub fn sweep_t2(base: &SynthesisSpec, search: SweepSearch) -> Result<SweepOutcome> {
    if !(search.lo < search.hi && search.tol > 0.0) {
        return Err(validation("sweep needs lo < hi and tol > 0"));
    }
    let t1 = base.bounds.t1();
    if search.lo < t1 {
        return Err(validation("sweep lower end must be at least T1"));
    }
    let mut trace = Vec::new();
    let mut probe = |t2: f64| -> Result<bool> {
        let spec = base.with_bounds(SamplingBounds::new(t1, t2)?);
        let status = match synthesize(&spec) {
            Ok(r) => r.status,
            Err(Error::RecoveryIllConditioned { .. }) | Err(Error::NonWashout { .. }) => SolveStatus::NumericalTrouble,
            Err(e) => return Err(e),
        };
        trace.push(SweepProbe { t2, status });
        Ok(status == SolveStatus::Feasible)
    };
    let (mut lo, mut hi) = (search.lo, search.hi);
    if !probe(lo)? {
        return Err(Error::NoFeasibleT2 { lo });
    }
    let t2_max = if probe(hi)? {
        hi
    } else {
        while hi - lo > search.tol {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Ok(SweepOutcome {
        degree: base.degree,
        t1,
        t2_max,
        trace,
    })
}
