//! Solver-agnostic semidefinite programs.
//!
//! A [`ConicProblem`] declares matrix-valued decision blocks (free, symmetric
//! or positive-semidefinite), linear equalities over their scalar entries and
//! an optional linear objective (minimized). Symmetric and PSD blocks are
//! scalarized by their upper triangle in row-major order; free blocks by all
//! entries in row-major order.
//!
//! The JSON dump of a problem is
//!
//! ```text
//! { "blocks":      [ { "name": "W0", "kind": "symmetric", "rows": 4, "cols": 4 }, ... ],
//!   "constraints": [ { "terms": [[block, index, coef], ...], "rhs": 0.0 }, ... ],
//!   "objective":   [[block, index, coef], ...] }
//! ```

mod ipm;
mod projection;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::{self, Mat};

pub use ipm::InteriorPoint;
pub use projection::AlternatingProjection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Free,
    Symmetric,
    Psd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
}

impl VarBlock {
    /// Number of scalar entries.
    pub fn len(&self) -> usize {
        match self.kind {
            BlockKind::Free => self.rows * self.cols,
            BlockKind::Symmetric | BlockKind::Psd => self.rows * (self.rows + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scalar index of entry `(i, j)`; symmetric blocks map both triangles to one index.
    pub fn index(&self, i: usize, j: usize) -> usize {
        assert!(
            i < self.rows && j < self.cols,
            "entry ({i},{j}) outside block {}",
            self.name
        );
        match self.kind {
            BlockKind::Free => i * self.cols + j,
            BlockKind::Symmetric | BlockKind::Psd => {
                let (i, j) = if i <= j { (i, j) } else { (j, i) };
                sym_index(self.rows, i, j)
            }
        }
    }

    /// Inverse of [`VarBlock::index`] (upper triangle for symmetric blocks).
    pub fn position(&self, idx: usize) -> (usize, usize) {
        match self.kind {
            BlockKind::Free => (idx / self.cols, idx % self.cols),
            BlockKind::Symmetric | BlockKind::Psd => {
                let n = self.rows;
                let mut i = 0;
                let mut start = 0;
                while start + (n - i) <= idx {
                    start += n - i;
                    i += 1;
                }
                (i, i + idx - start)
            }
        }
    }

    pub fn pack(&self, m: &Mat) -> Vec<f64> {
        assert_eq!(m.shape(), (self.rows, self.cols));
        (0..self.len())
            .map(|k| {
                let (i, j) = self.position(k);
                m[(i, j)]
            })
            .collect()
    }

    pub fn unpack(&self, v: &[f64]) -> Mat {
        assert_eq!(v.len(), self.len());
        let mut m = Mat::zeros(self.rows, self.cols);
        for (k, &x) in v.iter().enumerate() {
            let (i, j) = self.position(k);
            m[(i, j)] = x;
            if self.kind != BlockKind::Free {
                m[(j, i)] = x;
            }
        }
        m
    }
}

fn sym_index(n: usize, i: usize, j: usize) -> usize {
    i * n - i * (i + 1) / 2 + j
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarRef {
    pub block: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    #[serde(with = "term_list")]
    pub terms: Vec<(VarRef, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    blocks: Vec<VarBlock>,
    constraints: Vec<LinearConstraint>,
    #[serde(with = "term_list", default)]
    objective: Vec<(VarRef, f64)>,
}

mod term_list {
    use super::VarRef;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(t: &[(VarRef, f64)], s: S) -> Result<S::Ok, S::Error> {
        t.iter()
            .map(|(r, c)| (r.block, r.index, *c))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(VarRef, f64)>, D::Error> {
        let raw: Vec<(usize, usize, f64)> = Vec::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|(block, index, c)| (VarRef { block, index }, c))
            .collect())
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, name: impl Into<String>, kind: BlockKind, rows: usize, cols: usize) -> BlockId {
        let cols = if kind == BlockKind::Free { cols } else { rows };
        self.blocks.push(VarBlock {
            name: name.into(),
            kind,
            rows,
            cols,
        });
        BlockId(self.blocks.len() - 1)
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn block(&self, id: BlockId) -> &VarBlock {
        &self.blocks[id.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarRef, f64)] {
        &self.objective
    }

    pub fn entry(&self, id: BlockId, i: usize, j: usize) -> VarRef {
        VarRef {
            block: id.0,
            index: self.blocks[id.0].index(i, j),
        }
    }

    fn check_terms(&self, terms: &[(VarRef, f64)]) -> Result<()> {
        for (r, c) in terms {
            let Some(b) = self.blocks.get(r.block) else {
                return Err(validation(format!("term references undeclared block {}", r.block)));
            };
            if r.index >= b.len() {
                return Err(validation(format!(
                    "term references entry {} of block {} which has {} entries",
                    r.index,
                    b.name,
                    b.len()
                )));
            }
            if !c.is_finite() {
                return Err(validation("non-finite coefficient"));
            }
        }
        Ok(())
    }

    /// Adds `Σ coef·var = rhs`; repeated variables are merged.
    pub fn add_constraint(&mut self, terms: Vec<(VarRef, f64)>, rhs: f64) -> Result<usize> {
        self.check_terms(&terms)?;
        if !rhs.is_finite() {
            return Err(validation("non-finite right-hand side"));
        }
        self.constraints.push(LinearConstraint {
            terms: merge_terms(terms),
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    /// Linear objective to minimize.
    pub fn set_objective(&mut self, terms: Vec<(VarRef, f64)>) -> Result<()> {
        self.check_terms(&terms)?;
        self.objective = merge_terms(terms);
        Ok(())
    }

    /// Checks references after deserialization.
    pub fn validate(&self) -> Result<()> {
        for c in &self.constraints {
            self.check_terms(&c.terms)?;
        }
        self.check_terms(&self.objective)
    }

    pub fn num_scalars(&self) -> usize {
        self.blocks.iter().map(VarBlock::len).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

fn merge_terms(mut terms: Vec<(VarRef, f64)>) -> Vec<(VarRef, f64)> {
    terms.sort_by_key(|(r, _)| (r.block, r.index));
    let mut out: Vec<(VarRef, f64)> = Vec::with_capacity(terms.len());
    for (r, c) in terms {
        match out.last_mut() {
            Some((last, acc)) if *last == r => *acc += c,
            _ => out.push((r, c)),
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Feasible,
    Infeasible,
    /// The objective is unbounded below on the feasible set.
    Unbounded,
    NumericalTrouble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Scalarized values, one vector per block.
    pub values: Vec<Vec<f64>>,
    pub objective: f64,
    /// Max-abs equality residual.
    pub primal_residual: f64,
    /// Smallest eigenvalue over all PSD blocks.
    pub min_psd_eigenvalue: f64,
    pub iterations: usize,
}

impl ConicSolution {
    pub fn value(&self, problem: &ConicProblem, id: BlockId) -> Mat {
        problem.block(id).unpack(&self.values[id.0])
    }

    pub fn scalar(&self, r: VarRef) -> f64 {
        self.values[r.block][r.index]
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Feasible
    }
}

/// Acceptance thresholds for a `Feasible` status.
pub const ACCEPT_RESIDUAL: f64 = 1e-6;
pub const ACCEPT_MIN_EIG: f64 = -1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    InteriorPoint,
    /// Alternating projections; feasibility only, tiny instances.
    Projection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub backend: Backend,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            backend: Backend::InteriorPoint,
            tolerance: 1e-8,
            max_iterations: 150,
        }
    }
}

/// A conic solver adapter.
pub trait ConicBackend {
    /// Raw solve; statuses are finalized by [`solve`].
    fn solve(&self, problem: &ConicProblem, options: &SolveOptions) -> ConicSolution;

    /// Whether concurrent `solve` calls on one instance are safe.
    fn is_reentrant(&self) -> bool;
}

pub fn solve(problem: &ConicProblem, options: &SolveOptions) -> ConicSolution {
    let mut sol = match options.backend {
        Backend::InteriorPoint => InteriorPoint.solve(problem, options),
        Backend::Projection => AlternatingProjection.solve(problem, options),
    };
    let mut report = validate_solution(problem, &sol);
    if sol.status == SolveStatus::Feasible && !report.equality_violations.is_empty() {
        let mut polished = sol.clone();
        polish(problem, &mut polished);
        let again = validate_solution(problem, &polished);
        if again.max_residual < report.max_residual {
            sol = polished;
            report = again;
        }
    }
    sol.primal_residual = report.max_residual;
    sol.min_psd_eigenvalue = report.min_psd_eigenvalue;
    if sol.status == SolveStatus::Feasible && !report.passes {
        sol.status = SolveStatus::NumericalTrouble;
    }
    sol
}

/// Minimum-norm correction (Frobenius metric on the matrix blocks) that
/// restores the linear equalities. Interior-point iterates on badly scaled
/// programs carry residuals proportional to the variable magnitudes; the
/// correction is tiny next to the PSD margins of a strictly feasible point.
fn polish(problem: &ConicProblem, sol: &mut ConicSolution) {
    let blocks = problem.blocks();
    let offsets: Vec<usize> = blocks
        .iter()
        .scan(0, |acc, b| {
            let o = *acc;
            *acc += b.len();
            Some(o)
        })
        .collect();
    let nvar = problem.num_scalars();
    let m = problem.constraints.len();
    if m == 0 || nvar == 0 {
        return;
    }
    let mut winv = vec![1.0; nvar];
    for (k, b) in blocks.iter().enumerate() {
        if b.kind != BlockKind::Free {
            for idx in 0..b.len() {
                let (i, j) = b.position(idx);
                if i != j {
                    winv[offsets[k] + idx] = 0.5;
                }
            }
        }
    }
    let mut a = Mat::zeros(m, nvar);
    for (i, c) in problem.constraints.iter().enumerate() {
        for (r, coef) in &c.terms {
            a[(i, offsets[r.block] + r.index)] += coef;
        }
    }
    let aw = Mat::from_fn(m, nvar, |i, j| a[(i, j)] * winv[j]);
    let gram = &aw * a.transpose();
    let solver = gram.clone().svd(true, true);
    let tol = 1e-13 * solver.singular_values.max();
    for _ in 0..2 {
        let residual = crate::linalg::Vector::from_fn(m, |i, _| {
            let c = &problem.constraints[i];
            c.rhs
                - c.terms
                    .iter()
                    .map(|(r, coef)| coef * sol.values[r.block][r.index])
                    .sum::<f64>()
        });
        let Ok(lam) = solver.solve(&residual, tol) else { return };
        let delta = aw.transpose() * lam;
        for (k, b) in blocks.iter().enumerate() {
            for idx in 0..b.len() {
                sol.values[k][idx] += delta[offsets[k] + idx];
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passes: bool,
    pub max_residual: f64,
    pub min_psd_eigenvalue: f64,
    /// PSD blocks whose smallest eigenvalue is below the acceptance threshold.
    pub psd_violations: Vec<Violation>,
    /// Equalities whose residual exceeds the acceptance threshold.
    pub equality_violations: Vec<Violation>,
}

/// Recomputes equality residuals and PSD eigenvalues straight from the
/// problem declaration.
pub fn validate_solution(problem: &ConicProblem, solution: &ConicSolution) -> ValidationReport {
    let mut max_residual = 0.0f64;
    let mut equality_violations = Vec::new();
    for (i, c) in problem.constraints.iter().enumerate() {
        let lhs: f64 = c
            .terms
            .iter()
            .map(|(r, coef)| coef * solution.values[r.block][r.index])
            .sum();
        let res = (lhs - c.rhs).abs();
        let res = if res.is_nan() { f64::INFINITY } else { res };
        max_residual = max_residual.max(res);
        if res > ACCEPT_RESIDUAL {
            equality_violations.push(Violation { index: i, value: res });
        }
    }
    let mut min_eig = f64::INFINITY;
    let mut psd_violations = Vec::new();
    for (k, b) in problem.blocks.iter().enumerate() {
        if b.kind != BlockKind::Psd || b.rows == 0 {
            continue;
        }
        let m = b.unpack(&solution.values[k]);
        let e = if m.iter().all(|v| v.is_finite()) {
            linalg::min_eig(&m)
        } else {
            f64::NEG_INFINITY
        };
        min_eig = min_eig.min(e);
        if e < ACCEPT_MIN_EIG {
            psd_violations.push(Violation { index: k, value: e });
        }
    }
    equality_violations.sort_by(|a, b| b.value.total_cmp(&a.value));
    psd_violations.sort_by(|a, b| a.value.total_cmp(&b.value));
    ValidationReport {
        passes: equality_violations.is_empty() && psd_violations.is_empty(),
        max_residual,
        min_psd_eigenvalue: min_eig,
        psd_violations,
        equality_violations,
    }
}
