//! Alternating projections between the affine constraint set and the cone.
//!
//! Only meant for tiny feasibility instances: it ignores the objective and
//! gives the test-suite a solver that shares no code with the interior-point
//! path. Vectors use the `svec` scaling (off-diagonal entries times √2) so the
//! Euclidean projection onto the affine set matches the Frobenius metric used
//! by the PSD projection.

use std::f64::consts::SQRT_2;

use super::{BlockKind, ConicBackend, ConicProblem, ConicSolution, SolveOptions, SolveStatus};
use crate::linalg::{Mat, Vector};

#[derive(Debug, Clone, Copy, Default)]
pub struct AlternatingProjection;

const MAX_SWEEPS: usize = 50_000;

impl ConicBackend for AlternatingProjection {
    fn solve(&self, problem: &ConicProblem, options: &SolveOptions) -> ConicSolution {
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
        let weight = |block: usize, idx: usize| -> f64 {
            let b = &blocks[block];
            if b.kind == BlockKind::Free {
                return 1.0;
            }
            let (i, j) = b.position(idx);
            if i == j {
                1.0
            } else {
                SQRT_2
            }
        };
        let m = problem.constraints().len();
        let mut a = Mat::zeros(m, nvar);
        let mut rhs = Vector::zeros(m);
        for (i, c) in problem.constraints().iter().enumerate() {
            for (r, coef) in &c.terms {
                a[(i, offsets[r.block] + r.index)] += coef / weight(r.block, r.index);
            }
            rhs[i] = c.rhs;
        }
        let pinv = a.clone().pseudo_inverse(1e-12).unwrap_or_else(|_| Mat::zeros(nvar, m));
        let project_affine = |v: &Vector| -> Vector { v - &pinv * (&a * v - &rhs) };
        let project_cone = |v: &Vector| -> Vector {
            let mut out = v.clone();
            for (k, b) in blocks.iter().enumerate() {
                if b.kind != BlockKind::Psd || b.rows == 0 {
                    continue;
                }
                let raw: Vec<f64> = (0..b.len()).map(|idx| v[offsets[k] + idx] / weight(k, idx)).collect();
                let eig = b.unpack(&raw).symmetric_eigen();
                let clipped = eig.eigenvalues.map(|l| l.max(0.0));
                let proj = &eig.eigenvectors * Mat::from_diagonal(&clipped) * eig.eigenvectors.transpose();
                for idx in 0..b.len() {
                    let (i, j) = b.position(idx);
                    out[offsets[k] + idx] = proj[(i, j)] * weight(k, idx);
                }
            }
            out
        };

        let feas_tol = options.tolerance.max(1e-12) * (1.0 + rhs.amax());
        let mut v = Vector::zeros(nvar);
        let mut status = SolveStatus::NumericalTrouble;
        let mut prev_gap = f64::INFINITY;
        let mut sweeps = 0;
        for sweep in 0..MAX_SWEEPS {
            sweeps = sweep + 1;
            let va = project_affine(&v);
            v = project_cone(&va);
            let residual = (&a * &v - &rhs).amax();
            if residual <= feas_tol {
                status = SolveStatus::Feasible;
                break;
            }
            // Non-intersecting sets: the gap between the two iterates settles
            // at their distance.
            let gap = (&va - &v).norm();
            if sweep > 50 && (prev_gap - gap).abs() <= 1e-12 * gap && gap > 1e-6 {
                status = SolveStatus::Infeasible;
                break;
            }
            prev_gap = gap;
        }
        let values: Vec<Vec<f64>> = blocks
            .iter()
            .enumerate()
            .map(|(k, b)| (0..b.len()).map(|idx| v[offsets[k] + idx] / weight(k, idx)).collect())
            .collect();
        ConicSolution {
            status,
            objective: problem
                .objective()
                .iter()
                .map(|(r, c)| c * values[r.block][r.index])
                .sum(),
            values,
            primal_residual: f64::NAN,
            min_psd_eigenvalue: f64::NAN,
            iterations: sweeps,
        }
    }

    fn is_reentrant(&self) -> bool {
        true
    }
}
