//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! (HKM direction, Mehrotra predictor-corrector) for
//!
//! ```text
//! min <C, X> + c_fᵀ x_f   s.t.  A(X) + A_f x_f = b,  X ⪰ 0
//! max bᵀ y                s.t.  A*(y) + Z = C,  A_fᵀ y = c_f,  Z ⪰ 0
//! ```
//!
//! Free variables are kept in an augmented Schur system instead of being split.
//! The embedding adds `τ, κ ≥ 0`; infeasibility and unboundedness show up as
//! `τ → 0` with a certificate in `(y, Z)` or `(X, x_f)`.

use super::{BlockKind, ConicBackend, ConicProblem, ConicSolution, SolveOptions, SolveStatus};
use crate::linalg::{self, Mat, Vector};

/// Reference adapter.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn solve(&self, problem: &ConicProblem, options: &SolveOptions) -> ConicSolution {
        match StdForm::build(problem) {
            Ok(sf) => sf.run(problem, options),
            Err(status) => ConicSolution {
                status,
                values: problem.blocks().iter().map(|b| vec![0.0; b.len()]).collect(),
                objective: 0.0,
                primal_residual: f64::INFINITY,
                min_psd_eigenvalue: f64::INFINITY,
                iterations: 0,
            },
        }
    }

    fn is_reentrant(&self) -> bool {
        true
    }
}

type Entries = Vec<(usize, usize, f64)>;

struct StdForm {
    sizes: Vec<usize>,
    /// Problem block -> PSD block index, or free-vector offset.
    placement: Vec<Placement>,
    nf: usize,
    m: usize,
    /// Per PSD block: `(constraint, symmetric entries)` for every constraint touching it.
    rows: Vec<Vec<(usize, Entries)>>,
    af: Mat,
    b: Vector,
    c: Vec<Mat>,
    cf: Vector,
    has_objective: bool,
    elim: Option<FreeElimination>,
}

/// Free variables are eliminated before the interior-point run: with
/// `A_f = U Σ Vᵀ`, the equalities reduce to `U₂ᵀ A(X) = U₂ᵀ b` over the left
/// null space of `A_f`, and `x_f = A_f⁺ (b − A(X))` afterwards. The reduced
/// program has a definite Schur complement instead of a saddle-point system.
struct FreeElimination {
    rows: Vec<Vec<(usize, Entries)>>,
    m: usize,
    b: Vector,
    pinv: Mat,
    /// `c_f` has a component along the null space of `A_f`.
    unbounded_direction: bool,
}

#[derive(Clone, Copy)]
enum Placement {
    Psd(usize),
    Free(usize),
}

fn push_sym(entries: &mut Entries, r: usize, c: usize, v: f64) {
    if r == c {
        entries.push((r, r, v));
    } else {
        entries.push((r, c, 0.5 * v));
        entries.push((c, r, 0.5 * v));
    }
}

fn frob_dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

impl StdForm {
    fn build(p: &ConicProblem) -> Result<Self, SolveStatus> {
        let mut sizes = Vec::new();
        let mut placement = Vec::new();
        let mut nf = 0;
        for b in p.blocks() {
            if b.kind == BlockKind::Psd {
                placement.push(Placement::Psd(sizes.len()));
                sizes.push(b.rows);
            } else {
                placement.push(Placement::Free(nf));
                nf += b.len();
            }
        }
        // Rows with no terms: drop when rhs = 0, otherwise infeasible.
        let mut kept = Vec::new();
        for c in p.constraints() {
            if c.terms.is_empty() {
                if c.rhs != 0.0 {
                    return Err(SolveStatus::Infeasible);
                }
            } else {
                kept.push(c);
            }
        }
        let m = kept.len();
        let mut rows: Vec<Vec<(usize, Entries)>> = vec![Vec::new(); sizes.len()];
        let mut af = Mat::zeros(m, nf);
        let mut b = Vector::zeros(m);
        for (i, con) in kept.iter().enumerate() {
            let mut per_block: Vec<Entries> = vec![Vec::new(); sizes.len()];
            let mut norm2 = 0.0;
            for (r, coef) in &con.terms {
                match placement[r.block] {
                    Placement::Psd(k) => {
                        let (rr, cc) = p.blocks()[r.block].position(r.index);
                        push_sym(&mut per_block[k], rr, cc, *coef);
                        norm2 += if rr == cc { coef * coef } else { 0.5 * coef * coef };
                    }
                    Placement::Free(off) => {
                        af[(i, off + r.index)] += coef;
                        norm2 += coef * coef;
                    }
                }
            }
            let scale = 1.0 / norm2.sqrt();
            for (k, mut ent) in per_block.into_iter().enumerate() {
                if !ent.is_empty() {
                    for e in ent.iter_mut() {
                        e.2 *= scale;
                    }
                    rows[k].push((i, ent));
                }
            }
            af.row_mut(i).scale_mut(scale);
            b[i] = con.rhs * scale;
        }
        let mut c: Vec<Mat> = sizes.iter().map(|&n| Mat::zeros(n, n)).collect();
        let mut cf = Vector::zeros(nf);
        for (r, coef) in p.objective() {
            match placement[r.block] {
                Placement::Psd(k) => {
                    let (rr, cc) = p.blocks()[r.block].position(r.index);
                    if rr == cc {
                        c[k][(rr, rr)] += coef;
                    } else {
                        c[k][(rr, cc)] += 0.5 * coef;
                        c[k][(cc, rr)] += 0.5 * coef;
                    }
                }
                Placement::Free(off) => cf[off + r.index] += coef,
            }
        }
        let mut sf = Self {
            sizes,
            placement,
            nf,
            m,
            rows,
            af,
            b,
            c,
            cf,
            has_objective: !p.objective().is_empty(),
            elim: None,
        };
        if sf.nf > 0 && !sf.sizes.is_empty() {
            sf.eliminate_free();
        }
        Ok(sf)
    }

    fn eliminate_free(&mut self) {
        let (m, nf) = (self.m, self.nf);
        let svd = self.af.clone().svd(true, true);
        let (Some(u), Some(vt)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
            return;
        };
        let smax = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
            .collect();
        let u1 = Mat::from_fn(m, keep.len(), |i, j| u[(i, keep[j])]);
        let v1 = Mat::from_fn(nf, keep.len(), |i, j| vt[(keep[j], i)]);
        let sinv = Vector::from_iterator(keep.len(), keep.iter().map(|&i| 1.0 / svd.singular_values[i]));
        let pinv = &v1 * Mat::from_diagonal(&sinv) * u1.transpose();
        let null_part = &self.cf - &v1 * (v1.transpose() * &self.cf);
        let unbounded_direction = null_part.amax() > 1e-9 * (1.0 + self.cf.amax());

        // Orthonormal basis of the complement of range(A_f).
        let proj = Mat::identity(m, m) - &u1 * u1.transpose();
        let eig = linalg::sym(&proj).symmetric_eigen();
        let cols: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
        let u2 = Mat::from_fn(m, cols.len(), |i, j| eig.eigenvectors[(i, cols[j])]);
        let mr = cols.len();

        let w = pinv.transpose() * &self.cf;
        let mut c = self.c.clone();
        let aw = self.a_adj(&w);
        for k in 0..c.len() {
            c[k] -= &aw[k];
        }
        let mut rows: Vec<Vec<(usize, Entries)>> = vec![Vec::new(); self.sizes.len()];
        for (k, list) in self.rows.iter().enumerate() {
            let n = self.sizes[k];
            let mut dense: Vec<Mat> = vec![Mat::zeros(n, n); mr];
            for (i, ent) in list {
                for l in 0..mr {
                    let f = u2[(*i, l)];
                    if f != 0.0 {
                        for &(r, cc, v) in ent {
                            dense[l][(r, cc)] += f * v;
                        }
                    }
                }
            }
            for (l, d) in dense.into_iter().enumerate() {
                let tol = 1e-14 * d.amax();
                let ent: Entries = (0..n)
                    .flat_map(|r| (0..n).map(move |cc| (r, cc)))
                    .filter(|&(r, cc)| d[(r, cc)].abs() > tol)
                    .map(|(r, cc)| (r, cc, d[(r, cc)]))
                    .collect();
                if !ent.is_empty() {
                    rows[k].push((l, ent));
                }
            }
        }
        let b = u2.transpose() * &self.b;
        let orig_rows = std::mem::replace(&mut self.rows, rows);
        let orig_b = std::mem::replace(&mut self.b, b);
        self.elim = Some(FreeElimination {
            rows: orig_rows,
            m,
            b: orig_b,
            pinv,
            unbounded_direction,
        });
        self.m = mr;
        self.c = c;
        self.af = Mat::zeros(mr, 0);
        self.cf = Vector::zeros(0);
    }

    /// Free values for a primal point of the reduced program.
    fn recover_free(&self, x: &[Mat], xf: &Vector) -> Vector {
        let Some(e) = &self.elim else { return xf.clone() };
        let mut ax = Vector::zeros(e.m);
        for (k, list) in e.rows.iter().enumerate() {
            for (i, ent) in list {
                ax[*i] += ent.iter().map(|&(r, c, v)| v * x[k][(r, c)]).sum::<f64>();
            }
        }
        &e.pinv * (&e.b - ax)
    }

    fn a_op(&self, x: &[Mat]) -> Vector {
        let mut out = Vector::zeros(self.m);
        for (k, list) in self.rows.iter().enumerate() {
            for (i, ent) in list {
                out[*i] += ent.iter().map(|&(r, c, v)| v * x[k][(r, c)]).sum::<f64>();
            }
        }
        out
    }

    fn a_adj(&self, y: &Vector) -> Vec<Mat> {
        let mut out: Vec<Mat> = self.sizes.iter().map(|&n| Mat::zeros(n, n)).collect();
        for (k, list) in self.rows.iter().enumerate() {
            for (i, ent) in list {
                let yi = y[*i];
                if yi != 0.0 {
                    for &(r, c, v) in ent {
                        out[k][(r, c)] += yi * v;
                    }
                }
            }
        }
        out
    }

    /// `M_ij = tr(A_i X A_j Z⁻¹)`.
    fn schur(&self, x: &[Mat], zinv: &[Mat]) -> Mat {
        let mut schur = Mat::zeros(self.m, self.m);
        for (k, list) in self.rows.iter().enumerate() {
            let n = self.sizes[k];
            let (xk, zk) = (&x[k], &zinv[k]);
            let mut g = Mat::zeros(n, n);
            for (j, ent_j) in list {
                g.fill(0.0);
                for &(r, c, v) in ent_j {
                    for bcol in 0..n {
                        let zc = v * zk[(c, bcol)];
                        if zc != 0.0 {
                            let mut col = g.column_mut(bcol);
                            col.axpy(zc, &xk.column(r), 1.0);
                        }
                    }
                }
                for (i, ent_i) in list {
                    let s: f64 = ent_i.iter().map(|&(r, c, v)| v * g[(c, r)]).sum();
                    schur[(*i, *j)] += s;
                }
            }
        }
        schur
    }

    fn total_dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn run(&self, p: &ConicProblem, opts: &SolveOptions) -> ConicSolution {
        if self.sizes.is_empty() {
            return self.free_only(p);
        }
        let nb = self.sizes.len();
        let nu = self.total_dim() as f64 + 1.0;
        let bscale = 1.0 + self.b.amax();
        let cscale = 1.0 + self.c.iter().map(|c| c.amax()).fold(0.0, f64::max) + self.cf.amax();
        let mut x: Vec<Mat> = self.sizes.iter().map(|&n| Mat::identity(n, n)).collect();
        let mut z = x.clone();

        let mut xf = Vector::zeros(self.af.ncols());
        let mut y = Vector::zeros(self.m);
        let (mut tau, mut kappa) = (1.0, 1.0);
        let tol = opts.tolerance;
        let mut status = None;
        let mut iterations = 0;
        let mut last = Progress::default();
        let mut best = (f64::INFINITY, 0usize);

        for iter in 0..opts.max_iterations {
            iterations = iter;
            let aty = self.a_adj(&y);
            let rp = &self.b * tau - self.a_op(&x) - &self.af * &xf;
            let rd: Vec<Mat> = (0..nb).map(|k| &self.c[k] * tau - &aty[k] - &z[k]).collect();
            let rf = &self.cf * tau - self.af.transpose() * &y;
            let cx = (0..nb).map(|k| frob_dot(&self.c[k], &x[k])).sum::<f64>() + self.cf.dot(&xf);
            let by = self.b.dot(&y);
            let rg = kappa - by + cx;
            let mu = ((0..nb).map(|k| frob_dot(&x[k], &z[k])).sum::<f64>() + tau * kappa) / nu;

            let pobj = cx / tau;
            let dobj = by / tau;
            last = Progress {
                relp: rp.amax() / tau / bscale,
                reld: (rd.iter().map(|m| m.amax()).fold(0.0, f64::max) + rf.amax()) / tau / cscale,
                gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            };
            if last.converged(tol, self.has_objective) {
                status = Some(SolveStatus::Feasible);
                break;
            }
            let score = last.relp.max(if self.has_objective {
                last.reld.max(last.gap)
            } else {
                0.0
            });
            if score < 0.5 * best.0 {
                best = (score, iter);
            } else if iter - best.1 >= STALL_ITERATIONS && last.converged(REDUCED_TOL, self.has_objective) {
                break;
            }
            // Certificates: a dual ray (bᵀy > 0, A*y + Z = 0, A_fᵀy = 0)
            // proves primal infeasibility; a primal ray with negative cost
            // proves unboundedness.
            if by > 0.0 {
                let ray =
                    (0..nb).map(|k| (&aty[k] + &z[k]).amax()).fold(0.0, f64::max) + (self.af.transpose() * &y).amax();
                if ray / by < INFEASIBILITY_TOL {
                    status = Some(SolveStatus::Infeasible);
                    break;
                }
            }
            if self.has_objective && cx < 0.0 {
                let ray = (self.a_op(&x) + &self.af * &xf).amax();
                if ray / (-cx) < INFEASIBILITY_TOL {
                    status = Some(SolveStatus::Unbounded);
                    break;
                }
            }
            if !mu.is_finite() {
                break;
            }

            // Nesterov-Todd scaling W with W Z W = X, built as G Gᵀ from the
            // Cholesky factors to stay accurate when X and Z are nearly
            // complementary.
            let mut nt = Vec::with_capacity(nb);
            let mut zinv = Vec::with_capacity(nb);
            for k in 0..nb {
                match nt_scaling(&x[k], &z[k]) {
                    Some(pair) => {
                        nt.push(pair.0);
                        zinv.push(pair.1);
                    }
                    None => break,
                }
            }
            if nt.len() != nb {
                break;
            }
            let schur = self.schur(&nt, &nt);
            let wcw: Vec<Mat> = (0..nb).map(|k| &nt[k] * &self.c[k] * &nt[k]).collect();
            let u = self.a_op(&wcw);
            let w: f64 = (0..nb).map(|k| frob_dot(&self.c[k], &wcw[k])).sum();

            let (m, nf) = (self.m, self.af.ncols());
            let dim = m + nf + 1;
            let mut kkt = Mat::zeros(dim, dim);
            kkt.view_mut((0, 0), (m, m)).copy_from(&schur);
            let reg = 1e-14 * (1.0 + schur.diagonal().amax());
            for i in 0..m {
                kkt[(i, i)] += reg;
            }
            kkt.view_mut((0, m), (m, nf)).copy_from(&self.af);
            kkt.view_mut((m, 0), (nf, m)).copy_from(&self.af.transpose());
            for i in 0..m {
                kkt[(i, m + nf)] = -(self.b[i] + u[i]);
                kkt[(m + nf, i)] = self.b[i] - u[i];
            }
            for j in 0..nf {
                kkt[(m + j, m + nf)] = -self.cf[j];
                kkt[(m + nf, m + j)] = -self.cf[j];
            }
            kkt[(m + nf, m + nf)] = w + kappa / tau;
            let lu = kkt.lu();

            let x_rd_zinv: Vec<Mat> = (0..nb).map(|k| &nt[k] * &rd[k] * &nt[k]).collect();
            let a_xrdz = self.a_op(&x_rd_zinv);
            let c_xrdz: f64 = (0..nb).map(|k| frob_dot(&self.c[k], &x_rd_zinv[k])).sum();

            // `h` is the right-hand side of the linearized complementarity
            // for X, `tk` the one for τκ; `eta` scales the residuals.
            let direction = |h: &[Mat], tk: f64, eta: f64| -> Option<Step> {
                let mut rhs = Vector::zeros(dim);
                let r1 = &rp * eta - self.a_op(h) + &a_xrdz * eta;
                rhs.rows_mut(0, m).copy_from(&r1);
                rhs.rows_mut(m, nf).copy_from(&(&rf * eta));
                let ch: f64 = (0..nb).map(|k| frob_dot(&self.c[k], &h[k])).sum();
                rhs[m + nf] = eta * rg + ch - eta * c_xrdz + tk / tau;
                let sol = lu.solve(&rhs)?;
                if sol.iter().any(|v| !v.is_finite()) {
                    return None;
                }
                let dy = sol.rows(0, m).into_owned();
                let dxf = sol.rows(m, nf).into_owned();
                let dtau = sol[m + nf];
                let atdy = self.a_adj(&dy);
                let dz: Vec<Mat> = (0..nb).map(|k| &rd[k] * eta - &atdy[k] + &self.c[k] * dtau).collect();
                let dx: Vec<Mat> = (0..nb)
                    .map(|k| linalg::sym(&(&h[k] - &nt[k] * &dz[k] * &nt[k])))
                    .collect();
                let dkappa = (tk - kappa * dtau) / tau;
                Some(Step {
                    dx,
                    dz,
                    dy,
                    dxf,
                    dtau,
                    dkappa,
                })
            };
            let max_step = |s: &Step| -> f64 {
                step_bound(&x, &s.dx)
                    .min(step_bound(&z, &s.dz))
                    .min(ratio(tau, s.dtau))
                    .min(ratio(kappa, s.dkappa))
            };

            // Predictor.
            let h_aff: Vec<Mat> = x.iter().map(|xk| -xk).collect();
            let Some(pred) = direction(&h_aff, -tau * kappa, 1.0) else {
                break;
            };
            let a_aff = max_step(&pred).min(1.0);
            let mu_aff = ((0..nb)
                .map(|k| frob_dot(&(&x[k] + &pred.dx[k] * a_aff), &(&z[k] + &pred.dz[k] * a_aff)))
                .sum::<f64>()
                + (tau + a_aff * pred.dtau) * (kappa + a_aff * pred.dkappa))
                / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let h: Vec<Mat> = (0..nb)
                .map(|k| &zinv[k] * (sigma * mu) - &x[k] - linalg::sym(&(&pred.dx[k] * &pred.dz[k] * &zinv[k])))
                .collect();
            let tk = sigma * mu - tau * kappa - pred.dtau * pred.dkappa;
            let Some(step) = direction(&h, tk, 1.0 - sigma) else {
                break;
            };
            let alpha = (STEP_FRACTION * max_step(&step)).min(1.0);
            if alpha < 1e-10 {
                break;
            }
            for k in 0..nb {
                x[k] += &step.dx[k] * alpha;
                z[k] += &step.dz[k] * alpha;
            }
            xf += &step.dxf * alpha;
            y += &step.dy * alpha;
            tau += alpha * step.dtau;
            kappa += alpha * step.dkappa;
            iterations = iter + 1;
            // The embedding is homogeneous: feasibility programs drift along
            // the ray unless the scale is pinned.
            if tau > RESCALE_ABOVE {
                let s = 1.0 / tau;
                for k in 0..nb {
                    x[k] *= s;
                    z[k] *= s;
                }
                xf *= s;
                y *= s;
                tau = 1.0;
                kappa *= s;
            }
        }

        // A stalled run still counts when it reached reduced accuracy; the
        // independent validation in `solve` has the final word.
        let mut status = status.unwrap_or(if last.converged(REDUCED_TOL, self.has_objective) {
            SolveStatus::Feasible
        } else {
            SolveStatus::NumericalTrouble
        });
        if status == SolveStatus::Feasible && self.elim.as_ref().is_some_and(|e| e.unbounded_direction) {
            status = SolveStatus::Unbounded;
        }
        let xs: Vec<Mat> = x.iter().map(|m| m / tau).collect();
        let xf = self.recover_free(&xs, &(xf / tau));
        let values = self.unpack(p, &xs, &xf);
        let objective = p.objective().iter().map(|(r, c)| c * values[r.block][r.index]).sum();
        ConicSolution {
            status,
            values,
            objective,
            primal_residual: f64::NAN,
            min_psd_eigenvalue: f64::NAN,
            iterations,
        }
    }

    fn unpack(&self, p: &ConicProblem, x: &[Mat], xf: &Vector) -> Vec<Vec<f64>> {
        p.blocks()
            .iter()
            .zip(&self.placement)
            .map(|(b, place)| match *place {
                Placement::Psd(k) => (0..b.len())
                    .map(|idx| {
                        let (r, c) = b.position(idx);
                        x[k][(r, c)]
                    })
                    .collect(),
                Placement::Free(off) => xf.rows(off, b.len()).iter().copied().collect(),
            })
            .collect()
    }

    /// No cones: a linear system, solved in the least-norm sense.
    fn free_only(&self, p: &ConicProblem) -> ConicSolution {
        let svd = self.af.clone().svd(true, true);
        let xf = svd.solve(&self.b, 1e-12).unwrap_or_else(|_| Vector::zeros(self.nf));
        let residual = (&self.af * &xf - &self.b).amax();
        let mut status = if residual <= 1e-9 * (1.0 + self.b.amax()) {
            SolveStatus::Feasible
        } else {
            SolveStatus::Infeasible
        };
        if status == SolveStatus::Feasible && self.has_objective {
            // Bounded only if c_f lies in the row space of A_f.
            let at = self.af.transpose();
            let lam = at
                .clone()
                .svd(true, true)
                .solve(&self.cf, 1e-12)
                .unwrap_or_else(|_| Vector::zeros(self.m));
            if (at * lam - &self.cf).amax() > 1e-9 * (1.0 + self.cf.amax()) {
                status = SolveStatus::Unbounded;
            }
        }
        let values = self.unpack(p, &[], &xf);
        ConicSolution {
            status,
            objective: p.objective().iter().map(|(r, c)| c * values[r.block][r.index]).sum(),
            values,
            primal_residual: f64::NAN,
            min_psd_eigenvalue: f64::NAN,
            iterations: 0,
        }
    }
}

const INFEASIBILITY_TOL: f64 = 1e-8;
const REDUCED_TOL: f64 = 1e-6;
const STEP_FRACTION: f64 = 0.98;
const STALL_ITERATIONS: usize = 15;
const RESCALE_ABOVE: f64 = 1e3;

#[derive(Debug, Clone, Copy, Default)]
struct Progress {
    relp: f64,
    reld: f64,
    gap: f64,
}

impl Progress {
    fn converged(&self, tol: f64, has_objective: bool) -> bool {
        self.relp < tol && (!has_objective || (self.reld < tol && self.gap < tol))
    }
}

struct Step {
    dx: Vec<Mat>,
    dz: Vec<Mat>,
    dy: Vector,
    dxf: Vector,
    dtau: f64,
    dkappa: f64,
}

/// NT scaling point and `Z⁻¹` for one block.
fn nt_scaling(x: &Mat, z: &Mat) -> Option<(Mat, Mat)> {
    let lx = x.clone().cholesky()?.l();
    let zc = z.clone().cholesky()?;
    let lz = zc.l();
    let svd = (lz.transpose() * &lx).svd(false, true);
    let vt = svd.v_t?;
    if svd.singular_values.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let d = svd.singular_values.map(|s| 1.0 / s.sqrt());
    let g = lx * vt.transpose() * Mat::from_diagonal(&d);
    Some((linalg::sym(&(&g * g.transpose())), linalg::sym(&zc.inverse())))
}

/// Largest `α` with `v + α·dv ≥ 0`.
fn ratio(v: f64, dv: f64) -> f64 {
    if dv < 0.0 {
        -v / dv
    } else {
        f64::INFINITY
    }
}

/// Largest `α` keeping `X + α·dX ⪰ 0` (blockwise minimum).
fn step_bound(x: &[Mat], dx: &[Mat]) -> f64 {
    let mut best = f64::INFINITY;
    for (xk, dk) in x.iter().zip(dx) {
        let Some(ch) = xk.clone().cholesky() else { return 0.0 };
        let l = ch.l();
        let Some(t) = l.solve_lower_triangular(dk) else {
            return 0.0;
        };
        let Some(w) = l.solve_lower_triangular(&t.transpose()) else {
            return 0.0;
        };
        let lam = linalg::min_eig(&w);
        if lam < 0.0 {
            best = best.min(-1.0 / lam);
        }
    }
    best
}
