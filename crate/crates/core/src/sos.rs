//! Interval negativity constraints `M(τ) ⪯ −εI, τ ∈ [a, b]` compiled to
//! semidefinite constraints.
//!
//! `M` is affine in scalar decision variables. The compiler adds Gram blocks
//! `Q0, Q1 ⪰ 0` and one coefficient-matching equality per power of `τ` and
//! matrix entry so that
//!
//! ```text
//! −M(τ) − εI = (v0⊗I)ᵀ Q0 (v0⊗I) + (τ − a)(b − τ) · (v1⊗I)ᵀ Q1 (v1⊗I)
//! ```
//!
//! with monomial vectors `v0 = (1, …, τ^k)` and `v1 = (1, …, τ^{k−1})`.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::{self, Mat};
use crate::polymatrix::{uniform_grid, PolyMatrix, ScalarPoly};
use crate::sdp::{BlockId, BlockKind, ConicProblem, ConicSolution, VarRef};

/// `M(τ) = M_c(τ) + Σ_v x_v · M_v(τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolyMatrix {
    size: usize,
    constant: PolyMatrix,
    terms: Vec<(VarRef, PolyMatrix)>,
}

impl AffinePolyMatrix {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            constant: PolyMatrix::zero(size),
            terms: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn constant(&self) -> &PolyMatrix {
        &self.constant
    }

    pub fn terms(&self) -> &[(VarRef, PolyMatrix)] {
        &self.terms
    }

    pub fn add_constant(&mut self, p: &PolyMatrix) -> Result<()> {
        self.constant = self.constant.add(p)?;
        Ok(())
    }

    pub fn add_term(&mut self, var: VarRef, p: PolyMatrix) -> Result<()> {
        if p.size() != self.size {
            return Err(validation(format!(
                "term has size {}, expression has size {}",
                p.size(),
                self.size
            )));
        }
        if p.is_zero() {
            return Ok(());
        }
        match self.terms.iter_mut().find(|(v, _)| *v == var) {
            Some((_, acc)) => *acc = acc.add(&p)?,
            None => self.terms.push((var, p)),
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, p)| p.degree())
            .fold(self.constant.degree(), usize::max)
    }

    /// Substitutes variable values.
    pub fn evaluate_with(&self, value: impl Fn(VarRef) -> f64) -> PolyMatrix {
        self.terms.iter().fold(self.constant.clone(), |acc, (v, p)| {
            acc.scalar_mul_add(value(*v), p).expect("sizes checked on insertion")
        })
    }

    pub fn evaluate(&self, sol: &ConicSolution) -> PolyMatrix {
        self.evaluate_with(|v| sol.scalar(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Margin {
    /// Fixed strictness `ε > 0`.
    Fixed(f64),
    /// Margin taken from a scalar decision variable.
    Variable(VarRef),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalNegativityConstraint {
    pub expr: AffinePolyMatrix,
    pub lo: f64,
    pub hi: f64,
    pub margin: Margin,
    /// Half-degree `k` of the `Q0` multiplier; defaults to `⌈deg M / 2⌉`.
    pub half_degree: Option<usize>,
}

impl IntervalNegativityConstraint {
    pub fn new(expr: AffinePolyMatrix, lo: f64, hi: f64, margin: Margin) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(validation(format!("invalid interval [{lo}, {hi}]")));
        }
        if let Margin::Fixed(eps) = margin {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(validation("strictness margin must be positive"));
            }
        }
        Ok(Self {
            expr,
            lo,
            hi,
            margin,
            half_degree: None,
        })
    }

    /// `1e-6 · (1 + ‖M_c(0)‖_max)`.
    pub fn default_margin(expr: &AffinePolyMatrix) -> f64 {
        1e-6 * (1.0 + linalg::max_abs(&expr.constant().coeff(0)))
    }
}

/// Location of the Gram blocks of one compiled constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SosHandle {
    pub q0: BlockId,
    pub q1: Option<BlockId>,
    pub size: usize,
    pub lo: f64,
    pub hi: f64,
    pub basis0: usize,
    pub basis1: usize,
    pub margin: Margin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SosCertificate {
    pub size: usize,
    pub lo: f64,
    pub hi: f64,
    #[serde(with = "crate::serde_matrix")]
    pub q0: Mat,
    #[serde(with = "crate::serde_matrix::option")]
    pub q1: Option<Mat>,
    pub basis0: usize,
    pub basis1: usize,
}

pub fn compile(c: &IntervalNegativityConstraint, problem: &mut ConicProblem) -> Result<SosHandle> {
    let m = c.expr.size();
    let degree = c.expr.degree();
    let pointwise = c.lo == c.hi;
    let needed = degree.div_ceil(2);
    let k = c.half_degree.unwrap_or(needed);
    if !pointwise && k < needed {
        return Err(validation(format!(
            "multiplier half-degree {k} too small for a degree-{degree} constraint"
        )));
    }
    let (basis0, basis1) = if pointwise { (1, 0) } else { (k + 1, k) };
    let q0 = problem.add_block(
        format!("sos_q0_{}", problem.blocks().len()),
        BlockKind::Psd,
        basis0 * m,
        basis0 * m,
    );
    let q1 = (basis1 > 0).then(|| {
        problem.add_block(
            format!("sos_q1_{}", problem.blocks().len()),
            BlockKind::Psd,
            basis1 * m,
            basis1 * m,
        )
    });
    let weight = ScalarPoly::interval_weight(c.lo, c.hi);

    // Pointwise: the constraint reduces to Q0 + M(a) + εI = 0.
    let fixed_expr;
    let (constant, terms): (PolyMatrix, Vec<(VarRef, PolyMatrix)>) = if pointwise {
        let at = |p: &PolyMatrix| PolyMatrix::constant(&p.eval(c.lo)).expect("square");
        fixed_expr = (
            at(c.expr.constant()),
            c.expr.terms().iter().map(|(v, p)| (*v, at(p))).collect(),
        );
        fixed_expr
    } else {
        (c.expr.constant().clone(), c.expr.terms().to_vec())
    };
    let top = if pointwise { 0 } else { 2 * k };
    for p in 0..=top {
        for r in 0..m {
            for col in r..m {
                let mut row: Vec<(VarRef, f64)> = Vec::new();
                for a in 0..basis0 {
                    if p >= a && p - a < basis0 {
                        let b = p - a;
                        row.push((problem.entry(q0, a * m + r, b * m + col), 1.0));
                    }
                }
                if let Some(q1) = q1 {
                    for (e, &ge) in weight.coeffs().iter().enumerate() {
                        if ge == 0.0 || p < e {
                            continue;
                        }
                        let rest = p - e;
                        for a in 0..basis1 {
                            if rest >= a && rest - a < basis1 {
                                let b = rest - a;
                                row.push((problem.entry(q1, a * m + r, b * m + col), ge));
                            }
                        }
                    }
                }
                for (v, poly) in &terms {
                    let coef = poly.coeff(p)[(r, col)];
                    if coef != 0.0 {
                        row.push((*v, coef));
                    }
                }
                let mut rhs = -constant.coeff(p)[(r, col)];
                if p == 0 && r == col {
                    match c.margin {
                        Margin::Fixed(eps) => rhs -= eps,
                        Margin::Variable(t) => row.push((t, 1.0)),
                    }
                }
                problem.add_constraint(row, rhs)?;
            }
        }
    }
    Ok(SosHandle {
        q0,
        q1,
        size: m,
        lo: c.lo,
        hi: c.hi,
        basis0,
        basis1,
        margin: c.margin,
    })
}

impl SosHandle {
    pub fn certificate(&self, problem: &ConicProblem, sol: &ConicSolution) -> SosCertificate {
        SosCertificate {
            size: self.size,
            lo: self.lo,
            hi: self.hi,
            q0: sol.value(problem, self.q0),
            q1: self.q1.map(|q| sol.value(problem, q)),
            basis0: self.basis0,
            basis1: self.basis1,
        }
    }

    pub fn margin_value(&self, sol: &ConicSolution) -> f64 {
        match self.margin {
            Margin::Fixed(e) => e,
            Margin::Variable(v) => sol.scalar(v),
        }
    }

    /// Coefficient-wise max-abs of `Σ0 + gΣ1 + M + εI` (pointwise at `a` for
    /// degenerate intervals).
    pub fn residual(&self, c: &IntervalNegativityConstraint, problem: &ConicProblem, sol: &ConicSolution) -> f64 {
        let cert = self.certificate(problem, sol);
        let mut lhs = reconstruct(&cert);
        let eps = self.margin_value(sol);
        lhs = lhs
            .add(&c.expr.evaluate(sol))
            .and_then(|s| s.add(&PolyMatrix::constant(&(Mat::identity(self.size, self.size) * eps))?))
            .expect("sizes match");
        if self.lo == self.hi {
            linalg::max_abs(&lhs.eval(self.lo))
        } else {
            lhs.coeffs().iter().map(linalg::max_abs).fold(0.0, f64::max)
        }
    }
}

/// `(v⊗I)ᵀ Q (v⊗I)` for a monomial vector of length `basis`.
fn gram_poly(q: &Mat, basis: usize, m: usize) -> PolyMatrix {
    let degree = 2 * basis.saturating_sub(1);
    let mut coeffs = vec![Mat::zeros(m, m); degree + 1];
    for a in 0..basis {
        for b in 0..basis {
            coeffs[a + b] += q.view((a * m, b * m), (m, m));
        }
    }
    PolyMatrix::new(m, coeffs).expect("square coefficients")
}

/// Expands `Σ0(τ) + (τ − a)(b − τ)Σ1(τ)`.
pub fn reconstruct(cert: &SosCertificate) -> PolyMatrix {
    let s0 = gram_poly(&cert.q0, cert.basis0, cert.size);
    match &cert.q1 {
        Some(q1) if cert.basis1 > 0 => {
            let s1 =
                gram_poly(q1, cert.basis1, cert.size).mul_scalar_poly(&ScalarPoly::interval_weight(cert.lo, cert.hi));
            s0.add(&s1).expect("same size")
        }
        _ => s0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport {
    pub passes: bool,
    /// Largest eigenvalue of `M(τ)` over the grid and where it occurs.
    pub max_eigenvalue: f64,
    pub worst_tau: f64,
    /// Grid points where `λ_max(M(τ)) > −ε/2`.
    pub failures: Vec<f64>,
    pub grid_n: usize,
}

/// Grid falsifier: passes iff `λ_max(M(τ_i)) ≤ −ε/2` at every point of a
/// uniform grid on `[lo, hi]`.
pub fn pointwise_negativity_check(m: &PolyMatrix, lo: f64, hi: f64, grid_n: usize, eps: f64) -> NegativityReport {
    let grid = uniform_grid(lo, hi, grid_n.max(2));
    let mut worst = f64::NEG_INFINITY;
    let mut worst_tau = lo;
    let mut failures = Vec::new();
    for &t in &grid {
        let e = linalg::max_eig(&m.eval(t));
        if e > worst {
            worst = e;
            worst_tau = t;
        }
        if e > -eps / 2.0 {
            failures.push(t);
        }
    }
    NegativityReport {
        passes: failures.is_empty(),
        max_eigenvalue: worst,
        worst_tau,
        failures,
        grid_n: grid.len(),
    }
}
