//! Symmetric-matrix-valued polynomials `W(τ) = Σ_k τ^k W_k` in the monomial basis.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::linalg::{self, sym, Mat, SINGULAR_COND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyRaw", into = "PolyRaw")]
pub struct PolyMatrix {
    size: usize,
    coeffs: Vec<Mat>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolyRaw {
    size: usize,
    degree: usize,
    #[serde(with = "crate::serde_matrix::list")]
    coeffs: Vec<Mat>,
}

impl TryFrom<PolyRaw> for PolyMatrix {
    type Error = Error;
    fn try_from(r: PolyRaw) -> Result<Self> {
        if r.coeffs.len() != r.degree + 1 {
            return Err(validation("degree does not match the number of coefficients"));
        }
        PolyMatrix::new(r.size, r.coeffs)
    }
}

impl From<PolyMatrix> for PolyRaw {
    fn from(p: PolyMatrix) -> Self {
        PolyRaw {
            size: p.size,
            degree: p.degree(),
            coeffs: p.coeffs,
        }
    }
}

impl PolyMatrix {
    /// Coefficients are symmetrized and trailing zeros trimmed.
    pub fn new(size: usize, coeffs: Vec<Mat>) -> Result<Self> {
        if let Some(bad) = coeffs.iter().position(|c| c.shape() != (size, size)) {
            return Err(validation(format!("coefficient {bad} is not {size}x{size}")));
        }
        let coeffs = coeffs.iter().map(sym).collect();
        Ok(Self::trimmed(size, coeffs))
    }

    fn trimmed(size: usize, mut coeffs: Vec<Mat>) -> Self {
        while coeffs.len() > 1 && coeffs.last().is_some_and(|c| c.iter().all(|&v| v == 0.0)) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Mat::zeros(size, size));
        }
        Self { size, coeffs }
    }

    pub fn zero(size: usize) -> Self {
        Self {
            size,
            coeffs: vec![Mat::zeros(size, size)],
        }
    }

    pub fn constant(m: &Mat) -> Result<Self> {
        Self::new(m.nrows(), vec![m.clone()])
    }

    /// `τ^power · M`.
    pub fn monomial(m: &Mat, power: usize) -> Result<Self> {
        let mut coeffs = vec![Mat::zeros(m.nrows(), m.nrows()); power + 1];
        coeffs[power] = m.clone();
        Self::new(m.nrows(), coeffs)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Mat] {
        &self.coeffs
    }

    /// Coefficient of `τ^k` (zero past the degree).
    pub fn coeff(&self, k: usize) -> Mat {
        self.coeffs
            .get(k)
            .cloned()
            .unwrap_or_else(|| Mat::zeros(self.size, self.size))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// Horner evaluation.
    pub fn eval(&self, tau: f64) -> Mat {
        let mut acc = Mat::zeros(self.size, self.size);
        for c in self.coeffs.iter().rev() {
            acc *= tau;
            acc += c;
        }
        sym(&acc)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * k as f64)
            .collect();
        Self::trimmed(self.size, coeffs)
    }

    fn check_size(&self, other: &Self) -> Result<()> {
        if self.size != other.size {
            return Err(validation(format!(
                "polynomial sizes differ: {} vs {}",
                self.size, other.size
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.scalar_mul_add(1.0, other)
    }

    /// `self + alpha · other`.
    pub fn scalar_mul_add(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.check_size(other)?;
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|k| self.coeff(k) + other.coeff(k) * alpha).collect();
        Ok(Self::trimmed(self.size, coeffs))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::trimmed(self.size, self.coeffs.iter().map(|c| c * alpha).collect())
    }

    /// Multiplication by a scalar polynomial.
    pub fn mul_scalar_poly(&self, p: &ScalarPoly) -> Self {
        let mut coeffs = vec![Mat::zeros(self.size, self.size); self.coeffs.len() + p.degree()];
        for (i, c) in self.coeffs.iter().enumerate() {
            for (j, &s) in p.coeffs().iter().enumerate() {
                if s != 0.0 {
                    coeffs[i + j] += c * s;
                }
            }
        }
        Self::trimmed(self.size, coeffs)
    }

    /// `Mᵀ P(τ) M` applied coefficient-wise.
    pub fn congruence(&self, m: &Mat) -> Result<Self> {
        if m.nrows() != self.size {
            return Err(validation(format!(
                "congruence factor has {} rows, polynomial size is {}",
                m.nrows(),
                self.size
            )));
        }
        let coeffs = self.coeffs.iter().map(|c| m.transpose() * c * m).collect();
        Self::new(m.ncols(), coeffs)
    }

    /// `P(τ_i) = W(τ_i)⁻¹` on every grid point.
    pub fn inverse_on_grid(&self, grid: &[f64]) -> Result<Vec<Mat>> {
        grid.iter().map(|&t| inverse_at(&self.eval(t), t)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.coeffs.iter().map(linalg::max_asymmetry).fold(0.0, f64::max)
    }
}

pub fn inverse_at(w: &Mat, tau: f64) -> Result<Mat> {
    let c = linalg::cond(w);
    if c > SINGULAR_COND {
        return Err(Error::CertificateSingular { tau, cond: c });
    }
    let inv = w.clone().try_inverse().ok_or(Error::CertificateSingular {
        tau,
        cond: f64::INFINITY,
    })?;
    Ok(sym(&inv))
}

/// Uniform grid with `n ≥ 2` points over `[a, b]` (a single point when `a == b`).
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if a == b || n < 2 {
        return vec![a];
    }
    (0..n)
        .map(|i| {
            if i == n - 1 {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Univariate real polynomial, ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarPoly(Vec<f64>);

impl ScalarPoly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.len() > 1 && c.last() == Some(&0.0) {
            c.pop();
        }
        if c.is_empty() {
            c.push(0.0);
        }
        Self(c)
    }

    /// `(τ − a)(b − τ)`.
    pub fn interval_weight(a: f64, b: f64) -> Self {
        Self::new(vec![-a * b, a + b, -1.0])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }
}
