//! Plants, washout controllers and the closed-loop hybrid-system matrices.
//!
//! The lifted closed-loop state is `z = (x_p, ξ, q)` with `q` holding the
//! controller output between samples, so its dimension is `n_u`.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::linalg::{self, block, Mat, Vector, SINGULAR_COND};

/// Uncertain affine plant `ẋ_p = (A0 + DΔE_x) x_p + (B0 + DΔF) u + d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantRaw", into = "PlantRaw")]
pub struct PlantModel {
    a0: Mat,
    b0: Mat,
    d_delta: Mat,
    e_delta: Mat,
    f_delta: Mat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantRaw {
    #[serde(rename = "A0", with = "crate::serde_matrix")]
    a0: Mat,
    #[serde(rename = "B0", with = "crate::serde_matrix")]
    b0: Mat,
    #[serde(rename = "D_delta", with = "crate::serde_matrix")]
    d_delta: Mat,
    #[serde(rename = "E_delta", with = "crate::serde_matrix")]
    e_delta: Mat,
    #[serde(rename = "F_delta", with = "crate::serde_matrix")]
    f_delta: Mat,
}

impl TryFrom<PlantRaw> for PlantModel {
    type Error = Error;
    fn try_from(r: PlantRaw) -> Result<Self> {
        PlantModel::new(r.a0, r.b0, r.d_delta, r.e_delta, r.f_delta)
    }
}

impl From<PlantModel> for PlantRaw {
    fn from(p: PlantModel) -> Self {
        PlantRaw {
            a0: p.a0,
            b0: p.b0,
            d_delta: p.d_delta,
            e_delta: p.e_delta,
            f_delta: p.f_delta,
        }
    }
}

fn check_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(validation(format!(
            "{name} has shape {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

impl PlantModel {
    pub fn new(a0: Mat, b0: Mat, d_delta: Mat, e_delta: Mat, f_delta: Mat) -> Result<Self> {
        let np = a0.nrows();
        let nu = b0.ncols();
        let ndelta = d_delta.ncols();
        let mdelta = e_delta.nrows();
        if np == 0 || nu == 0 || ndelta == 0 || mdelta == 0 {
            return Err(validation("plant dimensions must be positive"));
        }
        check_shape("A0", &a0, np, np)?;
        check_shape("B0", &b0, np, nu)?;
        check_shape("D_delta", &d_delta, np, ndelta)?;
        check_shape("E_delta", &e_delta, mdelta, np)?;
        check_shape("F_delta", &f_delta, mdelta, nu)?;
        if linalg::rank(&b0, 1e-12) < nu {
            return Err(validation("B0 must have full column rank"));
        }
        Ok(Self {
            a0,
            b0,
            d_delta,
            e_delta,
            f_delta,
        })
    }

    /// The two-state example plant used throughout the tests and the demo.
    pub fn example() -> Self {
        Self::new(
            linalg::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]),
            linalg::from_rows(&[vec![0.0], vec![1.0]]),
            linalg::from_rows(&[vec![1.0], vec![0.0]]),
            linalg::from_rows(&[vec![0.2, 0.0]]),
            linalg::from_rows(&[vec![0.02]]),
        )
        .expect("example plant is valid")
    }

    pub fn a0(&self) -> &Mat {
        &self.a0
    }
    pub fn b0(&self) -> &Mat {
        &self.b0
    }
    pub fn d_delta(&self) -> &Mat {
        &self.d_delta
    }
    pub fn e_delta(&self) -> &Mat {
        &self.e_delta
    }
    pub fn f_delta(&self) -> &Mat {
        &self.f_delta
    }
    pub fn np(&self) -> usize {
        self.a0.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b0.ncols()
    }
    pub fn n_delta(&self) -> usize {
        self.d_delta.ncols()
    }
    pub fn m_delta(&self) -> usize {
        self.e_delta.nrows()
    }

    /// Realized `(A, B)` for one admissible uncertainty.
    pub fn realize(&self, sample: &UncertaintySample) -> Result<(Mat, Mat)> {
        check_shape("Delta", sample.delta(), self.n_delta(), self.m_delta())?;
        let dd = &self.d_delta * sample.delta();
        Ok((&self.a0 + &dd * &self.e_delta, &self.b0 + &dd * &self.f_delta))
    }

    /// Default robustness samples: zero plus ±1 along each unit direction.
    pub fn vertex_samples(&self) -> Vec<UncertaintySample> {
        let (r, c) = (self.n_delta(), self.m_delta());
        let mut out = vec![UncertaintySample::zero(r, c)];
        for i in 0..r.min(c) {
            for s in [-1.0, 1.0] {
                let mut m = Mat::zeros(r, c);
                m[(i, i)] = s;
                out.push(UncertaintySample::new(m).expect("unit entry is admissible"));
            }
        }
        out
    }
}

/// An element of the uncertainty ball `ΔᵀΔ ⪯ I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeltaRaw", into = "DeltaRaw")]
pub struct UncertaintySample {
    delta: Mat,
}

#[derive(Serialize, Deserialize)]
struct DeltaRaw(#[serde(with = "crate::serde_matrix")] Mat);

impl TryFrom<DeltaRaw> for UncertaintySample {
    type Error = Error;
    fn try_from(r: DeltaRaw) -> Result<Self> {
        UncertaintySample::new(r.0)
    }
}

impl From<UncertaintySample> for DeltaRaw {
    fn from(s: UncertaintySample) -> Self {
        DeltaRaw(s.delta)
    }
}

impl UncertaintySample {
    pub fn new(delta: Mat) -> Result<Self> {
        let top = linalg::singular_values(&delta).first().copied().unwrap_or(0.0);
        if top > 1.0 + 1e-12 {
            return Err(validation(format!(
                "Delta has largest singular value {top}, outside the unit ball"
            )));
        }
        Ok(Self { delta })
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            delta: Mat::zeros(rows, cols),
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(Mat::from_element(1, 1, v))
    }

    pub fn delta(&self) -> &Mat {
        &self.delta
    }
}

/// Constant unknown drift `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DriftVector(Vector);

impl TryFrom<Vec<f64>> for DriftVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DriftVector::new(Vector::from_vec(v))
    }
}

impl From<DriftVector> for Vec<f64> {
    fn from(d: DriftVector) -> Self {
        d.0.iter().copied().collect()
    }
}

impl DriftVector {
    pub fn new(d: Vector) -> Result<Self> {
        if d.iter().any(|v| !v.is_finite()) {
            return Err(validation("drift vector has non-finite entries"));
        }
        Ok(Self(d))
    }

    pub fn zero(n: usize) -> Self {
        Self(Vector::zeros(n))
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }
}

/// Sampled-data controller `ξ⁺ = Lξ + Gx_p`, `y = Kξ + Rx_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ControllerRaw", into = "ControllerRaw")]
pub struct Controller {
    l: Mat,
    g: Mat,
    k: Mat,
    r: Mat,
    reduced: Option<(Mat, Mat)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerRaw {
    #[serde(rename = "L", with = "crate::serde_matrix::option", default)]
    l: Option<Mat>,
    #[serde(rename = "G", with = "crate::serde_matrix::option", default)]
    g: Option<Mat>,
    #[serde(rename = "K", with = "crate::serde_matrix::option", default)]
    k: Option<Mat>,
    #[serde(rename = "R", with = "crate::serde_matrix::option", default)]
    r: Option<Mat>,
    #[serde(
        rename = "Lambda",
        with = "crate::serde_matrix::option",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    lambda: Option<Mat>,
    #[serde(
        rename = "Pi",
        with = "crate::serde_matrix::option",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pi: Option<Mat>,
}

impl TryFrom<ControllerRaw> for Controller {
    type Error = Error;
    fn try_from(r: ControllerRaw) -> Result<Self> {
        let full = match (r.l, r.g, r.k, r.r) {
            (Some(l), Some(g), Some(k), Some(r)) => Some(Controller::new(l, g, k, r)?),
            (None, None, None, None) => None,
            _ => return Err(validation("L, G, K and R must be given together")),
        };
        match (r.lambda, r.pi, full) {
            (None, None, Some(c)) => Ok(c),
            (Some(lambda), Some(pi), full) => {
                let w = Controller::washout(lambda, pi)?;
                match full {
                    Some(c) => {
                        let close = |a: &Mat, b: &Mat| {
                            a.shape() == b.shape()
                                && a.iter()
                                    .zip(b.iter())
                                    .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
                        };
                        if !(close(&w.l, &c.l) && close(&w.g, &c.g) && close(&w.k, &c.k) && close(&w.r, &c.r)) {
                            return Err(validation(
                                "Lambda/Pi do not match L = Lambda, K = Lambda - I, G = R = Pi",
                            ));
                        }
                        // keep the stored matrices so that a round trip is exact
                        Ok(Controller {
                            reduced: w.reduced,
                            ..c
                        })
                    }
                    None => Ok(w),
                }
            }
            (None, None, None) => Err(validation("controller needs L, G, K, R or Lambda, Pi")),
            _ => Err(validation("Lambda and Pi must be given together")),
        }
    }
}

impl From<Controller> for ControllerRaw {
    fn from(c: Controller) -> Self {
        let (lambda, pi) = match c.reduced {
            Some((l, p)) => (Some(l), Some(p)),
            None => (None, None),
        };
        ControllerRaw {
            l: Some(c.l),
            g: Some(c.g),
            k: Some(c.k),
            r: Some(c.r),
            lambda,
            pi,
        }
    }
}

impl Controller {
    pub fn new(l: Mat, g: Mat, k: Mat, r: Mat) -> Result<Self> {
        let nc = l.nrows();
        let np = g.ncols();
        let nu = k.nrows();
        check_shape("L", &l, nc, nc)?;
        check_shape("G", &g, nc, np)?;
        check_shape("K", &k, nu, nc)?;
        check_shape("R", &r, nu, np)?;
        Ok(Self {
            l,
            g,
            k,
            r,
            reduced: None,
        })
    }

    /// Reduced washout form: `L = Λ`, `K = Λ − I`, `G = R = Π`.
    pub fn washout(lambda: Mat, pi: Mat) -> Result<Self> {
        let nu = lambda.nrows();
        check_shape("Lambda", &lambda, nu, nu)?;
        if pi.nrows() != nu {
            return Err(validation("Pi must have n_u rows"));
        }
        let k = &lambda - Mat::identity(nu, nu);
        Ok(Self {
            l: lambda.clone(),
            g: pi.clone(),
            k,
            r: pi.clone(),
            reduced: Some((lambda, pi)),
        })
    }

    pub fn l(&self) -> &Mat {
        &self.l
    }
    pub fn g(&self) -> &Mat {
        &self.g
    }
    pub fn k(&self) -> &Mat {
        &self.k
    }
    pub fn r(&self) -> &Mat {
        &self.r
    }
    pub fn lambda(&self) -> Option<&Mat> {
        self.reduced.as_ref().map(|(l, _)| l)
    }
    pub fn pi(&self) -> Option<&Mat> {
        self.reduced.as_ref().map(|(_, p)| p)
    }
    pub fn nc(&self) -> usize {
        self.l.nrows()
    }
    pub fn nu(&self) -> usize {
        self.k.nrows()
    }
    pub fn np(&self) -> usize {
        self.g.ncols()
    }

    fn check_against(&self, plant: &PlantModel) -> Result<()> {
        if self.np() != plant.np() {
            return Err(validation(format!(
                "G/R have {} columns but the plant has n_p = {}",
                self.np(),
                plant.np()
            )));
        }
        if self.nu() != plant.nu() {
            return Err(validation(format!(
                "K/R have {} rows but the plant has n_u = {}",
                self.nu(),
                plant.nu()
            )));
        }
        Ok(())
    }
}

/// Sampling-interval bounds `0 < T1 ≤ t_{k+1} − t_k ≤ T2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundsRaw", into = "BoundsRaw")]
pub struct SamplingBounds {
    t1: f64,
    t2: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsRaw {
    #[serde(rename = "T1")]
    t1: f64,
    #[serde(rename = "T2")]
    t2: f64,
}

impl TryFrom<BoundsRaw> for SamplingBounds {
    type Error = Error;
    fn try_from(r: BoundsRaw) -> Result<Self> {
        SamplingBounds::new(r.t1, r.t2)
    }
}

impl From<SamplingBounds> for BoundsRaw {
    fn from(b: SamplingBounds) -> Self {
        BoundsRaw { t1: b.t1, t2: b.t2 }
    }
}

impl SamplingBounds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if !(t1.is_finite() && t2.is_finite() && t1 > 0.0 && t1 <= t2) {
            return Err(validation(format!(
                "sampling bounds need 0 < T1 <= T2, got T1 = {t1}, T2 = {t2}"
            )));
        }
        Ok(Self { t1, t2 })
    }
    pub fn t1(&self) -> f64 {
        self.t1
    }
    pub fn t2(&self) -> f64 {
        self.t2
    }
}

/// Flow/jump matrices of the closed loop plus the fixed blocks used by the
/// design conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMatrices {
    /// Flow matrix `[[A,0,B],[0,0,0],[0,0,0]]`.
    pub f: Mat,
    /// Drift input `[I;0;0]`.
    pub bf: Mat,
    /// Jump matrix `[[I,0,0],[G,L,0],[R,K,0]]`.
    pub j: Mat,
    /// Nominal flow matrix built from `(A0, B0)`.
    pub f0: Mat,
    /// Lifted uncertainty input `[D_Δ;0;0]`.
    pub d: Mat,
    /// Lifted uncertainty output `[E_Δ, 0, F_Δ]`.
    pub e: Mat,
    /// `[[I,0,0],[0,0,0],[0,-I,0]]`.
    pub j0: Mat,
    /// `[0;I;I]`.
    pub bj: Mat,
    pub np: usize,
    pub nc: usize,
    pub nu: usize,
}

impl ClosedLoopMatrices {
    pub fn n(&self) -> usize {
        self.np + self.nc + self.nu
    }
}

pub fn flow_matrix(a: &Mat, b: &Mat, nc: usize) -> Mat {
    let (np, nu) = (a.nrows(), b.ncols());
    let mut f = Mat::zeros(np + nc + nu, np + nc + nu);
    f.view_mut((0, 0), (np, np)).copy_from(a);
    f.view_mut((0, np + nc), (np, nu)).copy_from(b);
    f
}

pub fn jump_matrix(c: &Controller) -> Mat {
    let (np, nc, nu) = (c.np(), c.nc(), c.nu());
    let id = Mat::identity(np, np);
    block(&[
        vec![Some(&id), Some(&Mat::zeros(np, nc)), Some(&Mat::zeros(np, nu))],
        vec![Some(c.g()), Some(c.l()), Some(&Mat::zeros(nc, nu))],
        vec![Some(c.r()), Some(c.k()), Some(&Mat::zeros(nu, nu))],
    ])
}

/// Jump-decomposition blocks `(J0, B_J)` for the reduced washout form.
pub fn jump_decomposition(np: usize, nu: usize) -> (Mat, Mat) {
    let n = np + 2 * nu;
    let mut j0 = Mat::zeros(n, n);
    j0.view_mut((0, 0), (np, np)).fill_with_identity();
    for i in 0..nu {
        j0[(np + nu + i, np + i)] = -1.0;
    }
    let mut bj = Mat::zeros(n, nu);
    for i in 0..nu {
        bj[(np + i, i)] = 1.0;
        bj[(np + nu + i, i)] = 1.0;
    }
    (j0, bj)
}

/// Closed loop with given plant matrices `(A, B)`.
pub fn assemble(plant: &PlantModel, controller: &Controller, a: &Mat, b: &Mat) -> Result<ClosedLoopMatrices> {
    controller.check_against(plant)?;
    check_shape("A", a, plant.np(), plant.np())?;
    check_shape("B", b, plant.np(), plant.nu())?;
    let (np, nc, nu) = (plant.np(), controller.nc(), plant.nu());
    let n = np + nc + nu;
    let mut bf = Mat::zeros(n, np);
    bf.view_mut((0, 0), (np, np)).fill_with_identity();
    let mut d = Mat::zeros(n, plant.n_delta());
    d.view_mut((0, 0), (np, plant.n_delta())).copy_from(plant.d_delta());
    let mut e = Mat::zeros(plant.m_delta(), n);
    e.view_mut((0, 0), (plant.m_delta(), np)).copy_from(plant.e_delta());
    e.view_mut((0, np + nc), (plant.m_delta(), nu))
        .copy_from(plant.f_delta());
    let (j0, bj) = jump_decomposition(np, nu);
    Ok(ClosedLoopMatrices {
        f: flow_matrix(a, b, nc),
        bf,
        j: jump_matrix(controller),
        f0: flow_matrix(plant.a0(), plant.b0(), nc),
        d,
        e,
        j0,
        bj,
        np,
        nc,
        nu,
    })
}

/// Closed loop for the nominal plant `(A0, B0)`.
pub fn assemble_nominal(plant: &PlantModel, controller: &Controller) -> Result<ClosedLoopMatrices> {
    assemble(plant, controller, plant.a0(), plant.b0())
}

/// Closed loop for the plant realized at `sample`.
pub fn assemble_realized(
    plant: &PlantModel,
    controller: &Controller,
    sample: &UncertaintySample,
) -> Result<ClosedLoopMatrices> {
    let (a, b) = plant.realize(sample)?;
    assemble(plant, controller, &a, &b)
}

pub fn realize(plant: &PlantModel, sample: &UncertaintySample) -> Result<(Mat, Mat)> {
    plant.realize(sample)
}

/// `x̄ = −A⁻¹d`, the unique unforced equilibrium.
pub fn unforced_equilibrium(a: &Mat, d: &DriftVector) -> Result<Vector> {
    if a.nrows() != a.ncols() {
        return Err(validation("A must be square"));
    }
    if a.nrows() != d.as_vector().len() {
        return Err(validation("drift length differs from n_p"));
    }
    let c = linalg::cond(a);
    if c > SINGULAR_COND {
        return Err(Error::SingularPlant { cond: c });
    }
    let sol = a
        .clone()
        .lu()
        .solve(d.as_vector())
        .ok_or(Error::SingularPlant { cond: f64::INFINITY })?;
    Ok(-sol)
}

/// Solves `ξ̄ = Lξ̄ + Gx̄` and returns `ξ̄` together with `‖Kξ̄ + Rx̄‖∞`.
pub fn washout_fixed_point(controller: &Controller, xbar: &Vector) -> Result<(Vector, f64)> {
    if xbar.len() != controller.np() {
        return Err(validation("x̄ length differs from the controller's n_p"));
    }
    let nc = controller.nc();
    let i_minus_l: Mat = Mat::identity(nc, nc) - controller.l();
    let c = linalg::cond(&i_minus_l);
    if c > SINGULAR_COND {
        return Err(Error::NonWashout { cond: c });
    }
    let rhs = controller.g() * xbar;
    let xi = i_minus_l
        .svd(true, true)
        .solve(&rhs, 0.0)
        .map_err(|e| validation(e.to_string()))?;
    let out = controller.k() * &xi + controller.r() * xbar;
    let residual = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((xi, residual))
}

/// Stacked lifted equilibrium `(x̄, ξ̄, 0)`.
pub fn lifted_equilibrium(controller: &Controller, xbar: &Vector) -> Result<Vector> {
    let (xi, _) = washout_fixed_point(controller, xbar)?;
    let mut z = Vector::zeros(controller.np() + controller.nc() + controller.nu());
    z.rows_mut(0, xbar.len()).copy_from(xbar);
    z.rows_mut(xbar.len(), xi.len()).copy_from(&xi);
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn paper_gains() -> Controller {
        Controller::washout(Mat::from_element(1, 1, 1.0521), from_rows(&[vec![-1.3830, -2.1917]])).unwrap()
    }

    fn zero_controller() -> Controller {
        Controller::new(Mat::zeros(1, 1), Mat::zeros(1, 2), Mat::zeros(1, 1), Mat::zeros(1, 2)).unwrap()
    }

    #[test]
    fn nominal_flow_matrix_of_example() {
        let cl = assemble_nominal(&PlantModel::example(), &paper_gains()).unwrap();
        let expect = from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0],
        ]);
        assert_eq!(cl.f0, expect);
        assert_eq!(cl.d, from_rows(&[vec![1.0], vec![0.0], vec![0.0], vec![0.0]]));
        assert_eq!(cl.e, from_rows(&[vec![0.2, 0.0, 0.0, 0.02]]));
    }

    #[test]
    fn zero_controller_jump_pattern() {
        let cl = assemble_nominal(&PlantModel::example(), &zero_controller()).unwrap();
        let mut expect = Mat::zeros(4, 4);
        expect[(0, 0)] = 1.0;
        expect[(1, 1)] = 1.0;
        assert_eq!(cl.j, expect);
    }

    #[test]
    fn washout_jump_decomposes_exactly() {
        let c = paper_gains();
        let cl = assemble_nominal(&PlantModel::example(), &c).unwrap();
        let mut pl0 = Mat::zeros(1, 4);
        pl0.view_mut((0, 0), (1, 2)).copy_from(c.pi().unwrap());
        pl0.view_mut((0, 2), (1, 1)).copy_from(c.lambda().unwrap());
        assert_eq!(&cl.j0 + &cl.bj * pl0, cl.j);
    }

    #[test]
    fn dimension_mismatch_names_block() {
        let bad = Controller::new(Mat::zeros(1, 1), Mat::zeros(1, 3), Mat::zeros(1, 1), Mat::zeros(1, 3)).unwrap();
        let err = assemble_nominal(&PlantModel::example(), &bad).unwrap_err();
        assert!(err.to_string().contains("G/R"), "{err}");
        let err = Controller::new(Mat::zeros(1, 1), Mat::zeros(2, 2), Mat::zeros(1, 1), Mat::zeros(1, 2)).unwrap_err();
        assert!(err.to_string().contains("G has shape"), "{err}");
    }

    #[test]
    fn realize_examples() {
        let p = PlantModel::example();
        let (a, b) = p.realize(&UncertaintySample::scalar(1.0).unwrap()).unwrap();
        assert_eq!(a, from_rows(&[vec![0.2, 1.0], vec![1.0, 1.0]]));
        assert_eq!(b, from_rows(&[vec![0.02], vec![1.0]]));
        let (a, b) = p.realize(&UncertaintySample::scalar(0.0).unwrap()).unwrap();
        assert_eq!((&a, &b), (p.a0(), p.b0()));
        let (a, _) = p.realize(&UncertaintySample::scalar(-1.0).unwrap()).unwrap();
        assert_eq!(a, from_rows(&[vec![-0.2, 1.0], vec![1.0, 1.0]]));
    }

    #[test]
    fn uncertainty_ball_enforced() {
        assert!(UncertaintySample::scalar(1.0 + 1e-13).is_ok());
        assert!(UncertaintySample::scalar(1.01).is_err());
    }

    #[test]
    fn b0_rank_enforced() {
        let err = PlantModel::new(
            Mat::identity(2, 2),
            Mat::zeros(2, 1),
            Mat::zeros(2, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
        );
        assert!(err.is_err());
    }

    #[test]
    fn equilibrium_examples() {
        let a = from_rows(&[vec![0.2, 1.0], vec![1.0, 1.0]]);
        let d = DriftVector::new(Vector::from_vec(vec![1.0, 10.0])).unwrap();
        let x = unforced_equilibrium(&a, &d).unwrap();
        assert!((x[0] + 11.25).abs() < 1e-12 && (x[1] - 1.25).abs() < 1e-12);
        let x = unforced_equilibrium(&a, &DriftVector::zero(2)).unwrap();
        assert_eq!(x.norm(), 0.0);
        let d = DriftVector::new(Vector::from_vec(vec![3.0, -4.0])).unwrap();
        let x = unforced_equilibrium(&Mat::identity(2, 2), &d).unwrap();
        assert_eq!(x, Vector::from_vec(vec![-3.0, 4.0]));
        let sing = from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(
            unforced_equilibrium(&sing, &d),
            Err(Error::SingularPlant { .. })
        ));
    }

    #[test]
    fn washout_fixed_point_examples() {
        let id = Controller::new(
            Mat::zeros(2, 2),
            Mat::identity(2, 2),
            Mat::zeros(1, 2),
            Mat::zeros(1, 2),
        )
        .unwrap();
        let v = Vector::from_vec(vec![0.3, -2.0]);
        let (xi, res) = washout_fixed_point(&id, &v).unwrap();
        assert!((xi - &v).norm() < 1e-14);
        assert_eq!(res, 0.0);

        let (xi, res) = washout_fixed_point(&paper_gains(), &Vector::from_vec(vec![-11.25, 1.25])).unwrap();
        // (1 - Λ) ξ̄ = Π x̄ = 12.819125
        assert!((xi[0] - 12.819125 / (1.0 - 1.0521)).abs() < 1e-9);
        assert!((xi[0] + 246.05).abs() < 0.01);
        assert!(res <= 1e-9);

        let l_eq_i = Controller::new(
            Mat::identity(1, 1),
            Mat::zeros(1, 2),
            Mat::zeros(1, 1),
            Mat::zeros(1, 2),
        )
        .unwrap();
        assert!(matches!(
            washout_fixed_point(&l_eq_i, &v),
            Err(Error::NonWashout { .. })
        ));
    }

    #[test]
    fn json_roundtrip_and_unknown_keys() {
        let p = PlantModel::example();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"A0\":[[0.0,1.0],[1.0,1.0]]"));
        let back: PlantModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = s.replace("\"A0\"", "\"Azero\"");
        assert!(serde_json::from_str::<PlantModel>(&bad).is_err());

        let c = paper_gains();
        let back: Controller = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn controller_json_forms() {
        let short: Controller = serde_json::from_str(r#"{"Lambda": [[2.0]], "Pi": [[1.0, -1.0]]}"#).unwrap();
        assert_eq!(short.k()[(0, 0)], 1.0);
        assert_eq!(short.g(), short.r());
        let full: Controller =
            serde_json::from_str(r#"{"L": [[2.0]], "G": [[1.0, -1.0]], "K": [[1.0]], "R": [[1.0, -1.0]]}"#).unwrap();
        assert!(full.lambda().is_none());
        // K one ulp off Lambda - 1
        let lam = 1.003758745528395_f64;
        let k = f64::from_bits((lam - 1.0).to_bits() + 1);
        let both = format!(
            r#"{{"L": [[{lam}]], "G": [[1.0, -1.0]], "K": [[{k}]], "R": [[1.0, -1.0]], "Lambda": [[{lam}]], "Pi": [[1.0, -1.0]]}}"#
        );
        let c: Controller = serde_json::from_str(&both).unwrap();
        assert_eq!(c.k()[(0, 0)], k);
        assert!(c.lambda().is_some());
        let again: Controller = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(again.k(), c.k());
        for bad in [
            r#"{"Lambda": [[2.0]]}"#,
            r#"{"L": [[2.0]], "G": [[1.0, -1.0]]}"#,
            r#"{}"#,
            r#"{"Lambda": [[2.0]], "Pi": [[1.0, -1.0]], "L": [[3.0]], "G": [[1.0, -1.0]], "K": [[2.0]], "R": [[1.0, -1.0]]}"#,
        ] {
            assert!(serde_json::from_str::<Controller>(bad).is_err(), "{bad}");
        }
    }
}
