//! Single-chart manifolds, smooth maps, vector fields, one-forms, RK4 flows
//! and finite-difference Cartan calculus.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Point = DVector<f64>;

type VecFn = Arc<dyn Fn(&Point) -> DVector<f64> + Send + Sync>;
type MatFn = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

/// Default central-difference step.
pub const H_FD: f64 = 1e-5;

/// A manifold covered by one box-shaped chart. Bounds may be infinite; a
/// coordinate with a period wraps into `[lower, lower + period)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartManifold {
    lower: Vec<f64>,
    upper: Vec<f64>,
    period: Vec<Option<f64>>,
}

impl ChartManifold {
    /// All of ℝⁿ.
    pub fn euclidean(dim: usize) -> Self {
        ChartManifold { lower: vec![f64::NEG_INFINITY; dim], upper: vec![f64::INFINITY; dim], period: vec![None; dim] }
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Precondition("box bounds of different length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.partial_cmp(u) != Some(std::cmp::Ordering::Less)) {
            return Err(Error::Precondition("box lower bound must be below upper".into()));
        }
        let dim = lower.len();
        Ok(ChartManifold { lower, upper, period: vec![None; dim] })
    }

    /// Marks coordinate `i` as periodic; its box becomes `[lower, lower + period)`.
    pub fn with_period(mut self, i: usize, period: f64) -> Self {
        if !self.lower[i].is_finite() {
            self.lower[i] = 0.0;
        }
        self.upper[i] = self.lower[i] + period;
        self.period[i] = Some(period);
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_periodic(&self, i: usize) -> bool {
        self.period[i].is_some()
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.len() == self.dim()
            && x.iter().enumerate().all(|(i, &v)| self.period[i].is_some() || (v >= self.lower[i] && v <= self.upper[i]))
    }

    pub fn wrap(&self, x: &mut Point) {
        for (i, p) in self.period.iter().enumerate() {
            if let Some(p) = p {
                let lo = self.lower[i];
                x[i] = lo + (x[i] - lo).rem_euclid(*p);
            }
        }
    }

    /// Cartesian product chart.
    pub fn product(&self, other: &ChartManifold) -> ChartManifold {
        let mut out = self.clone();
        out.lower.extend_from_slice(&other.lower);
        out.upper.extend_from_slice(&other.upper);
        out.period.extend_from_slice(&other.period);
        out
    }
}

/// A smooth map between charts, with an optional analytic Jacobian.
#[derive(Clone)]
pub struct SmoothMap {
    domain: ChartManifold,
    codomain: ChartManifold,
    eval: VecFn,
    jac: Option<MatFn>,
    h_fd: f64,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("dim", &self.domain.dim())
            .field("codim", &self.codomain.dim())
            .field("analytic_jacobian", &self.jac.is_some())
            .finish()
    }
}

impl SmoothMap {
    pub fn new<F>(domain: ChartManifold, codomain: ChartManifold, eval: F) -> Self
    where
        F: Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    {
        SmoothMap { domain, codomain, eval: Arc::new(eval), jac: None, h_fd: H_FD }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.jac = Some(Arc::new(jac));
        self
    }

    /// Linear map `x ↦ a x + b` with its exact Jacobian.
    pub fn affine(domain: ChartManifold, codomain: ChartManifold, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let a2 = a.clone();
        SmoothMap::new(domain, codomain, move |x| &a * x + &b).with_jacobian(move |_| a2.clone())
    }

    pub fn linear(domain: ChartManifold, codomain: ChartManifold, a: DMatrix<f64>) -> Self {
        let rows = a.nrows();
        SmoothMap::affine(domain, codomain, a, DVector::zeros(rows))
    }

    pub fn identity(m: ChartManifold) -> Self {
        let n = m.dim();
        SmoothMap::linear(m.clone(), m, DMatrix::identity(n, n))
    }

    pub fn with_step(mut self, h_fd: f64) -> Self {
        self.h_fd = h_fd;
        self
    }

    pub fn domain(&self) -> &ChartManifold {
        &self.domain
    }

    pub fn codomain(&self) -> &ChartManifold {
        &self.codomain
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jac.is_some()
    }

    pub fn eval(&self, x: &Point) -> DVector<f64> {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Point) -> DMatrix<f64> {
        match &self.jac {
            Some(j) => j(x),
            None => self.fd_jacobian(x),
        }
    }

    pub fn fd_jacobian(&self, x: &Point) -> DMatrix<f64> {
        let f = &self.eval;
        central_jacobian(&|p: &Point| f(p), x, self.h_fd)
    }

    /// Jacobian–vector product.
    pub fn push(&self, x: &Point, v: &DVector<f64>) -> DVector<f64> {
        self.jacobian(x) * v
    }

    /// Relative Frobenius error between the analytic and the central
    /// difference Jacobian at `x` (zero when no analytic Jacobian is set).
    pub fn jacobian_error(&self, x: &Point) -> f64 {
        match &self.jac {
            None => 0.0,
            Some(j) => {
                let a = j(x);
                let d = self.fd_jacobian(x);
                (&a - &d).norm() / a.norm().max(1.0)
            }
        }
    }

    pub fn compose(&self, inner: &SmoothMap) -> SmoothMap {
        let outer = self.clone();
        let inner_c = inner.clone();
        let outer2 = self.clone();
        let inner2 = inner.clone();
        SmoothMap::new(inner.domain.clone(), self.codomain.clone(), move |x| outer.eval(&inner_c.eval(x)))
            .with_jacobian(move |x| outer2.jacobian(&inner2.eval(x)) * inner2.jacobian(x))
    }
}

/// Central-difference Jacobian of `f` at `x`.
pub fn central_jacobian(f: &dyn Fn(&Point) -> DVector<f64>, x: &Point, h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        cols.push((f(&xp) - f(&xm)) / (2.0 * h));
    }
    let rows = cols.first().map(|c| c.len()).unwrap_or_else(|| f(x).len());
    DMatrix::from_fn(rows, n, |r, c| cols[c][r])
}

/// A vector field in chart components.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    eval: VecFn,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorField(dim = {})", self.dim)
    }
}

impl VectorField {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    {
        VectorField { dim, eval: Arc::new(eval) }
    }

    pub fn constant(v: DVector<f64>) -> Self {
        VectorField::new(v.len(), move |_| v.clone())
    }

    pub fn zero(dim: usize) -> Self {
        VectorField::constant(DVector::zeros(dim))
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut e = DVector::zeros(dim);
        e[i] = 1.0;
        VectorField::constant(e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Point) -> DVector<f64> {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Point, h: f64) -> DMatrix<f64> {
        let f = &self.eval;
        central_jacobian(&|p: &Point| f(p), x, h)
    }

    pub fn scaled(&self, c: f64) -> VectorField {
        let inner = self.clone();
        VectorField::new(self.dim, move |x| inner.eval(x) * c)
    }
}

/// A one-form in chart components.
#[derive(Clone)]
pub struct OneForm {
    dim: usize,
    eval: VecFn,
}

impl fmt::Debug for OneForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OneForm(dim = {})", self.dim)
    }
}

impl OneForm {
    pub fn new<F>(dim: usize, eval: F) -> Self
    where
        F: Fn(&Point) -> DVector<f64> + Send + Sync + 'static,
    {
        OneForm { dim, eval: Arc::new(eval) }
    }

    pub fn constant(a: DVector<f64>) -> Self {
        OneForm::new(a.len(), move |_| a.clone())
    }

    pub fn zero(dim: usize) -> Self {
        OneForm::constant(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Point) -> DVector<f64> {
        (self.eval)(x)
    }

    /// `D[i][j] = ∂_j α_i`.
    pub fn jacobian(&self, x: &Point, h: f64) -> DMatrix<f64> {
        let f = &self.eval;
        central_jacobian(&|p: &Point| f(p), x, h)
    }
}

fn check_finite(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericalBlowup(what.to_string()))
    }
}

/// Classical RK4 endpoint of the flow of `field` from `x0` for time `time`
/// in `steps` equal steps. Periodic coordinates are wrapped after each step.
pub fn flow(field: &VectorField, manifold: &ChartManifold, x0: &Point, time: f64, steps: usize) -> Result<Point> {
    if steps == 0 {
        return Err(Error::Precondition("flow needs at least one step".into()));
    }
    if time == 0.0 {
        return Ok(x0.clone());
    }
    let dt = time / steps as f64;
    let mut x = x0.clone();
    for step in 0..steps {
        let k1 = field.eval(&x);
        let k2 = field.eval(&(&x + &k1 * (dt / 2.0)));
        let k3 = field.eval(&(&x + &k2 * (dt / 2.0)));
        let k4 = field.eval(&(&x + &k3 * dt));
        let mut next = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        check_finite(&next, "flow state")?;
        manifold.wrap(&mut next);
        if !manifold.contains(&next) {
            return Err(Error::FlowEscapedBox { last: x.iter().cloned().collect(), time: dt * step as f64 });
        }
        x = next;
    }
    Ok(x)
}

/// Jacobian–vector product of `f` at `x`.
pub fn pushforward(f: &SmoothMap, x: &Point, v: &DVector<f64>) -> DVector<f64> {
    f.push(x, v)
}

/// `[X, Y](x) = DY·X − DX·Y`.
pub fn lie_bracket(x_field: &VectorField, y_field: &VectorField, x: &Point, h: f64) -> Result<DVector<f64>> {
    let out = y_field.jacobian(x, h) * x_field.eval(x) - x_field.jacobian(x, h) * y_field.eval(x);
    check_finite(&out, "lie bracket")?;
    Ok(out)
}

/// Components of `£_X β` at `x`: `Dβ·X + DXᵀ·β`.
pub fn lie_derivative_oneform(x_field: &VectorField, beta: &OneForm, x: &Point, h: f64) -> Result<DVector<f64>> {
    let out = beta.jacobian(x, h) * x_field.eval(x) + x_field.jacobian(x, h).transpose() * beta.eval(x);
    check_finite(&out, "lie derivative")?;
    Ok(out)
}

/// `dα(v, w)` with constant extensions of `v`, `w`.
pub fn d_oneform(alpha: &OneForm, x: &Point, v: &DVector<f64>, w: &DVector<f64>, h: f64) -> Result<f64> {
    let d = alpha.jacobian(x, h);
    let out = w.dot(&(&d * v)) - v.dot(&(&d * w));
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalBlowup("exterior derivative".into()))
    }
}

/// Components of `i_Y dα` at `x`.
pub fn interior_d_oneform(y_field: &VectorField, alpha: &OneForm, x: &Point, h: f64) -> Result<DVector<f64>> {
    let d = alpha.jacobian(x, h);
    let y = y_field.eval(x);
    let out = &d * &y - d.transpose() * &y;
    check_finite(&out, "interior product")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn constant_field_flow() {
        let m = ChartManifold::euclidean(2);
        let x = flow(&VectorField::coordinate(2, 0), &m, &v(&[0.0, 0.0]), 1.0, 200).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn rotation_flow_quarter_turn() {
        let m = ChartManifold::euclidean(2);
        let rot = VectorField::new(2, |p| DVector::from_vec(vec![-p[1], p[0]]));
        let x = flow(&rot, &m, &v(&[1.0, 0.0]), FRAC_PI_2, 1000).unwrap();
        // exp(Jπ/2)(1,0) = (0,1)
        assert!((x - v(&[0.0, 1.0])).norm() < 1e-8);
    }

    #[test]
    fn zero_time_is_exact() {
        let m = ChartManifold::euclidean(2);
        let rot = VectorField::new(2, |p| DVector::from_vec(vec![-p[1], p[0]]));
        let x0 = v(&[0.3, -0.7]);
        assert_eq!(flow(&rot, &m, &x0, 0.0, 10).unwrap(), x0);
    }

    #[test]
    fn escaping_the_box_is_reported() {
        let m = ChartManifold::boxed(vec![-1.0], vec![1.0]).unwrap();
        let err = flow(&VectorField::coordinate(1, 0), &m, &v(&[0.0]), 5.0, 50).unwrap_err();
        match err {
            Error::FlowEscapedBox { last, .. } => assert!(last[0] <= 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blowup_is_reported() {
        let m = ChartManifold::euclidean(1);
        let f = VectorField::new(1, |p| DVector::from_vec(vec![p[0] * p[0] * 1e200]));
        assert!(matches!(flow(&f, &m, &v(&[10.0]), 1.0, 10), Err(Error::NumericalBlowup(_))));
    }

    #[test]
    fn periodic_coordinate_wraps() {
        let m = ChartManifold::euclidean(1).with_period(0, 1.0);
        let x = flow(&VectorField::coordinate(1, 0), &m, &v(&[0.25]), 2.5, 100).unwrap();
        assert_abs_diff_eq!(x[0], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn pushforward_examples() {
        let r2 = ChartManifold::euclidean(2);
        let id = SmoothMap::identity(r2.clone());
        assert_eq!(pushforward(&id, &v(&[3.0, 4.0]), &v(&[1.0, 2.0])), v(&[1.0, 2.0]));
        let sum = SmoothMap::new(r2.clone(), ChartManifold::euclidean(1), |p| v(&[p[0] + p[1]]));
        assert_abs_diff_eq!(pushforward(&sum, &v(&[5.0, -1.0]), &v(&[1.0, 0.0]))[0], 1.0, epsilon = 1e-9);
        let quad = SmoothMap::new(r2.clone(), r2, |p| v(&[p[0] * p[0], p[0] * p[1]]));
        // J = [[2x, 0], [y, x]] at (1,2) applied to (1,1) = (2, 3)
        let out = pushforward(&quad, &v(&[1.0, 2.0]), &v(&[1.0, 1.0]));
        assert_abs_diff_eq!(out[0], 2.0, epsilon = 1e-8);
        assert_abs_diff_eq!(out[1], 3.0, epsilon = 1e-8);
    }

    #[test]
    fn bracket_examples() {
        let p = v(&[1.0, 1.0]);
        let dx = VectorField::coordinate(2, 0);
        let dy = VectorField::coordinate(2, 1);
        assert!(lie_bracket(&dx, &dy, &p, H_FD).unwrap().norm() < 1e-12);
        let x_dy = VectorField::new(2, |q| v(&[0.0, q[0]]));
        let b = lie_bracket(&x_dy, &dx, &p, H_FD).unwrap();
        assert_abs_diff_eq!(b[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(b[1], -1.0, epsilon = 1e-9);
        assert!(lie_bracket(&x_dy, &x_dy, &p, H_FD).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cartan_calculus_examples() {
        let p = v(&[0.4, -1.3]);
        let dx = VectorField::coordinate(2, 0);
        let dy_form = OneForm::constant(v(&[0.0, 1.0]));
        assert!(lie_derivative_oneform(&dx, &dy_form, &p, H_FD).unwrap().norm() < 1e-12);
        let x_dy = OneForm::new(2, |q| v(&[0.0, q[0]]));
        let e1 = v(&[1.0, 0.0]);
        let e2 = v(&[0.0, 1.0]);
        assert_abs_diff_eq!(d_oneform(&x_dy, &p, &e1, &e2, H_FD).unwrap(), 1.0, epsilon = 1e-9);
        let dx_form = OneForm::constant(v(&[1.0, 0.0]));
        assert_abs_diff_eq!(d_oneform(&dx_form, &p, &e1, &e2, H_FD).unwrap(), 0.0, epsilon = 1e-12);
        // £_{∂x}(x dy) = dy
        let l = lie_derivative_oneform(&dx, &x_dy, &p, H_FD).unwrap();
        assert_abs_diff_eq!(l[0], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(l[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn analytic_jacobian_agrees_with_differences() {
        let r2 = ChartManifold::euclidean(2);
        let f = SmoothMap::new(r2.clone(), r2, |p| v(&[p[0] * p[0], p[0] * p[1]]))
            .with_jacobian(|p| DMatrix::from_row_slice(2, 2, &[2.0 * p[0], 0.0, p[1], p[0]]));
        assert!(f.jacobian_error(&v(&[0.7, -2.0])) < 1e-8);
    }
}
