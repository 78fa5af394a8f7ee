//! Dirac structures as spanning families of Pontryagin sections, the
//! Courant–Dorfman bracket, characteristic spaces, forward Dirac maps,
//! multiplicative Dirac structures and their pushforward to a leaf space.
//!
//! Conventions: `⟨(v, α), (w, β)⟩ = α(w) + β(v)`, `π♯α = π(α, ·)` which is
//! `πᵀα` on component matrices, and `(i_v ω)_j = Σ_i v_i ω_ij`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomcore::{
    flow, interior_d_oneform, lie_bracket, lie_derivative_oneform, ChartManifold, OneForm, Point, SmoothMap, VectorField,
};
use crate::leafspace::LeafChart;
use crate::liegroupoid::{concat, cotangent_mul, cotangent_source, cotangent_target, CotangentArrow, SmoothGroupoid};
use crate::linalg::{self, RankPolicy};
use crate::multdist::{check_multiplicative, Distribution};
use crate::numerics::Numerics;
use crate::report::{CheckReport, Tracker};
use crate::rng::{self, Rng};

/// Radius of the sampling cube used on unbounded charts.
const SAMPLE_RADIUS: f64 = 2.0;

pub fn pontryagin_pairing(v: &DVector<f64>, alpha: &DVector<f64>, w: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    alpha.dot(w) + beta.dot(v)
}

/// Pontryagin section `(X, α)`.
#[derive(Debug, Clone)]
pub struct Section {
    pub x: VectorField,
    pub alpha: OneForm,
}

#[derive(Debug, Clone)]
pub struct DiracStructure {
    base: ChartManifold,
    gens: Vec<Section>,
}

/// Bases of `G₀`, `G₁` in `TM` and `P₀`, `P₁` in `T*M`.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristic {
    pub g0: DMatrix<f64>,
    pub g1: DMatrix<f64>,
    pub p0: DMatrix<f64>,
    pub p1: DMatrix<f64>,
}

impl DiracStructure {
    /// `n` generator pairs on an `n`-dimensional chart.
    pub fn new(base: ChartManifold, gens: Vec<Section>) -> Result<Self> {
        let n = base.dim();
        if gens.len() != n {
            return Err(Error::Precondition(format!(
                "a Dirac structure on dimension {n} needs {n} generators, got {}",
                gens.len()
            )));
        }
        if gens.iter().any(|s| s.x.dim() != n || s.alpha.dim() != n) {
            return Err(Error::Precondition("generator dimension does not match the base".into()));
        }
        Ok(DiracStructure { base, gens })
    }

    /// `TM ⊕ 0`.
    pub fn tangent(base: ChartManifold) -> Self {
        let n = base.dim();
        let gens = (0..n).map(|i| Section { x: VectorField::coordinate(n, i), alpha: OneForm::zero(n) }).collect();
        DiracStructure { base, gens }
    }

    pub fn base(&self) -> &ChartManifold {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn gens(&self) -> &[Section] {
        &self.gens
    }

    /// Generators at `x` as the columns of a `2n × n` matrix, tangent part on top.
    pub fn fiber(&self, x: &Point) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(2 * n, n);
        for (j, s) in self.gens.iter().enumerate() {
            m.view_mut((0, j), (n, 1)).copy_from(&s.x.eval(x));
            m.view_mut((n, j), (n, 1)).copy_from(&s.alpha.eval(x));
        }
        m
    }

    /// Orthonormal basis of `D(x)`; `RankDrift` unless it has dimension `n`.
    pub fn fiber_basis(&self, x: &Point, policy: RankPolicy) -> Result<DMatrix<f64>> {
        let q = linalg::orth(&self.fiber(x), policy);
        if q.ncols() != self.dim() {
            return Err(Error::RankDrift { expected: self.dim(), found: q.ncols(), at: x.iter().cloned().collect() });
        }
        Ok(q)
    }

    /// Largest pairing between generators at `x`.
    pub fn isotropy_residual(&self, x: &Point) -> f64 {
        let n = self.dim();
        let f = self.fiber(x);
        let (v, a) = (f.rows(0, n), f.rows(n, n));
        let gram = a.transpose() * v + v.transpose() * a;
        linalg::max_abs(&gram)
    }

    pub fn sample_point(&self, rng: &mut Rng) -> Point {
        rng::in_manifold(rng, &self.base, SAMPLE_RADIUS)
    }

    /// Isotropy and fiber dimension `n` at sampled points.
    pub fn check_lagrangian(&self, samples: usize, tol: f64, policy: RankPolicy, rng: &mut Rng) -> CheckReport {
        let mut track = Tracker::new("check_lagrangian", tol);
        for _ in 0..samples {
            let x = self.sample_point(rng);
            if linalg::rank(&self.fiber(&x), policy) != self.dim() {
                track.fail_at(x.as_slice());
            } else {
                track.record(self.isotropy_residual(&x), &x);
            }
        }
        track.finish()
    }

    /// Generators replaced on a region, for fault injection.
    pub fn with_generator(mut self, i: usize, section: Section) -> Self {
        self.gens[i] = section;
        self
    }
}

/// `π` as a matrix-valued function, `π_ij = π(dx_i, dx_j)`.
type MatrixField = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
pub struct PoissonBivector {
    base: ChartManifold,
    pi: MatrixField,
}

impl fmt::Debug for PoissonBivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PoissonBivector(dim = {})", self.base.dim())
    }
}

impl PoissonBivector {
    pub fn new<F>(base: ChartManifold, pi: F) -> Self
    where
        F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        PoissonBivector { base, pi: Arc::new(pi) }
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        PoissonBivector::new(ChartManifold::euclidean(m.nrows()), move |_| m.clone())
    }

    pub fn base(&self) -> &ChartManifold {
        &self.base
    }

    pub fn matrix(&self, x: &Point) -> DMatrix<f64> {
        (self.pi)(x)
    }

    pub fn sharp(&self, x: &Point, alpha: &DVector<f64>) -> DVector<f64> {
        self.matrix(x).transpose() * alpha
    }

    pub fn antisymmetry_residual(&self, x: &Point) -> f64 {
        let m = self.matrix(x);
        linalg::max_abs(&(&m + m.transpose()))
    }

    /// Largest component of `[π, π]` at `x`:
    /// `Σ_l π_li ∂_l π_jk + π_lj ∂_l π_ki + π_lk ∂_l π_ij`, derivatives by
    /// central differences.
    pub fn jacobi_residual(&self, x: &Point, h: f64) -> f64 {
        let n = self.base.dim();
        let pi = self.matrix(x);
        let d: Vec<DMatrix<f64>> = (0..n)
            .map(|l| {
                let mut e = DVector::zeros(n);
                e[l] = h;
                (self.matrix(&(x + &e)) - self.matrix(&(x - &e))) / (2.0 * h)
            })
            .collect();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut c = 0.0;
                    for (l, dl) in d.iter().enumerate() {
                        c += pi[(l, i)] * dl[(j, k)] + pi[(l, j)] * dl[(k, i)] + pi[(l, k)] * dl[(i, j)];
                    }
                    worst = worst.max(c.abs());
                }
            }
        }
        worst
    }
}

/// Graph of `ω♭`: generators `(∂_i, i_{∂_i} ω)`.
pub fn from_two_form<F>(base: ChartManifold, omega: F) -> Result<DiracStructure>
where
    F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
{
    let n = base.dim();
    let omega = Arc::new(omega);
    let gens = (0..n)
        .map(|i| {
            let w = Arc::clone(&omega);
            Section { x: VectorField::coordinate(n, i), alpha: OneForm::new(n, move |x| w(x).row(i).transpose()) }
        })
        .collect();
    DiracStructure::new(base, gens)
}

/// Graph of `π♯`: generators `(π♯ dx_i, dx_i)`.
pub fn from_poisson(pi: &PoissonBivector) -> DiracStructure {
    let n = pi.base.dim();
    let gens = (0..n)
        .map(|i| {
            let p = pi.clone();
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            Section { x: VectorField::new(n, move |x| p.matrix(x).row(i).transpose()), alpha: OneForm::constant(e) }
        })
        .collect();
    DiracStructure { base: pi.base.clone(), gens }
}

/// `D ⊖ D` on `M × M`: elements `((v_m, −v_n), (α_m, α_n))`.
pub fn minus_double(d: &DiracStructure) -> DiracStructure {
    let n = d.dim();
    let mut gens = Vec::with_capacity(2 * n);
    for s in &d.gens {
        let (x, a) = (s.x.clone(), s.alpha.clone());
        gens.push(Section {
            x: VectorField::new(2 * n, move |p| concat(&x.eval(&p.rows(0, n).into_owned()), &DVector::zeros(n))),
            alpha: OneForm::new(2 * n, move |p| concat(&a.eval(&p.rows(0, n).into_owned()), &DVector::zeros(n))),
        });
    }
    for s in &d.gens {
        let (x, a) = (s.x.clone(), s.alpha.clone());
        gens.push(Section {
            x: VectorField::new(2 * n, move |p| concat(&DVector::zeros(n), &-x.eval(&p.rows(n, n).into_owned()))),
            alpha: OneForm::new(2 * n, move |p| concat(&DVector::zeros(n), &a.eval(&p.rows(n, n).into_owned()))),
        });
    }
    DiracStructure { base: d.base.product(&d.base), gens }
}

/// `G₀ = {v : (v, 0) ∈ D}`, `G₁ = pr_T D`, `P₀ = {α : (0, α) ∈ D}`, `P₁ = pr_T* D`.
pub fn characteristic_spaces(d: &DiracStructure, x: &Point, policy: RankPolicy) -> Result<Characteristic> {
    let n = d.dim();
    let f = d.fiber_basis(x, policy)?;
    let (v, a) = (f.rows(0, n).into_owned(), f.rows(n, n).into_owned());
    let g0 = linalg::orth(&(&v * linalg::null_space(&a, policy)), policy);
    let p0 = linalg::orth(&(&a * linalg::null_space(&v, policy)), policy);
    Ok(Characteristic { g0, g1: linalg::orth(&v, policy), p0, p1: linalg::orth(&a, policy) })
}

/// `G₀` as a distribution of the rank found at `at`.
pub fn characteristic_distribution(d: &DiracStructure, at: &Point, policy: RankPolicy) -> Result<Distribution> {
    let rank = characteristic_spaces(d, at, policy)?.g0.ncols();
    let d2 = d.clone();
    Ok(Distribution::projected(d.dim(), rank, move |x| match characteristic_spaces(&d2, x, policy) {
        Ok(c) => c.g0,
        Err(_) => DMatrix::from_element(x.len(), 1, f64::NAN),
    }))
}

/// `([X, Y], £_X β − i_Y dα)` at `x`.
pub fn courant_bracket(a: &Section, b: &Section, x: &Point, h: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    let v = lie_bracket(&a.x, &b.x, x, h)?;
    let alpha = lie_derivative_oneform(&a.x, &b.alpha, x, h)? - interior_d_oneform(&b.x, &a.alpha, x, h)?;
    Ok((v, alpha))
}

/// Distance of the bracket of every ordered generator pair to `D(x)`.
pub fn check_integrable(d: &DiracStructure, samples: usize, num: &Numerics, rng: &mut Rng) -> Result<CheckReport> {
    let mut track = Tracker::new("check_integrable", num.tol_member);
    for _ in 0..samples {
        let x = d.sample_point(rng);
        let q = d.fiber_basis(&x, num.rank_policy())?;
        for a in &d.gens {
            for b in &d.gens {
                let (v, alpha) = courant_bracket(a, b, &x, num.h_fd)?;
                track.record(linalg::distance_to_span(&q, &concat(&v, &alpha)), &x);
            }
        }
    }
    Ok(track.finish())
}

/// For each generator `(v_n, α_n)` of `D_N(F(m))`, the least-squares
/// element `(v_m, α_m) ∈ D_M(m)` with `TF v_m = v_n`, `α_m = TFᵀ α_n`.
pub fn is_forward_dirac(
    f: &SmoothMap,
    dm: &DiracStructure,
    dn: &DiracStructure,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<CheckReport> {
    if f.domain().dim() != dm.dim() || f.codomain().dim() != dn.dim() {
        return Err(Error::Precondition("map does not connect the two Dirac bases".into()));
    }
    let n = dm.dim();
    let mut track = Tracker::new("is_forward_dirac", num.tol_dirac);
    for _ in 0..samples {
        let m = dm.sample_point(rng);
        let y = f.eval(&m);
        let jf = f.jacobian(&m);
        let up = dm.fiber(&m);
        let (vm, am) = (up.rows(0, n).into_owned(), up.rows(n, n).into_owned());
        let lhs = linalg::vstack(&[&(&jf * vm), &am]);
        let down = dn.fiber(&y);
        let k = dn.dim();
        for j in 0..k {
            let (vn, an) = (down.view((0, j), (k, 1)).into_owned(), down.view((k, j), (k, 1)).into_owned());
            let rhs = concat(&vn.column(0).into_owned(), &(jf.transpose() * an.column(0)));
            let (_, r) = linalg::lstsq(&lhs, &rhs, num.rank_policy());
            track.record(r, &m);
        }
    }
    Ok(track.finish())
}

fn source_matrix(gd: &SmoothGroupoid, g: &Point, policy: RankPolicy) -> Result<DMatrix<f64>> {
    covector_map(gd, g, policy, cotangent_source)
}

fn target_matrix(gd: &SmoothGroupoid, g: &Point, policy: RankPolicy) -> Result<DMatrix<f64>> {
    covector_map(gd, g, policy, cotangent_target)
}

fn covector_map(
    gd: &SmoothGroupoid,
    g: &Point,
    policy: RankPolicy,
    f: fn(&SmoothGroupoid, &CotangentArrow, RankPolicy) -> Result<DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let n = gd.dim_g();
    let cols = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            f(gd, &CotangentArrow { base: g.clone(), alpha: e }, policy)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// `(Ts, ŝ)` or `(Tt, t̂)` applied to a fiber basis at `g`.
fn project_fiber(gd: &SmoothGroupoid, fiber: &DMatrix<f64>, g: &Point, source: bool, policy: RankPolicy) -> Result<DMatrix<f64>> {
    let n = gd.dim_g();
    let (v, a) = (fiber.rows(0, n).into_owned(), fiber.rows(n, n).into_owned());
    let (tv, ca) = if source {
        (gd.ts(g) * v, source_matrix(gd, g, policy)? * a)
    } else {
        (gd.tt(g) * v, target_matrix(gd, g, policy)? * a)
    };
    Ok(linalg::vstack(&[&tv, &ca]))
}

/// `D_G` is a subgroupoid of `TG ×_G T*G`: images under `(Ts, ŝ)` and
/// `(Tt, t̂)` lie in those of the unit fibers, and products of composable
/// elements lie in `D_G(gh)`. `G₀` is then re-checked as a multiplicative
/// distribution.
pub fn check_multiplicative_dirac(
    gd: &SmoothGroupoid,
    d: &DiracStructure,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<CheckReport> {
    if d.dim() != gd.dim_g() {
        return Err(Error::Precondition("Dirac structure does not live on the arrows".into()));
    }
    let policy = num.rank_policy();
    let n = gd.dim_g();
    let mut track = Tracker::new("check_multiplicative_dirac", num.tol_member);
    let (mut base_max, mut prod_max) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let g = gd.sample_arrow(rng);
        let h = gd.sample_composable(rng, &g)?;
        let gh = gd.mul(&g, &h)?;
        let (fg, fh, fgh) = (d.fiber_basis(&g, policy)?, d.fiber_basis(&h, policy)?, d.fiber_basis(&gh, policy)?);

        let src_g = project_fiber(gd, &fg, &g, true, policy)?;
        let tgt_h = project_fiber(gd, &fh, &h, false, policy)?;
        let p = gd.source(&g);
        let e = gd.unit(&p);
        let unit_src = linalg::orth(&project_fiber(gd, &d.fiber_basis(&e, policy)?, &e, true, policy)?, policy);
        let unit_tgt = linalg::orth(&project_fiber(gd, &d.fiber_basis(&e, policy)?, &e, false, policy)?, policy);
        let r = linalg::max_distance_to_span(&unit_src, &src_g).max(linalg::max_distance_to_span(&unit_tgt, &tgt_h));
        base_max = base_max.max(r);
        track.record(r, &concat(&g, &h));

        let pairs = linalg::null_space(&linalg::hstack(&[&src_g, &(-&tgt_h)]), policy);
        for j in 0..pairs.ncols() {
            let c = pairs.column(j);
            let a = &fg * c.rows(0, n);
            let b = &fh * c.rows(n, n);
            let v = gd.mul_jacobian(&g, &h) * concat(&a.rows(0, n).into_owned(), &b.rows(0, n).into_owned());
            let alpha = cotangent_mul(
                gd,
                &CotangentArrow { base: g.clone(), alpha: a.rows(n, n).into_owned() },
                &CotangentArrow { base: h.clone(), alpha: b.rows(n, n).into_owned() },
                policy,
            )?;
            let r = linalg::distance_to_span(&fgh, &concat(&v, &alpha.alpha)) / c.norm().max(1.0);
            prod_max = prod_max.max(r);
            track.record(r, &concat(&g, &h));
        }
    }
    let at = gd.sample_arrow(rng);
    let g0 = characteristic_distribution(d, &at, policy)?;
    let g0_report = check_multiplicative(gd, &g0, samples.clamp(1, 20), num, rng)?;
    track.record(g0_report.max_residual, &at);
    Ok(track.finish().with_detail(serde_json::json!({
        "samples": samples,
        "base_residual": base_max,
        "product_residual": prod_max,
        "g0_rank": g0.rank(),
        "g0_multiplicative": g0_report.pass,
    })))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushforwardSummary {
    pub quotient_dim: usize,
    pub lagrangian_max_residual: f64,
    pub characteristic_rank_max: usize,
    pub representative_residual: f64,
    pub antisymmetry_residual: f64,
    pub jacobi_residual: f64,
    pub forward_residual: f64,
    pub poisson_matrix_at_samples: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Pushforward {
    pub report: CheckReport,
    pub summary: PushforwardSummary,
    pub poisson: Option<PoissonBivector>,
    pub dirac: Option<DiracStructure>,
}

/// `pr(D_G)(λ(g)) = {(Tλ v, α) : (v, Tλᵀ α) ∈ D_G(g)}` in label coordinates.
pub fn pushforward_fiber(d: &DiracStructure, j: &DMatrix<f64>, g: &Point, policy: RankPolicy) -> Result<DMatrix<f64>> {
    let n = d.dim();
    let k = j.nrows();
    let f = d.fiber_basis(g, policy)?;
    let (v, a) = (f.rows(0, n).into_owned(), f.rows(n, n).into_owned());
    let sol = linalg::null_space(&linalg::hstack(&[&a, &(-j.transpose())]), policy);
    let tangent = j * v * sol.rows(0, n);
    let cotangent = sol.rows(n, k).into_owned();
    Ok(linalg::orth(&linalg::vstack(&[&tangent, &cotangent]), policy))
}

fn poisson_from_fiber(f: &DMatrix<f64>, k: usize, policy: RankPolicy) -> Option<DMatrix<f64>> {
    if f.ncols() != k {
        return None;
    }
    let (v, a) = (f.rows(0, k).into_owned(), f.rows(k, k).into_owned());
    if linalg::rank(&a, policy) < k {
        return None;
    }
    let inv = a.try_inverse()?;
    Some((v * inv).transpose())
}

/// Pushforward of a multiplicative Dirac structure along the leaf map
/// `λ_G` of `G₀`, extracted as a Poisson bivector on the label chart.
/// The bivector is evaluated at the chart's section; independence of the
/// representative is sampled by flowing along `G₀`.
pub fn pushforward_dirac(
    d: &DiracStructure,
    chart: &LeafChart,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<Pushforward> {
    let policy = num.rank_policy();
    let lambda = chart.lambda_g.clone();
    let k = lambda.codomain().dim();
    if lambda.domain().dim() != d.dim() {
        return Err(Error::Precondition("leaf chart does not live on the Dirac base".into()));
    }
    let at = d.sample_point(rng);
    let g0 = characteristic_distribution(d, &at, policy)?;
    let mut track = Tracker::new("pushforward_dirac", num.tol_dirac);
    let mut summary = PushforwardSummary {
        quotient_dim: k,
        lagrangian_max_residual: 0.0,
        characteristic_rank_max: 0,
        representative_residual: 0.0,
        antisymmetry_residual: 0.0,
        jacobi_residual: 0.0,
        forward_residual: 0.0,
        poisson_matrix_at_samples: Vec::new(),
    };
    let mut extractable = true;
    for i in 0..samples {
        let g = d.sample_point(rng);
        let f = pushforward_fiber(d, &lambda.jacobian(&g), &g, policy)?;
        let iso = {
            let (v, a) = (f.rows(0, k), f.rows(k, f.nrows() - k));
            linalg::max_abs(&(a.transpose() * v + v.transpose() * a))
        };
        summary.lagrangian_max_residual = summary.lagrangian_max_residual.max(iso);
        track.record(if f.ncols() == k { iso } else { f64::INFINITY }, &g);
        let cotangent = f.rows(k, k).into_owned();
        let g0_down = k.saturating_sub(linalg::rank(&cotangent, policy));
        summary.characteristic_rank_max = summary.characteristic_rank_max.max(g0_down);
        match poisson_from_fiber(&f, k, policy) {
            Some(pi) => {
                if i < 3 {
                    summary.poisson_matrix_at_samples.push(pi.row_iter().map(|r| r.iter().cloned().collect()).collect());
                }
                let moved = g0
                    .gens()
                    .iter()
                    .take(2)
                    .try_fold(g.clone(), |x, field| flow(field, d.base(), &x, 0.5, num.steps_for(0.5)))?;
                let f2 = pushforward_fiber(d, &lambda.jacobian(&moved), &moved, policy)?;
                let r = match poisson_from_fiber(&f2, k, policy) {
                    Some(pi2) => linalg::max_abs(&(pi2 - &pi)),
                    None => f64::INFINITY,
                };
                summary.representative_residual = summary.representative_residual.max(r);
                track.record(r, &g);
            }
            None => {
                extractable = false;
                track.fail_at(g.as_slice());
            }
        }
    }
    if !extractable {
        let report = track.finish().with_detail(serde_json::to_value(&summary)?);
        return Ok(Pushforward { report, summary, poisson: None, dirac: None });
    }
    let (d2, section, lam) = (d.clone(), chart.section_g.clone(), lambda.clone());
    let poisson = PoissonBivector::new(ChartManifold::euclidean(k), move |y| {
        let g = section.eval(y);
        pushforward_fiber(&d2, &lam.jacobian(&g), &g, policy)
            .ok()
            .and_then(|f| poisson_from_fiber(&f, k, policy))
            .unwrap_or_else(|| DMatrix::from_element(k, k, f64::NAN))
    });
    for _ in 0..samples {
        let y = lambda.eval(&d.sample_point(rng));
        let anti = poisson.antisymmetry_residual(&y);
        let jac = poisson.jacobi_residual(&y, num.h_fd);
        summary.antisymmetry_residual = summary.antisymmetry_residual.max(anti);
        summary.jacobi_residual = summary.jacobi_residual.max(jac);
        track.record(anti, &y);
        track.record(jac, &y);
    }
    let quotient = from_poisson(&poisson);
    let forward = is_forward_dirac(&lambda, d, &quotient, samples, num, rng)?;
    summary.forward_residual = forward.max_residual;
    track.record(forward.max_residual, &at);
    let report = track.finish().with_detail(serde_json::to_value(&summary)?);
    Ok(Pushforward { report, summary, poisson: Some(poisson), dirac: Some(quotient) })
}

/// `dx ∧ dy` on the first two coordinates of `ℝⁿ`, scaled by `c`.
pub fn area_form(n: usize, c: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    w[(0, 1)] = c;
    w[(1, 0)] = -c;
    w
}
