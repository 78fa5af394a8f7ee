//! Lie groupoids on single-chart manifolds: structure maps, the tangent
//! prolongation, the cotangent groupoid and the algebroid fibers.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geomcore::{ChartManifold, Point, SmoothMap};
use crate::linalg::{self, RankPolicy};
use crate::report::{CheckReport, Tracker};
use crate::rng::{self, Rng};

type ArrowSampler = Arc<dyn Fn(&mut Rng) -> Point + Send + Sync>;
type TargetedSampler = Arc<dyn Fn(&mut Rng, &Point) -> Point + Send + Sync>;

/// The five structure maps. `mul` takes the concatenation `(g, h)`.
#[derive(Debug, Clone)]
pub struct StructureMaps {
    pub s: SmoothMap,
    pub t: SmoothMap,
    pub eps: SmoothMap,
    pub inv: SmoothMap,
    pub mul: SmoothMap,
}

#[derive(Clone)]
pub struct SmoothGroupoid {
    g: ChartManifold,
    p: ChartManifold,
    maps: StructureMaps,
    pub tol_comp: f64,
    pub tol_tangent: f64,
    pub tol_cot: f64,
    arrow_sampler: ArrowSampler,
    with_target: TargetedSampler,
}

impl fmt::Debug for SmoothGroupoid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothGroupoid").field("dim_g", &self.dim_g()).field("dim_p", &self.dim_p()).finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentArrow {
    pub base: Point,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CotangentArrow {
    pub base: Point,
    pub alpha: DVector<f64>,
}

/// `A_pG = ker T_{ε(p)} t`, as orthonormal columns in `T_{ε(p)}G`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebroidFiber {
    pub p: Point,
    pub basis: DMatrix<f64>,
}

pub(crate) fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

impl SmoothGroupoid {
    /// `arrow_sampler` draws arrows; `with_target(rng, p)` draws an arrow
    /// with target `p`.
    pub fn new<A, T>(g: ChartManifold, p: ChartManifold, maps: StructureMaps, arrow_sampler: A, with_target: T) -> Result<Self>
    where
        A: Fn(&mut Rng) -> Point + Send + Sync + 'static,
        T: Fn(&mut Rng, &Point) -> Point + Send + Sync + 'static,
    {
        let (ng, np) = (g.dim(), p.dim());
        let dims = [
            ("s", &maps.s, ng, np),
            ("t", &maps.t, ng, np),
            ("eps", &maps.eps, np, ng),
            ("inv", &maps.inv, ng, ng),
            ("mul", &maps.mul, 2 * ng, ng),
        ];
        for (name, m, din, dout) in dims {
            if m.domain().dim() != din || m.codomain().dim() != dout {
                return Err(Error::Precondition(format!(
                    "{name} has shape {} -> {}, expected {din} -> {dout}",
                    m.domain().dim(),
                    m.codomain().dim()
                )));
            }
        }
        if np > ng {
            return Err(Error::Precondition("base has larger dimension than the arrows".into()));
        }
        Ok(SmoothGroupoid {
            g,
            p,
            maps,
            tol_comp: 1e-9,
            tol_tangent: 1e-7,
            tol_cot: 1e-7,
            arrow_sampler: Arc::new(arrow_sampler),
            with_target: Arc::new(with_target),
        })
    }

    /// Same groupoid with a replaced multiplication (used for fault injection).
    pub fn with_mul(mut self, mul: SmoothMap) -> Self {
        self.maps.mul = mul;
        self
    }

    pub fn arrows_manifold(&self) -> &ChartManifold {
        &self.g
    }

    pub fn objects_manifold(&self) -> &ChartManifold {
        &self.p
    }

    pub fn dim_g(&self) -> usize {
        self.g.dim()
    }

    pub fn dim_p(&self) -> usize {
        self.p.dim()
    }

    pub fn maps(&self) -> &StructureMaps {
        &self.maps
    }

    pub fn source(&self, g: &Point) -> Point {
        self.maps.s.eval(g)
    }

    pub fn target(&self, g: &Point) -> Point {
        self.maps.t.eval(g)
    }

    pub fn unit(&self, p: &Point) -> Point {
        self.maps.eps.eval(p)
    }

    pub fn inverse(&self, g: &Point) -> Point {
        self.maps.inv.eval(g)
    }

    pub fn ts(&self, g: &Point) -> DMatrix<f64> {
        self.maps.s.jacobian(g)
    }

    pub fn tt(&self, g: &Point) -> DMatrix<f64> {
        self.maps.t.jacobian(g)
    }

    pub fn teps(&self, p: &Point) -> DMatrix<f64> {
        self.maps.eps.jacobian(p)
    }

    pub fn tinv(&self, g: &Point) -> DMatrix<f64> {
        self.maps.inv.jacobian(g)
    }

    pub fn composability_gap(&self, g: &Point, h: &Point) -> f64 {
        (self.source(g) - self.target(h)).norm()
    }

    /// `g ⋆ h`, refusing pairs with `|s(g) − t(h)| > tol_comp`.
    pub fn mul(&self, g: &Point, h: &Point) -> Result<Point> {
        let gap = self.composability_gap(g, h);
        if gap > self.tol_comp {
            return Err(Error::NotComposable(gap));
        }
        Ok(self.maps.mul.eval(&concat(g, h)))
    }

    /// Jacobian of `mul` at `(g, h)`, shape `n_G × 2n_G`.
    pub fn mul_jacobian(&self, g: &Point, h: &Point) -> DMatrix<f64> {
        self.maps.mul.jacobian(&concat(g, h))
    }

    pub fn sample_arrow(&self, rng: &mut Rng) -> Point {
        (self.arrow_sampler)(rng)
    }

    pub fn sample_object(&self, rng: &mut Rng) -> Point {
        let g = self.sample_arrow(rng);
        self.target(&g)
    }

    pub fn sample_with_target(&self, rng: &mut Rng, p: &Point) -> Point {
        (self.with_target)(rng, p)
    }

    /// An arrow `h` composable with `g`; a sampler error when the scenario's
    /// generator misses `t(h) = s(g)` by more than `tol_comp`.
    pub fn sample_composable(&self, rng: &mut Rng, g: &Point) -> Result<Point> {
        let h = self.sample_with_target(rng, &self.source(g));
        let gap = self.composability_gap(g, &h);
        if gap > self.tol_comp {
            return Err(Error::Sampler(format!("composable sampler missed by {gap:e}")));
        }
        Ok(h)
    }

    /// A tangent vector at `h` composable with `v_g` at `g`: minimum-norm
    /// solution of `Tt w = Ts v_g` plus a random `t`-vertical part.
    pub fn sample_composable_tangent(&self, rng: &mut Rng, g: &Point, vg: &DVector<f64>, h: &Point) -> DVector<f64> {
        let policy = RankPolicy::default();
        let tt = self.tt(h);
        let base = linalg::solve_min_norm(&tt, &(self.ts(g) * vg), policy);
        let k = linalg::null_space(&tt, policy);
        base + &k * rng::cube(rng, k.ncols(), 1.0)
    }
}

/// Residuals of axioms (i)–(v) on sampled arrows and composable triples,
/// plus the submersion rank of `s` and `t`.
pub fn validate_smooth_groupoid(gd: &SmoothGroupoid, samples: usize, tol_axiom: f64, rng: &mut Rng) -> Result<Vec<CheckReport>> {
    let mut ax = [
        Tracker::new("axiom_i", tol_axiom),
        Tracker::new("axiom_ii", tol_axiom),
        Tracker::new("axiom_iii", tol_axiom),
        Tracker::new("axiom_iv", tol_axiom),
        Tracker::new("axiom_v", tol_axiom),
    ];
    let mut sub_s = Tracker::new("submersion_s", 0.0);
    let mut sub_t = Tracker::new("submersion_t", 0.0);
    let policy = RankPolicy::default();
    let raw_mul = |a: &Point, b: &Point| gd.maps.mul.eval(&concat(a, b));
    for _ in 0..samples {
        let g = gd.sample_arrow(rng);
        let h = gd.sample_composable(rng, &g)?;
        let l = gd.sample_composable(rng, &h)?;
        let gh = raw_mul(&g, &h);
        let at = concat(&g, &h);
        let r1 = (gd.source(&gh) - gd.source(&h)).norm().max((gd.target(&gh) - gd.target(&g)).norm());
        ax[0].record(r1, &at);
        let r2 = (raw_mul(&gh, &l) - raw_mul(&g, &raw_mul(&h, &l))).norm();
        ax[1].record(r2, &concat(&at, &l));
        let p = gd.source(&g);
        let e = gd.unit(&p);
        ax[2].record((gd.source(&e) - &p).norm().max((gd.target(&e) - &p).norm()), &p);
        let right = (raw_mul(&g, &gd.unit(&gd.source(&g))) - &g).norm();
        let left = (raw_mul(&gd.unit(&gd.target(&g)), &g) - &g).norm();
        ax[3].record(right.max(left), &g);
        let gi = gd.inverse(&g);
        let r5 = [
            (gd.source(&gi) - gd.target(&g)).norm(),
            (gd.target(&gi) - gd.source(&g)).norm(),
            (raw_mul(&g, &gi) - gd.unit(&gd.target(&g))).norm(),
            (raw_mul(&gi, &g) - gd.unit(&gd.source(&g))).norm(),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        ax[4].record(r5, &g);
        let rs = linalg::rank(&gd.ts(&g), policy);
        let rt = linalg::rank(&gd.tt(&g), policy);
        sub_s.record_slice((gd.dim_p() - rs) as f64, g.as_slice());
        sub_t.record_slice((gd.dim_p() - rt) as f64, g.as_slice());
    }
    let mut out: Vec<CheckReport> = ax.into_iter().map(Tracker::finish).collect();
    out.push(sub_s.finish());
    out.push(sub_t.finish());
    Ok(out)
}

/// `(g, v_g) ⋆ (h, v_h) = (gh, Tm(v_g, v_h))`.
pub fn tangent_mul(gd: &SmoothGroupoid, a: &TangentArrow, b: &TangentArrow) -> Result<TangentArrow> {
    let base = gd.mul(&a.base, &b.base)?;
    let gap = (gd.ts(&a.base) * &a.v - gd.tt(&b.base) * &b.v).norm();
    if gap > gd.tol_tangent {
        return Err(Error::TangentNotComposable(gap));
    }
    let v = gd.mul_jacobian(&a.base, &b.base) * concat(&a.v, &b.v);
    Ok(TangentArrow { base, v })
}

/// `T L_g u` for `u` tangent to the `t`-fiber at `h`, `t(h) = s(g)`.
pub fn left_translation_tangent(gd: &SmoothGroupoid, g: &Point, h: &Point, u: &DVector<f64>) -> Result<TangentArrow> {
    let vertical = (gd.tt(h) * u).norm();
    if vertical > RankPolicy::default().rel.max(gd.tol_tangent) {
        return Err(Error::Precondition(format!("vector is not tangent to the t-fiber (|Tt u| = {vertical:e})")));
    }
    tangent_mul(
        gd,
        &TangentArrow { base: g.clone(), v: DVector::zeros(gd.dim_g()) },
        &TangentArrow { base: h.clone(), v: u.clone() },
    )
}

/// `T R_g u` for `u` tangent to the `s`-fiber at `h`, `s(h) = t(g)`.
pub fn right_translation_tangent(gd: &SmoothGroupoid, g: &Point, h: &Point, u: &DVector<f64>) -> Result<TangentArrow> {
    let vertical = (gd.ts(h) * u).norm();
    if vertical > RankPolicy::default().rel.max(gd.tol_tangent) {
        return Err(Error::Precondition(format!("vector is not tangent to the s-fiber (|Ts u| = {vertical:e})")));
    }
    tangent_mul(
        gd,
        &TangentArrow { base: h.clone(), v: u.clone() },
        &TangentArrow { base: g.clone(), v: DVector::zeros(gd.dim_g()) },
    )
}

pub fn algebroid_fiber(gd: &SmoothGroupoid, p: &Point, policy: RankPolicy) -> Result<AlgebroidFiber> {
    let e = gd.unit(p);
    let basis = linalg::null_space(&gd.tt(&e), policy);
    let needed = gd.dim_g() - gd.dim_p();
    if basis.ncols() != needed {
        return Err(Error::SpanDeficiency { rank: basis.ncols(), needed });
    }
    Ok(AlgebroidFiber { p: p.clone(), basis })
}

/// Anchor `Ts` applied to each basis column.
pub fn algebroid_anchor(gd: &SmoothGroupoid, fiber: &AlgebroidFiber) -> DMatrix<f64> {
    gd.ts(&gd.unit(&fiber.p)) * &fiber.basis
}

/// `ŝ(α_g)(u) = α_g(T L_g u)`, in the basis of `A_{s(g)}G`.
pub fn cotangent_source(gd: &SmoothGroupoid, a: &CotangentArrow, policy: RankPolicy) -> Result<DVector<f64>> {
    let g = &a.base;
    let fiber = algebroid_fiber(gd, &gd.source(g), policy)?;
    let e = gd.unit(&fiber.p);
    let jm = gd.mul_jacobian(g, &e);
    let right_block = jm.columns(gd.dim_g(), gd.dim_g()).into_owned();
    Ok((right_block * &fiber.basis).transpose() * &a.alpha)
}

/// `t̂(α_g)(u) = α_g(T R_g(u − Tε Ts u))`, in the basis of `A_{t(g)}G`.
pub fn cotangent_target(gd: &SmoothGroupoid, a: &CotangentArrow, policy: RankPolicy) -> Result<DVector<f64>> {
    let g = &a.base;
    let fiber = algebroid_fiber(gd, &gd.target(g), policy)?;
    let e = gd.unit(&fiber.p);
    let n = gd.dim_g();
    let projected = &fiber.basis - gd.teps(&fiber.p) * gd.ts(&e) * &fiber.basis;
    let jm = gd.mul_jacobian(&e, g);
    let left_block = jm.columns(0, n).into_owned();
    Ok((left_block * projected).transpose() * &a.alpha)
}

/// The covector at `gh` with `(α_g ⋆ α_h)(v_g ⋆ v_h) = α_g(v_g) + α_h(v_h)`,
/// solved by least squares over a basis of composable tangent pairs.
pub fn cotangent_mul(gd: &SmoothGroupoid, a: &CotangentArrow, b: &CotangentArrow, policy: RankPolicy) -> Result<CotangentArrow> {
    let base = gd.mul(&a.base, &b.base)?;
    let gap = (cotangent_source(gd, a, policy)? - cotangent_target(gd, b, policy)?).norm();
    if gap > gd.tol_cot {
        return Err(Error::CovectorNotComposable(gap));
    }
    let n = gd.dim_g();
    let constraint = linalg::hstack(&[&gd.ts(&a.base), &(-gd.tt(&b.base))]);
    let pairs = linalg::null_space(&constraint, policy);
    let images = gd.mul_jacobian(&a.base, &b.base) * &pairs;
    let rank = linalg::rank(&images, policy);
    if rank < n {
        return Err(Error::SpanDeficiency { rank, needed: n });
    }
    let both = concat(&a.alpha, &b.alpha);
    let rhs = pairs.transpose() * both;
    let (alpha, _) = linalg::lstsq(&images.transpose(), &rhs, policy);
    Ok(CotangentArrow { base, alpha })
}

/// Minimum-norm covector at `g` with `ŝ(α) = value`.
pub fn covector_with_source(gd: &SmoothGroupoid, g: &Point, value: &DVector<f64>, policy: RankPolicy) -> Result<DVector<f64>> {
    let fiber = algebroid_fiber(gd, &gd.source(g), policy)?;
    let e = gd.unit(&fiber.p);
    let n = gd.dim_g();
    let m = gd.mul_jacobian(g, &e).columns(n, n) * &fiber.basis;
    Ok(linalg::solve_min_norm(&m.transpose(), value, policy))
}

/// Pair groupoid `ℝⁿ × ℝⁿ ⇉ ℝⁿ`; arrow `(m, n)` has target `m`, source `n`.
pub fn pair_groupoid(n: usize) -> SmoothGroupoid {
    let g = ChartManifold::euclidean(2 * n);
    let p = ChartManifold::euclidean(n);
    let mut ts = DMatrix::zeros(n, 2 * n);
    let mut tt = DMatrix::zeros(n, 2 * n);
    let mut mul = DMatrix::zeros(2 * n, 4 * n);
    let mut inv = DMatrix::zeros(2 * n, 2 * n);
    let mut eps = DMatrix::zeros(2 * n, n);
    for i in 0..n {
        tt[(i, i)] = 1.0;
        ts[(i, n + i)] = 1.0;
        mul[(i, i)] = 1.0;
        mul[(n + i, 3 * n + i)] = 1.0;
        inv[(i, n + i)] = 1.0;
        inv[(n + i, i)] = 1.0;
        eps[(i, i)] = 1.0;
        eps[(n + i, i)] = 1.0;
    }
    let gg = g.product(&g);
    let maps = StructureMaps {
        s: SmoothMap::linear(g.clone(), p.clone(), ts),
        t: SmoothMap::linear(g.clone(), p.clone(), tt),
        eps: SmoothMap::linear(p.clone(), g.clone(), eps),
        inv: SmoothMap::linear(g.clone(), g.clone(), inv),
        mul: SmoothMap::linear(gg, g.clone(), mul),
    };
    SmoothGroupoid::new(
        g,
        p,
        maps,
        move |rng| rng::cube(rng, 2 * n, 2.0),
        move |rng, target| concat(target, &rng::cube(rng, n, 2.0)),
    )
    .expect("pair groupoid shapes agree")
}

/// Trivial vector-bundle groupoid `ℝᵏ × ℝᵐ ⇉ ℝᵐ`, fiberwise addition;
/// coordinates `(x, m)`.
pub fn vector_bundle_groupoid(k: usize, m: usize) -> SmoothGroupoid {
    let n = k + m;
    let g = ChartManifold::euclidean(n);
    let p = ChartManifold::euclidean(m);
    let mut proj = DMatrix::zeros(m, n);
    let mut eps = DMatrix::zeros(n, m);
    let mut inv = DMatrix::identity(n, n);
    let mut mul = DMatrix::zeros(n, 2 * n);
    for i in 0..m {
        proj[(i, k + i)] = 1.0;
        eps[(k + i, i)] = 1.0;
        mul[(k + i, k + i)] = 1.0;
    }
    for i in 0..k {
        inv[(i, i)] = -1.0;
        mul[(i, i)] = 1.0;
        mul[(i, n + i)] = 1.0;
    }
    let maps = StructureMaps {
        s: SmoothMap::linear(g.clone(), p.clone(), proj.clone()),
        t: SmoothMap::linear(g.clone(), p.clone(), proj),
        eps: SmoothMap::linear(p.clone(), g.clone(), eps),
        inv: SmoothMap::linear(g.clone(), g.clone(), inv),
        mul: SmoothMap::linear(g.product(&g), g.clone(), mul),
    };
    SmoothGroupoid::new(g, p, maps, move |rng| rng::cube(rng, n, 2.0), move |rng, target| concat(&rng::cube(rng, k, 2.0), target))
        .expect("vector bundle groupoid shapes agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::all_pass;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn pol() -> RankPolicy {
        RankPolicy::default()
    }

    #[test]
    fn builtin_groupoids_validate() {
        let mut r = rng::seeded(1);
        for gd in [pair_groupoid(2), vector_bundle_groupoid(2, 2)] {
            let reports = validate_smooth_groupoid(&gd, 100, 1e-9, &mut r).unwrap();
            assert!(all_pass(&reports), "{reports:?}");
        }
    }

    #[test]
    fn perturbed_mul_is_witnessed() {
        let gd = pair_groupoid(2);
        let inner = gd.maps().mul.clone();
        let bumped = SmoothMap::new(inner.domain().clone(), inner.codomain().clone(), move |x| {
            let mut y = inner.eval(x);
            y[0] += 0.1;
            y
        });
        let gd = gd.with_mul(bumped);
        let reports = validate_smooth_groupoid(&gd, 10, 1e-9, &mut rng::seeded(2)).unwrap();
        let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
        assert!(failed.contains(&"axiom_ii") || failed.contains(&"axiom_iv"), "{failed:?}");
        assert!(reports.iter().find(|r| r.name == "axiom_iv").unwrap().witness.is_some());
    }

    #[test]
    fn broken_sampler_is_a_sampler_error() {
        let gd = pair_groupoid(1);
        let g = ChartManifold::euclidean(2);
        let bad = SmoothGroupoid::new(
            g,
            ChartManifold::euclidean(1),
            gd.maps().clone(),
            |r| rng::cube(r, 2, 1.0),
            |_, p| v(&[p[0] + 1.0, 0.0]),
        )
        .unwrap();
        let err = validate_smooth_groupoid(&bad, 3, 1e-9, &mut rng::seeded(0)).unwrap_err();
        assert!(matches!(err, Error::Sampler(_)));
    }

    #[test]
    fn pair_tangent_mul() {
        let gd = pair_groupoid(1);
        let a = TangentArrow { base: v(&[1.0, 2.0]), v: v(&[0.3, 0.5]) };
        let b = TangentArrow { base: v(&[2.0, 3.0]), v: v(&[0.5, 0.7]) };
        let c = tangent_mul(&gd, &a, &b).unwrap();
        assert_abs_diff_eq!(c.base, v(&[1.0, 3.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(c.v, v(&[0.3, 0.7]), epsilon = 1e-12);
        let z = tangent_mul(
            &gd,
            &TangentArrow { base: a.base.clone(), v: v(&[0.0, 0.0]) },
            &TangentArrow { base: b.base.clone(), v: v(&[0.0, 0.0]) },
        )
        .unwrap();
        assert_eq!(z.v, v(&[0.0, 0.0]));
    }

    #[test]
    fn tangent_composability_errors_are_distinct() {
        let gd = pair_groupoid(1);
        let a = TangentArrow { base: v(&[1.0, 2.0]), v: v(&[0.0, 1.0]) };
        let far = TangentArrow { base: v(&[5.0, 3.0]), v: v(&[1.0, 0.0]) };
        assert!(matches!(tangent_mul(&gd, &a, &far), Err(Error::NotComposable(_))));
        let skew = TangentArrow { base: v(&[2.0, 3.0]), v: v(&[0.0, 0.0]) };
        assert!(matches!(tangent_mul(&gd, &a, &skew), Err(Error::TangentNotComposable(_))));
    }

    #[test]
    fn vb_tangent_mul() {
        // coordinates (x1, x2, m1, m2); (x,v,v_m) ⋆ (y,w,v_m) = (x+y, v+w, v_m)
        let gd = vector_bundle_groupoid(2, 2);
        let vm = [0.4, -0.2];
        let a = TangentArrow { base: v(&[1.0, 2.0, 0.5, 0.5]), v: v(&[0.1, 0.2, vm[0], vm[1]]) };
        let b = TangentArrow { base: v(&[-3.0, 1.0, 0.5, 0.5]), v: v(&[0.3, -0.1, vm[0], vm[1]]) };
        let c = tangent_mul(&gd, &a, &b).unwrap();
        assert_abs_diff_eq!(c.base, v(&[-2.0, 3.0, 0.5, 0.5]), epsilon = 1e-12);
        assert_abs_diff_eq!(c.v, v(&[0.4, 0.1, vm[0], vm[1]]), epsilon = 1e-12);
    }

    #[test]
    fn left_translations() {
        let gd = pair_groupoid(1);
        let l = left_translation_tangent(&gd, &v(&[1.0, 2.0]), &v(&[2.0, 5.0]), &v(&[0.0, 0.7])).unwrap();
        assert_abs_diff_eq!(l.base, v(&[1.0, 5.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(l.v, v(&[0.0, 0.7]), epsilon = 1e-12);
        // unit: identity
        let l = left_translation_tangent(&gd, &v(&[2.0, 2.0]), &v(&[2.0, 5.0]), &v(&[0.0, 0.7])).unwrap();
        assert_abs_diff_eq!(l.v, v(&[0.0, 0.7]), epsilon = 1e-12);
        assert!(matches!(
            left_translation_tangent(&gd, &v(&[1.0, 2.0]), &v(&[2.0, 5.0]), &v(&[1.0, 0.0])),
            Err(Error::Precondition(_))
        ));
        let vb = vector_bundle_groupoid(2, 1);
        let l = left_translation_tangent(&vb, &v(&[1.0, 1.0, 3.0]), &v(&[0.5, 2.0, 3.0]), &v(&[0.2, 0.3, 0.0])).unwrap();
        assert_abs_diff_eq!(l.base, v(&[1.5, 3.0, 3.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(l.v, v(&[0.2, 0.3, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn right_translation_in_pair_groupoid() {
        let gd = pair_groupoid(1);
        // R_{(n,p)} on (w,0) at (m,n) gives (w,0) at (m,p)
        let r = right_translation_tangent(&gd, &v(&[2.0, 5.0]), &v(&[1.0, 2.0]), &v(&[0.4, 0.0])).unwrap();
        assert_abs_diff_eq!(r.base, v(&[1.0, 5.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(r.v, v(&[0.4, 0.0]), epsilon = 1e-12);
    }

    #[test]
    fn anchors() {
        let gd = pair_groupoid(1);
        let f = algebroid_fiber(&gd, &v(&[0.3]), pol()).unwrap();
        assert_eq!(f.basis.ncols(), 1);
        let sign = f.basis[(1, 0)].signum();
        assert_abs_diff_eq!(f.basis.column(0) * sign, v(&[0.0, 1.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(algebroid_anchor(&gd, &f)[(0, 0)] * sign, 1.0, epsilon = 1e-12);
        let vb = vector_bundle_groupoid(2, 2);
        let f = algebroid_fiber(&vb, &v(&[0.3, -1.0]), pol()).unwrap();
        assert_eq!(f.basis.ncols(), 2);
        assert!(algebroid_anchor(&vb, &f).norm() < 1e-12);
    }

    #[test]
    fn pair_cotangent_source_and_target() {
        let gd = pair_groupoid(1);
        let alpha = CotangentArrow { base: v(&[1.0, 2.0]), alpha: v(&[0.7, -1.3]) };
        let f = algebroid_fiber(&gd, &v(&[2.0]), pol()).unwrap();
        let sign = f.basis[(1, 0)].signum();
        // ŝ pairs (0, w) to b·w, t̂ pairs it to −a·w
        assert_abs_diff_eq!(cotangent_source(&gd, &alpha, pol()).unwrap()[0] * sign, -1.3, epsilon = 1e-12);
        assert_abs_diff_eq!(cotangent_target(&gd, &alpha, pol()).unwrap()[0] * sign, -0.7, epsilon = 1e-12);
        let zero = CotangentArrow { base: v(&[1.0, 2.0]), alpha: v(&[0.0, 0.0]) };
        assert_eq!(cotangent_source(&gd, &zero, pol()).unwrap().norm(), 0.0);
    }

    #[test]
    fn unit_covector_annihilating_base() {
        let gd = pair_groupoid(1);
        // at a unit, TP = span(1,1); α = (1,−1) annihilates it
        let alpha = CotangentArrow { base: v(&[0.5, 0.5]), alpha: v(&[1.0, -1.0]) };
        let s = cotangent_source(&gd, &alpha, pol()).unwrap();
        let t = cotangent_target(&gd, &alpha, pol()).unwrap();
        assert_abs_diff_eq!(s, t, epsilon = 1e-12);
    }

    #[test]
    fn pair_cotangent_mul() {
        let gd = pair_groupoid(1);
        let (a, b, c) = (0.4, -0.9, 1.7);
        let x = CotangentArrow { base: v(&[1.0, 2.0]), alpha: v(&[a, b]) };
        let y = CotangentArrow { base: v(&[2.0, 3.0]), alpha: v(&[-b, c]) };
        let z = cotangent_mul(&gd, &x, &y, pol()).unwrap();
        assert_abs_diff_eq!(z.base, v(&[1.0, 3.0]), epsilon = 1e-12);
        assert_abs_diff_eq!(z.alpha, v(&[a, c]), epsilon = 1e-10);
        let bad = CotangentArrow { base: v(&[2.0, 3.0]), alpha: v(&[b, c]) };
        assert!(matches!(cotangent_mul(&gd, &x, &bad, pol()), Err(Error::CovectorNotComposable(_))));
        let zx = CotangentArrow { base: x.base.clone(), alpha: v(&[0.0, 0.0]) };
        let zy = CotangentArrow { base: y.base.clone(), alpha: v(&[0.0, 0.0]) };
        assert!(cotangent_mul(&gd, &zx, &zy, pol()).unwrap().alpha.norm() < 1e-14);
    }

    #[test]
    fn cotangent_product_recovers_defining_identity() {
        let mut r = rng::seeded(11);
        for gd in [pair_groupoid(2), vector_bundle_groupoid(2, 1)] {
            for _ in 0..50 {
                let g = gd.sample_arrow(&mut r);
                let h = gd.sample_composable(&mut r, &g).unwrap();
                let bh = CotangentArrow { base: h.clone(), alpha: rng::cube(&mut r, gd.dim_g(), 1.0) };
                let th = cotangent_target(&gd, &bh, pol()).unwrap();
                let ag = covector_with_source(&gd, &g, &th, pol()).unwrap();
                let ag = CotangentArrow { base: g.clone(), alpha: ag };
                let prod = cotangent_mul(&gd, &ag, &bh, pol()).unwrap();
                let vg = rng::cube(&mut r, gd.dim_g(), 1.0);
                let vh = gd.sample_composable_tangent(&mut r, &g, &vg, &h);
                let vgh = tangent_mul(
                    &gd,
                    &TangentArrow { base: g.clone(), v: vg.clone() },
                    &TangentArrow { base: h.clone(), v: vh.clone() },
                )
                .unwrap();
                let lhs = prod.alpha.dot(&vgh.v);
                let rhs = ag.alpha.dot(&vg) + bh.alpha.dot(&vh);
                assert!((lhs - rhs).abs() < 1e-7, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn tangent_prolongation_is_associative_and_unital() {
        let mut r = rng::seeded(5);
        let gd = vector_bundle_groupoid(1, 2);
        for _ in 0..30 {
            let g = gd.sample_arrow(&mut r);
            let h = gd.sample_composable(&mut r, &g).unwrap();
            let l = gd.sample_composable(&mut r, &h).unwrap();
            let vg = rng::cube(&mut r, 3, 1.0);
            let vh = gd.sample_composable_tangent(&mut r, &g, &vg, &h);
            let vl = gd.sample_composable_tangent(&mut r, &h, &vh, &l);
            let (a, b, c) = (
                TangentArrow { base: g.clone(), v: vg.clone() },
                TangentArrow { base: h, v: vh },
                TangentArrow { base: l, v: vl },
            );
            let left = tangent_mul(&gd, &tangent_mul(&gd, &a, &b).unwrap(), &c).unwrap();
            let right = tangent_mul(&gd, &a, &tangent_mul(&gd, &b, &c).unwrap()).unwrap();
            assert!((left.v - right.v).norm() < 1e-6);
            let p = gd.source(&g);
            let unit = TangentArrow { base: gd.unit(&p), v: gd.teps(&p) * (gd.ts(&g) * &vg) };
            let back = tangent_mul(&gd, &a, &unit).unwrap();
            assert!((back.v - vg).norm() < 1e-6);
        }
    }

    #[test]
    fn left_translation_by_inverse_undoes() {
        let mut r = rng::seeded(9);
        let gd = pair_groupoid(2);
        for _ in 0..20 {
            let g = gd.sample_arrow(&mut r);
            let h = gd.sample_composable(&mut r, &g).unwrap();
            let k = linalg::null_space(&gd.tt(&h), pol());
            let u = &k * rng::cube(&mut r, k.ncols(), 1.0);
            let moved = left_translation_tangent(&gd, &g, &h, &u).unwrap();
            let back = left_translation_tangent(&gd, &gd.inverse(&g), &moved.base, &moved.v).unwrap();
            assert!((back.v - &u).norm() < 1e-6);
            assert!((back.base - &h).norm() < 1e-9);
        }
    }
}
