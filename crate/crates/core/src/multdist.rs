//! Distributions as spanning families of vector fields, and the structural
//! checks for multiplicative subbundles of a Lie groupoid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomcore::{flow, lie_bracket, ChartManifold, Point, VectorField};
use crate::liegroupoid::{concat, SmoothGroupoid};
use crate::linalg::{self, RankPolicy};
use crate::numerics::Numerics;
use crate::report::{CheckReport, Tracker};
use crate::rng::{self, Rng};

/// A constant-rank distribution spanned by `gens`.
#[derive(Debug, Clone)]
pub struct Distribution {
    dim: usize,
    gens: Vec<VectorField>,
    rank: usize,
    pub policy: RankPolicy,
}

impl Distribution {
    pub fn new(dim: usize, gens: Vec<VectorField>, rank: usize) -> Self {
        Distribution { dim, gens, rank, policy: RankPolicy::default() }
    }

    /// Rank read off the generators at `at`.
    pub fn inferred(dim: usize, gens: Vec<VectorField>, at: &Point) -> Self {
        let mut d = Distribution::new(dim, gens, 0);
        d.rank = linalg::rank(&d.generator_matrix(at), d.policy);
        d
    }

    pub fn zero(dim: usize) -> Self {
        Distribution::new(dim, Vec::new(), 0)
    }

    /// Spanned by the coordinate fields `∂_i` for `i` in `axes`.
    pub fn coordinate(dim: usize, axes: &[usize]) -> Self {
        let gens = axes.iter().map(|&i| VectorField::coordinate(dim, i)).collect();
        Distribution::new(dim, gens, axes.len())
    }

    /// Constant distribution spanned by the columns of `m`.
    pub fn constant(m: &DMatrix<f64>) -> Self {
        let gens = m.column_iter().map(|c| VectorField::constant(c.into_owned())).collect();
        let rank = linalg::rank(m, RankPolicy::default());
        Distribution::new(m.nrows(), gens, rank)
    }

    /// Smooth generators `x ↦ P(x) e_i` from a pointwise basis, where `P(x)`
    /// is the orthogonal projector onto the span of `basis(x)`. The projector
    /// is smooth whenever the rank is constant, unlike an SVD basis.
    pub fn projected<F>(dim: usize, rank: usize, basis: F) -> Self
    where
        F: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let basis = Arc::new(basis);
        let gens = (0..dim)
            .map(|i| {
                let b = Arc::clone(&basis);
                VectorField::new(dim, move |x| {
                    let q = linalg::orth(&b(x), RankPolicy::default());
                    q.clone() * q.row(i).transpose()
                })
            })
            .collect();
        Distribution::new(dim, gens, rank)
    }

    /// `A × B` on a product manifold.
    pub fn product(a: &Distribution, b: &Distribution) -> Self {
        let (na, nb) = (a.dim, b.dim);
        let mut gens = Vec::with_capacity(a.gens.len() + b.gens.len());
        for f in &a.gens {
            let f = f.clone();
            gens.push(VectorField::new(na + nb, move |x| concat(&f.eval(&x.rows(0, na).into_owned()), &DVector::zeros(nb))));
        }
        for f in &b.gens {
            let f = f.clone();
            gens.push(VectorField::new(na + nb, move |x| concat(&DVector::zeros(na), &f.eval(&x.rows(na, nb).into_owned()))));
        }
        Distribution::new(na + nb, gens, a.rank + b.rank)
    }

    pub fn with_policy(mut self, policy: RankPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn gens(&self) -> &[VectorField] {
        &self.gens
    }

    pub fn generator_matrix(&self, x: &Point) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.gens.iter().map(|g| g.eval(x)).collect();
        DMatrix::from_fn(self.dim, cols.len(), |r, c| cols[c][r])
    }
}

/// Orthonormal basis of `S(x)`; `RankDrift` when the rank is not the
/// declared one.
pub fn fiber_basis(s: &Distribution, x: &Point) -> Result<DMatrix<f64>> {
    if s.gens.is_empty() {
        if s.rank != 0 {
            return Err(Error::RankDrift { expected: s.rank, found: 0, at: x.iter().cloned().collect() });
        }
        return Ok(DMatrix::zeros(s.dim, 0));
    }
    let q = linalg::orth(&s.generator_matrix(x), s.policy);
    if q.ncols() != s.rank {
        return Err(Error::RankDrift { expected: s.rank, found: q.ncols(), at: x.iter().cloned().collect() });
    }
    Ok(q)
}

/// Checks that `S` is a set subgroupoid of `TG ⇉ TP`: `Ts`, `Tt` of `S`
/// land in `S ∩ TP`, products of composable `S`-vectors stay in `S`, and
/// `Ti` preserves `S`.
pub fn check_multiplicative(
    gd: &SmoothGroupoid,
    s: &Distribution,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<CheckReport> {
    let mut total = Tracker::new("check_multiplicative", num.tol_member);
    let (mut ra, mut rb, mut rc) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..samples {
        let g = gd.sample_arrow(rng);
        let h = gd.sample_composable(rng, &g)?;
        let bg = fiber_basis(s, &g)?;
        let bh = fiber_basis(s, &h)?;

        for (p, j) in [(gd.source(&g), gd.ts(&g)), (gd.target(&g), gd.tt(&g))] {
            let at_unit = fiber_basis(s, &gd.unit(&p))?;
            let pushed = gd.teps(&p) * (j * &bg);
            let r = linalg::max_distance_to_span(&at_unit, &pushed);
            ra = ra.max(r);
            total.record(r, &g);
        }

        let constraint = linalg::hstack(&[&(gd.ts(&g) * &bg), &(-(gd.tt(&h) * &bh))]);
        let pairs = linalg::null_space(&constraint, s.policy);
        let jm = gd.mul_jacobian(&g, &h);
        let gh = gd.mul(&g, &h)?;
        let bgh = fiber_basis(s, &gh)?;
        for _ in 0..2 {
            let c = pairs.clone() * rng::cube(rng, pairs.ncols(), 1.0);
            let vg = &bg * c.rows(0, bg.ncols());
            let vh = &bh * c.rows(bg.ncols(), bh.ncols());
            let prod = &jm * concat(&vg, &vh);
            let r = linalg::distance_to_span(&bgh, &prod);
            rb = rb.max(r);
            total.record(r, &concat(&g, &h));
        }

        let gi = gd.inverse(&g);
        let r = linalg::max_distance_to_span(&fiber_basis(s, &gi)?, &(gd.tinv(&g) * &bg));
        rc = rc.max(r);
        total.record(r, &g);
    }
    Ok(total.finish().with_detail(serde_json::json!({
        "source_target_residual": ra,
        "product_residual": rb,
        "inverse_residual": rc,
        "samples": samples,
    })))
}

/// Fiber ranks found by [`check_rank_structure`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankStructure {
    pub rank_s: usize,
    pub rank_s_cap_tp: usize,
    pub rank_s_cap_ag: usize,
    pub rank_s_t: usize,
    pub rank_s_s: usize,
}

/// Bases of `S ∩ TP` and `S ∩ AG` at the unit over `p`, inside `T_{ε(p)}G`.
pub fn unit_splitting(gd: &SmoothGroupoid, s: &Distribution, p: &Point) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let e = gd.unit(p);
    let bs = fiber_basis(s, &e)?;
    let tp = linalg::orth(&gd.teps(p), s.policy);
    let ag = linalg::null_space(&gd.tt(&e), s.policy);
    let cap_tp = linalg::intersect(&bs, &tp, s.policy);
    let cap_ag = linalg::intersect(&bs, &ag, s.policy);
    Ok((bs, cap_tp, cap_ag))
}

/// `Sᵗ(g) = S(g) ∩ ker T_g t`.
pub fn s_t(gd: &SmoothGroupoid, s: &Distribution, g: &Point) -> Result<DMatrix<f64>> {
    Ok(linalg::intersect_kernel(&fiber_basis(s, g)?, &gd.tt(g), s.policy))
}

/// `Sˢ(g) = S(g) ∩ ker T_g s`.
pub fn s_s(gd: &SmoothGroupoid, s: &Distribution, g: &Point) -> Result<DMatrix<f64>> {
    Ok(linalg::intersect_kernel(&fiber_basis(s, g)?, &gd.ts(g), s.policy))
}

/// `T L_g` applied to vectors at the unit `ε(s(g))`.
pub fn left_translate_at_unit(gd: &SmoothGroupoid, g: &Point, vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let e = gd.unit(&gd.source(g));
    let n = gd.dim_g();
    gd.mul_jacobian(g, &e).columns(n, n) * vectors
}

fn expect_constant(seen: &mut Option<usize>, found: usize, at: &Point) -> Result<()> {
    match *seen {
        None => {
            *seen = Some(found);
            Ok(())
        }
        Some(r) if r == found => Ok(()),
        Some(r) => Err(Error::RankDrift { expected: r, found, at: at.iter().cloned().collect() }),
    }
}

/// Constant ranks of `S ∩ TP`, `S ∩ AG`, `Sᵗ`, `Sˢ`; the splitting
/// `S|_P = (S ∩ TP) ⊕ (S ∩ AG)`; and `Sᵗ(g) = T L_g Sᵗ(s(g))` measured as
/// the sine of the largest principal angle.
pub fn check_rank_structure(
    gd: &SmoothGroupoid,
    s: &Distribution,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<(CheckReport, RankStructure)> {
    let mut track = Tracker::new("check_rank_structure", num.tol_member);
    let mut split_max = 0.0f64;
    let mut angle_max = 0.0f64;
    let (mut r_tp, mut r_ag, mut r_t, mut r_s) = (None, None, None, None);
    for _ in 0..samples {
        let p = gd.sample_object(rng);
        let (bs, cap_tp, cap_ag) = unit_splitting(gd, s, &p)?;
        expect_constant(&mut r_tp, cap_tp.ncols(), &p)?;
        expect_constant(&mut r_ag, cap_ag.ncols(), &p)?;
        if cap_tp.ncols() + cap_ag.ncols() != bs.ncols() {
            track.fail_at(p.as_slice());
        }
        let sum = linalg::hstack(&[&cap_tp, &cap_ag]);
        let r = linalg::max_distance_to_span(&linalg::orth(&sum, s.policy), &bs);
        split_max = split_max.max(r);
        track.record(r, &p);

        let g = gd.sample_arrow(rng);
        let st = s_t(gd, s, &g)?;
        expect_constant(&mut r_t, st.ncols(), &g)?;
        expect_constant(&mut r_s, s_s(gd, s, &g)?.ncols(), &g)?;
        let at_unit = s_t(gd, s, &gd.unit(&gd.source(&g)))?;
        let moved = linalg::orth(&left_translate_at_unit(gd, &g, &at_unit), s.policy);
        match linalg::max_principal_sine(&moved, &st) {
            Some(a) => {
                angle_max = angle_max.max(a);
                track.record(a, &g);
            }
            None => track.fail_at(g.as_slice()),
        }
    }
    let ranks = RankStructure {
        rank_s: s.rank(),
        rank_s_cap_tp: r_tp.unwrap_or(0),
        rank_s_cap_ag: r_ag.unwrap_or(0),
        rank_s_t: r_t.unwrap_or(0),
        rank_s_s: r_s.unwrap_or(0),
    };
    let report = track.finish().with_detail(serde_json::json!({
        "ranks": ranks,
        "splitting_residual": split_max,
        "translation_max_principal_sine": angle_max,
        "samples": samples,
    }));
    Ok((report, ranks))
}

/// `Ts` and `Tt` restricted to `S(g)` have the rank of `S ∩ TP` at the
/// source and target.
pub fn check_ts_surjectivity(gd: &SmoothGroupoid, s: &Distribution, samples: usize, rng: &mut Rng) -> Result<CheckReport> {
    let mut track = Tracker::new("check_ts_surjectivity", 0.0);
    for _ in 0..samples {
        let g = gd.sample_arrow(rng);
        let bg = fiber_basis(s, &g)?;
        for (p, j) in [(gd.source(&g), gd.ts(&g)), (gd.target(&g), gd.tt(&g))] {
            let (_, cap_tp, _) = unit_splitting(gd, s, &p)?;
            let image = linalg::rank(&(j * &bg), s.policy);
            track.record_slice(image.abs_diff(cap_tp.ncols()) as f64, g.as_slice());
        }
    }
    Ok(track.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftMode {
    Source,
    Target,
}

/// `X` on `G` with `Ts X = X̄∘s` (mode `Source`) or `Tt X = X̄∘t`.
#[derive(Debug, Clone)]
pub struct DescendingSection {
    pub x: VectorField,
    pub xbar: VectorField,
    pub mode: LiftMode,
    pub complete: bool,
}

/// Minimum-norm `v ∈ S(g)` with `T v = target`, `T` the source or target
/// Jacobian; returns the vector and the residual.
pub fn lift_vector(
    gd: &SmoothGroupoid,
    s: &Distribution,
    g: &Point,
    target: &DVector<f64>,
    mode: LiftMode,
) -> Result<(DVector<f64>, f64)> {
    let b = fiber_basis(s, g)?;
    let j = match mode {
        LiftMode::Source => gd.ts(g),
        LiftMode::Target => gd.tt(g),
    };
    let (c, residual) = linalg::lstsq(&(j * &b), target, s.policy);
    Ok((b * c, residual))
}

/// Min-norm lift of a base field with values in `S ∩ TP`, verified at
/// `samples` sampled arrows.
pub fn lift_section(
    gd: &SmoothGroupoid,
    s: &Distribution,
    xbar: &VectorField,
    mode: LiftMode,
    samples: usize,
    num: &Numerics,
    rng: &mut Rng,
) -> Result<DescendingSection> {
    for _ in 0..samples {
        let p = gd.sample_object(rng);
        let (_, cap_tp, _) = unit_splitting(gd, s, &p)?;
        let r = linalg::distance_to_span(&cap_tp, &(gd.teps(&p) * xbar.eval(&p)));
        if r > num.tol_member {
            return Err(Error::LiftFailed { residual: r, at: p.iter().cloned().collect() });
        }
        let g = gd.sample_arrow(rng);
        let base = match mode {
            LiftMode::Source => gd.source(&g),
            LiftMode::Target => gd.target(&g),
        };
        let (_, residual) = lift_vector(gd, s, &g, &xbar.eval(&base), mode)?;
        if residual > num.tol_lift {
            return Err(Error::LiftFailed { residual, at: g.iter().cloned().collect() });
        }
    }
    let (gd2, s2, xb) = (gd.clone(), s.clone(), xbar.clone());
    let x = VectorField::new(gd.dim_g(), move |g| {
        let base = match mode {
            LiftMode::Source => gd2.source(g),
            LiftMode::Target => gd2.target(g),
        };
        match lift_vector(&gd2, &s2, g, &xb.eval(&base), mode) {
            Ok((v, _)) => v,
            Err(_) => DVector::from_element(gd2.dim_g(), f64::NAN),
        }
    });
    Ok(DescendingSection { x, xbar: xbar.clone(), mode, complete: false })
}

/// Brackets of every generator pair stay in `S` at the given points.
pub fn check_involutive(s: &Distribution, points: &[Point], num: &Numerics) -> Result<CheckReport> {
    let mut track = Tracker::new("check_involutive", num.tol_member);
    for x in points {
        let b = fiber_basis(s, x)?;
        for i in 0..s.gens.len() {
            for j in (i + 1)..s.gens.len() {
                let br = lie_bracket(&s.gens[i], &s.gens[j], x, num.h_fd)?;
                track.record(linalg::distance_to_span(&b, &br), x);
            }
        }
    }
    Ok(track.finish())
}

/// `S ∩ TP` as a distribution on `P`, identified with `TP` through `Ts`.
pub fn base_intersection(gd: &SmoothGroupoid, s: &Distribution, rank: usize) -> Distribution {
    let (gd2, s2) = (gd.clone(), s.clone());
    Distribution::projected(gd.dim_p(), rank, move |p| match unit_splitting(&gd2, &s2, p) {
        Ok((_, cap_tp, _)) => gd2.ts(&gd2.unit(p)) * cap_tp,
        Err(_) => DMatrix::from_element(p.len(), 1, f64::NAN),
    })
}

/// Spot check of declared completeness: each field is integrated forward
/// and backward for `t_max` from each point without leaving its chart.
pub fn check_completeness(fields: &[(VectorField, ChartManifold)], points: &[Point], num: &Numerics) -> CheckReport {
    let mut track = Tracker::new("check_completeness", 0.0);
    let steps = num.steps_for(num.t_max);
    for (f, m) in fields {
        for x in points.iter().filter(|x| x.len() == f.dim()) {
            for t in [num.t_max, -num.t_max] {
                let ok = flow(f, m, x, t, steps).is_ok();
                track.record_slice(if ok { 0.0 } else { 1.0 }, x.as_slice());
            }
        }
    }
    track.finish()
}
