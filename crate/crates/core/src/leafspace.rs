//! Leaf spaces of multiplicative foliations: leaf labels from first
//! integrals, transport along leaves, the coset condition, the induced quotient
//! groupoid and the ideal-system checks on its algebroid.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geomcore::{flow, ChartManifold, Point, SmoothMap, VectorField};
use crate::liegroupoid::{
    concat, cotangent_mul, cotangent_source, cotangent_target, covector_with_source, CotangentArrow, SmoothGroupoid,
};
use crate::linalg;
use crate::multdist::{base_intersection, fiber_basis, lift_vector, s_t, unit_splitting, Distribution, LiftMode};
use crate::numerics::Numerics;
use crate::report::{CheckReport, Tracker};
use crate::rng::{self, Rng};

/// First integrals labelling the leaves of `S` on `G` and of `S ∩ TP` on
/// `P`, with sections mapping labels back to representatives.
#[derive(Debug, Clone)]
pub struct LeafChart {
    pub lambda_g: SmoothMap,
    pub lambda_p: SmoothMap,
    pub section_g: SmoothMap,
    pub section_p: SmoothMap,
}

type Waypoints = Arc<dyn Fn(&Point, &Point) -> Vec<Point> + Send + Sync>;

/// How a path inside a leaf of `S ∩ TP` is produced.
#[derive(Clone, Default)]
pub enum LeafPathOracle {
    /// The chord in the chart; valid when leaves are affine.
    #[default]
    Straight,
    /// Scenario-supplied waypoints, joined by chords.
    Waypoints(Waypoints),
}

impl fmt::Debug for LeafPathOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeafPathOracle::Straight => write!(f, "Straight"),
            LeafPathOracle::Waypoints(_) => write!(f, "Waypoints(..)"),
        }
    }
}

/// A point of `G/S`: its label is authoritative, the representative is any
/// arrow carrying that label.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientArrow {
    pub label: DVector<f64>,
    pub representative: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientSummary {
    pub object_label_dim: usize,
    pub arrow_label_dim: usize,
    pub sampled_axiom_residuals: BTreeMap<String, f64>,
    pub samples: usize,
}

/// A groupoid with a multiplicative foliation and a leaf chart.
#[derive(Debug, Clone)]
pub struct LeafSpace {
    pub gd: SmoothGroupoid,
    pub s: Distribution,
    pub chart: LeafChart,
    pub path: LeafPathOracle,
    pub num: Numerics,
    st: Distribution,
    base: Distribution,
}

fn max_norm(values: &[f64]) -> f64 {
    values.iter().cloned().fold(0.0, f64::max)
}

impl LeafSpace {
    pub fn new(gd: SmoothGroupoid, s: Distribution, chart: LeafChart, num: Numerics) -> Result<Self> {
        let n_label = chart.lambda_g.codomain().dim();
        if chart.lambda_g.domain().dim() != gd.dim_g()
            || chart.lambda_p.domain().dim() != gd.dim_p()
            || chart.section_g.domain().dim() != n_label
            || chart.section_p.domain().dim() != chart.lambda_p.codomain().dim()
        {
            return Err(Error::Precondition("leaf chart shapes do not match the groupoid".into()));
        }
        let p0 = chart.section_p.eval(&DVector::zeros(chart.lambda_p.codomain().dim()));
        let e0 = gd.unit(&p0);
        let rank_t = s_t(&gd, &s, &e0)?.ncols();
        let (_, cap_tp, _) = unit_splitting(&gd, &s, &p0)?;
        let (gd2, s2) = (gd.clone(), s.clone());
        let st = Distribution::projected(gd.dim_g(), rank_t, move |x| {
            s_t(&gd2, &s2, x).unwrap_or_else(|_| DMatrix::from_element(x.len(), 1, f64::NAN))
        });
        let base = base_intersection(&gd, &s, cap_tp.ncols());
        Ok(LeafSpace { gd, s, chart, path: LeafPathOracle::Straight, num, st, base })
    }

    pub fn with_path(mut self, path: LeafPathOracle) -> Self {
        self.path = path;
        self
    }

    /// Spanning fields of `Sᵗ = S ∩ ker Tt`.
    pub fn s_t_distribution(&self) -> &Distribution {
        &self.st
    }

    /// `S ∩ TP` as a distribution on `P`.
    pub fn base_distribution(&self) -> &Distribution {
        &self.base
    }

    pub fn label(&self, g: &Point) -> DVector<f64> {
        self.chart.lambda_g.eval(g)
    }

    pub fn base_label(&self, p: &Point) -> DVector<f64> {
        self.chart.lambda_p.eval(p)
    }

    pub fn arrow(&self, g: &Point) -> QuotientArrow {
        QuotientArrow { label: self.label(g), representative: g.clone() }
    }

    pub fn same_leaf(&self, x: &Point, y: &Point) -> bool {
        (self.label(x) - self.label(y)).norm() <= self.num.tol_leaf
    }

    pub fn same_base_leaf(&self, p: &Point, q: &Point) -> bool {
        (self.base_label(p) - self.base_label(q)).norm() <= self.num.tol_leaf
    }

    fn random_flows(&self, fields: &[VectorField], m: &ChartManifold, x: &Point, moves: usize, rng: &mut Rng) -> Result<Point> {
        let mut y = x.clone();
        if fields.is_empty() {
            return Ok(y);
        }
        let span = self.num.t_max.min(1.0);
        for _ in 0..moves {
            let i = (rng::uniform(rng, 0.0, fields.len() as f64) as usize).min(fields.len() - 1);
            let t = rng::uniform(rng, -span, span);
            y = flow(&fields[i], m, &y, t, self.num.steps_for(t))?;
        }
        Ok(y)
    }

    /// Composition of `moves` random flows of the generators of `S`.
    pub fn random_leaf_move(&self, g: &Point, moves: usize, rng: &mut Rng) -> Result<Point> {
        self.random_flows(self.s.gens(), self.gd.arrows_manifold(), g, moves, rng)
    }

    /// Same, with the generators of `Sᵗ`; stays in the `t`-fiber.
    pub fn random_t_fiber_move(&self, g: &Point, moves: usize, rng: &mut Rng) -> Result<Point> {
        self.random_flows(self.st.gens(), self.gd.arrows_manifold(), g, moves, rng)
    }

    /// Random point of the leaf of `S ∩ TP` through `p`.
    pub fn random_base_move(&self, p: &Point, moves: usize, rng: &mut Rng) -> Result<Point> {
        self.random_flows(self.base.gens(), self.gd.objects_manifold(), p, moves, rng)
    }

    /// `h ∼_S g` with `t(h) = p`: follows a path from `t(g)` to `p` inside
    /// its leaf and moves `g` along the minimum-norm `t`-lift of the path
    /// velocity.
    pub fn transport_to_target(&self, g: &Point, p: &Point) -> Result<Point> {
        let q0 = self.gd.target(g);
        let gap = (self.base_label(&q0) - self.base_label(p)).norm();
        if gap > self.num.tol_leaf {
            return Err(Error::NotSameLeaf(gap));
        }
        let waypoints = match &self.path {
            LeafPathOracle::Straight => vec![q0.clone(), p.clone()],
            LeafPathOracle::Waypoints(f) => f(&q0, p),
        };
        let mut h = g.clone();
        for pair in waypoints.windows(2) {
            let d = &pair[1] - &pair[0];
            let len = d.norm();
            if len == 0.0 {
                continue;
            }
            let (gd, s) = (self.gd.clone(), self.s.clone());
            let field = VectorField::new(self.gd.dim_g(), move |x| match lift_vector(&gd, &s, x, &d, LiftMode::Target) {
                Ok((v, _)) => v,
                Err(_) => DVector::from_element(x.len(), f64::NAN),
            });
            h = match flow(&field, self.gd.arrows_manifold(), &h, 1.0, self.num.steps_for(len.max(1.0))) {
                Ok(h) => h,
                Err(Error::NumericalBlowup(_)) => return Err(Error::TransportFailed { residual: f64::INFINITY }),
                Err(e) => return Err(e),
            };
        }
        let residual = (self.gd.target(&h) - p).norm().max((self.label(&h) - self.label(g)).norm());
        if residual > self.num.tol_leaf {
            return Err(Error::TransportFailed { residual });
        }
        Ok(h)
    }

    /// Samples both inclusions of
    /// `g ⋆ ([s(g)] ∩ t⁻¹(s(g))) = [g] ∩ t⁻¹(t(g))`. Points of the left
    /// side come from `Sᵗ`-flows of the unit and from `S`-flows followed by
    /// transport back to the fiber; points of the right side likewise from `g`.
    pub fn check_condition6(&self, samples: usize, rng: &mut Rng) -> Result<CheckReport> {
        let gd = &self.gd;
        let mut track = Tracker::new("check_condition6", self.num.tol_leaf);
        let (mut sub, mut sup) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let g = gd.sample_arrow(rng);
            let (p, q) = (gd.source(&g), gd.target(&g));
            let e = gd.unit(&p);
            let lg = self.label(&g);
            let le = self.label(&e);

            let n1 = self.random_t_fiber_move(&e, 2, rng)?;
            let moved = self.random_leaf_move(&e, 2, rng)?;
            let n2 = self.transport_to_target(&moved, &p)?;
            for n in [n1, n2] {
                let gn = gd.mul(&g, &n)?;
                let r = max_norm(&[
                    (gd.target(&n) - &p).norm(),
                    (self.label(&n) - &le).norm(),
                    (gd.target(&gn) - &q).norm(),
                    (self.label(&gn) - &lg).norm(),
                ]);
                sub = sub.max(r);
                track.record(r, &concat(&g, &n));
            }

            let g1 = self.random_t_fiber_move(&g, 2, rng)?;
            let moved = self.random_leaf_move(&g, 2, rng)?;
            let g2 = self.transport_to_target(&moved, &q)?;
            let gi = gd.inverse(&g);
            for h in [g1, g2] {
                let k = gd.mul(&gi, &h)?;
                let r = max_norm(&[
                    (gd.target(&h) - &q).norm(),
                    (self.label(&h) - &lg).norm(),
                    (gd.target(&k) - &p).norm(),
                    (self.label(&k) - &le).norm(),
                ]);
                sup = sup.max(r);
                track.record(r, &concat(&g, &h));
            }
        }
        let report = track.finish();
        if !report.pass {
            return Err(Error::Condition6Violated {
                residual: report.max_residual,
                witness: report.witness.clone().unwrap_or_default(),
            });
        }
        Ok(report.with_detail(serde_json::json!({
            "samples": samples,
            "subset_residual": sub,
            "superset_residual": sup,
        })))
    }

    pub fn quotient_source(&self, q: &QuotientArrow) -> DVector<f64> {
        self.base_label(&self.gd.source(&q.representative))
    }

    pub fn quotient_target(&self, q: &QuotientArrow) -> DVector<f64> {
        self.base_label(&self.gd.target(&q.representative))
    }

    pub fn quotient_inverse(&self, q: &QuotientArrow) -> QuotientArrow {
        self.arrow(&self.gd.inverse(&q.representative))
    }

    pub fn quotient_unit(&self, object_label: &DVector<f64>) -> QuotientArrow {
        self.arrow(&self.gd.unit(&self.chart.section_p.eval(object_label)))
    }

    /// Resamples the representative through random `S`-flows and compares
    /// source, target and inverse labels.
    pub fn check_well_defined(&self, q: &QuotientArrow, rng: &mut Rng) -> Result<f64> {
        let mut worst = (self.label(&q.representative) - &q.label).norm();
        let (s0, t0, i0) = (self.quotient_source(q), self.quotient_target(q), self.quotient_inverse(q).label);
        for _ in 0..3 {
            let rep = self.random_leaf_move(&q.representative, 3, rng)?;
            let moved = self.arrow(&rep);
            worst = worst.max(max_norm(&[
                (self.quotient_source(&moved) - &s0).norm(),
                (self.quotient_target(&moved) - &t0).norm(),
                (self.quotient_inverse(&moved).label - &i0).norm(),
            ]));
        }
        if worst > self.num.tol_leaf {
            return Err(Error::WellDefinednessViolated { residual: worst });
        }
        Ok(worst)
    }

    /// `[g] ⋆ [h] = [g ⋆ h']` with `h'` transported along the leaf of `h`
    /// to target `s(g)`.
    pub fn quotient_mul(&self, a: &QuotientArrow, b: &QuotientArrow) -> Result<QuotientArrow> {
        let gap = (self.quotient_source(a) - self.quotient_target(b)).norm();
        if gap > self.num.tol_leaf {
            return Err(Error::NotComposable(gap));
        }
        let hp = self.transport_to_target(&b.representative, &self.gd.source(&a.representative))?;
        let prod = self.gd.mul(&a.representative, &hp)?;
        Ok(self.arrow(&prod))
    }

    /// Groupoid axioms on labels at sampled composable triples whose
    /// representatives were first moved along their leaves, the morphism
    /// property of `(λ_G, λ_P)`, and agreement with an explicit quotient
    /// groupoid on label space when one is given.
    pub fn validate_quotient_groupoid(
        &self,
        samples: usize,
        explicit: Option<&SmoothGroupoid>,
        rng: &mut Rng,
    ) -> Result<(CheckReport, QuotientSummary)> {
        let gd = &self.gd;
        let names = ["i", "ii", "iii", "iv", "v", "morphism", "explicit"];
        let mut res: BTreeMap<String, f64> = names.iter().map(|n| (n.to_string(), 0.0)).collect();
        let mut track = Tracker::new("validate_quotient_groupoid", self.num.tol_leaf);
        for _ in 0..samples {
            let g = gd.sample_arrow(rng);
            let h = gd.sample_composable(rng, &g)?;
            let l = gd.sample_composable(rng, &h)?;
            let gh = gd.mul(&g, &h)?;
            let qg = self.arrow(&self.random_leaf_move(&g, 2, rng)?);
            let qh = self.arrow(&self.random_leaf_move(&h, 2, rng)?);
            let ql = self.arrow(&self.random_leaf_move(&l, 2, rng)?);
            let qgh = self.quotient_mul(&qg, &qh)?;

            let mut put = |name: &str, r: f64, at: &Point| {
                let e = res.get_mut(name).expect("known axiom");
                *e = e.max(r);
                track.record(r, at);
            };
            put("morphism", (&qgh.label - self.label(&gh)).norm(), &concat(&g, &h));
            let r1 = (self.quotient_source(&qgh) - self.quotient_source(&qh))
                .norm()
                .max((self.quotient_target(&qgh) - self.quotient_target(&qg)).norm());
            put("i", r1, &concat(&g, &h));
            let left = self.quotient_mul(&qgh, &ql)?;
            let right = self.quotient_mul(&qg, &self.quotient_mul(&qh, &ql)?)?;
            put("ii", (left.label - right.label).norm(), &concat(&concat(&g, &h), &l));
            let a = self.quotient_source(&qg);
            let u = self.quotient_unit(&a);
            let r3 = (self.quotient_source(&u) - &a).norm().max((self.quotient_target(&u) - &a).norm());
            put("iii", r3, &g);
            let ru = (self.quotient_mul(&qg, &u)?.label - &qg.label).norm();
            let ut = self.quotient_unit(&self.quotient_target(&qg));
            let lu = (self.quotient_mul(&ut, &qg)?.label - &qg.label).norm();
            put("iv", ru.max(lu), &g);
            let qi = self.quotient_inverse(&qg);
            let r5 = (self.quotient_mul(&qg, &qi)?.label - &ut.label)
                .norm()
                .max((self.quotient_mul(&qi, &qg)?.label - &u.label).norm());
            put("v", r5, &g);
            if let Some(x) = explicit {
                let xm = x.mul(&qg.label, &qh.label).map(|m| (m - &qgh.label).norm()).unwrap_or(f64::INFINITY);
                let r = max_norm(&[
                    xm,
                    (x.source(&qg.label) - self.quotient_source(&qg)).norm(),
                    (x.target(&qg.label) - self.quotient_target(&qg)).norm(),
                    (x.inverse(&qg.label) - &qi.label).norm(),
                    (x.unit(&a) - &u.label).norm(),
                ]);
                put("explicit", r, &g);
            }
        }
        if explicit.is_none() {
            res.remove("explicit");
        }
        let summary = QuotientSummary {
            object_label_dim: self.chart.lambda_p.codomain().dim(),
            arrow_label_dim: self.chart.lambda_g.codomain().dim(),
            sampled_axiom_residuals: res,
            samples,
        };
        let report = track.finish().with_detail(serde_json::to_value(&summary)?);
        Ok((report, summary))
    }

    /// The tangent and cotangent identities relating products upstairs and
    /// on an explicit quotient groupoid `q` (label coordinates).
    pub fn check_lifted_structures(&self, q: &SmoothGroupoid, samples: usize, rng: &mut Rng) -> Result<CheckReport> {
        let gd = &self.gd;
        let policy = self.s.policy;
        let mut track = Tracker::new("check_lifted_structures", self.num.tol_lift);
        let (mut tan, mut cot) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let g = gd.sample_arrow(rng);
            let h = gd.sample_composable(rng, &g)?;
            let gh = gd.mul(&g, &h)?;
            let (lg, lh) = (self.label(&g), self.label(&h));
            let (jg, jh, jgh) =
                (self.chart.lambda_g.jacobian(&g), self.chart.lambda_g.jacobian(&h), self.chart.lambda_g.jacobian(&gh));

            let vqg = rng::cube(rng, q.dim_g(), 1.0);
            let vqh = q.sample_composable_tangent(rng, &lg, &vqg, &lh);
            let vg = linalg::solve_min_norm(&jg, &vqg, policy);
            let vh = linalg::solve_min_norm(&jh, &vqh, policy);
            let bg = fiber_basis(&self.s, &g)?;
            let (c, rw) = linalg::lstsq(&(gd.ts(&g) * &bg), &(gd.ts(&g) * &vg - gd.tt(&h) * &vh), policy);
            let wg = bg * c;
            let upstairs = &jgh * (gd.mul_jacobian(&g, &h) * concat(&(&vg - wg), &vh));
            let downstairs = q.mul_jacobian(&lg, &lh) * concat(&vqg, &vqh);
            let r = (upstairs - downstairs).norm().max(rw);
            tan = tan.max(r);
            track.record(r, &concat(&g, &h));

            let aqh = rng::cube(rng, q.dim_g(), 1.0);
            let that = cotangent_target(q, &CotangentArrow { base: lh.clone(), alpha: aqh.clone() }, policy)?;
            let aqg = covector_with_source(q, &lg, &that, policy)?;
            let pulled_g = CotangentArrow { base: g.clone(), alpha: jg.transpose() * &aqg };
            let pulled_h = CotangentArrow { base: h.clone(), alpha: jh.transpose() * &aqh };
            let gap = (cotangent_source(gd, &pulled_g, policy)? - cotangent_target(gd, &pulled_h, policy)?).norm();
            let r = if gap > gd.tol_cot {
                gap
            } else {
                let up = cotangent_mul(gd, &pulled_g, &pulled_h, policy)?;
                let down = cotangent_mul(
                    q,
                    &CotangentArrow { base: lg.clone(), alpha: aqg },
                    &CotangentArrow { base: lh.clone(), alpha: aqh },
                    policy,
                )?;
                (up.alpha - jgh.transpose() * down.alpha).norm().max(gap)
            };
            cot = cot.max(r);
            track.record(r, &concat(&g, &h));
        }
        Ok(track.finish().with_detail(serde_json::json!({
            "samples": samples,
            "tangent_residual": tan,
            "cotangent_residual": cot,
        })))
    }

    /// Ideal-system conditions for `A^S = S ∩ AG`: constant rank, anchor into
    /// `ker Tλ_P`, and equivariance of `AG/A^S → TP/ker Tλ_P` under the
    /// action transporting classes across a leaf of `S ∩ TP`.
    pub fn check_ideal_system(&self, samples: usize, rng: &mut Rng) -> Result<CheckReport> {
        let gd = &self.gd;
        let policy = self.s.policy;
        let mut track = Tracker::new("check_ideal_system", self.num.tol_member);
        let mut rank_seen: Option<usize> = None;
        let (mut anchor_max, mut equiv_max) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let p = gd.sample_object(rng);
            let (_, _, a_s) = unit_splitting(gd, &self.s, &p)?;
            match rank_seen {
                None => rank_seen = Some(a_s.ncols()),
                Some(r) if r != a_s.ncols() => {
                    return Err(Error::RankDrift { expected: r, found: a_s.ncols(), at: p.iter().cloned().collect() })
                }
                _ => {}
            }
            let ep = gd.unit(&p);
            let jp = self.chart.lambda_p.jacobian(&p);
            let r = linalg::max_abs(&(&jp * gd.ts(&ep) * &a_s));
            anchor_max = anchor_max.max(r);
            track.record(r, &p);

            let q = self.random_base_move(&p, 2, rng)?;
            let eq = gd.unit(&q);
            let ag_q = linalg::null_space(&gd.tt(&eq), policy);
            let ag_p = linalg::null_space(&gd.tt(&ep), policy);
            let uq = &ag_q * rng::cube(rng, ag_q.ncols(), 1.0);
            let want = self.chart.lambda_g.jacobian(&eq) * &uq;
            let (c, rs) = linalg::lstsq(&(self.chart.lambda_g.jacobian(&ep) * &ag_p), &want, policy);
            let up = ag_p * c;
            let jq = self.chart.lambda_p.jacobian(&q);
            let r = ((&jp * gd.ts(&ep) * up) - (&jq * gd.ts(&eq) * uq)).norm().max(rs);
            equiv_max = equiv_max.max(r);
            track.record(r, &concat(&p, &q));
        }
        Ok(track.finish().with_detail(serde_json::json!({
            "samples": samples,
            "rank_a_s": rank_seen.unwrap_or(0),
            "anchor_residual": anchor_max,
            "equivariance_residual": equiv_max,
        })))
    }

    /// `dλ_G` kills the generators of `S` and `dλ_P` those of `S ∩ TP`.
    pub fn check_first_integrals(&self, samples: usize, rng: &mut Rng) -> Result<CheckReport> {
        let mut track = Tracker::new("check_first_integrals", 1e-5);
        for _ in 0..samples {
            let g = self.gd.sample_arrow(rng);
            let j = self.chart.lambda_g.jacobian(&g);
            for x in self.s.gens() {
                track.record((&j * x.eval(&g)).norm(), &g);
            }
            let p = self.gd.sample_object(rng);
            let jp = self.chart.lambda_p.jacobian(&p);
            for x in self.base.gens() {
                track.record((&jp * x.eval(&p)).norm(), &p);
            }
            let back = self.label(&self.chart.section_g.eval(&self.label(&g)));
            track.record((back - self.label(&g)).norm(), &g);
        }
        Ok(track.finish())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{ex_basegp, ex_vb, group_action_pair};
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn num() -> Numerics {
        Numerics::default()
    }

    #[test]
    fn basegp_leaf_membership() {
        let sc = ex_basegp(&num());
        let ls = &sc.leaf;
        assert!(ls.same_leaf(&v(&[0.0, 1.0, 0.0, 2.0]), &v(&[5.0, 1.0, -3.0, 2.0])));
        assert_abs_diff_eq!(ls.label(&v(&[5.0, 1.0, -3.0, 2.0])), v(&[1.0, 2.0]), epsilon = 1e-15);
        let x = v(&[0.3, -0.2, 1.0, 0.4]);
        assert!(ls.same_leaf(&x, &x));
        assert!(!ls.same_leaf(&x, &v(&[0.3, -0.1, 1.0, 0.4])));
    }

    #[test]
    fn basegp_transport_moves_the_target_only() {
        let sc = ex_basegp(&num());
        let h = sc.leaf.transport_to_target(&v(&[0.0, 1.0, 0.0, 2.0]), &v(&[3.0, 1.0])).unwrap();
        assert_abs_diff_eq!(h, v(&[3.0, 1.0, 0.0, 2.0]), epsilon = 1e-9);
        let g = v(&[0.4, 1.0, -1.0, 2.0]);
        let same = sc.leaf.transport_to_target(&g, &v(&[0.4, 1.0])).unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn transport_refuses_other_leaves() {
        let sc = ex_basegp(&num());
        let err = sc.leaf.transport_to_target(&v(&[0.0, 1.0, 0.0, 2.0]), &v(&[3.0, 1.5])).unwrap_err();
        assert!(matches!(err, Error::NotSameLeaf(gap) if (gap - 0.5).abs() < 1e-12));
    }

    #[test]
    fn vb_transport_keeps_the_fiber_coordinate() {
        let sc = ex_vb(&num());
        let g = v(&[0.7, -1.2, 0.5, 2.0]);
        let h = sc.leaf.transport_to_target(&g, &v(&[-1.5, 2.0])).unwrap();
        assert_abs_diff_eq!(h, v(&[0.7, -1.2, -1.5, 2.0]), epsilon = 1e-9);
    }

    #[test]
    fn waypoint_paths_reach_the_same_point() {
        let sc = ex_basegp(&num());
        let ls = sc.leaf.clone().with_path(LeafPathOracle::Waypoints(Arc::new(|a: &Point, b: &Point| {
            let mid = (a + b) / 2.0 + v(&[1.0, 0.0]);
            vec![a.clone(), mid, b.clone()]
        })));
        let h = ls.transport_to_target(&v(&[0.0, 1.0, 0.0, 2.0]), &v(&[3.0, 1.0])).unwrap();
        assert_abs_diff_eq!(h, v(&[3.0, 1.0, 0.0, 2.0]), epsilon = 1e-9);
    }

    #[test]
    fn coset_condition_holds_on_builtin_scenarios() {
        let mut r = rng::seeded(5);
        for sc in [ex_basegp(&num()), ex_vb(&num()), group_action_pair([1.0, 0.0], &num()).unwrap()] {
            let rep = sc.leaf.check_condition6(30, &mut r).unwrap();
            assert!(rep.pass, "{}: {rep:?}", sc.name);
        }
    }

    #[test]
    fn group_action_coset_condition_is_tight() {
        let mut r = rng::seeded(6);
        let sc = group_action_pair([0.6, 0.8], &num()).unwrap();
        assert_eq!(sc.leaf.s_t_distribution().rank(), 0);
        let rep = sc.leaf.check_condition6(40, &mut r).unwrap();
        assert!(rep.max_residual <= 1e-8, "{rep:?}");
    }

    #[test]
    fn a_chart_that_is_not_a_first_integral_breaks_the_coset_condition() {
        let mut sc = ex_basegp(&num());
        let g = ChartManifold::euclidean(4);
        sc.leaf.chart.lambda_g = SmoothMap::new(g, ChartManifold::euclidean(2), |x| v(&[x[1], x[3] + 0.1 * x[2]]));
        let err = sc.leaf.check_condition6(20, &mut rng::seeded(7)).unwrap_err();
        assert!(matches!(err, Error::Condition6Violated { residual, ref witness } if residual > 1e-3 && witness.len() == 8));
    }

    #[test]
    fn basegp_quotient_maps() {
        let sc = ex_basegp(&num());
        let ls = &sc.leaf;
        let q = ls.arrow(&v(&[4.0, 1.0, -2.0, 2.0]));
        assert_abs_diff_eq!(ls.quotient_source(&q), v(&[2.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(ls.quotient_target(&q), v(&[1.0]), epsilon = 1e-15);
        assert_abs_diff_eq!(ls.quotient_inverse(&q).label, v(&[2.0, 1.0]), epsilon = 1e-15);
        let u = ls.quotient_unit(&v(&[3.0]));
        assert_eq!(ls.quotient_source(&u), ls.quotient_target(&u));
        let mut r = rng::seeded(8);
        assert!(ls.check_well_defined(&q, &mut r).unwrap() <= 1e-9);
    }

    #[test]
    fn basegp_quotient_product_is_the_pair_product() {
        let sc = ex_basegp(&num());
        let ls = &sc.leaf;
        let a = ls.arrow(&v(&[7.0, 1.0, -3.0, 2.0]));
        let b = ls.arrow(&v(&[0.5, 2.0, 4.0, 3.0]));
        let ab = ls.quotient_mul(&a, &b).unwrap();
        assert_abs_diff_eq!(ab.label, v(&[1.0, 3.0]), epsilon = 1e-9);
        let u = ls.quotient_unit(&ls.quotient_source(&a));
        assert_abs_diff_eq!(ls.quotient_mul(&a, &u).unwrap().label, a.label.clone(), epsilon = 1e-9);
        assert!(matches!(ls.quotient_mul(&b, &a), Err(Error::NotComposable(_))));
    }

    #[test]
    fn vb_quotient_adds_fiber_classes() {
        let sc = ex_vb(&num());
        let ls = &sc.leaf;
        let a = ls.arrow(&v(&[5.0, 0.3, 1.0, -0.5]));
        let b = ls.arrow(&v(&[-2.0, 1.1, 4.0, -0.5]));
        let ab = ls.quotient_mul(&a, &b).unwrap();
        // labels are (±x₂, ±m_y); the product adds the first and keeps the second
        assert_abs_diff_eq!(ab.label[0], a.label[0] + b.label[0], epsilon = 1e-9);
        assert_abs_diff_eq!(ab.label[1], a.label[1], epsilon = 1e-9);
        assert_abs_diff_eq!(ab.label[0].abs(), 1.4, epsilon = 1e-9);
    }

    #[test]
    fn quotient_groupoids_validate() {
        let mut r = rng::seeded(9);
        for sc in [ex_basegp(&num()), ex_vb(&num()), group_action_pair([1.0, 2.0], &num()).unwrap()] {
            let (rep, summary) = sc.leaf.validate_quotient_groupoid(25, Some(&sc.quotient), &mut r).unwrap();
            assert!(rep.pass, "{}: {rep:?}", sc.name);
            assert_eq!(summary.arrow_label_dim, sc.quotient.dim_g());
            assert_eq!(summary.object_label_dim, sc.quotient.dim_p());
            assert!(summary.sampled_axiom_residuals.contains_key("explicit"));
        }
    }

    #[test]
    fn lifted_structures_agree() {
        let mut r = rng::seeded(10);
        for sc in [ex_basegp(&num()), ex_vb(&num()), group_action_pair([1.0, 0.0], &num()).unwrap()] {
            let rep = sc.leaf.check_lifted_structures(&sc.quotient, 20, &mut r).unwrap();
            assert!(rep.pass, "{}: {rep:?}", sc.name);
        }
    }

    #[test]
    fn ideal_system_conditions_hold() {
        let mut r = rng::seeded(11);
        let sc = ex_vb(&num());
        let rep = sc.leaf.check_ideal_system(20, &mut r).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.detail.as_ref().unwrap()["rank_a_s"], 1);
        let sc = ex_basegp(&num());
        let rep = sc.leaf.check_ideal_system(20, &mut r).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.detail.as_ref().unwrap()["rank_a_s"], 1);
    }
}
