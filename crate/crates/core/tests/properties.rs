use folioid::dirac::{
    characteristic_spaces, check_integrable, from_poisson, from_two_form, minus_double, pushforward_dirac, PoissonBivector,
};
use folioid::fingroupoid::{
    cyclic_bundle_system, is_normal_subgroupoid, kernel_of_morphism, quotient_by_nss, FiniteGroupoid, FiniteMorphism,
};
use folioid::geomcore::{flow, lie_bracket, ChartManifold, SmoothMap, VectorField};
use folioid::leafspace::LeafChart;
use folioid::liegroupoid::{left_translation_tangent, pair_groupoid, tangent_mul, vector_bundle_groupoid, TangentArrow};
use folioid::linalg::{self, RankPolicy};
use folioid::multdist::{fiber_basis, lift_section, LiftMode};
use folioid::rng::{self, seeded};
use folioid::scenarios::{ex_basegp, ex_presymplectic, ex_vb};
use folioid::Numerics;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// `(a, b, x) ↦ (f(a), f(b), c·x mod d)` from `pair(k) × ℤ/n` to
/// `pair(k2) × ℤ/d`, `d | n`.
fn product_morphism(
    k: usize,
    n: usize,
    f: &[usize],
    k2: usize,
    d: usize,
    c: usize,
) -> (FiniteGroupoid, FiniteGroupoid, FiniteMorphism) {
    let from = FiniteGroupoid::product(&FiniteGroupoid::pair(k), &FiniteGroupoid::cyclic_group(n));
    let to = FiniteGroupoid::product(&FiniteGroupoid::pair(k2), &FiniteGroupoid::cyclic_group(d));
    let mut arrow_map = vec![0; from.arrows()];
    for a in 0..k {
        for b in 0..k {
            for x in 0..n {
                arrow_map[(a * k + b) * n + x] = (f[a] * k2 + f[b]) * d + (c * x) % d;
            }
        }
    }
    (from, to, FiniteMorphism { arrow_map, object_map: f.to_vec() })
}

fn morphism_strategy() -> impl Strategy<Value = (usize, usize, Vec<usize>, usize, usize, usize)> {
    (1usize..4, 1usize..4, prop::sample::select(vec![1usize, 2, 3, 4, 6]))
        .prop_flat_map(|(k, k2, n)| {
            let divisors: Vec<usize> = (1..=n).filter(|d| n % d == 0).collect();
            (Just(k), prop::collection::vec(0..k2, k), Just(k2), Just(n), prop::sample::select(divisors), 0usize..6)
        })
        .prop_map(|(k, f, k2, n, d, c)| (k, n, f, k2, d, c))
}

fn antisymmetric(n: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut it = entries.iter();
    for i in 0..n {
        for j in i + 1..n {
            let x = *it.next().unwrap();
            m[(i, j)] = x;
            m[(j, i)] = -x;
        }
    }
    m
}

/// Quadratic field `x ↦ b + A x + (xᵀ Q_i x)_i` on `ℝ²`.
fn quadratic_field(c: &[f64]) -> VectorField {
    let c = c.to_vec();
    VectorField::new(2, move |x| {
        let (a, b) = (x[0], x[1]);
        v(&[
            c[0] + c[1] * a + c[2] * b + c[3] * a * a + c[4] * a * b + c[5] * b * b,
            c[6] + c[7] * a + c[8] * b + c[9] * a * a + c[10] * a * b + c[11] * b * b,
        ])
    })
}

fn bracket_field(x: &VectorField, y: &VectorField, h: f64) -> VectorField {
    let (x, y) = (x.clone(), y.clone());
    VectorField::new(2, move |p| lie_bracket(&x, &y, p, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernels_of_morphisms_are_normal((k, n, f, k2, d, c) in morphism_strategy()) {
        let (from, to, m) = product_morphism(k, n, &f, k2, d, c);
        prop_assert!(m.validate(&from, &to).unwrap().valid);
        let kernel = kernel_of_morphism(&from, &to, &m).unwrap();
        prop_assert!(is_normal_subgroupoid(&from, &kernel).unwrap().0);
        for p in 0..from.objects() {
            prop_assert!(kernel.contains(&from.unit(p)));
        }
    }

    #[test]
    fn nss_projection_is_a_morphism(order in prop::sample::select(vec![2usize, 4, 6]), objects in 1usize..4, sub in 0usize..6, connect: bool) {
        let (g, nss) = cyclic_bundle_system(order, objects, sub % order, connect);
        let q = quotient_by_nss(&g, &nss).unwrap();
        prop_assert!(q.groupoid.validate().valid);
        prop_assert!(q.projection.validate(&g, &q.groupoid).unwrap().valid);
    }

    #[test]
    fn finite_groupoids_round_trip_through_json(k in 1usize..4, n in 1usize..4) {
        let g = FiniteGroupoid::product(&FiniteGroupoid::pair(k), &FiniteGroupoid::cyclic_group(n));
        prop_assert!(g.validate().valid);
        prop_assert_eq!(FiniteGroupoid::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn lie_bracket_is_antisymmetric(cx in prop::collection::vec(-1.0f64..1.0, 12), cy in prop::collection::vec(-1.0f64..1.0, 12), p in prop::collection::vec(-1.0f64..1.0, 2)) {
        let (x, y) = (quadratic_field(&cx), quadratic_field(&cy));
        let p = v(&p);
        let xy = lie_bracket(&x, &y, &p, 1e-5).unwrap();
        let yx = lie_bracket(&y, &x, &p, 1e-5).unwrap();
        prop_assert!((xy + yx).norm() <= 1e-5);
    }

    #[test]
    fn lie_bracket_satisfies_jacobi(
        cx in prop::collection::vec(-1.0f64..1.0, 12),
        cy in prop::collection::vec(-1.0f64..1.0, 12),
        cz in prop::collection::vec(-1.0f64..1.0, 12),
        p in prop::collection::vec(-1.0f64..1.0, 2),
    ) {
        let (x, y, z) = (quadratic_field(&cx), quadratic_field(&cy), quadratic_field(&cz));
        let p = v(&p);
        let h = 1e-3;
        let sum = lie_bracket(&x, &bracket_field(&y, &z, h), &p, h).unwrap()
            + lie_bracket(&y, &bracket_field(&z, &x, h), &p, h).unwrap()
            + lie_bracket(&z, &bracket_field(&x, &y, h), &p, h).unwrap();
        prop_assert!(sum.norm() <= 1e-5, "jacobiator {}", sum.norm());
    }

    #[test]
    fn flows_compose(c in prop::collection::vec(-1.0f64..1.0, 12), x0 in prop::collection::vec(-0.5f64..0.5, 2), s in 0.05f64..0.5, t in 0.05f64..0.5) {
        let field = quadratic_field(&c).scaled(0.5);
        let plane = ChartManifold::euclidean(2);
        let num = Numerics::default();
        let x0 = v(&x0);
        let direct = flow(&field, &plane, &x0, s + t, num.steps_for(s + t)).unwrap();
        let mid = flow(&field, &plane, &x0, s, num.steps_for(s)).unwrap();
        let split = flow(&field, &plane, &mid, t, num.steps_for(t)).unwrap();
        prop_assert!((direct - split).norm() <= 1e-7);
    }

    #[test]
    fn analytic_jacobians_match_central_differences(a in prop::collection::vec(-2.0f64..2.0, 6), x in prop::collection::vec(-2.0f64..2.0, 2)) {
        let r2 = ChartManifold::euclidean(2);
        let r3 = ChartManifold::euclidean(3);
        let affine = SmoothMap::affine(r2.clone(), r3, DMatrix::from_row_slice(3, 2, &a), v(&[1.0, -1.0, 0.5]));
        let bend = SmoothMap::new(r2.clone(), r2.clone(), |p| v(&[p[0].sin() * p[1], p[0] + p[1] * p[1]]))
            .with_jacobian(|p| DMatrix::from_row_slice(2, 2, &[p[0].cos() * p[1], p[0].sin(), 1.0, 2.0 * p[1]]));
        let composed = affine.compose(&bend);
        let x = v(&x);
        for f in [&affine, &bend, &composed] {
            prop_assert!(f.jacobian_error(&x) <= 1e-5);
        }
    }

    #[test]
    fn two_form_graphs_are_lagrangian(e in prop::collection::vec(-2.0f64..2.0, 6), seed in 0u64..1000) {
        let omega = antisymmetric(4, &e);
        let d = from_two_form(ChartManifold::euclidean(4), move |_| omega.clone()).unwrap();
        let mut r = seeded(seed);
        prop_assert!(d.check_lagrangian(20, 1e-6, RankPolicy::default(), &mut r).pass);
        prop_assert!(minus_double(&d).check_lagrangian(20, 1e-6, RankPolicy::default(), &mut r).pass);
    }

    #[test]
    fn constant_poisson_round_trips(e in prop::collection::vec(-2.0f64..2.0, 3), x in prop::collection::vec(-1.0f64..1.0, 3)) {
        let pi = antisymmetric(3, &e);
        let d = from_poisson(&PoissonBivector::constant(pi.clone()));
        let x = v(&x);
        let policy = RankPolicy::default();
        let ch = characteristic_spaces(&d, &x, policy).unwrap();
        prop_assert_eq!(ch.g0.ncols(), 0);
        // The fiber is {(πᵀα, α)}: solve for π from the cotangent part.
        let f = d.fiber_basis(&x, policy).unwrap();
        let (vpart, apart) = (f.rows(0, 3).into_owned(), f.rows(3, 3).into_owned());
        let recovered = (vpart * apart.try_inverse().unwrap()).transpose();
        prop_assert!((recovered - pi).abs().max() <= 1e-7);
    }

    #[test]
    fn pushforward_along_identity_labels_is_the_identity(e in prop::collection::vec(-2.0f64..2.0, 1), seed in 0u64..1000) {
        prop_assume!(e[0].abs() > 0.1);
        let pi = PoissonBivector::constant(antisymmetric(2, &e));
        let d = from_poisson(&pi);
        let r2 = ChartManifold::euclidean(2);
        let chart = LeafChart {
            lambda_g: SmoothMap::identity(r2.clone()),
            lambda_p: SmoothMap::identity(r2.clone()),
            section_g: SmoothMap::identity(r2.clone()),
            section_p: SmoothMap::identity(r2.clone()),
        };
        let mut r = seeded(seed);
        let out = pushforward_dirac(&d, &chart, 5, &Numerics::default(), &mut r).unwrap();
        let x = v(&[0.3, -0.2]);
        let policy = RankPolicy::default();
        let sine = linalg::max_principal_sine(
            &out.dirac.unwrap().fiber_basis(&x, policy).unwrap(),
            &d.fiber_basis(&x, policy).unwrap(),
        );
        prop_assert!(sine.unwrap() <= 1e-7);
    }
}

#[test]
fn tangent_prolongation_is_associative_and_unital() {
    let mut r = seeded(3);
    for gd in [pair_groupoid(2), vector_bundle_groupoid(2, 1)] {
        for _ in 0..50 {
            let g = gd.sample_arrow(&mut r);
            let h = gd.sample_composable(&mut r, &g).unwrap();
            let l = gd.sample_composable(&mut r, &h).unwrap();
            let vg = rng::cube(&mut r, gd.dim_g(), 1.0);
            let vh = gd.sample_composable_tangent(&mut r, &g, &vg, &h);
            let vl = gd.sample_composable_tangent(&mut r, &h, &vh, &l);
            let (a, b, c) = (
                TangentArrow { base: g.clone(), v: vg.clone() },
                TangentArrow { base: h, v: vh },
                TangentArrow { base: l, v: vl },
            );
            let left = tangent_mul(&gd, &tangent_mul(&gd, &a, &b).unwrap(), &c).unwrap();
            let right = tangent_mul(&gd, &a, &tangent_mul(&gd, &b, &c).unwrap()).unwrap();
            assert!((left.v - right.v).norm() <= 1e-6);

            let s = gd.source(&g);
            let unit = TangentArrow { base: gd.unit(&s), v: gd.teps(&s) * (gd.ts(&g) * &vg) };
            assert!((tangent_mul(&gd, &a, &unit).unwrap().v - &vg).norm() <= 1e-6);
        }
    }
}

#[test]
fn left_translations_invert() {
    let mut r = seeded(4);
    let gd = pair_groupoid(2);
    for _ in 0..50 {
        let g = gd.sample_arrow(&mut r);
        let h = gd.sample_with_target(&mut r, &gd.source(&g));
        let fiber = linalg::null_space(&gd.tt(&h), RankPolicy::default());
        let u = &fiber * rng::cube(&mut r, fiber.ncols(), 1.0);
        let moved = left_translation_tangent(&gd, &g, &h, &u).unwrap();
        let back = left_translation_tangent(&gd, &gd.inverse(&g), &moved.base, &moved.v).unwrap();
        assert!((back.base - h).norm() <= 1e-9);
        assert!((back.v - u).norm() <= 1e-6);
    }
}

#[test]
fn lifted_sections_descend_and_stay_in_s() {
    let num = Numerics::default();
    let mut r = seeded(5);
    for sc in [ex_basegp(&num), ex_vb(&num)] {
        let leaf = &sc.leaf;
        let m = leaf.gd.dim_p();
        let cap = leaf.base_distribution();
        for mode in [LiftMode::Source, LiftMode::Target] {
            let xbar = cap.gens()[0].clone();
            let lift = lift_section(&leaf.gd, &leaf.s, &xbar, mode, 20, &num, &mut r).unwrap();
            for _ in 0..20 {
                let g = leaf.gd.sample_arrow(&mut r);
                let x = lift.x.eval(&g);
                let (j, base) = match mode {
                    LiftMode::Source => (leaf.gd.ts(&g), leaf.gd.source(&g)),
                    LiftMode::Target => (leaf.gd.tt(&g), leaf.gd.target(&g)),
                };
                assert_eq!(x.len(), leaf.gd.dim_g());
                assert!((j * &x - xbar.eval(&base)).norm() <= 1e-6);
                assert!(linalg::distance_to_span(&fiber_basis(&leaf.s, &g).unwrap(), &x) <= 1e-6);
                assert_eq!(xbar.dim(), m);
            }
        }
    }
}

#[test]
fn quotient_products_ignore_representatives() {
    let num = Numerics::default();
    let mut r = seeded(6);
    for sc in [ex_basegp(&num), ex_vb(&num)] {
        let leaf = &sc.leaf;
        for _ in 0..30 {
            let g = leaf.gd.sample_arrow(&mut r);
            let h = leaf.gd.sample_composable(&mut r, &g).unwrap();
            let base = leaf.quotient_mul(&leaf.arrow(&g), &leaf.arrow(&h)).unwrap();
            let g2 = leaf.random_leaf_move(&g, 3, &mut r).unwrap();
            let h2 = leaf.random_leaf_move(&h, 3, &mut r).unwrap();
            let moved = leaf.quotient_mul(&leaf.arrow(&g2), &leaf.arrow(&h2)).unwrap();
            assert!((base.label - moved.label).norm() <= 1e-5);
        }
    }
}

#[test]
fn units_of_the_leaf_space_form_a_wide_subgroupoid() {
    let num = Numerics::default();
    let mut r = seeded(8);
    for sc in [ex_basegp(&num), ex_vb(&num)] {
        let leaf = &sc.leaf;
        let near_unit = |g: &DVector<f64>| {
            let p = leaf.gd.target(g);
            leaf.same_leaf(g, &leaf.gd.unit(&p))
        };
        for _ in 0..30 {
            let p = leaf.gd.sample_object(&mut r);
            let n1 = leaf.random_t_fiber_move(&leaf.gd.unit(&p), 3, &mut r).unwrap();
            assert!(near_unit(&n1));
            assert!(near_unit(&leaf.gd.inverse(&n1)));
            let q = leaf.gd.source(&n1);
            let n2 = leaf.random_t_fiber_move(&leaf.gd.unit(&q), 3, &mut r).unwrap();
            assert!(near_unit(&leaf.gd.mul(&n1, &n2).unwrap()));

            let g = leaf.gd.sample_with_target(&mut r, &p);
            let s = leaf.gd.source(&g);
            let n = leaf.random_t_fiber_move(&leaf.gd.unit(&s), 3, &mut r).unwrap();
            let gn = leaf.gd.mul(&g, &n).unwrap();
            assert!(leaf.same_leaf(&gn, &g));
            assert!((leaf.gd.target(&gn) - leaf.gd.target(&g)).norm() <= 1e-9);
        }
    }
}

#[test]
fn integrable_dirac_groupoid_has_involutive_characteristic() {
    let num = Numerics::default();
    let sc = ex_presymplectic(&num);
    let mut r = seeded(9);
    assert!(check_integrable(&sc.dirac, 20, &num, &mut r).unwrap().pass);
    let policy = num.rank_policy();
    for _ in 0..20 {
        let x = sc.dirac.sample_point(&mut r);
        let g0 = characteristic_spaces(&sc.dirac, &x, policy).unwrap().g0;
        assert_eq!(g0.ncols(), 2);
        let fields: Vec<VectorField> = (0..g0.ncols()).map(|i| VectorField::constant(g0.column(i).into_owned())).collect();
        for a in &fields {
            for b in &fields {
                let br = lie_bracket(a, b, &x, num.h_fd).unwrap();
                assert!(linalg::distance_to_span(&g0, &br) <= 1e-5);
            }
        }
    }
}
