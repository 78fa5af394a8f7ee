//! Builtin smooth scenarios: a groupoid, a multiplicative foliation, a leaf
//! chart and the explicit quotient groupoid in label coordinates.

use nalgebra::{DMatrix, DVector};

use crate::dirac::{from_two_form, minus_double, DiracStructure};
use crate::error::{Error, Result};
use crate::geomcore::{ChartManifold, SmoothMap, VectorField};
use crate::leafspace::{LeafChart, LeafSpace};
use crate::liegroupoid::{concat, pair_groupoid, vector_bundle_groupoid, SmoothGroupoid, StructureMaps};
use crate::linalg::{self, RankPolicy};
use crate::multdist::Distribution;
use crate::numerics::Numerics;
use crate::rng;

#[derive(Debug, Clone)]
pub struct SmoothScenario {
    pub name: String,
    pub leaf: LeafSpace,
    pub quotient: SmoothGroupoid,
    /// Fields whose completeness is declared by the scenario, each with the
    /// manifold it lives on.
    pub complete_fields: Vec<(VectorField, ChartManifold)>,
}

fn selector(n: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), n);
    for (r, &i) in rows.iter().enumerate() {
        m[(r, i)] = 1.0;
    }
    m
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    m
}

fn linear(n: usize, m: usize, a: DMatrix<f64>) -> SmoothMap {
    SmoothMap::linear(ChartManifold::euclidean(n), ChartManifold::euclidean(m), a)
}

/// Orthonormal basis of the complement of the column span of `w` in `ℝⁿ`.
fn complement(w: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::null_space(&w.transpose(), RankPolicy::default())
}

fn base_fields(gd: &SmoothGroupoid, s: &Distribution) -> Vec<(VectorField, ChartManifold)> {
    s.gens().iter().map(|x| (x.clone(), gd.arrows_manifold().clone())).collect()
}

/// Pair groupoid of `ℝⁿ` with `S = D × D`, `D` spanned by the coordinate
/// fields listed in `axes`. The leaf space is the pair groupoid of `ℝⁿ/D`.
pub fn pair_foliated(n: usize, axes: &[usize], num: &Numerics) -> Result<SmoothScenario> {
    if n == 0 || axes.iter().any(|&i| i >= n) {
        return Err(Error::Config(format!("leaf axes {axes:?} out of range for dimension {n}")));
    }
    let mut axes = axes.to_vec();
    axes.sort_unstable();
    axes.dedup();
    let keep: Vec<usize> = (0..n).filter(|i| !axes.contains(i)).collect();
    let k = keep.len();
    let gd = pair_groupoid(n);
    let g_axes: Vec<usize> = axes.iter().flat_map(|&i| [i, n + i]).collect();
    let s = Distribution::coordinate(2 * n, &g_axes);
    let lp = selector(n, &keep);
    let lg = block_diag(&lp, &lp);
    let chart = LeafChart {
        lambda_g: linear(2 * n, 2 * k, lg.clone()),
        lambda_p: linear(n, k, lp.clone()),
        section_g: linear(2 * k, 2 * n, lg.transpose()),
        section_p: linear(k, n, lp.transpose()),
    };
    let complete_fields = base_fields(&gd, &s);
    Ok(SmoothScenario {
        name: "pair".into(),
        leaf: LeafSpace::new(gd, s, chart, *num)?,
        quotient: pair_groupoid(k),
        complete_fields,
    })
}

/// Trivial vector-bundle groupoid `ℝᵏ × M ⇉ M`, `M = ℝᵐ`, with
/// `S = W × F` for constant subspaces `W ⊆ ℝᵏ`, `F ⊆ TM` (columns of `w`,
/// `f`). The leaf space is `(ℝᵏ/W) × (M/F) ⇉ M/F`.
pub fn vb_trivial(w: &DMatrix<f64>, f: &DMatrix<f64>, num: &Numerics) -> Result<SmoothScenario> {
    let (k, m) = (w.nrows(), f.nrows());
    if k == 0 || m == 0 {
        return Err(Error::Config("vb_trivial needs k ≥ 1 and m ≥ 1".into()));
    }
    let gd = vector_bundle_groupoid(k, m);
    let s = Distribution::constant(&block_diag(w, f));
    let cw = complement(w);
    let cf = complement(f);
    let (a, b) = (cw.ncols(), cf.ncols());
    let lg = block_diag(&cw.transpose(), &cf.transpose());
    let chart = LeafChart {
        lambda_g: linear(k + m, a + b, lg.clone()),
        lambda_p: linear(m, b, cf.transpose()),
        section_g: linear(a + b, k + m, lg.transpose()),
        section_p: linear(b, m, cf.clone()),
    };
    let complete_fields = base_fields(&gd, &s);
    Ok(SmoothScenario {
        name: "vb_trivial".into(),
        leaf: LeafSpace::new(gd, s, chart, *num)?,
        quotient: vector_bundle_groupoid(a, b),
        complete_fields,
    })
}

/// Groupoid `ℝ × ℝ × ℝ ⇉ ℝ` with arrows `(a, b, δ)`, target `a`, source `b`,
/// `(a, b, δ)(b, c, δ') = (a, c, δ + δ')`: the pair groupoid of `ℝ` times
/// the additive group of `ℝ`.
pub fn pair_times_line() -> SmoothGroupoid {
    let g = ChartManifold::euclidean(3);
    let p = ChartManifold::euclidean(1);
    let mut mul = DMatrix::zeros(3, 6);
    mul[(0, 0)] = 1.0;
    mul[(1, 4)] = 1.0;
    mul[(2, 2)] = 1.0;
    mul[(2, 5)] = 1.0;
    let inv = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0]);
    let maps = StructureMaps {
        s: SmoothMap::linear(g.clone(), p.clone(), DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 0.0])),
        t: SmoothMap::linear(g.clone(), p.clone(), DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0])),
        eps: SmoothMap::linear(p.clone(), g.clone(), DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0])),
        inv: SmoothMap::linear(g.clone(), g.clone(), inv),
        mul: SmoothMap::linear(g.product(&g), g.clone(), mul),
    };
    SmoothGroupoid::new(g, p, maps, |r| rng::cube(r, 3, 2.0), |r, target| concat(target, &rng::cube(r, 2, 2.0)))
        .expect("shapes agree")
}

/// Pair groupoid of `ℝ²` with `S` generated by the diagonal translation
/// action of `H = ℝ` along the unit vector `e`. Leaves are the orbits
/// `{(m + τe, n + τe)}`; labels are `(e⊥·m, e⊥·n, e·(n − m))`.
pub fn group_action_pair(direction: [f64; 2], num: &Numerics) -> Result<SmoothScenario> {
    let norm = (direction[0].powi(2) + direction[1].powi(2)).sqrt();
    if !norm.is_finite() || norm <= 0.0 {
        return Err(Error::Config("group_action_pair needs a nonzero direction".into()));
    }
    let e = [direction[0] / norm, direction[1] / norm];
    let ep = [-e[1], e[0]];
    let gd = pair_groupoid(2);
    let s = Distribution::constant(&DMatrix::from_column_slice(4, 1, &[e[0], e[1], e[0], e[1]]));
    let lg = DMatrix::from_row_slice(3, 4, &[ep[0], ep[1], 0.0, 0.0, 0.0, 0.0, ep[0], ep[1], -e[0], -e[1], e[0], e[1]]);
    let lp = DMatrix::from_row_slice(1, 2, &[ep[0], ep[1]]);
    let section_g = DMatrix::from_row_slice(4, 3, &[ep[0], 0.0, 0.0, ep[1], 0.0, 0.0, 0.0, ep[0], e[0], 0.0, ep[1], e[1]]);
    let chart = LeafChart {
        lambda_g: linear(4, 3, lg),
        lambda_p: linear(2, 1, lp.clone()),
        section_g: linear(3, 4, section_g),
        section_p: linear(1, 2, lp.transpose()),
    };
    let complete_fields = base_fields(&gd, &s);
    Ok(SmoothScenario {
        name: "group_action_pair".into(),
        leaf: LeafSpace::new(gd, s, chart, *num)?,
        quotient: pair_times_line(),
        complete_fields,
    })
}

/// The builtin instance with `M = ℝ²`, `D = span{∂x}`.
pub fn ex_basegp(num: &Numerics) -> SmoothScenario {
    pair_foliated(2, &[0], num).expect("builtin parameters are valid")
}

/// The builtin instance with `k = 2`, `W = span{e₁}`, `M = ℝ²`, `F = span{∂x}`.
pub fn ex_vb(num: &Numerics) -> SmoothScenario {
    let w = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let f = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    vb_trivial(&w, &f, num).expect("builtin parameters are valid")
}

/// A Dirac groupoid with the leaf space of its characteristic distribution.
#[derive(Debug, Clone)]
pub struct DiracScenario {
    pub name: String,
    pub dirac: DiracStructure,
    /// Leaf space of `G₀`, with `S = G₀`.
    pub leaf: LeafSpace,
    pub quotient: SmoothGroupoid,
}

/// Pair groupoid of `ℝⁿ` with `D_G = D_ω ⊖ D_ω` for a constant two-form
/// `ω`. With `twist = Some(i)` the form is `x_i ω` instead, which is not
/// closed when `i` indexes a kernel direction. The leaf chart projects
/// each factor onto the complement of `ker ω`.
pub fn presymplectic_pair(omega: &DMatrix<f64>, twist: Option<usize>, num: &Numerics) -> Result<DiracScenario> {
    let n = omega.nrows();
    if n == 0 || omega.ncols() != n {
        return Err(Error::Config("omega must be a nonempty square matrix".into()));
    }
    if linalg::max_abs(&(omega + omega.transpose())) > 0.0 {
        return Err(Error::Config("omega must be antisymmetric".into()));
    }
    if twist.is_some_and(|i| i >= n) {
        return Err(Error::Config(format!("twist coordinate out of range for dimension {n}")));
    }
    let w = omega.clone();
    let dm = from_two_form(ChartManifold::euclidean(n), move |x| match twist {
        Some(i) => &w * x[i],
        None => w.clone(),
    })?;
    let kernel = linalg::null_space(omega, RankPolicy::default());
    let c = complement(&kernel);
    let r = c.ncols();
    let gd = pair_groupoid(n);
    let s = Distribution::constant(&block_diag(&kernel, &kernel));
    let lg = block_diag(&c.transpose(), &c.transpose());
    let chart = LeafChart {
        lambda_g: linear(2 * n, 2 * r, lg.clone()),
        lambda_p: linear(n, r, c.transpose()),
        section_g: linear(2 * r, 2 * n, lg.transpose()),
        section_p: linear(r, n, c),
    };
    Ok(DiracScenario {
        name: "presymplectic_pair_dirac".into(),
        dirac: minus_double(&dm),
        leaf: LeafSpace::new(gd, s, chart, *num)?,
        quotient: pair_groupoid(r),
    })
}

/// `ω = dx ∧ dy` on `ℝ³`.
pub fn ex_presymplectic(num: &Numerics) -> DiracScenario {
    presymplectic_pair(&crate::dirac::area_form(3, 1.0), None, num).expect("builtin parameters are valid")
}

/// Column matrix from a list of basis vectors, each of length `n`.
pub fn columns(n: usize, vectors: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(n, vectors.len());
    for (j, v) in vectors.iter().enumerate() {
        if v.len() != n {
            return Err(Error::Config(format!("basis vector {j} has length {}, expected {n}", v.len())));
        }
        m.set_column(j, &DVector::from_column_slice(v));
    }
    Ok(m)
}
