//! Dense linear-algebra helpers built on the nalgebra SVD.
//!
//! Every rank decision in the crate goes through [`RankPolicy`], so the same
//! cutoff governs fiber bases, intersections and null spaces.

use nalgebra::{DMatrix, DVector};

/// Singular-value cutoff: a value counts as nonzero when it exceeds
/// `rel * max(sigma_max, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankPolicy {
    pub rel: f64,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { rel: 1e-8 }
    }
}

impl RankPolicy {
    pub fn new(rel: f64) -> Self {
        RankPolicy { rel }
    }

    fn cutoff(&self, sigma_max: f64) -> f64 {
        self.rel * sigma_max.max(1.0)
    }
}

fn pad_square(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() >= m.ncols() {
        return m.clone();
    }
    let mut out = DMatrix::zeros(m.ncols(), m.ncols());
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// Orthonormal basis (as columns) of the column space of `m`.
pub fn orth(m: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = policy.cutoff(smax);
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > cut).collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

pub fn rank(m: &DMatrix<f64>, policy: RankPolicy) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let cut = policy.cutoff(smax);
    sv.iter().filter(|&&s| s > cut).count()
}

/// Orthonormal basis (as columns) of the kernel of `m`.
pub fn null_space(m: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let sq = pad_square(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = policy.cutoff(smax);
    let rows: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= cut).collect();
    DMatrix::from_fn(n, rows.len(), |r, c| vt[(rows[c], r)])
}

/// Orthogonal projector onto the span of the orthonormal columns of `q`.
pub fn projector(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

/// Intersection of the spans of two orthonormal bases living in the same space.
pub fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    let n = a.nrows();
    debug_assert_eq!(n, b.nrows());
    let id = DMatrix::<f64>::identity(n, n);
    let stacked = vstack(&[&(&id - projector(a)), &(&id - projector(b))]);
    null_space(&stacked, policy)
}

/// Intersection of span(q) with ker(j), q orthonormal.
pub fn intersect_kernel(q: &DMatrix<f64>, j: &DMatrix<f64>, policy: RankPolicy) -> DMatrix<f64> {
    let n = q.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let stacked = vstack(&[&(&id - projector(q)), j]);
    null_space(&stacked, policy)
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Euclidean distance from `v` to span(q), q orthonormal.
pub fn distance_to_span(q: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    if q.ncols() == 0 {
        return v.norm();
    }
    (v - q * (q.transpose() * v)).norm()
}

/// Largest distance of any column of `m` to span(q).
pub fn max_distance_to_span(q: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| distance_to_span(q, &c.into_owned())).fold(0.0, f64::max)
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal bases. Returns `None` when the dimensions differ.
pub fn max_principal_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<f64> {
    if a.ncols() != b.ncols() {
        return None;
    }
    if a.ncols() == 0 {
        return Some(0.0);
    }
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let residual = (&id - projector(b)) * a;
    Some(residual.singular_values().iter().cloned().fold(0.0, f64::max))
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn solve_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, policy: RankPolicy) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = policy.cutoff(smax);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut x = DVector::zeros(a.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let coef = u.column(i).dot(b) / s;
            x += vt.row(i).transpose() * coef;
        }
    }
    x
}

/// Minimum-norm least-squares solution together with the residual norm.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, policy: RankPolicy) -> (DVector<f64>, f64) {
    let x = solve_min_norm(a, b, policy);
    let r = if a.ncols() == 0 { b.norm() } else { (a * &x - b).norm() };
    (x, r)
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn all_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn rank_of_dependent_columns() {
        let a = m(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(rank(&a, RankPolicy::default()), 1);
        assert_eq!(orth(&a, RankPolicy::default()).ncols(), 1);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = m(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&a, RankPolicy::default());
        assert_eq!(k.ncols(), 2);
        assert!((&a * &k).norm() < 1e-12);
        assert!((k.transpose() * &k - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_zero_matrix_is_everything() {
        let a = DMatrix::zeros(2, 3);
        assert_eq!(null_space(&a, RankPolicy::default()).ncols(), 3);
    }

    #[test]
    fn intersection_of_planes_is_a_line() {
        let a = orth(&m(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]), RankPolicy::default());
        let b = orth(&m(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]), RankPolicy::default());
        let c = intersect(&a, &b, RankPolicy::default());
        assert_eq!(c.ncols(), 1);
        assert!((c[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_norm_solution() {
        let a = m(1, 2, &[1.0, 1.0]);
        let x = solve_min_norm(&a, &DVector::from_vec(vec![2.0]), RankPolicy::default());
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_sine_detects_rotation() {
        let a = m(2, 1, &[1.0, 0.0]);
        let t: f64 = 0.3;
        let b = m(2, 1, &[t.cos(), t.sin()]);
        let s = max_principal_sine(&a, &b).unwrap();
        assert!((s - t.sin()).abs() < 1e-12);
        assert!(max_principal_sine(&a, &DMatrix::zeros(2, 0)).is_none());
    }
}
