//! Browser bindings for three operations on the builtin scenarios: leaf
//! transport in the foliated pair groupoid, the quotient product of the
//! vector-bundle example, and the Poisson bivector pushed forward from a
//! presymplectic pair groupoid.

use folioid::dirac::{area_form, pushforward_dirac};
use folioid::rng::seeded;
use folioid::scenarios::{ex_basegp, ex_vb, presymplectic_pair};
use folioid::Numerics;
use nalgebra::DVector;
use wasm_bindgen::prelude::*;

fn point(xs: &[f64], n: usize, what: &str) -> Result<DVector<f64>, String> {
    if xs.len() != n {
        return Err(format!("{what} needs {n} coordinates, got {}", xs.len()));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(format!("{what} has a non-finite coordinate"));
    }
    Ok(DVector::from_column_slice(xs))
}

/// Moves the arrow `(m, n)` of the pair groupoid of `ℝ²` (foliated by
/// horizontal lines) along its leaf until its target is `p`. Returns the
/// new arrow followed by its leaf label.
pub fn transport_arrow(arrow: &[f64], p: &[f64]) -> Result<Vec<f64>, String> {
    let sc = ex_basegp(&Numerics::default());
    let g = point(arrow, 4, "arrow")?;
    let p = point(p, 2, "target")?;
    let moved = sc.leaf.transport_to_target(&g, &p).map_err(|e| e.to_string())?;
    let label = sc.leaf.label(&moved);
    Ok(moved.iter().chain(label.iter()).copied().collect())
}

/// Quotient product `[a] ⋆ [b]` in the vector-bundle example; arrows are
/// `(v₁, v₂, x, y)`. Returns the label `(v₂ class, y class)`.
pub fn vb_quotient_product(a: &[f64], b: &[f64]) -> Result<Vec<f64>, String> {
    let sc = ex_vb(&Numerics::default());
    let (a, b) = (point(a, 4, "first arrow")?, point(b, 4, "second arrow")?);
    let leaf = &sc.leaf;
    let prod = leaf.quotient_mul(&leaf.arrow(&a), &leaf.arrow(&b)).map_err(|e| e.to_string())?;
    Ok(prod.label.iter().copied().collect())
}

/// Pushes `ω = c dx∧dy` on `ℝ³`, doubled over the pair groupoid, down to
/// the quotient by its characteristic distribution. Returns the 4×4 Poisson
/// matrix row by row, followed by the Jacobi residual.
pub fn pushforward_poisson(c: f64) -> Result<Vec<f64>, String> {
    if !c.is_finite() || c == 0.0 {
        return Err("c must be finite and nonzero".into());
    }
    let num = Numerics::default();
    let sc = presymplectic_pair(&area_form(3, c), None, &num).map_err(|e| e.to_string())?;
    let mut rng = seeded(num.seed);
    let out = pushforward_dirac(&sc.dirac, &sc.leaf.chart, 5, &num, &mut rng).map_err(|e| e.to_string())?;
    let pi = out.poisson.ok_or("the quotient Dirac structure is not a Poisson graph")?;
    let m = pi.matrix(&DVector::zeros(4));
    let mut flat: Vec<f64> = m.transpose().iter().copied().collect();
    flat.push(out.summary.jacobi_residual);
    Ok(flat)
}

#[wasm_bindgen(js_name = transportArrow)]
pub fn transport_arrow_js(arrow: &[f64], p: &[f64]) -> Result<Vec<f64>, JsError> {
    transport_arrow(arrow, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = vbQuotientProduct)]
pub fn vb_quotient_product_js(a: &[f64], b: &[f64]) -> Result<Vec<f64>, JsError> {
    vb_quotient_product(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pushforwardPoisson)]
pub fn pushforward_poisson_js(c: f64) -> Result<Vec<f64>, JsError> {
    pushforward_poisson(c).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transport_keeps_the_leaf() {
        let out = transport_arrow(&[0.0, 1.0, 0.0, 2.0], &[3.0, 1.0]).unwrap();
        assert_eq!(out.len(), 6);
        for (got, want) in out.iter().zip([3.0, 1.0, 0.0, 2.0, 1.0, 2.0]) {
            assert!((got - want).abs() < 1e-6);
        }
        assert!(transport_arrow(&[0.0, 1.0, 0.0, 2.0], &[3.0, 1.5]).is_err());
        assert!(transport_arrow(&[0.0], &[3.0, 1.0]).is_err());
    }

    #[test]
    fn vb_product_adds_fiber_classes() {
        let out = vb_quotient_product(&[5.0, 1.0, 0.0, 2.0], &[-1.0, 0.5, 4.0, 2.0]).unwrap();
        assert!((out[0] - 1.5).abs() < 1e-9 && (out[1] - 2.0).abs() < 1e-9);
        assert!(vb_quotient_product(&[0.0, 1.0, 0.0, 2.0], &[0.0, 1.0, 0.0, 3.0]).is_err());
    }

    #[test]
    fn pushforward_inverts_the_area_form() {
        let out = pushforward_poisson(2.0).unwrap();
        assert_eq!(out.len(), 17);
        assert!((out[1].abs() - 0.5).abs() < 1e-9);
        assert!((out[1] + out[4]).abs() < 1e-12);
        assert!(out[16] < 1e-6);
        assert!(pushforward_poisson(0.0).is_err());
    }
}
