use serde::{Deserialize, Serialize};

use crate::linalg::RankPolicy;

/// Numerical knobs shared by every smooth check. All overridable from a
/// scenario config.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub h_fd: f64,
    pub rk4_steps_per_unit: usize,
    pub tol_rank: f64,
    pub tol_member: f64,
    pub tol_leaf: f64,
    pub tol_axiom: f64,
    pub tol_dirac: f64,
    pub tol_jac: f64,
    pub tol_comp: f64,
    pub tol_lift: f64,
    pub tol_jacobi: f64,
    pub t_max: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            h_fd: 1e-5,
            rk4_steps_per_unit: 200,
            tol_rank: 1e-8,
            tol_member: 1e-6,
            tol_leaf: 1e-6,
            tol_axiom: 1e-9,
            tol_dirac: 1e-6,
            tol_jac: 1e-4,
            tol_comp: 1e-9,
            tol_lift: 1e-6,
            tol_jacobi: 1e-6,
            t_max: 5.0,
            samples: 200,
            seed: 7,
        }
    }
}

impl Numerics {
    pub fn rank_policy(&self) -> RankPolicy {
        RankPolicy::new(self.tol_rank)
    }

    pub fn steps_for(&self, time: f64) -> usize {
        ((time.abs() * self.rk4_steps_per_unit as f64).ceil() as usize).max(1)
    }

    /// Every tolerance must be positive and at least one sample requested.
    pub fn validate(&self) -> Result<(), String> {
        let named = [
            ("h_fd", self.h_fd),
            ("tol_rank", self.tol_rank),
            ("tol_member", self.tol_member),
            ("tol_leaf", self.tol_leaf),
            ("tol_axiom", self.tol_axiom),
            ("tol_dirac", self.tol_dirac),
            ("tol_jac", self.tol_jac),
            ("tol_comp", self.tol_comp),
            ("tol_lift", self.tol_lift),
            ("tol_jacobi", self.tol_jacobi),
            ("t_max", self.t_max),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.samples == 0 {
            return Err("samples must be at least 1".into());
        }
        if self.rk4_steps_per_unit == 0 {
            return Err("rk4_steps_per_unit must be at least 1".into());
        }
        Ok(())
    }
}
