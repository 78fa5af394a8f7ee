//! Per-check results shared by every numerical check.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub max_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl CheckReport {
    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// Running maximum of a residual against a tolerance, remembering where the
/// worst value was seen. Non-finite residuals count as failures.
#[derive(Debug, Clone)]
pub struct Tracker {
    name: String,
    tol: f64,
    max: f64,
    at: Option<Vec<f64>>,
    forced_fail: bool,
}

impl Tracker {
    pub fn new(name: impl Into<String>, tol: f64) -> Self {
        Tracker { name: name.into(), tol, max: 0.0, at: None, forced_fail: false }
    }

    pub fn record(&mut self, residual: f64, at: &DVector<f64>) {
        self.record_slice(residual, at.as_slice());
    }

    pub fn record_slice(&mut self, residual: f64, at: &[f64]) {
        let r = if residual.is_finite() { residual } else { f64::MAX };
        if r > self.max || self.at.is_none() {
            self.max = self.max.max(r);
            self.at = Some(at.to_vec());
        }
    }

    /// Marks the check failed regardless of residuals (e.g. a rank mismatch).
    pub fn fail_at(&mut self, at: &[f64]) {
        if !self.forced_fail {
            self.forced_fail = true;
            self.at = Some(at.to_vec());
        }
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn passing(&self) -> bool {
        !self.forced_fail && self.max <= self.tol
    }

    pub fn finish(self) -> CheckReport {
        let pass = self.passing();
        CheckReport { name: self.name, pass, max_residual: self.max, witness: if pass { None } else { self.at }, detail: None }
    }
}

pub fn all_pass(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_keeps_worst_point() {
        let mut t = Tracker::new("x", 0.5);
        t.record_slice(0.1, &[1.0]);
        t.record_slice(0.9, &[2.0]);
        t.record_slice(0.2, &[3.0]);
        let r = t.finish();
        assert!(!r.pass);
        assert_eq!(r.max_residual, 0.9);
        assert_eq!(r.witness, Some(vec![2.0]));
    }

    #[test]
    fn nan_fails() {
        let mut t = Tracker::new("x", 1.0);
        t.record_slice(f64::NAN, &[0.0]);
        assert!(!t.finish().pass);
    }
}
