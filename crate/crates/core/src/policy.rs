//! Numerical tolerances shared by every module.
//!
//! All thresholds live in one record so that a run can override them from a
//! configuration file and the manifest can echo the values actually used.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericalPolicy {
    /// Relative slack for positive semi-definiteness: eigenvalues down to
    /// `-spd_rel_eps * max_diag` are accepted.
    pub spd_rel_eps: f64,
    /// Constraint covariance matrices with a larger condition number are
    /// rejected.
    pub max_condition: f64,
    /// Relative tolerance for reproducing constraint values.
    pub constraint_rel_tol: f64,
    /// Relative singular-value cutoff for the rank of a kernel matrix.
    pub rank_rel_tol: f64,
    /// Grid-mode kernel weights must sum to one within this tolerance.
    pub kernel_sum_tol: f64,
    /// Target relative size of the neglected Fourier tail.
    pub fourier_tail_rel: f64,
}

impl Default for NumericalPolicy {
    fn default() -> Self {
        Self {
            spd_rel_eps: 1e-10,
            max_condition: 1e12,
            constraint_rel_tol: 1e-10,
            rank_rel_tol: 1e-10,
            kernel_sum_tol: 1e-8,
            fourier_tail_rel: 1e-10,
        }
    }
}

impl NumericalPolicy {
    /// Absolute eigenvalue floor for a matrix whose largest diagonal entry is
    /// `max_diag`.
    pub fn spd_floor(&self, max_diag: f64) -> f64 {
        -self.spd_rel_eps * max_diag.abs()
    }
}
