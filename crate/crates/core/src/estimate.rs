//! Common result type for all estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Normal quantile used for two-sided 95% intervals.
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Estimate of the log-odds ratio of `first` over `second`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub first: u8,
    pub second: u8,
    pub theta_hat: f64,
    /// Absent for methods that give only an interval.
    pub se: Option<f64>,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    /// Report with a symmetric 95% interval `theta_hat +- 1.96 se`.
    pub fn wald(method: &str, first: u8, second: u8, theta_hat: f64, se: f64) -> Self {
        Self {
            method: method.to_string(),
            first,
            second,
            theta_hat,
            se: Some(se),
            ci_low: theta_hat - Z_975 * se,
            ci_high: theta_hat + Z_975 * se,
            p_value: None,
            diagnostics: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn covers(&self, theta: f64) -> bool {
        self.ci_low <= theta && theta <= self.ci_high
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }
}
