use std::collections::BTreeMap;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use super::stacked::StackedSystem;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::invert;
use crate::proximal::TwoStageFit;

/// Condition number of `A_n` beyond which it is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichResult {
    pub names: Vec<String>,
    pub a_n: DMatrix<f64>,
    pub b_n: DMatrix<f64>,
    pub v_n: DMatrix<f64>,
    /// `sqrt(diag(V_n) / N)` by parameter name.
    pub se: BTreeMap<String, f64>,
    pub beta_a: f64,
    /// Asymptotic standard deviation `sqrt(V_n[j, j])` of the treatment coefficient.
    pub sigma_a: f64,
    pub se_a: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub condition_number: f64,
    pub analytic_jacobian: bool,
    /// `||(1/N) sum Psi||_inf` at the solution.
    pub score_norm: f64,
}

/// Two-sided standard normal critical value for a confidence level.
pub fn normal_quantile(level: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0)
}

/// Sandwich variance `A_n^{-1} B_n A_n^{-T}` of the stacked estimator and the
/// Wald interval for the treatment coefficient.
pub fn sandwich(ds: &Dataset, fit: &TwoStageFit, level: f64) -> Result<SandwichResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} outside (0, 1)")));
    }
    let sys = StackedSystem::new(ds, fit)?;
    let theta = sys.solution(fit);
    let rows = sys.rows(&theta)?;
    let n = sys.n() as f64;
    let score_norm = rows.row_mean().amax();
    let b_n = rows.transpose() * &rows / n;
    let (a_n, analytic) = match sys.jacobian_analytic(&theta) {
        Ok(a) => (a, true),
        Err(Error::UnsupportedJacobian(_)) => (sys.jacobian_numeric_step(&theta, 1e-6)?, false),
        Err(e) => return Err(e),
    };
    let (inv, condition_number) = invert(&a_n);
    let inv = match inv {
        Some(m) if condition_number.is_finite() && condition_number <= SINGULAR_CONDITION => m,
        _ => return Err(Error::SingularJacobian { condition: condition_number }),
    };
    let v = &inv * &b_n * inv.transpose();
    let v_n = (&v + v.transpose()) * 0.5;
    let se: BTreeMap<String, f64> =
        sys.names.iter().enumerate().map(|(j, name)| (name.clone(), (v_n[(j, j)].max(0.0) / n).sqrt())).collect();
    let j = sys.beta_a_index;
    let sigma_a = v_n[(j, j)].max(0.0).sqrt();
    let se_a = sigma_a / n.sqrt();
    let beta_a = theta[j];
    let z = normal_quantile(level);
    Ok(SandwichResult {
        names: sys.names.clone(),
        a_n,
        b_n,
        v_n,
        se,
        beta_a,
        sigma_a,
        se_a,
        ci: (beta_a - z * se_a, beta_a + z * se_a),
        level,
        condition_number,
        analytic_jacobian: analytic,
        score_norm,
    })
}
