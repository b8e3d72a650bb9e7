use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::inference::{bootstrap, sandwich, BootstrapResult, SandwichResult};
use crate::proximal::{fit_two_stage, ModelSpec, ProcedurePlan, StageFit, TwoStageFit};
use crate::sim::VarianceMethod;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub se: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub se: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEffect {
    pub estimate: f64,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub first_stage_converged: bool,
    pub first_stage_iterations: usize,
    pub second_stage_converged: bool,
    pub second_stage_iterations: usize,
    /// Scaled condition number of the second-stage design.
    pub design_condition: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobian_condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic_jacobian: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap_failures: Option<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub procedure: String,
    pub plan: ProcedurePlan,
    pub n: usize,
    pub first_stage: Vec<Coefficient>,
    pub second_stage: Vec<Coefficient>,
    pub reduced: BTreeMap<String, f64>,
    pub beta_a: TreatmentEffect,
    pub diagnostics: Diagnostics,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

/// `(label, stacked parameter name, estimate)` for every coefficient of a stage.
fn stage_rows(stage: &StageFit, prefix: &str) -> Vec<(String, String, f64)> {
    let names = stage.names();
    let coef = stage.coef_flat();
    let eqs = stage.n_equations();
    let mut out = Vec::with_capacity(coef.len());
    for k in 0..eqs {
        for (j, n) in names.iter().enumerate() {
            let v = coef[k * names.len() + j];
            match stage {
                StageFit::Glm(_) => out.push((n.clone(), format!("{prefix}[{n}]"), v)),
                StageFit::Multinomial(_) => out.push((format!("{n}@{}", k + 1), format!("{prefix}@{}[{n}]", k + 1), v)),
            }
        }
    }
    out
}

fn coefficients(stage: &StageFit, prefix: &str, sw: Option<&SandwichResult>) -> Vec<Coefficient> {
    let z = sw.map(|s| crate::inference::normal_quantile(s.level));
    stage_rows(stage, prefix)
        .into_iter()
        .map(|(name, key, estimate)| {
            let se = sw.and_then(|s| s.se.get(&key).copied());
            let ci = se.zip(z).map(|(se, z)| (estimate - z * se, estimate + z * se));
            Coefficient { name, estimate, se, ci }
        })
        .collect()
}

/// Assemble the report of a fitted model.
pub fn build_report(
    ds: &Dataset,
    fit: &TwoStageFit,
    sw: Option<&SandwichResult>,
    boot: Option<&BootstrapResult>,
    level: f64,
) -> FitReport {
    FitReport {
        procedure: fit.procedure().id().to_string(),
        plan: fit.plan.clone(),
        n: ds.n(),
        first_stage: coefficients(&fit.first, "alpha", sw),
        second_stage: coefficients(&fit.second, "beta", sw),
        reduced: fit.reduced_coefs.clone(),
        beta_a: TreatmentEffect {
            estimate: fit.beta_a[0],
            level,
            sandwich: sw.map(|s| Interval { se: s.se_a, ci: s.ci }),
            bootstrap: boot.map(|b| Interval { se: b.se, ci: b.ci }),
        },
        diagnostics: Diagnostics {
            first_stage_converged: fit.first.converged(),
            first_stage_iterations: fit.first.iterations(),
            second_stage_converged: fit.second.converged(),
            second_stage_iterations: fit.second.iterations(),
            design_condition: fit.condition_number,
            jacobian_condition: sw.map(|s| s.condition_number),
            analytic_jacobian: sw.map(|s| s.analytic_jacobian),
            score_norm: sw.map(|s| s.score_norm),
            bootstrap_replicates: boot.map(|b| b.b),
            bootstrap_failures: boot.map(|b| b.failures),
            warnings: fit.warnings.clone(),
        },
    }
}

/// Fit and run the requested variance estimators.
pub fn fit_and_report(
    ds: &Dataset,
    spec: &ModelSpec,
    variance: VarianceMethod,
    boot_b: usize,
    seed: u64,
    level: f64,
) -> Result<FitReport> {
    let fit = fit_two_stage(ds, spec)?;
    let sw = match variance {
        VarianceMethod::Sandwich | VarianceMethod::Both => Some(sandwich(ds, &fit, level)?),
        VarianceMethod::Bootstrap => None,
    };
    let boot = match variance {
        VarianceMethod::Bootstrap | VarianceMethod::Both => Some(bootstrap(ds, spec, boot_b, seed, level)?),
        VarianceMethod::Sandwich => None,
    };
    Ok(build_report(ds, &fit, sw.as_ref(), boot.as_ref(), level))
}
