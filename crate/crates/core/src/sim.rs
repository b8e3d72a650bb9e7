//! Monte Carlo study of the naive, two-stage and oracle treatment estimators.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, Term, TermSpec, Var};
use crate::datagen::{generate, DgpParams, ErrorDist, PolytomousParams, Scenario};
use crate::error::{Error, Result};
use crate::glm::{fit_glm, Link};
use crate::inference::{bootstrap, normal_quantile, sandwich};
use crate::linalg::invert;
use crate::multinomial::{fit_multinomial, multinomial_information};
use crate::proximal::{fit_two_stage, ModelSpec, OutcomeLink, Procedure};
use crate::seed::derive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMethod {
    Bootstrap,
    Sandwich,
    Both,
}

impl std::str::FromStr for VarianceMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bootstrap" => Ok(VarianceMethod::Bootstrap),
            "sandwich" => Ok(VarianceMethod::Sandwich),
            "both" => Ok(VarianceMethod::Both),
            _ => Err(Error::InvalidConfig(format!("unknown variance method `{s}`"))),
        }
    }
}

/// Regression used by the naive estimator `Y ~ A + W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NaiveForm {
    /// GLM with the outcome link.
    #[default]
    Glm,
    /// Ordinary least squares.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub dgp: DgpParams,
    pub scenario: Scenario,
    pub y_link: OutcomeLink,
    pub w_link: OutcomeLink,
    pub first_stage_terms: Vec<String>,
    pub second_stage_terms: Vec<String>,
    pub interactions: bool,
    pub restrict_symmetry: bool,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub ci_level: f64,
    pub variance_method: VarianceMethod,
    pub naive: NaiveForm,
    pub master_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig::ss_default()
    }
}

impl StudyConfig {
    /// Binary outcome and proxy study: `N` in {250, 500, 1000, 1500}, 500
    /// replications, 300 bootstrap draws.
    pub fn ss_default() -> Self {
        StudyConfig {
            dgp: DgpParams::simulation_study(),
            scenario: Scenario::Binary,
            y_link: OutcomeLink::Logit,
            w_link: OutcomeLink::Logit,
            first_stage_terms: vec!["a".into(), "z".into(), "a:z".into()],
            second_stage_terms: vec!["a".into()],
            interactions: false,
            restrict_symmetry: false,
            sample_sizes: vec![250, 500, 1000, 1500],
            replications: 500,
            bootstrap_b: 300,
            ci_level: 0.95,
            variance_method: VarianceMethod::Bootstrap,
            naive: NaiveForm::Glm,
            master_seed: 20_230_601,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 2 {
            return Err(Error::InvalidConfig("replications must be at least 2".into()));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.iter().any(|&n| n < 10) {
            return Err(Error::InvalidConfig("sample sizes must be at least 10".into()));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidConfig(format!("ci_level {} outside (0, 1)", self.ci_level)));
        }
        if self.variance_method != VarianceMethod::Sandwich && self.bootstrap_b < 2 {
            return Err(Error::InvalidConfig("bootstrap_b must be at least 2".into()));
        }
        // Surfaces invalid structural parameters before any replication runs.
        generate(1, &self.dgp, &self.scenario, 0)?;
        Ok(())
    }

    /// Treatment effect the estimators target (first non-reference level for polytomous outcomes).
    pub fn true_beta_a(&self) -> f64 {
        match &self.scenario {
            Scenario::Polytomous(pp) => pp.beta_a[0],
            _ => self.dgp.beta_a,
        }
    }

    /// The two-stage model for a generated dataset.
    pub fn model_spec(&self, ds: &Dataset) -> Result<ModelSpec> {
        let parse = |v: &[String]| TermSpec::parse(&v.iter().map(String::as_str).collect::<Vec<_>>(), ds);
        Ok(ModelSpec::new(self.y_link, self.w_link, parse(&self.first_stage_terms)?, parse(&self.second_stage_terms)?)
            .interactions(self.interactions)
            .restrict_symmetry(self.restrict_symmetry))
    }

    pub fn estimators(&self) -> Vec<Estimator> {
        let mut v = vec![Estimator::Naive, Estimator::TwoStage];
        if self.variance_method == VarianceMethod::Both {
            v.push(Estimator::TwoStageSandwich);
        }
        v.push(Estimator::Oracle);
        v
    }
}

/// A study whose data-generating process satisfies the structural assumptions
/// of `procedure`: `N = 5000`, 200 replications, sandwich intervals.
///
/// Identity and log designs draw `U = m(A, Z) + eps` with normal `eps`;
/// designs with a logit link use the latent-density construction.
pub fn matched_config(procedure: Procedure) -> StudyConfig {
    use OutcomeLink::*;
    let mut c = StudyConfig::ss_default();
    c.sample_sizes = vec![5000];
    c.replications = 200;
    c.variance_method = VarianceMethod::Sandwich;
    let normal = ErrorDist::Normal { mu: 0.0, sigma: 0.5 };
    let (y, w, interactions, scenario) = match procedure {
        Procedure::P1 => (Identity, Identity, false, Scenario::Collapsible { y: Link::Identity, w: Link::Identity }),
        Procedure::P2 => (Log, Log, false, Scenario::Collapsible { y: Link::Log, w: Link::Log }),
        Procedure::P6 => (Log, Identity, false, Scenario::Collapsible { y: Link::Log, w: Link::Identity }),
        Procedure::P7 => (Identity, Log, false, Scenario::Collapsible { y: Link::Identity, w: Link::Log }),
        Procedure::P3 => (Logit, Logit, false, Scenario::Binary),
        Procedure::P8 => (Logit, Identity, false, Scenario::LogitOutcome { w: Link::Identity }),
        Procedure::P9 => (Logit, Identity, true, Scenario::LogitOutcome { w: Link::Identity }),
        Procedure::P12 => (Logit, Log, false, Scenario::LogitOutcome { w: Link::Log }),
        Procedure::P13 => (Logit, Log, true, Scenario::LogitOutcome { w: Link::Log }),
        Procedure::P10 => (Identity, Logit, false, Scenario::LogitProxy { y: Link::Identity }),
        Procedure::P11 => (Identity, Logit, true, Scenario::LogitProxy { y: Link::Identity }),
        Procedure::P14 => (Log, Logit, false, Scenario::LogitProxy { y: Link::Log }),
        Procedure::P15 => (Log, Logit, true, Scenario::LogitProxy { y: Link::Log }),
        Procedure::Polytomous => (
            Multinomial,
            Multinomial,
            false,
            Scenario::Polytomous(PolytomousParams {
                beta0: vec![-1.0, -1.5],
                beta_a: vec![1.2, 0.8],
                beta_u: vec![-0.7, 0.4],
                alpha0: vec![-0.8, -1.0],
                alpha_u: vec![0.5, 0.4],
                beta_w: vec![vec![0.5, 0.2], vec![0.3, -0.4]],
            }),
        ),
    };
    if matches!(scenario, Scenario::Collapsible { .. }) {
        c.dgp.eps = normal;
    }
    if interactions {
        c.dgp.alpha_uy = 0.3;
        c.dgp.beta_uw = 0.3;
    }
    if matches!(scenario, Scenario::LogitOutcome { .. }) {
        c.dgp.alpha_y = 0.5;
    }
    c.y_link = y;
    c.w_link = w;
    c.interactions = interactions;
    c.scenario = scenario;
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Naive,
    /// Two-stage estimate with bootstrap intervals (sandwich under `VarianceMethod::Sandwich`).
    TwoStage,
    /// Two-stage estimate with sandwich intervals, reported alongside the bootstrap under `VarianceMethod::Both`.
    TwoStageSandwich,
    Oracle,
}

impl Estimator {
    pub fn name(self) -> &'static str {
        match self {
            Estimator::Naive => "naive",
            Estimator::TwoStage => "two_stage",
            Estimator::TwoStageSandwich => "two_stage_sandwich",
            Estimator::Oracle => "oracle",
        }
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Estimator::Naive),
            "two_stage" => Ok(Estimator::TwoStage),
            "two_stage_sandwich" => Ok(Estimator::TwoStageSandwich),
            "oracle" => Ok(Estimator::Oracle),
            _ => Err(Error::InvalidConfig(format!("unknown estimator `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    /// Per-estimator outcome; failures carry the error message.
    pub estimates: BTreeMap<Estimator, std::result::Result<Estimate, String>>,
}

impl ReplicationResult {
    pub fn value(&self, e: Estimator) -> Option<f64> {
        self.estimates.get(&e).and_then(|r| r.as_ref().ok()).map(|x| x.value)
    }
}

/// Seed of replication `rep` at sample size `n`.
pub fn replication_seed(master: u64, n: usize, rep: usize) -> u64 {
    derive(master, &[n as u64, rep as u64])
}

fn wald(value: f64, se: f64, level: f64) -> Estimate {
    let z = normal_quantile(level);
    Estimate { value, se, ci: (value - z * se, value + z * se) }
}

/// `Y ~ second-stage terms + W (+ U)` fitted by maximum likelihood.
fn direct_regression(ds: &Dataset, config: &StudyConfig, with_u: bool, naive_form: NaiveForm) -> Result<Estimate> {
    let mut terms = config.model_spec(ds)?.second_stage_terms;
    match config.w_link {
        OutcomeLink::Multinomial => {
            for k in 1..ds.category_levels(Var::W)? {
                terms.push_unique(Term::var(Var::WLevel(k as u32)));
            }
        }
        _ => terms.push_unique(Term::var(Var::W)),
    }
    if with_u {
        terms.push_unique(Term::var(Var::U));
    }
    let j = terms.position(&Term::var(Var::A)).expect("second stage contains A") + 1;
    let design = build_design(ds, &terms)?;
    let link = match (naive_form, config.y_link) {
        (NaiveForm::Linear, _) => Some(Link::Identity),
        (NaiveForm::Glm, l) => l.glm_link(),
    };
    match link {
        Some(link) => {
            let fit = fit_glm(&design, ds.y(), link, None, None)?;
            let se = fit.std_errors(&design)?;
            Ok(wald(fit.coef[j], se[j], config.ci_level))
        }
        None => {
            let fit = fit_multinomial(&design, ds.y())?;
            let (inv, cond) = invert(&multinomial_information(&design, &fit));
            let inv = inv.ok_or(Error::SingularJacobian { condition: cond })?;
            Ok(wald(fit.coef[(0, j)], inv[(j, j)].sqrt(), config.ci_level))
        }
    }
}

/// One simulated dataset and every estimator on it.
pub fn run_replication(config: &StudyConfig, n: usize, rep: usize) -> Result<ReplicationResult> {
    let seed = replication_seed(config.master_seed, n, rep);
    let ds = generate(n, &config.dgp, &config.scenario, derive(seed, &[0]))?.dataset;
    let mut estimates = BTreeMap::new();
    let record = |r: Result<Estimate>| r.map_err(|e| e.to_string());
    estimates.insert(Estimator::Naive, record(direct_regression(&ds, config, false, config.naive)));
    estimates.insert(Estimator::Oracle, record(direct_regression(&ds, config, true, NaiveForm::Glm)));

    let two_stage = config.model_spec(&ds).and_then(|spec| fit_two_stage(&ds, &spec).map(|f| (spec, f)));
    let boot = |spec: &ModelSpec, value: f64| -> Result<Estimate> {
        let b = bootstrap(&ds, spec, config.bootstrap_b, derive(seed, &[1]), config.ci_level)?;
        Ok(Estimate { value, se: b.se, ci: b.ci })
    };
    let sand = |fit| -> Result<Estimate> {
        let s = sandwich(&ds, fit, config.ci_level)?;
        Ok(Estimate { value: s.beta_a, se: s.se_a, ci: s.ci })
    };
    match &two_stage {
        Ok((spec, fit)) => {
            let value = fit.beta_a[0];
            match config.variance_method {
                VarianceMethod::Bootstrap => {
                    estimates.insert(Estimator::TwoStage, record(boot(spec, value)));
                }
                VarianceMethod::Sandwich => {
                    estimates.insert(Estimator::TwoStage, record(sand(fit)));
                }
                VarianceMethod::Both => {
                    estimates.insert(Estimator::TwoStage, record(boot(spec, value)));
                    estimates.insert(Estimator::TwoStageSandwich, record(sand(fit)));
                }
            }
        }
        Err(e) => {
            for est in [Estimator::TwoStage, Estimator::TwoStageSandwich] {
                if config.estimators().contains(&est) {
                    estimates.insert(est, Err(e.to_string()));
                }
            }
        }
    }
    Ok(ReplicationResult { n, rep, seed, estimates })
}

/// All replications at all sample sizes, in `(N, rep)` order regardless of scheduling.
pub fn run_replications(config: &StudyConfig) -> Result<Vec<ReplicationResult>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> =
        config.sample_sizes.iter().flat_map(|&n| (0..config.replications).map(move |r| (n, r))).collect();
    jobs.into_par_iter().map(|(n, r)| run_replication(config, n, r)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub n: usize,
    pub estimator: Estimator,
    pub bias: f64,
    pub empirical_se: f64,
    pub model_se: f64,
    pub coverage: f64,
    pub failures: usize,
}

impl SimRow {
    /// Monte Carlo standard error of the mean estimate.
    pub fn mc_se(&self, replications: usize) -> f64 {
        self.empirical_se / ((replications - self.failures) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
}

impl SimReport {
    pub fn row(&self, n: usize, e: Estimator) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.n == n && r.estimator == e)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Aggregate replications into one row per `(N, estimator)`; failed estimates are counted, not averaged.
pub fn aggregate(config: &StudyConfig, reps: &[ReplicationResult]) -> SimReport {
    let target = config.true_beta_a();
    let mut rows = Vec::new();
    for &n in &config.sample_sizes {
        for est in config.estimators() {
            let mut ok = Vec::new();
            let mut failures = 0;
            for r in reps.iter().filter(|r| r.n == n) {
                match r.estimates.get(&est) {
                    Some(Ok(e)) => ok.push(e.clone()),
                    _ => failures += 1,
                }
            }
            let values: Vec<f64> = ok.iter().map(|e| e.value).collect();
            let m = mean(&values);
            let sd = if values.len() > 1 {
                (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
            } else {
                f64::NAN
            };
            let ses: Vec<f64> = ok.iter().map(|e| e.se).collect();
            let covered = ok.iter().filter(|e| e.ci.0 <= target && target <= e.ci.1).count();
            rows.push(SimRow {
                n,
                estimator: est,
                bias: m - target,
                empirical_se: sd,
                model_se: mean(&ses),
                coverage: covered as f64 / ok.len() as f64,
                failures,
            });
        }
    }
    SimReport { rows }
}

pub fn run_study(config: &StudyConfig) -> Result<SimReport> {
    let reps = run_replications(config)?;
    Ok(aggregate(config, &reps))
}

pub const CSV_HEADER: [&str; 7] = ["n", "estimator", "bias", "empirical_se", "model_se", "coverage", "failures"];
pub const TABLE_HEADER: [&str; 7] = ["N", "Estimator", "Bias", "Empirical S.E.", "Bootstrap S.E.", "Coverage", "Failures"];

/// CSV rendering with full-precision floats.
pub fn to_csv(report: &SimReport) -> String {
    let mut s = CSV_HEADER.join(",");
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.n,
            r.estimator.name(),
            r.bias,
            r.empirical_se,
            r.model_se,
            r.coverage,
            r.failures
        );
    }
    s
}

pub fn from_csv(text: &str) -> Result<SimReport> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: String::new(), message: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    if header != CSV_HEADER {
        return Err(Error::Parse { row: 0, column: String::new(), message: format!("unexpected header {header:?}") });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse { row, column: String::new(), message: e.to_string() })?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let bad = |k: usize, m: String| Error::Parse { row, column: CSV_HEADER[k].into(), message: m };
        let num = |k: usize| field(k).parse::<f64>().map_err(|e| bad(k, e.to_string()));
        let int = |k: usize| field(k).parse::<usize>().map_err(|e| bad(k, e.to_string()));
        rows.push(SimRow {
            n: int(0)?,
            estimator: field(1).parse().map_err(|e: Error| bad(1, e.to_string()))?,
            bias: num(2)?,
            empirical_se: num(3)?,
            model_se: num(4)?,
            coverage: num(5)?,
            failures: int(6)?,
        });
    }
    Ok(SimReport { rows })
}

/// Aligned plain-text table, two decimals.
pub fn summarize(report: &SimReport) -> String {
    let cells: Vec<[String; 7]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.n.to_string(),
                r.estimator.name().to_string(),
                format!("{:.2}", r.bias),
                format!("{:.2}", r.empirical_se),
                format!("{:.2}", r.model_se),
                format!("{:.2}", r.coverage),
                r.failures.to_string(),
            ]
        })
        .collect();
    let mut width: Vec<usize> = TABLE_HEADER.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |items: Vec<&str>| {
        items.iter().zip(&width).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
    };
    let mut out = line(TABLE_HEADER.to_vec());
    out.push('\n');
    for row in &cells {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_renders_header_only() {
        let r = SimReport::default();
        assert_eq!(to_csv(&r), "n,estimator,bias,empirical_se,model_se,coverage,failures\n");
        assert_eq!(summarize(&r).lines().count(), 1);
        assert_eq!(from_csv(&to_csv(&r)).unwrap(), r);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let r = SimReport {
            rows: vec![
                SimRow { n: 250, estimator: Estimator::TwoStage, bias: 0.1 + 0.2, empirical_se: 1.0 / 3.0, model_se: 0.5, coverage: 0.948, failures: 2 },
                SimRow { n: 1500, estimator: Estimator::Oracle, bias: -1e-17, empirical_se: 0.27, model_se: 0.28, coverage: 1.0, failures: 0 },
            ],
        };
        assert_eq!(from_csv(&to_csv(&r)).unwrap(), r);
    }

    #[test]
    fn config_validation() {
        let mut c = StudyConfig::ss_default();
        c.replications = 1;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::ss_default();
        c.sample_sizes = vec![5];
        assert!(c.validate().is_err());
        let mut c = StudyConfig::ss_default();
        c.dgp.beta_u = 3.0;
        assert!(c.validate().is_err());
        assert!(StudyConfig::ss_default().validate().is_ok());
    }
}
