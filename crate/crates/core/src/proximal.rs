//! Two-stage proximal regression: procedure dispatch, first stage, control
//! variable and second stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{build_design, build_design_with, Dataset, Design, DesignContext, Term, TermSpec, Var};
use crate::error::{Error, Result, Stage};
use crate::glm::{fit_glm, GlmFit, Link};
use crate::linalg::scaled_condition_number;
use crate::multinomial::{fit_multinomial, MultinomialFit};

/// Scaled condition number of the second-stage design above which a weak-proxy warning is issued.
pub const WEAK_PROXY_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeLink {
    Identity,
    Log,
    Logit,
    Multinomial,
}

impl OutcomeLink {
    pub fn glm_link(self) -> Option<Link> {
        match self {
            OutcomeLink::Identity => Some(Link::Identity),
            OutcomeLink::Log => Some(Link::Log),
            OutcomeLink::Logit => Some(Link::Logit),
            OutcomeLink::Multinomial => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeLink::Identity => "identity",
            OutcomeLink::Log => "log",
            OutcomeLink::Logit => "logit",
            OutcomeLink::Multinomial => "multinomial",
        }
    }
}

impl fmt::Display for OutcomeLink {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OutcomeLink {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "id" | "linear" => Ok(OutcomeLink::Identity),
            "log" | "poisson" => Ok(OutcomeLink::Log),
            "logit" | "logistic" => Ok(OutcomeLink::Logit),
            "multinomial" | "polytomous" => Ok(OutcomeLink::Multinomial),
            _ => Err(Error::InvalidSpec(format!("unknown link `{s}`"))),
        }
    }
}

/// The user-facing description of a two-stage model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub y_link: OutcomeLink,
    pub w_link: OutcomeLink,
    /// Regressors for the proxy model; `Y` and the interaction expansion are added as the procedure requires.
    pub first_stage_terms: TermSpec,
    /// Treatment and covariates for the outcome model; must contain `A`. `S` and `W` terms are appended.
    pub second_stage_terms: TermSpec,
    pub interactions: bool,
    pub restrict_symmetry: bool,
}

impl ModelSpec {
    pub fn new(y_link: OutcomeLink, w_link: OutcomeLink, first: TermSpec, second: TermSpec) -> Self {
        ModelSpec {
            y_link,
            w_link,
            first_stage_terms: first,
            second_stage_terms: second,
            interactions: false,
            restrict_symmetry: false,
        }
    }

    /// First stage `A + Z... + X...`, second stage `A + X...`.
    pub fn with_default_terms(ds: &Dataset, y_link: OutcomeLink, w_link: OutcomeLink) -> Self {
        let mut first = vec![Term::var(Var::A)];
        first.extend((0..ds.z().len()).map(|j| Term::var(Var::Z(j))));
        first.extend((0..ds.x().len()).map(|j| Term::var(Var::X(j))));
        let mut second = vec![Term::var(Var::A)];
        second.extend((0..ds.x().len()).map(|j| Term::var(Var::X(j))));
        ModelSpec::new(y_link, w_link, TermSpec::new(first), TermSpec::new(second))
    }

    pub fn interactions(mut self, on: bool) -> Self {
        self.interactions = on;
        self
    }

    pub fn restrict_symmetry(mut self, on: bool) -> Self {
        self.restrict_symmetry = on;
        self
    }

    fn validate(&self) -> Result<()> {
        let forbidden = |t: &Term| {
            t.factors()
                .iter()
                .any(|v| matches!(v, Var::Y | Var::W | Var::S | Var::YLevel(_) | Var::WLevel(_)))
        };
        if self.first_stage_terms.terms.iter().any(forbidden) {
            return Err(Error::InvalidSpec(
                "first-stage terms may not reference the outcome, the proxy or S; they are added by the procedure".into(),
            ));
        }
        if self.second_stage_terms.terms.iter().any(forbidden) {
            return Err(Error::InvalidSpec(
                "second-stage terms may not reference the outcome, the proxy or S; they are added by the procedure".into(),
            ));
        }
        if !self.second_stage_terms.contains(&Term::var(Var::A)) {
            return Err(Error::InvalidSpec("second-stage terms must include the treatment".into()));
        }
        if self.restrict_symmetry && !(self.y_link == OutcomeLink::Logit && self.w_link == OutcomeLink::Logit) {
            return Err(Error::InvalidSpec("restrict_symmetry applies only to the logit-logit procedure".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Procedure {
    P1,
    P2,
    P3,
    P6,
    P7,
    P8,
    P9,
    P10,
    P11,
    P12,
    P13,
    P14,
    P15,
    /// Polytomous outcome and/or proxy.
    Polytomous,
}

impl Procedure {
    pub const ALL: [Procedure; 14] = [
        Procedure::P1,
        Procedure::P2,
        Procedure::P3,
        Procedure::P6,
        Procedure::P7,
        Procedure::P8,
        Procedure::P9,
        Procedure::P10,
        Procedure::P11,
        Procedure::P12,
        Procedure::P13,
        Procedure::P14,
        Procedure::P15,
        Procedure::Polytomous,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Procedure::P1 => "P1",
            Procedure::P2 => "P2",
            Procedure::P3 => "P3",
            Procedure::P6 => "P6",
            Procedure::P7 => "P7",
            Procedure::P8 => "P8",
            Procedure::P9 => "P9",
            Procedure::P10 => "P10",
            Procedure::P11 => "P11",
            Procedure::P12 => "P12",
            Procedure::P13 => "P13",
            Procedure::P14 => "P14",
            Procedure::P15 => "P15",
            Procedure::Polytomous => "P4",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// How the control variable is computed from the first-stage fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlFormula {
    /// `E[W | A, Z]`
    MeanW,
    /// `log E[W | A, Z]`
    LogMeanW,
    /// `E[W | A, Z, Y = 1]`
    MeanWAtY1,
    /// `logit P(W = 1 | A, Z, Y = 1)`
    LogitWAtY1,
    /// `logit P(W = 1 | A, Z)`
    LogitW,
    /// `log E[W | A, Z, Y = 1]`
    LogMeanWAtY1,
    /// `sum_k logit P(W = k | A, Z, Y = 0)`
    SumLogitWAtY0,
}

impl ControlFormula {
    pub fn stratum(self) -> Option<f64> {
        match self {
            ControlFormula::MeanWAtY1 | ControlFormula::LogitWAtY1 | ControlFormula::LogMeanWAtY1 => Some(1.0),
            ControlFormula::SumLogitWAtY0 => Some(0.0),
            _ => None,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ControlFormula::MeanW => "E[W|A,Z]",
            ControlFormula::LogMeanW => "log E[W|A,Z]",
            ControlFormula::MeanWAtY1 => "E[W|A,Z,Y=1]",
            ControlFormula::LogitWAtY1 => "logit P(W=1|A,Z,Y=1)",
            ControlFormula::LogitW => "logit P(W=1|A,Z)",
            ControlFormula::LogMeanWAtY1 => "log E[W|A,Z,Y=1]",
            ControlFormula::SumLogitWAtY0 => "sum_k logit P(W=k|A,Z,Y=0)",
        }
    }
}

/// Extra second-stage regressors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Extra {
    /// The proxy (level indicators when polytomous).
    W,
    /// The product `S * W`.
    SW,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcedurePlan {
    pub procedure: Procedure,
    pub include_y_in_first_stage: bool,
    pub s_formula: ControlFormula,
    /// Value `Y` is fixed to when evaluating `S`.
    pub y_stratum: Option<f64>,
    pub second_stage_extra: Vec<Extra>,
    /// `alpha_y * W` enters the second stage as an offset.
    pub second_stage_offset: bool,
    /// Seven-term `A, Z, Y` interaction expansion in the first stage.
    pub interaction_expansion: bool,
    pub first_link: OutcomeLink,
    pub second_link: OutcomeLink,
}

fn unsupported(spec: &ModelSpec, hint: &str) -> Error {
    Error::UnsupportedCell { y: spec.y_link.to_string(), w: spec.w_link.to_string(), hint: hint.to_string() }
}

/// Map a model specification to its estimation procedure.
pub fn resolve_plan(spec: &ModelSpec) -> Result<ProcedurePlan> {
    use ControlFormula as F;
    use OutcomeLink::*;
    use Procedure as P;
    spec.validate()?;
    let int = spec.interactions;
    let (procedure, s_formula, extra) = match (spec.y_link, spec.w_link) {
        (Identity, Identity) => (P::P1, F::MeanW, vec![]),
        (Log, Log) => (P::P2, F::LogMeanW, vec![]),
        (Logit, Logit) if spec.restrict_symmetry => (P::P3, F::LogitWAtY1, vec![]),
        (Logit, Logit) => (P::P3, F::LogitWAtY1, vec![Extra::W]),
        (Log, Identity) => (P::P6, F::MeanW, vec![]),
        (Identity, Log) => (P::P7, F::LogMeanW, vec![]),
        (Logit, Identity) => (if int { P::P9 } else { P::P8 }, F::MeanWAtY1, vec![]),
        (Identity, Logit) if int => (P::P11, F::LogitW, vec![Extra::W, Extra::SW]),
        (Identity, Logit) => (P::P10, F::LogitW, vec![Extra::W]),
        (Logit, Log) => (if int { P::P13 } else { P::P12 }, F::LogMeanWAtY1, vec![]),
        (Log, Logit) if int => (P::P15, F::LogitW, vec![Extra::W, Extra::SW]),
        (Log, Logit) => (P::P14, F::LogitW, vec![Extra::W]),
        (Logit | Multinomial, Multinomial) | (Multinomial, Logit) => (P::Polytomous, F::SumLogitWAtY0, vec![Extra::W]),
        (Multinomial, Identity | Log) => {
            return Err(unsupported(spec, "a multinomial outcome needs a logit or multinomial proxy (polytomous procedure)"))
        }
        (Identity | Log, Multinomial) => {
            return Err(unsupported(spec, "a multinomial proxy needs a logit or multinomial outcome (polytomous procedure)"))
        }
    };
    if int {
        match procedure {
            P::P1 | P::P2 | P::P6 | P::P7 => {
                return Err(unsupported(spec, "no interaction variant exists for identity/log pairs; drop --interactions"))
            }
            P::P3 => {
                return Err(unsupported(
                    spec,
                    "the logit-logit interaction variant is not supported; use the no-interaction logit-logit procedure",
                ))
            }
            P::Polytomous => {
                return Err(unsupported(spec, "the polytomous procedure has no interaction variant; drop --interactions"))
            }
            _ => {}
        }
    }
    let y_stratum = s_formula.stratum();
    Ok(ProcedurePlan {
        procedure,
        include_y_in_first_stage: y_stratum.is_some(),
        s_formula,
        y_stratum,
        second_stage_extra: extra,
        second_stage_offset: spec.restrict_symmetry,
        interaction_expansion: matches!(procedure, P::P9 | P::P13),
        first_link: spec.w_link,
        second_link: spec.y_link,
    })
}

/// A fitted first- or second-stage model.
#[derive(Debug, Clone, PartialEq)]
pub enum StageFit {
    Glm(GlmFit),
    Multinomial(MultinomialFit),
}

impl StageFit {
    /// Coefficients, flattened level by level for multinomial fits.
    pub fn coef_flat(&self) -> Vec<f64> {
        match self {
            StageFit::Glm(f) => f.coef.clone(),
            StageFit::Multinomial(f) => f.coef_flat(),
        }
    }

    pub fn names(&self) -> &[String] {
        match self {
            StageFit::Glm(f) => &f.names,
            StageFit::Multinomial(f) => &f.names,
        }
    }

    /// Number of non-reference outcome levels (1 for a GLM).
    pub fn n_equations(&self) -> usize {
        match self {
            StageFit::Glm(_) => 1,
            StageFit::Multinomial(f) => f.levels - 1,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            StageFit::Glm(f) => f.converged,
            StageFit::Multinomial(f) => f.converged,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            StageFit::Glm(f) => f.iterations,
            StageFit::Multinomial(f) => f.iterations,
        }
    }

    pub fn coef_of(&self, column: usize, level: usize) -> f64 {
        match self {
            StageFit::Glm(f) => f.coef[column],
            StageFit::Multinomial(f) => f.coef[(level, column)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageFit {
    pub plan: ProcedurePlan,
    pub first: StageFit,
    pub s: Vec<f64>,
    pub second: StageFit,
    /// Treatment coefficient, one per non-reference outcome level.
    pub beta_a: Vec<f64>,
    pub reduced_coefs: BTreeMap<String, f64>,
    /// First-stage regressors as fitted (procedure additions included).
    pub first_terms: TermSpec,
    /// Second-stage regressors as fitted (`S` and extras included).
    pub second_terms: TermSpec,
    /// Fitted `alpha_y` used as the offset coefficient, when the offset is active.
    pub offset_coef: Option<f64>,
    /// Scaled condition number of the second-stage design.
    pub condition_number: f64,
    pub warnings: Vec<String>,
}

impl TwoStageFit {
    pub fn procedure(&self) -> Procedure {
        self.plan.procedure
    }
}

fn polytomous_levels(ds: &Dataset, var: Var, link: OutcomeLink) -> Result<usize> {
    let levels = ds.category_levels(var)?;
    if link == OutcomeLink::Logit && levels != 2 {
        return Err(Error::InvalidData(format!("`{}` must be binary for the logit link", ds.var_name(var))));
    }
    if levels < 2 {
        return Err(Error::InvalidData(format!("`{}` has a single category", ds.var_name(var))));
    }
    Ok(levels)
}

/// First-stage regressors for `plan`.
pub fn first_stage_terms(ds: &Dataset, plan: &ProcedurePlan, spec: &ModelSpec) -> Result<TermSpec> {
    let mut t = spec.first_stage_terms.clone();
    if plan.include_y_in_first_stage {
        if plan.procedure == Procedure::Polytomous {
            let levels = polytomous_levels(ds, Var::Y, plan.second_link)?;
            for l in 1..levels {
                t.push_unique(Term::var(Var::YLevel(l as u32)));
            }
        } else {
            t.push_unique(Term::var(Var::Y));
        }
    }
    if plan.interaction_expansion {
        for j in 0..ds.z().len() {
            let z = Var::Z(j);
            for vars in [
                &[Var::A][..],
                &[z],
                &[Var::Y],
                &[Var::A, z],
                &[Var::A, Var::Y],
                &[z, Var::Y],
                &[Var::A, z, Var::Y],
            ] {
                t.push_unique(Term::product(vars));
            }
        }
    }
    Ok(t)
}

/// Second-stage regressors for `plan`: the user terms, `S`, then extras.
pub fn second_stage_terms(ds: &Dataset, plan: &ProcedurePlan, spec: &ModelSpec) -> Result<TermSpec> {
    let mut t = spec.second_stage_terms.clone();
    t.terms.push(Term::var(Var::S));
    for e in &plan.second_stage_extra {
        match e {
            Extra::W if plan.procedure == Procedure::Polytomous => {
                let levels = polytomous_levels(ds, Var::W, plan.first_link)?;
                for k in 1..levels {
                    t.terms.push(Term::var(Var::WLevel(k as u32)));
                }
            }
            Extra::W => t.terms.push(Term::var(Var::W)),
            Extra::SW => t.terms.push(Term::product(&[Var::S, Var::W])),
        }
    }
    Ok(t)
}

fn fit_stage(design: &Design, response: &[f64], link: OutcomeLink, offset: Option<&[f64]>) -> Result<StageFit> {
    match link.glm_link() {
        Some(l) => fit_glm(design, response, l, offset, None).map(StageFit::Glm),
        None => {
            if offset.is_some() {
                return Err(Error::InvalidSpec("offsets are not available for multinomial fits".into()));
            }
            fit_multinomial(design, response).map(StageFit::Multinomial)
        }
    }
}

/// Fit the proxy model.
pub fn first_stage(ds: &Dataset, plan: &ProcedurePlan, terms: &TermSpec) -> Result<StageFit> {
    let design = build_design(ds, terms)?;
    fit_stage(&design, ds.w(), plan.first_link, None)
}

/// Evaluate the control variable from a first-stage fit.
pub fn control_variable(first: &StageFit, ds: &Dataset, plan: &ProcedurePlan, terms: &TermSpec) -> Result<Vec<f64>> {
    let overrides: Vec<(Var, f64)> = plan.y_stratum.map(|v| (Var::Y, v)).into_iter().collect();
    let design = build_design_with(ds, terms, DesignContext { overrides: &overrides, s: None })?;
    let s = match first {
        StageFit::Glm(f) => design.linear_predictor(&f.coef, None)?,
        StageFit::Multinomial(f) => {
            let mut s = vec![0.0; ds.n()];
            for k in 0..f.levels - 1 {
                let row: Vec<f64> = f.coef.row(k).iter().cloned().collect();
                for (acc, e) in s.iter_mut().zip(design.linear_predictor(&row, None)?) {
                    *acc += e;
                }
            }
            s
        }
    };
    if let Some(row) = s.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteControl { row: row + 1 });
    }
    Ok(s)
}

/// Position of the `Y` main effect among first-stage design columns.
pub(crate) fn alpha_y_column(first_terms: &TermSpec) -> Option<usize> {
    first_terms.position(&Term::var(Var::Y)).map(|j| j + 1)
}

/// Fit the outcome model given the control variable.
pub fn second_stage(
    ds: &Dataset,
    s: &[f64],
    plan: &ProcedurePlan,
    terms: &TermSpec,
    offset_coef: Option<f64>,
) -> Result<(StageFit, Design)> {
    let design = build_design_with(ds, terms, DesignContext { overrides: &[], s: Some(s) })?;
    let offset: Option<Vec<f64>> = match (plan.second_stage_offset, offset_coef) {
        (true, Some(c)) => Some(ds.w().iter().map(|w| c * w).collect()),
        (true, None) => return Err(Error::InvalidSpec("offset requested without a Y coefficient".into())),
        _ => None,
    };
    let fit = fit_stage(&design, ds.y(), plan.second_link, offset.as_deref())?;
    Ok((fit, design))
}

fn reduced_name(term: Option<&Term>, ds: &Dataset) -> String {
    match term {
        None => "beta0_star".into(),
        Some(t) if t.is(Var::A) => "beta_a".into(),
        Some(t) if t.is(Var::S) => "beta_u_star".into(),
        Some(t) if t.is(Var::W) => "beta_w_tilde".into(),
        Some(t) if t.contains(Var::S) && t.contains(Var::W) && t.factors().len() == 2 => "beta_uw_star".into(),
        Some(Term(v)) if v.len() == 1 && matches!(v[0], Var::WLevel(_)) => {
            let Var::WLevel(k) = v[0] else { unreachable!() };
            format!("beta_w_tilde[{k}]")
        }
        Some(t) => format!("beta[{}]", t.name(ds)),
    }
}

/// Run all stages with an explicit plan.
pub fn fit_two_stage_with_plan(ds: &Dataset, spec: &ModelSpec, plan: ProcedurePlan) -> Result<TwoStageFit> {
    let first_terms = first_stage_terms(ds, &plan, spec).map_err(|e| e.at(Stage::First))?;
    let first = first_stage(ds, &plan, &first_terms).map_err(|e| e.at(Stage::First))?;
    let s = control_variable(&first, ds, &plan, &first_terms).map_err(|e| e.at(Stage::Control))?;
    let offset_coef = if plan.second_stage_offset {
        let j = alpha_y_column(&first_terms)
            .ok_or_else(|| Error::InvalidSpec("offset needs Y in the first stage".into()).at(Stage::Second))?;
        Some(first.coef_of(j, 0))
    } else {
        None
    };
    let second_terms = second_stage_terms(ds, &plan, spec).map_err(|e| e.at(Stage::Second))?;
    let (second, design) =
        second_stage(ds, &s, &plan, &second_terms, offset_coef).map_err(|e| e.at(Stage::Second))?;

    let a_col = second_terms.position(&Term::var(Var::A)).expect("validated") + 1;
    let levels = second.n_equations();
    let beta_a: Vec<f64> = (0..levels).map(|l| second.coef_of(a_col, l)).collect();

    let mut reduced = BTreeMap::new();
    for l in 0..levels {
        let suffix = if matches!(second, StageFit::Multinomial(_)) { format!("@{}", l + 1) } else { String::new() };
        for j in 0..design.ncols() {
            let term = if j == 0 { None } else { Some(&second_terms.terms[j - 1]) };
            reduced.insert(format!("{}{suffix}", reduced_name(term, ds)), second.coef_of(j, l));
        }
        if let Some(c) = offset_coef {
            reduced.insert(format!("beta_w_tilde{suffix}"), c);
        }
    }

    let condition_number = scaled_condition_number(&design.matrix);
    let mut warnings = Vec::new();
    if condition_number > WEAK_PROXY_CONDITION {
        warnings.push(format!(
            "second-stage design is near-collinear (scaled condition number {condition_number:.3e}); the proxies may be weakly relevant"
        ));
    }

    Ok(TwoStageFit {
        plan,
        first,
        s,
        second,
        beta_a,
        reduced_coefs: reduced,
        first_terms,
        second_terms,
        offset_coef,
        condition_number,
        warnings,
    })
}

/// Resolve the procedure and run both stages.
pub fn fit_two_stage(ds: &Dataset, spec: &ModelSpec) -> Result<TwoStageFit> {
    let plan = resolve_plan(spec)?;
    fit_two_stage_with_plan(ds, spec, plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use OutcomeLink::*;

    fn spec_for(y: OutcomeLink, w: OutcomeLink) -> ModelSpec {
        ModelSpec::new(y, w, TermSpec::new(vec![Term::var(Var::A), Term::var(Var::Z(0))]), TermSpec::new(vec![Term::var(Var::A)]))
    }

    #[test]
    fn plan_table() {
        let p = resolve_plan(&spec_for(Identity, Identity)).unwrap();
        assert_eq!(p.procedure, Procedure::P1);
        assert_eq!(p.s_formula, ControlFormula::MeanW);
        assert!(!p.include_y_in_first_stage && p.second_stage_extra.is_empty());

        let p = resolve_plan(&spec_for(Logit, Logit)).unwrap();
        assert_eq!(p.procedure, Procedure::P3);
        assert!(p.include_y_in_first_stage);
        assert_eq!(p.second_stage_extra, vec![Extra::W]);
        assert!(!p.second_stage_offset);

        let p = resolve_plan(&spec_for(Logit, Logit).restrict_symmetry(true)).unwrap();
        assert!(p.second_stage_offset && p.second_stage_extra.is_empty());

        let p = resolve_plan(&spec_for(Identity, Logit).interactions(true)).unwrap();
        assert_eq!(p.procedure, Procedure::P11);
        assert_eq!(p.second_stage_extra, vec![Extra::W, Extra::SW]);

        let expected = [
            ((Log, Log, false), Procedure::P2),
            ((Log, Identity, false), Procedure::P6),
            ((Identity, Log, false), Procedure::P7),
            ((Logit, Identity, false), Procedure::P8),
            ((Logit, Identity, true), Procedure::P9),
            ((Identity, Logit, false), Procedure::P10),
            ((Logit, Log, false), Procedure::P12),
            ((Logit, Log, true), Procedure::P13),
            ((Log, Logit, false), Procedure::P14),
            ((Log, Logit, true), Procedure::P15),
            ((Logit, Multinomial, false), Procedure::Polytomous),
            ((Multinomial, Multinomial, false), Procedure::Polytomous),
            ((Multinomial, Logit, false), Procedure::Polytomous),
        ];
        for ((y, w, int), proc_) in expected {
            let p = resolve_plan(&spec_for(y, w).interactions(int)).unwrap();
            assert_eq!(p.procedure, proc_, "{y} {w} {int}");
            assert_eq!(p.include_y_in_first_stage, p.s_formula.stratum().is_some());
            if p.second_stage_extra.contains(&Extra::SW) {
                assert!(int && w == Logit);
            }
        }
    }

    #[test]
    fn rejected_cells() {
        for (y, w) in [(Identity, Identity), (Log, Log), (Log, Identity), (Identity, Log), (Logit, Logit)] {
            assert!(matches!(resolve_plan(&spec_for(y, w).interactions(true)), Err(Error::UnsupportedCell { .. })));
        }
        assert!(matches!(resolve_plan(&spec_for(Multinomial, Identity)), Err(Error::UnsupportedCell { .. })));
        assert!(resolve_plan(&spec_for(Identity, Identity).restrict_symmetry(true)).is_err());
    }

    #[test]
    fn control_variable_examples() {
        let ds = Dataset::new(vec![0.0], vec![0.0], vec![0.0], vec![vec![0.0]], vec![]).unwrap();
        let terms = TermSpec::new(vec![Term::var(Var::A), Term::var(Var::Z(0))]);
        let fit = |coef: Vec<f64>| {
            StageFit::Glm(crate::glm::tests_support::with_coef(coef))
        };
        let p1 = resolve_plan(&spec_for(Identity, Identity)).unwrap();
        assert_eq!(control_variable(&fit(vec![1., 2., 3.]), &ds, &p1, &terms).unwrap(), vec![1.0]);
        let p3 = resolve_plan(&spec_for(Logit, Logit)).unwrap();
        let mut t3 = terms.clone();
        t3.push_unique(Term::var(Var::Y));
        let s = control_variable(&fit(vec![0.5, 1., -1., 0.2]), &ds, &p3, &t3).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-15);
    }
}
