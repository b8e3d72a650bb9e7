//! Two-stage regression estimators for proximal causal inference.
//!
//! A first-stage GLM for the outcome proxy `W` yields a control variable `S`
//! that stands in for the unmeasured confounder `U`; a second-stage GLM for
//! the outcome `Y` on `(A, S, ...)` then recovers the treatment effect `beta_a`.
//! Identity, log and logit links are supported in every combination, plus a
//! baseline-category multinomial variant.

pub mod cli;
pub mod data;
pub mod datagen;
pub mod error;
pub mod glm;
pub mod inference;
mod linalg;
pub mod multinomial;
pub mod proximal;
pub mod seed;
pub mod sim;

pub use data::{build_design, build_design_with, Dataset, Design, Term, TermSpec, Var};
pub use error::{Error, Result, Stage};
pub use glm::{fit_glm, inverse_link, predict_eta, GlmFit, Link};
pub use multinomial::{fit_multinomial, MultinomialFit};
pub use proximal::{fit_two_stage, resolve_plan, ModelSpec, OutcomeLink, ProcedurePlan, TwoStageFit};
