//! Standard errors and confidence intervals for the treatment effect.

mod bootstrap;
mod sandwich;
mod stacked;

pub use bootstrap::{bootstrap, quantile_type7, BootstrapResult};
pub use sandwich::{normal_quantile, sandwich, SandwichResult, SINGULAR_CONDITION};
pub use stacked::{jacobian_analytic, jacobian_numeric, stacked_score, StackedSystem};
