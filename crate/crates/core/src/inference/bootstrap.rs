use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::proximal::{fit_two_stage_with_plan, resolve_plan, ModelSpec};
use crate::seed::derive;

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// Requested number of replicates.
    pub b: usize,
    /// Treatment estimates of the successful replicates, in replicate order.
    pub estimates: Vec<f64>,
    pub se: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub failures: usize,
}

/// Quantile with linear interpolation between order statistics (Hyndman-Fan type 7).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn sample_sd(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = x.iter().sum::<f64>() / n as f64;
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Nonparametric bootstrap of the first-level treatment coefficient by
/// resampling whole rows. Replicate `r` draws from a generator seeded with
/// `derive(seed, [r])`, so the result does not depend on scheduling.
pub fn bootstrap(ds: &Dataset, spec: &ModelSpec, b: usize, seed: u64, level: f64) -> Result<BootstrapResult> {
    if b < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least two replicates".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!("confidence level {level} outside (0, 1)")));
    }
    let plan = resolve_plan(spec)?;
    let n = ds.n();
    let draws: Vec<Option<f64>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[r as u64]));
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let rs = ds.select_rows(&idx);
            fit_two_stage_with_plan(&rs, spec, plan.clone()).ok().map(|f| f.beta_a[0])
        })
        .collect();
    let estimates: Vec<f64> = draws.iter().flatten().cloned().collect();
    let failures = b - estimates.len();
    if failures as f64 > MAX_FAILURE_FRACTION * b as f64 || estimates.len() < 2 {
        return Err(Error::BootstrapUnstable { failed: failures, total: b });
    }
    let mut sorted = estimates.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    Ok(BootstrapResult {
        b,
        se: sample_sd(&estimates),
        ci: (quantile_type7(&sorted, alpha / 2.0), quantile_type7(&sorted, 1.0 - alpha / 2.0)),
        estimates,
        level,
        failures,
    })
}
