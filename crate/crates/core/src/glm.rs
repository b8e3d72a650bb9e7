//! Generalized linear models with canonical links, fitted by IRLS.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{build_design_with, Dataset, Design, DesignContext, TermSpec, Var};
use crate::error::{Error, Result};
use crate::linalg::PivotedQr;

/// Probabilities from the logit link are clamped to `[LOGIT_CLAMP, 1 - LOGIT_CLAMP]`.
pub const LOGIT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Link {
    Identity,
    Log,
    Logit,
}

impl Link {
    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
            Link::Logit => expit(eta).clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP),
        }
    }

    /// `d mu / d eta`, expressed through `mu`; also the canonical variance function.
    pub fn mu_eta(self, mu: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => mu,
            Link::Logit => mu * (1.0 - mu),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Log => "log",
            Link::Logit => "logit",
        }
    }

    fn check_response(self, y: &[f64]) -> Result<()> {
        for (i, &v) in y.iter().enumerate() {
            let ok = match self {
                Link::Identity => v.is_finite(),
                Link::Log => v >= 0.0 && v.fract() == 0.0,
                Link::Logit => v == 0.0 || v == 1.0,
            };
            if !ok {
                let want = match self {
                    Link::Identity => "finite values",
                    Link::Log => "nonnegative integer counts",
                    Link::Logit => "values in {0, 1}",
                };
                return Err(Error::InvalidData(format!(
                    "{} link needs {want}; found {v} at row {}",
                    self.name(),
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn unit_deviance(self, y: f64, mu: f64) -> f64 {
        match self {
            Link::Identity => (y - mu) * (y - mu),
            Link::Log => {
                let t = if y > 0.0 { y * (y / mu).ln() } else { 0.0 };
                2.0 * (t - (y - mu))
            }
            Link::Logit => -2.0 * (y * mu.ln() + (1.0 - y) * (1.0 - mu).ln()),
        }
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerically stable logistic function.
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn inverse_link(link: Link, eta: f64) -> f64 {
    link.inverse(eta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub deviance_tol: f64,
    pub score_tol: f64,
    pub max_halvings: usize,
    /// `|eta|` beyond which a logistic fit is declared separated.
    pub separation_eta: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { max_iter: 100, deviance_tol: 1e-8, score_tol: 1e-8, max_halvings: 20, separation_eta: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub link: Link,
    pub coef: Vec<f64>,
    pub names: Vec<String>,
    pub eta: Vec<f64>,
    pub mu: Vec<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    /// `(1/n) ||X^T W0 (y - mu)||_inf` at the returned coefficients.
    pub score_norm: f64,
    prior: Option<Vec<f64>>,
}

impl GlmFit {
    /// Dispersion: residual variance for the identity link, 1 otherwise.
    pub fn dispersion(&self) -> f64 {
        match self.link {
            Link::Identity => {
                let n = self.mu.len();
                let p = self.coef.len();
                if n <= p {
                    return f64::NAN;
                }
                self.deviance / (n - p) as f64
            }
            _ => 1.0,
        }
    }

    /// Model-based covariance `phi (X^T W X)^{-1}` from the Fisher information.
    pub fn covariance(&self, design: &Design) -> Result<DMatrix<f64>> {
        if design.ncols() != self.coef.len() || design.nrows() != self.mu.len() {
            return Err(Error::DimensionMismatch("design does not match the fit".into()));
        }
        let mut xw = design.matrix.clone();
        for i in 0..xw.nrows() {
            let w0 = self.prior.as_ref().map_or(1.0, |p| p[i]);
            let w = (w0 * self.link.mu_eta(self.mu[i])).sqrt();
            xw.row_mut(i).scale_mut(w);
        }
        let qr = PivotedQr::new(xw);
        if !qr.is_full_rank() {
            return Err(rank_error(&qr, design));
        }
        Ok(qr.inverse_gram() * self.dispersion())
    }

    /// Model-based standard errors.
    pub fn std_errors(&self, design: &Design) -> Result<Vec<f64>> {
        let c = self.covariance(design)?;
        Ok((0..c.nrows()).map(|j| c[(j, j)].sqrt()).collect())
    }
}

fn rank_error(qr: &PivotedQr, design: &Design) -> Error {
    Error::RankDeficient { columns: qr.deficient_columns().into_iter().map(|j| design.names[j].clone()).collect() }
}

fn deviance(link: Link, y: &[f64], mu: &[f64], prior: Option<&[f64]>) -> f64 {
    y.iter()
        .zip(mu)
        .enumerate()
        .map(|(i, (&y, &m))| prior.map_or(1.0, |p| p[i]) * link.unit_deviance(y, m))
        .sum()
}

fn score_norm(x: &DMatrix<f64>, y: &[f64], mu: &[f64], prior: Option<&[f64]>) -> f64 {
    let n = y.len();
    let r: Vec<f64> = (0..n).map(|i| prior.map_or(1.0, |p| p[i]) * (y[i] - mu[i])).collect();
    x.column_iter()
        .map(|c| c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>().abs())
        .fold(0.0, f64::max)
        / n as f64
}

/// Weighted least squares of `z` on `x` with weights `w`.
fn wls(x: &DMatrix<f64>, z: &[f64], w: &[f64]) -> (PivotedQr, Vec<f64>) {
    let mut xw = x.clone();
    let mut zw = z.to_vec();
    for i in 0..x.nrows() {
        let s = w[i].sqrt();
        xw.row_mut(i).scale_mut(s);
        zw[i] *= s;
    }
    let qr = PivotedQr::new(xw);
    let beta = if qr.is_full_rank() { qr.solve(&zw) } else { Vec::new() };
    (qr, beta)
}

fn predictor(x: &DMatrix<f64>, beta: &[f64], offset: Option<&[f64]>) -> Vec<f64> {
    let mut eta = offset.map_or_else(|| vec![0.0; x.nrows()], |o| o.to_vec());
    for (j, &b) in beta.iter().enumerate() {
        for (e, v) in eta.iter_mut().zip(x.column(j).iter()) {
            *e += b * v;
        }
    }
    eta
}

/// Fit a GLM with default options.
pub fn fit_glm(
    design: &Design,
    response: &[f64],
    link: Link,
    offset: Option<&[f64]>,
    weights: Option<&[f64]>,
) -> Result<GlmFit> {
    fit_glm_with(design, response, link, offset, weights, &FitOptions::default())
}

/// Maximum-likelihood fit by IRLS, starting from zero coefficients, with
/// step-halving whenever the deviance increases.
pub fn fit_glm_with(
    design: &Design,
    response: &[f64],
    link: Link,
    offset: Option<&[f64]>,
    weights: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<GlmFit> {
    let x = &design.matrix;
    let (n, p) = x.shape();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!("response has {} rows, design has {n}", response.len())));
    }
    for (what, v) in [("offset", offset), ("weights", weights)] {
        if let Some(v) = v {
            if v.len() != n {
                return Err(Error::DimensionMismatch(format!("{what} has {} rows, design has {n}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidData(format!("non-finite {what}")));
            }
        }
    }
    if let Some(w) = weights {
        if w.iter().any(|&x| x < 0.0) {
            return Err(Error::InvalidData("negative prior weight".into()));
        }
    }
    link.check_response(response)?;
    let prior = weights;
    let w0: Vec<f64> = prior.map_or_else(|| vec![1.0; n], |w| w.to_vec());

    let zero_off = vec![0.0; n];
    let off = offset.unwrap_or(&zero_off);

    let finish = |coef: Vec<f64>, iterations: usize| -> Result<GlmFit> {
        let eta = predictor(x, &coef, offset);
        let mu: Vec<f64> = eta.iter().map(|&e| link.inverse(e)).collect();
        let dev = deviance(link, response, &mu, prior);
        let score = score_norm(x, response, &mu, prior);
        Ok(GlmFit {
            link,
            coef,
            names: design.names.clone(),
            eta,
            mu,
            deviance: dev,
            converged: true,
            iterations,
            score_norm: score,
            prior: prior.map(|w| w.to_vec()),
        })
    };

    if link == Link::Identity {
        let z: Vec<f64> = response.iter().zip(off).map(|(y, o)| y - o).collect();
        let (qr, beta) = wls(x, &z, &w0);
        if !qr.is_full_rank() {
            return Err(rank_error(&qr, design));
        }
        return finish(beta, 1);
    }

    {
        let mut xw = x.clone();
        for i in 0..n {
            xw.row_mut(i).scale_mut(w0[i].sqrt());
        }
        let qr = PivotedQr::new(xw);
        if !qr.is_full_rank() {
            return Err(rank_error(&qr, design));
        }
    }

    let scale = x.iter().fold(1.0_f64, |m, v| m.max(v.abs())) * response.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let score_target = opts.score_tol * scale.max(1.0);

    let mut beta = vec![0.0; p];
    let mut eta = predictor(x, &beta, offset);
    let mut mu: Vec<f64> = eta.iter().map(|&e| link.inverse(e)).collect();
    let mut dev = deviance(link, response, &mu, prior);
    let mut stalled = 0;
    let mut converged = false;
    let mut polished = false;
    let mut iterations = 0;
    let separated = |eta: &[f64]| -> Option<f64> {
        if link != Link::Logit {
            return None;
        }
        let m = eta.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
        (m > opts.separation_eta).then_some(m)
    };

    for iter in 1..=opts.max_iter {
        iterations = iter;
        let mut z = vec![0.0; n];
        let mut w = vec![0.0; n];
        for i in 0..n {
            let d = link.mu_eta(mu[i]);
            z[i] = eta[i] - off[i] + (response[i] - mu[i]) / d;
            w[i] = w0[i] * d;
        }
        let (qr, target) = wls(x, &z, &w);
        if !qr.is_full_rank() {
            if let Some(m) = separated(&eta) {
                return Err(Error::Separation { max_eta: m });
            }
            return Err(rank_error(&qr, design));
        }
        let mut t = 1.0;
        let mut halvings = 0;
        let (new_beta, new_eta, new_mu, new_dev) = loop {
            let cand: Vec<f64> = beta.iter().zip(&target).map(|(b, c)| b + t * (c - b)).collect();
            let e = predictor(x, &cand, offset);
            let m: Vec<f64> = e.iter().map(|&v| link.inverse(v)).collect();
            let d = deviance(link, response, &m, prior);
            if d <= dev * (1.0 + 1e-12) + 1e-300 || halvings >= opts.max_halvings {
                break (cand, e, m, d);
            }
            t *= 0.5;
            halvings += 1;
        };
        if !new_dev.is_finite() {
            return Err(Error::NonConvergence { iterations: iter });
        }
        let rel = (dev - new_dev).abs() / (new_dev.abs() + 0.1);
        beta = new_beta;
        eta = new_eta;
        mu = new_mu;
        dev = new_dev;
        let score = score_norm(x, response, &mu, prior);
        if score <= opts.score_tol {
            converged = true;
            if polished {
                break;
            }
            polished = true;
            continue;
        }
        if rel <= opts.deviance_tol {
            stalled += 1;
            if stalled >= 2 {
                converged = score <= score_target;
                break;
            }
        } else {
            stalled = 0;
        }
    }

    if let Some(m) = separated(&eta) {
        return Err(Error::Separation { max_eta: m });
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    finish(beta, iterations)
}

/// Linear predictor for the rows of `ds` under `spec`, with variables fixed
/// by `overrides` before products are formed.
pub fn predict_eta(
    coef: &[f64],
    ds: &Dataset,
    spec: &TermSpec,
    overrides: &[(Var, f64)],
    offset: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let d = build_design_with(ds, spec, DesignContext { overrides, s: None })?;
    d.linear_predictor(coef, offset)
}


#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub fn with_coef(coef: Vec<f64>) -> GlmFit {
        GlmFit {
            link: Link::Identity,
            coef,
            names: vec![],
            eta: vec![],
            mu: vec![],
            deviance: 0.0,
            converged: true,
            iterations: 1,
            score_norm: 0.0,
            prior: None,
        }
    }
}
