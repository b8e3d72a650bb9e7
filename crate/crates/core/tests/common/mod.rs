//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    Gaussian,
    Poisson,
    Binomial,
}

fn inv(f: Family, eta: f64) -> f64 {
    match f {
        Family::Gaussian => eta,
        Family::Poisson => eta.exp(),
        Family::Binomial => 1.0 / (1.0 + (-eta).exp()),
    }
}

fn var(f: Family, mu: f64) -> f64 {
    match f {
        Family::Gaussian => 1.0,
        Family::Poisson => mu,
        Family::Binomial => mu * (1.0 - mu),
    }
}

/// Plain Newton-Raphson on the canonical-link log likelihood, LU solves, no safeguards.
pub fn newton_glm(x: &DMatrix<f64>, y: &[f64], family: Family, offset: Option<&[f64]>) -> DVector<f64> {
    let (n, p) = x.shape();
    let mut beta = DVector::zeros(p);
    if family == Family::Poisson {
        let m = y.iter().sum::<f64>() / n as f64;
        beta[0] = m.max(1e-3).ln();
    }
    for _ in 0..200 {
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let eta = xi.dot(&beta) + offset.map_or(0.0, |o| o[i]);
            let mu = inv(family, eta);
            grad += &xi * (y[i] - mu);
            hess += &xi * xi.transpose() * var(family, mu);
        }
        let step = hess.lu().solve(&grad).expect("nonsingular information");
        beta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    beta
}

/// Newton-Raphson for the baseline-category logit model; returns `K x p` coefficients.
pub fn newton_multinomial(x: &DMatrix<f64>, y: &[f64], levels: usize) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let k = levels - 1;
    let mut theta = DVector::zeros(k * p);
    for _ in 0..200 {
        let mut grad = DVector::zeros(k * p);
        let mut hess = DMatrix::zeros(k * p, k * p);
        for i in 0..n {
            let xi = x.row(i).transpose();
            let etas: Vec<f64> = (0..k).map(|a| xi.dot(&theta.rows(a * p, p))).collect();
            let denom = 1.0 + etas.iter().map(|e| e.exp()).sum::<f64>();
            let pr: Vec<f64> = etas.iter().map(|e| e.exp() / denom).collect();
            for a in 0..k {
                let ya = if y[i] as usize == a + 1 { 1.0 } else { 0.0 };
                let mut g = grad.rows_mut(a * p, p);
                g += &xi * (ya - pr[a]);
                for b in 0..k {
                    let w = if a == b { pr[a] * (1.0 - pr[a]) } else { -pr[a] * pr[b] };
                    let mut h = hess.view_mut((a * p, b * p), (p, p));
                    h += &xi * xi.transpose() * w;
                }
            }
        }
        let step = hess.lu().solve(&grad).expect("nonsingular information");
        theta += &step;
        if step.amax() < 1e-13 {
            break;
        }
    }
    DMatrix::from_fn(k, p, |a, j| theta[a * p + j])
}

/// Design `[1, cols...]`.
pub fn design(cols: &[&[f64]]) -> DMatrix<f64> {
    let n = cols[0].len();
    let mut m = DMatrix::from_element(n, cols.len() + 1, 1.0);
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j + 1, &DVector::from_column_slice(c));
    }
    m
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
