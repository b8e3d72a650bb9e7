//! Baseline-category (multinomial) logit regression.

use nalgebra::{DMatrix, DVector};

use crate::data::{category_levels, Design};
use crate::error::{Error, Result};
use crate::glm::FitOptions;
use crate::linalg::{solve_spd, PivotedQr};

#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialFit {
    /// Number of categories `K + 1`.
    pub levels: usize,
    /// `K x p`; row `k - 1` holds the coefficients of level `k` against level 0.
    pub coef: DMatrix<f64>,
    pub names: Vec<String>,
    /// `n x K` linear predictors.
    pub eta: DMatrix<f64>,
    pub deviance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub score_norm: f64,
}

impl MultinomialFit {
    /// Coefficients flattened level by level.
    pub fn coef_flat(&self) -> Vec<f64> {
        let (k, p) = self.coef.shape();
        (0..k).flat_map(|l| (0..p).map(move |j| (l, j))).map(|(l, j)| self.coef[(l, j)]).collect()
    }

    /// `n x (K + 1)` fitted category probabilities.
    pub fn probabilities(&self) -> DMatrix<f64> {
        let n = self.eta.nrows();
        let mut out = DMatrix::zeros(n, self.levels);
        for i in 0..n {
            let row: Vec<f64> = self.eta.row(i).iter().cloned().collect();
            let p = softmax_ref(&row);
            for (k, v) in p.into_iter().enumerate() {
                out[(i, k)] = v;
            }
        }
        out
    }
}

/// Probabilities `(p_0, ..., p_K)` for linear predictors `eta_1..eta_K` against a zero reference.
pub fn softmax_ref(eta: &[f64]) -> Vec<f64> {
    let m = eta.iter().cloned().fold(0.0_f64, f64::max);
    let e0 = (-m).exp();
    let es: Vec<f64> = eta.iter().map(|&e| (e - m).exp()).collect();
    let total = e0 + es.iter().sum::<f64>();
    std::iter::once(e0 / total).chain(es.into_iter().map(|e| e / total)).collect()
}

struct State {
    eta: DMatrix<f64>,
    probs: DMatrix<f64>,
    deviance: f64,
}

fn evaluate(x: &DMatrix<f64>, theta: &[f64], y: &[usize], k: usize) -> State {
    let (n, p) = x.shape();
    let b = DMatrix::from_row_slice(k, p, theta);
    let eta = x * b.transpose();
    let mut probs = DMatrix::zeros(n, k + 1);
    let mut dev = 0.0;
    for i in 0..n {
        let row: Vec<f64> = eta.row(i).iter().cloned().collect();
        let pr = softmax_ref(&row);
        dev -= 2.0 * pr[y[i]].max(f64::MIN_POSITIVE).ln();
        for (c, v) in pr.into_iter().enumerate() {
            probs[(i, c)] = v;
        }
    }
    State { eta, probs, deviance: dev }
}

fn gradient(x: &DMatrix<f64>, y: &[usize], probs: &DMatrix<f64>, k: usize) -> DVector<f64> {
    let (n, p) = x.shape();
    let mut g = DVector::zeros(k * p);
    for l in 0..k {
        for i in 0..n {
            let r = if y[i] == l + 1 { 1.0 } else { 0.0 } - probs[(i, l + 1)];
            for j in 0..p {
                g[l * p + j] += x[(i, j)] * r;
            }
        }
    }
    g
}

fn information(x: &DMatrix<f64>, probs: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let mut info = DMatrix::zeros(k * p, k * p);
    for a in 0..k {
        for b in a..k {
            let mut xw = x.clone();
            for i in 0..n {
                let pa = probs[(i, a + 1)];
                let w = if a == b { pa * (1.0 - pa) } else { -pa * probs[(i, b + 1)] };
                xw.row_mut(i).scale_mut(w);
            }
            let blk = x.transpose() * xw;
            info.view_mut((a * p, b * p), (p, p)).copy_from(&blk);
            if a != b {
                info.view_mut((b * p, a * p), (p, p)).copy_from(&blk.transpose());
            }
        }
    }
    info
}

/// Observed (= expected) information of a multinomial fit, level-major.
pub fn multinomial_information(design: &Design, fit: &MultinomialFit) -> DMatrix<f64> {
    information(&design.matrix, &fit.probabilities(), fit.levels - 1)
}

pub fn fit_multinomial(design: &Design, response: &[f64]) -> Result<MultinomialFit> {
    fit_multinomial_with(design, response, &FitOptions::default())
}

/// Newton's method on the baseline-category logit likelihood with the full
/// `(Kp) x (Kp)` Hessian, from zero coefficients, with step-halving.
pub fn fit_multinomial_with(design: &Design, response: &[f64], opts: &FitOptions) -> Result<MultinomialFit> {
    let x = &design.matrix;
    let (n, p) = x.shape();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!("response has {} rows, design has {n}", response.len())));
    }
    let levels = category_levels(response, "response")?;
    if levels < 2 {
        return Err(Error::InvalidData("multinomial response needs at least two levels".into()));
    }
    let k = levels - 1;
    let qr = PivotedQr::new(x.clone());
    if !qr.is_full_rank() {
        return Err(Error::RankDeficient {
            columns: qr.deficient_columns().into_iter().map(|j| design.names[j].clone()).collect(),
        });
    }
    let y: Vec<usize> = response.iter().map(|&v| v as usize).collect();

    let mut theta = vec![0.0; k * p];
    let mut st = evaluate(x, &theta, &y, k);
    let mut converged = false;
    let mut polished = false;
    let mut iterations = 0;
    let mut stalled = 0;
    let mut score = f64::INFINITY;
    for iter in 1..=opts.max_iter {
        iterations = iter;
        let g = gradient(x, &y, &st.probs, k);
        score = g.amax() / n as f64;
        if score <= opts.score_tol {
            converged = true;
            if polished {
                break;
            }
            polished = true;
        }
        let info = information(x, &st.probs, k);
        let delta = match solve_spd(info, &g) {
            Some(d) => d,
            None => break,
        };
        let mut t = 1.0;
        let mut halvings = 0;
        let (cand, cst) = loop {
            let cand: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + t * d).collect();
            let cst = evaluate(x, &cand, &y, k);
            if cst.deviance <= st.deviance * (1.0 + 1e-12) || halvings >= opts.max_halvings {
                break (cand, cst);
            }
            t *= 0.5;
            halvings += 1;
        };
        if !cst.deviance.is_finite() {
            break;
        }
        let rel = (st.deviance - cst.deviance).abs() / (cst.deviance.abs() + 0.1);
        theta = cand;
        st = cst;
        if rel <= opts.deviance_tol {
            stalled += 1;
            if stalled >= 3 {
                let g = gradient(x, &y, &st.probs, k);
                score = g.amax() / n as f64;
                converged = score <= opts.score_tol * 100.0;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    let max_eta = st.eta.amax();
    if max_eta > opts.separation_eta {
        return Err(Error::Separation { max_eta });
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }
    Ok(MultinomialFit {
        levels,
        coef: DMatrix::from_row_slice(k, p, &theta),
        names: design.names.clone(),
        eta: st.eta,
        deviance: st.deviance,
        converged,
        iterations,
        score_norm: score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::{fit_glm, Link};

    fn intercept(n: usize) -> Design {
        Design { matrix: DMatrix::from_element(n, 1, 1.0), names: vec!["(Intercept)".into()] }
    }

    fn counts(c: &[usize]) -> Vec<f64> {
        c.iter().enumerate().flat_map(|(l, &m)| std::iter::repeat(l as f64).take(m)).collect()
    }

    #[test]
    fn intercept_only_log_count_ratios() {
        let y = counts(&[10, 10, 10]);
        let f = fit_multinomial(&intercept(30), &y).unwrap();
        assert!(f.coef.amax() < 1e-10);
        let y = counts(&[10, 20, 10]);
        let f = fit_multinomial(&intercept(40), &y).unwrap();
        assert!((f.coef[(0, 0)] - 2f64.ln()).abs() < 1e-10);
        assert!(f.coef[(1, 0)].abs() < 1e-10);
    }

    #[test]
    fn binary_case_matches_logistic() {
        let xs = [-1.5, -0.3, 0.2, 0.9, 1.4, -0.8, 0.5, 2.0, -2.2, 0.0];
        let y = [0., 0., 1., 1., 0., 1., 0., 1., 0., 1.];
        let mut m = DMatrix::from_element(10, 2, 1.0);
        for (i, v) in xs.iter().enumerate() {
            m[(i, 1)] = *v;
        }
        let d = Design { matrix: m, names: vec!["(Intercept)".into(), "x".into()] };
        let mf = fit_multinomial(&d, &y).unwrap();
        let gf = fit_glm(&d, &y, Link::Logit, None, None).unwrap();
        for j in 0..2 {
            assert!((mf.coef[(0, j)] - gf.coef[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn unobserved_level_is_an_error() {
        let y = [0., 2., 2.];
        assert!(matches!(fit_multinomial(&intercept(3), &y), Err(Error::UnobservedLevel { level: 1, .. })));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = softmax_ref(&[700.0, -700.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
    }
}
