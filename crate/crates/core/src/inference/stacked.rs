use nalgebra::{DMatrix, DVector};

use crate::data::{build_design, build_design_with, Dataset, DesignContext, Term, Var};
use crate::error::{Error, Result};
use crate::glm::Link;
use crate::multinomial::softmax_ref;
use crate::proximal::{alpha_y_column, StageFit, TwoStageFit};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Block {
    Glm(Link),
    Multinomial(usize),
}

impl Block {
    fn of(fit: &StageFit) -> Self {
        match fit {
            StageFit::Glm(f) => Block::Glm(f.link),
            StageFit::Multinomial(f) => Block::Multinomial(f.levels - 1),
        }
    }

    fn equations(self) -> usize {
        match self {
            Block::Glm(_) => 1,
            Block::Multinomial(k) => k,
        }
    }

    /// Residuals `e - p` (or `y - mu`) for one row, one per equation.
    fn residuals(self, eta: &[f64], response: f64, out: &mut [f64]) {
        match self {
            Block::Glm(link) => out[0] = response - link.inverse(eta[0]),
            Block::Multinomial(_) => {
                let p = softmax_ref(eta);
                for (k, o) in out.iter_mut().enumerate() {
                    let ind = if response == (k + 1) as f64 { 1.0 } else { 0.0 };
                    *o = ind - p[k + 1];
                }
            }
        }
    }
}

/// The stacked first- and second-stage estimating equations of a fitted
/// two-stage model, with parameters `theta = (alpha, beta)`.
///
/// Multinomial blocks are flattened level by level. Under the symmetry
/// restriction the offset coefficient is the first-stage `Y` coefficient and
/// appears only once.
#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub names: Vec<String>,
    pub dim: usize,
    pub alpha_len: usize,
    /// Index of the (first-level) treatment coefficient in `theta`.
    pub beta_a_index: usize,
    first: Block,
    second: Block,
    p1: usize,
    p2: usize,
    x1: DMatrix<f64>,
    s1: DMatrix<f64>,
    x2: DMatrix<f64>,
    s_col: usize,
    sw_col: Option<usize>,
    offset_alpha: Option<usize>,
    w: Vec<f64>,
    y: Vec<f64>,
}

impl StackedSystem {
    pub fn new(ds: &Dataset, fit: &TwoStageFit) -> Result<Self> {
        let first = Block::of(&fit.first);
        let second = Block::of(&fit.second);
        let x1 = build_design(ds, &fit.first_terms)?.matrix;
        let overrides: Vec<(Var, f64)> = fit.plan.y_stratum.map(|v| (Var::Y, v)).into_iter().collect();
        let s1 = build_design_with(ds, &fit.first_terms, DesignContext { overrides: &overrides, s: None })?.matrix;
        let zeros = vec![0.0; ds.n()];
        let x2 = build_design_with(ds, &fit.second_terms, DesignContext { overrides: &[], s: Some(&zeros) })?;
        let s_col = fit.second_terms.position(&Term::var(Var::S)).expect("second stage always has S") + 1;
        let sw_col = fit.second_terms.position(&Term::product(&[Var::S, Var::W])).map(|j| j + 1);
        let a_col = fit.second_terms.position(&Term::var(Var::A)).expect("second stage always has A") + 1;
        let offset_alpha = if fit.plan.second_stage_offset { alpha_y_column(&fit.first_terms) } else { None };
        if fit.plan.second_stage_offset && offset_alpha.is_none() {
            return Err(Error::InvalidSpec("offset without a first-stage Y term".into()));
        }
        let (p1, p2) = (x1.ncols(), x2.ncols());
        let alpha_len = p1 * first.equations();
        let mut names = Vec::new();
        let first_names = fit.first.names();
        for k in 0..first.equations() {
            for n in first_names {
                names.push(match first {
                    Block::Glm(_) => format!("alpha[{n}]"),
                    Block::Multinomial(_) => format!("alpha@{}[{n}]", k + 1),
                });
            }
        }
        for t in 0..second.equations() {
            for n in &x2.names {
                names.push(match second {
                    Block::Glm(_) => format!("beta[{n}]"),
                    Block::Multinomial(_) => format!("beta@{}[{n}]", t + 1),
                });
            }
        }
        Ok(StackedSystem {
            dim: names.len(),
            names,
            alpha_len,
            beta_a_index: alpha_len + a_col,
            first,
            second,
            p1,
            p2,
            x1,
            s1,
            x2: x2.matrix,
            s_col,
            sw_col,
            offset_alpha,
            w: ds.w().to_vec(),
            y: ds.y().to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// The fitted parameter vector `(alpha_hat, beta_hat)`.
    pub fn solution(&self, fit: &TwoStageFit) -> DVector<f64> {
        let mut v = fit.first.coef_flat();
        v.extend(fit.second.coef_flat());
        DVector::from_vec(v)
    }

    fn check(&self, theta: &DVector<f64>) -> Result<()> {
        if theta.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("{} parameters for a system of dimension {}", theta.len(), self.dim)));
        }
        Ok(())
    }

    /// Per-row estimating functions, `n x dim`.
    pub fn rows(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let n = self.n();
        let (p1, p2) = (self.p1, self.p2);
        let k1 = self.first.equations();
        let k2 = self.second.equations();
        let alpha = &theta.as_slice()[..self.alpha_len];
        let beta = &theta.as_slice()[self.alpha_len..];
        let mut out = DMatrix::zeros(n, self.dim);
        let mut eta1 = vec![0.0; k1];
        let mut r1 = vec![0.0; k1];
        let mut eta2 = vec![0.0; k2];
        let mut r2 = vec![0.0; k2];
        let mut x2row = vec![0.0; p2];
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..k1 {
                let a = &alpha[k * p1..(k + 1) * p1];
                eta1[k] = (0..p1).map(|j| self.x1[(i, j)] * a[j]).sum();
                s += (0..p1).map(|j| self.s1[(i, j)] * a[j]).sum::<f64>();
            }
            self.first.residuals(&eta1, self.w[i], &mut r1);
            for k in 0..k1 {
                for j in 0..p1 {
                    out[(i, k * p1 + j)] = self.x1[(i, j)] * r1[k];
                }
            }
            for (j, v) in x2row.iter_mut().enumerate() {
                *v = self.x2[(i, j)];
            }
            x2row[self.s_col] = s;
            if let Some(c) = self.sw_col {
                x2row[c] = s * self.w[i];
            }
            let off = self.offset_alpha.map_or(0.0, |j| alpha[j] * self.w[i]);
            for t in 0..k2 {
                let b = &beta[t * p2..(t + 1) * p2];
                eta2[t] = off + x2row.iter().zip(b).map(|(x, b)| x * b).sum::<f64>();
            }
            self.second.residuals(&eta2, self.y[i], &mut r2);
            for t in 0..k2 {
                for j in 0..p2 {
                    out[(i, self.alpha_len + t * p2 + j)] = x2row[j] * r2[t];
                }
            }
        }
        Ok(out)
    }

    /// `(1/N) sum_i Psi(O_i; theta)`.
    pub fn mean_score(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        let rows = self.rows(theta)?;
        Ok(rows.row_mean().transpose())
    }

    /// Central finite-difference Jacobian of the mean score, step `h * (1 + |theta_k|)`.
    pub fn jacobian_numeric_step(&self, theta: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for k in 0..self.dim {
            let step = h * (1.0 + theta[k].abs());
            let mut tp = theta.clone();
            tp[k] += step;
            let mut tm = theta.clone();
            tm[k] -= step;
            let col = (self.mean_score(&tp)? - self.mean_score(&tm)?) / (2.0 * step);
            j.set_column(k, &col);
        }
        Ok(j)
    }

    /// Closed-form Jacobian of the mean score; available when both stages are GLMs.
    pub fn jacobian_analytic(&self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let (l1, l2) = match (self.first, self.second) {
            (Block::Glm(a), Block::Glm(b)) => (a, b),
            _ => return Err(Error::UnsupportedJacobian("multinomial stages".into())),
        };
        let n = self.n();
        let (p1, p2) = (self.p1, self.p2);
        let alpha = &theta.as_slice()[..p1];
        let beta = &theta.as_slice()[p1..];
        let mut jac = DMatrix::zeros(self.dim, self.dim);
        let mut x2row = vec![0.0; p2];
        let mut g = vec![0.0; p1];
        for i in 0..n {
            let eta1: f64 = (0..p1).map(|j| self.x1[(i, j)] * alpha[j]).sum();
            let v1 = l1.mu_eta(l1.inverse(eta1));
            for a in 0..p1 {
                let xa = self.x1[(i, a)] * v1;
                for b in 0..p1 {
                    jac[(a, b)] -= xa * self.x1[(i, b)];
                }
            }
            let s: f64 = (0..p1).map(|j| self.s1[(i, j)] * alpha[j]).sum();
            let wi = self.w[i];
            for (j, v) in x2row.iter_mut().enumerate() {
                *v = self.x2[(i, j)];
            }
            x2row[self.s_col] = s;
            if let Some(c) = self.sw_col {
                x2row[c] = s * wi;
            }
            let off = self.offset_alpha.map_or(0.0, |j| alpha[j] * wi);
            let eta2 = off + x2row.iter().zip(beta).map(|(x, b)| x * b).sum::<f64>();
            let mu2 = l2.inverse(eta2);
            let v2 = l2.mu_eta(mu2);
            let r2 = self.y[i] - mu2;
            let slope = beta[self.s_col] + self.sw_col.map_or(0.0, |c| beta[c] * wi);
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = slope * self.s1[(i, j)];
            }
            if let Some(j) = self.offset_alpha {
                g[j] += wi;
            }
            for a in 0..p2 {
                let row = p1 + a;
                let xa = x2row[a] * v2;
                for b in 0..p1 {
                    jac[(row, b)] -= xa * g[b];
                }
                for b in 0..p2 {
                    jac[(row, p1 + b)] -= xa * x2row[b];
                }
            }
            for b in 0..p1 {
                jac[(p1 + self.s_col, b)] += r2 * self.s1[(i, b)];
                if let Some(c) = self.sw_col {
                    jac[(p1 + c, b)] += r2 * wi * self.s1[(i, b)];
                }
            }
        }
        Ok(jac / n as f64)
    }
}

/// Mean stacked score of a fitted model at `params`.
pub fn stacked_score(ds: &Dataset, fit: &TwoStageFit, params: &DVector<f64>) -> Result<DVector<f64>> {
    StackedSystem::new(ds, fit)?.mean_score(params)
}

/// Closed-form Jacobian `A_n`; errors for plans with multinomial stages.
pub fn jacobian_analytic(ds: &Dataset, fit: &TwoStageFit, params: &DVector<f64>) -> Result<DMatrix<f64>> {
    StackedSystem::new(ds, fit)?.jacobian_analytic(params)
}

/// Central-difference Jacobian with step `1e-6 * (1 + |theta_k|)`.
pub fn jacobian_numeric(ds: &Dataset, fit: &TwoStageFit, params: &DVector<f64>) -> Result<DMatrix<f64>> {
    StackedSystem::new(ds, fit)?.jacobian_numeric_step(params, 1e-6)
}
