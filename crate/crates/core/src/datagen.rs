//! Synthetic data satisfying the structural assumptions of each procedure.
//!
//! The latent confounder is drawn from its marginal given `(A, Z)`,
//! `f(u | a, z) ∝ f_eps(u - m(a, z)) * sum_j exp(c_j + d_j u)`, where the sum runs
//! over the outcome/proxy cells of the joint model. Conditional on `U` the
//! categorical variables are then drawn from those same cell masses, which makes
//! `U | A, Z, (reference cell)` an exact location shift of `eps`.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::Link;
use crate::seed::derive;

/// Number of grid points used to bound the accept-reject log ratio.
pub const ENVELOPE_GRID: usize = 2001;
/// Half-width of the envelope grid around `m(a, z)`.
pub const ENVELOPE_HALF_WIDTH: f64 = 25.0;
/// Multiplicative slack on the grid maximum.
pub const ENVELOPE_INFLATION: f64 = 1.5;
/// Widening factor of the proposal scale beyond the tail-rate minimum.
pub const PROPOSAL_SAFETY: f64 = 1.25;
/// Rejections tolerated for a single draw.
pub const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum ErrorDist {
    Logistic { mu: f64, s: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl ErrorDist {
    pub fn log_pdf(&self, x: f64) -> f64 {
        match *self {
            ErrorDist::Logistic { mu, s } => logistic_log_pdf(x - mu, s),
            ErrorDist::Normal { mu, sigma } => {
                let z = (x - mu) / sigma;
                -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            ErrorDist::Logistic { mu, .. } | ErrorDist::Normal { mu, .. } => mu,
        }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorDist::Logistic { mu, s } => mu + s * logistic_quantile(open01(rng)),
            ErrorDist::Normal { mu, sigma } => mu + sigma * standard_normal(rng),
        }
    }

    fn validate(&self) -> Result<()> {
        let (mu, sc) = match *self {
            ErrorDist::Logistic { mu, s } => (mu, s),
            ErrorDist::Normal { mu, sigma } => (mu, sigma),
        };
        if !mu.is_finite() || !(sc > 0.0 && sc.is_finite()) {
            return Err(Error::InvalidParams(format!("invalid error distribution {self:?}")));
        }
        Ok(())
    }

    /// Largest exponential tilt rate the distribution admits (infinite for normal).
    pub fn max_tilt(&self) -> f64 {
        match *self {
            ErrorDist::Logistic { s, .. } => 1.0 / s,
            ErrorDist::Normal { .. } => f64::INFINITY,
        }
    }
}

fn logistic_log_pdf(x: f64, s: f64) -> f64 {
    let z = (x / s).abs();
    -z - 2.0 * (-z).exp().ln_1p() - s.ln()
}

fn logistic_quantile(v: f64) -> f64 {
    (v / (1.0 - v)).ln()
}

/// Uniform draw on the open interval (0, 1).
fn open01<R: RngCore>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal<R: RngCore>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

fn log_sum_exp(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = v.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `m(A, Z) = c0 + ca A + cz Z + caz A Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanModel {
    pub c0: f64,
    pub ca: f64,
    pub cz: f64,
    pub caz: f64,
}

impl MeanModel {
    pub fn eval(&self, a: f64, z: f64) -> f64 {
        self.c0 + self.ca * a + self.cz * z + self.caz * a * z
    }
}

/// Form of the bracket in the marginal density of `U` given `(A, Z)` for the
/// binary outcome/proxy design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketForm {
    /// `1 + e^{eta_Y} + e^{eta_W} + e^{eta_Y + eta_W + beta_w}`: the marginal of the joint cell masses.
    #[default]
    Consistent,
    /// `1 + e^{eta_Y} + (1 + e^{eta_Y}) e^{beta_w} e^{eta_W}`. Agrees with the consistent form only when `beta_w = 0`.
    AsPrinted,
}

/// Structural parameters shared by all designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpParams {
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_u: f64,
    /// Effect of `W` on `Y`; in the binary design also the `Y`-`W` log odds ratio shared with `alpha_y`.
    pub beta_w: f64,
    pub alpha0: f64,
    pub alpha_u: f64,
    /// Effect of `Y` on `W`; must equal `beta_w` in the binary design.
    pub alpha_y: f64,
    /// `U * Y` interaction in the proxy model.
    pub alpha_uy: f64,
    /// `U * W` interaction in the outcome model.
    pub beta_uw: f64,
    pub m: MeanModel,
    pub eps: ErrorDist,
    pub a_sd: f64,
    pub z_sd: f64,
    pub y_noise_sd: f64,
    pub w_noise_sd: f64,
    pub bracket: BracketForm,
}

impl Default for DgpParams {
    fn default() -> Self {
        DgpParams::simulation_study()
    }
}

impl DgpParams {
    /// The binary outcome/proxy simulation study design.
    pub fn simulation_study() -> Self {
        DgpParams {
            beta0: -1.4,
            beta_a: 1.2,
            beta_u: -0.7,
            beta_w: 0.5,
            alpha0: -0.8,
            alpha_u: 0.5,
            alpha_y: 0.5,
            alpha_uy: 0.0,
            beta_uw: 0.0,
            m: MeanModel { c0: -0.4, ca: 0.8, cz: 1.2, caz: -1.0 },
            eps: ErrorDist::Logistic { mu: 0.0, s: 0.3 },
            a_sd: 0.5,
            z_sd: 0.5,
            y_noise_sd: 1.0,
            w_noise_sd: 1.0,
            bracket: BracketForm::Consistent,
        }
    }

    fn validate_common(&self) -> Result<()> {
        let all = [
            self.beta0,
            self.beta_a,
            self.beta_u,
            self.beta_w,
            self.alpha0,
            self.alpha_u,
            self.alpha_y,
            self.alpha_uy,
            self.beta_uw,
            self.m.c0,
            self.m.ca,
            self.m.cz,
            self.m.caz,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("non-finite coefficient".into()));
        }
        self.eps.validate()?;
        for (name, v) in [("a_sd", self.a_sd), ("z_sd", self.z_sd), ("y_noise_sd", self.y_noise_sd), ("w_noise_sd", self.w_noise_sd)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be a nonnegative standard deviation")));
            }
        }
        Ok(())
    }
}

/// Category-specific parameters for the polytomous design (`T` outcome and `K`
/// proxy non-reference levels). `A`, `Z`, `m` and `eps` come from [`DgpParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytomousParams {
    pub beta0: Vec<f64>,
    pub beta_a: Vec<f64>,
    pub beta_u: Vec<f64>,
    pub alpha0: Vec<f64>,
    pub alpha_u: Vec<f64>,
    /// `T x K` log odds ratios between outcome level `t` and proxy level `k`.
    pub beta_w: Vec<Vec<f64>>,
}

impl PolytomousParams {
    pub fn t_levels(&self) -> usize {
        self.beta0.len()
    }

    pub fn k_levels(&self) -> usize {
        self.alpha0.len()
    }

    fn validate(&self) -> Result<()> {
        let t = self.t_levels();
        let k = self.k_levels();
        if t == 0 || k == 0 || self.beta_a.len() != t || self.beta_u.len() != t || self.alpha_u.len() != k {
            return Err(Error::InvalidParams("polytomous parameter lengths disagree".into()));
        }
        if self.beta_w.len() != t || self.beta_w.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParams("beta_w must be T x K".into()));
        }
        Ok(())
    }
}

/// Which structural model generates `(Y, W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    /// Binary `Y` and `W` with a shared odds ratio.
    Binary,
    /// `U = m(A, Z) + eps`; identity/log structural means for `Y` and `W`.
    Collapsible { y: Link, w: Link },
    /// Binary `Y`; `W` has an identity or log mean `alpha0 + alpha_u U + alpha_y Y + alpha_uy U Y`.
    LogitOutcome { w: Link },
    /// Binary `W`; `Y` has an identity or log mean `beta0 + beta_a A + beta_u U + beta_w W + beta_uw U W`.
    LogitProxy { y: Link },
    Polytomous(PolytomousParams),
}

/// One `(c, d)` term `exp(c + d u)` of the latent-density bracket, labelled by its cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub c: f64,
    pub d: f64,
    pub y: f64,
    pub w: f64,
}

fn binary_cells(a: f64, p: &DgpParams, form: BracketForm) -> [Cell; 4] {
    let ey = p.beta0 + p.beta_a * a;
    let w_shift = match form {
        BracketForm::Consistent => 0.0,
        BracketForm::AsPrinted => p.beta_w,
    };
    [
        Cell { c: 0.0, d: 0.0, y: 0.0, w: 0.0 },
        Cell { c: ey, d: p.beta_u, y: 1.0, w: 0.0 },
        Cell { c: p.alpha0 + w_shift, d: p.alpha_u, y: 0.0, w: 1.0 },
        Cell { c: ey + p.alpha0 + p.beta_w, d: p.beta_u + p.alpha_u, y: 1.0, w: 1.0 },
    ]
}

/// Cells of the bracket for row covariate `a`, or `None` when `U` is drawn directly.
pub fn cells(a: f64, params: &DgpParams, scenario: &Scenario) -> Option<Vec<Cell>> {
    match scenario {
        Scenario::Binary => Some(binary_cells(a, params, params.bracket).to_vec()),
        Scenario::Collapsible { .. } => None,
        Scenario::LogitOutcome { .. } => Some(vec![
            Cell { c: 0.0, d: 0.0, y: 0.0, w: f64::NAN },
            Cell { c: params.beta0 + params.beta_a * a, d: params.beta_u, y: 1.0, w: f64::NAN },
        ]),
        Scenario::LogitProxy { .. } => Some(vec![
            Cell { c: 0.0, d: 0.0, y: f64::NAN, w: 0.0 },
            Cell { c: params.alpha0, d: params.alpha_u, y: f64::NAN, w: 1.0 },
        ]),
        Scenario::Polytomous(pp) => {
            let mut v = Vec::with_capacity((pp.t_levels() + 1) * (pp.k_levels() + 1));
            for t in 0..=pp.t_levels() {
                for k in 0..=pp.k_levels() {
                    let mut c = 0.0;
                    let mut d = 0.0;
                    if t > 0 {
                        c += pp.beta0[t - 1] + pp.beta_a[t - 1] * a;
                        d += pp.beta_u[t - 1];
                    }
                    if k > 0 {
                        c += pp.alpha0[k - 1];
                        d += pp.alpha_u[k - 1];
                    }
                    if t > 0 && k > 0 {
                        c += pp.beta_w[t - 1][k - 1];
                    }
                    v.push(Cell { c, d, y: t as f64, w: k as f64 });
                }
            }
            Some(v)
        }
    }
}

fn log_bracket(cells: &[Cell], u: f64) -> f64 {
    log_sum_exp(cells.iter().map(|c| c.c + c.d * u))
}

/// Unnormalized density of `U` given `(a, z)` in the binary design:
/// `f_eps(u - m) * bracket / ((1 + e^{beta0 + beta_a a}) (1 + e^{alpha0}))`, computed in log space.
pub fn density_u_unnorm(u: f64, a: f64, z: f64, params: &DgpParams) -> f64 {
    log_density_u_unnorm(u, a, z, params).exp()
}

pub fn log_density_u_unnorm(u: f64, a: f64, z: f64, params: &DgpParams) -> f64 {
    let cells = binary_cells(a, params, params.bracket);
    let norm = (params.beta0 + params.beta_a * a).exp().ln_1p() + params.alpha0.exp().ln_1p();
    params.eps.log_pdf(u - params.m.eval(a, z)) + log_bracket(&cells, u) - norm
}

/// Cell probabilities of `(Y, W)` given `U` in the binary design, ordered
/// `(0,0), (1,0), (0,1), (1,1)`.
pub fn yw_probabilities(u: f64, a: f64, params: &DgpParams) -> [f64; 4] {
    let cells = binary_cells(a, params, BracketForm::Consistent);
    let lse = log_bracket(&cells, u);
    cells.map(|c| (c.c + c.d * u - lse).exp())
}

/// Draw `(Y, W)` given `U` from the bivariate Bernoulli cell masses.
pub fn sample_yw<R: RngCore>(u: f64, a: f64, _z: f64, params: &DgpParams, rng: &mut R) -> (f64, f64) {
    let cells = binary_cells(a, params, BracketForm::Consistent);
    let c = draw_cell(&cells, u, rng);
    (c.y, c.w)
}

fn draw_cell<R: RngCore>(cells: &[Cell], u: f64, rng: &mut R) -> Cell {
    let lse = log_bracket(cells, u);
    let v = open01(rng);
    let mut acc = 0.0;
    for c in cells {
        acc += (c.c + c.d * u - lse).exp();
        if v < acc {
            return *c;
        }
    }
    *cells.last().expect("non-empty cells")
}

/// Accept-reject sampler for `U` given `(A, Z)`.
///
/// Proposal: logistic centred at `m(a, z)` with scale `safety / (1/s - r)` for
/// logistic errors (`r` the largest slope magnitude) or `safety * sigma` for
/// normal errors. The log ratio target/proposal splits into one term per cell;
/// each term's maximum over a 2001-point grid on `m ± 25` is precomputed per
/// slope, and the row envelope is the inflated sum of the per-cell maxima.
#[derive(Debug, Clone)]
pub struct USampler {
    eps: ErrorDist,
    s_prop: f64,
    slopes: Vec<f64>,
    t_max: Vec<f64>,
    pub proposals: u64,
    pub acceptances: u64,
    debug_max_ratio: Option<f64>,
}

impl USampler {
    pub fn new(eps: ErrorDist, slopes: &[f64]) -> Result<Self> {
        eps.validate()?;
        let r = slopes.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        let s_prop = match eps {
            ErrorDist::Logistic { s, .. } => {
                if r >= 1.0 / s {
                    return Err(Error::InvalidParams(format!(
                        "tail-rate condition violated: max |slope| = {r} must be below 1/s = {}",
                        1.0 / s
                    )));
                }
                PROPOSAL_SAFETY / (1.0 / s - r)
            }
            ErrorDist::Normal { sigma, .. } => PROPOSAL_SAFETY * sigma,
        };
        let mut uniq: Vec<f64> = Vec::new();
        for &d in slopes {
            if !uniq.contains(&d) {
                uniq.push(d);
            }
        }
        let step = 2.0 * ENVELOPE_HALF_WIDTH / (ENVELOPE_GRID - 1) as f64;
        let t_max = uniq
            .iter()
            .map(|&d| {
                (0..ENVELOPE_GRID)
                    .map(|g| {
                        let x = -ENVELOPE_HALF_WIDTH + g as f64 * step;
                        eps.log_pdf(x) - logistic_log_pdf(x, s_prop) + d * x
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Ok(USampler { eps, s_prop, slopes: uniq, t_max, proposals: 0, acceptances: 0, debug_max_ratio: None })
    }

    /// Record the largest acceptance ratio seen; it must never exceed one.
    pub fn enable_debug(&mut self) {
        self.debug_max_ratio = Some(0.0);
    }

    pub fn debug_max_ratio(&self) -> Option<f64> {
        self.debug_max_ratio
    }

    pub fn proposal_scale(&self) -> f64 {
        self.s_prop
    }

    fn t_of(&self, d: f64) -> f64 {
        let i = self.slopes.iter().position(|&s| s == d).expect("slope registered at construction");
        self.t_max[i]
    }

    /// One exact draw from `f_eps(u - m) * sum_j exp(c_j + d_j u)`.
    pub fn draw<R: RngCore>(&mut self, m: f64, cells: &[Cell], rng: &mut R) -> Result<f64> {
        let log_m = ENVELOPE_INFLATION.ln() + log_sum_exp(cells.iter().map(|c| c.c + c.d * m + self.t_of(c.d)));
        for _ in 0..MAX_REJECTIONS {
            let x = self.s_prop * logistic_quantile(open01(rng));
            self.proposals += 1;
            let u = m + x;
            let log_ratio = self.eps.log_pdf(x) + log_bracket(cells, u) - logistic_log_pdf(x, self.s_prop) - log_m;
            if let Some(mx) = self.debug_max_ratio.as_mut() {
                *mx = mx.max(log_ratio.exp());
            }
            if open01(rng).ln() <= log_ratio {
                self.acceptances += 1;
                return Ok(u);
            }
        }
        Err(Error::EnvelopeFailure(MAX_REJECTIONS))
    }
}

fn slopes_of(cells: &[Cell]) -> Vec<f64> {
    cells.iter().map(|c| c.d).collect()
}

/// Draw one `U` given `(a, z)` in the binary design.
pub fn sample_u<R: RngCore>(a: f64, z: f64, params: &DgpParams, rng: &mut R) -> Result<f64> {
    let cells = binary_cells(a, params, params.bracket);
    let mut s = USampler::new(params.eps, &slopes_of(&cells))?;
    s.draw(params.m.eval(a, z), &cells, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub dataset: Dataset,
    pub params: DgpParams,
    pub scenario: Scenario,
    pub seed: u64,
    pub proposals: u64,
    pub acceptances: u64,
}

fn validate(params: &DgpParams, scenario: &Scenario) -> Result<()> {
    params.validate_common()?;
    match scenario {
        Scenario::Binary => {
            if params.alpha_y != params.beta_w {
                return Err(Error::InvalidParams(format!(
                    "the binary design shares one Y-W log odds ratio: alpha_y ({}) must equal beta_w ({})",
                    params.alpha_y, params.beta_w
                )));
            }
        }
        Scenario::Collapsible { y, w } => {
            if *y == Link::Logit || *w == Link::Logit {
                return Err(Error::InvalidParams("collapsible designs use identity or log links".into()));
            }
            let tilt = params.eps.max_tilt();
            for (link, coef, name) in [(y, params.beta_u, "beta_u"), (w, params.alpha_u, "alpha_u")] {
                if *link == Link::Log && coef.abs() >= tilt {
                    return Err(Error::InvalidParams(format!("{name} exceeds the tilt rate admitted by eps")));
                }
            }
        }
        Scenario::LogitOutcome { w } | Scenario::LogitProxy { y: w } => {
            if *w == Link::Logit {
                return Err(Error::InvalidParams("the non-binary variable needs an identity or log link".into()));
            }
        }
        Scenario::Polytomous(pp) => pp.validate()?,
    }
    if let Some(cells) = cells(0.0, params, scenario) {
        let r = cells.iter().fold(0.0_f64, |m, c| m.max(c.d.abs()));
        if r >= params.eps.max_tilt() {
            return Err(Error::InvalidParams(format!(
                "tail-rate condition violated: max slope magnitude {r} must be below {}",
                params.eps.max_tilt()
            )));
        }
    }
    Ok(())
}

fn poisson<R: RngCore>(mean: f64, rng: &mut R) -> Result<f64> {
    if mean == 0.0 {
        return Ok(0.0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::InvalidParams(format!("Poisson mean {mean}: {e}")))?;
    Ok(d.sample(rng))
}

fn continuous<R: RngCore>(link: Link, eta: f64, sd: f64, rng: &mut R) -> Result<f64> {
    match link {
        Link::Identity => Ok(eta + sd * standard_normal(rng)),
        Link::Log => poisson(eta.exp(), rng),
        Link::Logit => unreachable!("validated"),
    }
}

const STREAM_A: u64 = 1;
const STREAM_Z: u64 = 2;
const STREAM_U: u64 = 3;
const STREAM_YW: u64 = 4;
const STREAM_NOISE: u64 = 5;

/// Generate `n` rows. Each variable has its own generator stream derived from `seed`.
pub fn generate(n: usize, params: &DgpParams, scenario: &Scenario, seed: u64) -> Result<GeneratedDataset> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    validate(params, scenario)?;
    let stream = |k: u64| ChaCha8Rng::seed_from_u64(derive(seed, &[k]));
    let (mut ra, mut rz, mut ru, mut ryw, mut rn) =
        (stream(STREAM_A), stream(STREAM_Z), stream(STREAM_U), stream(STREAM_YW), stream(STREAM_NOISE));
    let a: Vec<f64> = (0..n).map(|_| params.a_sd * standard_normal(&mut ra)).collect();
    let z: Vec<f64> = (0..n).map(|_| params.z_sd * standard_normal(&mut rz)).collect();
    let mut u = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (proposals, acceptances);

    match scenario {
        Scenario::Collapsible { y: yl, w: wl } => {
            for i in 0..n {
                u[i] = params.m.eval(a[i], z[i]) + params.eps.sample(&mut ru);
                w[i] = continuous(*wl, params.alpha0 + params.alpha_u * u[i], params.w_noise_sd, &mut rn)?;
                let ey = params.beta0 + params.beta_a * a[i] + params.beta_u * u[i];
                y[i] = continuous(*yl, ey, params.y_noise_sd, &mut rn)?;
            }
            proposals = n as u64;
            acceptances = n as u64;
        }
        _ => {
            let c0 = cells(0.0, params, scenario).expect("bracketed scenario");
            let mut sampler = USampler::new(params.eps, &slopes_of(&c0))?;
            for i in 0..n {
                let cs = cells(a[i], params, scenario).expect("bracketed scenario");
                u[i] = sampler.draw(params.m.eval(a[i], z[i]), &cs, &mut ru)?;
                let sampling_cells = match (scenario, params.bracket) {
                    (Scenario::Binary, BracketForm::AsPrinted) => binary_cells(a[i], params, BracketForm::Consistent).to_vec(),
                    _ => cs,
                };
                let cell = draw_cell(&sampling_cells, u[i], &mut ryw);
                match scenario {
                    Scenario::LogitOutcome { w: wl } => {
                        y[i] = cell.y;
                        let mean = params.alpha0 + params.alpha_u * u[i] + params.alpha_y * y[i] + params.alpha_uy * u[i] * y[i];
                        w[i] = continuous(*wl, mean, params.w_noise_sd, &mut rn)?;
                    }
                    Scenario::LogitProxy { y: yl } => {
                        w[i] = cell.w;
                        let mean = params.beta0
                            + params.beta_a * a[i]
                            + params.beta_u * u[i]
                            + params.beta_w * w[i]
                            + params.beta_uw * u[i] * w[i];
                        y[i] = continuous(*yl, mean, params.y_noise_sd, &mut rn)?;
                    }
                    _ => {
                        y[i] = cell.y;
                        w[i] = cell.w;
                    }
                }
            }
            proposals = sampler.proposals;
            acceptances = sampler.acceptances;
        }
    }
    let dataset = Dataset::new(y, a, w, vec![z], vec![])?.with_latent(u)?;
    Ok(GeneratedDataset { dataset, params: params.clone(), scenario: scenario.clone(), seed, proposals, acceptances })
}

/// Binary outcome and proxy with the shared odds ratio.
pub fn generate_logit_dataset(n: usize, params: &DgpParams, seed: u64) -> Result<GeneratedDataset> {
    generate(n, params, &Scenario::Binary, seed)
}

/// Gaussian outcome and proxy with identity means.
pub fn generate_linear_dataset(n: usize, params: &DgpParams, seed: u64) -> Result<GeneratedDataset> {
    generate(n, params, &Scenario::Collapsible { y: Link::Identity, w: Link::Identity }, seed)
}

/// Poisson outcome and proxy with log means.
pub fn generate_count_dataset(n: usize, params: &DgpParams, seed: u64) -> Result<GeneratedDataset> {
    generate(n, params, &Scenario::Collapsible { y: Link::Log, w: Link::Log }, seed)
}
