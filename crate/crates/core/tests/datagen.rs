mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proxi2s::datagen::{
    cells, density_u_unnorm, generate, generate_count_dataset, generate_linear_dataset, generate_logit_dataset, log_density_u_unnorm,
    sample_u, yw_probabilities, DgpParams, ErrorDist, Scenario, USampler,
};
use proxi2s::glm::expit;
use proxi2s::inference::sandwich;
use proxi2s::proximal::Procedure;
use proxi2s::sim::matched_config;
use proxi2s::{build_design, fit_glm, fit_two_stage, Link, ModelSpec, OutcomeLink, TermSpec};

/// Kolmogorov-Smirnov 1% critical value, asymptotic form.
fn ks_crit_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn ks(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0_f64, |d, (i, &v)| {
        let f = cdf(v);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

fn no_latent_effects() -> DgpParams {
    DgpParams { beta_u: 0.0, alpha_u: 0.0, ..DgpParams::simulation_study() }
}

#[test]
fn latent_free_bracket_is_constant_in_u() {
    let p = no_latent_effects();
    let (a, z) = (0.4, -0.3);
    for (u, v) in [(-3.0, 1.0), (0.0, 2.5), (-0.7, -0.1)] {
        let lhs = log_density_u_unnorm(u, a, z, &p) - log_density_u_unnorm(v, a, z, &p);
        let rhs = p.eps.log_pdf(u - p.m.eval(a, z)) - p.eps.log_pdf(v - p.m.eval(a, z));
        assert!((lhs - rhs).abs() <= 1e-12);
    }
}

#[test]
fn latent_free_draws_are_exactly_logistic() {
    let p = no_latent_effects();
    let (a, z) = (0.3, -0.2);
    let m = p.m.eval(a, z);
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let draws: Vec<f64> = (0..10_000).map(|_| sample_u(a, z, &p, &mut rng).unwrap()).collect();
    let d = ks(draws, |x| expit((x - m) / 0.3));
    assert!(d <= ks_crit_1pct(10_000), "D = {d}");
}

#[test]
fn density_is_integrable_and_positive() {
    let p = DgpParams::simulation_study();
    let h = 1e-3;
    let total: f64 = (0..=40_000).map(|k| -20.0 + k as f64 * h).map(|u| density_u_unnorm(u, 0.0, 0.0, &p) * h).sum();
    assert!(total.is_finite() && total > 0.0);
    for u in [-500.0, -20.0, 0.0, 20.0, 500.0] {
        let d = log_density_u_unnorm(u, 0.0, 0.0, &p);
        assert!(d.is_finite());
    }
}

#[test]
fn log_density_difference_matches_hand_expansion() {
    let p = DgpParams::simulation_study();
    let (a, z) = (0.5, 0.2);
    let m = -0.4 + 0.8 * a + 1.2 * z - a * z;
    let hand = |u: f64| {
        let x = (u - m) / 0.3;
        let log_logistic = -x - 2.0 * (-x).exp().ln_1p() - 0.3f64.ln();
        let ey = -1.4 + 1.2 * a - 0.7 * u;
        let ew = -0.8 + 0.5 * u;
        let bracket = 1.0 + ey.exp() + ew.exp() + (ey + ew + 0.5).exp();
        log_logistic + bracket.ln()
    };
    for (u, delta) in [(0.1, 0.3), (-1.2, 0.05), (2.0, -1.0)] {
        let got = log_density_u_unnorm(u, a, z, &p) - log_density_u_unnorm(u + delta, a, z, &p);
        assert!((got - (hand(u) - hand(u + delta))).abs() <= 1e-12);
    }
}

#[test]
fn envelope_dominates_on_every_proposal() {
    let p = DgpParams { beta_u: -2.5, alpha_u: 2.8, ..DgpParams::simulation_study() };
    let c0 = cells(0.0, &p, &Scenario::Binary).unwrap();
    let mut slopes: Vec<f64> = c0.iter().map(|c| c.d).collect();
    slopes.dedup();
    let mut sampler = USampler::new(p.eps, &slopes).unwrap();
    sampler.enable_debug();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    while sampler.proposals < 100_000 {
        let (a, z) = (rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let cs = cells(a, &p, &Scenario::Binary).unwrap();
        sampler.draw(p.m.eval(a, z), &cs, &mut rng).unwrap();
    }
    let r = sampler.debug_max_ratio().unwrap();
    assert!(r <= 1.0, "max acceptance ratio {r}");
}

#[test]
fn joint_factorizes_without_latent_or_odds_ratio() {
    let p = DgpParams { beta_w: 0.0, alpha_y: 0.0, ..no_latent_effects() };
    for (u, a) in [(0.0, 0.0), (1.5, -0.4), (-2.0, 1.0)] {
        let pr = yw_probabilities(u, a, &p);
        let py = expit(-1.4 + 1.2 * a);
        let pw = expit(-0.8);
        let expected = [(1.0 - py) * (1.0 - pw), py * (1.0 - pw), (1.0 - py) * pw, py * pw];
        for (g, e) in pr.iter().zip(expected) {
            assert!((g - e).abs() <= 1e-12);
        }
    }
}

#[test]
fn cell_probabilities_are_distributions() {
    let p = DgpParams::simulation_study();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..1000 {
        let (u, a) = (rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0));
        let pr = yw_probabilities(u, a, &p);
        assert!(pr.iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!((pr.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn reference_stratum_has_the_error_law() {
    let p = DgpParams::simulation_study();
    let ds = generate_logit_dataset(100_000, &p, 2024).unwrap().dataset;
    let u = ds.u().unwrap();
    let resid: Vec<f64> = (0..ds.n())
        .filter(|&i| ds.y()[i] == 0.0 && ds.w()[i] == 0.0)
        .map(|i| u[i] - p.m.eval(ds.a()[i], ds.z()[0][i]))
        .collect();
    let k = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / k;
    let sd = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
    assert!(mean.abs() <= 3.0 * sd / k.sqrt(), "mean {mean}, sd {sd}, count {k}");
    let d = ks(resid.clone(), |x| expit(x / 0.3));
    assert!(d <= ks_crit_1pct(resid.len()), "D = {d}");
}

#[test]
fn latent_logistic_fit_recovers_outcome_coefficients() {
    let p = DgpParams::simulation_study();
    let ds = generate_logit_dataset(100_000, &p, 77).unwrap().dataset;
    let spec = TermSpec::parse(&["a", "u", "w"], &ds).unwrap();
    let design = build_design(&ds, &spec).unwrap();
    let fit = fit_glm(&design, ds.y(), Link::Logit, None, None).unwrap();
    let se = fit.std_errors(&design).unwrap();
    for (j, truth) in [(1, p.beta_a), (2, p.beta_u), (3, p.beta_w)] {
        assert!((fit.coef[j] - truth).abs() <= 3.0 * se[j], "coef {j}: {} vs {truth} (se {})", fit.coef[j], se[j]);
    }
}

#[test]
fn generators_are_bitwise_deterministic() {
    let p = DgpParams::simulation_study();
    let a = generate_logit_dataset(500, &p, 3).unwrap();
    let b = generate_logit_dataset(500, &p, 3).unwrap();
    assert_eq!(a.dataset, b.dataset);
    assert_eq!((a.proposals, a.acceptances), (b.proposals, b.acceptances));
    assert_ne!(generate_logit_dataset(500, &p, 4).unwrap().dataset, a.dataset);
    for proc_ in [Procedure::P2, Procedure::P9, Procedure::P14, Procedure::Polytomous] {
        let c = matched_config(proc_);
        assert_eq!(generate(300, &c.dgp, &c.scenario, 1).unwrap().dataset, generate(300, &c.dgp, &c.scenario, 1).unwrap().dataset);
    }
}

#[test]
fn shared_odds_ratio_is_enforced() {
    let p = DgpParams { alpha_y: 0.2, ..DgpParams::simulation_study() };
    assert!(generate_logit_dataset(10, &p, 1).is_err());
}

#[test]
fn noiseless_linear_design_is_recovered_exactly() {
    let p = DgpParams {
        eps: ErrorDist::Normal { mu: 0.0, sigma: 0.5 },
        y_noise_sd: 0.0,
        w_noise_sd: 0.0,
        ..DgpParams::simulation_study()
    };
    let ds = generate_linear_dataset(500, &p, 6).unwrap().dataset;
    let u = ds.u().unwrap();
    for i in 0..ds.n() {
        assert!((ds.w()[i] - (p.alpha0 + p.alpha_u * u[i])).abs() <= 1e-12);
    }
    let spec = ModelSpec::new(
        OutcomeLink::Identity,
        OutcomeLink::Identity,
        TermSpec::parse(&["a", "z", "a:z"], &ds).unwrap(),
        TermSpec::parse(&["a"], &ds).unwrap(),
    );
    let fit = fit_two_stage(&ds, &spec).unwrap();
    assert!((fit.beta_a[0] - p.beta_a).abs() <= 1e-10);
}

#[test]
fn count_design_is_consistent_at_large_n() {
    let c = matched_config(Procedure::P2);
    let ds = generate_count_dataset(100_000, &c.dgp, 10).unwrap().dataset;
    let fit = fit_two_stage(&ds, &c.model_spec(&ds).unwrap()).unwrap();
    let se = sandwich(&ds, &fit, 0.95).unwrap().se_a;
    assert!((fit.beta_a[0] - c.dgp.beta_a).abs() <= 3.0 * se, "{} vs {} (se {se})", fit.beta_a[0], c.dgp.beta_a);
}

#[test]
fn error_mean_is_zero() {
    let c = matched_config(Procedure::P1);
    let ds = generate(100_000, &c.dgp, &c.scenario, 12).unwrap().dataset;
    let u = ds.u().unwrap();
    let n = ds.n() as f64;
    let mean = (0..ds.n()).map(|i| u[i] - c.dgp.m.eval(ds.a()[i], ds.z()[0][i])).sum::<f64>() / n;
    assert!(mean.abs() <= 3.0 * 0.5 / n.sqrt());
}
