mod common;

use common::{batch_means_se, gamma_pdf, integrate, log_mean_exp_se, median};
use pdikit::model::loglik_matrix;
use pdikit::models::GammaGammaToy;
use pdikit::pdi::log_posterior_predictive;
use pdikit::sampler::{adaptive_rw_metropolis, sample_gamma_posterior, SamplerConfig};

/// `int Gam(x; 5, beta) Gam(beta; a, b) d beta` by quadrature.
fn predictive_by_quadrature(x: f64, a: f64, b: f64) -> f64 {
    let sd = a.sqrt() / b;
    let hi = a / b + 40.0 * sd;
    integrate(|beta| gamma_pdf(x, 5.0, beta) * gamma_pdf(beta, a, b), 0.0, hi, 1e-13)
}

#[test]
fn closed_form_predictive_matches_quadrature() {
    let toy = GammaGammaToy::simulate(10, 7).unwrap();
    let (a, b) = toy.posterior();
    for x in [0.5, 5.0, 15.0] {
        let closed = toy.posterior_predictive_logpdf(x).unwrap();
        let quad = predictive_by_quadrature(x, a, b).ln();
        assert!((closed - quad).abs() < 1e-8, "x={x}: {closed} vs {quad}");
    }
}

#[test]
fn predictive_integrates_to_one() {
    let toy = GammaGammaToy::simulate(10, 7).unwrap();
    let total =
        integrate(|x| if x > 0.0 { toy.posterior_predictive_logpdf(x).unwrap().exp() } else { 0.0 }, 0.0, 200.0, 1e-12);
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}

#[test]
fn closed_form_predictive_matches_monte_carlo() {
    let toy = GammaGammaToy::simulate(10, 7).unwrap();
    let (a, b) = toy.posterior();
    let draws = sample_gamma_posterior(a, b, 20000, 99).unwrap();
    let points = vec![0.5, 5.0, 15.0];
    let m = loglik_matrix(&toy.likelihood_at(points.clone()), &draws).unwrap();
    for (n, x) in points.iter().enumerate() {
        let mc = log_posterior_predictive(m.column(n)).unwrap();
        let se = log_mean_exp_se(m.column(n));
        let closed = toy.posterior_predictive_logpdf(*x).unwrap();
        assert!((mc - closed).abs() < 3.0 * se, "x={x}: {mc} vs {closed}, se {se}");
    }
}

#[test]
fn conjugate_update_matches_numerical_posterior() {
    let data = vec![3.0, 7.0, 4.0, 6.0, 5.0, 5.0, 2.0, 8.0, 4.5, 5.5];
    let toy = GammaGammaToy::new(data.clone()).unwrap();
    assert_eq!(toy.posterior(), (51.0, 51.0));
    let unnormalized =
        |beta: f64| gamma_pdf(beta, 1.0, 1.0) * data.iter().map(|&x| gamma_pdf(x, 5.0, beta)).product::<f64>();
    let z = integrate(unnormalized, 0.0, 5.0, 1e-13);
    for beta in [0.7, 0.9, 1.0, 1.1, 1.4] {
        let numeric = unnormalized(beta) / z;
        let conj = gamma_pdf(beta, 51.0, 51.0);
        assert!((numeric / conj - 1.0).abs() < 1e-8, "beta={beta}: {numeric} vs {conj}");
    }
    let mean = integrate(|beta| beta * unnormalized(beta), 0.0, 5.0, 1e-13) / z;
    assert!((mean - 1.0).abs() < 1e-8, "{mean}");
}

#[test]
fn monte_carlo_error_shrinks_with_draws() {
    let toy = GammaGammaToy::simulate(10, 7).unwrap();
    let (a, b) = toy.posterior();
    let lik = toy.likelihood_at(vec![9.0]);
    let truth = toy.posterior_predictive_logpdf(9.0).unwrap();
    let error = |s: usize, seed: u64| {
        let draws = sample_gamma_posterior(a, b, s, seed).unwrap();
        let m = loglik_matrix(&lik, &draws).unwrap();
        (log_posterior_predictive(m.column(0)).unwrap() - truth).abs()
    };
    let small: Vec<f64> = (0..50).map(|r| error(100, 1000 + r)).collect();
    let large: Vec<f64> = (0..50).map(|r| error(40000, 5000 + r)).collect();
    let (ms, ml) = (median(small), median(large));
    assert!(ml < ms, "median error at S=40000 {ml} not below S=100 {ms}");
}

#[test]
fn metropolis_recovers_the_conjugate_mean() {
    let toy = GammaGammaToy::simulate(10, 7).unwrap();
    let (a, b) = toy.posterior();
    let config = SamplerConfig { warmup: 2000, draws: 20000, seed: 3, ..Default::default() };
    let draws = adaptive_rw_metropolis(&toy, &config).unwrap();
    let beta = draws.coordinate("beta").unwrap();
    let se = batch_means_se(&beta, 50);
    let mean = draws.posterior_mean()[0];
    assert!((mean - a / b).abs() < 3.0 * se, "{mean} vs {}, se {se}", a / b);
    assert!(beta.iter().all(|&x| x > 0.0));
}
