use proptest::prelude::*;

use endogarble::harness::{simulate_queries, Execution};
use endogarble::{
    choose_gamma_signs, estimation_error_closed, garble, garbled_predict, garbled_predict_with_noise, logistic, logit,
    logit_fit, ols_fit, predict_clean, prediction_error_closed, recover_beta_known_lambda, rng, sample_covariates,
    CovariateSpec, Dataset, FitResult, GarblingConfig, Link, Matrix, NoiseMode, RegressionModel,
};

fn covariance(k: usize) -> impl Strategy<Value = Matrix> {
    // A Aᵀ + small ridge is always PSD.
    prop::collection::vec(-2.0f64..2.0, k * k).prop_map(move |a| {
        let mut m = Matrix::zeros(k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = (0..k).map(|l| a[i * k + l] * a[j * k + l]).sum::<f64>();
            }
            m[(i, i)] += 0.05;
        }
        m
    })
}

fn mode() -> impl Strategy<Value = NoiseMode> {
    prop_oneof![
        Just(NoiseMode::IndependentPerRegressor),
        Just(NoiseMode::SharedAcrossRegressors)
    ]
}

proptest! {
    #[test]
    fn logistic_is_monotone(a in -800.0f64..800.0, b in -800.0f64..800.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(logistic(lo) <= logistic(hi));
        prop_assert!(logistic(a) > 0.0 && logistic(a) < 1.0);
    }

    #[test]
    fn logit_inverts_logistic(z in -27.0f64..27.0) {
        // Past about ±27.6 the probability hits the logit clamp.
        let p = logistic(z);
        let back = logit(p);
        // Beyond z ≈ 15 the spacing of doubles near 1 limits what any
        // inversion can achieve: one ulp of p moves the log-odds by ε/(1−p).
        let conditioning = 2.0 * f64::EPSILON / (1.0 - p);
        let tol = if z <= 15.0 { 1e-9 } else { 1e-9_f64.max(conditioning) };
        prop_assert!((back - z).abs() <= tol, "z={z} back={back} tol={tol}");
    }

    #[test]
    fn ols_recovers_noiseless_coefficients(
        k in 1usize..4,
        a in -10.0f64..10.0,
        b in prop::collection::vec(-10.0f64..10.0, 3),
        seed in any::<u64>(),
    ) {
        let spec = CovariateSpec::centered(Matrix::identity(k), 40).unwrap();
        let d = sample_covariates(&spec, &mut rng::seeded(seed)).unwrap();
        let y: Vec<f64> = d.rows().map(|r| a + r.iter().zip(&b).map(|(x, c)| x * c).sum::<f64>()).collect();
        let fit = ols_fit(&d.with_outputs(y).unwrap(), true).unwrap();
        prop_assert!((fit.intercept_hat - a).abs() < 1e-9);
        for (bh, bt) in fit.slopes_hat.iter().zip(&b) {
            prop_assert!((bh - bt).abs() < 1e-9, "{bh} vs {bt}");
        }
        prop_assert!(fit.residual_variance < 1e-18);
    }

    #[test]
    fn relative_estimation_error_is_gamma(
        betas in prop::collection::vec(prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], 1..5),
        gseed in prop::collection::vec(-1.0f64..1.0, 5),
        lambda in 0.0f64..3.0,
    ) {
        let k = betas.len();
        let gammas = gseed[..k].to_vec();
        let m = RegressionModel::linear(0.0, betas.clone()).unwrap();
        let c = GarblingConfig::new(gammas.clone(), lambda).unwrap();
        let d = estimation_error_closed(&m, &c).unwrap();
        for i in 0..k {
            let rel = d[i] / betas[i];
            prop_assert!((rel - gammas[i]).abs() <= 4.0 * f64::EPSILON * gammas[i].abs());
        }
    }

    #[test]
    fn prediction_error_is_even_in_gamma(
        cov in covariance(3),
        betas in prop::collection::vec(-3.0f64..3.0, 3),
        gammas in prop::collection::vec(-1.0f64..1.0, 3),
        lambda in 0.0f64..3.0,
        mode in mode(),
    ) {
        let spec = CovariateSpec::centered(cov, 1).unwrap();
        let m = RegressionModel::linear(0.0, betas).unwrap();
        let c = GarblingConfig::new(gammas.clone(), lambda).unwrap().with_noise_mode(mode);
        let flipped = GarblingConfig { gammas: gammas.iter().map(|g| -g).collect(), ..c.clone() };
        let a = prediction_error_closed(&m, &c, &spec).unwrap();
        let b = prediction_error_closed(&m, &flipped, &spec).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn univariate_modes_agree(beta in -5.0f64..5.0, gamma in -1.0f64..1.0, lambda in 0.0f64..3.0, var in 0.0f64..10.0) {
        let spec = CovariateSpec::univariate(var, 1).unwrap();
        let m = RegressionModel::linear(0.0, vec![beta]).unwrap();
        let ind = GarblingConfig::new(vec![gamma], lambda).unwrap();
        let shared = ind.clone().with_noise_mode(NoiseMode::SharedAcrossRegressors);
        let a = prediction_error_closed(&m, &ind, &spec).unwrap();
        prop_assert_eq!(a, prediction_error_closed(&m, &shared, &spec).unwrap());
        let hand = (beta * gamma).powi(2) * (var + lambda * lambda);
        prop_assert!((a - hand).abs() <= 1e-12 * hand.max(1.0));
    }

    #[test]
    fn prediction_error_grows_with_lambda(
        cov in covariance(2),
        betas in prop::collection::vec(-3.0f64..3.0, 2),
        gammas in prop::collection::vec(-1.0f64..1.0, 2),
        l1 in 0.0f64..3.0,
        dl in 0.0f64..3.0,
        mode in mode(),
    ) {
        let spec = CovariateSpec::centered(cov, 1).unwrap();
        let m = RegressionModel::linear(0.0, betas).unwrap();
        let c1 = GarblingConfig::new(gammas.clone(), l1).unwrap().with_noise_mode(mode);
        let c2 = GarblingConfig::new(gammas, l1 + dl).unwrap().with_noise_mode(mode);
        prop_assert!(prediction_error_closed(&m, &c1, &spec).unwrap() <= prediction_error_closed(&m, &c2, &spec).unwrap());
    }

    #[test]
    fn sign_choice_never_hurts(
        k in 2usize..6,
        cov in covariance(5),
        betas in prop::collection::vec(-3.0f64..3.0, 5),
        mags in prop::collection::vec(0.0f64..1.0, 5),
        lambda in 0.0f64..2.0,
        mode in mode(),
    ) {
        let sub = Matrix::from_rows(&cov.rows()[..k].iter().map(|r| r[..k].to_vec()).collect::<Vec<_>>()).unwrap();
        let spec = CovariateSpec::centered(sub, 1).unwrap();
        let m = RegressionModel::linear(0.0, betas[..k].to_vec()).unwrap();
        let chosen = choose_gamma_signs(&m, &mags[..k], &spec, lambda, mode).unwrap();
        let positive = GarblingConfig::new(mags[..k].to_vec(), lambda).unwrap().with_noise_mode(mode);
        prop_assert!(prediction_error_closed(&m, &chosen, &spec).unwrap() <= prediction_error_closed(&m, &positive, &spec).unwrap());
        for (g, mag) in chosen.gammas.iter().zip(&mags[..k]) {
            prop_assert_eq!(g.abs(), *mag);
        }
    }

    #[test]
    fn recovery_is_exact_at_the_limits(beta in 0.1f64..10.0, gamma in 0.01f64..2.0, lambda in 0.1f64..5.0, flip in any::<bool>()) {
        let (beta, gamma) = if flip { (-beta, -gamma) } else { (beta, gamma) };
        let fit = FitResult {
            intercept_hat: 0.0,
            slopes_hat: vec![(1.0 + gamma) * beta],
            residual_variance: (beta * gamma * lambda).powi(2),
            n: 1,
        };
        let rec = recover_beta_known_lambda(&fit, lambda).unwrap();
        prop_assert!((rec - beta).abs() <= 1e-9 * beta.abs().max(1.0));
    }

    #[test]
    fn ungarbled_service_is_clean_bit_for_bit(
        x in prop::collection::vec(-100.0f64..100.0, 2),
        lambda in 0.0f64..10.0,
        seed in any::<u64>(),
        logistic_link in any::<bool>(),
        mode in mode(),
    ) {
        let link = if logistic_link { Link::Logistic } else { Link::Identity };
        let m = RegressionModel::new(0.3, vec![1.7, -0.4], link).unwrap();
        let c = GarblingConfig::new(vec![0.0, 0.0], lambda).unwrap().with_noise_mode(mode);
        let mut r = rng::seeded(seed);
        prop_assert_eq!(garble(&x, &c, &mut r).unwrap(), x.clone());
        prop_assert_eq!(
            garbled_predict(&m, &x, &c, &mut r).unwrap().to_bits(),
            predict_clean(&m, &x).unwrap().to_bits()
        );
    }

    #[test]
    fn logit_attack_matches_linear_attack(
        alpha in -1.0f64..1.0,
        beta in -1.5f64..1.5,
        gamma in -0.5f64..0.5,
        lambda in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        // Same index, same noise: probabilities mapped back through logit
        // must reproduce the linear service's fit.
        let spec = CovariateSpec::univariate(1.0, 400).unwrap();
        let d = sample_covariates(&spec, &mut rng::seeded(seed)).unwrap();
        let c = GarblingConfig::new(vec![gamma], lambda).unwrap().with_output_lambda(0.3);
        let lin = RegressionModel::linear(alpha, vec![beta]).unwrap();
        let log = RegressionModel::logistic(alpha, vec![beta]).unwrap();
        let mut noise = rng::seeded(seed ^ 1);
        let mut y_lin = Vec::new();
        let mut y_log = Vec::new();
        for x in d.rows() {
            let eps = [rand_normal(&mut noise)];
            let eta = rand_normal(&mut noise);
            y_lin.push(garbled_predict_with_noise(&lin, x, &c, &eps, eta).unwrap());
            y_log.push(garbled_predict_with_noise(&log, x, &c, &eps, eta).unwrap());
        }
        let a = ols_fit(&d.clone().with_outputs(y_lin).unwrap(), true).unwrap();
        let b = logit_fit(&d.with_outputs(y_log).unwrap()).unwrap();
        prop_assert!((a.slopes_hat[0] - b.slopes_hat[0]).abs() < 1e-6);
        prop_assert!((a.intercept_hat - b.intercept_hat).abs() < 1e-6);
        prop_assert!((a.residual_variance - b.residual_variance).abs() < 1e-6);
    }

    #[test]
    fn covariate_sampling_is_deterministic(seed in any::<u64>(), cov in covariance(2)) {
        let spec = CovariateSpec::centered(cov, 64).unwrap();
        let a = sample_covariates(&spec, &mut rng::seeded(seed)).unwrap();
        let b = sample_covariates(&spec, &mut rng::seeded(seed)).unwrap();
        prop_assert!(a.inputs().iter().zip(b.inputs()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn parallel_simulation_matches_sequential(
        seed in any::<u64>(),
        n in 1usize..20_000,
        gamma in -1.0f64..1.0,
        mode in mode(),
    ) {
        let m = RegressionModel::logistic(0.5, vec![1.0, -2.0]).unwrap();
        let c = GarblingConfig::new(vec![gamma, gamma / 2.0], 1.0).unwrap().with_noise_mode(mode).with_output_lambda(0.1);
        let spec = CovariateSpec::bivariate(1.0, 1.0, 0.2, 1).unwrap();
        let a = simulate_queries(&m, &c, &spec, n, seed, 9, Execution::Sequential).unwrap();
        let b = simulate_queries(&m, &c, &spec, n, seed, 9, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

fn rand_normal(r: &mut rng::StreamRng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(r)
}

#[test]
fn dataset_row_count_must_match_outputs() {
    assert!(Dataset::from_flat(2, vec![0.0; 6], Some(vec![0.0; 2])).is_err());
    assert!(Dataset::from_flat(2, vec![0.0; 6], Some(vec![0.0; 3])).is_ok());
}
