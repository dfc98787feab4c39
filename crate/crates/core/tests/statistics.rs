use hdglm::bench::ks_statistic;
use hdglm::calibrate::{estimate_tau2, MeanCurve};
use hdglm::covariance::CovarianceModel;
use hdglm::data::{sample_dataset, GlmModel, SyntheticConfig};
use hdglm::fit::{fit_ridge, fit_surrogate, FitOptions};
use hdglm::inference::{
    debias_ridge, debiased_ridge_params, infer_with_curve, linear_predictor_ci, pivot_stats, InferOptions,
};
use hdglm::se::{logistic_se_reference, solve_se, SeProblem};

// Pivots of one coordinate set are nearly independent under identity covariance,
// so pooling coordinates across a few replications gives a large normal sample.

#[test]
fn debiased_ridge_pivots_are_standard_normal() {
    let (n, kappa, lambda) = (500, 0.6, 0.1);
    let model = GlmModel::logistic();
    let se = solve_se(&SeProblem { lambda, mc_samples: 100_000, seed: 1, ..SeProblem::new(kappa, 1.0, model) }).unwrap();
    let d = debiased_ridge_params(&se, lambda);
    let mut pivots = Vec::new();
    for rep in 0..4 {
        let data = sample_dataset(&SyntheticConfig::with_kappa(n, kappa, 1.0, 100 + rep), &model, &CovarianceModel::Identity)
            .unwrap();
        let fit = fit_ridge(&data, &model.link, n as f64 * lambda, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let debiased = debias_ridge(fit.beta_hat.as_slice(), se.eta, lambda);
        let tau2 = estimate_tau2(&data).unwrap();
        let piv = pivot_stats(&debiased, Some(data.truth().unwrap().as_slice()), &d, &tau2, n).unwrap();
        pivots.extend(piv.values);
    }
    let (stat, p) = ks_statistic(&pivots).unwrap();
    assert!(p > 0.001, "KS D = {stat}, p = {p}");
    let mean = pivots.iter().sum::<f64>() / pivots.len() as f64;
    assert!(mean.abs() < 0.1, "{mean}");
}

#[test]
fn linear_predictor_intervals_cover() {
    let (n, kappa, gamma2) = (1000, 0.2, 1.0);
    let model = GlmModel::poisson_clipped_exp();
    let se = solve_se(&SeProblem { mc_samples: 100_000, seed: 2, ..SeProblem::new(kappa, gamma2, model) }).unwrap();
    let (mut hits, mut total) = (0usize, 0usize);
    for rep in 0..3 {
        let data = sample_dataset(&SyntheticConfig::with_kappa(n, kappa, gamma2, 200 + rep), &model, &CovarianceModel::Identity)
            .unwrap();
        let fit = fit_surrogate(&data, &model.link, &FitOptions::default()).unwrap();
        let ci = linear_predictor_ci(&data, fit.beta_hat.as_slice(), &se, &model.link, 0.1).unwrap();
        let truth = &data.x * data.truth().unwrap();
        hits += ci.rows.iter().zip(truth.iter()).filter(|(r, t)| r.contains(**t)).count();
        total += n;
    }
    let cov = hits as f64 / total as f64;
    assert!((cov - 0.9).abs() < 0.03, "coverage {cov}");
}

#[test]
fn logistic_reference_is_seed_stable() {
    let sols: Vec<_> = [1u64, 2, 3].iter().map(|&s| logistic_se_reference(0.1, 5.0, 200_000, s).unwrap()).collect();
    for a in &sols {
        for b in &sols {
            assert!(a.rel_diff(b) < 0.02, "{a:?} vs {b:?}");
        }
    }
    // the unpenalized logistic estimator is inflated
    assert!(sols[0].mu > 1.0);
}

#[test]
fn end_to_end_inference_covers() {
    let (n, kappa, gamma2) = (1000, 0.2, 1.0);
    let model = GlmModel::poisson_clipped_exp();
    let curve = MeanCurve::new(200_000, 3);
    let opts = InferOptions { se_samples: 50_000, classical: false, ..InferOptions::new(3) };
    let (mut hits, mut total) = (0usize, 0usize);
    for rep in 0..5 {
        let data = sample_dataset(&SyntheticConfig::with_kappa(n, kappa, gamma2, 300 + rep), &model, &CovarianceModel::Identity)
            .unwrap();
        let out = infer_with_curve(&curve, &data, &model, &opts).unwrap();
        assert!((out.hyper.gamma2_hat - gamma2).abs() < 0.2, "{}", out.hyper.gamma2_hat);
        let truth = data.truth().unwrap();
        hits += out.corrected.rows.iter().zip(truth.iter()).filter(|(r, t)| r.contains(**t)).count();
        total += data.p();
    }
    let cov = hits as f64 / total as f64;
    assert!((cov - 0.9).abs() < 0.04, "coverage {cov}");
}

#[test]
fn poisson_variance_factor_grows_with_kappa() {
    let model = GlmModel::poisson_clipped_exp();
    let sols: Vec<_> = [0.1, 0.2, 0.3, 0.4, 0.5]
        .iter()
        .map(|&k| solve_se(&SeProblem { mc_samples: 50_000, seed: 4, ..SeProblem::new(k, 1.0, model) }).unwrap())
        .collect();
    assert!(sols.windows(2).all(|w| w[1].sigma2 > w[0].sigma2), "{sols:?}");

    let data = sample_dataset(&SyntheticConfig::with_kappa(4000, 0.1, 1.0, 400), &model, &CovarianceModel::Identity).unwrap();
    let fit = fit_surrogate(&data, &model.link, &FitOptions::default()).unwrap();
    let (mu_n, _) = hdglm::fit::empirical_se(&fit.beta_hat, data.beta_true.as_ref(), &CovarianceModel::Identity, 4000).unwrap();
    assert!((mu_n - sols[0].mu).abs() < 0.1 * sols[0].mu, "{mu_n} vs {}", sols[0].mu);
}
