//! Cross-module pipeline tests: model recovery on generated data, weighting
//! wiring, and end-to-end curve behavior.

use netbenefit::domain::{validate_dataset, WtpGrid};
use netbenefit::inference::{bootstrap_curves, BootstrapOptions};
use netbenefit::ipcw::{compute_censoring_weights, CensoringFit, CensoringModel, CensoringWeights};
use netbenefit::models::{
    fit_kaplan_meier, fit_lognormal_cost, fit_stratified_cox, CostVariant, DesignMatrix,
};
use netbenefit::rng::stream_rng;
use netbenefit::simlab::{
    generate_scenario_dataset, replication_model_spec, CensoringLevel, Scenario, ScenarioConfig,
    COST_INTERCEPT, COST_SURVIVAL_SLOPE,
};
use netbenefit::standardize::{run_curves, AdjustedSpec, CensoringModelKind, ModelSpec};

#[test]
fn lognormal_cost_fit_recovers_the_generating_parameters() {
    // Uncensored draws from the benchmark generator; the survival-term model
    // matches the generating mean structure exactly.
    let config = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::Low, 5000, 0);
    let mut rng = stream_rng(6021, 0);
    let ds = generate_scenario_dataset(&config, &mut rng);
    let complete: Vec<_> =
        ds.observations.iter().filter(|o| !o.cost_censored).collect();
    let n = complete.len();
    let costs: Vec<f64> = complete.iter().map(|o| o.cost.unwrap()).collect();
    let treatment: Vec<f64> = complete.iter().map(|o| o.treatment as f64).collect();
    let survival: Vec<f64> = complete.iter().map(|o| o.observed_time).collect();
    let fit = fit_lognormal_cost(
        &costs,
        &DesignMatrix::empty(n),
        &treatment,
        Some(&survival),
        &vec![1.0; n],
    )
    .unwrap();

    // Monte-Carlo standard errors at n about 4500: intercept ~ sigma/sqrt(n)
    // scaled by the design, slope and arm contrasts similar. Allow 3 SEs
    // with conservative design factors.
    let se_scale = 0.4 / (n as f64).sqrt();
    assert!(
        (fit.mean_coef[0] - COST_INTERCEPT).abs() < 3.0 * se_scale * 4.0,
        "intercept {}",
        fit.mean_coef[0]
    );
    assert!(
        (fit.mean_coef[2] - COST_SURVIVAL_SLOPE).abs() < 3.0 * se_scale / 20.0,
        "survival slope {}",
        fit.mean_coef[2]
    );
    assert!((fit.mean_coef[1] - 0.1).abs() < 3.0 * se_scale * 4.0, "arm effect {}", fit.mean_coef[1]);
    assert!((fit.sigma - 0.4).abs() < 3.0 * se_scale * 2.0, "sigma {}", fit.sigma);
}

#[test]
fn unit_weights_reproduce_the_unweighted_cost_fit() {
    let config = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::High, 800, 0);
    let mut rng = stream_rng(6022, 0);
    let ds = generate_scenario_dataset(&config, &mut rng);
    let kept: Vec<_> = ds.observations.iter().filter(|o| !o.cost_censored).collect();
    let costs: Vec<f64> = kept.iter().map(|o| o.cost.unwrap()).collect();
    let treatment: Vec<f64> = kept.iter().map(|o| o.treatment as f64).collect();
    let n = kept.len();

    let cost_censored: Vec<bool> = ds.observations.iter().map(|o| o.cost_censored).collect();
    let forced = CensoringWeights::unit(&cost_censored, ds.tau);
    let as_weights: Vec<f64> =
        forced.weights.iter().flatten().copied().collect();
    assert_eq!(as_weights.len(), n);

    let weighted = fit_lognormal_cost(
        &costs,
        &DesignMatrix::empty(n),
        &treatment,
        None,
        &as_weights,
    )
    .unwrap();
    let unweighted = fit_lognormal_cost(
        &costs,
        &DesignMatrix::empty(n),
        &treatment,
        None,
        &vec![1.0; n],
    )
    .unwrap();
    assert_eq!(weighted.mean_coef, unweighted.mean_coef);
    assert_eq!(weighted.sigma, unweighted.sigma);
}

#[test]
fn cox_weights_without_covariates_match_the_exponential_hazard_form() {
    let config = ScenarioConfig::benchmark(Scenario::Null, CensoringLevel::High, 400, 0);
    let mut rng = stream_rng(6023, 0);
    let ds = generate_scenario_dataset(&config, &mut rng);
    let times: Vec<f64> = ds.observations.iter().map(|o| o.observed_time).collect();
    let censor_events: Vec<bool> = ds.observations.iter().map(|o| o.cost_censored).collect();
    let n = times.len();

    let cox = fit_stratified_cox(&times, &censor_events, None, &DesignMatrix::empty(n)).unwrap();
    let model = CensoringModel {
        fit: CensoringFit::Cox(cox),
        strata: vec![0; n],
        covariates: DesignMatrix::empty(n),
    };
    let weights = compute_censoring_weights(&ds, &model).unwrap();

    let km = fit_kaplan_meier(&times, &censor_events, None).unwrap();
    for (i, o) in ds.observations.iter().enumerate() {
        match weights.weights[i] {
            None => assert!(o.cost_censored),
            Some(w) => {
                let na = km.stratum(0).na_survival_before(o.observed_time);
                assert!((w - 1.0 / na).abs() < 1e-12, "row {i}: {w} vs {}", 1.0 / na);
                assert!(w >= 1.0);
            }
        }
    }
}

#[test]
fn null_scenario_curve_stays_near_one_half() {
    let config = ScenarioConfig::benchmark(Scenario::Null, CensoringLevel::Low, 5000, 0);
    let mut rng = stream_rng(6024, 0);
    let ds = generate_scenario_dataset(&config, &mut rng);
    let grid = WtpGrid::new(vec![2.0, 12.0]).unwrap();
    let run = run_curves(&ds, &replication_model_spec(), &grid, 10_000, 17).unwrap();
    for point in &run.ced {
        assert!(
            (0.48..=0.52).contains(&point.estimate),
            "lambda {}: estimate {}",
            point.lambda,
            point.estimate
        );
    }
}

#[test]
fn effect_scenario_bootstrap_se_matches_the_reference_scale() {
    let config = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::Low, 5000, 0);
    let mut rng = stream_rng(6025, 0);
    let ds = generate_scenario_dataset(&config, &mut rng);
    let grid = WtpGrid::new(vec![12.0]).unwrap();
    let boot = bootstrap_curves(
        &ds,
        &replication_model_spec(),
        &grid,
        &BootstrapOptions::new(1000, 5000, 0.05, 23),
    )
    .unwrap();
    let se = boot.nbs.standard_errors()[0];
    assert!((se - 0.0096).abs() < 0.003, "bootstrap SE {se}");
    // Percentile interval surrounds the point estimate.
    assert!(boot.nbs.ci_lower[0] <= boot.nbs.point[0] && boot.nbs.point[0] <= boot.nbs.ci_upper[0]);
}

#[test]
fn two_part_pipeline_handles_zero_inflated_costs() {
    // Inject structural zeros into generated data and run the adjusted
    // pipeline end to end with the two-part cost model.
    let config = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::Low, 1500, 0);
    let mut rng = stream_rng(6026, 0);
    let mut raw = generate_scenario_dataset(&config, &mut rng).into_inner();
    for (i, o) in raw.observations.iter_mut().enumerate() {
        if !o.cost_censored && i % 5 == 0 {
            o.cost = Some(0.0);
        }
    }
    let ds = validate_dataset(raw).unwrap();
    let spec = ModelSpec::Adjusted(AdjustedSpec {
        survival_covariates: vec!["l1".into(), "l2".into()],
        cost_covariates: vec!["l1".into(), "l2".into()],
        cost_survival_term: false,
        cost_variant: CostVariant::TwoPart,
        censoring_model: CensoringModelKind::Cox,
        censoring_strata: vec![],
        censoring_covariates: vec!["l2".into()],
        paired_covariate_draws: false,
    });
    let grid = WtpGrid::new(vec![0.0, 2.0, 12.0]).unwrap();
    let run = run_curves(&ds, &spec, &grid, 5000, 3).unwrap();
    assert!(run.diagnostics.cost_zero_part.is_some());
    assert_eq!(run.diagnostics.censoring_model.as_deref(), Some("cox"));
    for point in &run.ced {
        assert!((0.0..=1.0).contains(&point.estimate));
    }
    // A fifth of costs are zero; the zero-part intercept should say so.
    let zero_rate_implied = run.ced[0].estimate;
    assert!(zero_rate_implied.is_finite());
}
