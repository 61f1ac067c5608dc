//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). Criteria 1 and 2
//! replicate the benchmark tables and take a few minutes on two cores.

use netbenefit::domain::{
    validate_dataset, CostEffectivenessDataset, Observation, ValidatedDataset, WtpGrid,
};
use netbenefit::inference::{bootstrap_curves, cea_curve, BootstrapOptions};
use netbenefit::ipcw::{compute_censoring_weights, CensoringFit, CensoringModel};
use netbenefit::models::{
    fit_kaplan_meier, fit_logistic, fit_lognormal_cost, fit_stratified_cox, DesignMatrix,
    WeibullAftFit,
};
use netbenefit::rankstats::nbs_two_sample;
use netbenefit::rng::{child_seed, stream_rng};
use netbenefit::simlab::{
    oracle_true_theta, run_replication_study, CensoringLevel, ReplicationCell, ReplicationOptions,
    Scenario, ScenarioConfig,
};
use netbenefit::standardize::ModelSpec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Seed of record for the replication criteria.
const STUDY_SEED: u64 = 1729;

fn report(criterion: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {status} - {detail}");
    assert!(pass, "{criterion} failed: {detail}");
}

#[test]
fn criterion_1_null_scenario_replication() {
    let cells = [ReplicationCell::benchmark(Scenario::Null, CensoringLevel::Low, 500)];
    let options = ReplicationOptions::new(200, 300, 5000, vec![2.0, 12.0], STUDY_SEED);
    let study = run_replication_study(&cells, &options).unwrap();
    for row in &study.rows {
        let mean_ok = (row.mean_est - 0.500).abs() <= 0.010;
        let se_ok = (0.018..=0.030).contains(&row.mean_se);
        // The cell mean must also sit within Monte-Carlo error of 1/2.
        let mc_ok = (row.mean_est - 0.500).abs() <= 3.0 * row.ese / (row.n_ok as f64).sqrt();
        report(
            "criterion 1 (null replication)",
            mean_ok && se_ok && mc_ok,
            &format!(
                "lambda {}: mean estimate {:.4} (target 0.500 +/- 0.010, within 3 MC SEs: {mc_ok}), mean bootstrap SE {:.4} (window [0.018, 0.030]), {} ok / {} failed",
                row.lambda, row.mean_est, row.mean_se, row.n_ok, row.n_failed
            ),
        );
    }
}

#[test]
fn criterion_2_effect_scenario_replication() {
    // Reference estimator means and empirical standard errors at n = 500.
    let targets_500 = [(2.0, 0.731, 0.0242), (12.0, 0.771, 0.0198)];
    let cells = [ReplicationCell::benchmark(Scenario::Effect, CensoringLevel::Low, 500)];
    let options = ReplicationOptions::new(200, 300, 5000, vec![2.0, 12.0], STUDY_SEED);
    let study = run_replication_study(&cells, &options).unwrap();
    for (row, (lambda, mean_target, ese_target)) in study.rows.iter().zip(targets_500) {
        assert_eq!(row.lambda, lambda);
        let mean_ok = (row.mean_est - mean_target).abs() <= 0.015;
        let ese_ok = (row.ese - ese_target).abs() <= 0.30 * ese_target;
        report(
            "criterion 2 (effect replication, n=500)",
            mean_ok && ese_ok,
            &format!(
                "lambda {}: mean estimate {:.4} (target {} +/- 0.015), ESE {:.4} (target {} +/- 30%)",
                lambda, row.mean_est, mean_target, row.ese, ese_target
            ),
        );
    }

    let targets_5000 = [(2.0, 0.730), (12.0, 0.771)];
    let cells = [ReplicationCell::benchmark(Scenario::Effect, CensoringLevel::Low, 5000)];
    let options = ReplicationOptions::new(50, 300, 5000, vec![2.0, 12.0], STUDY_SEED);
    let study = run_replication_study(&cells, &options).unwrap();
    for (row, (lambda, mean_target)) in study.rows.iter().zip(targets_5000) {
        assert_eq!(row.lambda, lambda);
        let mean_ok = (row.mean_est - mean_target).abs() <= 0.008;
        report(
            "criterion 2 (effect replication, n=5000)",
            mean_ok,
            &format!(
                "lambda {}: mean estimate {:.4} (target {} +/- 0.008)",
                lambda, row.mean_est, mean_target
            ),
        );
    }
}

#[test]
fn criterion_3_oracle_truth() {
    let effect = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::Low, 1, 0);
    let cases = [(2.0, 0.743), (12.0, 0.780)];
    for (lambda, target) in cases {
        let theta = oracle_true_theta(&effect, lambda, 1_000_000, child_seed(STUDY_SEED, 30));
        report(
            "criterion 3 (oracle truth, effect)",
            (theta - target).abs() <= 0.003,
            &format!("lambda {lambda}: oracle {theta:.4} (target {target} +/- 0.003)"),
        );
    }
    let null = ScenarioConfig::benchmark(Scenario::Null, CensoringLevel::Low, 1, 0);
    for lambda in [2.0, 12.0] {
        let theta = oracle_true_theta(&null, lambda, 1_000_000, child_seed(STUDY_SEED, 31));
        report(
            "criterion 3 (oracle truth, null)",
            (theta - 0.500).abs() <= 0.002,
            &format!("lambda {lambda}: oracle {theta:.4} (target 0.500 +/- 0.002)"),
        );
    }
}

#[test]
fn criterion_4_rank_sum_equals_double_sum() {
    let mut rng = stream_rng(child_seed(STUDY_SEED, 40), 0);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n0 = rng.random_range(1..=50);
        let n1 = rng.random_range(1..=50);
        let arm0: Vec<f64> = (0..n0).map(|_| rng.random::<f64>() * 200.0 - 100.0).collect();
        let arm1: Vec<f64> = (0..n1).map(|_| rng.random::<f64>() * 200.0 - 100.0).collect();
        let fast = nbs_two_sample(&arm0, &arm1).unwrap().value;
        // Independent brute force: count cross-arm pairs directly.
        let mut count = 0.0;
        for &b0 in &arm0 {
            for &b1 in &arm1 {
                if b1 > b0 {
                    count += 1.0;
                } else if b1 == b0 {
                    count += 0.5;
                }
            }
        }
        let slow = count / (n0 as f64 * n1 as f64);
        worst = worst.max((fast - slow).abs());
    }
    report(
        "criterion 4 (estimator equivalence)",
        worst <= f64::EPSILON,
        &format!("max |rank form - double sum| over 1000 instances = {worst:.2e} (<= 1 ulp)"),
    );
}

#[test]
fn criterion_5_asymptotic_null_variance() {
    let n_per_arm = 600;
    let n_datasets = 2000;
    let estimates: Vec<f64> = (0..n_datasets)
        .map(|rep| {
            let mut rng = stream_rng(child_seed(STUDY_SEED, 50), rep);
            let lambda = 5.0;
            let inb = |rng: &mut rand_chacha::ChaCha8Rng| {
                let z1: f64 = StandardNormal.sample(rng);
                let z2: f64 = StandardNormal.sample(rng);
                lambda * (10.0 + z1) - (100.0 + 15.0 * z2)
            };
            let arm0: Vec<f64> = (0..n_per_arm).map(|_| inb(&mut rng)).collect();
            let arm1: Vec<f64> = (0..n_per_arm).map(|_| inb(&mut rng)).collect();
            nbs_two_sample(&arm0, &arm1).unwrap().value
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / n_datasets as f64;
    let variance =
        estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n_datasets as f64 - 1.0);
    let scaled = variance * n_per_arm as f64;
    let target = 1.0 / 6.0;
    report(
        "criterion 5 (asymptotic null variance)",
        (scaled - target).abs() <= 0.15 * target,
        &format!("Var * n_treated = {scaled:.4} (target {target:.4} +/- 15%)"),
    );
}

fn known_icer_dataset(n: usize, seed: u64) -> ValidatedDataset {
    // Mean survival difference 1, mean cost difference 50: ICER = 50.
    let mut rng = stream_rng(seed, 0);
    let observations = (0..n)
        .map(|i| {
            let arm = (i % 2) as u8;
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let survival = 10.0 + arm as f64 + z1;
            let cost = 200.0 + 50.0 * arm as f64 + 20.0 * z2;
            Observation {
                id: (i + 1).to_string(),
                treatment: arm,
                observed_time: survival.max(0.01),
                survival_censored: false,
                cost_censored: false,
                cost: Some(cost.max(0.0)),
                covariates: vec![],
            }
        })
        .collect();
    validate_dataset(CostEffectivenessDataset {
        observations,
        covariate_names: vec![],
        tau: f64::INFINITY,
    })
    .unwrap()
}

#[test]
fn criterion_6_cea_limiting_behavior() {
    let dataset = known_icer_dataset(50_000, child_seed(STUDY_SEED, 60));
    let grid = WtpGrid::from_range(20.0, 80.0, 5.0).unwrap();
    let boot = bootstrap_curves(
        &dataset,
        &ModelSpec::Unadjusted,
        &grid,
        &BootstrapOptions::new(500, 1, 0.05, child_seed(STUDY_SEED, 61)),
    )
    .unwrap();
    let cea = cea_curve(&boot.nmb);
    let mut low_ok = true;
    let mut high_ok = true;
    for (&lambda, &value) in cea.lambdas.iter().zip(&cea.values) {
        if lambda <= 40.0 && value > 0.05 {
            low_ok = false;
        }
        if lambda >= 60.0 && value < 0.95 {
            high_ok = false;
        }
    }
    // The 0.5 crossing must happen between grid neighbours bracketing 50.
    let crossing = cea
        .lambdas
        .windows(2)
        .zip(cea.values.windows(2))
        .find(|(_, v)| v[0] < 0.5 && v[1] >= 0.5)
        .map(|(l, _)| (l[0], l[1]));
    let crossing_ok = crossing.is_some_and(|(lo, hi)| lo <= 50.0 && 50.0 <= hi);
    report(
        "criterion 6 (acceptability curve limit)",
        low_ok && high_ok && crossing_ok,
        &format!(
            "CEA <= 0.05 below 40: {low_ok}; >= 0.95 above 60: {high_ok}; 0.5 crossing at {crossing:?} brackets the ICER 50"
        ),
    );
}

#[test]
fn criterion_7_hand_oracles() {
    // Product-limit fixtures.
    let km = fit_kaplan_meier(&[1.0, 2.0, 3.0], &[true, true, true], None).unwrap();
    let s = km.stratum(0);
    let km_all_events = s.survival_at(1.0) == 2.0 / 3.0
        && s.survival_at(2.0) == 1.0 / 3.0
        && s.survival_at(3.0) == 0.0;
    let km2 = fit_kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true], None).unwrap();
    let s2 = km2.stratum(0);
    let km_censored = s2.survival_at(1.0) == 2.0 / 3.0 && s2.survival_at(3.0) == 0.0;
    report(
        "criterion 7 (hand oracle: product limit)",
        km_all_events && km_censored,
        &format!(
            "all-event fixture S(1)={} S(2)={} S(3)={}; censored fixture S(1)={} S(3)={}",
            s.survival_at(1.0),
            s.survival_at(2.0),
            s.survival_at(3.0),
            s2.survival_at(1.0),
            s2.survival_at(3.0)
        ),
    );

    // Censoring-weight fixture: one censoring event at t = 1 among three at
    // risk gives weight exp(1/3) to anyone observed past it.
    let observations = vec![
        Observation {
            id: "1".into(),
            treatment: 0,
            observed_time: 1.0,
            survival_censored: true,
            cost_censored: true,
            cost: None,
            covariates: vec![],
        },
        Observation {
            id: "2".into(),
            treatment: 0,
            observed_time: 2.0,
            survival_censored: false,
            cost_censored: false,
            cost: Some(4.0),
            covariates: vec![],
        },
        Observation {
            id: "3".into(),
            treatment: 1,
            observed_time: 3.0,
            survival_censored: false,
            cost_censored: false,
            cost: Some(9.0),
            covariates: vec![],
        },
    ];
    let dataset = validate_dataset(CostEffectivenessDataset {
        observations,
        covariate_names: vec![],
        tau: f64::INFINITY,
    })
    .unwrap();
    let cox = fit_stratified_cox(
        &[1.0, 2.0, 3.0],
        &[true, false, false],
        None,
        &DesignMatrix::empty(3),
    )
    .unwrap();
    let model =
        CensoringModel { fit: CensoringFit::Cox(cox), strata: vec![0; 3], covariates: DesignMatrix::empty(3) };
    let weights = compute_censoring_weights(&dataset, &model).unwrap();
    let expected = (1.0f64 / 3.0).exp();
    let weight_error = (weights.weights[1].unwrap() - expected)
        .abs()
        .max((weights.weights[2].unwrap() - expected).abs());
    report(
        "criterion 7 (hand oracle: censoring weight)",
        weight_error < 1e-12,
        &format!("weight {} vs exp(1/3) = {expected}, error {weight_error:.2e}", weights.weights[1].unwrap()),
    );

    // Ten-row proportional hazards fit against a grid search of the partial
    // likelihood at 1e-4 resolution.
    let times = [2.0, 3.0, 5.0, 7.0, 8.0, 1.0, 4.0, 6.0, 9.0, 10.0];
    let events = [true, true, false, true, true, true, false, true, true, false];
    let cov = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    let fit = fit_stratified_cox(&times, &events, None, &DesignMatrix::from_column(&cov)).unwrap();
    let partial_ll = |beta: f64| -> f64 {
        let mut ll = 0.0;
        for i in 0..times.len() {
            if events[i] {
                let denom: f64 = (0..times.len())
                    .filter(|&k| times[k] >= times[i])
                    .map(|k| (beta * cov[k]).exp())
                    .sum();
                ll += beta * cov[i] - denom.ln();
            }
        }
        ll
    };
    let mut best = (f64::NEG_INFINITY, 0.0);
    let mut beta = -3.0;
    while beta <= 3.0 {
        let ll = partial_ll(beta);
        if ll > best.0 {
            best = (ll, beta);
        }
        beta += 1e-4;
    }
    report(
        "criterion 7 (hand oracle: proportional hazards)",
        (fit.coef[0] - best.1).abs() <= 1e-4 + 1e-9,
        &format!("Newton coefficient {:.6} vs grid optimum {:.6}", fit.coef[0], best.1),
    );
}

#[test]
fn criterion_8_closed_form_fits() {
    let outcomes: Vec<bool> = (0..200).map(|i| i % 4 == 0).collect();
    let logistic =
        fit_logistic(&outcomes, &DesignMatrix::empty(200), &vec![1.0; 200]).unwrap();
    let logit_quarter = (0.25f64 / 0.75).ln();
    let logistic_err = (logistic.coef[0] - logit_quarter).abs();

    let mut rng = stream_rng(child_seed(STUDY_SEED, 80), 0);
    let costs: Vec<f64> = (0..300)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            (3.0 + 0.5 * z).exp()
        })
        .collect();
    let fit = fit_lognormal_cost(
        &costs,
        &DesignMatrix::empty(300),
        &vec![0.0; 300],
        None,
        &vec![1.0; 300],
    )
    .unwrap();
    let mean_log = costs.iter().map(|c| c.ln()).sum::<f64>() / 300.0;
    let sd_log =
        (costs.iter().map(|c| (c.ln() - mean_log).powi(2)).sum::<f64>() / 300.0).sqrt();
    let lognormal_err = (fit.mean_coef[0] - mean_log).abs().max((fit.sigma - sd_log).abs());
    report(
        "criterion 8 (closed-form fits)",
        logistic_err < 1e-10 && lognormal_err < 1e-10,
        &format!("logistic intercept error {logistic_err:.2e}, log-normal error {lognormal_err:.2e} (tolerance 1e-10)"),
    );
}

#[test]
fn criterion_9_determinism_across_worker_counts() {
    let config = ScenarioConfig::benchmark(Scenario::Effect, CensoringLevel::Low, 300, 0);
    let mut rng = stream_rng(child_seed(STUDY_SEED, 90), 0);
    let dataset = netbenefit::simlab::generate_scenario_dataset(&config, &mut rng);
    let grid = WtpGrid::new(vec![2.0, 12.0]).unwrap();
    let spec = netbenefit::simlab::replication_model_spec();
    let options = BootstrapOptions::new(40, 1000, 0.05, child_seed(STUDY_SEED, 91));

    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bootstrap_curves(&dataset, &spec, &grid, &options).unwrap())
    };
    let one = run(1);
    let two = run(2);
    let four = run(4);
    let estimate_same = one.nbs.point == two.nbs.point
        && two.nbs.point == four.nbs.point
        && one.nbs.replicates == two.nbs.replicates
        && two.nbs.replicates == four.nbs.replicates
        && one.nmb.ci_lower == two.nmb.ci_lower
        && two.nmb.ci_lower == four.nmb.ci_lower;

    let cells = [ReplicationCell::benchmark(Scenario::Null, CensoringLevel::Low, 120)];
    let mut sim_options = ReplicationOptions::new(6, 10, 200, vec![2.0], child_seed(STUDY_SEED, 92));
    sim_options.m_oracle = 20_000;
    let sim = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_replication_study(&cells, &sim_options).unwrap())
    };
    let simulate_same = sim(1) == sim(3);
    report(
        "criterion 9 (determinism across worker counts)",
        estimate_same && simulate_same,
        &format!("estimation pipeline identical across 1/2/4 workers: {estimate_same}; replication study identical across 1/3 workers: {simulate_same}"),
    );
}

#[test]
fn criterion_10_sampling_distribution() {
    let fit = WeibullAftFit::from_parameters(2.0, vec![4.5, 0.0], 0);
    let scale = 4.5f64.exp();
    let n = 1_000_000usize;
    let mut rng = stream_rng(child_seed(STUDY_SEED, 100), 0);
    let mut draws: Vec<f64> =
        (0..n).map(|_| netbenefit::models::sample_survival_draw(&fit, &[], 1, &mut rng)).collect();
    draws.sort_unstable_by(f64::total_cmp);
    let mut ks: f64 = 0.0;
    for (i, &t) in draws.iter().enumerate() {
        let cdf = 1.0 - (-(t / scale).powi(2)).exp();
        let hi = (i + 1) as f64 / n as f64 - cdf;
        let lo = cdf - i as f64 / n as f64;
        ks = ks.max(hi.max(lo));
    }
    report(
        "criterion 10 (sampling distribution)",
        ks < 0.002,
        &format!("Kolmogorov-Smirnov statistic {ks:.5} over 1e6 draws (threshold 0.002)"),
    );
}
