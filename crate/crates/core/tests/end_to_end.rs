use proptest::prelude::*;
use smc_ei::optimizer::drive;
use smc_ei::{
    integrated_log_likelihood, run_reference_ei, run_smc_ei, AskTell, ConditionedGp, Domain, EvaluationHistory,
    Execution, HyperParameters, OptimizerConfig, ReferenceModel, SmcEi,
};

fn bowl(x: &[f64]) -> f64 {
    -(x[0] - 0.3).powi(2) - 0.5 * (x[1] - 0.7).powi(2)
}

fn objective(x: &[f64]) -> smc_ei::Result<f64> {
    Ok(bowl(x))
}

fn small_config(domain: &Domain, budget: usize) -> OptimizerConfig {
    let mut config = OptimizerConfig::for_domain(domain);
    config.particles = 20;
    config.per_particle = 20;
    config.budget = budget;
    config.seed = 5;
    config
}

#[test]
fn smc_ei_closes_in_on_a_smooth_maximum() {
    let domain = Domain::unit_cube(2);
    let config = small_config(&domain, 20);
    let trace = run_smc_ei(objective, &domain, &config).unwrap();
    assert_eq!(trace.records.len(), 20);
    for (k, r) in trace.records.iter().enumerate() {
        assert_eq!(r.n, k + 1);
        assert!(domain.contains(&r.x));
        assert_eq!(r.value, bowl(&r.x));
        if k > 0 {
            assert!(r.best >= trace.records[k - 1].best);
        }
    }
    let design_best = trace.records[config.n0 - 1].best;
    let best = trace.final_best().unwrap();
    assert!(
        best > design_best,
        "no progress past the design: {best} vs {design_best}"
    );
    assert!(best > -1e-3, "final best {best}");
}

#[test]
fn ask_tell_by_hand_matches_the_driver() {
    let domain = Domain::unit_cube(2);
    let config = small_config(&domain, 12);
    let driven = run_smc_ei(objective, &domain, &config).unwrap();

    let mut opt = SmcEi::new(&domain, config.clone()).unwrap();
    for r in &driven.records {
        let x = opt.ask().unwrap();
        assert_eq!(x, r.x);
        let info = opt.tell(&x, bowl(&x)).unwrap();
        assert_eq!(info.ess.map(f64::to_bits), r.ess.map(f64::to_bits));
    }
    assert_eq!(opt.evaluations(), 12);
    assert_eq!(opt.best(), driven.final_best());
    assert_eq!(opt.particles().unwrap().len(), config.particles);
}

#[test]
fn tell_rejects_bad_observations() {
    let domain = Domain::unit_cube(2);
    let mut opt = SmcEi::new(&domain, small_config(&domain, 10)).unwrap();
    let x = opt.ask().unwrap();
    assert!(opt.tell(&[0.5], 1.0).is_err());
    assert!(opt.tell(&[1.5, 0.5], 1.0).is_err());
    assert!(opt.tell(&x, f64::NAN).is_err());
    assert_eq!(opt.evaluations(), 0);
    opt.tell(&x, bowl(&x)).unwrap();
    assert_eq!(opt.evaluations(), 1);
}

#[test]
fn reference_ei_with_the_true_scale_makes_progress() {
    let domain = Domain::unit_cube(2);
    let config = small_config(&domain, 16);
    let model = ReferenceModel::integrated(HyperParameters::from_ranges(&[0.5, 0.7]).unwrap());
    let trace = run_reference_ei(objective, &domain, &config, model).unwrap();
    assert_eq!(trace.records.len(), 16);
    assert!(trace.final_best().unwrap() > trace.records[config.n0 - 1].best);
}

#[test]
fn serial_and_parallel_runs_agree_through_the_trait_object() {
    let domain = Domain::unit_cube(2);
    let mut config = small_config(&domain, 10);
    let mut traces = Vec::new();
    for exec in [Execution::Serial, Execution::Parallel] {
        config.exec = exec;
        let mut opt: Box<dyn AskTell> = Box::new(SmcEi::new(&domain, config.clone()).unwrap());
        traces.push(drive(opt.as_mut(), objective, 10).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn predictive_interpolates_the_data() {
    let points = vec![vec![0.1, 0.2], vec![0.8, 0.4], vec![0.5, 0.9], vec![0.3, 0.6]];
    let values: Vec<f64> = points.iter().map(|p| bowl(p)).collect();
    let history = EvaluationHistory::new(points.clone(), values.clone()).unwrap();
    let gp = ConditionedGp::new(&history, &HyperParameters::from_ranges(&[0.4, 0.4]).unwrap()).unwrap();
    let sigma = gp.variance_estimate().sqrt();
    for (p, v) in points.iter().zip(&values) {
        let pred = gp.predict(p);
        assert!((pred.location - v).abs() <= 1e-8 * (1.0 + v.abs()));
        assert!(pred.scale <= 1e-6 * sigma);
    }
    let away = gp.predict(&[0.95, 0.05]);
    assert!(away.scale > 1e-3 * sigma);
    assert_eq!(away.dof, 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn likelihood_ignores_the_order_of_the_data(
        raw in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, -2.0..2.0f64), 4..9),
        log_range in -2.0..0.5f64,
        shift in 1usize..8,
    ) {
        let points: Vec<Vec<f64>> = raw.iter().map(|r| vec![r.0, r.1]).collect();
        let values: Vec<f64> = raw.iter().map(|r| r.2).collect();
        let theta = HyperParameters::new(vec![log_range, log_range]).unwrap();
        let Ok(history) = EvaluationHistory::new(points.clone(), values.clone()) else { return Ok(()) };
        let Ok(base) = integrated_log_likelihood(&history, &theta) else { return Ok(()) };
        let k = shift % points.len();
        let mut p2 = points.clone();
        let mut v2 = values.clone();
        p2.rotate_left(k);
        v2.rotate_left(k);
        let rotated = integrated_log_likelihood(&EvaluationHistory::new(p2, v2).unwrap(), &theta).unwrap();
        prop_assert!((base - rotated).abs() <= 1e-7 * (1.0 + base.abs()), "{base} vs {rotated}");
    }

    #[test]
    fn likelihood_differences_survive_affine_rescaling(
        raw in prop::collection::vec((0.0..1.0f64, -2.0..2.0f64), 4..9),
        a in 0.01..100.0f64,
        b in -50.0..50.0f64,
        l1 in -2.0..0.5f64,
        l2 in -2.0..0.5f64,
    ) {
        let points: Vec<Vec<f64>> = raw.iter().map(|r| vec![r.0]).collect();
        let values: Vec<f64> = raw.iter().map(|r| r.1).collect();
        let scaled: Vec<f64> = values.iter().map(|v| a * v + b).collect();
        let Ok(h1) = EvaluationHistory::new(points.clone(), values) else { return Ok(()) };
        let h2 = EvaluationHistory::new(points, scaled).unwrap();
        let t1 = HyperParameters::new(vec![l1]).unwrap();
        let t2 = HyperParameters::new(vec![l2]).unwrap();
        let (Ok(x1), Ok(x2)) = (integrated_log_likelihood(&h1, &t1), integrated_log_likelihood(&h1, &t2)) else {
            return Ok(());
        };
        let y1 = integrated_log_likelihood(&h2, &t1).unwrap();
        let y2 = integrated_log_likelihood(&h2, &t2).unwrap();
        prop_assert!(((x1 - x2) - (y1 - y2)).abs() <= 1e-6 * (1.0 + (x1 - x2).abs()));
    }
}
