use sgp_core::diagnostics::{sup_traj_distance, trunc_wass_to_dirac};
use sgp_core::flow::{run_full_flow, run_sgp, IntegratorSpec, RunConfig};
use sgp_core::index::{IndexProcessSpec, IndexValue, InitialIndex};
use sgp_core::problems::{ParameterVector, PolyRegression, PolyRegressionSpec, Problem, QuadraticToy};
use sgp_core::schedules::{MuFamily, TimeDilation};
use sgp_core::seeding::derive_seed;

fn jump(rate: f64) -> IndexProcessSpec {
    IndexProcessSpec::JumpUniform { rate, lo: -1.0, hi: 1.0 }
}

#[test]
fn regression_trajectories_stay_bounded() {
    let p = PolyRegression::new(&PolyRegressionSpec::default(), 1).unwrap();
    let theta0 = ParameterVector::from_element(9, 0.5);
    let star = p.minimizer().unwrap();
    for index in [jump(0.1), IndexProcessSpec::ReflectedBrownian { sigma: 0.5, lo: -1.0, hi: 1.0 }] {
        let mut cfg = RunConfig::constant_rate(index, 1.0, 500.0, 0.1, theta0.clone(), 2).unwrap();
        cfg.index_step = Some(1e-2);
        let traj = run_sgp(&p, &cfg).unwrap();
        let bound = (&theta0 - &star).norm() + 10.0;
        assert!(traj.states.iter().all(|s| (s - &star).norm() < bound));
    }
}

#[test]
fn shared_index_path_contracts() {
    // Same seed means the same index path; the midpoint map contracts at rate κ.
    let problems: Vec<(Box<dyn Problem>, usize)> = vec![
        (Box::new(QuadraticToy::new()), 1),
        (Box::new(PolyRegression::new(&PolyRegressionSpec::default(), 3).unwrap()), 9),
    ];
    for (p, k) in problems {
        let a0 = ParameterVector::from_element(k, 2.0);
        let b0 = ParameterVector::from_element(k, -1.0);
        let run = |theta0: &ParameterVector| {
            let cfg = RunConfig::constant_rate(jump(1.0), 0.1, 20.0, 0.05, theta0.clone(), 11).unwrap();
            run_sgp(p.as_ref(), &cfg).unwrap()
        };
        let (a, b) = (run(&a0), run(&b0));
        let d0 = (&a0 - &b0).norm();
        for ((t, x), y) in a.times.iter().zip(&a.states).zip(&b.states) {
            assert!((x - y).norm() <= d0 * (-p.kappa() * t).exp() * (1.0 + 1e-9) + 1e-12);
        }
    }
}

#[test]
fn smaller_eps_tracks_the_full_flow_better() {
    let toy = QuadraticToy::new();
    let theta0 = ParameterVector::from_element(1, 1.0);
    let h = 1e-3;
    let flow = run_full_flow(&toy, &theta0, 3.0, h, &IntegratorSpec::midpoint()).unwrap();
    let mean_sup = |eps: f64| {
        (0..20)
            .map(|j| {
                let cfg = RunConfig::constant_rate(jump(1.0), eps, 3.0, h, theta0.clone(), derive_seed(5, j)).unwrap();
                sup_traj_distance(&run_sgp(&toy, &cfg).unwrap(), &flow).unwrap()
            })
            .sum::<f64>()
            / 20.0
    };
    assert!(mean_sup(0.01) < mean_sup(0.3));
}

#[test]
fn decreasing_rate_concentrates_over_time() {
    let toy = QuadraticToy::new();
    let star = ParameterVector::from_element(1, 1.0 / 3.0);
    let horizon = 100.0;
    let h = 1e-3;
    let mu = MuFamily::PowerLog { scale: 10.0, power: 0.5 };
    let dilation = TimeDilation::smooth(mu, h, horizon).unwrap();
    let terminal_at = |t: f64| -> Vec<ParameterVector> {
        (0..20)
            .map(|j| {
                let cfg = RunConfig {
                    index: jump(10.0),
                    dilation: dilation.clone(),
                    integrator: IntegratorSpec::midpoint(),
                    horizon: t,
                    step: h,
                    index_step: None,
                    minibatch: 1,
                    theta0: ParameterVector::from_element(1, 0.0),
                    init_index: InitialIndex::Stationary,
                    seed: derive_seed(6, j),
                    record_every: usize::MAX,
                };
                run_sgp(&toy, &cfg).unwrap().terminal().clone()
            })
            .collect()
    };
    let early = trunc_wass_to_dirac(&terminal_at(2.0), &star).unwrap();
    let late = trunc_wass_to_dirac(&terminal_at(horizon), &star).unwrap();
    assert!(late < early, "{late} vs {early}");
}

#[test]
fn minibatches_reduce_the_spread() {
    let toy = QuadraticToy::new();
    let theta0 = ParameterVector::from_element(1, 1.0 / 3.0);
    let spread = |m: usize| {
        let xs: Vec<f64> = (0..40)
            .map(|j| {
                let mut cfg = RunConfig::constant_rate(jump(1.0), 0.5, 20.0, 0.01, theta0.clone(), derive_seed(7, j)).unwrap();
                cfg.minibatch = m;
                run_sgp(&toy, &cfg).unwrap().terminal()[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
    };
    assert!(spread(8) < spread(1));
}

#[test]
fn frozen_index_matches_the_subsampled_flow() {
    let toy = QuadraticToy::new();
    let mut cfg = RunConfig::constant_rate(jump(0.0), 1.0, 2.0, 1e-3, ParameterVector::from_element(1, 1.0), 1).unwrap();
    cfg.init_index = InitialIndex::Fixed(IndexValue::Continuous(0.5));
    // θ' = -(θ - 1/4) from θ = 1.
    let traj = run_sgp(&toy, &cfg).unwrap();
    let exact = 0.25 + 0.75 * (-2.0f64).exp();
    assert!((traj.terminal()[0] - exact).abs() < 1e-6);
}
