use rand::Rng;
use sgp_core::index::{
    countable_step, mjp_step, rbm_step, sample_path, stationary_sample, IndexProcess,
    IndexProcessSpec, IndexValue, InitialIndex,
};
use sgp_core::seeding::{derive_seed, rng_from_seed};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn chi_square_p_value(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn steps_never_leave_the_interval() {
    let mut rng = rng_from_seed(1);
    let specs = [
        IndexProcessSpec::JumpUniform { rate: 3.0, lo: -0.5, hi: 2.0 },
        IndexProcessSpec::ReflectedBrownian { sigma: 4.0, lo: -0.5, hi: 2.0 },
    ];
    for spec in &specs {
        let mut x = IndexValue::Continuous(0.0);
        for _ in 0..500_000 {
            let dt = rng.gen_range(1e-4..2.0);
            x = match spec {
                IndexProcessSpec::JumpUniform { .. } => mjp_step(&x, dt, spec, &mut rng).unwrap(),
                _ => rbm_step(&x, dt, spec, &mut rng).unwrap(),
            };
            let v = x.as_real().unwrap();
            assert!((-0.5..=2.0).contains(&v), "{v}");
        }
    }
}

#[test]
fn reflected_bm_mean_at_late_time() {
    let spec = IndexProcessSpec::ReflectedBrownian { sigma: 1.0, lo: -1.0, hi: 1.0 };
    let seeds = 10_000u64;
    let init = InitialIndex::Fixed(IndexValue::Continuous(0.0));
    let mean = (0..seeds)
        .map(|s| {
            let mut p = IndexProcess::new(&spec, &init, derive_seed(3, s)).unwrap();
            for _ in 0..5000 {
                p.advance(1e-2).unwrap();
            }
            p.value().as_real().unwrap()
        })
        .sum::<f64>()
        / seeds as f64;
    assert!(mean.abs() <= 3.0 * (1.0 / 3.0 / seeds as f64).sqrt(), "{mean}");
}

#[test]
fn jump_process_marginal_is_uniform() {
    let spec = IndexProcessSpec::JumpUniform { rate: 2.0, lo: -1.0, hi: 1.0 };
    let grid: Vec<f64> = (0..=10).map(|k| k as f64 * 0.3).collect();
    let mut counts = [0u64; 10];
    for s in 0..5000 {
        let path = sample_path(&spec, &grid, &InitialIndex::Stationary, derive_seed(4, s)).unwrap();
        let x = path.values.last().unwrap().as_real().unwrap();
        counts[(((x + 1.0) / 0.2) as usize).min(9)] += 1;
    }
    assert!(chi_square_p_value(&counts, &[0.1; 10]) > 1e-3, "{counts:?}");
}

#[test]
fn finite_jump_mixes_to_uniform() {
    let spec = IndexProcessSpec::FiniteJump { rate: 0.5, states: 4 };
    let mut counts = [0u64; 4];
    let init = InitialIndex::Fixed(IndexValue::FiniteState(2));
    for s in 0..20_000 {
        let path = sample_path(&spec, &[0.0, 5.0], &init, derive_seed(5, s)).unwrap();
        let IndexValue::FiniteState(i) = path.values[1] else { unreachable!() };
        counts[i as usize - 1] += 1;
    }
    assert!(chi_square_p_value(&counts, &[0.25; 4]) > 1e-3, "{counts:?}");
}

#[test]
fn countable_chain_has_geometric_stationary_law() {
    let spec = IndexProcessSpec::CountableJump { rate: 1.0 };
    let mut rng = rng_from_seed(6);
    let mut x = IndexValue::CountableState(0);
    let mut counts = [0u64; 6];
    for _ in 0..200_000 {
        x = countable_step(&x, 1.7, &spec, &mut rng).unwrap();
        let IndexValue::CountableState(k) = x else { unreachable!() };
        counts[(k as usize).min(5)] += 1;
    }
    let mut probs: Vec<f64> = (0..5).map(|i| 0.5f64.powi(i + 1)).collect();
    probs.push(0.5f64.powi(5));
    // Successive samples are correlated; a loose level still catches a wrong law.
    assert!(chi_square_p_value(&counts, &probs) > 1e-6, "{counts:?}");
}

#[test]
fn countable_zero_indicator_is_a_two_state_chain() {
    // Nonzero states jump to 0 and 0 jumps to a nonzero state, both at `rate`,
    // so P(X_dt = 0 | X_0 = 3) = (1 - exp(-2 rate dt)) / 2.
    let spec = IndexProcessSpec::CountableJump { rate: 2.0 };
    let mut rng = rng_from_seed(7);
    let trials = 100_000;
    let dt = 0.3;
    let start = IndexValue::CountableState(3);
    let zeros = (0..trials)
        .filter(|_| countable_step(&start, dt, &spec, &mut rng).unwrap() == IndexValue::CountableState(0))
        .count();
    let p = 0.5 * (1.0 - (-4.0 * dt).exp());
    let se = (p * (1.0 - p) / trials as f64).sqrt();
    assert!((zeros as f64 / trials as f64 - p).abs() < 4.0 * se);
}

#[test]
fn stationary_samples_follow_their_laws() {
    let mut rng = rng_from_seed(8);
    let spec = IndexProcessSpec::CountableJump { rate: 1.0 };
    let mut counts = [0u64; 5];
    for _ in 0..50_000 {
        let IndexValue::CountableState(k) = stationary_sample(&spec, &mut rng) else { unreachable!() };
        counts[(k as usize).min(4)] += 1;
    }
    let probs = [0.5, 0.25, 0.125, 0.0625, 0.0625];
    assert!(chi_square_p_value(&counts, &probs) > 1e-3, "{counts:?}");
}

#[test]
fn product_components_are_uncorrelated() {
    let leaf = IndexProcessSpec::ReflectedBrownian { sigma: 1.0, lo: -1.0, hi: 1.0 };
    let spec = IndexProcessSpec::Product {
        components: vec![leaf.clone(), leaf],
    };
    let n = 20_000u64;
    let mut sxy = 0.0;
    for s in 0..n {
        let path = sample_path(&spec, &[0.0, 0.5], &InitialIndex::Stationary, derive_seed(9, s)).unwrap();
        let IndexValue::Product(parts) = &path.values[1] else { unreachable!() };
        sxy += parts[0].as_real().unwrap() * parts[1].as_real().unwrap();
    }
    // Var(xy) = 1/9 for independent Unif[-1, 1] components.
    let corr = sxy / n as f64;
    assert!(corr.abs() < 4.0 * (1.0 / 9.0 / n as f64).sqrt(), "{corr}");
}
