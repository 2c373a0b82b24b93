//! Error metrics, distribution distances, and ensemble statistics.

use crate::error::{domain, Result, SgpError};
use crate::flow::Trajectory;
use crate::problems::{legendre_into, ParameterVector};

/// `n` equispaced points covering `[-1, 1]`, endpoints included.
pub fn equispaced_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn legendre_fit(theta: &ParameterVector, x: f64, buf: &mut [f64]) -> f64 {
    legendre_into(x, buf);
    theta.iter().zip(buf.iter()).map(|(a, b)| a * b).sum()
}

/// `Σ_l (Θ(x_l) - ⟨θ, ℓ(x_l)⟩)² / Σ_l Θ(x_l)²`.
pub fn rel_err(theta: &ParameterVector, truth: impl Fn(f64) -> f64, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return domain("evaluation grid is empty");
    }
    if grid.iter().any(|x| !(-1.0..=1.0).contains(x)) {
        return domain("evaluation grid leaves [-1, 1]");
    }
    let mut buf = vec![0.0; theta.len()];
    let (mut num, mut den) = (0.0, 0.0);
    for &x in grid {
        let t = truth(x);
        let r = t - legendre_fit(theta, x, &mut buf);
        num += r * r;
        den += t * t;
    }
    if den == 0.0 {
        return Err(SgpError::Division(
            "truth vanishes on the whole evaluation grid".into(),
        ));
    }
    Ok(num / den)
}

/// `|Θ(x) - ⟨θ, ℓ(x)⟩|`.
pub fn abs_err(theta: &ParameterVector, truth: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("abs_err evaluated at {x}, outside [-1, 1]"));
    }
    let mut buf = vec![0.0; theta.len()];
    Ok((truth(x) - legendre_fit(theta, x, &mut buf)).abs())
}

/// Truncated Wasserstein distance to a Dirac mass: `(1/n) Σ min(1, ‖θ_i - ref‖)`.
pub fn trunc_wass_to_dirac(samples: &[ParameterVector], reference: &ParameterVector) -> Result<f64> {
    if samples.is_empty() {
        return domain("no samples");
    }
    let total: f64 = samples
        .iter()
        .map(|s| (s - reference).norm().min(1.0))
        .sum();
    Ok(total / samples.len() as f64)
}

/// `½ Σ_i |p̂_i - π_i|` where `p̂` counts samples equal to `i` (0-based).
/// Samples at or beyond `law.len()` count as mass where `π` is zero.
pub fn empirical_tv(samples: &[usize], law: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return domain("no samples");
    }
    let n = samples.len() as f64;
    let mut counts = vec![0usize; law.len()];
    let mut outside = 0usize;
    for &s in samples {
        match counts.get_mut(s) {
            Some(c) => *c += 1,
            None => outside += 1,
        }
    }
    let inside: f64 = counts
        .iter()
        .zip(law)
        .map(|(&c, &p)| (c as f64 / n - p).abs())
        .sum();
    Ok(0.5 * (inside + outside as f64 / n))
}

/// Kolmogorov–Smirnov distance between the empirical CDF of `samples` and
/// the CDF of `Unif[lo, hi]`.
pub fn ks_distance(samples: &[f64], lo: f64, hi: f64) -> Result<f64> {
    if samples.is_empty() {
        return domain("no samples");
    }
    if !(lo < hi) {
        return domain(format!("empty interval [{lo}, {hi}]"));
    }
    if samples.iter().any(|x| !(lo <= *x && *x <= hi)) {
        return domain("samples leave the interval");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - lo) / (hi - lo);
            ((i + 1) as f64 / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max))
}

/// `max_t ‖a_t - b_t‖` over a shared time grid.
pub fn sup_traj_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    if a.times != b.times {
        return domain("trajectories are recorded on different time grids");
    }
    Ok(a.states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max))
}

/// Per-time sample mean and standard deviation of a scalar metric across runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSummary {
    pub metric: String,
    pub runs: usize,
    pub mean: Vec<f64>,
    /// Sample standard deviation (denominator `J - 1`); absent for one run.
    pub std: Option<Vec<f64>>,
}

pub fn ensemble_stats(metric: &str, runs: &[Vec<f64>]) -> Result<EnsembleSummary> {
    let Some(first) = runs.first() else {
        return domain("no runs to summarize");
    };
    let len = first.len();
    if runs.iter().any(|r| r.len() != len) {
        return domain("runs have different lengths");
    }
    let j = runs.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|t| runs.iter().map(|r| r[t]).sum::<f64>() / j)
        .collect();
    let std = (runs.len() >= 2).then(|| {
        (0..len)
            .map(|t| {
                let ss: f64 = runs.iter().map(|r| (r[t] - mean[t]).powi(2)).sum();
                (ss / (j - 1.0)).sqrt()
            })
            .collect()
    });
    Ok(EnsembleSummary {
        metric: metric.to_string(),
        runs: runs.len(),
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{GrfNoise, PolyRegression, PolyRegressionSpec, Problem, Truth};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sin_pi(x: f64) -> f64 {
        (PI * x).sin()
    }

    #[test]
    fn rel_err_basic_values() {
        let grid = equispaced_grid(1000);
        assert_eq!(grid.len(), 1000);
        assert_eq!(rel_err(&ParameterVector::zeros(9), sin_pi, &grid).unwrap(), 1.0);
        // Θ = ℓ_2 reproduced exactly.
        let theta = ParameterVector::from_fn(3, |i, _| if i == 2 { 1.0 } else { 0.0 });
        let p2 = |x: f64| 0.5 * (3.0 * x * x - 1.0);
        assert!(rel_err(&theta, p2, &grid).unwrap() < 1e-28);
        assert!(matches!(rel_err(&theta, |_| 0.0, &grid), Err(SgpError::Division(_))));
        assert!(rel_err(&theta, p2, &[]).is_err());
    }

    #[test]
    fn noiseless_degree_eight_fit_of_sine() {
        let spec = PolyRegressionSpec {
            alpha: 1e-8,
            truth: Truth::SinPi,
            ..Default::default()
        };
        let p = PolyRegression::with_noise(&spec, GrfNoise::zero()).unwrap();
        let theta = p.minimizer().unwrap();
        let e = rel_err(&theta, sin_pi, &equispaced_grid(1000)).unwrap();
        assert!(e < 1e-3, "{e}");
    }

    #[test]
    fn abs_err_values_and_consistency() {
        let zero = ParameterVector::zeros(9);
        assert!((abs_err(&zero, sin_pi, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(abs_err(&zero, sin_pi, 1.5).is_err());
        let theta = ParameterVector::from_fn(9, |i, _| 0.1 * i as f64);
        let grid = equispaced_grid(101);
        let num: f64 = grid.iter().map(|&x| abs_err(&theta, sin_pi, x).unwrap().powi(2)).sum();
        let den: f64 = grid.iter().map(|&x| sin_pi(x).powi(2)).sum();
        assert!((rel_err(&theta, sin_pi, &grid).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_to_dirac_values() {
        let r = ParameterVector::from_element(2, 0.0);
        assert_eq!(trunc_wass_to_dirac(&[r.clone(), r.clone()], &r).unwrap(), 0.0);
        let far = ParameterVector::from_element(2, 5.0);
        assert_eq!(trunc_wass_to_dirac(&[far.clone(), far], &r).unwrap(), 1.0);
        let a = ParameterVector::from_vec(vec![0.5, 0.0]);
        let b = ParameterVector::from_vec(vec![0.0, 2.0]);
        assert!((trunc_wass_to_dirac(&[a, b], &r).unwrap() - 0.75).abs() < 1e-15);
        assert!(trunc_wass_to_dirac(&[], &r).is_err());
    }

    #[test]
    fn tv_values() {
        assert_eq!(empirical_tv(&[0, 1, 2, 3], &[0.25; 4]).unwrap(), 0.0);
        assert_eq!(empirical_tv(&[0, 0, 1, 1], &[0.0, 0.0, 0.5, 0.5]).unwrap(), 1.0);
        assert_eq!(empirical_tv(&[7, 7], &[0.5, 0.5]).unwrap(), 1.0);
    }

    #[test]
    fn ks_values() {
        let n = 50;
        let mids: Vec<f64> = (0..n).map(|i| -1.0 + 2.0 * (i as f64 + 0.5) / n as f64).collect();
        assert!((ks_distance(&mids, -1.0, 1.0).unwrap() - 1.0 / (2.0 * n as f64)).abs() < 1e-12);
        assert_eq!(ks_distance(&[-1.0; 10], -1.0, 1.0).unwrap(), 1.0);
        assert_eq!(ks_distance(&[0.0; 10], -1.0, 1.0).unwrap(), 0.5);
        assert!(ks_distance(&[2.0], -1.0, 1.0).is_err());
    }

    fn traj(values: &[f64], times: &[f64]) -> Trajectory {
        Trajectory {
            times: times.to_vec(),
            states: values.iter().map(|&v| ParameterVector::from_vec(vec![v, 0.0])).collect(),
            config_hash: String::new(),
            seed: 0,
        }
    }

    #[test]
    fn sup_distance_values() {
        let t = [0.0, 1.0, 2.0];
        let a = traj(&[1.0, 2.0, 3.0], &t);
        assert_eq!(sup_traj_distance(&a, &a).unwrap(), 0.0);
        let b = traj(&[1.5, 2.5, 3.5], &t);
        assert!((sup_traj_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
        let c = traj(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.5]);
        assert!(sup_traj_distance(&a, &c).is_err());
    }

    #[test]
    fn ensemble_values() {
        let s = ensemble_stats("m", &[vec![0.0, 1.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(s.mean, vec![1.0, 1.0]);
        let std = s.std.unwrap();
        assert!((std[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(std[1], 0.0);
        let single = ensemble_stats("m", &[vec![3.0]]).unwrap();
        assert_eq!(single.mean, vec![3.0]);
        assert!(single.std.is_none());
        assert!(ensemble_stats("m", &[]).is_err());
        assert!(ensemble_stats("m", &[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn distances_stay_in_unit_interval(
            xs in proptest::collection::vec(-1.0f64..=1.0, 1..200),
            states in proptest::collection::vec(0usize..6, 1..200),
        ) {
            let ks = ks_distance(&xs, -1.0, 1.0).unwrap();
            prop_assert!((0.0..=1.0).contains(&ks));
            let tv = empirical_tv(&states, &[0.2; 5]).unwrap();
            prop_assert!((0.0..=1.0).contains(&tv));
            let samples: Vec<ParameterVector> = xs.iter().map(|&x| ParameterVector::from_element(1, 3.0 * x)).collect();
            let w = trunc_wass_to_dirac(&samples, &ParameterVector::zeros(1)).unwrap();
            prop_assert!((0.0..=1.0).contains(&w));
        }

        #[test]
        fn rel_err_is_permutation_and_scale_invariant(
            coeffs in proptest::collection::vec(-1.0f64..1.0, 9),
            c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            seed in 0u64..1000,
        ) {
            let theta = ParameterVector::from_vec(coeffs);
            let grid = equispaced_grid(200);
            let base = rel_err(&theta, sin_pi, &grid).unwrap();
            let mut shuffled = grid.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            prop_assert!((rel_err(&theta, sin_pi, &shuffled).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
            let scaled = rel_err(&(c * &theta), |x| c * sin_pi(x), &grid).unwrap();
            prop_assert!((scaled - base).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn ensemble_is_order_invariant(
            runs in proptest::collection::vec(proptest::collection::vec(-10.0f64..10.0, 4), 2..10),
        ) {
            let a = ensemble_stats("m", &runs).unwrap();
            let mut rev = runs.clone();
            rev.reverse();
            let b = ensemble_stats("m", &rev).unwrap();
            for (x, y) in a.mean.iter().zip(&b.mean) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in a.std.unwrap().iter().zip(&b.std.unwrap()) {
                prop_assert!(*x >= 0.0);
                prop_assert!((x - y).abs() < 1e-10);
            }
        }
    }
}
