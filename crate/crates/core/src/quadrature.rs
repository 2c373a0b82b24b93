//! Fixed quadrature rules on intervals.

use crate::error::{domain, Result};

/// Nodes and weights of a quadrature rule. `integrate` returns `Σ w_i f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    /// Composite Simpson rule on `intervals` equal subintervals of `[lo, hi]`,
    /// normalized so the weights integrate against the uniform probability
    /// law on `[lo, hi]` (they sum to one).
    pub fn uniform_simpson(lo: f64, hi: f64, intervals: usize) -> Result<Self> {
        if !(lo < hi) {
            return domain(format!("empty interval [{lo}, {hi}]"));
        }
        if intervals < 2 || intervals % 2 != 0 {
            return domain(format!(
                "Simpson rule needs an even number of intervals >= 2, got {intervals}"
            ));
        }
        let step = (hi - lo) / intervals as f64;
        let nodes = (0..=intervals)
            .map(|i| if i == intervals { hi } else { lo + step * i as f64 })
            .collect();
        let scale = 1.0 / (3.0 * intervals as f64);
        let weights = (0..=intervals)
            .map(|i| {
                let c = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * scale
            })
            .collect();
        Ok(Self { nodes, weights })
    }

    /// `n`-point Gauss–Legendre rule on `[a, b]` (Lebesgue weights, summing to `b - a`).
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return domain("Gauss-Legendre rule needs at least one node");
        }
        if !(a < b) {
            return domain(format!("empty interval [{a}, {b}]"));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root, then Newton.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = mid - half * x;
            nodes[n - 1 - i] = mid + half * x;
            weights[i] = half * w;
            weights[n - 1 - i] = half * w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` via the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_weights_are_a_probability() {
        let q = Quadrature::uniform_simpson(-1.0, 1.0, 2048).unwrap();
        assert_eq!(q.len(), 2049);
        assert_relative_eq!(q.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        // Simpson is exact for cubics: E[y^2] = 1/3 under Unif[-1,1].
        assert_relative_eq!(q.integrate(|y| y * y), 1.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(q.integrate(|y| y * y * y), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn simpson_rejects_odd_interval_count() {
        assert!(Quadrature::uniform_simpson(-1.0, 1.0, 7).is_err());
        assert!(Quadrature::uniform_simpson(1.0, 1.0, 8).is_err());
    }

    #[test]
    fn gauss_legendre_exact_to_degree_2n_minus_1() {
        let q = Quadrature::gauss_legendre(5, -1.0, 1.0).unwrap();
        assert_relative_eq!(q.integrate(|_| 1.0), 2.0, epsilon = 1e-14);
        assert_relative_eq!(q.integrate(|x| x.powi(8)), 2.0 / 9.0, epsilon = 1e-14);
        let q = Quadrature::gauss_legendre(64, 0.0, 3.0).unwrap();
        assert_relative_eq!(q.integrate(f64::exp), 3f64.exp() - 1.0, epsilon = 1e-12);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}
