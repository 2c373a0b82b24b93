//! Subsampled targets `f(θ, y)` on the index space `S = [-1, 1]`, their
//! gradients, and the averaged objective `Φ(θ) = ∫ f(θ, y) π(dy)` with `π`
//! the uniform law.

mod regression;
mod toy;

use std::sync::Arc;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::index::IndexValue;
use crate::quadrature::Quadrature;

pub use regression::{
    grf_coefficient, legendre_basis, legendre_into, GrfNoise, GrfNoiseSpec, PolyRegression,
    PolyRegressionSpec, Truth,
};
pub use toy::QuadraticToy;

/// A point `θ` of the parameter space `R^K`.
pub type ParameterVector = DVector<f64>;

/// A strongly convex family of subsampled targets over `S = [-1, 1]`.
pub trait Problem: Send + Sync + std::fmt::Debug {
    /// Dimension `K` of the parameter space.
    fn dim(&self) -> usize;

    /// `f(θ, y)`.
    fn loss(&self, theta: &ParameterVector, y: f64) -> f64;

    /// Writes `∇_θ f(θ, y)` into `out`.
    fn grad_into(&self, theta: &ParameterVector, y: f64, out: &mut ParameterVector);

    /// Uniform-in-`y` strong convexity constant.
    fn kappa(&self) -> f64;

    /// Upper bound on the Lipschitz constant of `θ ↦ ∇_θ f(θ, y)` over `y ∈ S`.
    fn lipschitz(&self) -> f64;

    /// Rule whose weights integrate against `π` (sum to one).
    fn quadrature(&self) -> &Quadrature;

    /// Unique minimizer of `Φ` at quadrature resolution.
    fn minimizer(&self) -> Result<ParameterVector>;

    /// Closed-form solution `θ⁺` of the implicit midpoint equation
    /// `θ⁺ = θ - h/2 (ḡ(θ⁺) + ḡ(θ))`, where `ḡ` averages `∇_θ f(·, y)` over
    /// `ys`. `None` when the problem has no such form.
    fn midpoint_exact(
        &self,
        _theta: &ParameterVector,
        _ys: &[f64],
        _h: f64,
    ) -> Option<ParameterVector> {
        None
    }

    fn grad(&self, theta: &ParameterVector, y: f64) -> ParameterVector {
        let mut out = ParameterVector::zeros(self.dim());
        self.grad_into(theta, y, &mut out);
        out
    }

    /// Quadrature approximation of `g(θ) = ∫ ∇_θ f(θ, y) π(dy)`.
    fn mean_gradient(&self, theta: &ParameterVector) -> ParameterVector {
        let q = self.quadrature();
        let mut acc = ParameterVector::zeros(self.dim());
        let mut buf = ParameterVector::zeros(self.dim());
        for (&y, &w) in q.nodes.iter().zip(&q.weights) {
            self.grad_into(theta, y, &mut buf);
            acc.axpy(w, &buf, 1.0);
        }
        acc
    }

    /// Quadrature approximation of `Φ(θ)`.
    fn potential(&self, theta: &ParameterVector) -> f64 {
        self.quadrature().integrate(|y| self.loss(theta, y))
    }
}

/// `∇_θ f(θ, y)` for an index value; `y` must be a continuous point of `S`.
pub fn subsampled_grad(
    problem: &dyn Problem,
    theta: &ParameterVector,
    y: &IndexValue,
) -> Result<ParameterVector> {
    if theta.len() != problem.dim() {
        return domain(format!(
            "parameter has dimension {}, problem expects {}",
            theta.len(),
            problem.dim()
        ));
    }
    match *y {
        IndexValue::Continuous(v) if (-1.0..=1.0).contains(&v) => Ok(problem.grad(theta, v)),
        ref other => domain(format!("index value {other:?} is not a point of [-1, 1]")),
    }
}

pub fn mean_gradient(problem: &dyn Problem, theta: &ParameterVector) -> ParameterVector {
    problem.mean_gradient(theta)
}

pub fn minimizer(problem: &dyn Problem) -> Result<ParameterVector> {
    problem.minimizer()
}

/// Smallest observed `⟨x₁-x₂, ∇f(x₁,y)-∇f(x₂,y)⟩ / ‖x₁-x₂‖²` over `n`
/// random triples. Points are standard normal scaled by 3; coincident pairs
/// are redrawn.
pub fn strong_convexity_probe<R: Rng + ?Sized>(
    problem: &dyn Problem,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if n == 0 {
        return domain("probe needs at least one pair");
    }
    let k = problem.dim();
    let draw = |rng: &mut R| {
        ParameterVector::from_fn(k, |_, _| 3.0 * Distribution::<f64>::sample(&StandardNormal, &mut *rng))
    };
    let mut min_ratio = f64::INFINITY;
    let mut g1 = ParameterVector::zeros(k);
    let mut g2 = ParameterVector::zeros(k);
    for _ in 0..n {
        let (x1, x2) = loop {
            let a = draw(rng);
            let b = draw(rng);
            if a != b {
                break (a, b);
            }
        };
        let y = rng.gen_range(-1.0..=1.0);
        problem.grad_into(&x1, y, &mut g1);
        problem.grad_into(&x2, y, &mut g2);
        let dx = &x1 - &x2;
        let ratio = dx.dot(&(&g1 - &g2)) / dx.norm_squared();
        min_ratio = min_ratio.min(ratio);
    }
    Ok(min_ratio)
}

/// Serializable choice of built-in problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    QuadraticToy,
    PolyRegression(PolyRegressionSpec),
}

impl ProblemSpec {
    /// Builds the problem; the regression noise is drawn from `noise_seed`
    /// unless its spec pins a seed.
    pub fn build(&self, noise_seed: u64) -> Result<Arc<dyn Problem>> {
        Ok(match self {
            ProblemSpec::QuadraticToy => Arc::new(QuadraticToy::new()),
            ProblemSpec::PolyRegression(spec) => Arc::new(PolyRegression::new(spec, noise_seed)?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;

    /// Central finite differences of `f(·, y)`.
    fn fd_gradient(problem: &dyn Problem, theta: &ParameterVector, y: f64) -> ParameterVector {
        let step = 1e-6;
        ParameterVector::from_fn(theta.len(), |i, _| {
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[i] += step;
            down[i] -= step;
            (problem.loss(&up, y) - problem.loss(&down, y)) / (2.0 * step)
        })
    }

    fn regression() -> PolyRegression {
        PolyRegression::new(&PolyRegressionSpec::default(), 17).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let problems: [Box<dyn Problem>; 2] = [Box::new(QuadraticToy::new()), Box::new(regression())];
        let mut rng = rng_from_seed(5);
        for p in &problems {
            for _ in 0..100 {
                let theta = ParameterVector::from_fn(p.dim(), |_, _| rng.gen_range(-2.0..2.0));
                let y = rng.gen_range(-1.0..=1.0);
                let g = p.grad(&theta, y);
                let fd = fd_gradient(p.as_ref(), &theta, y);
                assert!((&g - &fd).norm() <= 1e-6 * g.norm().max(1.0), "{g} vs {fd}");
            }
        }
    }

    #[test]
    fn toy_gradient_vanishes_at_pointwise_optimum() {
        let toy = QuadraticToy::new();
        let g = subsampled_grad(&toy, &ParameterVector::from_element(1, 1.0), &IndexValue::Continuous(1.0)).unwrap();
        assert_eq!(g[0], 0.0);
    }

    #[test]
    fn subsampled_grad_checks_inputs() {
        let toy = QuadraticToy::new();
        assert!(subsampled_grad(&toy, &ParameterVector::zeros(2), &IndexValue::Continuous(0.0)).is_err());
        assert!(subsampled_grad(&toy, &ParameterVector::zeros(1), &IndexValue::FiniteState(1)).is_err());
    }

    #[test]
    fn mean_gradient_is_the_quadrature_average() {
        let p = regression();
        let theta = ParameterVector::from_fn(9, |i, _| 0.1 * i as f64 - 0.3);
        let q = p.quadrature();
        let mut manual = ParameterVector::zeros(9);
        for (&y, &w) in q.nodes.iter().zip(&q.weights) {
            manual += w * p.grad(&theta, y);
        }
        assert!((mean_gradient(&p, &theta) - manual).norm() < 1e-12);
    }

    #[test]
    fn toy_mean_gradient_closed_form() {
        let toy = QuadraticToy::new();
        let g = |t: f64| mean_gradient(&toy, &ParameterVector::from_element(1, t))[0];
        assert!(g(1.0 / 3.0).abs() < 1e-14);
        assert!((g(1.0) - 2.0 / 3.0).abs() < 1e-14);
        assert!((minimizer(&toy).unwrap()[0] - 1.0 / 3.0).abs() < 1e-15);
        // Oracle: E[y^2] under Unif[-1,1] by Gauss-Legendre.
        let gl = Quadrature::gauss_legendre(4, -1.0, 1.0).unwrap();
        assert!((0.5 * gl.integrate(|y| y * y) - minimizer(&toy).unwrap()[0]).abs() < 1e-15);
    }

    #[test]
    fn regression_minimizer_is_first_order_optimal() {
        let p = regression();
        let theta = minimizer(&p).unwrap();
        assert!(mean_gradient(&p, &theta).norm() <= 1e-8);
    }

    #[test]
    fn probe_respects_declared_kappa() {
        let mut rng = rng_from_seed(8);
        let toy = QuadraticToy::new();
        let r = strong_convexity_probe(&toy, 1000, &mut rng).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let p = regression();
        let r = strong_convexity_probe(&p, 10_000, &mut rng).unwrap();
        assert!(r >= 1e-4 - 1e-12, "{r}");
        assert!(strong_convexity_probe(&p, 0, &mut rng).is_err());
    }

    #[test]
    fn probe_ratio_is_symmetric() {
        let p = regression();
        let x1 = ParameterVector::from_fn(9, |i, _| i as f64);
        let x2 = ParameterVector::from_fn(9, |i, _| (i as f64).sin());
        let ratio = |a: &ParameterVector, b: &ParameterVector| {
            let d = a - b;
            d.dot(&(p.grad(a, 0.3) - p.grad(b, 0.3))) / d.norm_squared()
        };
        assert!((ratio(&x1, &x2) - ratio(&x2, &x1)).abs() < 1e-12);
    }

    #[test]
    fn problem_spec_from_toml() {
        let spec: ProblemSpec = toml::from_str("kind = \"quadratic_toy\"").unwrap();
        assert_eq!(spec, ProblemSpec::QuadraticToy);
        let spec: ProblemSpec = toml::from_str("kind = \"poly_regression\"\nalpha = 1e-3\n").unwrap();
        let ProblemSpec::PolyRegression(ref s) = spec else { panic!() };
        assert_eq!(s.alpha, 1e-3);
        assert_eq!(s.basis_size, 9);
        assert!(toml::from_str::<ProblemSpec>("kind = \"poly_regression\"\nalhpa = 1.0\n").is_err());
        assert_eq!(spec.build(1).unwrap().dim(), 9);
    }
}
