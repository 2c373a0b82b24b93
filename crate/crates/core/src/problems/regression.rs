use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SgpError};
use crate::quadrature::Quadrature;
use crate::seeding::rng_from_seed;

use super::{ParameterVector, Problem};

/// Fills `out[k] = P_k(x)` (standard normalization, `P_k(1) = 1`) by Bonnet's recurrence.
pub fn legendre_into(x: f64, out: &mut [f64]) {
    let Some(first) = out.first_mut() else {
        return;
    };
    *first = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for k in 2..out.len() {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

/// `P_0(x), ..., P_{K-1}(x)` for `x ∈ [-1, 1]`.
pub fn legendre_basis(x: f64, k: usize) -> Result<Vec<f64>> {
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("Legendre basis evaluated at {x}, outside [-1, 1]"));
    }
    if k == 0 {
        return domain("basis size must be at least 1");
    }
    let mut out = vec![0.0; k];
    legendre_into(x, &mut out);
    Ok(out)
}

/// Mode weight `c_j = 10 / (1000 + (π j)^{3/2})` of the noise expansion.
pub fn grf_coefficient(j: usize) -> f64 {
    10.0 / (1000.0 + (PI * j as f64).powf(1.5))
}

fn default_modes() -> usize {
    200
}

/// Truncated sine expansion of the observational noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrfNoiseSpec {
    /// Number of modes `J`; zero disables the noise.
    #[serde(default = "default_modes")]
    pub modes: usize,
    /// Seed of the amplitude draw; when absent the experiment supplies one.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for GrfNoiseSpec {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            seed: None,
        }
    }
}

/// A realized noise function `Ξ(x) = Σ_j c_j sin(2πj(x - 0.5)) Ξ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrfNoise {
    amplitudes: Vec<f64>,
    /// `c_j Ξ_j`, index `j - 1`.
    weighted: Vec<f64>,
}

impl GrfNoise {
    /// Draws `Ξ_1, ..., Ξ_J` i.i.d. standard normal, in order, from `seed`.
    pub fn sample(modes: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let amplitudes = (0..modes).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self::from_amplitudes(amplitudes)
    }

    pub fn from_amplitudes(amplitudes: Vec<f64>) -> Self {
        let weighted = amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| grf_coefficient(i + 1) * a)
            .collect();
        Self {
            amplitudes,
            weighted,
        }
    }

    pub fn zero() -> Self {
        Self::from_amplitudes(Vec::new())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Clenshaw summation of the sine series at `φ = 2π(x - 0.5)`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.weighted.is_empty() {
            return 0.0;
        }
        let phi = 2.0 * PI * (x - 0.5);
        let two_cos = 2.0 * phi.cos();
        let (mut b1, mut b2) = (0.0, 0.0);
        for &a in self.weighted.iter().rev() {
            let b0 = a + two_cos * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        b1 * phi.sin()
    }
}

/// The function the regression tries to recover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    /// `sin(π x)`.
    SinPi,
    Constant(f64),
    /// The Legendre polynomial of the given degree.
    Legendre(usize),
}

impl Truth {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Truth::SinPi => (PI * x).sin(),
            Truth::Constant(c) => c,
            Truth::Legendre(degree) => {
                let mut buf = vec![0.0; degree + 1];
                legendre_into(x, &mut buf);
                buf[degree]
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolyRegressionSpec {
    /// Number of Legendre polynomials (degrees `0..basis_size`).
    pub basis_size: usize,
    /// Ridge weight `α`; also the strong convexity constant.
    pub alpha: f64,
    pub truth: Truth,
    pub noise: GrfNoiseSpec,
    /// Composite Simpson intervals for integrals over `[-1, 1]`.
    pub quadrature_intervals: usize,
}

impl Default for PolyRegressionSpec {
    fn default() -> Self {
        Self {
            basis_size: 9,
            alpha: 1e-4,
            truth: Truth::SinPi,
            noise: GrfNoiseSpec::default(),
            quadrature_intervals: 2048,
        }
    }
}

/// Ridge regression of noisy functional data on a Legendre basis:
/// `f(θ, y) = ½ (data_g(y) - ⟨θ, ℓ(y)⟩)² + (α/2) ‖θ‖²` with
/// `data_g = Θ + Ξ`.
#[derive(Debug, Clone)]
pub struct PolyRegression {
    basis_size: usize,
    alpha: f64,
    truth: Truth,
    noise: GrfNoise,
    quadrature: Quadrature,
    /// Row-major `nodes × basis_size` table of `ℓ_k(y_i)`.
    basis_at_nodes: Vec<f64>,
    data_at_nodes: Vec<f64>,
}

impl PolyRegression {
    /// Builds the problem, drawing the noise from `spec.noise.seed` or else `noise_seed`.
    pub fn new(spec: &PolyRegressionSpec, noise_seed: u64) -> Result<Self> {
        let noise = GrfNoise::sample(spec.noise.modes, spec.noise.seed.unwrap_or(noise_seed));
        Self::with_noise(spec, noise)
    }

    pub fn with_noise(spec: &PolyRegressionSpec, noise: GrfNoise) -> Result<Self> {
        if spec.basis_size == 0 {
            return domain("basis size must be at least 1");
        }
        if !(spec.alpha >= 0.0 && spec.alpha.is_finite()) {
            return domain(format!("alpha must be finite and >= 0, got {}", spec.alpha));
        }
        let quadrature = Quadrature::uniform_simpson(-1.0, 1.0, spec.quadrature_intervals)?;
        let k = spec.basis_size;
        let mut basis_at_nodes = vec![0.0; quadrature.len() * k];
        for (row, &y) in basis_at_nodes.chunks_mut(k).zip(&quadrature.nodes) {
            legendre_into(y, row);
        }
        let data_at_nodes = quadrature
            .nodes
            .iter()
            .map(|&y| spec.truth.eval(y) + noise.eval(y))
            .collect();
        Ok(Self {
            basis_size: k,
            alpha: spec.alpha,
            truth: spec.truth,
            noise,
            quadrature,
            basis_at_nodes,
            data_at_nodes,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn truth(&self) -> Truth {
        self.truth
    }

    pub fn noise(&self) -> &GrfNoise {
        &self.noise
    }

    /// The observed function `data_g(x) = Θ(x) + Ξ(x)`.
    pub fn data_g(&self, x: f64) -> f64 {
        self.truth.eval(x) + self.noise.eval(x)
    }

    /// `⟨θ, ℓ(x)⟩`.
    pub fn fit_value(&self, theta: &ParameterVector, x: f64) -> f64 {
        let mut buf = vec![0.0; self.basis_size];
        legendre_into(x, &mut buf);
        theta.iter().zip(&buf).map(|(a, b)| a * b).sum()
    }

    /// Quadrature Gram matrix `G = ∫ ℓ ℓᵀ dπ` and moments `b = ∫ data_g ℓ dπ`.
    pub fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let k = self.basis_size;
        let mut gram = DMatrix::zeros(k, k);
        let mut moments = DVector::zeros(k);
        for ((row, &w), &g) in self
            .basis_at_nodes
            .chunks(k)
            .zip(&self.quadrature.weights)
            .zip(&self.data_at_nodes)
        {
            for i in 0..k {
                moments[i] += w * g * row[i];
                for j in 0..k {
                    gram[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        (gram, moments)
    }
}

impl Problem for PolyRegression {
    fn dim(&self) -> usize {
        self.basis_size
    }

    fn loss(&self, theta: &ParameterVector, y: f64) -> f64 {
        let r = self.data_g(y) - self.fit_value(theta, y);
        0.5 * r * r + 0.5 * self.alpha * theta.norm_squared()
    }

    fn grad_into(&self, theta: &ParameterVector, y: f64, out: &mut ParameterVector) {
        legendre_into(y, out.as_mut_slice());
        let r = self.data_g(y) - theta.dot(out);
        for (o, t) in out.iter_mut().zip(theta.iter()) {
            *o = -r * *o + self.alpha * t;
        }
    }

    fn kappa(&self) -> f64 {
        self.alpha
    }

    /// `max_y ‖ℓ(y)‖² + α = K + α`, attained at `y = ±1`.
    fn lipschitz(&self) -> f64 {
        self.basis_size as f64 + self.alpha
    }

    fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    fn minimizer(&self) -> Result<ParameterVector> {
        let (mut gram, moments) = self.normal_equations();
        for i in 0..self.basis_size {
            gram[(i, i)] += self.alpha;
        }
        let chol = gram.cholesky().ok_or_else(|| SgpError::Numeric {
            message: "normal equations are not positive definite".into(),
            residual: f64::NAN,
        })?;
        Ok(chol.solve(&moments))
    }

    fn mean_gradient(&self, theta: &ParameterVector) -> ParameterVector {
        let k = self.basis_size;
        let mut acc = ParameterVector::zeros(k);
        for ((row, &w), &g) in self
            .basis_at_nodes
            .chunks(k)
            .zip(&self.quadrature.weights)
            .zip(&self.data_at_nodes)
        {
            let r = g - row.iter().zip(theta.iter()).map(|(a, b)| a * b).sum::<f64>();
            for i in 0..k {
                acc[i] += w * (-r * row[i] + self.alpha * theta[i]);
            }
        }
        acc
    }

    fn midpoint_exact(&self, theta: &ParameterVector, ys: &[f64], h: f64) -> Option<ParameterVector> {
        // (I + h/2 A) θ⁺ = θ - h/2 ∇̄f(θ) + h/2 b̄ with A = mean(ℓℓᵀ) + αI, b̄ = mean(g ℓ).
        let k = self.basis_size;
        let m = ys.len() as f64;
        let mut rhs = theta.clone();
        let mut grad = ParameterVector::zeros(k);
        let mut basis = vec![0.0; k];
        for &y in ys {
            self.grad_into(theta, y, &mut grad);
            legendre_into(y, &mut basis);
            let g = self.data_g(y);
            for i in 0..k {
                rhs[i] += 0.5 * h / m * (g * basis[i] - grad[i]);
            }
        }
        let c = 1.0 + 0.5 * h * self.alpha;
        if ys.len() == 1 {
            // Sherman–Morrison for c I + (h/2) ℓℓᵀ.
            let d = 0.5 * h;
            let dot: f64 = basis.iter().zip(rhs.iter()).map(|(a, b)| a * b).sum();
            let norm2: f64 = basis.iter().map(|a| a * a).sum();
            let s = d * dot / (c + d * norm2);
            for i in 0..k {
                rhs[i] = (rhs[i] - s * basis[i]) / c;
            }
            return Some(rhs);
        }
        let mut mat = DMatrix::from_diagonal_element(k, k, c);
        for &y in ys {
            legendre_into(y, &mut basis);
            let v = DVector::from_column_slice(&basis);
            mat.ger(0.5 * h / m, &v, &v, 1.0);
        }
        mat.cholesky().map(|chol| chol.solve(&rhs))
    }
}
