use crate::error::Result;
use crate::quadrature::Quadrature;

use super::{ParameterVector, Problem};

/// `f(θ, y) = ½ (θ - y²)²` on `X = R`, `S = [-1, 1]`; `κ = 1`.
#[derive(Debug, Clone)]
pub struct QuadraticToy {
    quadrature: Quadrature,
}

impl QuadraticToy {
    pub fn new() -> Self {
        Self {
            quadrature: Quadrature::uniform_simpson(-1.0, 1.0, 64).expect("valid rule"),
        }
    }
}

impl Default for QuadraticToy {
    fn default() -> Self {
        Self::new()
    }
}

impl Problem for QuadraticToy {
    fn dim(&self) -> usize {
        1
    }

    fn loss(&self, theta: &ParameterVector, y: f64) -> f64 {
        0.5 * (theta[0] - y * y).powi(2)
    }

    fn grad_into(&self, theta: &ParameterVector, y: f64, out: &mut ParameterVector) {
        out[0] = theta[0] - y * y;
    }

    fn kappa(&self) -> f64 {
        1.0
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    fn minimizer(&self) -> Result<ParameterVector> {
        Ok(ParameterVector::from_element(1, 1.0 / 3.0))
    }

    fn midpoint_exact(&self, theta: &ParameterVector, ys: &[f64], h: f64) -> Option<ParameterVector> {
        let target = ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64;
        let next = ((1.0 - 0.5 * h) * theta[0] + h * target) / (1.0 + 0.5 * h);
        Some(ParameterVector::from_element(1, next))
    }
}
