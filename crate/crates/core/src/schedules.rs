//! Time dilations that turn a homogeneous index process into one with a
//! constant or decreasing learning rate: the coupled flow reads the index
//! process at `beta(t)` instead of `t`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SgpError};

/// Closed catalog of speed functions `mu` with `beta(t) = ∫_0^t mu(s) ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuFamily {
    /// `mu(t) = scale * log(t + 2)^power`.
    PowerLog { scale: f64, power: f64 },
    /// `mu(t) = slope * t + intercept`.
    Affine { slope: f64, intercept: f64 },
}

impl MuFamily {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            MuFamily::PowerLog { scale, power } => scale * (t + 2.0).ln().powf(power),
            MuFamily::Affine { slope, intercept } => slope * t + intercept,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            MuFamily::PowerLog { scale, power } => {
                scale * power * (t + 2.0).ln().powf(power - 1.0) / (t + 2.0)
            }
            MuFamily::Affine { slope, .. } => slope,
        }
    }

    /// Whether `mu(t) -> ∞` follows from the parameters alone.
    pub fn diverges(&self) -> bool {
        match *self {
            MuFamily::PowerLog { scale, power } => scale > 0.0 && power > 0.0,
            MuFamily::Affine { slope, .. } => slope > 0.0,
        }
    }

    fn is_non_decreasing(&self) -> bool {
        match *self {
            MuFamily::PowerLog { scale, power } => scale * power >= 0.0,
            MuFamily::Affine { slope, .. } => slope >= 0.0,
        }
    }
}

/// Result of probing a speed function for admissibility as a decreasing
/// learning rate: `mu` must diverge while `mu'(t) t / mu(t) -> 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuAdmissibility {
    /// Largest `mu'(t) t / mu(t)` over the upper half of the probe grid.
    pub max_tail_ratio: f64,
    pub diverges: bool,
}

impl MuAdmissibility {
    pub fn passes(&self, ratio_tolerance: f64) -> bool {
        self.diverges && self.max_tail_ratio <= ratio_tolerance
    }
}

pub fn mu_admissibility(family: &MuFamily, probe: &[f64]) -> MuAdmissibility {
    let tail = &probe[probe.len() / 2..];
    let max_tail_ratio = tail
        .iter()
        .map(|&t| family.derivative(t) * t / family.eval(t))
        .fold(f64::NEG_INFINITY, f64::max);
    MuAdmissibility {
        max_tail_ratio,
        diverges: family.diverges(),
    }
}

/// Monotone clock map from optimizer time to index-process time.
#[derive(Clone, PartialEq)]
pub enum TimeDilation {
    /// `beta(t) = t / eps`.
    ConstantEps { eps: f64 },
    /// Continuous piecewise-linear clock with `beta(H_n) = n` and slope
    /// `1 / eta_n` on `[H_{n-1}, H_n)`, `H_n = eta_1 + ... + eta_n`.
    Piecewise { etas: Vec<f64>, ends: Vec<f64> },
    /// Cumulative trapezoid integral of `mu` on the grid `k * step`.
    Smooth {
        family: MuFamily,
        step: f64,
        cumulative: Vec<f64>,
    },
}

impl fmt::Debug for TimeDilation {
    // The smooth cache is summarized by its step and horizon.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeDilation::ConstantEps { eps } => f.debug_struct("ConstantEps").field("eps", eps).finish(),
            TimeDilation::Piecewise { etas, .. } => f.debug_struct("Piecewise").field("etas", etas).finish(),
            TimeDilation::Smooth { family, step, .. } => f
                .debug_struct("Smooth")
                .field("family", family)
                .field("step", step)
                .field("horizon", &self.horizon())
                .finish(),
        }
    }
}

impl TimeDilation {
    pub fn constant(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return domain(format!("eps must be positive, got {eps}"));
        }
        Ok(TimeDilation::ConstantEps { eps })
    }

    pub fn piecewise(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return domain("learning-rate sequence is empty");
        }
        if etas.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return domain("learning rates must be positive");
        }
        if etas.windows(2).any(|w| w[1] > w[0]) {
            return domain("learning rates must be non-increasing");
        }
        let ends = etas
            .iter()
            .scan(0.0, |acc, &e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        Ok(TimeDilation::Piecewise { etas, ends })
    }

    /// Caches `beta` on `k * step` for `k = 0..=ceil(horizon / step)`.
    pub fn smooth(family: MuFamily, step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return domain(format!("cache step must be positive, got {step}"));
        }
        if !(horizon >= 0.0 && horizon.is_finite()) {
            return domain(format!("horizon must be finite and >= 0, got {horizon}"));
        }
        if !family.is_non_decreasing() {
            return domain(format!("mu {family:?} is decreasing"));
        }
        let cells = (horizon / step).ceil() as usize;
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut prev = family.eval(0.0);
        if !(prev > 0.0) {
            return domain(format!("mu(0) = {prev} is not positive"));
        }
        let mut acc = 0.0;
        for k in 1..=cells {
            let next = family.eval(k as f64 * step);
            if !(next > 0.0) {
                return domain(format!("mu({}) = {next} is not positive", k as f64 * step));
            }
            acc += 0.5 * step * (prev + next);
            cumulative.push(acc);
            prev = next;
        }
        Ok(TimeDilation::Smooth {
            family,
            step,
            cumulative,
        })
    }

    /// Largest `t` at which `beta` can be evaluated.
    pub fn horizon(&self) -> f64 {
        match self {
            TimeDilation::ConstantEps { .. } => f64::INFINITY,
            TimeDilation::Piecewise { ends, .. } => *ends.last().expect("non-empty"),
            TimeDilation::Smooth {
                step, cumulative, ..
            } => step * (cumulative.len() - 1) as f64,
        }
    }

    pub fn beta(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return domain(format!("time must be >= 0, got {t}"));
        }
        // Relative slack absorbs rounding in accumulated segment ends.
        if t > self.horizon() * (1.0 + 1e-12) {
            return Err(SgpError::Range(format!(
                "t = {t} exceeds the dilation horizon {}",
                self.horizon()
            )));
        }
        Ok(match self {
            TimeDilation::ConstantEps { eps } => t / eps,
            TimeDilation::Piecewise { etas, ends } => {
                // Segment n (0-based) covers [ends[n-1], ends[n]).
                let n = ends.partition_point(|&h| h <= t);
                if n == etas.len() {
                    n as f64
                } else {
                    let start = if n == 0 { 0.0 } else { ends[n - 1] };
                    n as f64 + (t - start) / etas[n]
                }
            }
            TimeDilation::Smooth {
                family,
                step,
                cumulative,
            } => {
                let r = t / step;
                let nearest = r.round();
                if (r - nearest).abs() <= 1e-9 && (nearest as usize) < cumulative.len() {
                    return Ok(cumulative[nearest as usize]);
                }
                let k = (r.floor() as usize).min(cumulative.len() - 1);
                let tk = k as f64 * step;
                cumulative[k] + 0.5 * (t - tk) * (family.eval(tk) + family.eval(t))
            }
        })
    }
}

/// `beta(t)` for the piecewise clock built from `etas`.
pub fn beta_piecewise(t: f64, etas: &[f64]) -> Result<f64> {
    TimeDilation::piecewise(etas.to_vec())?.beta(t)
}

/// `beta(t) = ∫_0^t mu` by composite trapezoid with cache step `step`.
pub fn beta_smooth(t: f64, family: &MuFamily, step: f64) -> Result<f64> {
    TimeDilation::smooth(*family, step, t)?.beta(t)
}

/// Serializable description of a dilation; `Smooth` is built over a horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DilationSpec {
    Constant {
        eps: f64,
    },
    Piecewise {
        etas: Vec<f64>,
    },
    Smooth {
        mu: MuFamily,
        /// Cache step; defaults to the optimizer step.
        #[serde(default)]
        step: Option<f64>,
    },
}

impl DilationSpec {
    pub fn build(&self, horizon: f64, default_step: f64) -> Result<TimeDilation> {
        match self {
            DilationSpec::Constant { eps } => TimeDilation::constant(*eps),
            DilationSpec::Piecewise { etas } => TimeDilation::piecewise(etas.clone()),
            DilationSpec::Smooth { mu, step } => {
                TimeDilation::smooth(*mu, step.unwrap_or(default_step), horizon)
            }
        }
    }
}
