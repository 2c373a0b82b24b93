//! Gradient-flow integrators and the coupled stochastic gradient process driver.
//!
//! The driver advances `θ` on the optimizer grid `t_n = n h`. Step `n` reads
//! the index process at dilated time `β(t_n)` and keeps that value frozen for
//! the whole step. Between optimizer steps the index process is advanced on
//! its own clock: in substeps of at most `index_step` index-time units for
//! discretized kernels (reflected Brownian motion), and in one exact step for
//! jump processes.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Result, SgpError};
use crate::index::{IndexProcess, IndexProcessSpec, IndexValue, InitialIndex};
use crate::problems::{ParameterVector, Problem};
use crate::schedules::TimeDilation;
use crate::seeding::rng_from_seed;

fn default_tolerance() -> f64 {
    1e-10
}

fn default_max_iterations() -> usize {
    100
}

/// How the implicit midpoint equation is solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MidpointSolver {
    /// The problem's closed-form solve when it has one, fixed point otherwise.
    #[default]
    Auto,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegratorSpec {
    /// `θ⁺ = θ - h ∇f(θ, y)`.
    ExplicitEuler,
    /// `θ⁺ = θ - h/2 (∇f(θ⁺, y) + ∇f(θ, y))`.
    ImplicitMidpoint {
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        #[serde(default = "default_max_iterations")]
        max_iterations: usize,
        #[serde(default)]
        solver: MidpointSolver,
    },
}

impl IntegratorSpec {
    pub fn midpoint() -> Self {
        IntegratorSpec::ImplicitMidpoint {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            solver: MidpointSolver::Auto,
        }
    }

    pub fn midpoint_fixed_point() -> Self {
        IntegratorSpec::ImplicitMidpoint {
            tolerance: default_tolerance(),
            max_iterations: default_max_iterations(),
            solver: MidpointSolver::FixedPoint,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            IntegratorSpec::ExplicitEuler => Ok(()),
            IntegratorSpec::ImplicitMidpoint {
                tolerance,
                max_iterations,
                ..
            } => {
                if !(tolerance > 0.0) {
                    return domain(format!("tolerance must be positive, got {tolerance}"));
                }
                if max_iterations == 0 {
                    return domain("max_iterations must be at least 1");
                }
                Ok(())
            }
        }
    }

    fn uses_fixed_point(&self, problem: &dyn Problem) -> bool {
        match *self {
            IntegratorSpec::ExplicitEuler => false,
            IntegratorSpec::ImplicitMidpoint { solver, .. } => {
                solver == MidpointSolver::FixedPoint
                    || problem
                        .midpoint_exact(&ParameterVector::zeros(problem.dim()), &[0.0], 0.1)
                        .is_none()
            }
        }
    }
}

/// Scratch buffers for one integrator.
struct Workspace {
    g0: ParameterVector,
    g1: ParameterVector,
    buf: ParameterVector,
}

impl Workspace {
    fn new(dim: usize) -> Self {
        Self {
            g0: ParameterVector::zeros(dim),
            g1: ParameterVector::zeros(dim),
            buf: ParameterVector::zeros(dim),
        }
    }
}

/// Writes the mean of `∇f(θ, y)` over `ys` into `out`.
fn batch_gradient(
    problem: &dyn Problem,
    theta: &ParameterVector,
    ys: &[f64],
    out: &mut ParameterVector,
    buf: &mut ParameterVector,
) {
    if let [y] = ys {
        problem.grad_into(theta, *y, out);
        return;
    }
    out.fill(0.0);
    let w = 1.0 / ys.len() as f64;
    for &y in ys {
        problem.grad_into(theta, y, buf);
        out.axpy(w, buf, 1.0);
    }
}

/// One integrator step of `θ' = -F(θ)`, `F` given by `field`.
fn step_field(
    mut field: impl FnMut(&ParameterVector, &mut ParameterVector, &mut ParameterVector),
    theta: &ParameterVector,
    h: f64,
    spec: &IntegratorSpec,
    exact: Option<ParameterVector>,
    ws: &mut Workspace,
) -> Result<ParameterVector> {
    match *spec {
        IntegratorSpec::ExplicitEuler => {
            field(theta, &mut ws.g0, &mut ws.buf);
            let mut next = theta.clone();
            next.axpy(-h, &ws.g0, 1.0);
            Ok(next)
        }
        IntegratorSpec::ImplicitMidpoint {
            tolerance,
            max_iterations,
            ..
        } => {
            if let Some(next) = exact {
                return Ok(next);
            }
            field(theta, &mut ws.g0, &mut ws.buf);
            // Explicit Euler predictor, then z ← θ - h/2 (F(z) + F(θ)).
            let mut z = theta.clone();
            z.axpy(-h, &ws.g0, 1.0);
            let mut increment = f64::INFINITY;
            for _ in 0..max_iterations {
                field(&z, &mut ws.g1, &mut ws.buf);
                let mut next = theta.clone();
                next.axpy(-0.5 * h, &ws.g1, 1.0);
                next.axpy(-0.5 * h, &ws.g0, 1.0);
                increment = (&next - &z).norm();
                z = next;
                if increment <= tolerance {
                    return Ok(z);
                }
            }
            Err(SgpError::Numeric {
                message: format!(
                    "implicit midpoint fixed point did not converge in {max_iterations} iterations"
                ),
                residual: increment,
            })
        }
    }
}

fn step_batch(
    problem: &dyn Problem,
    theta: &ParameterVector,
    ys: &[f64],
    h: f64,
    spec: &IntegratorSpec,
    ws: &mut Workspace,
) -> Result<ParameterVector> {
    let exact = match *spec {
        IntegratorSpec::ImplicitMidpoint {
            solver: MidpointSolver::Auto,
            ..
        } => problem.midpoint_exact(theta, ys, h),
        _ => None,
    };
    step_field(
        |t, out, buf| batch_gradient(problem, t, ys, out, buf),
        theta,
        h,
        spec,
        exact,
        ws,
    )
}

/// One step of the flow of `f(·, y)` with the index value frozen. Product
/// values average the gradients of their leaves.
pub fn integrator_step(
    problem: &dyn Problem,
    theta: &ParameterVector,
    y: &IndexValue,
    h: f64,
    spec: &IntegratorSpec,
) -> Result<ParameterVector> {
    if !(h > 0.0) {
        return domain(format!("step must be positive, got {h}"));
    }
    if theta.len() != problem.dim() {
        return domain("parameter dimension mismatch");
    }
    spec.validate()?;
    let mut ys = Vec::new();
    y.flatten_into(&mut ys);
    if ys.iter().any(|v| !(-1.0..=1.0).contains(v)) {
        return domain(format!("index value {y:?} is not in [-1, 1]"));
    }
    warn_if_not_contractive(problem, h, spec);
    step_batch(problem, theta, &ys, h, spec, &mut Workspace::new(problem.dim()))
}

fn warn_if_not_contractive(problem: &dyn Problem, h: f64, spec: &IntegratorSpec) {
    if spec.uses_fixed_point(problem) && h * problem.lipschitz() / 2.0 >= 1.0 {
        log::warn!(
            "h L / 2 = {} >= 1: the midpoint fixed-point iteration may not contract",
            h * problem.lipschitz() / 2.0
        );
    }
}

/// A recorded parameter path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParameterVector>,
    pub config_hash: String,
    pub seed: u64,
}

impl Trajectory {
    pub fn terminal(&self) -> &ParameterVector {
        self.states.last().expect("trajectory records θ₀")
    }

    /// Writes `t,theta_1,...,theta_K` rows with 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| SgpError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let k = self.states.first().map_or(0, |s| s.len());
        let mut header = String::from("t");
        for i in 1..=k {
            header.push_str(&format!(",theta_{i}"));
        }
        writeln!(out, "{header}").map_err(io_err)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            let mut line = format!("{t:.16e}");
            for x in s.iter() {
                line.push_str(&format!(",{x:.16e}"));
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Everything a single stochastic gradient process run needs besides the problem.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Law of one index process; mini-batches use `minibatch` independent copies.
    pub index: IndexProcessSpec,
    pub dilation: TimeDilation,
    pub integrator: IntegratorSpec,
    /// Horizon `T`.
    pub horizon: f64,
    /// Optimizer step `h`.
    pub step: f64,
    /// Largest index-process substep, in index-clock units. Defaults to `h / 10`.
    pub index_step: Option<f64>,
    pub minibatch: usize,
    pub theta0: ParameterVector,
    pub init_index: InitialIndex,
    pub seed: u64,
    /// Record every `record_every`-th state (the terminal state is always recorded).
    pub record_every: usize,
}

impl RunConfig {
    /// Constant-rate run (`β(t) = t / eps`) with one index process, the
    /// midpoint integrator, and every state recorded.
    pub fn constant_rate(
        index: IndexProcessSpec,
        eps: f64,
        horizon: f64,
        step: f64,
        theta0: ParameterVector,
        seed: u64,
    ) -> Result<Self> {
        Ok(Self {
            index,
            dilation: TimeDilation::constant(eps)?,
            integrator: IntegratorSpec::midpoint(),
            horizon,
            step,
            index_step: None,
            minibatch: 1,
            theta0,
            init_index: InitialIndex::Stationary,
            seed,
            record_every: 1,
        })
    }

    fn index_step(&self) -> f64 {
        self.index_step.unwrap_or(self.step / 10.0)
    }

    fn step_count(&self) -> Result<usize> {
        if !(self.step > 0.0 && self.step <= self.horizon && self.horizon.is_finite()) {
            return domain(format!(
                "need 0 < h <= T, got h = {}, T = {}",
                self.step, self.horizon
            ));
        }
        let n = (self.horizon / self.step).round();
        if (n * self.step - self.horizon).abs() > 1e-9 * self.horizon.max(1.0) {
            return domain(format!(
                "horizon {} is not a multiple of the step {}",
                self.horizon, self.step
            ));
        }
        Ok(n as usize)
    }

    pub fn validate(&self, problem: &dyn Problem) -> Result<usize> {
        let n = self.step_count()?;
        self.index.validate()?;
        self.integrator.validate()?;
        if self.minibatch == 0 {
            return domain("mini-batch size must be at least 1");
        }
        if self.record_every == 0 {
            return domain("record_every must be at least 1");
        }
        if !(self.index_step() > 0.0) {
            return domain("index substep must be positive");
        }
        if self.theta0.len() != problem.dim() {
            return domain(format!(
                "θ₀ has dimension {}, problem expects {}",
                self.theta0.len(),
                problem.dim()
            ));
        }
        if self.dilation.horizon() < self.horizon {
            return Err(SgpError::Range(format!(
                "dilation covers [0, {}], run needs [0, {}]",
                self.dilation.horizon(),
                self.horizon
            )));
        }
        Ok(n)
    }

    /// SHA-256 of the configuration's debug rendering (round-trip exact for
    /// floats), truncated to 16 hex digits.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Simulates the coupled process `dθ = -∇f(θ, V_{β(t)}) dt` on `[0, T]`.
pub fn run_sgp(problem: &dyn Problem, config: &RunConfig) -> Result<Trajectory> {
    let n_steps = config.validate(problem)?;
    let h = config.step;
    let spec = config.index.replicate(config.minibatch);
    let init = match &config.init_index {
        InitialIndex::Fixed(v) if config.minibatch > 1 && !spec.contains(v) => {
            InitialIndex::Fixed(IndexValue::Product(vec![v.clone(); config.minibatch]))
        }
        other => other.clone(),
    };
    let mut process = IndexProcess::new(&spec, &init, config.seed)?;
    let exact_kernel = spec.has_exact_kernel();
    let index_step = config.index_step();
    warn_if_not_contractive(problem, h, &config.integrator);

    let mut ws = Workspace::new(problem.dim());
    let mut ys = Vec::with_capacity(config.minibatch);
    let mut theta = config.theta0.clone();
    let capacity = n_steps / config.record_every + 2;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    times.push(0.0);
    states.push(theta.clone());

    let mut beta_prev = 0.0;
    for n in 0..n_steps {
        let t = n as f64 * h;
        if n > 0 {
            let beta = config.dilation.beta(t)?;
            let gap = beta - beta_prev;
            if exact_kernel {
                process.advance(gap)?;
            } else {
                let substeps = ((gap / index_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                let dt = gap / substeps as f64;
                for _ in 0..substeps {
                    process.advance(dt)?;
                }
            }
            beta_prev = beta;
        }
        process.leaves_into(&mut ys);
        theta = step_batch(problem, &theta, &ys, h, &config.integrator, &mut ws).map_err(
            |e| SgpError::RunFailed {
                time: t,
                source: Box::new(e),
            },
        )?;
        if (n + 1) % config.record_every == 0 || n + 1 == n_steps {
            times.push((n + 1) as f64 * h);
            states.push(theta.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        config_hash: config.hash(),
        seed: config.seed,
    })
}

/// Deterministic full gradient flow `dζ = -g(ζ) dt`, every step recorded.
pub fn run_full_flow(
    problem: &dyn Problem,
    theta0: &ParameterVector,
    horizon: f64,
    step: f64,
    integrator: &IntegratorSpec,
) -> Result<Trajectory> {
    integrator.validate()?;
    if theta0.len() != problem.dim() {
        return domain("θ₀ dimension mismatch");
    }
    if !(step > 0.0 && step <= horizon) {
        return domain(format!("need 0 < h <= T, got h = {step}, T = {horizon}"));
    }
    let n_steps = (horizon / step).round() as usize;
    let mut ws = Workspace::new(problem.dim());
    let mut theta = theta0.clone();
    let mut times = vec![0.0];
    let mut states = vec![theta.clone()];
    for n in 0..n_steps {
        theta = step_field(
            |t, out, _| out.copy_from(&problem.mean_gradient(t)),
            &theta,
            step,
            integrator,
            None,
            &mut ws,
        )
        .map_err(|e| SgpError::RunFailed {
            time: n as f64 * step,
            source: Box::new(e),
        })?;
        times.push((n + 1) as f64 * step);
        states.push(theta.clone());
    }
    let hash = Sha256::digest(format!("full_flow {theta0:?} {horizon} {step} {integrator:?}"));
    Ok(Trajectory {
        times,
        states,
        config_hash: hash[..8].iter().map(|b| format!("{b:02x}")).collect(),
        seed: 0,
    })
}

/// Discrete-time SGD: `θ_n = θ_{n-1} - η ∇f(θ_{n-1}, y_n)` with `y_n ~ Unif[-1, 1]`
/// i.i.d. (one uniform per step), or its implicit-midpoint variant.
pub fn run_sgd(
    problem: &dyn Problem,
    theta0: &ParameterVector,
    steps: usize,
    learning_rate: f64,
    integrator: &IntegratorSpec,
    seed: u64,
    record_every: usize,
) -> Result<Trajectory> {
    integrator.validate()?;
    if !(learning_rate > 0.0) {
        return domain(format!("learning rate must be positive, got {learning_rate}"));
    }
    if record_every == 0 {
        return domain("record_every must be at least 1");
    }
    if theta0.len() != problem.dim() {
        return domain("θ₀ dimension mismatch");
    }
    let mut rng = rng_from_seed(seed);
    let mut ws = Workspace::new(problem.dim());
    let mut theta = theta0.clone();
    let mut times = vec![0.0];
    let mut states = vec![theta.clone()];
    for n in 0..steps {
        let y = [rng.gen_range(-1.0..=1.0)];
        theta = step_batch(problem, &theta, &y, learning_rate, integrator, &mut ws).map_err(
            |e| SgpError::RunFailed {
                time: n as f64 * learning_rate,
                source: Box::new(e),
            },
        )?;
        if (n + 1) % record_every == 0 || n + 1 == steps {
            times.push((n + 1) as f64 * learning_rate);
            states.push(theta.clone());
        }
    }
    let hash = Sha256::digest(format!("sgd {theta0:?} {steps} {learning_rate} {integrator:?}"));
    Ok(Trajectory {
        times,
        states,
        config_hash: hash[..8].iter().map(|b| format!("{b:02x}")).collect(),
        seed,
    })
}
