//! Seeded batch experiments: config parsing, the run matrix, and CSV output.
//!
//! Run `j` of the method with id `m` uses the seed
//! `derive_run_seed(master_seed, m, j)`, so seeds depend on method identity and
//! not on the order of method blocks. The regression noise is drawn once per
//! experiment from `derive_seed(master_seed, label_hash("grf_noise"))` unless
//! the problem block pins a seed.
//!
//! Files written to the output directory:
//!
//! | file | columns |
//! |------|---------|
//! | `runs.csv` | `config_id,run,seed,status,metric,error,theta_1..theta_K` |
//! | `summary.csv` | `metric,config_id,time,mean,std` |
//! | `table.csv` | `config_id,kind,parameters,runs,failed,mean,std` |
//! | `trajectory_<id>_<j>.csv` | `t,theta_1..theta_K` |
//! | `profile_<id>.csv` | `x,truth,fit_mean,fit_std,abs_err_mean,abs_err_std` |
//! | `data_g.csv` | `x,truth,data_g` |
//!
//! Reals are written as `{:.16e}` (17 significant digits, exact round trip);
//! an empty field marks a missing value.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{abs_err, ensemble_stats, equispaced_grid, rel_err, EnsembleSummary};
use crate::error::{Result, SgpError};
use crate::flow::{run_sgd, run_sgp, IntegratorSpec, MidpointSolver, RunConfig, Trajectory};
use crate::index::{IndexProcessSpec, IndexValue, InitialIndex};
use crate::problems::{ParameterVector, PolyRegression, Problem, ProblemSpec, QuadraticToy};
use crate::schedules::{MuFamily, TimeDilation};
use crate::seeding::{derive_run_seed, derive_seed, label_hash};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SGP_OUTPUT_DIR";

fn default_one() -> f64 {
    1.0
}

fn default_minibatch() -> usize {
    1
}

fn default_eval_points() -> usize {
    1000
}

/// One optimizer in the run matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    /// Discrete SGD, `θ_n = θ_{n-1} - η ∇f(θ_{n-1}, y_n)`, `y_n ~ Unif[-1, 1]`.
    SgdEuler {
        id: String,
        learning_rate: Option<f64>,
    },
    /// SGD with an implicit midpoint update.
    SgdMidpoint {
        id: String,
        learning_rate: Option<f64>,
        #[serde(default)]
        solver: MidpointSolver,
    },
    /// Constant learning rate, `β(t) = t / eps`.
    Sgpc {
        id: String,
        index: IndexProcessSpec,
        #[serde(default = "default_one")]
        eps: f64,
        #[serde(default = "default_minibatch")]
        minibatch: usize,
        integrator: Option<IntegratorSpec>,
    },
    /// Decreasing learning rate, `β(t) = ∫_0^t mu`.
    Sgpd {
        id: String,
        index: IndexProcessSpec,
        mu: MuFamily,
        /// Cache step of `β`; defaults to the optimizer step.
        mu_step: Option<f64>,
        #[serde(default = "default_minibatch")]
        minibatch: usize,
        integrator: Option<IntegratorSpec>,
    },
}

impl MethodSpec {
    pub fn id(&self) -> &str {
        match self {
            MethodSpec::SgdEuler { id, .. }
            | MethodSpec::SgdMidpoint { id, .. }
            | MethodSpec::Sgpc { id, .. }
            | MethodSpec::Sgpd { id, .. } => id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            MethodSpec::SgdEuler { .. } => "sgd_euler",
            MethodSpec::SgdMidpoint { .. } => "sgd_midpoint",
            MethodSpec::Sgpc { .. } => "sgpc",
            MethodSpec::Sgpd { .. } => "sgpd",
        }
    }

    /// Short human-readable parameter string for the table.
    pub fn parameters(&self, step: f64) -> String {
        fn index_label(spec: &IndexProcessSpec) -> String {
            match spec {
                IndexProcessSpec::JumpUniform { rate, .. } => format!("jump_uniform rate={rate}"),
                IndexProcessSpec::ReflectedBrownian { sigma, .. } => {
                    format!("reflected_brownian sigma={sigma}")
                }
                IndexProcessSpec::FiniteJump { rate, states } => {
                    format!("finite_jump rate={rate} states={states}")
                }
                IndexProcessSpec::CountableJump { rate } => format!("countable_jump rate={rate}"),
                IndexProcessSpec::Product { components } => format!(
                    "product[{}]",
                    components.iter().map(index_label).collect::<Vec<_>>().join(";")
                ),
            }
        }
        match self {
            MethodSpec::SgdEuler { learning_rate, .. }
            | MethodSpec::SgdMidpoint { learning_rate, .. } => {
                format!("eta={}", learning_rate.unwrap_or(step))
            }
            MethodSpec::Sgpc {
                index,
                eps,
                minibatch,
                ..
            } => format!("{} eps={eps} minibatch={minibatch}", index_label(index)),
            MethodSpec::Sgpd {
                index,
                mu,
                minibatch,
                ..
            } => {
                let mu = match mu {
                    MuFamily::PowerLog { scale, power } => format!("mu={scale}*log(t+2)^{power}"),
                    MuFamily::Affine { slope, intercept } => format!("mu={slope}*t+{intercept}"),
                };
                format!("{} {mu} minibatch={minibatch}", index_label(index))
            }
        }
    }
}

/// Initial index value: a number (cast to the state space) or `"stationary"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitIndexSpec {
    Value(f64),
    Keyword(String),
}

impl Default for InitIndexSpec {
    fn default() -> Self {
        InitIndexSpec::Keyword("stationary".into())
    }
}

impl InitIndexSpec {
    fn resolve(&self, spec: &IndexProcessSpec) -> Result<InitialIndex> {
        fn value_for(x: f64, spec: &IndexProcessSpec) -> Result<IndexValue> {
            let integral = |what: &str| {
                if x >= 0.0 && x.fract() == 0.0 {
                    Ok(x)
                } else {
                    Err(SgpError::Config(format!("init_index {x} is not a valid {what} state")))
                }
            };
            Ok(match spec {
                IndexProcessSpec::JumpUniform { .. } | IndexProcessSpec::ReflectedBrownian { .. } => {
                    IndexValue::Continuous(x)
                }
                IndexProcessSpec::FiniteJump { .. } => IndexValue::FiniteState(integral("finite")? as u32),
                IndexProcessSpec::CountableJump { .. } => {
                    IndexValue::CountableState(integral("countable")? as u64)
                }
                IndexProcessSpec::Product { components } => IndexValue::Product(
                    components.iter().map(|c| value_for(x, c)).collect::<Result<_>>()?,
                ),
            })
        }
        match self {
            InitIndexSpec::Keyword(k) if k == "stationary" => Ok(InitialIndex::Stationary),
            InitIndexSpec::Keyword(k) => Err(SgpError::Config(format!(
                "init_index must be a number or \"stationary\", got {k:?}"
            ))),
            InitIndexSpec::Value(x) => {
                let v = value_for(*x, spec)?;
                if !spec.contains(&v) {
                    return Err(SgpError::Config(format!(
                        "init_index {x} lies outside the index space"
                    )));
                }
                Ok(InitialIndex::Fixed(v))
            }
        }
    }
}

/// `θ₀` as one value broadcast over every coordinate, or a full vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta0Spec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Theta0Spec {
    fn resolve(&self, dim: usize) -> Result<ParameterVector> {
        match self {
            Theta0Spec::Scalar(x) => Ok(ParameterVector::from_element(dim, *x)),
            Theta0Spec::Vector(v) if v.len() == dim => Ok(ParameterVector::from_column_slice(v)),
            Theta0Spec::Vector(v) => Err(SgpError::Config(format!(
                "theta0 has {} entries, problem dimension is {dim}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    /// Repeated runs `J` per method.
    pub runs: usize,
    /// Optimizer steps `N`.
    pub steps: usize,
    /// Optimizer step `h`; the horizon is `N h`.
    pub step: f64,
    /// Largest index substep, in index-clock units; defaults to `h / 10`.
    pub index_step: Option<f64>,
    pub theta0: Theta0Spec,
    #[serde(default)]
    pub init_index: InitIndexSpec,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Thinning of recorded states; defaults to `max(1, N / 100)`.
    pub record_every: Option<usize>,
    /// Runs per method whose thinned trajectory is written out.
    #[serde(default)]
    pub trajectory_runs: usize,
    /// Points of the equispaced grid on `[-1, 1]` used by `rel_err` and profiles.
    #[serde(default = "default_eval_points")]
    pub eval_points: usize,
}

/// A problem together with its error metric.
#[derive(Debug, Clone)]
pub enum BuiltProblem {
    Toy(QuadraticToy),
    Regression(PolyRegression),
}

impl BuiltProblem {
    pub fn problem(&self) -> &dyn Problem {
        match self {
            BuiltProblem::Toy(p) => p,
            BuiltProblem::Regression(p) => p,
        }
    }

    /// `rel_err` for the regression, `1 ∧ ‖θ - θ*‖` for the toy.
    pub fn metric_name(&self) -> &'static str {
        match self {
            BuiltProblem::Toy(_) => "dist_to_minimizer",
            BuiltProblem::Regression(_) => "rel_err",
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| SgpError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| SgpError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Replaces `output_dir` with `$SGP_OUTPUT_DIR` when that is set.
    pub fn apply_env_override(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.step
    }

    pub fn record_every(&self) -> usize {
        self.record_every.unwrap_or((self.steps / 100).max(1))
    }

    pub fn noise_seed(&self) -> u64 {
        derive_seed(self.master_seed, label_hash("grf_noise"))
    }

    pub fn build_problem(&self) -> Result<BuiltProblem> {
        Ok(match &self.problem {
            ProblemSpec::QuadraticToy => BuiltProblem::Toy(QuadraticToy::new()),
            ProblemSpec::PolyRegression(spec) => {
                BuiltProblem::Regression(PolyRegression::new(spec, self.noise_seed())?)
            }
        })
    }

    /// Checks the schema and every method against the module preconditions.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SgpError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.runs == 0 {
            return fail("runs must be at least 1".into());
        }
        if self.steps == 0 {
            return fail("steps must be at least 1".into());
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return fail(format!("step must be positive, got {}", self.step));
        }
        if self.eval_points < 2 {
            return fail("eval_points must be at least 2".into());
        }
        if self.methods.is_empty() {
            return fail("no methods configured".into());
        }
        let mut ids = BTreeSet::new();
        for m in &self.methods {
            let id = m.id();
            if id.is_empty()
                || !id
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
            {
                return fail(format!("method id {id:?} must be non-empty and use [A-Za-z0-9_.-]"));
            }
            if !ids.insert(id) {
                return fail(format!("duplicate method id {id:?}"));
            }
        }
        let built = self.build_problem().map_err(to_config)?;
        let problem = built.problem();
        let theta0 = self.theta0.resolve(problem.dim())?;
        for m in &self.methods {
            self.check_method(m, problem, &theta0)
                .map_err(|e| SgpError::Config(format!("method {:?}: {}", m.id(), strip(e))))?;
        }
        Ok(())
    }

    fn check_method(&self, m: &MethodSpec, problem: &dyn Problem, theta0: &ParameterVector) -> Result<()> {
        match m {
            MethodSpec::SgdEuler { learning_rate, .. } | MethodSpec::SgdMidpoint { learning_rate, .. } => {
                let lr = learning_rate.unwrap_or(self.step);
                if !(lr > 0.0 && lr.is_finite()) {
                    return Err(SgpError::Config(format!("learning rate must be positive, got {lr}")));
                }
                Ok(())
            }
            _ => self.run_config(m, problem, theta0, 0)?.validate(problem).map(|_| ()),
        }
    }

    fn run_config(
        &self,
        m: &MethodSpec,
        problem: &dyn Problem,
        theta0: &ParameterVector,
        seed: u64,
    ) -> Result<RunConfig> {
        let (index, dilation, minibatch, integrator) = match m {
            MethodSpec::Sgpc {
                index,
                eps,
                minibatch,
                integrator,
                ..
            } => (index, TimeDilation::constant(*eps)?, *minibatch, integrator),
            MethodSpec::Sgpd {
                index,
                mu,
                mu_step,
                minibatch,
                integrator,
                ..
            } => (
                index,
                TimeDilation::smooth(*mu, mu_step.unwrap_or(self.step), self.horizon())?,
                *minibatch,
                integrator,
            ),
            _ => unreachable!("SGD methods have no run config"),
        };
        index.validate()?;
        let config = RunConfig {
            index: index.clone(),
            dilation,
            integrator: integrator.unwrap_or_else(IntegratorSpec::midpoint),
            horizon: self.horizon(),
            step: self.step,
            index_step: self.index_step,
            minibatch,
            theta0: theta0.clone(),
            init_index: self.init_index.resolve(index)?,
            seed,
            record_every: self.record_every(),
        };
        config.validate(problem)?;
        Ok(config)
    }
}

fn strip(e: SgpError) -> String {
    match e {
        SgpError::Config(msg) => msg,
        other => other.to_string(),
    }
}

fn to_config(e: SgpError) -> SgpError {
    SgpError::Config(strip(e))
}

/// Outcome of one `(method, run)` pair.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config_id: String,
    pub run: usize,
    pub seed: u64,
    /// Wall-clock seconds; not written to any CSV so outputs stay reproducible.
    pub runtime: f64,
    pub outcome: std::result::Result<RunSuccess, String>,
}

#[derive(Debug, Clone)]
pub struct RunSuccess {
    /// Terminal metric.
    pub metric: f64,
    pub theta: ParameterVector,
    /// Recorded times and the metric along them.
    pub times: Vec<f64>,
    pub metric_path: Vec<f64>,
    /// Kept only for the first `trajectory_runs` runs.
    pub trajectory: Option<Trajectory>,
}

/// Per-method results.
#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: MethodSpec,
    pub runs: Vec<RunResult>,
    /// Metric along the recorded times over successful runs.
    pub summary: Option<EnsembleSummary>,
    pub times: Vec<f64>,
}

impl MethodReport {
    pub fn failed(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Mean and sample StD of the terminal metric over successful runs.
    pub fn terminal(&self) -> Option<(f64, Option<f64>)> {
        let s = self.summary.as_ref()?;
        let last = s.mean.len() - 1;
        Some((s.mean[last], s.std.as_ref().map(|v| v[last])))
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub metric: &'static str,
    pub methods: Vec<MethodReport>,
}

impl ExperimentReport {
    pub fn failed_runs(&self) -> usize {
        self.methods.iter().map(MethodReport::failed).sum()
    }

    pub fn method(&self, id: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method.id() == id)
    }
}

fn metric_fn<'a>(built: &'a BuiltProblem, grid: &'a [f64]) -> impl Fn(&ParameterVector) -> Result<f64> + 'a {
    move |theta| match built {
        BuiltProblem::Toy(_) => Ok(((theta[0] - 1.0 / 3.0).abs()).min(1.0)),
        BuiltProblem::Regression(p) => {
            let truth = p.truth();
            rel_err(theta, |x| truth.eval(x), grid)
        }
    }
}

fn execute_run(
    config: &ExperimentConfig,
    built: &BuiltProblem,
    theta0: &ParameterVector,
    grid: &[f64],
    method: &MethodSpec,
    run: usize,
) -> RunResult {
    let seed = derive_run_seed(config.master_seed, method.id(), run as u64);
    let start = Instant::now();
    let problem = built.problem();
    let trajectory = match method {
        MethodSpec::SgdEuler { learning_rate, .. } => run_sgd(
            problem,
            theta0,
            config.steps,
            learning_rate.unwrap_or(config.step),
            &IntegratorSpec::ExplicitEuler,
            seed,
            config.record_every(),
        ),
        MethodSpec::SgdMidpoint {
            learning_rate,
            solver,
            ..
        } => {
            let integrator = match IntegratorSpec::midpoint() {
                IntegratorSpec::ImplicitMidpoint {
                    tolerance,
                    max_iterations,
                    ..
                } => IntegratorSpec::ImplicitMidpoint {
                    tolerance,
                    max_iterations,
                    solver: *solver,
                },
                other => other,
            };
            run_sgd(
                problem,
                theta0,
                config.steps,
                learning_rate.unwrap_or(config.step),
                &integrator,
                seed,
                config.record_every(),
            )
        }
        _ => config
            .run_config(method, problem, theta0, seed)
            .and_then(|rc| run_sgp(problem, &rc)),
    };
    let metric = metric_fn(built, grid);
    let outcome = trajectory
        .and_then(|traj| {
            let metric_path = traj.states.iter().map(&metric).collect::<Result<Vec<_>>>()?;
            if let Some(bad) = metric_path.iter().find(|m| !m.is_finite()) {
                return Err(SgpError::Numeric {
                    message: "non-finite metric".into(),
                    residual: *bad,
                });
            }
            Ok(RunSuccess {
                metric: *metric_path.last().expect("terminal state"),
                theta: traj.terminal().clone(),
                times: traj.times.clone(),
                metric_path,
                trajectory: (run < config.trajectory_runs).then_some(traj),
            })
        })
        .map_err(|e| e.to_string());
    let runtime = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(s) => log::debug!("{} run {run}: metric {:.4e} in {runtime:.2}s", method.id(), s.metric),
        Err(e) => log::warn!("{} run {run} failed: {e}", method.id()),
    }
    RunResult {
        config_id: method.id().to_string(),
        run,
        seed,
        runtime,
        outcome,
    }
}

/// Executes every `(method, run)` pair. Results do not depend on the number
/// of worker threads.
pub fn execute(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let built = config.build_problem()?;
    let theta0 = config.theta0.resolve(built.problem().dim())?;
    let grid = equispaced_grid(config.eval_points);
    let jobs: Vec<(usize, usize)> = (0..config.methods.len())
        .flat_map(|m| (0..config.runs).map(move |j| (m, j)))
        .collect();
    let mut results: Vec<RunResult> = jobs
        .par_iter()
        .map(|&(m, j)| execute_run(config, &built, &theta0, &grid, &config.methods[m], j))
        .collect();

    let mut methods = Vec::with_capacity(config.methods.len());
    for method in config.methods.iter().rev() {
        let runs = results.split_off(results.len() - config.runs);
        let ok: Vec<&RunSuccess> = runs.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
        let times = ok.first().map(|s| s.times.clone()).unwrap_or_default();
        let paths: Vec<Vec<f64>> = ok.iter().map(|s| s.metric_path.clone()).collect();
        let summary = if paths.is_empty() {
            None
        } else {
            Some(ensemble_stats(built.metric_name(), &paths)?)
        };
        if let Some((mean, std)) = summary.as_ref().map(|s| {
            let last = s.mean.len() - 1;
            (s.mean[last], s.std.as_ref().map(|v| v[last]))
        }) {
            log::info!(
                "{}: terminal {} mean {mean:.4e} std {}",
                method.id(),
                built.metric_name(),
                std.map_or("-".to_string(), |s| format!("{s:.4e}"))
            );
        }
        methods.push(MethodReport {
            method: method.clone(),
            runs,
            summary,
            times,
        });
    }
    methods.reverse();
    Ok(ExperimentReport {
        metric: built.metric_name(),
        methods,
    })
}

/// [`execute`] followed by [`write_outputs`] into `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let report = execute(config)?;
    write_outputs(config, &report, &config.output_dir)?;
    Ok(report)
}

/// A header and rows of preformatted fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` as reals; empty fields become `None`.
    pub fn reals(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let col = self
            .column(name)
            .ok_or_else(|| SgpError::Domain(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| match r.get(col).map(String::as_str) {
                None | Some("") => Ok(None),
                Some(s) => s
                    .parse()
                    .map(Some)
                    .map_err(|_| SgpError::Domain(format!("{s:?} in column {name:?} is not a number"))),
            })
            .collect()
    }
}

/// 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

/// Writes the header then one line per row, LF-terminated.
pub fn emit_csv(table: &CsvTable, path: &Path) -> Result<()> {
    let csv_err = |source| SgpError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        if row.len() != table.header.len() {
            return Err(SgpError::Domain(format!(
                "row has {} fields, header has {}",
                row.len(),
                table.header.len()
            )));
        }
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| SgpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let csv_err = |source| SgpError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)?;
    Ok(CsvTable { header, rows })
}

fn theta_header(dim: usize) -> impl Iterator<Item = String> {
    (1..=dim).map(|i| format!("theta_{i}"))
}

pub fn write_outputs(config: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| SgpError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let built = config.build_problem()?;
    let dim = built.problem().dim();

    let mut runs = CsvTable::new(
        ["config_id", "run", "seed", "status", "metric", "error"]
            .into_iter()
            .map(String::from)
            .chain(theta_header(dim)),
    );
    let mut summary = CsvTable::new(["metric", "config_id", "time", "mean", "std"]);
    let mut table = CsvTable::new(["config_id", "kind", "parameters", "runs", "failed", "mean", "std"]);
    for m in &report.methods {
        let id = m.method.id();
        for r in &m.runs {
            let mut row = vec![id.to_string(), r.run.to_string(), r.seed.to_string()];
            match &r.outcome {
                Ok(s) => {
                    row.extend(["ok".into(), real(s.metric), String::new()]);
                    row.extend(s.theta.iter().map(|x| real(*x)));
                }
                Err(e) => {
                    row.extend(["failed".into(), String::new(), e.clone()]);
                    row.extend(std::iter::repeat(String::new()).take(dim));
                }
            }
            runs.rows.push(row);
            if let Ok(RunSuccess {
                trajectory: Some(traj),
                ..
            }) = &r.outcome
            {
                traj.write_csv(&dir.join(format!("trajectory_{id}_{}.csv", r.run)))?;
            }
        }
        if let Some(s) = &m.summary {
            for (i, t) in m.times.iter().enumerate() {
                summary.rows.push(vec![
                    s.metric.clone(),
                    id.to_string(),
                    real(*t),
                    real(s.mean[i]),
                    opt_real(s.std.as_ref().map(|v| v[i])),
                ]);
            }
        }
        let (mean, std) = m.terminal().map_or((None, None), |(a, b)| (Some(a), b));
        table.rows.push(vec![
            id.to_string(),
            m.method.kind().to_string(),
            m.method.parameters(config.step),
            m.runs.len().to_string(),
            m.failed().to_string(),
            opt_real(mean),
            opt_real(std),
        ]);
        if let BuiltProblem::Regression(p) = &built {
            write_profile(p, m, config.eval_points, &dir.join(format!("profile_{id}.csv")))?;
        }
    }
    emit_csv(&runs, &dir.join("runs.csv"))?;
    emit_csv(&summary, &dir.join("summary.csv"))?;
    emit_csv(&table, &dir.join("table.csv"))?;
    if let BuiltProblem::Regression(p) = &built {
        let mut data = CsvTable::new(["x", "truth", "data_g"]);
        let truth = p.truth();
        for x in equispaced_grid(config.eval_points) {
            data.rows.push(vec![real(x), real(truth.eval(x)), real(p.data_g(x))]);
        }
        emit_csv(&data, &dir.join("data_g.csv"))?;
    }
    Ok(())
}

/// Fitted curve and `abs_err` on the evaluation grid, averaged over the
/// terminal states of successful runs.
fn write_profile(p: &PolyRegression, m: &MethodReport, points: usize, path: &Path) -> Result<()> {
    let thetas: Vec<&ParameterVector> = m
        .runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|s| &s.theta))
        .collect();
    let mut out = CsvTable::new(["x", "truth", "fit_mean", "fit_std", "abs_err_mean", "abs_err_std"]);
    if !thetas.is_empty() {
        let truth = p.truth();
        for x in equispaced_grid(points) {
            let fits: Vec<Vec<f64>> = thetas.iter().map(|t| vec![p.fit_value(t, x)]).collect();
            let errs: Vec<Vec<f64>> = thetas
                .iter()
                .map(|t| abs_err(t, |z| truth.eval(z), x).map(|e| vec![e]))
                .collect::<Result<_>>()?;
            let f = ensemble_stats("fit", &fits)?;
            let e = ensemble_stats("abs_err", &errs)?;
            out.rows.push(vec![
                real(x),
                real(truth.eval(x)),
                real(f.mean[0]),
                opt_real(f.std.map(|v| v[0])),
                real(e.mean[0]),
                opt_real(e.std.map(|v| v[0])),
            ]);
        }
    }
    emit_csv(&out, path)
}
