//! Ergodic index processes and their time-discretized samplers.
//!
//! Four families are supported, each with an exact stationary law:
//!
//! | spec                  | state space   | stationary law        | step                      |
//! |-----------------------|---------------|-----------------------|---------------------------|
//! | `jump_uniform`        | `[lo, hi]`    | `Unif[lo, hi]`        | exact kernel              |
//! | `reflected_brownian`  | `[lo, hi]`    | `Unif[lo, hi]`        | Euler step + projection   |
//! | `finite_jump`         | `{1..N}`      | `Unif{1..N}`          | exact kernel              |
//! | `countable_jump`      | `{0, 1, ...}` | `P(i) = 2^-(i+1)`     | exact jump-time simulation|
//!
//! plus `product` specs whose components evolve independently.
//!
//! Random draws per step, in order:
//! * `jump_uniform`: one uniform decides stay/jump; a jump draws one more uniform.
//! * `reflected_brownian`: exactly one standard normal, also when `sigma == 0`.
//! * `finite_jump`: one uniform decides stay/jump; a jump draws one uniform state.
//! * `countable_jump`: one exponential waiting time per attempted jump, plus one
//!   uniform for every jump out of state 0.
//!
//! A product seeded with `s` gives component `i` the stream seeded by
//! [`derive_seed(s, i)`](crate::seeding::derive_seed), recursively.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SgpError};
use crate::seeding::{derive_seed, rng_from_seed, SgpRng};

/// A point of the index space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexValue {
    Continuous(f64),
    FiniteState(u32),
    CountableState(u64),
    Product(Vec<IndexValue>),
}

impl IndexValue {
    /// The scalar carried by a non-product value.
    pub fn as_real(&self) -> Option<f64> {
        match *self {
            IndexValue::Continuous(x) => Some(x),
            IndexValue::FiniteState(i) => Some(f64::from(i)),
            IndexValue::CountableState(i) => Some(i as f64),
            IndexValue::Product(_) => None,
        }
    }

    /// Appends the scalar leaves of this value in depth-first order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        match self {
            IndexValue::Product(parts) => parts.iter().for_each(|p| p.flatten_into(out)),
            leaf => out.push(leaf.as_real().expect("leaf value")),
        }
    }
}

fn default_lo() -> f64 {
    -1.0
}

fn default_hi() -> f64 {
    1.0
}

fn default_countable_rate() -> f64 {
    1.0
}

/// Parameters of an index process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexProcessSpec {
    /// Pure jump process: after an `Exp(rate)` wait, redraw from `Unif[lo, hi]`.
    JumpUniform {
        rate: f64,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    /// Brownian motion with diffusion scale `sigma`, kept in `[lo, hi]`.
    ReflectedBrownian {
        sigma: f64,
        #[serde(default = "default_lo")]
        lo: f64,
        #[serde(default = "default_hi")]
        hi: f64,
    },
    /// Jumps at rate `rate * states` to a uniformly drawn state of `{1..states}`.
    FiniteJump { rate: f64, states: u32 },
    /// From `k >= 1` jumps to 0; from 0 jumps to `i >= 1` with probability `2^-i`.
    CountableJump {
        #[serde(default = "default_countable_rate")]
        rate: f64,
    },
    Product { components: Vec<IndexProcessSpec> },
}

impl IndexProcessSpec {
    pub fn validate(&self) -> Result<()> {
        let check_rate = |rate: f64| {
            if rate.is_finite() && rate >= 0.0 {
                Ok(())
            } else {
                domain(format!("rate must be finite and non-negative, got {rate}"))
            }
        };
        let check_bounds = |lo: f64, hi: f64| {
            if lo.is_finite() && hi.is_finite() && lo < hi {
                Ok(())
            } else {
                domain(format!("bounds must satisfy lo < hi, got [{lo}, {hi}]"))
            }
        };
        match *self {
            IndexProcessSpec::JumpUniform { rate, lo, hi } => {
                check_rate(rate)?;
                check_bounds(lo, hi)
            }
            IndexProcessSpec::ReflectedBrownian { sigma, lo, hi } => {
                if !(sigma.is_finite() && sigma >= 0.0) {
                    return domain(format!("sigma must be finite and >= 0, got {sigma}"));
                }
                check_bounds(lo, hi)
            }
            IndexProcessSpec::FiniteJump { rate, states } => {
                check_rate(rate)?;
                if states < 2 {
                    return domain(format!("finite_jump needs at least 2 states, got {states}"));
                }
                Ok(())
            }
            IndexProcessSpec::CountableJump { rate } => check_rate(rate),
            IndexProcessSpec::Product { ref components } => {
                if components.is_empty() {
                    return domain("product spec has no components");
                }
                components.iter().try_for_each(|c| c.validate())
            }
        }
    }

    /// Whether `value` lies in this spec's state space.
    pub fn contains(&self, value: &IndexValue) -> bool {
        match (self, value) {
            (
                IndexProcessSpec::JumpUniform { lo, hi, .. }
                | IndexProcessSpec::ReflectedBrownian { lo, hi, .. },
                IndexValue::Continuous(x),
            ) => *lo <= *x && *x <= *hi,
            (IndexProcessSpec::FiniteJump { states, .. }, IndexValue::FiniteState(i)) => {
                (1..=*states).contains(i)
            }
            (IndexProcessSpec::CountableJump { .. }, IndexValue::CountableState(_)) => true,
            (IndexProcessSpec::Product { components }, IndexValue::Product(parts)) => {
                components.len() == parts.len()
                    && components.iter().zip(parts).all(|(c, p)| c.contains(p))
            }
            _ => false,
        }
    }

    /// True when single steps sample the exact transition kernel for any gap,
    /// so subdividing a gap does not change the law of the path.
    pub fn has_exact_kernel(&self) -> bool {
        match self {
            IndexProcessSpec::ReflectedBrownian { .. } => false,
            IndexProcessSpec::Product { components } => {
                components.iter().all(|c| c.has_exact_kernel())
            }
            _ => true,
        }
    }

    /// Number of scalar leaves in a value of this spec.
    pub fn leaf_count(&self) -> usize {
        match self {
            IndexProcessSpec::Product { components } => {
                components.iter().map(|c| c.leaf_count()).sum()
            }
            _ => 1,
        }
    }

    /// `copies` independent copies of `self`, as used for mini-batching.
    pub fn replicate(&self, copies: usize) -> IndexProcessSpec {
        if copies == 1 {
            self.clone()
        } else {
            IndexProcessSpec::Product {
                components: vec![self.clone(); copies],
            }
        }
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        domain(format!("time step must be finite and non-negative, got {dt}"))
    }
}

fn expect_continuous(state: &IndexValue, lo: f64, hi: f64) -> Result<f64> {
    match *state {
        IndexValue::Continuous(x) if lo <= x && x <= hi => Ok(x),
        ref other => domain(format!("state {other:?} is not a point of [{lo}, {hi}]")),
    }
}

/// One step of the discretized pure jump process with uniform jump law.
///
/// Stays with probability `exp(-rate * dt)`, otherwise returns a fresh
/// uniform draw on `[lo, hi]`. Several jumps inside `dt` collapse into one
/// because the post-jump law does not depend on the number of jumps.
pub fn mjp_step<R: Rng + ?Sized>(
    state: &IndexValue,
    dt: f64,
    spec: &IndexProcessSpec,
    rng: &mut R,
) -> Result<IndexValue> {
    let IndexProcessSpec::JumpUniform { rate, lo, hi } = *spec else {
        return domain("mjp_step needs a jump_uniform spec");
    };
    check_dt(dt)?;
    let x = expect_continuous(state, lo, hi)?;
    Ok(IndexValue::Continuous(mjp_draw(x, dt, rate, lo, hi, rng)))
}

#[inline]
fn mjp_draw<R: Rng + ?Sized>(x: f64, dt: f64, rate: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    if u <= (-rate * dt).exp() {
        x
    } else {
        lo + (hi - lo) * rng.gen::<f64>()
    }
}

/// The projected Euler–Maruyama update for a given standard normal draw `psi`.
#[inline]
pub fn rbm_update(state: f64, dt: f64, sigma: f64, lo: f64, hi: f64, psi: f64) -> f64 {
    (state + sigma * dt.sqrt() * psi).clamp(lo, hi)
}

/// One step of the reflected Brownian motion sampler: Euler–Maruyama
/// increment, then projection onto `[lo, hi]`.
pub fn rbm_step<R: Rng + ?Sized>(
    state: &IndexValue,
    dt: f64,
    spec: &IndexProcessSpec,
    rng: &mut R,
) -> Result<IndexValue> {
    let IndexProcessSpec::ReflectedBrownian { sigma, lo, hi } = *spec else {
        return domain("rbm_step needs a reflected_brownian spec");
    };
    check_dt(dt)?;
    let x = expect_continuous(state, lo, hi)?;
    let psi: f64 = StandardNormal.sample(rng);
    Ok(IndexValue::Continuous(rbm_update(x, dt, sigma, lo, hi, psi)))
}

/// Jump target of the countable process from state `k`.
fn countable_jump_target<R: Rng + ?Sized>(k: u64, rng: &mut R) -> u64 {
    if k >= 1 {
        0
    } else {
        // u in (0, 1]; P(ceil(-log2 u) = i) = 2^-i for i >= 1.
        let u = 1.0 - rng.gen::<f64>();
        ((-u.log2()).ceil() as u64).max(1)
    }
}

/// One step of the countable-state jump process, simulating every jump
/// inside `dt` (consecutive jumps do not commute here).
pub fn countable_step<R: Rng + ?Sized>(
    state: &IndexValue,
    dt: f64,
    spec: &IndexProcessSpec,
    rng: &mut R,
) -> Result<IndexValue> {
    let IndexProcessSpec::CountableJump { rate } = *spec else {
        return domain("countable_step needs a countable_jump spec");
    };
    check_dt(dt)?;
    let IndexValue::CountableState(k) = *state else {
        return domain(format!("state {state:?} is not a countable state"));
    };
    Ok(IndexValue::CountableState(countable_draw(k, dt, rate, rng)))
}

fn countable_draw<R: Rng + ?Sized>(mut k: u64, dt: f64, rate: f64, rng: &mut R) -> u64 {
    if rate == 0.0 {
        return k;
    }
    let wait = Exp::new(rate).expect("positive rate");
    let mut remaining = dt;
    loop {
        let w: f64 = wait.sample(rng);
        if w > remaining {
            return k;
        }
        remaining -= w;
        k = countable_jump_target(k, rng);
    }
}

fn finite_draw<R: Rng + ?Sized>(i: u32, dt: f64, rate: f64, states: u32, rng: &mut R) -> u32 {
    let u: f64 = rng.gen();
    if u <= (-rate * f64::from(states) * dt).exp() {
        i
    } else {
        rng.gen_range(1..=states)
    }
}

/// One exact draw from the stationary law of `spec`. Product components are
/// drawn in order from the same stream.
pub fn stationary_sample<R: Rng + ?Sized>(spec: &IndexProcessSpec, rng: &mut R) -> IndexValue {
    match *spec {
        IndexProcessSpec::JumpUniform { lo, hi, .. }
        | IndexProcessSpec::ReflectedBrownian { lo, hi, .. } => {
            IndexValue::Continuous(lo + (hi - lo) * rng.gen::<f64>())
        }
        IndexProcessSpec::FiniteJump { states, .. } => {
            IndexValue::FiniteState(rng.gen_range(1..=states))
        }
        IndexProcessSpec::CountableJump { .. } => {
            let u = 1.0 - rng.gen::<f64>();
            IndexValue::CountableState(((-u.log2()).ceil() as u64).saturating_sub(1))
        }
        IndexProcessSpec::Product { ref components } => IndexValue::Product(
            components.iter().map(|c| stationary_sample(c, rng)).collect(),
        ),
    }
}

/// How an index process is started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIndex {
    Fixed(IndexValue),
    Stationary,
}

/// A running index process with one random stream per scalar leaf.
#[derive(Debug, Clone)]
pub struct IndexProcess {
    spec: IndexProcessSpec,
    value: IndexValue,
    rngs: Vec<SgpRng>,
}

impl IndexProcess {
    /// Builds the process. A stationary start consumes the first draws of
    /// each leaf stream.
    pub fn new(spec: &IndexProcessSpec, init: &InitialIndex, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rngs = Vec::with_capacity(spec.leaf_count());
        leaf_streams(spec, seed, &mut rngs);
        let value = match init {
            InitialIndex::Fixed(v) => {
                if !spec.contains(v) {
                    return domain(format!("initial value {v:?} incompatible with {spec:?}"));
                }
                v.clone()
            }
            InitialIndex::Stationary => {
                let mut it = rngs.iter_mut();
                stationary_per_leaf(spec, &mut it)
            }
        };
        Ok(Self {
            spec: spec.clone(),
            value,
            rngs,
        })
    }

    pub fn value(&self) -> &IndexValue {
        &self.value
    }

    pub fn spec(&self) -> &IndexProcessSpec {
        &self.spec
    }

    /// Advances every component by one step of length `dt`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        check_dt(dt)?;
        let mut it = self.rngs.iter_mut();
        step_in_place(&self.spec, &mut self.value, dt, &mut it);
        Ok(())
    }

    /// Clears `out` and fills it with the scalar leaves of the current value.
    pub fn leaves_into(&self, out: &mut Vec<f64>) {
        out.clear();
        self.value.flatten_into(out);
    }
}

fn leaf_streams(spec: &IndexProcessSpec, seed: u64, out: &mut Vec<SgpRng>) {
    match spec {
        IndexProcessSpec::Product { components } => {
            for (i, c) in components.iter().enumerate() {
                leaf_streams(c, derive_seed(seed, i as u64), out);
            }
        }
        _ => out.push(rng_from_seed(seed)),
    }
}

fn stationary_per_leaf<'a>(
    spec: &IndexProcessSpec,
    rngs: &mut impl Iterator<Item = &'a mut SgpRng>,
) -> IndexValue {
    match spec {
        IndexProcessSpec::Product { components } => IndexValue::Product(
            components
                .iter()
                .map(|c| stationary_per_leaf(c, rngs))
                .collect(),
        ),
        leaf => stationary_sample(leaf, rngs.next().expect("one stream per leaf")),
    }
}

fn step_in_place<'a>(
    spec: &IndexProcessSpec,
    value: &mut IndexValue,
    dt: f64,
    rngs: &mut impl Iterator<Item = &'a mut SgpRng>,
) {
    match (spec, value) {
        (IndexProcessSpec::Product { components }, IndexValue::Product(parts)) => {
            for (c, p) in components.iter().zip(parts.iter_mut()) {
                step_in_place(c, p, dt, rngs);
            }
        }
        (&IndexProcessSpec::JumpUniform { rate, lo, hi }, IndexValue::Continuous(x)) => {
            let rng = rngs.next().expect("one stream per leaf");
            *x = mjp_draw(*x, dt, rate, lo, hi, rng);
        }
        (&IndexProcessSpec::ReflectedBrownian { sigma, lo, hi }, IndexValue::Continuous(x)) => {
            let rng = rngs.next().expect("one stream per leaf");
            let psi: f64 = StandardNormal.sample(rng);
            *x = rbm_update(*x, dt, sigma, lo, hi, psi);
        }
        (&IndexProcessSpec::FiniteJump { rate, states }, IndexValue::FiniteState(i)) => {
            let rng = rngs.next().expect("one stream per leaf");
            *i = finite_draw(*i, dt, rate, states, rng);
        }
        (&IndexProcessSpec::CountableJump { rate }, IndexValue::CountableState(k)) => {
            let rng = rngs.next().expect("one stream per leaf");
            *k = countable_draw(*k, dt, rate, rng);
        }
        (s, v) => unreachable!("value {v:?} does not match spec {s:?}"),
    }
}

/// A sampled path on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexPath {
    pub grid: Vec<f64>,
    pub values: Vec<IndexValue>,
}

impl IndexPath {
    /// Writes `t,value_1,...` rows; product values are flattened depth-first.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| SgpError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let width = self.values.first().map_or(1, |v| {
            let mut buf = Vec::new();
            v.flatten_into(&mut buf);
            buf.len()
        });
        let mut header = String::from("t");
        for i in 1..=width {
            header.push_str(&format!(",value_{i}"));
        }
        writeln!(out, "{header}").map_err(io_err)?;
        let mut buf = Vec::new();
        for (t, v) in self.grid.iter().zip(&self.values) {
            buf.clear();
            v.flatten_into(&mut buf);
            let mut line = format!("{t:.16e}");
            for x in &buf {
                line.push_str(&format!(",{x:.16e}"));
            }
            writeln!(out, "{line}").map_err(io_err)?;
        }
        out.flush().map_err(io_err)
    }
}

/// Samples `spec` on `grid`, one single-step per grid gap.
pub fn sample_path(
    spec: &IndexProcessSpec,
    grid: &[f64],
    init: &InitialIndex,
    seed: u64,
) -> Result<IndexPath> {
    match grid.first() {
        Some(&t0) if t0 == 0.0 => {}
        _ => return domain("grid must start at 0"),
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return domain("grid must be strictly increasing");
    }
    let mut process = IndexProcess::new(spec, init, seed)?;
    let mut values = Vec::with_capacity(grid.len());
    values.push(process.value().clone());
    for w in grid.windows(2) {
        process.advance(w[1] - w[0])?;
        values.push(process.value().clone());
    }
    Ok(IndexPath {
        grid: grid.to_vec(),
        values,
    })
}
