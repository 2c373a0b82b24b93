//! Continuous-time stochastic gradient processes.
//!
//! A gradient flow `dθ = -∇_θ f(θ, V_{β(t)}) dt` is coupled to an ergodic
//! index process `(V_t)` on the data space `S`. With `β(t) = t/ε` the flow
//! models stochastic gradient descent with a constant learning rate; a slowly
//! accelerating clock `β(t) = ∫_0^t μ` models a decreasing one.
//!
//! * [`index`]: index-process samplers and their stationary laws.
//! * [`schedules`]: time dilations `β`.
//! * [`problems`]: subsampled targets, mean gradients, minimizers.
//! * [`flow`]: integrators and the coupled driver.
//! * [`diagnostics`]: error metrics and distribution distances.
//! * [`experiment`]: seeded batch runs with CSV output.

pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod flow;
pub mod index;
pub mod plot;
pub mod problems;
pub mod quadrature;
pub mod schedules;
pub mod seeding;

pub use error::{Result, SgpError};
