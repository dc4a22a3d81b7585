//! Predictive network control for discrete-time stochastic packet networks.
//!
//! The network is a vector of integer buffers driven by
//!
//! ```text
//! q_{t+1} = q_t + B_t u_t + a_t,      B_t = B̄ · Bernoulli[M_{σ_t}]
//! ```
//!
//! where `u_t` is a binary link activation vector, `a_t` a vector of
//! Bernoulli-weighted arrivals and `σ_t` the state of a channel Markov chain.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: network description and exact one-step stochastic dynamics.
//! * [`expect`]: Kronecker-expanded Markov expectations and assembly of the
//!   per-slot binary quadratic program (cost rows, cost matrix, constraints).
//! * [`solver`]: exact branch-and-bound minimiser for small binary programs.
//! * [`policy`]: MaxWeight, linear PNC and quadratic PNC controllers.
//! * [`sim`]: closed-loop runs, stability classification, region sweeps and
//!   paired policy comparisons.
//! * [`scenario`]: built-in example networks and the JSON scenario format.

pub mod error;
pub mod expect;
pub mod model;
pub mod policy;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod solver;

pub use error::{Error, Result};
pub use expect::{AssembledProgram, ExpandedModel};
pub use model::{ArrivalProcess, NetworkSpec, QueueState, SlotRealization};
pub use policy::{Controller, PolicyConfig, PolicyKind};
pub use scenario::{Scenario, ScenarioFile};
pub use sim::{SimulationTrace, StabilityVerdict};
pub use solver::{BqpInstance, BqpSolution};
