//! MaxWeight, linear PNC and quadratic PNC controllers.
//!
//! All three solve the same per-slot binary program and apply only the
//! first control block of the optimal trajectory:
//!
//! * quadratic PNC keeps `J_q`,
//! * linear PNC drops it,
//! * MaxWeight is linear PNC with `H = 1`, `τ = 1`, `Q = I` and `R = 0`,
//!   i.e. it minimises the expected next-slot weighted queue change subject
//!   to nonnegativity.
//!
//! The arrival rate used in the program is the rate of the current slot, so
//! controllers know the active phase of scheduled arrivals.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::expect::ProgramTemplate;
use crate::model::{is_admissible, NetworkSpec, QueueState};
use crate::solver::{solve, solve_linear, BqpInstance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    MaxWeight,
    LinearPnc,
    QuadraticPnc,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::MaxWeight => "mw",
            PolicyKind::LinearPnc => "lpnc",
            PolicyKind::QuadraticPnc => "qpnc",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mw" | "maxweight" => Ok(PolicyKind::MaxWeight),
            "lpnc" => Ok(PolicyKind::LinearPnc),
            "qpnc" => Ok(PolicyKind::QuadraticPnc),
            other => Err(Error::InvalidArgument(format!("unknown policy '{other}'"))),
        }
    }
}

/// Default number of hard-constrained steps.
pub const DEFAULT_TAU_HARD: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub horizon: usize,
    pub tau_hard: usize,
    /// Queue weight; `None` means `I_n`.
    pub q_weight: Option<DMatrix<f64>>,
    /// Control weight; `None` means `0`.
    pub r_weight: Option<DMatrix<f64>>,
}

impl PolicyConfig {
    /// `tau_hard` defaults to `min(2, horizon)`; MaxWeight always uses
    /// `H = 1`, `τ = 1`.
    pub fn new(kind: PolicyKind, horizon: usize) -> Self {
        let horizon = if kind == PolicyKind::MaxWeight {
            1
        } else {
            horizon
        };
        Self {
            kind,
            horizon,
            tau_hard: DEFAULT_TAU_HARD.min(horizon.max(1)),
            q_weight: None,
            r_weight: None,
        }
    }

    pub fn maxweight() -> Self {
        Self::new(PolicyKind::MaxWeight, 1)
    }

    pub fn lpnc(horizon: usize) -> Self {
        Self::new(PolicyKind::LinearPnc, horizon)
    }

    pub fn qpnc(horizon: usize) -> Self {
        Self::new(PolicyKind::QuadraticPnc, horizon)
    }

    pub fn with_tau_hard(mut self, tau_hard: usize) -> Self {
        if self.kind != PolicyKind::MaxWeight {
            self.tau_hard = tau_hard;
        }
        self
    }

    pub fn all_hard(self) -> Self {
        let h = self.horizon;
        self.with_tau_hard(h)
    }

    pub fn with_weights(mut self, q: DMatrix<f64>, r: DMatrix<f64>) -> Self {
        self.q_weight = Some(q);
        self.r_weight = Some(r);
        self
    }

    /// `kind:horizon`, e.g. `qpnc:3`.
    pub fn label(&self) -> String {
        format!("{}:{}", self.kind, self.horizon)
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        if !(1..=self.horizon).contains(&self.tau_hard) {
            return Err(Error::InvalidArgument(format!(
                "tau_hard {} is outside 1..={}",
                self.tau_hard, self.horizon
            )));
        }
        if self.kind == PolicyKind::MaxWeight && (self.horizon != 1 || self.tau_hard != 1) {
            return Err(Error::InvalidArgument(
                "MaxWeight uses horizon 1 with one hard step".into(),
            ));
        }
        Ok(())
    }
}

/// A policy bound to a network, with per-channel-state program templates.
#[derive(Clone, Debug)]
pub struct Controller {
    config: PolicyConfig,
    spec: NetworkSpec,
    templates: Vec<ProgramTemplate>,
    /// `[I_H ⊗ C; D(σ)]` per channel state.
    constraints: Vec<DMatrix<f64>>,
}

impl Controller {
    pub fn new(spec: &NetworkSpec, config: &PolicyConfig) -> Result<Self> {
        config.validate()?;
        let (n, m) = (spec.buffers(), spec.links());
        let (q, r) = match config.kind {
            PolicyKind::MaxWeight => (DMatrix::identity(n, n), DMatrix::zeros(m, m)),
            _ => (
                config
                    .q_weight
                    .clone()
                    .unwrap_or_else(|| DMatrix::identity(n, n)),
                config
                    .r_weight
                    .clone()
                    .unwrap_or_else(|| DMatrix::zeros(m, m)),
            ),
        };
        let h = config.horizon;
        let size = m * h;
        if size > crate::solver::MAX_VARIABLES {
            return Err(Error::TooLarge {
                size,
                limit: crate::solver::MAX_VARIABLES,
            });
        }
        let c = spec.constituency().map(|x| x as f64);
        let channel = DMatrix::<f64>::identity(h, h).kronecker(&c);
        let mut templates = Vec::with_capacity(spec.states());
        let mut constraints = Vec::with_capacity(spec.states());
        for sigma in 0..spec.states() {
            let tpl = ProgramTemplate::new(spec, sigma, h, config.tau_hard, &q, &r)?;
            let d = tpl.constraint_matrix();
            let mut a = DMatrix::zeros(channel.nrows() + d.nrows(), size);
            a.view_mut((0, 0), channel.shape()).copy_from(&channel);
            a.view_mut((channel.nrows(), 0), d.shape()).copy_from(d);
            templates.push(tpl);
            constraints.push(a);
        }
        Ok(Self {
            config: config.clone(),
            spec: spec.clone(),
            templates,
            constraints,
        })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    /// The binary program solved in `state`.
    pub fn program(&self, state: &QueueState) -> Result<BqpInstance> {
        check_dim("queue vector", self.spec.buffers(), state.q.len())?;
        if state.sigma >= self.spec.states() {
            return Err(Error::InvalidArgument(format!(
                "Markov state {} is outside 1..={}",
                state.sigma + 1,
                self.spec.states()
            )));
        }
        if state.q.iter().any(|&x| x < 0) {
            return Err(Error::InvalidArgument("queues must be nonnegative".into()));
        }
        let tpl = &self.templates[state.sigma];
        let q0 = DVector::from_iterator(state.q.len(), state.q.iter().map(|&x| x as f64));
        let abar = self.spec.arrival_rates_at(state.t);
        let a = &self.constraints[state.sigma];
        let channel_rows = a.nrows() - tpl.constraint_matrix().nrows();
        let bound = tpl.constraint_bound(&q0, &abar);
        let mut b = DVector::from_element(a.nrows(), 1.0);
        b.rows_mut(channel_rows, bound.len()).copy_from(&bound);
        let size = a.ncols();
        let hq = match self.config.kind {
            PolicyKind::QuadraticPnc => tpl.quadratic().clone(),
            _ => DMatrix::zeros(size, size),
        };
        BqpInstance::new(tpl.linear_cost(&q0, &abar), hq, a.clone(), b)
    }

    /// Optimal trajectory of length `m·H`.
    pub fn plan(&self, state: &QueueState) -> Result<Vec<bool>> {
        let inst = self.program(state)?;
        let sol = match self.config.kind {
            PolicyKind::QuadraticPnc => solve(&inst)?,
            _ => solve_linear(&inst)?,
        };
        Ok(sol.u_star)
    }

    /// First control block of the optimal trajectory.
    pub fn decide(&self, state: &QueueState) -> Result<Vec<bool>> {
        let mut u = self.plan(state)?;
        u.truncate(self.spec.links());
        if !is_admissible(&state.q, &u, &self.spec)? {
            return Err(Error::Inadmissible);
        }
        Ok(u)
    }
}

/// One-shot decision; builds a [`Controller`] for the call.
pub fn decide(state: &QueueState, spec: &NetworkSpec, config: &PolicyConfig) -> Result<Vec<bool>> {
    Controller::new(spec, config)?.decide(state)
}

/// True when MaxWeight and linear PNC with `H = 1` agree on every state.
pub fn mw_equivalence_check(states: &[QueueState], spec: &NetworkSpec) -> Result<bool> {
    let mw = Controller::new(spec, &PolicyConfig::maxweight())?;
    let lpnc = Controller::new(spec, &PolicyConfig::lpnc(1))?;
    for s in states {
        if mw.decide(s)? != lpnc.decide(s)? {
            return Ok(false);
        }
    }
    Ok(true)
}
