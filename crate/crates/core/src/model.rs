//! Network description and the exact stochastic one-step dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::SlotRng;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Bernoulli arrivals of fixed weight, optionally with a cyclic rate schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub probability: f64,
    pub weight: u32,
    /// `(duration in slots, probability)` phases, cycled forever.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<(u64, f64)>>,
    /// Slots by which the schedule is advanced at `t = 0`.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub phase_offset: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl ArrivalProcess {
    pub fn bernoulli(probability: f64, weight: u32) -> Self {
        Self {
            probability,
            weight,
            schedule: None,
            phase_offset: 0,
        }
    }

    pub fn none() -> Self {
        Self::bernoulli(0.0, 1)
    }

    /// Weight-1 arrivals alternating between `rate + amplitude` and
    /// `rate - amplitude` every `period` slots, starting high.
    pub fn alternating(rate: f64, amplitude: f64, period: u64) -> Self {
        Self {
            probability: rate,
            weight: 1,
            schedule: Some(vec![(period, rate + amplitude), (period, rate - amplitude)]),
            phase_offset: 0,
        }
    }

    pub fn with_phase_offset(mut self, offset: u64) -> Self {
        self.phase_offset = offset;
        self
    }

    /// Success probability of the arrival trial in slot `t`.
    pub fn probability_at(&self, t: u64) -> f64 {
        match &self.schedule {
            None => self.probability,
            Some(phases) => {
                let cycle: u64 = phases.iter().map(|(d, _)| d).sum();
                let mut pos = (t + self.phase_offset) % cycle;
                for &(d, p) in phases {
                    if pos < d {
                        return p;
                    }
                    pos -= d;
                }
                unreachable!("position lies inside the cycle")
            }
        }
    }

    /// Expected arrivals in slot `t`.
    pub fn rate_at(&self, t: u64) -> f64 {
        self.probability_at(t) * f64::from(self.weight)
    }

    /// Long-run mean arrivals per slot.
    pub fn mean_rate(&self) -> f64 {
        match &self.schedule {
            None => self.probability * f64::from(self.weight),
            Some(phases) => {
                let cycle: u64 = phases.iter().map(|(d, _)| d).sum();
                let mass: f64 = phases.iter().map(|&(d, p)| d as f64 * p).sum();
                mass / cycle as f64 * f64::from(self.weight)
            }
        }
    }

    fn validate(&self, buffer: usize) -> Result<()> {
        let check_p = |p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!(
                    "arrival probability {p} at buffer {} is outside [0, 1]",
                    buffer + 1
                )))
            }
        };
        check_p(self.probability)?;
        if let Some(phases) = &self.schedule {
            if phases.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "empty arrival schedule at buffer {}",
                    buffer + 1
                )));
            }
            for &(d, p) in phases {
                if d == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "schedule duration must be at least 1 at buffer {}",
                        buffer + 1
                    )));
                }
                check_p(p)?;
            }
        }
        Ok(())
    }
}

/// Static network: links, channel exclusivity, channel Markov chain, arrivals.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    link_matrix: DMatrix<i64>,
    constituency: DMatrix<i64>,
    transition: DMatrix<f64>,
    success_weights: Vec<DVector<f64>>,
    arrivals: Vec<ArrivalProcess>,
    // derived
    link_f64: DMatrix<f64>,
    link_minus: DMatrix<i64>,
    weighted: Vec<DMatrix<f64>>,
}

impl NetworkSpec {
    /// Builds and validates a network.
    ///
    /// `transition` is column-stochastic (`dist' = P · dist`) and
    /// `success_weights[i]` holds the diagonal of `M_i`.
    pub fn new(
        link_matrix: DMatrix<i64>,
        constituency: DMatrix<i64>,
        transition: DMatrix<f64>,
        success_weights: Vec<DVector<f64>>,
        arrivals: Vec<ArrivalProcess>,
    ) -> Result<Self> {
        let (n, m) = link_matrix.shape();
        if n == 0 || m == 0 {
            return Err(Error::InvalidSpec("link matrix must be non-empty".into()));
        }
        check_dim("constituency columns", m, constituency.ncols())?;
        if constituency.iter().any(|&c| c != 0 && c != 1) {
            return Err(Error::InvalidSpec(
                "constituency entries must be 0 or 1".into(),
            ));
        }
        let p = transition.nrows();
        if p == 0 {
            return Err(Error::InvalidSpec(
                "at least one Markov state is required".into(),
            ));
        }
        check_dim("transition columns", p, transition.ncols())?;
        for (j, col) in transition.column_iter().enumerate() {
            if col.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidSpec(format!(
                    "transition column {} has entries outside [0, 1]",
                    j + 1
                )));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidSpec(format!(
                    "transition column {} sums to {s}, expected 1",
                    j + 1
                )));
            }
        }
        check_dim("success weight sets", p, success_weights.len())?;
        for (i, w) in success_weights.iter().enumerate() {
            check_dim("success weight diagonal", m, w.len())?;
            if w.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::InvalidSpec(format!(
                    "success weights of state {} must lie in [0, 1]",
                    i + 1
                )));
            }
        }
        check_dim("arrival processes", n, arrivals.len())?;
        for (i, a) in arrivals.iter().enumerate() {
            a.validate(i)?;
        }

        let link_f64 = link_matrix.map(|x| x as f64);
        let link_minus = link_matrix.map(|x| x.min(0));
        let weighted = success_weights
            .iter()
            .map(|w| &link_f64 * DMatrix::from_diagonal(w))
            .collect();
        Ok(Self {
            link_matrix,
            constituency,
            transition,
            success_weights,
            arrivals,
            link_f64,
            link_minus,
            weighted,
        })
    }

    pub fn buffers(&self) -> usize {
        self.link_matrix.nrows()
    }

    pub fn links(&self) -> usize {
        self.link_matrix.ncols()
    }

    pub fn states(&self) -> usize {
        self.transition.nrows()
    }

    pub fn link_matrix(&self) -> &DMatrix<i64> {
        &self.link_matrix
    }

    pub fn link_matrix_f64(&self) -> &DMatrix<f64> {
        &self.link_f64
    }

    pub fn constituency(&self) -> &DMatrix<i64> {
        &self.constituency
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn success_weights(&self) -> &[DVector<f64>] {
        &self.success_weights
    }

    pub fn arrivals(&self) -> &[ArrivalProcess] {
        &self.arrivals
    }

    /// `B̄ M_state`.
    pub fn weighted_links(&self, state: usize) -> &DMatrix<f64> {
        &self.weighted[state]
    }

    /// Expected arrivals per buffer in slot `t`.
    pub fn arrival_rates_at(&self, t: u64) -> DVector<f64> {
        DVector::from_iterator(self.buffers(), self.arrivals.iter().map(|a| a.rate_at(t)))
    }

    pub fn with_arrivals(&self, arrivals: Vec<ArrivalProcess>) -> Result<Self> {
        Self::new(
            self.link_matrix.clone(),
            self.constituency.clone(),
            self.transition.clone(),
            self.success_weights.clone(),
            arrivals,
        )
    }

    pub fn with_link_matrix(&self, link_matrix: DMatrix<i64>) -> Result<Self> {
        Self::new(
            link_matrix,
            self.constituency.clone(),
            self.transition.clone(),
            self.success_weights.clone(),
            self.arrivals.clone(),
        )
    }
}

/// Queue lengths, channel state and slot counter. `sigma` is zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct QueueState {
    pub q: Vec<i64>,
    pub sigma: usize,
    pub t: u64,
}

impl QueueState {
    pub fn new(q: Vec<i64>, sigma: usize) -> Self {
        Self { q, sigma, t: 0 }
    }

    pub fn total(&self) -> i64 {
        self.q.iter().sum()
    }
}

/// Everything random that happens in one slot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotRealization {
    pub link_success: Vec<bool>,
    pub arrivals: Vec<i64>,
    pub next_sigma: usize,
}

fn check_control(u: &[bool], spec: &NetworkSpec) -> Result<()> {
    check_dim("control vector", spec.links(), u.len())
}

/// `C u <= 1` and `q + B̄⁻ u >= 0`.
///
/// The clamped check holds for every link-success pattern: a realised column
/// is either the full column or zero, and both dominate the clamped column.
pub fn is_admissible(q: &[i64], u: &[bool], spec: &NetworkSpec) -> Result<bool> {
    check_dim("queue vector", spec.buffers(), q.len())?;
    check_control(u, spec)?;
    let c = spec.constituency();
    for row in c.row_iter() {
        let load: i64 = row
            .iter()
            .zip(u)
            .filter(|(_, &on)| on)
            .map(|(&c, _)| c)
            .sum();
        if load > 1 {
            return Ok(false);
        }
    }
    let minus = &spec.link_minus;
    for (i, &qi) in q.iter().enumerate() {
        let worst: i64 = u
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(j, _)| minus[(i, j)])
            .sum();
        if qi + worst < 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Draws arrivals, link successes and the next channel state for slot `state.t`.
///
/// Draw order is fixed (arrivals by buffer, then link successes by link, then
/// the Markov transition) and the draw count does not depend on the control.
pub fn realize_slot(state: &QueueState, spec: &NetworkSpec, rng: &mut SlotRng) -> SlotRealization {
    let mut draws = rng.at_slot(state.t);
    let arrivals = spec
        .arrivals()
        .iter()
        .map(|a| {
            if draws.bernoulli(a.probability_at(state.t)) {
                i64::from(a.weight)
            } else {
                0
            }
        })
        .collect();
    let weights = &spec.success_weights()[state.sigma];
    let link_success = weights.iter().map(|&p| draws.bernoulli(p)).collect();

    let u = draws.uniform();
    let column = spec.transition().column(state.sigma);
    // rounding can leave the cumulative sum just short of 1
    let mut next_sigma = column.iter().rposition(|&p| p > 0.0).unwrap_or(0);
    let mut acc = 0.0;
    for (i, &p) in column.iter().enumerate() {
        acc += p;
        if u < acc {
            next_sigma = i;
            break;
        }
    }

    SlotRealization {
        link_success,
        arrivals,
        next_sigma,
    }
}

/// Applies one slot of `q' = q + B_t u + a`. Inadmissible controls are rejected.
pub fn step(
    state: &QueueState,
    u: &[bool],
    real: &SlotRealization,
    spec: &NetworkSpec,
) -> Result<QueueState> {
    if !is_admissible(&state.q, u, spec)? {
        return Err(Error::Inadmissible);
    }
    check_dim("link successes", spec.links(), real.link_success.len())?;
    check_dim("arrivals", spec.buffers(), real.arrivals.len())?;
    let b = spec.link_matrix();
    let mut q = state.q.clone();
    for (j, (&on, &ok)) in u.iter().zip(&real.link_success).enumerate() {
        if on && ok {
            for (i, qi) in q.iter_mut().enumerate() {
                *qi += b[(i, j)];
            }
        }
    }
    for (qi, a) in q.iter_mut().zip(&real.arrivals) {
        *qi += a;
    }
    debug_assert!(q.iter().all(|&x| x >= 0));
    Ok(QueueState {
        q,
        sigma: real.next_sigma,
        t: state.t + 1,
    })
}
