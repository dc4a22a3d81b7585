//! Closed-loop simulation, stability classification, arrival-rate sweeps and
//! paired policy comparisons.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{realize_slot, step, ArrivalProcess, NetworkSpec, QueueState};
use crate::policy::{Controller, PolicyConfig};
use crate::rng::SlotRng;
use crate::scenario::Scenario;

pub const DEFAULT_WINDOW_FRACTION: f64 = 0.5;
/// Packets per slot.
pub const DEFAULT_SLOPE_THRESHOLD: f64 = 0.05;
/// Fraction of seeds that must be stable for a sweep point to count as stable.
pub const STABLE_SEED_FRACTION: f64 = 0.8;
pub const MIN_CLASSIFY_SLOTS: usize = 200;

/// State at the start of slot `t` and everything that happened during it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotRecord {
    pub t: u64,
    pub q: Vec<i64>,
    pub sigma: usize,
    pub u: Vec<bool>,
    pub link_success: Vec<bool>,
    pub arrivals: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimulationTrace {
    pub slots: Vec<SlotRecord>,
    pub final_state: QueueState,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Per-buffer time average of `q_t` over the recorded slots.
    pub fn average_queue(&self) -> Vec<f64> {
        let n = self.final_state.q.len();
        let mut acc = vec![0.0; n];
        for s in &self.slots {
            for (a, &q) in acc.iter_mut().zip(&s.q) {
                *a += q as f64;
            }
        }
        let len = self.slots.len().max(1) as f64;
        acc.into_iter().map(|a| a / len).collect()
    }

    pub fn final_queue(&self) -> &[i64] {
        &self.final_state.q
    }

    /// Packets that left the network over the run.
    pub fn total_departures(&self) -> i64 {
        let Some(first) = self.slots.first() else {
            return 0;
        };
        let arrived: i64 = self.slots.iter().flat_map(|s| &s.arrivals).sum();
        first.q.iter().sum::<i64>() + arrived - self.final_state.q.iter().sum::<i64>()
    }

    pub fn total_series(&self) -> Vec<f64> {
        self.slots
            .iter()
            .map(|s| s.q.iter().sum::<i64>() as f64)
            .collect()
    }

    pub fn buffer_series(&self, buffer: usize) -> Vec<f64> {
        self.slots.iter().map(|s| s.q[buffer] as f64).collect()
    }

    pub fn max_queue(&self, buffer: usize) -> i64 {
        self.slots
            .iter()
            .map(|s| s.q[buffer])
            .chain(std::iter::once(self.final_state.q[buffer]))
            .max()
            .unwrap_or(0)
    }
}

/// Runs `slots` closed-loop slots: decide, realise, step.
pub fn run(
    spec: &NetworkSpec,
    config: &PolicyConfig,
    initial: &QueueState,
    slots: usize,
    seed: u64,
) -> Result<SimulationTrace> {
    let controller = Controller::new(spec, config)?;
    run_with(&controller, spec, initial, slots, seed)
}

pub fn run_with(
    controller: &Controller,
    spec: &NetworkSpec,
    initial: &QueueState,
    slots: usize,
    seed: u64,
) -> Result<SimulationTrace> {
    if slots == 0 {
        return Err(Error::InvalidArgument(
            "at least one slot is required".into(),
        ));
    }
    let mut rng = SlotRng::new(seed);
    let mut state = initial.clone();
    let mut records = Vec::with_capacity(slots);
    for _ in 0..slots {
        let u = controller.decide(&state)?;
        let real = realize_slot(&state, spec, &mut rng);
        let next = step(&state, &u, &real, spec)?;
        records.push(SlotRecord {
            t: state.t,
            q: state.q,
            sigma: state.sigma,
            u,
            link_success: real.link_success,
            arrivals: real.arrivals,
        });
        state = next;
    }
    Ok(SimulationTrace {
        slots: records,
        final_state: state,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityVerdict {
    pub slope: f64,
    pub stable: bool,
}

/// Ordinary least-squares slope of `y` against its index.
pub fn least_squares_slope(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return 0.0;
    }
    let mean_x = (n - 1) as f64 / 2.0;
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (v - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx
}

fn window(series: &[f64], window_fraction: f64) -> Result<&[f64]> {
    if series.len() < MIN_CLASSIFY_SLOTS {
        return Err(Error::TraceTooShort {
            len: series.len(),
            min: MIN_CLASSIFY_SLOTS,
        });
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "window fraction {window_fraction} is outside (0, 1]"
        )));
    }
    let len = ((series.len() as f64 * window_fraction).round() as usize).max(2);
    Ok(&series[series.len() - len..])
}

/// Slope of a single buffer over the final `window_fraction` of the trace.
pub fn buffer_slope(trace: &SimulationTrace, buffer: usize, window_fraction: f64) -> Result<f64> {
    let series = trace.buffer_series(buffer);
    Ok(least_squares_slope(window(&series, window_fraction)?))
}

/// Fits the total queue over the final `window_fraction` of the trace;
/// stable iff the slope is at most `slope_threshold`.
pub fn classify_stability(
    trace: &SimulationTrace,
    window_fraction: f64,
    slope_threshold: f64,
) -> Result<StabilityVerdict> {
    let series = trace.total_series();
    let slope = least_squares_slope(window(&series, window_fraction)?);
    Ok(StabilityVerdict {
        slope,
        stable: slope <= slope_threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionPoint {
    pub a1: f64,
    pub a2: f64,
    pub stable_fraction: f64,
    pub stable: bool,
}

/// Replaces the arrivals of `buffer` by an unscheduled Bernoulli process of
/// mean `rate`, keeping the buffer's weight.
pub fn with_buffer_rate(spec: &NetworkSpec, buffer: usize, rate: f64) -> Result<NetworkSpec> {
    let mut arrivals = spec.arrivals().to_vec();
    let Some(current) = arrivals.get(buffer) else {
        return Err(Error::InvalidArgument(format!(
            "network has no buffer {}",
            buffer + 1
        )));
    };
    let weight = current.weight;
    if rate.is_nan() || rate < 0.0 || rate > f64::from(weight) + 1e-12 || weight == 0 {
        return Err(Error::UnrealizableRate {
            buffer: buffer + 1,
            rate,
            weight,
        });
    }
    arrivals[buffer] = ArrivalProcess::bernoulli((rate / f64::from(weight)).min(1.0), weight);
    spec.with_arrivals(arrivals)
}

/// Sets the mean arrival rates of buffers 1 and 2 (see [`with_buffer_rate`]).
/// A zero `a2` is allowed on single-buffer networks.
pub fn with_rates(spec: &NetworkSpec, a1: f64, a2: f64) -> Result<NetworkSpec> {
    let spec = with_buffer_rate(spec, 0, a1)?;
    if spec.buffers() < 2 && a2 == 0.0 {
        return Ok(spec);
    }
    with_buffer_rate(&spec, 1, a2)
}

/// Fraction of seeds classified stable at each `(ā1, ā2)` grid point.
///
/// Points and seeds run in parallel; the result follows grid order.
pub fn sweep_region(
    template: &Scenario,
    config: &PolicyConfig,
    grid: &[(f64, f64)],
    slots: usize,
    seeds: &[u64],
) -> Result<Vec<RegionPoint>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one seed is required".into(),
        ));
    }
    let controllers: Vec<(NetworkSpec, Controller)> = grid
        .iter()
        .map(|&(a1, a2)| {
            let spec = with_rates(&template.spec, a1, a2)?;
            let ctl = Controller::new(&spec, config)?;
            Ok((spec, ctl))
        })
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let verdicts: Vec<bool> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (spec, ctl) = &controllers[i];
            let trace = run_with(ctl, spec, &template.initial, slots, seed)?;
            Ok(
                classify_stability(&trace, DEFAULT_WINDOW_FRACTION, DEFAULT_SLOPE_THRESHOLD)?
                    .stable,
            )
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .zip(verdicts.chunks(seeds.len()))
        .map(|(&(a1, a2), v)| {
            let stable_fraction = v.iter().filter(|&&s| s).count() as f64 / v.len() as f64;
            RegionPoint {
                a1,
                a2,
                stable_fraction,
                stable: stable_fraction >= STABLE_SEED_FRACTION,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySummary {
    pub config: PolicyConfig,
    /// Per-buffer time-average queue, averaged over seeds.
    pub avg_queue: Vec<f64>,
}

/// Runs every configuration on the same seeds. Draws depend only on
/// `(seed, slot, draw index)`, so all policies face the same environment.
pub fn compare_policies(
    scenario: &Scenario,
    configs: &[PolicyConfig],
    slots: usize,
    seeds: &[u64],
) -> Result<Vec<PolicySummary>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one seed is required".into(),
        ));
    }
    let controllers: Vec<Controller> = configs
        .iter()
        .map(|c| Controller::new(&scenario.spec, c))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let averages: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            run_with(
                &controllers[i],
                &scenario.spec,
                &scenario.initial,
                slots,
                seed,
            )
            .map(|t| t.average_queue())
        })
        .collect::<Result<_>>()?;
    let n = scenario.spec.buffers();
    Ok(configs
        .iter()
        .zip(averages.chunks(seeds.len()))
        .map(|(config, runs)| {
            let mut avg = vec![0.0; n];
            for r in runs {
                for (a, v) in avg.iter_mut().zip(r) {
                    *a += v;
                }
            }
            avg.iter_mut().for_each(|a| *a /= runs.len() as f64);
            PolicySummary {
                config: config.clone(),
                avg_queue: avg,
            }
        })
        .collect())
}
