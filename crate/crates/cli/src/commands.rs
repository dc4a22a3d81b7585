use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use pnc_core::policy::{Controller, PolicyConfig, PolicyKind};
use pnc_core::scenario::{self, Scenario, ScenarioFile};
use pnc_core::sim::{self, compare_policies, sweep_region};
use pnc_core::ArrivalProcess;

use crate::args::{CompareArgs, ConstraintArgs, ScenarioArgs, SimulateArgs, SweepArgs};
use crate::output;
use crate::{Classify, Failure};

fn load_scenario(a: &ScenarioArgs) -> anyhow::Result<Scenario> {
    let mut sc = match a.scenario.strip_prefix("builtin:") {
        Some(name) => scenario::builtin(name).ok_or_else(|| {
            anyhow!("unknown builtin scenario '{name}' (expected generic or natural)")
        })?,
        None => {
            let text = fs::read_to_string(&a.scenario)
                .with_context(|| format!("cannot read scenario file {}", a.scenario))?;
            ScenarioFile::parse(&text).with_context(|| format!("in {}", a.scenario))?
        }
    };
    if a.alternating {
        if a.scenario != "builtin:natural" {
            bail!("--alternating is only available for builtin:natural");
        }
        sc.spec = scenario::natural_alternating(0);
    }
    if a.phase_offset > 0 {
        let arrivals = sc
            .spec
            .arrivals()
            .iter()
            .map(|p| p.clone().with_phase_offset(a.phase_offset))
            .collect();
        sc.spec = sc.spec.with_arrivals(arrivals)?;
    }
    Ok(sc)
}

fn policy_config(kind: PolicyKind, horizon: usize, c: &ConstraintArgs) -> PolicyConfig {
    let cfg = PolicyConfig::new(kind, horizon);
    if c.all_hard {
        cfg.all_hard()
    } else if let Some(tau) = c.tau_hard {
        cfg.with_tau_hard(tau)
    } else {
        cfg
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => write(p, bytes),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .context("cannot write to stdout")
                .runtime()
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let mut sc = load_scenario(&a.scenario).config()?;
    if let Some(rate) = a.a1 {
        sc.spec = sim::with_buffer_rate(&sc.spec, 0, rate).config()?;
    }
    let kind: PolicyKind = a.policy.parse().config()?;
    let cfg = policy_config(kind, a.horizon, &a.constraints);
    let controller = Controller::new(&sc.spec, &cfg).config()?;
    if a.slots == 0 {
        return Err(Failure::Config(anyhow!("--slots must be at least 1")));
    }

    let trace = sim::run_with(&controller, &sc.spec, &sc.initial, a.slots, a.seed).runtime()?;
    let csv = output::trace_csv(&trace, sc.spec.buffers(), sc.spec.links()).runtime()?;
    let summary = output::summary_json(&trace);
    if let Some(p) = &a.out {
        write(p, &csv)?;
    }
    if let Some(p) = &a.summary {
        write(p, summary.as_bytes())?;
    }
    if a.out.is_none() && a.summary.is_none() {
        emit(None, summary.as_bytes())?;
    }
    Ok(())
}

/// Parses `min:max:step` into ascending grid values.
pub fn parse_range(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let [min, max, step] = parts.as_slice() else {
        bail!("range '{text}' must have the form min:max:step");
    };
    let parse = |s: &str| -> anyhow::Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .with_context(|| format!("bad number '{s}' in range '{text}'"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            bail!("non-finite number in range '{text}'")
        }
    };
    let (min, max, step) = (parse(min)?, parse(max)?, parse(step)?);
    if step <= 0.0 {
        bail!("step must be positive in range '{text}'");
    }
    if min > max {
        bail!("empty range '{text}' (min > max)");
    }
    let count = ((max - min) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((min + step * i as f64) * 1e9).round() / 1e9)
        .collect())
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let mut sc = load_scenario(&a.scenario).config()?;
    let a1 = parse_range(&a.a1).config()?;
    let a2 = parse_range(&a.a2).config()?;
    let kind: PolicyKind = a.policy.parse().config()?;
    let cfg = policy_config(kind, a.horizon, &a.constraints);
    Controller::new(&sc.spec, &cfg).config()?;
    if a.seeds == 0 {
        return Err(Failure::Config(anyhow!("--seeds must be at least 1")));
    }
    if a.slots < sim::MIN_CLASSIFY_SLOTS {
        return Err(Failure::Config(anyhow!(
            "--slots must be at least {} to classify stability",
            sim::MIN_CLASSIFY_SLOTS
        )));
    }

    // swept buffers get a weight able to realise the largest rate
    let mut arrivals = sc.spec.arrivals().to_vec();
    for (buffer, axis) in [(0usize, &a1), (1, &a2)] {
        let top = axis.iter().cloned().fold(0.0, f64::max);
        let Some(current) = arrivals.get(buffer) else {
            continue;
        };
        let weight = a
            .weight
            .unwrap_or_else(|| current.weight.max(top.ceil() as u32).max(1));
        arrivals[buffer] = ArrivalProcess::bernoulli(0.0, weight);
    }
    sc.spec = sc.spec.with_arrivals(arrivals).config()?;

    let grid: Vec<(f64, f64)> = a1
        .iter()
        .flat_map(|&x| a2.iter().map(move |&y| (x, y)))
        .collect();
    for &(x, y) in &grid {
        sim::with_rates(&sc.spec, x, y).config()?;
    }
    let seeds: Vec<u64> = (1..=a.seeds).collect();
    let points = sweep_region(&sc, &cfg, &grid, a.slots, &seeds).runtime()?;
    let csv = output::region_csv(&points).runtime()?;
    emit(a.out.as_deref(), &csv)
}

/// Parses `mw,qpnc:3,lpnc:2` into `(kind, horizon)` pairs.
pub fn parse_policies(text: &str) -> anyhow::Result<Vec<(PolicyKind, usize)>> {
    let list: Vec<(PolicyKind, usize)> = text
        .split(',')
        .map(|item| {
            let item = item.trim();
            let (kind, horizon) = match item.split_once(':') {
                Some((k, h)) => (
                    k,
                    h.parse::<usize>()
                        .with_context(|| format!("bad horizon in '{item}'"))?,
                ),
                None => (item, 1),
            };
            Ok((kind.parse::<PolicyKind>()?, horizon))
        })
        .collect::<anyhow::Result<_>>()?;
    if list.is_empty() {
        bail!("no policies given");
    }
    Ok(list)
}

pub fn compare(a: &CompareArgs) -> Result<(), Failure> {
    let sc = load_scenario(&a.scenario).config()?;
    let policies = parse_policies(&a.policies).config()?;
    let configs: Vec<PolicyConfig> = policies
        .iter()
        .map(|&(kind, h)| {
            let mut c = policy_config(kind, h, &a.constraints);
            // a shared --tau-hard is capped at each policy's horizon
            c.tau_hard = c.tau_hard.min(c.horizon);
            c
        })
        .collect();
    for c in &configs {
        Controller::new(&sc.spec, c).config()?;
    }
    if a.seeds == 0 || a.slots == 0 {
        return Err(Failure::Config(anyhow!(
            "--seeds and --slots must be at least 1"
        )));
    }
    let seeds: Vec<u64> = (1..=a.seeds).collect();
    let rows = compare_policies(&sc, &configs, a.slots, &seeds).runtime()?;
    let csv = output::compare_csv(&rows).runtime()?;
    emit(a.out.as_deref(), &csv)
}
