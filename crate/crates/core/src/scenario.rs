//! Built-in example networks and the JSON scenario format.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrivalProcess, NetworkSpec, QueueState};

/// A network together with its initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub spec: NetworkSpec,
    pub initial: QueueState,
}

/// Three mutually exclusive links on two buffers; no channel randomness.
///
/// Link 1 drains two packets from buffer 1, link 2 moves one packet from
/// buffer 1 to buffer 2, link 3 drains five from buffer 1 and one from
/// buffer 2. Buffer 1 receives `weight` packets with probability `probability`.
pub fn generic(probability: f64, weight: u32) -> NetworkSpec {
    generic_with_links(&[-2, -1, -5, 0, 1, -1], probability, weight)
}

/// The generic network with link 3 consuming two packets from buffer 2.
pub fn generic_modified(probability: f64, weight: u32) -> NetworkSpec {
    generic_with_links(&[-2, -1, -5, 0, 1, -2], probability, weight)
}

fn generic_with_links(links: &[i64], probability: f64, weight: u32) -> NetworkSpec {
    NetworkSpec::new(
        DMatrix::from_row_slice(2, 3, links),
        DMatrix::from_row_slice(1, 3, &[1, 1, 1]),
        DMatrix::identity(1, 1),
        vec![DVector::from_element(3, 1.0)],
        vec![
            ArrivalProcess::bernoulli(probability, weight),
            ArrivalProcess::none(),
        ],
    )
    .expect("generic network is valid")
}

/// Game-master network with a good/bad channel chain.
///
/// Buffer 1 holds game-master data, buffer 2 data delivered to both users,
/// buffer 3 user inputs. State 1 (good) lets both channels work; in state 2
/// (bad) only the user-to-user channel does. Arrival rates `(0.5, 0, 0.9)`.
pub fn natural() -> NetworkSpec {
    natural_with_arrivals(vec![
        ArrivalProcess::bernoulli(0.5, 1),
        ArrivalProcess::none(),
        ArrivalProcess::bernoulli(0.9, 1),
    ])
}

/// The natural network with alternating high/low arrivals: buffer 1 at
/// `0.375 ± 0.3` switching every 100 slots, buffer 3 at `0.38 ± 0.38`
/// switching every 250 slots. Both start high unless shifted by `phase_offset`.
pub fn natural_alternating(phase_offset: u64) -> NetworkSpec {
    natural_with_arrivals(vec![
        ArrivalProcess::alternating(0.375, 0.3, 100).with_phase_offset(phase_offset),
        ArrivalProcess::none(),
        ArrivalProcess::alternating(0.38, 0.38, 250).with_phase_offset(phase_offset),
    ])
}

fn natural_with_arrivals(arrivals: Vec<ArrivalProcess>) -> NetworkSpec {
    NetworkSpec::new(
        DMatrix::from_row_slice(3, 2, &[-3, 0, 3, -1, 0, -1]),
        DMatrix::from_row_slice(1, 2, &[1, 1]),
        DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.9, 0.8]),
        vec![
            DVector::from_vec(vec![1.0, 1.0]),
            DVector::from_vec(vec![0.0, 1.0]),
        ],
        arrivals,
    )
    .expect("natural network is valid")
}

/// Resolves `generic` or `natural` to a scenario starting from empty buffers
/// in state 1.
pub fn builtin(name: &str) -> Option<Scenario> {
    let spec = match name {
        "generic" => generic(0.8, 3),
        "natural" => natural(),
        _ => return None,
    };
    let initial = QueueState::new(vec![0; spec.buffers()], 0);
    Some(Scenario { spec, initial })
}

/// On-disk scenario document. Matrices are row-major nested lists and
/// `initial_sigma` is one-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub link_matrix: Vec<Vec<i64>>,
    pub constituency: Vec<Vec<i64>>,
    pub transition: Vec<Vec<f64>>,
    pub success_weights: Vec<Vec<f64>>,
    pub arrivals: Vec<ArrivalProcess>,
    pub initial_queue: Vec<i64>,
    pub initial_sigma: usize,
}

impl ScenarioFile {
    pub fn from_scenario(s: &Scenario) -> Self {
        let spec = &s.spec;
        let rows_i = |m: &DMatrix<i64>| -> Vec<Vec<i64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        Self {
            n: spec.buffers(),
            m: spec.links(),
            p: spec.states(),
            link_matrix: rows_i(spec.link_matrix()),
            constituency: rows_i(spec.constituency()),
            transition: spec
                .transition()
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            success_weights: spec
                .success_weights()
                .iter()
                .map(|w| w.iter().copied().collect())
                .collect(),
            arrivals: spec.arrivals().to_vec(),
            initial_queue: s.initial.q.clone(),
            initial_sigma: s.initial.sigma + 1,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Parses and validates a scenario document. Errors carry the line of
    /// the offending key.
    pub fn parse(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| {
            Error::InvalidSpec(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        file.into_scenario().map_err(|(key, msg)| {
            Error::InvalidSpec(format!("line {}: {key}: {msg}", key_line(text, key)))
        })
    }

    fn into_scenario(self) -> std::result::Result<Scenario, (&'static str, String)> {
        let (n, m, p) = (self.n, self.m, self.p);
        let link = matrix_from_rows("link_matrix", &self.link_matrix, Some(n), m)?;
        let r = self.constituency.len();
        let constituency = matrix_from_rows("constituency", &self.constituency, Some(r), m)?;
        let transition = matrix_from_rows("transition", &self.transition, Some(p), p)?;
        if self.success_weights.len() != p {
            return Err((
                "success_weights",
                format!("expected {p} lists, found {}", self.success_weights.len()),
            ));
        }
        let mut weights = Vec::with_capacity(p);
        for (i, w) in self.success_weights.iter().enumerate() {
            if w.len() != m {
                return Err((
                    "success_weights",
                    format!("list {} has {} entries, expected {m}", i + 1, w.len()),
                ));
            }
            weights.push(DVector::from_column_slice(w));
        }
        if self.arrivals.len() != n {
            return Err((
                "arrivals",
                format!("expected {n} entries, found {}", self.arrivals.len()),
            ));
        }
        if self.initial_queue.len() != n {
            return Err((
                "initial_queue",
                format!("expected {n} entries, found {}", self.initial_queue.len()),
            ));
        }
        if self.initial_queue.iter().any(|&x| x < 0) {
            return Err(("initial_queue", "queues must be nonnegative".into()));
        }
        if self.initial_sigma == 0 || self.initial_sigma > p {
            return Err((
                "initial_sigma",
                format!("state {} is outside 1..={p}", self.initial_sigma),
            ));
        }
        let spec = NetworkSpec::new(link, constituency, transition, weights, self.arrivals)
            .map_err(|e| (blame(&e), e.to_string()))?;
        Ok(Scenario {
            spec,
            initial: QueueState::new(self.initial_queue, self.initial_sigma - 1),
        })
    }
}

fn matrix_from_rows<T: nalgebra::Scalar + Copy>(
    key: &'static str,
    rows: &[Vec<T>],
    nrows: Option<usize>,
    ncols: usize,
) -> std::result::Result<DMatrix<T>, (&'static str, String)> {
    if let Some(r) = nrows {
        if rows.len() != r {
            return Err((key, format!("expected {r} rows, found {}", rows.len())));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err((
                key,
                format!("row {} has {} entries, expected {ncols}", i + 1, row.len()),
            ));
        }
    }
    let flat: Vec<T> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

fn blame(e: &Error) -> &'static str {
    let msg = e.to_string();
    [
        "transition",
        "constituency",
        "success",
        "arrival",
        "schedule",
        "link",
    ]
    .iter()
    .zip([
        "transition",
        "constituency",
        "success_weights",
        "arrivals",
        "arrivals",
        "link_matrix",
    ])
    .find(|(needle, _)| msg.contains(*needle))
    .map(|(_, key)| key)
    .unwrap_or("n")
}

fn key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
        .unwrap_or(1)
}
