//! Independent oracles shared by the integration and acceptance tests.
//!
//! Everything here works from the raw network description (link matrix,
//! success diagonals, transition matrix) by enumerating Markov paths or
//! binary vectors, and never calls the expectation or solver code it checks.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use pnc_core::model::{ArrivalProcess, NetworkSpec};
use pnc_core::solver::BqpInstance;
use rand::rngs::StdRng;
use rand::Rng;

/// `B̄ diag(M_state)` built from the raw entries.
pub fn path_matrix(spec: &NetworkSpec, state: usize) -> DMatrix<f64> {
    let (n, m) = (spec.buffers(), spec.links());
    let w = &spec.success_weights()[state];
    DMatrix::from_fn(n, m, |i, j| spec.link_matrix()[(i, j)] as f64 * w[j])
}

/// Calls `visit(path, probability)` for every channel path
/// `(σ_0, σ_1, …, σ_len)` starting at `sigma0`.
pub fn for_each_path(
    spec: &NetworkSpec,
    sigma0: usize,
    len: usize,
    mut visit: impl FnMut(&[usize], f64),
) {
    let p = spec.states();
    let mut path = vec![sigma0; len + 1];
    let total = p.pow(len as u32);
    for code in 0..total {
        let mut c = code;
        let mut prob = 1.0;
        for t in 1..=len {
            path[t] = c % p;
            c /= p;
            prob *= spec.transition()[(path[t], path[t - 1])];
        }
        if prob > 0.0 {
            visit(&path, prob);
        }
    }
}

pub fn path_expected_b(spec: &NetworkSpec, sigma0: usize, t: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(spec.buffers(), spec.links());
    for_each_path(spec, sigma0, t, |path, prob| {
        acc += path_matrix(spec, path[t]) * prob
    });
    acc
}

pub fn path_cross(
    spec: &NetworkSpec,
    sigma0: usize,
    k: usize,
    l: usize,
    q: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(spec.links(), spec.links());
    for_each_path(spec, sigma0, k.max(l), |path, prob| {
        acc += path_matrix(spec, path[k]).transpose() * q * path_matrix(spec, path[l]) * prob;
    });
    acc
}

/// Horizon cost `E[Σ_{t=1..H} q_tᵀ Q q_t + u_{t-1}ᵀ R u_{t-1}]` with
/// `B_t = B̄ M_{σ_t}` and deterministic mean arrivals, by path enumeration.
pub fn path_cost(
    spec: &NetworkSpec,
    q0: &[i64],
    sigma0: usize,
    abar: &DVector<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    controls: &[DVector<f64>],
) -> f64 {
    let h = controls.len();
    let mut total = 0.0;
    for_each_path(spec, sigma0, h.saturating_sub(1), |path, prob| {
        let mut state = DVector::from_iterator(q0.len(), q0.iter().map(|&x| x as f64));
        let mut cost = 0.0;
        for (t, u) in controls.iter().enumerate() {
            state += path_matrix(spec, path[t]) * u + abar;
            cost += state.dot(&(q * &state)) + u.dot(&(r * u));
        }
        total += prob * cost;
    });
    total
}

/// Lexicographically first minimiser by full enumeration (index 0 most
/// significant), plain float comparisons.
pub fn enumerate_min(inst: &BqpInstance) -> Option<(Vec<bool>, f64)> {
    let n = inst.c.len();
    let mut best: Option<(Vec<bool>, f64)> = None;
    for code in 0u64..(1 << n) {
        let u: Vec<bool> = (0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect();
        let x = DVector::from_iterator(n, u.iter().map(|&b| if b { 1.0 } else { 0.0 }));
        let lhs = &inst.a * &x;
        if lhs.iter().zip(inst.b.iter()).any(|(l, b)| *l > b + 1e-9) {
            continue;
        }
        let v = inst.objective(&u);
        if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
            best = Some((u, v));
        }
    }
    best
}

pub fn random_stochastic(rng: &mut StdRng, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(p, p, |_, _| rng.random_range(0.0..1.0));
    for mut col in m.column_iter_mut() {
        let s: f64 = col.sum();
        col /= s;
    }
    // force exact unit column sums
    for j in 0..p {
        let s: f64 = (0..p - 1).map(|i| m[(i, j)]).sum();
        m[(p - 1, j)] = (1.0 - s).max(0.0);
    }
    m
}

pub fn random_spec(rng: &mut StdRng, n: usize, m: usize, p: usize) -> NetworkSpec {
    let link = DMatrix::from_fn(n, m, |_, _| rng.random_range(-3i64..=3));
    let weights = (0..p)
        .map(|_| DVector::from_fn(m, |_, _| rng.random_range(0.0..=1.0)))
        .collect();
    NetworkSpec::new(
        link,
        DMatrix::from_element(1, m, 1),
        random_stochastic(rng, p),
        weights,
        vec![ArrivalProcess::none(); n],
    )
    .expect("random network is valid")
}

pub fn random_symmetric(rng: &mut StdRng, n: usize, diag_boost: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5 + DMatrix::identity(n, n) * diag_boost
}

pub fn bits(code: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| code >> i & 1 == 1).collect()
}

pub fn to_vec(u: &[bool]) -> DVector<f64> {
    DVector::from_iterator(u.len(), u.iter().map(|&b| if b { 1.0 } else { 0.0 }))
}
