//! Markov expectations of the future system matrices and assembly of the
//! per-slot binary program.
//!
//! With `B_t = B̄ · Bernoulli[M_{σ_t}]` and `σ_0` known, the expected system
//! matrix is a mixture `Σ_j Pr[σ_t = j | σ_0] · B̄ M_j`. The same quantity
//! has a Kronecker-expanded form `(P̂^t ê_{σ_0})ᵀ B̂` with `P̂ = P ⊗ I_n`,
//! `ê_σ = e_σ ⊗ I_n` and `B̂` the vertical stack of `B̄ M_1 … B̄ M_p`.
//! Both are implemented; [`ExpandedModel`] holds the expanded one.
//!
//! Cross moments `E[B_kᵀ Q B_l | σ_0]` follow the mixture over the pair
//! `(σ_l, σ_k)` and treat each `B_t` as `B̄ M_{σ_t}`; the Bernoulli
//! self-covariance on the diagonal `k = l` is not included.
//!
//! The horizon cost
//!
//! ```text
//! J(ū) = E[ Σ_{t=1..H} q_tᵀ Q q_t + u_{t-1}ᵀ R u_{t-1} ]
//!      = J_c + J_l ū + ūᵀ J_q ū
//! ```
//!
//! has linear block `j` equal to `(H-j) · (2 q_0 + (H+1+j) ā)ᵀ Q B̄_j` and
//! quadratic block `(k, l)` equal to `(H - max(k, l)) · E[B_kᵀ Q B_l]`, plus
//! `R` on the diagonal blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::model::NetworkSpec;

const SYMMETRY_TOL: f64 = 1e-10;

/// Element-wise `min(a, 0)`.
pub fn clamp_minus(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|x| x.min(0.0))
}

fn matrix_power(base: &DMatrix<f64>, mut exp: u64) -> DMatrix<f64> {
    let mut result = DMatrix::identity(base.nrows(), base.ncols());
    let mut sq = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &sq;
        }
        exp >>= 1;
        if exp > 0 {
            sq = &sq * &sq;
        }
    }
    result
}

fn unit(len: usize, index: usize) -> DVector<f64> {
    let mut e = DVector::zeros(len);
    e[index] = 1.0;
    e
}

fn check_state(spec: &NetworkSpec, sigma: usize) -> Result<()> {
    if sigma < spec.states() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "Markov state {} is outside 1..={}",
            sigma + 1,
            spec.states()
        )))
    }
}

pub(crate) fn check_symmetric(m: &DMatrix<f64>, name: &'static str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSymmetric(name));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(Error::NotSymmetric(name));
            }
        }
    }
    Ok(())
}

/// `P^t e_{σ_0}`: distribution of the channel state `t` slots ahead.
pub fn markov_dist(spec: &NetworkSpec, sigma0: usize, t: u64) -> Result<DVector<f64>> {
    check_state(spec, sigma0)?;
    let p = spec.transition();
    Ok(matrix_power(p, t).column(sigma0).into_owned())
}

fn mixture(spec: &NetworkSpec, dist: &DVector<f64>) -> DMatrix<f64> {
    let mut acc = DMatrix::zeros(spec.buffers(), spec.links());
    for (j, &w) in dist.iter().enumerate() {
        if w != 0.0 {
            acc += spec.weighted_links(j) * w;
        }
    }
    acc
}

/// `E[B_t | σ_0]` as the mixture `Σ_j Pr[σ_t = j] · B̄ M_j`.
pub fn expected_b(spec: &NetworkSpec, sigma0: usize, t: u64) -> Result<DMatrix<f64>> {
    let dist = markov_dist(spec, sigma0, t)?;
    Ok(mixture(spec, &dist))
}

/// `E[q_t | q_0, σ_0] = q_0 + Σ_{i<t} E[B_i] u_i + t ā`.
///
/// `controls` holds at least `t` control vectors.
pub fn expected_queue(
    spec: &NetworkSpec,
    q0: &[i64],
    sigma0: usize,
    controls: &[Vec<bool>],
    arrival_rate: &DVector<f64>,
    t: usize,
) -> Result<DVector<f64>> {
    check_dim("queue vector", spec.buffers(), q0.len())?;
    check_dim("arrival rates", spec.buffers(), arrival_rate.len())?;
    if t > controls.len() {
        return Err(Error::InvalidArgument(format!(
            "need {t} controls, trajectory has {}",
            controls.len()
        )));
    }
    let mut q = DVector::from_iterator(q0.len(), q0.iter().map(|&x| x as f64));
    q += arrival_rate * t as f64;
    for (i, u) in controls.iter().take(t).enumerate() {
        check_dim("control vector", spec.links(), u.len())?;
        let b = expected_b(spec, sigma0, i as u64)?;
        q += b * bits_to_vec(u);
    }
    Ok(q)
}

pub(crate) fn bits_to_vec(u: &[bool]) -> DVector<f64> {
    DVector::from_iterator(u.len(), u.iter().map(|&b| if b { 1.0 } else { 0.0 }))
}

/// `E[B_kᵀ Q B_l | σ_0]` by mixing over `(σ_l, σ_k)`.
///
/// For `k < l` the transpose of the `(l, k)` moment is returned.
pub fn expected_cross(
    spec: &NetworkSpec,
    sigma0: usize,
    k: u64,
    l: u64,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_dim("Q rows", spec.buffers(), q.nrows())?;
    check_symmetric(q, "Q")?;
    if k < l {
        return Ok(expected_cross(spec, sigma0, l, k, q)?.transpose());
    }
    let dist_l = markov_dist(spec, sigma0, l)?;
    let ahead = matrix_power(spec.transition(), k - l);
    let mut acc = DMatrix::zeros(spec.links(), spec.links());
    for (j, &w) in dist_l.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let later = mixture(spec, &ahead.column(j).into_owned());
        acc += later.transpose() * q * spec.weighted_links(j) * w;
    }
    Ok(acc)
}

/// Kronecker-expanded channel model: `P̂ = P ⊗ I_n` and `B̂ = [B̄M_1; …; B̄M_p]`.
#[derive(Clone, Debug)]
pub struct ExpandedModel {
    n: usize,
    m: usize,
    p: usize,
    p_hat: DMatrix<f64>,
    b_hat: DMatrix<f64>,
    weighted: Vec<DMatrix<f64>>,
}

impl ExpandedModel {
    pub fn new(spec: &NetworkSpec) -> Self {
        let (n, m, p) = (spec.buffers(), spec.links(), spec.states());
        let p_hat = spec.transition().kronecker(&DMatrix::<f64>::identity(n, n));
        let mut b_hat = DMatrix::zeros(p * n, m);
        for i in 0..p {
            b_hat
                .view_mut((i * n, 0), (n, m))
                .copy_from(spec.weighted_links(i));
        }
        Self {
            n,
            m,
            p,
            p_hat,
            b_hat,
            weighted: (0..p).map(|i| spec.weighted_links(i).clone()).collect(),
        }
    }

    pub fn p_hat(&self) -> &DMatrix<f64> {
        &self.p_hat
    }

    pub fn b_hat(&self) -> &DMatrix<f64> {
        &self.b_hat
    }

    /// `ê_σ = e_σ ⊗ I_n`.
    pub fn selector(&self, sigma: usize) -> DMatrix<f64> {
        let e = DMatrix::from_column_slice(self.p, 1, unit(self.p, sigma).as_slice());
        e.kronecker(&DMatrix::<f64>::identity(self.n, self.n))
    }

    /// `(P̂^t ê_{σ_0})ᵀ B̂`.
    pub fn expected_b(&self, sigma0: usize, t: u64) -> DMatrix<f64> {
        (matrix_power(&self.p_hat, t) * self.selector(sigma0)).transpose() * &self.b_hat
    }

    /// Expanded cross moment for `k >= l`:
    /// `(P^l e_{σ_0} ⊗ I_m)ᵀ · [B̂ᵀ P̂^{k-l} ê_j Q B̄M_j]_{j=1..p}`.
    pub fn expected_cross(&self, sigma0: usize, k: u64, l: u64, q: &DMatrix<f64>) -> DMatrix<f64> {
        if k < l {
            return self.expected_cross(sigma0, l, k, q).transpose();
        }
        let ahead = matrix_power(&self.p_hat, k - l);
        let mut stack = DMatrix::zeros(self.p * self.m, self.m);
        for j in 0..self.p {
            let block = self.b_hat.transpose() * &ahead * self.selector(j) * q * &self.weighted[j];
            stack
                .view_mut((j * self.m, 0), (self.m, self.m))
                .copy_from(&block);
        }
        // rows σ·n of column σ_0·n of P̂^l hold P^l e_{σ_0}
        let dist = DMatrix::from_column_slice(
            self.p,
            1,
            matrix_power(&self.p_hat, l)
                .column(sigma0 * self.n)
                .iter()
                .step_by(self.n)
                .copied()
                .collect::<Vec<_>>()
                .as_slice(),
        );
        let lift = dist.kronecker(&DMatrix::<f64>::identity(self.m, self.m));
        lift.transpose() * stack
    }
}

/// Linear, quadratic and constant parts of the horizon cost.
#[derive(Clone, Debug, PartialEq)]
pub struct CostTerms {
    pub constant: f64,
    pub linear: DVector<f64>,
    pub quadratic: DMatrix<f64>,
}

impl CostTerms {
    pub fn evaluate(&self, u: &DVector<f64>) -> f64 {
        self.constant + self.linear.dot(u) + u.dot(&(&self.quadratic * u))
    }
}

/// One slot's program: minimise `J_l ū + ūᵀ J_q ū` subject to `D ū <= d`
/// (and the per-step channel constraints, added by the caller).
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledProgram {
    pub horizon: usize,
    pub tau_hard: usize,
    pub costs: CostTerms,
    pub constraint_matrix: DMatrix<f64>,
    pub constraint_bound: DVector<f64>,
}

/// State-independent parts of the program for a fixed `(σ_0, H, τ, Q, R)`.
///
/// Only `J_l`, `J_c` and `d` depend on `q_0` and `ā`; everything else is
/// computed once here and reused across slots in the same channel state.
#[derive(Clone, Debug)]
pub struct ProgramTemplate {
    horizon: usize,
    tau_hard: usize,
    q_weight: DMatrix<f64>,
    expected: Vec<DMatrix<f64>>,
    /// `Q B̄_j`, cached for `J_l`.
    weighted_expected: Vec<DMatrix<f64>>,
    quadratic: DMatrix<f64>,
    constraint_matrix: DMatrix<f64>,
}

impl ProgramTemplate {
    pub fn new(
        spec: &NetworkSpec,
        sigma0: usize,
        horizon: usize,
        tau_hard: usize,
        q: &DMatrix<f64>,
        r: &DMatrix<f64>,
    ) -> Result<Self> {
        validate_weights(spec, horizon, q, r)?;
        check_tau(horizon, tau_hard)?;
        check_state(spec, sigma0)?;
        let expected: Vec<_> = (0..horizon)
            .map(|j| expected_b(spec, sigma0, j as u64))
            .collect::<Result<_>>()?;
        let quadratic = quadratic_cost(spec, sigma0, horizon, q, r)?;
        let constraint_matrix = constraint_matrix(spec, &expected, tau_hard);
        let weighted_expected = expected.iter().map(|b| q * b).collect();
        Ok(Self {
            horizon,
            tau_hard,
            q_weight: q.clone(),
            expected,
            weighted_expected,
            quadratic,
            constraint_matrix,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn quadratic(&self) -> &DMatrix<f64> {
        &self.quadratic
    }

    pub fn constraint_matrix(&self) -> &DMatrix<f64> {
        &self.constraint_matrix
    }

    pub fn linear_cost(&self, q0: &DVector<f64>, abar: &DVector<f64>) -> DVector<f64> {
        linear_cost(&self.weighted_expected, q0, abar)
    }

    pub fn constant_cost(&self, q0: &DVector<f64>, abar: &DVector<f64>) -> f64 {
        (1..=self.horizon)
            .map(|t| {
                let mean = q0 + abar * t as f64;
                mean.dot(&(&self.q_weight * &mean))
            })
            .sum()
    }

    pub fn constraint_bound(&self, q0: &DVector<f64>, abar: &DVector<f64>) -> DVector<f64> {
        constraint_bound(q0, abar, self.horizon, self.tau_hard)
    }

    pub fn instantiate(&self, q0: &DVector<f64>, abar: &DVector<f64>) -> AssembledProgram {
        AssembledProgram {
            horizon: self.horizon,
            tau_hard: self.tau_hard,
            costs: CostTerms {
                constant: self.constant_cost(q0, abar),
                linear: self.linear_cost(q0, abar),
                quadratic: self.quadratic.clone(),
            },
            constraint_matrix: self.constraint_matrix.clone(),
            constraint_bound: self.constraint_bound(q0, abar),
        }
    }

    pub fn expected(&self) -> &[DMatrix<f64>] {
        &self.expected
    }
}

fn validate_weights(
    spec: &NetworkSpec,
    horizon: usize,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    check_dim("Q rows", spec.buffers(), q.nrows())?;
    check_dim("R rows", spec.links(), r.nrows())?;
    check_symmetric(q, "Q")?;
    check_symmetric(r, "R")
}

fn check_tau(horizon: usize, tau_hard: usize) -> Result<()> {
    if (1..=horizon).contains(&tau_hard) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tau_hard {tau_hard} is outside 1..={horizon}"
        )))
    }
}

fn quadratic_cost(
    spec: &NetworkSpec,
    sigma0: usize,
    horizon: usize,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let m = spec.links();
    let mut jq = DMatrix::zeros(m * horizon, m * horizon);
    for k in 0..horizon {
        for l in 0..=k {
            let coeff = (horizon - k) as f64;
            let block = expected_cross(spec, sigma0, k as u64, l as u64, q)? * coeff;
            jq.view_mut((k * m, l * m), (m, m)).copy_from(&block);
            if k != l {
                jq.view_mut((l * m, k * m), (m, m))
                    .copy_from(&block.transpose());
            }
        }
        let mut diag = jq.view_mut((k * m, k * m), (m, m));
        diag += r;
    }
    Ok(jq)
}

fn linear_cost(
    weighted_expected: &[DMatrix<f64>],
    q0: &DVector<f64>,
    abar: &DVector<f64>,
) -> DVector<f64> {
    let horizon = weighted_expected.len();
    let m = weighted_expected.first().map_or(0, |b| b.ncols());
    let mut jl = DVector::zeros(m * horizon);
    for (j, qb) in weighted_expected.iter().enumerate() {
        let remaining = (horizon - j) as f64;
        let weight = q0 * 2.0 + abar * (horizon + 1 + j) as f64;
        let row = qb.tr_mul(&weight) * remaining;
        jl.rows_mut(j * m, m).copy_from(&row);
    }
    jl
}

fn constraint_matrix(
    spec: &NetworkSpec,
    expected: &[DMatrix<f64>],
    tau_hard: usize,
) -> DMatrix<f64> {
    let (n, m) = (spec.buffers(), spec.links());
    let horizon = expected.len();
    let full = spec.link_matrix_f64();
    let full_minus = clamp_minus(full);
    let mut d = DMatrix::zeros(n * horizon, m * horizon);
    for t in 1..=horizon {
        let hard = t <= tau_hard;
        for (j, mean) in expected.iter().enumerate().take(t) {
            let block = match (hard, j + 1 == t) {
                (true, false) => full.clone(),
                (true, true) => full_minus.clone(),
                (false, false) => mean.clone(),
                (false, true) => clamp_minus(mean),
            };
            d.view_mut(((t - 1) * n, j * m), (n, m))
                .copy_from(&(-block));
        }
    }
    d
}

fn constraint_bound(
    q0: &DVector<f64>,
    abar: &DVector<f64>,
    horizon: usize,
    tau_hard: usize,
) -> DVector<f64> {
    let n = q0.len();
    let mut d = DVector::zeros(n * horizon);
    for t in 1..=horizon {
        let row = if t <= tau_hard {
            q0.clone()
        } else {
            q0 + abar * t as f64
        };
        d.rows_mut((t - 1) * n, n).copy_from(&row);
    }
    d
}

fn q0_vec(spec: &NetworkSpec, q0: &[i64]) -> Result<DVector<f64>> {
    check_dim("queue vector", spec.buffers(), q0.len())?;
    Ok(DVector::from_iterator(
        q0.len(),
        q0.iter().map(|&x| x as f64),
    ))
}

/// `(J_l, J_q)` together with the constant `J_c`.
pub fn assemble_costs(
    spec: &NetworkSpec,
    q0: &[i64],
    sigma0: usize,
    arrival_rate: &DVector<f64>,
    horizon: usize,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<CostTerms> {
    let q0 = q0_vec(spec, q0)?;
    check_dim("arrival rates", spec.buffers(), arrival_rate.len())?;
    validate_weights(spec, horizon, q, r)?;
    check_state(spec, sigma0)?;
    let weighted: Vec<_> = (0..horizon)
        .map(|j| expected_b(spec, sigma0, j as u64).map(|b| q * b))
        .collect::<Result<_>>()?;
    let constant = (1..=horizon)
        .map(|t| {
            let mean = &q0 + arrival_rate * t as f64;
            mean.dot(&(q * &mean))
        })
        .sum();
    Ok(CostTerms {
        constant,
        linear: linear_cost(&weighted, &q0, arrival_rate),
        quadratic: quadratic_cost(spec, sigma0, horizon, q, r)?,
    })
}

/// `(D, d)` such that `D ū <= d` keeps every predicted queue nonnegative.
///
/// Rows `t <= tau_hard` use the full link matrix and no arrival credit; the
/// remaining rows use expected matrices and `t ā`. The last matrix in each
/// block-row is clamped so a packet cannot traverse two buffers in one slot.
pub fn assemble_constraints(
    spec: &NetworkSpec,
    q0: &[i64],
    sigma0: usize,
    arrival_rate: &DVector<f64>,
    horizon: usize,
    tau_hard: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let q0 = q0_vec(spec, q0)?;
    check_dim("arrival rates", spec.buffers(), arrival_rate.len())?;
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    check_tau(horizon, tau_hard)?;
    check_state(spec, sigma0)?;
    let expected: Vec<_> = (0..horizon)
        .map(|j| expected_b(spec, sigma0, j as u64))
        .collect::<Result<_>>()?;
    Ok((
        constraint_matrix(spec, &expected, tau_hard),
        constraint_bound(&q0, arrival_rate, horizon, tau_hard),
    ))
}
