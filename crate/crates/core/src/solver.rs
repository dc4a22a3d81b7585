//! Exact minimiser for small binary programs
//!
//! ```text
//! minimise  c·u + uᵀ H u   over u ∈ {0,1}^N,  A u <= b
//! ```
//!
//! Depth-first branch and bound fixes variables in index order, trying 0
//! before 1, so the first optimum found is the lexicographically smallest.
//! Later candidates replace the incumbent only when strictly better by more
//! than the tie tolerance, which makes the tie-break total and deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::expect::check_symmetric;

/// Largest supported number of binary variables.
pub const MAX_VARIABLES: usize = 30;
/// Largest instance [`solve_exhaustive`] accepts.
pub const MAX_EXHAUSTIVE: usize = 20;
/// Absolute slack allowed on `A u <= b`.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct BqpInstance {
    pub c: DVector<f64>,
    pub hq: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BqpSolution {
    pub u_star: Vec<bool>,
    pub value: f64,
    pub nodes_explored: u64,
}

impl BqpInstance {
    pub fn new(
        c: DVector<f64>,
        hq: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DVector<f64>,
    ) -> Result<Self> {
        let inst = Self { c, hq, a, b };
        inst.validate()?;
        Ok(inst)
    }

    /// Linear instance (`H = 0`).
    pub fn linear(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = c.len();
        Self::new(c, DMatrix::zeros(n, n), a, b)
    }

    pub fn size(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.size();
        if n > MAX_VARIABLES {
            return Err(Error::TooLarge {
                size: n,
                limit: MAX_VARIABLES,
            });
        }
        check_dim("quadratic cost rows", n, self.hq.nrows())?;
        check_symmetric(&self.hq, "Hq")?;
        check_dim("constraint columns", n, self.a.ncols())?;
        check_dim("constraint bound", self.a.nrows(), self.b.len())
    }

    pub fn objective(&self, u: &[bool]) -> f64 {
        let mut v = 0.0;
        for (i, &ui) in u.iter().enumerate() {
            if !ui {
                continue;
            }
            v += self.c[i];
            for (j, &uj) in u.iter().enumerate() {
                if uj {
                    v += self.hq[(i, j)];
                }
            }
        }
        v
    }

    pub fn is_feasible(&self, u: &[bool]) -> bool {
        self.a.row_iter().zip(self.b.iter()).all(|(row, &bound)| {
            let lhs: f64 = row
                .iter()
                .zip(u)
                .filter(|(_, &on)| on)
                .map(|(a, _)| a)
                .sum();
            lhs <= bound + FEASIBILITY_TOL
        })
    }
}

fn improves(candidate: f64, best: Option<f64>) -> bool {
    match best {
        None => true,
        Some(b) => candidate < b - TIE_TOL * b.abs().max(1.0),
    }
}

fn finish(inst: &BqpInstance, best: Option<Vec<bool>>, nodes: u64) -> Result<BqpSolution> {
    let u_star = best.ok_or(Error::Infeasible)?;
    debug_assert!(inst.is_feasible(&u_star));
    Ok(BqpSolution {
        value: inst.objective(&u_star),
        u_star,
        nodes_explored: nodes,
    })
}

struct Search<'a> {
    inst: &'a BqpInstance,
    quadratic: bool,
    u: Vec<bool>,
    /// `A u` over the fixed prefix.
    row_load: Vec<f64>,
    /// Per row, the most negative completion over variables `d..N`.
    row_slack: Vec<Vec<f64>>,
    /// `Hq_ij + Hq_ji` for each pair.
    pair: DMatrix<f64>,
    best: Option<Vec<bool>>,
    best_value: Option<f64>,
    nodes: u64,
}

impl<'a> Search<'a> {
    fn new(inst: &'a BqpInstance, quadratic: bool) -> Self {
        let n = inst.size();
        let k = inst.a.nrows();
        let mut row_slack = vec![vec![0.0; n + 1]; k];
        for (r, slack) in row_slack.iter_mut().enumerate() {
            for d in (0..n).rev() {
                slack[d] = slack[d + 1] + inst.a[(r, d)].min(0.0);
            }
        }
        Self {
            inst,
            quadratic,
            u: vec![false; n],
            row_load: vec![0.0; k],
            row_slack,
            pair: &inst.hq + inst.hq.transpose(),
            best: None,
            best_value: None,
            nodes: 0,
        }
    }

    /// Lower bound on any completion of the first `depth` fixed variables,
    /// given the fixed-part objective `fixed`.
    fn bound(&self, depth: usize, fixed: f64) -> f64 {
        let n = self.inst.size();
        let mut bound = fixed;
        for j in depth..n {
            let mut gain = self.inst.c[j];
            if self.quadratic {
                gain += self.inst.hq[(j, j)];
                for i in 0..depth {
                    if self.u[i] {
                        gain += self.pair[(i, j)];
                    }
                }
            }
            bound += gain.min(0.0);
        }
        if self.quadratic {
            for j in depth..n {
                for k in (j + 1)..n {
                    bound += self.pair[(j, k)].min(0.0);
                }
            }
        }
        bound
    }

    fn can_complete(&self, depth: usize) -> bool {
        self.row_load
            .iter()
            .zip(&self.row_slack)
            .zip(self.inst.b.iter())
            .all(|((&load, slack), &b)| load + slack[depth] <= b + FEASIBILITY_TOL)
    }

    fn visit(&mut self, depth: usize, fixed: f64) {
        self.nodes += 1;
        if !self.can_complete(depth) {
            return;
        }
        if let Some(best) = self.best_value {
            if !improves(self.bound(depth, fixed), Some(best)) {
                return;
            }
        }
        let n = self.inst.size();
        if depth == n {
            // exact value recomputed so ties compare bit-for-bit
            let value = self.inst.objective(&self.u);
            if improves(value, self.best_value) {
                self.best_value = Some(value);
                self.best = Some(self.u.clone());
            }
            return;
        }

        self.visit(depth + 1, fixed);

        let mut delta = self.inst.c[depth];
        if self.quadratic {
            delta += self.inst.hq[(depth, depth)];
            for i in 0..depth {
                if self.u[i] {
                    delta += self.pair[(i, depth)];
                }
            }
        }
        self.u[depth] = true;
        for (r, load) in self.row_load.iter_mut().enumerate() {
            *load += self.inst.a[(r, depth)];
        }
        self.visit(depth + 1, fixed + delta);
        for (r, load) in self.row_load.iter_mut().enumerate() {
            *load -= self.inst.a[(r, depth)];
        }
        self.u[depth] = false;
    }
}

/// Global minimiser with lexicographic tie-break.
pub fn solve(inst: &BqpInstance) -> Result<BqpSolution> {
    inst.validate()?;
    let quadratic = inst.hq.iter().any(|&x| x != 0.0);
    let mut search = Search::new(inst, quadratic);
    search.visit(0, 0.0);
    finish(inst, search.best, search.nodes)
}

/// Specialised path for `Hq = 0`; the quadratic matrix is ignored.
pub fn solve_linear(inst: &BqpInstance) -> Result<BqpSolution> {
    inst.validate()?;
    if inst.hq.iter().any(|&x| x != 0.0) {
        return Err(Error::InvalidArgument(
            "solve_linear requires a zero quadratic term".into(),
        ));
    }
    let mut search = Search::new(inst, false);
    search.visit(0, 0.0);
    finish(inst, search.best, search.nodes)
}

/// Full enumeration in lexicographic order, for `N <= MAX_EXHAUSTIVE`.
pub fn solve_exhaustive(inst: &BqpInstance) -> Result<BqpSolution> {
    inst.validate()?;
    let n = inst.size();
    if n > MAX_EXHAUSTIVE {
        return Err(Error::TooLarge {
            size: n,
            limit: MAX_EXHAUSTIVE,
        });
    }
    let mut best: Option<Vec<bool>> = None;
    let mut best_value = None;
    let mut nodes = 0;
    for code in 0u64..(1u64 << n) {
        nodes += 1;
        // index 0 is the most significant coordinate
        let u: Vec<bool> = (0..n).map(|i| code >> (n - 1 - i) & 1 == 1).collect();
        if !inst.is_feasible(&u) {
            continue;
        }
        let v = inst.objective(&u);
        if improves(v, best_value) {
            best_value = Some(v);
            best = Some(u);
        }
    }
    finish(inst, best, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unconstrained(c: &[f64]) -> BqpInstance {
        BqpInstance::linear(
            DVector::from_column_slice(c),
            DMatrix::zeros(0, c.len()),
            DVector::zeros(0),
        )
        .unwrap()
    }

    #[test]
    fn nonnegative_costs_pick_nothing() {
        let sol = solve(&unconstrained(&[1.0, 1.0])).unwrap();
        assert_eq!(sol.u_star, vec![false, false]);
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn mutual_exclusion_picks_most_negative() {
        let inst = BqpInstance::linear(
            DVector::from_vec(vec![-3.0, -1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        let sol = solve(&inst).unwrap();
        assert_eq!(sol.u_star, vec![true, false]);
        assert_eq!(sol.value, -3.0);
        assert_eq!(solve_linear(&inst).unwrap().u_star, sol.u_star);
    }

    #[test]
    fn all_zero_costs_break_ties_to_zero() {
        let sol = solve_linear(&unconstrained(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(sol.u_star, vec![false; 3]);
    }

    #[test]
    fn ties_prefer_lexicographically_smallest() {
        // (0,1) and (1,0) both cost -2
        let inst = BqpInstance::linear(
            DVector::from_vec(vec![-2.0, -2.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_vec(vec![1.0]),
        )
        .unwrap();
        assert_eq!(solve(&inst).unwrap().u_star, vec![false, true]);
        assert_eq!(solve_exhaustive(&inst).unwrap().u_star, vec![false, true]);
    }

    #[test]
    fn quadratic_interaction_changes_choice() {
        // both alone are good, together they are penalised
        let inst = BqpInstance::new(
            DVector::from_vec(vec![-2.0, -3.0]),
            DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 2.0, 0.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        let sol = solve(&inst).unwrap();
        assert_eq!(sol.u_star, vec![false, true]);
        assert_eq!(sol.value, -3.0);
    }

    #[test]
    fn errors() {
        let infeasible = BqpInstance::linear(
            DVector::from_vec(vec![1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DVector::from_vec(vec![-1.0]),
        )
        .unwrap();
        assert_eq!(solve(&infeasible), Err(Error::Infeasible));
        assert!(matches!(
            BqpInstance::linear(DVector::zeros(31), DMatrix::zeros(0, 31), DVector::zeros(0)),
            Err(Error::TooLarge { .. })
        ));
        let mut h = DMatrix::zeros(2, 2);
        h[(0, 1)] = 1.0;
        assert_eq!(
            BqpInstance::new(
                DVector::zeros(2),
                h,
                DMatrix::zeros(0, 2),
                DVector::zeros(0)
            ),
            Err(Error::NotSymmetric("Hq"))
        );
        let quad = BqpInstance::new(
            DVector::zeros(2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
        )
        .unwrap();
        assert!(solve_linear(&quad).is_err());
    }

    fn instance(max_n: usize, quadratic: bool) -> impl Strategy<Value = BqpInstance> {
        (1..=max_n, 0usize..=4).prop_flat_map(move |(n, k)| {
            (
                proptest::collection::vec(-5.0f64..5.0, n),
                proptest::collection::vec(-5.0f64..5.0, n * n),
                proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0)], k * n),
            )
                .prop_map(move |(c, h, a)| {
                    let h = DMatrix::from_row_slice(n, n, &h);
                    let h = if quadratic {
                        (&h + h.transpose()) * 0.5
                    } else {
                        DMatrix::zeros(n, n)
                    };
                    BqpInstance::new(
                        DVector::from_vec(c),
                        h,
                        DMatrix::from_row_slice(k, n, &a),
                        DVector::from_element(k, 1.0),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn branch_and_bound_matches_enumeration(inst in instance(10, true)) {
            let bb = solve(&inst).unwrap();
            let ex = solve_exhaustive(&inst).unwrap();
            prop_assert_eq!(&bb.u_star, &ex.u_star);
            prop_assert_eq!(bb.value, ex.value);
            prop_assert!(inst.is_feasible(&bb.u_star));
        }

        #[test]
        fn linear_path_matches_general_path(inst in instance(10, false)) {
            prop_assert_eq!(solve(&inst).unwrap(), solve_linear(&inst).unwrap());
        }
    }
}
