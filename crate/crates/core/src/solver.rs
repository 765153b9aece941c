//! Exact satisfiability, counting and uniqueness checks.
//!
//! Search is chronological backtracking in variable index order with
//! ascending values and forward checking: when the second-highest variable
//! of a scope is assigned, the values of the highest variable that the
//! constraint forbids are pruned. Every constraint is therefore fully
//! enforced by the time its last variable is reached, and the first
//! solution found is the lexicographically smallest.

use serde::{Deserialize, Serialize};

use crate::csp::{Assignment, Constraint, Csp, Value};
use crate::error::{Error, Result};

/// Default node cap for [`solve`].
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

/// Environment variable overriding the node budget.
pub const NODE_BUDGET_ENV: &str = "RBLAB_NODE_BUDGET";

/// Largest `d^n` the enumeration oracle will walk.
pub const ORACLE_LIMIT: u128 = 1 << 22;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Stop at the first solution.
    Decide,
    /// Count every solution.
    CountAll,
    /// Stop after the second solution; count is `min(actual, 2)`.
    CheckUnique,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Sat,
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    /// Present in counting modes.
    pub count: Option<u128>,
    /// The first solution in lexicographic order, when one exists.
    pub witness: Option<Assignment>,
    pub nodes_expanded: u64,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub node_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

impl SolverConfig {
    /// Default config with the budget taken from `RBLAB_NODE_BUDGET` if set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(NODE_BUDGET_ENV) {
            Ok(v) => v
                .trim()
                .parse::<u64>()
                .map(|node_budget| SolverConfig { node_budget })
                .map_err(|_| Error::domain(NODE_BUDGET_ENV, format!("not a node count: {v:?}"))),
            Err(_) => Ok(SolverConfig::default()),
        }
    }
}

/// Is the assignment's restriction to the scope permitted?
pub fn satisfies(constraint: &Constraint, assignment: &Assignment) -> bool {
    constraint.satisfied_by(assignment)
}

pub fn solve(csp: &Csp, mode: Mode) -> Result<SolveResult> {
    solve_with(csp, mode, &SolverConfig::default())
}

pub fn solve_with(csp: &Csp, mode: Mode, config: &SolverConfig) -> Result<SolveResult> {
    let mut search = Search::new(csp, mode, config.node_budget);
    if search.prune_unary() {
        search.descend(0)?;
    }
    let count = search.count;
    let status = if count > 0 { Status::Sat } else { Status::Unsat };
    Ok(SolveResult {
        status,
        count: (mode != Mode::Decide).then_some(count),
        witness: search.witness.map(Assignment::from_vec_unchecked),
        nodes_expanded: search.nodes,
    })
}

/// A pruning rule fired when `trigger` is assigned: restrict `target`.
#[derive(Clone, Copy)]
struct Check {
    constraint: usize,
    target: usize,
    stride: u64,
}

struct Search<'a> {
    csp: &'a Csp,
    mode: Mode,
    budget: u64,
    d: usize,
    checks: Vec<Vec<Check>>,
    /// `alive[x * d + v]`
    alive: Vec<bool>,
    alive_count: Vec<usize>,
    trail: Vec<(usize, usize)>,
    values: Vec<Value>,
    nodes: u64,
    count: u128,
    witness: Option<Vec<Value>>,
}

impl<'a> Search<'a> {
    fn new(csp: &'a Csp, mode: Mode, budget: u64) -> Self {
        let n = csp.num_vars();
        let d = csp.domain_size() as usize;
        let mut checks = vec![Vec::new(); n];
        for (ci, c) in csp.constraints().iter().enumerate() {
            let scope = c.scope();
            if scope.len() < 2 {
                continue;
            }
            let mut order: Vec<usize> = (0..scope.len()).collect();
            order.sort_by_key(|&j| scope[j]);
            let target_pos = order[order.len() - 1];
            let trigger = scope[order[order.len() - 2]];
            let stride = (d as u64).pow((scope.len() - 1 - target_pos) as u32);
            checks[trigger].push(Check {
                constraint: ci,
                target: scope[target_pos],
                stride,
            });
        }
        Search {
            csp,
            mode,
            budget,
            d,
            checks,
            alive: vec![true; n * d],
            alive_count: vec![d; n],
            trail: Vec::new(),
            values: vec![0; n],
            nodes: 0,
            count: 0,
            witness: None,
        }
    }

    /// Applies unary constraints; false if some domain empties.
    fn prune_unary(&mut self) -> bool {
        for c in self.csp.constraints() {
            if c.arity() != 1 {
                continue;
            }
            let x = c.scope()[0];
            for v in 0..self.d {
                if self.alive[x * self.d + v] && !c.permits_code(v as u64) {
                    self.alive[x * self.d + v] = false;
                    self.alive_count[x] -= 1;
                }
            }
            if self.alive_count[x] == 0 {
                return false;
            }
        }
        true
    }

    /// Returns `Ok(true)` when the search should stop.
    fn descend(&mut self, var: usize) -> Result<bool> {
        if var == self.values.len() {
            self.count += 1;
            if self.witness.is_none() {
                self.witness = Some(self.values.clone());
            }
            return Ok(match self.mode {
                Mode::Decide => true,
                Mode::CheckUnique => self.count >= 2,
                Mode::CountAll => false,
            });
        }
        for v in 0..self.d {
            if !self.alive[var * self.d + v] {
                continue;
            }
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded {
                    nodes: self.nodes - 1,
                    budget: self.budget,
                });
            }
            self.values[var] = v as Value;
            let mark = self.trail.len();
            let consistent = self.forward_check(var);
            let stop = consistent && self.descend(var + 1)?;
            self.undo(mark);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    fn forward_check(&mut self, var: usize) -> bool {
        let d = self.d;
        for i in 0..self.checks[var].len() {
            let check = self.checks[var][i];
            let c = &self.csp.constraints()[check.constraint];
            // target is unassigned; its slot is overwritten when it is reached
            self.values[check.target] = 0;
            let base = c.code_under(&self.values);

            let y = check.target;
            for w in 0..d {
                let slot = y * d + w;
                if self.alive[slot] && !c.permits_code(base + w as u64 * check.stride) {
                    self.alive[slot] = false;
                    self.alive_count[y] -= 1;
                    self.trail.push((y, w));
                }
            }
            if self.alive_count[y] == 0 {
                return false;
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (y, w) = self.trail.pop().expect("trail above mark");
            self.alive[y * self.d + w] = true;
            self.alive_count[y] += 1;
        }
    }
}

/// Counts solutions by walking all `d^n` assignments in lexicographic order.
///
/// Same result semantics as `solve(.., Mode::CountAll)`.
pub fn enumerate_oracle(csp: &Csp) -> Result<SolveResult> {
    let n = csp.num_vars();
    let d = csp.domain_size();
    let total = u128::from(d)
        .checked_pow(n as u32)
        .filter(|&t| t <= ORACLE_LIMIT)
        .ok_or_else(|| Error::domain("instance", format!("d^n = {d}^{n} exceeds the oracle limit of 2^22")))?;

    let mut values = vec![0 as Value; n];
    let mut count = 0u128;
    let mut witness = None;
    for _ in 0..total {
        if csp
            .constraints()
            .iter()
            .all(|c| c.permits_code(c.code_under(&values)))
        {
            count += 1;
            if witness.is_none() {
                witness = Some(Assignment::from_vec_unchecked(values.clone()));
            }
        }
        // odometer, last variable fastest
        for x in (0..n).rev() {
            values[x] += 1;
            if values[x] < d {
                break;
            }
            values[x] = 0;
        }
    }
    Ok(SolveResult {
        status: if count > 0 { Status::Sat } else { Status::Unsat },
        count: Some(count),
        witness,
        nodes_expanded: total as u64,
    })
}

/// The instance with constraint `u` replaced by its complement, or `None`
/// when `u` permits every tuple.
pub fn near_miss_problem(csp: &Csp, u: usize) -> Result<Option<Csp>> {
    if u >= csp.constraints().len() {
        return Err(Error::domain(
            "u",
            format!("constraint index {u} out of range 0..{}", csp.constraints().len()),
        ));
    }
    let complement = csp.constraint(u).complement();
    if complement.is_empty() {
        return Ok(None);
    }
    csp.replace_constraint(u, complement).map(Some)
}

/// An assignment satisfying every constraint except `u` and violating `u`.
pub fn find_near_miss(csp: &Csp, u: usize) -> Result<Option<Assignment>> {
    find_near_miss_with(csp, u, &SolverConfig::default())
}

pub fn find_near_miss_with(csp: &Csp, u: usize, config: &SolverConfig) -> Result<Option<Assignment>> {
    match near_miss_problem(csp, u)? {
        None => Ok(None),
        Some(problem) => Ok(solve_with(&problem, Mode::Decide, config)?.witness),
    }
}

/// Number of near-miss assignments at constraint `u`.
pub fn count_near_misses(csp: &Csp, u: usize, config: &SolverConfig) -> Result<u128> {
    match near_miss_problem(csp, u)? {
        None => Ok(0),
        Some(problem) => Ok(solve_with(&problem, Mode::CountAll, config)?
            .count
            .expect("counting mode")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c2(scope: [usize; 2], d: u32, tuples: &[[Value; 2]]) -> Constraint {
        Constraint::new(scope.to_vec(), d, tuples.iter().copied()).unwrap()
    }

    #[test]
    fn unconstrained_count() {
        let csp = Csp::new(3, 2, vec![]).unwrap();
        let res = solve(&csp, Mode::CountAll).unwrap();
        assert_eq!(res.count, Some(8));
        assert_eq!(enumerate_oracle(&csp).unwrap().count, Some(8));
    }

    #[test]
    fn single_permitted_tuple() {
        let csp = Csp::new(2, 2, vec![c2([0, 1], 2, &[[0, 0]])]).unwrap();
        let res = solve(&csp, Mode::CountAll).unwrap();
        assert_eq!(res.count, Some(1));
        assert_eq!(res.witness.unwrap().values(), &[0, 0]);
    }

    #[test]
    fn disjoint_constraints_are_unsat() {
        let csp = Csp::new(2, 2, vec![c2([0, 1], 2, &[[0, 0]]), c2([0, 1], 2, &[[1, 1]])]).unwrap();
        let res = solve(&csp, Mode::CountAll).unwrap();
        assert_eq!(res.status, Status::Unsat);
        assert_eq!(res.count, Some(0));
        assert!(res.witness.is_none());
        assert_eq!(enumerate_oracle(&csp).unwrap().count, Some(0));
    }

    #[test]
    fn modes_stop_where_they_should() {
        let csp = Csp::new(3, 3, vec![]).unwrap();
        let decide = solve(&csp, Mode::Decide).unwrap();
        assert_eq!(decide.count, None);
        assert_eq!(decide.status, Status::Sat);
        assert_eq!(decide.witness.unwrap().values(), &[0, 0, 0]);
        assert_eq!(solve(&csp, Mode::CheckUnique).unwrap().count, Some(2));
    }

    #[test]
    fn scope_order_is_respected() {
        // scope (1, 0): tuple (a, b) means x1 = a, x0 = b
        let csp = Csp::new(2, 3, vec![c2([1, 0], 3, &[[2, 0]])]).unwrap();
        let res = solve(&csp, Mode::CountAll).unwrap();
        assert_eq!(res.count, Some(1));
        assert_eq!(res.witness.unwrap().values(), &[0, 2]);
    }

    #[test]
    fn budget_is_reported() {
        let csp = Csp::new(6, 3, vec![]).unwrap();
        let err = solve_with(&csp, Mode::CountAll, &SolverConfig { node_budget: 10 }).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { budget: 10, .. }));
    }

    #[test]
    fn oracle_guard() {
        let csp = Csp::new(23, 2, vec![]).unwrap();
        assert!(matches!(enumerate_oracle(&csp), Err(Error::Domain { .. })));
    }

    #[test]
    fn near_miss_of_vacuous_constraint_is_none() {
        let all: Vec<[Value; 2]> = (0..2).flat_map(|a| (0..2).map(move |b| [a, b])).collect();
        let csp = Csp::new(2, 2, vec![c2([0, 1], 2, &all)]).unwrap();
        assert_eq!(find_near_miss(&csp, 0).unwrap(), None);
        assert!(find_near_miss(&csp, 1).is_err());
    }

    #[test]
    fn near_miss_after_removing_solution_tuple() {
        // x0 = x1 = x2 forced to (1,1,1) by a chain of equalities plus a pin
        let d = 3;
        let eq: Vec<[Value; 2]> = (0..d).map(|v| [v, v]).collect();
        let pin: Vec<[Value; 2]> = (0..d).map(|v| [1, v]).collect();
        let base = vec![c2([0, 1], d, &eq), c2([1, 2], d, &eq), c2([0, 2], d, &pin)];
        let csp = Csp::new(3, d, base.clone()).unwrap();
        let unique = solve(&csp, Mode::CheckUnique).unwrap();
        assert_eq!(unique.count, Some(1));
        let sol = unique.witness.unwrap();
        assert_eq!(sol.values(), &[1, 1, 1]);

        // drop the solution's tuple from constraint 1
        let without: Vec<[Value; 2]> = eq.iter().copied().filter(|t| *t != [1, 1]).collect();
        let mut cons = base;
        cons[1] = c2([1, 2], d, &without);
        let broken = Csp::new(3, d, cons).unwrap();
        // x1 = 1 now has no partner in constraint 1, so every x2 is a near miss
        assert_eq!(broken.violated(&sol), vec![1]);
        let nm = find_near_miss(&broken, 1).unwrap().unwrap();
        assert_eq!(nm.values(), &[1, 1, 0]);
        assert_eq!(broken.violated(&nm), vec![1]);
        assert_eq!(count_near_misses(&broken, 1, &SolverConfig::default()).unwrap(), 3);
    }

    #[test]
    fn unary_constraints() {
        let c = Constraint::new(vec![1], 3, [[2u32]]).unwrap();
        let csp = Csp::new(2, 3, vec![c]).unwrap();
        assert_eq!(solve(&csp, Mode::CountAll).unwrap().count, Some(3));
        assert_eq!(enumerate_oracle(&csp).unwrap().count, Some(3));
    }
}
