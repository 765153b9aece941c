//! The tuple-swap mapping that changes an instance's satisfiability while
//! keeping every parameter (n, d, k, m and all permitted-set sizes) fixed.
//!
//! For a binary constraint with permitted tuples `a = (a1, a2)` and
//! `b = (b1, b2)` whose crosses `(a1, b2)` and `(b1, a2)` are forbidden,
//! the swap removes `a, b` and adds the two crosses.

use serde::{Deserialize, Serialize};

use crate::csp::{encode, Assignment, Constraint, Csp, Instance, Value};
use crate::error::{Error, Result};

pub type Pair = [Value; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SatToUnsat,
    UnsatToSat,
}

/// Everything needed to replay and audit one flip.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlipCertificate {
    /// Index of the modified constraint.
    pub u: usize,
    pub a: Pair,
    pub b: Pair,
    pub direction: Direction,
    /// The former unique solution (sat to unsat) or the near-miss that
    /// becomes a solution (unsat to sat).
    pub witness: Assignment,
}

impl FlipCertificate {
    /// Replays the certificate against the pre-flip CSP, re-checking every
    /// swap precondition and the witness guarantee. Returns the flipped CSP.
    pub fn verify(&self, before: &Csp) -> Result<Csp> {
        if self.u >= before.constraints().len() {
            return Err(Error::FlipPreconditionViolated(format!(
                "constraint index {} out of range",
                self.u
            )));
        }
        let swapped = swap_tuples(before.constraint(self.u), self.a, self.b)?;
        let after = before.replace_constraint(self.u, swapped)?;
        if self.witness.len() != before.num_vars() {
            return Err(Error::FlipPreconditionViolated("witness has wrong length".into()));
        }
        match self.direction {
            Direction::SatToUnsat => {
                if !before.is_solution(&self.witness) {
                    return Err(Error::FlipPreconditionViolated(
                        "witness is not a solution of the original instance".into(),
                    ));
                }
                if after.constraint(self.u).satisfied_by(&self.witness) {
                    return Err(Error::FlipPreconditionViolated(
                        "witness still satisfies the flipped constraint".into(),
                    ));
                }
            }
            Direction::UnsatToSat => {
                if before.violated(&self.witness) != [self.u] {
                    return Err(Error::FlipPreconditionViolated(
                        "witness is not a near-miss at the flipped constraint".into(),
                    ));
                }
                if !after.is_solution(&self.witness) {
                    return Err(Error::FlipPreconditionViolated(
                        "witness does not solve the flipped instance".into(),
                    ));
                }
            }
        }
        Ok(after)
    }
}

fn show(t: Pair) -> String {
    format!("({}, {})", t[0] + 1, t[1] + 1)
}

/// `permitted \ {a, b} ∪ {(a1, b2), (b1, a2)}` on a binary constraint.
pub fn swap_tuples(constraint: &Constraint, a: Pair, b: Pair) -> Result<Constraint> {
    if constraint.arity() != 2 {
        return Err(Error::UnsupportedArity(constraint.arity()));
    }
    let d = constraint.domain_size();
    if a.iter().chain(&b).any(|&v| v >= d) {
        return Err(Error::FlipPreconditionViolated(format!("tuple value outside domain of size {d}")));
    }
    if a == b {
        return Err(Error::FlipPreconditionViolated("a and b are the same tuple".into()));
    }
    let cross_ab = [a[0], b[1]];
    let cross_ba = [b[0], a[1]];
    for (label, t, want) in [
        ("a", a, true),
        ("b", b, true),
        ("(a1, b2)", cross_ab, false),
        ("(b1, a2)", cross_ba, false),
    ] {
        if constraint.permits(&t) != want {
            let state = if want { "not permitted" } else { "already permitted" };
            return Err(Error::FlipPreconditionViolated(format!("{label} = {} is {state}", show(t))));
        }
    }
    let (ca, cb) = (encode(&a, d), encode(&b, d));
    let mut codes: Vec<u64> = constraint
        .codes()
        .iter()
        .copied()
        .filter(|&c| c != ca && c != cb)
        .collect();
    codes.push(encode(&cross_ab, d));
    codes.push(encode(&cross_ba, d));
    constraint.with_codes(codes)
}

fn require_binary(csp: &Csp) -> Result<()> {
    match csp.constraints().iter().find(|c| c.arity() != 2) {
        Some(c) => Err(Error::UnsupportedArity(c.arity())),
        None => Ok(()),
    }
}

fn pair_at(c: &Constraint, values: &[Value]) -> Pair {
    let s = c.scope();
    [values[s[0]], values[s[1]]]
}

/// Kills a unique solution: picks the first constraint `u` (by index) and
/// the first `b` (ascending) such that `a` = the solution's tuple on `u`
/// and the swap is legal. The solution violates the flipped constraint.
///
/// Uniqueness is the caller's responsibility; the solution is re-checked.
pub fn flip_csp_sat_to_unsat(csp: &Csp, solution: &Assignment) -> Result<(Csp, FlipCertificate)> {
    require_binary(csp)?;
    if !csp.is_solution(solution) {
        return Err(Error::FlipPreconditionViolated(
            "the given assignment is not a solution".into(),
        ));
    }
    for (u, c) in csp.constraints().iter().enumerate() {
        let a = pair_at(c, solution.values());
        let found = c.tuples().map(|t| [t[0], t[1]]).find(|&b| {
            b[0] != a[0] && b[1] != a[1] && !c.permits(&[a[0], b[1]]) && !c.permits(&[b[0], a[1]])
        });
        if let Some(b) = found {
            let cert = FlipCertificate {
                u,
                a,
                b,
                direction: Direction::SatToUnsat,
                witness: solution.clone(),
            };
            let after = csp.replace_constraint(u, swap_tuples(c, a, b)?)?;
            return Ok((after, cert));
        }
    }
    Err(Error::NoFlipPairFound)
}

/// Repairs a near-miss at constraint `u`: with `(v1, v2)` the near-miss
/// tuple, picks the first `a = (v1, a2)` and then the first `b = (b1, v2)`
/// in ascending order with `(b1, a2)` forbidden. The swap adds `(v1, v2)`,
/// so the near-miss solves the flipped instance.
pub fn flip_csp_unsat_to_sat(csp: &Csp, u: usize, near_miss: &Assignment) -> Result<(Csp, FlipCertificate)> {
    require_binary(csp)?;
    if u >= csp.constraints().len() {
        return Err(Error::domain("u", format!("constraint index {u} out of range")));
    }
    if near_miss.len() != csp.num_vars() || csp.violated(near_miss) != [u] {
        return Err(Error::FlipPreconditionViolated(format!(
            "assignment is not a near-miss at constraint {}",
            u + 1
        )));
    }
    let c = csp.constraint(u);
    let [v1, v2] = pair_at(c, near_miss.values());
    let tuples: Vec<Pair> = c.tuples().map(|t| [t[0], t[1]]).collect();
    for &a in tuples.iter().filter(|t| t[0] == v1) {
        if let Some(&b) = tuples
            .iter()
            .find(|t| t[1] == v2 && !c.permits(&[t[0], a[1]]))
        {
            let cert = FlipCertificate {
                u,
                a,
                b,
                direction: Direction::UnsatToSat,
                witness: near_miss.clone(),
            };
            let after = csp.replace_constraint(u, swap_tuples(c, a, b)?)?;
            return Ok((after, cert));
        }
    }
    Err(Error::NoFlipPairFound)
}

pub fn flip_sat_to_unsat(instance: &Instance, solution: &Assignment) -> Result<(Instance, FlipCertificate)> {
    let (csp, cert) = flip_csp_sat_to_unsat(instance.csp(), solution)?;
    Ok((instance.with_csp(csp)?, cert))
}

pub fn flip_unsat_to_sat(instance: &Instance, u: usize, near_miss: &Assignment) -> Result<(Instance, FlipCertificate)> {
    let (csp, cert) = flip_csp_unsat_to_sat(instance.csp(), u, near_miss)?;
    Ok((instance.with_csp(csp)?, cert))
}

/// True when two CSPs agree on n, d, m, every arity and every permitted-set size.
pub fn parameters_preserved(before: &Csp, after: &Csp) -> bool {
    before.num_vars() == after.num_vars()
        && before.domain_size() == after.domain_size()
        && before.constraints().len() == after.constraints().len()
        && before
            .constraints()
            .iter()
            .zip(after.constraints())
            .all(|(x, y)| x.arity() == y.arity() && x.len() == y.len() && x.scope() == y.scope())
}
