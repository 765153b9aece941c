//! Constraints, assignments and instances.
//!
//! Tuples are stored as mixed-radix codes: the tuple `(v0, .., v_{k-1})`
//! over a domain of size `d` has code `v0 * d^(k-1) + .. + v_{k-1}`, so
//! ascending codes are lexicographic tuple order. Values and variable
//! indices are 0-based here; [`crate::io`] shifts them to 1-based.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{tuple_space, RBParams};

/// A domain value in `[0, d)`.
pub type Value = u32;

/// Tuple spaces up to this size get a dense membership bitmap.
const DENSE_LIMIT: u64 = 1 << 20;

#[derive(Clone, Debug)]
enum Membership {
    Dense(Vec<u64>),
    Sparse(HashSet<u64>),
}

impl Membership {
    fn build(space: u64, codes: &[u64]) -> Self {
        if space <= DENSE_LIMIT {
            let mut bits = vec![0u64; space.div_ceil(64) as usize];
            for &c in codes {
                bits[(c >> 6) as usize] |= 1 << (c & 63);
            }
            Membership::Dense(bits)
        } else {
            Membership::Sparse(codes.iter().copied().collect())
        }
    }

    #[inline]
    fn contains(&self, code: u64) -> bool {
        match self {
            Membership::Dense(bits) => bits
                .get((code >> 6) as usize)
                .is_some_and(|w| w & (1 << (code & 63)) != 0),
            Membership::Sparse(set) => set.contains(&code),
        }
    }
}

/// A scope of distinct variables and the set of value tuples it permits.
#[derive(Clone, Debug)]
pub struct Constraint {
    scope: Vec<usize>,
    d: u32,
    codes: Vec<u64>,
    membership: Membership,
}

impl PartialEq for Constraint {
    fn eq(&self, other: &Self) -> bool {
        self.scope == other.scope && self.d == other.d && self.codes == other.codes
    }
}

impl Eq for Constraint {}

impl Constraint {
    /// Builds a constraint from explicit tuples, checking every invariant.
    pub fn new<I, T>(scope: Vec<usize>, d: u32, tuples: I) -> Result<Self>
    where
        I: IntoIterator<Item = T>,
        T: AsRef<[Value]>,
    {
        let k = scope.len();
        let space = check_scope(&scope, d)?;
        let mut codes = Vec::new();
        for (i, tuple) in tuples.into_iter().enumerate() {
            let tuple = tuple.as_ref();
            if tuple.len() != k {
                return Err(Error::domain(
                    format!("permitted[{i}]"),
                    format!("tuple has arity {}, scope has {k}", tuple.len()),
                ));
            }
            if let Some(&v) = tuple.iter().find(|&&v| v >= d) {
                return Err(Error::domain(
                    format!("permitted[{i}]"),
                    format!("value {v} outside domain of size {d}"),
                ));
            }
            codes.push(encode(tuple, d));
        }
        let before = codes.len();
        codes.sort_unstable();
        codes.dedup();
        if codes.len() != before {
            return Err(Error::domain("permitted", "duplicate tuples"));
        }
        Ok(Self::assemble(scope, d, space, codes))
    }

    /// Builds a constraint from tuple codes. Codes must be distinct and `< d^k`.
    pub fn from_codes(scope: Vec<usize>, d: u32, mut codes: Vec<u64>) -> Result<Self> {
        let space = check_scope(&scope, d)?;
        codes.sort_unstable();
        if codes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::domain("permitted", "duplicate tuples"));
        }
        if codes.last().is_some_and(|&c| c >= space) {
            return Err(Error::domain("permitted", "tuple code outside d^k"));
        }
        Ok(Self::assemble(scope, d, space, codes))
    }

    fn assemble(scope: Vec<usize>, d: u32, space: u64, codes: Vec<u64>) -> Self {
        let membership = Membership::build(space, &codes);
        Constraint {
            scope,
            d,
            codes,
            membership,
        }
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    pub fn domain_size(&self) -> u32 {
        self.d
    }

    /// Number of permitted tuples.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// `d^k`.
    pub fn tuple_space(&self) -> u64 {
        tuple_space(self.d, self.arity()).expect("checked at construction")
    }

    /// Sorted permitted codes.
    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn tuples(&self) -> impl Iterator<Item = Vec<Value>> + '_ {
        self.codes.iter().map(|&c| decode(c, self.d, self.arity()))
    }

    #[inline]
    pub fn permits_code(&self, code: u64) -> bool {
        self.membership.contains(code)
    }

    /// Membership test for a tuple of the constraint's arity.
    pub fn permits(&self, tuple: &[Value]) -> bool {
        tuple.len() == self.arity()
            && tuple.iter().all(|&v| v < self.d)
            && self.permits_code(encode(tuple, self.d))
    }

    /// Code of the tuple `assignment` induces on the scope.
    #[inline]
    pub fn code_under(&self, values: &[Value]) -> u64 {
        self.scope
            .iter()
            .fold(0u64, |acc, &x| acc * u64::from(self.d) + u64::from(values[x]))
    }

    /// True iff the assignment's restriction to the scope is permitted.
    pub fn satisfied_by(&self, assignment: &Assignment) -> bool {
        self.permits_code(self.code_under(assignment.values()))
    }

    /// Same scope, permitted set replaced by its complement within `[0,d)^k`.
    pub fn complement(&self) -> Constraint {
        let space = self.tuple_space();
        let codes: Vec<u64> = (0..space).filter(|&c| !self.permits_code(c)).collect();
        Self::assemble(self.scope.clone(), self.d, space, codes)
    }

    /// Same scope and domain, different permitted codes.
    pub fn with_codes(&self, codes: Vec<u64>) -> Result<Constraint> {
        Constraint::from_codes(self.scope.clone(), self.d, codes)
    }

    pub fn encode_tuple(&self, tuple: &[Value]) -> u64 {
        encode(tuple, self.d)
    }

    pub fn decode_code(&self, code: u64) -> Vec<Value> {
        decode(code, self.d, self.arity())
    }
}

fn check_scope(scope: &[usize], d: u32) -> Result<u64> {
    if d < 1 {
        return Err(Error::domain("d", "domain must be non-empty"));
    }
    if scope.is_empty() {
        return Err(Error::domain("scope", "empty scope"));
    }
    let mut seen = HashSet::with_capacity(scope.len());
    if let Some(x) = scope.iter().find(|&&x| !seen.insert(x)) {
        return Err(Error::domain("scope", format!("variable {x} repeated")));
    }
    tuple_space(d, scope.len())
        .ok_or_else(|| Error::domain("scope", format!("tuple space {d}^{} too large", scope.len())))
}

/// Mixed-radix code of a tuple, first coordinate most significant.
pub fn encode(tuple: &[Value], d: u32) -> u64 {
    tuple
        .iter()
        .fold(0u64, |acc, &v| acc * u64::from(d) + u64::from(v))
}

pub fn decode(mut code: u64, d: u32, k: usize) -> Vec<Value> {
    let mut out = vec![0; k];
    for slot in out.iter_mut().rev() {
        *slot = (code % u64::from(d)) as Value;
        code /= u64::from(d);
    }
    out
}

/// A total map from variables to domain values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(Vec<Value>);

impl Assignment {
    pub fn new(values: Vec<Value>, d: u32) -> Result<Self> {
        if let Some((i, &v)) = values.iter().enumerate().find(|(_, &v)| v >= d) {
            return Err(Error::domain(
                format!("assignment[{i}]"),
                format!("value {v} outside domain of size {d}"),
            ));
        }
        Ok(Assignment(values))
    }

    pub(crate) fn from_vec_unchecked(values: Vec<Value>) -> Self {
        Assignment(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: usize) -> Value {
        self.0[var]
    }

    pub fn into_inner(self) -> Vec<Value> {
        self.0
    }
}

impl fmt::Display for Assignment {
    /// 1-based values.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        write!(f, ")")
    }
}

/// A bare CSP: `n` variables over `[0, d)` and a list of constraints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Csp {
    n: usize,
    d: u32,
    constraints: Vec<Constraint>,
}

impl Csp {
    pub fn new(n: usize, d: u32, constraints: Vec<Constraint>) -> Result<Self> {
        if d == 0 {
            return Err(Error::domain("d", "domain must be non-empty"));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.domain_size() != d {
                return Err(Error::domain(
                    format!("constraints[{i}]"),
                    format!("domain size {} differs from {d}", c.domain_size()),
                ));
            }
            if let Some(&x) = c.scope().iter().find(|&&x| x >= n) {
                return Err(Error::domain(
                    format!("constraints[{i}].scope"),
                    format!("variable {x} outside [0, {n})"),
                ));
            }
        }
        Ok(Csp { n, d, constraints })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn domain_size(&self) -> u32 {
        self.d
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint(&self, i: usize) -> &Constraint {
        &self.constraints[i]
    }

    /// All constraints satisfied. The assignment must have length `n`.
    pub fn is_solution(&self, assignment: &Assignment) -> bool {
        assignment.len() == self.n && self.constraints.iter().all(|c| c.satisfied_by(assignment))
    }

    /// Indices of constraints the assignment violates.
    pub fn violated(&self, assignment: &Assignment) -> Vec<usize> {
        self.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.satisfied_by(assignment))
            .map(|(i, _)| i)
            .collect()
    }

    /// Copy with constraint `u` replaced.
    pub fn replace_constraint(&self, u: usize, c: Constraint) -> Result<Csp> {
        if u >= self.constraints.len() {
            return Err(Error::domain("u", format!("constraint index {u} out of range")));
        }
        let mut constraints = self.constraints.clone();
        constraints[u] = c;
        Csp::new(self.n, self.d, constraints)
    }

    /// Copy without constraint `u`.
    pub fn without_constraint(&self, u: usize) -> Csp {
        let mut constraints = self.constraints.clone();
        constraints.remove(u);
        Csp {
            n: self.n,
            d: self.d,
            constraints,
        }
    }
}

/// Which generator produced an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Original,
    Symmetric,
}

/// A Model RB instance: parameters, the generated CSP, and the realised
/// forbidden fraction `1 - |R_i| / d^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    params: RBParams,
    variant: Variant,
    csp: Csp,
    actual_tightness: f64,
}

impl Instance {
    /// Assembles an instance, checking it against its parameters.
    pub fn from_parts(params: RBParams, variant: Variant, constraints: Vec<Constraint>) -> Result<Self> {
        if constraints.len() != params.m() {
            return Err(Error::domain(
                "constraints",
                format!("expected m = {} constraints, got {}", params.m(), constraints.len()),
            ));
        }
        for (i, c) in constraints.iter().enumerate() {
            if c.arity() != params.k() {
                return Err(Error::domain(
                    format!("constraints[{i}].scope"),
                    format!("arity {} differs from k = {}", c.arity(), params.k()),
                ));
            }
        }
        let size = constraints.first().map_or(0, Constraint::len);
        match variant {
            Variant::Original => {
                if let Some(i) = constraints.iter().position(|c| c.len() as u64 != params.t()) {
                    return Err(Error::domain(
                        format!("constraints[{i}].permitted"),
                        format!(
                            "original variant needs {} permitted tuples, got {}",
                            params.t(),
                            constraints[i].len()
                        ),
                    ));
                }
            }
            Variant::Symmetric => {
                if let Some(i) = constraints.iter().position(|c| c.len() != size) {
                    return Err(Error::domain(
                        format!("constraints[{i}].permitted"),
                        format!("symmetric variant needs {size} permitted tuples, got {}", constraints[i].len()),
                    ));
                }
            }
        }
        let csp = Csp::new(params.n(), params.d(), constraints)?;
        let actual_tightness = 1.0 - size as f64 / params.tuple_space() as f64;
        Ok(Instance {
            params,
            variant,
            csp,
            actual_tightness,
        })
    }

    pub fn params(&self) -> &RBParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn csp(&self) -> &Csp {
        &self.csp
    }

    pub fn constraints(&self) -> &[Constraint] {
        self.csp.constraints()
    }

    pub fn actual_tightness(&self) -> f64 {
        self.actual_tightness
    }

    /// Same parameters and variant, different constraint list.
    pub fn with_csp(&self, csp: Csp) -> Result<Instance> {
        Instance::from_parts(self.params.clone(), self.variant, csp.constraints)
    }
}

impl AsRef<Csp> for Instance {
    fn as_ref(&self) -> &Csp {
        &self.csp
    }
}

impl AsRef<Csp> for Csp {
    fn as_ref(&self) -> &Csp {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(tuples: &[[Value; 2]]) -> Vec<[Value; 2]> {
        tuples.iter().map(|&[a, b]| [a - 1, b - 1]).collect()
    }

    #[test]
    fn paper_relation_membership() {
        let c = Constraint::new(vec![0, 1], 3, one_based(&[[1, 2], [2, 3], [3, 1]])).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.permits(&[0, 1]));
        assert!(!c.permits(&[1, 1]));
        let sat = Assignment::new(vec![0, 1], 3).unwrap();
        let unsat = Assignment::new(vec![1, 1], 3).unwrap();
        assert!(c.satisfied_by(&sat));
        assert!(!c.satisfied_by(&unsat));
    }

    #[test]
    fn full_relation_is_vacuous() {
        let all: Vec<Vec<Value>> = (0..2).flat_map(|a| (0..2).map(move |b| vec![a, b])).collect();
        let c = Constraint::new(vec![0, 1], 2, all).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!(c.satisfied_by(&Assignment::new(vec![a, b], 2).unwrap()));
            }
        }
        assert!(c.complement().is_empty());
    }

    #[test]
    fn constraint_validation() {
        assert!(Constraint::new(vec![0, 0], 2, [[0u32, 0]]).is_err());
        assert!(Constraint::new(vec![0, 1], 2, [[0u32, 2]]).is_err());
        assert!(Constraint::new(vec![0, 1], 2, [[0u32, 1], [0, 1]]).is_err());
        assert!(Constraint::new(vec![0, 1], 2, [vec![0u32]]).is_err());
        assert!(Csp::new(2, 2, vec![Constraint::new(vec![0, 2], 2, [[0u32, 0]]).unwrap()]).is_err());
    }

    #[test]
    fn codes_round_trip_and_order() {
        let d = 5;
        let mut prev = None;
        for code in 0..125u64 {
            let t = decode(code, d, 3);
            assert_eq!(encode(&t, d), code);
            if let Some(p) = prev {
                assert!(p < t);
            }
            prev = Some(t);
        }
    }

    #[test]
    fn sparse_membership_matches_dense() {
        // d^k above the dense limit
        let d = 1100;
        let c = Constraint::new(vec![0, 1], d, [[3u32, 7], [1099, 0]]).unwrap();
        assert!(c.permits(&[3, 7]));
        assert!(c.permits(&[1099, 0]));
        assert!(!c.permits(&[7, 3]));
    }

    #[test]
    fn display_is_one_based() {
        let a = Assignment::new(vec![0, 2, 1], 3).unwrap();
        assert_eq!(a.to_string(), "(1, 3, 2)");
    }
}
