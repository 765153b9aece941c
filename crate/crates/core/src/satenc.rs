//! Log-encoding of a CSP into CNF: each variable becomes `ceil(log2 d)`
//! boolean bits, each forbidden tuple one clause. Also DIMACS I/O and a
//! small DPLL used to cross-check the exact solver.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::csp::{decode as decode_tuple, Assignment, Csp, Value};
use crate::error::{Error, Result};
use crate::solver::DEFAULT_NODE_BUDGET;

pub const DEFAULT_CLAUSE_BUDGET: u64 = 10_000_000;

pub type Clause = Vec<i32>;

/// Where a CSP variable's bits live: variable `x`, bit `j` (bit 0 least
/// significant) is boolean variable `x * bits + j + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub n: usize,
    pub d: u32,
    pub bits: u32,
}

impl VarMap {
    pub fn new(n: usize, d: u32) -> Self {
        VarMap { n, d, bits: bits_for(d) }
    }

    pub fn var(&self, x: usize, bit: u32) -> i32 {
        (x * self.bits as usize + bit as usize + 1) as i32
    }

    /// Literals that are all false exactly when `x` takes `value`.
    fn blocking_literals(&self, x: usize, value: u64, out: &mut Clause) {
        for j in 0..self.bits {
            let v = self.var(x, j);
            out.push(if value >> j & 1 == 1 { -v } else { v });
        }
    }
}

/// `ceil(log2 d)`.
pub fn bits_for(d: u32) -> u32 {
    if d <= 1 {
        0
    } else {
        32 - (d - 1).leading_zeros()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnf {
    pub num_vars: usize,
    pub clauses: Vec<Clause>,
    pub var_map: Option<VarMap>,
}

impl Cnf {
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self> {
        for (i, c) in clauses.iter().enumerate() {
            if let Some(&l) = c.iter().find(|&&l| l == 0 || l.unsigned_abs() as usize > num_vars) {
                return Err(Error::domain(format!("clauses[{i}]"), format!("literal {l} outside 1..={num_vars}")));
            }
        }
        Ok(Cnf { num_vars, clauses, var_map: None })
    }

    pub fn evaluate(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| model[l.unsigned_abs() as usize - 1] == (l > 0))
        })
    }
}

/// Clause count `encode` would emit.
pub fn clause_count(csp: &Csp) -> u64 {
    let map = VarMap::new(csp.num_vars(), csp.domain_size());
    let forbidden: u64 = csp.constraints().iter().map(|c| c.tuple_space() - c.len() as u64).sum();
    let invalid = (1u64 << map.bits) - u64::from(csp.domain_size());
    forbidden + csp.num_vars() as u64 * invalid
}

/// One clause per forbidden tuple (constraint order, then ascending tuple
/// code), followed by one clause per variable and code in `[d, 2^bits)`.
pub fn encode(csp: &Csp, clause_budget: u64) -> Result<Cnf> {
    let clauses = clause_count(csp);
    if clauses > clause_budget {
        return Err(Error::Size { clauses, budget: clause_budget });
    }
    let d = csp.domain_size();
    let map = VarMap::new(csp.num_vars(), d);
    let mut out = Vec::with_capacity(clauses as usize);
    for c in csp.constraints() {
        let k = c.arity();
        let mut permitted = c.codes().iter().peekable();
        for code in 0..c.tuple_space() {
            if permitted.peek() == Some(&&code) {
                permitted.next();
                continue;
            }
            let tuple = decode_tuple(code, d, k);
            let mut clause = Vec::with_capacity(k * map.bits as usize);
            for (&x, &v) in c.scope().iter().zip(&tuple) {
                map.blocking_literals(x, u64::from(v), &mut clause);
            }
            out.push(clause);
        }
    }
    for x in 0..csp.num_vars() {
        for code in u64::from(d)..(1u64 << map.bits) {
            let mut clause = Vec::with_capacity(map.bits as usize);
            map.blocking_literals(x, code, &mut clause);
            out.push(clause);
        }
    }
    Ok(Cnf {
        num_vars: csp.num_vars() * map.bits as usize,
        clauses: out,
        var_map: Some(map),
    })
}

/// Reads each variable's bits back into a domain value.
pub fn decode(cnf: &Cnf, model: &[bool]) -> Result<Assignment> {
    let map = cnf
        .var_map
        .ok_or_else(|| Error::domain("cnf", "formula carries no variable map"))?;
    if model.len() != cnf.num_vars {
        return Err(Error::domain(
            "model",
            format!("has {} values, formula has {} variables", model.len(), cnf.num_vars),
        ));
    }
    let mut values = Vec::with_capacity(map.n);
    for x in 0..map.n {
        let value = (0..map.bits).fold(0u64, |acc, j| {
            acc | (u64::from(model[map.var(x, j) as usize - 1]) << j)
        });
        if value >= u64::from(map.d) {
            return Err(Error::InvalidModel { var: x, value, d: map.d });
        }
        values.push(value as Value);
    }
    Assignment::new(values, map.d)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DpllOutcome {
    /// `model[i]` is the value of boolean variable `i + 1`.
    Sat(Vec<bool>),
    Unsat,
}

impl DpllOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, DpllOutcome::Sat(_))
    }
}

pub fn dpll_sat(cnf: &Cnf) -> Result<DpllOutcome> {
    dpll_sat_with(cnf, DEFAULT_NODE_BUDGET)
}

/// Unit propagation, then branch on the lowest unassigned variable, false
/// first. Variables left free are reported false.
pub fn dpll_sat_with(cnf: &Cnf, node_budget: u64) -> Result<DpllOutcome> {
    let mut s = Dpll {
        clauses: &cnf.clauses,
        value: vec![None; cnf.num_vars + 1],
        trail: Vec::new(),
    };
    if !s.propagate() {
        return Ok(DpllOutcome::Unsat);
    }
    // (variable, trail length before the decision, true branch taken)
    let mut stack: Vec<(usize, usize, bool)> = Vec::new();
    let mut nodes = 0u64;
    loop {
        let Some(v) = (1..=cnf.num_vars).find(|&v| s.value[v].is_none()) else {
            let model = s.value[1..].iter().map(|x| x.unwrap_or(false)).collect();
            return Ok(DpllOutcome::Sat(model));
        };
        nodes += 1;
        if nodes > node_budget {
            return Err(Error::BudgetExceeded { nodes, budget: node_budget });
        }
        stack.push((v, s.trail.len(), false));
        s.assign(v, false);
        while !s.propagate() {
            loop {
                let Some((v, mark, tried_true)) = stack.pop() else {
                    return Ok(DpllOutcome::Unsat);
                };
                s.undo(mark);
                if !tried_true {
                    nodes += 1;
                    if nodes > node_budget {
                        return Err(Error::BudgetExceeded { nodes, budget: node_budget });
                    }
                    stack.push((v, mark, true));
                    s.assign(v, true);
                    break;
                }
            }
        }
    }
}

struct Dpll<'a> {
    clauses: &'a [Clause],
    value: Vec<Option<bool>>,
    trail: Vec<usize>,
}

impl Dpll<'_> {
    fn assign(&mut self, v: usize, b: bool) {
        self.value[v] = Some(b);
        self.trail.push(v);
    }

    fn undo(&mut self, mark: usize) {
        for v in self.trail.drain(mark..) {
            self.value[v] = None;
        }
    }

    /// Returns false on a conflict.
    fn propagate(&mut self) -> bool {
        loop {
            let mut changed = false;
            for clause in self.clauses {
                let mut free = None;
                let mut free_count = 0;
                let mut satisfied = false;
                for &l in clause {
                    match self.value[l.unsigned_abs() as usize] {
                        Some(b) if b == (l > 0) => {
                            satisfied = true;
                            break;
                        }
                        Some(_) => {}
                        None => {
                            free_count += 1;
                            free = Some(l);
                        }
                    }
                }
                if satisfied {
                    continue;
                }
                match (free_count, free) {
                    (0, _) => return false,
                    (1, Some(l)) => {
                        self.assign(l.unsigned_abs() as usize, l > 0);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return true;
            }
        }
    }
}

const VAR_MAP_TAG: &str = "var_map";

pub fn write_dimacs<W: Write>(cnf: &Cnf, mut sink: W) -> Result<()> {
    if let Some(map) = cnf.var_map {
        writeln!(sink, "c {VAR_MAP_TAG} n {} d {} bits {}", map.n, map.d, map.bits)?;
        writeln!(sink, "c variable x bit j is x*bits + j + 1, bit 0 least significant")?;
    }
    writeln!(sink, "p cnf {} {}", cnf.num_vars, cnf.clauses.len())?;
    let mut line = String::new();
    for clause in &cnf.clauses {
        line.clear();
        for l in clause {
            line.push_str(&l.to_string());
            line.push(' ');
        }
        line.push('0');
        writeln!(sink, "{line}")?;
    }
    Ok(())
}

pub fn to_dimacs_string(cnf: &Cnf) -> String {
    let mut buf = Vec::new();
    write_dimacs(cnf, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn parse_var_map(rest: &str) -> Option<VarMap> {
    let toks: Vec<&str> = rest.split_whitespace().collect();
    match toks.as_slice() {
        [tag, "n", n, "d", d, "bits", b] if *tag == VAR_MAP_TAG => Some(VarMap {
            n: n.parse().ok()?,
            d: d.parse().ok()?,
            bits: b.parse().ok()?,
        }),
        _ => None,
    }
}

/// Parses DIMACS CNF. Clauses may span lines; `c` lines are comments, and a
/// `c var_map ...` comment restores the variable map.
pub fn read_dimacs<R: BufRead>(source: R) -> Result<Cnf> {
    let mut header: Option<(usize, usize)> = None;
    let mut var_map = None;
    let mut clauses = Vec::new();
    let mut current: Clause = Vec::new();
    let mut last_line = 0;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('c') {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                if let Some(map) = parse_var_map(rest) {
                    var_map = Some(map);
                }
                continue;
            }
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(Error::Parse { line: line_no, message: "second header line".into() });
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            let parsed = match toks.as_slice() {
                ["p", "cnf", v, c] => v.parse().ok().zip(c.parse().ok()),
                _ => None,
            };
            header = Some(parsed.ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("malformed header '{trimmed}', expected 'p cnf <vars> <clauses>'"),
            })?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(Error::Parse { line: line_no, message: "clause before 'p cnf' header".into() });
        };
        for tok in trimmed.split_whitespace() {
            let lit: i32 = tok.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("'{tok}' is not an integer literal"),
            })?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
            } else if lit.unsigned_abs() as usize > num_vars {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("literal {lit} exceeds declared {num_vars} variables"),
                });
            } else {
                current.push(lit);
            }
        }
    }
    let Some((num_vars, num_clauses)) = header else {
        return Err(Error::Parse { line: last_line.max(1), message: "missing 'p cnf' header".into() });
    };
    if !current.is_empty() {
        return Err(Error::Parse { line: last_line, message: "last clause is not terminated by 0".into() });
    }
    if clauses.len() != num_clauses {
        return Err(Error::Parse {
            line: last_line,
            message: format!("header declares {num_clauses} clauses, found {}", clauses.len()),
        });
    }
    if let Some(map) = var_map {
        if map.n * map.bits as usize != num_vars || map.bits != bits_for(map.d) {
            return Err(Error::Parse { line: 1, message: "variable map disagrees with header".into() });
        }
    }
    Ok(Cnf { num_vars, clauses, var_map })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Constraint;

    fn binary(d: u32, n: usize, scope: [usize; 2], tuples: &[[Value; 2]]) -> Csp {
        Csp::new(n, d, vec![Constraint::new(scope.to_vec(), d, tuples).unwrap()]).unwrap()
    }

    #[test]
    fn bit_widths() {
        assert_eq!([1, 2, 3, 4, 5, 8, 9].map(bits_for), [0, 1, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn forbidden_tuple_clause() {
        let csp = binary(2, 2, [0, 1], &[[0, 0], [0, 1], [1, 1]]);
        let cnf = encode(&csp, 100).unwrap();
        assert_eq!(cnf.num_vars, 2);
        assert_eq!(cnf.clauses, vec![vec![-1, 2]]);
    }

    #[test]
    fn invalid_code_exclusion() {
        let csp = Csp::new(2, 3, vec![]).unwrap();
        let cnf = encode(&csp, 100).unwrap();
        assert_eq!(cnf.num_vars, 4);
        assert_eq!(cnf.clauses, vec![vec![-1, -2], vec![-3, -4]]);
    }

    #[test]
    fn vacuous_power_of_two() {
        let all: Vec<[Value; 2]> = (0..4).flat_map(|a| (0..4).map(move |b| [a, b])).collect();
        let csp = binary(4, 3, [0, 2], &all);
        let cnf = encode(&csp, 100).unwrap();
        assert!(cnf.clauses.is_empty());
        assert_eq!(cnf.num_vars, 6);
        assert_eq!(dpll_sat(&cnf).unwrap(), DpllOutcome::Sat(vec![false; 6]));
    }

    #[test]
    fn budget_is_reported() {
        let csp = binary(4, 2, [0, 1], &[[0, 0]]);
        assert_eq!(clause_count(&csp), 15);
        assert!(matches!(encode(&csp, 14), Err(Error::Size { clauses: 15, budget: 14 })));
        assert!(encode(&csp, 15).is_ok());
    }

    #[test]
    fn round_trip_solution() {
        let csp = binary(3, 2, [0, 1], &[[2, 1]]);
        let cnf = encode(&csp, 100).unwrap();
        let DpllOutcome::Sat(model) = dpll_sat(&cnf).unwrap() else { panic!("sat expected") };
        assert!(cnf.evaluate(&model));
        let a = decode(&cnf, &model).unwrap();
        assert_eq!(a.values(), &[2, 1]);
        // x0 = 2 is bits (0, 1), x1 = 1 is bits (1, 0)
        assert_eq!(model, vec![false, true, true, false]);
    }

    #[test]
    fn invalid_code_rejected() {
        let csp = Csp::new(2, 3, vec![]).unwrap();
        let cnf = encode(&csp, 100).unwrap();
        let err = decode(&cnf, &[false, false, true, true]).unwrap_err();
        assert!(matches!(err, Error::InvalidModel { var: 1, value: 3, d: 3 }));
    }

    #[test]
    fn dpll_basics() {
        assert_eq!(dpll_sat(&Cnf::new(0, vec![]).unwrap()).unwrap(), DpllOutcome::Sat(vec![]));
        assert_eq!(dpll_sat(&Cnf::new(1, vec![vec![1], vec![-1]]).unwrap()).unwrap(), DpllOutcome::Unsat);
        assert_eq!(dpll_sat(&Cnf::new(1, vec![vec![]]).unwrap()).unwrap(), DpllOutcome::Unsat);
        let cnf = Cnf::new(3, vec![vec![1, 2], vec![-1, 3], vec![-3]]).unwrap();
        assert_eq!(dpll_sat(&cnf).unwrap(), DpllOutcome::Sat(vec![false, true, false]));
        // pigeonhole 3 into 2 needs branching
        let p = |i: i32, h: i32| i * 2 + h + 1;
        let mut clauses: Vec<Clause> = (0..3).map(|i| vec![p(i, 0), p(i, 1)]).collect();
        for h in 0..2 {
            for i in 0..3 {
                for j in i + 1..3 {
                    clauses.push(vec![-p(i, h), -p(j, h)]);
                }
            }
        }
        let php = Cnf::new(6, clauses).unwrap();
        assert_eq!(dpll_sat(&php).unwrap(), DpllOutcome::Unsat);
        assert!(matches!(dpll_sat_with(&php, 1), Err(Error::BudgetExceeded { .. })));
        assert!(Cnf::new(2, vec![vec![3]]).is_err());
    }

    #[test]
    fn dimacs_format() {
        let cnf = Cnf::new(2, vec![vec![1, -2]]).unwrap();
        assert_eq!(to_dimacs_string(&cnf), "p cnf 2 1\n1 -2 0\n");
        let encoded = encode(&binary(3, 2, [0, 1], &[[2, 1]]), 100).unwrap();
        let text = to_dimacs_string(&encoded);
        assert!(text.starts_with("c var_map n 2 d 3 bits 2\n"));
        assert_eq!(read_dimacs(text.as_bytes()).unwrap(), encoded);
    }

    #[test]
    fn dimacs_parse_errors() {
        let line_of = |s: &str| match read_dimacs(s.as_bytes()) {
            Err(Error::Parse { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(line_of("1 2 0\n"), 1);
        assert_eq!(line_of("c hi\np cnf 2 1\n1 x 0\n"), 3);
        assert_eq!(line_of("p cnf 2 1\n1 3 0\n"), 2);
        assert_eq!(line_of("p cnf 2 2\n1 0\n"), 2);
        assert_eq!(line_of("p cnf 2 1\n1 2\n"), 2);
        assert_eq!(line_of("p dnf 2 1\n"), 1);
        assert_eq!(line_of(""), 1);
        let multi = read_dimacs("p cnf 3 2\n1 2\n 3 0 -1 0\n".as_bytes()).unwrap();
        assert_eq!(multi.clauses, vec![vec![1, 2, 3], vec![-1]]);
    }
}
