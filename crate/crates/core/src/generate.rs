//! Seeded generation of Model RB instances.
//!
//! Constraint `i` draws from its own ChaCha stream, so the instance is a
//! pure function of the parameters (seed included) regardless of the order
//! or thread in which constraints are built.

use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::csp::{decode, encode, Constraint, Instance, Value, Variant};
use crate::error::{Error, Result};
use crate::params::{tuple_space, RBParams};
use crate::rng::{self, tag};

/// Largest permitted set we are willing to materialise per constraint.
const MAX_PERMITTED: u64 = 50_000_000;

/// Original model: every constraint picks `k` distinct variables and `t`
/// distinct permitted tuples, uniformly and independently.
pub fn generate_original(params: &RBParams) -> Result<Instance> {
    let space = params.tuple_space();
    if params.t() > MAX_PERMITTED {
        return Err(Error::domain(
            "t",
            format!("{} permitted tuples per constraint is too many to store", params.t()),
        ));
    }
    let constraints = (0..params.m())
        .map(|i| {
            let mut rng = rng::stream(params.seed(), tag::ORIGINAL, i as u64);
            let scope = sample_scope(&mut rng, params.n(), params.k());
            let codes = index::sample(&mut rng, space as usize, params.t() as usize)
                .into_iter()
                .map(|c| c as u64)
                .collect();
            Constraint::from_codes(scope, params.d(), codes)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::from_parts(params.clone(), Variant::Original, constraints)
}

fn sample_scope(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    index::sample(rng, n, k).into_vec()
}

/// A tuple set over `[0,d)^k` closed under permutation of coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricRelation {
    k: usize,
    d: u32,
    codes: Vec<u64>,
    target_size: u64,
}

impl SymmetricRelation {
    /// Builds a relation from explicit codes; fails unless the set is closed.
    pub fn from_codes(d: u32, k: usize, mut codes: Vec<u64>, target_size: u64) -> Result<Self> {
        codes.sort_unstable();
        codes.dedup();
        let rel = SymmetricRelation {
            k,
            d,
            codes,
            target_size,
        };
        if !rel.is_closed() {
            return Err(Error::domain("rstar", "tuple set is not closed under coordinate permutation"));
        }
        Ok(rel)
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn domain_size(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn target_size(&self) -> u64 {
        self.target_size
    }

    /// Sorted tuple codes.
    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn tuples(&self) -> impl Iterator<Item = Vec<Value>> + '_ {
        self.codes.iter().map(|&c| decode(c, self.d, self.k))
    }

    /// Exhaustive closure check: every permutation of every member is a member.
    pub fn is_closed(&self) -> bool {
        let set: HashSet<u64> = self.codes.iter().copied().collect();
        self.codes
            .iter()
            .all(|&c| orbit(c, self.d, self.k).iter().all(|o| set.contains(o)))
    }
}

/// Distinct codes obtained by permuting the coordinates of `code`, sorted.
pub fn orbit(code: u64, d: u32, k: usize) -> Vec<u64> {
    let mut tuple = decode(code, d, k);
    let mut out = Vec::new();
    permute(&mut tuple, 0, d, &mut out);
    out.sort_unstable();
    out.dedup();
    out
}

fn permute(t: &mut [Value], start: usize, d: u32, out: &mut Vec<u64>) {
    if start == t.len() {
        out.push(encode(t, d));
        return;
    }
    for i in start..t.len() {
        t.swap(start, i);
        permute(t, start + 1, d, out);
        t.swap(start, i);
    }
}

/// Samples a permutation-closed relation of size as close as possible to
/// `target_size`.
///
/// Whole orbits are added from uniformly drawn tuples until the set reaches
/// the target; then orbits are dropped one at a time while that moves the
/// size closer to the target without emptying the set.
/// Random draws spent trying to close the gap to the target size.
const REPLACEMENT_ATTEMPTS: usize = 4096;

pub fn generate_symmetric_relation(d: u32, k: usize, target_size: u64, seed: u64) -> Result<SymmetricRelation> {
    if d < 2 {
        return Err(Error::domain("d", format!("need d >= 2, got {d}")));
    }
    if k < 1 {
        return Err(Error::domain("k", "need k >= 1"));
    }
    let space = tuple_space(d, k).ok_or_else(|| Error::domain("k", "tuple space too large"))?;
    if target_size < 1 || target_size > space - 1 {
        return Err(Error::domain(
            "target_size",
            format!("need 1 <= target_size <= {}, got {target_size}", space - 1),
        ));
    }
    if target_size > MAX_PERMITTED {
        return Err(Error::domain("target_size", "too large to store"));
    }

    let mut rng = rng::stream(seed, tag::SYMMETRIC_RELATION, 0);
    let mut set: HashSet<u64> = HashSet::new();
    let mut orbits: Vec<Vec<u64>> = Vec::new();
    while (set.len() as u64) < target_size {
        let c = rng.gen_range(0..space);
        if set.contains(&c) {
            continue;
        }
        let o = orbit(c, d, k);
        set.extend(o.iter().copied());
        orbits.push(o);
    }

    let target = target_size as i64;
    let mut size = set.len() as i64;
    loop {
        let gap = (size - target).abs();
        let best = orbits
            .iter()
            .enumerate()
            .filter(|(_, o)| size - o.len() as i64 >= 1)
            .map(|(i, o)| (((size - o.len() as i64) - target).abs(), i))
            .min();
        match best {
            Some((new_gap, i)) if new_gap < gap => {
                let o = orbits.remove(i);
                size -= o.len() as i64;
                for c in o {
                    set.remove(&c);
                }
            }
            _ => break,
        }
    }

    // Removal alone can stall (one off-diagonal orbit against target 1), so
    // fresh orbits are offered as additions or one-for-one replacements.
    let mut attempts = 0;
    while size != target && attempts < REPLACEMENT_ATTEMPTS {
        attempts += 1;
        let c = rng.gen_range(0..space);
        if set.contains(&c) {
            continue;
        }
        let o = orbit(c, d, k);
        let gap = (size - target).abs();
        let grown = size + o.len() as i64;
        let mut best: Option<(i64, Option<usize>)> = None;
        if (grown - target).abs() < gap {
            best = Some(((grown - target).abs(), None));
        }
        for (i, e) in orbits.iter().enumerate() {
            let swapped = grown - e.len() as i64;
            let g = (swapped - target).abs();
            if swapped >= 1 && g < best.map_or(gap, |b| b.0) {
                best = Some((g, Some(i)));
            }
        }
        if let Some((_, out)) = best {
            if let Some(i) = out {
                let e = orbits.swap_remove(i);
                size -= e.len() as i64;
                for c in e {
                    set.remove(&c);
                }
            }
            size += o.len() as i64;
            set.extend(o.iter().copied());
            orbits.push(o);
        }
    }

    let mut codes: Vec<u64> = set.into_iter().collect();
    codes.sort_unstable();
    Ok(SymmetricRelation {
        k,
        d,
        codes,
        target_size,
    })
}

/// Image of `rstar` under per-coordinate maps: `maps[j]` is applied to
/// coordinate `j`, coordinates without a map are left alone.
pub fn apply_bijections(rstar: &SymmetricRelation, scope: Vec<usize>, maps: &[Vec<Value>]) -> Result<Constraint> {
    let (d, k) = (rstar.domain_size(), rstar.arity());
    if scope.len() != k {
        return Err(Error::domain("scope", format!("arity {} differs from {k}", scope.len())));
    }
    if maps.len() > k {
        return Err(Error::domain("bijections", "more maps than coordinates"));
    }
    for (j, g) in maps.iter().enumerate() {
        check_permutation(g, d).map_err(|e| match e {
            Error::Domain { reason, .. } => Error::domain(format!("bijections[{j}]"), reason),
            other => other,
        })?;
    }
    let codes = rstar
        .tuples()
        .map(|mut t| {
            for (j, g) in maps.iter().enumerate() {
                t[j] = g[t[j] as usize];
            }
            encode(&t, d)
        })
        .collect();
    Constraint::from_codes(scope, d, codes)
}

/// Symmetric variant: each constraint gets a random scope and `k - 1`
/// independent uniform bijections of `[0, d)` applied to the first `k - 1`
/// coordinates of `rstar`; the last coordinate is left unchanged.
pub fn instantiate_symmetric(params: &RBParams, rstar: &SymmetricRelation) -> Result<Instance> {
    if rstar.domain_size() != params.d() || rstar.arity() != params.k() {
        return Err(Error::domain(
            "rstar",
            format!(
                "relation over d = {}, k = {} does not match parameters d = {}, k = {}",
                rstar.domain_size(),
                rstar.arity(),
                params.d(),
                params.k()
            ),
        ));
    }
    let d = params.d();
    let constraints = (0..params.m())
        .map(|i| {
            let mut rng = rng::stream(params.seed(), tag::SYMMETRIC_INSTANCE, i as u64);
            let scope = sample_scope(&mut rng, params.n(), params.k());
            let maps: Vec<Vec<Value>> = (0..params.k() - 1)
                .map(|_| {
                    let mut g: Vec<Value> = (0..d).collect();
                    g.shuffle(&mut rng);
                    g
                })
                .collect();
            apply_bijections(rstar, scope, &maps)
        })
        .collect::<Result<Vec<_>>>()?;
    Instance::from_parts(params.clone(), Variant::Symmetric, constraints)
}

/// Samples `R*` with target size `t` from the parameters' seed and
/// instantiates the symmetric variant from it.
pub fn generate_symmetric(params: &RBParams) -> Result<(SymmetricRelation, Instance)> {
    let rstar = generate_symmetric_relation(params.d(), params.k(), params.t(), params.seed())?;
    let inst = instantiate_symmetric(params, &rstar)?;
    Ok((rstar, inst))
}

/// Applies a permutation `g` of `[0, d)` to the first coordinate of every
/// permitted tuple. Scope is unchanged.
pub fn remap_first_coordinates(constraint: &Constraint, g: &[Value]) -> Result<Constraint> {
    let d = constraint.domain_size();
    check_permutation(g, d)?;
    let codes = constraint
        .tuples()
        .map(|mut t| {
            t[0] = g[t[0] as usize];
            encode(&t, d)
        })
        .collect();
    constraint.with_codes(codes)
}

fn check_permutation(g: &[Value], d: u32) -> Result<()> {
    if g.len() != d as usize {
        return Err(Error::domain(
            "bijection",
            format!("has {} entries, domain has {d}", g.len()),
        ));
    }
    let mut seen = vec![false; d as usize];
    for &v in g {
        if v >= d || std::mem::replace(&mut seen[v as usize], true) {
            return Err(Error::domain("bijection", "not a permutation of the domain"));
        }
    }
    Ok(())
}
