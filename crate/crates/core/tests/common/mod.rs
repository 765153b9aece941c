#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rblab::{Constraint, Csp};

/// Random CSP with `2..=max_n` variables, a domain size from `domains`,
/// arities 1 to 3 and each tuple permitted with probability `density`.
pub fn random_csp_with(rng: &mut ChaCha8Rng, max_n: usize, domains: &[u32], density: f64) -> Csp {
    let n = rng.gen_range(2..=max_n);
    let d = domains[rng.gen_range(0..domains.len())];
    let m = rng.gen_range(0..=2 * n);
    let constraints = (0..m)
        .map(|_| {
            let k = rng.gen_range(1..=n.min(3));
            let scope = rand::seq::index::sample(rng, n, k).into_vec();
            let space = u64::from(d).pow(k as u32);
            let codes: Vec<u64> = (0..space).filter(|_| rng.gen_bool(density)).collect();
            Constraint::from_codes(scope, d, codes).unwrap()
        })
        .collect();
    Csp::new(n, d, constraints).unwrap()
}

pub fn random_csp(rng: &mut ChaCha8Rng, max_n: usize, domains: &[u32]) -> Csp {
    random_csp_with(rng, max_n, domains, 0.6)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random binary CSP, the shape flips apply to.
pub fn random_binary_csp(rng: &mut ChaCha8Rng, n: usize, d: u32, m: usize, density: f64) -> Csp {
    let constraints = (0..m)
        .map(|_| {
            let scope = rand::seq::index::sample(rng, n, 2).into_vec();
            let codes: Vec<u64> = (0..u64::from(d * d)).filter(|_| rng.gen_bool(density)).collect();
            Constraint::from_codes(scope, d, codes).unwrap()
        })
        .collect();
    Csp::new(n, d, constraints).unwrap()
}
