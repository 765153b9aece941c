//! The Model RB parameter tuple and the integer quantities derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest tuple space `d^k` accepted. Keeps codes and `f64` arithmetic exact.
pub const MAX_TUPLE_SPACE: u64 = 1 << 52;

/// `(n, alpha, k, p, r, seed)` plus the derived domain size `d`, constraint
/// count `m` and permitted-set size `t`.
///
/// Rounding is half-to-even throughout; `t` is clamped into `[1, d^k - 1]`
/// so no constraint is empty or vacuous.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RBParams {
    n: usize,
    alpha: f64,
    k: usize,
    p: f64,
    r: f64,
    seed: u64,
    d: u32,
    m: usize,
    t: u64,
}

impl RBParams {
    pub fn derive(n: usize, alpha: f64, k: usize, p: f64, r: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain("n", format!("need n >= 2, got {n}")));
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::domain("alpha", format!("need alpha > 0, got {alpha}")));
        }
        if k < 2 {
            return Err(Error::domain("k", format!("need k >= 2, got {k}")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("p", format!("need 0 < p < 1, got {p}")));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::domain("r", format!("need r > 0, got {r}")));
        }
        if k > n {
            return Err(Error::domain(
                "k",
                format!("scopes need k distinct variables, but k = {k} > n = {n}"),
            ));
        }

        let d_real = (n as f64).powf(alpha).round_ties_even();
        if d_real > f64::from(u32::MAX) {
            return Err(Error::domain("alpha", format!("domain size {d_real} too large")));
        }
        let d = (d_real as u32).max(2);
        let tuple_space = tuple_space(d, k).ok_or_else(|| {
            Error::domain("alpha", format!("tuple space {d}^{k} exceeds {MAX_TUPLE_SPACE}"))
        })?;

        let m_real = (r * n as f64 * f64::from(d).ln()).round_ties_even();
        if m_real > 1e9 {
            return Err(Error::domain("r", format!("constraint count {m_real} too large")));
        }
        let m = (m_real as usize).max(1);

        let t_real = ((1.0 - p) * tuple_space as f64).round_ties_even();
        let t = (t_real as u64).clamp(1, tuple_space - 1);

        Ok(RBParams {
            n,
            alpha,
            k,
            p,
            r,
            seed,
            d,
            m,
            t,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    /// Domain size.
    pub fn d(&self) -> u32 {
        self.d
    }
    /// Constraint count.
    pub fn m(&self) -> usize {
        self.m
    }
    /// Permitted tuples per constraint in the original model.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `d^k`.
    pub fn tuple_space(&self) -> u64 {
        tuple_space(self.d, self.k).expect("checked at construction")
    }

    /// Forbidden fraction actually realised after rounding `t`.
    pub fn realized_tightness(&self) -> f64 {
        1.0 - self.t as f64 / self.tuple_space() as f64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        RBParams {
            seed,
            ..self.clone()
        }
    }
}

/// `d^k` if it does not exceed [`MAX_TUPLE_SPACE`].
pub fn tuple_space(d: u32, k: usize) -> Option<u64> {
    let k = u32::try_from(k).ok()?;
    u64::from(d)
        .checked_pow(k)
        .filter(|&s| s <= MAX_TUPLE_SPACE)
}
