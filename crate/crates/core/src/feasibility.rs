//! Verdicts on the five parameter requirements of the hardness argument.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{epsilon_formula, r_critical};
use crate::scalar::Real;

/// One inequality, with `slack > 0` (or `>= 0` for a non-strict one)
/// exactly when it holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck<T> {
    pub expression: String,
    /// Left-hand side as written.
    pub value: T,
    pub pass: bool,
    pub slack: T,
}

impl<T: Real> SubCheck<T> {
    fn strict(expression: &str, value: T, slack: T) -> Self {
        SubCheck { expression: expression.to_owned(), value, pass: slack > T::zero(), slack }
    }

    fn non_strict(expression: &str, value: T, slack: T) -> Self {
        SubCheck { expression: expression.to_owned(), value, pass: slack >= T::zero(), slack }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition<T> {
    pub id: u8,
    pub expression: String,
    /// Value of the tightest sub-check.
    pub value: T,
    pub pass: bool,
    /// Minimum slack over the sub-checks.
    pub slack: T,
    pub sub_checks: Vec<SubCheck<T>>,
}

impl<T: Real> Condition<T> {
    fn new(id: u8, expression: &str, sub_checks: Vec<SubCheck<T>>) -> Self {
        let tightest = sub_checks
            .iter()
            .min_by(|a, b| a.slack.partial_cmp(&b.slack).unwrap_or(std::cmp::Ordering::Less))
            .expect("at least one sub-check");
        Condition {
            id,
            expression: expression.to_owned(),
            value: tightest.value,
            pass: sub_checks.iter().all(|s| s.pass),
            slack: tightest.slack,
            sub_checks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport<T> {
    pub n: usize,
    pub alpha: T,
    pub k: usize,
    pub p: T,
    pub r_critical: T,
    pub epsilon: T,
    pub r: T,
    pub conditions: Vec<Condition<T>>,
    pub pass: bool,
}

impl<T: Real> FeasibilityReport<T> {
    pub fn failed(&self) -> Vec<u8> {
        self.conditions.iter().filter(|c| !c.pass).map(|c| c.id).collect()
    }

    pub fn condition(&self, id: u8) -> Option<&Condition<T>> {
        self.conditions.iter().find(|c| c.id == id)
    }
}

/// Evaluates all five conditions at `r = r_cr + epsilon(n, alpha, p)`.
pub fn check<T: Real>(n: usize, alpha: T, k: usize, p: T) -> Result<FeasibilityReport<T>> {
    let r_cr = r_critical(p)?;
    if n < 2 {
        return Err(Error::domain("n", format!("need n >= 2, got {n}")));
    }
    if !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("need finite alpha, got {alpha}")));
    }
    let one = T::one();
    let kf = T::from_count(k);
    let epsilon = epsilon_formula(n, alpha, p);
    let r = r_cr + epsilon;
    let half = T::lit(0.5);

    let inv_k = if k == 0 { T::infinity() } else { kf.recip() };
    let min_k = (one - p).recip();
    let c1 = Condition::new(
        1,
        "alpha > 1/k, 0 < p < 1, k >= 1/(1-p)",
        vec![
            SubCheck::strict("alpha > 1/k", alpha, alpha - inv_k),
            SubCheck::strict("0 < p < 1", p, p.min(one - p)),
            SubCheck::non_strict("k >= 1/(1-p)", kf, kf - min_k),
        ],
    );
    let c2 = Condition::new(
        2,
        "epsilon > 0, r > r_cr",
        vec![
            SubCheck::strict("epsilon > 0", epsilon, epsilon),
            SubCheck::strict("r > r_cr", r, r - r_cr),
        ],
    );
    let lhs3 = one + alpha * (one - r_cr * p * kf);
    let c3 = Condition::new(
        3,
        "1 + alpha (1 - r_cr p k) < 0, alpha > 1",
        vec![
            SubCheck::strict("1 + alpha (1 - r_cr p k) < 0", lhs3, -lhs3),
            SubCheck::strict("alpha > 1", alpha, alpha - one),
        ],
    );
    let lhs4 = one - r * kf * alpha / T::lit(8.0);
    let c4 = Condition::new(4, "1 - r k alpha / 8 < 0", vec![SubCheck::strict("1 - r k alpha / 8 < 0", lhs4, -lhs4)]);
    let lhs5 = one + half * alpha * r * kf * (-p / T::lit(3.0)).ln_1p();
    let c5 = Condition::new(
        5,
        "1 + alpha r k ln(1 - p/3) / 2 < 0",
        vec![SubCheck::strict("1 + alpha r k ln(1 - p/3) / 2 < 0", lhs5, -lhs5)],
    );
    let conditions = vec![c1, c2, c3, c4, c5];
    let pass = conditions.iter().all(|c| c.pass);
    Ok(FeasibilityReport { n, alpha, k, p, r_critical: r_cr, epsilon, r, conditions, pass })
}

/// First `alpha` of an ascending grid whose report passes overall.
pub fn find_feasible<T: Real>(n: usize, k: usize, p: T, alpha_grid: &[T]) -> Result<Option<T>> {
    for &alpha in alpha_grid {
        if check(n, alpha, k, p)?.pass {
            return Ok(Some(alpha));
        }
    }
    Ok(None)
}

/// `start, start + step, ..., <= end` computed by index to avoid drift.
pub fn alpha_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let count = ((end - start) / step + 1e-9).floor() as usize;
    (0..=count).map(|i| start + i as f64 * step).collect()
}
