//! Closed-form moment analytics for Model RB and the Monte Carlo summary
//! type used to confront them with sampled instances.
//!
//! Everything is evaluated in log space. Exponents written `r n ln d` in
//! the formulas use the point's constraint count `m` (real-valued for
//! [`ModelPoint::ideal`], the rounded integer for
//! [`ModelPoint::from_params`]).

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::RBParams;
use crate::scalar::{ln_binomial, log_sum_exp, Real};

/// Largest `n` for which the `S = 0..n` summations are evaluated.
pub const SUMMATION_LIMIT: usize = 200;

/// The quantities the formulas are written in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint<T> {
    pub n: usize,
    pub d: T,
    pub k: usize,
    /// Constraint count, `r n ln d` when ideal.
    pub m: T,
    /// Tightness (forbidden fraction per constraint).
    pub p: T,
    pub r: T,
}

impl<T: Real> ModelPoint<T> {
    /// Integer `d` and `m` from the parameters, and the tightness realised
    /// by the integer permitted-set size `t`.
    pub fn from_params(params: &RBParams) -> Self {
        ModelPoint {
            n: params.n(),
            d: T::lit(f64::from(params.d())),
            k: params.k(),
            m: T::from_count(params.m()),
            p: T::lit(params.realized_tightness()),
            r: T::lit(params.r()),
        }
    }

    /// Real-valued `d = n^alpha` and `m = r n ln d`, no rounding.
    pub fn ideal(n: usize, alpha: T, k: usize, p: T, r: T) -> Self {
        let nf = T::from_count(n);
        let d = nf.powf(alpha);
        ModelPoint {
            n,
            d,
            k,
            m: r * nf * d.ln(),
            p,
            r,
        }
    }

    pub fn with_m(self, m: T) -> Self {
        ModelPoint { m, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::domain("n", "need n >= 1"));
        }
        if !(self.d > T::one()) {
            return Err(Error::domain("d", format!("need d > 1, got {}", self.d)));
        }
        if !(self.p > T::zero() && self.p < T::one()) {
            return Err(Error::domain("p", format!("need 0 < p < 1, got {}", self.p)));
        }
        if !(self.m >= T::zero()) || !self.m.is_finite() {
            return Err(Error::domain("m", format!("need finite m >= 0, got {}", self.m)));
        }
        if self.k < 1 || self.k > self.n {
            return Err(Error::domain("k", format!("need 1 <= k <= n, got {}", self.k)));
        }
        Ok(())
    }

    fn ln_one_minus_p(&self) -> T {
        (-self.p).ln_1p()
    }
}

/// `1 / -ln(1 - p)`.
pub fn r_critical<T: Real>(p: T) -> Result<T> {
    if !(p > T::zero() && p < T::one()) {
        return Err(Error::domain("p", format!("need 0 < p < 1, got {p}")));
    }
    Ok(-T::one() / (-p).ln_1p())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration<T> {
    pub r: T,
    pub epsilon: T,
    pub r_critical: T,
}

/// `epsilon = ln(1/2) / (alpha n ln n ln(1-p))` and `r = r_cr + epsilon`,
/// which puts `E[X]` at exactly 1/2 when `d = n^alpha` and `m = r n ln d`
/// are left unrounded.
pub fn calibrate_r<T: Real>(n: usize, alpha: T, p: T) -> Result<Calibration<T>> {
    if n < 3 {
        return Err(Error::domain("n", format!("need n >= 3, got {n}")));
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::domain("alpha", format!("need alpha > 0, got {alpha}")));
    }
    let r_cr = r_critical(p)?;
    let epsilon = epsilon_formula(n, alpha, p);
    Ok(Calibration {
        r: r_cr + epsilon,
        epsilon,
        r_critical: r_cr,
    })
}

/// The calibration offset without input checks.
pub(crate) fn epsilon_formula<T: Real>(n: usize, alpha: T, p: T) -> T {
    let nf = T::from_count(n);
    T::lit(0.5).ln() / (alpha * nf * nf.ln() * (-p).ln_1p())
}

pub fn ln_expected_solutions<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    Ok(T::from_count(pt.n) * pt.d.ln() + pt.m * pt.ln_one_minus_p())
}

/// `E[X] = d^n (1-p)^m`.
pub fn expected_solutions<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    ln_expected_solutions(pt).map(T::exp)
}

/// Markov: `Pr[SAT] <= min(1, E[X])`.
pub fn sat_upper_bound<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    expected_solutions(pt).map(|e| e.min(T::one()))
}

/// Probability that one constraint permits two different tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairLaw {
    /// Tuples permitted independently, probability `(1-p)^2`.
    Independent,
    /// `t` permitted tuples drawn without repetition from `space = d^k`:
    /// `t (t-1) / (space (space-1))`.
    WithoutReplacement { permitted: u64, space: u64 },
}

impl PairLaw {
    fn pair_probability<T: Real>(self, p: T) -> T {
        match self {
            PairLaw::Independent => (T::one() - p).powi(2),
            PairLaw::WithoutReplacement { permitted, space } => {
                let t = T::lit(permitted as f64);
                let s = T::lit(space as f64);
                t * (t - T::one()) / (s * (s - T::one()))
            }
        }
    }
}

/// `C(S,k) / C(n,k)` in floating point, 0 when `S < k`.
fn overlap_fraction<T: Real>(s: usize, n: usize, k: usize) -> T {
    if s < k {
        T::zero()
    } else {
        (ln_binomial::<T>(s, k) - ln_binomial::<T>(n, k)).exp()
    }
}

fn guard_summation(n: usize) -> Result<()> {
    if n > SUMMATION_LIMIT {
        return Err(Error::domain(
            "n",
            format!("summation needs n <= {SUMMATION_LIMIT}, got {n}"),
        ));
    }
    Ok(())
}

/// `ln E[X^2]` from the sum over the overlap `S` of an assignment pair:
/// `sum_S d^n C(n,S) (d-1)^(n-S) [(1-p) q_S + pi (1-q_S)]^m` with
/// `q_S = C(S,k)/C(n,k)` and `pi` the pair probability of `law`.
pub fn ln_second_moment<T: Real>(pt: &ModelPoint<T>, law: PairLaw) -> Result<T> {
    pt.validate()?;
    guard_summation(pt.n)?;
    let n = pt.n;
    let nf = T::from_count(n);
    let one_minus_p = T::one() - pt.p;
    let pair = law.pair_probability(pt.p);
    let terms: Vec<T> = (0..=n)
        .map(|s| {
            let q = overlap_fraction::<T>(s, n, pt.k);
            let both = one_minus_p * q + pair * (T::one() - q);
            let pairs = nf * pt.d.ln()
                + ln_binomial::<T>(n, s)
                + T::from_count(n - s) * (pt.d - T::one()).ln();
            let per_constraint = if pt.m == T::zero() { T::zero() } else { pt.m * both.ln() };
            pairs + per_constraint
        })
        .collect();
    Ok(log_sum_exp(&terms))
}

pub fn second_moment<T: Real>(pt: &ModelPoint<T>, law: PairLaw) -> Result<T> {
    ln_second_moment(pt, law).map(T::exp)
}

/// `E[X^2]` with tuples permitted independently, the form the threshold
/// analysis is written in.
pub fn second_moment_independent<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    second_moment(pt, PairLaw::Independent)
}

/// `E[X^2]` for instances as [`crate::generate::generate_original`] draws
/// them: integer `d`, `m`, `t`, distinct scopes and permitted tuples drawn
/// without repetition. Exact for that distribution.
pub fn second_moment_exact<T: Real>(params: &RBParams) -> Result<T> {
    let law = PairLaw::WithoutReplacement {
        permitted: params.t(),
        space: params.tuple_space(),
    };
    second_moment(&ModelPoint::from_params(params), law)
}

/// `F(S) = C(n,S) (1-1/d)^(n-S) (1/d)^S [1 + p/(1-p) s^k]^m`, `s = S/n`,
/// for `S = 0..=n`.
pub fn f_terms<T: Real>(pt: &ModelPoint<T>) -> Result<Vec<T>> {
    pt.validate()?;
    guard_summation(pt.n)?;
    let n = pt.n;
    let nf = T::from_count(n);
    let odds = pt.p / (T::one() - pt.p);
    let ln_stay = (T::one() - pt.d.recip()).ln();
    let ln_match = -pt.d.ln();
    Ok((0..=n)
        .map(|s| {
            let frac = T::from_count(s) / nf;
            let boost = (T::one() + odds * frac.powi(pt.k as i32)).ln();
            (ln_binomial::<T>(n, s)
                + T::from_count(n - s) * ln_stay
                + T::from_count(s) * ln_match
                + pt.m * boost)
                .exp()
        })
        .collect())
}

/// `F(n) = d^-n [1 + p/(1-p)]^m`.
pub fn f_full_overlap<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    Ok((-T::from_count(pt.n) * pt.d.ln() - pt.m * pt.ln_one_minus_p()).exp())
}

/// `E[X]^2 * sum_S F(S)`, the factored form without its `1 + O(1/n)`.
pub fn second_moment_factored<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    let e = expected_solutions(pt)?;
    let sum = f_terms(pt)?.into_iter().fold(T::zero(), |a, b| a + b);
    Ok(e * e * sum)
}

/// Second-moment lower bound `E[X]^2 / E[X^2]` on `Pr[SAT]`.
pub fn second_moment_ratio<T: Real>(pt: &ModelPoint<T>, law: PairLaw) -> Result<T> {
    Ok((T::lit(2.0) * ln_expected_solutions(pt)? - ln_second_moment(pt, law)?).exp())
}

/// Limit of `Pr[SAT]`'s second-moment lower bound when `E[X] = 1/2`, as
/// `n, d -> infinity`. Not a finite-size guarantee.
pub fn sat_lower_bound_asymptotic<T: Real>() -> T {
    T::one() / T::lit(3.0)
}

/// From `Pr[X >= 1] >= sat_lower` and `E[X] >= Pr[X = 1] + 2 Pr[X >= 2]`:
/// `Pr[X = 1] >= 2 sat_lower - E[X]`.
pub fn unique_solution_lower_bound<T: Real>(sat_lower: T, expected: T) -> T {
    T::lit(2.0) * sat_lower - expected
}

/// `1/6`: the bound above at `sat_lower = 1/3`, `E[X] = 1/2`. Asymptotic.
pub fn unique_solution_lower_bound_asymptotic<T: Real>() -> T {
    unique_solution_lower_bound(sat_lower_bound_asymptotic(), T::lit(0.5))
}

/// `E[N] = d^n (1-p)^(m-1) p`: expected number of assignments violating
/// one fixed constraint and satisfying all others.
pub fn expected_near_miss<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    if pt.m < T::one() {
        return Err(Error::domain("m", "need m >= 1"));
    }
    Ok((T::from_count(pt.n) * pt.d.ln() + (pt.m - T::one()) * pt.ln_one_minus_p() + pt.p.ln()).exp())
}

/// `sum_S [p q_S + p^2 (1-q_S)] / [(1-p) q_S + (1-p)^2 (1-q_S)]`.
pub fn near_miss_second_moment_ratio<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    guard_summation(pt.n)?;
    let p = pt.p;
    let q1 = T::one() - p;
    Ok((0..=pt.n)
        .map(|s| {
            let q = overlap_fraction::<T>(s, pt.n, pt.k);
            (p * q + p * p * (T::one() - q)) / (q1 * q + q1 * q1 * (T::one() - q))
        })
        .fold(T::zero(), |a, b| a + b))
}

/// `p / 3`, the asymptotic lower bound on `Pr[N > 0]`.
pub fn near_miss_lower_bound_asymptotic<T: Real>(p: T) -> T {
    p / T::lit(3.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinomRatio<T> {
    /// `C(S,k) / C(n,k)` as an exact rational.
    pub exact: BigRational,
    /// `(S/n)^k`.
    pub asymptotic: T,
}

impl<T: Real> BinomRatio<T> {
    pub fn exact_value(&self) -> T {
        T::lit(self.exact.to_f64().unwrap_or(f64::NAN))
    }

    pub fn gap(&self) -> T {
        (self.exact_value() - self.asymptotic).abs()
    }
}

fn binomial_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    (0..k).fold(BigUint::one(), |acc, i| acc * BigUint::from(n - i) / BigUint::from(i + 1))
}

pub fn binom_ratio<T: Real>(s: usize, n: usize, k: usize) -> Result<BinomRatio<T>> {
    if s > n {
        return Err(Error::domain("S", format!("need S <= n, got S = {s}, n = {n}")));
    }
    if k > n || n == 0 {
        return Err(Error::domain("k", format!("need k <= n, got k = {k}, n = {n}")));
    }
    let exact = BigRational::new(
        BigInt::from(binomial_big(s, k)),
        BigInt::from(binomial_big(n, k)),
    );
    let asymptotic = (T::from_count(s) / T::from_count(n)).powi(k as i32);
    Ok(BinomRatio { exact, asymptotic })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeTail<T> {
    /// `r k ln d`.
    pub expected_degree: T,
    /// `(1 - delta) r k ln d`.
    pub threshold: T,
    /// Chernoff: `exp(-delta^2 / 2 * r k ln d)`.
    pub prob_bound: T,
}

pub fn degree_tail_bound<T: Real>(pt: &ModelPoint<T>, delta: T) -> Result<DegreeTail<T>> {
    pt.validate()?;
    if !(delta >= T::zero() && delta <= T::one()) {
        return Err(Error::domain("delta", format!("need 0 <= delta <= 1, got {delta}")));
    }
    let mu = pt.r * T::from_count(pt.k) * pt.d.ln();
    Ok(DegreeTail {
        expected_degree: mu,
        threshold: (T::one() - delta) * mu,
        prob_bound: (-(delta * delta) / T::lit(2.0) * mu).exp(),
    })
}

/// `n (1 - p/3)^(r k ln d / 2)`: union bound on some variable lying in no
/// self-unsatisfiable constraint.
pub fn coverage_union_bound<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    let third = (-pt.p / T::lit(3.0)).ln_1p();
    Ok((T::from_count(pt.n).ln() + T::lit(0.5) * pt.r * T::from_count(pt.k) * pt.d.ln() * third).exp())
}

/// Exponent `1 + alpha r k ln(1 - p/3) / 2` of the coverage bound written
/// as a power of `n`.
pub fn coverage_exponent<T: Real>(alpha: T, r: T, k: usize, p: T) -> T {
    T::one() + T::lit(0.5) * alpha * r * T::from_count(k) * (-p / T::lit(3.0)).ln_1p()
}

/// Union bound on new solutions after a sat-to-unsat flip, counted as two
/// new tuples, `d^(n-2)` completions each, and `m - 1` other constraints:
/// `2 d^(n-2) (1-p)^(m-1)`. Equals `(1-p)^-1 / d^2` when `E[X] = 1/2`.
pub fn flip_union_bound<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    pt.validate()?;
    let nf = T::from_count(pt.n);
    Ok((T::lit(2.0).ln() + (nf - T::lit(2.0)) * pt.d.ln() + (pt.m - T::one()) * pt.ln_one_minus_p()).exp())
}

/// `2 d (1-p) d^(n-2) (1-p)^(m-1)`, the same bound before simplification,
/// with an extra factor `d (1-p)` for the expected number of tuples of the
/// forms `(a1, *)`, `(b1, *)`.
pub fn flip_union_bound_unsimplified<T: Real>(pt: &ModelPoint<T>) -> Result<T> {
    Ok(flip_union_bound(pt)? * pt.d * (T::one() - pt.p))
}

/// Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub standard_error: f64,
    pub trials: usize,
    pub seed_base: u64,
}

impl McEstimate {
    pub fn from_samples(samples: &[f64], seed_base: u64) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::domain("trials", format!("need at least 2 samples, got {n}")));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(McEstimate {
            mean,
            standard_error: (var / n as f64).sqrt(),
            trials: n,
            seed_base,
        })
    }

    /// `|mean - target|` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.standard_error
    }

    pub fn within(&self, target: f64, standard_errors: f64) -> bool {
        (self.mean - target).abs() <= standard_errors * self.standard_error
    }
}

/// All analytic quantities at one model point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport<T> {
    pub n: usize,
    pub d: T,
    pub k: usize,
    pub m: T,
    pub p: T,
    pub r: T,
    pub r_cr: T,
    pub e_x: T,
    pub sat_upper_bound: T,
    /// `E[X^2]` under the given pair law; absent above the summation limit.
    pub e_x2: Option<T>,
    pub e_x2_independent: Option<T>,
    pub f_terms: Option<Vec<T>>,
    pub f_full_overlap: T,
    pub e_x2_factored: Option<T>,
    /// `E[X]^2 / E[X^2]`.
    pub sat_lower_bound: Option<T>,
    pub sat_lower_bound_asymptotic: T,
    pub unique_solution_lower_bound_asymptotic: T,
    pub e_n: T,
    pub near_miss_ratio: Option<T>,
    pub near_miss_lower_bound_asymptotic: T,
    pub degree: DegreeTail<T>,
    pub coverage_union_bound: T,
    pub flip_union_bound: T,
    pub flip_union_bound_unsimplified: T,
}

impl<T: Real + Serialize> MomentReport<T> {
    pub fn compute(pt: &ModelPoint<T>, law: PairLaw) -> Result<Self> {
        let small = pt.n <= SUMMATION_LIMIT;
        let e_x = expected_solutions(pt)?;
        let e_x2 = small.then(|| second_moment(pt, law)).transpose()?;
        Ok(MomentReport {
            n: pt.n,
            d: pt.d,
            k: pt.k,
            m: pt.m,
            p: pt.p,
            r: pt.r,
            r_cr: r_critical(pt.p)?,
            e_x,
            sat_upper_bound: sat_upper_bound(pt)?,
            e_x2,
            e_x2_independent: small.then(|| second_moment_independent(pt)).transpose()?,
            f_terms: small.then(|| f_terms(pt)).transpose()?,
            f_full_overlap: f_full_overlap(pt)?,
            e_x2_factored: small.then(|| second_moment_factored(pt)).transpose()?,
            sat_lower_bound: small.then(|| second_moment_ratio(pt, law)).transpose()?,
            sat_lower_bound_asymptotic: sat_lower_bound_asymptotic(),
            unique_solution_lower_bound_asymptotic: unique_solution_lower_bound_asymptotic(),
            e_n: expected_near_miss(pt)?,
            near_miss_ratio: small.then(|| near_miss_second_moment_ratio(pt)).transpose()?,
            near_miss_lower_bound_asymptotic: near_miss_lower_bound_asymptotic(pt.p),
            degree: degree_tail_bound(pt, T::lit(0.5))?,
            coverage_union_bound: coverage_union_bound(pt)?,
            flip_union_bound: flip_union_bound(pt)?,
            flip_union_bound_unsimplified: flip_union_bound_unsimplified(pt)?,
        })
    }

    /// Report for generated original-variant instances (exact pair law).
    pub fn for_params(params: &RBParams) -> Result<Self> {
        let law = PairLaw::WithoutReplacement {
            permitted: params.t(),
            space: params.tuple_space(),
        };
        Self::compute(&ModelPoint::from_params(params), law)
    }

    /// Looks a scalar field up by its serialized name.
    pub fn quantity(&self, name: &str) -> Option<serde_json::Value> {
        let value = serde_json::to_value(self).ok()?;
        let mut cur = &value;
        for part in name.split('.') {
            cur = cur.get(part)?;
        }
        Some(cur.clone())
    }
}
