//! Brute-force success probabilities by complete enumeration.
//!
//! Only the record pattern of a permutation matters to a rank-based rule, so
//! each permutation is reduced to its record indicators and the position of
//! its maximum. Integer α is evaluated in exact rationals.

use num::{BigInt, BigRational, ToPrimitive, Zero};
use serde::Serialize;

use crate::adversarial::rand_threshold_cdf_rational;
use crate::error::{ensure_domain, PrecursorError, Result};
use crate::numeric::{rational_to_f64, CompensatedSum};
use crate::policy::{Decision, DecisionContext, StoppingRule};
use crate::signal::{alpha_power_pmf, alpha_power_pmf_exact, SignalEvent};

pub const RANDOM_ORDER_MAX_N: usize = 8;
pub const ADVERSARIAL_MAX_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ExactValue {
    Rational(#[serde(serialize_with = "serialize_rational")] BigRational),
    Float(f64),
}

fn serialize_rational<S: serde::Serializer>(
    r: &BigRational,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

impl ExactValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            Self::Rational(r) => rational_to_f64(r),
            Self::Float(x) => *x,
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Self::Rational(r) => Some(r),
            Self::Float(_) => None,
        }
    }
}

fn integer_alpha(alpha: f64) -> Option<u32> {
    (alpha.fract() == 0.0 && (1.0..=64.0).contains(&alpha)).then(|| alpha as u32)
}

/// Time at which `rule` stops on the given record pattern and signal, if any.
fn stopping_time(
    rule: &dyn StoppingRule,
    records: &[bool],
    signal: usize,
    n: usize,
    draw: Option<usize>,
) -> Option<usize> {
    let event = [SignalEvent::clean(signal)];
    (1..=records.len()).find(|&t| {
        let seen = if t >= signal { &event[..] } else { &[] };
        let ctx = DecisionContext {
            t,
            is_record: records[t - 1],
            signals: seen,
            n: Some(n),
        };
        rule.decide(&ctx, draw) == Decision::Stop
    })
}

/// Lexicographic successor; false once the last permutation is reached.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len())
        .rev()
        .find(|&j| p[j] > p[i - 1])
        .expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Exact success of a deterministic rule in the random-order model with an
/// α-power signal, by enumerating all `n!` orders and all signal times.
pub fn exact_success_random_order(
    n: usize,
    alpha: f64,
    rule: &dyn StoppingRule,
) -> Result<ExactValue> {
    ensure_domain!(n >= 1, "horizon must be at least 1");
    ensure_domain!(
        alpha > 0.0 && alpha.is_finite(),
        "alpha must be positive, got {alpha}"
    );
    if n > RANDOM_ORDER_MAX_N {
        return Err(PrecursorError::Size(format!(
            "random-order oracle limited to n <= {RANDOM_ORDER_MAX_N}"
        )));
    }
    ensure_domain!(
        rule.randomization().is_none(),
        "random-order oracle needs a deterministic rule"
    );

    // wins[i-1][s-1]: orders with best at i on which the rule stops at i given signal s.
    let mut wins = vec![vec![0u64; n]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let mut records = vec![false; n];
    let mut total = 0u64;
    loop {
        total += 1;
        let mut best = None;
        for (t, &v) in perm.iter().enumerate() {
            records[t] = best.map_or(true, |b| v > b);
            if records[t] {
                best = Some(v);
            }
        }
        let i_star = perm.iter().position(|&v| v == n - 1).expect("max present") + 1;
        for s in 1..=i_star {
            if stopping_time(rule, &records, s, n, None) == Some(i_star) {
                wins[i_star - 1][s - 1] += 1;
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }

    if let Some(m) = integer_alpha(alpha) {
        let mut acc = BigRational::zero();
        for (i, row) in wins.iter().enumerate() {
            for (s, &w) in row.iter().enumerate().filter(|(_, &w)| w > 0) {
                acc += alpha_power_pmf_exact(s + 1, i + 1, m)? * BigInt::from(w);
            }
        }
        return Ok(ExactValue::Rational(acc / BigInt::from(total)));
    }
    let mut acc = CompensatedSum::new();
    for (i, row) in wins.iter().enumerate() {
        for (s, &w) in row.iter().enumerate().filter(|(_, &w)| w > 0) {
            acc.add(alpha_power_pmf(s + 1, i + 1, alpha)? * w as f64);
        }
    }
    Ok(ExactValue::Float(acc.value() / total as f64))
}

/// Exact success on the hard instance `I_{i*}` by summing over signal times,
/// and over the threshold draw for the randomized minimax rule.
pub fn exact_success_adversarial(
    n: usize,
    alpha: f64,
    i_star: usize,
    rule: &dyn StoppingRule,
) -> Result<ExactValue> {
    ensure_domain!(
        alpha > 0.0 && alpha.is_finite(),
        "alpha must be positive, got {alpha}"
    );
    ensure_domain!((1..=n).contains(&i_star), "i* = {i_star} outside [1, {n}]");
    if n > ADVERSARIAL_MAX_N {
        return Err(PrecursorError::Size(format!(
            "adversarial oracle limited to n <= {ADVERSARIAL_MAX_N}"
        )));
    }
    let records: Vec<bool> = (1..=n).map(|t| t <= i_star).collect();
    let wins =
        |s: usize, draw: Option<usize>| stopping_time(rule, &records, s, n, draw) == Some(i_star);

    let exact_m = integer_alpha(alpha);
    let draws: Vec<(Option<usize>, BigRational, f64)> = match rule.randomization() {
        None => vec![(None, BigRational::from_integer(1.into()), 1.0)],
        Some(dist) => {
            ensure_domain!(
                dist.n() == n && dist.alpha() == alpha,
                "threshold law built for another instance"
            );
            let exact_cdf = match exact_m {
                Some(m) => rand_threshold_cdf_rational(n, m)?,
                None => Vec::new(),
            };
            (1..=n)
                .map(|r| {
                    let q = match exact_m {
                        Some(_) if r == 1 => exact_cdf[0].clone(),
                        Some(_) => &exact_cdf[r - 1] - &exact_cdf[r - 2],
                        None => BigRational::zero(),
                    };
                    (Some(r), q, dist.pmf(r))
                })
                .collect()
        }
    };

    if let Some(m) = exact_m {
        let mut acc = BigRational::zero();
        for (draw, q, _) in &draws {
            for s in 1..=i_star {
                if wins(s, *draw) {
                    acc += alpha_power_pmf_exact(s, i_star, m)? * q;
                }
            }
        }
        return Ok(ExactValue::Rational(acc));
    }
    let mut acc = CompensatedSum::new();
    for (draw, _, q) in &draws {
        for s in 1..=i_star {
            if wins(s, *draw) {
                acc.add(alpha_power_pmf(s, i_star, alpha)? * q);
            }
        }
    }
    Ok(ExactValue::Float(acc.value()))
}

/// Rational value as `f64` when it is small enough to print directly.
pub fn exact_to_f64(v: &BigRational) -> f64 {
    match (v.numer().to_f64(), v.denom().to_f64()) {
        (Some(a), Some(b)) if b.is_finite() && a.is_finite() => a / b,
        _ => rational_to_f64(v),
    }
}
