//! Adversarial-order model: the hard family `I_i = (1, 2, …, i, 0, …, 0)`,
//! the randomized optimum `c_{n,α} = n^α / Σ_j j^α` with its random
//! threshold law, and the deterministic optimum `1 − (1 − 1/n)^α`.

use num::{BigInt, BigRational, One};
use rand::Rng;
use serde::Serialize;

use crate::error::{ensure_domain, Result};
use crate::numeric::{ratio_pow, rational_pow};

fn check(n: usize, alpha: f64) -> Result<()> {
    ensure_domain!(n >= 1, "horizon must be at least 1");
    ensure_domain!(
        alpha > 0.0 && alpha.is_finite(),
        "alpha must be positive, got {alpha}"
    );
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AdversarialInstance {
    values: Vec<u64>,
    i_star: usize,
}

impl AdversarialInstance {
    /// Any value vector with a unique maximum.
    pub fn new(values: Vec<u64>) -> Result<Self> {
        ensure_domain!(!values.is_empty(), "instance must be non-empty");
        let max = *values.iter().max().expect("non-empty");
        let mut at_max = values.iter().enumerate().filter(|(_, &v)| v == max);
        let (idx, _) = at_max.next().expect("non-empty");
        ensure_domain!(at_max.next().is_none(), "maximum value {max} is not unique");
        Ok(Self {
            values,
            i_star: idx + 1,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    /// 1-based arrival time of the maximum.
    pub fn i_star(&self) -> usize {
        self.i_star
    }

    /// Record indicator per time step (index `t − 1`).
    pub fn records(&self) -> Vec<bool> {
        let mut best = None;
        self.values
            .iter()
            .map(|&v| {
                let record = best.map_or(true, |b| v > b);
                if record {
                    best = Some(v);
                }
                record
            })
            .collect()
    }
}

pub fn hard_instance(n: usize, i: usize) -> Result<AdversarialInstance> {
    ensure_domain!(
        n >= 1 && (1..=n).contains(&i),
        "position {i} outside [1, {n}]"
    );
    let values = (1..=n as u64)
        .map(|t| if t as usize <= i { t } else { 0 })
        .collect();
    AdversarialInstance::new(values)
}

/// `Σ_{j=1}^r (j/r)^α` for every `r ∈ [1, n]`, via `U_{r+1} = (r/(r+1))^α U_r + 1`.
fn scaled_power_sums(n: usize, alpha: f64) -> Vec<f64> {
    let mut sums = Vec::with_capacity(n);
    let mut acc = 1.0;
    sums.push(acc);
    for r in 1..n {
        acc = ratio_pow(r as f64, (r + 1) as f64, alpha) * acc + 1.0;
        sums.push(acc);
    }
    sums
}

/// Randomized worst-case optimum `c_{n,α}`.
pub fn opt_rand(n: usize, alpha: f64) -> Result<f64> {
    check(n, alpha)?;
    Ok(1.0 / scaled_power_sums(n, alpha)[n - 1])
}

pub fn opt_rand_rational(n: usize, m: u32) -> Result<BigRational> {
    ensure_domain!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    let total: BigInt = (1..=n as u64).map(|j| rational_pow(j, m)).sum();
    Ok(BigRational::new(rational_pow(n as u64, m), total))
}

/// Deterministic worst-case optimum, achieved by `A(S)`.
pub fn opt_det(n: usize, alpha: f64) -> Result<f64> {
    check(n, alpha)?;
    Ok(one_minus_last_step(n, alpha))
}

/// `1 − (1 − 1/i)^α`.
fn one_minus_last_step(i: usize, alpha: f64) -> f64 {
    -(alpha * (-1.0 / i as f64).ln_1p()).exp_m1()
}

pub fn opt_det_rational(n: usize, m: u32) -> Result<BigRational> {
    ensure_domain!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    let nm = rational_pow(n as u64, m);
    Ok(BigRational::one() - BigRational::new(rational_pow(n as u64 - 1, m), nm))
}

/// Success of `A(S)` on `I_i`: the signal must land exactly on `i`.
pub fn det_success_on_hard(n: usize, alpha: f64, i: usize) -> Result<f64> {
    check(n, alpha)?;
    ensure_domain!((1..=n).contains(&i), "position {i} outside [1, {n}]");
    Ok(one_minus_last_step(i, alpha))
}

/// Law of the random threshold `R` in the minimax policy `A(max{R, S})`:
/// `P[R <= r] = c_{n,α} · Σ_{j<=r} j^α / r^α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandThresholdDist {
    n: usize,
    alpha: f64,
    cdf: Vec<f64>,
}

impl RandThresholdDist {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `F(r)` for `r ∈ [0, n]`, with `F(0) = 0`.
    pub fn cdf(&self, r: usize) -> f64 {
        if r == 0 {
            0.0
        } else {
            self.cdf[r - 1]
        }
    }

    pub fn pmf(&self, r: usize) -> f64 {
        self.cdf(r) - self.cdf(r - 1)
    }

    pub fn table(&self) -> &[f64] {
        &self.cdf
    }

    /// Inverse-cdf draw of `R`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = 1.0 - rng.gen::<f64>();
        self.cdf.partition_point(|&f| f < u) + 1
    }

    /// Analytic success of `A(max{R, S})` on `I_i`:
    /// `F(i) − ((i−1)/i)^α F(i−1)`.
    pub fn success_on_hard(&self, i: usize) -> Result<f64> {
        ensure_domain!(
            (1..=self.n).contains(&i),
            "position {i} outside [1, {}]",
            self.n
        );
        Ok(self.cdf(i) - ratio_pow((i - 1) as f64, i as f64, self.alpha) * self.cdf(i - 1))
    }
}

pub fn rand_threshold_dist(n: usize, alpha: f64) -> Result<RandThresholdDist> {
    check(n, alpha)?;
    let sums = scaled_power_sums(n, alpha);
    let c = 1.0 / sums[n - 1];
    let mut cdf: Vec<f64> = sums.iter().map(|u| (c * u).min(1.0)).collect();
    cdf[n - 1] = 1.0;
    Ok(RandThresholdDist { n, alpha, cdf })
}

/// Exact `F(r)` table for integer α.
pub fn rand_threshold_cdf_rational(n: usize, m: u32) -> Result<Vec<BigRational>> {
    let c = opt_rand_rational(n, m)?;
    let mut partial = BigInt::from(0);
    Ok((1..=n as u64)
        .map(|r| {
            partial += rational_pow(r, m);
            &c * BigRational::new(partial.clone(), rational_pow(r, m))
        })
        .collect())
}
