//! Random-order model: success of `A(max{S, k})`, the backward-induction
//! solve for the optimal cutoff, and the asymptotic and misspecification
//! formulas.

use num::{BigInt, BigRational, One, Zero};
use serde::Serialize;

use crate::error::{ensure_domain, Result};
use crate::numeric::{pow, ratio_pow, rational_pow, CompensatedSum};

fn check_alpha(alpha: f64) -> Result<()> {
    ensure_domain!(
        alpha > 0.0 && alpha.is_finite(),
        "alpha must be positive, got {alpha}"
    );
    Ok(())
}

/// Success probability `p_{n,α}(k)` of `A(max{S, k})` in random order.
///
/// Conditioned on the best item at `i >= max(k, 2)` the policy wins with
/// probability `1 − Σ_{r=k}^{i−1} r^α / ((i−1) i^α)`; for `k = 1` the item
/// at `i = 1` is always won. The inner sum is carried as
/// `T_i = Σ_{r=k}^{i−1} (r/i)^α`, updated by `T_{i+1} = (i/(i+1))^α (T_i + 1)`,
/// which stays bounded for any α.
pub fn threshold_success_exact(n: usize, alpha: f64, k: usize) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_domain!(n >= 1, "horizon must be at least 1");
    ensure_domain!((1..=n).contains(&k), "threshold {k} outside [1, {n}]");
    if n == 1 {
        return Ok(1.0);
    }
    let mut total = CompensatedSum::new();
    let start = k.max(2);
    let mut tail = if k == 1 {
        total.add(1.0);
        ratio_pow(1.0, 2.0, alpha)
    } else {
        0.0
    };
    for i in start..=n {
        total.add(1.0 - tail / (i - 1) as f64);
        tail = ratio_pow(i as f64, (i + 1) as f64, alpha) * (tail + 1.0);
    }
    Ok(total.value() / n as f64)
}

/// Same quantity in exact rational arithmetic, for integer α = `m`.
pub fn threshold_success_rational(n: usize, m: u32, k: usize) -> Result<BigRational> {
    ensure_domain!(m >= 1, "alpha must be positive");
    ensure_domain!(n >= 1, "horizon must be at least 1");
    ensure_domain!((1..=n).contains(&k), "threshold {k} outside [1, {n}]");
    let mut total = if k == 1 {
        BigRational::one()
    } else {
        BigRational::zero()
    };
    let start = k.max(2);
    let mut power_sum: BigInt = (k..start).map(|r| rational_pow(r as u64, m)).sum();
    for i in start..=n {
        let den = BigInt::from(i as u64 - 1) * rational_pow(i as u64, m);
        total += BigRational::one() - BigRational::new(power_sum.clone(), den);
        power_sum += rational_pow(i as u64, m);
    }
    Ok(total / BigRational::from_integer(BigInt::from(n as u64)))
}

/// Solution of the backward induction over post-signal record states.
///
/// `phi[t-1]` is the unnormalised value `Φ_t = Ψ_t Π_t`, `psi[t-1]` the
/// normaliser `Ψ_t = t^{1−α} + Σ_{i>t} i^{−α}` and `merit[t-1]` the one-step
/// look-ahead `G_t = t^{1−α} − t Σ_{u>t} 1/((u−1) u^α)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellmanSolution {
    pub n: usize,
    pub alpha: f64,
    /// Optimal deterministic cutoff: the smallest `t` with `G_t >= 0`.
    pub k_n: usize,
    /// `OPT_n(α)`, the success probability of `A(max{S, k_n})`.
    pub opt_n: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub merit: Vec<f64>,
}

impl BellmanSolution {
    pub fn phi(&self, t: usize) -> f64 {
        self.phi[t - 1]
    }

    pub fn psi(&self, t: usize) -> f64 {
        self.psi[t - 1]
    }

    /// `Π_t`, the optimal success probability from a post-signal record at `t`.
    pub fn pi(&self, t: usize) -> f64 {
        self.phi[t - 1] / self.psi[t - 1]
    }

    pub fn merit(&self, t: usize) -> f64 {
        self.merit[t - 1]
    }
}

/// Solves `Φ_n = n^{1−α}`, `Φ_t = max{t^{1−α}, Σ_{u>t} t/(u(u−1)) Φ_u}` in
/// O(n) with suffix accumulators.
pub fn bellman_solve(n: usize, alpha: f64) -> Result<BellmanSolution> {
    check_alpha(alpha)?;
    ensure_domain!(n >= 1, "horizon must be at least 1");
    let mut phi = vec![0.0; n];
    let mut psi = vec![0.0; n];
    let mut merit = vec![0.0; n];
    // Suffix sums over u > t of Φ_u/(u(u−1)), 1/((u−1)u^α) and u^{−α}.
    let mut continuation = CompensatedSum::new();
    let mut look_ahead = CompensatedSum::new();
    let mut tail_mass = CompensatedSum::new();
    for t in (1..=n).rev() {
        let tf = t as f64;
        let stop = pow(tf, 1.0 - alpha);
        let value = if t == n {
            stop
        } else {
            stop.max(tf * continuation.value())
        };
        phi[t - 1] = value;
        psi[t - 1] = stop + tail_mass.value();
        merit[t - 1] = stop - tf * look_ahead.value();
        if t >= 2 {
            continuation.add(value / (tf * (tf - 1.0)));
            look_ahead.add(1.0 / ((tf - 1.0) * pow(tf, alpha)));
        }
        tail_mass.add(pow(tf, -alpha));
    }
    let k_n = merit
        .iter()
        .position(|&g| g >= 0.0)
        .map_or(n, |idx| idx + 1);
    let opt_n = threshold_success_exact(n, alpha, k_n)?;
    Ok(BellmanSolution {
        n,
        alpha,
        k_n,
        opt_n,
        phi,
        psi,
        merit,
    })
}

/// Naive O(n²) evaluation of the recursion, used to certify [`bellman_solve`].
pub fn bellman_phi_naive(n: usize, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    ensure_domain!(n >= 1, "horizon must be at least 1");
    let mut phi = vec![0.0; n];
    for t in (1..=n).rev() {
        let stop = pow(t as f64, 1.0 - alpha);
        let cont: f64 = (t + 1..=n)
            .map(|u| t as f64 / (u as f64 * (u as f64 - 1.0)) * phi[u - 1])
            .sum();
        phi[t - 1] = if t == n { stop } else { stop.max(cont) };
    }
    Ok(phi)
}

/// `OPT(α) = lim OPT_n(α)`.
pub fn opt_asymptotic(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(if alpha < 1.0 {
        let tail = ((1.0 + 1.0 / alpha) * (-alpha).ln_1p()).exp();
        (alpha + tail) / (alpha + 1.0)
    } else {
        alpha / (alpha + 1.0)
    })
}

/// `f(α, β)`: asymptotic success of `A(max{S, ⌈βn⌉})` under true parameter α.
pub fn f_beta(alpha: f64, beta: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_domain!((0.0..=1.0).contains(&beta), "beta {beta} outside [0,1]");
    Ok(alpha / (alpha + 1.0) + (1.0 - alpha) / alpha * beta
        - pow(beta, alpha + 1.0) / (alpha * (alpha + 1.0)))
}

/// Maximiser of `f(α̂, ·)` over `[0, 1]`.
pub fn beta_star(alpha_hat: f64) -> Result<f64> {
    check_alpha(alpha_hat)?;
    Ok(if alpha_hat < 1.0 {
        ((-alpha_hat).ln_1p() / alpha_hat).exp()
    } else {
        0.0
    })
}

/// Asymptotic guarantee `g(α, α̂)` of the threshold tuned to an estimate α̂.
pub fn robustness_g(alpha: f64, alpha_hat: f64) -> Result<f64> {
    check_alpha(alpha)?;
    check_alpha(alpha_hat)?;
    let base = alpha / (alpha + 1.0);
    if alpha_hat >= 1.0 {
        return Ok(base);
    }
    let log_gap = (-alpha_hat).ln_1p();
    let beta = (log_gap / alpha_hat).exp();
    let beta_tail = ((alpha + 1.0) / alpha_hat * log_gap).exp();
    Ok(base + (1.0 - alpha) / alpha * beta - beta_tail / (alpha * (alpha + 1.0)))
}

/// Cutoff `max{1, ⌈β* (α̂) n⌉}` for a policy tuned to α̂.
pub fn tuned_threshold(n: usize, alpha_hat: f64) -> Result<usize> {
    ensure_domain!(n >= 1, "horizon must be at least 1");
    let beta = beta_star(alpha_hat)?;
    Ok(((beta * n as f64).ceil() as usize).clamp(1, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessInputs {
    alpha: f64,
    alpha_hat: f64,
    beta: f64,
}

impl RobustnessInputs {
    /// Inputs for a policy tuned to `alpha_hat`, i.e. with `β = β*(α̂)`.
    pub fn tuned(alpha: f64, alpha_hat: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let beta = beta_star(alpha_hat)?;
        Ok(Self {
            alpha,
            alpha_hat,
            beta,
        })
    }

    pub fn new(alpha: f64, alpha_hat: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_alpha(alpha_hat)?;
        ensure_domain!((0.0..=1.0).contains(&beta), "beta {beta} outside [0,1]");
        Ok(Self {
            alpha,
            alpha_hat,
            beta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn alpha_hat(&self) -> f64 {
        self.alpha_hat
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `f(α, β)` at the stored threshold fraction.
    pub fn threshold_value(&self) -> f64 {
        f_beta(self.alpha, self.beta).expect("validated on construction")
    }

    /// `g(α, α̂)`.
    pub fn guarantee(&self) -> f64 {
        robustness_g(self.alpha, self.alpha_hat).expect("validated on construction")
    }
}
