//! The α-power precursor distribution, multi-uniform signals, and the
//! corruption wrapper used by the noisy-signal experiments.
//!
//! Conditioned on the best item arriving at time `i`, a single α-power signal
//! lands at `s ∈ [i]` with probability `(s^α − (s−1)^α) / i^α`, i.e. the
//! cdf is `(s/i)^α`. For integer `α = m` this is the law of the maximum of
//! `m` independent uniform signals on `[i]`.

use num::BigRational;
use rand::Rng;
use serde::Serialize;

use crate::error::{ensure_domain, Result};
use crate::numeric::{ratio_pow, rational_pow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignalMode {
    SinglePower,
    MultiUniform { m: u32 },
}

/// Which corruption outcomes are possible once a signal is corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CorruptionMix {
    /// Missed, false alarm and late, each with probability 1/3.
    Uniform,
    /// Always the given kind. Used to isolate one failure mode.
    Only(SignalKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorruptionSpec {
    rho: f64,
    mix: CorruptionMix,
}

impl CorruptionSpec {
    pub fn new(rho: f64) -> Result<Self> {
        ensure_domain!(
            (0.0..=1.0).contains(&rho),
            "corruption probability {rho} outside [0,1]"
        );
        Ok(Self {
            rho,
            mix: CorruptionMix::Uniform,
        })
    }

    pub fn only(rho: f64, kind: SignalKind) -> Result<Self> {
        ensure_domain!(
            kind != SignalKind::Clean,
            "clean is not a corruption outcome"
        );
        let mut spec = Self::new(rho)?;
        spec.mix = CorruptionMix::Only(kind);
        Ok(spec)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mix(&self) -> CorruptionMix {
        self.mix
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalSpec {
    alpha: f64,
    mode: SignalMode,
    corruption: Option<CorruptionSpec>,
}

impl SignalSpec {
    /// A single α-power signal.
    pub fn power(alpha: f64) -> Result<Self> {
        ensure_domain!(
            alpha > 0.0 && alpha.is_finite(),
            "alpha must be positive, got {alpha}"
        );
        Ok(Self {
            alpha,
            mode: SignalMode::SinglePower,
            corruption: None,
        })
    }

    /// `m` independent uniform signals; the last of them is an α-power signal with α = m.
    pub fn multi_uniform(m: u32) -> Result<Self> {
        ensure_domain!(m >= 1, "need at least one signal");
        Ok(Self {
            alpha: m as f64,
            mode: SignalMode::MultiUniform { m },
            corruption: None,
        })
    }

    pub fn with_corruption(mut self, corruption: CorruptionSpec) -> Result<Self> {
        ensure_domain!(
            self.mode == SignalMode::SinglePower,
            "corruption is only defined for a single signal"
        );
        self.corruption = Some(corruption);
        Ok(self)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> SignalMode {
        self.mode
    }

    pub fn corruption(&self) -> Option<CorruptionSpec> {
        self.corruption
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum SignalKind {
    Clean,
    FalseAlarm,
    Late,
    Missed,
}

/// One observed (or missed) signal. `time` is `None` exactly for missed signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignalEvent {
    time: Option<usize>,
    kind: SignalKind,
}

impl SignalEvent {
    pub fn clean(time: usize) -> Self {
        Self {
            time: Some(time),
            kind: SignalKind::Clean,
        }
    }

    pub fn missed() -> Self {
        Self {
            time: None,
            kind: SignalKind::Missed,
        }
    }

    pub fn new(time: Option<usize>, kind: SignalKind) -> Result<Self> {
        ensure_domain!(
            (kind == SignalKind::Missed) == time.is_none(),
            "a signal has no time iff it was missed"
        );
        Ok(Self { time, kind })
    }

    pub fn time(&self) -> Option<usize> {
        self.time
    }

    pub fn kind(&self) -> SignalKind {
        self.kind
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure_domain!(
        alpha > 0.0 && alpha.is_finite(),
        "alpha must be positive, got {alpha}"
    );
    Ok(())
}

/// `P[S = s | I = i]` for an α-power signal.
pub fn alpha_power_pmf(s: usize, i: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_domain!(
        i >= 1 && (1..=i).contains(&s),
        "signal time {s} outside [1, {i}]"
    );
    Ok(ratio_pow(s as f64, i as f64, alpha) - ratio_pow((s - 1) as f64, i as f64, alpha))
}

/// `P[S <= s | I = i] = (s/i)^α`.
pub fn alpha_power_cdf(s: usize, i: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    ensure_domain!(i >= 1 && s <= i, "signal time {s} outside [0, {i}]");
    Ok(ratio_pow(s as f64, i as f64, alpha))
}

/// Exact pmf for integer α: `(s^m − (s−1)^m) / i^m`.
pub fn alpha_power_pmf_exact(s: usize, i: usize, m: u32) -> Result<BigRational> {
    ensure_domain!(m >= 1, "alpha must be positive");
    ensure_domain!(
        i >= 1 && (1..=i).contains(&s),
        "signal time {s} outside [1, {i}]"
    );
    let num = rational_pow(s as u64, m) - rational_pow(s as u64 - 1, m);
    Ok(BigRational::new(num, rational_pow(i as u64, m)))
}

/// Inverse-cdf draw from the α-power law on `[i]`: the smallest `s` with
/// `(s/i)^α >= u` for `u` uniform on `(0, 1]`.
pub fn sample_alpha_power<R: Rng + ?Sized>(i: usize, alpha: f64, rng: &mut R) -> usize {
    debug_assert!(i >= 1);
    let u = 1.0 - rng.gen::<f64>();
    let (mut lo, mut hi) = (1usize, i);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if ratio_pow(mid as f64, i as f64, alpha) >= u {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// `m` independent uniform draws on `[i]`, sorted ascending.
pub fn sample_multi_uniform<R: Rng + ?Sized>(i: usize, m: u32, rng: &mut R) -> Vec<usize> {
    let mut times: Vec<usize> = (0..m).map(|_| rng.gen_range(1..=i)).collect();
    times.sort_unstable();
    times
}

/// Clean signal time(s) for a best item at `i`: one time in single-power
/// mode, `m` sorted times in multi-uniform mode.
pub fn sample_signal<R: Rng + ?Sized>(
    i: usize,
    spec: &SignalSpec,
    rng: &mut R,
) -> Result<Vec<usize>> {
    ensure_domain!(i >= 1, "best item position must be at least 1");
    Ok(match spec.mode {
        SignalMode::SinglePower => vec![sample_alpha_power(i, spec.alpha, rng)],
        SignalMode::MultiUniform { m } => sample_multi_uniform(i, m, rng),
    })
}

/// Passes a clean signal through the corruption channel.
///
/// A late signal needs a time strictly after `i_star`; when `i_star = n`
/// none exists and the signal is reported as missed.
pub fn corrupt_signal<R: Rng + ?Sized>(
    clean_s: usize,
    i_star: usize,
    n: usize,
    spec: &CorruptionSpec,
    rng: &mut R,
) -> Result<SignalEvent> {
    ensure_domain!(
        1 <= clean_s && clean_s <= i_star && i_star <= n,
        "need 1 <= s <= i* <= n, got s={clean_s}, i*={i_star}, n={n}"
    );
    if rng.gen::<f64>() >= spec.rho {
        return Ok(SignalEvent::clean(clean_s));
    }
    let kind = match spec.mix {
        CorruptionMix::Only(kind) => kind,
        CorruptionMix::Uniform => match rng.gen_range(0..3) {
            0 => SignalKind::Missed,
            1 => SignalKind::FalseAlarm,
            _ => SignalKind::Late,
        },
    };
    Ok(match kind {
        SignalKind::Missed | SignalKind::Clean => SignalEvent::missed(),
        SignalKind::FalseAlarm => SignalEvent {
            time: Some(rng.gen_range(1..=n)),
            kind,
        },
        SignalKind::Late if i_star < n => SignalEvent {
            time: Some(rng.gen_range(i_star + 1..=n)),
            kind,
        },
        SignalKind::Late => SignalEvent::missed(),
    })
}
