//! Executable stopping rules behind one decision interface.
//!
//! Every rule only ever stops on a record. A rule sees the current time, the
//! record flag, and the signal events observed so far. Randomized rules draw
//! their internal randomness once at the start of each trial.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::adversarial::{rand_threshold_dist, RandThresholdDist};
use crate::error::{ensure_domain, PrecursorError, Result};
use crate::full_history::{FullHistoryPolicyMap, History};
use crate::random_order::{bellman_solve, tuned_threshold};
use crate::signal::SignalEvent;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decision {
    Stop,
    Continue,
}

#[derive(Debug, Clone, Copy)]
pub struct DecisionContext<'a> {
    pub t: usize,
    pub is_record: bool,
    /// Events with a concrete time `<= t`, in arrival order.
    pub signals: &'a [SignalEvent],
    /// Horizon, when the rule is allowed to know it.
    pub n: Option<usize>,
}

impl DecisionContext<'_> {
    /// Earliest observed signal time.
    pub fn first_signal(&self) -> Option<usize> {
        self.signals.iter().filter_map(SignalEvent::time).min()
    }
}

pub trait StoppingRule: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Per-trial internal draw. Deterministic rules draw nothing.
    fn draw(&self, _rng: &mut dyn RngCore) -> Option<usize> {
        None
    }

    /// The law of the per-trial draw, when the rule is randomized.
    fn randomization(&self) -> Option<&RandThresholdDist> {
        None
    }

    fn decide(&self, ctx: &DecisionContext<'_>, draw: Option<usize>) -> Decision;
}

fn stop_if(cond: bool) -> Decision {
    if cond {
        Decision::Stop
    } else {
        Decision::Continue
    }
}

/// `⌈n/e⌉`.
pub fn classic_cutoff(n: usize) -> usize {
    ((n as f64 / std::f64::consts::E).ceil() as usize).max(1)
}

/// `A(⌈n/e⌉)`: ignore the signal, accept the first record from the cutoff on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Classic {
    cutoff: usize,
}

impl Classic {
    pub fn new(n: usize) -> Result<Self> {
        ensure_domain!(n >= 1, "horizon must be at least 1");
        Ok(Self {
            cutoff: classic_cutoff(n),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
}

impl StoppingRule for Classic {
    fn name(&self) -> &'static str {
        "classic"
    }

    fn decide(&self, ctx: &DecisionContext<'_>, _draw: Option<usize>) -> Decision {
        stop_if(ctx.is_record && ctx.t >= self.cutoff)
    }
}

/// `A(max{S, k})`. With `k = 1` this is `A(S)`, which never needs the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignalThreshold {
    k: usize,
}

impl SignalThreshold {
    pub fn new(k: usize) -> Result<Self> {
        ensure_domain!(k >= 1, "threshold must be at least 1");
        Ok(Self { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

fn gated(ctx: &DecisionContext<'_>, k: usize) -> Decision {
    match ctx.first_signal() {
        Some(s) => stop_if(ctx.is_record && ctx.t >= s.max(k)),
        None => Decision::Continue,
    }
}

impl StoppingRule for SignalThreshold {
    fn name(&self) -> &'static str {
        "signal-threshold"
    }

    fn decide(&self, ctx: &DecisionContext<'_>, _draw: Option<usize>) -> Decision {
        gated(ctx, self.k)
    }
}

/// `A(max{R, S})` with `R` drawn once per trial, independent of the signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomizedAdversarial {
    dist: RandThresholdDist,
}

impl RandomizedAdversarial {
    pub fn new(dist: RandThresholdDist) -> Self {
        Self { dist }
    }

    pub fn dist(&self) -> &RandThresholdDist {
        &self.dist
    }
}

impl StoppingRule for RandomizedAdversarial {
    fn name(&self) -> &'static str {
        "randomized-adversarial"
    }

    fn draw(&self, rng: &mut dyn RngCore) -> Option<usize> {
        Some(self.dist.sample(rng))
    }

    fn randomization(&self) -> Option<&RandThresholdDist> {
        Some(&self.dist)
    }

    fn decide(&self, ctx: &DecisionContext<'_>, draw: Option<usize>) -> Decision {
        gated(ctx, draw.unwrap_or(1))
    }
}

/// Waits for all `m` signals, then stops exactly at `τ(history)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FullHistory {
    m: u32,
    tau: Arc<FullHistoryPolicyMap>,
}

impl FullHistory {
    pub fn new(m: u32, tau: Arc<FullHistoryPolicyMap>) -> Result<Self> {
        ensure_domain!(m >= 1, "need at least one signal");
        ensure_domain!(
            tau.m().map_or(true, |k| k == m),
            "policy map is not over {m} signals"
        );
        Ok(Self { m, tau })
    }
}

impl StoppingRule for FullHistory {
    fn name(&self) -> &'static str {
        "full-history"
    }

    fn decide(&self, ctx: &DecisionContext<'_>, _draw: Option<usize>) -> Decision {
        let times: Vec<usize> = ctx.signals.iter().filter_map(SignalEvent::time).collect();
        if times.len() != self.m as usize {
            return Decision::Continue;
        }
        let h = History::from_times(&times).expect("observed times are positive");
        stop_if(self.tau.get(&h) == Some(ctx.t))
    }
}

/// Trusts a signal that arrives strictly before `⌈n/e⌉`; otherwise plays
/// the classic rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Fallback {
    cutoff: usize,
}

impl Fallback {
    pub fn new(n: usize) -> Result<Self> {
        ensure_domain!(n >= 1, "horizon must be at least 1");
        Ok(Self {
            cutoff: classic_cutoff(n),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }
}

impl StoppingRule for Fallback {
    fn name(&self) -> &'static str {
        "fallback"
    }

    fn decide(&self, ctx: &DecisionContext<'_>, _draw: Option<usize>) -> Decision {
        match ctx.first_signal() {
            Some(s) if s < self.cutoff => gated(ctx, 1),
            _ => stop_if(ctx.is_record && ctx.t >= self.cutoff),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicyKind {
    Classic(Classic),
    SignalThreshold(SignalThreshold),
    RandomizedAdversarial(RandomizedAdversarial),
    FullHistory(FullHistory),
    Fallback(Fallback),
}

impl PolicyKind {
    pub fn instantiate(self) -> Box<dyn StoppingRule> {
        match self {
            Self::Classic(p) => Box::new(p),
            Self::SignalThreshold(p) => Box::new(p),
            Self::RandomizedAdversarial(p) => Box::new(p),
            Self::FullHistory(p) => Box::new(p),
            Self::Fallback(p) => Box::new(p),
        }
    }
}

/// One trial's run of a rule. Enforces the calling protocol: times
/// `1, 2, …` in order and nothing after a stop.
pub struct PolicyState<'p> {
    rule: &'p dyn StoppingRule,
    draw: Option<usize>,
    next_t: usize,
    stopped: bool,
}

impl<'p> PolicyState<'p> {
    pub fn begin(rule: &'p dyn StoppingRule, rng: &mut dyn RngCore) -> Self {
        Self::with_draw(rule, rule.draw(rng))
    }

    pub fn with_draw(rule: &'p dyn StoppingRule, draw: Option<usize>) -> Self {
        Self {
            rule,
            draw,
            next_t: 1,
            stopped: false,
        }
    }

    pub fn draw(&self) -> Option<usize> {
        self.draw
    }

    pub fn decide(&mut self, ctx: &DecisionContext<'_>) -> Result<Decision> {
        if self.stopped {
            return Err(PrecursorError::Contract(format!(
                "decision requested at t={} after stopping",
                ctx.t
            )));
        }
        if ctx.t != self.next_t {
            return Err(PrecursorError::Contract(format!(
                "expected t={}, got t={}",
                self.next_t, ctx.t
            )));
        }
        if let Some(bad) = ctx
            .signals
            .iter()
            .find(|e| e.time().map_or(true, |s| s > ctx.t))
        {
            return Err(PrecursorError::Contract(format!(
                "signal {bad:?} not observable at t={}",
                ctx.t
            )));
        }
        self.next_t += 1;
        let decision = self.rule.decide(ctx, self.draw);
        self.stopped = decision == Decision::Stop;
        Ok(decision)
    }
}

/// Inputs a named policy may need when it is built.
#[derive(Debug, Clone, Default)]
pub struct PolicyParams {
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub alpha_hat: Option<f64>,
    pub k: Option<usize>,
    pub m: Option<u32>,
    pub tau: Option<Arc<FullHistoryPolicyMap>>,
}

impl PolicyParams {
    pub fn new(n: usize) -> Self {
        Self {
            n: Some(n),
            ..Self::default()
        }
    }

    fn require<T: Copy>(value: Option<T>, what: &str, policy: &str) -> Result<T> {
        value.ok_or_else(|| PrecursorError::Domain(format!("policy `{policy}` needs {what}")))
    }
}

type Factory = fn(&PolicyParams) -> Result<PolicyKind>;

/// Named policy constructors.
pub struct PolicyRegistry {
    factories: BTreeMap<&'static str, Factory>,
}

impl Default for PolicyRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("classic", |p| {
            Ok(PolicyKind::Classic(Classic::new(PolicyParams::require(
                p.n, "n", "classic",
            )?)?))
        });
        reg.register("signal", |_| {
            Ok(PolicyKind::SignalThreshold(SignalThreshold::new(1)?))
        });
        reg.register("signal-threshold", |p| {
            let k = PolicyParams::require(p.k, "k", "signal-threshold")?;
            Ok(PolicyKind::SignalThreshold(SignalThreshold::new(k)?))
        });
        reg.register("optimal", |p| {
            let n = PolicyParams::require(p.n, "n", "optimal")?;
            let alpha = PolicyParams::require(p.alpha, "alpha", "optimal")?;
            Ok(PolicyKind::SignalThreshold(SignalThreshold::new(
                bellman_solve(n, alpha)?.k_n,
            )?))
        });
        reg.register("tuned", |p| {
            let n = PolicyParams::require(p.n, "n", "tuned")?;
            let alpha_hat = PolicyParams::require(p.alpha_hat, "alpha_hat", "tuned")?;
            Ok(PolicyKind::SignalThreshold(SignalThreshold::new(
                tuned_threshold(n, alpha_hat)?,
            )?))
        });
        reg.register("randomized-adversarial", |p| {
            let n = PolicyParams::require(p.n, "n", "randomized-adversarial")?;
            let alpha = PolicyParams::require(p.alpha, "alpha", "randomized-adversarial")?;
            Ok(PolicyKind::RandomizedAdversarial(
                RandomizedAdversarial::new(rand_threshold_dist(n, alpha)?),
            ))
        });
        reg.register("full-history", |p| {
            let m = PolicyParams::require(p.m, "m", "full-history")?;
            let tau = p
                .tau
                .clone()
                .ok_or_else(|| PrecursorError::Domain("policy `full-history` needs tau".into()))?;
            Ok(PolicyKind::FullHistory(FullHistory::new(m, tau)?))
        });
        reg.register("fallback", |p| {
            Ok(PolicyKind::Fallback(Fallback::new(PolicyParams::require(
                p.n, "n", "fallback",
            )?)?))
        });
        reg
    }
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn kind(&self, name: &str, params: &PolicyParams) -> Result<PolicyKind> {
        let factory = self
            .factories
            .get(name)
            .ok_or_else(|| PrecursorError::Unknown {
                kind: "policy",
                name: name.to_string(),
            })?;
        factory(params)
    }

    pub fn build(&self, name: &str, params: &PolicyParams) -> Result<Box<dyn StoppingRule>> {
        Ok(self.kind(name, params)?.instantiate())
    }
}
