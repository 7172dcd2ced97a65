//! Seeded, order-independent simulation.
//!
//! Trial `j` of a run with seed `s` draws everything from its own ChaCha
//! stream `(s, j)`, and per-trial outcomes are summed as integers, so results
//! do not depend on the number of worker threads or their scheduling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure_domain, PrecursorError, Result};
use crate::policy::{
    classic_cutoff, Classic, Decision, DecisionContext, Fallback, PolicyState, SignalThreshold,
    StoppingRule,
};
use crate::random_order::tuned_threshold;
use crate::signal::{
    corrupt_signal, sample_signal, CorruptionMix, CorruptionSpec, SignalEvent, SignalSpec,
};

pub const THREADS_ENV: &str = "PRECURSOR_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub estimate: f64,
    pub trials: u64,
    pub ci_radius: f64,
    pub exact_reference: Option<f64>,
    pub seed: u64,
    pub metadata: BTreeMap<String, String>,
}

impl ExperimentReport {
    pub fn from_counts(successes: u64, trials: u64, seed: u64) -> Self {
        let p = successes as f64 / trials as f64;
        Self {
            estimate: p,
            trials,
            ci_radius: 1.96 * (p * (1.0 - p) / trials as f64).sqrt(),
            exact_reference: None,
            seed,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_exact(mut self, exact: f64) -> Self {
        self.exact_reference = Some(exact);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }
}

/// The RNG for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One sampled trial: the record pattern up to the best item, its position,
/// and the timed signal events sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub records: Vec<bool>,
    pub i_star: usize,
    pub events: Vec<SignalEvent>,
}

impl Trial {
    pub fn first_signal(&self) -> Option<usize> {
        self.events.first().and_then(SignalEvent::time)
    }
}

fn signal_events(
    i_star: usize,
    n: usize,
    spec: &SignalSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<SignalEvent>> {
    let clean = sample_signal(i_star, spec, rng)?;
    let mut events = match spec.corruption() {
        None => clean.into_iter().map(SignalEvent::clean).collect(),
        Some(c) => clean
            .into_iter()
            .map(|s| corrupt_signal(s, i_star, n, &c, rng))
            .collect::<Result<Vec<_>>>()?,
    };
    events.retain(|e| e.time().is_some());
    events.sort_by_key(|e| e.time());
    Ok(events)
}

/// Uniformly random arrival order of `n` distinct ranks.
pub fn sample_random_order_trial(
    n: usize,
    spec: &SignalSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Trial> {
    let mut ranks: Vec<u32> = (0..n as u32).collect();
    ranks.shuffle(rng);
    let mut best = None;
    let mut records = Vec::with_capacity(n);
    for &v in &ranks {
        let rec = best.map_or(true, |b| v > b);
        if rec {
            best = Some(v);
        }
        records.push(rec);
    }
    let i_star = ranks
        .iter()
        .position(|&v| v as usize == n - 1)
        .expect("max present")
        + 1;
    records.truncate(i_star);
    let events = signal_events(i_star, n, spec, rng)?;
    Ok(Trial {
        records,
        i_star,
        events,
    })
}

/// The hard instance `I_{i*}`: every item up to `i*` is a record.
pub fn sample_adversarial_trial(
    n: usize,
    i_star: usize,
    spec: &SignalSpec,
    rng: &mut ChaCha8Rng,
) -> Result<Trial> {
    let events = signal_events(i_star, n, spec, rng)?;
    Ok(Trial {
        records: vec![true; i_star],
        i_star,
        events,
    })
}

/// Runs one rule on a trial; true iff it stops exactly at the best item.
/// Stopping later cannot succeed, so the walk ends at `i*`.
pub fn play(
    rule: &dyn StoppingRule,
    trial: &Trial,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let mut state = PolicyState::begin(rule, rng);
    let mut seen = 0;
    for t in 1..=trial.i_star {
        while seen < trial.events.len() && trial.events[seen].time().is_some_and(|s| s <= t) {
            seen += 1;
        }
        let ctx = DecisionContext {
            t,
            is_record: trial.records[t - 1],
            signals: &trial.events[..seen],
            n: Some(n),
        };
        if state.decide(&ctx)? == Decision::Stop {
            return Ok(t == trial.i_star);
        }
    }
    Ok(false)
}

/// Success counts of several rules on one shared batch, with discordance
/// against the first rule for paired comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedBatch {
    pub trials: u64,
    pub seed: u64,
    pub successes: Vec<u64>,
    /// Trials where rule `j` wins and the baseline loses.
    pub gained: Vec<u64>,
    /// Trials where the baseline wins and rule `j` loses.
    pub lost: Vec<u64>,
}

impl PairedBatch {
    fn from_counts(counts: &[u64], rules: usize, trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            successes: counts[..rules].to_vec(),
            gained: counts[rules..2 * rules].to_vec(),
            lost: counts[2 * rules..].to_vec(),
        }
    }

    pub fn report(&self, j: usize) -> ExperimentReport {
        ExperimentReport::from_counts(self.successes[j], self.trials, self.seed)
    }

    pub fn estimate(&self, j: usize) -> f64 {
        self.successes[j] as f64 / self.trials as f64
    }

    /// Mean paired difference against the baseline.
    pub fn gain(&self, j: usize) -> f64 {
        (self.gained[j] as f64 - self.lost[j] as f64) / self.trials as f64
    }

    /// Standard error of the mean paired difference.
    pub fn paired_se(&self, j: usize) -> f64 {
        let t = self.trials as f64;
        if self.trials < 2 {
            return 0.0;
        }
        let sum = self.gained[j] as f64 - self.lost[j] as f64;
        let sum_sq = (self.gained[j] + self.lost[j]) as f64;
        let var = ((sum_sq - sum * sum / t) / (t - 1.0)).max(0.0);
        (var / t).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisspecCell {
    pub alpha: f64,
    pub alpha_hat: f64,
    pub threshold: usize,
    pub report: ExperimentReport,
    pub classic_estimate: f64,
    pub gain: f64,
    pub paired_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorruptionCell {
    pub rho: f64,
    pub signal: ExperimentReport,
    pub classic: ExperimentReport,
    pub fallback: ExperimentReport,
    pub paired: PairedBatch,
    /// Trials without any signal strictly before the classic cutoff.
    pub no_early_trials: u64,
    pub classic_no_early_successes: u64,
    pub fallback_no_early_successes: u64,
}

/// Worker configuration for simulations. Zero threads means one per core.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MonteCarlo {
    threads: usize,
}

impl MonteCarlo {
    pub fn new(threads: usize) -> Self {
        Self { threads }
    }

    /// Reads the worker count from `PRECURSOR_THREADS`.
    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Err(_) => Ok(Self::default()),
            Ok(v) => v.trim().parse().map(Self::new).map_err(|_| {
                PrecursorError::Domain(format!(
                    "{THREADS_ENV} must be a non-negative integer, got `{v}`"
                ))
            }),
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Sums per-trial integer counters of width `width`.
    pub fn accumulate<F>(&self, trials: u64, width: usize, per_trial: F) -> Result<Vec<u64>>
    where
        F: Fn(u64, &mut [u64]) -> Result<()> + Sync,
    {
        ensure_domain!(trials >= 1, "need at least one trial");
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| PrecursorError::Domain(format!("cannot start worker pool: {e}")))?;
        pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut counts = vec![0u64; width];
                    per_trial(trial, &mut counts)?;
                    Ok(counts)
                })
                .try_reduce(
                    || vec![0u64; width],
                    |mut a, b| {
                        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                        Ok(a)
                    },
                )
        })
    }

    fn paired<S>(
        &self,
        rules: &[&dyn StoppingRule],
        n: usize,
        trials: u64,
        seed: u64,
        sample: S,
    ) -> Result<PairedBatch>
    where
        S: Fn(&mut ChaCha8Rng) -> Result<Trial> + Sync,
    {
        ensure_domain!(!rules.is_empty(), "need at least one rule");
        let k = rules.len();
        let counts = self.accumulate(trials, 3 * k, |trial, counts| {
            let mut rng = trial_rng(seed, trial);
            let sampled = sample(&mut rng)?;
            let mut base = false;
            for (j, rule) in rules.iter().enumerate() {
                let win = play(*rule, &sampled, n, &mut rng)?;
                if j == 0 {
                    base = win;
                }
                counts[j] += u64::from(win);
                counts[k + j] += u64::from(win && !base);
                counts[2 * k + j] += u64::from(base && !win);
            }
            Ok(())
        })?;
        Ok(PairedBatch::from_counts(&counts, k, trials, seed))
    }

    /// Several rules on one shared random-order batch; the first rule is the
    /// baseline of the paired statistics.
    pub fn run_random_order_paired(
        &self,
        n: usize,
        spec: &SignalSpec,
        rules: &[&dyn StoppingRule],
        trials: u64,
        seed: u64,
    ) -> Result<PairedBatch> {
        ensure_domain!(n >= 1, "horizon must be at least 1");
        self.paired(rules, n, trials, seed, |rng| {
            sample_random_order_trial(n, spec, rng)
        })
    }

    pub fn run_random_order(
        &self,
        n: usize,
        spec: &SignalSpec,
        rule: &dyn StoppingRule,
        trials: u64,
        seed: u64,
    ) -> Result<ExperimentReport> {
        let batch = self.run_random_order_paired(n, spec, &[rule], trials, seed)?;
        Ok(batch
            .report(0)
            .with_meta("model", "random-order")
            .with_meta("n", n)
            .with_meta("alpha", spec.alpha())
            .with_meta("policy", rule.name()))
    }

    pub fn run_adversarial_paired(
        &self,
        n: usize,
        spec: &SignalSpec,
        i_star: usize,
        rules: &[&dyn StoppingRule],
        trials: u64,
        seed: u64,
    ) -> Result<PairedBatch> {
        ensure_domain!((1..=n).contains(&i_star), "i* = {i_star} outside [1, {n}]");
        self.paired(rules, n, trials, seed, |rng| {
            sample_adversarial_trial(n, i_star, spec, rng)
        })
    }

    pub fn run_adversarial(
        &self,
        n: usize,
        spec: &SignalSpec,
        i_star: usize,
        rule: &dyn StoppingRule,
        trials: u64,
        seed: u64,
    ) -> Result<ExperimentReport> {
        let batch = self.run_adversarial_paired(n, spec, i_star, &[rule], trials, seed)?;
        Ok(batch
            .report(0)
            .with_meta("model", "adversarial")
            .with_meta("n", n)
            .with_meta("alpha", spec.alpha())
            .with_meta("i_star", i_star)
            .with_meta("policy", rule.name()))
    }

    /// Every `α̂`-tuned rule against the classic rule, paired on one batch
    /// per true `α`.
    pub fn run_misspecification_grid(
        &self,
        n: usize,
        alphas: &[f64],
        alpha_hats: &[f64],
        trials: u64,
        seed: u64,
    ) -> Result<Vec<MisspecCell>> {
        ensure_domain!(
            !alphas.is_empty() && !alpha_hats.is_empty(),
            "grids must be nonempty"
        );
        let thresholds: Vec<usize> = alpha_hats
            .iter()
            .map(|&a| tuned_threshold(n, a))
            .collect::<Result<_>>()?;
        let mut distinct = thresholds.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let classic = Classic::new(n)?;
        let tuned: Vec<SignalThreshold> = distinct
            .iter()
            .map(|&k| SignalThreshold::new(k))
            .collect::<Result<_>>()?;
        let mut rules: Vec<&dyn StoppingRule> = vec![&classic];
        rules.extend(tuned.iter().map(|r| r as &dyn StoppingRule));

        let mut cells = Vec::new();
        for &alpha in alphas {
            let spec = SignalSpec::power(alpha)?;
            let batch = self.run_random_order_paired(n, &spec, &rules, trials, seed)?;
            for (&alpha_hat, &k) in alpha_hats.iter().zip(&thresholds) {
                let j = 1 + distinct.binary_search(&k).expect("threshold present");
                cells.push(MisspecCell {
                    alpha,
                    alpha_hat,
                    threshold: k,
                    report: batch
                        .report(j)
                        .with_meta("alpha", alpha)
                        .with_meta("alpha_hat", alpha_hat)
                        .with_meta("threshold", k),
                    classic_estimate: batch.estimate(0),
                    gain: batch.gain(j),
                    paired_se: batch.paired_se(j),
                });
            }
        }
        Ok(cells)
    }

    /// `A(S)`, the classic rule and the fallback rule on one corrupted batch
    /// per corruption level.
    pub fn run_corruption_sweep(
        &self,
        n: usize,
        alpha: f64,
        rhos: &[f64],
        mix: CorruptionMix,
        trials: u64,
        seed: u64,
    ) -> Result<Vec<CorruptionCell>> {
        ensure_domain!(n >= 1, "horizon must be at least 1");
        let classic = Classic::new(n)?;
        let signal = SignalThreshold::new(1)?;
        let fallback = Fallback::new(n)?;
        let rules: [&dyn StoppingRule; 3] = [&classic, &signal, &fallback];
        let cutoff = classic_cutoff(n);
        let mut cells = Vec::new();
        for &rho in rhos {
            let corruption = match mix {
                CorruptionMix::Uniform => CorruptionSpec::new(rho)?,
                CorruptionMix::Only(kind) => CorruptionSpec::only(rho, kind)?,
            };
            let spec = SignalSpec::power(alpha)?.with_corruption(corruption)?;
            let counts = self.accumulate(trials, 9 + 3, |trial, counts| {
                let mut rng = trial_rng(seed, trial);
                let sampled = sample_random_order_trial(n, &spec, &mut rng)?;
                let wins = [
                    play(&classic, &sampled, n, &mut rng)?,
                    play(&signal, &sampled, n, &mut rng)?,
                    play(&fallback, &sampled, n, &mut rng)?,
                ];
                for (j, &w) in wins.iter().enumerate() {
                    counts[j] += u64::from(w);
                    counts[3 + j] += u64::from(w && !wins[0]);
                    counts[6 + j] += u64::from(wins[0] && !w);
                }
                if sampled.first_signal().map_or(true, |s| s >= cutoff) {
                    counts[9] += 1;
                    counts[10] += u64::from(wins[0]);
                    counts[11] += u64::from(wins[2]);
                }
                Ok(())
            })?;
            let paired = PairedBatch::from_counts(&counts[..9], rules.len(), trials, seed);
            let tag = |r: ExperimentReport, name: &str| {
                r.with_meta("rho", rho)
                    .with_meta("policy", name)
                    .with_meta("n", n)
            };
            cells.push(CorruptionCell {
                rho,
                classic: tag(paired.report(0), "classic"),
                signal: tag(paired.report(1), "signal"),
                fallback: tag(paired.report(2), "fallback"),
                paired,
                no_early_trials: counts[9],
                classic_no_early_successes: counts[10],
                fallback_no_early_successes: counts[11],
            });
        }
        Ok(cells)
    }
}
