//! Named experiments producing sorted, fixed-header tables.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::adversarial::{det_success_on_hard, opt_det, opt_rand, rand_threshold_dist};
use crate::error::{ensure_domain, PrecursorError, Result};
use crate::full_history::m2_z_star;
use crate::monte_carlo::{MonteCarlo, PairedBatch};
use crate::numeric::format_significant;
use crate::policy::{Classic, RandomizedAdversarial, SignalThreshold, StoppingRule};
use crate::random_order::{bellman_solve, opt_asymptotic};
use crate::signal::{CorruptionMix, SignalSpec};

pub const CSV_DIGITS: usize = 10;

/// A single horizon or an inclusive range `a..b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NRange {
    Single(usize),
    Range(usize, usize),
}

impl NRange {
    pub fn values(&self) -> impl Iterator<Item = usize> {
        let (a, b) = match *self {
            Self::Single(n) => (n, n),
            Self::Range(a, b) => (a, b),
        };
        a..=b
    }

    pub fn single(&self, experiment: &str) -> Result<usize> {
        match *self {
            Self::Single(n) => Ok(n),
            Self::Range(..) => Err(PrecursorError::Domain(format!(
                "experiment `{experiment}` takes a single n"
            ))),
        }
    }
}

impl FromStr for NRange {
    type Err = PrecursorError;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |x: &str| {
            x.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| PrecursorError::Domain(format!("invalid horizon `{x}`")))
        };
        match s.split_once("..") {
            None => Ok(Self::Single(parse(s)?)),
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                ensure_domain!(a <= b, "empty range {a}..{b}");
                Ok(Self::Range(a, b))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub n: Option<NRange>,
    pub trials: u64,
    pub seed: u64,
    pub alpha: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub alpha_hats: Option<Vec<f64>>,
    pub rhos: Option<Vec<f64>>,
    pub cs: Option<Vec<f64>>,
    pub monte_carlo: MonteCarlo,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: None,
            trials: 1000,
            seed: 0,
            alpha: None,
            alphas: None,
            alpha_hats: None,
            rhos: None,
            cs: None,
            monte_carlo: MonteCarlo::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Self::Float(x) => format_significant(*x, CSV_DIGITS),
            Self::Int(v) => v.to_string(),
            Self::Text(s) => s.clone(),
        }
    }

    fn cmp_key(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Self::Float(a), Self::Float(b)) => a.total_cmp(b),
            (Self::Int(a), Self::Int(b)) => a.cmp(b),
            (Self::Text(a), Self::Text(b)) => a.cmp(b),
            _ => self.render().cmp(&other.render()),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Orders rows by their columns, left to right.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.cmp_key(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            writer
                .write_record(row.iter().map(Cell::render))
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii fields")
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| *h == name)
    }
}

pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn header(&self) -> &'static [&'static str];
    fn default_n(&self) -> NRange;
    fn run(&self, cfg: &ExperimentConfig) -> Result<Table>;
}

pub fn default_clean_alphas() -> Vec<f64> {
    (-10..=10)
        .map(|k: i32| {
            if k % 5 == 0 {
                10f64.powi(k / 5)
            } else {
                10f64.powf(k as f64 / 5.0)
            }
        })
        .collect()
}

pub fn default_misspec_grid() -> Vec<f64> {
    (1..=20).map(|j| j as f64 / 10.0).collect()
}

pub fn default_rhos() -> Vec<f64> {
    (0..=10).map(|j| j as f64 / 10.0).collect()
}

pub fn default_cs() -> Vec<f64> {
    vec![0.5, 1.0, 2.0]
}

fn n_of(exp: &dyn Experiment, cfg: &ExperimentConfig) -> NRange {
    cfg.n.unwrap_or_else(|| exp.default_n())
}

/// Random-order batches for the clean experiment: classic, optimal and
/// `A(S)` on one shared batch per `α`, classic first.
pub fn clean_batches(
    n: usize,
    alphas: &[f64],
    trials: u64,
    seed: u64,
    mc: &MonteCarlo,
) -> Result<Vec<(f64, PairedBatch)>> {
    let classic = Classic::new(n)?;
    let signal = SignalThreshold::new(1)?;
    alphas
        .iter()
        .map(|&alpha| {
            let optimal = SignalThreshold::new(bellman_solve(n, alpha)?.k_n)?;
            let rules: [&dyn StoppingRule; 3] = [&classic, &optimal, &signal];
            Ok((
                alpha,
                mc.run_random_order_paired(n, &SignalSpec::power(alpha)?, &rules, trials, seed)?,
            ))
        })
        .collect()
}

pub const CLEAN_POLICIES: [&str; 3] = ["classic", "optimal", "signal"];

struct Clean;

impl Experiment for Clean {
    fn name(&self) -> &'static str {
        "clean"
    }

    fn header(&self) -> &'static [&'static str] {
        &[
            "alpha",
            "policy",
            "estimate",
            "ci_radius",
            "exact_asymptotic",
        ]
    }

    fn default_n(&self) -> NRange {
        NRange::Single(1000)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let n = n_of(self, cfg).single(self.name())?;
        let alphas = cfg.alphas.clone().unwrap_or_else(default_clean_alphas);
        let mut table = Table::new(self.header());
        for (alpha, batch) in clean_batches(n, &alphas, cfg.trials, cfg.seed, &cfg.monte_carlo)? {
            let limits = [(-1f64).exp(), opt_asymptotic(alpha)?, alpha / (alpha + 1.0)];
            for (j, name) in CLEAN_POLICIES.iter().enumerate() {
                let r = batch.report(j);
                table.push(vec![
                    alpha.into(),
                    (*name).into(),
                    r.estimate.into(),
                    r.ci_radius.into(),
                    limits[j].into(),
                ]);
            }
        }
        table.sort();
        Ok(table)
    }
}

struct Misspec;

impl Experiment for Misspec {
    fn name(&self) -> &'static str {
        "misspec"
    }

    fn header(&self) -> &'static [&'static str] {
        &["alpha", "alpha_hat", "gain", "paired_se"]
    }

    fn default_n(&self) -> NRange {
        NRange::Single(1000)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let n = n_of(self, cfg).single(self.name())?;
        let alphas = cfg.alphas.clone().unwrap_or_else(default_misspec_grid);
        let alpha_hats = cfg.alpha_hats.clone().unwrap_or_else(default_misspec_grid);
        let cells = cfg.monte_carlo.run_misspecification_grid(
            n,
            &alphas,
            &alpha_hats,
            cfg.trials,
            cfg.seed,
        )?;
        let mut table = Table::new(self.header());
        for c in cells {
            table.push(vec![
                c.alpha.into(),
                c.alpha_hat.into(),
                c.gain.into(),
                c.paired_se.into(),
            ]);
        }
        table.sort();
        Ok(table)
    }
}

struct Corruption;

impl Experiment for Corruption {
    fn name(&self) -> &'static str {
        "corruption"
    }

    fn header(&self) -> &'static [&'static str] {
        &["rho", "policy", "estimate", "ci_radius"]
    }

    fn default_n(&self) -> NRange {
        NRange::Single(1000)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let n = n_of(self, cfg).single(self.name())?;
        let rhos = cfg.rhos.clone().unwrap_or_else(default_rhos);
        let alpha = cfg.alpha.unwrap_or(1.0);
        let cells = cfg.monte_carlo.run_corruption_sweep(
            n,
            alpha,
            &rhos,
            CorruptionMix::Uniform,
            cfg.trials,
            cfg.seed,
        )?;
        let mut table = Table::new(self.header());
        for c in cells {
            for (name, r) in [
                ("classic", &c.classic),
                ("fallback", &c.fallback),
                ("signal", &c.signal),
            ] {
                table.push(vec![
                    c.rho.into(),
                    name.into(),
                    r.estimate.into(),
                    r.ci_radius.into(),
                ]);
            }
        }
        table.sort();
        Ok(table)
    }
}

struct AdvProfile;

impl Experiment for AdvProfile {
    fn name(&self) -> &'static str {
        "adv-profile"
    }

    fn header(&self) -> &'static [&'static str] {
        &["i_star", "policy", "estimate", "exact"]
    }

    fn default_n(&self) -> NRange {
        NRange::Single(100)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let n = n_of(self, cfg).single(self.name())?;
        let alpha = cfg.alpha.unwrap_or(1.0);
        let spec = SignalSpec::power(alpha)?;
        let signal = SignalThreshold::new(1)?;
        let dist = rand_threshold_dist(n, alpha)?;
        let randomized = RandomizedAdversarial::new(dist.clone());
        let rules: [&dyn StoppingRule; 2] = [&signal, &randomized];
        let mut table = Table::new(self.header());
        for i in 1..=n {
            let batch = cfg
                .monte_carlo
                .run_adversarial_paired(n, &spec, i, &rules, cfg.trials, cfg.seed)?;
            let exact = [det_success_on_hard(n, alpha, i)?, dist.success_on_hard(i)?];
            for (j, name) in ["signal", "randomized"].iter().enumerate() {
                table.push(vec![
                    i.into(),
                    (*name).into(),
                    batch.estimate(j).into(),
                    exact[j].into(),
                ]);
            }
        }
        table.sort();
        Ok(table)
    }
}

struct AdvScaling;

impl Experiment for AdvScaling {
    fn name(&self) -> &'static str {
        "adv-scaling"
    }

    fn header(&self) -> &'static [&'static str] {
        &["c", "n", "det_exact", "rand_exact", "limit"]
    }

    fn default_n(&self) -> NRange {
        NRange::Single(500)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let cs = cfg.cs.clone().unwrap_or_else(default_cs);
        let mut table = Table::new(self.header());
        for &c in &cs {
            ensure_domain!(
                c > 0.0 && c.is_finite(),
                "scaling constant must be positive, got {c}"
            );
            for n in n_of(self, cfg).values() {
                let alpha = c * n as f64;
                table.push(vec![
                    c.into(),
                    n.into(),
                    opt_det(n, alpha)?.into(),
                    opt_rand(n, alpha)?.into(),
                    (-(-c).exp_m1()).into(),
                ]);
            }
        }
        table.sort();
        Ok(table)
    }
}

struct FullHistoryExp;

impl Experiment for FullHistoryExp {
    fn name(&self) -> &'static str {
        "full-history"
    }

    fn header(&self) -> &'static [&'static str] {
        &[
            "n",
            "last_signal_det",
            "full_history_det",
            "lower_bound",
            "upper_bound",
        ]
    }

    fn default_n(&self) -> NRange {
        NRange::Range(4, 64)
    }

    fn run(&self, cfg: &ExperimentConfig) -> Result<Table> {
        let mut table = Table::new(self.header());
        for n in n_of(self, cfg).values() {
            let denom = ((n + 1) * (2 * n + 1)) as f64;
            table.push(vec![
                n.into(),
                opt_det(n, 2.0)?.into(),
                {
                    let z = m2_z_star(n)?;
                    (*z.numer() as f64 / *z.denom() as f64).into()
                },
                (6.0 * (n as f64 - 1.0) / denom).into(),
                (6.0 * n as f64 / denom).into(),
            ]);
        }
        table.sort();
        Ok(table)
    }
}

/// Experiments by name.
pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        reg.register(Box::new(Clean));
        reg.register(Box::new(Misspec));
        reg.register(Box::new(Corruption));
        reg.register(Box::new(AdvProfile));
        reg.register(Box::new(AdvScaling));
        reg.register(Box::new(FullHistoryExp));
        reg
    }
}

impl ExperimentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, exp: Box<dyn Experiment>) {
        self.entries.insert(exp.name(), exp);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries
            .get(name)
            .map(|e| e.as_ref())
            .ok_or_else(|| PrecursorError::Unknown {
                kind: "experiment",
                name: name.to_string(),
            })
    }

    pub fn run(&self, name: &str, cfg: &ExperimentConfig) -> Result<Table> {
        ensure_domain!(cfg.trials >= 1, "need at least one trial");
        self.get(name)?.run(cfg)
    }
}
