//! Adversarial order with `m` independent uniform signals, where the policy
//! sees the whole signal history instead of only the last signal.
//!
//! A history is the count vector `(c_1, …, c_ℓ)` of signal arrivals per
//! time. On the hard instance `I_i` it occurs with probability
//! `λ_i(h) = m!/(c_1!⋯c_ℓ!) · i^{−m}` when `ℓ <= i`. A deterministic policy is
//! a map `τ` from histories to stopping times `τ(h) >= ℓ(h)`, and its success
//! on `I_i` is `Σ_{τ(h) = i} λ_i(h)`.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use num::rational::Ratio;
use num::{BigInt, BigRational, Zero};
use serde::Serialize;

use crate::error::{ensure_domain, PrecursorError, Result};
use crate::numeric::rational_pow;

pub const MAX_HISTORIES: u128 = 1_000_000;
pub const EXACT_MAX_HISTORIES: usize = 200;
pub const EXACT_MAX_N: usize = 8;

/// Signal counts per time, trimmed after the last signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct History {
    counts: Vec<u32>,
}

impl History {
    pub fn new(mut counts: Vec<u32>) -> Result<Self> {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        ensure_domain!(!counts.is_empty(), "a history needs at least one signal");
        Ok(Self { counts })
    }

    /// History induced by (unlabelled) signal times, each at least 1.
    pub fn from_times(times: &[usize]) -> Result<Self> {
        ensure_domain!(times.iter().all(|&t| t >= 1), "signal times start at 1");
        let last = times.iter().copied().max().unwrap_or(0);
        let mut counts = vec![0u32; last];
        for &t in times {
            counts[t - 1] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `ℓ(h)`, the time of the last signal.
    pub fn last(&self) -> usize {
        self.counts.len()
    }

    pub fn m(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Number of labelled signal tuples inducing this history.
    pub fn weight(&self) -> u128 {
        let mut remaining = self.m() as u128;
        let mut weight = 1u128;
        for &c in &self.counts {
            weight *= binomial(remaining, c as u128);
            remaining -= c as u128;
        }
        weight
    }
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) / (j + 1))
}

/// Multiset count `C(n+m−1, m)`, saturating once it passes `cap`.
fn history_count(n: usize, m: u32, cap: u128) -> u128 {
    let (n, m) = (n as u128, m as u128);
    let mut acc = 1u128;
    for j in 0..m {
        acc = acc * (n + j) / (j + 1);
        if acc > cap {
            return cap + 1;
        }
    }
    acc
}

pub fn history_weight(h: &History) -> u128 {
    h.weight()
}

/// `λ_i(h)`.
pub fn history_prob(h: &History, i: usize) -> Result<f64> {
    ensure_domain!(i >= 1, "instance index must be at least 1");
    if h.last() > i {
        return Ok(0.0);
    }
    Ok(h.weight() as f64 / (i as f64).powi(h.m() as i32))
}

pub fn history_prob_exact(h: &History, i: usize) -> Result<BigRational> {
    ensure_domain!(i >= 1, "instance index must be at least 1");
    if h.last() > i {
        return Ok(BigRational::zero());
    }
    Ok(BigRational::new(
        BigInt::from(h.weight()),
        rational_pow(i as u64, h.m()),
    ))
}

/// All histories of `m` signals on `[n]`, ordered by last signal time and
/// then by the remaining sorted times read from the back.
pub fn enumerate_histories(n: usize, m: u32) -> Result<Vec<History>> {
    ensure_domain!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    let count = history_count(n, m, MAX_HISTORIES);
    if count > MAX_HISTORIES {
        return Err(PrecursorError::Size(format!(
            "C(n+m-1, m) histories for n={n}, m={m} exceeds {MAX_HISTORIES}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut times = Vec::with_capacity(m as usize);
    fn rec(k: u32, max: usize, times: &mut Vec<usize>, out: &mut Vec<History>) {
        if k == 0 {
            out.push(History::from_times(times).expect("valid times"));
            return;
        }
        for top in 1..=max {
            times.push(top);
            rec(k - 1, top, times, out);
            times.pop();
        }
    }
    // Build tuples largest-first so the outer loop runs over ℓ(h).
    rec(m, n, &mut times, &mut out);
    Ok(out)
}

/// Deterministic full-history policy `h ↦ τ(h)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FullHistoryPolicyMap {
    tau: BTreeMap<History, usize>,
}

impl FullHistoryPolicyMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, h: History, t: usize) -> Result<()> {
        ensure_domain!(
            t >= h.last(),
            "stopping time {t} precedes last signal {}",
            h.last()
        );
        self.tau.insert(h, t);
        Ok(())
    }

    pub fn get(&self, h: &History) -> Option<usize> {
        self.tau.get(h).copied()
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&History, usize)> {
        self.tau.iter().map(|(h, &t)| (h, t))
    }

    /// Signal count the map was built for, if it is non-empty and consistent.
    pub fn m(&self) -> Option<u32> {
        let m = self.tau.keys().next()?.m();
        self.tau.keys().all(|h| h.m() == m).then_some(m)
    }

    fn check_total(&self, n: usize, m: u32) -> Result<Vec<History>> {
        let histories = enumerate_histories(n, m)?;
        for h in &histories {
            match self.get(h) {
                Some(t) if t <= n => {}
                Some(t) => {
                    return Err(PrecursorError::Domain(format!(
                        "τ{:?} = {t} beyond horizon {n}",
                        h.counts
                    )))
                }
                None => {
                    return Err(PrecursorError::Domain(format!(
                        "τ undefined on history {:?}",
                        h.counts
                    )))
                }
            }
        }
        Ok(histories)
    }

    /// Exact success on every `I_i`, `i ∈ [n]`.
    pub fn success_profile_exact(&self, n: usize, m: u32) -> Result<Vec<BigRational>> {
        let histories = self.check_total(n, m)?;
        let mut load = vec![0u128; n];
        for h in &histories {
            load[self.get(h).expect("checked") - 1] += h.weight();
        }
        Ok(load
            .iter()
            .enumerate()
            .map(|(idx, &w)| BigRational::new(BigInt::from(w), rational_pow(idx as u64 + 1, m)))
            .collect())
    }
}

/// Success of `τ` on `I_i`.
pub fn eval_full_history_policy(
    n: usize,
    m: u32,
    tau: &FullHistoryPolicyMap,
    i: usize,
) -> Result<f64> {
    ensure_domain!((1..=n).contains(&i), "instance {i} outside [1, {n}]");
    let histories = tau.check_total(n, m)?;
    let weight: u128 = histories
        .iter()
        .filter(|h| tau.get(h) == Some(i))
        .map(History::weight)
        .sum();
    Ok(weight as f64 / (i as f64).powi(m as i32))
}

pub fn eval_full_history_policy_exact(
    n: usize,
    m: u32,
    tau: &FullHistoryPolicyMap,
    i: usize,
) -> Result<BigRational> {
    ensure_domain!((1..=n).contains(&i), "instance {i} outside [1, {n}]");
    let histories = tau.check_total(n, m)?;
    let mut total = BigRational::zero();
    for h in histories.iter().filter(|h| tau.get(h) == Some(i)) {
        total += history_prob_exact(h, i)?;
    }
    Ok(total)
}

/// Exact deterministic full-history optimum for two signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct M2Solution {
    pub n: usize,
    pub z_star: Ratio<u64>,
    /// Total labelled weight the policy stops on at each time `t ∈ [n]`.
    pub d: Vec<u64>,
    pub tau: FullHistoryPolicyMap,
}

impl M2Solution {
    pub fn z_star_f64(&self) -> f64 {
        *self.z_star.numer() as f64 / *self.z_star.denom() as f64
    }

    pub fn z_star_exact(&self) -> BigRational {
        BigRational::new(
            BigInt::from(*self.z_star.numer()),
            BigInt::from(*self.z_star.denom()),
        )
    }
}

fn ceil_times(z: &Ratio<u64>, x: u64) -> u64 {
    let (num, den) = (*z.numer() as u128, *z.denom() as u128);
    ((num * x as u128 + den - 1) / den) as u64
}

/// `Σ_{t<=ℓ} ⌈z t²⌉ <= ℓ²` for every `ℓ ∈ [n]`.
pub fn m2_feasible(n: usize, z: &Ratio<u64>) -> bool {
    let mut acc = 0u64;
    (1..=n as u64).all(|t| {
        acc += ceil_times(z, t * t);
        acc <= t * t
    })
}

/// Smallest breakpoint `k/t²` strictly above `z`, if any is at most 1.
fn next_breakpoint(n: usize, z: &Ratio<u64>) -> Option<Ratio<u64>> {
    (1..=n as u64)
        .filter_map(|t| {
            let sq = t * t;
            let k = (*z.numer() as u128 * sq as u128 / *z.denom() as u128) as u64 + 1;
            (k <= sq).then(|| Ratio::new(k, sq))
        })
        .min()
}

/// Largest `z` satisfying the prefix constraints, with the greedy policy
/// that attains it.
///
/// The constraint sums only change at breakpoints `k/t²`, so the feasible set
/// is `[0, z*]` with `z*` a breakpoint. The scan walks breakpoints upward from
/// a known-feasible point until the first infeasible one.
pub fn m2_opt(n: usize) -> Result<M2Solution> {
    let z = m2_z_star(n)?;
    let n64 = n as u64;
    let mut d: Vec<u64> = (1..n64).map(|t| ceil_times(&z, t * t)).collect();
    d.push(n64 * n64 - d.iter().sum::<u64>());
    let tau = m2_greedy_policy(n, &d)?;
    Ok(M2Solution {
        n,
        z_star: z,
        d,
        tau,
    })
}

/// The value of [`m2_opt`] without building the policy.
pub fn m2_z_star(n: usize) -> Result<Ratio<u64>> {
    ensure_domain!(n >= 1, "horizon must be at least 1");
    let n64 = n as u64;
    let mut z = if n >= 4 {
        Ratio::new(6 * (n64 - 1), (n64 + 1) * (2 * n64 + 1))
    } else {
        Ratio::new(0, 1)
    };
    if !m2_feasible(n, &z) {
        z = Ratio::new(0, 1);
    }
    while let Some(next) = next_breakpoint(n, &z) {
        if !m2_feasible(n, &next) {
            break;
        }
        z = next;
    }
    Ok(z)
}

/// Assigns sorted signal pairs `(a, b)` to stopping times so that time `t`
/// receives labelled weight exactly `d[t−1]`. Pairs with `a < b` weigh 2,
/// diagonal pairs weigh 1; the diagonal `(t, t)` becoming available at `t`
/// makes every target weight reachable.
pub fn m2_greedy_policy(n: usize, d: &[u64]) -> Result<FullHistoryPolicyMap> {
    ensure_domain!(d.len() == n, "need one target weight per time");
    let mut single: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut double: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut tau = FullHistoryPolicyMap::new();
    let assign = |pair: (usize, usize), t: usize, tau: &mut FullHistoryPolicyMap| {
        tau.insert(
            History::from_times(&[pair.0, pair.1]).expect("valid pair"),
            t,
        )
    };
    for t in 1..=n {
        single.insert((t, t));
        double.extend((1..t).map(|a| (a, t)));
        if t == n {
            for pair in std::mem::take(&mut double)
                .into_iter()
                .chain(std::mem::take(&mut single))
            {
                assign(pair, t, &mut tau)?;
            }
            break;
        }
        let demand = d[t - 1] as usize;
        let available = single.len() + 2 * double.len();
        ensure_domain!(
            demand <= available,
            "target weight {demand} at time {t} exceeds {available}"
        );
        let (pairs, singles) = if demand <= 2 * double.len() {
            (demand / 2, demand % 2)
        } else {
            (double.len(), demand - 2 * double.len())
        };
        for _ in 0..pairs {
            let pair = double.pop_first().expect("counted");
            assign(pair, t, &mut tau)?;
        }
        for _ in 0..singles {
            let pair = single.pop_first().expect("counted");
            assign(pair, t, &mut tau)?;
        }
    }
    Ok(tau)
}

/// Exact deterministic optimum of the full-history model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullHistoryOptimum {
    pub value: BigRational,
    pub tau: FullHistoryPolicyMap,
}

/// Histories sharing one weight, by increasing `ℓ(h)`.
struct WeightClass {
    weight: u128,
    members: Vec<History>,
    /// `arrivals[t−1]`: members with `ℓ(h) = t`.
    arrivals: Vec<usize>,
}

/// Decides whether every time `t` can receive load at least `need[t−1]`.
///
/// Times are filled in increasing order. Unused histories of equal weight
/// that are already available remain usable at every later time, so the
/// state is one count per weight class. Only minimal covering combinations
/// are tried, the final time takes everything left, and failed states are
/// remembered.
struct Cover<'a> {
    classes: &'a [WeightClass],
    need: Vec<u128>,
    failed: HashSet<(usize, Vec<usize>)>,
    plan: Vec<Vec<usize>>,
}

impl<'a> Cover<'a> {
    fn new(classes: &'a [WeightClass], need: Vec<u128>) -> Self {
        let n = need.len();
        Self {
            classes,
            need,
            failed: HashSet::new(),
            plan: vec![vec![0; classes.len()]; n],
        }
    }

    fn weight_of(&self, counts: &[usize]) -> u128 {
        counts
            .iter()
            .zip(self.classes)
            .map(|(&k, c)| k as u128 * c.weight)
            .sum()
    }

    /// Every window of times `t..=j` must be coverable by what is available
    /// now plus what arrives by `j`.
    fn hall_ok(&self, t: usize, avail: &[usize]) -> bool {
        let n = self.need.len();
        let mut supply = self.weight_of(avail);
        let mut demand = 0u128;
        (t..=n).all(|j| {
            if j > t {
                supply += self
                    .classes
                    .iter()
                    .map(|c| c.weight * c.arrivals[j - 1] as u128)
                    .sum::<u128>();
            }
            demand += self.need[j - 1];
            demand <= supply
        })
    }

    fn solve(&mut self, t: usize, carried: Vec<usize>) -> bool {
        let n = self.need.len();
        let avail: Vec<usize> = carried
            .iter()
            .zip(self.classes)
            .map(|(&k, c)| k + c.arrivals[t - 1])
            .collect();
        if t == n {
            self.plan[n - 1] = avail.clone();
            return self.weight_of(&avail) >= self.need[n - 1];
        }
        if !self.hall_ok(t, &avail) || self.failed.contains(&(t, carried.clone())) {
            return false;
        }
        let weights: Vec<u128> = self.classes.iter().map(|c| c.weight).collect();
        for take in minimal_covers(&weights, &avail, self.need[t - 1]) {
            let next: Vec<usize> = avail.iter().zip(&take).map(|(a, x)| a - x).collect();
            self.plan[t - 1] = take;
            if self.solve(t + 1, next) {
                return true;
            }
        }
        self.failed.insert((t, carried));
        false
    }
}

/// Count vectors `x <= avail` with `Σ w·x >= need` from which no single
/// item can be dropped, smallest overshoot first.
fn minimal_covers(weights: &[u128], avail: &[usize], need: u128) -> Vec<Vec<usize>> {
    fn rec(
        c: usize,
        sum: u128,
        weights: &[u128],
        avail: &[usize],
        rest: &[u128],
        need: u128,
        x: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if sum >= need || c == weights.len() {
            let minimal = (0..c).all(|j| x[j] == 0 || sum - weights[j] < need);
            if sum >= need && minimal {
                let mut full = x.clone();
                full.resize(weights.len(), 0);
                out.push(full);
            }
            return;
        }
        if sum + rest[c] < need {
            return;
        }
        for k in 0..=avail[c] {
            x.push(k);
            rec(
                c + 1,
                sum + weights[c] * k as u128,
                weights,
                avail,
                rest,
                need,
                x,
                out,
            );
            x.pop();
            if sum + weights[c] * k as u128 >= need {
                break;
            }
        }
    }
    let mut rest = vec![0u128; weights.len() + 1];
    for c in (0..weights.len()).rev() {
        rest[c] = rest[c + 1] + weights[c] * avail[c] as u128;
    }
    let mut out = Vec::new();
    rec(0, 0, weights, avail, &rest, need, &mut Vec::new(), &mut out);
    let load =
        |x: &Vec<usize>| -> u128 { x.iter().zip(weights).map(|(&k, &w)| k as u128 * w).sum() };
    out.sort_by(|a, b| load(a).cmp(&load(b)).then_with(|| b.cmp(a)));
    out
}

/// Max-min success over the hard family for deterministic full-history
/// policies, for tiny instances only.
///
/// The optimum is a load ratio `k/t^m` with `k <= t^m`, so it is found by
/// binary search over those candidates with an exact covering test.
pub fn exact_full_history_det(n: usize, m: u32) -> Result<FullHistoryOptimum> {
    ensure_domain!(n >= 1 && m >= 1, "need n >= 1 and m >= 1");
    let count = history_count(n, m, EXACT_MAX_HISTORIES as u128);
    if n > EXACT_MAX_N || count > EXACT_MAX_HISTORIES as u128 {
        return Err(PrecursorError::Size(format!(
            "exact search limited to n <= {EXACT_MAX_N} and {EXACT_MAX_HISTORIES} histories (n={n}, m={m})"
        )));
    }
    let mut by_weight: BTreeMap<u128, Vec<History>> = BTreeMap::new();
    for h in enumerate_histories(n, m)? {
        by_weight.entry(h.weight()).or_default().push(h);
    }
    let classes: Vec<WeightClass> = by_weight
        .into_iter()
        .rev()
        .map(|(weight, mut members)| {
            members.sort_by(|a, b| a.last().cmp(&b.last()).then(a.cmp(b)));
            let mut arrivals = vec![0; n];
            for h in &members {
                arrivals[h.last() - 1] += 1;
            }
            WeightClass {
                weight,
                members,
                arrivals,
            }
        })
        .collect();
    let scale: Vec<u128> = (1..=n as u128).map(|t| t.pow(m)).collect();

    let mut candidates: Vec<(u128, u128)> = scale
        .iter()
        .flat_map(|&s| (0..=s).map(move |k| (k, s)))
        .collect();
    candidates.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    candidates.dedup_by(|a, b| a.0 * b.1 == b.0 * a.1);

    let attempt = |(k, s): (u128, u128)| {
        let need = scale.iter().map(|&sc| (k * sc).div_ceil(s)).collect();
        let mut cover = Cover::new(&classes, need);
        cover.solve(1, vec![0; classes.len()]).then_some(cover.plan)
    };
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    let mut plan = attempt(candidates[0]).expect("zero is always attainable");
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        match attempt(candidates[mid]) {
            Some(p) => {
                lo = mid;
                plan = p;
            }
            None => hi = mid - 1,
        }
    }

    let mut tau = FullHistoryPolicyMap::new();
    for (c, class) in classes.iter().enumerate() {
        let mut queue = std::collections::VecDeque::new();
        let mut members = class.members.iter().peekable();
        for t in 1..=n {
            while let Some(h) = members.next_if(|h| h.last() == t) {
                queue.push_back(h);
            }
            for _ in 0..plan[t - 1][c] {
                tau.insert(
                    queue.pop_front().expect("planned from available").clone(),
                    t,
                )?;
            }
        }
        debug_assert!(queue.is_empty());
    }
    let (k, s) = candidates[lo];
    Ok(FullHistoryOptimum {
        value: BigRational::new(BigInt::from(k), BigInt::from(s)),
        tau,
    })
}

/// The full-history ILP in CPLEX LP format. Coverage row `i` is scaled by
/// `i^m` so every coefficient is an integer.
pub fn emit_ilp(n: usize, m: u32) -> Result<String> {
    let histories = enumerate_histories(n, m)?;
    let var = |h: usize, t: usize| format!("x_h{h}_t{t}");
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ Deterministic full-history stopping ILP: n = {n}, m = {m}"
    );
    for (idx, h) in histories.iter().enumerate() {
        let counts: Vec<String> = h.counts().iter().map(u32::to_string).collect();
        let _ = writeln!(
            out,
            "\\ h{idx} = ({}) weight {}",
            counts.join(","),
            h.weight()
        );
    }
    out.push_str("Maximize\n obj: z\nSubject To\n");
    for (idx, h) in histories.iter().enumerate() {
        let terms: Vec<String> = (h.last()..=n).map(|t| var(idx, t)).collect();
        write_row(&mut out, &format!("assign_h{idx}"), &terms, "= 1");
    }
    for i in 1..=n {
        let mut terms: Vec<String> = histories
            .iter()
            .enumerate()
            .filter(|(_, h)| h.last() <= i)
            .map(|(idx, h)| match h.weight() {
                1 => var(idx, i),
                w => format!("{w} {}", var(idx, i)),
            })
            .collect();
        let scale = (i as u128).pow(m);
        terms.push(if scale == 1 {
            "- z".to_string()
        } else {
            format!("- {scale} z")
        });
        write_row(&mut out, &format!("cover_i{i}"), &terms, ">= 0");
    }
    out.push_str("Bounds\n 0 <= z <= 1\nBinary\n");
    for (idx, h) in histories.iter().enumerate() {
        for t in h.last()..=n {
            let _ = writeln!(out, " {}", var(idx, t));
        }
    }
    out.push_str("End\n");
    Ok(out)
}

fn write_row(out: &mut String, name: &str, terms: &[String], rhs: &str) {
    const PER_LINE: usize = 8;
    let _ = write!(out, " {name}:");
    for (j, term) in terms.iter().enumerate() {
        if j > 0 && j % PER_LINE == 0 {
            out.push_str("\n   ");
        }
        if j == 0 || term.starts_with('-') {
            let _ = write!(out, " {term}");
        } else {
            let _ = write!(out, " + {term}");
        }
    }
    let _ = writeln!(out, " {rhs}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rational;

    fn pair(a: usize, b: usize) -> History {
        History::from_times(&[a, b]).unwrap()
    }

    #[test]
    fn history_weights() {
        assert_eq!(pair(1, 1).weight(), 1);
        assert_eq!(pair(1, 2).weight(), 2);
        assert_eq!(History::from_times(&[3]).unwrap().weight(), 1);
        assert_eq!(History::from_times(&[1, 1, 2]).unwrap().weight(), 3);
        assert_eq!(History::from_times(&[1, 2, 3]).unwrap().weight(), 6);
        assert!(History::new(vec![0, 0]).is_err());
        assert_eq!(History::new(vec![1, 0, 0]).unwrap().last(), 1);
    }

    #[test]
    fn history_probabilities() {
        assert_eq!(history_prob(&pair(1, 3), 2).unwrap(), 0.0);
        assert_eq!(history_prob_exact(&pair(1, 1), 2).unwrap(), rational(1, 4));
        assert_eq!(history_prob_exact(&pair(1, 2), 2).unwrap(), rational(1, 2));
    }

    #[test]
    fn history_counts() {
        assert_eq!(enumerate_histories(2, 1).unwrap().len(), 2);
        assert_eq!(enumerate_histories(4, 2).unwrap().len(), 10);
        assert_eq!(enumerate_histories(2, 2).unwrap().len(), 3);
        assert!(matches!(
            enumerate_histories(2000, 2),
            Err(PrecursorError::Size(_))
        ));
        let order: Vec<_> = enumerate_histories(3, 2).unwrap();
        let expect = [
            pair(1, 1),
            pair(1, 2),
            pair(2, 2),
            pair(1, 3),
            pair(2, 3),
            pair(3, 3),
        ];
        assert_eq!(order, expect);
    }

    #[test]
    fn probability_closure() {
        for m in 1..=3 {
            for n in 1..=8 {
                let hs = enumerate_histories(n, m).unwrap();
                for i in 1..=n {
                    let total: BigRational =
                        hs.iter().map(|h| history_prob_exact(h, i).unwrap()).sum();
                    assert_eq!(total, rational(1, 1), "n={n} m={m} i={i}");
                }
            }
        }
    }

    fn small_example_policy() -> FullHistoryPolicyMap {
        let mut tau = FullHistoryPolicyMap::new();
        for h in enumerate_histories(4, 2).unwrap() {
            let times: Vec<usize> = h
                .counts()
                .iter()
                .enumerate()
                .flat_map(|(t, &c)| std::iter::repeat(t + 1).take(c as usize))
                .collect();
            let t = match (times[0], times[1]) {
                (1, 1) => 1,
                (1, 2) => 2,
                (_, 3) => 3,
                _ => 4,
            };
            tau.insert(h, t).unwrap();
        }
        tau
    }

    #[test]
    fn small_example_profile() {
        let tau = small_example_policy();
        let got: Vec<BigRational> = (1..=4)
            .map(|i| eval_full_history_policy_exact(4, 2, &tau, i).unwrap())
            .collect();
        assert_eq!(
            got,
            vec![
                rational(1, 1),
                rational(1, 2),
                rational(5, 9),
                rational(1, 2)
            ]
        );
        assert_eq!(tau.success_profile_exact(4, 2).unwrap(), got);
        assert!((eval_full_history_policy(4, 2, &tau, 3).unwrap() - 5.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn last_signal_policy_with_one_signal() {
        let n = 6;
        let mut tau = FullHistoryPolicyMap::new();
        for h in enumerate_histories(n, 1).unwrap() {
            let l = h.last();
            tau.insert(h, l).unwrap();
        }
        for i in 1..=n {
            assert_eq!(
                eval_full_history_policy_exact(n, 1, &tau, i).unwrap(),
                rational(1, i as i64)
            );
        }
    }

    #[test]
    fn stop_at_horizon_only_wins_last_instance() {
        let n = 5;
        let mut tau = FullHistoryPolicyMap::new();
        for h in enumerate_histories(n, 2).unwrap() {
            tau.insert(h, n).unwrap();
        }
        for i in 1..n {
            assert_eq!(eval_full_history_policy(n, 2, &tau, i).unwrap(), 0.0);
        }
        assert_eq!(eval_full_history_policy(n, 2, &tau, n).unwrap(), 1.0);
    }

    #[test]
    fn partial_policy_rejected() {
        let mut tau = FullHistoryPolicyMap::new();
        tau.insert(pair(1, 1), 1).unwrap();
        assert!(matches!(
            eval_full_history_policy(2, 2, &tau, 1),
            Err(PrecursorError::Domain(_))
        ));
        assert!(tau.insert(pair(1, 3), 2).is_err());
    }

    #[test]
    fn m2_examples() {
        assert_eq!(m2_opt(1).unwrap().z_star, Ratio::new(1, 1));
        assert_eq!(m2_opt(2).unwrap().z_star, Ratio::new(3, 4));
        assert_eq!(m2_opt(4).unwrap().z_star, Ratio::new(1, 2));
    }

    #[test]
    fn m2_weights_and_certification() {
        for n in 1..=30 {
            let sol = m2_opt(n).unwrap();
            assert_eq!(sol.d.iter().sum::<u64>(), (n * n) as u64);
            let profile = sol.tau.success_profile_exact(n, 2).unwrap();
            let min = profile.iter().min().unwrap().clone();
            assert_eq!(min, sol.z_star_exact(), "n={n}");
            for (t, &d) in sol.d.iter().enumerate() {
                let t = t as u64 + 1;
                assert!(d >= ceil_times(&sol.z_star, t * t));
            }
        }
    }

    #[test]
    fn exact_search_examples() {
        assert_eq!(exact_full_history_det(4, 2).unwrap().value, rational(1, 2));
        assert_eq!(exact_full_history_det(2, 2).unwrap().value, rational(3, 4));
        for n in 1..=8 {
            assert_eq!(
                exact_full_history_det(n, 1).unwrap().value,
                rational(1, n as i64)
            );
        }
        assert!(matches!(
            exact_full_history_det(9, 1),
            Err(PrecursorError::Size(_))
        ));
        assert!(matches!(
            exact_full_history_det(7, 4),
            Err(PrecursorError::Size(_))
        ));
    }

    #[test]
    fn exact_search_policy_attains_value() {
        for (n, m) in [(3, 2), (4, 2), (3, 3), (5, 2)] {
            let opt = exact_full_history_det(n, m).unwrap();
            let profile = opt.tau.success_profile_exact(n, m).unwrap();
            assert_eq!(profile.iter().min().unwrap(), &opt.value);
        }
    }

    #[test]
    fn ilp_shapes() {
        let lp = emit_ilp(2, 1).unwrap();
        let binaries = lp
            .split("Binary\n")
            .nth(1)
            .unwrap()
            .lines()
            .filter(|l| l.starts_with(" x_"))
            .count();
        assert_eq!(binaries, 3);

        let lp = emit_ilp(1, 1).unwrap();
        assert!(lp.contains(" assign_h0: x_h0_t1 = 1\n"));
        assert!(lp.contains(" cover_i1: x_h0_t1 - z >= 0\n"));

        let lp = emit_ilp(4, 2).unwrap();
        assert_eq!(lp.matches(" assign_h").count(), 10);
        assert_eq!(lp.matches(" cover_i").count(), 4);
        assert_eq!(lp, emit_ilp(4, 2).unwrap());
    }
}
