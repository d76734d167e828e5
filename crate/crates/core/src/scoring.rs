//! Count tables, maximum-likelihood estimators, entropy terms and the
//! penalized partition score.
//!
//! The score of a partition is the sum over its groups of the maximized
//! approximate negative log-likelihood of the group's sub-sequence, plus a
//! penalty `gamma * m * ln(n)`. A group whose sub-sequence holds two events at
//! the same tick cannot come from a single emitter, and makes the whole
//! partition score `+inf`.
//!
//! All logarithms are natural.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{EmitterParams, RenewalLaw};
use crate::partition::{Move, Partition};
use crate::sequence::{ObservedSequence, SubSequence, Symbol, SymbolSet};

/// Occurrence, transition and delay counts of one sub-sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CountTables {
    /// `N_i`: occurrences of each symbol.
    pub symbol_counts: BTreeMap<Symbol, u64>,
    /// `N_ij`: transitions between consecutive events.
    pub transitions: BTreeMap<(Symbol, Symbol), u64>,
    /// `N_i(k)`: delays `k` following an occurrence of `i`.
    pub delays: BTreeMap<(Symbol, u64), u64>,
    /// Number of events.
    pub total: u64,
}

impl CountTables {
    pub fn symbol_count(&self, symbol: Symbol) -> u64 {
        self.symbol_counts.get(&symbol).copied().unwrap_or(0)
    }

    pub fn transition_count(&self, from: Symbol, to: Symbol) -> u64 {
        self.transitions.get(&(from, to)).copied().unwrap_or(0)
    }

    pub fn delay_count(&self, from: Symbol, delay: u64) -> u64 {
        self.delays.get(&(from, delay)).copied().unwrap_or(0)
    }

    /// `sum N_ij ln p_ij + sum N_i(k) ln q_i(k)` under `law`, with
    /// `0 * ln 0 = 0`. A positive count on a zero probability gives `-inf`.
    pub fn log_likelihood<L: RenewalLaw + ?Sized>(&self, law: &L) -> f64 {
        let mut ll = 0.0;
        for (&(i, j), &n) in &self.transitions {
            ll += xlogy(n as f64, law.transition_prob(i, j));
        }
        for (&(i, k), &n) in &self.delays {
            ll += xlogy(n as f64, law.sojourn_prob(i, k));
        }
        ll
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Counts symbols, transitions and delays; each delay is attributed to the
/// earlier symbol of its pair. Times must be strictly increasing.
pub fn count_tables(sub: &SubSequence) -> Result<CountTables> {
    sub.ensure_strictly_increasing()?;
    let mut counts = CountTables::default();
    for e in sub.events() {
        *counts.symbol_counts.entry(e.symbol).or_default() += 1;
    }
    for w in sub.events().windows(2) {
        *counts.transitions.entry((w[0].symbol, w[1].symbol)).or_default() += 1;
        *counts.delays.entry((w[0].symbol, w[1].time - w[0].time)).or_default() += 1;
    }
    counts.total = sub.len() as u64;
    Ok(counts)
}

/// Empirical estimators `p_ij = N_ij / N_i` and `q_i(k) = N_i(k) / N_i`;
/// zero wherever `N_i = 0` or the pair was never observed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Estimators {
    pub p: BTreeMap<(Symbol, Symbol), f64>,
    pub q: BTreeMap<(Symbol, u64), f64>,
}

impl RenewalLaw for Estimators {
    fn transition_prob(&self, from: Symbol, to: Symbol) -> f64 {
        self.p.get(&(from, to)).copied().unwrap_or(0.0)
    }

    fn sojourn_prob(&self, from: Symbol, delay: u64) -> f64 {
        self.q.get(&(from, delay)).copied().unwrap_or(0.0)
    }
}

pub fn ml_estimators(counts: &CountTables) -> Estimators {
    let ratio = |n: u64, i: Symbol| match counts.symbol_count(i) {
        0 => 0.0,
        d => n as f64 / d as f64,
    };
    Estimators {
        p: counts.transitions.iter().map(|(&(i, j), &n)| ((i, j), ratio(n, i))).collect(),
        q: counts.delays.iter().map(|(&(i, k), &n)| ((i, k), ratio(n, i))).collect(),
    }
}

/// Transition and sojourn entropy terms of one group.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GroupEntropy {
    /// `-sum N_ij ln(N_ij / N_i)`
    pub h_z: f64,
    /// `-sum N_i(k) ln(N_i(k) / N_i)`
    pub h_x: f64,
}

impl GroupEntropy {
    pub fn total(&self) -> f64 {
        self.h_z + self.h_x
    }
}

pub fn group_entropy(counts: &CountTables) -> GroupEntropy {
    let term = |n: u64, i: Symbol| {
        let d = counts.symbol_count(i);
        if n == 0 || d == 0 {
            0.0
        } else {
            -(n as f64) * (n as f64 / d as f64).ln()
        }
    };
    GroupEntropy {
        h_z: counts.transitions.iter().map(|(&(i, _), &n)| term(n, i)).sum(),
        h_x: counts.delays.iter().map(|(&(i, _), &n)| term(n, i)).sum(),
    }
}

/// Approximate log-likelihood: the product over consecutive event pairs of
/// transition and delay probabilities, ignoring the window boundaries.
pub fn approx_log_likelihood<L: RenewalLaw + ?Sized>(sub: &SubSequence, law: &L) -> Result<f64> {
    sub.ensure_strictly_increasing()?;
    Ok(sub
        .events()
        .windows(2)
        .map(|w| {
            law.transition_prob(w[0].symbol, w[1].symbol).ln()
                + law.sojourn_prob(w[0].symbol, w[1].time - w[0].time).ln()
        })
        .sum())
}

/// Last emission before the observation window and the window end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoundaryContext {
    pub prev_symbol: Symbol,
    /// Strictly negative.
    pub prev_time: i64,
    /// Window end `T`.
    pub horizon: u64,
}

impl BoundaryContext {
    pub fn new(prev_symbol: Symbol, prev_time: i64, horizon: u64) -> Result<Self> {
        if prev_time >= 0 {
            return Err(Error::invalid(format!(
                "boundary event must precede the window, got time {prev_time}"
            )));
        }
        Ok(BoundaryContext { prev_symbol, prev_time, horizon })
    }

    /// `|t_{-1}|`
    pub fn lag(&self) -> u64 {
        self.prev_time.unsigned_abs()
    }
}

/// Exact conditional log-likelihood of a sub-sequence observed in
/// `[0, T]` given the last emission before the window: boundary entry
/// factor, interior transitions and delays, and the survival of the last
/// symbol until `T`. Impossible sequences give `-inf`.
pub fn exact_log_likelihood(
    sub: &SubSequence,
    params: &EmitterParams,
    boundary: &BoundaryContext,
) -> Result<f64> {
    sub.ensure_strictly_increasing()?;
    if boundary.prev_time >= 0 {
        return Err(Error::invalid("boundary event must precede the window"));
    }
    let events = sub.events();
    if let Some(e) = events.last() {
        if e.time > boundary.horizon {
            return Err(Error::invalid(format!(
                "event at {} lies past the horizon {}",
                e.time, boundary.horizon
            )));
        }
    }
    let lag = boundary.lag();
    let z_prev = boundary.prev_symbol;
    let entry_survival = params.survival(z_prev, lag - 1);
    if entry_survival <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }

    let Some(first) = events.first() else {
        // no emission in the window: survive from lag - 1 to lag + T
        let tail = params.survival(z_prev, lag + boundary.horizon);
        return Ok(tail.ln() - entry_survival.ln());
    };

    let mut ll = params.transition_prob(z_prev, first.symbol).ln()
        + params.sojourn_prob(z_prev, first.time + lag).ln()
        - entry_survival.ln();
    ll += approx_log_likelihood(sub, params)?;
    let last = events.last().expect("non-empty");
    ll += params.survival(last.symbol, boundary.horizon - last.time).ln();
    Ok(ll)
}

/// Entropy of one candidate group, or incompatibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupScore {
    pub entropy: GroupEntropy,
    pub compatible: bool,
}

impl GroupScore {
    /// `H = h_z + h_x`, or `+inf` when incompatible.
    pub fn value(&self) -> f64 {
        if self.compatible {
            self.entropy.total()
        } else {
            f64::INFINITY
        }
    }
}

/// Scores one group from scratch.
pub fn score_group(seq: &ObservedSequence, group: &SymbolSet) -> GroupScore {
    let sub = seq.extract(group);
    if sub.has_simultaneity() {
        return GroupScore { entropy: GroupEntropy::default(), compatible: false };
    }
    let counts = count_tables(&sub).expect("times are non-decreasing without ties");
    GroupScore { entropy: group_entropy(&counts), compatible: true }
}

/// Decomposed penalized score of a partition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreResult {
    /// Penalized score; `+inf` iff incompatible.
    pub total: f64,
    /// Transition entropy summed over compatible groups.
    pub h_z: f64,
    /// Sojourn entropy summed over compatible groups.
    pub h_x: f64,
    /// Per-group `H`, in group order (`+inf` for incompatible groups).
    pub per_group: Vec<f64>,
    pub penalty: f64,
    pub compatible: bool,
    pub gamma: f64,
    pub m: usize,
    pub n: usize,
}

impl ScoreResult {
    fn assemble(scores: &[GroupScore], gamma: f64, n: usize) -> Self {
        let m = scores.len();
        let penalty = gamma * m as f64 * (n.max(1) as f64).ln();
        let compatible = scores.iter().all(|s| s.compatible);
        let per_group: Vec<f64> = scores.iter().map(GroupScore::value).collect();
        let h_z = scores.iter().filter(|s| s.compatible).map(|s| s.entropy.h_z).sum();
        let h_x = scores.iter().filter(|s| s.compatible).map(|s| s.entropy.h_x).sum();
        let total = if compatible {
            per_group.iter().sum::<f64>() + penalty
        } else {
            f64::INFINITY
        };
        ScoreResult { total, h_z, h_x, per_group, penalty, compatible, gamma, m, n }
    }
}

/// A partition with its groups and their scores, ready for move evaluation.
#[derive(Clone, Debug)]
pub struct PartitionState {
    pub partition: Partition,
    pub groups: Vec<SymbolSet>,
    pub scores: Vec<GroupScore>,
    pub result: ScoreResult,
}

impl PartitionState {
    pub fn total(&self) -> f64 {
        self.result.total
    }
}

/// Memo of group scores keyed by group content, shared by every partition
/// evaluated on one sequence.
#[derive(Debug)]
pub struct ScoreCache<'a> {
    seq: &'a ObservedSequence,
    groups: HashMap<SymbolSet, GroupScore>,
    evaluations: u64,
}

impl<'a> ScoreCache<'a> {
    pub fn new(seq: &'a ObservedSequence) -> Self {
        ScoreCache { seq, groups: HashMap::new(), evaluations: 0 }
    }

    pub fn sequence(&self) -> &'a ObservedSequence {
        self.seq
    }

    /// Number of group scores computed from scratch so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn cached_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group_score(&mut self, group: &SymbolSet) -> GroupScore {
        if let Some(s) = self.groups.get(group) {
            return *s;
        }
        let s = score_group(self.seq, group);
        self.evaluations += 1;
        self.groups.insert(group.clone(), s);
        s
    }

    fn check_alphabet(&self, partition: &Partition) -> Result<()> {
        let k = self.seq.alphabet().size();
        if partition.alphabet_size() != k {
            return Err(Error::invalid(format!(
                "partition covers {} symbols but the alphabet has {k}",
                partition.alphabet_size()
            )));
        }
        Ok(())
    }

    pub fn state(&mut self, partition: &Partition, gamma: f64) -> Result<PartitionState> {
        self.check_alphabet(partition)?;
        let groups = partition.groups();
        let scores: Vec<GroupScore> = groups.iter().map(|g| self.group_score(g)).collect();
        let result = ScoreResult::assemble(&scores, gamma, self.seq.len());
        Ok(PartitionState { partition: partition.clone(), groups, scores, result })
    }

    pub fn score(&mut self, partition: &Partition, gamma: f64) -> Result<ScoreResult> {
        Ok(self.state(partition, gamma)?.result)
    }

    /// State of `Π ⊕ mv`. Only the source and target groups are looked up or
    /// computed; the other groups reuse the scores held by `state`.
    pub fn apply_move(&mut self, state: &PartitionState, mv: &Move) -> Result<PartitionState> {
        state.partition.check_move(mv)?;
        let k = state.partition.alphabet_size();
        let m = state.groups.len();

        let mut source = state.groups[mv.from].clone();
        source.remove(mv.symbol);
        let target = if mv.to == m {
            SymbolSet::from_symbols(k, [mv.symbol])
        } else {
            let mut t = state.groups[mv.to].clone();
            t.insert(mv.symbol);
            t
        };

        let mut entries: Vec<(SymbolSet, GroupScore)> = Vec::with_capacity(m + 1);
        for (idx, (g, s)) in state.groups.iter().zip(&state.scores).enumerate() {
            if idx == mv.from {
                if !source.is_empty() {
                    let score = self.group_score(&source);
                    entries.push((source.clone(), score));
                }
            } else if idx == mv.to {
                let score = self.group_score(&target);
                entries.push((target.clone(), score));
            } else {
                entries.push((g.clone(), *s));
            }
        }
        if mv.to == m {
            let score = self.group_score(&target);
            entries.push((target, score));
        }
        // canonical group order is by smallest member
        entries.sort_by_key(|(g, _)| g.first());

        let mut assignment = vec![0; k];
        for (gi, (g, _)) in entries.iter().enumerate() {
            for s in g.iter() {
                assignment[s] = gi;
            }
        }
        let partition = Partition::from_rgs(assignment)?;
        let (groups, scores): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        let result = ScoreResult::assemble(&scores, state.result.gamma, self.seq.len());
        Ok(PartitionState { partition, groups, scores, result })
    }

    /// Score of `Π ⊕ mv`, recomputing at most the two changed groups.
    pub fn rescore_move(&mut self, state: &PartitionState, mv: &Move) -> Result<ScoreResult> {
        Ok(self.apply_move(state, mv)?.result)
    }
}

/// Penalized score of `partition` on `seq`. With a cache, group scores are
/// reused and recorded.
pub fn partition_score(
    seq: &ObservedSequence,
    partition: &Partition,
    gamma: f64,
    cache: Option<&mut ScoreCache<'_>>,
) -> Result<ScoreResult> {
    match cache {
        Some(c) => c.score(partition, gamma),
        None => ScoreCache::new(seq).score(partition, gamma),
    }
}
