//! Exhaustive search over set partitions and the two-member memetic search
//! (tabu local search alternated with a greedy likelihood crossover).

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{enumerate_partitions, Move, Partition, UniformPartitionSampler};
use crate::scoring::{GroupScore, PartitionState, ScoreCache, ScoreResult};
use crate::sequence::{ObservedSequence, Symbol, SymbolSet};

pub const DEFAULT_EXHAUSTIVE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub gamma: f64,
    /// Tabu search iterations per call.
    pub nb_iter: usize,
    /// Tabu tenure coefficient.
    pub alpha: f64,
    pub max_generations: Option<usize>,
    /// Wall-clock cap in seconds. Runs using it are not reproducible.
    pub time_budget: Option<f64>,
    pub seed: u64,
    /// Admit a tabu move when it beats the best known score.
    pub aspiration: bool,
    pub exhaustive_cap: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            gamma: 0.0,
            nb_iter: 50,
            alpha: 0.6,
            max_generations: Some(200),
            time_budget: None,
            seed: 0,
            aspiration: true,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::invalid(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if self.nb_iter == 0 {
            return Err(Error::invalid("nb_iter must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        match (self.max_generations, self.time_budget) {
            (None, None) => Err(Error::invalid("set max_generations, time_budget, or both")),
            (_, Some(t)) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::invalid(format!("time_budget must be positive, got {t}")))
            }
            _ => Ok(()),
        }
    }

    /// `r + floor(alpha * |A|)` with `r` uniform in `1..=10`.
    pub fn draw_tenure<R: Rng + ?Sized>(&self, alphabet_size: usize, rng: &mut R) -> usize {
        rng.random_range(1..=10) + (self.alpha * alphabet_size as f64).floor() as usize
    }
}

/// Reversed moves forbidden for a number of iterations. An entry forbids
/// moving `symbol` into a group whose symbol set equals `signature`; the
/// empty signature stands for a fresh group.
#[derive(Clone, Debug, Default)]
pub struct TabuList {
    entries: HashMap<(Symbol, SymbolSet), usize>,
}

impl TabuList {
    pub fn new() -> Self {
        Self::default()
    }

    /// Forbids the move through iteration `until` inclusive.
    pub fn forbid(&mut self, symbol: Symbol, signature: SymbolSet, until: usize) {
        self.entries.insert((symbol, signature), until);
    }

    pub fn is_tabu(&self, symbol: Symbol, signature: &SymbolSet, iteration: usize) -> bool {
        // avoid cloning the signature for the lookup key
        self.entries
            .iter()
            .any(|((s, sig), &until)| *s == symbol && iteration <= until && sig == signature)
    }

    pub fn purge(&mut self, iteration: usize) {
        self.entries.retain(|_, until| iteration <= *until);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchReport {
    pub method: String,
    pub best_partition: Partition,
    pub best_score: ScoreResult,
    /// Group entropies computed from scratch.
    pub evaluations: u64,
    pub generations: usize,
    /// Incumbent total after each generation.
    pub trajectory: Vec<f64>,
    pub seconds: f64,
}

/// Global minimizer of the penalized score, ties going to the smallest
/// restricted growth string. Refuses alphabets above the default cap.
pub fn exhaustive_search(seq: &ObservedSequence, gamma: f64) -> Result<SearchReport> {
    exhaustive_search_with_cap(seq, gamma, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn exhaustive_search_with_cap(
    seq: &ObservedSequence,
    gamma: f64,
    cap: usize,
) -> Result<SearchReport> {
    let start = Instant::now();
    let k = seq.alphabet().size();
    if k > cap || k > 24 {
        return Err(Error::ExhaustiveCap { size: k, cap: cap.min(24) });
    }
    let ln_n = (seq.len().max(1) as f64).ln();

    // group values indexed by bit mask
    let mut memo = vec![f64::NAN; 1 << k];
    let mut evaluations = 0u64;
    let mut masks = vec![0usize; k];
    let mut best: Option<(f64, Partition)> = None;
    for p in enumerate_partitions(k) {
        let m = p.group_count();
        masks[..m].fill(0);
        for (s, &g) in p.assignment().iter().enumerate() {
            masks[g] |= 1 << s;
        }
        let mut total = gamma * m as f64 * ln_n;
        for &mask in &masks[..m] {
            if memo[mask].is_nan() {
                let set = SymbolSet::from_symbols(k, (0..k).filter(|s| mask >> s & 1 == 1));
                memo[mask] = crate::scoring::score_group(seq, &set).value();
                evaluations += 1;
            }
            total += memo[mask];
        }
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, p));
        }
    }
    let (_, best_partition) = best.expect("at least one partition");
    let best_score = ScoreCache::new(seq).score(&best_partition, gamma)?;
    Ok(SearchReport {
        method: "exhaustive".into(),
        best_partition,
        best_score,
        evaluations,
        generations: 0,
        trajectory: Vec::new(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn candidate_moves(state: &PartitionState) -> Vec<Move> {
    let p = &state.partition;
    let m = p.group_count();
    let mut moves = Vec::new();
    for s in 0..p.alphabet_size() {
        let from = p.group_of(s);
        for to in 0..=m {
            if to == from || (to == m && state.groups[from].len() == 1) {
                continue;
            }
            moves.push(Move::new(s, from, to));
        }
    }
    moves
}

/// Total of `state ⊕ mv` from the two changed group scores.
fn move_total(cache: &mut ScoreCache<'_>, state: &PartitionState, mv: &Move) -> f64 {
    let k = state.partition.alphabet_size();
    let m = state.groups.len();
    let mut source = state.groups[mv.from].clone();
    source.remove(mv.symbol);
    let (target, new_m) = if mv.to == m {
        (SymbolSet::from_symbols(k, [mv.symbol]), m + 1)
    } else {
        let mut t = state.groups[mv.to].clone();
        t.insert(mv.symbol);
        (t, m)
    };
    let new_m = if source.is_empty() { new_m - 1 } else { new_m };

    let mut total: f64 = state
        .scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != mv.from && i != mv.to)
        .map(|(_, s)| s.value())
        .sum();
    if !source.is_empty() {
        total += cache.group_score(&source).value();
    }
    total += cache.group_score(&target).value();
    let n = cache.sequence().len().max(1) as f64;
    total + state.result.gamma * new_m as f64 * n.ln()
}

/// Tabu local search from `start`; returns the best partition encountered.
pub fn tabu_ap<R: Rng + ?Sized>(
    start: &Partition,
    config: &SearchConfig,
    rng: &mut R,
    cache: &mut ScoreCache<'_>,
) -> Result<Partition> {
    let state = cache.state(start, config.gamma)?;
    Ok(tabu_ap_state(state, config, rng, cache, f64::INFINITY)?.partition)
}

fn tabu_ap_state<R: Rng + ?Sized>(
    start: PartitionState,
    config: &SearchConfig,
    rng: &mut R,
    cache: &mut ScoreCache<'_>,
    incumbent: f64,
) -> Result<PartitionState> {
    let k = start.partition.alphabet_size();
    let mut tabu = TabuList::new();
    let mut best = start.clone();
    let mut current = start;
    let mut ties: Vec<Move> = Vec::new();
    for iteration in 0..config.nb_iter {
        let aspiration_level = best.total().min(incumbent);
        let m = current.groups.len();
        let empty = SymbolSet::empty(k);
        let mut best_total = f64::INFINITY;
        ties.clear();
        for mv in candidate_moves(&current) {
            let signature = if mv.to == m { &empty } else { &current.groups[mv.to] };
            let total = move_total(cache, &current, &mv);
            let admissible = !tabu.is_tabu(mv.symbol, signature, iteration)
                || (config.aspiration && total < aspiration_level);
            if !admissible {
                continue;
            }
            if total < best_total || ties.is_empty() {
                best_total = total;
                ties.clear();
                ties.push(mv);
            } else if total == best_total {
                ties.push(mv);
            }
        }
        if ties.is_empty() {
            continue;
        }
        let mv = ties[rng.random_range(0..ties.len())];
        let mut reverse = current.groups[mv.from].clone();
        reverse.remove(mv.symbol);
        let tenure = config.draw_tenure(k, rng);
        tabu.forbid(mv.symbol, reverse, iteration + tenure);
        tabu.purge(iteration);

        current = cache.apply_move(&current, &mv)?;
        if current.total() < best.total() {
            best = current.clone();
        }
    }
    Ok(best)
}

/// Greedy likelihood crossover. Alternating between the parents, starting
/// with `parent_a`, the group with the lowest entropy per symbol is copied to
/// the offspring and its symbols are withdrawn from both parents.
pub fn glpx(
    parent_a: &Partition,
    parent_b: &Partition,
    cache: &mut ScoreCache<'_>,
) -> Result<Partition> {
    let k = parent_a.alphabet_size();
    if parent_b.alphabet_size() != k {
        return Err(Error::invalid("parents cover different alphabets"));
    }
    let mut parents = [parent_a.groups(), parent_b.groups()];
    let mut offspring = Vec::new();
    let mut assigned = 0;
    let mut turn = 0;
    while assigned < k {
        let mut chosen: Option<(f64, usize)> = None;
        for (i, g) in parents[turn].iter().enumerate() {
            let ratio = glpx_ratio(cache.group_score(g), g.len());
            if chosen.is_none_or(|(r, _)| ratio < r) {
                chosen = Some((ratio, i));
            }
        }
        let (_, idx) = chosen.expect("unassigned symbols remain in both parents");
        let group = parents[turn][idx].clone();
        for parent in &mut parents {
            for g in parent.iter_mut() {
                g.difference_with(&group);
            }
            parent.retain(|g| !g.is_empty());
        }
        assigned += group.len();
        offspring.push(group);
        turn ^= 1;
    }
    Partition::from_groups(k, &offspring)
}

fn glpx_ratio(score: GroupScore, size: usize) -> f64 {
    score.value() / size as f64
}

/// Memetic search with a fresh ChaCha8 stream seeded from `config.seed`.
pub fn teds(seq: &ObservedSequence, config: &SearchConfig) -> Result<SearchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    teds_with_rng(seq, config, &mut rng)
}

pub fn teds_with_rng<R: Rng + ?Sized>(
    seq: &ObservedSequence,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<SearchReport> {
    config.validate()?;
    let start = Instant::now();
    let deadline = config.time_budget.map(|t| start + Duration::from_secs_f64(t));
    let k = seq.alphabet().size();
    let mut cache = ScoreCache::new(seq);

    if k == 1 {
        let best_partition = Partition::single_group(1);
        let best_score = cache.score(&best_partition, config.gamma)?;
        return Ok(SearchReport {
            method: "teds".into(),
            best_partition,
            best_score,
            evaluations: cache.evaluations(),
            generations: 0,
            trajectory: Vec::new(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let sampler = UniformPartitionSampler::new(k);
    let mut p1 = sampler.sample(rng);
    let mut p2 = sampler.sample(rng);
    let mut best = cache.state(&sampler.sample(rng), config.gamma)?;
    let mut trajectory = Vec::new();
    let mut generations = 0;
    loop {
        if config.max_generations.is_some_and(|g| generations >= g)
            || deadline.is_some_and(|d| Instant::now() >= d)
        {
            break;
        }
        let incumbent = best.total();
        let s1 = cache.state(&p1, config.gamma)?;
        let s1 = tabu_ap_state(s1, config, rng, &mut cache, incumbent)?;
        let s2 = cache.state(&p2, config.gamma)?;
        let s2 = tabu_ap_state(s2, config, rng, &mut cache, incumbent)?;
        if s1.total() < best.total() {
            best = s1.clone();
        }
        if s2.total() < best.total() {
            best = s2.clone();
        }
        p1 = glpx(&s1.partition, &s2.partition, &mut cache)?;
        p2 = glpx(&s2.partition, &s1.partition, &mut cache)?;
        generations += 1;
        trajectory.push(best.total());
    }

    let best_score = cache.score(&best.partition, config.gamma)?;
    Ok(SearchReport {
        method: "teds".into(),
        best_partition: best.partition,
        best_score,
        evaluations: cache.evaluations(),
        generations,
        trajectory,
        seconds: start.elapsed().as_secs_f64(),
    })
}
