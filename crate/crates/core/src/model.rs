//! Emitter parameters, the mixture generative model, and the synthetic
//! scenario generator.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{Partition, UniformPartitionSampler};
use crate::sequence::{Alphabet, Event, ObservedSequence, Symbol};

const NORMALIZATION_TOL: f64 = 1e-9;
const SUPPORT_RETRIES: usize = 100;

/// Transition and sojourn laws of a renewal process, queried by global
/// symbol index. Unknown symbols and delays have probability zero.
pub trait RenewalLaw {
    fn transition_prob(&self, from: Symbol, to: Symbol) -> f64;
    fn sojourn_prob(&self, from: Symbol, delay: u64) -> f64;
}

/// Discrete sojourn-time distribution over a finite support of positive
/// integers, stored in increasing delay order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SojournDist {
    pub support: Vec<u64>,
    pub prob: Vec<f64>,
}

impl SojournDist {
    /// Sorts the support; duplicate delays are rejected.
    pub fn new(support: Vec<u64>, prob: Vec<f64>) -> Result<Self> {
        if support.len() != prob.len() {
            return Err(Error::invalid("sojourn support and probabilities differ in length"));
        }
        let mut pairs: Vec<(u64, f64)> = support.into_iter().zip(prob).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("duplicate sojourn delay"));
        }
        let (support, prob) = pairs.into_iter().unzip();
        Ok(SojournDist { support, prob })
    }

    /// Point mass at `delay`.
    pub fn constant(delay: u64) -> Self {
        SojournDist { support: vec![delay], prob: vec![1.0] }
    }

    pub fn pmf(&self, delay: u64) -> f64 {
        self.support.binary_search(&delay).map_or(0.0, |i| self.prob[i])
    }

    /// `P(X > k)`.
    pub fn survival(&self, k: u64) -> f64 {
        self.support.iter().zip(&self.prob).filter(|(&d, _)| d > k).map(|(_, &p)| p).sum()
    }

    pub fn max_delay(&self) -> Option<u64> {
        self.support.last().copied()
    }
}

/// Parameters of one emitter: a Markov chain over its sub-alphabet and, for
/// each symbol, the law of the delay until the next emission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Sub-alphabet, sorted ascending. Local index `i` refers to `symbols[i]`.
    pub symbols: Vec<Symbol>,
    /// Row-stochastic transition matrix over local indices.
    pub transition: Vec<Vec<f64>>,
    /// Sojourn law of each local symbol.
    pub sojourn: Vec<SojournDist>,
}

impl EmitterParams {
    pub fn new(
        symbols: Vec<Symbol>,
        transition: Vec<Vec<f64>>,
        sojourn: Vec<SojournDist>,
    ) -> Result<Self> {
        let k = symbols.len();
        if k == 0 {
            return Err(Error::invalid("emitter needs at least one symbol"));
        }
        if symbols.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("emitter symbols must be strictly increasing"));
        }
        if transition.len() != k || transition.iter().any(|r| r.len() != k) {
            return Err(Error::invalid("transition matrix shape does not match sub-alphabet"));
        }
        if sojourn.len() != k {
            return Err(Error::invalid("one sojourn law is needed per symbol"));
        }
        Ok(EmitterParams { symbols, transition, sojourn })
    }

    pub fn local_index(&self, symbol: Symbol) -> Option<usize> {
        self.symbols.binary_search(&symbol).ok()
    }

    pub fn sojourn_of(&self, symbol: Symbol) -> Option<&SojournDist> {
        self.local_index(symbol).map(|i| &self.sojourn[i])
    }

    /// `R_i(k) = P(sojourn > k | symbol i)`; zero for foreign symbols.
    pub fn survival(&self, symbol: Symbol, k: u64) -> f64 {
        self.sojourn_of(symbol).map_or(0.0, |d| d.survival(k))
    }

    /// Union of the sojourn supports of all symbols.
    pub fn delay_union(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.sojourn.iter().flat_map(|d| d.support.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Simulates the emitter from `initial` emitted at `start`, returning every
    /// emission with time at most `end`.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        initial: Symbol,
        start: i64,
        end: i64,
        rng: &mut R,
    ) -> Result<Vec<(Symbol, i64)>> {
        let sampler = EmitterSampler::new(self)?;
        let mut local = self
            .local_index(initial)
            .ok_or_else(|| Error::invalid(format!("symbol {initial} not emitted by this emitter")))?;
        let mut time = start;
        let mut out = Vec::new();
        while time <= end {
            out.push((self.symbols[local], time));
            let (delay, next) = sampler.step(local, rng);
            time += delay as i64;
            local = next;
        }
        Ok(out)
    }
}

impl RenewalLaw for EmitterParams {
    fn transition_prob(&self, from: Symbol, to: Symbol) -> f64 {
        match (self.local_index(from), self.local_index(to)) {
            (Some(i), Some(j)) => self.transition[i][j],
            _ => 0.0,
        }
    }

    fn sojourn_prob(&self, from: Symbol, delay: u64) -> f64 {
        self.sojourn_of(from).map_or(0.0, |d| d.pmf(delay))
    }
}

/// Precomputed weighted samplers for one emitter.
struct EmitterSampler {
    rows: Vec<WeightedIndex<f64>>,
    delays: Vec<(WeightedIndex<f64>, Vec<u64>)>,
}

impl EmitterSampler {
    fn new(params: &EmitterParams) -> Result<Self> {
        let bad = |e| Error::invalid(format!("cannot sample from emitter: {e}"));
        let rows = params
            .transition
            .iter()
            .map(|r| WeightedIndex::new(r).map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        let delays = params
            .sojourn
            .iter()
            .map(|d| Ok((WeightedIndex::new(&d.prob).map_err(bad)?, d.support.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(EmitterSampler { rows, delays })
    }

    /// Draws the delay after local symbol `i` and the next local symbol.
    fn step<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> (u64, usize) {
        let (dist, support) = &self.delays[i];
        let delay = support[dist.sample(rng)];
        let next = self.rows[i].sample(rng);
        (delay, next)
    }
}

/// Ground-truth partition with one emitter per group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub alphabet: Alphabet,
    pub partition: Partition,
    /// `emitters[g]` emits the symbols of group `g`.
    pub emitters: Vec<EmitterParams>,
    /// First symbol of each emitter.
    pub initial_symbols: Vec<Symbol>,
}

/// A violated modelling assumption.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    /// Some transition probability is not strictly positive.
    NonPositiveTransition { emitter: usize, from: Symbol, to: Symbol, value: f64 },
    TransitionNotNormalized { emitter: usize, from: Symbol, sum: f64 },
    EmptySupport { emitter: usize, symbol: Symbol },
    NonPositiveDelay { emitter: usize, symbol: Symbol },
    /// Some sojourn probability is not strictly positive.
    NonPositiveSojourn { emitter: usize, symbol: Symbol, delay: u64, value: f64 },
    SojournNotNormalized { emitter: usize, symbol: Symbol, sum: f64 },
    /// The union of an emitter's sojourn supports has gcd > 1.
    PeriodicDelays { emitter: usize, gcd: u64 },
    /// Sub-alphabets do not match the partition groups (empty, overlapping or
    /// uncovered symbols).
    SubAlphabetMismatch { emitter: usize, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveTransition { emitter, from, to, value } => write!(
                f,
                "emitter {emitter}: transition {from}->{to} has probability {value} (must be > 0)"
            ),
            Violation::TransitionNotNormalized { emitter, from, sum } => {
                write!(f, "emitter {emitter}: transition row of {from} sums to {sum}")
            }
            Violation::EmptySupport { emitter, symbol } => {
                write!(f, "emitter {emitter}: symbol {symbol} has an empty sojourn support")
            }
            Violation::NonPositiveDelay { emitter, symbol } => {
                write!(f, "emitter {emitter}: symbol {symbol} has a zero delay in its support")
            }
            Violation::NonPositiveSojourn { emitter, symbol, delay, value } => write!(
                f,
                "emitter {emitter}: sojourn {delay} of symbol {symbol} has probability {value} (must be > 0)"
            ),
            Violation::SojournNotNormalized { emitter, symbol, sum } => {
                write!(f, "emitter {emitter}: sojourn law of symbol {symbol} sums to {sum}")
            }
            Violation::PeriodicDelays { emitter, gcd } => {
                write!(f, "emitter {emitter}: sojourn times have gcd {gcd} (must be 1)")
            }
            Violation::SubAlphabetMismatch { emitter, detail } => {
                write!(f, "emitter {emitter}: {detail}")
            }
        }
    }
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Positivity and normalization checks on one emitter's laws.
pub fn validate_emitter(params: &EmitterParams, emitter: usize) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, row) in params.transition.iter().enumerate() {
        let from = params.symbols[i];
        for (j, &value) in row.iter().enumerate() {
            if value.is_nan() || value <= 0.0 {
                out.push(Violation::NonPositiveTransition {
                    emitter,
                    from,
                    to: params.symbols[j],
                    value,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            out.push(Violation::TransitionNotNormalized { emitter, from, sum });
        }
    }
    for (i, dist) in params.sojourn.iter().enumerate() {
        let symbol = params.symbols[i];
        if dist.support.is_empty() {
            out.push(Violation::EmptySupport { emitter, symbol });
            continue;
        }
        if dist.support.contains(&0) {
            out.push(Violation::NonPositiveDelay { emitter, symbol });
        }
        for (&delay, &value) in dist.support.iter().zip(&dist.prob) {
            if value.is_nan() || value <= 0.0 {
                out.push(Violation::NonPositiveSojourn { emitter, symbol, delay, value });
            }
        }
        let sum: f64 = dist.prob.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            out.push(Violation::SojournNotNormalized { emitter, symbol, sum });
        }
    }
    out
}

/// Lists every violated modelling assumption; an empty list means the model
/// is valid.
pub fn validate_model(model: &GenerativeModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let groups = model.partition.groups();
    if model.partition.alphabet_size() != model.alphabet.size() {
        out.push(Violation::SubAlphabetMismatch {
            emitter: 0,
            detail: "partition does not cover the alphabet".into(),
        });
    }
    if groups.len() != model.emitters.len() {
        out.push(Violation::SubAlphabetMismatch {
            emitter: model.emitters.len(),
            detail: format!(
                "{} emitters for {} partition groups",
                model.emitters.len(),
                groups.len()
            ),
        });
    }
    for (e, params) in model.emitters.iter().enumerate() {
        if params.symbols.is_empty() {
            out.push(Violation::SubAlphabetMismatch { emitter: e, detail: "empty sub-alphabet".into() });
            continue;
        }
        if let Some(group) = groups.get(e) {
            let expected: Vec<Symbol> = group.iter().collect();
            if expected != params.symbols {
                out.push(Violation::SubAlphabetMismatch {
                    emitter: e,
                    detail: format!("sub-alphabet {:?} differs from group {:?}", params.symbols, expected),
                });
            }
        }
        match model.initial_symbols.get(e) {
            Some(&s) if params.local_index(s).is_some() => {}
            _ => out.push(Violation::SubAlphabetMismatch {
                emitter: e,
                detail: "initial symbol missing or outside sub-alphabet".into(),
            }),
        }
        out.extend(validate_emitter(params, e));
        let g = params.delay_union().into_iter().fold(0, gcd);
        if g != 1 {
            out.push(Violation::PeriodicDelays { emitter: e, gcd: g });
        }
    }
    out
}

/// Hyper-parameters of [`sample_model`]: the number of sojourn values per
/// symbol is drawn in `1..=k_cap` and the values in `1..=l_cap`. Unset caps
/// default to `m + 1` and `|A| + 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorCaps {
    pub k_cap: Option<usize>,
    pub l_cap: Option<usize>,
}

/// Positive point of the probability simplex of dimension `n`, drawn
/// uniformly (normalized unit exponentials).
fn simplex_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        if w.iter().all(|&x| x > 0.0) {
            let s: f64 = w.iter().sum();
            return w.into_iter().map(|x| x / s).collect();
        }
    }
}

fn sample_support<R: Rng + ?Sized>(k_cap: usize, l_cap: usize, rng: &mut R) -> Vec<u64> {
    let count = rng.random_range(1..=k_cap.min(l_cap));
    let mut support: Vec<u64> =
        index::sample(rng, l_cap, count).into_iter().map(|v| v as u64 + 1).collect();
    support.sort_unstable();
    support
}

/// Draws a random generative model whose parameters satisfy the positivity
/// and aperiodicity assumptions: a uniform partition of the alphabet, strictly
/// positive transition rows, and per-symbol sojourn laws with coprime delays
/// within each emitter.
pub fn sample_model<R: Rng + ?Sized>(
    alphabet: &Alphabet,
    rng: &mut R,
    caps: GeneratorCaps,
) -> Result<GenerativeModel> {
    let k = alphabet.size();
    let partition = UniformPartitionSampler::new(k).sample(rng);
    let m = partition.group_count();
    let k_cap = caps.k_cap.unwrap_or(m + 1);
    let l_cap = caps.l_cap.unwrap_or(k + 1);
    if k_cap == 0 || l_cap == 0 {
        return Err(Error::invalid("generator caps must be positive"));
    }

    let mut emitters = Vec::with_capacity(m);
    let mut initial_symbols = Vec::with_capacity(m);
    for group in partition.groups() {
        let symbols: Vec<Symbol> = group.iter().collect();
        let size = symbols.len();
        let transition = (0..size).map(|_| simplex_point(size, rng)).collect();

        let mut supports: Vec<Vec<u64>> = Vec::new();
        for _ in 0..SUPPORT_RETRIES {
            supports = (0..size).map(|_| sample_support(k_cap, l_cap, rng)).collect();
            if supports.iter().flatten().copied().fold(0, gcd) == 1 {
                break;
            }
        }
        if supports.iter().flatten().copied().fold(0, gcd) != 1 {
            // 1 is coprime with everything
            supports[0].insert(0, 1);
        }
        let sojourn = supports
            .into_iter()
            .map(|support| {
                let prob = simplex_point(support.len(), rng);
                SojournDist::new(support, prob)
            })
            .collect::<Result<Vec<_>>>()?;

        let initial = symbols[rng.random_range(0..size)];
        emitters.push(EmitterParams::new(symbols, transition, sojourn)?);
        initial_symbols.push(initial);
    }

    Ok(GenerativeModel { alphabet: alphabet.clone(), partition, emitters, initial_symbols })
}

/// A generated sequence together with its generating model and truth.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: GenerativeModel,
    pub sequence: ObservedSequence,
    /// Emitting group of each event.
    pub truth_labels: Vec<usize>,
    pub seed: u64,
}

impl Scenario {
    /// Samples a model and a length-`n` sequence from one seeded stream.
    /// For a fixed seed, longer sequences extend shorter ones.
    pub fn generate(alphabet_size: usize, n: usize, seed: u64, caps: GeneratorCaps) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alphabet = Alphabet::with_size(alphabet_size)?;
        let model = sample_model(&alphabet, &mut rng, caps)?;
        let mut scenario = generate_scenario(&model, n, &mut rng)?;
        scenario.seed = seed;
        Ok(scenario)
    }
}

/// Runs every emitter from time 0 and merges their emissions by
/// `(time, emitter)` until `n` events have been produced.
pub fn generate_scenario<R: Rng + ?Sized>(
    model: &GenerativeModel,
    n: usize,
    rng: &mut R,
) -> Result<Scenario> {
    if n == 0 {
        return Err(Error::invalid("requested sequence length must be at least 1"));
    }
    if model.initial_symbols.len() != model.emitters.len() {
        return Err(Error::invalid("one initial symbol is needed per emitter"));
    }
    let samplers = model.emitters.iter().map(EmitterSampler::new).collect::<Result<Vec<_>>>()?;

    // pending emission of each emitter: (time, emitter, local symbol index)
    let mut queue = BinaryHeap::new();
    for (e, (params, &initial)) in model.emitters.iter().zip(&model.initial_symbols).enumerate() {
        let local = params
            .local_index(initial)
            .ok_or_else(|| Error::invalid(format!("initial symbol {initial} not in emitter {e}")))?;
        queue.push(Reverse((0u64, e, local)));
    }

    let mut events = Vec::with_capacity(n);
    let mut truth_labels = Vec::with_capacity(n);
    while events.len() < n {
        let Reverse((time, e, local)) = queue.pop().expect("every emitter always has a pending emission");
        events.push(Event::new(model.emitters[e].symbols[local], time));
        truth_labels.push(e);
        let (delay, next) = samplers[e].step(local, rng);
        queue.push(Reverse((time + delay, e, next)));
    }

    let sequence = ObservedSequence::from_events(model.alphabet.clone(), events)?;
    Ok(Scenario { model: model.clone(), sequence, truth_labels, seed: 0 })
}
