//! Alphabets, events and observed sequences.

use std::collections::HashSet;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a symbol in its [`Alphabet`].
pub type Symbol = usize;

/// Finite alphabet of symbols, referenced by index `0..size`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("alphabet must contain at least one symbol"));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::invalid(format!("duplicate symbol label {l:?}")));
            }
        }
        Ok(Alphabet { labels })
    }

    /// Alphabet of `size` symbols with generated labels: `a`..`z` when it
    /// fits, zero-padded `s00`, `s01`, ... otherwise. Both label schemes sort
    /// lexicographically in index order.
    pub fn with_size(size: usize) -> Result<Self> {
        let labels = if size <= 26 {
            (0..size).map(|i| ((b'a' + i as u8) as char).to_string()).collect()
        } else {
            let width = (size - 1).to_string().len();
            (0..size).map(|i| format!("s{i:0width$}")).collect()
        };
        Alphabet::new(labels)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, symbol: Symbol) -> &str {
        &self.labels[symbol]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<Symbol> {
        self.labels.iter().position(|l| l == label)
    }
}

/// One emission: a symbol at an integer time tick.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub symbol: Symbol,
    pub time: u64,
}

impl Event {
    pub fn new(symbol: Symbol, time: u64) -> Self {
        Event { symbol, time }
    }
}

/// Set of symbols (a candidate sub-alphabet), hashable by content.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolSet(FixedBitSet);

impl SymbolSet {
    pub fn empty(alphabet_size: usize) -> Self {
        SymbolSet(FixedBitSet::with_capacity(alphabet_size))
    }

    pub fn from_symbols(alphabet_size: usize, symbols: impl IntoIterator<Item = Symbol>) -> Self {
        let mut set = Self::empty(alphabet_size);
        for s in symbols {
            set.insert(s);
        }
        set
    }

    pub fn full(alphabet_size: usize) -> Self {
        Self::from_symbols(alphabet_size, 0..alphabet_size)
    }

    pub fn insert(&mut self, symbol: Symbol) {
        self.0.insert(symbol);
    }

    pub fn remove(&mut self, symbol: Symbol) {
        self.0.set(symbol, false);
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        self.0.contains(symbol)
    }

    pub fn len(&self) -> usize {
        self.0.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_clear()
    }

    /// Smallest symbol in the set.
    pub fn first(&self) -> Option<Symbol> {
        self.0.ones().next()
    }

    pub fn iter(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.0.ones()
    }

    pub fn difference_with(&mut self, other: &SymbolSet) {
        self.0.difference_with(&other.0);
    }

    pub fn capacity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Debug for SymbolSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Time-ordered events over an alphabet, observed in the window `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSequence {
    alphabet: Alphabet,
    events: Vec<Event>,
    horizon: u64,
    // positions of each symbol's events, for fast sub-sequence extraction
    by_symbol: Vec<Vec<u32>>,
}

impl ObservedSequence {
    pub fn new(alphabet: Alphabet, events: Vec<Event>, horizon: u64) -> Result<Self> {
        let size = alphabet.size();
        let mut by_symbol = vec![Vec::new(); size];
        let mut last = 0;
        for (pos, e) in events.iter().enumerate() {
            if e.symbol >= size {
                return Err(Error::invalid(format!(
                    "event {pos} has symbol {} outside alphabet of size {size}",
                    e.symbol
                )));
            }
            if e.time < last {
                return Err(Error::invalid(format!(
                    "event {pos} at time {} precedes time {last}",
                    e.time
                )));
            }
            last = e.time;
            by_symbol[e.symbol].push(pos as u32);
        }
        if horizon < last {
            return Err(Error::invalid(format!(
                "horizon {horizon} is before the last event time {last}"
            )));
        }
        Ok(ObservedSequence { alphabet, events, horizon, by_symbol })
    }

    /// Sequence whose horizon is the time of its last event (0 when empty).
    pub fn from_events(alphabet: Alphabet, events: Vec<Event>) -> Result<Self> {
        let horizon = events.last().map_or(0, |e| e.time);
        Self::new(alphabet, events, horizon)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Number of occurrences of each symbol.
    pub fn symbol_counts(&self) -> Vec<usize> {
        self.by_symbol.iter().map(Vec::len).collect()
    }

    /// Keeps the events whose symbol is in `group`, preserving order.
    pub fn extract(&self, group: &SymbolSet) -> SubSequence {
        let mut positions: Vec<u32> = group
            .iter()
            .filter(|&s| s < self.by_symbol.len())
            .flat_map(|s| self.by_symbol[s].iter().copied())
            .collect();
        positions.sort_unstable();
        let events = positions.into_iter().map(|p| self.events[p as usize]).collect();
        SubSequence { symbols: group.clone(), events }
    }
}

/// Events of one candidate sub-alphabet, in time order.
#[derive(Clone, Debug, PartialEq)]
pub struct SubSequence {
    symbols: SymbolSet,
    events: Vec<Event>,
}

impl SubSequence {
    pub fn new(symbols: SymbolSet, events: Vec<Event>) -> Self {
        SubSequence { symbols, events }
    }

    pub fn symbols(&self) -> &SymbolSet {
        &self.symbols
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// First time tick shared by two consecutive events, if any. A single
    /// emitter cannot produce two events at the same tick.
    pub fn simultaneity(&self) -> Option<u64> {
        self.events.windows(2).find(|w| w[0].time == w[1].time).map(|w| w[0].time)
    }

    pub fn has_simultaneity(&self) -> bool {
        self.simultaneity().is_some()
    }

    /// Fails unless the event times are strictly increasing.
    pub fn ensure_strictly_increasing(&self) -> Result<()> {
        match self.events.windows(2).find(|w| w[1].time <= w[0].time) {
            Some(w) if w[0].time == w[1].time => Err(Error::Simultaneous { time: w[0].time }),
            Some(w) => Err(Error::invalid(format!(
                "event times out of order: {} then {}",
                w[0].time, w[1].time
            ))),
            None => Ok(()),
        }
    }
}

/// Free-function form of [`ObservedSequence::extract`].
pub fn extract_subsequence(seq: &ObservedSequence, group: &SymbolSet) -> SubSequence {
    seq.extract(group)
}
