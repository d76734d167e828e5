//! Set partitions of the alphabet in canonical restricted-growth form.

use std::collections::HashMap;
use std::hash::Hash;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Symbol, SymbolSet};

/// A set partition of `{0..k}` stored as a restricted growth string:
/// `assignment[0] == 0` and every entry is at most one more than the maximum
/// of the entries before it. Every group index in `0..group_count` is used.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    assignment: Vec<usize>,
    group_count: usize,
}

impl Partition {
    /// Relabels arbitrary per-symbol group labels by first occurrence.
    pub fn canonical<T: Eq + Hash>(raw: &[T]) -> Self {
        let mut relabel: HashMap<&T, usize> = HashMap::new();
        let assignment: Vec<usize> = raw
            .iter()
            .map(|label| {
                let next = relabel.len();
                *relabel.entry(label).or_insert(next)
            })
            .collect();
        Partition { assignment, group_count: relabel.len() }
    }

    /// Accepts an assignment only if it is already a restricted growth string.
    pub fn from_rgs(assignment: Vec<usize>) -> Result<Self> {
        let mut blocks = 0;
        for (i, &g) in assignment.iter().enumerate() {
            if g > blocks {
                return Err(Error::invalid(format!(
                    "assignment {assignment:?} is not a restricted growth string at position {i}"
                )));
            }
            if g == blocks {
                blocks += 1;
            }
        }
        Ok(Partition { assignment, group_count: blocks })
    }

    /// Builds a partition from disjoint groups covering `{0..alphabet_size}`.
    pub fn from_groups(alphabet_size: usize, groups: &[SymbolSet]) -> Result<Self> {
        let mut raw = vec![usize::MAX; alphabet_size];
        for (g, set) in groups.iter().enumerate() {
            for s in set.iter() {
                if s >= alphabet_size {
                    return Err(Error::invalid(format!("symbol {s} outside alphabet")));
                }
                if raw[s] != usize::MAX {
                    return Err(Error::invalid(format!("symbol {s} appears in two groups")));
                }
                raw[s] = g;
            }
        }
        if let Some(s) = raw.iter().position(|&g| g == usize::MAX) {
            return Err(Error::invalid(format!("symbol {s} is not covered by any group")));
        }
        Ok(Self::canonical(&raw))
    }

    /// The partition with every symbol in one group.
    pub fn single_group(alphabet_size: usize) -> Self {
        Partition {
            assignment: vec![0; alphabet_size],
            group_count: usize::from(alphabet_size > 0),
        }
    }

    /// The partition with every symbol alone.
    pub fn singletons(alphabet_size: usize) -> Self {
        Partition { assignment: (0..alphabet_size).collect(), group_count: alphabet_size }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn group_of(&self, symbol: Symbol) -> usize {
        self.assignment[symbol]
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn alphabet_size(&self) -> usize {
        self.assignment.len()
    }

    /// Groups as symbol sets, indexed by group id.
    pub fn groups(&self) -> Vec<SymbolSet> {
        let k = self.assignment.len();
        let mut groups = vec![SymbolSet::empty(k); self.group_count];
        for (s, &g) in self.assignment.iter().enumerate() {
            groups[g].insert(s);
        }
        groups
    }

    pub fn group_size(&self, group: usize) -> usize {
        self.assignment.iter().filter(|&&g| g == group).count()
    }

    /// Checks that `mv` can be applied to this partition.
    pub fn check_move(&self, mv: &Move) -> Result<()> {
        if mv.symbol >= self.assignment.len() {
            return Err(Error::InvalidMove(format!("symbol {} outside alphabet", mv.symbol)));
        }
        if self.assignment[mv.symbol] != mv.from {
            return Err(Error::InvalidMove(format!(
                "symbol {} is in group {}, not {}",
                mv.symbol, self.assignment[mv.symbol], mv.from
            )));
        }
        if mv.to == mv.from {
            return Err(Error::InvalidMove(format!(
                "symbol {} is already in group {}",
                mv.symbol, mv.from
            )));
        }
        if mv.to > self.group_count {
            return Err(Error::InvalidMove(format!(
                "target group {} does not exist (fresh group is {})",
                mv.to, self.group_count
            )));
        }
        Ok(())
    }

    /// The canonical partition obtained by performing `mv`.
    pub fn apply_move(&self, mv: &Move) -> Result<Partition> {
        self.check_move(mv)?;
        let mut raw = self.assignment.clone();
        raw[mv.symbol] = mv.to;
        Ok(Self::canonical(&raw))
    }
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Partition::from_rgs(v)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Self {
        p.assignment
    }
}

/// One-move operator: transfer `symbol` from group `from` to group `to`.
/// `to == group_count` designates a fresh group.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Move {
    pub symbol: Symbol,
    pub from: usize,
    pub to: usize,
}

impl Move {
    pub fn new(symbol: Symbol, from: usize, to: usize) -> Self {
        Move { symbol, from, to }
    }
}

/// Iterator over all set partitions of `{0..k}` in lexicographic restricted
/// growth string order.
#[derive(Clone, Debug)]
pub struct Partitions {
    current: Vec<usize>,
    // prefix_max[i] = max(current[0..i]), with prefix_max[0] unused
    prefix_max: Vec<usize>,
    started: bool,
    done: bool,
}

/// Enumerates every set partition of a `k`-symbol alphabet exactly once.
/// `k == 0` yields the single empty partition.
pub fn enumerate_partitions(k: usize) -> Partitions {
    Partitions {
        current: vec![0; k],
        prefix_max: vec![0; k],
        started: false,
        done: false,
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
        } else {
            let k = self.current.len();
            let pivot = (1..k).rev().find(|&i| self.current[i] <= self.prefix_max[i]);
            let Some(i) = pivot else {
                self.done = true;
                return None;
            };
            self.current[i] += 1;
            for j in i + 1..k {
                self.current[j] = 0;
                self.prefix_max[j] = self.prefix_max[j - 1].max(self.current[j - 1]);
            }
        }
        let group_count = self.current.iter().max().map_or(0, |m| m + 1);
        Some(Partition { assignment: self.current.clone(), group_count })
    }
}

/// Exact Bell number `B_k`, computed with the Bell triangle.
pub fn bell_number(k: usize) -> BigUint {
    let mut row = vec![BigUint::from(1u32)];
    for _ in 0..k {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().expect("row is never empty").clone());
        for v in &row {
            let sum = next.last().expect("just pushed") + v;
            next.push(sum);
        }
        row = next;
    }
    row.swap_remove(0)
}

/// Samples set partitions uniformly over all `B_k` partitions of a
/// `k`-symbol alphabet.
///
/// Each restricted growth string prefix is extended with weights equal to the
/// number of completions below it. Counts are kept in log space so the
/// sampler works for any alphabet size.
#[derive(Clone, Debug)]
pub struct UniformPartitionSampler {
    k: usize,
    // ln_completions[r][j]: ln of the number of ways to label r more symbols
    // when j groups are already open
    ln_completions: Vec<Vec<f64>>,
}

impl UniformPartitionSampler {
    pub fn new(k: usize) -> Self {
        let mut ln_completions = vec![vec![0.0; k + 2]; k + 1];
        for r in 1..=k {
            for j in 0..=k {
                let stay = if j == 0 {
                    f64::NEG_INFINITY
                } else {
                    (j as f64).ln() + ln_completions[r - 1][j]
                };
                let open = ln_completions[r - 1][j + 1];
                ln_completions[r][j] = log_add_exp(stay, open);
            }
        }
        UniformPartitionSampler { k, ln_completions }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Partition {
        let mut assignment = Vec::with_capacity(self.k);
        let mut open = 0usize;
        for i in 0..self.k {
            let remaining = self.k - i - 1;
            let label = if open == 0 {
                0
            } else {
                let ln_stay = (open as f64).ln() + self.ln_completions[remaining][open];
                let ln_new = self.ln_completions[remaining][open + 1];
                let p_new = (ln_new - log_add_exp(ln_stay, ln_new)).exp();
                if rng.random::<f64>() < p_new {
                    open
                } else {
                    rng.random_range(0..open)
                }
            };
            if label == open {
                open += 1;
            }
            assignment.push(label);
        }
        Partition { assignment, group_count: open }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}
