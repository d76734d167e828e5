//! Partition-quality metrics and experiment harnesses.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GeneratorCaps, Scenario};
use crate::partition::Partition;
use crate::search::{exhaustive_search_with_cap, teds, SearchConfig, SearchReport};
use crate::seed::derive_seed;

/// Predicted and ground-truth labels of the same items.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelPair<T> {
    pub predicted: Vec<T>,
    pub truth: Vec<T>,
}

impl<T> LabelPair<T> {
    pub fn new(predicted: Vec<T>, truth: Vec<T>) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::invalid(format!(
                "label lengths differ: {} predicted, {} truth",
                predicted.len(),
                truth.len()
            )));
        }
        if predicted.is_empty() {
            return Err(Error::invalid("labelings must not be empty"));
        }
        Ok(LabelPair { predicted, truth })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VMeasure {
    pub homogeneity: f64,
    pub completeness: f64,
    pub v_measure: f64,
}

fn entropy<T: Eq + Hash>(labels: &[T]) -> f64 {
    let n = labels.len() as f64;
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    -counts.values().map(|&c| c as f64 / n * (c as f64 / n).ln()).sum::<f64>()
}

/// `H(a | b)`.
fn conditional_entropy<T: Eq + Hash>(a: &[T], b: &[T]) -> f64 {
    let n = a.len() as f64;
    let mut joint: HashMap<(&T, &T), usize> = HashMap::new();
    let mut marginal: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *marginal.entry(y).or_default() += 1;
    }
    -joint
        .iter()
        .map(|((_, y), &c)| c as f64 / n * (c as f64 / marginal[y] as f64).ln())
        .sum::<f64>()
}

/// Homogeneity, completeness and their harmonic mean, with natural logs.
pub fn v_measure_parts<T: Eq + Hash>(pair: &LabelPair<T>) -> VMeasure {
    let h_truth = entropy(&pair.truth);
    let h_pred = entropy(&pair.predicted);
    let homogeneity = if h_truth == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&pair.truth, &pair.predicted) / h_truth
    };
    let completeness = if h_pred == 0.0 {
        1.0
    } else {
        1.0 - conditional_entropy(&pair.predicted, &pair.truth) / h_pred
    };
    let (homogeneity, completeness) = (homogeneity.clamp(0.0, 1.0), completeness.clamp(0.0, 1.0));
    let v_measure = if homogeneity + completeness == 0.0 {
        0.0
    } else {
        (2.0 * homogeneity * completeness / (homogeneity + completeness)).clamp(0.0, 1.0)
    };
    VMeasure { homogeneity, completeness, v_measure }
}

pub fn v_measure<T: Eq + Hash>(pair: &LabelPair<T>) -> f64 {
    v_measure_parts(pair).v_measure
}

/// Unit counted by the V-measure of a partition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Each symbol counts once.
    #[default]
    Symbol,
    /// Each event counts once, so frequent symbols weigh more.
    Event,
}

/// V-measure of a predicted symbol partition against a scenario's truth.
pub fn partition_v_measure(predicted: &Partition, scenario: &Scenario, mode: WeightMode) -> Result<f64> {
    let truth = &scenario.model.partition;
    if predicted.alphabet_size() != truth.alphabet_size() {
        return Err(Error::invalid("predicted and true partitions cover different alphabets"));
    }
    let pair = match mode {
        WeightMode::Symbol => {
            LabelPair::new(predicted.assignment().to_vec(), truth.assignment().to_vec())?
        }
        WeightMode::Event => {
            let events = scenario.sequence.events();
            LabelPair::new(
                events.iter().map(|e| predicted.group_of(e.symbol)).collect(),
                scenario.truth_labels.clone(),
            )?
        }
    };
    Ok(v_measure(&pair))
}

/// Equality up to relabeling of the groups.
pub fn exact_match(predicted: &Partition, truth: &Partition) -> bool {
    Partition::canonical(predicted.assignment()) == Partition::canonical(truth.assignment())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub alphabet_sizes: Vec<usize>,
    pub sequence_lengths: Vec<usize>,
    pub scenarios_per_cell: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(default)]
    pub caps: GeneratorCaps,
    #[serde(default = "default_cap")]
    pub exhaustive_cap: usize,
}

fn default_cap() -> usize {
    crate::search::DEFAULT_EXHAUSTIVE_CAP
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.alphabet_sizes.is_empty() || self.sequence_lengths.is_empty() {
            return Err(Error::invalid("grid needs at least one alphabet size and one length"));
        }
        if self.alphabet_sizes.contains(&0)
            || self.sequence_lengths.contains(&0)
            || self.scenarios_per_cell == 0
        {
            return Err(Error::invalid("grid entries must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be finite and >= 0"));
        }
        if let Some(&k) = self.alphabet_sizes.iter().find(|&&k| k > self.exhaustive_cap) {
            return Err(Error::ExhaustiveCap { size: k, cap: self.exhaustive_cap });
        }
        Ok(())
    }

    /// Seed of scenario `index` for alphabet size `k`. It does not depend on
    /// the length, so cells of one alphabet size share their scenarios and
    /// longer sequences extend shorter ones.
    pub fn scenario_seed(&self, k: usize, index: usize) -> u64 {
        derive_seed(self.seed, &[k as u64, index as u64])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub alphabet_size: usize,
    pub n: usize,
    pub success_rate: f64,
    pub scenarios: usize,
}

/// Exact-match rate of exhaustive search against the generating partition
/// for every `(alphabet size, length)` cell of the grid.
pub fn consistency_experiment(grid: &ExperimentGrid) -> Result<Vec<ConsistencyRow>> {
    grid.validate()?;
    let mut rows = Vec::new();
    for &k in &grid.alphabet_sizes {
        for &n in &grid.sequence_lengths {
            let hits = (0..grid.scenarios_per_cell)
                .into_par_iter()
                .map(|i| -> Result<usize> {
                    let sc = Scenario::generate(k, n, grid.scenario_seed(k, i), grid.caps)?;
                    let report = exhaustive_search_with_cap(&sc.sequence, grid.gamma, grid.exhaustive_cap)?;
                    Ok(exact_match(&report.best_partition, &sc.model.partition) as usize)
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .sum::<usize>();
            rows.push(ConsistencyRow {
                alphabet_size: k,
                n,
                success_rate: hits as f64 / grid.scenarios_per_cell as f64,
                scenarios: grid.scenarios_per_cell,
            });
        }
    }
    Ok(rows)
}

pub fn write_consistency_csv<W: Write>(rows: &[ConsistencyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Teds,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exhaustive => "exhaustive",
            Method::Teds => "teds",
        }
    }

    /// Runs the method on `seq`. TEDS draws from `config.seed`.
    pub fn run(self, seq: &crate::sequence::ObservedSequence, config: &SearchConfig) -> Result<SearchReport> {
        match self {
            Method::Exhaustive => exhaustive_search_with_cap(seq, config.gamma, config.exhaustive_cap),
            Method::Teds => teds(seq, config),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub scenario_id: usize,
    pub method: String,
    pub v_measure: f64,
    pub seconds: f64,
    pub evaluations: u64,
}

/// Five-number summary of a sample (linear interpolation between order
/// statistics).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of an empty sample");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quantiles {
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub records: Vec<BenchmarkRecord>,
    pub v_measure: Option<Quantiles>,
}

/// Runs `method` on every scenario. Scenario `i` searches with seed
/// `derive_seed(config.seed, [i])`.
pub fn benchmark_run(
    scenarios: &[Scenario],
    method: Method,
    config: &SearchConfig,
    mode: WeightMode,
) -> Result<BenchmarkSummary> {
    let records = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, sc)| {
            let cfg = SearchConfig { seed: derive_seed(config.seed, &[i as u64]), ..config.clone() };
            let report = method.run(&sc.sequence, &cfg)?;
            Ok(BenchmarkRecord {
                scenario_id: i,
                method: method.name().into(),
                v_measure: partition_v_measure(&report.best_partition, sc, mode)?,
                seconds: report.seconds,
                evaluations: report.evaluations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let v: Vec<f64> = records.iter().map(|r| r.v_measure).collect();
    Ok(BenchmarkSummary { v_measure: Quantiles::of(&v), records })
}

pub fn write_benchmark_csv<W: Write>(records: &[BenchmarkRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
