//! Pulse descriptor ingestion: frequency clustering into symbols and time
//! quantization onto the receiver's LSB grid.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{Alphabet, Event, ObservedSequence, Symbol};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    /// Time of arrival in seconds.
    pub toa: f64,
    /// Carrier frequency in MHz.
    pub frequency: f64,
    /// Columns after the first two, passed through untouched.
    pub extra: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseTable {
    pub extra_headers: Vec<String>,
    /// Sorted by time of arrival.
    pub records: Vec<PulseRecord>,
}

/// Reads a pulse CSV with header `toa,frequency[,...]`. Errors carry the
/// 1-based line number of the offending row.
pub fn load_pulses<R: Read>(source: R) -> Result<PulseTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "toa" || &headers[1] != "frequency" {
        return Err(Error::Parse {
            line: 1,
            message: "expected header starting with `toa,frequency`".into(),
        });
    }
    let extra_headers = headers.iter().skip(2).map(str::to_owned).collect();

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            let raw = row.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{name} {raw:?} is not a number"),
            })
        };
        let toa = field(0, "toa")?;
        let frequency = field(1, "frequency")?;
        if !toa.is_finite() || toa < 0.0 {
            return Err(Error::Parse { line, message: format!("toa {toa} must be finite and >= 0") });
        }
        if !frequency.is_finite() {
            return Err(Error::Parse { line, message: format!("frequency {frequency} is not finite") });
        }
        let extra = row.iter().skip(2).map(str::to_owned).collect();
        records.push(PulseRecord { toa, frequency, extra });
    }
    records.sort_by(|a, b| a.toa.total_cmp(&b.toa));
    Ok(PulseTable { extra_headers, records })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Frequency neighbourhood radius in MHz.
    pub epsilon: f64,
    pub min_points: usize,
    /// Time quantum in seconds.
    pub lsb: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { epsilon: 0.05, min_points: 1, lsb: 1e-6 }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.min_points == 0 {
            return Err(Error::invalid("min_points must be at least 1"));
        }
        if !(self.lsb > 0.0 && self.lsb.is_finite()) {
            return Err(Error::invalid(format!("lsb must be positive, got {}", self.lsb)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// Symbol of each pulse, in input order.
    pub assignment: Vec<Symbol>,
    /// One symbol per cluster, labelled by its mean frequency.
    pub alphabet: Alphabet,
    /// Mean frequency of each symbol, increasing.
    pub centers: Vec<f64>,
}

/// One-dimensional DBSCAN on the frequencies. A point is core when at least
/// `min_points` points (itself included) lie within `epsilon`; cores closer
/// than `epsilon` share a cluster. Non-core points join the cluster of the
/// nearest core. Without any core point every pulse is treated as core.
pub fn cluster_frequencies(pulses: &[PulseRecord], config: &ClusteringConfig) -> Result<Clustering> {
    config.validate()?;
    if pulses.is_empty() {
        return Err(Error::invalid("cannot cluster an empty pulse list"));
    }
    let mut order: Vec<usize> = (0..pulses.len()).collect();
    order.sort_by(|&a, &b| pulses[a].frequency.total_cmp(&pulses[b].frequency));
    let f: Vec<f64> = order.iter().map(|&i| pulses[i].frequency).collect();
    let n = f.len();

    let mut core = vec![false; n];
    let (mut lo, mut hi) = (0, 0);
    for i in 0..n {
        while f[i] - f[lo] > config.epsilon {
            lo += 1;
        }
        while hi + 1 < n && f[hi + 1] - f[i] <= config.epsilon {
            hi += 1;
        }
        core[i] = hi + 1 - lo >= config.min_points;
    }
    if !core.iter().any(|&c| c) {
        core.fill(true);
    }

    // cluster ids along the sorted axis
    let mut cluster = vec![usize::MAX; n];
    let mut cores: Vec<usize> = Vec::new();
    let mut next = 0;
    for i in (0..n).filter(|&i| core[i]) {
        if let Some(&prev) = cores.last() {
            if f[i] - f[prev] > config.epsilon {
                next += 1;
            }
        }
        cluster[i] = next;
        cores.push(i);
    }
    let clusters = next + 1;
    for i in (0..n).filter(|&i| !core[i]) {
        let pos = cores.partition_point(|&c| c < i);
        let below = pos.checked_sub(1).map(|p| cores[p]);
        let above = cores.get(pos).copied();
        let nearest = match (below, above) {
            (Some(b), Some(a)) => {
                if f[i] - f[b] <= f[a] - f[i] {
                    b
                } else {
                    a
                }
            }
            (Some(b), None) => b,
            (None, Some(a)) => a,
            (None, None) => unreachable!("at least one core point exists"),
        };
        cluster[i] = cluster[nearest];
    }

    let mut sums = vec![(0.0, 0usize); clusters];
    for i in 0..n {
        sums[cluster[i]].0 += f[i];
        sums[cluster[i]].1 += 1;
    }
    let centers: Vec<f64> = sums.iter().map(|&(s, c)| s / c as f64).collect();
    let mut assignment = vec![0; n];
    for (sorted_pos, &orig) in order.iter().enumerate() {
        assignment[orig] = cluster[sorted_pos];
    }
    // clusters are numbered along the frequency axis, so centers increase
    let alphabet = Alphabet::new(center_labels(&centers))?;
    Ok(Clustering { assignment, alphabet, centers })
}

fn center_labels(centers: &[f64]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(centers.len());
    for c in centers {
        let mut l = c.to_string();
        // centers are strictly increasing; this only guards float formatting
        while labels.contains(&l) {
            l.push('+');
        }
        labels.push(l);
    }
    labels
}

/// Quantizes arrival times to `round_half_even(toa / lsb)` and rebases them
/// so the earliest pulse is at tick 0. Pulses landing on the same tick are
/// kept as simultaneous events.
pub fn discretize_times(
    pulses: &[PulseRecord],
    symbols: &[Symbol],
    alphabet: &Alphabet,
    lsb: f64,
) -> Result<ObservedSequence> {
    if !(lsb > 0.0 && lsb.is_finite()) {
        return Err(Error::invalid(format!("lsb must be positive, got {lsb}")));
    }
    if pulses.len() != symbols.len() {
        return Err(Error::invalid("one symbol is needed per pulse"));
    }
    let ticks: Vec<f64> = pulses.iter().map(|p| (p.toa / lsb).round_ties_even()).collect();
    if ticks.iter().any(|t| !t.is_finite() || *t > u64::MAX as f64 / 2.0) {
        return Err(Error::invalid("arrival time overflows the tick range"));
    }
    let origin = ticks.iter().copied().fold(f64::INFINITY, f64::min);
    let mut events: Vec<Event> = ticks
        .iter()
        .zip(symbols)
        .map(|(&t, &s)| Event::new(s, (t - origin) as u64))
        .collect();
    events.sort_by_key(|e| e.time);
    ObservedSequence::from_events(alphabet.clone(), events)
}

/// Clusters and quantizes a pulse table into an observed sequence.
pub fn ingest(table: &PulseTable, config: &ClusteringConfig) -> Result<(ObservedSequence, Clustering)> {
    let clustering = cluster_frequencies(&table.records, config)?;
    let seq = discretize_times(&table.records, &clustering.assignment, &clustering.alphabet, config.lsb)?;
    Ok((seq, clustering))
}
