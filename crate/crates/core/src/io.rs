//! File formats: sequence CSV (`time,symbol[,emitter]`), partition JSON and
//! model JSON.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_model, GenerativeModel};
use crate::partition::Partition;
use crate::sequence::{Alphabet, Event, ObservedSequence};

/// Sequence read from CSV, with the ground-truth emitters when present.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFile {
    pub sequence: ObservedSequence,
    pub emitters: Option<Vec<usize>>,
}

/// Orders labels numerically when they all parse as numbers, else
/// lexicographically.
fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.is_some_and(|v| v.iter().all(|x| x.is_finite())) {
        labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.partial_cmp(&y).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

#[derive(Deserialize)]
struct SequenceRow {
    time: String,
    symbol: String,
    #[serde(default)]
    emitter: Option<String>,
}

/// Reads a sequence CSV. The alphabet is the set of labels that occur, and
/// the horizon is the last event time.
pub fn read_sequence_csv<R: Read>(source: R) -> Result<SequenceFile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "time" || &headers[1] != "symbol" {
        return Err(Error::Parse { line: 1, message: "expected header `time,symbol[,emitter]`".into() });
    }
    let has_emitter = headers.get(2) == Some("emitter");

    let mut rows: Vec<(u64, String, Option<usize>)> = Vec::new();
    let mut last = 0;
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let r: SequenceRow = row.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let time: u64 = r.time.parse().map_err(|_| Error::Parse {
            line,
            message: format!("time {:?} is not a non-negative integer", r.time),
        })?;
        if time < last {
            return Err(Error::Parse { line, message: format!("time {time} precedes {last}") });
        }
        last = time;
        if r.symbol.is_empty() {
            return Err(Error::Parse { line, message: "empty symbol label".into() });
        }
        let emitter = match (has_emitter, r.emitter.as_deref()) {
            (true, Some(e)) if !e.is_empty() => Some(e.parse().map_err(|_| Error::Parse {
                line,
                message: format!("emitter {e:?} is not a non-negative integer"),
            })?),
            (true, _) => return Err(Error::Parse { line, message: "missing emitter".into() }),
            (false, _) => None,
        };
        rows.push((time, r.symbol, emitter));
    }
    if rows.is_empty() {
        return Err(Error::invalid("sequence file has no events, so no alphabet can be inferred"));
    }

    let mut labels: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    labels.sort();
    labels.dedup();
    sort_labels(&mut labels);
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let events = rows.iter().map(|(t, s, _)| Event::new(index[s.as_str()], *t)).collect();
    let emitters = has_emitter.then(|| rows.iter().map(|r| r.2.expect("checked per row")).collect());
    let sequence = ObservedSequence::from_events(Alphabet::new(labels.clone())?, events)?;
    Ok(SequenceFile { sequence, emitters })
}

pub fn write_sequence_csv<W: Write>(
    seq: &ObservedSequence,
    emitters: Option<&[usize]>,
    out: W,
) -> Result<()> {
    if emitters.is_some_and(|e| e.len() != seq.len()) {
        return Err(Error::invalid("one emitter label is needed per event"));
    }
    let mut w = csv::Writer::from_writer(out);
    match emitters {
        Some(_) => w.write_record(["time", "symbol", "emitter"])?,
        None => w.write_record(["time", "symbol"])?,
    }
    for (i, e) in seq.events().iter().enumerate() {
        let time = e.time.to_string();
        let label = seq.alphabet().label(e.symbol);
        match emitters {
            Some(em) => w.write_record([time.as_str(), label, &em[i].to_string()])?,
            None => w.write_record([time.as_str(), label])?,
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub assignment: Vec<usize>,
    pub labels: Vec<String>,
}

impl PartitionFile {
    pub fn new(partition: &Partition, alphabet: &Alphabet) -> Result<Self> {
        if partition.alphabet_size() != alphabet.size() {
            return Err(Error::invalid("partition and alphabet sizes differ"));
        }
        Ok(PartitionFile { assignment: partition.assignment().to_vec(), labels: alphabet.labels().to_vec() })
    }

    /// The partition, canonicalized.
    pub fn partition(&self) -> Result<Partition> {
        if self.assignment.len() != self.labels.len() {
            return Err(Error::invalid("assignment and labels differ in length"));
        }
        Ok(Partition::canonical(&self.assignment))
    }

    /// The partition expressed over `alphabet`, matching symbols by label.
    pub fn partition_for(&self, alphabet: &Alphabet) -> Result<Partition> {
        if self.labels.len() != alphabet.size() {
            return Err(Error::invalid(format!(
                "partition has {} labels but the alphabet has {}",
                self.labels.len(),
                alphabet.size()
            )));
        }
        let mut raw = vec![0; alphabet.size()];
        for (label, &g) in self.labels.iter().zip(&self.assignment) {
            let s = alphabet
                .index_of(label)
                .ok_or_else(|| Error::invalid(format!("label {label:?} is not in the alphabet")))?;
            raw[s] = g;
        }
        Ok(Partition::canonical(&raw))
    }
}

pub fn write_partition_json<W: Write>(partition: &Partition, alphabet: &Alphabet, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &PartitionFile::new(partition, alphabet)?)?;
    Ok(())
}

pub fn read_partition_json<R: Read>(source: R) -> Result<PartitionFile> {
    let file: PartitionFile = serde_json::from_reader(source)?;
    file.partition()?;
    Ok(file)
}

pub fn write_model_json<W: Write>(model: &GenerativeModel, out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, model)?;
    Ok(())
}

/// Reads a model and rejects it when it violates the modelling assumptions.
pub fn read_model_json<R: Read>(source: R) -> Result<GenerativeModel> {
    let model: GenerativeModel = serde_json::from_reader(source)?;
    if let Some(v) = validate_model(&model).first() {
        return Err(Error::invalid(format!("model is invalid: {v}")));
    }
    Ok(model)
}
