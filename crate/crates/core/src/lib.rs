//! Deinterleaving of event streams produced by several independent discrete
//! Markov renewal emitters.
//!
//! An observed sequence of `(symbol, time)` events is split into emitter
//! sub-alphabets by minimizing a penalized maximum-likelihood entropy score
//! over set partitions of the alphabet. Small alphabets are searched
//! exhaustively; larger ones use a two-member memetic search (tabu local
//! search plus a greedy likelihood crossover).
//!
//! Module map:
//!
//! * [`sequence`] and [`partition`]: alphabets, events, sub-sequences and
//!   canonical set partitions (restricted growth strings).
//! * [`model`]: emitter parameters, the generative model and the synthetic
//!   scenario generator.
//! * [`scoring`]: count tables, ML estimators, entropy terms, the global
//!   penalized score with its group cache, and exact/approximate likelihoods.
//! * [`search`]: exhaustive search and the memetic search.
//! * [`fsm`]: finite-state-machine representation of one emitter, used as an
//!   independent likelihood oracle and ergodicity checker.
//! * [`eval`]: V-measure, exact-match and experiment harnesses.
//! * [`ingest`]: pulse descriptor CSV loading, frequency clustering and time
//!   discretization.
//! * [`io`]: sequence CSV, partition JSON and model JSON formats.

pub mod error;
pub mod eval;
pub mod fsm;
pub mod ingest;
pub mod io;
pub mod model;
pub mod partition;
pub mod scoring;
pub mod search;
pub mod sequence;
mod seed;

pub use error::{Error, Result};
pub use partition::{bell_number, enumerate_partitions, Move, Partition};
pub use scoring::{partition_score, ScoreCache, ScoreResult};
pub use search::{exhaustive_search, teds, SearchConfig, SearchReport};
pub use sequence::{Alphabet, Event, ObservedSequence, SubSequence, Symbol, SymbolSet};
pub use seed::derive_seed;
