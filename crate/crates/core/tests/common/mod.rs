#![allow(dead_code)]

use deinterleave::model::{EmitterParams, SojournDist};
use deinterleave::scoring::BoundaryContext;
use deinterleave::{Event, SubSequence, SymbolSet};
use rand::seq::index;
use rand::Rng;
use rand_distr::Exp1;

pub fn simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-12).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random emitter over symbols `0..size` with delays in `1..=max_delay`.
pub fn random_params<R: Rng>(size: usize, max_delay: usize, rng: &mut R) -> EmitterParams {
    let symbols: Vec<usize> = (0..size).collect();
    let transition = (0..size).map(|_| simplex(size, rng)).collect();
    let sojourn = (0..size)
        .map(|_| {
            let count = rng.random_range(1..=max_delay);
            let mut support: Vec<u64> =
                index::sample(rng, max_delay, count).into_iter().map(|d| d as u64 + 1).collect();
            support.sort_unstable();
            let prob = simplex(support.len(), rng);
            SojournDist::new(support, prob).unwrap()
        })
        .collect();
    EmitterParams::new(symbols, transition, sojourn).unwrap()
}

/// Emissions of `params` in `[0, horizon]` and the last emission before 0,
/// simulating from `-lead`.
pub fn window_sample<R: Rng>(
    params: &EmitterParams,
    lead: i64,
    horizon: u64,
    rng: &mut R,
) -> (SubSequence, BoundaryContext) {
    let initial = params.symbols[rng.random_range(0..params.symbols.len())];
    let path = params.simulate(initial, -lead, horizon as i64, rng).unwrap();
    let &(prev_symbol, prev_time) = path.iter().rfind(|(_, t)| *t < 0).unwrap();
    let events: Vec<Event> =
        path.iter().filter(|(_, t)| *t >= 0).map(|&(s, t)| Event::new(s, t as u64)).collect();
    let k = params.symbols.iter().max().unwrap() + 1;
    let sub = SubSequence::new(SymbolSet::from_symbols(k, params.symbols.iter().copied()), events);
    (sub, BoundaryContext::new(prev_symbol, prev_time, horizon).unwrap())
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    if a == b {
        return true;
    }
    // the absolute floor only absorbs rounding noise around zero
    let diff = (a - b).abs();
    diff <= rel * a.abs().max(b.abs()) || diff <= 1e-12
}
