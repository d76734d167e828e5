//! Finite-state-machine source representation of a single emitter.
//!
//! A state `(i, d)` records the last emitted symbol `i` and the `d` ticks
//! elapsed since. At each tick the source either waits (`d` increments) with
//! probability `1 - h_i(d + 1)` or emits `j` with probability
//! `p_ij * h_i(d + 1)`, where `h_i(t) = q_i(t) / sum_{k >= t} q_i(k)` is the
//! hazard of the sojourn law. States with `d >= max K^i` are unreachable and
//! not materialized.
//!
//! The path likelihood computed here is built tick by tick and shares no code
//! with [`crate::scoring::exact_log_likelihood`], which makes it a usable
//! cross-check.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{validate_emitter, EmitterParams};
use crate::scoring::BoundaryContext;
use crate::sequence::{SubSequence, Symbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FsmState {
    pub symbol: Symbol,
    pub elapsed: u64,
}

impl FsmState {
    pub fn new(symbol: Symbol, elapsed: u64) -> Self {
        FsmState { symbol, elapsed }
    }
}

/// Action taken at one tick: wait one more tick, or emit a symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Wait,
    Emit(Symbol),
}

#[derive(Clone, Debug)]
pub struct FsmSource {
    params: EmitterParams,
    // hazards[i][t - 1] = h_i(t) for t in 1..=max K^i
    hazards: Vec<Vec<f64>>,
}

/// Materializes hazard tables over the reachable states of one emitter.
pub fn build_fsm(params: &EmitterParams) -> Result<FsmSource> {
    if let Some(v) = validate_emitter(params, 0).into_iter().find(|v| {
        !matches!(v, crate::model::Violation::NonPositiveTransition { .. })
    }) {
        return Err(Error::invalid(format!("cannot build state machine: {v}")));
    }
    let hazards = params
        .sojourn
        .iter()
        .map(|dist| {
            let max = dist.max_delay().expect("validated non-empty support");
            let mut tail = 0.0;
            let mut h = vec![0.0; max as usize];
            for t in (1..=max).rev() {
                let q = dist.pmf(t);
                tail += q;
                h[t as usize - 1] = if q == 0.0 { 0.0 } else { q / tail };
            }
            h
        })
        .collect();
    Ok(FsmSource { params: params.clone(), hazards })
}

impl FsmSource {
    pub fn params(&self) -> &EmitterParams {
        &self.params
    }

    /// `h_i(t)` for `t >= 1`; zero outside `1..=max K^i` and for foreign
    /// symbols.
    pub fn hazard(&self, symbol: Symbol, t: u64) -> f64 {
        let Some(i) = self.params.local_index(symbol) else {
            return 0.0;
        };
        if t == 0 {
            return 0.0;
        }
        self.hazards[i].get(t as usize - 1).copied().unwrap_or(0.0)
    }

    fn max_delay(&self, symbol: Symbol) -> Option<u64> {
        self.params.local_index(symbol).map(|i| self.hazards[i].len() as u64)
    }

    pub fn is_reachable(&self, state: FsmState) -> bool {
        self.max_delay(state.symbol).is_some_and(|max| state.elapsed < max)
    }

    /// All reachable states, ordered by symbol then elapsed time.
    pub fn states(&self) -> Vec<FsmState> {
        self.params
            .symbols
            .iter()
            .zip(&self.hazards)
            .flat_map(|(&s, h)| (0..h.len() as u64).map(move |d| FsmState::new(s, d)))
            .collect()
    }

    /// `P(action | state)`; zero from unreachable states.
    pub fn action_prob(&self, state: FsmState, action: Action) -> f64 {
        if !self.is_reachable(state) {
            return 0.0;
        }
        let h = self.hazard(state.symbol, state.elapsed + 1);
        match action {
            Action::Wait => 1.0 - h,
            Action::Emit(j) => {
                let (Some(i), Some(j)) =
                    (self.params.local_index(state.symbol), self.params.local_index(j))
                else {
                    return 0.0;
                };
                self.params.transition[i][j] * h
            }
        }
    }

    pub fn next_state(state: FsmState, action: Action) -> FsmState {
        match action {
            Action::Wait => FsmState::new(state.symbol, state.elapsed + 1),
            Action::Emit(j) => FsmState::new(j, 0),
        }
    }

    /// Actions with positive probability from `state`, with their targets.
    pub fn successors(&self, state: FsmState) -> Vec<(Action, FsmState, f64)> {
        std::iter::once(Action::Wait)
            .chain(self.params.symbols.iter().map(|&j| Action::Emit(j)))
            .filter_map(|a| {
                let p = self.action_prob(state, a);
                (p > 0.0).then(|| (a, Self::next_state(state, a), p))
            })
            .collect()
    }
}

/// State sequence `s_0..s_T` together with the pre-window state `s_{-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatePath {
    pub initial: FsmState,
    pub states: Vec<FsmState>,
}

impl StatePath {
    /// Events recovered from the positions where the elapsed time resets.
    pub fn emissions(&self) -> Vec<(Symbol, u64)> {
        self.states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.elapsed == 0)
            .map(|(t, s)| (s.symbol, t as u64))
            .collect()
    }
}

/// Expands a sub-sequence into the per-tick state path over `[0, horizon]`,
/// starting from `s_{-1} = (z_{-1}, |t_{-1}| - 1)`.
pub fn events_to_state_path(
    sub: &SubSequence,
    boundary: &BoundaryContext,
    horizon: u64,
) -> Result<StatePath> {
    sub.ensure_strictly_increasing()?;
    if let Some(e) = sub.events().iter().find(|e| e.time > horizon) {
        return Err(Error::invalid(format!("event at {} lies past the horizon {horizon}", e.time)));
    }
    let initial = FsmState::new(boundary.prev_symbol, boundary.lag() - 1);
    let mut states = Vec::with_capacity(horizon as usize + 1);
    let mut events = sub.events().iter().peekable();
    let mut current = initial;
    for t in 0..=horizon {
        current = match events.next_if(|e| e.time == t) {
            Some(e) => FsmState::new(e.symbol, 0),
            None => FsmState::new(current.symbol, current.elapsed + 1),
        };
        states.push(current);
    }
    Ok(StatePath { initial, states })
}

/// `sum_t ln P(s_{t+1} | s_t)` for `t = -1..T-1`. Transitions not produced by
/// the next-state function, or of zero probability, give `-inf`.
pub fn fsm_path_log_likelihood(fsm: &FsmSource, path: &StatePath) -> f64 {
    let mut ll = 0.0;
    let mut prev = path.initial;
    for &next in &path.states {
        let action = if next.elapsed == 0 {
            Action::Emit(next.symbol)
        } else if next.symbol == prev.symbol && next.elapsed == prev.elapsed + 1 {
            Action::Wait
        } else {
            return f64::NEG_INFINITY;
        };
        let p = fsm.action_prob(prev, action);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        ll += p.ln();
        prev = next;
    }
    ll
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ErgodicityReport {
    pub irreducible: bool,
    pub aperiodic: bool,
    /// Period of the class containing the first state.
    pub period: u64,
    pub states: usize,
}

/// Irreducibility (mutual reachability of all states through positive
/// probability transitions) and aperiodicity (gcd of cycle lengths is 1).
pub fn check_ergodicity(fsm: &FsmSource) -> ErgodicityReport {
    let states = fsm.states();
    let index: HashMap<FsmState, usize> = states.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let n = states.len();
    let mut forward = vec![Vec::new(); n];
    let mut backward = vec![Vec::new(); n];
    for (u, &s) in states.iter().enumerate() {
        for (_, target, _) in fsm.successors(s) {
            if let Some(&v) = index.get(&target) {
                forward[u].push(v);
                backward[v].push(u);
            }
        }
    }

    let levels = bfs_levels(&forward, 0);
    let reached_back = bfs_levels(&backward, 0);
    let irreducible = n > 0
        && levels.iter().all(Option::is_some)
        && reached_back.iter().all(Option::is_some);

    // period of the strongly connected class of state 0
    let in_class = |v: usize| levels[v].is_some() && reached_back[v].is_some();
    let mut period = 0u64;
    for u in (0..n).filter(|&u| in_class(u)) {
        for &v in forward[u].iter().filter(|&&v| in_class(v)) {
            let (lu, lv) = (levels[u].expect("in class"), levels[v].expect("in class"));
            period = crate::model::gcd(period, (lu + 1).abs_diff(lv));
        }
    }
    ErgodicityReport { irreducible, aperiodic: period == 1, period, states: n }
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize) -> Vec<Option<u64>> {
    let mut level = vec![None; adjacency.len()];
    if adjacency.is_empty() {
        return level;
    }
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let next = level[u].expect("queued nodes have a level") + 1;
        for &v in &adjacency[u] {
            if level[v].is_none() {
                level[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    level
}
