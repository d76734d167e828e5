//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with a
//! non-zero status if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use deinterleave::eval::{
    benchmark_run, consistency_experiment, exact_match, v_measure, v_measure_parts, ExperimentGrid,
    LabelPair, Method, WeightMode,
};
use deinterleave::fsm::{build_fsm, check_ergodicity, events_to_state_path, fsm_path_log_likelihood};
use deinterleave::model::{sample_model, EmitterParams, GeneratorCaps, Scenario, SojournDist};
use deinterleave::partition::UniformPartitionSampler;
use deinterleave::scoring::{
    approx_log_likelihood, exact_log_likelihood, ml_estimators, CountTables, Estimators, ScoreCache,
};
use deinterleave::search::{exhaustive_search, teds, SearchConfig};
use deinterleave::{derive_seed, enumerate_partitions, partition_score, Alphabet, Move};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{close, random_params, simplex, window_sample};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rng_for(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[criterion]))
}

fn bell_enumeration() -> Outcome {
    let expected = [(3, 5usize), (5, 52), (7, 877), (9, 21147), (10, 115975)];
    let mut counts = Vec::new();
    let mut pass = true;
    let mut k10 = 0.0;
    for (k, want) in expected {
        let start = Instant::now();
        let got = enumerate_partitions(k).count();
        if k == 10 {
            k10 = start.elapsed().as_secs_f64();
        }
        pass &= got == want;
        counts.push(format!("B{k}={got}"));
    }
    pass &= k10 < 10.0;
    outcome(pass, format!("{}; k=10 in {k10:.3}s", counts.join(" ")))
}

/// Count tables whose occurrence counts equal the outgoing transition totals.
fn random_counts<R: Rng>(size: usize, max_delay: u64, rng: &mut R) -> CountTables {
    let mut counts = CountTables::default();
    for i in 0..size {
        if rng.random_bool(0.15) {
            continue;
        }
        let mut row_total = 0;
        for j in 0..size {
            let n = rng.random_range(0..=20u64);
            if n > 0 {
                counts.transitions.insert((i, j), n);
                row_total += n;
            }
        }
        if row_total == 0 {
            continue;
        }
        counts.symbol_counts.insert(i, row_total);
        for _ in 0..row_total {
            *counts.delays.entry((i, rng.random_range(1..=max_delay))).or_default() += 1;
        }
        counts.total += row_total;
    }
    counts
}

fn perturb<R: Rng>(est: &Estimators, size: usize, max_delay: u64, rng: &mut R) -> Estimators {
    let mut out = Estimators::default();
    for i in 0..size {
        let eps = rng.random_range(0.01..=1.0);
        let dir = simplex(size, rng);
        for (j, d) in dir.into_iter().enumerate() {
            out.p.insert((i, j), (1.0 - eps) * est.p.get(&(i, j)).copied().unwrap_or(0.0) + eps * d);
        }
        let eps = rng.random_range(0.01..=1.0);
        let dir = simplex(max_delay as usize, rng);
        for (k, d) in dir.into_iter().enumerate() {
            let k = k as u64 + 1;
            out.q.insert((i, k), (1.0 - eps) * est.q.get(&(i, k)).copied().unwrap_or(0.0) + eps * d);
        }
    }
    out
}

fn estimator_optimality() -> Outcome {
    let mut rng = rng_for(2);
    let (mut checks, mut violations, mut degenerate_free, mut min_gap) = (0, 0, 0, f64::INFINITY);
    for _ in 0..200 {
        let size = rng.random_range(1..=4);
        let max_delay = rng.random_range(1..=6);
        let counts = random_counts(size, max_delay, &mut rng);
        let est = ml_estimators(&counts);
        let best = counts.log_likelihood(&est);
        for _ in 0..50 {
            let law = perturb(&est, size, max_delay, &mut rng);
            let other = counts.log_likelihood(&law);
            checks += 1;
            // a perturbation is degenerate when it leaves every observed row
            // unchanged (one-symbol rows with a single delay value, say)
            let moved = counts.symbol_counts.keys().any(|&i| {
                (0..size).any(|j| law.p[&(i, j)] != est.p.get(&(i, j)).copied().unwrap_or(0.0))
                    || (1..=max_delay).any(|k| law.q[&(i, k)] != est.q.get(&(i, k)).copied().unwrap_or(0.0))
            });
            if best < other - 1e-12 || (moved && best <= other) {
                violations += 1;
            }
            if moved {
                degenerate_free += 1;
                min_gap = min_gap.min(best - other);
            }
        }
    }
    outcome(violations == 0, format!(
            "{checks} perturbations ({degenerate_free} non-degenerate), {violations} violations, min strict gap {min_gap:.3e}"
        ))
}

fn fsm_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_for(3);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..500 {
        let params = random_params(rng.random_range(1..=3), rng.random_range(1..=6), &mut rng);
        let horizon = rng.random_range(0..=50);
        let (sub, boundary) = window_sample(&params, rng.random_range(1..=12), horizon, &mut rng);
        let exact = exact_log_likelihood(&sub, &params, &boundary).unwrap();
        let fsm = build_fsm(&params).unwrap();
        let path = events_to_state_path(&sub, &boundary, horizon).unwrap();
        let oracle = fsm_path_log_likelihood(&fsm, &path);
        if !close(exact, oracle, 1e-9) {
            failures += 1;
        }
        if exact.is_finite() {
            worst = worst.max((exact - oracle).abs() / exact.abs().max(1e-300));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures == 0 && secs < 30.0,
        format!("500 instances, {failures} mismatches, worst relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn incremental_scoring() -> Outcome {
    let mut rng = rng_for(4);
    let mut failures = 0;
    let mut incompatible = 0;
    for t in 0..1000u64 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(20..=400);
        let sc = Scenario::generate(k, n, derive_seed(SEED, &[4, t]), GeneratorCaps::default()).unwrap();
        let gamma = [0.0, 1.0, 19.0][rng.random_range(0..3)];
        let part = UniformPartitionSampler::new(k).sample(&mut rng);
        let symbol = rng.random_range(0..k);
        let from = part.group_of(symbol);
        let targets: Vec<usize> = (0..=part.group_count())
            .filter(|&g| g != from && !(g == part.group_count() && part.group_size(from) == 1))
            .collect();
        let Some(&to) = targets.choose(&mut rng) else { continue };
        let mv = Move::new(symbol, from, to);

        let mut cache = ScoreCache::new(&sc.sequence);
        let state = cache.state(&part, gamma).unwrap();
        let inc = cache.rescore_move(&state, &mv).unwrap();
        let fresh = partition_score(&sc.sequence, &part.apply_move(&mv).unwrap(), gamma, None).unwrap();
        incompatible += (!fresh.compatible) as usize;
        let ok = inc.compatible == fresh.compatible
            && inc.total.is_infinite() == fresh.total.is_infinite()
            && close(inc.total, fresh.total, 1e-9)
            && inc.m == fresh.m;
        failures += (!ok) as usize;
    }
    outcome(failures == 0, format!("1000 triples ({incompatible} incompatible), {failures} mismatches"))
}

fn score_consistency() -> Outcome {
    let start = Instant::now();
    let mut rates = Vec::new();
    let mut pass = true;
    for (k, n) in [(3usize, 500usize), (5, 1000)] {
        let grid = ExperimentGrid {
            alphabet_sizes: vec![k],
            sequence_lengths: vec![n],
            scenarios_per_cell: 200,
            gamma: 0.0,
            seed: derive_seed(SEED, &[5]),
            caps: GeneratorCaps::default(),
            exhaustive_cap: 12,
        };
        let rows = consistency_experiment(&grid).unwrap();
        let rate = rows[0].success_rate;
        pass &= rate >= 0.95;
        rates.push(format!("|A|={k} n={n}: {rate:.3}"));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(pass && secs < 900.0, format!("{} ({secs:.1}s)", rates.join(", ")))
}

fn boundary_trend() -> Outcome {
    // first seeded single-emitter model on three symbols
    let alphabet = Alphabet::with_size(3).unwrap();
    let params = (0..)
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(SEED, &[6, s]));
            sample_model(&alphabet, &mut rng, GeneratorCaps::default()).unwrap()
        })
        .find(|m| m.partition.group_count() == 1)
        .unwrap()
        .emitters
        .remove(0);
    let mut rng = rng_for(6);
    let mut means = Vec::new();
    for (horizon, reps) in [(100u64, 400), (1_000, 200), (10_000, 100)] {
        let mut total = 0.0;
        for _ in 0..reps {
            let (sub, boundary) = window_sample(&params, 60, horizon, &mut rng);
            let exact = exact_log_likelihood(&sub, &params, &boundary).unwrap();
            let approx = approx_log_likelihood(&sub, &params).unwrap();
            total += (exact - approx).abs() / horizon as f64;
        }
        means.push(total / reps as f64);
    }
    let decreasing = means.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && means[2] < 1e-2;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3e}")).collect();
    outcome(pass, format!("mean |exact-approx|/T at T=1e2,1e3,1e4: {}", shown.join(", ")))
}

fn teds_vs_exhaustive() -> Outcome {
    let start = Instant::now();
    let results: Vec<(bool, bool, bool)> = (0..50u64)
        .into_par_iter()
        .map(|i| {
            let sc = Scenario::generate(7, 2000, derive_seed(SEED, &[7, i]), GeneratorCaps::default())
                .unwrap();
            let opt = exhaustive_search(&sc.sequence, 0.0).unwrap().best_score;
            let cfg = SearchConfig { seed: derive_seed(SEED, &[70, i]), ..SearchConfig::default() };
            let got = teds(&sc.sequence, &cfg).unwrap().best_score;
            let attained = close(got.total, opt.total, 1e-9);
            let below = got.total < opt.total && !attained;
            let bad_incompatible = opt.compatible && !got.compatible;
            (attained, below, bad_incompatible)
        })
        .collect();
    let attained = results.iter().filter(|r| r.0).count();
    let below = results.iter().filter(|r| r.1).count();
    let bad = results.iter().filter(|r| r.2).count();
    let secs = start.elapsed().as_secs_f64();
    let pass = attained * 10 >= 9 * 50 && below == 0 && bad == 0 && secs < 600.0;
    outcome(
        pass,
        format!("optimum attained in {attained}/50, below optimum {below}, incompatible {bad}, {secs:.1}s"),
    )
}

fn teds_quality() -> Outcome {
    let scenarios: Vec<Scenario> = (0..20u64)
        .map(|i| {
            Scenario::generate(5, 5000, derive_seed(SEED, &[8, i]), GeneratorCaps::default()).unwrap()
        })
        .collect();
    let cfg = SearchConfig { seed: derive_seed(SEED, &[80]), ..SearchConfig::default() };
    let summary = benchmark_run(&scenarios, Method::Teds, &cfg, WeightMode::Symbol).unwrap();
    let q = summary.v_measure.unwrap();
    let perfect = summary.records.iter().filter(|r| r.v_measure == 1.0).count();
    outcome(
        q.median == 1.0,
        format!("median V-measure {:.4} (min {:.4}), {perfect}/20 perfect", q.median, q.min),
    )
}

fn relabel<R: Rng>(labels: &[usize], classes: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..classes).map(|c| c * 7 + 3).collect();
    perm.shuffle(rng);
    labels.iter().map(|&l| perm[l]).collect()
}

fn metric_properties() -> Outcome {
    let mut rng = rng_for(9);
    let mut failures = BTreeMap::<&str, usize>::new();
    for _ in 0..10_000 {
        let len = rng.random_range(1..=40);
        let (ca, cb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a: Vec<usize> = (0..len).map(|_| rng.random_range(0..ca)).collect();
        let b: Vec<usize> = (0..len).map(|_| rng.random_range(0..cb)).collect();
        let v = v_measure(&LabelPair::new(a.clone(), b.clone()).unwrap());
        let swapped = v_measure(&LabelPair::new(b.clone(), a.clone()).unwrap());
        let relabeled = v_measure(
            &LabelPair::new(relabel(&a, ca, &mut rng), relabel(&b, cb, &mut rng)).unwrap(),
        );
        if !(0.0..=1.0).contains(&v) {
            *failures.entry("range").or_default() += 1;
        }
        if (v - swapped).abs() > 1e-12 {
            *failures.entry("symmetry").or_default() += 1;
        }
        if (v - relabeled).abs() > 1e-12 {
            *failures.entry("relabeling").or_default() += 1;
        }
    }
    let perfect = v_measure(&LabelPair::new(vec![3, 3, 1, 1], vec![0, 0, 1, 1]).unwrap());
    let collapsed = v_measure(&LabelPair::new(vec![0, 0, 0, 0], vec![0, 0, 1, 1]).unwrap());
    let singles = v_measure_parts(&LabelPair::new(vec![0, 1, 2, 3], vec![0, 0, 1, 1]).unwrap());
    let hand = (perfect - 1.0).abs() <= 1e-12
        && collapsed.abs() <= 1e-12
        && (singles.homogeneity - 1.0).abs() <= 1e-12
        && (singles.completeness - 0.5).abs() <= 1e-12
        && (singles.v_measure - 2.0 / 3.0).abs() <= 1e-12;
    let matches = exact_match(
        &deinterleave::Partition::canonical(&[0, 1, 0]),
        &deinterleave::Partition::canonical(&[1, 0, 1]),
    );
    outcome(
        failures.is_empty() && hand && matches,
        format!("10000 random pairs, property failures {failures:?}, hand cases {}", if hand { "ok" } else { "wrong" }),
    )
}

fn ergodicity() -> Outcome {
    let mut rng = rng_for(10);
    let mut bad = 0;
    let mut emitters = 0;
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let model = sample_model(&Alphabet::with_size(k).unwrap(), &mut rng, GeneratorCaps::default()).unwrap();
        for params in &model.emitters {
            emitters += 1;
            let r = check_ergodicity(&build_fsm(params).unwrap());
            bad += (!(r.irreducible && r.aperiodic)) as usize;
        }
    }
    let periodic = |support: Vec<u64>| {
        let prob = vec![1.0 / support.len() as f64; support.len()];
        let params =
            EmitterParams::new(vec![0], vec![vec![1.0]], vec![SojournDist::new(support, prob).unwrap()]).unwrap();
        check_ergodicity(&build_fsm(&params).unwrap())
    };
    let (two, two_four) = (periodic(vec![2]), periodic(vec![2, 4]));
    let pass = bad == 0 && !two.aperiodic && !two_four.aperiodic;
    outcome(
        pass,
        format!(
            "{emitters} sampled emitters, {bad} non-ergodic; K={{2}} period {}, K={{2,4}} period {}",
            two.period, two_four.period
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("Bell-number enumeration", bell_enumeration),
        ("estimator optimality", estimator_optimality),
        ("state-machine likelihood oracle", fsm_oracle),
        ("incremental scoring equivalence", incremental_scoring),
        ("score consistency", score_consistency),
        ("boundary term trend", boundary_trend),
        ("memetic vs exhaustive", teds_vs_exhaustive),
        ("memetic V-measure", teds_quality),
        ("metric properties", metric_properties),
        ("ergodicity checks", ergodicity),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += (!o.pass) as usize;
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
