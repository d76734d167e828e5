use deinterleave::eval::{exact_match, v_measure, LabelPair};
use deinterleave::ingest::{cluster_frequencies, ingest, ClusteringConfig, PulseRecord, PulseTable};
use deinterleave::io::{read_sequence_csv, write_sequence_csv};
use deinterleave::model::{GeneratorCaps, Scenario};
use deinterleave::partition::UniformPartitionSampler;
use deinterleave::search::{exhaustive_search, glpx, tabu_ap, teds, SearchConfig};
use deinterleave::{enumerate_partitions, partition_score, Partition, ScoreCache};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scenario(k: usize, n: usize, seed: u64) -> Scenario {
    Scenario::generate(k, n, seed, GeneratorCaps::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_ignores_group_labels(seed in any::<u64>(), raw in prop::collection::vec(0usize..4, 5)) {
        let sc = scenario(5, 200, seed);
        let p = Partition::canonical(&raw);
        let relabeled: Vec<usize> = raw.iter().map(|&g| 10 - g).collect();
        let a = partition_score(&sc.sequence, &p, 2.0, None).unwrap();
        let b = partition_score(&sc.sequence, &Partition::canonical(&relabeled), 2.0, None).unwrap();
        prop_assert_eq!(a.total, b.total);
    }

    #[test]
    fn cached_and_fresh_scores_agree(seed in any::<u64>(), gamma in 0.0f64..20.0) {
        let sc = scenario(6, 300, seed);
        let mut cache = ScoreCache::new(&sc.sequence);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = UniformPartitionSampler::new(6);
        for _ in 0..10 {
            let p = sampler.sample(&mut rng);
            let cached = cache.score(&p, gamma).unwrap();
            let fresh = partition_score(&sc.sequence, &p, gamma, None).unwrap();
            prop_assert_eq!(cached, fresh);
        }
        prop_assert!(cache.evaluations() as usize == cache.cached_groups());
    }

    #[test]
    fn glpx_yields_valid_partitions(seed in any::<u64>()) {
        let sc = scenario(7, 300, seed);
        let mut cache = ScoreCache::new(&sc.sequence);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let sampler = UniformPartitionSampler::new(7);
        let (a, b) = (sampler.sample(&mut rng), sampler.sample(&mut rng));
        let child = glpx(&a, &b, &mut cache).unwrap();
        prop_assert_eq!(child.alphabet_size(), 7);
        prop_assert_eq!(Partition::canonical(child.assignment()), child.clone());
        prop_assert_eq!(glpx(&a, &a, &mut cache).unwrap(), a);
    }

    #[test]
    fn v_measure_is_bounded_and_symmetric(
        a in prop::collection::vec(0u8..5, 1..30),
        salt in prop::collection::vec(0u8..5, 30),
    ) {
        let b: Vec<u8> = a.iter().zip(&salt).map(|(x, s)| (x + s) % 3).collect();
        let v = v_measure(&LabelPair::new(a.clone(), b.clone()).unwrap());
        let w = v_measure(&LabelPair::new(b, a.clone()).unwrap());
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((v - w).abs() < 1e-12);
        prop_assert!((v_measure(&LabelPair::new(a.clone(), a).unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symbol_count_shrinks_as_epsilon_grows(
        freqs in prop::collection::vec(1000.0f64..1010.0, 1..60),
        e1 in 0.001f64..2.0,
        e2 in 0.001f64..2.0,
    ) {
        let pulses: Vec<PulseRecord> = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| PulseRecord { toa: i as f64, frequency: f, extra: vec![] })
            .collect();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let cfg = |epsilon| ClusteringConfig { epsilon, min_points: 1, lsb: 1.0 };
        let fine = cluster_frequencies(&pulses, &cfg(lo)).unwrap();
        let coarse = cluster_frequencies(&pulses, &cfg(hi)).unwrap();
        prop_assert!(coarse.alphabet.size() <= fine.alphabet.size());
        prop_assert_eq!(cluster_frequencies(&pulses, &cfg(lo)).unwrap(), fine);
    }
}

#[test]
fn exhaustive_recovers_truth_on_a_long_sequence() {
    let sc = scenario(5, 5000, 7);
    let r = exhaustive_search(&sc.sequence, 0.0).unwrap();
    assert!(exact_match(&r.best_partition, &sc.model.partition));
}

#[test]
fn exhaustive_is_the_minimum_over_all_partitions() {
    for seed in 0..5 {
        let sc = scenario(5, 400, seed);
        let r = exhaustive_search(&sc.sequence, 3.0).unwrap();
        let mut cache = ScoreCache::new(&sc.sequence);
        for p in enumerate_partitions(5) {
            let s = cache.score(&p, 3.0).unwrap().total;
            assert!(r.best_score.total <= s + 1e-9 * s.abs().max(1.0));
            if s == r.best_score.total {
                // ties resolve to the earliest restricted growth string
                assert!(r.best_partition.assignment() <= p.assignment());
            }
        }
    }
}

/// Tabu search alone, from 50 random starts per instance, lands on the
/// exhaustive optimum most of the time. The measured rate on these seeds is
/// well above the 60% floor asserted here.
#[test]
fn tabu_search_from_random_starts_finds_the_optimum() {
    let mut hits = 0;
    let mut trials = 0;
    for seed in 0..4 {
        let sc = scenario(7, 1000, 100 + seed);
        let opt = exhaustive_search(&sc.sequence, 0.0).unwrap().best_score.total;
        let mut cache = ScoreCache::new(&sc.sequence);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = UniformPartitionSampler::new(7);
        let cfg = SearchConfig::default();
        for _ in 0..50 {
            let start = sampler.sample(&mut rng);
            let out = tabu_ap(&start, &cfg, &mut rng, &mut cache).unwrap();
            let s = cache.score(&out, 0.0).unwrap().total;
            let start_score = cache.score(&start, 0.0).unwrap().total;
            assert!(s <= start_score);
            hits += ((s - opt).abs() <= 1e-9 * opt.abs().max(1.0)) as usize;
            trials += 1;
        }
    }
    let rate = hits as f64 / trials as f64;
    assert!(rate >= 0.6, "tabu search reached the optimum in {hits}/{trials}");
}

#[test]
fn teds_is_deterministic_and_monotone() {
    let sc = scenario(8, 1500, 3);
    let cfg = SearchConfig { max_generations: Some(15), seed: 9, ..SearchConfig::default() };
    let a = teds(&sc.sequence, &cfg).unwrap();
    let b = teds(&sc.sequence, &cfg).unwrap();
    assert_eq!(a.best_partition, b.best_partition);
    assert_eq!(a.trajectory, b.trajectory);
    assert_eq!(a.evaluations, b.evaluations);
    assert!(a.trajectory.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(a.trajectory.last().copied(), Some(a.best_score.total));
    assert!(a.best_score.compatible);
}

#[test]
fn teds_without_aspiration_still_runs() {
    let sc = scenario(6, 800, 12);
    let cfg = SearchConfig { aspiration: false, max_generations: Some(20), ..SearchConfig::default() };
    let r = teds(&sc.sequence, &cfg).unwrap();
    let opt = exhaustive_search(&sc.sequence, 0.0).unwrap();
    assert!(r.best_score.total >= opt.best_score.total - 1e-9 * opt.best_score.total.abs());
}

#[test]
fn time_budget_stops_the_search() {
    let sc = scenario(12, 3000, 1);
    let cfg = SearchConfig { max_generations: None, time_budget: Some(0.5), ..SearchConfig::default() };
    let r = teds(&sc.sequence, &cfg).unwrap();
    assert!(r.seconds < 10.0);
    assert!(r.generations >= 1);
}

#[test]
fn exported_sequences_reingest_identically() {
    let sc = (0..)
        .map(|s| scenario(4, 500, s))
        .find(|sc| sc.sequence.symbol_counts().iter().all(|&c| c > 0))
        .unwrap();
    let lsb = 1e-6;
    let centers = [1000.0, 1200.0, 1400.0, 1600.0];
    let records = sc
        .sequence
        .events()
        .iter()
        .map(|e| PulseRecord { toa: e.time as f64 * lsb, frequency: centers[e.symbol], extra: vec![] })
        .collect();
    let table = PulseTable { extra_headers: vec![], records };
    let (seq, clustering) = ingest(&table, &ClusteringConfig { epsilon: 1.0, min_points: 1, lsb }).unwrap();
    assert_eq!(clustering.centers, centers);
    let events: Vec<_> = seq.events().iter().map(|e| (e.symbol, e.time)).collect();
    let original: Vec<_> = sc.sequence.events().iter().map(|e| (e.symbol, e.time)).collect();
    assert_eq!(events, original);

    // and through the sequence CSV
    let mut buf = Vec::new();
    write_sequence_csv(&seq, None, &mut buf).unwrap();
    assert_eq!(read_sequence_csv(buf.as_slice()).unwrap().sequence, seq);
}
