mod config;
mod error;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deinterleave::eval::{
    benchmark_run, consistency_experiment, exact_match, write_benchmark_csv, write_consistency_csv,
    ExperimentGrid, Method, WeightMode,
};
use deinterleave::fsm::{build_fsm, check_ergodicity, ErgodicityReport};
use deinterleave::ingest::{ingest, load_pulses, ClusteringConfig};
use deinterleave::io::{
    read_model_json, read_partition_json, read_sequence_csv, write_model_json, write_partition_json,
    write_sequence_csv,
};
use deinterleave::model::{GeneratorCaps, Scenario};
use deinterleave::{partition_score, ObservedSequence, SearchConfig};
use serde::Serialize;

use config::*;
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "deinterleave", version, about = "Split interleaved event streams into their emitters")]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Shared {
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Penalty weight on the number of groups.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// JSON file with default values for any flag.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a random model and an interleaved sequence from it.
    Generate {
        #[arg(long, value_parser = positive)]
        alphabet: Option<usize>,
        /// Number of events.
        #[arg(long, value_parser = positive)]
        n: Option<usize>,
        #[arg(long)]
        k_cap: Option<usize>,
        #[arg(long)]
        l_cap: Option<usize>,
    },
    /// Cluster a pulse descriptor CSV into a symbol sequence.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        clustering: ClusteringArgs,
    },
    /// Score a partition of a sequence.
    Score {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        partition: Option<PathBuf>,
    },
    /// Search for the best partition of a sequence.
    Deinterleave {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Treat the input as a pulse descriptor CSV and ingest it first.
        #[arg(long)]
        pdw: bool,
        #[command(flatten)]
        clustering: ClusteringArgs,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Partition JSON to compare the result against.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Run a consistency or benchmark experiment over a grid of scenarios.
    Experiment {
        #[arg(long, value_enum)]
        kind: Option<ExperimentKind>,
        #[arg(long, value_delimiter = ',')]
        alphabet_sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        /// Scenarios per grid cell.
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, value_enum)]
        weight: Option<WeightArg>,
        #[arg(long)]
        k_cap: Option<usize>,
        #[arg(long)]
        l_cap: Option<usize>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Check that every emitter of a model is an ergodic state machine.
    FsmCheck {
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct ClusteringArgs {
    /// Frequency radius in MHz.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    min_points: Option<usize>,
    /// Time quantum in seconds.
    #[arg(long)]
    lsb: Option<f64>,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    nb_iter: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_generations: Option<usize>,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    no_aspiration: bool,
    #[arg(long)]
    exhaustive_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum MethodArg {
    Exhaustive,
    Teds,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exhaustive => Method::Exhaustive,
            MethodArg::Teds => Method::Teds,
        }
    }
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum WeightArg {
    Symbol,
    Event,
}

impl From<WeightArg> for WeightMode {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Symbol => WeightMode::Symbol,
            WeightArg::Event => WeightMode::Event,
        }
    }
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

/// Flag values layered over the config file and built-in defaults.
struct Ctx {
    file: FileConfig,
    seed: u64,
    gamma: f64,
    out: PathBuf,
}

impl Ctx {
    fn new(shared: Shared) -> Result<Self, CliError> {
        let file = match &shared.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let gamma = shared.gamma.or(file.gamma).unwrap_or(DEFAULT_GAMMA);
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(CliError::Usage(format!("--gamma must be finite and >= 0, got {gamma}")));
        }
        Ok(Ctx {
            seed: shared.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            gamma,
            out: shared.out.or(file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
            file,
        })
    }

    fn run_config<P: Serialize>(&self, command: &'static str, params: P) -> RunConfig<P> {
        RunConfig { command, seed: self.seed, gamma: self.gamma, out: self.out.clone(), params }
    }

    fn out_path(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(self.out.join(name))
    }

    fn clustering(&self, args: ClusteringArgs, input: PathBuf) -> IngestParams {
        let d = ClusteringConfig::default();
        IngestParams {
            input,
            epsilon: args.epsilon.or(self.file.epsilon).unwrap_or(d.epsilon),
            min_points: args.min_points.or(self.file.min_points).unwrap_or(d.min_points),
            lsb: args.lsb.or(self.file.lsb).unwrap_or(d.lsb),
        }
    }

    fn search(&self, args: SearchArgs) -> Result<SearchConfig, CliError> {
        let d = SearchConfig::default();
        let f = &self.file;
        let config = SearchConfig {
            gamma: self.gamma,
            nb_iter: args.nb_iter.or(f.nb_iter).unwrap_or(d.nb_iter),
            alpha: args.alpha.or(f.alpha).unwrap_or(d.alpha),
            max_generations: args.max_generations.or(f.max_generations).or(d.max_generations),
            time_budget: args.time_budget.or(f.time_budget).or(d.time_budget),
            seed: self.seed,
            aspiration: if args.no_aspiration { false } else { f.aspiration.unwrap_or(d.aspiration) },
            exhaustive_cap: args.exhaustive_cap.or(f.exhaustive_cap).unwrap_or_else(default_exhaustive_cap),
        };
        config.validate()?;
        Ok(config)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(deinterleave::Error::from)?;
    writeln!(w).map_err(|e| CliError::io(path, e))?;
    finish(w, path)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx::new(cli.shared)?;
    match cli.command {
        Command::Generate { alphabet, n, k_cap, l_cap } => {
            let params = GenerateParams {
                alphabet: required(alphabet.or(ctx.file.alphabet), "alphabet")?,
                n: required(n.or(ctx.file.n), "n")?,
                k_cap: k_cap.or(ctx.file.k_cap),
                l_cap: l_cap.or(ctx.file.l_cap),
            };
            generate(&ctx, params)
        }
        Command::Ingest { input, clustering } => {
            let input = required(input.or(ctx.file.input.clone()), "input")?;
            let params = ctx.clustering(clustering, input);
            cmd_ingest(&ctx, params)
        }
        Command::Score { input, partition } => {
            let params = ScoreParams {
                input: required(input.or(ctx.file.input.clone()), "input")?,
                partition: required(partition.or(ctx.file.partition.clone()), "partition")?,
            };
            score(&ctx, params)
        }
        Command::Deinterleave { input, pdw, clustering, method, truth, search } => {
            let input = required(input.or(ctx.file.input.clone()), "input")?;
            let pdw = (pdw || ctx.file.pdw.unwrap_or(false)).then(|| ctx.clustering(clustering, input.clone()));
            let params = DeinterleaveParams {
                input,
                pdw,
                method: method.map(Method::from).or(ctx.file.method).unwrap_or(Method::Teds),
                truth: truth.or(ctx.file.truth.clone()),
                search: ctx.search(search)?,
            };
            cmd_deinterleave(&ctx, params)
        }
        Command::Experiment { kind, alphabet_sizes, lengths, scenarios, method, weight, k_cap, l_cap, search } => {
            let f = &ctx.file;
            let params = ExperimentParams {
                kind: kind.or(f.kind).unwrap_or(ExperimentKind::Consistency),
                alphabet_sizes: required(alphabet_sizes.or(f.alphabet_sizes.clone()), "alphabet-sizes")?,
                lengths: required(lengths.or(f.lengths.clone()), "lengths")?,
                scenarios: scenarios.or(f.scenarios).unwrap_or(DEFAULT_SCENARIOS),
                method: method.map(Method::from).or(f.method).unwrap_or(Method::Teds),
                weight: weight.map(WeightMode::from).or(f.weight).unwrap_or_default(),
                k_cap: k_cap.or(f.k_cap),
                l_cap: l_cap.or(f.l_cap),
                search: ctx.search(search)?,
            };
            experiment(&ctx, params)
        }
        Command::FsmCheck { model } => {
            let params = FsmCheckParams { model: required(model.or(ctx.file.model.clone()), "model")? };
            fsm_check(&ctx, params)
        }
    }
}

fn generate(ctx: &Ctx, params: GenerateParams) -> Result<(), CliError> {
    let caps = GeneratorCaps { k_cap: params.k_cap, l_cap: params.l_cap };
    let sc = Scenario::generate(params.alphabet, params.n, ctx.seed, caps)?;

    let path = ctx.out_path("sequence.csv")?;
    let mut w = create(&path)?;
    write_sequence_csv(&sc.sequence, Some(&sc.truth_labels), &mut w)?;
    finish(w, &path)?;

    let path = ctx.out_path("model.json")?;
    let mut w = create(&path)?;
    write_model_json(&sc.model, &mut w)?;
    finish(w, &path)?;

    let path = ctx.out_path("truth.json")?;
    let mut w = create(&path)?;
    write_partition_json(&sc.model.partition, sc.sequence.alphabet(), &mut w)?;
    finish(w, &path)?;

    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("generate", params))?;
    println!(
        "generated {} events from {} emitters over {} symbols",
        sc.sequence.len(),
        sc.model.emitters.len(),
        sc.sequence.alphabet().size()
    );
    Ok(())
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    labels: &'a [String],
    centers: &'a [f64],
    counts: Vec<usize>,
}

fn ingest_file(params: &IngestParams) -> Result<(ObservedSequence, deinterleave::ingest::Clustering), CliError> {
    let table = load_pulses(open(&params.input)?)?;
    let config = ClusteringConfig { epsilon: params.epsilon, min_points: params.min_points, lsb: params.lsb };
    config.validate()?;
    Ok(ingest(&table, &config)?)
}

fn cmd_ingest(ctx: &Ctx, params: IngestParams) -> Result<(), CliError> {
    let (seq, clustering) = ingest_file(&params)?;
    let path = ctx.out_path("sequence.csv")?;
    let mut w = create(&path)?;
    write_sequence_csv(&seq, None, &mut w)?;
    finish(w, &path)?;

    let summary = ClusterSummary {
        labels: clustering.alphabet.labels(),
        centers: &clustering.centers,
        counts: seq.symbol_counts(),
    };
    write_json(&ctx.out_path("clusters.json")?, &summary)?;
    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("ingest", params))?;
    println!("{} pulses clustered into {} symbols", seq.len(), seq.alphabet().size());
    Ok(())
}

fn score(ctx: &Ctx, params: ScoreParams) -> Result<(), CliError> {
    let seq = read_sequence_csv(open(&params.input)?)?.sequence;
    let partition = read_partition_json(open(&params.partition)?)?.partition_for(seq.alphabet())?;
    let result = partition_score(&seq, &partition, ctx.gamma, None)?;
    let text = serde_json::to_string_pretty(&result).map_err(deinterleave::Error::from)?;
    // a closed pipe on stdout is not an error worth failing over
    let _ = writeln!(std::io::stdout(), "{text}");
    write_json(&ctx.out_path("score.json")?, &result)?;
    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("score", params))
}

#[derive(Serialize)]
struct DeinterleaveOutput<'a> {
    #[serde(flatten)]
    report: &'a deinterleave::SearchReport,
    labels: &'a [String],
    groups: Vec<Vec<&'a str>>,
    matches_truth: Option<bool>,
}

fn cmd_deinterleave(ctx: &Ctx, params: DeinterleaveParams) -> Result<(), CliError> {
    let seq = match &params.pdw {
        Some(p) => ingest_file(p)?.0,
        None => read_sequence_csv(open(&params.input)?)?.sequence,
    };
    let report = params.method.run(&seq, &params.search)?;
    let alphabet = seq.alphabet();
    let matches_truth = match &params.truth {
        Some(path) => {
            let truth = read_partition_json(open(path)?)?.partition_for(alphabet)?;
            Some(exact_match(&report.best_partition, &truth))
        }
        None => None,
    };
    if !report.best_score.compatible {
        eprintln!("warning: every partition puts simultaneous events in one group; the score is infinite");
    }
    let groups = report
        .best_partition
        .groups()
        .iter()
        .map(|g| g.iter().map(|s| alphabet.label(s)).collect())
        .collect();
    let output = DeinterleaveOutput { report: &report, labels: alphabet.labels(), groups, matches_truth };
    write_json(&ctx.out_path("report.json")?, &output)?;

    let path = ctx.out_path("partition.json")?;
    let mut w = create(&path)?;
    write_partition_json(&report.best_partition, alphabet, &mut w)?;
    finish(w, &path)?;
    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("deinterleave", params))?;

    println!(
        "{}: {} groups, score {}, {} evaluations",
        report.method,
        report.best_partition.group_count(),
        report.best_score.total,
        report.evaluations
    );
    if let Some(m) = matches_truth {
        println!("matches truth: {m}");
    }
    Ok(())
}

fn experiment(ctx: &Ctx, params: ExperimentParams) -> Result<(), CliError> {
    let caps = GeneratorCaps { k_cap: params.k_cap, l_cap: params.l_cap };
    let grid = ExperimentGrid {
        alphabet_sizes: params.alphabet_sizes.clone(),
        sequence_lengths: params.lengths.clone(),
        scenarios_per_cell: params.scenarios,
        gamma: ctx.gamma,
        seed: ctx.seed,
        caps,
        exhaustive_cap: params.search.exhaustive_cap,
    };
    match params.kind {
        ExperimentKind::Consistency => {
            let rows = consistency_experiment(&grid)?;
            let path = ctx.out_path("consistency.csv")?;
            let mut w = create(&path)?;
            write_consistency_csv(&rows, &mut w)?;
            finish(w, &path)?;
            for r in &rows {
                println!("|A|={} n={}: {:.3}", r.alphabet_size, r.n, r.success_rate);
            }
        }
        ExperimentKind::Benchmark => {
            if params.method == Method::Exhaustive {
                grid.validate()?;
            } else if grid.scenarios_per_cell == 0 {
                return Err(CliError::Usage("--scenarios must be positive".into()));
            }
            let mut records = Vec::new();
            for &k in &grid.alphabet_sizes {
                for &n in &grid.sequence_lengths {
                    let scenarios = (0..grid.scenarios_per_cell)
                        .map(|i| Scenario::generate(k, n, grid.scenario_seed(k, i), caps))
                        .collect::<Result<Vec<_>, _>>()?;
                    let summary = benchmark_run(&scenarios, params.method, &params.search, params.weight)?;
                    if let Some(q) = summary.v_measure {
                        println!("|A|={k} n={n}: median V {:.3} (q1 {:.3}, q3 {:.3})", q.median, q.q1, q.q3);
                    }
                    let offset = records.len();
                    records.extend(summary.records.into_iter().map(|mut r| {
                        r.scenario_id += offset;
                        r
                    }));
                }
            }
            let path = ctx.out_path("benchmark.csv")?;
            let mut w = create(&path)?;
            write_benchmark_csv(&records, &mut w)?;
            finish(w, &path)?;
        }
    }
    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("experiment", params))
}

#[derive(Serialize)]
struct EmitterCheck {
    emitter: usize,
    symbols: Vec<String>,
    #[serde(flatten)]
    report: ErgodicityReport,
}

fn fsm_check(ctx: &Ctx, params: FsmCheckParams) -> Result<(), CliError> {
    let model = read_model_json(open(&params.model)?)?;
    let checks = model
        .emitters
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Ok(EmitterCheck {
                emitter: i,
                symbols: e.symbols.iter().map(|&s| model.alphabet.label(s).to_owned()).collect(),
                report: check_ergodicity(&build_fsm(e)?),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    for c in &checks {
        let r = &c.report;
        println!(
            "emitter {} [{}]: {} states, irreducible {}, period {}",
            c.emitter,
            c.symbols.join(" "),
            r.states,
            r.irreducible,
            r.period
        );
    }
    write_json(&ctx.out_path("fsm_check.json")?, &checks)?;
    write_json(&ctx.out_path("run_config.json")?, &ctx.run_config("fsm-check", params))
}
