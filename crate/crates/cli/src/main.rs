//! `actfs`: active feature selection from the command line.

use std::fs::{self, OpenOptions};
use std::io::{self, BufWriter, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actfs_core::afs::{afs_run, AfsConfig, AfsOutcome, Aggregation};
use actfs_core::baselines::{exact_entropies, selection_gap};
use actfs_core::dataset::{
    load_csv, planted_dataset, DatasetOracle, InteractiveOracle, QuantizedDataset, DEFAULT_BINS,
};
use actfs_core::harness::{
    ablation_variants, fixed_q_family, run_selection_bench, run_single_feature_family,
    uniform_q_family, write_selection_csv, write_single_feature_csv, AfsSettings, Method,
    SelectionScenario, SingleFeatureScenario, FAMILY_ALPHAS, FAMILY_SIZES,
};
use actfs_core::single_feature::Strategy;
use actfs_core::Error;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;

#[derive(Parser)]
#[command(name = "actfs", version, about = "Active feature selection under a label budget")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-feature estimation benchmark from a TOML scenario file.
    SingleBench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for single_feature_results.csv; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select k features from a CSV by labeling at most `budget` rows.
    Select(SelectArgs),
    /// Compare AFS with the RANDOM and CORESET baselines.
    Compare(BenchArgs),
    /// Compare AFS with its ablations.
    Ablate(BenchArgs),
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long, required_unless_present = "planted", conflicts_with = "planted")]
    data: Option<PathBuf>,
    /// Column holding the binary label.
    #[arg(long)]
    label: Option<String>,
    /// Equal-frequency bins for numeric columns.
    #[arg(long, default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Use a synthetic table with one informative binary feature (f0).
    #[arg(long)]
    planted: bool,
    #[arg(long, default_value_t = 2000)]
    planted_rows: usize,
    #[arg(long, default_value_t = 10)]
    planted_features: usize,
}

#[derive(Args)]
struct AfsArgs {
    #[arg(long, default_value_t = AfsConfig::DEFAULT_DELTA)]
    delta: f64,
    /// Safeguard window in steps, or `inf` to disable.
    #[arg(long, default_value = "30", value_parser = parse_lambda)]
    lambda: Lambda,
    #[arg(long, default_value = "l1", value_parser = parse_psi)]
    psi: Aggregation,
}

#[derive(Clone, Copy)]
struct Lambda(Option<usize>);

fn parse_lambda(s: &str) -> Result<Lambda, String> {
    match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "none" => Ok(Lambda(None)),
        other => match other.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Lambda(Some(n))),
            _ => Err(format!("expected a positive integer or `inf`, got `{s}`")),
        },
    }
}

fn parse_psi(s: &str) -> Result<Aggregation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OracleKind {
    Dataset,
    Interactive,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    budget: usize,
    #[command(flatten)]
    afs: AfsArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "dataset")]
    oracle: OracleKind,
    /// Write the per-step trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Comma-separated label budgets.
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    replicates: usize,
    #[command(flatten)]
    afs: AfsArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for selection_results.csv; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flat scenario file for `single-bench`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchConfig {
    /// `fixed`, `uniform` or `custom`.
    family: String,
    budgets: Vec<usize>,
    #[serde(default = "default_replicates")]
    replicates: usize,
    #[serde(default = "default_delta")]
    delta: f64,
    strategies: Option<Vec<String>>,
    sizes: Option<Vec<usize>>,
    alphas: Option<Vec<f64>>,
    #[serde(default = "default_per_size")]
    per_size: usize,
    name: Option<String>,
    q: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
}

fn default_replicates() -> usize {
    1000
}

fn default_delta() -> f64 {
    AfsConfig::DEFAULT_DELTA
}

fn default_per_size() -> usize {
    5
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_)
            | Error::InvalidDelta(_)
            | Error::BudgetExceedsPool { .. }
            | Error::UnknownColumn(_) => Failure::Usage(e.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::SingleBench { config, seed, out } => single_bench(&config, seed, out.as_deref()),
        Command::Select(args) => select(args),
        Command::Compare(args) => bench(args, Method::comparison_set()),
        Command::Ablate(args) => bench(args, ablation_variants()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn load(args: &DataArgs, seed: u64) -> Result<(String, QuantizedDataset), Failure> {
    if args.planted {
        let ds = planted_dataset(args.planted_rows, args.planted_features, [0.05, 0.95], seed)?;
        return Ok(("planted".into(), ds));
    }
    let path = args.data.as_ref().expect("clap enforces --data or --planted");
    let ds = load_csv(path, args.label.as_deref(), args.bins)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    Ok((name, ds))
}

/// Stdout, or `dir/file` when a directory is given.
fn output(dir: Option<&Path>, file: &str) -> Result<Box<dyn Write>, Failure> {
    match dir {
        None => Ok(Box::new(io::stdout().lock())),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join(file);
            let f = fs::File::create(&path).map_err(|e| io_failure(&path, e))?;
            Ok(Box::new(BufWriter::new(f)))
        }
    }
}

fn single_bench(config: &Path, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let text = fs::read_to_string(config).map_err(|e| io_failure(config, e))?;
    let cfg: BenchConfig =
        toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", config.display())))?;
    let strategies = match &cfg.strategies {
        None => Strategy::standard_set(),
        Some(names) => names
            .iter()
            .map(|n| n.parse::<Strategy>())
            .collect::<Result<_, _>>()?,
    };
    let sizes = cfg.sizes.clone().unwrap_or_else(|| FAMILY_SIZES.to_vec());
    let mut scenarios = match cfg.family.as_str() {
        "fixed" => {
            let alphas = cfg.alphas.clone().unwrap_or_else(|| FAMILY_ALPHAS.to_vec());
            fixed_q_family(&sizes, &alphas, &cfg.budgets, cfg.replicates)
        }
        "uniform" => uniform_q_family(&sizes, cfg.per_size, &cfg.budgets, cfg.replicates, seed),
        "custom" => {
            let q = cfg
                .q
                .clone()
                .ok_or_else(|| Failure::Usage("family `custom` needs `q`".into()))?;
            let name = cfg.name.clone().unwrap_or_else(|| "custom".into());
            let mut sc = SingleFeatureScenario::uniform_p(name, q, cfg.budgets.clone(), cfg.replicates);
            if let Some(p) = &cfg.p {
                sc.p = p.clone();
            }
            vec![sc]
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown family `{other}` (expected fixed, uniform or custom)"
            )))
        }
    };
    for sc in &mut scenarios {
        sc.strategies = strategies.clone();
        sc.delta = cfg.delta;
    }
    let rows = run_single_feature_family(&scenarios, seed)?;
    let mut w = output(out, "single_feature_results.csv")?;
    write_single_feature_csv(&rows, &mut w)?;
    Ok(())
}

fn afs_settings(a: &AfsArgs) -> AfsSettings {
    AfsSettings {
        delta: a.delta,
        lambda: a.lambda.0,
        psi: a.psi,
    }
}

fn select(args: SelectArgs) -> Result<(), Failure> {
    let (_, ds) = load(&args.data, args.seed)?;
    let mut cfg = AfsConfig::new(args.k, args.budget);
    cfg.delta = args.afs.delta;
    cfg.lambda = args.afs.lambda.0;
    cfg.psi = args.afs.psi;
    cfg.seed = args.seed;
    cfg.validate(&ds)?;

    let mut transcript = Vec::new();
    let out: AfsOutcome = match args.oracle {
        OracleKind::Dataset => {
            let mut oracle = DatasetOracle::new(&ds).map_err(|_| {
                Failure::Data("the dataset oracle needs a label column (--label)".into())
            })?;
            afs_run(&ds, &mut oracle, &cfg)?
        }
        OracleKind::Interactive => {
            if !io::stdin().is_terminal() {
                return Err(Failure::Usage("--oracle interactive needs a terminal on stdin".into()));
            }
            let mut oracle = InteractiveOracle::new(io::stdin().lock(), io::stderr());
            let out = afs_run(&ds, &mut oracle, &cfg)?;
            transcript = oracle.transcript().to_vec();
            out
        }
    };

    if let Some(path) = &args.trace {
        write_trace(path, &ds, &out, &transcript)?;
    }
    let mut stdout = io::stdout().lock();
    for &j in &out.selected {
        writeln!(stdout, "{}", ds.names()[j]).map_err(|e| Failure::Data(e.to_string()))?;
    }
    Ok(())
}

fn write_trace(path: &Path, ds: &QuantizedDataset, out: &AfsOutcome, transcript: &[String]) -> Result<(), Failure> {
    let truth = exact_entropies(ds).ok();
    let mut text = String::from("step,chosen_index,gap_if_known,safeguard_flag\n");
    for s in &out.trace.steps {
        let gap = truth
            .as_ref()
            .map(|h| selection_gap(h, &s.top_k).to_string())
            .unwrap_or_default();
        text.push_str(&format!("{},{},{},{}\n", s.step, s.chosen, gap, s.safeguard_fired));
    }
    fs::write(path, text).map_err(|e| io_failure(path, e))?;
    if !transcript.is_empty() {
        let mut f = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| io_failure(path, e))?;
        for line in transcript {
            writeln!(f, "# {line}").map_err(|e| io_failure(path, e))?;
        }
    }
    Ok(())
}

fn bench(args: BenchArgs, methods: Vec<Method>) -> Result<(), Failure> {
    let (name, dataset) = load(&args.data, args.seed)?;
    let sc = SelectionScenario {
        name,
        dataset,
        k: args.k,
        budgets: args.budgets,
        replicates: args.replicates,
        methods,
        afs: afs_settings(&args.afs),
    };
    let rows = run_selection_bench(&sc, args.seed)?;
    let mut w = output(args.out.as_deref(), "selection_results.csv")?;
    write_selection_csv(&rows, &mut w)?;
    Ok(())
}
