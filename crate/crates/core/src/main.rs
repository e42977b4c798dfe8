use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use pfl_sim::data::{save_population, SynthConfig};
use pfl_sim::experiment::{
    self, build_population, latency_csv, load_config, median_summary_csv, new_manifest, report_latency_sweep,
    run_record, run_suite, summary_csv, write_manifest, write_run_dir, DataConfig, DataSummary, ModelSection,
    RunManifest, SummaryRow, SuiteConfig,
};
use pfl_sim::federated::{run_schedule, ScheduleKind, TrainConfig};
use pfl_sim::langmodel::save_checkpoint;
use pfl_sim::population::{latency_sweep, PopulationConfig};
use pfl_sim::privacy::{calibrate_sigma, default_orders, epsilon_and_order, rdp_sampled_gaussian};
use pfl_sim::{Error, Result, Seed};

/// Private federated learning simulator with population expansion.
#[derive(Parser)]
#[command(name = "pfl-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Preprocess a corpus (or generate a synthetic one) into a population cache.
    Prepare(PrepareArgs),
    /// Expected round latency, its bounds, and a Monte Carlo check.
    Latency(LatencyArgs),
    /// Calibrate the noise multiplier for a privacy budget.
    Calibrate(CalibrateArgs),
    /// Train one schedule.
    Train(TrainArgs),
    /// Run every schedule of a suite config.
    Suite(SuiteArgs),
    /// Latency sweep table, or summary tables rebuilt from a suite directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Tab-separated corpus `client_id<TAB>S|T<TAB>sentence`.
    #[arg(long, alias = "input", conflicts_with_all = ["synthetic", "population"])]
    corpus: Option<PathBuf>,
    /// Synthetic population config, inline JSON or a file path.
    #[arg(long, conflicts_with = "population")]
    synthetic: Option<String>,
    /// Preprocessed population cache.
    #[arg(long)]
    population: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output cache file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LatencyArgs {
    #[arg(long, required_unless_present = "sweep")]
    population: Option<u64>,
    #[arg(long)]
    eligible_frac: f64,
    #[arg(long)]
    sample_rate: f64,
    #[arg(long, required_unless_present = "sweep")]
    cohort: Option<u64>,
    #[arg(long, default_value_t = 1.0)]
    rate_lambda: f64,
    /// Monte Carlo trials per cell; 0 skips the simulation.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Grid `N1,N2,...:C1,C2,...`.
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long)]
    q: f64,
    #[arg(long)]
    rounds: u64,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    tol: f64,
    /// Comma-separated integer orders; defaults to 2..=64, 128, 256.
    #[arg(long)]
    orders: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    schedule: ScheduleKind,
    /// Base suite config; flags override its `train`, `model` and `data` values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    pretrain_rounds: Option<u64>,
    #[arg(long)]
    cohort: Option<u64>,
    #[arg(long)]
    calibration_cohort: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    server_lr: Option<f64>,
    #[arg(long)]
    client_lr: Option<f64>,
    #[arg(long)]
    eval_every: Option<u64>,
    #[arg(long)]
    noise_multiplier: Option<f64>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Suite output directory to rebuild summary tables from.
    #[arg(long, conflicts_with_all = ["populations", "cohorts"])]
    from: Option<PathBuf>,
    /// Comma-separated device counts.
    #[arg(long, required_unless_present = "from")]
    populations: Option<String>,
    /// Comma-separated cohort sizes.
    #[arg(long, required_unless_present = "from")]
    cohorts: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    eligible_frac: f64,
    #[arg(long, default_value_t = 0.001)]
    sample_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    rate_lambda: f64,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|x| x.trim().parse::<T>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::config(flag, format!("cannot parse `{s}` as a comma-separated list")))
}

fn parse_json_arg<T: DeserializeOwned>(flag: &str, arg: &str) -> Result<T> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Error::Io {
            path: arg.into(),
            source: e,
        })?
    };
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." || path.is_empty() { flag.to_string() } else { format!("{flag}.{path}") };
        Error::config(at, e.into_inner().to_string())
    })
}

impl DataArgs {
    fn is_set(&self) -> bool {
        self.corpus.is_some() || self.synthetic.is_some() || self.population.is_some()
    }

    fn to_config(&self) -> Result<DataConfig> {
        let synthetic = match &self.synthetic {
            Some(s) => Some(parse_json_arg::<SynthConfig>("synthetic", s)?),
            None if self.corpus.is_none() && self.population.is_none() => Some(SynthConfig::default()),
            None => None,
        };
        Ok(DataConfig {
            vocab_size: self.vocab_size,
            synthetic,
            corpus: self.corpus.clone(),
            population: self.population.clone(),
        })
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: e,
        }),
        None => {
            print!("{text}");
            std::io::stdout().flush().ok();
            Ok(())
        }
    }
}

fn prepare(a: PrepareArgs) -> Result<()> {
    let data = a.data.to_config()?;
    let pop = build_population(&data, Seed(a.seed))?;
    save_population(&a.out, &pop)?;
    let summary = DataSummary::of(&pop, a.seed, &ModelSection::default());
    println!("{}", json!({ "out": a.out, "data": summary }));
    Ok(())
}

fn latency(a: LatencyArgs) -> Result<()> {
    let (pops, cohorts) = match &a.sweep {
        Some(grid) => {
            let (n, c) = grid
                .split_once(':')
                .ok_or_else(|| Error::config("sweep", "expected `N1,N2,...:C1,C2,...`"))?;
            (parse_list::<u64>("sweep", n)?, parse_list::<u64>("sweep", c)?)
        }
        None => (vec![a.population.unwrap_or(0)], vec![a.cohort.unwrap_or(0)]),
    };
    if a.sweep.is_none() {
        // surface configuration errors instead of a blank row
        let cfg = PopulationConfig {
            population: pops[0],
            eligible_frac: a.eligible_frac,
            sample_rate: a.sample_rate,
            cohort: cohorts[0],
            rate_lambda: a.rate_lambda,
        };
        cfg.validate()?;
    }
    let cells = latency_sweep(&pops, &cohorts, a.eligible_frac, a.sample_rate, a.rate_lambda, a.trials, a.seed);
    emit(None, &latency_csv(&cells))
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let orders = match &a.orders {
        Some(s) => parse_list::<u32>("orders", s)?,
        None => default_orders(),
    };
    let sigma = calibrate_sigma(a.q, a.rounds, a.epsilon, a.delta, a.tol, &orders)?;
    let curve = rdp_sampled_gaussian(a.q, sigma, &orders)?;
    let (eps, order) = epsilon_and_order(&curve, a.rounds, a.delta)?;
    println!(
        "{}",
        json!({
            "q": a.q, "rounds": a.rounds, "epsilon_target": a.epsilon, "delta": a.delta,
            "sigma": sigma, "epsilon": eps, "order": order,
        })
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => load_config(p)?,
        None => SuiteConfig {
            seeds: vec![a.seed],
            data: a.data.to_config()?,
            model: ModelSection::default(),
            train: TrainConfig::default(),
            schedules: vec![a.schedule],
            latency_sweep: None,
        },
    };
    if a.config.is_some() && a.data.is_set() {
        cfg.data = a.data.to_config()?;
    }
    cfg.seeds = vec![a.seed];
    cfg.schedules = vec![a.schedule];
    let t = &mut cfg.train;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { t.$field = v; } )* };
    }
    set!(rounds, cohort, calibration_cohort, alpha, epsilon, delta, epsilon0, clip, server_lr, client_lr, eval_every);
    if a.pretrain_rounds.is_some() {
        t.pretrain_rounds = a.pretrain_rounds;
    }
    if a.noise_multiplier.is_some() {
        t.noise_multiplier = a.noise_multiplier;
    }
    if let Some(e) = a.embed_dim {
        cfg.model.embed_dim = e;
    }
    if let Some(h) = a.hidden_dim {
        cfg.model.hidden_dim = h;
    }
    cfg.validate()?;

    let master = Seed(a.seed);
    let pop = build_population(&cfg.data, master)?;
    let model = cfg.model.config(pop.vocab.len());
    let mut manifest = new_manifest("train", &cfg);
    manifest.data.push(DataSummary::of(&pop, a.seed, &cfg.model));
    let outcome = run_schedule(a.schedule, &pop, &model, &cfg.train, master)?;
    write_run_dir(&a.out, &outcome)?;
    save_checkpoint(&a.out.join("model.ckpt"), &outcome.final_params)?;
    manifest.runs.push(run_record(a.seed, ".", &outcome));
    write_manifest(&a.out.join("manifest.json"), &mut manifest)?;
    println!(
        "{}",
        json!({
            "schedule": a.schedule, "val_ppl": outcome.final_val_ppl, "test_ppl": outcome.final_test_ppl,
            "cum_latency": outcome.cum_latency,
            "epsilon": outcome.ledger_total.as_ref().map(|t| t.epsilon),
            "out": a.out,
        })
    );
    Ok(())
}

fn suite(a: SuiteArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let outcome = run_suite(&cfg, &a.out, &mut |line| eprintln!("{line}"))?;
    print!("{}", median_summary_csv(&outcome.rows));
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    if let Some(dir) = &a.from {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let manifest: RunManifest =
            serde_json::from_str(&text).map_err(|e| Error::config("manifest", e.to_string()))?;
        let rows: Vec<SummaryRow> = manifest
            .runs
            .iter()
            .map(|r| SummaryRow {
                method: r.method,
                seed: r.seed,
                val_ppl: r.final_val_ppl,
                test_ppl: r.final_test_ppl,
                cum_latency: r.cum_latency,
            })
            .collect();
        let text = format!(
            "{}\n{}\n{}",
            summary_csv(&rows),
            median_summary_csv(&rows),
            experiment::improvements_csv(&rows)
        );
        return emit(a.out.as_deref(), &text);
    }
    let pops = parse_list::<u64>("populations", a.populations.as_deref().unwrap_or_default())?;
    let cohorts = parse_list::<u64>("cohorts", a.cohorts.as_deref().unwrap_or_default())?;
    let csv = report_latency_sweep(&pops, &cohorts, a.eligible_frac, a.sample_rate, a.rate_lambda);
    emit(a.out.as_deref(), &csv)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Latency(a) => latency(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Train(a) => train(a),
        Command::Suite(a) => suite(a),
        Command::Report(a) => report(a),
    }
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
