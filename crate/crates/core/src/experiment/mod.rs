//! Experiment suites: configuration, run directories, manifests, reports.
//!
//! Output layout of a suite run under `out/`:
//!
//! ```text
//! manifest.json           resolved config, data sizes, per-run derived quantities
//! summary.csv             method,seed,val_ppl,test_ppl,cum_latency
//! summary_median.csv      method,val_ppl,test_ppl,cum_latency (median over seeds)
//! improvements.csv        relative test-PPL improvement over the baselines
//! latency_sweep.csv       only when `latency_sweep` is configured
//! seed-<s>/<method>/metrics.csv
//! seed-<s>/<method>/ledger.json    every private release plus the composed total
//! seed-<s>/<method>/phases.json    per-phase q, σ, cohorts, latency model
//! ```

mod config;
mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub use config::{load_config, parse_config, DataConfig, ModelSection, SuiteConfig, SweepConfig};
pub use report::{
    improvements_csv, latency_csv, median, median_summary_csv, medians, report_latency_sweep, summary_csv,
    SummaryRow, LATENCY_HEADER, SWEEP_REPORT_HEADER,
};

use crate::data::{
    generate_synthetic_population, load_population, prepare_population, read_corpus, Domain, Part, Population,
};
use crate::error::{Error, Result};
use crate::federated::{run_schedule, PhaseSummary, RunOutcome, ScheduleKind};
use crate::privacy::{LedgerTotal, PrivacyLedger};
use crate::seed::Seed;

pub const MANIFEST_FORMAT: &str = "pfl-sim-manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Loads or generates the population for master seed `seed`.
pub fn build_population(data: &DataConfig, seed: Seed) -> Result<Population> {
    let data_seed = seed.child("data");
    let pop = if let Some(synth) = &data.synthetic {
        let raw = generate_synthetic_population(synth, data_seed)?;
        prepare_population(raw, data.vocab_size, data_seed)?
    } else if let Some(path) = &data.corpus {
        prepare_population(read_corpus(path)?, data.vocab_size, data_seed)?
    } else if let Some(path) = &data.population {
        load_population(path)?
    } else {
        return Err(Error::config("data", "no data source configured"));
    };
    Ok(pop)
}

/// Client counts of a prepared population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub seed: u64,
    pub clients: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    /// Training clients holding target-domain text.
    pub target_train: usize,
    /// Training clients holding only source-domain text.
    pub source_train: usize,
    pub vocab_size: usize,
    pub param_count: usize,
}

impl DataSummary {
    pub fn of(pop: &Population, seed: u64, model: &ModelSection) -> Self {
        let train = pop.indices(Part::Train);
        let target_train = train.iter().filter(|&&i| pop.clients[i].has(Domain::T)).count();
        let source_train = train
            .iter()
            .filter(|&&i| pop.clients[i].has(Domain::S) && !pop.clients[i].has(Domain::T))
            .count();
        Self {
            seed,
            clients: pop.clients.len(),
            train: train.len(),
            validation: pop.split.validation.len(),
            test: pop.split.test.len(),
            target_train,
            source_train,
            vocab_size: pop.vocab.len(),
            param_count: model.config(pop.vocab.len()).param_count(),
        }
    }
}

/// Derived quantities of one schedule run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub method: ScheduleKind,
    pub dir: String,
    pub phases: Vec<PhaseSummary>,
    pub ledger_total: Option<LedgerTotal>,
    pub final_val_ppl: f64,
    pub final_test_ppl: f64,
    pub cum_latency: f64,
}

/// Everything needed to reproduce and audit a suite or training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub command: String,
    pub config: SuiteConfig,
    /// Instance weights act as relative sequence weights inside each
    /// client's loss; they are not renormalized across a cohort.
    pub weight_normalization: String,
    pub data: Vec<DataSummary>,
    pub runs: Vec<RunRecord>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

/// Result of a suite run.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub out_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub manifest: RunManifest,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub(crate) fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::config("$", format!("serialization failed: {e}")))
}

#[derive(Serialize)]
struct LedgerFile<'a> {
    ledger: &'a PrivacyLedger,
    total: &'a Option<LedgerTotal>,
}

/// Writes `metrics.csv`, `ledger.json` and `phases.json` into `dir`.
pub fn write_run_dir(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    create_dir(dir)?;
    write_file(&dir.join("metrics.csv"), outcome.metrics_csv())?;
    write_file(
        &dir.join("ledger.json"),
        to_json(&LedgerFile {
            ledger: &outcome.ledger,
            total: &outcome.ledger_total,
        })?,
    )?;
    write_file(&dir.join("phases.json"), to_json(&outcome.phases)?)
}

pub fn run_record(seed: u64, dir: &str, outcome: &RunOutcome) -> RunRecord {
    RunRecord {
        seed,
        method: outcome.kind,
        dir: dir.to_string(),
        phases: outcome.phases.clone(),
        ledger_total: outcome.ledger_total.clone(),
        final_val_ppl: outcome.final_val_ppl,
        final_test_ppl: outcome.final_test_ppl,
        cum_latency: outcome.cum_latency,
    }
}

pub fn new_manifest(command: &str, config: &SuiteConfig) -> RunManifest {
    RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: MANIFEST_VERSION,
        code_version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
        command: command.into(),
        config: config.clone(),
        weight_normalization: "per-client ratio-normalized loss; no cohort-level renormalization".into(),
        data: Vec::new(),
        runs: Vec::new(),
        started_unix: now_unix(),
        finished_unix: 0,
    }
}

pub fn write_manifest(path: &Path, manifest: &mut RunManifest) -> Result<()> {
    manifest.finished_unix = now_unix();
    write_file(path, to_json(manifest)?)
}

/// Runs every configured schedule for every seed and writes all artifacts
/// under `out`. Progress lines go to `progress`.
pub fn run_suite(config: &SuiteConfig, out: &Path, progress: &mut dyn FnMut(&str)) -> Result<SuiteOutcome> {
    config.validate()?;
    create_dir(out)?;
    let mut manifest = new_manifest("suite", config);
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let master = Seed(seed);
        let pop = build_population(&config.data, master)?;
        manifest.data.push(DataSummary::of(&pop, seed, &config.model));
        let model = config.model.config(pop.vocab.len());
        for &kind in &config.schedules {
            progress(&format!("seed {seed}: running {kind}"));
            let outcome = run_schedule(kind, &pop, &model, &config.train, master)?;
            let rel = format!("seed-{seed}/{kind}");
            write_run_dir(&out.join(&rel), &outcome)?;
            progress(&format!(
                "seed {seed}: {kind} val_ppl={:.3} test_ppl={:.3}",
                outcome.final_val_ppl, outcome.final_test_ppl
            ));
            rows.push(SummaryRow {
                method: kind,
                seed,
                val_ppl: outcome.final_val_ppl,
                test_ppl: outcome.final_test_ppl,
                cum_latency: outcome.cum_latency,
            });
            manifest.runs.push(run_record(seed, &rel, &outcome));
        }
    }
    write_file(&out.join("summary.csv"), summary_csv(&rows))?;
    write_file(&out.join("summary_median.csv"), median_summary_csv(&rows))?;
    write_file(&out.join("improvements.csv"), improvements_csv(&rows))?;
    if let Some(s) = &config.latency_sweep {
        write_file(
            &out.join("latency_sweep.csv"),
            report_latency_sweep(&s.populations, &s.cohorts, s.eligible_frac, s.sample_rate, s.rate_lambda),
        )?;
    }
    write_manifest(&out.join("manifest.json"), &mut manifest)?;
    Ok(SuiteOutcome {
        out_dir: out.to_path_buf(),
        rows,
        manifest,
    })
}

/// Loads `config_file` and runs the suite into `out`.
pub fn run_experiment_suite(config_file: &Path, out: &Path) -> Result<SuiteOutcome> {
    let config = load_config(config_file)?;
    run_suite(&config, out, &mut |_| {})
}
