//! Phase planning, single rounds, and whole schedule runs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::client::local_update;
use super::server::{server_step, ServerState};
use super::weights::DomainWeights;
use super::{FederatedError, ScheduleKind, TrainConfig};
use crate::data::{ClientRecord, Domain, Part, Population};
use crate::langmodel::{init_params, perplexity, ModelConfig, ModelParams};
use crate::population::{latency_estimate, latency_exact, sample_cohort, LatencyEstimate, PopulationConfig};
use crate::privacy::{
    calibrate_sigma, epsilon_from_rdp, gaussian_aggregate_calibrated, l2_norm, private_unigrams, rdp_sampled_gaussian,
    LedgerTotal, Mechanism, PrivacyLedger,
};
use crate::seed::Seed;

pub const METRICS_HEADER: &str = "round,phase,clients,val_ppl,test_ppl,noisy_update_norm,cum_latency,sigma,eps_spent";

/// Telemetry of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    /// Global round index, 1-based.
    pub round: u64,
    pub phase: String,
    pub clients_sampled: usize,
    pub mean_clip_fraction: f64,
    pub noisy_update_norm: f64,
    /// Modelled waiting time of this round.
    pub latency: f64,
    pub cum_latency: f64,
    pub val_ppl: Option<f64>,
    pub test_ppl: Option<f64>,
    pub sigma: f64,
    /// Overall ε spent up to and including this round.
    pub eps_spent: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RoundResult {
    /// One line matching [`METRICS_HEADER`].
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.round,
            self.phase,
            self.clients_sampled,
            opt(self.val_ppl),
            opt(self.test_ppl),
            self.noisy_update_norm,
            self.cum_latency,
            self.sigma,
            self.eps_spent
        )
    }
}

/// A fully resolved training phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub name: String,
    /// Sub-populations charged for this phase.
    pub populations: Vec<Domain>,
    /// Sequence domains clients train on.
    pub domains: Vec<Domain>,
    /// Indices into `Population::clients`, ascending.
    pub eligible: Vec<usize>,
    pub rounds: u64,
    /// Nominal cohort; the aggregate divides by this.
    pub cohort: u64,
    /// Cohort the noise is scaled to.
    pub noise_cohort: f64,
    /// Poisson sampling rate, also used for accounting.
    pub q: f64,
    pub sigma: f64,
    /// Budget the noise was calibrated for.
    pub epsilon: f64,
    pub delta: f64,
    pub weighted: bool,
    pub latency: Option<PopulationConfig>,
    pub latency_per_round: f64,
}

/// Random streams of one phase.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSeeds {
    pub sample: Seed,
    pub noise: Seed,
}

impl PhaseSeeds {
    pub fn new(run: Seed, phase: &str) -> Self {
        let root = run.child(&format!("phase/{phase}"));
        Self {
            sample: root.child("sample"),
            noise: root.child("noise"),
        }
    }
}

/// Serializable description of a completed phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub populations: Vec<Domain>,
    pub eligible_clients: usize,
    pub rounds: u64,
    pub cohort: u64,
    pub noise_cohort: f64,
    pub q: f64,
    pub sigma: f64,
    pub epsilon_target: f64,
    pub epsilon_achieved: f64,
    pub delta: f64,
    pub weighted: bool,
    pub latency_config: Option<PopulationConfig>,
    /// Rounded `(m, k)` of the latency model.
    pub latency_counts: Option<(u64, i64)>,
    pub latency: Option<LatencyEstimate>,
    pub latency_per_round: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub kind: ScheduleKind,
    pub phases: Vec<PhaseSummary>,
    pub metrics: Vec<RoundResult>,
    pub ledger: PrivacyLedger,
    /// `None` when noise was disabled.
    pub ledger_total: Option<LedgerTotal>,
    pub final_val_ppl: f64,
    pub final_test_ppl: f64,
    pub cum_latency: f64,
    pub final_params: ModelParams,
}

impl RunOutcome {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.metrics {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

struct Groups {
    all: Vec<usize>,
    target: Vec<usize>,
    source: Vec<usize>,
}

/// Training clients grouped into the union, the target population (any
/// client holding target text, including mixed clients) and the disjoint
/// source population.
fn groups(pop: &Population) -> Groups {
    let all: Vec<usize> = pop
        .indices(Part::Train)
        .into_iter()
        .filter(|&i| pop.clients[i].domains().next().is_some())
        .collect();
    let target = all.iter().copied().filter(|&i| pop.clients[i].has(Domain::T)).collect();
    let source = all
        .iter()
        .copied()
        .filter(|&i| pop.clients[i].has(Domain::S) && !pop.clients[i].has(Domain::T))
        .collect();
    Groups { all, target, source }
}

struct PhaseShape {
    name: &'static str,
    populations: Vec<Domain>,
    domains: Vec<Domain>,
    eligible: Vec<usize>,
    rounds: u64,
    small: bool,
    weighted: bool,
}

/// Resolves the phases of `kind`: eligible clients, cohorts, sampling
/// rates, calibrated noise, and per-round latency.
pub fn plan_phases(kind: ScheduleKind, pop: &Population, cfg: &TrainConfig) -> Result<Vec<PhasePlan>, FederatedError> {
    cfg.validate(kind)?;
    let g = groups(pop);
    let both = vec![Domain::S, Domain::T];
    let only_t = vec![Domain::T];
    let only_s = vec![Domain::S];
    let pre = cfg.pretrain_rounds();
    let shapes = match kind {
        ScheduleKind::TargetSmall | ScheduleKind::TargetLarge => vec![PhaseShape {
            name: "train",
            populations: only_t.clone(),
            domains: only_t,
            eligible: g.target,
            rounds: cfg.rounds,
            small: kind == ScheduleKind::TargetSmall,
            weighted: false,
        }],
        ScheduleKind::Union | ScheduleKind::Iw => vec![PhaseShape {
            name: "train",
            populations: both.clone(),
            domains: both,
            eligible: g.all,
            rounds: cfg.rounds,
            small: false,
            weighted: kind == ScheduleKind::Iw,
        }],
        ScheduleKind::Pt | ScheduleKind::Iwpt => vec![
            PhaseShape {
                name: "pretrain",
                populations: only_s.clone(),
                domains: only_s,
                eligible: g.source,
                rounds: pre,
                small: false,
                weighted: kind == ScheduleKind::Iwpt,
            },
            PhaseShape {
                name: "finetune",
                populations: only_t.clone(),
                domains: only_t,
                eligible: g.target,
                rounds: cfg.rounds - pre,
                small: true,
                weighted: false,
            },
        ],
    };
    let budget = if kind.uses_unigrams() {
        cfg.epsilon - cfg.epsilon0
    } else {
        cfg.epsilon
    };
    let orders = cfg.orders();
    let scale = cfg.scale();
    shapes
        .into_iter()
        .map(|s| {
            let cohort = if s.small {
                ((cfg.alpha * cfg.cohort as f64).round() as u64).max(1)
            } else {
                cfg.cohort
            };
            let n = s.eligible.len() as u64;
            if cohort >= n {
                return Err(FederatedError::InvalidConfig(format!(
                    "{kind} phase `{}`: cohort {cohort} needs more than {n} eligible clients",
                    s.name
                )));
            }
            let q = cohort as f64 / n as f64;
            let sigma = match cfg.noise_multiplier {
                Some(sigma) => sigma,
                None => calibrate_sigma(q, s.rounds, budget, cfg.delta, cfg.calibration_tol, &orders)?,
            };
            let latency = PopulationConfig {
                population: (n as f64 * scale).round() as u64,
                eligible_frac: cfg.eligible_frac,
                sample_rate: q,
                cohort: (cohort as f64 * scale).round() as u64,
                rate_lambda: cfg.rate_lambda,
            };
            let latency_per_round = latency_exact(&latency)?;
            Ok(PhasePlan {
                name: s.name.to_string(),
                populations: s.populations,
                domains: s.domains,
                eligible: s.eligible,
                rounds: s.rounds,
                cohort,
                noise_cohort: cohort as f64 * scale,
                q,
                sigma,
                epsilon: budget,
                delta: cfg.delta,
                weighted: s.weighted,
                latency: Some(latency),
                latency_per_round,
            })
        })
        .collect()
}

/// Samples a cohort, trains each member locally in parallel, aggregates the
/// clipped differences in ascending client order with calibrated noise,
/// and applies the server optimizer.
///
/// `t` is the round index within the phase. The returned result carries
/// this round's latency in both latency fields and no evaluation.
#[allow(clippy::too_many_arguments)]
pub fn run_round(
    state: &mut ServerState,
    pop: &Population,
    plan: &PhasePlan,
    weights: Option<&DomainWeights>,
    cfg: &TrainConfig,
    t: u64,
    seeds: &PhaseSeeds,
) -> Result<RoundResult, FederatedError> {
    let sampled = sample_cohort(&plan.eligible, plan.q, seeds.sample.0, t);
    let weight_fn = |x: &[u32], d: Domain| match (plan.weighted, weights) {
        (true, Some(w)) => w.weight(x, d),
        _ => 1.0,
    };
    let theta = &state.params;
    let updates = sampled
        .par_iter()
        .map(|&i| local_update(&pop.clients[i], &plan.domains, theta, cfg.client_lr, &weight_fn, cfg.clip))
        .collect::<Result<Vec<_>, _>>()?;
    let clipped = updates.iter().filter(|u| u.clipped).count();
    let deltas: Vec<Vec<f64>> = updates.into_iter().map(|u| u.delta).collect();
    let mut rng = seeds.noise.index(t).rng();
    let aggregate = gaussian_aggregate_calibrated(
        &deltas,
        theta.len(),
        cfg.clip,
        plan.sigma,
        plan.cohort as usize,
        plan.noise_cohort,
        &mut rng,
    )?;
    drop(deltas);
    server_step(state, &aggregate, cfg.server_lr, &cfg.adam)?;
    Ok(RoundResult {
        round: state.round,
        phase: plan.name.clone(),
        clients_sampled: sampled.len(),
        mean_clip_fraction: if sampled.is_empty() {
            0.0
        } else {
            clipped as f64 / sampled.len() as f64
        },
        noisy_update_norm: l2_norm(&aggregate),
        latency: plan.latency_per_round,
        cum_latency: plan.latency_per_round,
        val_ppl: None,
        test_ppl: None,
        sigma: plan.sigma,
        eps_spent: f64::NAN,
    })
}

fn release_unigrams(
    pop: &Population,
    model: &ModelConfig,
    cfg: &TrainConfig,
    seed: Seed,
    ledger: &mut PrivacyLedger,
) -> Result<DomainWeights, FederatedError> {
    let g = groups(pop);
    let pick = |idx: &[usize]| -> Vec<&ClientRecord> { idx.iter().map(|&i| &pop.clients[i]).collect() };
    let sensitivity = (cfg.unigram_max_sequences * model.seq_len) as u32;
    let mut release = |domain: Domain, clients: Vec<&ClientRecord>| {
        let est = private_unigrams(
            &clients,
            domain,
            model.vocab_size,
            cfg.epsilon0,
            cfg.unigram_max_sequences,
            model.seq_len,
            &mut seed.child(&domain.to_string()).rng(),
        )?;
        ledger.record(
            format!("unigram-{domain}"),
            &[domain],
            Mechanism::Geometric {
                epsilon: cfg.epsilon0,
                sensitivity,
            },
        );
        Ok::<_, FederatedError>(est)
    };
    let target = release(Domain::T, pick(&g.target))?;
    let source = release(Domain::S, pick(&g.source))?;
    Ok(DomainWeights {
        target,
        source,
        alpha: cfg.alpha,
        pad: model.specials().pad,
    })
}

/// Runs a whole schedule from the shared initial model of `master`.
///
/// Returns the per-round metrics, the privacy ledger and the final model.
pub fn run_schedule(
    kind: ScheduleKind,
    pop: &Population,
    model: &ModelConfig,
    cfg: &TrainConfig,
    master: Seed,
) -> Result<RunOutcome, FederatedError> {
    if model.vocab_size != pop.vocab.len() {
        return Err(FederatedError::InvalidConfig(format!(
            "model vocab_size {} != population vocabulary {}",
            model.vocab_size,
            pop.vocab.len()
        )));
    }
    let plans = plan_phases(kind, pop, cfg)?;
    let run_seed = master.child(&format!("run/{kind}"));
    let orders = cfg.orders();
    let mut ledger = PrivacyLedger::new(orders.clone());
    let mut spent: BTreeMap<Domain, f64> = [(Domain::S, 0.0), (Domain::T, 0.0)].into();

    let weights = if kind.uses_unigrams() {
        let w = release_unigrams(pop, model, cfg, run_seed.child("unigram"), &mut ledger)?;
        spent.values_mut().for_each(|e| *e += cfg.epsilon0);
        Some(w)
    } else {
        None
    };

    let val = pop.domain_sequences(Part::Validation, Domain::T);
    let test = pop.domain_sequences(Part::Test, Domain::T);
    if val.is_empty() || test.is_empty() {
        return Err(FederatedError::NoEvalData("target-domain validation/test".into()));
    }

    let init = init_params(*model, master.child("model-init"))?;
    let mut state = ServerState::new(init, plans[0].name.clone());
    let mut metrics = Vec::with_capacity(cfg.rounds as usize);
    let mut phases = Vec::with_capacity(plans.len());
    let mut cum_latency = 0.0;
    let (mut final_val, mut final_test) = (f64::NAN, f64::NAN);

    for (pi, plan) in plans.iter().enumerate() {
        if pi > 0 {
            state.enter_phase(plan.name.clone());
        }
        let curve = if plan.sigma > 0.0 {
            Some(rdp_sampled_gaussian(plan.q, plan.sigma, &orders)?)
        } else {
            None
        };
        let seeds = PhaseSeeds::new(run_seed, &plan.name);
        let last_phase = pi + 1 == plans.len();
        let mut phase_eps = 0.0;
        for t in 0..plan.rounds {
            let mut r = run_round(&mut state, pop, plan, weights.as_ref(), cfg, t, &seeds)?;
            cum_latency += plan.latency_per_round;
            r.cum_latency = cum_latency;
            phase_eps = match &curve {
                Some(c) => epsilon_from_rdp(c, t + 1, plan.delta)?,
                None => f64::INFINITY,
            };
            r.eps_spent = spent
                .iter()
                .map(|(d, e)| if plan.populations.contains(d) { e + phase_eps } else { *e })
                .fold(0.0, f64::max);
            let is_last = last_phase && t + 1 == plan.rounds;
            if state.round % cfg.eval_every == 0 || is_last {
                let v = perplexity(&state.params, &val)?;
                let te = perplexity(&state.params, &test)?;
                r.val_ppl = Some(v);
                r.test_ppl = Some(te);
                (final_val, final_test) = (v, te);
            }
            if !state.params.is_finite() {
                return Err(FederatedError::NonFinite(format!("model after round {}", state.round)));
            }
            metrics.push(r);
        }
        for d in &plan.populations {
            *spent.get_mut(d).expect("both domains tracked") += phase_eps;
        }
        ledger.record(
            format!("{kind}/{}", plan.name),
            &plan.populations,
            Mechanism::SubsampledGaussian {
                q: plan.q,
                sigma: plan.sigma,
                rounds: plan.rounds,
                delta: plan.delta,
            },
        );
        phases.push(PhaseSummary {
            name: plan.name.clone(),
            populations: plan.populations.clone(),
            eligible_clients: plan.eligible.len(),
            rounds: plan.rounds,
            cohort: plan.cohort,
            noise_cohort: plan.noise_cohort,
            q: plan.q,
            sigma: plan.sigma,
            epsilon_target: plan.epsilon,
            epsilon_achieved: phase_eps,
            delta: plan.delta,
            weighted: plan.weighted,
            latency_config: plan.latency,
            latency_counts: plan.latency.map(|l| l.counts()),
            latency: plan.latency.and_then(|l| latency_estimate(&l).ok()),
            latency_per_round: plan.latency_per_round,
        });
    }

    let ledger_total = if plans.iter().all(|p| p.sigma > 0.0) {
        Some(ledger.total()?)
    } else {
        None
    };
    Ok(RunOutcome {
        kind,
        phases,
        metrics,
        ledger,
        ledger_total,
        final_val_ppl: final_val,
        final_test_ppl: final_test,
        cum_latency,
        final_params: state.params,
    })
}
