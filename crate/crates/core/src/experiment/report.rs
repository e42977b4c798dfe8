//! Tabular reports: latency CSVs, the method summary, and relative improvements.

use serde::Serialize;

use crate::federated::ScheduleKind;
use crate::population::{latency_sweep, SweepCell, SweepStatus};

pub const LATENCY_HEADER: &str = "N,C,p,q,lambda,lower,exact,upper,mc_mean,mc_stderr";
pub const SWEEP_REPORT_HEADER: &str = "N,C,p,q,lambda,status,lower,exact,upper,relative";

fn cell_prefix(c: &SweepCell) -> String {
    let k = &c.config;
    format!(
        "{},{},{},{},{}",
        k.population, k.cohort, k.eligible_frac, k.sample_rate, k.rate_lambda
    )
}

/// One CSV line per cell under [`LATENCY_HEADER`]. Cells that need no
/// waiting report zero latency with empty bounds; infeasible cells leave
/// every value empty.
pub fn latency_csv(cells: &[SweepCell]) -> String {
    let mut out = format!("{LATENCY_HEADER}\n");
    for c in cells {
        let values = match &c.status {
            SweepStatus::Ok { estimate, monte_carlo } => {
                let (mc, se) = monte_carlo
                    .map(|(m, s)| (m.to_string(), s.to_string()))
                    .unwrap_or_default();
                format!("{},{},{},{mc},{se}", estimate.lower, estimate.exact, estimate.upper)
            }
            SweepStatus::NoWaiting => ",0,,,".to_string(),
            SweepStatus::Infeasible(_) => ",,,,".to_string(),
        };
        out.push_str(&format!("{},{values}\n", cell_prefix(c)));
    }
    out
}

/// Latency over an `(N, C)` grid with each column normalized by its
/// smallest-N cell that has a positive exact latency (value 1 there).
/// Infeasible and no-wait cells are listed with their status.
pub fn report_latency_sweep(
    populations: &[u64],
    cohorts: &[u64],
    eligible_frac: f64,
    sample_rate: f64,
    rate_lambda: f64,
) -> String {
    let mut pops = populations.to_vec();
    pops.sort_unstable();
    let cells = latency_sweep(&pops, cohorts, eligible_frac, sample_rate, rate_lambda, 0, 0);
    let reference = |cohort: u64| {
        cells.iter().find_map(|c| match &c.status {
            SweepStatus::Ok { estimate, .. } if c.config.cohort == cohort && estimate.exact > 0.0 => {
                Some(estimate.exact)
            }
            _ => None,
        })
    };
    let mut out = format!("{SWEEP_REPORT_HEADER}\n");
    for c in &cells {
        let row = match &c.status {
            SweepStatus::Ok { estimate, .. } => {
                let rel = reference(c.config.cohort)
                    .map(|r| (estimate.exact / r).to_string())
                    .unwrap_or_default();
                format!("ok,{},{},{},{rel}", estimate.lower, estimate.exact, estimate.upper)
            }
            SweepStatus::NoWaiting => "no_wait,,0,,0".to_string(),
            SweepStatus::Infeasible(_) => "infeasible,,,,".to_string(),
        };
        out.push_str(&format!("{},{row}\n", cell_prefix(c)));
    }
    out
}

/// Final metrics of one schedule run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: ScheduleKind,
    pub seed: u64,
    pub val_ppl: f64,
    pub test_ppl: f64,
    pub cum_latency: f64,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-method medians over seeds, in first-appearance order.
pub fn medians(rows: &[SummaryRow]) -> Vec<(ScheduleKind, f64, f64, f64)> {
    let mut methods: Vec<ScheduleKind> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let sel: Vec<&SummaryRow> = rows.iter().filter(|r| r.method == m).collect();
            let mut v: Vec<f64> = sel.iter().map(|r| r.val_ppl).collect();
            let mut t: Vec<f64> = sel.iter().map(|r| r.test_ppl).collect();
            let mut l: Vec<f64> = sel.iter().map(|r| r.cum_latency).collect();
            (m, median(&mut v), median(&mut t), median(&mut l))
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,seed,val_ppl,test_ppl,cum_latency\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method, r.seed, r.val_ppl, r.test_ppl, r.cum_latency
        ));
    }
    out
}

pub fn median_summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("method,val_ppl,test_ppl,cum_latency\n");
    for (m, v, t, l) in medians(rows) {
        out.push_str(&format!("{m},{v},{t},{l}\n"));
    }
    out
}

/// `(baseline − method)/baseline` on median test perplexity, against each
/// of the union and small-target baselines that were run.
pub fn improvements_csv(rows: &[SummaryRow]) -> String {
    let med = medians(rows);
    let mut out = String::from("method,baseline,test_ppl,baseline_test_ppl,relative_improvement\n");
    for baseline in [ScheduleKind::Union, ScheduleKind::TargetSmall] {
        let Some(&(_, _, b, _)) = med.iter().find(|r| r.0 == baseline) else {
            continue;
        };
        for &(m, _, t, _) in &med {
            if m != baseline {
                out.push_str(&format!("{m},{baseline},{t},{b},{}\n", (b - t) / b));
            }
        }
    }
    out
}
