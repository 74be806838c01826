use std::collections::BTreeMap;
use std::io::Write;

use batchps_core::stats::{EmpiricalSummary, Histogram, MeanEstimate, StatsError, SummaryTargets, TailFit};
use batchps_core::{ModelParams, TaggedBatchRecord};
use serde::Serialize;

use super::ParamsReport;
use crate::config::{Mode, Settings};
use crate::error::{CliError, Result};
use crate::output::{csv_bytes, sci, sha256_hex, Manifest};
use crate::runner::{check_cap_budget, run_busy_periods, run_tagged, BusyRun};

pub const RECORD_HEADER: [&str; 12] = [
    "index", "n0", "b", "t_tilde", "m_tilde", "omega", "i_b", "j_sampled", "omega_hat", "w_min", "w_median", "w_max",
];

pub fn record_row(r: &TaggedBatchRecord) -> Vec<String> {
    vec![
        r.index.to_string(),
        r.n0.to_string(),
        r.b.to_string(),
        sci(r.t_tilde),
        r.m_tilde.to_string(),
        sci(r.omega),
        r.i_b.to_string(),
        r.j_sampled.to_string(),
        sci(r.omega_hat),
        sci(r.w_min()),
        sci(r.w_median()),
        sci(r.w_max()),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub mean: f64,
    pub std_error: f64,
    pub ci: (f64, f64),
    pub n: u64,
}

impl Interval {
    pub fn new(e: MeanEstimate, z: f64) -> Self {
        Self {
            mean: e.mean,
            std_error: e.std_error,
            ci: e.interval(z),
            n: e.n,
        }
    }
}

/// Mean and standard error of a count histogram.
pub fn histogram_estimate(h: &Histogram) -> MeanEstimate {
    let n = h.total();
    let mean = h.mean();
    let ss: f64 = (0..=h.max_value())
        .map(|k| {
            let d = k as f64 - mean;
            h.count(k) as f64 * d * d
        })
        .sum();
    let var = ss / (n.max(2) - 1) as f64;
    MeanEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FitReport {
    Fit {
        slope: f64,
        std_error: f64,
        ci: (f64, f64),
        points: usize,
        lower: f64,
        upper: f64,
        /// `|slope/σ_q⁺ − 1|`.
        relative_error: f64,
    },
    Rejected {
        error: String,
    },
}

impl FitReport {
    pub fn new(fit: &Result<TailFit, StatsError>, sigma: f64, z: f64) -> Self {
        match fit {
            Ok(f) => FitReport::Fit {
                slope: f.slope,
                std_error: f.std_error,
                ci: (f.slope - z * f.std_error, f.slope + z * f.std_error),
                points: f.points,
                lower: f.lower,
                upper: f.upper,
                relative_error: (f.slope / sigma - 1.0).abs(),
            },
            Err(e) => FitReport::Rejected { error: e.to_string() },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SimSummary {
    pub params: ParamsReport,
    pub seed: u64,
    pub mode: Mode,
    pub replications: u64,
    pub warmup: u64,
    pub event_cap: u64,
    pub capped: u64,
    pub ci_sigma: f64,
    pub means: BTreeMap<&'static str, Interval>,
    pub exact: BTreeMap<&'static str, f64>,
    pub tail_window: (f64, f64),
    pub sigma_plus: f64,
    pub omega_slope: FitReport,
    /// Fit of `ln(P̂(Ω>x) x^{3/2})`, removing the algebraic factor of the
    /// tail law.
    pub omega_slope_corrected: FitReport,
    pub busy_periods: u64,
    pub busy_capped: u64,
    pub busy_single_job_freq: f64,
    pub violations: u64,
    pub first_violation: Option<(u64, &'static str)>,
    pub records_sha256: String,
    pub files: BTreeMap<String, String>,
}

/// Everything a simulation produces, before it is written out.
pub struct Simulation {
    pub params: ModelParams,
    pub summary: EmpiricalSummary,
    pub capped: u64,
    pub head: Vec<TaggedBatchRecord>,
    pub busy: BusyRun,
}

/// Run the tagged-batch simulation (and the busy-period side run) for `p`.
pub fn simulate(p: ModelParams, s: &Settings, busy_periods: u64) -> Result<Simulation> {
    let cfg = s.sim_config(p);
    let targets = SummaryTargets {
        tail_window: s.tail_window,
        ..SummaryTargets::default()
    };
    let run = run_tagged(&cfg, s.chunk, s.records, targets.cell_m_max)?;
    check_cap_budget(run.capped, s.replications, s.tolerances.event_cap_fraction)?;
    let busy = run_busy_periods(&p, busy_periods, s.seed, s.event_cap, s.chunk)?;
    if busy_periods > 0 {
        check_cap_budget(busy.capped, busy_periods, s.tolerances.event_cap_fraction)?;
    }
    let summary = run.acc.finish(&targets)?;
    Ok(Simulation {
        params: p,
        summary,
        capped: run.capped,
        head: run.head,
        busy,
    })
}

/// Rows `index,count,value,std_error` of a histogram.
pub fn histogram_rows(h: &Histogram, from: u64) -> Vec<Vec<String>> {
    (from..=h.max_value())
        .map(|k| {
            let f = h.freq(k);
            vec![k.to_string(), h.count(k).to_string(), sci(f), sci(h.binomial_se(f))]
        })
        .collect()
}

/// 200 evenly spaced abscissae up to the 1 − 10⁻⁴ quantile of `Ω`.
pub fn omega_grid(sum: &EmpiricalSummary) -> Vec<f64> {
    let top = sum.omega_quantile(1.0 - 1e-4).max(f64::MIN_POSITIVE);
    let n = 200;
    (1..=n).map(|i| top * i as f64 / n as f64).collect()
}

pub fn run(s: &Settings, stdout: &mut dyn Write) -> Result<()> {
    let p = s.params()?;
    let sim = simulate(p, s, s.busy_periods)?;
    let dir = s.create_out_dir()?.to_path_buf();
    let sum = &sim.summary;
    let z = s.tolerances.ci_sigma;
    let mut manifest = Manifest::default();

    for (name, h, from) in [
        ("sim_n0.csv", &sum.n0, 0),
        ("sim_b.csv", &sum.b, 1),
        ("sim_m_tilde.csv", &sum.m_tilde, 1),
        ("sim_i_b.csv", &sum.i_b, 1),
        ("sim_j.csv", &sum.j, 1),
    ] {
        manifest.write_csv(&dir, name, &["index", "count", "value", "std_error"], histogram_rows(h, from))?;
    }
    let grid = omega_grid(sum);
    manifest.write_csv(
        &dir,
        "sim_omega_ccdf.csv",
        &["x", "ccdf_omega", "ccdf_omega_hat"],
        grid.iter()
            .map(|&x| vec![sci(x), sci(sum.ccdf_omega(x)), sci(sum.ccdf_omega_hat(x))]),
    )?;
    let records = csv_bytes(&RECORD_HEADER, sim.head.iter().map(record_row))?;
    let records_sha256 = sha256_hex(&records);
    manifest.write_csv(&dir, "records.csv", &RECORD_HEADER, sim.head.iter().map(record_row))?;

    let mut means = BTreeMap::new();
    for (name, e) in [
        ("omega", sum.omega),
        ("omega_hat", sum.omega_hat),
        ("t_tilde", sum.t_tilde),
        ("w_min", sum.w_min),
        ("w_median", sum.w_median),
        ("w_max", sum.w_max),
        ("w_all", sum.w_all),
        ("n0", histogram_estimate(&sum.n0)),
        ("b", histogram_estimate(&sum.b)),
        ("m_tilde", histogram_estimate(&sum.m_tilde)),
        ("i_b", histogram_estimate(&sum.i_b)),
        ("j", histogram_estimate(&sum.j)),
    ] {
        means.insert(name, Interval::new(e, z));
    }
    if sim.busy.samples > 0 {
        means.insert("busy_duration", Interval::new(sim.busy.duration.estimate(), z));
        means.insert("busy_jobs", Interval::new(sim.busy.jobs.estimate(), z));
    }
    let exact = BTreeMap::from([
        ("busy_duration", p.busy_mean()),
        ("busy_jobs", p.jobs_mean()),
        ("b", p.mean_batch()),
        ("n0", (1.0 - p.rho_star()) * p.rho() / (p.slack() * p.slack())),
        ("busy_single_job_prob", (1.0 - p.q()) / (1.0 + p.rho())),
    ]);
    let sigma = p.sigma_plus();
    let summary = SimSummary {
        params: (&p).into(),
        seed: s.seed,
        mode: s.mode,
        replications: s.replications,
        warmup: s.warmup,
        event_cap: s.event_cap,
        capped: sim.capped,
        ci_sigma: z,
        means,
        exact,
        tail_window: sum.tail_window,
        sigma_plus: sigma,
        omega_slope: FitReport::new(&sum.omega_fit, sigma, z),
        omega_slope_corrected: FitReport::new(&sum.omega_fit_corrected, sigma, z),
        busy_periods: sim.busy.samples,
        busy_capped: sim.busy.capped,
        busy_single_job_freq: sim.busy.single_job as f64 / sim.busy.samples.max(1) as f64,
        violations: sum.violations,
        first_violation: sum.first_violation,
        records_sha256,
        files: manifest.files.clone(),
    };
    Manifest::default().write_json(&dir, "summary.json", &summary)?;

    let w = |e| CliError::io("<stdout>", e);
    writeln!(stdout, "replications {} ({} capped), seed {}", s.replications, sim.capped, s.seed).map_err(w)?;
    for (name, i) in &summary.means {
        writeln!(stdout, "mean {name:<14} {} +/- {}", sci(i.mean), sci(i.std_error)).map_err(w)?;
    }
    if let FitReport::Fit { slope, std_error, .. } = summary.omega_slope {
        writeln!(stdout, "omega tail slope {} +/- {} (sigma_plus {})", sci(slope), sci(std_error), sci(sigma)).map_err(w)?;
    }
    writeln!(stdout, "record invariant violations {}", sum.violations).map_err(w)?;
    writeln!(stdout, "wrote {} files to {}", manifest.files.len() + 1, dir.display()).map_err(w)?;
    Ok(())
}
