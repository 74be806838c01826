//! The invariant suite behind `batchps validate`.

use std::io::Write;

use batchps_core::asymptotics::{busy_tail, j_tail, m_tail, mtilde_tail, residual_busy_tail, residual_vs_full_ratio};
use batchps_core::quad::integrate_to_infinity;
use batchps_core::series::{
    j_conditional_pmf, j_pmf, k_q_deconditioned, m_pmf, mtilde_pmf_composition, mtilde_pmf_corollary,
};
use batchps_core::sim::{for_each_tagged, SimMode};
use batchps_core::stats::{ks_critical, ks_two_sample, Histogram, TaggedAccumulator};
use batchps_core::{DiscretePmf, ModelParams, SpectralConstants, TailAsymptote};
use serde::Serialize;

use super::ParamsReport;
use crate::config::Settings;
use crate::error::{CliError, Result};
use crate::output::{sci, Manifest};
use crate::runner::{check_cap_budget, run_busy_periods, run_tagged};

/// Default validation point.
pub const DEFAULT_PARAMS: (f64, f64) = (0.21, 0.3);
pub const DEFAULT_REPLICATIONS: u64 = 100_000;
/// Stream-mode records kept per record compared: consecutive batches of a
/// busy period are dependent, every tenth is close to independent.
pub const STREAM_THINNING: u64 = 10;
/// Smallest `(b, m̃)` cell tested against the conditional `J` law.
pub const MIN_CELL_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub analytic: f64,
    pub comparison: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// `|comparison − analytic| ≤ tolerance`.
    pub fn abs(name: impl Into<String>, analytic: f64, comparison: f64, tolerance: f64) -> Self {
        let pass = (comparison - analytic).abs() <= tolerance;
        Self::new(name, analytic, comparison, tolerance, pass)
    }

    /// `|comparison/analytic − 1| ≤ tolerance`.
    pub fn rel(name: impl Into<String>, analytic: f64, comparison: f64, tolerance: f64) -> Self {
        let pass = (comparison / analytic - 1.0).abs() <= tolerance;
        Self::new(name, analytic, comparison, tolerance, pass)
    }

    /// `comparison ≤ tolerance`, for statistics whose target is zero.
    pub fn at_most(name: impl Into<String>, comparison: f64, tolerance: f64) -> Self {
        Self::new(name, 0.0, comparison, tolerance, comparison <= tolerance)
    }

    fn new(name: impl Into<String>, analytic: f64, comparison: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            analytic,
            comparison,
            tolerance,
            pass: pass && comparison.is_finite(),
            note: None,
        }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Pass,
    Fail,
}

/// A deliberately wrong constant, for checking that the suite notices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Closed-form `K_q` scaled by `1 + 10⁻⁶`.
    KQ,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTest {
    pub perturbed: Perturbation,
    pub baseline_failures: Vec<String>,
    pub new_failures: Vec<String>,
    /// Exactly one check flipped to failing.
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub params: ParamsReport,
    pub seed: u64,
    pub replications: u64,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub overall: Overall,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub self_test: Option<SelfTest>,
}

impl ValidationReport {
    pub fn new(p: &ModelParams, s: &Settings, checks: Vec<Check>) -> Self {
        let failures: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
        Self {
            params: p.into(),
            seed: s.seed,
            replications: s.replications,
            overall: if failures.is_empty() { Overall::Pass } else { Overall::Fail },
            checks,
            failures,
            self_test: None,
        }
    }
}

/// `∫ f_T` and `∫ t f_T` over `[0, ∞)`.
pub fn busy_density_moments(p: &ModelParams) -> (f64, f64) {
    let f = |t: f64| if t > 0.0 { p.busy_density(t).unwrap_or(0.0) } else { 1.0 - p.q() };
    let total = integrate_to_infinity(f, 0.0, 0.0, 1e-13, 4000).value;
    let mean = integrate_to_infinity(|t| t * f(t), 0.0, 0.0, 1e-13, 4000).value;
    (total, mean)
}

/// `P(T > x)` by quadrature of the density.
pub fn busy_survival(p: &ModelParams, x: f64) -> f64 {
    integrate_to_infinity(|t| p.busy_density(t).unwrap_or(0.0), x, 0.0, 1e-12, 4000).value
}

/// `exact(k)/law(k)` at the far-tail index of a discrete law.
pub fn far_tail_ratio(pmf: &DiscretePmf, law: &TailAsymptote) -> (u64, f64) {
    let k = law.far_tail_index(pmf.mode() as f64) as u64;
    (k, pmf.prob(k) / law.eval(k as f64))
}

/// Largest `|p̂ − p|/se` over `(k, p)`, with `se` from the exact `p`.
/// A zero-variance point counts as `∞` unless it matches exactly.
pub fn max_z(h: &Histogram, exact: impl IntoIterator<Item = (u64, f64)>) -> f64 {
    let mut worst = 0.0f64;
    for (k, p) in exact {
        let se = h.binomial_se(p);
        let gap = (h.freq(k) - p).abs();
        let z = if se > 0.0 {
            gap / se
        } else if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
    }
    worst
}

/// Two-sample KS statistic between two count histograms.
pub fn ks_histograms(a: &Histogram, b: &Histogram) -> f64 {
    let top = a.max_value().max(b.max_value());
    let (na, nb) = (a.total() as f64, b.total() as f64);
    let (mut ca, mut cb, mut d) = (0u64, 0u64, 0.0f64);
    for k in 0..=top {
        ca += a.count(k);
        cb += b.count(k);
        d = d.max((ca as f64 / na - cb as f64 / nb).abs());
    }
    d
}

/// Exact-arithmetic checks: transforms, series, constants, tail laws.
pub fn analytic_checks(p: &ModelParams, s: &Settings, perturb: Option<Perturbation>) -> Result<Vec<Check>> {
    let t = &s.tolerances;
    let c = SpectralConstants::new(p);
    let trunc = s.truncation(p);
    let mut out = Vec::new();

    let unit = [
        ("normalization.busy_lt", p.busy_lt(0.0)),
        ("normalization.residual_busy_lt", p.residual_busy_lt(0.0)),
        ("normalization.interdeparture_lt", p.interdeparture_lt(0.0)),
        ("normalization.jobs_pgf", p.jobs_pgf(1.0)),
        ("normalization.residual_jobs_pgf", p.residual_jobs_pgf(1.0)),
        ("normalization.phi_pgf", p.phi_pgf(1.0)),
    ];
    for (name, v) in unit {
        out.push(Check::abs(name, 1.0, v.map_err(batchps_core::SeriesError::from)?, t.normalization));
    }

    let (total, mean) = busy_density_moments(p);
    out.push(Check::abs("busy_density.total", 1.0, total, t.density_total));
    out.push(Check::abs("busy_density.mean", p.busy_mean(), mean, t.density_mean));

    let m = m_pmf(p, trunc.m_max, trunc.tail_bound)?;
    out.push(Check::abs("m_pmf.first_point", (1.0 - p.q()) / (1.0 + p.rho()), m.prob(1), t.normalization));
    out.push(Check::at_most("m_pmf.tail_mass", m.tail_mass, trunc.tail_bound));

    let cor = mtilde_pmf_corollary(p, trunc.m_max, trunc.tail_bound)?;
    let comp = mtilde_pmf_composition(p, trunc.m_max, trunc.tail_bound)?;
    let gap = (1..=200u64)
        .map(|k| (cor.pmf.prob(k) - comp.prob(k)).abs())
        .fold(0.0, f64::max);
    out.push(Check::at_most("mtilde.route_agreement", gap, t.route_agreement));
    let identity = Check::at_most("mtilde.identity", cor.identity_residual.abs(), t.identity);
    out.push(if cor.closed_by_identity {
        identity.note("inner tail closed by the identity; the residual checks nothing")
    } else {
        identity
    });

    let (mut norm_gap, mut mean_gap) = (0.0f64, 0.0f64);
    for (b, mm) in [(1, 1), (1, 5), (2, 10), (3, 7), (5, 40), (8, 300)] {
        let d = j_conditional_pmf(b, mm).map_err(batchps_core::SeriesError::from)?;
        norm_gap = norm_gap.max((d.total() - 1.0).abs());
        let want = b as f64 * (mm + 1) as f64 / (b + 1) as f64;
        mean_gap = mean_gap.max((d.mean() / want - 1.0).abs());
    }
    out.push(Check::at_most("j_conditional.normalization", norm_gap, t.normalization));
    out.push(Check::at_most("j_conditional.mean", mean_gap, t.normalization));

    let j = j_pmf(p, &trunc)?;
    out.push(Check::at_most("j_pmf.tail_mass", j.tail_mass, trunc.tail_bound));

    let k_q = match perturb {
        Some(Perturbation::KQ) => c.k_q * (1.0 + 1e-6),
        None => c.k_q,
    };
    let decond = k_q_deconditioned(p, trunc.b_max.max(400), trunc.k_max.max(2000));
    out.push(Check::rel("k_q.deconditioned", k_q, decond, t.k_q));

    let ratio = residual_vs_full_ratio(p);
    let prefactors = residual_busy_tail(p).prefactor / busy_tail(p).prefactor;
    out.push(Check::rel("tail_ratio.prefactors", ratio, prefactors, t.ratio_identity));
    out.push(Check::new("tail_ratio.exceeds_one", 1.0, ratio, 0.0, ratio > 1.0));

    for (name, pmf, law) in [
        ("far_tail.m", &m, m_tail(p)),
        ("far_tail.mtilde", &comp, mtilde_tail(p)),
        ("far_tail.j", &j, j_tail(p)),
    ] {
        let (k, r) = far_tail_ratio(pmf, &law);
        out.push(Check::abs(name, 1.0, r, t.far_tail).note(format!("index {k}")));
    }
    let law = busy_tail(p);
    let x = law.far_tail_index(0.0);
    let r = busy_survival(p, x) / law.eval(x);
    out.push(Check::abs("far_tail.busy", 1.0, r, t.far_tail).note(format!("x = {x}")));
    Ok(out)
}

/// Simulation checks at `s.replications`.
pub fn simulation_checks(p: &ModelParams, s: &Settings) -> Result<Vec<Check>> {
    let t = &s.tolerances;
    let z = t.ci_sigma;
    let mut out = Vec::new();

    let mut cfg = s.sim_config(*p);
    cfg.mode = SimMode::RegenerativeTagged;
    let run = run_tagged(&cfg, s.chunk, 0, 12)?;
    check_cap_budget(run.capped, cfg.replications, t.event_cap_fraction)?;
    let regen = run.acc;
    out.push(Check::at_most("sim.record_invariants", regen.violations as f64, 0.0));

    let busy = run_busy_periods(p, s.busy_periods.max(1), s.seed, s.event_cap, s.chunk)?;
    let e = busy.duration.estimate();
    out.push(Check::abs("sim.busy_mean", p.busy_mean(), e.mean, z * e.std_error));
    let single = (1.0 - p.q()) / (1.0 + p.rho());
    let n = busy.samples as f64;
    out.push(Check::abs(
        "sim.busy_single_job",
        single,
        busy.single_job as f64 / n,
        z * (single * (1.0 - single) / n).sqrt(),
    ));

    let mut stream_cfg = cfg;
    stream_cfg.mode = SimMode::StationaryStream;
    stream_cfg.replications = cfg.replications * STREAM_THINNING;
    let mut stream = TaggedAccumulator::new(0);
    for_each_tagged(&stream_cfg, 0..stream_cfg.replications, |r| {
        if r.index % STREAM_THINNING == 0 {
            stream.push(&r);
        }
    })?;
    let crit = ks_critical(regen.records as usize, stream.records as usize, t.ks_alpha);
    for (name, d) in [
        ("sim.mode_agreement.n0", ks_histograms(&regen.n0, &stream.n0)),
        ("sim.mode_agreement.m_tilde", ks_histograms(&regen.m_tilde, &stream.m_tilde)),
        ("sim.mode_agreement.omega", {
            let (mut a, mut b) = (regen.omega_samples.clone(), stream.omega_samples.clone());
            a.sort_unstable_by(f64::total_cmp);
            b.sort_unstable_by(f64::total_cmp);
            ks_two_sample(&a, &b)
        }),
    ] {
        out.push(Check::new(name, 0.0, d, crit, d < crit).note(format!("stream thinned 1 in {STREAM_THINNING}")));
    }

    let trunc = s.truncation(p);
    let comp = mtilde_pmf_composition(p, trunc.m_max, trunc.tail_bound)?;
    let exact = (1..=30u64).map(|k| (k, comp.prob(k)));
    out.push(Check::at_most("sim.mtilde_pmf", max_z(&regen.m_tilde, exact), z).note("max |z| over m <= 30"));

    let mut worst = 0.0f64;
    let mut cells = 0;
    for (&(b, m), h) in &regen.cells {
        if h.total() < MIN_CELL_SAMPLES {
            continue;
        }
        cells += 1;
        let law = j_conditional_pmf(b, m).map_err(batchps_core::SeriesError::from)?;
        worst = worst.max(max_z(h, law.iter()));
    }
    out.push(Check::at_most("sim.j_conditional", worst, z).note(format!("{cells} cells with >= {MIN_CELL_SAMPLES} samples")));
    Ok(out)
}

/// Full report; with `self_test`, the analytic part is rerun with a
/// perturbed constant and the difference reported.
pub fn validate(p: &ModelParams, s: &Settings, self_test: bool) -> Result<ValidationReport> {
    let mut checks = analytic_checks(p, s, None)?;
    checks.extend(simulation_checks(p, s)?);
    let mut report = ValidationReport::new(p, s, checks);
    if self_test {
        let perturbed = analytic_checks(p, s, Some(Perturbation::KQ))?;
        let new_failures: Vec<String> = perturbed
            .iter()
            .filter(|c| !c.pass && !report.failures.contains(&c.name))
            .map(|c| c.name.clone())
            .collect();
        report.self_test = Some(SelfTest {
            perturbed: Perturbation::KQ,
            baseline_failures: report.failures.clone(),
            pass: new_failures.len() == 1,
            new_failures,
        });
    }
    Ok(report)
}

pub fn run(s: &Settings, self_test: bool, stdout: &mut dyn Write) -> Result<()> {
    let p = match s.params {
        Some(p) => p,
        None => ModelParams::new(DEFAULT_PARAMS.0, DEFAULT_PARAMS.1)?,
    };
    let report = validate(&p, s, self_test)?;
    let dir = s.create_out_dir()?;
    Manifest::default().write_json(dir, "validation.json", &report)?;
    let w = |e| CliError::io("<stdout>", e);
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        writeln!(
            stdout,
            "{verdict} {:<34} analytic {} comparison {} tolerance {}",
            c.name,
            sci(c.analytic),
            sci(c.comparison),
            sci(c.tolerance)
        )
        .map_err(w)?;
    }
    writeln!(stdout, "overall {:?}", report.overall).map_err(w)?;
    if let Some(st) = &report.self_test {
        writeln!(stdout, "self-test new failures: {:?}", st.new_failures).map_err(w)?;
        return if st.pass {
            Ok(())
        } else {
            Err(CliError::Validation(st.new_failures.clone()))
        };
    }
    match report.overall {
        Overall::Pass => Ok(()),
        Overall::Fail => Err(CliError::Validation(report.failures)),
    }
}
