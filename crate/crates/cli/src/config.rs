//! Experiment configuration: a JSON document, overridden field by field by
//! command-line flags, then resolved into [`Settings`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use batchps_core::series::DEFAULT_TAIL_BOUND;
use batchps_core::sim::{SimConfig, SimMode, DEFAULT_EVENT_CAP};
use batchps_core::stats::DEFAULT_TAIL_WINDOW;
use batchps_core::{ModelParams, Truncation};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUT: &str = "batchps-out";
pub const FAST_REPLICATIONS: u64 = 1_000_000;
pub const FULL_REPLICATIONS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// 10⁶ tagged batches.
    Fast,
    /// 10⁷ tagged batches.
    Full,
}

impl Profile {
    pub fn replications(self) -> u64 {
        match self {
            Profile::Fast => FAST_REPLICATIONS,
            Profile::Full => FULL_REPLICATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Regenerative,
    Stream,
}

impl From<Mode> for SimMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Regenerative => SimMode::RegenerativeTagged,
            Mode::Stream => SimMode::StationaryStream,
        }
    }
}

/// Where the `H_q` factor of the `Ω` tail line comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum HqSource {
    /// Exact `J` law from the series engine.
    Analytic,
    /// Empirical `J` histogram of the same run.
    Simulated,
}

/// Raw configuration. Every field is optional; a file and the flags are
/// merged with [`ExperimentConfig::overlay`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rho: Option<f64>,
    pub rho_star: Option<f64>,
    pub q: Option<f64>,
    pub seed: Option<u64>,
    pub replications: Option<u64>,
    pub profile: Option<Profile>,
    pub mode: Option<Mode>,
    pub warmup: Option<u64>,
    pub event_cap: Option<u64>,
    pub tail_bound: Option<f64>,
    pub m_max: Option<usize>,
    pub k_max: Option<usize>,
    pub b_max: Option<usize>,
    /// `m_max` of the `J` law used for `H_q`.
    pub hq_m_max: Option<usize>,
    pub hq_source: Option<HqSource>,
    pub tail_window: Option<(f64, f64)>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// Batch size and job count of the `J | b, m` table.
    pub b: Option<u64>,
    pub m: Option<u64>,
    pub figures: Option<Vec<u8>>,
    /// Leading records written to `records.csv`.
    pub records: Option<usize>,
    pub busy_periods: Option<u64>,
    /// Replications per parallel work unit.
    pub chunk: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| CliError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Fields set in `top` replace those of `self`. A load given in `top`
    /// (as `rho` or `rho_star`) replaces both load fields below it.
    pub fn overlay(mut self, top: ExperimentConfig) -> Self {
        if top.rho.is_some() || top.rho_star.is_some() {
            self.rho = top.rho;
            self.rho_star = top.rho_star;
        }
        macro_rules! take {
            ($($f:ident),*) => {$(
                if top.$f.is_some() {
                    self.$f = top.$f;
                }
            )*};
        }
        take!(
            q,
            seed,
            replications,
            profile,
            mode,
            warmup,
            event_cap,
            tail_bound,
            m_max,
            k_max,
            b_max,
            hq_m_max,
            hq_source,
            tail_window,
            out,
            b,
            m,
            figures,
            records,
            busy_periods,
            chunk
        );
        self.tolerances.extend(top.tolerances);
        self
    }

    /// `(ρ, q)` or `(ρ*, q)`; `None` when no parameter at all is given.
    pub fn params(&self) -> Result<Option<ModelParams>> {
        let q = self.q;
        match (self.rho, self.rho_star, q) {
            (None, None, None) => Ok(None),
            (Some(_), Some(_), _) => Err(CliError::config("give one of rho and rho_star, not both")),
            (_, _, None) => Err(CliError::config("q is required")),
            (None, None, Some(_)) => Err(CliError::config("one of rho and rho_star is required")),
            (Some(rho), None, Some(q)) => Ok(Some(ModelParams::new(rho, q)?)),
            (None, Some(rs), Some(q)) => Ok(Some(ModelParams::from_load(rs, q)?)),
        }
    }

    pub fn resolve(&self, default_replications: u64) -> Result<Settings> {
        let mut tolerances = Tolerances::default();
        for (name, &value) in &self.tolerances {
            tolerances.set(name, value)?;
        }
        let replications = self
            .replications
            .or(self.profile.map(Profile::replications))
            .unwrap_or(default_replications);
        if replications == 0 {
            return Err(CliError::config("replications must be at least 1"));
        }
        let tail_bound = self.tail_bound.unwrap_or(DEFAULT_TAIL_BOUND);
        if !(tail_bound > 0.0 && tail_bound < 1.0) {
            return Err(CliError::config(format!("tail_bound = {tail_bound} must lie in (0, 1)")));
        }
        let tail_window = self.tail_window.unwrap_or(DEFAULT_TAIL_WINDOW);
        if !(0.0 < tail_window.0 && tail_window.0 < tail_window.1 && tail_window.1 < 1.0) {
            return Err(CliError::config(format!("tail_window {tail_window:?} must satisfy 0 < lo < hi < 1")));
        }
        let figures = self.figures.clone().unwrap_or_else(|| vec![3, 4, 5, 6]);
        if let Some(f) = figures.iter().find(|f| !(3..=6).contains(*f)) {
            return Err(CliError::config(format!("figure {f} does not exist (3, 4, 5 or 6)")));
        }
        let (b, m) = (self.b.unwrap_or(2), self.m.unwrap_or(10));
        if b < 1 || m < b {
            return Err(CliError::config(format!("J | b, m needs 1 <= b <= m (got b = {b}, m = {m})")));
        }
        let chunk = self.chunk.unwrap_or(1 << 16);
        if chunk == 0 {
            return Err(CliError::config("chunk must be at least 1"));
        }
        Ok(Settings {
            params: self.params()?,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            replications,
            mode: self.mode.unwrap_or(Mode::Regenerative),
            warmup: self.warmup.unwrap_or(1000),
            event_cap: self.event_cap.unwrap_or(DEFAULT_EVENT_CAP).max(1),
            tail_bound,
            m_max: self.m_max,
            k_max: self.k_max,
            b_max: self.b_max,
            hq_m_max: self.hq_m_max,
            hq_source: self.hq_source.unwrap_or(HqSource::Analytic),
            tail_window,
            out: self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            tolerances,
            b,
            m,
            figures,
            records: self.records.unwrap_or(10),
            busy_periods: self.busy_periods.unwrap_or(100_000),
            chunk,
        })
    }
}

/// Named tolerances, settable with `--tolerance NAME=VALUE`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// `|T*(0) − 1|` and the other transform normalizations.
    pub normalization: f64,
    /// Busy-period density quadrature: total mass.
    pub density_total: f64,
    /// Busy-period density quadrature: mean.
    pub density_mean: f64,
    /// Termwise gap between the two `M̃` routes.
    pub route_agreement: f64,
    /// `(1+ρ) Σ b_k` against `1 − ρ − q`.
    pub identity: f64,
    /// Tail-prefactor ratio against `(1−ρ−q)/|σ_q⁺|`.
    pub ratio_identity: f64,
    /// Relative gap between the two `K_q` evaluations.
    pub k_q: f64,
    /// `|exact/asymptote − 1|` at the far-tail index.
    pub far_tail: f64,
    /// Relative error of the `J` tail law over the mode-to-99.9% window.
    pub asymptote_window: f64,
    /// Relative error of the fitted `Ω` decay rate.
    pub slope: f64,
    /// Width of simulation intervals in standard errors.
    pub ci_sigma: f64,
    /// Level of the two-sample KS tests.
    pub ks_alpha: f64,
    /// Largest tolerated fraction of replications stopped by the event cap.
    pub event_cap_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            normalization: 1e-12,
            density_total: 1e-8,
            density_mean: 1e-6,
            route_agreement: 1e-10,
            identity: 1e-10,
            ratio_identity: 1e-10,
            k_q: 1e-8,
            far_tail: 0.05,
            asymptote_window: 0.20,
            slope: 0.10,
            ci_sigma: 3.0,
            ks_alpha: 0.01,
            event_cap_fraction: 1e-4,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 13] = [
        "normalization",
        "density_total",
        "density_mean",
        "route_agreement",
        "identity",
        "ratio_identity",
        "k_q",
        "far_tail",
        "asymptote_window",
        "slope",
        "ci_sigma",
        "ks_alpha",
        "event_cap_fraction",
    ];

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(CliError::config(format!("tolerance {name} = {value} must be finite and >= 0")));
        }
        let slot = match name {
            "normalization" => &mut self.normalization,
            "density_total" => &mut self.density_total,
            "density_mean" => &mut self.density_mean,
            "route_agreement" => &mut self.route_agreement,
            "identity" => &mut self.identity,
            "ratio_identity" => &mut self.ratio_identity,
            "k_q" => &mut self.k_q,
            "far_tail" => &mut self.far_tail,
            "asymptote_window" => &mut self.asymptote_window,
            "slope" => &mut self.slope,
            "ci_sigma" => &mut self.ci_sigma,
            "ks_alpha" => &mut self.ks_alpha,
            "event_cap_fraction" => &mut self.event_cap_fraction,
            _ => {
                return Err(CliError::config(format!(
                    "unknown tolerance {name:?}; known: {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        *slot = value;
        Ok(())
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub params: Option<ModelParams>,
    pub seed: u64,
    pub replications: u64,
    pub mode: Mode,
    pub warmup: u64,
    pub event_cap: u64,
    pub tail_bound: f64,
    pub m_max: Option<usize>,
    pub k_max: Option<usize>,
    pub b_max: Option<usize>,
    pub hq_m_max: Option<usize>,
    pub hq_source: HqSource,
    pub tail_window: (f64, f64),
    pub out: PathBuf,
    pub tolerances: Tolerances,
    pub b: u64,
    pub m: u64,
    pub figures: Vec<u8>,
    pub records: usize,
    pub busy_periods: u64,
    pub chunk: u64,
}

impl Settings {
    pub fn params(&self) -> Result<ModelParams> {
        self.params
            .ok_or_else(|| CliError::config("model parameters required: --rho or --rho-star, and --q"))
    }

    /// Adaptive orders for `p`, with explicit overrides applied.
    pub fn truncation(&self, p: &ModelParams) -> Truncation {
        let mut t = Truncation::adaptive(p, self.tail_bound);
        if let Some(m) = self.m_max {
            t.m_max = m.max(1);
        }
        if let Some(k) = self.k_max {
            t.k_max = k.max(1);
        }
        if let Some(b) = self.b_max {
            t.b_max = b.max(1);
        }
        t
    }

    pub fn sim_config(&self, p: ModelParams) -> SimConfig {
        let mut c = SimConfig::new(p, self.replications, self.seed);
        c.mode = self.mode.into();
        c.warmup = self.warmup;
        c.event_cap = self.event_cap;
        c
    }

    pub fn create_out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

/// `NAME=VALUE` for `--tolerance`.
pub fn parse_tolerance(s: &str) -> std::result::Result<(String, f64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    let value: f64 = value.trim().parse().map_err(|e| format!("{name}: {e}"))?;
    Ok((name.trim().to_string(), value))
}
