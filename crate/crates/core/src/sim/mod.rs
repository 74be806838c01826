//! Exact simulation of the batch-arrival processor-sharing queue.
//!
//! With `k ≥ 1` unit-mean exponential jobs sharing a unit-rate server, the
//! next departure happens at rate 1 and removes a uniformly chosen job.
//! Tracking job counts is therefore enough: the regenerative mode runs a
//! two-counter chain (tagged jobs left, other jobs present) and the stream
//! mode keeps only the owning batch of each job present.

mod rng;
mod stream;

use alloc::vec::Vec;

use libm::log;
use thiserror::Error;

use crate::params::ModelParams;

pub use rng::{Stream, BUSY_STREAM_BASE, STREAM_MODE_STREAM};

/// Default per-replication event cap.
pub const DEFAULT_EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    /// One long run from an empty system; every batch after the warm-up
    /// is tagged.
    StationaryStream,
    /// Independent replications: `N₀` from its stationary law, `B`
    /// geometric, then the residual busy period run to emptiness.
    RegenerativeTagged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub params: ModelParams,
    pub replications: u64,
    pub mode: SimMode,
    /// Batches discarded at the start of a stream-mode run.
    pub warmup: u64,
    pub seed: u64,
    /// Keep departure ranks and times in each record.
    pub record_full_order: bool,
    /// Abort a replication (stream mode: a busy period) after this many
    /// events.
    pub event_cap: u64,
}

impl SimConfig {
    pub fn new(params: ModelParams, replications: u64, seed: u64) -> Self {
        Self {
            params,
            replications,
            mode: SimMode::RegenerativeTagged,
            warmup: 1000,
            seed,
            record_full_order: false,
            event_cap: DEFAULT_EVENT_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.replications < 1 {
            return Err(SimError::InvalidConfig("replications must be at least 1"));
        }
        if self.event_cap < 1 {
            return Err(SimError::InvalidConfig("event cap must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("replication {replication} exceeded the event cap ({events} events)")]
    EventCap { replication: u64, events: u64 },
}

/// Departure-order detail kept when `record_full_order` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct DepartureOrder {
    /// Ranks `I_1 < … < I_b` of the tagged departures.
    pub tagged_ranks: Vec<u64>,
    /// The `b` re-sampled ranks, ascending.
    pub sampled_ranks: Vec<u64>,
    /// Departure times of all `m̃` jobs, measured from the tagged arrival.
    pub departure_times: Vec<f64>,
}

/// One tagged batch. Times are measured from its arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedBatchRecord {
    /// Replication index (stream mode: post-warm-up batch number).
    pub index: u64,
    pub n0: u64,
    pub b: u64,
    pub t_tilde: f64,
    pub m_tilde: u64,
    pub omega: f64,
    /// Sojourn times of the tagged jobs in departure order. Tagged jobs are
    /// exchangeable, so the `i`-th entry is the sojourn of an unidentified
    /// tagged job.
    pub job_sojourns: Vec<f64>,
    pub i_b: u64,
    pub j_sampled: u64,
    pub omega_hat: f64,
    pub order: Option<DepartureOrder>,
}

impl TaggedBatchRecord {
    pub fn w_min(&self) -> f64 {
        self.job_sojourns[0]
    }

    pub fn w_max(&self) -> f64 {
        self.job_sojourns[self.job_sojourns.len() - 1]
    }

    /// Lower median of the tagged job sojourns.
    pub fn w_median(&self) -> f64 {
        self.job_sojourns[(self.job_sojourns.len() - 1) / 2]
    }

    /// The structural invariants every record must satisfy; returns the
    /// first one violated.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.job_sojourns.len() as u64 != self.b {
            return Err("one sojourn per tagged job");
        }
        if !(self.b <= self.i_b && self.i_b <= self.m_tilde) {
            return Err("b <= i_b <= m_tilde");
        }
        if !(self.b <= self.j_sampled && self.j_sampled <= self.m_tilde) {
            return Err("b <= j_sampled <= m_tilde");
        }
        if self.m_tilde < self.n0 + self.b {
            return Err("m_tilde >= n0 + b");
        }
        if !(self.w_min() <= self.omega && self.omega <= self.t_tilde) {
            return Err("min sojourn <= omega <= t_tilde");
        }
        if self.omega != self.w_max() {
            return Err("omega = max sojourn");
        }
        if !(self.omega_hat > 0.0 && self.omega_hat <= self.t_tilde) {
            return Err("0 < omega_hat <= t_tilde");
        }
        Ok(())
    }
}

/// Per-run constants of the chain.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    rho: f64,
    busy_rate: f64,
    arrival_prob: f64,
    ln_q: f64,
    ln_lambda: f64,
    empty_prob: f64,
}

impl Rates {
    pub(crate) fn new(p: &ModelParams) -> Self {
        let rho = p.rho();
        Self {
            rho,
            busy_rate: 1.0 + rho,
            arrival_prob: rho / (1.0 + rho),
            ln_q: log(p.q()),
            ln_lambda: log(rho + p.q()),
            empty_prob: 1.0 - p.rho_star(),
        }
    }

    fn batch(&self, s: &mut Stream) -> u64 {
        s.shifted_geometric(self.ln_q)
    }

    /// `N₀` from `P(0) = 1 − ρ*`, `P(n) = (1 − ρ*) ρ (ρ+q)^{n−1}`.
    fn stationary_n0(&self, s: &mut Stream) -> u64 {
        if s.uniform() < self.empty_prob {
            0
        } else {
            s.shifted_geometric(self.ln_lambda)
        }
    }
}

/// Floyd's sampling of `b` distinct ranks from `1..=m`, ascending.
pub(crate) fn sample_ranks(s: &mut Stream, b: u64, m: u64, out: &mut Vec<u64>) {
    out.clear();
    for j in (m - b + 1)..=m {
        let t = 1 + s.below(j);
        if out.contains(&t) {
            out.push(j);
        } else {
            out.push(t);
        }
    }
    out.sort_unstable();
}

/// Reusable buffers for the regenerative mode.
#[derive(Default)]
pub struct Replicator {
    departures: Vec<f64>,
    ranks: Vec<u64>,
}

impl Replicator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replication `index` of a regenerative run: deterministic in
    /// `(cfg.seed, index)` and independent of every other index.
    pub fn run(&mut self, cfg: &SimConfig, index: u64) -> Result<TaggedBatchRecord, SimError> {
        let rates = Rates::new(&cfg.params);
        let mut s = Stream::new(cfg.seed, index);
        let n0 = rates.stationary_n0(&mut s);
        let b = rates.batch(&mut s);

        let (mut tagged, mut total) = (b, n0 + b);
        let mut time = 0.0;
        let mut events = 0u64;
        let mut sojourns = Vec::with_capacity(b as usize);
        let mut tagged_ranks = Vec::new();
        let mut i_b = 0;
        self.departures.clear();
        while total > 0 {
            events += 1;
            if events > cfg.event_cap {
                return Err(SimError::EventCap {
                    replication: index,
                    events: cfg.event_cap,
                });
            }
            time += s.exponential(rates.busy_rate);
            if s.uniform() < rates.arrival_prob {
                total += rates.batch(&mut s);
                continue;
            }
            self.departures.push(time);
            if s.below(total) < tagged {
                tagged -= 1;
                sojourns.push(time);
                let rank = self.departures.len() as u64;
                if cfg.record_full_order {
                    tagged_ranks.push(rank);
                }
                if tagged == 0 {
                    i_b = rank;
                }
            }
            total -= 1;
        }
        let m_tilde = self.departures.len() as u64;
        sample_ranks(&mut s, b, m_tilde, &mut self.ranks);
        let j_sampled = *self.ranks.last().expect("b >= 1");
        let order = cfg.record_full_order.then(|| DepartureOrder {
            tagged_ranks,
            sampled_ranks: self.ranks.clone(),
            departure_times: self.departures.clone(),
        });
        Ok(TaggedBatchRecord {
            index,
            n0,
            b,
            t_tilde: time,
            m_tilde,
            omega: sojourns[sojourns.len() - 1],
            job_sojourns: sojourns,
            i_b,
            j_sampled,
            omega_hat: self.departures[j_sampled as usize - 1],
            order,
        })
    }
}

/// Visit records `range` of the run in index order, stopping at the first
/// error.
///
/// Regenerative runs may be split into disjoint ranges and processed
/// concurrently; a stream-mode run is one chain and `range` must start at 0.
pub fn for_each_tagged<F: FnMut(TaggedBatchRecord)>(
    cfg: &SimConfig,
    range: core::ops::Range<u64>,
    mut f: F,
) -> Result<(), SimError> {
    drive(cfg, range, |r| r.map(&mut f))
}

/// Like [`for_each_tagged`], but a replication that hits the event cap is
/// reported to `f` as an error and the run carries on.
pub fn for_each_outcome<F: FnMut(Result<TaggedBatchRecord, SimError>)>(
    cfg: &SimConfig,
    range: core::ops::Range<u64>,
    mut f: F,
) -> Result<(), SimError> {
    drive(cfg, range, |r| {
        f(r);
        Ok(())
    })
}

fn drive<F>(cfg: &SimConfig, range: core::ops::Range<u64>, mut f: F) -> Result<(), SimError>
where
    F: FnMut(Result<TaggedBatchRecord, SimError>) -> Result<(), SimError>,
{
    cfg.validate()?;
    let end = range.end.min(cfg.replications);
    match cfg.mode {
        SimMode::RegenerativeTagged => {
            let mut rep = Replicator::new();
            for index in range.start..end {
                f(rep.run(cfg, index))?;
            }
            Ok(())
        }
        SimMode::StationaryStream => {
            if range.start != 0 {
                return Err(SimError::InvalidConfig("a stream-mode run cannot start mid-way"));
            }
            stream::run(cfg, end, f)
        }
    }
}

/// All records of a run, in index order.
pub fn simulate_tagged(cfg: &SimConfig) -> Result<Vec<TaggedBatchRecord>, SimError> {
    let mut out = Vec::with_capacity(cfg.replications.min(1 << 20) as usize);
    for_each_tagged(cfg, 0..cfg.replications, |r| out.push(r))?;
    Ok(out)
}

/// Duration and job count of one busy period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BusyPeriodSample {
    pub duration: f64,
    pub jobs: u64,
}

/// Busy period `index`, started by one geometric batch in an empty system.
pub fn busy_period(p: &ModelParams, seed: u64, index: u64, event_cap: u64) -> Result<BusyPeriodSample, SimError> {
    let rates = Rates::new(p);
    let mut s = Stream::new(seed, BUSY_STREAM_BASE | index);
    let mut present = rates.batch(&mut s);
    let (mut time, mut jobs, mut events) = (0.0, 0u64, 0u64);
    while present > 0 {
        events += 1;
        if events > event_cap {
            return Err(SimError::EventCap {
                replication: index,
                events: event_cap,
            });
        }
        time += s.exponential(rates.busy_rate);
        if s.uniform() < rates.arrival_prob {
            present += rates.batch(&mut s);
        } else {
            present -= 1;
            jobs += 1;
        }
    }
    Ok(BusyPeriodSample { duration: time, jobs })
}

pub fn simulate_busy_periods(p: &ModelParams, n: u64, seed: u64) -> Result<Vec<BusyPeriodSample>, SimError> {
    (0..n).map(|i| busy_period(p, seed, i, DEFAULT_EVENT_CAP)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(rho: f64, q: f64, n: u64) -> SimConfig {
        SimConfig::new(ModelParams::new(rho, q).unwrap(), n, 42)
    }

    #[test]
    fn records_satisfy_invariants() {
        let mut c = cfg(0.21, 0.3, 20_000);
        c.record_full_order = true;
        for r in simulate_tagged(&c).unwrap() {
            r.check().unwrap();
            let o = r.order.as_ref().unwrap();
            assert_eq!(o.tagged_ranks.len() as u64, r.b);
            assert_eq!(*o.tagged_ranks.last().unwrap(), r.i_b);
            assert_eq!(*o.sampled_ranks.last().unwrap(), r.j_sampled);
            assert_eq!(o.departure_times.len() as u64, r.m_tilde);
            assert_eq!(*o.departure_times.last().unwrap(), r.t_tilde);
            assert!(o.sampled_ranks.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn replication_is_independent_of_order() {
        let c = cfg(0.21, 0.3, 50);
        let all = simulate_tagged(&c).unwrap();
        let mut rep = Replicator::new();
        assert_eq!(rep.run(&c, 37).unwrap(), all[37]);
        assert_eq!(rep.run(&c, 3).unwrap(), all[3]);
    }

    #[test]
    fn light_load_has_no_interruptions() {
        let c = cfg(1e-6, 0.3, 10_000);
        let recs = simulate_tagged(&c).unwrap();
        let clean = recs.iter().filter(|r| r.m_tilde == r.n0 + r.b).count();
        assert!(clean as f64 / recs.len() as f64 >= 0.999);
    }

    #[test]
    fn event_cap_aborts() {
        let mut c = cfg(0.21, 0.3, 100);
        c.event_cap = 1;
        assert!(matches!(simulate_tagged(&c), Err(SimError::EventCap { .. })));
        c.replications = 0;
        assert!(matches!(simulate_tagged(&c), Err(SimError::InvalidConfig(_))));
    }

    #[test]
    fn capped_replications_are_reported_and_skipped() {
        for mode in [SimMode::RegenerativeTagged, SimMode::StationaryStream] {
            let mut c = cfg(0.49, 0.3, 2000);
            c.mode = mode;
            c.warmup = 5;
            c.event_cap = 8;
            let (mut ok, mut capped, mut next) = (0u64, 0u64, 0u64);
            for_each_outcome(&c, 0..c.replications, |r| {
                let index = match r {
                    Ok(r) => {
                        r.check().unwrap();
                        ok += 1;
                        r.index
                    }
                    Err(SimError::EventCap { replication, .. }) => {
                        capped += 1;
                        replication
                    }
                    Err(e) => panic!("{e}"),
                };
                assert_eq!(index, next);
                next += 1;
            })
            .unwrap();
            assert_eq!(ok + capped, 2000, "{mode:?}");
            assert!(ok > 0 && capped > 0, "{mode:?}: {ok} ok, {capped} capped");
        }
    }

    #[test]
    fn floyd_sampling_is_a_subset() {
        let mut s = Stream::new(9, 0);
        let mut out = Vec::new();
        for (b, m) in [(1, 1), (3, 3), (2, 10), (5, 7)] {
            sample_ranks(&mut s, b, m, &mut out);
            assert_eq!(out.len() as u64, b);
            assert!(out.windows(2).all(|w| w[0] < w[1]));
            assert!(out.iter().all(|&r| (1..=m).contains(&r)));
        }
    }

    #[test]
    fn busy_period_single_job_probability() {
        let p = ModelParams::new(0.21, 0.3).unwrap();
        let n = 200_000u64;
        let samples = simulate_busy_periods(&p, n, 5).unwrap();
        let ones = samples.iter().filter(|s| s.jobs == 1).count() as f64 / n as f64;
        let want = 0.7 / 1.21;
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((ones - want).abs() < 4.0 * se, "{ones} vs {want}");
        assert!(samples.iter().all(|s| s.jobs >= 1 && s.duration > 0.0));
    }
}
