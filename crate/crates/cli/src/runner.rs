//! Replication fan-out. Regenerative runs are cut into index chunks that
//! rayon processes in any order; the partial summaries are merged back in
//! index order, so the result does not depend on scheduling.

use std::ops::Range;

use batchps_core::sim::{busy_period, for_each_outcome, SimConfig, SimError, SimMode};
use batchps_core::stats::{Moments, TaggedAccumulator};
use batchps_core::{ModelParams, TaggedBatchRecord};
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub struct TaggedRun {
    pub acc: TaggedAccumulator,
    /// Replications stopped by the event cap.
    pub capped: u64,
    /// Records with index below the requested head length.
    pub head: Vec<TaggedBatchRecord>,
}

fn chunks(n: u64, chunk: u64) -> Vec<Range<u64>> {
    (0..n.div_ceil(chunk)).map(|i| i * chunk..((i + 1) * chunk).min(n)).collect()
}

fn run_range(cfg: &SimConfig, range: Range<u64>, keep: usize, cell_m_max: u64) -> Result<TaggedRun, SimError> {
    let mut run = TaggedRun {
        acc: TaggedAccumulator::new(cell_m_max),
        capped: 0,
        head: Vec::new(),
    };
    let mut other = None;
    for_each_outcome(cfg, range, |r| match r {
        Ok(r) => {
            run.acc.push(&r);
            if r.index < keep as u64 {
                run.head.push(r);
            }
        }
        Err(SimError::EventCap { .. }) => run.capped += 1,
        Err(e) => {
            other.get_or_insert(e);
        }
    })?;
    match other {
        Some(e) => Err(e),
        None => Ok(run),
    }
}

/// Run `cfg` and summarize it, keeping the first `keep` records.
pub fn run_tagged(cfg: &SimConfig, chunk: u64, keep: usize, cell_m_max: u64) -> Result<TaggedRun> {
    cfg.validate()?;
    if cfg.mode == SimMode::StationaryStream {
        return Ok(run_range(cfg, 0..cfg.replications, keep, cell_m_max)?);
    }
    let parts: Vec<_> = chunks(cfg.replications, chunk)
        .into_par_iter()
        .map(|r| run_range(cfg, r, keep, cell_m_max))
        .collect();
    let mut parts = parts.into_iter();
    let mut run = parts.next().expect("at least one chunk")?;
    for part in parts {
        let part = part?;
        run.acc.merge(part.acc);
        run.capped += part.capped;
        run.head.extend(part.head);
    }
    Ok(run)
}

/// Exit-code-4 guard: at most `allowed` of the replications may be capped.
pub fn check_cap_budget(capped: u64, replications: u64, allowed: f64) -> Result<()> {
    let fraction = capped as f64 / replications as f64;
    if fraction > allowed {
        return Err(CliError::EventCapBudget {
            capped,
            replications,
            fraction,
            allowed,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct BusyRun {
    pub duration: Moments,
    pub jobs: Moments,
    pub single_job: u64,
    pub samples: u64,
    pub capped: u64,
    /// Durations in sample order.
    pub durations: Vec<f64>,
}

impl BusyRun {
    fn merge(&mut self, other: BusyRun) {
        self.duration.merge(&other.duration);
        self.jobs.merge(&other.jobs);
        self.single_job += other.single_job;
        self.samples += other.samples;
        self.capped += other.capped;
        self.durations.extend(other.durations);
    }
}

/// `n` independent busy periods, each started by one batch.
pub fn run_busy_periods(p: &ModelParams, n: u64, seed: u64, event_cap: u64, chunk: u64) -> Result<BusyRun> {
    let parts: Vec<Result<BusyRun, SimError>> = chunks(n, chunk)
        .into_par_iter()
        .map(|r| {
            let mut run = BusyRun::default();
            for i in r {
                match busy_period(p, seed, i, event_cap) {
                    Ok(s) => {
                        run.duration.push(s.duration);
                        run.jobs.push(s.jobs as f64);
                        run.single_job += u64::from(s.jobs == 1);
                        run.samples += 1;
                        run.durations.push(s.duration);
                    }
                    Err(SimError::EventCap { .. }) => run.capped += 1,
                    Err(e) => return Err(e),
                }
            }
            Ok(run)
        })
        .collect();
    let mut out = BusyRun::default();
    for part in parts {
        out.merge(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunking_covers_the_range() {
        assert_eq!(chunks(10, 4), vec![0..4, 4..8, 8..10]);
        assert_eq!(chunks(8, 4), vec![0..4, 4..8]);
        assert_eq!(chunks(3, 10), vec![0..3]);
    }

    #[test]
    fn result_does_not_depend_on_chunk_size() {
        let p = ModelParams::new(0.21, 0.3).unwrap();
        let cfg = SimConfig::new(p, 5000, 3);
        let a = run_tagged(&cfg, 5000, 10, 12).unwrap();
        let b = run_tagged(&cfg, 333, 10, 12).unwrap();
        assert_eq!(a.acc.omega_samples, b.acc.omega_samples);
        assert_eq!(a.acc.j, b.acc.j);
        assert_eq!(a.head, b.head);
        assert_eq!(a.head.len(), 10);
        let x = run_busy_periods(&p, 1000, 3, u64::MAX, 1000).unwrap();
        let y = run_busy_periods(&p, 1000, 3, u64::MAX, 7).unwrap();
        assert_eq!(x.durations, y.durations);
    }

    #[test]
    fn cap_budget() {
        assert!(check_cap_budget(1, 10_000, 1e-4).is_ok());
        let e = check_cap_budget(2, 10_000, 1e-4).unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }
}
