//! Stationary-stream mode: a single chain that tags every batch.
//!
//! Each job present carries the id of its batch. A departure removes a
//! uniformly chosen job. Batches arriving within one busy period share its
//! departure list, so all of them are completed when it ends.

use alloc::vec::Vec;

use super::rng::{Stream, STREAM_MODE_STREAM};
use super::{sample_ranks, DepartureOrder, Rates, SimConfig, SimError, TaggedBatchRecord};

struct Pending {
    arrival: f64,
    n0: u64,
    b: u64,
    left: u64,
    /// Departures in the busy period before this batch arrived.
    before: usize,
    sojourns: Vec<f64>,
    tagged_ranks: Vec<u64>,
    i_b: u64,
}

/// Feeds `f` one outcome per post-warm-up batch. A busy period that hits the
/// event cap yields an error for each of its batches and the chain restarts
/// from empty.
pub(super) fn run<F>(cfg: &SimConfig, count: u64, mut f: F) -> Result<(), SimError>
where
    F: FnMut(Result<TaggedBatchRecord, SimError>) -> Result<(), SimError>,
{
    let rates = Rates::new(&cfg.params);
    let mut s = Stream::new(cfg.seed, STREAM_MODE_STREAM);
    let mut owners: Vec<u64> = Vec::new();
    let mut departures: Vec<f64> = Vec::new();
    let mut pending: Vec<Pending> = Vec::new();
    let mut ranks = Vec::new();
    // id of pending[0]
    let mut first_id = 0u64;
    let mut next_id = 0u64;
    let mut emitted = 0u64;
    let mut time = 0.0;
    let mut events = 0u64;

    while emitted < count {
        let arrival = if owners.is_empty() {
            time += s.exponential(rates.rho);
            true
        } else {
            time += s.exponential(rates.busy_rate);
            s.uniform() < rates.arrival_prob
        };
        events += 1;
        if events > cfg.event_cap {
            for id in first_id..next_id {
                if id >= cfg.warmup && emitted < count {
                    f(Err(SimError::EventCap {
                        replication: id - cfg.warmup,
                        events: cfg.event_cap,
                    }))?;
                    emitted += 1;
                }
            }
            owners.clear();
            pending.clear();
            departures.clear();
            first_id = next_id;
            events = 0;
            continue;
        }

        if arrival {
            let b = rates.batch(&mut s);
            pending.push(Pending {
                arrival: time,
                n0: owners.len() as u64,
                b,
                left: b,
                before: departures.len(),
                sojourns: Vec::with_capacity(b as usize),
                tagged_ranks: Vec::new(),
                i_b: 0,
            });
            owners.extend(core::iter::repeat_n(next_id, b as usize));
            next_id += 1;
            continue;
        }

        let slot = s.below(owners.len() as u64) as usize;
        let owner = owners.swap_remove(slot);
        departures.push(time);
        let batch = &mut pending[(owner - first_id) as usize];
        batch.left -= 1;
        batch.sojourns.push(time - batch.arrival);
        let rank = (departures.len() - batch.before) as u64;
        if cfg.record_full_order {
            batch.tagged_ranks.push(rank);
        }
        if batch.left == 0 {
            batch.i_b = rank;
        }

        if owners.is_empty() {
            for (offset, batch) in pending.drain(..).enumerate() {
                let id = first_id + offset as u64;
                if id < cfg.warmup || emitted >= count {
                    continue;
                }
                let own = &departures[batch.before..];
                let m_tilde = own.len() as u64;
                sample_ranks(&mut s, batch.b, m_tilde, &mut ranks);
                let j_sampled = *ranks.last().expect("b >= 1");
                let order = cfg.record_full_order.then(|| DepartureOrder {
                    tagged_ranks: batch.tagged_ranks,
                    sampled_ranks: ranks.clone(),
                    departure_times: own.iter().map(|t| t - batch.arrival).collect(),
                });
                f(Ok(TaggedBatchRecord {
                    index: id - cfg.warmup,
                    n0: batch.n0,
                    b: batch.b,
                    t_tilde: time - batch.arrival,
                    m_tilde,
                    omega: batch.sojourns[batch.sojourns.len() - 1],
                    job_sojourns: batch.sojourns,
                    i_b: batch.i_b,
                    j_sampled,
                    omega_hat: own[j_sampled as usize - 1] - batch.arrival,
                    order,
                }))?;
                emitted += 1;
            }
            first_id = next_id;
            departures.clear();
            events = 0;
        }
    }
    Ok(())
}
