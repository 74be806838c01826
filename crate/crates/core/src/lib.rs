//! Performance analysis of the M^[X]/M/1 processor-sharing queue with
//! geometric batch sizes.
//!
//! The crate is `no_std` (it needs `alloc`) and is organized bottom-up:
//!
//! - [`params`]: validated model parameters `(ρ, q)` and the closed-form
//!   spectral constants every other module keys off.
//! - [`transforms`]: real-axis evaluation of the Laplace transforms and
//!   generating functions of the busy period, the residual busy period and
//!   the inter-departure time, plus the busy-period density.
//! - [`series`]: exact truncated PMFs obtained by power-series coefficient
//!   extraction (`M`, `M̃` by two routes, `J` conditional and unconditional)
//!   and the `H_q` factor.
//! - [`asymptotics`]: closed-form tail laws.
//! - [`sim`]: an exact continuous-time Markov chain simulator of the queue
//!   with a tagged batch, driven by counter-based random streams.
//! - [`stats`]: empirical summaries of simulator output.
//!
//! Lower-level helpers live in [`special`] (Bessel `I₁`, log-binomials),
//! [`sum`] (compensated summation) and [`quad`] (adaptive quadrature).

#![no_std]
#![forbid(unsafe_code)]
// NaN must fail the parameter guards, and the quadrature nodes are tabulated in full.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod params;
pub mod pmf;
pub mod quad;
pub mod series;
pub mod sim;
pub mod special;
pub mod stats;
pub mod sum;
pub mod transforms;

pub use asymptotics::{TailAsymptote, TailKind};
pub use params::{validate_params, ModelParams, ParamError, SpectralConstants};
pub use pmf::DiscretePmf;
pub use series::{CoefficientTable, HqEstimate, SeriesError, Truncation};
pub use sim::{SimConfig, SimError, SimMode, TaggedBatchRecord};
pub use stats::{EmpiricalSummary, StatsError};
pub use transforms::DomainError;

/// Parameter pairs behind the figure data, as `(q, ρ*)`.
pub const FIGURE_PAIRS: [(f64, f64); 2] = [(0.3, 0.3), (0.7, 0.7)];
