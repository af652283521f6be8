//! System-level Monte-Carlo simulator for the downlink of a cell-free massive
//! MIMO network.
//!
//! A set of `M` single-antenna access points, spread over a wrap-around square
//! area, jointly serves `K < M` single-antenna users with conjugate
//! beamforming. The crate models the full large-scale pipeline:
//!
//! * random deployments and toroidal distances ([`geometry`]),
//! * three-slope COST-231 Hata path loss, log-normal shadowing, uplink
//!   channel-estimation quality ([`propagation`]),
//! * per-AP power control, uniform or max-min fair ([`power`]),
//! * closed-form and quadrature downlink rates, channel hardening, net
//!   throughput ([`rates`]),
//! * utility-based downlink pilot assignment and the statistical-CSI /
//!   instantaneous-CSI / selective-pilot schemes ([`pilot`]),
//! * the Monte-Carlo experiment driver and CSV outputs ([`harness`]).
//!
//! All randomness flows through explicit seeded streams, so every experiment
//! is reproducible bit for bit from its seed.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod mat;
pub mod pilot;
pub mod power;
pub mod propagation;
pub mod quad;
pub mod rates;

mod socp;

pub use error::{Result, SimError};
pub use mat::Mat;
