//! Cross-layer sizing of C-RAN links under statistical delay QoS.
//!
//! The crate picks, for every AP-user pair, the BER threshold, ARQ
//! transmission count, RB allocation and latency exponent that minimise the
//! mean RB consumption while meeting effective-capacity, latency-violation
//! and residual-BLER targets ([`tpd`]). The resulting cost matrix feeds a
//! forward/reverse auction for user association ([`auction`]). A slot-level
//! Monte Carlo simulator ([`sim`]) checks the analytic model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amc;
pub mod auction;
pub mod config;
pub mod error;
pub mod mcs;
pub mod params;
pub mod plan;
pub mod qos;
pub mod quadrature;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod tpd;

pub use amc::{ChannelModel, McsSelection, MgfContext, SegmentWeights, SwitchingThresholds};
pub use error::{Error, Result};
pub use mcs::McsTable;
pub use params::{QosRequirement, SystemParams};
pub use qos::DelaySplit;
pub use tpd::{PairContext, TpdSolution};
