//! Solvers for joint receive antenna selection, quantized RIS phase-shift
//! design and uplink precoding in RIS-aided multiuser MIMO.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the system description and the exact sum-rate / WMMSE
//!   evaluations every solver is checked against.
//! * [`channel`] draws seeded Rayleigh-fading realizations.
//! * [`pdd`] is the joint design based on penalty dual decomposition over the
//!   WMMSE reformulation.
//! * [`so`] is the sequential low-complexity pipeline (element-wise phase
//!   design, greedy selection, iterative water-filling).
//! * [`benchmarks`] contains the random and alternating-optimization
//!   reference schemes.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod model;
pub mod pdd;
mod rng;
pub mod so;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use model::{ChannelRealization, DesignState, Quantization, SystemConfig};
