//! Monte Carlo link-level simulator for concurrent-link SDMA MAC protocols in
//! single-hop MIMO-OFDM ad hoc networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: small dense complex kernels (Hermitian eigen, SVD, pseudoinverse).
//! - [`rf`]: topologies, path loss, Rayleigh channels and estimation noise.
//! - [`beamforming`]: TX beamnulling/beamforming and ZF/MMSE receive vectors.
//! - [`metrics`]: post-processing SNR, effective-SNR compression and MCS selection.
//! - [`mac`]: sequential channel access for each MAC configuration.
//! - [`harness`]: seeded sweeps over topologies and link counts.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mac;
pub mod metrics;
pub mod rf;

pub use beamforming::{BeamSolution, CandidateBasis, EffectiveChannel, StreamVectors};
pub use error::{Result, SimError};
pub use harness::{CellStats, Scenario, SweepResult};
pub use linalg::{CMat, CVec};
pub use mac::{McsPolicy, RxStrategy, SchemeConfig, SchemeKind, SchemeResult, TxStrategy};
pub use metrics::{LinkOutcome, McsEntry, McsTable, PpsnrProfile};
pub use num_complex::Complex64;
pub use rf::{ChannelSet, SimParams, Topology};
