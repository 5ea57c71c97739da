//! Link-level simulator for the uplink of a user-centric clustered cell-free
//! massive MIMO network.
//!
//! The crate models one cluster of `L` access points (APs) with `N` antennas
//! each, serving `K` single-antenna users in the presence of `M` out-of-cluster
//! (OCL) interferers. The receive chain is centralized: least-squares channel
//! estimation from orthogonal pilots, rank-constrained OCL interference
//! estimation from the pilot residual, soft MMSE filtering with parallel
//! interference cancellation over all modeled streams, and iterative detection
//! and decoding (IDD) against an LDPC code.
//!
//! Modules follow the processing chain:
//!
//! - [`geometry`]: network layout, 3GPP UMi large-scale fading, block-fading
//!   channel realizations.
//! - [`pilots`]: pilot construction, LS channel estimation, residual projection
//!   and low-rank interference estimation.
//! - [`ldpc`]: code construction, encoding, box-plus sum-product decoding.
//! - [`modem`]: constellations, soft-symbol statistics, extrinsic LLRs.
//! - [`detection`]: MMSE filters and the modified PIC detector.
//! - [`idd`]: detector/decoder message-passing loop over a coherence block.
//! - [`harness`]: Monte Carlo sweeps, SNR calibration, CSV/JSON persistence.

pub mod detection;
pub mod geometry;
pub mod harness;
pub mod idd;
pub mod ldpc;
pub mod linalg;
pub mod modem;
pub mod pilots;
pub mod rng;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimation infeasible: {0}")]
    EstimationInfeasible(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("numerical guard tripped: {0}")]
    Numerical(String),
    #[error("code construction failed: {0}")]
    CodeConstruction(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
