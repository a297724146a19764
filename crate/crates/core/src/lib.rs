//! Deterministic simulator of multi-core thermal dynamics plus a complete
//! thermal covert-channel protocol stack and experiment harness.
//!
//! The crate is organized around the pipeline
//! `modulate -> simulate -> observe -> find_preamble -> demodulate`:
//!
//! * [`thermal`] — lumped RC model of an N-core die with a shared spreader
//! * [`sensor`] — quantized, noisy, periodically refreshed DTS readings
//! * [`partition`] — spatial (distinct cores) and temporal (shared core,
//!   round-robin slices) isolation regimes
//! * [`channel`] — ON-OFF keying modem with preamble synchronization
//! * [`hamming`] — Hamming(7,4) single-error-correcting code
//! * [`calibrate`] — model fitting and bit-period calibration sweeps
//! * [`fingerprint`] — workload identification from neighbour traces
//! * [`harness`] — experiment plans, reports, and emitters

pub mod calibrate;
pub mod channel;
pub mod config;
pub mod error;
pub mod fingerprint;
pub mod hamming;
pub mod harness;
pub mod partition;
pub mod sensor;
pub mod thermal;

pub use config::Config;
pub use error::{Error, Result};
