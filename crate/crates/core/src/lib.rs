//! Power-minimizing downlink precoding for sparsely spread MC-CDMA with
//! discrete-alphabet inputs.
//!
//! The crate is organized bottom-up:
//!
//! * [`signature`] generates regular sparse spreading matrices and the
//!   bipartite connectivity between subcarriers and users.
//! * [`channel`] synthesizes frequency-selective channels, forms the sparse
//!   effective channel and injects channel-estimation error.
//! * [`constraints`] turns per-user symbol-error-probability targets into
//!   conservative polytopes on the noiseless received signal and assembles the
//!   real-valued sparse constraint system.
//! * [`solver`] minimizes transmit power over that system with an accelerated
//!   dual decomposition that runs on the factor graph.
//! * [`precoders`] holds the reference schemes: ZF, optimized RZF, ZF-THP and
//!   the optimized THP.
//! * [`sim`] is the Monte-Carlo driver: detection, bit mapping, statistics and
//!   CSV output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod constellation;
pub mod constraints;
mod error;
pub mod io;
pub mod precoders;
pub mod rng;
pub mod signature;
pub mod sim;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};

/// Complex baseband sample.
pub type C64 = num_complex::Complex<f64>;
