//! Reference precoders: zero forcing, regularized zero forcing with
//! SEP-driven parameter search, and Tomlinson-Harashima precoding with an
//! optional SEP-constrained refinement.

mod rzf;
mod thp;
mod zf;

pub use rzf::{default_k2_grid, min_gain, rzf_precode, RzfSolution};
pub use thp::{
    complex_modulo, default_beta_grid, select_uniform_beta, thp_optimized, thp_zf_encode,
    vblast_ordering, BetaSelection, ThpEncoding,
};
pub use zf::{regularized_preimage, zf_precode};
