//! Monte-Carlo harness: configuration, detection, experiment drivers,
//! result output and self-validation.

pub mod config;
pub mod detect;
pub mod experiments;
pub mod output;
pub mod validate;

pub use config::{ExperimentConfig, Scheme};
pub use detect::{bit_errors, bits_for_symbol, detect_qam, detect_replica};
pub use experiments::{
    draw_signatures, draw_slot, precode, prepare_point, run_ber_experiment, run_power_experiment,
    run_uncertainty_experiment, ExperimentOutput, PointSetup, Precoded, ResultRow, Slot,
    SlotLogEntry,
};
pub use output::{config_hash, write_results_csv, write_slot_log, RunMetadata, CSV_HEADER};
pub use validate::{run_validation, CheckResult};
