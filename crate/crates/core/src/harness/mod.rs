//! Experiment drivers, configuration, persistence and output.

pub mod config;
pub mod fig1;
pub mod output;
pub mod persist;
pub mod seeds;
pub mod theorem1;

pub use fig1::{run_fig1, run_fig1_detailed, CurvePoint, EpsilonMode, EpsilonSweep, Fig1Config, Fig1Run};
pub use output::{curve_csv, emit_csv, emit_svg};
pub use persist::{load_value_table, save_value_table, StoredValueTable};
pub use theorem1::{run_theorem1_sweep, SweepConfig, TrialBatch};
