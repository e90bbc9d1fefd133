//! Crosstalk between cross-connections of an N×N optical switch, sweeps
//! over configurations and wavelength, and classical/quantum port planning.

mod model;
mod plan;
mod sweep;

pub use model::{switch_xtalk_db, CrosstalkMode, MeasuredTable, ParametricCrosstalk, Path, SwitchConfig, SwitchModel};
pub use plan::{
    brute_force_assignment, optimize_assignment, search_space_size, Assignment, Band, BandPlan, Channel, PlanOptions,
    SearchMethod, DEFAULT_EXHAUSTIVE_LIMIT,
};
pub use sweep::{configs_to_csv, curve_to_csv, sweep_configs, sweep_wavelength, ConfigPoint};
