//! Named, reproducible simulation scenarios driven by plain-text config
//! files: parsing and validation with line-numbered diagnostics, a library
//! of built-in presets, and the runner that turns a config into CSV.

mod config;
mod presets;
mod run;

pub use config::{
    load_config, BeamDrive, CloudSettings, Diagnostic, GravityGeometry, Imaging,
    IntegratorOverrides, McMode, RayFan, ScenarioConfig, ScenarioKind, Severity, Sweep,
    SweepVariable, UniformGeometry,
};
pub use presets::{preset_names, preset_text};
pub use run::{run, write_metadata, RunError, RunSummary};
