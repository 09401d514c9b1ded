pub mod config;
pub mod output;

pub use config::{parse_config, parse_config_str, scenario_to_toml, ConfigFile};
pub use output::{emit_timeseries, timeseries_csv, write_run, OutputFormat, RunManifest};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RESBUS_OUTPUT_DIR";
