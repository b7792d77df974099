//! End-to-end runs: JSON configuration, run directories with checksummed
//! manifests, static reports and the command-line interface.

pub mod cli;
mod config;
mod report;
mod run;

pub use config::{
    CenteringMode, EnsembleConfig, GridConfig, HolderConfig, MomentConfig, ResolvedRun, RunConfig,
    Toggles, ZGridConfig,
};
pub use report::{
    cmd_report, density_svg, freedman_diaconis, metrics_svg, report_checksums,
    residual_heatmap_svg, Histogram,
};
pub use run::{
    auto_values, cmd_compare, cmd_fixedpoint, cmd_holder, cmd_simulate, cmd_stieltjes,
    load_config, parse_spectra_csv, resolve_moments, FileEntry, Manifest, MomentRow,
    MomentSource, RunArtifact, SignRecord, MANIFEST_NAME,
};
