//! Phase-transition experiments: configuration, execution, CSV output
//! and SVG plots.

pub mod config;
pub mod phase;
pub mod plot;

pub use config::{
    expand_grid, parse_config, parse_config_file, CoherenceChoice, ExperimentConfig, NetSource,
    Scheme,
};
pub use phase::{
    build_network, read_results, run_phase_transition, write_outputs, write_results, write_summary,
    PhaseResults, ResultRow, SummaryRow, SUCCESS_RRE,
};
pub use plot::{coherence_plot, emit_plots, rre_plot, success_plot};
