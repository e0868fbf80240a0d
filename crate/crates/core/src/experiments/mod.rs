//! Dataset splits, evaluation metrics and the reducer × component-count grid.

mod grid;
mod metrics;
mod pipeline;
mod split;

pub use grid::{
    render_table, run_grid, run_grid_with_split, write_results_csv, ExperimentResult, GridConfig, Reducer,
    Timings, COMPONENT_COUNTS,
};
pub use metrics::{compute_metrics, Metrics};
pub use pipeline::{density_experiment, frontage_experiment, run_pipeline, PipelineConfig, PipelineRun};
pub use split::{split_dataset, split_dataset_blocked, Split, SplitMode, SplitSpec, MIN_SPLIT_ROWS};
