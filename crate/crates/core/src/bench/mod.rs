//! Experiment harness: datasets, the three-mechanism comparison and
//! result files.

mod emit;
mod experiment;
mod ingest;
mod synthetic;

pub use emit::{emit_results, load_results, write_results, Format};
pub use experiment::{
    median, run_experiment, summarize, DatasetSource, ExperimentConfig, ResultRow, Summary,
    RESULT_COLUMNS,
};
pub use ingest::{ingest_csv, CsvSchema, Dataset};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
