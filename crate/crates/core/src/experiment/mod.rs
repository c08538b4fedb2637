//! Config files and the commands behind the `fedud` binary.

mod commands;
mod config;

pub use commands::{
    cmd_eval, cmd_gen_data, cmd_sweep, cmd_train, evaluate, format_train_log, load_split, parse_count, run_sweep,
    write_sweep_table, Manifest, SweepRow, TrainArtifacts,
};
pub use config::{
    CsvParty, DataSection, DataSource, EvalSection, ExperimentConfig, ModelSection, OutputSection, SplitKind,
    SweepAxis, SweepSection, TrainingSection,
};
