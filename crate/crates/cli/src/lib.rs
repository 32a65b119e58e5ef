//! Front end for `sga-core`: field files, image ingestion, job execution and
//! the data behind `sga oracle-check`.

pub mod error;
pub mod fieldfile;
pub mod fixtures;
pub mod imageio;
pub mod job;

pub use error::{CliError, CliResult, ExitKind};
pub use fieldfile::{FieldFile, FieldKind};
pub use imageio::{export_visual, load_density};
pub use job::{run_job, Command, JobConfig, JobReport};
