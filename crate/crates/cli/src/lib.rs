//! Command implementations behind the `sosr` binary: dataset generation,
//! single runs and the full benchmark.

pub mod bench;
pub mod commands;
pub mod error;

pub use bench::{run_bench, BenchOutcome, BenchmarkSpec, ResultRow};
pub use commands::{cmd_generate, cmd_run, GenerateArgs, RunArgs, RunReport};
pub use error::{CliError, CliResult};
