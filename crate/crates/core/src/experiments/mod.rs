//! Configuration, experiment suites, reports and the command drivers.

mod commands;
mod config;
mod io;
mod report;
pub mod suites;

pub use commands::{
    cmd_invariance, cmd_norms_bench, cmd_sample_gff, cmd_sqe, cmd_wick_converge, exit, exit_code, run_command,
    Command, Outcome,
};
pub use config::ExperimentConfig;
pub use io::{read_dump, write_dump, DumpHeader, Table, DUMP_MAGIC, DUMP_VERSION};
pub use report::{CriterionResult, ExperimentReport, ReportBody, SeedLayout, CODE_VERSION, REPORT_SCHEMA};
