//! Configuration files, run orchestration, reproduction cases and artifact I/O.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod reproduce;
pub mod run;

pub use artifacts::{read_timeseries_csv, verify_checksums, ArtifactWriter, StateDump};
pub use compare::{compare, scan, CompareOutcome, ScanEntry};
pub use config::{load_config, parse_config, RunConfig, SCHEMA_VERSION};
pub use reproduce::{reproduce, Case, CaseReport};
pub use run::{exit_status, is_physics_abort, run_config, run_parsed, ExitStatus, RunArtifacts, Summary};
