//! Repository-aware postcondition generation and validation toolchain.
//!
//! Pipeline: index a Java source tree into class skeletons, build YAML
//! prompts for target methods, sample candidate postconditions from a
//! model endpoint, inject each candidate into fixed and buggy project
//! versions, compile and test, and aggregate Syn@k / Sem@k / r_BugD.

pub mod index;
pub mod inject;
pub mod java;
pub mod metrics;
pub mod model;
pub mod prompt;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod runner;
pub mod spec_io;
