//! Library surface of the batch runner, kept separate from the binary so the
//! pipelines are directly testable.

pub mod compare;
pub mod manifest;
pub mod output;
pub mod pipeline;
pub mod plots;

pub use manifest::{OutputFile, RunManifest};
pub use pipeline::{
    execute_run, expand_ontologies, CliError, Ontology, OntologyArg, RunOptions,
    EXIT_METRICS_FAILED,
};
