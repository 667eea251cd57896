//! Measuring the social bias of individual crowd workers with disguised
//! counterfactual probe pairs.
//!
//! A probe pair is a query and a copy of it whose sensitive attribute has
//! been moved to another group. Both are slipped into a worker's task, far
//! apart and lightly disguised; a worker's bias score is the mean absolute
//! difference between the labels they gave the two halves. Scores feed
//! worker filtering or down-weighting during label aggregation.

pub mod aggregation;
pub mod counterfactual;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod records;
pub mod rng;
pub mod scheduler;
pub mod scoring;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{
    field_diff, scale_range, validate_probe_pair, validate_query, BiasReport, DisguiseRecord,
    DisplayItem, FieldKind, FieldValue, HiddenEntry, LabelScale, ProbePair, Query, ReportFlag,
    Response, Role, Schema, SensitiveSpec, TaskPlan, Violation,
};
