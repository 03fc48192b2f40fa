//! Measurement harness for contextual value alignment between humans and
//! language models.
//!
//! The pipeline renders a fixed catalog of 56 values into prompts across 28
//! country/topic scenarios (eight paraphrase variants per cell), collects
//! model answers through an OpenAI-compatible gateway or a deterministic
//! mock, ingests crowdsourced survey exports, and reduces both sides to
//! 28x56 response matrices that are compared through alignment rate (F1),
//! alignment distance (element-wise Manhattan), and alignment rankings.

#![forbid(unsafe_code)]

pub mod catalog;
pub mod context;
pub mod gateway;
pub mod ingest;
pub mod metrics;
pub mod prompt;
pub mod report;
pub mod util;

pub use catalog::{load_catalog, scale_to_unit, OptionMap, RawScore, ResponseScale, ValueItem};
pub use context::{enumerate_contexts, group_contexts, Context, Country, Scope, Topic};
pub use metrics::{BinaryMatrix, DistanceMatrix, RankedList, ResponseMatrix};
pub use prompt::{Prompt, PromptEngine, PromptRecord, VariantKey};
