pub mod catalog;
pub mod eval;
pub mod ingest;
pub mod prompts;
pub mod report;
pub mod score;
