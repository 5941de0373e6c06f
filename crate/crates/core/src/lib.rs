//! Span annotation with LLMs and agreement scoring between campaigns.

pub mod annotator;
pub mod gamma;
pub mod grounding;
pub mod ingest;
pub mod metrics;
pub mod model;
