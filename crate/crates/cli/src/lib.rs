//! Laundering-grid orchestration: configuration, manifest expansion, parallel
//! laundering with resume, and the feature / train / score / evaluate / report stages.

pub mod config;
pub mod demo;
pub mod grid;
pub mod jobs;
pub mod journal;
pub mod manifest;
pub mod minicorpus;
pub mod pipeline;
