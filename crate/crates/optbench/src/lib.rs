//! Toolkit for reconstructing code-optimization pairs from judge-style
//! submission archives, measuring optimization quality in a sandboxed
//! execution harness, and repairing optimized candidates against the
//! slow-but-correct original program.
//!
//! The crate is organized around the pipeline:
//!
//! * [`corpus`] — ingest and index submission archives
//! * [`pairing`] — build user-oriented / problem-oriented optimization pairs
//! * [`cfg`] — control-flow graphs and graph edit distance between pair members
//! * [`sandbox`] — compile/run programs under resource limits with wall-clock timing
//! * [`metrics`] — %Opt / Speedup / Correct, best@k, failure taxonomy
//! * [`llm`] — chat-completion client, prompt templates, response parsing
//! * [`anchor`] — the anchor verification framework and its baselines
//! * [`config`] / [`cli`] — single-binary front end

pub mod anchor;
pub mod cfg;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod pairing;
pub mod report;
pub mod sandbox;
