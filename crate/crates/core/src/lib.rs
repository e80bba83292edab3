//! Model-driven code quality evaluation and score-gated optimization.
//!
//! The [`evaluator`] scores code over ten quality dimensions, the [`optimizer`]
//! iterates on it, and [`proxy`] and [`analysis`] compare the results against
//! conventional static-analysis metrics.

pub mod analysis;
pub mod catalog;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod evaluator;
pub mod gateway;
pub mod model;
pub mod optimizer;
pub mod prompts;
pub mod proxy;
pub mod report;
pub mod validation;
