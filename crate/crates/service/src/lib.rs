//! HTTP service, CLI plumbing and fixtures around `geoscript-core`.

pub mod api;
pub mod app;
pub mod config;
pub mod evaluate;
pub mod fixtures;
pub mod store;
