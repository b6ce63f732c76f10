//! Operational shell around the soft faceted browsing engine: the CLI
//! workflows and the interactive browsing HTTP service.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod service;

pub use service::{router, AppState, Engine, ServiceConfig};
