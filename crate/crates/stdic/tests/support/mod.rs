//! Shared helpers for the integration-test oracles.

pub mod dd;
