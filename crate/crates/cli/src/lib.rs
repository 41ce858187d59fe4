//! Service, cache, and fixture plumbing behind the `genodkit` binary.

pub mod cache;
pub mod fixtures;
pub mod service;
