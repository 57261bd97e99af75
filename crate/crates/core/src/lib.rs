//! Discovers websites subject to DNS-injection censorship.
//!
//! The pipeline extracts content-rich Chinese/English phrases from pages
//! already known to be censored, uses those phrases as web-search queries,
//! and probes every search result for DNS injection. Confirmed-censored
//! pages are fed back into the loop, so discovery expands transitively
//! from a small seed list.

pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod probe;
pub mod rank;
pub mod report;
pub mod search;
pub mod segment;
pub mod simworld;
