//! Exact sampling of cycle-rooted spanning forests (CRSFs) on
//! surface-embedded weighted graphs under connection-derived measures.
//!
//! A CRSF is a spanning subgraph each of whose components contains exactly
//! one cycle. The sampler generalizes Wilson's algorithm: run
//! conductance-biased walks, and on the first self-intersection keep the
//! closed cycle with probability given by a pluggable weight function,
//! otherwise pop it and continue. Measures derived from U(1) or SU(2)
//! connections are cross-checked against line-bundle Laplacian determinants,
//! closed-form cylinder partition functions, and brute-force enumeration.

pub mod closed_form;
pub mod connection;
pub mod graph;
pub mod io;
pub mod laplacian;
pub mod oracle;
pub mod sampler;
pub mod stats;
pub mod surface;
pub mod svg;

pub mod cli;
