//! Random-cluster sampling on Z^2, slice exploration of the origin's cluster,
//! killed renewal calculus and direction-resolved correlation length analysis.

pub mod geometry;
pub mod exact;
pub mod explore;
pub mod graph;
pub mod growth;
pub mod kmrp;
pub mod observables;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod unionfind;
pub mod validation;
pub mod wulff;
