//! Monte Carlo toolkit for cluster random fields: samplers for spectral
//! tail and tail fields, cluster-field constructions with random-shift
//! representations, candidate extremal-index estimators with
//! cross-representation consistency checks, max-stable field simulation,
//! and a battery of distributional identity tests. Deterministic given a
//! seed, independent of worker count.

pub mod cli;
pub mod cluster;
pub mod error;
pub mod extremal;
pub mod field;
pub mod identities;
pub mod lattice;
pub mod maxstable;
pub mod models;
pub mod rng;
pub mod stats;
