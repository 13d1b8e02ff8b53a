//! Numerical engine for distances, diameters, and antipodal displacements
//! on deformed spheres: Cheeger-deformed cohomogeneity-one metrics, Berger
//! spheres, and spherical joins.
//!
//! Distance queries on a diagonal metric live in the 3D symmetry-reduced
//! space (rho, u, v) and are answered by two independent engines: a
//! Hamiltonian geodesic shooting solver and a grid-graph Dijkstra oracle.

pub mod analysis;
pub mod berger;
pub mod cli;
pub mod error;
pub mod geodesic;
pub mod join;
pub mod metrics;
pub mod oracle;
pub mod output;

pub use error::{Error, Result};
pub use metrics::{DiagonalMetric, SphereShape, WarpFamily, WarpProfile};
