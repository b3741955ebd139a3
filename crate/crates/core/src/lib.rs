//! Multilevel Monte Carlo estimation of the magnetic energy of a conducting
//! wire inside a steel tube, with random tube radius, current and
//! permeability.
//!
//! The deterministic solver is a lowest-order (P1) finite element
//! discretization of the 2D time-harmonic eddy-current equation
//!
//! ```text
//! -div( (1/mu) grad A_z ) + j omega sigma A_z = J_z
//! ```
//!
//! on a structured polar mesh of the disk `r <= r2`, with `A_z = 0` on the
//! outer circle. Levels differ by a factor two in mesh width. The quantity
//! of interest is the magnetic energy per unit length
//! `W = sum_e area_e |grad A_z|^2 / (2 mu_e)`.
//!
//! Module map:
//!
//! - [`model`]: physical parameters, uniform input distributions, counter-based sampling.
//! - [`mesh`]: level-`l` polar triangulations with exact material interfaces.
//! - [`sparse`]: CSR storage and a complex-symmetric sparse LDL^T factorization.
//! - [`fem`]: assembly, solve, energy, and the level-coupled QoI evaluation.
//! - [`oracle`]: axisymmetric 1D reference solver, closed forms, quadrature reference mean.
//! - [`mlmc`]: MC and MLMC estimators, screening, sample allocation, cost comparison.

pub mod error;
pub mod fem;
pub mod mesh;
pub mod mlmc;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
pub use fem::Problem;
pub use mesh::{LevelSpec, Mesh, MeshConfig, Region};
pub use model::{ModelParams, ParamSample, ParameterDistributions, UniformParam};

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

pub(crate) fn map_indices<T, F>(indices: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        indices.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        indices.map(f).collect()
    }
}
