//! Grid-based Wasserstein barycenters by Sobolev gradient ascent.
//!
//! Densities live on cell-centred grids over `[0,1]^d`, `d <= 3`. The
//! barycenter is found by maximising a concave dual over unrestricted
//! potentials, using exact discrete c-transforms and Neumann Poisson
//! solves to form `Ḣ¹` gradients.

pub mod barycenter;
pub mod convergence;
pub mod ctransform;
pub mod error;
pub mod grid;
mod lines;
pub mod oracles;
pub mod ot;
pub mod poisson;
pub mod transport;

pub use barycenter::{
    barycenter_functional, dual_gradient, dual_value, extract_barycenter, sga_barycenter, BarycenterConfig,
    BarycenterProblem, BarycenterResult, DualState, Scheme, Source,
};
pub use convergence::{ConvergenceLog, IterRecord};
pub use ctransform::{c_transform_brute, c_transform_fast, double_c_transform, CTransformResult};
pub use error::{Error, Result};
pub use grid::{normalize_density, DensityField, GridSpec, PotentialField, Weights};
pub use ot::{
    make_schedule, sga_two_marginal, two_step_baseline, w2_distance, OtConfig, OtResult, ScheduleKind, ScheduleParams,
    StepSchedule, W2Config,
};
pub use poisson::{h1_inner, h1_norm, hminus1_norm, solve_neumann};
pub use transport::{pushforward, transport_map_from_potential, MapMode, TransportMap};
