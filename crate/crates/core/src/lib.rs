//! Gromov–Wasserstein distances between finite metric-measure spaces, exact
//! optimal transport, and the linear (fixed-reference) approximations gLOT
//! and gLGW built from barycentric projections of optimal plans.

pub mod analysis;
pub mod barycenter;
pub mod error;
pub mod gw;
pub mod ingest;
pub mod lgw;
pub mod measure;
pub mod ot;
pub mod rng;

pub use error::{Error, Result};
pub use gw::{gw_objective, solve_gw, GwConfig, GwResult, InitSpec};
pub use measure::{
    load_mm_space, save_mm_space, validate_plan, DistanceMatrix, MetricKind, MmSpace, ThreePlan,
    TransportPlan,
};
