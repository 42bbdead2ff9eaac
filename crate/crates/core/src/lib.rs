//! Growth dynamics of a tangle ledger under uniform random tip selection with
//! random proof-of-work delays.
//!
//! - [`delay`]: delay laws with sampling, CDF and integrated CDF.
//! - [`sim`], [`tips`], [`dag`], [`ensemble`]: the discrete-event Monte Carlo
//!   simulator, its tip set, structural validation and replicate statistics.
//! - [`fluid`]: the fluid-limit PDE for the tip-age density and the
//!   fixed-delay DDE.
//! - [`stationary`]: the equilibrium tip count and age profile.
//! - [`export`]: CSV writers for trajectories and grids.

pub mod dag;
pub mod delay;
pub mod ensemble;
pub mod export;
pub mod fluid;
pub mod quad;
pub mod sim;
pub mod stationary;
pub mod tips;

pub use dag::{validate_dag, DagReport, Violation};
pub use delay::{DelayDistribution, DelayError, DelayLaw, DelayModel, DelaySpec};
pub use ensemble::{derive_seed, ensemble, EnsembleSummary, StationaryWindow};
pub use fluid::{
    kernel_eval, solve_dde_fixed, solve_pde, DdeState, FluidError, FluidGrid, FluidOptions,
};
pub use sim::{run, simulate, ArrivalProcess, SimConfig, SimError, SimTrajectory, Site, Tangle};
pub use stationary::{
    predict_tip_count, solve_stationary, stationary_profile, StationaryError, StationaryResult,
};
pub use tips::{SiteId, TipSet};
