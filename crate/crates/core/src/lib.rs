//! Unified nonconforming finite elements for the coupled Stokes-Darcy
//! problem.
//!
//! One velocity space discretizes both regions: a variant Crouzeix-Raviart
//! element whose edge-mean continuity is vector-valued on the Stokes side and
//! normal-only on the Darcy side, paired with piecewise-constant pressures
//! and a jump penalty that stabilizes the nonconforming coupling. The crate
//! provides the structured two-region meshes, the degree-of-freedom map,
//! assembly of the saddle-point blocks, a direct solver with an iterative
//! fallback, spectral estimators for the coercivity and inf-sup constants,
//! and a manufactured-solution convergence harness.

pub mod assembly;
pub mod error;
pub mod io;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod verification;

pub use assembly::{MaterialParams, SourceData, SystemBlocks};
pub use error::{Error, Result};
pub use mesh::{build_structured_mesh, DomainGeometry, Edge, EdgeClass, Mesh, Point2, Region};
pub use solver::{estimate_coercivity, estimate_inf_sup, solve_saddle, EigenMode, SolverOptions};
pub use space::{
    build_dof_map, cr_interpolate, discrete_divergence, eval_velocity, DiscretePressure,
    DiscreteVelocity, DofMap,
};
pub use verification::{
    compute_error_norms, compute_error_norms_against, manufactured_case, run_convergence_study,
    ConvergenceStudy, ErrorReport, ExactCase, ExactFields, StudyOptions,
};
