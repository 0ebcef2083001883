//! Martingale optimal transport on the real line, at desk scale.
//!
//! The crate builds, optimizes, and verifies left-monotone martingale
//! couplings between finitely supported marginals, and realizes them as
//! barrier-type stopping times of Brownian motion:
//!
//! - [`measures`]: atomic probability measures, potential functions, convex
//!   order, quantiles, 1-Wasserstein distance.
//! - [`coupling`]: joint measures, marginal and martingale verification,
//!   conditional kernels, the left-monotone support test.
//! - [`curtain`]: the greedy shadow construction of the left-monotone
//!   coupling and its two-map representation `(T_d, T_u, q)`.
//! - [`lp`]: exact primal/dual linear programming for the transport problem,
//!   superhedging certificates, the Spence-Mirrlees cost gate, and the
//!   pairwise competitor test.
//! - [`skorokhod`]: exact interval-exit sampling, discretized path
//!   simulation, barrier construction and hitting, and the
//!   uniform-integrability inequality check.

pub mod coupling;
pub mod curtain;
pub mod lp;
pub mod measures;
pub mod skorokhod;

pub use coupling::{Coupling, Kernel, LeftMonotoneViolation, MASS_FLOOR};
pub use curtain::{
    build_left_monotone, extract_t_maps, shadow_of_atom, validate_t_maps, SubMeasure, TMaps,
    TMapsViolation,
};
pub use lp::{
    check_spence_mirrlees, solve_dual, solve_primal, solve_with_certificate,
    uniqueness_cross_check, verify_monotonicity_principle, CostSpec, DualCertificate, LpSolution,
    LpStatus,
};
pub use measures::{is_convex_order, wasserstein1, Measure, CONVEX_ORDER_TOL};
pub use skorokhod::{
    build_barrier, check_uniform_integrability, compare_barrier_times, compare_stopping_times,
    default_t_max, embed, hit_barrier, sample_exit, simulate_path_exit, Barrier, BarrierLine,
    EmbeddingReport, LineFamily, PathConfig, StoppingComparison, UiCheck, UiCheckRow,
};
