//! Numerical core for sub-Riemannian Gauss–Bonnet limit measures on
//! surfaces in three-dimensional contact manifolds.
//!
//! The crate is organized as a pipeline:
//!
//! * [`expr`] — a small smooth-expression language with exact derivative
//!   jets, used for all user-supplied data (contact forms, frames,
//!   immersions, test functions);
//! * [`contact`] — contact-structure validation and normalization, the Reeb
//!   field, and the family of Riemannian approximating metrics;
//! * [`surface`] — immersed surfaces, induced metrics, the characteristic
//!   vector field, and pointwise frame data on the surface;
//! * [`charpoints`] — location and classification of characteristic points
//!   (order, leading coefficient, index, Euler-characteristic bookkeeping);
//! * [`measures`] — curvature densities of the approximating metrics, the
//!   singular limit measure, convergence tables, and integrability probes;
//! * [`quad`] — deterministic quadrature with polar refinement around
//!   characteristic points.
//!
//! [`jet`] provides the truncated Taylor-series arithmetic everything else
//! is built on, and [`error`] the shared error type.

pub mod charpoints;
pub mod contact;
pub mod error;
pub mod expr;
pub mod jet;
pub mod measures;
pub mod quad;
pub mod surface;

pub use charpoints::{
    classify, euler_characteristic, lambda_gamma_fixture, CharField, CharPoint, ClassifyOptions,
    EulerResult, FieldSample, FixtureField, LocateOptions, Seed, SurfaceField,
};
pub use contact::{builtin_model, ContactModel};
pub use error::{Error, Result};
pub use expr::{parse, Expr, ExprNode, Func};
pub use jet::{Jet, MAX_PUBLIC_ORDER, MAX_VARS};
pub use measures::{
    b_eps, connection_form_eps, convergence_table, d_eta_eps_density, default_epsilon_sweep,
    gaussian_curvature_eps, integrate_measure, inv_norm_integrability_probe, mu_limit_check,
    mu_minus_one_density, patches_from_points, ConvergenceRow, DensityKind, EpsFrameSample,
    IntegralOptions, MeasureJob, Patch, Support, TestFunction,
};
pub use quad::QuadOptions;
pub use surface::{
    CharFieldSample, ChartDomain, FirstFundamentalForm, PreparedPoint, SurfaceChart,
};
