//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Error`]. Variants are
//! grouped by the pipeline stage that raises them: expression parsing and
//! jet evaluation, contact-model validation, surface geometry, characteristic
//! point classification, and measure quadrature.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes of the core library.
#[derive(Debug, Clone, Error)]
pub enum Error {
    // ---- expression engine -------------------------------------------------

    /// Malformed expression text. `position` is a byte offset into the source.
    #[error("syntax error at byte {position}: expected {expected}")]
    Syntax { position: usize, expected: String },

    /// An identifier that is neither a declared variable nor a known function.
    #[error("unknown identifier `{name}` at byte {position}")]
    UnknownIdentifier { name: String, position: usize },

    /// A primitive that is not C^∞ (abs, sign, floor) was used.
    #[error("non-smooth primitive `{name}` at byte {position} is not allowed")]
    NonSmoothPrimitive { name: String, position: usize },

    /// Evaluation left the domain of a primitive (log/sqrt of a non-positive
    /// value, division by zero, non-integer power of a non-positive base).
    #[error("domain error: {what}")]
    Domain { what: String },

    /// A derivative order above the supported public cap was requested.
    #[error("jet order {requested} unsupported (maximum {max})")]
    OrderUnsupported { requested: usize, max: usize },

    // ---- contact models ----------------------------------------------------

    /// dω(f₁,f₂) vanishes somewhere on the validation grid, so the declared
    /// data does not define a contact structure there.
    #[error("contact structure degenerates at ({:.6}, {:.6}, {:.6}): dω(f₁,f₂) = {value:.3e}", at[0], at[1], at[2])]
    ContactDegenerate { at: [f64; 3], value: f64 },

    /// dω(f₁,f₂) < 0: the declared frame is negatively oriented. The frame
    /// order is never flipped silently; the caller must fix the model.
    #[error("frame negatively oriented at ({:.6}, {:.6}, {:.6}): dω(f₁,f₂) = {value:.6}", at[0], at[1], at[2])]
    Orientation { at: [f64; 3], value: f64 },

    /// A linear solve (Reeb field, frame decomposition) met a singular matrix.
    #[error("singular linear system: {what}")]
    SingularSystem { what: String },

    /// Catalog lookup failed.
    #[error("unknown builtin model `{name}`")]
    UnknownModel { name: String },

    // ---- surface geometry --------------------------------------------------

    /// EG − F² ≤ 0: the immersion is not regular at the given chart point.
    #[error("degenerate immersion at (u,v) = ({:.6}, {:.6})", at[0], at[1])]
    DegenerateImmersion { at: [f64; 2] },

    // ---- characteristic points ---------------------------------------------

    /// Ring/interior sampling found characteristic behaviour that is not an
    /// isolated zero (e.g. a curve of characteristic points).
    #[error("non-isolated characteristic set near (u,v) = ({:.6}, {:.6}): {detail}", near[0], near[1])]
    NonIsolatedCharacteristicSet { near: [f64; 2], detail: String },

    /// The queried point is not a zero of the characteristic field.
    #[error("not a characteristic point: |X| = {norm:.3e} at ({:.6}, {:.6})", at[0], at[1])]
    NotACharacteristicPoint { at: [f64; 2], norm: f64 },

    /// ∇X has complex or equal eigenvalues at the sample point; it is too far
    /// from the characteristic point for the eigen-splitting to exist.
    #[error("eigenvalues of ∇X coalesce at ({:.6}, {:.6})", at[0], at[1])]
    EigenvaluesCoalesce { at: [f64; 2] },

    /// Every fitted derivative of det∇X/trace∇X along the v₀ curve stayed
    /// below the noise threshold up to the configured maximum order.
    #[error("order of degeneracy exceeds kmax = {kmax}")]
    OrderExceedsKmax { kmax: usize },

    /// The v₀ integral-curve tracer failed (left the domain, lost the
    /// eigen-splitting, or could not keep a continuous sign).
    #[error("v₀ curve tracing failed: {detail}")]
    CurveTracingFailed { detail: String },

    /// Index formula called with an order below 1.
    #[error("invalid order of degeneracy k = {k} (must be ≥ 1)")]
    InvalidOrder { k: i64 },

    /// Winding-number accumulation could not keep per-step angle jumps small
    /// or the rounding residual check failed.
    #[error("angle unwrap failed: {detail}")]
    AngleUnwrapFailed { detail: String },

    /// trace(∇X) = 0 where the extended curvature invariant was requested.
    #[error("trace(∇X) vanishes at ({:.6}, {:.6})", at[0], at[1])]
    TraceVanishes { at: [f64; 2] },

    /// Euler-characteristic assembly received an unclassified point.
    #[error("unclassified characteristic point in Euler-characteristic assembly")]
    UnclassifiedPoint,

    /// The supplied curve is not tangent to ker D_qX at t = 0.
    #[error("not a kernel extension: |γ̇(0) ∧ v₀| = {wedge:.3e}")]
    NotAKernelExtension { wedge: f64 },

    // ---- curvature measures ------------------------------------------------

    /// A frame-based quantity was requested too close to the characteristic
    /// set, where e₁ = X/|X| is undefined.
    #[error("too close to the characteristic set at ({:.6}, {:.6}): |X| = {norm:.3e}", at[0], at[1])]
    TooCloseToCharacteristicSet { at: [f64; 2], norm: f64 },

    /// b_ε requested for |div| > 1, outside its domain.
    #[error("divergence value {value:.6} outside [-1, 1]")]
    DivergenceOutOfRange { value: f64 },

    /// The two-level quadrature error estimate stayed above the tolerance.
    #[error("quadrature not converged: estimate {estimate:.3e} > tolerance {tolerance:.3e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    /// The 1/|X| local-integrability probe detected a divergent cumulative
    /// integral (misclassification or a non-isolated characteristic set).
    #[error("divergent 1/|X| tail: {detail}")]
    DivergentTail { detail: String },
}
