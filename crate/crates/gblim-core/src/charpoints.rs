//! Characteristic points: location, classification, and index theory.
//!
//! Classification works on any planar vector field with a metric through the
//! [`CharField`] trait: [`SurfaceField`] adapts a surface chart's
//! characteristic field (scenario mode, all contact invariants in force),
//! while [`FixtureField`] wraps synthetic expressions over a Euclidean
//! metric (fixture mode, used to validate the classifiers against the
//! normal-form family X = νx∂x + (μ/k!)y^k∂y).
//!
//! The order of degeneracy is recovered operatively: ρ = det∇X/trace∇X is
//! sampled along the traced integral curve of the small-eigenvalue field v₀
//! at Chebyshev–Lobatto arclengths, a degree-kmax polynomial is fitted by
//! discrete Chebyshev projection (no linear solve), and the smallest
//! arclength derivative of ρ at 0 above a factorial-scaled noise floor gives
//! k − 1 and Λ^(k). Indices come from the closed formula sign(trace·Λ^(k))
//! for odd k (0 for even k) and are always cross-checkable against the
//! winding-number oracle.

use crate::contact::ContactModel;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::Jet;
use crate::quad::ANGULAR_OFFSET;
use crate::surface::{christoffel, SurfaceChart};

/// Field variables for fixture expressions.
const FIXTURE_VARS: [&str; 2] = ["x", "y"];

/// Pointwise field data consumed by the classifiers.
#[derive(Clone, Debug)]
pub struct FieldSample {
    /// Chart coefficients of the field as jets (order ≥ 1).
    pub x: [Jet; 2],
    /// Metric jets (E, F, G) of the chart at ε = 1.
    pub metric: [Jet; 3],
    /// Exact divergence jet where the geometry provides one (surface mode);
    /// fixtures fall back to trace(∇X).
    pub div: Option<Jet>,
}

/// A planar vector field with metric data, over a rectangular parameter box.
pub trait CharField {
    fn sample(&self, p: [f64; 2]) -> Result<FieldSample>;
    /// Bounding box used for seeding and curve-tracing guards.
    fn bounds(&self) -> [[f64; 2]; 2];
    fn periodic(&self) -> [bool; 2];
}

/// Synthetic planar field with the Euclidean metric (fixture mode).
#[derive(Clone, Debug)]
pub struct FixtureField {
    x: [Expr; 2],
    bounds: [[f64; 2]; 2],
}

impl FixtureField {
    pub fn new(x: [&str; 2], bounds: [[f64; 2]; 2]) -> Result<Self> {
        Ok(FixtureField {
            x: [parse(x[0], &FIXTURE_VARS)?, parse(x[1], &FIXTURE_VARS)?],
            bounds,
        })
    }
}

impl CharField for FixtureField {
    fn sample(&self, p: [f64; 2]) -> Result<FieldSample> {
        let order = 2;
        Ok(FieldSample {
            x: [
                self.x[0].eval_jet_internal(&p, order)?,
                self.x[1].eval_jet_internal(&p, order)?,
            ],
            metric: [
                Jet::constant(2, order, 1.0),
                Jet::constant(2, order, 0.0),
                Jet::constant(2, order, 1.0),
            ],
            div: None,
        })
    }

    fn bounds(&self) -> [[f64; 2]; 2] {
        self.bounds
    }

    fn periodic(&self) -> [bool; 2] {
        [false, false]
    }
}

/// The characteristic field of a surface chart (scenario mode).
#[derive(Clone, Copy)]
pub struct SurfaceField<'a> {
    pub chart: &'a SurfaceChart,
    pub model: &'a ContactModel,
}

impl CharField for SurfaceField<'_> {
    fn sample(&self, p: [f64; 2]) -> Result<FieldSample> {
        let pp = self.chart.prepare(self.model, p)?;
        let (e, f, g) = pp.fundamental_form_1();
        Ok(FieldSample {
            x: pp.x_jets(),
            metric: [e, f, g],
            div: Some(pp.div()),
        })
    }

    fn bounds(&self) -> [[f64; 2]; 2] {
        self.chart.domain().bounding_box()
    }

    fn periodic(&self) -> [bool; 2] {
        self.chart.periodic()
    }
}

// ---------------------------------------------------------------------------
// Options and result types
// ---------------------------------------------------------------------------

/// Controls for the Newton-based locator.
#[derive(Clone, Copy, Debug)]
pub struct LocateOptions {
    /// Seeding grid resolution per axis.
    pub grid: usize,
    /// |X| acceptance tolerance for a converged root.
    pub tol: f64,
    /// Newton step-size convergence tolerance.
    pub newton_tol: f64,
    /// Maximum damped-Newton iterations per seed.
    pub max_iter: usize,
    /// Upper cap on the isolation-radius search.
    pub isolation_cap: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions {
            grid: 64,
            tol: 1e-8,
            newton_tol: 1e-9,
            max_iter: 50,
            isolation_cap: 0.5,
        }
    }
}

impl LocateOptions {
    /// Root-merge radius: twice the Newton tolerance, floored so that the
    /// slow linear contraction at degenerate roots (Newton shrinks the
    /// off-axis error only by (k−1)/k per step for order k) still merges
    /// duplicates.
    pub fn merge_radius(&self) -> f64 {
        (2.0 * self.newton_tol).max(1e-5)
    }
}

/// Controls for classification.
#[derive(Clone, Copy, Debug)]
pub struct ClassifyOptions {
    pub locate: LocateOptions,
    /// Maximum admitted order of degeneracy.
    pub kmax: usize,
    /// |X| bound below which a point is accepted as characteristic.
    pub char_tol: f64,
    /// Degeneracy threshold: |det| < `degeneracy_rel`·trace² ⟹ order ≥ 2.
    pub degeneracy_rel: f64,
    /// Cap on the ρ-sampling arclength window (r₀ = min(isolation/2, cap)).
    pub window_cap: f64,
    /// Chebyshev–Lobatto sample count along the v₀ curve.
    pub cheb_nodes: usize,
    /// Relative noise floor for "this derivative is zero" decisions.
    pub noise_rel: f64,
    /// Sample count for the winding-number oracle.
    pub winding_samples: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            locate: LocateOptions::default(),
            kmax: 7,
            char_tol: 1e-6,
            degeneracy_rel: 1e-6,
            // Kept small: the derivative-at-0 bias from truncating the
            // Chebyshev tail of ρ scales like r₀^{k+3}, and 0.05 keeps the
            // recovered Λ^(k) inside 1e-4 relative for every normal form
            // with k ≤ 5 and |μ| ≤ 6.
            window_cap: 0.05,
            cheb_nodes: 25,
            noise_rel: 1e-5,
            winding_samples: 128,
        }
    }
}

/// A located (but not yet classified) characteristic point.
#[derive(Clone, Copy, Debug)]
pub struct Seed {
    pub uv: [f64; 2],
    /// |X| at the converged root.
    pub norm: f64,
    pub isolation_radius: f64,
}

/// Eigen-splitting of ∇X near a characteristic point, ordered |λ₀| < |λ₁|.
#[derive(Clone, Copy, Debug)]
pub struct EigenSplit {
    pub lambda0: f64,
    pub lambda1: f64,
    pub v0: [f64; 2],
    pub v1: [f64; 2],
}

/// Order of degeneracy with its leading invariant.
#[derive(Clone, Copy, Debug)]
pub struct OrderLambda {
    pub k: usize,
    /// Λ^(k); stored as an absolute value when `sign_ambiguous`.
    pub lambda: f64,
    /// Even orders: Λ^(k) is defined only up to sign (flipping the v₀
    /// direction flips odd arclength derivatives).
    pub sign_ambiguous: bool,
}

/// A fully classified characteristic point.
#[derive(Clone, Copy, Debug)]
pub struct CharPoint {
    pub uv: [f64; 2],
    pub d_qx: [[f64; 2]; 2],
    pub trace: f64,
    pub det: f64,
    pub order: usize,
    pub lambda_k: f64,
    pub lambda_sign_ambiguous: bool,
    /// Index from the closed formula.
    pub index: i32,
    /// Index from the winding-number oracle.
    pub winding: i32,
    pub hat_k: f64,
    pub isolation_radius: f64,
}

/// Euler-characteristic bookkeeping.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EulerResult {
    /// Σ winding indices (Poincaré–Hopf side).
    pub from_indices: i64,
    /// Σ over odd-order points of sign(trace·Λ^(k)).
    pub from_formula: i64,
    /// Set when the characteristic set is empty, which cannot happen on a
    /// compact surface in a co-oriented contact manifold.
    pub empty_warning: bool,
}

// ---------------------------------------------------------------------------
// Pointwise differential data
// ---------------------------------------------------------------------------

/// Covariant gradient values (∇X)ⁱⱼ = ∂ⱼXⁱ + Γⁱⱼₘ Xᵐ for the Levi-Civita
/// connection of the sample's metric.
fn covariant_grad(s: &FieldSample) -> [[f64; 2]; 2] {
    let gamma = christoffel(&s.metric[0], &s.metric[1], &s.metric[2]);
    let xv = [s.x[0].value(), s.x[1].value()];
    let mut grad = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let mut v = s.x[i].d(j);
            for (m, xm) in xv.iter().enumerate() {
                v += gamma[i][j][m].value() * xm;
            }
            grad[i][j] = v;
        }
    }
    grad
}

/// (trace, det) of ∇X, preferring the exact divergence for the trace when
/// the field supplies one.
fn trace_det(s: &FieldSample) -> (f64, f64) {
    let g = covariant_grad(s);
    let trace = match &s.div {
        Some(d) => d.value(),
        None => g[0][0] + g[1][1],
    };
    (trace, g[0][0] * g[1][1] - g[0][1] * g[1][0])
}

pub(crate) fn norm_of(s: &FieldSample) -> f64 {
    let (xu, xv) = (s.x[0].value(), s.x[1].value());
    let (e, f, g) = (
        s.metric[0].value(),
        s.metric[1].value(),
        s.metric[2].value(),
    );
    (e * xu * xu + 2.0 * f * xu * xv + g * xv * xv).max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// Locator
// ---------------------------------------------------------------------------

/// Locates all isolated zeros of the field by damped Newton iteration from
/// local minima of |X| on a seeding grid, with periodic-aware deduplication
/// and an isolation radius per root from ring sampling.
pub fn locate_characteristic_points<F: CharField>(
    field: &F,
    opts: &LocateOptions,
) -> Result<Vec<Seed>> {
    let bounds = field.bounds();
    let periodic = field.periodic();
    let n = opts.grid.max(4);
    let span = [bounds[0][1] - bounds[0][0], bounds[1][1] - bounds[1][0]];

    // |X| on cell centers.
    let center = |axis: usize, i: usize| {
        bounds[axis][0] + span[axis] * (i as f64 + 0.5) / n as f64
    };
    let mut norms = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            norms[i * n + j] = norm_of(&field.sample([center(0, i), center(1, j)])?);
        }
    }

    // Seeds: grid cells whose |X| is minimal among their (wrapping) 8
    // neighbours.
    let mut roots: Vec<[f64; 2]> = Vec::new();
    let neighbor = |axis: usize, i: usize, step: i64| -> Option<usize> {
        let m = n as i64;
        let raw = i as i64 + step;
        if periodic[axis] {
            Some(raw.rem_euclid(m) as usize)
        } else if (0..m).contains(&raw) {
            Some(raw as usize)
        } else {
            None
        }
    };
    for i in 0..n {
        for j in 0..n {
            let here = norms[i * n + j];
            let mut minimal = true;
            'scan: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    if let (Some(ii), Some(jj)) = (neighbor(0, i, di), neighbor(1, j, dj)) {
                        if norms[ii * n + jj] < here {
                            minimal = false;
                            break 'scan;
                        }
                    }
                }
            }
            if !minimal {
                continue;
            }
            if let Some(root) = newton_from(field, [center(0, i), center(1, j)], opts)? {
                roots.push(root);
            }
        }
    }

    // Transitive merge of duplicates (periodic-aware distance).
    let merge = opts.merge_radius();
    let mut merged: Vec<[f64; 2]> = Vec::new();
    'outer: for r in roots {
        for m in &merged {
            if periodic_dist(*m, r, &bounds, &periodic) < merge {
                continue 'outer;
            }
        }
        merged.push(r);
    }
    merged.sort_by(|a, b| (a[0], a[1]).partial_cmp(&(b[0], b[1])).unwrap());

    // A crowd of distinct converged roots means the zero set is a curve,
    // not a finite point set.
    const ROOT_CROWD_CAP: usize = 48;
    if merged.len() > ROOT_CROWD_CAP {
        return Err(Error::NonIsolatedCharacteristicSet {
            near: merged[0],
            detail: format!(
                "{} distinct zeros located; the characteristic set is a curve",
                merged.len()
            ),
        });
    }

    // Seeds from opposite sides of a degenerate root can stall at distinct
    // points of the same |X| < tol valley when the iteration budget runs
    // out before the linear kernel contraction closes the gap. Such stops
    // are consolidated: two roots are the same point when the connecting
    // chord never leaves the acceptance valley, which cannot happen between
    // genuinely distinct isolated zeros (|X| rises to O(distance) between
    // them). The representative is the stop with the smallest |X|.
    let cluster_cap = 0.05 * span[0].min(span[1]);
    let mut norms_at: Vec<f64> = Vec::with_capacity(merged.len());
    for r in &merged {
        norms_at.push(norm_of(&field.sample(*r)?));
    }
    let mut cluster: Vec<usize> = (0..merged.len()).collect();
    for i in 0..merged.len() {
        for j in (i + 1)..merged.len() {
            if cluster[i] == cluster[j] {
                continue;
            }
            let d = wrapped_displacement(merged[i], merged[j], &bounds, &periodic);
            if (d[0] * d[0] + d[1] * d[1]).sqrt() > cluster_cap {
                continue;
            }
            let mut valley = true;
            for step in 1..8 {
                let s = step as f64 / 8.0;
                let p = [merged[i][0] + s * d[0], merged[i][1] + s * d[1]];
                if norm_of(&field.sample(p)?) >= 10.0 * opts.tol {
                    valley = false;
                    break;
                }
            }
            if valley {
                let (from, to) = (cluster[j], cluster[i]);
                for c in cluster.iter_mut() {
                    if *c == from {
                        *c = to;
                    }
                }
            }
        }
    }
    let mut reps: Vec<[f64; 2]> = Vec::new();
    for label in 0..merged.len() {
        let mut best: Option<usize> = None;
        for (idx, c) in cluster.iter().enumerate() {
            if *c == label && best.is_none_or(|b| norms_at[idx] < norms_at[b]) {
                best = Some(idx);
            }
        }
        if let Some(b) = best {
            reps.push(merged[b]);
        }
    }

    // The iteration budget leaves a degenerate representative slightly off
    // the root along the kernel (the contraction there is only linear);
    // bisection along the small-eigenvalue direction restores the location
    // to rounding accuracy, which the order recovery needs.
    for idx in 0..reps.len() {
        let mut w = cluster_cap;
        for (jdx, other) in reps.iter().enumerate() {
            if jdx != idx {
                w = w.min(0.45 * periodic_dist(reps[idx], *other, &bounds, &periodic));
            }
        }
        reps[idx] = polish_degenerate(field, reps[idx], w, opts)?;
    }
    reps.sort_by(|a, b| (a[0], a[1]).partial_cmp(&(b[0], b[1])).unwrap());
    let merged = reps;

    // Isolation radii.
    let mut seeds = Vec::with_capacity(merged.len());
    for (idx, q) in merged.iter().enumerate() {
        let mut r_max = opts.isolation_cap;
        for (jdx, other) in merged.iter().enumerate() {
            if jdx != idx {
                r_max = r_max.min(0.45 * periodic_dist(*q, *other, &bounds, &periodic));
            }
        }
        for axis in 0..2 {
            if !periodic[axis] {
                r_max = r_max
                    .min(q[axis] - bounds[axis][0])
                    .min(bounds[axis][1] - q[axis]);
            }
        }
        let iso = isolation_radius(field, *q, r_max, opts)?;
        seeds.push(Seed {
            uv: *q,
            norm: norm_of(&field.sample(*q)?),
            isolation_radius: iso,
        });
    }
    Ok(seeds)
}

/// Damped Newton on X = 0 with Armijo backtracking on |X|²; `None` when the
/// seed does not converge to a `tol`-accurate zero. Iteration runs to step
/// convergence rather than stopping at the first |X| < `tol` iterate: at a
/// root of order k the contraction along the kernel is only linear (factor
/// (k−1)/k), and an early stop would strand the iterate ~`tol`^(1/k) away
/// from the root.
fn newton_from<F: CharField>(
    field: &F,
    start: [f64; 2],
    opts: &LocateOptions,
) -> Result<Option<[f64; 2]>> {
    let bounds = field.bounds();
    let periodic = field.periodic();
    let margin = [
        0.05 * (bounds[0][1] - bounds[0][0]),
        0.05 * (bounds[1][1] - bounds[1][0]),
    ];
    let mut p = start;
    for _ in 0..opts.max_iter {
        let s = field.sample(p)?;
        let converged = norm_of(&s) < opts.tol;
        let x = [s.x[0].value(), s.x[1].value()];
        let f2 = x[0] * x[0] + x[1] * x[1];
        let j = [[s.x[0].d(0), s.x[0].d(1)], [s.x[1].d(0), s.x[1].d(1)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let jnorm = j.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
        let step = if det.abs() > 1e-13 * jnorm * jnorm {
            [
                -(j[1][1] * x[0] - j[0][1] * x[1]) / det,
                -(-j[1][0] * x[0] + j[0][0] * x[1]) / det,
            ]
        } else {
            // Rank-deficient Jacobian (e.g. the zero set is a curve):
            // steepest descent on |X|² with the exact Cauchy step length,
            // which still reaches the zero set.
            let d = [
                -(j[0][0] * x[0] + j[1][0] * x[1]),
                -(j[0][1] * x[0] + j[1][1] * x[1]),
            ];
            let jd = [
                j[0][0] * d[0] + j[0][1] * d[1],
                j[1][0] * d[0] + j[1][1] * d[1],
            ];
            let denom = jd[0] * jd[0] + jd[1] * jd[1];
            if denom <= 0.0 {
                // Stationary point of |X|²; a root exactly when it already
                // clears the tolerance.
                return Ok(if converged { Some(p) } else { None });
            }
            let t = -(x[0] * jd[0] + x[1] * jd[1]) / denom;
            [t * d[0], t * d[1]]
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..12 {
            let mut cand = [p[0] + lambda * step[0], p[1] + lambda * step[1]];
            for axis in 0..2 {
                if periodic[axis] {
                    let len = bounds[axis][1] - bounds[axis][0];
                    cand[axis] = bounds[axis][0] + (cand[axis] - bounds[axis][0]).rem_euclid(len);
                } else if cand[axis] < bounds[axis][0] - margin[axis]
                    || cand[axis] > bounds[axis][1] + margin[axis]
                {
                    return Ok(None);
                }
            }
            let sc = field.sample(cand)?;
            let xc = [sc.x[0].value(), sc.x[1].value()];
            if xc[0] * xc[0] + xc[1] * xc[1] < (1.0 - 1e-4 * lambda) * f2 {
                accepted = Some(cand);
                break;
            }
            lambda *= 0.5;
        }
        let next = match accepted {
            Some(c) => c,
            // |X|² cannot decrease further (rounding floor); the point is a
            // root exactly when it already clears the tolerance.
            None => return Ok(if converged { Some(p) } else { None }),
        };
        let moved = ((next[0] - p[0]).powi(2) + (next[1] - p[1]).powi(2)).sqrt();
        p = next;
        if moved * lambda.max(1.0) < opts.newton_tol {
            break;
        }
    }
    let s = field.sample(p)?;
    Ok(if norm_of(&s) < opts.tol { Some(p) } else { None })
}

/// One-dimensional re-localization of a degenerate root along the kernel
/// direction v₀ of ∇X. Across a root of order k, ⟨X, v₀⟩ ~ tᵏ changes sign
/// for odd k while its t-derivative v₀ᵀ(∇X)v₀ ~ tᵏ⁻¹ changes sign for even
/// k, so one of the two brackets the root and bisection recovers it to
/// machine precision. Nondegenerate points (where Newton is already
/// quadratically accurate) and points without a bracket pass through
/// unchanged.
fn polish_degenerate<F: CharField>(
    field: &F,
    q: [f64; 2],
    w: f64,
    opts: &LocateOptions,
) -> Result<[f64; 2]> {
    let s = field.sample(q)?;
    let g = covariant_grad(&s);
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let scale = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if w <= 0.0 || det.abs() > 1e-4 * (scale * scale).max(tr * tr) {
        return Ok(q);
    }
    let v0 = match eigen_of_matrix(&g, q, None) {
        Ok(split) => split.v0,
        Err(_) => return Ok(q),
    };
    let h = |t: f64| -> Result<f64> {
        let st = field.sample([q[0] + t * v0[0], q[1] + t * v0[1]])?;
        Ok(st.x[0].value() * v0[0] + st.x[1].value() * v0[1])
    };
    let h_prime = |t: f64| -> Result<f64> {
        let st = field.sample([q[0] + t * v0[0], q[1] + t * v0[1]])?;
        let mut acc = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                acc += v0[i] * st.x[i].d(j) * v0[j];
            }
        }
        Ok(acc)
    };
    let bracketed: Option<&dyn Fn(f64) -> Result<f64>> = if h(-w)? * h(w)? < 0.0 {
        Some(&h)
    } else if h_prime(-w)? * h_prime(w)? < 0.0 {
        Some(&h_prime)
    } else {
        None
    };
    let Some(f) = bracketed else {
        return Ok(q);
    };
    let (mut a, mut b) = (-w, w);
    let mut fa = f(a)?;
    loop {
        let mid = 0.5 * (a + b);
        if mid == a || mid == b {
            break;
        }
        let fm = f(mid)?;
        if fm == 0.0 {
            a = mid;
            break;
        }
        if fa * fm < 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    let t = 0.5 * (a + b);
    let candidate = [q[0] + t * v0[0], q[1] + t * v0[1]];
    if norm_of(&field.sample(candidate)?) < opts.tol {
        Ok(candidate)
    } else {
        Ok(q)
    }
}

/// Shortest displacement b − a, unwrapping periodic axes so that the
/// straight chord a + s·d (s ∈ [0,1]) is the short way around.
fn wrapped_displacement(
    a: [f64; 2],
    b: [f64; 2],
    bounds: &[[f64; 2]; 2],
    periodic: &[bool; 2],
) -> [f64; 2] {
    let mut d = [b[0] - a[0], b[1] - a[1]];
    for axis in 0..2 {
        if periodic[axis] {
            let len = bounds[axis][1] - bounds[axis][0];
            if d[axis] > 0.5 * len {
                d[axis] -= len;
            } else if d[axis] < -0.5 * len {
                d[axis] += len;
            }
        }
    }
    d
}

fn periodic_dist(a: [f64; 2], b: [f64; 2], bounds: &[[f64; 2]; 2], periodic: &[bool; 2]) -> f64 {
    let mut d2 = 0.0;
    for axis in 0..2 {
        let mut d = (a[axis] - b[axis]).abs();
        if periodic[axis] {
            let len = bounds[axis][1] - bounds[axis][0];
            d = d.min(len - d % len).min(d % len);
        }
        d2 += d * d;
    }
    d2.sqrt()
}

/// Largest ring radius ≤ `r_max` on which |X| stays above 10·tol; shrinks
/// geometrically and reports a non-isolated set when a ring carries zeros
/// away from the center or no radius isolates.
fn isolation_radius<F: CharField>(
    field: &F,
    q: [f64; 2],
    r_max: f64,
    opts: &LocateOptions,
) -> Result<f64> {
    const RING_SAMPLES: usize = 64;
    let floor = (10.0 * opts.merge_radius()).max(1e-4);
    let mut r = r_max;
    while r > floor {
        let mut ring_min = f64::INFINITY;
        for m in 0..RING_SAMPLES {
            let th = std::f64::consts::TAU * (m as f64 + ANGULAR_OFFSET) / RING_SAMPLES as f64;
            let p = [q[0] + r * th.cos(), q[1] + r * th.sin()];
            ring_min = ring_min.min(norm_of(&field.sample(p)?));
        }
        if ring_min > 10.0 * opts.tol {
            return Ok(r);
        }
        if ring_min < opts.tol {
            return Err(Error::NonIsolatedCharacteristicSet {
                near: q,
                detail: format!(
                    "ring of radius {r:.3e} around the root carries |X| = {ring_min:.3e} < tol"
                ),
            });
        }
        r *= 0.75;
    }
    Err(Error::NonIsolatedCharacteristicSet {
        near: q,
        detail: format!("no isolating ring found above radius {floor:.3e}"),
    })
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// D_qX at a `tol`-accurate zero (where the chart Jacobian of X is
/// tensorial), as the covariant gradient of the sample.
pub fn differential_at_zero<F: CharField>(
    field: &F,
    q: [f64; 2],
    tol: f64,
) -> Result<[[f64; 2]; 2]> {
    let s = field.sample(q)?;
    let norm = norm_of(&s);
    if norm >= tol {
        return Err(Error::NotACharacteristicPoint { at: q, norm });
    }
    Ok(covariant_grad(&s))
}

/// Eigen-splitting of ∇X at `p`, ordered |λ₀| < |λ₁|, with v₀'s sign aligned
/// to `prev` when given (continuity along a sampling path).
pub fn eigen_split<F: CharField>(
    field: &F,
    p: [f64; 2],
    prev: Option<[f64; 2]>,
) -> Result<EigenSplit> {
    let s = field.sample(p)?;
    let g = covariant_grad(&s);
    eigen_of_matrix(&g, p, prev)
}

fn eigen_of_matrix(
    g: &[[f64; 2]; 2],
    p: [f64; 2],
    prev: Option<[f64; 2]>,
) -> Result<EigenSplit> {
    let tr = g[0][0] + g[1][1];
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let disc = tr * tr - 4.0 * det;
    let scale = g.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    if disc <= 1e-12 * scale * scale {
        return Err(Error::EigenvaluesCoalesce { at: p });
    }
    let s = disc.sqrt();
    let (la, lb) = ((tr + s) / 2.0, (tr - s) / 2.0);
    let (l0, l1) = if la.abs() < lb.abs() { (la, lb) } else { (lb, la) };
    let vector_for = |lam: f64| -> [f64; 2] {
        // Rows of (∇X − λI) are orthogonal to the eigenvector; use the
        // larger row for stability.
        let r1 = [g[0][0] - lam, g[0][1]];
        let r2 = [g[1][0], g[1][1] - lam];
        let n1 = r1[0] * r1[0] + r1[1] * r1[1];
        let n2 = r2[0] * r2[0] + r2[1] * r2[1];
        let r = if n1 >= n2 { r1 } else { r2 };
        let v = [-r[1], r[0]];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        [v[0] / n, v[1] / n]
    };
    let mut v0 = vector_for(l0);
    if let Some(pr) = prev {
        if v0[0] * pr[0] + v0[1] * pr[1] < 0.0 {
            v0 = [-v0[0], -v0[1]];
        }
    }
    let mut v1 = vector_for(l1);
    if v0[0] * v1[1] - v0[1] * v1[0] < 0.0 {
        v1 = [-v1[0], -v1[1]];
    }
    Ok(EigenSplit {
        lambda0: l0,
        lambda1: l1,
        v0,
        v1,
    })
}

/// ρ = det∇X/trace∇X at a point.
fn rho_at<F: CharField>(field: &F, p: [f64; 2]) -> Result<f64> {
    let s = field.sample(p)?;
    let (tr, det) = trace_det(&s);
    if tr.abs() < 1e-8 {
        return Err(Error::TraceVanishes { at: p });
    }
    Ok(det / tr)
}

/// Extended curvature invariant K̂ = −1 + det∇X/trace²∇X.
pub fn hat_k<F: CharField>(field: &F, p: [f64; 2]) -> Result<f64> {
    let s = field.sample(p)?;
    let (tr, det) = trace_det(&s);
    if tr.abs() < 1e-8 {
        return Err(Error::TraceVanishes { at: p });
    }
    Ok(-1.0 + det / (tr * tr))
}

/// Order of degeneracy k and invariant Λ^(k) at a characteristic point.
///
/// Nondegenerate points short-circuit to (1, det/trace). Degenerate points
/// trace the v₀ integral curve by unit-speed RK4 in both directions, sample
/// ρ at Chebyshev–Lobatto arclengths in [−r₀, r₀], project onto a
/// degree-kmax polynomial, and take the smallest derivative order at 0
/// whose magnitude clears `noise_rel·max(1, ‖ρ‖∞)·m!/r₀^m`.
pub fn order_and_lambda<F: CharField>(
    field: &F,
    q: [f64; 2],
    isolation_radius: f64,
    opts: &ClassifyOptions,
) -> Result<OrderLambda> {
    let s = field.sample(q)?;
    let norm = norm_of(&s);
    if norm >= opts.char_tol {
        return Err(Error::NotACharacteristicPoint { at: q, norm });
    }
    let (tr, det) = trace_det(&s);
    if tr.abs() < 1e-8 {
        return Err(Error::TraceVanishes { at: q });
    }
    if det.abs() >= opts.degeneracy_rel * tr * tr {
        return Ok(OrderLambda {
            k: 1,
            lambda: det / tr,
            sign_ambiguous: false,
        });
    }
    if opts.kmax < 2 {
        return Err(Error::OrderExceedsKmax { kmax: opts.kmax });
    }

    let r0 = (isolation_radius / 2.0).min(opts.window_cap);
    let n = opts.cheb_nodes.max(2 * opts.kmax + 3);
    // Chebyshev–Lobatto arclengths tᵢ = r₀·cos(πi/(n−1)), i = 0..n.
    let mut rho = vec![0.0; n];
    let node = |i: usize| r0 * (std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();

    // Initial v₀ at the root itself.
    let g = covariant_grad(&s);
    let split = eigen_of_matrix(&g, q, None)?;

    // Forward (t > 0) and backward (t < 0) halves of the node set.
    let targets_pos: Vec<(usize, f64)> = (0..n)
        .map(|i| (i, node(i)))
        .filter(|(_, t)| *t > 1e-14 * r0)
        .collect();
    let targets_neg: Vec<(usize, f64)> = (0..n)
        .map(|i| (i, node(i)))
        .filter(|(_, t)| *t < -1e-14 * r0)
        .map(|(i, t)| (i, -t))
        .collect();
    for (i, t) in (0..n).map(|i| (i, node(i))) {
        if t.abs() <= 1e-14 * r0 {
            rho[i] = det / tr;
        }
    }
    trace_and_sample(field, q, split.v0, &targets_pos, r0, &mut rho)?;
    trace_and_sample(
        field,
        q,
        [-split.v0[0], -split.v0[1]],
        &targets_neg,
        r0,
        &mut rho,
    )?;

    // Discrete Chebyshev projection of the sampled ρ onto degree ≤ kmax.
    let coeffs = chebyshev_coefficients(&rho, opts.kmax);
    let mono = chebyshev_to_monomial(&coeffs);
    let rho_sup = rho.iter().fold(0.0f64, |a, v| a.max(v.abs()));

    let mut factorial = 1.0;
    for m in 1..=opts.kmax {
        factorial *= m as f64;
        if m >= mono.len() {
            break;
        }
        // m-th arclength derivative of the fit at 0. The noise floor lives
        // on the coefficient scale (coefficients inherit the relative
        // accuracy of the ρ samples), so both sides carry the same
        // m!/r₀^m factor; the absolute floor keeps genuinely tiny ρ
        // windows (high-order points) detectable.
        let deriv = mono[m] * factorial / r0.powi(m as i32);
        let threshold = opts.noise_rel * rho_sup.max(1e-9) * factorial / r0.powi(m as i32);
        if deriv.abs() > threshold {
            let k = m + 1;
            let ambiguous = k % 2 == 0;
            return Ok(OrderLambda {
                k,
                lambda: if ambiguous { deriv.abs() } else { deriv },
                sign_ambiguous: ambiguous,
            });
        }
    }
    Err(Error::OrderExceedsKmax { kmax: opts.kmax })
}

/// Unit-speed RK4 along the aligned v₀ field from `q`, recording ρ at the
/// requested arclengths (which must be sorted by node construction:
/// Chebyshev indices run from the far end toward the center, so distances
/// are descending — they are resorted ascending here).
fn trace_and_sample<F: CharField>(
    field: &F,
    q: [f64; 2],
    v_init: [f64; 2],
    targets: &[(usize, f64)],
    r0: f64,
    rho_out: &mut [f64],
) -> Result<()> {
    if targets.is_empty() {
        return Ok(());
    }
    let mut order: Vec<(usize, f64)> = targets.to_vec();
    order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let bounds = field.bounds();
    let h_max = r0 / 32.0;
    let mut p = q;
    let mut dir = v_init;
    let mut s_done = 0.0;
    let eval_dir = |p: [f64; 2], prev: [f64; 2]| -> Result<[f64; 2]> {
        let split = eigen_split(field, p, Some(prev)).map_err(|e| match e {
            Error::EigenvaluesCoalesce { at } => Error::CurveTracingFailed {
                detail: format!("eigen-splitting lost at ({:.6}, {:.6})", at[0], at[1]),
            },
            other => other,
        })?;
        Ok(split.v0)
    };
    for &(slot, s_target) in &order {
        let remaining = s_target - s_done;
        let steps = (remaining / h_max).ceil().max(1.0) as usize;
        let h = remaining / steps as f64;
        for _ in 0..steps {
            let k1 = eval_dir(p, dir)?;
            let k2 = eval_dir([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]], k1)?;
            let k3 = eval_dir([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]], k2)?;
            let k4 = eval_dir([p[0] + h * k3[0], p[1] + h * k3[1]], k3)?;
            p = [
                p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            dir = k4;
            if p[0] < bounds[0][0] - 1.0
                || p[0] > bounds[0][1] + 1.0
                || p[1] < bounds[1][0] - 1.0
                || p[1] > bounds[1][1] + 1.0
            {
                return Err(Error::CurveTracingFailed {
                    detail: format!("curve left the chart near ({:.4}, {:.4})", p[0], p[1]),
                });
            }
        }
        s_done = s_target;
        rho_out[slot] = rho_at(field, p)?;
    }
    Ok(())
}

/// Discrete Chebyshev coefficients c₀..c_deg on Lobatto samples (values
/// ordered by xᵢ = cos(πi/(n−1)) from +1 to −1), already including the
/// half-weight on c₀.
fn chebyshev_coefficients(values: &[f64], deg: usize) -> Vec<f64> {
    let n = values.len();
    let m = (n - 1) as f64;
    let mut coeffs = Vec::with_capacity(deg + 1);
    for j in 0..=deg {
        let mut acc = 0.0;
        for (i, &f) in values.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * f * (std::f64::consts::PI * (i as f64) * (j as f64) / m).cos();
        }
        let norm = if j == 0 { 1.0 / m } else { 2.0 / m };
        coeffs.push(norm * acc);
    }
    coeffs
}

/// Monomial coefficients of Σ cⱼTⱼ(x), via the T-recurrence.
fn chebyshev_to_monomial(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len() - 1;
    // Monomial expansions of T₀..T_deg.
    let mut t_prev = vec![0.0; deg + 1];
    let mut t_curr = vec![0.0; deg + 1];
    t_prev[0] = 1.0; // T₀ = 1
    if deg >= 1 {
        t_curr[1] = 1.0; // T₁ = x
    }
    let mut out = vec![0.0; deg + 1];
    out[0] += coeffs[0];
    if deg >= 1 {
        out[1] += coeffs[1];
    }
    for j in 2..=deg {
        // T_j = 2x·T_{j−1} − T_{j−2}
        let mut t_next = vec![0.0; deg + 1];
        for d in 0..deg {
            t_next[d + 1] += 2.0 * t_curr[d];
        }
        for d in 0..=deg {
            t_next[d] -= t_prev[d];
        }
        for d in 0..=deg {
            out[d] += coeffs[j] * t_next[d];
        }
        t_prev = t_curr;
        t_curr = t_next;
    }
    out
}

/// Closed index formula: sign(trace·Λ^(k)) for odd k, 0 for even k.
pub fn index_formula(k: usize, trace: f64, lambda_k: f64) -> Result<i32> {
    if k < 1 {
        return Err(Error::InvalidOrder { k: k as i64 });
    }
    if k % 2 == 0 {
        return Ok(0);
    }
    let product = trace * lambda_k;
    if product == 0.0 {
        return Err(Error::Domain {
            what: "index formula needs trace ≠ 0 and Λ^(k) ≠ 0 for odd k".into(),
        });
    }
    Ok(if product > 0.0 { 1 } else { -1 })
}

/// Winding-number oracle: continuous angle of X/|X| around a circle,
/// refining the sample count until every jump is below π and the rounding
/// residual is below 0.05.
pub fn winding_index<F: CharField>(
    field: &F,
    q: [f64; 2],
    radius: f64,
    samples: usize,
) -> Result<i32> {
    if samples < 64 {
        return Err(Error::Domain {
            what: format!("winding needs at least 64 samples, got {samples}"),
        });
    }
    let mut n = samples;
    for _ in 0..7 {
        match try_winding(field, q, radius, n)? {
            Some(w) => return Ok(w),
            None => n *= 2,
        }
    }
    Err(Error::AngleUnwrapFailed {
        detail: format!("no stable unwrap up to {n} samples at radius {radius:.3e}"),
    })
}

/// One unwrap attempt; `None` asks for refinement.
fn try_winding<F: CharField>(
    field: &F,
    q: [f64; 2],
    radius: f64,
    n: usize,
) -> Result<Option<i32>> {
    let mut angles = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let th = std::f64::consts::TAU * ((m % n) as f64 + ANGULAR_OFFSET) / n as f64;
        let p = [q[0] + radius * th.cos(), q[1] + radius * th.sin()];
        let s = field.sample(p)?;
        let (xu, xv) = (s.x[0].value(), s.x[1].value());
        if (xu * xu + xv * xv).sqrt() < 1e-13 {
            return Err(Error::AngleUnwrapFailed {
                detail: format!("|X| vanishes on the winding circle at radius {radius:.3e}"),
            });
        }
        angles.push(xv.atan2(xu));
    }
    let mut total = 0.0;
    for w in angles.windows(2) {
        let mut d = w[1] - w[0];
        while d > std::f64::consts::PI {
            d -= std::f64::consts::TAU;
        }
        while d < -std::f64::consts::PI {
            d += std::f64::consts::TAU;
        }
        if d.abs() > 0.9 * std::f64::consts::PI {
            return Ok(None); // undersampled
        }
        total += d;
    }
    let w = total / std::f64::consts::TAU;
    let rounded = w.round();
    if (w - rounded).abs() >= 0.05 {
        return Ok(None);
    }
    Ok(Some(rounded as i32))
}

/// Locates and fully classifies every characteristic point of the field.
pub fn classify<F: CharField>(field: &F, opts: &ClassifyOptions) -> Result<Vec<CharPoint>> {
    let seeds = locate_characteristic_points(field, &opts.locate)?;
    let mut out = Vec::with_capacity(seeds.len());
    for seed in seeds {
        let d_qx = differential_at_zero(field, seed.uv, opts.char_tol)?;
        let sample = field.sample(seed.uv)?;
        let (trace, det) = trace_det(&sample);
        let ol = order_and_lambda(field, seed.uv, seed.isolation_radius, opts)?;
        let index = index_formula(ol.k, trace, ol.lambda)?;
        let winding = winding_index(
            field,
            seed.uv,
            seed.isolation_radius * 0.5,
            opts.winding_samples,
        )?;
        let hat = hat_k(field, seed.uv)?;
        out.push(CharPoint {
            uv: seed.uv,
            d_qx,
            trace,
            det,
            order: ol.k,
            lambda_k: ol.lambda,
            lambda_sign_ambiguous: ol.sign_ambiguous,
            index,
            winding,
            hat_k: hat,
            isolation_radius: seed.isolation_radius,
        });
    }
    Ok(out)
}

/// Euler-characteristic bookkeeping over classified points.
pub fn euler_characteristic(points: &[CharPoint]) -> Result<EulerResult> {
    if points.is_empty() {
        return Ok(EulerResult {
            from_indices: 0,
            from_formula: 0,
            empty_warning: true,
        });
    }
    let mut from_indices = 0i64;
    let mut from_formula = 0i64;
    for p in points {
        if p.order < 1 {
            return Err(Error::UnclassifiedPoint);
        }
        from_indices += p.winding as i64;
        if p.order % 2 == 1 {
            from_formula += index_formula(p.order, p.trace, p.lambda_k)? as i64;
        }
    }
    Ok(EulerResult {
        from_indices,
        from_formula,
        empty_warning: false,
    })
}

/// Derivatives dʲ/dtʲ g(X, γ̇)|₀ for j = 0..=order along the straight curve
/// γ(t) = q + t·direction of a fixture field (Euclidean metric), by
/// one-variable jet evaluation. Only valid when γ̇(0) spans ker D_qX.
pub fn lambda_gamma_fixture(
    field: &FixtureField,
    q: [f64; 2],
    direction: [f64; 2],
    order: usize,
) -> Result<Vec<f64>> {
    const MAX_CURVE_ORDER: usize = 8;
    if order > MAX_CURVE_ORDER {
        return Err(Error::OrderUnsupported {
            requested: order,
            max: MAX_CURVE_ORDER,
        });
    }
    let dn = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
    if dn == 0.0 {
        return Err(Error::Domain {
            what: "curve direction must be nonzero".into(),
        });
    }
    let dir = [direction[0] / dn, direction[1] / dn];
    // Kernel check at q.
    let split = eigen_split(field, q, None)?;
    let wedge = (dir[0] * split.v0[1] - dir[1] * split.v0[0]).abs();
    if wedge > 1e-8 {
        return Err(Error::NotAKernelExtension { wedge });
    }
    let t = Jet::variable(1, order, 0, 0.0);
    let gamma = [t * dir[0] + q[0], t * dir[1] + q[1]];
    let lam = field.x[0].eval_with(&gamma)? * dir[0] + field.x[1].eval_with(&gamma)? * dir[1];
    Ok((0..=order).map(|j| lam.derivative(&[j])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(xu: &str, xv: &str) -> FixtureField {
        FixtureField::new([xu, xv], [[-1.0, 1.0], [-1.0, 1.0]]).unwrap()
    }

    #[test]
    fn locate_source_fixture() {
        let f = fixture("x", "y");
        let seeds = locate_characteristic_points(&f, &LocateOptions::default()).unwrap();
        assert_eq!(seeds.len(), 1);
        let s = seeds[0];
        assert!(s.uv[0].abs() < 1e-8 && s.uv[1].abs() < 1e-8, "{:?}", s.uv);
        assert!(s.isolation_radius > 0.1);
    }

    #[test]
    fn locate_degenerate_root_single_and_isolated() {
        // Newton stalls ~|X|^(1/k) from a degenerate root when stopped at the
        // first |X| < tol iterate; the locator must still report one root at
        // the origin with a healthy isolation radius.
        for xv in ["y^3 - 0.5*y^5", "y^2 + 0.25*y^4", "0.05*y^5 + 0.01*y^7"] {
            let f = fixture("x", xv);
            let seeds = locate_characteristic_points(&f, &LocateOptions::default()).unwrap();
            assert_eq!(seeds.len(), 1, "field (x, {xv})");
            let s = seeds[0];
            assert!(s.uv[0].abs() < 1e-7 && s.uv[1].abs() < 1e-4, "{:?}", s.uv);
            assert!(s.isolation_radius > 0.4, "iso = {}", s.isolation_radius);
        }
    }

    #[test]
    fn consolidation_keeps_distinct_roots_apart() {
        // Two genuine nondegenerate zeros 0.04 apart: the chord between them
        // leaves the |X| < tol valley, so they must stay distinct.
        let f = fixture("x^2 - 0.0004", "y");
        let seeds = locate_characteristic_points(&f, &LocateOptions::default()).unwrap();
        assert_eq!(seeds.len(), 2);
        assert!((seeds[0].uv[0] + 0.02).abs() < 1e-8);
        assert!((seeds[1].uv[0] - 0.02).abs() < 1e-8);
    }

    #[test]
    fn classify_degenerate_normal_forms() {
        // Full pipeline (locate → order → winding) on perturbed normal forms
        // X = νx∂x + (μ/k!·y^k + higher)∂y.
        let cases = [
            ("x", "y^2 + 0.25*y^4", 2, 2.0, 0),
            ("x", "y^3 - 0.5*y^5", 3, 6.0, 1),
            ("x", "-(y^3) + 0.25*y^7", 3, -6.0, -1),
            ("x", "0.05*y^5 + 0.01*y^7", 5, 6.0, 1),
        ];
        for (xu, xv, k, lam, index) in cases {
            let f = fixture(xu, xv);
            let pts = classify(&f, &ClassifyOptions::default()).unwrap();
            assert_eq!(pts.len(), 1, "field ({xu}, {xv})");
            let p = &pts[0];
            assert_eq!(p.order, k, "field ({xu}, {xv})");
            assert!(
                (p.lambda_k - lam).abs() < 1e-4 * lam.abs(),
                "field ({xu}, {xv}): Λ = {}",
                p.lambda_k
            );
            assert_eq!(p.index, index, "field ({xu}, {xv})");
            assert_eq!(p.winding, index, "field ({xu}, {xv})");
        }
    }

    #[test]
    fn no_roots_when_field_has_none() {
        let f = fixture("x + 3", "y - 5");
        let seeds = locate_characteristic_points(&f, &LocateOptions::default()).unwrap();
        assert!(seeds.is_empty());
    }

    #[test]
    fn differential_of_normal_form() {
        let f = fixture("x", "y^3");
        let d = differential_at_zero(&f, [0.0, 0.0], 1e-6).unwrap();
        assert!((d[0][0] - 1.0).abs() < 1e-12);
        assert!(d[1][1].abs() < 1e-12 && d[0][1].abs() < 1e-12 && d[1][0].abs() < 1e-12);
        assert!(matches!(
            differential_at_zero(&f, [0.5, 0.0], 1e-6),
            Err(Error::NotACharacteristicPoint { .. })
        ));
    }

    #[test]
    fn eigen_split_on_fixture_line() {
        let f = fixture("x", "y^3");
        let t = 0.2;
        let s = eigen_split(&f, [0.0, t], None).unwrap();
        assert!((s.lambda0 - 3.0 * t * t).abs() < 1e-12);
        assert!((s.lambda1 - 1.0).abs() < 1e-12);
        assert!(s.v0[0].abs() < 1e-12 && (s.v0[1].abs() - 1.0).abs() < 1e-12);
        // Sign continuity: alignment to a previous direction flips v0.
        let aligned = eigen_split(&f, [0.0, t], Some([0.0, -1.0])).unwrap();
        assert!(aligned.v0[1] < 0.0);
    }

    #[test]
    fn order_recovery_small_k() {
        let opts = ClassifyOptions::default();
        // k = 1.
        let f = fixture("2*x", "-y");
        let ol = order_and_lambda(&f, [0.0, 0.0], 0.5, &opts).unwrap();
        assert_eq!(ol.k, 1);
        assert!((ol.lambda - (-2.0)).abs() < 1e-10, "Λ = {}", ol.lambda);
        // k = 2: X = x∂x + y²∂y (μ = 2).
        let f = fixture("x", "y^2");
        let ol = order_and_lambda(&f, [0.0, 0.0], 0.5, &opts).unwrap();
        assert_eq!(ol.k, 2);
        assert!(ol.sign_ambiguous);
        assert!((ol.lambda - 2.0).abs() < 1e-4 * 2.0, "Λ = {}", ol.lambda);
        // k = 3: X = x∂x + y³∂y (μ = 6).
        let f = fixture("x", "y^3");
        let ol = order_and_lambda(&f, [0.0, 0.0], 0.5, &opts).unwrap();
        assert_eq!(ol.k, 3);
        assert!(!ol.sign_ambiguous);
        assert!((ol.lambda - 6.0).abs() < 1e-4 * 6.0, "Λ = {}", ol.lambda);
    }

    #[test]
    fn winding_matches_lemma_cases() {
        let cases = [
            ("x", "y", 1),
            ("x", "y^2", 0),
            ("x", "-y^3", -1),
            ("x", "-y", -1),
        ];
        for (xu, xv, expect) in cases {
            let f = fixture(xu, xv);
            let w = winding_index(&f, [0.0, 0.0], 0.3, 64).unwrap();
            assert_eq!(w, expect, "field ({xu}, {xv})");
        }
    }

    #[test]
    fn winding_sample_floor() {
        let f = fixture("x", "y");
        assert!(matches!(
            winding_index(&f, [0.0, 0.0], 0.3, 32),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn index_formula_cases() {
        assert_eq!(index_formula(1, 1.0, 1.0).unwrap(), 1);
        assert_eq!(index_formula(2, 1.0, 5.0).unwrap(), 0);
        assert_eq!(index_formula(3, 1.0, -6.0).unwrap(), -1);
        assert!(matches!(index_formula(0, 1.0, 1.0), Err(Error::InvalidOrder { .. })));
    }

    #[test]
    fn hat_k_values() {
        // D = diag(1,1): K̂ = −1 + 1/4 = −3/4.
        let f = fixture("x", "y");
        let v = hat_k(&f, [0.0, 0.0]).unwrap();
        assert!((v + 0.75).abs() < 1e-12, "K̂ = {v}");
        // Degenerate: det → 0 ⇒ K̂ → −1.
        let f = fixture("x", "y^3");
        let v = hat_k(&f, [0.0, 0.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hat_k_bridge_for_k3() {
        // K̂ + 1 = 3t²/(1+3t²)² along the v₀ curve; second derivative at 0
        // equals 6 = trace·Λ^(3).
        let f = fixture("x", "y^3");
        let h = 1e-3;
        let at = |t: f64| hat_k(&f, [0.0, t]).unwrap() + 1.0;
        let second = (at(h) - 2.0 * at(0.0) + at(-h)) / (h * h);
        assert!((second - 6.0).abs() < 1e-3 * 6.0, "second = {second}");
    }

    #[test]
    fn classify_pipeline_on_source() {
        let f = fixture("x", "y");
        let pts = classify(&f, &ClassifyOptions::default()).unwrap();
        assert_eq!(pts.len(), 1);
        let p = &pts[0];
        assert_eq!(p.order, 1);
        assert_eq!(p.index, 1);
        assert_eq!(p.winding, 1);
        assert!((p.trace - 2.0).abs() < 1e-9);
    }

    #[test]
    fn euler_bookkeeping() {
        let f = fixture("x", "y");
        let pts = classify(&f, &ClassifyOptions::default()).unwrap();
        let chi = euler_characteristic(&pts).unwrap();
        assert_eq!(chi.from_indices, 1);
        assert_eq!(chi.from_formula, 1);
        assert!(!chi.empty_warning);
        let empty = euler_characteristic(&[]).unwrap();
        assert_eq!((empty.from_indices, empty.from_formula), (0, 0));
        assert!(empty.empty_warning);
    }

    #[test]
    fn lambda_gamma_on_normal_form() {
        let f = fixture("x", "y^3");
        let derivs = lambda_gamma_fixture(&f, [0.0, 0.0], [0.0, 1.0], 3).unwrap();
        assert!(derivs[0].abs() < 1e-12 && derivs[1].abs() < 1e-12 && derivs[2].abs() < 1e-12);
        assert!((derivs[3] - 6.0).abs() < 1e-12, "derivs {derivs:?}");
        // Non-kernel direction.
        assert!(matches!(
            lambda_gamma_fixture(&f, [0.0, 0.0], [1.0, 0.0], 3),
            Err(Error::NotAKernelExtension { .. })
        ));
    }

    #[test]
    fn lambda_gamma_high_order_perturbation() {
        // Adding b₀(y) = c·y⁵ (order > k) leaves the first k derivatives:
        // derivatives (0,0,0,6,0,120c) with c = 0.5.
        let f = fixture("x", "y^3 + 0.5*y^5");
        let derivs = lambda_gamma_fixture(&f, [0.0, 0.0], [0.0, 1.0], 5).unwrap();
        assert!((derivs[3] - 6.0).abs() < 1e-12);
        assert!(derivs[4].abs() < 1e-12);
        assert!((derivs[5] - 60.0).abs() < 1e-9, "derivs {derivs:?}");
    }

    #[test]
    fn line_of_zeros_is_rejected() {
        let f = fixture("x", "0");
        let err = locate_characteristic_points(&f, &LocateOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::NonIsolatedCharacteristicSet { .. }),
            "got {err:?}"
        );
    }
}
