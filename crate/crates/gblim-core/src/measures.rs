//! Curvature measures, the ε-connection form, the singular limit measure,
//! and the convergence experiment.
//!
//! Everything integrated here is a chart density in du dv. The Gaussian
//! curvature K^ε comes from the Brioschi formula on order-2 jets of the
//! ε-metric and is smooth across the characteristic set; the connection
//! form η^ε (singular on the characteristic set) is kept as an independent
//! cross-check through the structure equation dη^ε = K^εσ^ε. The limit
//! measure μ₋₁ is the exterior differential of α = −(div X/|X|)·ω|_S,
//! evaluated off the characteristic set only.
//!
//! Quadrature follows a bulk-plus-patches partition of unity: a C^∞ radial
//! bump around each characteristic point splits every integral into a
//! smooth bulk part (tensor Gauss–Legendre) and polar patches with
//! geometrically graded rings that resolve the integrable |X|⁻¹-type
//! singularity. Two quadrature levels give a Richardson-style error
//! estimate; the disc below the innermost ring is dropped and its bound
//! (C·2π·r_cut for an integrand bounded by C/r) is added to the estimate.

use crate::charpoints::{norm_of, CharField, CharPoint, FieldSample};
use crate::contact::ContactModel;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::quad::{
    accumulate, box_nodes, bump, gauss_legendre, graded_rings, polar_nodes, radial_per_ring,
    Node, QuadOptions, ANGULAR_OFFSET,
};
use crate::surface::{christoffel, PreparedPoint, SurfaceChart};

/// Default geometric ε-sweep: ε = 4^{−j}, j = 0..=8. Each step halves the
/// √ε-scaled error terms, which makes the convergence knee visible.
pub fn default_epsilon_sweep() -> Vec<f64> {
    (0..=8).map(|j| 0.25_f64.powi(j)).collect()
}

/// b_ε = √(1 − div(X)²(1−ε)).
///
/// Satisfies √ε ≤ b_ε ≤ 1 for ε ∈ (0, 1], and extends to b₀ = |X| at ε = 0
/// through the identity div² + |X|² = 1.
pub fn b_eps(div_value: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain {
            what: format!("b_eps needs ε in (0, 1], got {eps}"),
        });
    }
    if div_value.abs() > 1.0 + 1e-10 {
        return Err(Error::DivergenceOutOfRange { value: div_value });
    }
    let d2 = (div_value * div_value).min(1.0);
    Ok((1.0 - d2 * (1.0 - eps)).max(0.0).sqrt())
}

/// Gaussian curvature of g^ε|_S at a chart point, by the Brioschi formula
/// on order-2 jets of (E^ε, F^ε, G^ε). Defined everywhere on the surface,
/// including the characteristic set.
pub fn gaussian_curvature_eps(
    chart: &SurfaceChart,
    model: &ContactModel,
    eps: f64,
    uv: [f64; 2],
) -> Result<f64> {
    if eps <= 0.0 {
        return Err(Error::Domain {
            what: format!("ε must be positive, got {eps}"),
        });
    }
    let p = chart.prepare(model, uv)?;
    let (e, f, g) = p.fundamental_form_eps(eps);
    brioschi(&e, &f, &g, uv)
}

/// Brioschi formula from order-2 jets of a first fundamental form.
fn brioschi(e: &Jet, f: &Jet, g: &Jet, at: [f64; 2]) -> Result<f64> {
    let w = e.value() * g.value() - f.value() * f.value();
    if w <= 0.0 {
        return Err(Error::DegenerateImmersion { at });
    }
    let (e_u, e_v) = (e.d(0), e.d(1));
    let (f_u, f_v) = (f.d(0), f.d(1));
    let (g_u, g_v) = (g.d(0), g.d(1));
    let e_vv = e.derivative(&[0, 2]);
    let f_uv = f.derivative(&[1, 1]);
    let g_uu = g.derivative(&[2, 0]);
    let a = [
        [
            -0.5 * e_vv + f_uv - 0.5 * g_uu,
            0.5 * e_u,
            f_u - 0.5 * e_v,
        ],
        [f_v - 0.5 * g_u, e.value(), f.value()],
        [0.5 * g_v, f.value(), g.value()],
    ];
    let b = [
        [0.0, 0.5 * e_v, 0.5 * g_u],
        [0.5 * e_v, e.value(), f.value()],
        [0.5 * g_u, f.value(), g.value()],
    ];
    Ok((det3(&a) - det3(&b)) / (w * w))
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// ε-frame data at a point off the characteristic set.
#[derive(Clone, Copy, Debug)]
pub struct EpsFrameSample {
    /// b_ε ∈ [√ε, 1].
    pub b_eps: f64,
    /// Chart components of the ε = 1 coframe θ₁ = g(e₁, ·).
    pub theta1: [f64; 2],
    /// Chart components of θ₂ = g(e₂, ·); equals ω|_S/|X|.
    pub theta2: [f64; 2],
    /// Structural function multiplying θ₁ in the ε = 1 connection form.
    pub c1: f64,
    /// Structural function multiplying θ₂ in the ε = 1 connection form.
    pub c2: f64,
    /// Chart components of η^ε.
    pub eta_eps: [f64; 2],
}

/// Minimum |X| below which the ε-frame is refused.
const FRAME_TOL: f64 = 1e-6;

/// The ε-Levi-Civita connection form η^ε and its frame data at a chart
/// point off the characteristic set:
/// η^ε = −(√ε/b_ε)c₁θ₁ − c₂(b_ε/√ε)θ₂ − (e₁(b_ε)/√ε)θ₂,
/// with c₂ from |X|c₂ = div(X) − g(∇_{e₁}X, e₁) and
/// c₁ = (g(∇_{e₂}X, e₁) − div(JX))/|X|.
pub fn connection_form_eps(
    chart: &SurfaceChart,
    model: &ContactModel,
    eps: f64,
    uv: [f64; 2],
) -> Result<EpsFrameSample> {
    let p = chart.prepare(model, uv)?;
    Ok(eta_pipeline(&p, eps, uv)?.0)
}

/// Chart density of dη^ε at a point, from order-1 jets of η's components;
/// cross-checks the Brioschi curvature through dη^ε = K^εσ^ε.
pub fn d_eta_eps_density(
    chart: &SurfaceChart,
    model: &ContactModel,
    eps: f64,
    uv: [f64; 2],
) -> Result<f64> {
    let p = chart.prepare(model, uv)?;
    let (_, eta) = eta_pipeline(&p, eps, uv)?;
    Ok(eta[1].d(0) - eta[0].d(1))
}

/// Shared η^ε assembly in jet arithmetic (order 1 throughout, so that the
/// exterior differential is exact).
fn eta_pipeline(p: &PreparedPoint, eps: f64, at: [f64; 2]) -> Result<(EpsFrameSample, [Jet; 2])> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain {
            what: format!("connection form needs ε in (0, 1], got {eps}"),
        });
    }
    let xn2 = p.x_norm2();
    let norm = xn2.value().max(0.0).sqrt();
    if norm <= FRAME_TOL {
        return Err(Error::TooCloseToCharacteristicSet { at, norm });
    }
    let (e, f, g) = p.fundamental_form_1();
    let sigma_inv = p.sigma1().recip();
    let xj = p.x_jets();
    let xnorm = xn2.sqrt();
    let inv = xnorm.recip();

    // Orthonormal frame e₁ = X/|X|, e₂ = J e₁ and its coframe.
    let e1 = [xj[0] * inv, xj[1] * inv];
    let jrot = |v: &[Jet; 2]| -> [Jet; 2] {
        [
            (f * v[0] + g * v[1]) * sigma_inv * -1.0,
            (e * v[0] + f * v[1]) * sigma_inv,
        ]
    };
    let e2 = jrot(&e1);
    let lower = |v: &[Jet; 2]| -> [Jet; 2] {
        [e * v[0] + f * v[1], f * v[0] + g * v[1]]
    };
    let theta1 = lower(&e1);
    let theta2 = lower(&e2);

    // Covariant gradient jets (one order down): (∇X)ⁱⱼ = ∂ⱼXⁱ + ΓⁱⱼₘXᵐ.
    let gamma = christoffel(&e, &f, &g);
    let t1 = |j: &Jet| j.truncate(1);
    let mut grad = [[Jet::constant(2, 1, 0.0); 2]; 2];
    for i in 0..2 {
        for jdx in 0..2 {
            let mut acc = xj[i].partial_jet(jdx);
            for (m, xm) in xj.iter().enumerate() {
                acc = acc + gamma[i][jdx][m] * t1(xm);
            }
            grad[i][jdx] = acc;
        }
    }
    // ∇_w X for frame vectors (order-1 jets).
    let dir_grad = |w: &[Jet; 2]| -> [Jet; 2] {
        [
            t1(&w[0]) * grad[0][0] + t1(&w[1]) * grad[0][1],
            t1(&w[0]) * grad[1][0] + t1(&w[1]) * grad[1][1],
        ]
    };
    let metric_dot = |a: &[Jet; 2], b: &[Jet; 2]| -> Jet {
        t1(&e) * a[0] * t1(&b[0])
            + t1(&f) * (a[0] * t1(&b[1]) + a[1] * t1(&b[0]))
            + t1(&g) * a[1] * t1(&b[1])
    };
    let div = p.div();
    let nabla_e1 = dir_grad(&e1);
    let nabla_e2 = dir_grad(&e2);
    let c2 = (t1(&div) - metric_dot(&nabla_e1, &e1)) * t1(&inv);

    // div(JX) through the σ¹-weighted divergence of JX = |X|·e₂.
    let jx = [e2[0] * xnorm, e2[1] * xnorm];
    let sigma = p.sigma1();
    let div_jx = ((jx[0] * sigma).partial_jet(0) + (jx[1] * sigma).partial_jet(1))
        * t1(&sigma_inv);
    let c1 = (metric_dot(&nabla_e2, &e1) - div_jx) * t1(&inv);

    // b_ε and its e₁-derivative as jets.
    let b = (div * div * (eps - 1.0) + 1.0).sqrt();
    let e1_b = t1(&e1[0]) * b.partial_jet(0) + t1(&e1[1]) * b.partial_jet(1);
    let sq = eps.sqrt();
    let coef1 = b.truncate(1).recip() * c1 * (-sq);
    let coef2 = (c2 * t1(&b) + e1_b) * (-1.0 / sq);
    let eta = [
        coef1 * t1(&theta1[0]) + coef2 * t1(&theta2[0]),
        coef1 * t1(&theta1[1]) + coef2 * t1(&theta2[1]),
    ];

    let sample = EpsFrameSample {
        b_eps: b.value(),
        theta1: [theta1[0].value(), theta1[1].value()],
        theta2: [theta2[0].value(), theta2[1].value()],
        c1: c1.value(),
        c2: c2.value(),
        eta_eps: [eta[0].value(), eta[1].value()],
    };
    Ok((sample, eta))
}

/// Chart density of μ₋₁ = dα, α = −(div X/|X|)·ω|_S, from order-1 jets of
/// α's components. Only valid off the characteristic set.
pub fn mu_minus_one_density(
    chart: &SurfaceChart,
    model: &ContactModel,
    uv: [f64; 2],
) -> Result<f64> {
    let p = chart.prepare(model, uv)?;
    mu_density_prepared(&p, uv)
}

fn mu_density_prepared(p: &PreparedPoint, at: [f64; 2]) -> Result<f64> {
    let xn2 = p.x_norm2();
    let norm = xn2.value().max(0.0).sqrt();
    if norm <= 1e-13 {
        return Err(Error::TooCloseToCharacteristicSet { at, norm });
    }
    let inv = xn2.sqrt().recip();
    let div = p.div();
    let [wu, wv] = p.omega_restricted();
    let alpha_u = div * inv * wu * -1.0;
    let alpha_v = div * inv * wv * -1.0;
    Ok(alpha_v.d(0) - alpha_u.d(1))
}

// ---------------------------------------------------------------------------
// Integration
// ---------------------------------------------------------------------------

/// Which density is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    /// K^ε times the σ^ε area density (needs ε).
    KEpsSigmaEps,
    /// The singular-limit density μ₋₁ = dα.
    MuMinusOne,
    /// K^εσ^ε − μ₋₁/√ε (needs ε).
    Difference,
    /// |X|⁻¹σ¹ as a positive measure.
    InvNorm,
}

/// Test function paired with the measure.
#[derive(Clone, Copy, Debug)]
pub enum TestFunction<'a> {
    /// φ ≡ 1.
    One,
    /// Expression in the chart coordinates (u, v).
    Chart(&'a Expr),
    /// Expression in ambient coordinates, composed with the immersion.
    Ambient(&'a Expr),
}

/// Integration region within a chart.
#[derive(Clone, Copy, Debug)]
pub enum Support {
    /// The whole chart domain (bulk + singular patches).
    Full,
    /// A closed disc, integrated in graded polar rings around its center
    /// (used both for ball integrals around a characteristic point and for
    /// compactly supported test functions); declared patches are ignored
    /// and the disc center is treated as the only singularity.
    Disk { center: [f64; 2], radius: f64 },
}

/// A singular patch around a characteristic point.
#[derive(Clone, Copy, Debug)]
pub struct Patch {
    pub center: [f64; 2],
    /// Isolation radius of the point (the patch radius is derived from it).
    pub isolation_radius: f64,
}

/// Patches from classified characteristic points.
pub fn patches_from_points(points: &[CharPoint]) -> Vec<Patch> {
    points
        .iter()
        .map(|p| Patch {
            center: p.uv,
            isolation_radius: p.isolation_radius,
        })
        .collect()
}

/// One chart's contribution to an atlas integral: the integration domain
/// and its singular patches. The integrand (test function × density) lives
/// in [`Request`], so several integrands can share one quadrature pass over
/// the same jobs — the dominant cost is the per-node geometry jets, which
/// are computed once per node regardless of how many components ride along.
pub struct MeasureJob<'a> {
    pub chart: &'a SurfaceChart,
    pub model: &'a ContactModel,
    pub support: Support,
    /// Characteristic-point patches (for `Support::Full`); the chart weight
    /// must form a partition of unity with the other jobs' weights.
    pub patches: Vec<Patch>,
}

/// Quadrature controls for measure integrals.
#[derive(Clone, Copy, Debug)]
pub struct IntegralOptions {
    pub quad: QuadOptions,
    /// Absolute tolerance on the Richardson error estimate.
    pub tolerance: f64,
    /// Number of quadrature levels (refinement factors 1, 2, 4, …); at
    /// least 2, the last two levels give the estimate.
    pub levels: usize,
}

impl Default for IntegralOptions {
    fn default() -> Self {
        IntegralOptions {
            quad: QuadOptions::default(),
            tolerance: 5e-3,
            levels: 2,
        }
    }
}

/// One integrand component of a batched atlas integral: which density,
/// paired with which test function, and how much the shared absolute
/// tolerance is relaxed for this component (`tol_scale` multiplies
/// `IntegralOptions::tolerance`; use values > 1 for quantities whose
/// natural scale grows, e.g. ∫φ K^εσ^ε ~ 1/√ε).
#[derive(Clone, Copy)]
pub struct Request<'a> {
    pub kind: DensityKind,
    pub eps: Option<f64>,
    pub phi: TestFunction<'a>,
    pub tol_scale: f64,
}

impl<'a> Request<'a> {
    /// A component at the shared base tolerance.
    pub fn new(kind: DensityKind, eps: Option<f64>, phi: TestFunction<'a>) -> Self {
        Request {
            kind,
            eps,
            phi,
            tol_scale: 1.0,
        }
    }
}

/// ∫ φ·w·density over the atlas described by `jobs`, with a Richardson
/// error estimate (last-two-level difference plus the dropped-disc bound).
pub fn integrate_measure(
    jobs: &[MeasureJob],
    phi: TestFunction,
    kind: DensityKind,
    eps: Option<f64>,
    opts: &IntegralOptions,
) -> Result<(f64, f64)> {
    let out = integrate_batch(jobs, &[Request::new(kind, eps, phi)], opts)?;
    Ok(out[0])
}

fn need_eps(r: &Request) -> Result<f64> {
    match r.eps {
        Some(e) if e > 0.0 => Ok(e),
        _ => Err(Error::Domain {
            what: "this density kind needs a positive ε".into(),
        }),
    }
}

/// Batched atlas integration: every component in `requests` is evaluated on
/// the same quadrature nodes in one pass, sharing the per-node geometry
/// jets (and the per-node density evaluation between components that
/// differ only in their test function). Returns `(value, error estimate)`
/// per component; refinement stops once every component meets its own
/// scaled tolerance, and fails if any component still exceeds it at the
/// deepest level.
pub fn integrate_batch(
    jobs: &[MeasureJob],
    requests: &[Request],
    opts: &IntegralOptions,
) -> Result<Vec<(f64, f64)>> {
    let ncomp = requests.len();
    if opts.levels < 2 {
        return Err(Error::Domain {
            what: "integration needs at least two quadrature levels".into(),
        });
    }
    for r in requests {
        if matches!(r.kind, DensityKind::KEpsSigmaEps | DensityKind::Difference) {
            need_eps(r)?;
        }
        if !(r.tol_scale.is_finite() && r.tol_scale > 0.0) {
            return Err(Error::Domain {
                what: "request tolerance scale must be positive and finite".into(),
            });
        }
    }
    let tols: Vec<f64> = requests
        .iter()
        .map(|r| opts.tolerance * r.tol_scale)
        .collect();
    let mut prev: Option<Vec<f64>> = None;
    let mut last = vec![0.0; ncomp];
    let mut estimate = vec![f64::INFINITY; ncomp];
    let timing = std::env::var_os("GBLIM_TIMING").is_some();
    let t0 = std::time::Instant::now();
    for level in 0..opts.levels {
        let q = opts.quad.refined(1 << level);
        q.validate()?;
        let mut totals = vec![0.0; ncomp];
        let mut bounds = vec![0.0; ncomp];
        for job in jobs {
            let (t, b) = evaluate_job(job, requests, &q)?;
            for i in 0..ncomp {
                totals[i] += t[i];
                bounds[i] += b[i];
            }
        }
        if let Some(p) = &prev {
            for i in 0..ncomp {
                estimate[i] = (totals[i] - p[i]).abs() + bounds[i];
            }
        }
        last = totals.clone();
        prev = Some(totals);
        if timing {
            eprintln!(
                "[timing] level {level} ncomp {ncomp} kinds {:?} elapsed {:.2}s",
                requests.iter().map(|r| (r.kind, r.eps)).collect::<Vec<_>>(),
                t0.elapsed().as_secs_f64()
            );
        }
        if estimate.iter().zip(&tols).all(|(e, t)| *e <= *t) {
            break;
        }
    }
    // Report the component that overshoots its own gate by the largest
    // factor, with that component's scaled tolerance.
    let mut worst: Option<(f64, f64)> = None;
    for (e, t) in estimate.iter().zip(&tols) {
        if *e > *t && worst.is_none_or(|(we, wt)| e / t > we / wt) {
            worst = Some((*e, *t));
        }
    }
    if let Some((estimate, tolerance)) = worst {
        return Err(Error::QuadratureNotConverged {
            estimate,
            tolerance,
        });
    }
    Ok(last.into_iter().zip(estimate).collect())
}

/// φ·w at a chart point, evaluated before the expensive geometry so that
/// zero-support nodes can be skipped.
fn phi_weight(job: &MeasureJob, uv: [f64; 2]) -> Result<f64> {
    let w = job.chart.weight_at(uv)?;
    if w == 0.0 {
        return Ok(0.0);
    }
    let phi = match job.phi {
        TestFunction::One => 1.0,
        TestFunction::Chart(e) => e.eval(&uv)?,
        TestFunction::Ambient(e) => {
            let a = job.chart.immersion_at(uv)?;
            e.eval(&a)?
        }
    };
    Ok(w * phi)
}

fn density_at(
    p: &PreparedPoint,
    kind: DensityKind,
    eps: Option<f64>,
    at: [f64; 2],
) -> Result<f64> {
    match kind {
        DensityKind::KEpsSigmaEps => {
            let eps = eps.expect("validated");
            let (e, f, g) = p.fundamental_form_eps(eps);
            Ok(brioschi(&e, &f, &g, at)? * p.area_density_eps(eps).value())
        }
        DensityKind::MuMinusOne => mu_density_prepared(p, at),
        DensityKind::Difference => {
            let eps = eps.expect("validated");
            let (e, f, g) = p.fundamental_form_eps(eps);
            let k_sigma = brioschi(&e, &f, &g, at)? * p.area_density_eps(eps).value();
            Ok(k_sigma - mu_density_prepared(p, at)? / eps.sqrt())
        }
        DensityKind::InvNorm => {
            let norm = p.x_norm2().value().max(0.0).sqrt();
            if norm <= 1e-13 {
                return Err(Error::TooCloseToCharacteristicSet { at, norm });
            }
            Ok(p.sigma1().value().abs() / norm)
        }
    }
}

/// One chart's totals and dropped-disc bounds at a given quadrature level.
fn evaluate_job(
    job: &MeasureJob,
    requests: &[Request],
    q: &QuadOptions,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ncomp = requests.len();
    let mut totals = vec![0.0; ncomp];
    let mut bounds = vec![0.0; ncomp];
    match job.support {
        Support::Full => {
            // Patch geometry.
            let patch_geo: Vec<([f64; 2], f64)> = job
                .patches
                .iter()
                .map(|p| {
                    (
                        p.center,
                        (p.isolation_radius / 2.0).min(q.patch_radius_cap),
                    )
                })
                .collect();
            // Bulk with the complementary bump factor.
            let bbox = job.chart.domain().bounding_box();
            let nodes = box_nodes(bbox, [q.bulk, q.bulk], job.chart.periodic());
            let vals = accumulate(&nodes, ncomp, |node: &Node| {
                let mut factor = 1.0;
                for (c, r0) in &patch_geo {
                    factor -= bump(dist(node.uv, *c), *r0);
                }
                if factor <= 1e-14 {
                    return Ok(vec![0.0; ncomp]);
                }
                let pw = phi_weight(job, node.uv)?;
                if pw == 0.0 {
                    return Ok(vec![0.0; ncomp]);
                }
                let p = job.chart.prepare(job.model, node.uv)?;
                requests
                    .iter()
                    .map(|r| Ok(density_at(&p, r.kind, r.eps, node.uv)? * pw * factor))
                    .collect()
            })?;
            for i in 0..ncomp {
                totals[i] += vals[i];
            }
            // Singular patches.
            for (center, r0) in &patch_geo {
                let (t, b) = polar_region(job, requests, q, *center, *r0, Some(*r0))?;
                for i in 0..ncomp {
                    totals[i] += t[i];
                    bounds[i] += b[i];
                }
            }
        }
        Support::Disk { center, radius } => {
            let (t, b) = polar_region(job, requests, q, center, radius, None)?;
            totals = t;
            bounds = b;
        }
    }
    Ok((totals, bounds))
}

/// Graded polar quadrature over a disc, blended when it is a patch of a
/// bulk partition; also returns the dropped-disc bound per component.
fn polar_region(
    job: &MeasureJob,
    requests: &[Request],
    q: &QuadOptions,
    center: [f64; 2],
    radius: f64,
    blend: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let ncomp = requests.len();
    let r_cut = radius * q.inner_cutoff_rel;
    let rings = graded_rings(radius, r_cut, q.ratio);
    let rpr = radial_per_ring(q.radial, rings.len());
    let nodes = polar_nodes(center, &rings, rpr, q.angular, blend);
    // Bound-tracking for the dropped center disc: sample |density|·r on the
    // innermost nodes and bound the disc by C·2π·r_cut.
    let track_below = r_cut / q.ratio * 1.05;
    let mut c_est = vec![0.0f64; ncomp];
    let vals = accumulate(&nodes, ncomp, |node: &Node| {
        let pw = phi_weight(job, node.uv)?;
        if pw == 0.0 {
            return Ok(vec![0.0; ncomp]);
        }
        let p = job.chart.prepare(job.model, node.uv)?;
        let r = dist(node.uv, center);
        let mut out = Vec::with_capacity(ncomp);
        for (i, req) in requests.iter().enumerate() {
            let v = density_at(&p, req.kind, req.eps, node.uv)? * pw;
            if r <= track_below {
                c_est[i] = c_est[i].max(v.abs() * r);
            }
            out.push(v);
        }
        Ok(out)
    })?;
    let bounds = c_est
        .iter()
        .map(|c| c * std::f64::consts::TAU * r_cut)
        .collect();
    Ok((vals, bounds))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Convergence experiment
// ---------------------------------------------------------------------------

/// One row of the ε-sweep table.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    /// I(ε) = ∫ φ (K^εσ^ε − μ₋₁/√ε).
    pub integral: f64,
    /// 2π Σ φ(qᵢ)·ind(qᵢ).
    pub target: f64,
    pub abs_error: f64,
    pub quad_error: f64,
}

/// The convergence experiment: I(ε) against the atomic limit measure, rows
/// sorted by decreasing ε. The target 2πΣφ(qᵢ)ind(qᵢ) is supplied by the
/// caller (who owns the cross-chart characteristic-point bookkeeping).
/// All ε values share one prepared-geometry pass per quadrature node.
pub fn convergence_table(
    jobs: &[MeasureJob],
    epsilons: &[f64],
    target: f64,
    opts: &IntegralOptions,
) -> Result<Vec<ConvergenceRow>> {
    let mut eps_sorted: Vec<f64> = epsilons.to_vec();
    for &e in &eps_sorted {
        if e <= 0.0 {
            return Err(Error::Domain {
                what: format!("ε-sweep entries must be positive, got {e}"),
            });
        }
    }
    eps_sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let requests: Vec<Request> = eps_sorted
        .iter()
        .map(|&e| Request {
            kind: DensityKind::Difference,
            eps: Some(e),
        })
        .collect();
    let results = integrate_requests(jobs, &requests, opts)?;
    Ok(eps_sorted
        .iter()
        .zip(results)
        .map(|(&epsilon, (integral, quad_error))| ConvergenceRow {
            epsilon,
            integral,
            target,
            abs_error: (integral - target).abs(),
            quad_error,
        })
        .collect())
}

/// max over the sweep of |√ε·∫φ K^εσ^ε − ∫φ μ₋₁|, the weak-pairing form of
/// the first limit (√ε K^εσ^ε → μ₋₁).
pub fn mu_limit_check(
    jobs: &[MeasureJob],
    epsilons: &[f64],
    opts: &IntegralOptions,
) -> Result<f64> {
    let mut requests = vec![Request {
        kind: DensityKind::MuMinusOne,
        eps: None,
    }];
    requests.extend(epsilons.iter().map(|&e| Request {
        kind: DensityKind::KEpsSigmaEps,
        eps: Some(e),
    }));
    let results = integrate_requests(jobs, &requests, opts)?;
    let mu = results[0].0;
    let mut worst = 0.0f64;
    for (i, &e) in epsilons.iter().enumerate() {
        worst = worst.max((e.sqrt() * results[i + 1].0 - mu).abs());
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// |X|⁻¹ integrability probe
// ---------------------------------------------------------------------------

/// Annulus integrals of |X|⁻¹σ¹ between consecutive radii (decreasing)
/// around `q`. Each annulus is evaluated at two angular-cutoff depths with
/// panels graded toward the near-kernel directions where |X| is smallest;
/// a depth-dependent value (relative shift above 1%) means the angular
/// singularity carries infinite mass — the measure is not locally
/// integrable (non-isolated zero set or misclassified point).
pub fn inv_norm_integrability_probe<F: CharField>(
    field: &F,
    q: [f64; 2],
    radii: &[f64],
) -> Result<Vec<f64>> {
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] >= w[0]) || radii[radii.len() - 1] <= 0.0
    {
        return Err(Error::Domain {
            what: "probe needs a strictly decreasing list of positive radii".into(),
        });
    }
    const DEPTHS: [f64; 2] = [1e-9, 1e-12];
    let mut out = Vec::with_capacity(radii.len() - 1);
    for w in radii.windows(2) {
        let (outer, inner) = (w[0], w[1]);
        let a0 = annulus_integral(field, q, inner, outer, DEPTHS[0])?;
        let a1 = annulus_integral(field, q, inner, outer, DEPTHS[1])?;
        let shift = (a1 - a0).abs() / a1.abs().max(1e-300);
        if shift > 0.01 {
            return Err(Error::DivergentTail {
                detail: format!(
                    "annulus [{inner:.4e}, {outer:.4e}]: value shifts by {:.2}% under angular \
                     refinement — |X|⁻¹ is not integrable here",
                    shift * 100.0
                ),
            });
        }
        out.push(a1);
    }
    Ok(out)
}

/// ∫∫ σ̃/|X| over one annulus (polar around q, Jacobian r).
fn annulus_integral<F: CharField>(
    field: &F,
    q: [f64; 2],
    r_in: f64,
    r_out: f64,
    delta: f64,
) -> Result<f64> {
    const RADIAL: usize = 6;
    let (gx, gw) = gauss_legendre(RADIAL);
    let half = 0.5 * (r_out - r_in);
    let mid = 0.5 * (r_out + r_in);
    let mut total = 0.0;
    for (i, &t) in gx.iter().enumerate() {
        let r = mid + half * t;
        total += half * gw[i] * r * angular_integral(field, q, r, delta)?;
    }
    Ok(total)
}

fn sample_density<F: CharField>(field: &F, p: [f64; 2]) -> Result<f64> {
    let s: FieldSample = field.sample(p)?;
    let n = norm_of(&s);
    if n < 1e-300 {
        return Err(Error::DivergentTail {
            detail: format!("|X| vanishes on a probe circle at ({:.5}, {:.5})", p[0], p[1]),
        });
    }
    let (e, f, g) = (
        s.metric[0].value(),
        s.metric[1].value(),
        s.metric[2].value(),
    );
    let sigma = (e * g - f * f).max(0.0).sqrt();
    Ok(sigma / n)
}

/// ∮ σ̃/|X| dθ on the circle of radius r around q, excluding slivers of
/// half-width `delta` around the angular minima of |X| and grading panels
/// geometrically toward them.
fn angular_integral<F: CharField>(field: &F, q: [f64; 2], r: f64, delta: f64) -> Result<f64> {
    use std::f64::consts::TAU;
    const SCAN: usize = 128;
    const WINDOW: f64 = 0.3;
    const GROW: f64 = 2.5;
    let at = |theta: f64| [q[0] + r * theta.cos(), q[1] + r * theta.sin()];

    // Locate sharp angular minima of |X|.
    let mut scan = Vec::with_capacity(SCAN);
    for i in 0..SCAN {
        let theta = TAU * (i as f64 + ANGULAR_OFFSET) / SCAN as f64;
        let s = field.sample(at(theta))?;
        scan.push((theta, norm_of(&s)));
    }
    let vmax = scan.iter().fold(0.0f64, |a, v| a.max(v.1));
    let mut peaks: Vec<(f64, f64)> = Vec::new();
    for i in 0..SCAN {
        let prev = scan[(i + SCAN - 1) % SCAN].1;
        let next = scan[(i + 1) % SCAN].1;
        let (theta, v) = scan[i];
        if v <= prev && v <= next && v < 0.3 * vmax {
            peaks.push((theta, v));
        }
    }
    // Cluster nearby minima, keep the deepest of each cluster, cap at 4.
    peaks.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut clustered: Vec<(f64, f64)> = Vec::new();
    for p in peaks {
        match clustered.last_mut() {
            Some(last) if angle_dist(last.0, p.0) < 0.25 => {
                if p.1 < last.1 {
                    *last = p;
                }
            }
            _ => clustered.push(p),
        }
    }
    if clustered.len() > 1 && angle_dist(clustered[0].0, clustered[clustered.len() - 1].0) < 0.25
    {
        let last = *clustered.last().unwrap();
        if last.1 < clustered[0].1 {
            clustered[0] = last;
        }
        clustered.pop();
    }
    clustered.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    clustered.truncate(4);
    // Graded panels must be centered on the true angular minimum, not the
    // nearest scan node: a spike of width ≪ scan spacing would otherwise sit
    // off-center in a coarse panel and make the two cutoff depths disagree.
    let spacing = TAU / SCAN as f64;
    let mut peak_angles = Vec::with_capacity(clustered.len());
    for p in &clustered {
        peak_angles.push(refine_minimum(field, &at, p.0, spacing)?);
    }

    // Panel boundaries: uniform base plus graded ladders toward each peak.
    let mut boundaries: Vec<f64> = (0..48)
        .map(|i| TAU * (i as f64 + ANGULAR_OFFSET) / 48.0)
        .collect();
    for &pm in &peak_angles {
        let mut d = delta;
        while d < WINDOW {
            boundaries.push(wrap_angle(pm - d));
            boundaries.push(wrap_angle(pm + d));
            d *= GROW;
        }
    }
    boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    boundaries.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

    let (gx, gw) = gauss_legendre(4);
    let mut total = 0.0;
    let m = boundaries.len();
    for i in 0..m {
        let lo = boundaries[i];
        let hi = if i + 1 < m {
            boundaries[i + 1]
        } else {
            boundaries[0] + TAU
        };
        let len = hi - lo;
        if len < 1e-14 {
            continue;
        }
        let midpoint = wrap_angle(0.5 * (lo + hi));
        if peak_angles
            .iter()
            .any(|&pm| angle_dist(pm, midpoint) < delta * 0.999)
        {
            continue; // excluded sliver
        }
        for (k, &t) in gx.iter().enumerate() {
            let theta = 0.5 * (lo + hi) + 0.5 * len * t;
            total += 0.5 * len * gw[k] * sample_density(field, at(theta))?;
        }
    }
    Ok(total)
}

/// Golden-section minimization of θ ↦ |X| on [θ₀ − h, θ₀ + h], down to an
/// angular resolution far below the smallest cutoff depth.
fn refine_minimum<F: CharField>(
    field: &F,
    at: &impl Fn(f64) -> [f64; 2],
    theta0: f64,
    h: f64,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let g = |theta: f64| -> Result<f64> { Ok(norm_of(&field.sample(at(theta))?)) };
    let (mut lo, mut hi) = (theta0 - h, theta0 + h);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut gc, mut gd) = (g(c)?, g(d)?);
    while hi - lo > 1e-13 {
        if gc < gd {
            hi = d;
            d = c;
            gd = gc;
            c = hi - INV_PHI * (hi - lo);
            gc = g(c)?;
        } else {
            lo = c;
            c = d;
            gc = gd;
            d = lo + INV_PHI * (hi - lo);
            gd = g(d)?;
        }
    }
    Ok(wrap_angle(0.5 * (lo + hi)))
}

fn wrap_angle(theta: f64) -> f64 {
    theta.rem_euclid(std::f64::consts::TAU)
}

fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(std::f64::consts::TAU);
    d.min(std::f64::consts::TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charpoints::FixtureField;
    use crate::contact::builtin_model;
    use crate::expr::parse;
    use crate::surface::ChartDomain;

    /// Relative tolerance for closed-form density checks.
    const DENSITY_REL_TOL: f64 = 1e-9;

    fn heisenberg() -> ContactModel {
        builtin_model("heisenberg").unwrap()
    }

    fn polar_plane() -> SurfaceChart {
        SurfaceChart::new(
            ["u*cos(v)", "u*sin(v)", "0"],
            ChartDomain::Box {
                u: [0.05, 2.5],
                v: [0.0, std::f64::consts::TAU],
            },
            1,
            None,
            [false, true],
        )
        .unwrap()
    }

    fn cartesian_plane() -> SurfaceChart {
        SurfaceChart::new(
            ["u", "v", "0"],
            ChartDomain::Box {
                u: [-2.2, 2.2],
                v: [-2.2, 2.2],
            },
            1,
            None,
            [false, false],
        )
        .unwrap()
    }

    #[test]
    fn b_eps_matches_closed_forms() {
        for &eps in &[1.0, 0.5, 0.04] {
            assert!((b_eps(1.0, eps).unwrap() - eps.sqrt()).abs() < 1e-15);
            assert!((b_eps(-1.0, eps).unwrap() - eps.sqrt()).abs() < 1e-15);
            assert!((b_eps(0.0, eps).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = b_eps(0.6, 0.25).unwrap();
        assert!((v - 0.73_f64.sqrt()).abs() < 1e-15, "got {v}");
        assert!(matches!(
            b_eps(1.2, 0.5),
            Err(Error::DivergenceOutOfRange { .. })
        ));
        assert!(matches!(b_eps(0.5, 0.0), Err(Error::Domain { .. })));
        assert!(matches!(b_eps(0.5, 1.5), Err(Error::Domain { .. })));
    }

    /// −f_ε''(r), the K^εσ^ε density of the plane in the polar chart.
    fn plane_density(r: f64, eps: f64) -> f64 {
        -r * (r * r + 6.0 * eps) / (eps.sqrt() * (r * r + 4.0 * eps).powf(1.5))
    }

    #[test]
    fn brioschi_matches_plane_closed_form() {
        let model = heisenberg();
        let chart = polar_plane();
        for &(r, eps) in &[(1.0, 1.0), (0.7, 0.25), (1.0, 0.01), (1.6, 0.0625)] {
            let k = gaussian_curvature_eps(&chart, &model, eps, [r, 1.1]).unwrap();
            let p = chart.prepare(&model, [r, 1.1]).unwrap();
            let sigma = p.area_density_eps(eps).value();
            let want = plane_density(r, eps);
            assert!(
                (k * sigma - want).abs() <= DENSITY_REL_TOL * want.abs(),
                "r={r} eps={eps}: {} vs {want}",
                k * sigma
            );
        }
        // Spot values: density(1, 1) = −7/5^{3/2}; √ε·density(1, 0.01).
        let d11 = plane_density(1.0, 1.0);
        assert!((d11 + 7.0 / 5.0_f64.powf(1.5)).abs() < 1e-12);
        let d = 0.1 * plane_density(1.0, 0.01);
        assert!((d + 0.999_437_96).abs() < 1e-6, "√ε·density = {d}");
    }

    #[test]
    fn structure_equation_d_eta_equals_k_sigma() {
        let model = heisenberg();
        let chart = polar_plane();
        for &(r, eps) in &[(1.0, 1.0), (0.8, 0.25), (1.3, 0.0625)] {
            let uv = [r, 0.7];
            let deta = d_eta_eps_density(&chart, &model, eps, uv).unwrap();
            let want = plane_density(r, eps);
            assert!(
                (deta - want).abs() <= 1e-6 * want.abs(),
                "r={r} eps={eps}: dη = {deta}, Kσ = {want}"
            );
        }
    }

    #[test]
    fn frame_sample_matches_surface_of_revolution() {
        let model = heisenberg();
        let chart = polar_plane();
        let r: f64 = 1.0;
        let s = connection_form_eps(&chart, &model, 1.0, [r, 0.3]).unwrap();
        // b₁ ≡ 1, c₁ = 0, c₂ = f'/f = (4+2r²)/(r(4+r²)) = 1.2 at r = 1.
        assert!((s.b_eps - 1.0).abs() < 1e-12);
        assert!(s.c1.abs() < 1e-10, "c1 = {}", s.c1);
        assert!((s.c2 - 1.2).abs() < 1e-10, "c2 = {}", s.c2);
        // θ₁ = dr, θ₂ = f dθ = (ω|_S)/|X|.
        let f1 = r * (4.0 + r * r).sqrt() / 2.0;
        assert!((s.theta1[0] - 1.0).abs() < 1e-12 && s.theta1[1].abs() < 1e-12);
        assert!(s.theta2[0].abs() < 1e-12 && (s.theta2[1] - f1).abs() < 1e-12);
        // η¹ = −f' dθ.
        let fp = (4.0 + 2.0 * r * r) / (2.0 * (4.0 + r * r).sqrt());
        assert!(s.eta_eps[0].abs() < 1e-10 && (s.eta_eps[1] + fp).abs() < 1e-10);
        // Off-Σ guard.
        assert!(matches!(
            connection_form_eps(&chart, &model, 1.0, [1e-7, 0.3]),
            Err(Error::TooCloseToCharacteristicSet { .. })
        ));
    }

    #[test]
    fn b_eps_bounds_hold_on_sample_points() {
        let model = heisenberg();
        let chart = polar_plane();
        for i in 1..10 {
            let r = 0.2 * i as f64;
            let uv = [r, 0.9];
            let p = chart.prepare(&model, uv).unwrap();
            let x = p.x_norm2().value().sqrt();
            for &eps in &[1.0, 0.25, 0.01] {
                let b = connection_form_eps(&chart, &model, eps, uv).unwrap().b_eps;
                assert!(b >= eps.sqrt() - 1e-12 && b <= 1.0 + 1e-12);
                assert!((b - x).abs() <= eps.sqrt() + 1e-12);
            }
        }
    }

    #[test]
    fn sqrt_eps_eta_approaches_alpha() {
        let model = heisenberg();
        let chart = polar_plane();
        let r: f64 = 1.0;
        let eps = 1e-8;
        let s = connection_form_eps(&chart, &model, eps, [r, 1.9]).unwrap();
        // α = −r dθ on the plane.
        let scaled = [eps.sqrt() * s.eta_eps[0], eps.sqrt() * s.eta_eps[1]];
        assert!(scaled[0].abs() < 1e-6, "α_r = {}", scaled[0]);
        assert!((scaled[1] + r).abs() < 1e-6, "α_θ = {}", scaled[1]);
    }

    #[test]
    fn mu_density_in_both_charts() {
        let model = heisenberg();
        let polar = polar_plane();
        for &r in &[0.8, 1.3, 2.0] {
            let d = mu_minus_one_density(&polar, &model, [r, 0.4]).unwrap();
            assert!((d + 1.0).abs() < 1e-10, "polar μ density at r={r}: {d}");
        }
        let cart = cartesian_plane();
        for &(x, y) in &[(0.5, 0.0), (-0.3, 0.8), (1.1, -0.7)] {
            let r = f64::sqrt(x * x + y * y);
            let d = mu_minus_one_density(&cart, &model, [x, y]).unwrap();
            assert!(
                (d + 1.0 / r).abs() < 1e-10 * (1.0 / r),
                "cartesian μ density at ({x}, {y}): {d}"
            );
        }
    }

    #[test]
    fn zero_test_function_integrates_to_zero() {
        let model = heisenberg();
        let chart = cartesian_plane();
        let phi = parse("0", &["u", "v"]).unwrap();
        let job = MeasureJob {
            chart: &chart,
            model: &model,
            phi: TestFunction::Chart(&phi),
            support: Support::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            patches: vec![],
        };
        let opts = IntegralOptions {
            quad: QuadOptions {
                bulk: 8,
                angular: 8,
                radial: 16,
                ..QuadOptions::default()
            },
            ..IntegralOptions::default()
        };
        let (v, _) = integrate_measure(
            std::slice::from_ref(&job),
            DensityKind::MuMinusOne,
            None,
            &opts,
        )
        .unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mu_ball_integral_is_minus_two_pi_rho() {
        let model = heisenberg();
        let chart = cartesian_plane();
        let job = MeasureJob {
            chart: &chart,
            model: &model,
            phi: TestFunction::One,
            support: Support::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            patches: vec![],
        };
        let opts = IntegralOptions {
            quad: QuadOptions {
                bulk: 8,
                angular: 24,
                radial: 48,
                ..QuadOptions::default()
            },
            tolerance: 1e-3,
            levels: 2,
        };
        let (v, est) = integrate_measure(
            std::slice::from_ref(&job),
            DensityKind::MuMinusOne,
            None,
            &opts,
        )
        .unwrap();
        let want = -std::f64::consts::TAU;
        assert!((v - want).abs() < 1e-4, "∫μ over unit disc = {v}, est {est}");
    }

    #[test]
    fn ball_difference_integral_matches_appendix_value() {
        let model = heisenberg();
        let chart = cartesian_plane();
        let job = MeasureJob {
            chart: &chart,
            model: &model,
            phi: TestFunction::One,
            support: Support::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
            },
            patches: vec![],
        };
        let opts = IntegralOptions {
            quad: QuadOptions {
                bulk: 8,
                angular: 32,
                radial: 48,
                ..QuadOptions::default()
            },
            tolerance: 2e-3,
            levels: 3,
        };
        let eps = 0.01f64;
        let (v, est) = integrate_measure(
            std::slice::from_ref(&job),
            DensityKind::Difference,
            Some(eps),
            &opts,
        )
        .unwrap();
        // 2π(−(2ε+ρ²)/(√ε√(4ε+ρ²)) + ρ/√ε) + 2π at ρ = 1.
        let sq = eps.sqrt();
        let want = std::f64::consts::TAU
            * (-(2.0 * eps + 1.0) / (sq * (4.0 * eps + 1.0).sqrt()) + 1.0 / sq)
            + std::f64::consts::TAU;
        assert!(
            (v - want).abs() < 2e-3,
            "ball integral {v} vs closed form {want} (est {est})"
        );
    }

    #[test]
    fn probe_converges_for_isolated_points() {
        let radii = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        // k = 1: |X| = r, annulus integral = 2πΔr.
        let f = FixtureField::new(["x", "y"], [[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        let vals = inv_norm_integrability_probe(&f, [0.0, 0.0], &radii).unwrap();
        for (i, v) in vals.iter().enumerate() {
            let want = std::f64::consts::TAU * (radii[i] - radii[i + 1]);
            assert!((v - want).abs() < 1e-6 * want, "annulus {i}: {v} vs {want}");
        }
        // k = 3 normal form stays integrable.
        let f3 = FixtureField::new(["x", "y^3"], [[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        let vals = inv_norm_integrability_probe(&f3, [0.0, 0.0], &radii).unwrap();
        assert!(vals.iter().all(|v| v.is_finite() && *v > 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn probe_rejects_line_of_zeros() {
        let f = FixtureField::new(["x", "0"], [[-1.0, 1.0], [-1.0, 1.0]]).unwrap();
        let err =
            inv_norm_integrability_probe(&f, [0.0, 0.0], &[0.5, 0.25, 0.125]).unwrap_err();
        assert!(matches!(err, Error::DivergentTail { .. }), "got {err:?}");
    }

    #[test]
    fn convergence_rows_are_sorted_and_consistent() {
        let model = heisenberg();
        let chart = cartesian_plane();
        let phi = parse("(1 - (u^2 + v^2)/4)^2", &["u", "v"]).unwrap();
        let job = MeasureJob {
            chart: &chart,
            model: &model,
            phi: TestFunction::Chart(&phi),
            support: Support::Disk {
                center: [0.0, 0.0],
                radius: 2.0,
            },
            patches: vec![],
        };
        let opts = IntegralOptions {
            quad: QuadOptions {
                bulk: 8,
                angular: 24,
                radial: 40,
                ..QuadOptions::default()
            },
            tolerance: 5e-3,
            levels: 2,
        };
        let target = std::f64::consts::TAU; // 2π·φ(0)·ind, φ(0)=1, ind=+1
        let rows =
            convergence_table(std::slice::from_ref(&job), &[0.25, 1.0], target, &opts).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].epsilon > rows[1].epsilon);
        for row in &rows {
            assert!((row.target - target).abs() < 1e-12);
            assert!(row.integral.is_finite());
            assert!((row.abs_error - (row.integral - target).abs()).abs() < 1e-12);
        }
    }
}
