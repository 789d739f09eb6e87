//! Immersed surface charts: pullback metrics, area forms, and the
//! sub-Riemannian characteristic vector field.
//!
//! Everything here reduces to one worker, [`SurfaceChart::prepare`]: at a
//! chart point it composes ambient jets of the model data onto (u,v)-jets of
//! the immersion, decomposes ψ_u, ψ_v in the frame (f₁, f₂, f₀), and derives
//! the characteristic field X, its norm and divergence — all as second-order
//! jets. The expensive ambient work is ε-independent; per-ε first
//! fundamental forms are recombined from the stored decomposition
//! coefficients, so ε-sweeps reuse one [`PreparedPoint`] per node.
//!
//! Conventions: σ^ε(ψ_u, ψ_v) = orientation·√(EG − F²), and X solves
//! ι_X σ¹ = ω|_S, giving X = (ω(ψ_v), −ω(ψ_u))/σ¹(ψ_u, ψ_v) in the chart
//! basis. The divergence uses the exact identity div(X)·σ¹ = dω|_S rather
//! than differentiating X.

use crate::contact::ContactModel;
use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::Jet;

/// Chart parameter variables, in declaration order.
const CHART_VARS: [&str; 2] = ["u", "v"];

/// Parameter domain of a chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChartDomain {
    /// Axis-aligned box `[u_lo, u_hi] × [v_lo, v_hi]`.
    Box { u: [f64; 2], v: [f64; 2] },
    /// Disk of given center and radius in the (u,v) plane.
    Disk { center: [f64; 2], radius: f64 },
}

impl ChartDomain {
    /// Smallest axis-aligned box containing the domain.
    pub fn bounding_box(&self) -> [[f64; 2]; 2] {
        match *self {
            ChartDomain::Box { u, v } => [u, v],
            ChartDomain::Disk { center, radius } => [
                [center[0] - radius, center[0] + radius],
                [center[1] - radius, center[1] + radius],
            ],
        }
    }

    /// Whether `p` lies inside, shrunk by `margin` on every side.
    pub fn contains(&self, p: [f64; 2], margin: f64) -> bool {
        match *self {
            ChartDomain::Box { u, v } => {
                p[0] >= u[0] + margin
                    && p[0] <= u[1] - margin
                    && p[1] >= v[0] + margin
                    && p[1] <= v[1] - margin
            }
            ChartDomain::Disk { center, radius } => {
                let du = p[0] - center[0];
                let dv = p[1] - center[1];
                (du * du + dv * dv).sqrt() <= radius - margin
            }
        }
    }
}

/// A parametrized immersion ψ(u,v) of a 2D domain into the model chart,
/// with declared orientation, optional atlas partition weight, and
/// periodicity flags.
#[derive(Clone, Debug)]
pub struct SurfaceChart {
    immersion: [Expr; 3],
    domain: ChartDomain,
    orientation: f64,
    weight: Option<Expr>,
    periodic: [bool; 2],
}

/// Pointwise characteristic-field data.
#[derive(Clone, Copy, Debug)]
pub struct CharFieldSample {
    /// Coefficients of X in the chart basis (∂u, ∂v).
    pub x_chart: [f64; 2],
    /// Sub-Riemannian norm |X|_g ≥ 0; zero exactly at characteristic points.
    pub sr_norm: f64,
    /// div_{σ¹}(X), from the exact identity div(X)σ¹ = dω|_S.
    pub divergence: f64,
}

/// First fundamental form jets of g^ε pulled back to the chart.
#[derive(Clone, Copy, Debug)]
pub struct FirstFundamentalForm {
    pub e: Jet,
    pub f: Jet,
    pub g: Jet,
}

/// All ε-independent geometry at one chart point, as second-order
/// (u,v)-jets. Built once, consumed by every density kind and every ε.
#[derive(Clone, Debug)]
pub struct PreparedPoint {
    uv: [f64; 2],
    ambient: [f64; 3],
    orientation: f64,
    /// ∂ψ/∂u and ∂ψ/∂v component jets.
    psi_u: [Jet; 3],
    psi_v: [Jet; 3],
    /// Decompositions of ψ_u, ψ_v in the frame (f₁, f₂, f₀).
    dec_u: [Jet; 3],
    dec_v: [Jet; 3],
    /// ω(ψ_u), ω(ψ_v) for the normalized form.
    omega_u: Jet,
    omega_v: Jet,
    /// First fundamental form at ε = 1.
    e1: Jet,
    f1: Jet,
    g1: Jet,
    /// σ¹ chart density orientation·√(E¹G¹ − F¹²).
    sigma1: Jet,
    /// Characteristic field chart coefficients.
    x_u: Jet,
    x_v: Jet,
    /// |X|² = g(X, X) (kept squared: its square root is not smooth at Σ).
    x_norm2: Jet,
    /// div_{σ¹}(X).
    div: Jet,
    /// Partition weight value (1 when the chart has no weight).
    weight: f64,
}

impl SurfaceChart {
    /// Parses a chart from immersion expressions in the variables (u, v).
    /// `orientation` must be ±1; `weight`, if given, is a partition-of-unity
    /// factor for atlas integration.
    pub fn new(
        immersion: [&str; 3],
        domain: ChartDomain,
        orientation: i8,
        weight: Option<&str>,
        periodic: [bool; 2],
    ) -> Result<Self> {
        if orientation != 1 && orientation != -1 {
            return Err(Error::Domain {
                what: format!("chart orientation must be +1 or -1, got {orientation}"),
            });
        }
        match domain {
            ChartDomain::Box { u, v } => {
                if !(u[0] < u[1]) || !(v[0] < v[1]) {
                    return Err(Error::Domain {
                        what: "chart box domain is empty".into(),
                    });
                }
            }
            ChartDomain::Disk { radius, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::Domain {
                        what: "chart disk radius must be positive".into(),
                    });
                }
            }
        }
        Ok(SurfaceChart {
            immersion: [
                parse(immersion[0], &CHART_VARS)?,
                parse(immersion[1], &CHART_VARS)?,
                parse(immersion[2], &CHART_VARS)?,
            ],
            domain,
            orientation: orientation as f64,
            weight: weight.map(|w| parse(w, &CHART_VARS)).transpose()?,
            periodic,
        })
    }

    pub fn domain(&self) -> ChartDomain {
        self.domain
    }

    pub fn periodic(&self) -> [bool; 2] {
        self.periodic
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// Immersion value ψ(u, v).
    pub fn immersion_at(&self, uv: [f64; 2]) -> Result<[f64; 3]> {
        Ok([
            self.immersion[0].eval(&uv)?,
            self.immersion[1].eval(&uv)?,
            self.immersion[2].eval(&uv)?,
        ])
    }

    /// Partition weight at a point (1 for unweighted charts).
    pub fn weight_at(&self, uv: [f64; 2]) -> Result<f64> {
        match &self.weight {
            None => Ok(1.0),
            Some(w) => w.eval(&uv),
        }
    }

    /// Assembles all ε-independent pointwise geometry as order-2 jets.
    pub fn prepare(&self, model: &ContactModel, uv: [f64; 2]) -> Result<PreparedPoint> {
        // Immersion jets one order deeper than the target: partials drop one.
        let psi = [
            self.immersion[0].eval_jet_internal(&uv, 3)?,
            self.immersion[1].eval_jet_internal(&uv, 3)?,
            self.immersion[2].eval_jet_internal(&uv, 3)?,
        ];
        let ambient = [psi[0].value(), psi[1].value(), psi[2].value()];
        let aj = model.ambient_jets(ambient, 3)?;

        // Zero-value displacement jets for composing ambient data into (u,v).
        let disp = [
            psi[0].truncate(2) - ambient[0],
            psi[1].truncate(2) - ambient[1],
            psi[2].truncate(2) - ambient[2],
        ];
        let pull = |aj_field: &Jet| aj_field.compose(&disp);
        let pull3 = |f: &[Jet; 3]| [pull(&f[0]), pull(&f[1]), pull(&f[2])];

        let omega = pull3(&aj.omega);
        let f1 = pull3(&aj.f1);
        let f2 = pull3(&aj.f2);
        let f0 = pull3(&aj.f0);
        let mut domega = [[Jet::constant(2, 2, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    domega[i][j] = pull(&aj.domega[i][j]);
                }
            }
        }

        let psi_u = [
            psi[0].partial_jet(0),
            psi[1].partial_jet(0),
            psi[2].partial_jet(0),
        ];
        let psi_v = [
            psi[0].partial_jet(1),
            psi[1].partial_jet(1),
            psi[2].partial_jet(1),
        ];

        let dot3 = |a: &[Jet; 3], b: &[Jet; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let omega_u = dot3(&omega, &psi_u);
        let omega_v = dot3(&omega, &psi_v);

        // Frame-decomposition solves: [f₁ f₂ f₀]·dec = ψ_derivative.
        let frame_rows = [
            [f1[0], f2[0], f0[0]],
            [f1[1], f2[1], f0[1]],
            [f1[2], f2[2], f0[2]],
        ];
        let singular = || Error::SingularSystem {
            what: format!("frame degenerates along the surface at (u,v) = {uv:?}"),
        };
        let dec_u = solve3_jets(&frame_rows, &psi_u).ok_or_else(singular)?;
        let dec_v = solve3_jets(&frame_rows, &psi_v).ok_or_else(singular)?;

        // First fundamental form of g¹ (frame decomposition is orthonormal
        // with the Reeb direction entering at weight 1 when ε = 1).
        let e1 = dot3(&dec_u, &dec_u);
        let f1c = dot3(&dec_u, &dec_v);
        let g1 = dot3(&dec_v, &dec_v);
        let w1 = e1 * g1 - f1c * f1c;
        if !(w1.value() > 0.0) {
            return Err(Error::DegenerateImmersion { at: uv });
        }
        let sigma1 = w1.sqrt() * self.orientation;

        // dω(ψ_u, ψ_v), the exact divergence numerator.
        let mut dw_uv = Jet::constant(2, 2, 0.0);
        for i in 0..3 {
            for j in (i + 1)..3 {
                dw_uv = dw_uv + domega[i][j] * (psi_u[i] * psi_v[j] - psi_u[j] * psi_v[i]);
            }
        }
        let sigma1_inv = sigma1.recip();
        let div = dw_uv * sigma1_inv;

        // ι_X σ¹ = ω|_S in the chart basis.
        let x_u = omega_v * sigma1_inv;
        let x_v = -(omega_u * sigma1_inv);
        let x_norm2 = e1 * x_u * x_u + f1c * x_u * x_v * 2.0 + g1 * x_v * x_v;

        Ok(PreparedPoint {
            uv,
            ambient,
            orientation: self.orientation,
            psi_u,
            psi_v,
            dec_u,
            dec_v,
            omega_u,
            omega_v,
            e1,
            f1: f1c,
            g1,
            sigma1,
            x_u,
            x_v,
            x_norm2,
            div,
            weight: self.weight_at(uv)?,
        })
    }

    /// Jets of (E, F, G) for g^ε pulled back by ψ, truncated to
    /// `jet_order` ∈ 0..=2.
    pub fn first_fundamental_form(
        &self,
        model: &ContactModel,
        eps: f64,
        uv: [f64; 2],
        jet_order: usize,
    ) -> Result<FirstFundamentalForm> {
        if jet_order > 2 {
            return Err(Error::OrderUnsupported {
                requested: jet_order,
                max: 2,
            });
        }
        check_eps(eps)?;
        let p = self.prepare(model, uv)?;
        let (e, f, g) = p.fundamental_form_eps(eps);
        Ok(FirstFundamentalForm {
            e: e.truncate(jet_order),
            f: f.truncate(jet_order),
            g: g.truncate(jet_order),
        })
    }

    /// Signed chart density of σ^ε: orientation·√(EG − F²).
    pub fn area_density(&self, model: &ContactModel, eps: f64, uv: [f64; 2]) -> Result<f64> {
        check_eps(eps)?;
        let p = self.prepare(model, uv)?;
        Ok(p.area_density_eps(eps).value())
    }

    /// Characteristic-field sample at a point.
    pub fn characteristic_field(
        &self,
        model: &ContactModel,
        uv: [f64; 2],
    ) -> Result<CharFieldSample> {
        let p = self.prepare(model, uv)?;
        Ok(p.char_field_sample())
    }

    /// Applies the complex structure J^ε of (g^ε|_S, σ^ε) to a chart
    /// tangent vector: the unique map with σ^ε(v, Jw) = g^ε(v, w).
    pub fn complex_structure(
        &self,
        model: &ContactModel,
        eps: f64,
        uv: [f64; 2],
        tangent: [f64; 2],
    ) -> Result<[f64; 2]> {
        check_eps(eps)?;
        let p = self.prepare(model, uv)?;
        let (e, f, g) = p.fundamental_form_eps(eps);
        let s = p.area_density_eps(eps).value();
        let (e, f, g) = (e.value(), f.value(), g.value());
        let (wu, wv) = (tangent[0], tangent[1]);
        Ok([-(f * wu + g * wv) / s, (e * wu + f * wv) / s])
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what: format!("metric parameter ε must be positive, got {eps}"),
        })
    }
}

impl PreparedPoint {
    pub fn uv(&self) -> [f64; 2] {
        self.uv
    }

    pub fn ambient(&self) -> [f64; 3] {
        self.ambient
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// Partition weight value at the point.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// (E, F, G) jets of g^ε from the stored frame decompositions:
    /// E_ε = a² + b² + c²/ε for ψ_u = a f₁ + b f₂ + c f₀, etc.
    pub fn fundamental_form_eps(&self, eps: f64) -> (Jet, Jet, Jet) {
        let k = 1.0 / eps;
        let form = |p: &[Jet; 3], q: &[Jet; 3]| {
            p[0] * q[0] + p[1] * q[1] + p[2] * q[2] * k
        };
        (
            form(&self.dec_u, &self.dec_u),
            form(&self.dec_u, &self.dec_v),
            form(&self.dec_v, &self.dec_v),
        )
    }

    /// Signed σ^ε chart density jet orientation·√(E_εG_ε − F_ε²).
    pub fn area_density_eps(&self, eps: f64) -> Jet {
        let (e, f, g) = self.fundamental_form_eps(eps);
        (e * g - f * f).sqrt() * self.orientation
    }

    /// σ¹ density jet (the ε = 1 special case, precomputed).
    pub fn sigma1(&self) -> Jet {
        self.sigma1
    }

    /// Chart-coefficient jets of the characteristic field.
    pub fn x_jets(&self) -> [Jet; 2] {
        [self.x_u, self.x_v]
    }

    /// |X|² jet (square kept: |X| itself is not smooth across Σ).
    pub fn x_norm2(&self) -> Jet {
        self.x_norm2
    }

    /// div_{σ¹}(X) jet.
    pub fn div(&self) -> Jet {
        self.div
    }

    /// (E, F, G) jets at ε = 1.
    pub fn fundamental_form_1(&self) -> (Jet, Jet, Jet) {
        (self.e1, self.f1, self.g1)
    }

    /// ω(ψ_u), ω(ψ_v) jets of the normalized form (the components of ω|_S).
    pub fn omega_restricted(&self) -> [Jet; 2] {
        [self.omega_u, self.omega_v]
    }

    /// Frame decomposition jets of (ψ_u, ψ_v) in (f₁, f₂, f₀).
    pub fn decompositions(&self) -> (&[Jet; 3], &[Jet; 3]) {
        (&self.dec_u, &self.dec_v)
    }

    /// ∂ψ/∂u, ∂ψ/∂v component jets.
    pub fn tangents(&self) -> (&[Jet; 3], &[Jet; 3]) {
        (&self.psi_u, &self.psi_v)
    }

    /// Pointwise characteristic-field values.
    pub fn char_field_sample(&self) -> CharFieldSample {
        CharFieldSample {
            x_chart: [self.x_u.value(), self.x_v.value()],
            sr_norm: self.x_norm2.value().max(0.0).sqrt(),
            divergence: self.div.value(),
        }
    }
}

/// Christoffel symbols Γ^k_{ij} of the metric [[E,F],[F,G]] as jets one
/// order below the form jets; index order is `gamma[k][i][j]`.
pub(crate) fn christoffel(e: &Jet, f: &Jet, g: &Jet) -> [[[Jet; 2]; 2]; 2] {
    let met = [[*e, *f], [*f, *g]];
    let w = (*e) * (*g) - (*f) * (*f);
    let w_inv = w.recip();
    let inv = [
        [(*g) * w_inv, -((*f) * w_inv)],
        [-((*f) * w_inv), (*e) * w_inv],
    ];
    let ord = e.order() - 1;
    // ∂_i g_{jl} jets, one order down.
    let dmet = |i: usize, j: usize, l: usize| met[j][l].partial_jet(i);
    let mut gamma = [[[Jet::constant(e.nvars(), ord, 0.0); 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(e.nvars(), ord, 0.0);
                for l in 0..2 {
                    let sum = dmet(i, j, l) + dmet(j, i, l) - dmet(l, i, j);
                    acc = acc + inv[k][l].truncate(ord) * sum * 0.5;
                }
                gamma[k][i][j] = acc;
            }
        }
    }
    gamma
}

fn det3_jets(m: &[[Jet; 3]; 3]) -> Jet {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cramer solve of `m·x = rhs` in jet arithmetic; `None` when the
/// determinant's value is negligible.
fn solve3_jets(m: &[[Jet; 3]; 3], rhs: &[Jet; 3]) -> Option<[Jet; 3]> {
    let det = det3_jets(m);
    if det.value().abs() <= 1e-12 {
        return None;
    }
    let det_inv = det.recip();
    let mut x = [det_inv; 3];
    for (col, slot) in x.iter_mut().enumerate() {
        let mut mc = *m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *slot = det3_jets(&mc) * det_inv;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::builtin_model;

    fn heisenberg_plane_polar() -> SurfaceChart {
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

    fn heisenberg_plane_cartesian() -> SurfaceChart {
        SurfaceChart::new(
            ["u", "v", "0"],
            ChartDomain::Box {
                u: [-2.5, 2.5],
                v: [-2.5, 2.5],
            },
            1,
            None,
            [false, false],
        )
        .unwrap()
    }

    fn f_eps(r: f64, eps: f64) -> f64 {
        r * (1.0 + r * r / (4.0 * eps)).sqrt()
    }

    #[test]
    fn polar_plane_fundamental_form_is_surface_of_revolution() {
        let model = builtin_model("heisenberg").unwrap();
        let chart = heisenberg_plane_polar();
        for (r, eps) in [(0.3, 1.0), (1.0, 1.0), (1.7, 0.25), (0.8, 0.04)] {
            let ff = chart
                .first_fundamental_form(&model, eps, [r, 1.1], 0)
                .unwrap();
            assert!((ff.e.value() - 1.0).abs() < 1e-12, "E at r={r}");
            assert!(ff.f.value().abs() < 1e-12, "F at r={r}");
            let g_expect = f_eps(r, eps).powi(2);
            assert!(
                (ff.g.value() - g_expect).abs() < 1e-10 * g_expect.max(1.0),
                "G = {} expected {}",
                ff.g.value(),
                g_expect
            );
        }
        // Worked value: r = 1, ε = 1 gives G = 1.25.
        let ff = chart
            .first_fundamental_form(&model, 1.0, [1.0, 0.4], 0)
            .unwrap();
        assert!((ff.g.value() - 1.25).abs() < 1e-12);
        let density = chart.area_density(&model, 1.0, [1.0, 0.4]).unwrap();
        assert!((density - 1.25f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn divergence_identity_and_values_on_the_plane() {
        let model = builtin_model("heisenberg").unwrap();
        let chart = heisenberg_plane_cartesian();
        for p in [
            [0.7, -0.4],
            [1.9, 2.1],
            [-0.03, 0.02],
            [-2.0, -1.0],
            [0.5, 0.0],
        ] {
            let s = chart.characteristic_field(&model, p).unwrap();
            let identity = s.divergence.powi(2) + s.sr_norm.powi(2);
            assert!((identity - 1.0).abs() < 1e-12, "div²+|X|² = {identity}");
            let r2 = p[0] * p[0] + p[1] * p[1];
            let div_expect = 2.0 / (4.0 + r2).sqrt();
            assert!(
                (s.divergence - div_expect).abs() < 1e-12,
                "div {} expected {div_expect}",
                s.divergence
            );
            // X is radial outward with |X| = r/√(4+r²).
            let norm_expect = r2.sqrt() / (4.0 + r2).sqrt();
            assert!((s.sr_norm - norm_expect).abs() < 1e-12);
        }
    }

    #[test]
    fn characteristic_point_at_plane_origin() {
        let model = builtin_model("heisenberg").unwrap();
        let chart = heisenberg_plane_cartesian();
        let s = chart.characteristic_field(&model, [0.0, 0.0]).unwrap();
        assert_eq!(s.sr_norm, 0.0);
        assert!((s.divergence.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn x_is_horizontal_and_tangent() {
        let model = builtin_model("heisenberg").unwrap();
        let chart = heisenberg_plane_cartesian();
        for p in [[1.2, 0.3], [-0.8, 1.7]] {
            let pp = chart.prepare(&model, p).unwrap();
            let s = pp.char_field_sample();
            let [wu, wv] = pp.omega_restricted();
            let pairing = s.x_chart[0] * wu.value() + s.x_chart[1] * wv.value();
            assert!(pairing.abs() < 1e-14, "ω(dψX) = {pairing}");
        }
    }

    #[test]
    fn complex_structure_rotates() {
        let model = builtin_model("heisenberg").unwrap();
        let polar = heisenberg_plane_polar();
        let (r, eps) = (1.3, 0.5);
        let j_dr = polar.complex_structure(&model, eps, [r, 0.7], [1.0, 0.0]).unwrap();
        assert!(j_dr[0].abs() < 1e-12);
        assert!((j_dr[1] - 1.0 / f_eps(r, eps)).abs() < 1e-12, "J∂r = {j_dr:?}");
        // J² = −id on an arbitrary tangent vector in the Cartesian chart.
        let cart = heisenberg_plane_cartesian();
        let w = [0.6, -1.1];
        let jw = cart.complex_structure(&model, 0.3, [0.9, 0.2], w).unwrap();
        let jjw = cart.complex_structure(&model, 0.3, [0.9, 0.2], jw).unwrap();
        assert!((jjw[0] + w[0]).abs() < 1e-12 && (jjw[1] + w[1]).abs() < 1e-12);
    }

    #[test]
    fn orientation_flip_negates_density_and_field() {
        let model = builtin_model("heisenberg").unwrap();
        let flipped = SurfaceChart::new(
            ["u", "v", "0"],
            ChartDomain::Box {
                u: [-2.5, 2.5],
                v: [-2.5, 2.5],
            },
            -1,
            None,
            [false, false],
        )
        .unwrap();
        let straight = heisenberg_plane_cartesian();
        let p = [0.8, -0.6];
        let d_plus = straight.area_density(&model, 1.0, p).unwrap();
        let d_minus = flipped.area_density(&model, 1.0, p).unwrap();
        assert!((d_plus + d_minus).abs() < 1e-14 && d_plus > 0.0);
        let s_plus = straight.characteristic_field(&model, p).unwrap();
        let s_minus = flipped.characteristic_field(&model, p).unwrap();
        assert!((s_plus.x_chart[0] + s_minus.x_chart[0]).abs() < 1e-14);
        assert!((s_plus.divergence + s_minus.divergence).abs() < 1e-14);
        assert!((s_plus.sr_norm - s_minus.sr_norm).abs() < 1e-14);
    }

    #[test]
    fn degenerate_immersion_is_reported() {
        let model = builtin_model("heisenberg").unwrap();
        let collapsed = SurfaceChart::new(
            ["u", "u", "0"],
            ChartDomain::Box {
                u: [-1.0, 1.0],
                v: [-1.0, 1.0],
            },
            1,
            None,
            [false, false],
        )
        .unwrap();
        assert!(matches!(
            collapsed.prepare(&model, [0.3, 0.3]),
            Err(Error::DegenerateImmersion { .. })
        ));
    }

    #[test]
    fn fundamental_form_order_cap() {
        let model = builtin_model("heisenberg").unwrap();
        let chart = heisenberg_plane_cartesian();
        assert!(matches!(
            chart.first_fundamental_form(&model, 1.0, [0.1, 0.1], 3),
            Err(Error::OrderUnsupported { .. })
        ));
    }

    #[test]
    fn christoffel_matches_polar_euclidean() {
        // Metric du² + u²dv² (flat polar): Γ^u_{vv} = −u, Γ^v_{uv} = 1/u.
        let u0 = 1.7;
        let e = Jet::constant(2, 2, 1.0);
        let f = Jet::constant(2, 2, 0.0);
        let mut g = Jet::variable(2, 2, 0, u0);
        g = g * g;
        let gamma = christoffel(&e, &f, &g);
        assert!((gamma[0][1][1].value() + u0).abs() < 1e-12);
        assert!((gamma[1][0][1].value() - 1.0 / u0).abs() < 1e-12);
        assert!((gamma[1][1][0].value() - 1.0 / u0).abs() < 1e-12);
        assert!(gamma[0][0][0].value().abs() < 1e-14);
    }
}
