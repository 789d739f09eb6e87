//! Contact-manifold chart models: validation, normalization, the Reeb
//! field, and the Riemannian approximating metrics.
//!
//! A model is a chart box in ℝ³ carrying a contact form ω (three coefficient
//! fields) and a declared g-orthonormal, positively oriented horizontal frame
//! (f₁, f₂) spanning ker ω. The sub-Riemannian metric is never stored: the
//! frame *defines* it. Normalization rescales ω pointwise by
//! s = 1/dω(f₁, f₂); the scale is recomputed as a jet inside every
//! evaluation, so normalizing twice changes nothing and the scale's
//! derivatives enter all downstream formulas automatically.
//!
//! dω is always derived from jets of ω's coefficients, never supplied by the
//! user, which keeps ω and dω consistent by construction.

use crate::error::{Error, Result};
use crate::expr::{parse, Expr};
use crate::jet::Jet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Absolute tolerance for algebraic identities (ω(fᵢ) = 0, dω(f₁,f₂) = 1,
/// contact nondegeneracy) on validation grids. Model data is exact
/// expressions, so identities hold to machine precision; this loose bound
/// catches typos, not roundoff.
pub const ALGEBRAIC_TOL: f64 = 1e-10;

/// Validation grid resolution per axis (inclusive of box faces).
const GRID_POINTS_PER_AXIS: usize = 11;

/// Number of uniform-random validation points per domain.
const RANDOM_VALIDATION_POINTS: usize = 1000;

/// Default seed for the random half of the validation sweep. The seed
/// affects only which points are checked, never any computed result.
pub const DEFAULT_VALIDATION_SEED: u64 = 17;

/// Ambient chart coordinates, in declaration order.
const AMBIENT_VARS: [&str; 3] = ["x", "y", "z"];

/// A 3D contact sub-Riemannian chart model.
#[derive(Clone, Debug)]
pub struct ContactModel {
    omega: [Expr; 3],
    f1: [Expr; 3],
    f2: [Expr; 3],
    domain: [[f64; 2]; 3],
    normalized: bool,
}

/// Jets at one ambient point of everything the geometry needs, with the
/// normalization scale already folded in.
///
/// `omega`, `f1`, `f2`, and `scale` carry jets of the constructed order;
/// `domega` and `f0` lose one order to the exterior derivative.
#[derive(Clone, Debug)]
pub(crate) struct AmbientJets {
    /// Normalized contact-form coefficients s·ωⱼ.
    pub omega: [Jet; 3],
    /// Curl matrix of the normalized form: D\[i\]\[j\] = ∂ᵢ(sωⱼ) − ∂ⱼ(sωᵢ).
    pub domega: [[Jet; 3]; 3],
    pub f1: [Jet; 3],
    pub f2: [Jet; 3],
    /// Reeb-field components of the normalized form.
    pub f0: [Jet; 3],
    /// Normalization scale s = 1/dω_raw(f₁, f₂).
    pub scale: Jet,
}

impl ContactModel {
    /// Parses a model from coefficient expressions in the variables
    /// (x, y, z). The result is unnormalized; call [`ContactModel::normalize`]
    /// before using geometric operations.
    pub fn new(
        omega: [&str; 3],
        f1: [&str; 3],
        f2: [&str; 3],
        domain: [[f64; 2]; 3],
    ) -> Result<Self> {
        for axis in &domain {
            if !(axis[0] < axis[1]) {
                return Err(Error::Domain {
                    what: format!("chart domain axis [{}, {}] is empty", axis[0], axis[1]),
                });
            }
        }
        let parse3 = |texts: [&str; 3]| -> Result<[Expr; 3]> {
            Ok([
                parse(texts[0], &AMBIENT_VARS)?,
                parse(texts[1], &AMBIENT_VARS)?,
                parse(texts[2], &AMBIENT_VARS)?,
            ])
        };
        Ok(ContactModel {
            omega: parse3(omega)?,
            f1: parse3(f1)?,
            f2: parse3(f2)?,
            domain,
            normalized: false,
        })
    }

    /// Chart domain box, one `[lo, hi]` pair per ambient coordinate.
    pub fn domain(&self) -> [[f64; 2]; 3] {
        self.domain
    }

    /// Whether the validation sweep has succeeded on this model.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Validates the contact invariants on an 11³ grid plus 1000 seeded
    /// random points and returns the normalized model (default seed).
    pub fn normalize(self) -> Result<ContactModel> {
        self.normalize_seeded(DEFAULT_VALIDATION_SEED)
    }

    /// [`ContactModel::normalize`] with an explicit seed for the random
    /// validation points. The seed never influences computed geometry.
    pub fn normalize_seeded(self, seed: u64) -> Result<ContactModel> {
        let n = GRID_POINTS_PER_AXIS;
        let axis = |k: usize, i: usize| {
            let [lo, hi] = self.domain[k];
            lo + (hi - lo) * (i as f64) / ((n - 1) as f64)
        };
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    self.validate_at([axis(0, i), axis(1, j), axis(2, k)])?;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_VALIDATION_POINTS {
            let p = [
                rng.gen_range(self.domain[0][0]..=self.domain[0][1]),
                rng.gen_range(self.domain[1][0]..=self.domain[1][1]),
                rng.gen_range(self.domain[2][0]..=self.domain[2][1]),
            ];
            self.validate_at(p)?;
        }
        Ok(ContactModel {
            normalized: true,
            ..self
        })
    }

    /// Checks the pointwise invariants at one validation point.
    fn validate_at(&self, p: [f64; 3]) -> Result<()> {
        // `ambient_jets_unchecked` already rejects degenerate or
        // negatively-oriented pairings and a vanishing contact 3-form.
        let aj = self.ambient_jets_unchecked(p, 1)?;
        for frame in [&aj.f1, &aj.f2] {
            let pairing: f64 = (0..3).map(|i| aj.omega[i].value() * frame[i].value()).sum();
            if pairing.abs() > ALGEBRAIC_TOL {
                return Err(Error::Domain {
                    what: format!(
                        "frame is not horizontal: ω(fᵢ) = {pairing:e} at {p:?} (tolerance {ALGEBRAIC_TOL:e})"
                    ),
                });
            }
        }
        let norm_pairing = two_form_value(&aj.domega, &aj.f1, &aj.f2);
        if (norm_pairing - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::ContactDegenerate {
                at: p,
                value: norm_pairing,
            });
        }
        Ok(())
    }

    /// Normalization scale s = 1/dω(f₁, f₂) of the *raw* form at a point.
    pub fn scale_at(&self, point: [f64; 3]) -> Result<f64> {
        Ok(self.ambient_jets_unchecked(point, 1)?.scale.value())
    }

    /// Reeb field f₀ of the normalized form at a point: the unique solution
    /// of ω(f₀) = 1, dω(f₀, b₁) = 0, dω(f₀, b₂) = 0, solved as a 3×3 system
    /// with completion directions b₁, b₂ picked among the coordinate axes.
    pub fn reeb_field(&self, point: [f64; 3]) -> Result<[f64; 3]> {
        self.require_normalized()?;
        // Rank the coordinate axes by how strongly dω pairs with them and
        // complete the basis with the two strongest.
        let aj = self.ambient_jets_unchecked(point, 1)?;
        let d = curl_values(&aj.domega);
        let mut axes: Vec<(f64, usize)> = (0..3)
            .map(|k| {
                let col = apply3(&d, unit3(k));
                (-(col[0].powi(2) + col[1].powi(2) + col[2].powi(2)), k)
            })
            .collect();
        axes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        self.reeb_field_with_basis(point, unit3(axes[0].1), unit3(axes[1].1))
    }

    /// [`ContactModel::reeb_field`] with caller-supplied completion
    /// directions; any pair keeping the system nonsingular yields the same
    /// Reeb vector (uniqueness).
    pub fn reeb_field_with_basis(
        &self,
        point: [f64; 3],
        b1: [f64; 3],
        b2: [f64; 3],
    ) -> Result<[f64; 3]> {
        self.require_normalized()?;
        let aj = self.ambient_jets_unchecked(point, 1)?;
        let d = curl_values(&aj.domega);
        let rows = [
            [aj.omega[0].value(), aj.omega[1].value(), aj.omega[2].value()],
            apply3(&d, b1),
            apply3(&d, b2),
        ];
        solve3(&rows, [1.0, 0.0, 0.0]).ok_or_else(|| Error::SingularSystem {
            what: format!("Reeb system is singular at {point:?}"),
        })
    }

    /// Evaluates g^ε(v, w) at a point: decompose both vectors in the frame
    /// (f₁, f₂, f₀) and return v₁w₁ + v₂w₂ + (1/ε)v₀w₀.
    pub fn metric_eps(
        &self,
        eps: f64,
        point: [f64; 3],
        v: [f64; 3],
        w: [f64; 3],
    ) -> Result<f64> {
        self.require_normalized()?;
        if !(eps > 0.0) {
            return Err(Error::Domain {
                what: format!("metric parameter ε must be positive, got {eps}"),
            });
        }
        let aj = self.ambient_jets_unchecked(point, 1)?;
        let cols: [[f64; 3]; 3] = [
            [aj.f1[0].value(), aj.f1[1].value(), aj.f1[2].value()],
            [aj.f2[0].value(), aj.f2[1].value(), aj.f2[2].value()],
            [aj.f0[0].value(), aj.f0[1].value(), aj.f0[2].value()],
        ];
        // Rows of the system are the frame vectors as matrix columns.
        let m = [
            [cols[0][0], cols[1][0], cols[2][0]],
            [cols[0][1], cols[1][1], cols[2][1]],
            [cols[0][2], cols[1][2], cols[2][2]],
        ];
        let singular = || Error::SingularSystem {
            what: format!("frame (f₁, f₂, f₀) is degenerate at {point:?}"),
        };
        let a = solve3(&m, v).ok_or_else(singular)?;
        let b = solve3(&m, w).ok_or_else(singular)?;
        Ok(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] / eps)
    }

    /// Full normalized jet bundle at a point; `order` is the jet order of
    /// ω, f₁, f₂ and the scale (dω and f₀ carry one order less).
    pub(crate) fn ambient_jets(&self, x0: [f64; 3], order: usize) -> Result<AmbientJets> {
        self.require_normalized()?;
        self.ambient_jets_unchecked(x0, order)
    }

    fn ambient_jets_unchecked(&self, x0: [f64; 3], order: usize) -> Result<AmbientJets> {
        assert!((1..=3).contains(&order), "ambient jet order out of range");
        let eval3 = |exprs: &[Expr; 3], ord: usize| -> Result<[Jet; 3]> {
            Ok([
                exprs[0].eval_jet_internal(&x0, ord)?,
                exprs[1].eval_jet_internal(&x0, ord)?,
                exprs[2].eval_jet_internal(&x0, ord)?,
            ])
        };
        // One extra order on raw ω: the scale consumes a derivative, and the
        // normalized curl consumes another.
        let omega_raw = eval3(&self.omega, order + 1)?;
        let f1 = eval3(&self.f1, order)?;
        let f2 = eval3(&self.f2, order)?;

        let d_raw = curl_jets(&omega_raw); // order `order`
        let f1t = [f1[0], f1[1], f1[2]];
        let pairing = two_form_jet(&d_raw, &f1t, &f2); // dω_raw(f₁, f₂)
        let pv = pairing.value();
        if pv.abs() <= ALGEBRAIC_TOL {
            return Err(Error::ContactDegenerate {
                at: x0,
                value: pv,
            });
        }
        if pv < 0.0 {
            return Err(Error::Orientation { at: x0, value: pv });
        }
        let scale = pairing.recip(); // order `order`

        let omega = [
            scale * omega_raw[0].truncate(order),
            scale * omega_raw[1].truncate(order),
            scale * omega_raw[2].truncate(order),
        ];
        let domega = curl_jets(&omega); // order `order − 1`

        // Reeb field: kernel direction of the antisymmetric curl matrix,
        // normalized by ω. The denominator ω(c) is exactly the ω∧dω
        // coefficient, so its vanishing is the contact-condition failure.
        let c = [
            domega[1][2],
            -domega[0][2],
            domega[0][1],
        ];
        let den = omega[0].truncate(order - 1) * c[0]
            + omega[1].truncate(order - 1) * c[1]
            + omega[2].truncate(order - 1) * c[2];
        if den.value().abs() <= ALGEBRAIC_TOL {
            return Err(Error::ContactDegenerate {
                at: x0,
                value: den.value(),
            });
        }
        let den_inv = den.recip();
        let f0 = [c[0] * den_inv, c[1] * den_inv, c[2] * den_inv];

        Ok(AmbientJets {
            omega,
            domega,
            f1,
            f2,
            f0,
            scale,
        })
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "model must pass normalize() before geometric evaluation".into(),
            })
        }
    }
}

/// Catalog of shipped models. `"heisenberg"` is the first Heisenberg group
/// on [−3, 3]³: ω = dz + (x dy − y dx)/2 with frame f₁ = ∂x + (y/2)∂z,
/// f₂ = ∂y − (x/2)∂z, already normalized (dω(f₁, f₂) = 1 identically).
pub fn builtin_model(name: &str) -> Result<ContactModel> {
    match name {
        "heisenberg" => ContactModel::new(
            ["-y/2", "x/2", "1"],
            ["1", "0", "y/2"],
            ["0", "1", "-x/2"],
            [[-3.0, 3.0], [-3.0, 3.0], [-3.0, 3.0]],
        )?
        .normalize(),
        _ => Err(Error::UnknownModel { name: name.into() }),
    }
}

// ---------------------------------------------------------------------------
// Small dense linear algebra (3×3 Cramer) and form contractions
// ---------------------------------------------------------------------------

fn unit3(k: usize) -> [f64; 3] {
    let mut e = [0.0; 3];
    e[k] = 1.0;
    e
}

fn apply3(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Cramer solve of `m·x = rhs`; `None` when the determinant is negligible
/// against the Hadamard bound of the rows.
fn solve3(m: &[[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = det3(m);
    let hadamard: f64 = m
        .iter()
        .map(|row| (row[0].powi(2) + row[1].powi(2) + row[2].powi(2)).sqrt())
        .product();
    if det.abs() <= 1e-12 * hadamard.max(f64::MIN_POSITIVE) {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, slot) in x.iter_mut().enumerate() {
        let mut mc = *m;
        for row in 0..3 {
            mc[row][col] = rhs[row];
        }
        *slot = det3(&mc) / det;
    }
    Some(x)
}

/// Curl matrix D\[i\]\[j\] = ∂ᵢwⱼ − ∂ⱼwᵢ from coefficient jets; entries lose
/// one jet order.
fn curl_jets(w: &[Jet; 3]) -> [[Jet; 3]; 3] {
    let zero = Jet::constant(w[0].nvars(), w[0].order() - 1, 0.0);
    let mut d = [[zero; 3]; 3];
    for i in 0..3 {
        for j in (i + 1)..3 {
            let entry = w[j].partial_jet(i) - w[i].partial_jet(j);
            d[i][j] = entry;
            d[j][i] = -entry;
        }
    }
    d
}

fn curl_values(d: &[[Jet; 3]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = d[i][j].value();
        }
    }
    m
}

/// dω(u, v) = Σ_{i<j} D_{ij}(uᵢvⱼ − uⱼvᵢ) at jet level.
fn two_form_jet(d: &[[Jet; 3]; 3], u: &[Jet; 3], v: &[Jet; 3]) -> Jet {
    let mut acc = Jet::constant(d[0][1].nvars(), d[0][1].order(), 0.0);
    for i in 0..3 {
        for j in (i + 1)..3 {
            let ut = u[i].truncate(d[i][j].order());
            let vt = v[j].truncate(d[i][j].order());
            let uj = u[j].truncate(d[i][j].order());
            let vi = v[i].truncate(d[i][j].order());
            acc = acc + d[i][j] * (ut * vt - uj * vi);
        }
    }
    acc
}

fn two_form_value(d: &[[Jet; 3]; 3], u: &[Jet; 3], v: &[Jet; 3]) -> f64 {
    let mut acc = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            acc += d[i][j].value()
                * (u[i].value() * v[j].value() - u[j].value() * v[i].value());
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_passes_validation_with_unit_scale() {
        let m = builtin_model("heisenberg").unwrap();
        assert!(m.is_normalized());
        for p in [[0.0, 0.0, 0.0], [1.0, -2.0, 0.5], [-3.0, 3.0, 3.0]] {
            let s = m.scale_at(p).unwrap();
            assert!((s - 1.0).abs() < 1e-14, "scale {s} at {p:?}");
        }
    }

    #[test]
    fn doubled_form_halves_the_scale() {
        let m = ContactModel::new(
            ["-y", "x", "2"],
            ["1", "0", "y/2"],
            ["0", "1", "-x/2"],
            [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        )
        .unwrap()
        .normalize()
        .unwrap();
        let s = m.scale_at([0.3, -0.4, 0.9]).unwrap();
        assert!((s - 0.5).abs() < 1e-14, "scale {s}");
    }

    #[test]
    fn swapped_frame_raises_orientation() {
        let err = ContactModel::new(
            ["-y/2", "x/2", "1"],
            ["0", "1", "-x/2"],
            ["1", "0", "y/2"],
            [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        )
        .unwrap()
        .normalize()
        .unwrap_err();
        assert!(matches!(err, Error::Orientation { .. }), "got {err:?}");
    }

    #[test]
    fn non_horizontal_frame_rejected() {
        let err = ContactModel::new(
            ["-y/2", "x/2", "1"],
            ["1", "0", "0"], // ω(f₁) = −y/2 ≠ 0 off the x-axis
            ["0", "1", "-x/2"],
            [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        )
        .unwrap()
        .normalize()
        .unwrap_err();
        assert!(matches!(err, Error::Domain { .. }), "got {err:?}");
    }

    #[test]
    fn heisenberg_reeb_is_vertical() {
        let m = builtin_model("heisenberg").unwrap();
        for p in [[0.0, 0.0, 0.0], [1.5, -0.7, 2.0]] {
            let f0 = m.reeb_field(p).unwrap();
            assert!((f0[0]).abs() < 1e-12 && (f0[1]).abs() < 1e-12);
            assert!((f0[2] - 1.0).abs() < 1e-12, "f0 {f0:?}");
        }
    }

    #[test]
    fn metric_on_reeb_is_inverse_eps() {
        let m = builtin_model("heisenberg").unwrap();
        let p = [1.0, 0.0, 0.0];
        // ∂z is the Reeb field, so g^ε(∂z, ∂z) = 1/ε.
        let v = [0.0, 0.0, 1.0];
        let g = m.metric_eps(0.25, p, v, v).unwrap();
        assert!((g - 4.0).abs() < 1e-12, "g {g}");
        // Frame vectors are orthonormal at every ε.
        let f1 = [1.0, 0.0, 0.0];
        let f2v = [0.0, 1.0, -0.5];
        let g12 = m.metric_eps(0.1, p, f1, f2v).unwrap();
        assert!(g12.abs() < 1e-12, "g12 {g12}");
    }

    #[test]
    fn unknown_model_is_reported() {
        assert!(matches!(
            builtin_model("unknown-name"),
            Err(Error::UnknownModel { .. })
        ));
    }

    #[test]
    fn unnormalized_model_refuses_geometry() {
        let m = ContactModel::new(
            ["-y/2", "x/2", "1"],
            ["1", "0", "y/2"],
            ["0", "1", "-x/2"],
            [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
        )
        .unwrap();
        assert!(matches!(
            m.reeb_field([0.0; 3]),
            Err(Error::Domain { .. })
        ));
    }
}
