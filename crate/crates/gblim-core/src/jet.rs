//! Truncated multivariate Taylor algebra ("jets").
//!
//! A [`Jet`] stores the value and all mixed partial derivatives of a scalar
//! field at a point, up to a fixed order, as canonical Taylor coefficients
//! c_α = ∂^α f / α! indexed by multi-index α. Arithmetic on jets propagates
//! derivatives exactly (no differencing), so every coefficient of a composite
//! expression equals the true derivative of the composite to machine
//! precision.
//!
//! Storage is one coefficient per multi-index, which makes the symmetry of
//! mixed partials structural: ∂²/∂x∂y and ∂²/∂y∂x read the same slot.
//!
//! Supported shapes: up to 3 variables. Public consumers are capped at order
//! [`MAX_PUBLIC_ORDER`]; internally the algebra carries orders up to 4 for
//! 2- and 3-variable jets (needed to assemble second fundamental-form
//! derivatives through a pointwise frame normalization) and up to 8 for
//! 1-variable jets (needed for high-order derivatives along explicit curves).

use crate::error::{Error, Result};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::OnceLock;

/// Maximum number of variables a jet can carry.
pub const MAX_VARS: usize = 3;

/// Maximum derivative order exposed through public evaluation APIs.
pub const MAX_PUBLIC_ORDER: usize = 3;

/// Largest coefficient count over all supported (nvars, order) shapes:
/// C(3+4,3) = 35 for 3 variables at order 4 (1 variable at order 8 needs 9).
const MAX_COEFFS: usize = 35;

/// Internal order caps per variable count (index = nvars).
const MAX_ORDER_BY_NVARS: [usize; MAX_VARS + 1] = [0, 8, 4, 4];

// ---------------------------------------------------------------------------
// Index tables
// ---------------------------------------------------------------------------

/// Precomputed index data for one (nvars, order) shape.
struct JetTables {
    /// Number of multi-indices with |α| ≤ order.
    len: usize,
    /// Multi-indices in graded order (degree 0 first). The enumeration is
    /// prefix-stable: the table for order m − 1 is the first `len` entries of
    /// the table for order m, which keeps truncation index-free.
    midx: Vec<[u8; 3]>,
    /// Dense position lookup: pos[a*81 + b*9 + c] = index of (a,b,c), or
    /// u16::MAX when the multi-index is out of range.
    pos: Vec<u16>,
    /// Multiplication schedule: (i, j, k) means result[k] += a[i] * b[j].
    mul: Vec<(u16, u16, u16)>,
    /// α! per multi-index, for converting Taylor coefficients to derivatives.
    factorial: Vec<f64>,
}

fn build_tables(nvars: usize, order: usize) -> JetTables {
    let mut midx: Vec<[u8; 3]> = Vec::new();
    for degree in 0..=order {
        // Within a degree: α₁ descending, then α₂ descending.
        for a in (0..=degree).rev() {
            if nvars < 2 {
                if a == degree {
                    midx.push([degree as u8, 0, 0]);
                }
                continue;
            }
            for b in (0..=(degree - a)).rev() {
                let c = degree - a - b;
                if nvars < 3 && c > 0 {
                    continue;
                }
                midx.push([a as u8, b as u8, c as u8]);
            }
        }
    }
    let len = midx.len();
    assert!(len <= MAX_COEFFS);

    let mut pos = vec![u16::MAX; 9 * 9 * 9];
    for (i, m) in midx.iter().enumerate() {
        pos[m[0] as usize * 81 + m[1] as usize * 9 + m[2] as usize] = i as u16;
    }

    let mut mul = Vec::new();
    for (i, a) in midx.iter().enumerate() {
        for (j, b) in midx.iter().enumerate() {
            let deg = (a[0] + b[0] + a[1] + b[1] + a[2] + b[2]) as usize;
            if deg <= order {
                let s = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
                let k = pos[s[0] as usize * 81 + s[1] as usize * 9 + s[2] as usize];
                mul.push((i as u16, j as u16, k));
            }
        }
    }

    let fact = |n: u8| -> f64 { (1..=n as u64).product::<u64>() as f64 };
    let factorial = midx
        .iter()
        .map(|m| fact(m[0]) * fact(m[1]) * fact(m[2]))
        .collect();

    JetTables {
        len,
        midx,
        pos,
        mul,
        factorial,
    }
}

/// Table registry slot index for (nvars, order).
fn table_slot(nvars: usize, order: usize) -> usize {
    (nvars - 1) * 9 + order
}

fn tables(nvars: usize, order: usize) -> &'static JetTables {
    static TABLES: OnceLock<Vec<Option<JetTables>>> = OnceLock::new();
    let all = TABLES.get_or_init(|| {
        let mut v: Vec<Option<JetTables>> = (0..MAX_VARS * 9).map(|_| None).collect();
        for nv in 1..=MAX_VARS {
            for ord in 0..=MAX_ORDER_BY_NVARS[nv] {
                v[table_slot(nv, ord)] = Some(build_tables(nv, ord));
            }
        }
        v
    });
    all[table_slot(nvars, order)]
        .as_ref()
        .expect("unsupported (nvars, order) jet shape")
}

// ---------------------------------------------------------------------------
// Jet
// ---------------------------------------------------------------------------

/// Value plus mixed partial derivatives of a scalar field at a point.
///
/// Coefficients are stored as canonical Taylor coefficients c_α = ∂^α f / α!
/// in the graded multi-index order of the shape's table. Use
/// [`Jet::derivative`] to read true partial derivatives.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    nvars: u8,
    order: u8,
    coeff: [f64; MAX_COEFFS],
}

impl Jet {
    fn zeroed(nvars: usize, order: usize) -> Self {
        assert!(
            (1..=MAX_VARS).contains(&nvars) && order <= MAX_ORDER_BY_NVARS[nvars],
            "unsupported jet shape: nvars = {nvars}, order = {order}"
        );
        Jet {
            nvars: nvars as u8,
            order: order as u8,
            coeff: [0.0; MAX_COEFFS],
        }
    }

    /// The jet of a constant field.
    pub fn constant(nvars: usize, order: usize, value: f64) -> Self {
        let mut j = Self::zeroed(nvars, order);
        j.coeff[0] = value;
        j
    }

    /// The jet of the `index`-th coordinate function at `value`.
    pub fn variable(nvars: usize, order: usize, index: usize, value: f64) -> Self {
        assert!(index < nvars);
        let mut j = Self::zeroed(nvars, order);
        j.coeff[0] = value;
        if order >= 1 {
            // Degree-1 entries follow the constant entry in enumeration
            // order α₁-major, so variable i sits at slot 1 + (nvars−1−i)…
            // look it up to stay robust against enumeration details.
            let mut m = [0u8; 3];
            m[index] = 1;
            let t = tables(nvars, order);
            let p = t.pos[m[0] as usize * 81 + m[1] as usize * 9 + m[2] as usize];
            j.coeff[p as usize] = 1.0;
        }
        j
    }

    /// Number of variables.
    pub fn nvars(&self) -> usize {
        self.nvars as usize
    }

    /// Truncation order.
    pub fn order(&self) -> usize {
        self.order as usize
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        tables(self.nvars(), self.order()).len
    }

    /// True when the jet stores no coefficients (never happens for valid
    /// shapes; present for API completeness).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Plain value of the field at the base point.
    pub fn value(&self) -> f64 {
        self.coeff[0]
    }

    /// Canonical Taylor coefficient c_α = ∂^α f / α!.
    pub fn taylor(&self, alpha: &[usize]) -> f64 {
        let i = self.index_of(alpha);
        self.coeff[i]
    }

    /// True mixed partial derivative ∂^α f.
    pub fn derivative(&self, alpha: &[usize]) -> f64 {
        let i = self.index_of(alpha);
        self.coeff[i] * tables(self.nvars(), self.order()).factorial[i]
    }

    /// First partial derivative along variable `i` (order ≥ 1 required).
    pub fn d(&self, i: usize) -> f64 {
        let mut alpha = [0usize; 3];
        alpha[i] = 1;
        self.derivative(&alpha[..self.nvars()])
    }

    fn index_of(&self, alpha: &[usize]) -> usize {
        assert_eq!(alpha.len(), self.nvars(), "multi-index arity mismatch");
        let mut m = [0usize; 3];
        m[..alpha.len()].copy_from_slice(alpha);
        let t = tables(self.nvars(), self.order());
        let p = t.pos[m[0] * 81 + m[1] * 9 + m[2]];
        assert!(
            p != u16::MAX,
            "multi-index {alpha:?} out of range for order {}",
            self.order
        );
        p as usize
    }

    /// All multi-indices of this shape in storage order.
    pub fn multi_indices(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        tables(self.nvars(), self.order())
            .midx
            .iter()
            .map(|m| [m[0] as usize, m[1] as usize, m[2] as usize])
    }

    /// Copy truncated to a lower (or equal) order. Prefix-stable enumeration
    /// makes this a plain prefix copy.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order());
        let mut out = Jet::zeroed(self.nvars(), order);
        let n = out.len();
        out.coeff[..n].copy_from_slice(&self.coeff[..n]);
        out
    }

    /// Jet of the partial derivative ∂f/∂x_i, one order lower.
    pub fn partial_jet(&self, i: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        assert!(i < self.nvars());
        let nvars = self.nvars();
        let child_order = self.order() - 1;
        let parent_t = tables(nvars, self.order());
        let child_t = tables(nvars, child_order);
        let mut out = Jet::zeroed(nvars, child_order);
        for (b, m) in child_t.midx.iter().enumerate() {
            let mut up = [m[0] as usize, m[1] as usize, m[2] as usize];
            up[i] += 1;
            let p = parent_t.pos[up[0] * 81 + up[1] * 9 + up[2]] as usize;
            out.coeff[b] = up[i] as f64 * self.coeff[p];
        }
        out
    }

    fn assert_same_shape(&self, rhs: &Jet) {
        assert!(
            self.nvars == rhs.nvars && self.order == rhs.order,
            "jet shape mismatch: ({}, {}) vs ({}, {})",
            self.nvars,
            self.order,
            rhs.nvars,
            rhs.order
        );
    }

    /// result += a * b without allocating.
    fn mul_into(a: &Jet, b: &Jet, out: &mut Jet) {
        let t = tables(a.nvars(), a.order());
        for &(i, j, k) in &t.mul {
            out.coeff[k as usize] += a.coeff[i as usize] * b.coeff[j as usize];
        }
    }

    /// Composition with a univariate C^∞ function given by its derivative
    /// ladder at the jet's value: derivs[m] = f^{(m)}(self.value()).
    ///
    /// Uses Horner evaluation of the truncated Taylor series of f around the
    /// value, applied to the nilpotent part of `self`.
    pub(crate) fn compose_univariate(&self, derivs: &[f64]) -> Jet {
        let order = self.order();
        assert!(derivs.len() >= order + 1);
        let mut h = *self;
        h.coeff[0] = 0.0; // nilpotent part
        let mut fact = 1.0;
        let mut coeffs = [0.0f64; 9];
        for (m, c) in coeffs.iter_mut().enumerate().take(order + 1) {
            if m > 0 {
                fact *= m as f64;
            }
            *c = derivs[m] / fact;
        }
        let mut r = Jet::constant(self.nvars(), order, coeffs[order]);
        for m in (0..order).rev() {
            let mut next = Jet::constant(self.nvars(), order, coeffs[m]);
            Jet::mul_into(&r, &h, &mut next);
            r = next;
        }
        r
    }

    /// Multiplicative inverse 1/f. Produces IEEE infinities/NaNs when the
    /// value is zero; callers that must report domain errors check first.
    pub fn recip(&self) -> Jet {
        let u = self.value();
        let mut derivs = [0.0f64; 9];
        // d^m/du^m (1/u) = (−1)^m m! / u^{m+1}
        let mut cur = 1.0 / u;
        derivs[0] = cur;
        for (m, d) in derivs.iter_mut().enumerate().skip(1).take(self.order()) {
            cur *= -(m as f64) / u;
            *d = cur;
        }
        self.compose_univariate(&derivs)
    }

    /// Square root. NaN coefficients when the value is not positive.
    pub fn sqrt(&self) -> Jet {
        let u = self.value();
        let mut derivs = [0.0f64; 9];
        let mut cur = u.sqrt();
        derivs[0] = cur;
        for (m, d) in derivs.iter_mut().enumerate().skip(1).take(self.order()) {
            // f^{(m)} = f^{(m−1)} · (1/2 − (m−1)) / u
            cur *= (0.5 - (m as f64 - 1.0)) / u;
            *d = cur;
        }
        self.compose_univariate(&derivs)
    }

    /// Natural logarithm. NaN coefficients when the value is not positive.
    pub fn ln(&self) -> Jet {
        let u = self.value();
        let mut derivs = [0.0f64; 9];
        derivs[0] = u.ln();
        if self.order() >= 1 {
            let mut cur = 1.0 / u;
            derivs[1] = cur;
            for (m, d) in derivs.iter_mut().enumerate().skip(2).take(self.order() - 1) {
                // d^m ln u = (−1)^{m−1} (m−1)! / u^m
                cur *= -((m - 1) as f64) / u;
                *d = cur;
            }
        }
        self.compose_univariate(&derivs)
    }

    /// Exponential.
    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let derivs = [e; 9];
        self.compose_univariate(&derivs)
    }

    /// Sine.
    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let mut derivs = [0.0f64; 9];
        for (m, d) in derivs.iter_mut().enumerate() {
            *d = cycle[m % 4];
        }
        self.compose_univariate(&derivs)
    }

    /// Cosine.
    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let mut derivs = [0.0f64; 9];
        for (m, d) in derivs.iter_mut().enumerate() {
            *d = cycle[m % 4];
        }
        self.compose_univariate(&derivs)
    }

    /// Arctangent.
    ///
    /// The derivative ladder is generated from the closed-form ladder of
    /// 1/(1+u²) by one univariate jet evaluation, which keeps it valid for
    /// every supported order without hand-written high-order formulas.
    pub fn atan(&self) -> Jet {
        let order = self.order();
        let u = self.value();
        let mut derivs = [0.0f64; 9];
        derivs[0] = u.atan();
        if order >= 1 {
            // Jet of t ↦ 1/(1 + (u+t)²) at t = 0, order − 1.
            let t = Jet::variable(1, order - 1, 0, u);
            let one = Jet::constant(1, order - 1, 1.0);
            let g = (one + t * t).recip();
            let gt = tables(1, order - 1);
            for m in 1..=order {
                // atan^{(m)}(u) = g^{(m−1)}(0) = c_{m−1} · (m−1)!
                derivs[m] = g.coeff[m - 1] * gt.factorial[m - 1];
            }
        }
        self.compose_univariate(&derivs)
    }

    /// Integer power by repeated squaring (negative exponents via recip).
    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut result = Jet::constant(self.nvars(), self.order(), 1.0);
        let mut base = *self;
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        result
    }

    /// Evaluate this jet's Taylor polynomial on displacement jets, producing
    /// the jet of the composite field.
    ///
    /// `self` is a jet in `n` ambient variables; `displacements` supplies one
    /// jet per ambient variable, each with value 0 (the nilpotent expansion of
    /// the ambient coordinate around the base point). The result is exact to
    /// the smaller of the two orders involved.
    pub fn compose(&self, displacements: &[Jet]) -> Jet {
        assert_eq!(displacements.len(), self.nvars());
        let inner_nvars = displacements[0].nvars();
        let inner_order = displacements[0].order();
        for d in displacements {
            assert!(d.nvars() == inner_nvars && d.order() == inner_order);
            assert!(
                d.value() == 0.0,
                "displacement jets must vanish at the base point"
            );
        }
        let t = tables(self.nvars(), self.order());
        // Power products Δ^α built by the graded recurrence Δ^α = Δ^{α−e_i}·Δ_i.
        let mut powers: Vec<Jet> = Vec::with_capacity(t.len);
        powers.push(Jet::constant(inner_nvars, inner_order, 1.0));
        for idx in 1..t.len {
            let m = t.midx[idx];
            // Find a variable with positive exponent and step down.
            let i = (0..3).find(|&i| m[i] > 0).unwrap();
            let mut down = [m[0] as usize, m[1] as usize, m[2] as usize];
            down[i] -= 1;
            let parent = t.pos[down[0] * 81 + down[1] * 9 + down[2]] as usize;
            let mut prod = Jet::zeroed(inner_nvars, inner_order);
            Jet::mul_into(&powers[parent], &displacements[i], &mut prod);
            powers.push(prod);
        }
        let mut out = Jet::zeroed(inner_nvars, inner_order);
        for idx in 0..t.len {
            let c = self.coeff[idx];
            if c != 0.0 {
                for k in 0..powers[idx].len() {
                    out.coeff[k] += c * powers[idx].coeff[k];
                }
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.assert_same_shape(&rhs);
        let mut out = self;
        for k in 0..self.len() {
            out.coeff[k] += rhs.coeff[k];
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.assert_same_shape(&rhs);
        let mut out = self;
        for k in 0..self.len() {
            out.coeff[k] -= rhs.coeff[k];
        }
        out
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.assert_same_shape(&rhs);
        let mut out = Jet::zeroed(self.nvars(), self.order());
        Jet::mul_into(&self, &rhs, &mut out);
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        let mut out = self;
        for k in 0..self.len() {
            out.coeff[k] = -out.coeff[k];
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        let mut out = self;
        for k in 0..self.len() {
            out.coeff[k] *= rhs;
        }
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self;
        out.coeff[0] += rhs;
        out
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        let mut out = self;
        out.coeff[0] -= rhs;
        out
    }
}

/// Guard used by public entry points: rejects orders above the public cap.
pub(crate) fn check_public_order(order: usize) -> Result<()> {
    if order > MAX_PUBLIC_ORDER {
        return Err(Error::OrderUnsupported {
            requested: order,
            max: MAX_PUBLIC_ORDER,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f(x,y) = x²y + 3y at (2, 5), order 3.
        let x = Jet::variable(2, 3, 0, 2.0);
        let y = Jet::variable(2, 3, 1, 5.0);
        let f = x * x * y + y * 3.0;
        assert!((f.value() - 35.0).abs() < TOL);
        assert!((f.derivative(&[1, 0]) - 20.0).abs() < TOL); // 2xy
        assert!((f.derivative(&[0, 1]) - 7.0).abs() < TOL); // x²+3
        assert!((f.derivative(&[2, 0]) - 10.0).abs() < TOL); // 2y
        assert!((f.derivative(&[1, 1]) - 4.0).abs() < TOL); // 2x
        assert!((f.derivative(&[2, 1]) - 2.0).abs() < TOL);
        assert!((f.derivative(&[0, 2]) - 0.0).abs() < TOL);
        assert!((f.derivative(&[3, 0]) - 0.0).abs() < TOL);
    }

    #[test]
    fn transcendental_ladders_match_known_series() {
        // sin at 0, one variable, order 8: derivatives cycle (0,1,0,−1,…).
        let t = Jet::variable(1, 8, 0, 0.0);
        let s = t.sin();
        let expect = [0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0];
        for (m, e) in expect.iter().enumerate() {
            assert!(
                (s.derivative(&[m]) - e).abs() < TOL,
                "sin^({m})(0) = {}",
                s.derivative(&[m])
            );
        }
        // exp(x·y) mixed second derivative at (1,1): (1+xy)e^{xy} = 2e.
        let x = Jet::variable(2, 2, 0, 1.0);
        let y = Jet::variable(2, 2, 1, 1.0);
        let f = (x * y).exp();
        assert!((f.derivative(&[1, 1]) - 2.0 * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn atan_ladder_matches_closed_forms() {
        let u = 0.7;
        let t = Jet::variable(1, 4, 0, u);
        let a = t.atan();
        let w = 1.0 + u * u;
        assert!((a.derivative(&[0]) - u.atan()).abs() < TOL);
        assert!((a.derivative(&[1]) - 1.0 / w).abs() < TOL);
        assert!((a.derivative(&[2]) - (-2.0 * u / (w * w))).abs() < TOL);
        assert!((a.derivative(&[3]) - (6.0 * u * u - 2.0) / (w * w * w)).abs() < TOL);
        assert!((a.derivative(&[4]) - (24.0 * u - 24.0 * u * u * u) / (w * w * w * w)).abs() < 1e-11);
    }

    #[test]
    fn division_and_recip_agree() {
        let x = Jet::variable(3, 4, 0, 1.3);
        let y = Jet::variable(3, 4, 1, -0.4);
        let z = Jet::variable(3, 4, 2, 2.2);
        let num = x * y + z;
        let den = z * z + x;
        let q = num / den;
        let back = q * den;
        for (k, m) in back.multi_indices().enumerate() {
            let _ = k;
            let lhs = back.taylor(&m[..3]);
            let rhs = num.taylor(&m[..3]);
            assert!((lhs - rhs).abs() < 1e-12, "round-trip at {m:?}");
        }
    }

    #[test]
    fn partial_jet_shifts_coefficients() {
        let x = Jet::variable(2, 3, 0, 0.3);
        let y = Jet::variable(2, 3, 1, 0.9);
        let f = x * x * y + y * y; // ∂f/∂x = 2xy
        let fx = f.partial_jet(0);
        assert_eq!(fx.order(), 2);
        assert!((fx.value() - 2.0 * 0.3 * 0.9).abs() < TOL);
        assert!((fx.derivative(&[1, 0]) - 2.0 * 0.9).abs() < TOL);
        assert!((fx.derivative(&[0, 1]) - 2.0 * 0.3).abs() < TOL);
        assert!((fx.derivative(&[1, 1]) - 2.0).abs() < TOL);
    }

    #[test]
    fn compose_matches_direct_evaluation() {
        // Ambient field F(x,y,z) = x·sin(y) + z² at base (0.5, 0.2, −1.1),
        // composed with (u,v) displacements of a test map.
        let ax = Jet::variable(3, 4, 0, 0.5);
        let ay = Jet::variable(3, 4, 1, 0.2);
        let az = Jet::variable(3, 4, 2, -1.1);
        let ambient = ax * ay.sin() + az * az;

        // Map: x = 0.5 + u², y = 0.2 + u·v, z = −1.1 + v (displacements).
        let u = Jet::variable(2, 3, 0, 0.0);
        let v = Jet::variable(2, 3, 1, 0.0);
        let dx = u * u;
        let dy = u * v;
        let dz = v;
        let composed = ambient.compose(&[dx, dy, dz]);

        // Direct: evaluate F on full (u,v)-jets.
        let xu = dx + 0.5;
        let yu = dy + 0.2;
        let zu = dz + (-1.1);
        let direct = xu * yu.sin() + zu * zu;
        for m in composed.multi_indices() {
            let a = composed.taylor(&m[..2]);
            let b = direct.taylor(&m[..2]);
            assert!((a - b).abs() < 1e-13, "mismatch at {m:?}: {a} vs {b}");
        }
    }

    #[test]
    fn truncate_is_prefix_stable() {
        let x = Jet::variable(3, 4, 0, 1.1);
        let y = Jet::variable(3, 4, 1, 0.7);
        let z = Jet::variable(3, 4, 2, -0.2);
        let f = (x * y * z + x).exp();
        let t = f.truncate(2);
        for m in t.multi_indices() {
            assert_eq!(t.taylor(&m[..3]).to_bits(), f.taylor(&m[..3]).to_bits());
        }
    }
}
