//! Black-box oracle suites for the expression engine and contact models:
//! jet coefficients against central finite differences at seeded random
//! points, exact chain-rule composition, and closed-form checks on a
//! non-constant-scale contact structure.

use gblim_core::{builtin_model, parse, ContactModel, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A contact structure whose normalization scale genuinely varies:
/// ω = dz + h(x)(x dy − y dx)/2 with h = 1 + x², horizontal frame
/// f₁ = ∂x + (h y/2)∂z, f₂ = ∂y − (h x/2)∂z. Then dω(f₁, f₂) = 1 + 2x²,
/// so the scale is s(x) = 1/(1 + 2x²).
fn perturbed_model() -> ContactModel {
    ContactModel::new(
        ["-(1 + x^2)*y/2", "(1 + x^2)*x/2", "1"],
        ["1", "0", "(1 + x^2)*y/2"],
        ["0", "1", "-(1 + x^2)*x/2"],
        [[-1.2, 1.2], [-1.2, 1.2], [-1.2, 1.2]],
    )
    .unwrap()
    .normalize()
    .unwrap()
}

#[test]
fn jet_battery_matches_finite_differences() {
    let battery: &[(&str, &[&str])] = &[
        ("sin(3*t) * exp(t/2)", &["t"]),
        ("atan(t) / (1 + t^2)", &["t"]),
        ("log(2 + cos(t)) * sqrt(4 + t^2)", &["t"]),
        ("(t^3 - 2*t + 1) / (2 + sin(t))", &["t"]),
        ("exp(x*y) * sin(x - 2*y)", &["x", "y"]),
        ("sqrt(1 + x^2 + y^2)", &["x", "y"]),
        ("x^2*y - y^3/3 + atan(x*y)", &["x", "y"]),
        ("cos(x)*cos(y) + log(3 + x - y)", &["x", "y"]),
        ("x*y*z + sin(x + 2*y - z)", &["x", "y", "z"]),
        ("exp(-(x^2 + y^2 + z^2)/4) * (1 + z^2)", &["x", "y", "z"]),
        ("(x + y) / (3 + z) + sqrt(2 + x)", &["x", "y", "z"]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for (source, vars) in battery {
        let expr = parse(source, vars).unwrap();
        for _ in 0..100 {
            let point: Vec<f64> = (0..vars.len()).map(|_| rng.gen_range(-0.8..=0.8)).collect();
            let worst = expr.finite_diff_check(&point, 3, 5e-3).unwrap();
            assert!(
                worst < 5e-3,
                "{source} at {point:?}: worst jet-vs-FD deviation {worst:e}"
            );
        }
    }
}

#[test]
fn jet_composition_is_an_exact_chain_rule() {
    // Substituting inner jets for the variables must agree with the jet of
    // the textually composed expression to rounding accuracy.
    let outer = parse("sin(x)*y + x^2 / (2 + y)", &["x", "y"]).unwrap();
    let inner_x = parse("u^2 - v", &["u", "v"]).unwrap();
    let inner_y = parse("u*v + 1", &["u", "v"]).unwrap();
    let composed = parse(
        "sin(u^2 - v)*(u*v + 1) + (u^2 - v)^2 / (2 + (u*v + 1))",
        &["u", "v"],
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..25 {
        let uv = [rng.gen_range(-0.9..=0.9), rng.gen_range(-0.9..=0.9)];
        let jx = inner_x.eval_jet(&uv, 3).unwrap();
        let jy = inner_y.eval_jet(&uv, 3).unwrap();
        let via_subst = outer.eval_with(&[jx, jy]).unwrap();
        let direct = composed.eval_jet(&uv, 3).unwrap();
        for alpha in direct.multi_indices() {
            let idx = &alpha[..2];
            let (a, b) = (via_subst.derivative(idx), direct.derivative(idx));
            assert!(
                (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                "∂^{idx:?} at {uv:?}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn scale_matches_closed_form_on_perturbed_model() {
    let model = perturbed_model();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..50 {
        let p = [
            rng.gen_range(-1.2..=1.2),
            rng.gen_range(-1.2..=1.2),
            rng.gen_range(-1.2..=1.2),
        ];
        let want = 1.0 / (1.0 + 2.0 * p[0] * p[0]);
        let got = model.scale_at(p).unwrap();
        assert!(
            (got - want).abs() <= 1e-12 * want,
            "scale at {p:?}: {got} vs {want}"
        );
    }
}

#[test]
fn reeb_field_is_basis_independent_and_vertical_where_scale_is_flat() {
    let model = perturbed_model();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for _ in 0..30 {
        let p = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let auto = model.reeb_field(p).unwrap();
        let manual = model
            .reeb_field_with_basis(p, [0.6, 0.8, 0.0], [-0.8, 0.6, 0.3])
            .unwrap();
        for i in 0..3 {
            assert!(
                (auto[i] - manual[i]).abs() < 1e-9,
                "Reeb basis dependence at {p:?}: {auto:?} vs {manual:?}"
            );
        }
        // ω̃(f₀) = 1 for the normalized form ω̃ = s·ω.
        let h = 1.0 + p[0] * p[0];
        let omega = [-h * p[1] / 2.0, h * p[0] / 2.0, 1.0];
        let s = model.scale_at(p).unwrap();
        let pairing: f64 = (0..3).map(|i| s * omega[i] * auto[i]).sum();
        assert!((pairing - 1.0).abs() < 1e-9, "ω̃(f₀) = {pairing} at {p:?}");
    }
    // The scale is critical in x on the plane x = 0, so the Reeb field is
    // exactly vertical there.
    for _ in 0..10 {
        let p = [0.0, rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
        let f0 = model.reeb_field(p).unwrap();
        assert!(f0[0].abs() < 1e-10 && f0[1].abs() < 1e-10);
        assert!((f0[2] - 1.0).abs() < 1e-10, "Reeb at {p:?}: {f0:?}");
    }
}

#[test]
fn metric_eps_is_symmetric_bilinear_and_monotone() {
    let model = perturbed_model();
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    for _ in 0..30 {
        let p = [
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        ];
        let rv = |rng: &mut ChaCha8Rng| {
            [
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
                rng.gen_range(-1.0..=1.0),
            ]
        };
        let (v, w, u) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
        let eps = 0.3;
        let gvw = model.metric_eps(eps, p, v, w).unwrap();
        let gwv = model.metric_eps(eps, p, w, v).unwrap();
        assert!((gvw - gwv).abs() < 1e-11, "symmetry at {p:?}");
        // Bilinearity in the first slot.
        let (a, b) = (0.7, -1.3);
        let av_bw = [
            a * v[0] + b * w[0],
            a * v[1] + b * w[1],
            a * v[2] + b * w[2],
        ];
        let lhs = model.metric_eps(eps, p, av_bw, u).unwrap();
        let rhs = a * model.metric_eps(eps, p, v, u).unwrap()
            + b * model.metric_eps(eps, p, w, u).unwrap();
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "bilinearity");
        // g^ε(v, v) > 0 and non-increasing in ε.
        let norms: Vec<f64> = [0.04, 0.25, 1.0]
            .iter()
            .map(|&e| model.metric_eps(e, p, v, v).unwrap())
            .collect();
        assert!(norms.iter().all(|n| *n > 0.0));
        assert!(norms[0] >= norms[1] - 1e-12 && norms[1] >= norms[2] - 1e-12);
    }
}

#[test]
fn builtin_frame_is_orthonormal_for_every_eps() {
    let model = builtin_model("heisenberg").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    for _ in 0..25 {
        let p = [
            rng.gen_range(-2.5..=2.5),
            rng.gen_range(-2.5..=2.5),
            rng.gen_range(-2.5..=2.5),
        ];
        let f1 = [1.0, 0.0, p[1] / 2.0];
        let f2 = [0.0, 1.0, -p[0] / 2.0];
        let f0 = [0.0, 0.0, 1.0];
        for &eps in &[1.0, 0.25, 0.01] {
            let g = |v, w| model.metric_eps(eps, p, v, w).unwrap();
            assert!((g(f1, f1) - 1.0).abs() < 1e-10);
            assert!((g(f2, f2) - 1.0).abs() < 1e-10);
            assert!(g(f1, f2).abs() < 1e-10);
            assert!(g(f1, f0).abs() < 1e-10);
            assert!(g(f2, f0).abs() < 1e-10);
            assert!((g(f0, f0) - 1.0 / eps).abs() < 1e-10 / eps);
        }
    }
}

#[test]
fn normalize_is_idempotent_and_seed_independent() {
    let once = perturbed_model();
    let twice = once.clone().normalize().unwrap();
    let reseeded = once.clone().normalize_seeded(999).unwrap();
    assert!(once.is_normalized() && twice.is_normalized() && reseeded.is_normalized());
    let p = [0.4, -0.7, 0.2];
    let s = [&once, &twice, &reseeded].map(|m| m.scale_at(p).unwrap());
    assert!(s[0] == s[1] && s[1] == s[2], "scales diverged: {s:?}");
    let r = [&once, &twice, &reseeded].map(|m| m.reeb_field(p).unwrap());
    assert!(r[0] == r[1] && r[1] == r[2], "Reeb fields diverged: {r:?}");
}

#[test]
fn degenerate_form_fails_validation() {
    // ω = dz is closed: dω(f₁, f₂) = 0 everywhere.
    let err = ContactModel::new(
        ["0", "0", "1"],
        ["1", "0", "0"],
        ["0", "1", "0"],
        [[-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]],
    )
    .unwrap()
    .normalize()
    .unwrap_err();
    assert!(
        matches!(err, Error::ContactDegenerate { .. }),
        "got {err:?}"
    );
}
