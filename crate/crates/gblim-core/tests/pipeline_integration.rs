//! End-to-end pipeline checks on real surface geometry: classification of
//! characteristic points through the chart field, measure integrals against
//! closed forms, the convergence ladder, and the integrability probe.

use gblim_core::{
    builtin_model, classify, convergence_table, euler_characteristic, integrate_measure,
    inv_norm_integrability_probe, parse, patches_from_points, ChartDomain, ClassifyOptions,
    ContactModel, DensityKind, IntegralOptions, MeasureJob, QuadOptions, Support, SurfaceChart,
    SurfaceField, TestFunction,
};

fn heisenberg() -> ContactModel {
    builtin_model("heisenberg").unwrap()
}

fn plane() -> SurfaceChart {
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
fn plane_origin_classifies_through_the_surface_field() {
    let model = heisenberg();
    let chart = plane();
    let field = SurfaceField {
        chart: &chart,
        model: &model,
    };
    let points = classify(&field, &ClassifyOptions::default()).unwrap();
    assert_eq!(points.len(), 1, "{points:?}");
    let p = &points[0];
    assert!(p.uv[0].abs() < 1e-7 && p.uv[1].abs() < 1e-7);
    assert_eq!(p.order, 1);
    // ∇X = I/2 at the origin: trace (= div) 1, det 1/4, Λ = det/trace.
    assert!((p.trace - 1.0).abs() < 1e-8, "trace {}", p.trace);
    assert!((p.det - 0.25).abs() < 1e-8, "det {}", p.det);
    assert!((p.lambda_k - 0.25).abs() < 1e-8);
    assert!(!p.lambda_sign_ambiguous);
    assert_eq!(p.index, 1);
    assert_eq!(p.winding, 1);
    assert!((p.hat_k + 0.75).abs() < 1e-8, "K̂ = {}", p.hat_k);
    assert!(p.isolation_radius >= 0.3);
    let euler = euler_characteristic(&points).unwrap();
    assert_eq!(euler.from_indices, 1);
    assert_eq!(euler.from_formula, 1);
    assert!(!euler.empty_warning);
}

#[test]
fn tilted_plane_moves_the_characteristic_point() {
    let model = heisenberg();
    let chart = SurfaceChart::new(
        ["u", "v", "(u + v)/2"],
        ChartDomain::Box {
            u: [-2.2, 2.2],
            v: [-2.2, 2.2],
        },
        1,
        None,
        [false, false],
    )
    .unwrap();
    let field = SurfaceField {
        chart: &chart,
        model: &model,
    };
    let points = classify(&field, &ClassifyOptions::default()).unwrap();
    assert_eq!(points.len(), 1, "{points:?}");
    let p = &points[0];
    // ω|_S vanishes where (ω(ψ_u), ω(ψ_v)) = 0: at (u, v) = (−1, 1), where
    // the chart frame coincides with (f₁, f₂), so σ¹ = 1 and ∇X = I/2.
    assert!(
        (p.uv[0] + 1.0).abs() < 1e-7 && (p.uv[1] - 1.0).abs() < 1e-7,
        "located at {:?}",
        p.uv
    );
    assert_eq!(p.order, 1);
    assert!((p.trace - 1.0).abs() < 1e-8);
    assert!((p.det - 0.25).abs() < 1e-8);
    assert_eq!(p.index, 1);
    assert_eq!(p.winding, 1);
    assert!((p.hat_k + 0.75).abs() < 1e-8);
    // The exact divergence at the located point agrees with the stored trace.
    let s = chart.characteristic_field(&model, p.uv).unwrap();
    assert!((s.divergence - p.trace).abs() < 1e-9);
}

#[test]
fn full_chart_mu_integral_matches_square_closed_form() {
    let model = heisenberg();
    let chart = plane();
    let field = SurfaceField {
        chart: &chart,
        model: &model,
    };
    let points = classify(&field, &ClassifyOptions::default()).unwrap();
    let job = MeasureJob {
        chart: &chart,
        model: &model,
        phi: TestFunction::One,
        support: Support::Full,
        patches: patches_from_points(&points),
    };
    let opts = IntegralOptions {
        quad: QuadOptions {
            bulk: 64,
            angular: 32,
            radial: 48,
            patch_radius_cap: 0.5,
            ..QuadOptions::default()
        },
        tolerance: 1e-2,
        levels: 3,
    };
    let (v, est) = integrate_measure(
        std::slice::from_ref(&job),
        DensityKind::MuMinusOne,
        None,
        &opts,
    )
    .unwrap();
    // ∫∫ (−1/r) over the square [−a, a]² = −8a·asinh(1).
    let want = -8.0 * 2.2 * 1.0_f64.asinh();
    assert!(
        (v - want).abs() < 1e-2,
        "square μ integral {v} vs {want} (estimate {est})"
    );
}

#[test]
fn convergence_ladder_approaches_atomic_target() {
    let model = heisenberg();
    let chart = plane();
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
            angular: 24,
            radial: 48,
            ..QuadOptions::default()
        },
        tolerance: 5e-3,
        levels: 3,
    };
    let target = std::f64::consts::TAU; // 2π·φ(0)·ind(0)
    let epsilons = [1.0, 0.25, 0.0625, 0.015625];
    let rows = convergence_table(std::slice::from_ref(&job), &epsilons, target, &opts).unwrap();
    assert_eq!(rows.len(), 4);
    for w in rows.windows(2) {
        assert!(w[0].epsilon > w[1].epsilon);
        assert!(
            w[1].abs_error <= w[0].abs_error * 1.02 + 1e-4,
            "errors not decreasing: {rows:?}"
        );
    }
    assert!(
        rows[3].abs_error < 0.5 * rows[0].abs_error,
        "no visible convergence: {rows:?}"
    );
}

#[test]
fn probe_annuli_match_closed_form_on_the_plane() {
    let model = heisenberg();
    let chart = plane();
    let field = SurfaceField {
        chart: &chart,
        model: &model,
    };
    // σ̃/|X| = (4 + r²)/(2r) on the plane, so each annulus integral is
    // π(4Δr + Δ(r³)/3).
    let radii = [0.4, 0.2, 0.1];
    let vals = inv_norm_integrability_probe(&field, [0.0, 0.0], &radii).unwrap();
    for (i, v) in vals.iter().enumerate() {
        let (out, inn) = (radii[i], radii[i + 1]);
        let want = std::f64::consts::PI
            * (4.0 * (out - inn) + (out.powi(3) - inn.powi(3)) / 3.0);
        assert!(
            (v - want).abs() < 1e-9 * want,
            "annulus {i}: {v} vs {want}"
        );
    }
}
