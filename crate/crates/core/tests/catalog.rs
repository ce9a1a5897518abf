use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;

use crlab_core::catalog::{
    catalog, expected_invariants, expression_chart, geodesic_sphere, legendrian_torus, perturbed_torus, sphere_volume,
    ExpressionChartSpec, CHART_NAMES,
};
use crlab_core::immersion::horizontality_residual;
use crlab_core::integration::volume;
use crlab_core::{build_grid, fundamental_data, make_chart, ChartParams, Error};

#[test]
fn geodesic_sphere_volumes() {
    for (m, res) in [(1, None), (2, None), (3, Some(24)), (4, Some(16))] {
        let chart = geodesic_sphere(m, m).unwrap();
        let v = volume(&chart, &build_grid(&chart, res).unwrap()).unwrap();
        assert_relative_eq!(v, sphere_volume(m), max_relative = 1e-10);
    }
    assert_relative_eq!(sphere_volume(2), 4.0 * PI, max_relative = 1e-15);
    assert_relative_eq!(sphere_volume(3), 2.0 * PI * PI, max_relative = 1e-15);
}

#[test]
fn catalog_volumes_match_expectations() {
    let params = ChartParams::default();
    for name in CHART_NAMES {
        let chart = make_chart(name, &params).unwrap();
        let expected = expected_invariants(name, &params).unwrap();
        if let Some(v) = expected.volume {
            let got = volume(&chart, &build_grid(&chart, None).unwrap()).unwrap();
            assert_relative_eq!(got, v, max_relative = 1e-9);
        }
    }
    assert_eq!(catalog().len(), CHART_NAMES.len());
}

#[test]
fn legendrian_tori_are_legendrian_for_other_weights() {
    for (a, b) in [(1, 1), (2, 3), (1, 4)] {
        let chart = legendrian_torus(a, b).unwrap();
        let grid = build_grid(&chart, Some(16)).unwrap();
        assert!(horizontality_residual(&chart, grid.nodes()).unwrap() < 1e-12);
    }
}

#[test]
fn parameter_validation() {
    assert!(matches!(make_chart("klein_bottle", &ChartParams::default()), Err(Error::UnknownChart(_))));
    assert!(perturbed_torus(0.95, 1).is_err());
    assert!(perturbed_torus(0.3, 0).is_err());
    assert!(geodesic_sphere(3, 2).is_err());
    let params = ChartParams { b: Some(vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0]), ..Default::default() };
    assert!(make_chart("whitney_sphere", &params).is_err());
}

const CIRCLE: &str = r#"
name = "rotated circle"
m = 1
n = 1
axes = [{ lo = 0.0, hi = 6.283185307179586, periodic = true }]
components = ["cos(u1)/sqrt(2)", "sin(u1)/sqrt(2)", "cos(u1)/sqrt(2)", "sin(u1 + 0*pi)/sqrt(2)"]
"#;

#[test]
fn expression_chart_from_toml() {
    let spec = ExpressionChartSpec::from_toml_str(CIRCLE).unwrap();
    let chart = expression_chart(&spec).unwrap();
    assert!(!chart.has_analytic_jets());
    assert_relative_eq!(volume(&chart, &build_grid(&chart, None).unwrap()).unwrap(), TAU, max_relative = 1e-10);
    let d = fundamental_data(&chart, &[0.7]).unwrap();
    // a great circle: no curvature
    assert!(d.mean_curv.norm() < 1e-6);
}

#[test]
fn expression_chart_errors() {
    let bad_fn = CIRCLE.replace("cos(u1)/sqrt(2)\", \"sin", "cosine(u1)/sqrt(2)\", \"sin");
    let spec = ExpressionChartSpec::from_toml_str(&bad_fn).unwrap();
    assert!(matches!(expression_chart(&spec), Err(Error::Expression(_))));
    let short = CIRCLE.replace(r#""cos(u1)/sqrt(2)", "sin(u1 + 0*pi)/sqrt(2)""#, r#""0""#);
    let spec = ExpressionChartSpec::from_toml_str(&short).unwrap();
    assert!(matches!(expression_chart(&spec), Err(Error::DimensionMismatch { .. })));
    assert!(ExpressionChartSpec::from_toml_str("m = ").is_err());
    // the Hopf fiber runs along the Reeb field
    let fiber = r#"
name = "fiber"
m = 1
n = 1
axes = [{ lo = 0.0, hi = 6.283185307179586, periodic = true }]
components = ["cos(u1)", "0", "sin(u1)", "0"]
"#;
    let chart = expression_chart(&ExpressionChartSpec::from_toml_str(fiber).unwrap()).unwrap();
    assert!(matches!(fundamental_data(&chart, &[0.3]), Err(Error::NotHorizontal { .. })));
}
