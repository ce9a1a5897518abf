use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crlab_core::asymptotics::{default_t_samples, degeneration_scan, fit_expansion, ScanOptions};
use crlab_core::catalog::{catalog, expected_invariants, expression_chart, ExpectedInvariants, ExpressionChartSpec};
use crlab_core::functionals::{
    balance_point, cr_volume, default_dilation_scan, dilation_conformal_lower_bound, energies, lambda1_flat_torus,
    CrVolumeConfig, BALANCE_TOL,
};
use crlab_core::immersion::div_j_mean_curvature_n;
use crlab_core::integration::{volume, weighted_volume};
use crlab_core::moebius::{compose_all, normalize_at_point_with, StageFormulas};
use crlab_core::verify::{verify_appendix, verify_identities, verify_sextic, CURVATURE_TOL, POINTWISE_TOL, VOLUME_TOL};
use crlab_core::{build_grid, fundamental_data, make_chart, AmbientVector, ChartParams, Error, ImmersionChart};

use crate::settings::{AsymptoticsAction, Command, Formulas, Settings, VerifySuite};

/// How a run failed; each maps to an exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
    Violation(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Violation(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numerical(m) | Failure::Violation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_)
            | Error::UnknownChart(_)
            | Error::Expression(_)
            | Error::DimensionMismatch { .. }
            | Error::OutsideDomain { .. }
            | Error::BallGuard { .. } => Failure::Usage(msg),
            Error::NotHorizontal { .. } | Error::NotOnSphere { .. } => Failure::Violation(msg),
            Error::RankDeficient { .. }
            | Error::DegenerateMetric { .. }
            | Error::CurvatureUnstable { .. }
            | Error::QuadratureNotConverged(_)
            | Error::Stagnation { .. }
            | Error::Numerical(_) => Failure::Numerical(msg),
        }
    }
}

/// Everything a command produces.
#[derive(Default)]
pub struct Outcome {
    pub chart: Option<String>,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub result: Value,
    pub summary: Vec<String>,
    /// Set when a checked invariant failed; the report is still written.
    pub violation: Option<String>,
    pub csv: Option<(Vec<&'static str>, Vec<Vec<f64>>)>,
}

#[derive(Serialize)]
pub struct Report<'a> {
    pub command: String,
    pub version: &'static str,
    pub settings: &'a Settings,
    pub chart: Option<String>,
    pub tolerances: &'a BTreeMap<&'static str, f64>,
    pub status: &'static str,
    pub violation: Option<&'a str>,
    pub result: &'a Value,
}

type Run = Result<Outcome, Failure>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub fn command_name(c: &Command) -> String {
    match c {
        Command::Volume => "volume".into(),
        Command::Energies => "energies".into(),
        Command::CrVolume => "cr-volume".into(),
        Command::Balance => "balance".into(),
        Command::Normalize => "normalize".into(),
        Command::Dilation => "dilation".into(),
        Command::Asymptotics { action: AsymptoticsAction::Scan } => "asymptotics scan".into(),
        Command::Asymptotics { action: AsymptoticsAction::Fit } => "asymptotics fit".into(),
        Command::Verify { suite: VerifySuite::Identities } => "verify identities".into(),
        Command::Verify { suite: VerifySuite::Appendix } => "verify appendix".into(),
        Command::Verify { suite: VerifySuite::Sextic } => "verify sextic".into(),
        Command::Lambda1 => "lambda1".into(),
        Command::Catalog => "catalog".into(),
    }
}

pub fn run(command: &Command, s: &Settings) -> Run {
    match command {
        Command::Volume => cmd_volume(s),
        Command::Energies => cmd_energies(s),
        Command::CrVolume => cmd_cr_volume(s),
        Command::Balance => cmd_balance(s),
        Command::Normalize => cmd_normalize(s),
        Command::Dilation => cmd_dilation(s),
        Command::Asymptotics { action: AsymptoticsAction::Scan } => cmd_scan(s),
        Command::Asymptotics { action: AsymptoticsAction::Fit } => cmd_fit(s),
        Command::Verify { suite: VerifySuite::Identities } => cmd_identities(s),
        Command::Verify { suite: VerifySuite::Appendix } => cmd_appendix(s),
        Command::Verify { suite: VerifySuite::Sextic } => cmd_sextic(s),
        Command::Lambda1 => cmd_lambda1(s),
        Command::Catalog => cmd_catalog(),
    }
}

fn chart_params(s: &Settings) -> Result<ChartParams, Failure> {
    let weights = match &s.weights {
        None => None,
        Some(w) if w.len() == 2 => Some([w[0], w[1]]),
        Some(w) => return Err(Failure::Usage(format!("--weights takes two values, got {}", w.len()))),
    };
    Ok(ChartParams { m: s.m, n: s.n, b: s.b.clone(), amplitude: s.amplitude, mode: s.mode, weights })
}

fn load_chart(s: &Settings) -> Result<(ImmersionChart, ExpectedInvariants), Failure> {
    if let Some(path) = &s.expr {
        if s.chart.is_some() {
            return Err(Failure::Usage("give either --chart or --expr, not both".into()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
        let chart = expression_chart(&ExpressionChartSpec::from_toml_str(&text)?)?;
        return Ok((chart, ExpectedInvariants::default()));
    }
    let name = s.chart.as_deref().ok_or_else(|| Failure::Usage("missing --chart (or --expr)".into()))?;
    let params = chart_params(s)?;
    Ok((make_chart(name, &params)?, expected_invariants(name, &params)?))
}

fn default_point(chart: &ImmersionChart, s: &Settings) -> Result<Vec<f64>, Failure> {
    match &s.point {
        Some(p) if p.len() == chart.m() => Ok(p.clone()),
        Some(p) => Err(Failure::Usage(format!("--point needs {} values, got {}", chart.m(), p.len()))),
        // a generic interior point
        None => Ok(chart.axes().iter().map(|a| a.lo + 0.37 * a.length()).collect()),
    }
}

fn cmd_volume(s: &Settings) -> Run {
    let (chart, expected) = load_chart(s)?;
    let grid = build_grid(&chart, s.res)?;
    let v = volume(&chart, &grid)?;
    let mut summary = vec![format!("volume of {}: {v:.12}", chart.name())];
    if let Some(e) = expected.volume {
        summary.push(format!("expected {e:.12} (difference {:.2e})", v - e));
    }
    Ok(Outcome {
        chart: Some(chart.name().into()),
        result: json!({ "volume": v, "expected_volume": expected.volume, "nodes": grid.len() }),
        summary,
        ..Default::default()
    })
}

fn cmd_energies(s: &Settings) -> Run {
    let (chart, expected) = load_chart(s)?;
    let grid = build_grid(&chart, s.res)?;
    let rep = energies(&chart, &grid, expected.genus)?;
    let mut summary = vec![format!("volume {:.12}", rep.volume)];
    if let Some(w) = rep.w_cr {
        summary.push(format!("W_CR {w:.12}"));
    }
    summary.push(format!("U_CR {:.12}, B_CR {:.12}", rep.u_cr, rep.b_cr));
    if let Some(r) = rep.gauss_bonnet_residual {
        summary.push(format!("Gauss-Bonnet residual {r:.3e}"));
    }
    Ok(Outcome {
        chart: Some(chart.name().into()),
        result: json!({ "energies": to_value(&rep), "expected_w_cr": expected.w_cr, "nodes": grid.len() }),
        summary,
        ..Default::default()
    })
}

fn cmd_cr_volume(s: &Settings) -> Run {
    let (chart, expected) = load_chart(s)?;
    let grid = build_grid(&chart, s.res)?;
    let mut cfg = CrVolumeConfig::default();
    if let Some(seed) = s.seed {
        cfg.seed = seed;
    }
    if let Some(k) = s.starts {
        cfg.random_starts = k;
    }
    if let Some(e) = s.max_evals {
        cfg.nelder_mead.max_evals = e;
    }
    let r = cr_volume(&chart, &grid, &cfg)?;
    let tolerances = BTreeMap::from([
        ("diameter_tol", cfg.nelder_mead.diameter_tol),
        ("refine_tol", cfg.refine_tol),
        ("clamp_radius", cfg.clamp_radius),
    ]);
    let mut summary = vec![
        format!("CR-volume of {}: {:.12}", chart.name(), r.value),
        format!("argmax |b| = {:.3e} (start {}), attained: {}", r.argmax_b.norm(), r.winning_start, r.attained),
        format!("{} starts, {} evaluations", r.restarts, r.evaluations),
    ];
    if let Some(e) = expected.cr_volume {
        summary.push(format!("expected {e:.12} (difference {:.2e})", r.value - e));
    }
    Ok(Outcome {
        chart: Some(chart.name().into()),
        tolerances,
        result: json!({ "cr_volume": to_value(&r), "config": to_value(&cfg), "expected": expected.cr_volume }),
        summary,
        ..Default::default()
    })
}

fn cmd_balance(s: &Settings) -> Run {
    let (chart, _) = load_chart(s)?;
    let grid = build_grid(&chart, s.res)?;
    let r = balance_point(&chart, &grid)?;
    let image_volume = weighted_volume(&chart, &grid, &r.b)?;
    Ok(Outcome {
        chart: Some(chart.name().into()),
        tolerances: BTreeMap::from([("balance_tol", BALANCE_TOL)]),
        summary: vec![
            format!("b* = {:?}", r.b.b().coords()),
            format!("|B(b*)| = {:.3e} after {} iterations ({})", r.residual, r.iterations, r.method),
            format!("volume of the balanced image {image_volume:.12}"),
        ],
        result: json!({ "balance": to_value(&r), "image_volume": image_volume }),
        ..Default::default()
    })
}

fn cmd_normalize(s: &Settings) -> Run {
    let (chart, _) = load_chart(s)?;
    let u = default_point(&chart, s)?;
    let formulas = match s.formulas.unwrap_or(Formulas::Consistent) {
        Formulas::Consistent => StageFormulas::Consistent,
        Formulas::Reversing => StageFormulas::Reversing,
    };
    let (factors, report) = normalize_at_point_with(&chart, &u, formulas)?;
    let image = compose_all(&chart, &factors)?;
    let h = fundamental_data(&image, &u)?.mean_curv.norm();
    let div = div_j_mean_curvature_n(&image, &u)?;
    let (h_tol, div_tol) = (1e-6, 1e-4);
    let violation = (h > h_tol || div.abs() > div_tol)
        .then(|| format!("normalized image has |H| = {h:.3e}, |div J H^N| = {:.3e}", div.abs()));
    let mut summary = vec![format!("point u = {u:?}")];
    for st in &report.stages {
        summary.push(format!("  {:<10} |H| {:.3e}  div J H^N {:.3e}", st.stage, st.mean_curvature_norm, st.div_j_h_n));
    }
    summary.push(format!("after composition: |H| {h:.3e}, div J H^N {div:.3e}"));
    Ok(Outcome {
        chart: Some(chart.name().into()),
        tolerances: BTreeMap::from([("mean_curvature", h_tol), ("div_j_h_n", div_tol)]),
        result: json!({
            "report": to_value(&report),
            "factors": to_value(&factors),
            "check": { "mean_curvature_norm": h, "div_j_h_n": div },
        }),
        summary,
        violation,
        ..Default::default()
    })
}

fn cmd_dilation(s: &Settings) -> Run {
    let (chart, expected) = load_chart(s)?;
    let grid = build_grid(&chart, s.res)?;
    let dim = 2 * chart.dim_n() + 2;
    let coords = match (&s.direction, &s.b) {
        (Some(d), _) => d.clone(),
        (None, Some(b)) if b.iter().any(|x| *x != 0.0) => b.clone(),
        _ => {
            let mut e1 = vec![0.0; dim];
            e1[0] = 1.0;
            e1
        }
    };
    let dir = AmbientVector::new(coords, chart.dim_n())?;
    let range = s.range.unwrap_or(20.0);
    if range.is_nan() || range <= 1.0 {
        return Err(Failure::Usage("--range must exceed 1".into()));
    }
    let scan = dilation_conformal_lower_bound(&chart, &grid, &dir, &default_dilation_scan(range, 81))?;
    let mut summary = vec![format!("max dilated volume {:.12} at s = {:.6}", scan.max, scan.argmax)];
    if let Some(e) = expected.cr_volume {
        summary.push(format!("excess over the CR-volume {e:.6}: {:.3e}", scan.max - e));
    }
    let csv = (
        vec!["s", "volume"],
        scan.parameters.iter().zip(&scan.values).map(|(a, b)| vec![*a, *b]).collect(),
    );
    Ok(Outcome {
        chart: Some(chart.name().into()),
        result: json!({ "scan": to_value(&scan), "cr_volume_expected": expected.cr_volume }),
        summary,
        csv: Some(csv),
        ..Default::default()
    })
}

fn cmd_scan(s: &Settings) -> Run {
    let (chart, _) = load_chart(s)?;
    let u = default_point(&chart, s)?;
    let ts = s.t.clone().unwrap_or_else(default_t_samples);
    let opts = ScanOptions::default();
    let fit = degeneration_scan(&chart, &u, &ts, &opts)?;
    let mut summary = vec![format!("point u = {u:?}")];
    for (name, c) in fit.basis.iter().zip(&fit.coefficients) {
        summary.push(format!("  coefficient of {name:<10} {c:.10}"));
    }
    summary.push(format!("|S^m| = {:.10}, residual {:.3e}", fit.sphere_volume, fit.residual_norm));
    let rows = fit
        .t_samples
        .iter()
        .zip(&fit.values)
        .zip(&fit.nodes_per_axis)
        .map(|((t, v), n)| vec![*t, *v, *n as f64])
        .collect();
    Ok(Outcome {
        chart: Some(chart.name().into()),
        tolerances: BTreeMap::from([("rel_tol", opts.rel_tol)]),
        result: json!({ "fit": to_value(&fit), "options": to_value(&opts) }),
        summary,
        csv: Some((vec!["t", "value", "nodes_per_axis"], rows)),
        ..Default::default()
    })
}

fn read_samples(path: &Path) -> Result<(Vec<f64>, Vec<f64>), Failure> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for row in reader.records() {
        let row = row.map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        let parse = |i: usize| -> Result<f64, Failure> {
            row.get(i)
                .and_then(|x| x.trim().parse().ok())
                .ok_or_else(|| Failure::Usage(format!("{}: bad row {:?}", path.display(), row)))
        };
        ts.push(parse(0)?);
        vs.push(parse(1)?);
    }
    Ok((ts, vs))
}

fn cmd_fit(s: &Settings) -> Run {
    let path = s.input.as_deref().ok_or_else(|| Failure::Usage("asymptotics fit needs --input".into()))?;
    let (ts, vs) = read_samples(path)?;
    let m = s.m.unwrap_or(2);
    let (coefficients, residual, basis) = fit_expansion(&ts, &vs, m)?;
    let summary = basis.iter().zip(&coefficients).map(|(b, c)| format!("coefficient of {b:<10} {c:.10}")).collect();
    Ok(Outcome {
        result: json!({ "m": m, "samples": ts.len(), "basis": basis, "coefficients": coefficients, "residual_norm": residual }),
        summary,
        ..Default::default()
    })
}

fn cmd_identities(s: &Settings) -> Run {
    let samples = s.cases.unwrap_or(8);
    let seed = s.seed.unwrap_or(0);
    let checks = verify_identities(samples, seed, s.res)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.chart.as_str()).collect();
    let summary = checks
        .iter()
        .map(|c| {
            format!(
                "{:<4} {:<48} vol {:.9} horiz {:.1e} sigma {:.1e} curl {:.1e} R {:.1e}",
                if c.passed { "ok" } else { "FAIL" },
                c.chart,
                c.volume,
                c.horizontality,
                c.sigma_asymmetry,
                c.beta_curl,
                c.scalar_curvature_residual
            )
        })
        .collect();
    Ok(Outcome {
        tolerances: BTreeMap::from([("volume", VOLUME_TOL), ("pointwise", POINTWISE_TOL), ("curvature", CURVATURE_TOL)]),
        result: json!({ "samples": samples, "seed": seed, "checks": to_value(&checks) }),
        summary,
        violation: (!failed.is_empty()).then(|| format!("identities failed on {failed:?}")),
        ..Default::default()
    })
}

fn cmd_appendix(s: &Settings) -> Run {
    let cases = s.cases.unwrap_or(50);
    let seed = s.seed.unwrap_or(7);
    let r = verify_appendix(cases, seed)?;
    let tol = BTreeMap::from([("integrals", 1e-10), ("recursions", 1e-9), ("c_3_4", 1e-8), ("c47_over_c45", 1e-6)]);
    let mut bad = Vec::new();
    if r.max_rel_error > tol["integrals"] {
        bad.push("integrals");
    }
    if r.recursion_residual > tol["recursions"] {
        bad.push("recursions");
    }
    if (r.c_3_4 - 0.5).abs() > tol["c_3_4"] {
        bad.push("C_{3,4}");
    }
    if (r.ratio_c47_c45 - 5.0).abs() > tol["c47_over_c45"] {
        bad.push("C_{4,7}/C_{4,5}");
    }
    Ok(Outcome {
        summary: vec![
            format!("{} integrals, max relative error {:.3e}", r.cases.len(), r.max_rel_error),
            format!("recursion residual {:.3e}, eps dependence {:.3e}", r.recursion_residual, r.eps_dependence),
            format!("C_(3,4) = {:.12}, C_(4,7)/C_(4,5) = {:.10}", r.c_3_4, r.ratio_c47_c45),
        ],
        tolerances: tol,
        result: to_value(&r),
        violation: (!bad.is_empty()).then(|| format!("appendix checks failed: {bad:?}")),
        ..Default::default()
    })
}

fn cmd_sextic(s: &Settings) -> Run {
    let seed = s.seed.unwrap_or(0);
    let results = verify_sextic(seed)?;
    let mut bad = Vec::new();
    let summary = results
        .iter()
        .map(|r| {
            let ok = match r.std_error {
                Some(se) => r.residual.abs() <= 3.0 * se,
                None => r.residual.abs() <= 1e-10,
            };
            if !ok {
                bad.push(r.m);
            }
            match r.std_error {
                Some(se) => format!("m = {}: residual {:.3e} ({:.2} standard errors)", r.m, r.residual, r.residual.abs() / se),
                None => format!("m = {}: residual {:.3e}", r.m, r.residual),
            }
        })
        .collect();
    Ok(Outcome {
        tolerances: BTreeMap::from([("quadrature", 1e-10), ("monte_carlo_sigmas", 3.0)]),
        result: json!({ "seed": seed, "results": to_value(&results) }),
        summary,
        violation: (!bad.is_empty()).then(|| format!("sextic identity failed for m in {bad:?}")),
        ..Default::default()
    })
}

fn lattice_vector(v: &Option<Vec<f64>>, flag: &str) -> Result<Option<[f64; 2]>, Failure> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
        Some(_) => Err(Failure::Usage(format!("--{flag} takes two values"))),
    }
}

fn cmd_lambda1(s: &Settings) -> Run {
    let (v1, v2, source) = match (lattice_vector(&s.v1, "v1")?, lattice_vector(&s.v2, "v2")?) {
        (Some(a), Some(b)) => (a, b, "given".to_string()),
        (None, None) => {
            // lattice realizing the flat metric of a torus chart in lattice coordinates
            let settings = Settings { chart: Some(s.chart.clone().unwrap_or_else(|| "hexagonal_torus".into())), ..s.clone() };
            let (chart, _) = load_chart(&settings)?;
            if chart.m() != 2 || !chart.axes().iter().all(|a| a.periodic && a.lo == 0.0 && a.hi == 1.0) {
                return Err(Failure::Usage("lambda1 needs a flat torus chart on [0,1)^2 or --v1/--v2".into()));
            }
            let g = fundamental_data(&chart, &[0.0, 0.0])?.metric;
            let a = g[(0, 0)].sqrt();
            let v2 = [g[(0, 1)] / a, (g[(1, 1)] - g[(0, 1)] * g[(0, 1)] / g[(0, 0)]).sqrt()];
            ([a, 0.0], v2, chart.name().to_string())
        }
        _ => return Err(Failure::Usage("give both --v1 and --v2".into())),
    };
    let l1 = lambda1_flat_torus(v1, v2)?;
    let area = (v1[0] * v2[1] - v1[1] * v2[0]).abs();
    Ok(Outcome {
        summary: vec![
            format!("lattice ({source}): v1 = {v1:?}, v2 = {v2:?}"),
            format!("lambda_1 = {l1:.12}, area {area:.12}, lambda_1 * area / 2 = {:.12}", 0.5 * l1 * area),
        ],
        result: json!({ "v1": v1, "v2": v2, "lambda1": l1, "area": area, "half_lambda1_area": 0.5 * l1 * area }),
        ..Default::default()
    })
}

fn cmd_catalog() -> Run {
    let entries = catalog();
    let summary = entries.iter().map(|e| format!("{:<18} {}", e.name, e.description)).collect();
    Ok(Outcome { result: to_value(&entries), summary, ..Default::default() })
}
