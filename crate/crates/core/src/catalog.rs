//! Built-in horizontal charts and user expression charts.
//!
//! | name                | parameters            | domain                   |
//! |---------------------|-----------------------|--------------------------|
//! | `geodesic_sphere`   | `m`, `n`              | angles, pole on `x_{m+1}` |
//! | `whitney_sphere`    | `m`, `n`, `b`         | as `geodesic_sphere`     |
//! | `hexagonal_torus`   | `n` (>= 2)            | lattice coords `[0,1)^2` |
//! | `horizontal_circle` | `n`                   | `[0, 2pi)`               |
//! | `perturbed_torus`   | `amplitude`, `mode`   | `[0,1)^2`                |
//! | `legendrian_torus`  | `weights = [a, b]`    | `[0,1)^2`                |

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes,
    EvalexprError, Function, HashMapContext, Node, Value,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AmbientVector;
use crate::immersion::{Axis, ChartMap, ImmersionChart, Jet};
use crate::moebius::{compose_chart, CrAutomorphism, MoebiusParam};

/// Names accepted by [`make_chart`].
pub const CHART_NAMES: [&str; 6] = [
    "geodesic_sphere",
    "whitney_sphere",
    "hexagonal_torus",
    "horizontal_circle",
    "perturbed_torus",
    "legendrian_torus",
];

/// Optional parameters; absent fields take per-chart defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChartParams {
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub b: Option<Vec<f64>>,
    pub amplitude: Option<f64>,
    pub mode: Option<usize>,
    pub weights: Option<[u32; 2]>,
}

/// `|S^m|`.
pub fn sphere_volume(m: usize) -> f64 {
    let k = (m + 1) as f64 / 2.0;
    2.0 * PI.powf(k) / libm::tgamma(k)
}

/// Area of the hexagonal torus, `4 sqrt(3) pi^2 / 3`.
pub fn hexagonal_torus_area() -> f64 {
    4.0 * 3f64.sqrt() * PI * PI / 3.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpectedInvariants {
    pub volume: Option<f64>,
    pub w_cr: Option<f64>,
    pub cr_volume: Option<f64>,
    pub genus: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub description: String,
    pub expected: ExpectedInvariants,
}

pub fn make_chart(name: &str, params: &ChartParams) -> Result<ImmersionChart> {
    match name {
        "geodesic_sphere" => {
            let m = params.m.unwrap_or(2);
            geodesic_sphere(m, params.n.unwrap_or(m))
        }
        "whitney_sphere" => {
            let m = params.m.unwrap_or(2);
            let n = params.n.unwrap_or(m);
            let b = match &params.b {
                Some(b) => MoebiusParam::new(AmbientVector::new(b.clone(), n)?)?,
                None => MoebiusParam::new(AmbientVector::basis(n, 0).scaled(0.4))?,
            };
            whitney_sphere(m, n, &b)
        }
        "hexagonal_torus" => hexagonal_torus(params.n.unwrap_or(2)),
        "horizontal_circle" => horizontal_circle(params.n.unwrap_or(1)),
        "perturbed_torus" => perturbed_torus(params.amplitude.unwrap_or(0.3), params.mode.unwrap_or(1)),
        "legendrian_torus" => {
            let [a, b] = params.weights.unwrap_or([1, 2]);
            legendrian_torus(a, b)
        }
        other => Err(Error::UnknownChart(other.to_string())),
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    let entry = |name: &str, description: &str| CatalogEntry {
        name: name.into(),
        description: description.into(),
        expected: expected_invariants(name, &ChartParams::default()).unwrap_or_default(),
    };
    vec![
        entry("geodesic_sphere", "totally geodesic horizontal S^m in the real slice"),
        entry("whitney_sphere", "Psi_b of the geodesic sphere"),
        entry("hexagonal_torus", "minimal Legendrian hexagonal torus in S^5"),
        entry("horizontal_circle", "horizontal great circle"),
        entry("perturbed_torus", "reparameterized hexagonal torus moved by a Moebius map"),
        entry("legendrian_torus", "flat Legendrian torus with weights (a, b)"),
    ]
}

/// Known exact values for a chart, where available.
pub fn expected_invariants(name: &str, params: &ChartParams) -> Result<ExpectedInvariants> {
    let sigma_h = hexagonal_torus_area();
    Ok(match name {
        "geodesic_sphere" => {
            let m = params.m.unwrap_or(2);
            let v = sphere_volume(m);
            ExpectedInvariants {
                volume: Some(v),
                w_cr: (m == 2).then_some(v),
                cr_volume: Some(v),
                genus: (m == 2).then_some(0),
            }
        }
        "whitney_sphere" => {
            let m = params.m.unwrap_or(2);
            let v = sphere_volume(m);
            ExpectedInvariants { volume: None, w_cr: (m == 2).then_some(v), cr_volume: Some(v), genus: (m == 2).then_some(0) }
        }
        "horizontal_circle" => ExpectedInvariants { volume: Some(TAU), w_cr: None, cr_volume: Some(TAU), genus: None },
        "hexagonal_torus" => ExpectedInvariants {
            volume: Some(sigma_h),
            w_cr: Some(sigma_h),
            cr_volume: Some(sigma_h),
            genus: Some(1),
        },
        "perturbed_torus" => ExpectedInvariants { volume: None, w_cr: Some(sigma_h), cr_volume: None, genus: Some(1) },
        "legendrian_torus" => {
            let [a, b] = params.weights.unwrap_or([1, 2]);
            let t = FlatTorus::legendrian(a, b)?;
            ExpectedInvariants { volume: Some(t.area()), w_cr: None, cr_volume: None, genus: Some(1) }
        }
        other => return Err(Error::UnknownChart(other.to_string())),
    })
}

// ---------------------------------------------------------------------------
// geodesic spheres

/// Each real coordinate is a product of `sin`/`cos` of some of the angles.
#[derive(Clone, Debug)]
struct GeodesicSphere {
    m: usize,
    n: usize,
    /// factors[c] = list of (angle index, is_cos).
    factors: Vec<Vec<(usize, bool)>>,
}

impl GeodesicSphere {
    fn new(m: usize, n: usize) -> Self {
        // u = (theta_1..theta_{m-1}, phi);
        // x_{m+1} = cos th1, x_m = sin th1 cos th2, ..., x_3 = sin th1..sin th_{m-2} cos th_{m-1},
        // x_2 = sin th1..sin th_{m-1} sin phi, x_1 = sin th1..sin th_{m-1} cos phi.
        let mut factors = vec![Vec::new(); m + 1];
        let sines = |upto: usize| -> Vec<(usize, bool)> { (0..upto).map(|a| (a, false)).collect() };
        let phi = m - 1;
        let mut c0 = sines(m - 1);
        c0.push((phi, true));
        let mut c1 = sines(m - 1);
        c1.push((phi, false));
        factors[0] = c0;
        factors[1] = c1;
        for c in 2..=m {
            // x_{c+1} with c in 2..=m: angle index m - c
            let a = m - c;
            let mut f = sines(a);
            f.push((a, true));
            factors[c] = f;
        }
        Self { m, n, factors }
    }

    /// Value of coordinate `c` with the angles in `diff` differentiated
    /// (`diff` may repeat an angle for a second derivative).
    fn coord(&self, c: usize, sc: &[(f64, f64)], diff: &[usize]) -> f64 {
        let mut val = 1.0;
        for &(a, is_cos) in &self.factors[c] {
            let (s, co) = sc[a];
            let order = diff.iter().filter(|&&d| d == a).count();
            // derivatives of sin: sin, cos, -sin; of cos: cos, -sin, -cos
            val *= match (is_cos, order) {
                (false, 0) => s,
                (false, 1) => co,
                (false, _) => -s,
                (true, 0) => co,
                (true, 1) => -s,
                (true, _) => -co,
            };
        }
        // any differentiated angle absent from this coordinate kills it
        if diff.iter().any(|&d| !self.factors[c].iter().any(|&(a, _)| a == d)) {
            return 0.0;
        }
        val
    }

    fn vector(&self, sc: &[(f64, f64)], diff: &[usize]) -> AmbientVector {
        let mut coords = vec![0.0; 2 * self.n + 2];
        for (c, x) in coords.iter_mut().take(self.m + 1).enumerate() {
            *x = self.coord(c, sc, diff);
        }
        AmbientVector::new(coords, self.n).expect("length 2n+2")
    }
}

impl ChartMap for GeodesicSphere {
    fn eval(&self, u: &[f64]) -> AmbientVector {
        let sc: Vec<(f64, f64)> = u.iter().map(|a| a.sin_cos()).collect();
        self.vector(&sc, &[])
    }

    fn jet(&self, u: &[f64], order: usize) -> Option<Jet> {
        let sc: Vec<(f64, f64)> = u.iter().map(|a| a.sin_cos()).collect();
        let m = self.m;
        let d1 = (0..m).map(|i| self.vector(&sc, &[i])).collect();
        let d2 = if order >= 2 {
            (0..m * m).map(|k| self.vector(&sc, &[k / m, k % m])).collect()
        } else {
            Vec::new()
        };
        Some(Jet { point: self.vector(&sc, &[]), d1, d2 })
    }
}

pub fn geodesic_sphere(m: usize, n: usize) -> Result<ImmersionChart> {
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("geodesic_sphere needs 1 <= m <= n, got m={m}, n={n}")));
    }
    let mut axes = vec![Axis::closed(0.0, PI); m - 1];
    axes.push(Axis::periodic(0.0, TAU));
    ImmersionChart::new(format!("geodesic_sphere(m={m},n={n})"), n, axes, Arc::new(GeodesicSphere::new(m, n)))
}

pub fn horizontal_circle(n: usize) -> Result<ImmersionChart> {
    Ok(geodesic_sphere(1, n)?.renamed(format!("horizontal_circle(n={n})")))
}

pub fn whitney_sphere(m: usize, n: usize, b: &MoebiusParam) -> Result<ImmersionChart> {
    let base = geodesic_sphere(m, n)?;
    let chart = compose_chart(&base, &CrAutomorphism::from_b(b.clone()))?;
    let coords: Vec<String> = b.b().coords().iter().map(|x| format!("{x}")).collect();
    Ok(chart.renamed(format!("whitney_sphere(m={m},n={n},b=[{}])", coords.join(","))))
}

// ---------------------------------------------------------------------------
// flat tori z_j = r_j exp(2 pi i k_j . u)

#[derive(Clone, Debug)]
struct FlatTorus {
    n: usize,
    radii: Vec<f64>,
    waves: Vec<[f64; 2]>,
}

impl FlatTorus {
    fn hexagonal(n: usize) -> Self {
        Self {
            n,
            radii: vec![1.0 / 3f64.sqrt(); 3],
            waves: vec![[0.0, 1.0], [1.0, 0.0], [-1.0, -1.0]],
        }
    }

    /// `r^2 ∝ (b, a, 1)` with waves `(0,1), (1,0), (-a,-b)`; horizontal
    /// because `sum r_j^2 k_j = 0`.
    fn legendrian(a: u32, b: u32) -> Result<Self> {
        if a == 0 || b == 0 {
            return Err(Error::InvalidParameter("legendrian_torus weights must be positive".into()));
        }
        let (a, b) = (a as f64, b as f64);
        let s = a + b + 1.0;
        Ok(Self {
            n: 2,
            radii: vec![(b / s).sqrt(), (a / s).sqrt(), (1.0 / s).sqrt()],
            waves: vec![[0.0, 1.0], [1.0, 0.0], [-a, -b]],
        })
    }

    fn area(&self) -> f64 {
        let mut g = [[0.0; 2]; 2];
        for (r, k) in self.radii.iter().zip(&self.waves) {
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += 4.0 * PI * PI * r * r * k[a] * k[b];
                }
            }
        }
        (g[0][0] * g[1][1] - g[0][1] * g[1][0]).sqrt()
    }
}

impl ChartMap for FlatTorus {
    fn eval(&self, u: &[f64]) -> AmbientVector {
        self.jet(u, 0).expect("analytic").point
    }

    fn jet(&self, u: &[f64], order: usize) -> Option<Jet> {
        let n1 = self.n + 1;
        let dim = 2 * n1;
        let mut p = vec![0.0; dim];
        let mut d1 = vec![vec![0.0; dim]; 2];
        let mut d2 = vec![vec![0.0; dim]; if order >= 2 { 4 } else { 0 }];
        for (j, (r, k)) in self.radii.iter().zip(&self.waves).enumerate() {
            let th = TAU * (k[0] * u[0] + k[1] * u[1]);
            let (s, c) = th.sin_cos();
            p[j] = r * c;
            p[n1 + j] = r * s;
            for a in 0..2 {
                d1[a][j] = -TAU * k[a] * r * s;
                d1[a][n1 + j] = TAU * k[a] * r * c;
            }
            for (ab, v) in d2.iter_mut().enumerate() {
                let f = -TAU * TAU * k[ab / 2] * k[ab % 2] * r;
                v[j] = f * c;
                v[n1 + j] = f * s;
            }
        }
        let wrap = |c: Vec<f64>| AmbientVector::new(c, self.n).expect("length 2n+2");
        Some(Jet { point: wrap(p), d1: d1.into_iter().map(wrap).collect(), d2: d2.into_iter().map(wrap).collect() })
    }
}

/// The hexagonal torus `(e^{2 pi i t}, e^{2 pi i s}, e^{-2 pi i (s+t)})/sqrt(3)`
/// in lattice coordinates `(s, t)`, padded with zeros for `n > 2`.
pub fn hexagonal_torus(n: usize) -> Result<ImmersionChart> {
    if n < 2 {
        return Err(Error::InvalidParameter("hexagonal_torus needs n >= 2".into()));
    }
    let axes = vec![Axis::periodic(0.0, 1.0); 2];
    let name = if n == 2 { "hexagonal_torus".to_string() } else { format!("hexagonal_torus(n={n})") };
    ImmersionChart::new(name, n, axes, Arc::new(FlatTorus::hexagonal(n)))
}

pub fn legendrian_torus(a: u32, b: u32) -> Result<ImmersionChart> {
    let axes = vec![Axis::periodic(0.0, 1.0); 2];
    ImmersionChart::new(format!("legendrian_torus(a={a},b={b})"), 2, axes, Arc::new(FlatTorus::legendrian(a, b)?))
}

// ---------------------------------------------------------------------------
// perturbed torus

/// `(s, t) -> (s + c sin(2 pi k t), t + c sin(2 pi k s))` with
/// `c = amplitude / (4 pi k)`, followed by the base map.
struct SineReparam {
    base: Arc<dyn ChartMap>,
    amplitude: f64,
    mode: f64,
}

impl SineReparam {
    fn reparam(&self, u: &[f64]) -> ([f64; 2], [[f64; 2]; 2], [[f64; 2]; 2]) {
        let w = TAU * self.mode;
        let c = self.amplitude / (2.0 * w);
        let (ss, cs) = (w * u[0]).sin_cos();
        let (st, ct) = (w * u[1]).sin_cos();
        let v = [u[0] + c * st, u[1] + c * ss];
        // jac[a][i] = d v_a / d u_i
        let jac = [[1.0, c * w * ct], [c * w * cs, 1.0]];
        // only d^2 v_0/dt^2 and d^2 v_1/ds^2 are nonzero
        let hess = [[0.0, -c * w * w * st], [-c * w * w * ss, 0.0]];
        (v, jac, hess)
    }
}

impl ChartMap for SineReparam {
    fn eval(&self, u: &[f64]) -> AmbientVector {
        let (v, _, _) = self.reparam(u);
        self.base.eval(&v)
    }

    fn jet(&self, u: &[f64], order: usize) -> Option<Jet> {
        let (v, jac, hess) = self.reparam(u);
        let inner = self.base.jet(&v, order)?;
        let dim_n = inner.point.dim_n();
        let mut d1 = Vec::with_capacity(2);
        for i in 0..2 {
            let mut t = AmbientVector::zeros(dim_n);
            for a in 0..2 {
                t.add_scaled(jac[a][i], &inner.d1[a]);
            }
            d1.push(t);
        }
        let mut d2 = Vec::new();
        if order >= 2 && inner.has_second() {
            for i in 0..2 {
                for j in 0..2 {
                    let mut t = AmbientVector::zeros(dim_n);
                    for a in 0..2 {
                        for b in 0..2 {
                            t.add_scaled(jac[a][i] * jac[b][j], inner.second(a, b));
                        }
                    }
                    // second derivatives of the reparameterization are diagonal
                    if i == j {
                        let a = 1 - i;
                        t.add_scaled(hess[a][i], &inner.d1[a]);
                    }
                    d2.push(t);
                }
            }
        }
        Some(Jet { point: inner.point, d1, d2 })
    }
}

/// Non-minimal Legendrian torus: a sine reparameterization of the
/// hexagonal torus (orientation preserving for amplitude < 2) moved by
/// `Psi_b` with `|b| = amplitude` in a mode-dependent complex direction.
pub fn perturbed_torus(amplitude: f64, mode: usize) -> Result<ImmersionChart> {
    if !(0.0..0.9).contains(&amplitude) {
        return Err(Error::InvalidParameter(format!("perturbed_torus amplitude must lie in [0, 0.9), got {amplitude}")));
    }
    if mode == 0 {
        return Err(Error::InvalidParameter("perturbed_torus mode must be >= 1".into()));
    }
    let n = 2;
    let map = Arc::new(SineReparam { base: Arc::new(FlatTorus::hexagonal(n)), amplitude, mode: mode as f64 });
    let base = ImmersionChart::new("reparam", n, vec![Axis::periodic(0.0, 1.0); 2], map)?;
    let mut dir = AmbientVector::basis(n, mode % 3);
    dir = &dir + &AmbientVector::basis(n, 3 + (mode + 1) % 3);
    let b = MoebiusParam::new(dir.scaled(amplitude / 2f64.sqrt()))?;
    let chart = compose_chart(&base, &CrAutomorphism::from_b(b))?;
    Ok(chart.renamed(format!("perturbed_torus(amplitude={amplitude},mode={mode})")))
}

// ---------------------------------------------------------------------------
// expression charts

/// User chart given by one expression per real coordinate in the
/// variables `u1..um`; derivatives by finite differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressionChartSpec {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub axes: Vec<Axis>,
    /// `2n + 2` expressions: `x_1..x_{n+1}, y_1..y_{n+1}`.
    pub components: Vec<String>,
}

impl ExpressionChartSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Expression(e.to_string()))
    }
}

struct ExpressionMap {
    nodes: Vec<Node<DefaultNumericTypes>>,
    context: HashMapContext<DefaultNumericTypes>,
    n: usize,
}

fn unary(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |v: &Value<DefaultNumericTypes>| Ok(Value::Float(f(v.as_number()?))))
}

fn base_context() -> Result<HashMapContext<DefaultNumericTypes>> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let map_err = |e: EvalexprError<DefaultNumericTypes>| Error::Expression(e.to_string());
    let fns: [(&str, fn(f64) -> f64); 9] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("sinh", f64::sinh),
        ("cosh", f64::cosh),
        ("atan", f64::atan),
    ];
    for (name, f) in fns {
        ctx.set_function(name.into(), unary(f)).map_err(map_err)?;
    }
    ctx.set_value("pi".into(), Value::Float(PI)).map_err(map_err)?;
    Ok(ctx)
}

impl ExpressionMap {
    fn eval_checked(&self, u: &[f64]) -> Result<AmbientVector> {
        let mut ctx = self.context.clone();
        for (i, x) in u.iter().enumerate() {
            ctx.set_value(format!("u{}", i + 1), Value::Float(*x))
                .map_err(|e| Error::Expression(e.to_string()))?;
        }
        let coords = self
            .nodes
            .iter()
            .map(|node| node.eval_number_with_context(&ctx).map_err(|e| Error::Expression(e.to_string())))
            .collect::<Result<Vec<f64>>>()?;
        AmbientVector::new(coords, self.n)
    }
}

impl ChartMap for ExpressionMap {
    fn eval(&self, u: &[f64]) -> AmbientVector {
        // Compilation and a trial evaluation happened at construction, so
        // a failure here means a domain error such as sqrt of a negative.
        self.eval_checked(u).unwrap_or_else(|_| AmbientVector::from_coords(vec![f64::NAN; 2 * self.n + 2]).expect("even length"))
    }
}

pub fn expression_chart(spec: &ExpressionChartSpec) -> Result<ImmersionChart> {
    if spec.components.len() != 2 * spec.n + 2 {
        return Err(Error::DimensionMismatch { expected: 2 * spec.n + 2, found: spec.components.len() });
    }
    if spec.axes.len() != spec.m {
        return Err(Error::DimensionMismatch { expected: spec.m, found: spec.axes.len() });
    }
    let nodes = spec
        .components
        .iter()
        .map(|c| build_operator_tree::<DefaultNumericTypes>(c).map_err(|e| Error::Expression(format!("{c}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let map = ExpressionMap { nodes, context: base_context()?, n: spec.n };
    let center: Vec<f64> = spec.axes.iter().map(Axis::midpoint).collect();
    map.eval_checked(&center)?;
    ImmersionChart::new(spec.name.clone(), spec.n, spec.axes.clone(), Arc::new(map))
}
