//! Benchmark problems: system builders, exact solutions, material maps and
//! output functionals.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::adjoint::{Field, FunctionalTerm, OutputFunctional};
use crate::error::{HdgError, Result};
use crate::friedrichs::{
    BoundaryCondition, BoundaryKind, Coercivity, FluxHypothesis, OneFieldSystem, System, TwoFieldSystem,
};
use crate::mesh::{BoundarySide, Mesh, Point};

pub type ScalarFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type RegionScalarFn = Arc<dyn Fn(&Point, u32) -> f64 + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point, u32) -> Matrix2<f64> + Send + Sync>;

/// kappa = R(theta) diag(kappa_x, kappa_y) R(theta)^T with kappa_x >= kappa_y > 0.
pub fn rotated_kappa(theta: f64, kappa_x: f64, kappa_y: f64) -> Result<Matrix2<f64>> {
    if !(kappa_y > 0.0) || kappa_x < kappa_y {
        return Err(HdgError::Parameter(format!(
            "need kappa_x >= kappa_y > 0, got kappa_x = {kappa_x}, kappa_y = {kappa_y}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let r = Matrix2::new(c, -s, s, c);
    Ok(r * Matrix2::new(kappa_x, 0.0, 0.0, kappa_y) * r.transpose())
}

/// Boundary condition of a diffusion problem.
#[derive(Clone)]
pub enum EllipticBc {
    /// u = g.
    Dirichlet(ScalarFn),
    /// kappa grad u . n + lambda u = g; lambda = 0 is a Neumann condition.
    Robin { lambda: f64, g: ScalarFn },
}

fn grad_b() -> [DMatrix<f64>; 2] {
    [DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), DMatrix::from_row_slice(2, 1, &[0.0, 1.0])]
}

fn zero_mat(n: usize) -> crate::friedrichs::MatFn {
    Arc::new(move |_: &Point, _: u32| DMatrix::zeros(n, n))
}

/// -div(kappa grad u) = f as a two-field system in (sigma, u) with
/// sigma = -kappa grad u, partial coercivity and hypothesis (F2).
pub fn elliptic_system(kappa: TensorFn, forcing: RegionScalarFn, bcs: [EllipticBc; 4]) -> System {
    let kinv = {
        let kappa = kappa.clone();
        Arc::new(move |x: &Point, r: u32| {
            let k = kappa(x, r);
            let inv = k.try_inverse().expect("invertible diffusivity");
            let mut g = DMatrix::zeros(3, 3);
            for i in 0..2 {
                for j in 0..2 {
                    g[(i, j)] = inv[(i, j)];
                }
            }
            g
        })
    };
    let boundary = bcs.map(|bc| match bc {
        EllipticBc::Dirichlet(g) => BoundaryCondition {
            kind: BoundaryKind::Dirichlet,
            rho: Arc::new(|_: &Point, _: &Point| 0.5),
            data: Arc::new(move |x: &Point, _: &Point| DVector::from_element(1, g(x))),
        },
        EllipticBc::Robin { lambda, g } => BoundaryCondition {
            kind: if lambda == 0.0 { BoundaryKind::Neumann } else { BoundaryKind::Robin },
            rho: Arc::new(move |_: &Point, _: &Point| lambda),
            // the boundary row balances sigma.n - lambda u = -(kappa grad u.n + lambda u)
            data: Arc::new(move |x: &Point, _: &Point| DVector::from_element(1, -g(x))),
        },
    });
    System::TwoField(TwoFieldSystem {
        sigma_size: 2,
        u_size: 1,
        b: grad_b(),
        c: [zero_mat(1), zero_mat(1)],
        reaction: kinv,
        forcing: Arc::new(move |x: &Point, r: u32| DVector::from_vec(vec![0.0, 0.0, forcing(x, r)])),
        divergence: Some(zero_mat(3)),
        coercivity: Coercivity::Partial,
        hypothesis: FluxHypothesis::F2,
        boundary,
    })
}

/// div(beta u) = f with div beta = 0 as a one-field system; `inflow`
/// supplies the data on each side, used where beta . n < 0.
pub fn advection_system(
    beta: Arc<dyn Fn(&Point) -> [f64; 2] + Send + Sync>,
    forcing: ScalarFn,
    inflow: Arc<dyn Fn(&Point, BoundarySide) -> f64 + Send + Sync>,
) -> System {
    let b1 = beta.clone();
    let b2 = beta.clone();
    System::OneField(OneFieldSystem {
        size: 1,
        flux: [
            Arc::new(move |x: &Point, _: u32| DMatrix::from_element(1, 1, b1(x)[0])),
            Arc::new(move |x: &Point, _: u32| DMatrix::from_element(1, 1, b2(x)[1])),
        ],
        reaction: zero_mat(1),
        forcing: Arc::new(move |x: &Point, _: u32| DVector::from_element(1, forcing(x))),
        divergence: None,
        boundary_data: Arc::new(move |x: &Point, side: BoundarySide| DVector::from_element(1, inflow(x, side))),
    })
}

/// Boundary condition of a convection-diffusion problem.
#[derive(Clone)]
pub enum ConvDiffBc {
    /// u = g.
    Dirichlet(ScalarFn),
    /// Total normal flux (beta u - kappa grad u) . n = g on a zero-flow side.
    Neumann(ScalarFn),
    /// Total normal flux = g on an inflow side, rho = -beta . n.
    Robin(ScalarFn),
}

/// T = (sqrt(b^2 + 4) - b) / 2 with b = beta . n, the stabilization of the
/// convection-diffusion system under (F1).
pub fn convection_diffusion_t(bn: f64) -> f64 {
    0.5 * ((bn * bn + 4.0).sqrt() - bn)
}

/// -div(eps grad u) + div(beta u) = f with constant beta as a two-field
/// system with partial coercivity and hypothesis (F1).
pub fn convection_diffusion_system(beta: [f64; 2], eps: f64, forcing: ScalarFn, bcs: [ConvDiffBc; 4]) -> System {
    let bnorm = (beta[0] * beta[0] + beta[1] * beta[1]).sqrt();
    let bn = move |n: &Point| beta[0] * n[0] + beta[1] * n[1];
    let degenerate = move |b: f64| b.abs() < 1e-10 * bnorm;
    let boundary = bcs.map(|bc| match bc {
        ConvDiffBc::Dirichlet(g) => BoundaryCondition {
            kind: BoundaryKind::Dirichlet,
            rho: Arc::new(|_: &Point, _: &Point| 0.5),
            data: Arc::new(move |x: &Point, _: &Point| DVector::from_element(1, g(x))),
        },
        ConvDiffBc::Neumann(g) => BoundaryCondition {
            kind: BoundaryKind::Neumann,
            rho: Arc::new(|_: &Point, _: &Point| 0.0),
            data: Arc::new(move |x: &Point, _: &Point| DVector::from_element(1, g(x))),
        },
        ConvDiffBc::Robin(g) => BoundaryCondition {
            kind: BoundaryKind::Robin,
            rho: Arc::new(move |_: &Point, n: &Point| -bn(n)),
            data: Arc::new(move |x: &Point, _: &Point| DVector::from_element(1, g(x))),
        },
    });
    System::TwoField(TwoFieldSystem {
        sigma_size: 2,
        u_size: 1,
        b: grad_b(),
        c: [
            Arc::new(move |_: &Point, _: u32| DMatrix::from_element(1, 1, beta[0])),
            Arc::new(move |_: &Point, _: u32| DMatrix::from_element(1, 1, beta[1])),
        ],
        reaction: Arc::new(move |_: &Point, _: u32| {
            let mut g = DMatrix::zeros(3, 3);
            g[(0, 0)] = 1.0 / eps;
            g[(1, 1)] = 1.0 / eps;
            g
        }),
        forcing: Arc::new(move |x: &Point, _: u32| DVector::from_vec(vec![0.0, 0.0, forcing(x)])),
        divergence: Some(zero_mat(3)),
        coercivity: Coercivity::Partial,
        hypothesis: FluxHypothesis::F1 {
            phi: Arc::new(move |_: &Point, n: &Point| {
                let b = bn(n);
                (!degenerate(b)).then(|| DMatrix::from_element(1, 1, 2.0 / b))
            }),
            psi: Arc::new(move |_: &Point, n: &Point| {
                let b = bn(n);
                (!degenerate(b)).then(|| DMatrix::from_element(1, 1, b / (b * b + 4.0).sqrt()))
            }),
            limit: Some(Arc::new(move |_: &Point, n: &Point| DMatrix::from_element(1, 1, convection_diffusion_t(bn(n))))),
        },
        boundary,
    })
}

/// u = 2 (x^2 + y^2)^(-3/4) x y (1 - x)(1 - y) and its gradient; the
/// origin maps to the continuous limit 0.
pub fn e1_exact(x: f64, y: f64) -> (f64, [f64; 2]) {
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    let phi = 2.0 * x * y * r2.powf(-0.75);
    let px = 2.0 * y * r2.powf(-0.75) - 3.0 * x * x * y * r2.powf(-1.75);
    let py = 2.0 * x * r2.powf(-0.75) - 3.0 * x * y * y * r2.powf(-1.75);
    let psi = (1.0 - x) * (1.0 - y);
    (phi * psi, [px * psi - phi * (1.0 - y), py * psi - phi * (1.0 - x)])
}

/// -Laplace of [`e1_exact`].
pub fn e1_forcing(x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    if r2 == 0.0 {
        return 0.0;
    }
    let px = 2.0 * y * r2.powf(-0.75) - 3.0 * x * x * y * r2.powf(-1.75);
    let py = 2.0 * x * r2.powf(-0.75) - 3.0 * x * y * y * r2.powf(-1.75);
    let lap = -7.5 * x * y * r2.powf(-1.75);
    let psi = (1.0 - x) * (1.0 - y);
    -(psi * lap - 2.0 * (px * (1.0 - y) + py * (1.0 - x)))
}

/// Inflow data on the bottom edge.
pub fn hp1_bottom(x: f64) -> f64 {
    if x <= 0.5 {
        (2.0 * PI * x).sin().powi(6)
    } else {
        0.0
    }
}

/// s(y) = int_0^y beta_1 / beta_2.
pub fn hp1_s(y: f64) -> f64 {
    0.5 * y + (1.0 - (PI * y).cos()) / (2.0 * PI)
}

pub fn hp1_beta(p: &Point) -> [f64; 2] {
    [1.0 + (PI * p[1]).sin(), 2.0]
}

/// Inflow point of the characteristic through (x, y).
pub fn hp1_foot_point(x: f64, y: f64) -> Point {
    let x0 = x - hp1_s(y);
    if x0 >= 0.0 {
        return Point::new(x0, 0.0);
    }
    // s is increasing, so bisect s(y_l) = s(y) - x on [0, y]
    let target = hp1_s(y) - x;
    let (mut lo, mut hi) = (0.0, y);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hp1_s(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Point::new(0.0, 0.5 * (lo + hi))
}

/// Exact solution by the method of characteristics.
pub fn hp1_exact(x: f64, y: f64) -> f64 {
    let foot = hp1_foot_point(x, y);
    if foot[1] == 0.0 && foot[0] >= 0.0 && x - hp1_s(y) >= 0.0 {
        hp1_bottom(foot[0])
    } else {
        1.0
    }
}

fn cos_moment(k: usize, a: f64, y: f64) -> f64 {
    let (s, c) = (a * y).sin_cos();
    match k {
        0 => s / a,
        1 => y * s / a + c / (a * a),
        _ => y * y * s / a + 2.0 * y * c / (a * a) - 2.0 * s / (a * a * a),
    }
}

/// Cosine coefficients C_i = 2 int_0^1 u_0(y) cos(i pi y) dy of the inflow
/// profile u_0 = (y - 1)^2 for y > 1/2 and -y^2 otherwise, in closed form.
pub fn hb1_coefficient(i: usize) -> f64 {
    if i == 0 {
        return 0.0;
    }
    let a = i as f64 * PI;
    let m = |k: usize, lo: f64, hi: f64| cos_moment(k, a, hi) - cos_moment(k, a, lo);
    let upper = m(2, 0.5, 1.0) - 2.0 * m(1, 0.5, 1.0) + m(0, 0.5, 1.0);
    let lower = -m(2, 0.0, 0.5);
    2.0 * (upper + lower)
}

/// C_0 = int_0^1 u_0.
pub fn hb1_mean() -> f64 {
    0.0
}

pub fn hb1_inflow_profile(y: f64) -> f64 {
    if y > 0.5 {
        (y - 1.0).powi(2)
    } else {
        -y * y
    }
}

/// Truncated series solution of -eps Laplace u + u_x = 0 on the unit square
/// and its gradient.
pub fn hb1_exact(x: f64, y: f64, eps: f64, terms: usize) -> (f64, [f64; 2]) {
    let mut u = hb1_mean();
    let mut g = [0.0, 0.0];
    for i in 1..=terms {
        let ci = hb1_coefficient(i);
        let a = i as f64 * PI;
        let sig = eps * a * a;
        let root = (1.0 + 4.0 * eps * sig).sqrt();
        let s1 = (1.0 + root) / (2.0 * eps);
        let s2 = (1.0 - root) / (2.0 * eps);
        let den = 1.0 - (s2 - s1).exp();
        let e2 = (s2 * x).exp();
        let e1 = (s1 * (x - 1.0) + s2).exp();
        let xf = (e2 - e1) / den;
        let dxf = (s2 * e2 - s1 * e1) / den;
        let (sy, cy) = (a * y).sin_cos();
        u += ci * xf * cy;
        g[0] += ci * dxf * cy;
        g[1] -= ci * xf * a * sy;
    }
    (u, g)
}

/// Material of the battery geometry. Points on the few interface lines the
/// half-open table leaves uncovered take the first material whose closed
/// rectangle contains them.
pub fn battery_material(x: f64, y: f64) -> u32 {
    type R = (f64, f64, bool, bool, f64, f64, bool, bool);
    // (x0, x1, x0 closed, x1 closed, y0, y1, y0 closed, y1 closed)
    const TABLE: [(u32, R); 11] = [
        (1, (0.0, 8.4, true, true, 0.0, 0.8, true, false)),
        (1, (8.0, 8.4, false, true, 0.8, 23.2, true, true)),
        (1, (0.0, 8.4, true, true, 23.2, 24.0, false, true)),
        (2, (0.0, 6.1, true, false, 1.6, 3.6, true, false)),
        (2, (0.0, 6.1, true, false, 18.8, 21.2, true, false)),
        (3, (0.0, 6.1, true, false, 3.6, 18.8, true, false)),
        (4, (6.1, 6.5, true, false, 0.8, 21.2, true, false)),
        (5, (0.0, 6.1, true, false, 0.8, 1.6, true, false)),
        (5, (6.5, 8.0, false, false, 0.8, 21.2, true, false)),
        (5, (0.0, 8.0, true, false, 21.2, 23.2, true, false)),
        (0, (0.0, 0.0, false, false, 0.0, 0.0, false, false)),
    ];
    let inside = |v: f64, lo: f64, hi: f64, lc: bool, hc: bool| {
        (if lc { v >= lo } else { v > lo }) && (if hc { v <= hi } else { v < hi })
    };
    for (mat, r) in TABLE.iter().take(10) {
        if inside(x, r.0, r.1, r.2, r.3) && inside(y, r.4, r.5, r.6, r.7) {
            return *mat;
        }
    }
    for (mat, r) in TABLE.iter().take(10) {
        if inside(x, r.0, r.1, true, true) && inside(y, r.4, r.5, true, true) {
            return *mat;
        }
    }
    0
}

/// (kappa_x, kappa_y, f) of each battery material.
pub fn battery_coefficients(material: u32) -> (f64, f64, f64) {
    match material {
        1 => (25.0, 25.0, 0.0),
        2 => (7.0, 0.8, 0.0),
        3 => (5.0, 1e-5, 1.0),
        4 => (0.2, 0.2, 1.0),
        _ => (0.05, 0.05, 0.0),
    }
}

/// x and y interface breakpoints of the battery geometry.
pub const BATTERY_X: [f64; 5] = [0.0, 6.1, 6.5, 8.0, 8.4];
pub const BATTERY_Y: [f64; 8] = [0.0, 0.8, 1.6, 3.6, 18.8, 21.2, 23.2, 24.0];

/// Subdivides every breakpoint interval into pieces no longer than `h`.
pub fn subdivide(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut out = vec![breaks[0]];
    for w in breaks.windows(2) {
        let n = ((w[1] - w[0]) / h).ceil().max(1.0) as usize;
        for i in 1..=n {
            out.push(if i == n { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / n as f64 });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    E1,
    E2,
    E3,
    Hp1,
    Hb1,
    PoissonSin,
}

impl ProblemId {
    pub fn parse(s: &str) -> Result<ProblemId> {
        match s.to_ascii_lowercase().as_str() {
            "e1" => Ok(ProblemId::E1),
            "e2" => Ok(ProblemId::E2),
            "e3" => Ok(ProblemId::E3),
            "hp1" => Ok(ProblemId::Hp1),
            "hb1" => Ok(ProblemId::Hb1),
            "poisson_sin" => Ok(ProblemId::PoissonSin),
            _ => Err(HdgError::Config(format!("unknown problem '{s}'"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::E1 => "e1",
            ProblemId::E2 => "e2",
            ProblemId::E3 => "e3",
            ProblemId::Hp1 => "hp1",
            ProblemId::Hb1 => "hb1",
            ProblemId::PoissonSin => "poisson_sin",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ProblemParams {
    /// Factor applied to the diffusivity of the elliptic problems.
    pub kappa_scale: f64,
    /// Diffusivity of the boundary-layer problem.
    pub epsilon: f64,
    /// Series terms of the boundary-layer exact solution.
    pub series_terms: usize,
    /// Anisotropy ratio of the skewed-diffusion problem.
    pub anisotropy: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        ProblemParams { kappa_scale: 1.0, epsilon: 1e-2, series_terms: 20, anisotropy: 1000.0 }
    }
}

pub struct Problem {
    pub id: ProblemId,
    pub system: System,
    pub exact: Option<ScalarFn>,
    pub functional: OutputFunctional,
    pub region: Arc<dyn Fn(&Point) -> u32 + Send + Sync>,
    /// Initial grid breakpoints; `None` means a uniform grid of the domain.
    pub breakpoints: Option<(Vec<f64>, Vec<f64>)>,
    pub domain: [f64; 4],
}

fn boundary_functional(name: &str, sides: Vec<BoundarySide>, weight: ScalarFn) -> OutputFunctional {
    let term = |field| {
        let w = weight.clone();
        FunctionalTerm { field, weight: Arc::new(move |x: &Point, _: &Point| -w(x)) }
    };
    OutputFunctional {
        name: name.to_string(),
        sides,
        terms: vec![term(Field::SigmaNormal), term(Field::U), term(Field::UHat)],
    }
}

fn coscos(x: &Point) -> f64 {
    (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
}

impl Problem {
    pub fn new(id: ProblemId, params: &ProblemParams) -> Result<Problem> {
        let unit = [0.0, 1.0, 0.0, 1.0];
        let one: ScalarFn = Arc::new(|_: &Point| 1.0);
        let ks = params.kappa_scale;
        if !(ks > 0.0) {
            return Err(HdgError::Parameter("kappa scale must be positive".into()));
        }
        let region_zero: Arc<dyn Fn(&Point) -> u32 + Send + Sync> = Arc::new(|_: &Point| 0);
        let p = match id {
            ProblemId::E1 | ProblemId::PoissonSin => {
                let sin = id == ProblemId::PoissonSin;
                let zero: ScalarFn = Arc::new(|_: &Point| 0.0);
                let f: RegionScalarFn = if sin {
                    Arc::new(move |x: &Point, _| ks * 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin())
                } else {
                    Arc::new(move |x: &Point, _| ks * e1_forcing(x[0], x[1]))
                };
                let system = elliptic_system(
                    Arc::new(move |_: &Point, _| Matrix2::identity() * ks),
                    f,
                    std::array::from_fn(|_| EllipticBc::Dirichlet(zero.clone())),
                );
                let exact: ScalarFn = if sin {
                    Arc::new(|x: &Point| (PI * x[0]).sin() * (PI * x[1]).sin())
                } else {
                    Arc::new(|x: &Point| e1_exact(x[0], x[1]).0)
                };
                Problem {
                    id,
                    system,
                    exact: Some(exact),
                    functional: boundary_functional("e1", vec![BoundarySide::Left, BoundarySide::Bottom], one),
                    region: region_zero,
                    breakpoints: None,
                    domain: unit,
                }
            }
            ProblemId::E2 => {
                let kappa = rotated_kappa(PI / 4.0, params.anisotropy, 1.0)? * ks;
                // x = 1 or y = 0 carries 1, x = 0 or y = 1 carries 0
                let bcs = [
                    EllipticBc::Dirichlet(Arc::new(|_: &Point| 0.0)),
                    EllipticBc::Dirichlet(Arc::new(|_: &Point| 1.0)),
                    EllipticBc::Dirichlet(Arc::new(|_: &Point| 1.0)),
                    EllipticBc::Dirichlet(Arc::new(|_: &Point| 0.0)),
                ];
                let system = elliptic_system(Arc::new(move |_: &Point, _| kappa), Arc::new(|_: &Point, _| 0.0), bcs);
                Problem {
                    id,
                    system,
                    exact: None,
                    functional: boundary_functional("e2", BoundarySide::ALL.to_vec(), Arc::new(coscos)),
                    region: region_zero,
                    breakpoints: None,
                    domain: unit,
                }
            }
            ProblemId::E3 => {
                let kappa: TensorFn = Arc::new(move |_: &Point, r: u32| {
                    let (kx, ky, _) = battery_coefficients(r);
                    Matrix2::new(kx, 0.0, 0.0, ky) * ks
                });
                let f: RegionScalarFn = Arc::new(move |_: &Point, r: u32| ks * battery_coefficients(r).2);
                let robin = |lambda: f64, g: f64| EllipticBc::Robin { lambda: lambda * ks, g: Arc::new(move |_: &Point| g * ks) };
                // left, right, bottom, top
                let bcs = [robin(0.0, 0.0), robin(2.0, 2.0), robin(3.0, 1.0), robin(1.0, 3.0)];
                let system = elliptic_system(kappa, f, bcs);
                Problem {
                    id,
                    system,
                    exact: None,
                    functional: boundary_functional("e3", vec![BoundarySide::Left], one),
                    region: Arc::new(|x: &Point| battery_material(x[0], x[1])),
                    breakpoints: Some((subdivide(&BATTERY_X, 1.2), subdivide(&BATTERY_Y, 1.2))),
                    domain: [0.0, 8.4, 0.0, 24.0],
                }
            }
            ProblemId::Hp1 => {
                let system = advection_system(
                    Arc::new(hp1_beta),
                    Arc::new(|_: &Point| 0.0),
                    Arc::new(|x: &Point, side| match side {
                        BoundarySide::Left => 1.0,
                        BoundarySide::Bottom => hp1_bottom(x[0]),
                        _ => 0.0,
                    }),
                );
                let weight = Arc::new(|x: &Point, n: &Point| {
                    let b = hp1_beta(x);
                    let bn = b[0] * n[0] + b[1] * n[1];
                    0.5 * (-bn - bn.abs()) * coscos(x)
                });
                Problem {
                    id,
                    system,
                    exact: Some(Arc::new(|x: &Point| hp1_exact(x[0], x[1]))),
                    functional: OutputFunctional {
                        name: "hp1".into(),
                        sides: BoundarySide::ALL.to_vec(),
                        terms: vec![FunctionalTerm { field: Field::UHat, weight }],
                    },
                    region: region_zero,
                    breakpoints: None,
                    domain: unit,
                }
            }
            ProblemId::Hb1 => {
                let eps = params.epsilon;
                let terms = params.series_terms;
                if !(eps > 0.0) {
                    return Err(HdgError::Parameter("epsilon must be positive".into()));
                }
                // total flux (beta u - eps grad u) . n at x = 0 with n = (-1, 0)
                let inflow: ScalarFn = Arc::new(move |x: &Point| {
                    let (u, g) = hb1_exact(0.0, x[1], eps, terms);
                    -(u - eps * g[0])
                });
                let zero: ScalarFn = Arc::new(|_: &Point| 0.0);
                let bcs = [
                    ConvDiffBc::Robin(inflow),
                    ConvDiffBc::Dirichlet(zero.clone()),
                    ConvDiffBc::Neumann(zero.clone()),
                    ConvDiffBc::Neumann(zero),
                ];
                let system = convection_diffusion_system([1.0, 0.0], eps, Arc::new(|_: &Point| 0.0), bcs);
                Problem {
                    id,
                    system,
                    exact: Some(Arc::new(move |x: &Point| hb1_exact(x[0], x[1], eps, terms).0)),
                    functional: OutputFunctional {
                        name: "hb1".into(),
                        sides: vec![BoundarySide::Right],
                        terms: vec![FunctionalTerm { field: Field::UHat, weight: Arc::new(|_: &Point, _: &Point| 1.0) }],
                    },
                    region: region_zero,
                    breakpoints: None,
                    domain: unit,
                }
            }
        };
        Ok(p)
    }

    /// Initial mesh: the problem's interface-aligned grid if it has one,
    /// otherwise a uniform nx-by-ny grid.
    pub fn initial_mesh(&self, nx: usize, ny: usize, degree: usize) -> Result<Mesh> {
        let region = self.region.clone();
        match &self.breakpoints {
            Some((xs, ys)) => Mesh::tensor(xs.clone(), ys.clone(), degree, move |x| region(x)),
            None => Mesh::structured(self.domain, nx, ny, degree, move |x| region(x)),
        }
    }
}
