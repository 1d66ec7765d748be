//! Sampled checks of the structural assumptions on a Friedrichs system.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{HdgError, Result};
use crate::friedrichs::{abs_flux, min_sym_eigenvalue, BoundaryKind, Coercivity, FluxHypothesis, System};
use crate::mesh::{Mesh, Point};
use crate::skeleton::Skeleton;

/// Tolerance on the smallest eigenvalue in the positivity checks.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AuditCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst sampled value of the checked quantity.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct AuditReport {
    pub checks: Vec<AuditCheck>,
    pub warnings: Vec<String>,
    /// Coercivity constant of the sigma block for two-field systems.
    pub k0: Option<f64>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    worst: f64,
    at: Option<Point>,
    lower_is_worse: bool,
}

impl Tracker {
    fn new(name: &'static str, lower_is_worse: bool) -> Self {
        let worst = if lower_is_worse { f64::INFINITY } else { 0.0 };
        Tracker { name, worst, at: None, lower_is_worse }
    }

    fn see(&mut self, v: f64, x: &Point) {
        let worse = if self.lower_is_worse { v < self.worst } else { v > self.worst };
        if worse || self.at.is_none() {
            self.worst = v;
            self.at = Some(*x);
        }
    }

    fn finish(self, passed: impl Fn(f64) -> bool) -> AuditCheck {
        let at = self.at.map(|x| format!(" at ({:.4}, {:.4})", x[0], x[1])).unwrap_or_default();
        let passed = self.at.is_none() || passed(self.worst);
        AuditCheck { name: self.name, passed, worst: self.worst, detail: format!("worst {:.3e}{at}", self.worst) }
    }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sum_k d_k A_k at x, analytic if registered, otherwise by central
/// differences with step `h`.
pub fn flux_divergence(system: &System, x: &Point, region: u32, h: f64) -> DMatrix<f64> {
    if let Some(div) = system.divergence() {
        return div(x, region);
    }
    let ex = Point::new(h, 0.0);
    let ey = Point::new(0.0, h);
    let ax = system.flux_matrices(&(x + ex), region)[0].clone() - system.flux_matrices(&(x - ex), region)[0].clone();
    let ay = system.flux_matrices(&(x + ey), region)[1].clone() - system.flux_matrices(&(x - ey), region)[1].clone();
    (ax + ay) / (2.0 * h)
}

fn sample_points(mesh: &Mesh, k: usize) -> Vec<Point> {
    let p = mesh.points(k);
    let mut out = vec![mesh.centroid(k)];
    for i in 0..3 {
        out.push(p[i] * 0.6 + p[(i + 1) % 3] * 0.2 + p[(i + 2) % 3] * 0.2);
    }
    out
}

/// Checks symmetry of A_k, positivity of G + G^T + sum_k d_k A_k, the
/// coercivity structure of two-field systems, positivity of the boundary
/// operator and the flux hypothesis (F1)/(F2). With `strict`, a failed
/// check is returned as an error.
pub fn verify_assumptions(system: &System, mesh: &Mesh, skeleton: &Skeleton, strict: bool) -> Result<AuditReport> {
    let dom = mesh.domain();
    let diam = ((dom[1] - dom[0]).powi(2) + (dom[3] - dom[2]).powi(2)).sqrt();
    let h = 1e-5 * diam;
    let mut report = AuditReport::default();
    let mut sym = Tracker::new("symmetry", false);
    let mut pos = Tracker::new("positivity", true);
    let mut coer = Tracker::new("coercivity", true);
    let mut struc = Tracker::new("partial-structure", false);
    for k in mesh.active_elements() {
        let region = mesh.element(k).region;
        for x in sample_points(mesh, k) {
            let a = system.flux_matrices(&x, region);
            let s = max_abs(&(&a[0] - a[0].transpose())).max(max_abs(&(&a[1] - a[1].transpose())));
            sym.see(s / max_abs(&a[0]).max(max_abs(&a[1])).max(1.0), &x);
            let g = system.reaction(&x, region);
            let div = flux_divergence(system, &x, region, h);
            let total = &g + g.transpose() + div;
            pos.see(min_sym_eigenvalue(&total) / max_abs(&total).max(1.0), &x);
            if let System::TwoField(tf) = system {
                let ms = tf.sigma_size;
                let gss = g.view((0, 0), (ms, ms)).into_owned();
                coer.see(min_sym_eigenvalue(&gss), &x);
                if tf.coercivity == Coercivity::Partial {
                    struc.see(max_abs(&g.view((0, ms), (ms, tf.u_size)).into_owned()), &x);
                }
            }
        }
    }
    report.checks.push(sym.finish(|w| w <= 1e-12));
    report.checks.push(pos.finish(|w| w >= -POSITIVITY_TOLERANCE));
    if let System::TwoField(tf) = system {
        report.k0 = Some(coer.worst);
        report.checks.push(coer.finish(|w| w > 0.0));
        if tf.coercivity == Coercivity::Partial {
            report.checks.push(struc.finish(|w| w <= 1e-12));
        }
    }
    let mut bnd = Tracker::new("boundary-operator", true);
    let mut hyp = Tracker::new("flux-hypothesis", false);
    let mut stab = Tracker::new("stabilization", true);
    let mut degenerate = 0usize;
    let mut first_degenerate: Option<(Point, Point)> = None;
    for mo in &skeleton.mortars {
        let region = mesh.element(mo.left.element).region;
        for s in [0.25, 0.5, 0.75] {
            let x = mo.point(s);
            let n = mo.normal;
            match system {
                System::OneField(_) => {
                    if mo.boundary.is_some() {
                        let a = system.normal_flux(&x, region, &n);
                        let m = abs_flux(&a);
                        bnd.see(min_sym_eigenvalue(&(&m + m.transpose())), &x);
                    }
                }
                System::TwoField(tf) => {
                    let mu = tf.u_size;
                    let c = tf.normal_c(&x, region, &n);
                    if let Some(side) = mo.boundary {
                        let bc = tf.condition(side);
                        let rho = (bc.rho)(&x, &n);
                        let muu = DMatrix::<f64>::identity(mu, mu) * (2.0 * rho) + &c;
                        bnd.see(min_sym_eigenvalue(&muu), &x);
                        if bc.kind != BoundaryKind::Dirichlet && bc.kind != BoundaryKind::Neumann && rho < 0.0 {
                            report.warnings.push(format!("negative Robin coefficient on the {} side", side.name()));
                        }
                    }
                    if let FluxHypothesis::F1 { phi, .. } = &tf.hypothesis {
                        if phi(&x, &n).is_none() {
                            degenerate += 1;
                            first_degenerate.get_or_insert((x, n));
                        }
                    }
                    for nn in [n, -n] {
                        match tf.stabilization(&x, region, &nn, true) {
                            Ok(t) => {
                                let cn = tf.normal_c(&x, region, &nn);
                                stab.see(min_sym_eigenvalue(&(cn * 0.5 + t)), &x);
                                hyp.see(0.0, &x);
                            }
                            Err(_) if !strict => {
                                if let Ok(t) = tf.stabilization(&x, region, &nn, false) {
                                    let cn = tf.normal_c(&x, region, &nn);
                                    stab.see(min_sym_eigenvalue(&(cn * 0.5 + t)), &x);
                                    hyp.see(0.0, &x);
                                } else {
                                    hyp.see(1.0, &x);
                                }
                            }
                            Err(_) => hyp.see(1.0, &x),
                        }
                    }
                }
            }
        }
    }
    report.checks.push(bnd.finish(|w| w >= -POSITIVITY_TOLERANCE));
    if system.is_two_field() {
        report.checks.push(hyp.finish(|w| w == 0.0));
        report.checks.push(stab.finish(|w| w > 0.0));
    }
    if let Some((x, n)) = first_degenerate {
        report.warnings.push(format!(
            "{degenerate} face samples with vanishing normal flux for (F1), first at ({:.4}, {:.4}) with n = ({:.3}, {:.3})",
            x[0], x[1], n[0], n[1]
        ));
    }
    report.warnings.dedup();
    if strict {
        if let Some(c) = report.checks.iter().find(|c| !c.passed) {
            return Err(HdgError::Assumption(format!("{} check failed: {}", c.name, c.detail)));
        }
    }
    Ok(report)
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone)]
pub struct FluxOracleReport {
    pub samples: usize,
    /// Samples dropped because the flux hypothesis is undefined there.
    pub degenerate: usize,
    pub max_error: f64,
}

/// Compares the reduced two-field flux with the brute-force upwind flux at
/// random points, normals and states drawn from a seeded generator.
pub fn flux_oracle(
    system: &crate::friedrichs::TwoFieldSystem,
    domain: [f64; 4],
    region: impl Fn(&Point) -> u32,
    samples: usize,
    seed: u64,
) -> Result<FluxOracleReport> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = system.size();
    let mut report = FluxOracleReport { samples: 0, degenerate: 0, max_error: 0.0 };
    while report.samples < samples {
        let x = Point::new(rng.random_range(domain[0]..domain[1]), rng.random_range(domain[2]..domain[3]));
        let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let n = Point::new(angle.cos(), angle.sin());
        let zm = nalgebra::DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let zp = nalgebra::DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        match crate::friedrichs::flux_check_at(system, &x, region(&x), &n, &zm, &zp) {
            Ok(e) => {
                report.max_error = report.max_error.max(e);
                report.samples += 1;
            }
            Err(HdgError::FluxHypothesis { .. }) => report.degenerate += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
