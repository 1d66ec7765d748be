//! Friedrichs system descriptors, the upwind operator |A|, the two-field
//! stabilization T and the numerical-flux pieces used by the assembly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{HdgError, Result};
use crate::mesh::{BoundarySide, Point};

pub type MatFn = Arc<dyn Fn(&Point, u32) -> DMatrix<f64> + Send + Sync>;
pub type VecFn = Arc<dyn Fn(&Point, u32) -> DVector<f64> + Send + Sync>;
/// Boundary data evaluated at (x, outward normal).
pub type BoundaryVecFn = Arc<dyn Fn(&Point, &Point) -> DVector<f64> + Send + Sync>;
pub type BoundaryScalarFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;
/// Optional matrix at (x, n); `None` marks a degenerate point.
pub type FaceMatFn = Arc<dyn Fn(&Point, &Point) -> Option<DMatrix<f64>> + Send + Sync>;
pub type FaceLimitFn = Arc<dyn Fn(&Point, &Point) -> DMatrix<f64> + Send + Sync>;

/// One-field system  sum_k d_k(A_k z) + G z = f  with boundary data g
/// imposed where A - |A| does not vanish.
#[derive(Clone)]
pub struct OneFieldSystem {
    pub size: usize,
    pub flux: [MatFn; 2],
    pub reaction: MatFn,
    pub forcing: VecFn,
    /// Analytic sum_k d_k A_k, if known.
    pub divergence: Option<MatFn>,
    pub boundary_data: Arc<dyn Fn(&Point, BoundarySide) -> DVector<f64> + Send + Sync>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Robin,
}

/// Boundary condition of a two-field system on one side of the rectangle.
///
/// For Dirichlet sides `data` is the value of u. For Neumann and Robin
/// sides it is the value of B^T sigma - rho u, the quantity that the
/// boundary row of the trace system balances.
#[derive(Clone)]
pub struct BoundaryCondition {
    pub kind: BoundaryKind,
    pub rho: BoundaryScalarFn,
    pub data: BoundaryVecFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coercivity {
    Full,
    Partial,
}

#[derive(Clone)]
pub enum FluxHypothesis {
    /// The sigma-u block of |A| vanishes.
    F2,
    /// |A|^{ss} = B Phi |A|^{us} and |A|^{su} = B Psi. `limit` is the
    /// continuous extension of T used where Phi is undefined, unless the
    /// assembly runs in strict mode.
    F1 { phi: FaceMatFn, psi: FaceMatFn, limit: Option<FaceLimitFn> },
}

/// Two-field system with z = (sigma, u), A_k = [[0, B_k], [B_k^T, C_k]].
#[derive(Clone)]
pub struct TwoFieldSystem {
    pub sigma_size: usize,
    pub u_size: usize,
    pub b: [DMatrix<f64>; 2],
    pub c: [MatFn; 2],
    /// Full reaction matrix with blocks G^{ss}, G^{su}, G^{us}, G^{uu}.
    pub reaction: MatFn,
    pub forcing: VecFn,
    pub divergence: Option<MatFn>,
    pub coercivity: Coercivity,
    pub hypothesis: FluxHypothesis,
    /// Conditions on the left, right, bottom and top sides.
    pub boundary: [BoundaryCondition; 4],
}

#[derive(Clone)]
pub enum System {
    OneField(OneFieldSystem),
    TwoField(TwoFieldSystem),
}

/// Pieces of the numerical flux at one face point, seen from one element.
///
/// The element-side flux is `fz z + ft zhat`. The trace row of the global
/// system tests `trace_fz z + trace_ft zhat - rhs`.
#[derive(Debug, Clone)]
pub struct FaceOps {
    pub fz: DMatrix<f64>,
    pub ft: DMatrix<f64>,
    pub trace_fz: DMatrix<f64>,
    pub trace_ft: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

fn side_index(side: BoundarySide) -> usize {
    match side {
        BoundarySide::Left => 0,
        BoundarySide::Right => 1,
        BoundarySide::Bottom => 2,
        BoundarySide::Top => 3,
    }
}

/// |A| = R |Lambda| R^T for a symmetric matrix.
pub fn abs_flux(a: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let r = &eig.eigenvectors;
    let lam = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::abs));
    r * lam * r.transpose()
}

/// Smallest eigenvalue of the symmetric part of a square matrix.
pub fn min_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// T = |A|^{uu} for hypothesis (F2).
pub fn stabilization_f2(abs: &DMatrix<f64>, sigma_size: usize) -> DMatrix<f64> {
    let m = abs.nrows();
    abs.view((sigma_size, sigma_size), (m - sigma_size, m - sigma_size)).into_owned()
}

/// T = -(Phi^T B^T B Phi)^{-1} Phi^T B^T B (Psi + I) + |A|^{uu} for
/// hypothesis (F1), after checking that Phi and Psi factor |A|.
pub fn stabilization_f1(
    abs: &DMatrix<f64>,
    b: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    sigma_size: usize,
) -> std::result::Result<DMatrix<f64>, String> {
    let m = abs.nrows();
    let mu = m - sigma_size;
    let ass = abs.view((0, 0), (sigma_size, sigma_size)).into_owned();
    let asu = abs.view((0, sigma_size), (sigma_size, mu)).into_owned();
    let aus = abs.view((sigma_size, 0), (mu, sigma_size)).into_owned();
    let auu = abs.view((sigma_size, sigma_size), (mu, mu)).into_owned();
    let scale = max_abs(abs).max(1.0);
    let r1 = max_abs(&(&ass - b * phi * &aus));
    let r2 = max_abs(&(&asu - b * psi));
    if r1 > 1e-9 * scale || r2 > 1e-9 * scale {
        return Err(format!("Phi/Psi do not factor |A| (residuals {r1:.3e}, {r2:.3e})"));
    }
    let btb = b.transpose() * b;
    let lhs = phi.transpose() * &btb * phi;
    let inv = lhs.try_inverse().ok_or_else(|| "Phi^T B^T B Phi is singular".to_string())?;
    let id = DMatrix::<f64>::identity(mu, mu);
    Ok(-(inv * phi.transpose() * btb * (psi + id)) + auu)
}

impl TwoFieldSystem {
    pub fn size(&self) -> usize {
        self.sigma_size + self.u_size
    }

    pub fn flux_matrices(&self, x: &Point, region: u32) -> [DMatrix<f64>; 2] {
        let m = self.size();
        let ms = self.sigma_size;
        let mut out = [DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
        for (k, a) in out.iter_mut().enumerate() {
            let c = (self.c[k])(x, region);
            a.view_mut((0, ms), (ms, self.u_size)).copy_from(&self.b[k]);
            a.view_mut((ms, 0), (self.u_size, ms)).copy_from(&self.b[k].transpose());
            a.view_mut((ms, ms), (self.u_size, self.u_size)).copy_from(&c);
        }
        out
    }

    pub fn normal_flux(&self, x: &Point, region: u32, n: &Point) -> DMatrix<f64> {
        let [a1, a2] = self.flux_matrices(x, region);
        a1 * n[0] + a2 * n[1]
    }

    pub fn normal_b(&self, n: &Point) -> DMatrix<f64> {
        &self.b[0] * n[0] + &self.b[1] * n[1]
    }

    pub fn normal_c(&self, x: &Point, region: u32, n: &Point) -> DMatrix<f64> {
        (self.c[0])(x, region) * n[0] + (self.c[1])(x, region) * n[1]
    }

    pub fn condition(&self, side: BoundarySide) -> &BoundaryCondition {
        &self.boundary[side_index(side)]
    }

    /// Stabilization T at (x, n). Degenerate (F1) points fall back to the
    /// registered limit unless `strict` is set.
    pub fn stabilization(&self, x: &Point, region: u32, n: &Point, strict: bool) -> Result<DMatrix<f64>> {
        let a = self.normal_flux(x, region, n);
        let abs = abs_flux(&a);
        match &self.hypothesis {
            FluxHypothesis::F2 => Ok(stabilization_f2(&abs, self.sigma_size)),
            FluxHypothesis::F1 { phi, psi, limit } => {
                let fail = |detail: String| HdgError::FluxHypothesis { x: [x[0], x[1]], n: [n[0], n[1]], detail };
                match (phi(x, n), psi(x, n)) {
                    (Some(ph), Some(ps)) => {
                        stabilization_f1(&abs, &self.normal_b(n), &ph, &ps, self.sigma_size).map_err(fail)
                    }
                    _ => match limit {
                        Some(lim) if !strict => Ok(lim(x, n)),
                        _ => Err(fail("Phi is undefined (degenerate normal flux)".into())),
                    },
                }
            }
        }
    }
}

impl System {
    pub fn size(&self) -> usize {
        match self {
            System::OneField(s) => s.size,
            System::TwoField(s) => s.size(),
        }
    }

    /// Components carried by the trace unknown.
    pub fn trace_size(&self) -> usize {
        match self {
            System::OneField(s) => s.size,
            System::TwoField(s) => s.u_size,
        }
    }

    /// Index of the first component of the primal field q (z itself for
    /// one-field systems, u for two-field systems).
    pub fn q_offset(&self) -> usize {
        match self {
            System::OneField(_) => 0,
            System::TwoField(s) => s.sigma_size,
        }
    }

    pub fn is_two_field(&self) -> bool {
        matches!(self, System::TwoField(_))
    }

    pub fn flux_matrices(&self, x: &Point, region: u32) -> [DMatrix<f64>; 2] {
        match self {
            System::OneField(s) => [(s.flux[0])(x, region), (s.flux[1])(x, region)],
            System::TwoField(s) => s.flux_matrices(x, region),
        }
    }

    pub fn reaction(&self, x: &Point, region: u32) -> DMatrix<f64> {
        match self {
            System::OneField(s) => (s.reaction)(x, region),
            System::TwoField(s) => (s.reaction)(x, region),
        }
    }

    pub fn forcing(&self, x: &Point, region: u32) -> DVector<f64> {
        match self {
            System::OneField(s) => (s.forcing)(x, region),
            System::TwoField(s) => (s.forcing)(x, region),
        }
    }

    pub fn divergence(&self) -> Option<&MatFn> {
        match self {
            System::OneField(s) => s.divergence.as_ref(),
            System::TwoField(s) => s.divergence.as_ref(),
        }
    }

    /// A = sum_k n_k A_k.
    pub fn normal_flux(&self, x: &Point, region: u32, n: &Point) -> DMatrix<f64> {
        let [a1, a2] = self.flux_matrices(x, region);
        a1 * n[0] + a2 * n[1]
    }

    /// Numerical-flux pieces at a face point of an element with outward
    /// normal `n`; `boundary` is set on boundary mortars.
    pub fn face_ops(
        &self,
        x: &Point,
        region: u32,
        n: &Point,
        boundary: Option<BoundarySide>,
        strict: bool,
    ) -> Result<FaceOps> {
        match self {
            System::OneField(s) => {
                let a = self.normal_flux(x, region, n);
                let abs = abs_flux(&a);
                let fz = &a + &abs;
                let ft = -abs.clone();
                let (trace_ft, rhs) = match boundary {
                    None => (ft.clone(), DVector::zeros(s.size)),
                    Some(side) => {
                        let g = (s.boundary_data)(x, side);
                        (&ft - (&a + &abs) * 0.5, (&a - &abs) * g * 0.5)
                    }
                };
                Ok(FaceOps { trace_fz: fz.clone(), fz, ft, trace_ft, rhs })
            }
            System::TwoField(s) => {
                let (ms, mu) = (s.sigma_size, s.u_size);
                let m = ms + mu;
                let b = s.normal_b(n);
                let c = s.normal_c(x, region, n);
                let t = s.stabilization(x, region, n, strict)?;
                let mut fz = DMatrix::zeros(m, m);
                fz.view_mut((ms, 0), (mu, ms)).copy_from(&b.transpose());
                fz.view_mut((ms, ms), (mu, mu)).copy_from(&(&c + &t));
                let mut ft = DMatrix::zeros(m, mu);
                ft.view_mut((0, 0), (ms, mu)).copy_from(&b);
                ft.view_mut((ms, 0), (mu, mu)).copy_from(&(-&t));
                let trace_fz = fz.rows(ms, mu).into_owned();
                let trace_ft = -t.clone();
                match boundary {
                    None => Ok(FaceOps { fz, ft, trace_fz, trace_ft, rhs: DVector::zeros(mu) }),
                    Some(side) => {
                        let bc = s.condition(side);
                        let data = (bc.data)(x, n);
                        match bc.kind {
                            BoundaryKind::Dirichlet => Ok(FaceOps {
                                fz,
                                ft,
                                trace_fz: DMatrix::zeros(mu, m),
                                trace_ft: DMatrix::identity(mu, mu),
                                rhs: data,
                            }),
                            BoundaryKind::Neumann | BoundaryKind::Robin => {
                                let rho = (bc.rho)(x, n);
                                let extra = DMatrix::<f64>::identity(mu, mu) * rho + &c;
                                Ok(FaceOps { fz, ft, trace_fz, trace_ft: trace_ft - extra, rhs: data })
                            }
                        }
                    }
                }
            }
        }
    }

    /// Whether the boundary point belongs to the Dirichlet part of the
    /// boundary, and the prescribed value of q there.
    pub fn dirichlet_value(&self, x: &Point, region: u32, n: &Point, side: BoundarySide) -> Option<DVector<f64>> {
        match self {
            System::OneField(s) => {
                let a = self.normal_flux(x, region, n);
                let d = &a - abs_flux(&a);
                (max_abs(&d) > 1e-12 * max_abs(&a).max(1e-300)).then(|| (s.boundary_data)(x, side))
            }
            System::TwoField(s) => {
                let bc = s.condition(side);
                (bc.kind == BoundaryKind::Dirichlet).then(|| (bc.data)(x, n))
            }
        }
    }
}

/// Riemann state z* between z_minus and z_plus for the normal flux A:
/// characteristic components with positive speed come from z_minus, those
/// with negative speed from z_plus, stationary ones take the average.
pub fn godunov_state(a: &DMatrix<f64>, z_minus: &DVector<f64>, z_plus: &DVector<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let r = &eig.eigenvectors;
    let wm = r.transpose() * z_minus;
    let wp = r.transpose() * z_plus;
    let tol = 1e-12 * eig.eigenvalues.amax().max(1e-300);
    let w = DVector::from_fn(a.nrows(), |i, _| {
        let l = eig.eigenvalues[i];
        if l > tol {
            wm[i]
        } else if l < -tol {
            wp[i]
        } else {
            0.5 * (wm[i] + wp[i])
        }
    });
    r * w
}

/// Relative mismatch between the full upwind flux A z* and its reduced
/// two-field form [B u*; B^T sigma + C u + T (u - u*)] at one sample.
pub fn flux_check_at(
    system: &TwoFieldSystem,
    x: &Point,
    region: u32,
    n: &Point,
    z_minus: &DVector<f64>,
    z_plus: &DVector<f64>,
) -> Result<f64> {
    let a = system.normal_flux(x, region, n);
    let zs = godunov_state(&a, z_minus, z_plus);
    let full = &a * &zs;
    let (ms, mu) = (system.sigma_size, system.u_size);
    let b = system.normal_b(n);
    let c = system.normal_c(x, region, n);
    let t = system.stabilization(x, region, n, true)?;
    let sigma = z_minus.rows(0, ms).into_owned();
    let u = z_minus.rows(ms, mu).into_owned();
    let ustar = zs.rows(ms, mu).into_owned();
    let mut reduced = DVector::zeros(ms + mu);
    reduced.rows_mut(0, ms).copy_from(&(&b * &ustar));
    reduced.rows_mut(ms, mu).copy_from(&(b.transpose() * &sigma + &c * &u + &t * (&u - &ustar)));
    Ok((full - reduced).norm() / (a.norm() * (z_minus.norm() + z_plus.norm())).max(1e-300))
}
