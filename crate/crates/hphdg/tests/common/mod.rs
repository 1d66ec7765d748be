#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::Matrix2;

use hphdg::friedrichs::System;
use hphdg::hdg::{solve, AssemblyOptions, Discretization, Solved};
use hphdg::mesh::{Mesh, Point};
use hphdg::problems::{
    advection_system, convection_diffusion_system, elliptic_system, hp1_beta, rotated_kappa, ConvDiffBc, EllipticBc,
};
use hphdg::skeleton::Skeleton;

/// Polynomial sum c_ab x^a y^b with total degree at most `p`.
#[derive(Clone, Debug)]
pub struct Poly {
    pub terms: Vec<(i32, i32, f64)>,
}

impl Poly {
    /// Deterministic coefficients from a small linear congruential sequence.
    pub fn sample(p: i32, seed: u64) -> Poly {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut terms = Vec::new();
        for a in 0..=p {
            for b in 0..=(p - a) {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let c = ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
                terms.push((a, b, c));
            }
        }
        Poly { terms }
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * x[0].powi(a) * x[1].powi(b)).sum()
    }

    pub fn grad(&self, x: &Point) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for &(a, b, c) in &self.terms {
            if a > 0 {
                g[0] += c * a as f64 * x[0].powi(a - 1) * x[1].powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * x[0].powi(a) * x[1].powi(b - 1);
            }
        }
        g
    }

    /// Second derivatives (u_xx, u_xy, u_yy).
    pub fn hessian(&self, x: &Point) -> [f64; 3] {
        let mut h = [0.0; 3];
        for &(a, b, c) in &self.terms {
            let (af, bf) = (a as f64, b as f64);
            if a > 1 {
                h[0] += c * af * (af - 1.0) * x[0].powi(a - 2) * x[1].powi(b);
            }
            if a > 0 && b > 0 {
                h[1] += c * af * bf * x[0].powi(a - 1) * x[1].powi(b - 1);
            }
            if b > 1 {
                h[2] += c * bf * (bf - 1.0) * x[0].powi(a) * x[1].powi(b - 2);
            }
        }
        h
    }
}

fn side_normal(side: usize) -> Point {
    match side {
        0 => Point::new(-1.0, 0.0),
        1 => Point::new(1.0, 0.0),
        2 => Point::new(0.0, -1.0),
        _ => Point::new(0.0, 1.0),
    }
}

/// Elliptic system with constant `kappa` whose exact solution is `u`;
/// `robin[s]` = Some(lambda) imposes a Robin condition on side s
/// (left, right, bottom, top), otherwise Dirichlet.
pub fn manufactured_elliptic(u: &Poly, kappa: Matrix2<f64>, robin: [Option<f64>; 4]) -> System {
    let uf = u.clone();
    let f = Arc::new(move |x: &Point, _: u32| {
        let h = uf.hessian(x);
        -(kappa[(0, 0)] * h[0] + (kappa[(0, 1)] + kappa[(1, 0)]) * h[1] + kappa[(1, 1)] * h[2])
    });
    let bcs = std::array::from_fn(|s| {
        let uu = u.clone();
        match robin[s] {
            None => EllipticBc::Dirichlet(Arc::new(move |x: &Point| uu.value(x))),
            Some(lambda) => {
                let n = side_normal(s);
                EllipticBc::Robin {
                    lambda,
                    g: Arc::new(move |x: &Point| {
                        let g = uu.grad(x);
                        let kg = kappa * nalgebra::Vector2::new(g[0], g[1]);
                        kg.dot(&n) + lambda * uu.value(x)
                    }),
                }
            }
        }
    });
    elliptic_system(Arc::new(move |_: &Point, _| kappa), f, bcs)
}

pub fn manufactured_e1(u: &Poly) -> System {
    manufactured_elliptic(u, Matrix2::identity(), [None; 4])
}

pub fn manufactured_e2(u: &Poly) -> System {
    manufactured_elliptic(u, rotated_kappa(std::f64::consts::FRAC_PI_4, 1000.0, 1.0).unwrap(), [None; 4])
}

/// Battery-style Robin data (lambda per side) with an anisotropic material.
pub fn manufactured_e3(u: &Poly) -> System {
    manufactured_elliptic(u, Matrix2::new(7.0, 0.0, 0.0, 0.8), [Some(0.0), Some(2.0), Some(3.0), Some(1.0)])
}

pub fn manufactured_hp1(u: &Poly) -> System {
    let uf = u.clone();
    let ug = u.clone();
    advection_system(
        Arc::new(hp1_beta),
        Arc::new(move |x: &Point| {
            let b = hp1_beta(x);
            let g = uf.grad(x);
            b[0] * g[0] + b[1] * g[1]
        }),
        Arc::new(move |x: &Point, _: hphdg::mesh::BoundarySide| ug.value(x)),
    )
}

pub fn manufactured_hb1(u: &Poly, eps: f64) -> System {
    let beta = [1.0, 0.0];
    let uf = u.clone();
    let f = Arc::new(move |x: &Point| {
        let h = uf.hessian(x);
        let g = uf.grad(x);
        -eps * (h[0] + h[2]) + beta[0] * g[0] + beta[1] * g[1]
    });
    let total_flux = |s: usize, u: Poly| {
        let n = side_normal(s);
        Arc::new(move |x: &Point| {
            let g = u.grad(x);
            (beta[0] * n[0] + beta[1] * n[1]) * u.value(x) - eps * (g[0] * n[0] + g[1] * n[1])
        })
    };
    let ud = u.clone();
    let bcs = [
        ConvDiffBc::Robin(total_flux(0, u.clone())),
        ConvDiffBc::Dirichlet(Arc::new(move |x: &Point| ud.value(x))),
        ConvDiffBc::Neumann(total_flux(2, u.clone())),
        ConvDiffBc::Neumann(total_flux(3, u.clone())),
    ];
    convection_diffusion_system(beta, eps, f, bcs)
}

/// Unit-square mesh with one refined corner block, so that several faces
/// carry hanging nodes.
pub fn irregular_mesh(n: usize, p: usize) -> Mesh {
    let mut mesh = Mesh::structured([0.0, 1.0, 0.0, 1.0], n, n, p, |_| 0).unwrap();
    mesh.refine(&[0, 1, 2 * n + 1]).unwrap();
    let fine: Vec<usize> = mesh.active_elements().into_iter().filter(|&k| mesh.element(k).level == 1).take(2).collect();
    mesh.refine(&fine).unwrap();
    mesh
}

pub fn solve_on(mesh: &Mesh, system: &System, options: AssemblyOptions) -> (Skeleton, Solved) {
    let sk = Skeleton::build(mesh).unwrap();
    let solved = {
        let disc = Discretization::new(mesh, &sk, system, 0, options).unwrap();
        solve(&disc).unwrap()
    };
    (sk, solved)
}
