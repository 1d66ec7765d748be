//! Gauss rules on the unit segment and collapsed (Duffy) rules on the
//! reference triangle with vertices (0,0), (1,0), (0,1).

use crate::error::{HdgError, Result};

/// Highest polynomial strength any rule in this module is built for.
pub const MAX_STRENGTH: usize = 64;

#[derive(Debug, Clone)]
pub struct SegmentRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pi = std::f64::consts::PI;
    for i in 0..(n + 1) / 2 {
        let mut z = (pi * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

fn check_strength(strength: usize) -> Result<()> {
    if strength > MAX_STRENGTH {
        return Err(HdgError::Unsupported(format!(
            "quadrature strength {strength} exceeds the maximum {MAX_STRENGTH}"
        )));
    }
    Ok(())
}

/// Gauss rule on [0, 1] exact for polynomials of degree `strength`.
pub fn segment_rule(strength: usize) -> Result<SegmentRule> {
    check_strength(strength)?;
    let n = strength / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(SegmentRule {
        points: x.iter().map(|&t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|&t| 0.5 * t).collect(),
    })
}

/// Collapsed tensor Gauss rule on the reference triangle exact for total
/// degree `strength`. The collapse (u, v) -> (u (1 - v), v) adds one degree
/// in v through the Jacobian.
pub fn triangle_rule(strength: usize) -> Result<TriangleRule> {
    check_strength(strength)?;
    let nu = strength / 2 + 1;
    let nv = (strength + 1) / 2 + 1;
    let (xu, wu) = gauss_legendre(nu);
    let (xv, wv) = gauss_legendre(nv);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (a, wa) in xu.iter().zip(&wu) {
        for (b, wb) in xv.iter().zip(&wv) {
            let u = 0.5 * (a + 1.0);
            let v = 0.5 * (b + 1.0);
            points.push([u * (1.0 - v), v]);
            weights.push(0.25 * wa * wb * (1.0 - v));
        }
    }
    Ok(TriangleRule { points, weights })
}
