//! Orthonormal modal bases: Dubiner polynomials on the reference triangle
//! and Legendre polynomials on the unit segment.
//!
//! Both families are hierarchical, so the basis of degree p is a prefix of
//! the basis of degree p + 1 and changing degree is a matter of padding or
//! truncating coefficient vectors.

use nalgebra::DMatrix;

use crate::quadrature::segment_rule;

/// Number of modes of total degree at most `p` on a triangle.
pub fn triangle_dim(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Number of modes of degree at most `p` on a segment.
pub fn segment_dim(p: usize) -> usize {
    p + 1
}

/// Exponent pairs (i, j) of the Dubiner modes in hierarchical order.
pub fn triangle_modes(p: usize) -> Vec<(usize, usize)> {
    let mut modes = Vec::with_capacity(triangle_dim(p));
    for d in 0..=p {
        for i in (0..=d).rev() {
            modes.push((i, d - i));
        }
    }
    modes
}

fn gamma_int(n: usize) -> f64 {
    (1..n).fold(1.0, |acc, k| acc * k as f64)
}

/// Jacobi polynomial P_n^(alpha, beta) normalised to unit norm on [-1, 1]
/// with weight (1 - x)^alpha (1 + x)^beta.
pub fn jacobi(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    let a = alpha as f64;
    let b = beta as f64;
    let gamma0 = 2f64.powi((alpha + beta + 1) as i32) / (a + b + 1.0) * gamma_int(alpha + 1)
        * gamma_int(beta + 1)
        / gamma_int(alpha + beta + 1);
    let p0 = 1.0 / gamma0.sqrt();
    if n == 0 {
        return p0;
    }
    let gamma1 = (a + 1.0) * (b + 1.0) / (a + b + 3.0) * gamma0;
    let p1 = ((a + b + 2.0) * x / 2.0 + (a - b) / 2.0) / gamma1.sqrt();
    if n == 1 {
        return p1;
    }
    let mut aold = 2.0 / (2.0 + a + b) * ((a + 1.0) * (b + 1.0) / (a + b + 3.0)).sqrt();
    let (mut pm, mut pc) = (p0, p1);
    for i in 1..n {
        let i = i as f64;
        let h1 = 2.0 * i + a + b;
        let anew = 2.0 / (h1 + 2.0)
            * ((i + 1.0) * (i + 1.0 + a + b) * (i + 1.0 + a) * (i + 1.0 + b) / (h1 + 1.0) / (h1 + 3.0))
                .sqrt();
        let bnew = -(a * a - b * b) / h1 / (h1 + 2.0);
        let pn = (-aold * pm + (x - bnew) * pc) / anew;
        pm = pc;
        pc = pn;
        aold = anew;
    }
    pc
}

/// Derivative of the normalised Jacobi polynomial.
pub fn jacobi_derivative(x: f64, alpha: usize, beta: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    ((n * (n + alpha + beta + 1)) as f64).sqrt() * jacobi(x, alpha + 1, beta + 1, n - 1)
}

fn collapsed(xi: f64, eta: f64) -> (f64, f64) {
    let r = 2.0 * xi - 1.0;
    let s = 2.0 * eta - 1.0;
    let a = if (1.0 - s).abs() < 1e-14 { -1.0 } else { 2.0 * (1.0 + r) / (1.0 - s) - 1.0 };
    (a, s)
}

/// Values of the orthonormal triangle basis of degree `p` at (xi, eta).
pub fn eval_triangle(p: usize, xi: f64, eta: f64, vals: &mut [f64]) {
    let (a, b) = collapsed(xi, eta);
    for (k, &(i, j)) in triangle_modes(p).iter().enumerate() {
        let h1 = jacobi(a, 0, 0, i);
        let h2 = jacobi(b, 2 * i + 1, 0, j);
        vals[k] = 2.0 * std::f64::consts::SQRT_2 * h1 * h2 * (1.0 - b).powi(i as i32);
    }
}

/// Values and reference gradients of the orthonormal triangle basis.
pub fn eval_triangle_grad(
    p: usize,
    xi: f64,
    eta: f64,
    vals: &mut [f64],
    dxi: &mut [f64],
    deta: &mut [f64],
) {
    let (a, b) = collapsed(xi, eta);
    let hb = 0.5 * (1.0 - b);
    for (k, &(i, j)) in triangle_modes(p).iter().enumerate() {
        let fa = jacobi(a, 0, 0, i);
        let dfa = jacobi_derivative(a, 0, 0, i);
        let gb = jacobi(b, 2 * i + 1, 0, j);
        let dgb = jacobi_derivative(b, 2 * i + 1, 0, j);
        let mut dr = dfa * gb;
        let mut ds = dfa * gb * 0.5 * (1.0 + a);
        if i > 0 {
            let f = hb.powi(i as i32 - 1);
            dr *= f;
            ds *= f;
        }
        let mut tmp = dgb * hb.powi(i as i32);
        if i > 0 {
            tmp -= 0.5 * i as f64 * gb * hb.powi(i as i32 - 1);
        }
        ds += fa * tmp;
        let scale = 2f64.powf(i as f64 + 0.5);
        // unit-triangle orthonormality doubles the biunit basis and the
        // affine map to (xi, eta) contributes another factor two
        vals[k] = 2.0 * std::f64::consts::SQRT_2 * fa * gb * (1.0 - b).powi(i as i32);
        dxi[k] = 4.0 * scale * dr;
        deta[k] = 4.0 * scale * ds;
    }
}

/// Orthonormal Legendre polynomials on [0, 1] of degree at most `p`.
pub fn eval_segment(p: usize, s: f64, vals: &mut [f64]) {
    let x = 2.0 * s - 1.0;
    let mut p0 = 1.0;
    let mut p1 = x;
    for (l, v) in vals.iter_mut().enumerate().take(p + 1) {
        let pl = match l {
            0 => 1.0,
            1 => x,
            _ => {
                let lf = l as f64;
                let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
                p0 = p1;
                p1 = p2;
                p2
            }
        };
        *v = pl * ((2 * l + 1) as f64).sqrt();
    }
}

/// Re-expresses `m` stacked components of triangle coefficients at degree
/// `p_to`. Raising the degree pads with zeros; lowering it truncates, which
/// is the L2 projection because the basis is orthonormal and hierarchical.
pub fn change_triangle_degree(coeffs: &[f64], components: usize, p_from: usize, p_to: usize) -> Vec<f64> {
    change_degree(coeffs, components, triangle_dim(p_from), triangle_dim(p_to))
}

/// Segment counterpart of [`change_triangle_degree`].
pub fn change_segment_degree(coeffs: &[f64], components: usize, p_from: usize, p_to: usize) -> Vec<f64> {
    change_degree(coeffs, components, segment_dim(p_from), segment_dim(p_to))
}

fn change_degree(coeffs: &[f64], components: usize, n_from: usize, n_to: usize) -> Vec<f64> {
    assert_eq!(coeffs.len(), components * n_from);
    let mut out = vec![0.0; components * n_to];
    let n = n_from.min(n_to);
    for c in 0..components {
        out[c * n_to..c * n_to + n].copy_from_slice(&coeffs[c * n_from..c * n_from + n]);
    }
    out
}

/// Matrix taking Legendre coefficients of a face trace of degree `p_src`
/// on [0, 1] to Legendre coefficients of degree `p_dst` on the sub-interval
/// running from face parameter `t0` to `t1` (the interval may be reversed).
pub fn restriction_matrix(p_src: usize, p_dst: usize, t0: f64, t1: f64) -> DMatrix<f64> {
    let rule = segment_rule(p_src + p_dst).expect("restriction strength within range");
    let mut out = DMatrix::zeros(p_dst + 1, p_src + 1);
    let mut dst = vec![0.0; p_dst + 1];
    let mut src = vec![0.0; p_src + 1];
    for (s, w) in rule.points.iter().zip(&rule.weights) {
        eval_segment(p_dst, *s, &mut dst);
        eval_segment(p_src, t0 + s * (t1 - t0), &mut src);
        for l in 0..=p_dst {
            for k in 0..=p_src {
                out[(l, k)] += w * dst[l] * src[k];
            }
        }
    }
    out
}

/// Restricts a face trace to a split-mortar sub-interval at degree `p_dst`.
pub fn restrict_to_mortar(trace: &[f64], t0: f64, t1: f64, p_dst: usize) -> Vec<f64> {
    let p_src = trace.len() - 1;
    let r = restriction_matrix(p_src, p_dst, t0, t1);
    (0..=p_dst).map(|l| (0..=p_src).map(|k| r[(l, k)] * trace[k]).sum()).collect()
}
