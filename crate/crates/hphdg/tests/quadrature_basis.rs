use hphdg::basis::{
    eval_segment, eval_triangle, eval_triangle_grad, restrict_to_mortar, restriction_matrix, triangle_dim,
};
use hphdg::quadrature::{segment_rule, triangle_rule, MAX_STRENGTH};
use proptest::prelude::*;

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[test]
fn triangle_rule_integrates_monomials() {
    for s in [0, 1, 2, 5, 9, 16, 24] {
        let rule = triangle_rule(s).unwrap();
        for a in 0..=s as u32 {
            for b in 0..=(s as u32 - a) {
                let q: f64 =
                    rule.points.iter().zip(&rule.weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((q - exact).abs() < 1e-14 * exact.max(1e-3), "s = {s}, x^{a} y^{b}: {q} vs {exact}");
            }
        }
    }
}

#[test]
fn segment_rule_integrates_monomials() {
    for s in [0, 3, 8, 17, 40] {
        let rule = segment_rule(s).unwrap();
        for a in 0..=s as i32 {
            let q: f64 = rule.points.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(a)).sum();
            assert!((q - 1.0 / (a + 1) as f64).abs() < 1e-14, "s = {s}, x^{a}");
        }
    }
}

#[test]
fn strength_is_bounded() {
    assert!(triangle_rule(MAX_STRENGTH + 1).is_err());
    assert!(segment_rule(MAX_STRENGTH + 1).is_err());
}

#[test]
fn triangle_basis_is_orthonormal() {
    for p in 0..=8 {
        let n = triangle_dim(p);
        let rule = triangle_rule(2 * p).unwrap();
        let mut v = vec![0.0; n];
        let mut gram = vec![0.0; n * n];
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            eval_triangle(p, pt[0], pt[1], &mut v);
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] += w * v[i] * v[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((gram[i * n + j] - e).abs() < 1e-12, "p = {p}, ({i}, {j}): {}", gram[i * n + j]);
            }
        }
    }
}

#[test]
fn triangle_basis_is_hierarchical() {
    let (mut lo, mut hi) = (vec![0.0; triangle_dim(3)], vec![0.0; triangle_dim(5)]);
    eval_triangle(3, 0.21, 0.37, &mut lo);
    eval_triangle(5, 0.21, 0.37, &mut hi);
    assert_eq!(lo[..], hi[..lo.len()]);
}

#[test]
fn segment_basis_is_orthonormal() {
    let p = 10;
    let rule = segment_rule(2 * p).unwrap();
    let mut v = vec![0.0; p + 1];
    let mut gram = vec![vec![0.0; p + 1]; p + 1];
    for (x, w) in rule.points.iter().zip(&rule.weights) {
        eval_segment(p, *x, &mut v);
        for i in 0..=p {
            for j in 0..=p {
                gram[i][j] += w * v[i] * v[j];
            }
        }
    }
    for (i, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }
}

#[test]
fn triangle_gradients_match_finite_differences() {
    let h = 1e-6;
    for p in [1, 4, 7] {
        let n = triangle_dim(p);
        let (mut v, mut dx, mut dy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let (mut vp, mut vm) = (vec![0.0; n], vec![0.0; n]);
        for &(xi, eta) in &[(0.2, 0.3), (0.05, 0.9), (0.7, 0.1), (0.33, 0.33)] {
            eval_triangle_grad(p, xi, eta, &mut v, &mut dx, &mut dy);
            eval_triangle(p, xi + h, eta, &mut vp);
            eval_triangle(p, xi - h, eta, &mut vm);
            for k in 0..n {
                let fd = (vp[k] - vm[k]) / (2.0 * h);
                assert!((fd - dx[k]).abs() < 1e-6 * (1.0 + fd.abs()), "p = {p}, mode {k}, d/dxi");
            }
            eval_triangle(p, xi, eta + h, &mut vp);
            eval_triangle(p, xi, eta - h, &mut vm);
            for k in 0..n {
                let fd = (vp[k] - vm[k]) / (2.0 * h);
                assert!((fd - dy[k]).abs() < 1e-6 * (1.0 + fd.abs()), "p = {p}, mode {k}, d/deta");
            }
        }
    }
}

fn segment_value(c: &[f64], s: f64) -> f64 {
    let mut v = vec![0.0; c.len()];
    eval_segment(c.len() - 1, s, &mut v);
    c.iter().zip(&v).map(|(a, b)| a * b).sum()
}

/// L2 projection by composite Gauss integration on seven panels, a
/// different point set from the one inside the restriction operator.
fn projection_oracle(c: &[f64], t0: f64, t1: f64, p_dst: usize) -> Vec<f64> {
    let rule = segment_rule(c.len() + p_dst).unwrap();
    let panels = 7;
    let mut out = vec![0.0; p_dst + 1];
    let mut v = vec![0.0; p_dst + 1];
    for j in 0..panels {
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let s = (j as f64 + x) / panels as f64;
            eval_segment(p_dst, s, &mut v);
            let g = segment_value(c, t0 + s * (t1 - t0));
            for l in 0..=p_dst {
                out[l] += w / panels as f64 * v[l] * g;
            }
        }
    }
    out
}

#[test]
fn reversed_restriction_flips_odd_modes() {
    let r = restriction_matrix(4, 4, 1.0, 0.0);
    for l in 0..=4 {
        for k in 0..=4 {
            let e = if l == k { if l % 2 == 0 { 1.0 } else { -1.0 } } else { 0.0 };
            assert!((r[(l, k)] - e).abs() < 1e-13);
        }
    }
}

proptest! {
    #[test]
    fn restriction_matches_projection(
        c in prop::collection::vec(-1.0f64..1.0, 1..9),
        t0 in 0.0f64..1.0,
        t1 in 0.0f64..1.0,
        p_dst in 0usize..9,
    ) {
        prop_assume!((t1 - t0).abs() > 1e-3);
        let got = restrict_to_mortar(&c, t0, t1, p_dst);
        let want = projection_oracle(&c, t0, t1, p_dst);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-13, "{g} vs {w}");
        }
        if p_dst + 1 >= c.len() {
            for s in [0.0, 0.3, 0.77, 1.0] {
                let a = segment_value(&got, s);
                let b = segment_value(&c, t0 + s * (t1 - t0));
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
