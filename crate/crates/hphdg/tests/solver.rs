mod common;

use common::*;
use hphdg::adapt::l2_error;
use hphdg::conservation::check_conservation;
use hphdg::friedrichs::System;
use hphdg::hdg::{solve_monolithic, AssemblyOptions, Discretization};
use hphdg::mesh::{Mesh, Point};
use hphdg::problems::{Problem, ProblemId, ProblemParams};
use hphdg::skeleton::Skeleton;
use std::sync::Arc;

fn exactness_error(mesh: &Mesh, system: &System, u: &Poly, incr: usize) -> f64 {
    let (sk, solved) = solve_on(mesh, system, AssemblyOptions { quad_increment: incr, strict: false });
    let disc = Discretization::new(mesh, &sk, system, 0, AssemblyOptions { quad_increment: incr, strict: false }).unwrap();
    l2_error(&disc, &solved.solution, &|x: &Point| u.value(x), None).unwrap()
}

fn meshes(p: usize) -> Vec<(&'static str, Mesh)> {
    vec![
        ("conforming", Mesh::structured([0.0, 1.0, 0.0, 1.0], 3, 3, p, |_| 0).unwrap()),
        ("irregular", irregular_mesh(3, p)),
    ]
}

#[test]
fn irregular_mesh_has_hanging_nodes() {
    let mesh = irregular_mesh(3, 2);
    assert!(mesh.irregular_elements().is_empty());
    let sk = Skeleton::build(&mesh).unwrap();
    let hanging = sk.mortars.iter().filter(|m| (m.length - mesh.face_length(m.left.element, m.left.face)).abs() > 1e-12).count();
    assert!(hanging > 0);
}

#[test]
fn elliptic_polynomials_are_reproduced() {
    for p in 1..=3 {
        let u = Poly::sample(p as i32, 11 + p as u64);
        for (name, mesh) in meshes(p) {
            for (label, sys) in [("iso", manufactured_e1(&u)), ("aniso", manufactured_e2(&u)), ("robin", manufactured_e3(&u))] {
                let err = exactness_error(&mesh, &sys, &u, 0);
                assert!(err < 1e-10, "p = {p}, {name}, {label}: error {err:e}");
            }
        }
    }
}

#[test]
fn advection_polynomials_are_reproduced() {
    for p in 1..=3 {
        let u = Poly::sample(p as i32, 5 + p as u64);
        let sys = manufactured_hp1(&u);
        for (name, mesh) in meshes(p) {
            let err = exactness_error(&mesh, &sys, &u, 10);
            assert!(err < 1e-10, "p = {p}, {name}: error {err:e}");
        }
    }
}

#[test]
fn convection_diffusion_polynomials_are_reproduced() {
    for p in 1..=3 {
        let u = Poly::sample(p as i32, 23 + p as u64);
        let sys = manufactured_hb1(&u, 1e-2);
        for (name, mesh) in meshes(p) {
            let err = exactness_error(&mesh, &sys, &u, 0);
            assert!(err < 1e-10, "p = {p}, {name}: error {err:e}");
        }
    }
}

#[test]
fn poisson_converges_at_optimal_rate() {
    let problem = Problem::new(ProblemId::PoissonSin, &ProblemParams::default()).unwrap();
    let exact = problem.exact.clone().unwrap();
    for p in 1..=3 {
        let mut errs = Vec::new();
        for level in 0..4 {
            let n = 2usize << level;
            let mesh = problem.initial_mesh(n, n, p).unwrap();
            let (sk, solved) = solve_on(&mesh, &problem.system, AssemblyOptions::default());
            let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
            errs.push(l2_error(&disc, &solved.solution, &|x: &Point| exact(x), None).unwrap());
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate >= p as f64 + 0.8, "p = {p}: rate {rate} from {errs:?}");
        }
    }
}

fn max_diff(a: &hphdg::hdg::Solution, b: &hphdg::hdg::Solution) -> f64 {
    let mut m: f64 = 0.0;
    for (x, y) in a.trace.iter().zip(&b.trace) {
        m = m.max((x - y).abs());
    }
    for (x, y) in a.volume.iter().zip(&b.volume) {
        if x.len() == y.len() {
            m = m.max((x - y).amax());
        }
    }
    m
}

#[test]
fn condensed_matches_monolithic() {
    for id in [ProblemId::E1, ProblemId::E2, ProblemId::E3, ProblemId::Hp1, ProblemId::Hb1] {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let region = problem.region.clone();
        let mut mesh = Mesh::structured(problem.domain, 4, 4, 2, |x| region(x)).unwrap();
        mesh.refine(&[0]).unwrap();
        assert!(mesh.n_active() <= 64);
        let sk = Skeleton::build(&mesh).unwrap();
        let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
        let solved = hphdg::hdg::solve(&disc).unwrap();
        let mono = solve_monolithic(&disc, &solved.blocks).unwrap();
        let d = max_diff(&solved.solution, &mono);
        assert!(d < 1e-9, "{}: condensed vs monolithic {d:e}", id.name());
    }
}

#[test]
fn advection_is_locally_conservative() {
    let problem = Problem::new(ProblemId::Hp1, &ProblemParams::default()).unwrap();
    let mesh = irregular_mesh(4, 2);
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let solved = hphdg::hdg::solve(&disc).unwrap();
    let rep = check_conservation(&disc, &solved.solution).unwrap();
    assert!(rep.max_element_residual < 1e-10, "element residual {:e}", rep.max_element_residual);
    assert!(rep.max_interior_jump < 1e-10, "interior jump {:e}", rep.max_interior_jump);
}

#[test]
fn global_balance_holds_on_every_benchmark() {
    for id in [ProblemId::E1, ProblemId::E2, ProblemId::E3, ProblemId::Hp1, ProblemId::Hb1] {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = problem.initial_mesh(4, 4, 2).unwrap();
        let sk = Skeleton::build(&mesh).unwrap();
        let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
        let solved = hphdg::hdg::solve(&disc).unwrap();
        let rep = check_conservation(&disc, &solved.solution).unwrap();
        assert!(rep.global_residual < 1e-9, "{}: global residual {:e}", id.name(), rep.global_residual);
    }
}

#[test]
fn constant_inflow_is_transported_exactly() {
    let sys = hphdg::problems::advection_system(
        Arc::new(hphdg::problems::hp1_beta),
        Arc::new(|_: &Point| 0.0),
        Arc::new(|_: &Point, _: hphdg::mesh::BoundarySide| 1.0),
    );
    let mesh = irregular_mesh(4, 1);
    let opts = AssemblyOptions { quad_increment: 10, strict: false };
    let (sk, solved) = solve_on(&mesh, &sys, opts);
    let disc = Discretization::new(&mesh, &sk, &sys, 0, opts).unwrap();
    let err = l2_error(&disc, &solved.solution, &|_: &Point| 1.0, None).unwrap();
    assert!(err < 1e-11, "error {err:e}");
}

#[test]
fn e1_error_matches_the_monolithic_solve() {
    let problem = Problem::new(ProblemId::E1, &ProblemParams::default()).unwrap();
    let exact = problem.exact.clone().unwrap();
    let mesh = problem.initial_mesh(4, 4, 2).unwrap();
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let solved = hphdg::hdg::solve(&disc).unwrap();
    let mono = solve_monolithic(&disc, &solved.blocks).unwrap();
    let a = l2_error(&disc, &solved.solution, &|x: &Point| exact(x), None).unwrap();
    let b = l2_error(&disc, &mono, &|x: &Point| exact(x), None).unwrap();
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}
