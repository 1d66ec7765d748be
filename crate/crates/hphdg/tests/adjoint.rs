use hphdg::adjoint::{
    adjoint_blocks, dwr_estimate, enrich, flatten, localized_residual, solve_adjoint, Field, FunctionalTerm,
    OutputFunctional,
};
use hphdg::hdg::{condense, solve, AssemblyOptions, Discretization, LocalBlocks, Solution, Space};
use hphdg::mesh::{BoundarySide, Mesh, Point};
use hphdg::problems::{hp1_beta, Problem, ProblemId, ProblemParams};
use hphdg::skeleton::Skeleton;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const ALL: [ProblemId; 5] = [ProblemId::E1, ProblemId::E2, ProblemId::E3, ProblemId::Hp1, ProblemId::Hb1];

fn small_mesh(problem: &Problem, n: usize) -> Mesh {
    let region = problem.region.clone();
    let mut mesh = Mesh::structured(problem.domain, n, n, 2, |x| region(x)).unwrap();
    mesh.refine(&[1]).unwrap();
    mesh.set_degree(mesh.active_elements()[0], 3);
    mesh
}

fn random_solution(space: &Space, n_elements: usize, rng: &mut ChaCha8Rng) -> Solution {
    let volume = (0..n_elements)
        .map(|k| DVector::from_fn(space.volume_size(k), |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let trace = (0..space.n_trace).map(|_| rng.random_range(-1.0..1.0)).collect();
    Solution { volume, trace }
}

fn homogeneous(blocks: &[LocalBlocks]) -> Vec<LocalBlocks> {
    let mut out = blocks.to_vec();
    for b in &mut out {
        b.fv.fill(0.0);
        for f in &mut b.faces {
            f.ft.fill(0.0);
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn adjoint_blocks_are_the_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for id in ALL {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = small_mesh(&problem, 2);
        assert!(mesh.n_active() <= 16);
        let sk = Skeleton::build(&mesh).unwrap();
        let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
        let blocks = disc.assemble_all().unwrap();
        let zero = vec![0.0; disc.space.n_volume + disc.space.n_trace];
        let primal = homogeneous(&blocks);
        let dual = adjoint_blocks(&disc.space, &blocks, &zero);
        let n = mesh.elements().len();
        for _ in 0..3 {
            let z = random_solution(&disc.space, n, &mut rng);
            let w = random_solution(&disc.space, n, &mut rng);
            let wmz = localized_residual(&disc.space, &primal, &z, &w).total();
            let zmw = localized_residual(&disc.space, &dual, &w, &z).total();
            assert!(rel(wmz, zmw) < 1e-12, "{}: {wmz} vs {zmw}", id.name());
        }
    }
}

#[test]
fn adjoint_trace_matrix_is_the_transposed_primal_matrix() {
    for id in ALL {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = small_mesh(&problem, 2);
        let sk = Skeleton::build(&mesh).unwrap();
        let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
        let blocks = disc.assemble_all().unwrap();
        let j = problem.functional.derivative(&disc).unwrap();
        let (primal, _) = condense(&disc.space, &blocks).unwrap();
        let (dual, _) = condense(&disc.space, &adjoint_blocks(&disc.space, &blocks, &j)).unwrap();
        let d = dual.matrix.max_abs_diff(&primal.matrix.transpose());
        assert!(d <= 1e-10 * primal.matrix.max_abs().max(1.0), "{}: {d:e}", id.name());
    }
}

#[test]
fn adjoint_solution_satisfies_the_dual_equation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for id in ALL {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = small_mesh(&problem, 2);
        let sk = Skeleton::build(&mesh).unwrap();
        let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
        let blocks = disc.assemble_all().unwrap();
        let j = problem.functional.derivative(&disc).unwrap();
        let adj = solve_adjoint(&disc, &blocks, &j).unwrap();
        assert!(adj.trace_residual < 1e-10);
        // W . M Z = -j . Z for every Z
        let z = random_solution(&disc.space, mesh.elements().len(), &mut rng);
        let lhs = localized_residual(&disc.space, &homogeneous(&blocks), &z, &adj.solution).total();
        let rhs: f64 = -j.iter().zip(flatten(&disc.space, &z)).map(|(a, b)| a * b).sum::<f64>();
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{}: {lhs} vs {rhs}", id.name());
    }
}

#[test]
fn functional_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let problem = Problem::new(ProblemId::E1, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 3);
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let n = mesh.elements().len();
    let a = random_solution(&disc.space, n, &mut rng);
    let b = random_solution(&disc.space, n, &mut rng);
    let combo = Solution {
        volume: a.volume.iter().zip(&b.volume).map(|(x, y)| x * 2.0 - y * 3.0).collect(),
        trace: a.trace.iter().zip(&b.trace).map(|(x, y)| 2.0 * x - 3.0 * y).collect(),
    };
    let f = &problem.functional;
    let ja = f.evaluate(&disc, &a).unwrap();
    let jb = f.evaluate(&disc, &b).unwrap();
    let jc = f.evaluate(&disc, &combo).unwrap();
    assert!((jc - (2.0 * ja - 3.0 * jb)).abs() < 1e-12 * (ja.abs() + jb.abs()));
    let j2 = f.scaled(-1.5).evaluate(&disc, &a).unwrap();
    assert!((j2 + 1.5 * ja).abs() < 1e-12 * ja.abs().max(1.0));
}

#[test]
fn zero_functional_has_zero_adjoint() {
    let problem = Problem::new(ProblemId::Hb1, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 2);
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let solved = solve(&disc).unwrap();
    let dwr = dwr_estimate(&disc, &solved.solution, &problem.functional.scaled(0.0)).unwrap();
    assert!(dwr.adjoint.solution.trace.iter().all(|&v| v == 0.0));
    assert!(dwr.adjoint.solution.volume.iter().all(|v| v.iter().all(|&c| c == 0.0)));
    assert_eq!(dwr.estimate, 0.0);
    assert!(dwr.indicators.iter().all(|r| r.1 == 0.0));
}

#[test]
fn unmatched_functional_is_an_error() {
    let problem = Problem::new(ProblemId::E1, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 2);
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let f = OutputFunctional { name: "none".into(), sides: vec![], terms: problem.functional.terms.clone() };
    assert!(f.derivative(&disc).is_err());
    let hp1 = Problem::new(ProblemId::Hp1, &ProblemParams::default()).unwrap();
    let disc1 = Discretization::new(&mesh, &sk, &hp1.system, 0, AssemblyOptions::default()).unwrap();
    assert!(problem.functional.derivative(&disc1).is_err());
}

struct Comparison {
    estimate: f64,
    fine_error: f64,
    coarse_output: f64,
    dwr_output: f64,
}

fn compare(problem: &Problem, mesh: &Mesh, functional: &OutputFunctional) -> Comparison {
    let sk = Skeleton::build(mesh).unwrap();
    let opts = AssemblyOptions::default();
    let coarse = Discretization::new(mesh, &sk, &problem.system, 0, opts).unwrap();
    let zh = solve(&coarse).unwrap().solution;
    let dwr = dwr_estimate(&coarse, &zh, functional).unwrap();
    let fine = Discretization::new(mesh, &sk, &problem.system, 1, opts).unwrap();
    let zf = solve(&fine).unwrap().solution;
    let jf = functional.evaluate(&fine, &zf).unwrap();
    Comparison {
        estimate: dwr.estimate,
        fine_error: dwr.output - jf,
        coarse_output: functional.evaluate(&coarse, &zh).unwrap(),
        dwr_output: dwr.output,
    }
}

#[test]
fn estimate_equals_the_enriched_output_error() {
    for id in ALL {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = small_mesh(&problem, 3);
        let c = compare(&problem, &mesh, &problem.functional);
        let scale = c.dwr_output.abs().max(1e-8);
        assert!((c.estimate - c.fine_error).abs() < 1e-8 * scale, "{}: {} vs {}", id.name(), c.estimate, c.fine_error);
    }
}

#[test]
fn output_is_unchanged_by_enrichment() {
    for id in ALL {
        let problem = Problem::new(id, &ProblemParams::default()).unwrap();
        let mesh = small_mesh(&problem, 3);
        let c = compare(&problem, &mesh, &problem.functional);
        assert!(
            (c.coarse_output - c.dwr_output).abs() < 1e-13 * c.coarse_output.abs().max(1.0),
            "{}: {} vs {}",
            id.name(),
            c.coarse_output,
            c.dwr_output
        );
    }
}

#[test]
fn doubling_the_functional_doubles_the_estimate() {
    let problem = Problem::new(ProblemId::E3, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 3);
    let a = compare(&problem, &mesh, &problem.functional);
    let b = compare(&problem, &mesh, &problem.functional.scaled(2.0));
    assert!(rel(b.estimate, 2.0 * a.estimate) < 1e-10);
}

#[test]
fn effectivity_on_refined_corner_meshes() {
    let problem = Problem::new(ProblemId::E1, &ProblemParams::default()).unwrap();
    let mut mesh = problem.initial_mesh(4, 4, 2).unwrap();
    for cycle in 0..3 {
        let c = compare(&problem, &mesh, &problem.functional);
        let eff = c.estimate / c.fine_error;
        assert!((eff - 1.0).abs() < 1e-8, "cycle {cycle}: effectivity {eff}");
        let near: Vec<usize> =
            mesh.active_elements().into_iter().filter(|&k| mesh.centroid(k).norm() < 0.3 / (1 << cycle) as f64).collect();
        mesh.refine(&near).unwrap();
    }
}

#[test]
fn enriched_solution_has_zero_residual() {
    let problem = Problem::new(ProblemId::Hp1, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 3);
    let sk = Skeleton::build(&mesh).unwrap();
    let fine = Discretization::new(&mesh, &sk, &problem.system, 1, AssemblyOptions::default()).unwrap();
    let solved = solve(&fine).unwrap();
    let j = problem.functional.derivative(&fine).unwrap();
    let adj = solve_adjoint(&fine, &solved.blocks, &j).unwrap();
    let r = localized_residual(&fine.space, &solved.blocks, &solved.solution, &adj.solution);
    let scale: f64 = adj.solution.trace.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    assert!(r.element.iter().all(|e| e.1.abs() < 1e-10 * scale));
    assert!(r.total().abs() < 1e-10 * scale);
}

#[test]
fn coarse_residual_is_orthogonal_to_the_coarse_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let problem = Problem::new(ProblemId::E2, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 3);
    let sk = Skeleton::build(&mesh).unwrap();
    let coarse = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let solved = solve(&coarse).unwrap();
    let w = random_solution(&coarse.space, mesh.elements().len(), &mut rng);
    let r = localized_residual(&coarse.space, &solved.blocks, &solved.solution, &w);
    for (k, v) in &r.element {
        assert!(v.abs() < 1e-10, "element {k}: {v}");
    }
    assert!(r.total().abs() < 1e-9);
    // an injected coarse test function is orthogonal to the enriched residual too
    let fine = Discretization::new(&mesh, &sk, &problem.system, 1, AssemblyOptions::default()).unwrap();
    let fblocks = fine.assemble_all().unwrap();
    let z = enrich(&coarse.space, &fine.space, &solved.solution);
    let wf = enrich(&coarse.space, &fine.space, &w);
    let rf = localized_residual(&fine.space, &fblocks, &z, &wf);
    let full = localized_residual(&fine.space, &fblocks, &z, &random_solution(&fine.space, mesh.elements().len(), &mut rng));
    assert!(rf.total().abs() < 1e-9 * full.total().abs().max(1.0), "{} vs {}", rf.total(), full.total());
}

#[test]
fn outflow_functional_of_a_constant_trace() {
    let problem = Problem::new(ProblemId::Hp1, &ProblemParams::default()).unwrap();
    let mesh = problem.initial_mesh(4, 4, 2).unwrap();
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let mut sol = solve(&disc).unwrap().solution;
    sol.trace.fill(0.0);
    for e in 0..sk.mortars.len() {
        sol.trace[disc.space.trace_offset[e]] = 1.0;
    }
    let j = problem.functional.evaluate(&disc, &sol).unwrap();
    // -int_0^1 (1 + sin pi y) cos 2 pi y dy - int_0^1 2 cos 2 pi x dx
    let want = 2.0 / (3.0 * std::f64::consts::PI);
    assert!((j - want).abs() < 1e-10, "{j} vs {want}");
}

#[test]
fn custom_uhat_functional_counts_boundary_length() {
    let problem = Problem::new(ProblemId::Hp1, &ProblemParams::default()).unwrap();
    let mesh = small_mesh(&problem, 3);
    let sk = Skeleton::build(&mesh).unwrap();
    let disc = Discretization::new(&mesh, &sk, &problem.system, 0, AssemblyOptions::default()).unwrap();
    let mut sol = solve(&disc).unwrap().solution;
    sol.trace.fill(0.0);
    for e in 0..sk.mortars.len() {
        sol.trace[disc.space.trace_offset[e]] = 1.0;
    }
    let f = OutputFunctional {
        name: "flux".into(),
        sides: vec![BoundarySide::Left, BoundarySide::Top],
        terms: vec![FunctionalTerm { field: Field::UHat, weight: Arc::new(|x: &Point, n: &Point| {
            let b = hp1_beta(x);
            b[0] * n[0] + b[1] * n[1]
        }) }],
    };
    // int_left -(1 + sin pi y) dy + int_top 2 dx
    let want = -(1.0 + 2.0 / std::f64::consts::PI) + 2.0;
    assert!((f.evaluate(&disc, &sol).unwrap() - want).abs() < 1e-10);
}
