//! Convergence history, mesh, solution and audit files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use hphdg::adapt::{CycleRecord, Status};
use hphdg::audit::AuditReport;
use hphdg::hdg::{Discretization, Solution};
use hphdg::mesh::Mesh;
use hphdg::skeleton::Skeleton;

use crate::CliError;

/// Points per element edge of the sampling lattice in solution dumps.
pub const LATTICE_POINTS: usize = 10;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

pub fn history_header(adjoint: bool) -> Vec<&'static str> {
    let mut h = vec![
        "cycle",
        "n_elements",
        "n_trace_dofs",
        "n_volume_dofs",
        "global_indicator",
        "max_local_indicator",
        "l2_error",
    ];
    if adjoint {
        h.extend(["output_value", "output_error_estimate"]);
    }
    h.push("wall_ms");
    h
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn write_history(path: &Path, history: &[CycleRecord], adjoint: bool) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(history_header(adjoint))?;
    for r in history {
        let mut row = vec![
            r.cycle.to_string(),
            r.elements.to_string(),
            r.trace_dofs.to_string(),
            r.volume_dofs.to_string(),
            num(r.estimate),
            num(r.max_eta),
            r.l2_error.map(num).unwrap_or_default(),
        ];
        if adjoint {
            row.push(r.output.map(num).unwrap_or_default());
            row.push(r.output_estimate.map(num).unwrap_or_default());
        }
        row.push(format!("{:.3}", r.wall_ms));
        w.write_record(&row)?;
    }
    w.flush().map_err(io(path))?;
    Ok(())
}

#[derive(Serialize)]
struct MeshElement {
    id: usize,
    vertices: [usize; 3],
    degree: usize,
    region: u32,
    level: u32,
}

#[derive(Serialize)]
struct MeshMortar {
    a: [f64; 2],
    b: [f64; 2],
    degree: usize,
    left: usize,
    right: Option<usize>,
    boundary: Option<&'static str>,
}

#[derive(Serialize)]
struct MeshDump {
    vertices: Vec<[f64; 2]>,
    elements: Vec<MeshElement>,
    mortars: Vec<MeshMortar>,
}

pub fn write_mesh(path: &Path, mesh: &Mesh, skeleton: &Skeleton) -> Result<(), CliError> {
    let dump = MeshDump {
        vertices: mesh.vertices().iter().map(|v| [v.x[0], v.x[1]]).collect(),
        elements: mesh
            .active_elements()
            .into_iter()
            .map(|k| {
                let e = mesh.element(k);
                MeshElement { id: k, vertices: e.vertices, degree: e.degree, region: e.region, level: e.level }
            })
            .collect(),
        mortars: skeleton
            .mortars
            .iter()
            .map(|m| MeshMortar {
                a: [m.a[0], m.a[1]],
                b: [m.b[0], m.b[1]],
                degree: m.degree,
                left: m.left.element,
                right: m.right.map(|r| r.element),
                boundary: m.boundary.map(|s| s.name()),
            })
            .collect(),
    };
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &dump)?;
    w.flush().map_err(io(path))?;
    Ok(())
}

#[derive(Serialize)]
struct ElementSamples {
    id: usize,
    degree: usize,
    /// Physical coordinates of the lattice points.
    points: Vec<[f64; 2]>,
    /// One row of all state components per lattice point.
    values: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SolutionDump {
    status: &'static str,
    components: usize,
    lattice_points_per_edge: usize,
    elements: Vec<ElementSamples>,
}

/// Barycentric lattice with `n` points per edge, as (xi, eta) pairs.
pub fn lattice(n: usize) -> Vec<(f64, f64)> {
    let d = (n - 1) as f64;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..n - j {
            out.push((i as f64 / d, j as f64 / d));
        }
    }
    out
}

pub fn write_solution(path: &Path, disc: &Discretization, sol: &Solution, status: Status) -> Result<(), CliError> {
    let lat = lattice(LATTICE_POINTS);
    let mesh = disc.mesh;
    let elements = mesh
        .active_elements()
        .into_iter()
        .map(|k| {
            let aff = mesh.affine(k);
            let points: Vec<_> = lat.iter().map(|&(xi, eta)| aff.map(xi, eta)).collect();
            ElementSamples {
                id: k,
                degree: mesh.element(k).degree,
                values: points.iter().map(|x| disc.volume_value(sol, k, x).iter().copied().collect()).collect(),
                points: points.iter().map(|x| [x[0], x[1]]).collect(),
            }
        })
        .collect();
    let dump = SolutionDump {
        status: status.name(),
        components: disc.space.components,
        lattice_points_per_edge: LATTICE_POINTS,
        elements,
    };
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, &dump)?;
    w.flush().map_err(io(path))?;
    Ok(())
}

pub fn format_audit(report: &AuditReport) -> String {
    let mut s = String::new();
    for c in &report.checks {
        s.push_str(&format!("{:<20} {}  {}\n", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail));
    }
    if let Some(k0) = report.k0 {
        s.push_str(&format!("k0 {k0:.6e}\n"));
    }
    for w in &report.warnings {
        s.push_str(&format!("warning: {w}\n"));
    }
    s
}

pub fn write_audit(path: &Path, report: &AuditReport) -> Result<(), CliError> {
    let mut w = create(path)?;
    w.write_all(format_audit(report).as_bytes()).map_err(io(path))?;
    w.flush().map_err(io(path))?;
    Ok(())
}
