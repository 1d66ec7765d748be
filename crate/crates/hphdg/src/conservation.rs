//! Local and global conservation balances of a discrete solution.

use nalgebra::DVector;

use crate::error::Result;
use crate::friedrichs::{BoundaryKind, System};
use crate::hdg::{Discretization, Solution};
use crate::skeleton::Side;

#[derive(Debug, Clone)]
pub struct ConservationReport {
    /// Relative balance residual of every active element.
    pub element_residuals: Vec<(usize, f64)>,
    pub max_element_residual: f64,
    /// Largest relative flux jump over interior mortars, tested with 1.
    pub max_interior_jump: f64,
    /// Relative residual of the domain balance built from element sources
    /// and the boundary-row identities.
    pub global_residual: f64,
}

/// Tests the local equations with w = 1 in each component and the
/// interior global rows with a constant trace test function.
pub fn check_conservation(disc: &Discretization, sol: &Solution) -> Result<ConservationReport> {
    let m = disc.space.components;
    let mt = disc.space.trace_components;
    let q0 = disc.system.q_offset();
    let mesh = disc.mesh;
    let mut element_residuals = Vec::new();
    let mut global = DVector::<f64>::zeros(m);
    let mut global_scale = 0.0f64;
    for k in mesh.active_elements() {
        let region = mesh.element(k).region;
        let vd = disc.volume_data(k);
        let mut bal = DVector::<f64>::zeros(m);
        let mut scale = 0.0f64;
        for (q, x) in vd.points.iter().enumerate() {
            let z = disc.volume_value(sol, k, x);
            let g = disc.system.reaction(x, region);
            let f = disc.system.forcing(x, region);
            let src = g * &z - f;
            bal += &src * vd.weights[q];
            scale += src.abs().sum() * vd.weights[q];
        }
        global += &bal;
        for &(e, side) in &disc.skeleton.element_mortars[k] {
            let fd = disc.face_data(k, e, side)?;
            let ops = disc.face_ops_at(k, e, &fd)?;
            for (q, x) in fd.points.iter().enumerate() {
                let z = disc.volume_value(sol, k, x);
                let zh = disc.trace_value(sol, e, fd.params[q]);
                let flux = &ops[q].fz * &z + &ops[q].ft * &zh;
                bal += &flux * fd.weights[q];
                scale += flux.abs().sum() * fd.weights[q];
            }
        }
        element_residuals.push((k, bal.abs().max(), scale));
        global_scale += scale;
    }
    let mut jumps = Vec::new();
    for (e, mo) in disc.skeleton.mortars.iter().enumerate() {
        let mut jump = DVector::<f64>::zeros(mt);
        let mut scale = 0.0f64;
        let sides: Vec<(usize, Side)> = std::iter::once((mo.left.element, Side::Left))
            .chain(mo.right.map(|r| (r.element, Side::Right)))
            .collect();
        for (k, side) in sides {
            let fd = disc.face_data(k, e, side)?;
            let ops = disc.face_ops_at(k, e, &fd)?;
            for (q, x) in fd.points.iter().enumerate() {
                let z = disc.volume_value(sol, k, x);
                let zh = disc.trace_value(sol, e, fd.params[q]);
                let flux = &ops[q].fz * &z + &ops[q].ft * &zh;
                if mo.is_boundary() {
                    // boundary-row identity for the trace components
                    let ident = boundary_flux(disc.system, &ops[q], &z, &zh, mo.boundary, q0, m);
                    global += &ident * fd.weights[q];
                    global_scale += ident.abs().sum() * fd.weights[q];
                } else {
                    jump += flux.rows(q0, mt) * fd.weights[q];
                    scale += flux.rows(q0, mt).abs().sum() * fd.weights[q];
                }
            }
        }
        if !mo.is_boundary() {
            jumps.push((jump.abs().max(), scale));
        }
    }
    // relative to the local flux magnitude, floored where the solution
    // vanishes so that roundoff is not reported as imbalance
    let n = mesh.n_active().max(1) as f64;
    let floor = 1e-3 * global_scale / n;
    let element_residuals: Vec<(usize, f64)> =
        element_residuals.into_iter().map(|(k, r, s)| (k, r / s.max(floor).max(1e-300))).collect();
    let max_interior_jump = jumps.iter().map(|&(j, s)| j / s.max(floor).max(1e-300)).fold(0.0, f64::max);
    let max_element_residual = element_residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ConservationReport {
        element_residuals,
        max_element_residual,
        max_interior_jump,
        global_residual: global.abs().max() / global_scale.max(1e-300),
    })
}

/// Normal flux on a boundary mortar as implied by the boundary row, with
/// the element-side flux kept for components the row does not determine.
fn boundary_flux(
    system: &System,
    ops: &crate::friedrichs::FaceOps,
    z: &DVector<f64>,
    zh: &DVector<f64>,
    side: Option<crate::mesh::BoundarySide>,
    q0: usize,
    m: usize,
) -> DVector<f64> {
    let mut flux = &ops.fz * z + &ops.ft * zh;
    let dirichlet = match (system, side) {
        (System::TwoField(s), Some(side)) => s.condition(side).kind == BoundaryKind::Dirichlet,
        _ => false,
    };
    if !dirichlet {
        // trace row: trace_fz z + trace_ft zhat = rhs, and the flux is
        // trace_fz z + (P ft) zhat, so flux = rhs + (P ft - trace_ft) zhat
        let pft = ops.ft.rows(q0, m - q0).into_owned();
        let implied = &ops.rhs + (pft - &ops.trace_ft) * zh;
        flux.rows_mut(q0, m - q0).copy_from(&implied);
    }
    flux
}
