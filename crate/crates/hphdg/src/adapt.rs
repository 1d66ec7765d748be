//! Jump-based and adjoint-based error indicators, the regularity
//! indicator, element tagging and the hp-adaptation loop.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::adjoint::{dwr_estimate, OutputFunctional};
use crate::basis::triangle_dim;
use crate::error::{HdgError, Result};
use crate::friedrichs::System;
use crate::hdg::{solve, AssemblyOptions, Discretization, Solution};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{segment_rule, triangle_rule};
use crate::skeleton::{Side, Skeleton};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Dolejsi,
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    None,
    PRefine,
    HRefine,
    HRefinePCoarsen,
}

/// Indicator values of the active elements, in active element order.
#[derive(Debug, Clone)]
pub struct IndicatorField {
    pub elements: Vec<usize>,
    pub eta: Vec<f64>,
    pub regularity: Vec<f64>,
    pub actions: Vec<Action>,
}

impl IndicatorField {
    /// (sum eta_K^2)^{1/2}.
    pub fn global(&self) -> f64 {
        self.eta.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_eta(&self) -> f64 {
        self.eta.iter().cloned().fold(0.0, f64::max)
    }
}

fn q_range(system: &System) -> (usize, usize) {
    match system {
        System::OneField(s) => (0, s.size),
        System::TwoField(s) => (s.sigma_size, s.u_size),
    }
}

/// Per-element jump energies: (sum over faces of E_e / |F|, including
/// Dirichlet mismatch, and the unscaled interior sum).
fn jump_energies(disc: &Discretization, sol: &Solution) -> Result<Vec<(f64, f64)>> {
    let mesh = disc.mesh;
    let (q0, nq) = q_range(disc.system);
    let mut out = vec![(0.0, 0.0); mesh.elements().len()];
    let per_mortar: Vec<Result<(f64, bool)>> = disc
        .skeleton
        .mortars
        .par_iter()
        .enumerate()
        .map(|(e, mo)| {
            let kl = mo.left.element;
            let p = match mo.right {
                Some(r) => disc.space.elem_degree[kl].max(disc.space.elem_degree[r.element]),
                None => disc.space.elem_degree[kl],
            };
            let rule = segment_rule(2 * p + 2 + disc.options.quad_increment)?;
            let q = |k: usize, x: &Point| -> DVector<f64> { disc.volume_value(sol, k, x).rows(q0, nq).into_owned() };
            let mut energy = 0.0;
            match (mo.right, mo.boundary) {
                (Some(r), _) => {
                    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                        let x = mo.point(s);
                        energy += w * mo.length * (q(kl, &x) - q(r.element, &x)).norm_squared();
                    }
                    Ok((energy, true))
                }
                (None, Some(side)) => {
                    let region = mesh.element(kl).region;
                    for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                        let x = mo.point(s);
                        if let Some(g) = disc.system.dirichlet_value(&x, region, &mo.normal, side) {
                            energy += w * mo.length * (q(kl, &x) - g.rows(0, nq)).norm_squared();
                        }
                    }
                    Ok((energy, false))
                }
                (None, None) => Err(HdgError::MeshIntegrity(format!("mortar {e} has one side and no boundary"))),
            }
        })
        .collect();
    for (e, r) in per_mortar.into_iter().enumerate() {
        let (energy, interior) = r?;
        let mo = &disc.skeleton.mortars[e];
        for side in [Side::Left, Side::Right] {
            if let Some(sr) = mo.side(side) {
                let f = mesh.face_length(sr.element, sr.face);
                out[sr.element].0 += energy / f;
                if interior {
                    out[sr.element].1 += energy;
                }
            }
        }
    }
    Ok(out)
}

/// eta_K from face jumps of q_h (z_h for one-field, u_h for two-field
/// systems) and the Dirichlet mismatch; other boundary faces add nothing.
pub fn dolejsi_indicator(disc: &Discretization, sol: &Solution) -> Result<Vec<f64>> {
    let en = jump_energies(disc, sol)?;
    Ok(disc.mesh.active_elements().iter().map(|&k| en[k].0.sqrt()).collect())
}

/// g_K = (interior jump energy) / (|K| h_K^{2p_K - 3}).
pub fn regularity_indicator(disc: &Discretization, sol: &Solution) -> Result<Vec<f64>> {
    let en = jump_energies(disc, sol)?;
    let mesh = disc.mesh;
    Ok(mesh
        .active_elements()
        .iter()
        .map(|&k| {
            let p = mesh.element(k).degree as i32;
            en[k].1 / (mesh.area(k) * mesh.diameter(k).powi(2 * p - 3))
        })
        .collect())
}

/// Action for one element with indicator `eta` against threshold `thr`.
pub fn classify(eta: f64, thr: f64, g: f64, h: f64) -> Action {
    if eta < thr {
        Action::None
    } else if g <= h.powi(-2) {
        Action::PRefine
    } else if g <= h.powi(-4) {
        Action::HRefine
    } else {
        Action::HRefinePCoarsen
    }
}

/// Tags every element with eta_K >= omega * max eta.
pub fn tag_elements(eta: &[f64], regularity: &[f64], diameters: &[f64], omega: f64) -> Result<Vec<Action>> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(HdgError::Parameter(format!("omega must lie in [0, 1], got {omega}")));
    }
    let max = eta.iter().cloned().fold(0.0, f64::max);
    let thr = omega * max;
    Ok((0..eta.len()).map(|i| classify(eta[i], thr, regularity[i], diameters[i])).collect())
}

/// Applies the actions; returns whether the mesh or any degree changed.
pub fn apply_actions(mesh: &mut Mesh, elements: &[usize], actions: &[Action]) -> Result<(bool, Vec<usize>)> {
    let (pmin, pmax) = (mesh.p_min(), mesh.p_max());
    let mut changed = false;
    let mut split = Vec::new();
    for (&k, &a) in elements.iter().zip(actions) {
        let p = mesh.element(k).degree;
        match a {
            Action::None => {}
            Action::PRefine => {
                let q = (p + 1).min(pmax);
                changed |= q != p;
                mesh.set_degree(k, q);
            }
            Action::HRefine => split.push(k),
            Action::HRefinePCoarsen => {
                mesh.set_degree(k, p.saturating_sub(1).max(pmin));
                split.push(k);
            }
        }
    }
    if !split.is_empty() {
        mesh.refine(&split)?;
        changed = true;
    }
    Ok((changed, split))
}

/// L2 norm of (u_h - u) over the active elements, restricted to the points
/// where `mask` holds.
pub fn l2_error(
    disc: &Discretization,
    sol: &Solution,
    exact: &(dyn Fn(&Point) -> f64 + Sync),
    mask: Option<&(dyn Fn(&Point) -> bool + Sync)>,
) -> Result<f64> {
    let q0 = disc.system.q_offset();
    let mesh = disc.mesh;
    let parts: Vec<Result<f64>> = mesh
        .active_elements()
        .par_iter()
        .map(|&k| {
            let p = disc.space.elem_degree[k];
            let rule = triangle_rule(2 * p + 8)?;
            let aff = mesh.affine(k);
            let nb = triangle_dim(p);
            let mut v = vec![0.0; nb];
            let c = &sol.volume[k];
            let mut s = 0.0;
            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                let x = aff.map(pt[0], pt[1]);
                if mask.is_some_and(|m| !m(&x)) {
                    continue;
                }
                crate::basis::eval_triangle(p, pt[0], pt[1], &mut v);
                let uh: f64 = (0..nb).map(|j| c[q0 * nb + j] * v[j]).sum();
                s += w * aff.det * (uh - exact(&x)).powi(2);
            }
            Ok(s)
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total.sqrt())
}

#[derive(Clone)]
pub struct AdaptConfig {
    pub criterion: Criterion,
    pub omega: f64,
    pub max_cycles: usize,
    pub options: AssemblyOptions,
    /// Required for the adjoint criterion; evaluated in every cycle when present.
    pub functional: Option<OutputFunctional>,
}

#[derive(Debug, Clone, Default)]
pub struct CycleRecord {
    pub cycle: usize,
    pub elements: usize,
    pub volume_dofs: usize,
    pub trace_dofs: usize,
    pub estimate: f64,
    pub max_eta: f64,
    pub l2_error: Option<f64>,
    pub output: Option<f64>,
    pub output_estimate: Option<f64>,
    pub p_refined: usize,
    pub h_refined: usize,
    pub h_refined_p_coarsened: usize,
    pub min_h: f64,
    pub max_degree: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    /// max eta < omega E.
    Converged,
    MaxCycles,
    /// Tagging left the mesh and degrees unchanged.
    Stalled,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxCycles => "max_cycles",
            Status::Stalled => "stalled",
        }
    }
}

pub struct AdaptResult {
    pub history: Vec<CycleRecord>,
    pub status: Status,
    pub mesh: Mesh,
    pub solution: Solution,
}

/// State of one cycle handed to the observer of [`adapt`].
pub struct CycleView<'a> {
    pub disc: &'a Discretization<'a>,
    pub solution: &'a Solution,
    pub indicators: &'a IndicatorField,
    pub record: &'a CycleRecord,
}

/// Solve, estimate, mark and refine until max eta < omega E or the cycle
/// limit is reached.
pub fn adapt(
    mut mesh: Mesh,
    system: &System,
    exact: Option<&(dyn Fn(&Point) -> f64 + Sync)>,
    config: &AdaptConfig,
    mut observer: impl FnMut(&CycleView),
) -> Result<AdaptResult> {
    if !(0.0..=1.0).contains(&config.omega) {
        return Err(HdgError::Parameter(format!("omega must lie in [0, 1], got {}", config.omega)));
    }
    if config.criterion == Criterion::Adjoint && config.functional.is_none() {
        return Err(HdgError::Config("the adjoint criterion needs an output functional".into()));
    }
    let mut history = Vec::new();
    let mut cycle = 0;
    loop {
        let start = Instant::now();
        let skeleton = Skeleton::build(&mesh)?;
        let disc = Discretization::new(&mesh, &skeleton, system, 0, config.options)?;
        let solved = solve(&disc)?;
        let sol = solved.solution;
        let elements = mesh.active_elements();
        let regularity = regularity_indicator(&disc, &sol)?;
        let mut record = CycleRecord {
            cycle,
            elements: elements.len(),
            volume_dofs: disc.space.n_volume,
            trace_dofs: disc.space.n_trace,
            min_h: mesh.min_diameter(),
            max_degree: elements.iter().map(|&k| mesh.element(k).degree).max().unwrap_or(0),
            ..Default::default()
        };
        let eta = match (&config.criterion, &config.functional) {
            (Criterion::Adjoint, Some(f)) => {
                let d = dwr_estimate(&disc, &sol, f)?;
                record.output = Some(d.output);
                record.output_estimate = Some(d.estimate);
                d.indicators.iter().map(|r| r.1).collect()
            }
            (_, f) => {
                if let Some(f) = f {
                    record.output = Some(f.evaluate(&disc, &sol)?);
                }
                dolejsi_indicator(&disc, &sol)?
            }
        };
        if let Some(u) = exact {
            record.l2_error = Some(l2_error(&disc, &sol, u, None)?);
        }
        let diam: Vec<f64> = elements.iter().map(|&k| mesh.diameter(k)).collect();
        let actions = tag_elements(&eta, &regularity, &diam, config.omega)?;
        let field = IndicatorField { elements: elements.clone(), eta, regularity, actions };
        record.estimate = field.global();
        record.max_eta = field.max_eta();
        let go_on = record.estimate > 0.0 && record.max_eta >= config.omega * record.estimate;
        let status = if !go_on {
            Some(Status::Converged)
        } else if cycle >= config.max_cycles {
            Some(Status::MaxCycles)
        } else {
            None
        };
        if status.is_none() {
            for a in &field.actions {
                match a {
                    Action::PRefine => record.p_refined += 1,
                    Action::HRefine => record.h_refined += 1,
                    Action::HRefinePCoarsen => record.h_refined_p_coarsened += 1,
                    Action::None => {}
                }
            }
        }
        record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        observer(&CycleView { disc: &disc, solution: &sol, indicators: &field, record: &record });
        history.push(record);
        drop(disc);
        if let Some(status) = status {
            return Ok(AdaptResult { history, status, mesh, solution: sol });
        }
        let (changed, _) = apply_actions(&mut mesh, &elements, &field.actions)?;
        if !changed {
            return Ok(AdaptResult { history, status: Status::Stalled, mesh, solution: sol });
        }
        cycle += 1;
    }
}
