//! Linear output functionals, the discrete adjoint on the p-enriched space
//! and the dual-weighted residual estimate.

use nalgebra::DVector;

use crate::basis::{change_segment_degree, change_triangle_degree, eval_segment, eval_triangle, segment_dim, triangle_dim};
use crate::error::{HdgError, Result};
use crate::friedrichs::{BoundaryScalarFn, System};
use crate::hdg::{condense, recover, Discretization, FaceBlock, LocalBlocks, Solution, Space};
use crate::mesh::BoundarySide;
use crate::quadrature::segment_rule;

/// Quantity a functional term integrates along the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    /// B_n^T sigma of the interior trace of a two-field solution.
    SigmaNormal,
    /// First u component (first z component for one-field systems) of the
    /// interior trace.
    U,
    /// First component of the hybrid trace.
    UHat,
}

#[derive(Clone)]
pub struct FunctionalTerm {
    pub field: Field,
    /// Weight at (x, outward normal).
    pub weight: BoundaryScalarFn,
}

/// J(Z) = sum over terms of the integral of weight * field over the
/// selected sides.
#[derive(Clone)]
pub struct OutputFunctional {
    pub name: String,
    pub sides: Vec<BoundarySide>,
    pub terms: Vec<FunctionalTerm>,
}

impl OutputFunctional {
    pub fn scaled(&self, c: f64) -> OutputFunctional {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let w = t.weight.clone();
                FunctionalTerm { field: t.field, weight: std::sync::Arc::new(move |x, n| c * w(x, n)) }
            })
            .collect();
        OutputFunctional { name: self.name.clone(), sides: self.sides.clone(), terms }
    }

    /// Gradient of J with respect to the monolithic unknown vector (volume
    /// coefficients first, then trace coefficients). The quadrature depends
    /// only on the base mortar degree, so a padded state yields the same value.
    pub fn derivative(&self, disc: &Discretization) -> Result<Vec<f64>> {
        let space = &disc.space;
        let mut j = vec![0.0; space.n_volume + space.n_trace];
        let mut matched = false;
        for (e, mo) in disc.skeleton.mortars.iter().enumerate() {
            let Some(side) = mo.boundary else { continue };
            if !self.sides.contains(&side) {
                continue;
            }
            matched = true;
            let k = mo.left.element;
            let p = space.elem_degree[k];
            let pe = space.mortar_degree[e];
            let nb = triangle_dim(p);
            let ne = segment_dim(pe);
            let rule = segment_rule(2 * mo.degree + 8 + disc.options.quad_increment)?;
            let aff = disc.mesh.affine(k);
            let n = mo.normal;
            let nb_mat = match disc.system {
                System::TwoField(s) => Some(s.normal_b(&n)),
                System::OneField(_) => None,
            };
            let q0 = disc.system.q_offset();
            let ov = space.volume_offset[k];
            let ot = space.n_volume + space.trace_offset[e];
            let mut v = vec![0.0; nb];
            let mut mv = vec![0.0; ne];
            for (&s, &w) in rule.points.iter().zip(&rule.weights) {
                let x = mo.point(s);
                let (xi, eta) = aff.inverse(&x);
                eval_triangle(p, xi, eta, &mut v);
                eval_segment(pe, s, &mut mv);
                let wq = w * mo.length;
                for t in &self.terms {
                    let c = wq * (t.weight)(&x, &n);
                    if c == 0.0 {
                        continue;
                    }
                    match t.field {
                        Field::U => {
                            for i in 0..nb {
                                j[ov + q0 * nb + i] += c * v[i];
                            }
                        }
                        Field::UHat => {
                            for l in 0..ne {
                                j[ot + l] += c * mv[l];
                            }
                        }
                        Field::SigmaNormal => {
                            let bn = nb_mat.as_ref().ok_or_else(|| {
                                HdgError::Unsupported("sigma . n functional on a one-field system".into())
                            })?;
                            for comp in 0..bn.nrows() {
                                let f = c * bn[(comp, 0)];
                                for i in 0..nb {
                                    j[ov + comp * nb + i] += f * v[i];
                                }
                            }
                        }
                    }
                }
            }
        }
        if !matched {
            return Err(HdgError::Config(format!("functional '{}' selects no boundary mortars", self.name)));
        }
        Ok(j)
    }

    pub fn evaluate(&self, disc: &Discretization, sol: &Solution) -> Result<f64> {
        let j = self.derivative(disc)?;
        Ok(dot(&j, &flatten(&disc.space, sol)))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Monolithic unknown vector of a solution.
pub fn flatten(space: &Space, sol: &Solution) -> Vec<f64> {
    let mut out = vec![0.0; space.n_volume + space.n_trace];
    for (k, v) in sol.volume.iter().enumerate() {
        if !v.is_empty() {
            let o = space.volume_offset[k];
            out[o..o + v.len()].copy_from_slice(v.as_slice());
        }
    }
    out[space.n_volume..].copy_from_slice(&sol.trace);
    out
}

/// Exact injection of a solution on `from` into the richer space `to` on
/// the same mesh and skeleton.
pub fn enrich(from: &Space, to: &Space, sol: &Solution) -> Solution {
    let volume = sol
        .volume
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if v.is_empty() {
                v.clone()
            } else {
                let c = change_triangle_degree(v.as_slice(), from.components, from.elem_degree[k], to.elem_degree[k]);
                DVector::from_vec(c)
            }
        })
        .collect();
    let mut trace = vec![0.0; to.n_trace];
    for e in 0..from.mortar_degree.len() {
        let o = from.trace_offset[e];
        let src = &sol.trace[o..o + from.trace_size(e)];
        let c = change_segment_degree(src, from.trace_components, from.mortar_degree[e], to.mortar_degree[e]);
        let ot = to.trace_offset[e];
        trace[ot..ot + c.len()].copy_from_slice(&c);
    }
    Solution { volume, trace }
}

/// Local blocks of the transposed global operator with right-hand side
/// -j. Each trace block of the primal couples the traces of one element, so
/// the transpose is again element-local.
pub fn adjoint_blocks(space: &Space, blocks: &[LocalBlocks], j: &[f64]) -> Vec<LocalBlocks> {
    let mut seen = vec![false; space.mortar_degree.len()];
    blocks
        .iter()
        .map(|b| {
            let ov = space.volume_offset[b.element];
            let nv = b.avv.nrows();
            let fv = DVector::from_fn(nv, |i, _| -j[ov + i]);
            let faces = b
                .faces
                .iter()
                .map(|f| {
                    let nt = f.att.nrows();
                    let ft = if seen[f.mortar] {
                        DVector::zeros(nt)
                    } else {
                        seen[f.mortar] = true;
                        let ot = space.n_volume + space.trace_offset[f.mortar];
                        DVector::from_fn(nt, |i, _| -j[ot + i])
                    };
                    FaceBlock {
                        mortar: f.mortar,
                        side: f.side,
                        avt: f.atv.transpose(),
                        atv: f.avt.transpose(),
                        att: f.att.transpose(),
                        ft,
                    }
                })
                .collect();
            LocalBlocks { element: b.element, avv: b.avv.transpose(), fv, faces }
        })
        .collect()
}

pub struct AdjointSolution {
    pub solution: Solution,
    pub trace_residual: f64,
}

/// Solves the adjoint problem for the derivative `j` using the primal
/// blocks of the same discretization.
pub fn solve_adjoint(disc: &Discretization, blocks: &[LocalBlocks], j: &[f64]) -> Result<AdjointSolution> {
    let ablocks = adjoint_blocks(&disc.space, blocks, j);
    let (ts, rec) = condense(&disc.space, &ablocks)?;
    let trace = ts.solve()?;
    let trace_residual = crate::linalg::relative_residual(&ts.matrix, &trace, &ts.rhs);
    let solution = recover(&disc.space, disc.mesh.elements().len(), &rec, &trace);
    Ok(AdjointSolution { solution, trace_residual })
}

/// Residual F - M Z tested with W, split into element rows and trace rows.
#[derive(Debug, Clone)]
pub struct ResidualSplit {
    /// (element, W_K . (A_vv z + A_vt z_hat - f_v)) for every active element.
    pub element: Vec<(usize, f64)>,
    /// W_e . (A_tv z + A_tt z_hat - f_t) per mortar.
    pub trace: Vec<f64>,
}

impl ResidualSplit {
    pub fn total(&self) -> f64 {
        self.element.iter().map(|r| r.1).sum::<f64>() + self.trace.iter().sum::<f64>()
    }
}

/// Localizes (M Z - F) . W over the blocks of one discretization.
pub fn localized_residual(space: &Space, blocks: &[LocalBlocks], z: &Solution, w: &Solution) -> ResidualSplit {
    let mut trace = vec![0.0; space.mortar_degree.len()];
    let mut element = Vec::with_capacity(blocks.len());
    for b in blocks {
        let zk = &z.volume[b.element];
        let wk = &w.volume[b.element];
        let mut r = &b.avv * zk - &b.fv;
        for f in &b.faces {
            let o = space.trace_offset[f.mortar];
            let nt = f.att.nrows();
            let zh = DVector::from_column_slice(&z.trace[o..o + nt]);
            let wh = DVector::from_column_slice(&w.trace[o..o + nt]);
            r += &f.avt * &zh;
            let rt = &f.atv * zk + &f.att * &zh - &f.ft;
            trace[f.mortar] += wh.dot(&rt);
        }
        element.push((b.element, wk.dot(&r)));
    }
    ResidualSplit { element, trace }
}

/// Dual-weighted residual result for one primal solve.
pub struct DwrEstimate {
    /// J(Z_H).
    pub output: f64,
    /// Estimate of J(Z_H) - J(Z_h), the full residual including trace rows.
    pub estimate: f64,
    /// (element, |R_K|) in active element order.
    pub indicators: Vec<(usize, f64)>,
    pub residual: ResidualSplit,
    pub adjoint: AdjointSolution,
    pub enriched_dofs: usize,
}

/// Adjoint solve at degree p + 1 on the same mesh and the residual of the
/// injected primal solution weighted by it.
pub fn dwr_estimate(coarse: &Discretization, primal: &Solution, functional: &OutputFunctional) -> Result<DwrEstimate> {
    let fine = Discretization::new(coarse.mesh, coarse.skeleton, coarse.system, coarse.space.shift + 1, coarse.options)?;
    let blocks = fine.assemble_all()?;
    let j = functional.derivative(&fine)?;
    let adjoint = solve_adjoint(&fine, &blocks, &j)?;
    let z = enrich(&coarse.space, &fine.space, primal);
    let output = dot(&j, &flatten(&fine.space, &z));
    let residual = localized_residual(&fine.space, &blocks, &z, &adjoint.solution);
    let indicators = residual.element.iter().map(|&(k, r)| (k, r.abs())).collect();
    Ok(DwrEstimate {
        output,
        estimate: -residual.total(),
        indicators,
        residual,
        adjoint,
        enriched_dofs: fine.space.n_volume + fine.space.n_trace,
    })
}
