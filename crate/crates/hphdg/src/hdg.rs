//! Local HDG blocks, static condensation, the global trace system and
//! volume recovery for one- and two-field Friedrichs systems.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::basis::{eval_segment, eval_triangle, eval_triangle_grad, segment_dim, triangle_dim};
use crate::error::{HdgError, Result};
use crate::friedrichs::{BoundaryKind, FaceOps, System};
use crate::linalg::{relative_residual, sparse_solve, SparseMatrix};
use crate::mesh::{Mesh, Point};
use crate::quadrature::{segment_rule, triangle_rule, TriangleRule};
use crate::skeleton::{Side, Skeleton};

/// Relative residual the trace solve must reach.
pub const SOLVE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
pub struct AssemblyOptions {
    /// Added to every quadrature strength.
    pub quad_increment: usize,
    /// Promote degenerate flux-hypothesis points to errors.
    pub strict: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { quad_increment: 0, strict: false }
    }
}

/// Degrees and dof offsets of a discrete space on a fixed skeleton. The
/// enriched space used by the adjoint raises every degree by `shift`.
#[derive(Debug, Clone)]
pub struct Space {
    pub shift: usize,
    pub components: usize,
    pub trace_components: usize,
    pub elem_degree: Vec<usize>,
    pub mortar_degree: Vec<usize>,
    pub volume_offset: Vec<usize>,
    pub n_volume: usize,
    pub trace_offset: Vec<usize>,
    pub n_trace: usize,
}

impl Space {
    pub fn new(mesh: &Mesh, skeleton: &Skeleton, system: &System, shift: usize) -> Space {
        let m = system.size();
        let mt = system.trace_size();
        let mut elem_degree = vec![0; mesh.elements().len()];
        let mut volume_offset = vec![0; mesh.elements().len()];
        let mut n_volume = 0;
        for (k, e) in mesh.elements().iter().enumerate() {
            if e.active {
                elem_degree[k] = e.degree + shift;
                volume_offset[k] = n_volume;
                n_volume += m * triangle_dim(e.degree + shift);
            }
        }
        let mut mortar_degree = Vec::with_capacity(skeleton.mortars.len());
        let mut trace_offset = Vec::with_capacity(skeleton.mortars.len());
        let mut n_trace = 0;
        for mo in &skeleton.mortars {
            let p = mo.degree + shift;
            mortar_degree.push(p);
            trace_offset.push(n_trace);
            n_trace += mt * segment_dim(p);
        }
        Space {
            shift,
            components: m,
            trace_components: mt,
            elem_degree,
            mortar_degree,
            volume_offset,
            n_volume,
            trace_offset,
            n_trace,
        }
    }

    pub fn volume_size(&self, k: usize) -> usize {
        self.components * triangle_dim(self.elem_degree[k])
    }

    pub fn trace_size(&self, e: usize) -> usize {
        self.trace_components * segment_dim(self.mortar_degree[e])
    }
}

/// Reference basis tables at the volume quadrature points of one degree.
#[derive(Debug, Clone)]
pub struct RefTable {
    pub rule: TriangleRule,
    pub vals: DMatrix<f64>,
    pub dxi: DMatrix<f64>,
    pub deta: DMatrix<f64>,
}

impl RefTable {
    pub fn new(p: usize, strength: usize) -> Result<RefTable> {
        let rule = triangle_rule(strength)?;
        let nb = triangle_dim(p);
        let nq = rule.points.len();
        let mut vals = DMatrix::zeros(nq, nb);
        let mut dxi = DMatrix::zeros(nq, nb);
        let mut deta = DMatrix::zeros(nq, nb);
        let (mut v, mut a, mut b) = (vec![0.0; nb], vec![0.0; nb], vec![0.0; nb]);
        for (q, pt) in rule.points.iter().enumerate() {
            eval_triangle_grad(p, pt[0], pt[1], &mut v, &mut a, &mut b);
            for i in 0..nb {
                vals[(q, i)] = v[i];
                dxi[(q, i)] = a[i];
                deta[(q, i)] = b[i];
            }
        }
        Ok(RefTable { rule, vals, dxi, deta })
    }
}

/// Contributions of one element to one of its mortars.
#[derive(Debug, Clone)]
pub struct FaceBlock {
    pub mortar: usize,
    pub side: Side,
    /// Volume rows, trace columns.
    pub avt: DMatrix<f64>,
    /// Trace rows, volume columns.
    pub atv: DMatrix<f64>,
    /// Trace rows, trace columns.
    pub att: DMatrix<f64>,
    pub ft: DVector<f64>,
}

/// Element matrices of the local solver and its share of the global rows.
#[derive(Debug, Clone)]
pub struct LocalBlocks {
    pub element: usize,
    pub avv: DMatrix<f64>,
    pub fv: DVector<f64>,
    pub faces: Vec<FaceBlock>,
}

/// Trace unknowns and volume coefficients of a discrete solution.
#[derive(Debug, Clone)]
pub struct Solution {
    /// Per element id; empty for inactive elements.
    pub volume: Vec<DVector<f64>>,
    pub trace: Vec<f64>,
}

/// Condensed global trace system.
#[derive(Debug, Clone)]
pub struct TraceSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Dirichlet trace dofs whose rows reduce to a mass identity.
    pub constrained: Vec<bool>,
}

/// Data kept from condensation to recover the volume unknowns.
#[derive(Debug, Clone)]
pub struct Recovery {
    pub element: usize,
    pub mortars: Vec<usize>,
    /// A_vv^{-1} [A_vt(e_1) ... A_vt(e_n) | f_v].
    pub x: DMatrix<f64>,
}

pub struct Discretization<'a> {
    pub mesh: &'a Mesh,
    pub skeleton: &'a Skeleton,
    pub system: &'a System,
    pub space: Space,
    pub options: AssemblyOptions,
    pub tables: HashMap<usize, RefTable>,
}

/// Per-element geometry and basis values at the volume quadrature points.
pub struct VolumeData {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub vals: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
}

/// Basis values of one element and one mortar at face quadrature points.
pub struct FaceData {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub vals: DMatrix<f64>,
    pub mvals: DMatrix<f64>,
    pub normal: Point,
}

/// a^T diag(w) b.
pub fn weighted_gram(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = b.clone();
    for (q, wq) in w.iter().enumerate() {
        scaled.row_mut(q).scale_mut(*wq);
    }
    a.tr_mul(&scaled)
}

fn add_block(dst: &mut DMatrix<f64>, r: usize, c: usize, src: &DMatrix<f64>) {
    let mut v = dst.view_mut((r, c), (src.nrows(), src.ncols()));
    v += src;
}

impl<'a> Discretization<'a> {
    pub fn new(
        mesh: &'a Mesh,
        skeleton: &'a Skeleton,
        system: &'a System,
        shift: usize,
        options: AssemblyOptions,
    ) -> Result<Discretization<'a>> {
        let space = Space::new(mesh, skeleton, system, shift);
        let mut tables = HashMap::new();
        for k in mesh.active_elements() {
            let p = space.elem_degree[k];
            if let std::collections::hash_map::Entry::Vacant(v) = tables.entry(p) {
                v.insert(RefTable::new(p, 2 * p + 2 + options.quad_increment)?);
            }
        }
        Ok(Discretization { mesh, skeleton, system, space, options, tables })
    }

    pub fn volume_data(&self, k: usize) -> VolumeData {
        let p = self.space.elem_degree[k];
        let t = &self.tables[&p];
        let aff = self.mesh.affine(k);
        let inv = aff.inv;
        let dx = &t.dxi * inv[(0, 0)] + &t.deta * inv[(1, 0)];
        let dy = &t.dxi * inv[(0, 1)] + &t.deta * inv[(1, 1)];
        let points = t.rule.points.iter().map(|pt| aff.map(pt[0], pt[1])).collect();
        let weights = t.rule.weights.iter().map(|w| w * aff.det).collect();
        VolumeData { points, weights, vals: t.vals.clone(), dx, dy }
    }

    /// Face quadrature of element `k` on mortar `e` with the given strength.
    pub fn face_data_with(&self, k: usize, e: usize, side: Side, strength: usize) -> Result<FaceData> {
        let mo = &self.skeleton.mortars[e];
        let p = self.space.elem_degree[k];
        let pe = self.space.mortar_degree[e];
        let rule = segment_rule(strength)?;
        let aff = self.mesh.affine(k);
        let nq = rule.points.len();
        let nb = triangle_dim(p);
        let ne = segment_dim(pe);
        let mut vals = DMatrix::zeros(nq, nb);
        let mut mvals = DMatrix::zeros(nq, ne);
        let mut v = vec![0.0; nb];
        let mut mv = vec![0.0; ne];
        let mut points = Vec::with_capacity(nq);
        for (q, &s) in rule.points.iter().enumerate() {
            let x = mo.point(s);
            let (xi, eta) = aff.inverse(&x);
            eval_triangle(p, xi, eta, &mut v);
            eval_segment(pe, s, &mut mv);
            for i in 0..nb {
                vals[(q, i)] = v[i];
            }
            for l in 0..ne {
                mvals[(q, l)] = mv[l];
            }
            points.push(x);
        }
        Ok(FaceData {
            points,
            params: rule.points.clone(),
            weights: rule.weights.iter().map(|w| w * mo.length).collect(),
            vals,
            mvals,
            normal: mo.normal_for(side),
        })
    }

    pub fn face_data(&self, k: usize, e: usize, side: Side) -> Result<FaceData> {
        let pe = self.space.mortar_degree[e];
        self.face_data_with(k, e, side, 2 * pe + 2 + self.options.quad_increment)
    }

    pub fn face_ops_at(&self, k: usize, e: usize, fd: &FaceData) -> Result<Vec<FaceOps>> {
        let region = self.mesh.element(k).region;
        let boundary = self.skeleton.mortars[e].boundary;
        fd.points
            .iter()
            .map(|x| self.system.face_ops(x, region, &fd.normal, boundary, self.options.strict))
            .collect()
    }

    /// Local matrices of element `k`.
    pub fn assemble_element(&self, k: usize) -> Result<LocalBlocks> {
        let m = self.space.components;
        let mt = self.space.trace_components;
        let p = self.space.elem_degree[k];
        let nb = triangle_dim(p);
        let nv = m * nb;
        let region = self.mesh.element(k).region;
        let vd = self.volume_data(k);
        let nq = vd.points.len();
        let mut avv = DMatrix::zeros(nv, nv);
        let mut fv = DVector::zeros(nv);
        let coefs: Vec<([DMatrix<f64>; 2], DMatrix<f64>, DVector<f64>)> = vd
            .points
            .iter()
            .map(|x| (self.system.flux_matrices(x, region), self.system.reaction(x, region), self.system.forcing(x, region)))
            .collect();
        let mut w1 = vec![0.0; nq];
        let mut w2 = vec![0.0; nq];
        let mut wg = vec![0.0; nq];
        for ct in 0..m {
            for c in 0..m {
                let mut any = false;
                for q in 0..nq {
                    let (a, g, _) = &coefs[q];
                    w1[q] = vd.weights[q] * a[0][(ct, c)];
                    w2[q] = vd.weights[q] * a[1][(ct, c)];
                    wg[q] = vd.weights[q] * g[(ct, c)];
                    any |= w1[q] != 0.0 || w2[q] != 0.0 || wg[q] != 0.0;
                }
                if !any {
                    continue;
                }
                let blk = weighted_gram(&vd.vals, &wg, &vd.vals)
                    - weighted_gram(&vd.dx, &w1, &vd.vals)
                    - weighted_gram(&vd.dy, &w2, &vd.vals);
                add_block(&mut avv, ct * nb, c * nb, &blk);
            }
            for q in 0..nq {
                let fq = coefs[q].2[ct] * vd.weights[q];
                if fq != 0.0 {
                    for j in 0..nb {
                        fv[ct * nb + j] += fq * vd.vals[(q, j)];
                    }
                }
            }
        }
        let mut faces = Vec::new();
        for &(e, side) in &self.skeleton.element_mortars[k] {
            let fd = self.face_data(k, e, side)?;
            let ops = self.face_ops_at(k, e, &fd)?;
            let ne = segment_dim(self.space.mortar_degree[e]);
            let nt = mt * ne;
            let mut avt = DMatrix::zeros(nv, nt);
            let mut atv = DMatrix::zeros(nt, nv);
            let mut att = DMatrix::zeros(nt, nt);
            let mut ft = DVector::zeros(nt);
            let nqf = fd.points.len();
            let mut w = vec![0.0; nqf];
            for ct in 0..m {
                for c in 0..m {
                    if fill(&mut w, &fd.weights, &ops, |o| o.fz[(ct, c)]) {
                        add_block(&mut avv, ct * nb, c * nb, &weighted_gram(&fd.vals, &w, &fd.vals));
                    }
                }
                for c in 0..mt {
                    if fill(&mut w, &fd.weights, &ops, |o| o.ft[(ct, c)]) {
                        add_block(&mut avt, ct * nb, c * ne, &weighted_gram(&fd.vals, &w, &fd.mvals));
                    }
                }
            }
            for d in 0..mt {
                for c in 0..m {
                    if fill(&mut w, &fd.weights, &ops, |o| o.trace_fz[(d, c)]) {
                        add_block(&mut atv, d * ne, c * nb, &weighted_gram(&fd.mvals, &w, &fd.vals));
                    }
                }
                for c in 0..mt {
                    if fill(&mut w, &fd.weights, &ops, |o| o.trace_ft[(d, c)]) {
                        add_block(&mut att, d * ne, c * ne, &weighted_gram(&fd.mvals, &w, &fd.mvals));
                    }
                }
                for q in 0..nqf {
                    let r = ops[q].rhs[d] * fd.weights[q];
                    for l in 0..ne {
                        ft[d * ne + l] += r * fd.mvals[(q, l)];
                    }
                }
            }
            faces.push(FaceBlock { mortar: e, side, avt, atv, att, ft });
        }
        Ok(LocalBlocks { element: k, avv, fv, faces })
    }

    /// Local matrices of all active elements, in element order.
    pub fn assemble_all(&self) -> Result<Vec<LocalBlocks>> {
        let active = self.mesh.active_elements();
        active.par_iter().map(|&k| self.assemble_element(k)).collect()
    }

    /// Trace dofs fixed by Dirichlet rows of a two-field system.
    pub fn constrained_dofs(&self) -> Vec<bool> {
        let mut out = vec![false; self.space.n_trace];
        if let System::TwoField(s) = self.system {
            for (e, mo) in self.skeleton.mortars.iter().enumerate() {
                if let Some(side) = mo.boundary {
                    if s.condition(side).kind == BoundaryKind::Dirichlet {
                        let o = self.space.trace_offset[e];
                        for d in out.iter_mut().skip(o).take(self.space.trace_size(e)) {
                            *d = true;
                        }
                    }
                }
            }
        }
        out
    }

    pub fn volume_value(&self, sol: &Solution, k: usize, x: &Point) -> DVector<f64> {
        let p = self.space.elem_degree[k];
        let nb = triangle_dim(p);
        let (xi, eta) = self.mesh.affine(k).inverse(x);
        let mut v = vec![0.0; nb];
        eval_triangle(p, xi, eta, &mut v);
        let m = self.space.components;
        let c = &sol.volume[k];
        DVector::from_fn(m, |i, _| (0..nb).map(|j| c[i * nb + j] * v[j]).sum())
    }

    pub fn trace_value(&self, sol: &Solution, e: usize, s: f64) -> DVector<f64> {
        let pe = self.space.mortar_degree[e];
        let ne = segment_dim(pe);
        let mut v = vec![0.0; ne];
        eval_segment(pe, s, &mut v);
        let o = self.space.trace_offset[e];
        DVector::from_fn(self.space.trace_components, |d, _| (0..ne).map(|l| sol.trace[o + d * ne + l] * v[l]).sum())
    }

    pub fn trace_coefficients<'s>(&self, sol: &'s Solution, e: usize) -> &'s [f64] {
        let o = self.space.trace_offset[e];
        &sol.trace[o..o + self.space.trace_size(e)]
    }
}

fn fill(w: &mut [f64], weights: &[f64], ops: &[FaceOps], f: impl Fn(&FaceOps) -> f64) -> bool {
    let mut any = false;
    for q in 0..w.len() {
        w[q] = weights[q] * f(&ops[q]);
        any |= w[q] != 0.0;
    }
    any
}

/// Statically condenses the local blocks onto the trace unknowns.
pub fn condense(space: &Space, blocks: &[LocalBlocks]) -> Result<(TraceSystem, Vec<Recovery>)> {
    let parts: Vec<Result<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>, Recovery)>> = blocks
        .par_iter()
        .map(|b| {
            let nv = b.avv.nrows();
            let ncols: usize = b.faces.iter().map(|f| f.avt.ncols()).sum::<usize>() + 1;
            let mut rhs = DMatrix::zeros(nv, ncols);
            let mut col = 0;
            for f in &b.faces {
                rhs.view_mut((0, col), (nv, f.avt.ncols())).copy_from(&f.avt);
                col += f.avt.ncols();
            }
            rhs.column_mut(col).copy_from(&b.fv);
            let lu = b.avv.clone().lu();
            let x = lu
                .solve(&rhs)
                .filter(|x| x.iter().all(|v| v.is_finite()))
                .ok_or_else(|| HdgError::LinearSolve(format!("local solver singular on element {}", b.element)))?;
            let mut trips = Vec::new();
            let mut rvec = Vec::new();
            for fi in &b.faces {
                let oi = space.trace_offset[fi.mortar];
                let ni = fi.atv.nrows();
                let mut ccol = 0;
                for fj in &b.faces {
                    let oj = space.trace_offset[fj.mortar];
                    let nj = fj.avt.ncols();
                    let mut s = -(&fi.atv * x.view((0, ccol), (nv, nj)));
                    if fi.mortar == fj.mortar && fi.side == fj.side {
                        s += &fi.att;
                    }
                    for r in 0..ni {
                        for c in 0..nj {
                            let v = s[(r, c)];
                            if v != 0.0 {
                                trips.push((oi + r, oj + c, v));
                            }
                        }
                    }
                    ccol += nj;
                }
                let g = &fi.ft - &fi.atv * x.column(ncols - 1);
                for r in 0..ni {
                    rvec.push((oi + r, g[r]));
                }
            }
            let mortars = b.faces.iter().map(|f| f.mortar).collect();
            Ok((trips, rvec, Recovery { element: b.element, mortars, x }))
        })
        .collect();
    let mut trips = Vec::new();
    let mut rhs = vec![0.0; space.n_trace];
    let mut recovery = Vec::with_capacity(parts.len());
    for part in parts {
        let (t, r, rec) = part?;
        trips.extend(t);
        for (i, v) in r {
            rhs[i] += v;
        }
        recovery.push(rec);
    }
    let matrix = SparseMatrix::from_triplets(space.n_trace, space.n_trace, trips);
    Ok((TraceSystem { matrix, rhs, constrained: vec![false; space.n_trace] }, recovery))
}

impl TraceSystem {
    /// Moves the known Dirichlet values to the right-hand side so that the
    /// remaining operator keeps the symmetry of the underlying problem.
    pub fn eliminated(&self) -> (SparseMatrix, Vec<f64>) {
        if !self.constrained.iter().any(|&c| c) {
            return (self.matrix.clone(), self.rhs.clone());
        }
        let n = self.rhs.len();
        let mut value = vec![0.0; n];
        for d in 0..n {
            if self.constrained[d] {
                value[d] = self.rhs[d] / self.matrix.get(d, d);
            }
        }
        let mut rhs = self.rhs.clone();
        let mut trips = Vec::with_capacity(self.matrix.nnz());
        for &(r, c, v) in &self.matrix.entries {
            if self.constrained[r] {
                if r == c {
                    trips.push((r, c, v));
                }
            } else if self.constrained[c] {
                rhs[r] -= v * value[c];
            } else {
                trips.push((r, c, v));
            }
        }
        (SparseMatrix::from_triplets(n, n, trips), rhs)
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let (a, b) = self.eliminated();
        let x = sparse_solve(&a, &b, SOLVE_TOLERANCE)?;
        let res = relative_residual(&self.matrix, &x, &self.rhs);
        if !(res <= SOLVE_TOLERANCE) {
            return Err(HdgError::LinearSolve(format!("trace residual {res:.3e} exceeds {SOLVE_TOLERANCE:.1e}")));
        }
        Ok(x)
    }
}

/// Volume unknowns from the trace solution, element by element.
pub fn recover(space: &Space, n_elements: usize, recovery: &[Recovery], trace: &[f64]) -> Solution {
    let vols: Vec<(usize, DVector<f64>)> = recovery
        .par_iter()
        .map(|r| {
            let nv = r.x.nrows();
            let last = r.x.ncols() - 1;
            let mut z: DVector<f64> = r.x.column(last).into_owned();
            let mut col = 0;
            for &e in &r.mortars {
                let o = space.trace_offset[e];
                let nt = space.trace_size(e);
                let that = DVector::from_column_slice(&trace[o..o + nt]);
                z -= r.x.view((0, col), (nv, nt)) * that;
                col += nt;
            }
            (r.element, z)
        })
        .collect();
    let mut volume = vec![DVector::zeros(0); n_elements];
    for (k, z) in vols {
        volume[k] = z;
    }
    Solution { volume, trace: trace.to_vec() }
}

/// Output of a condensed solve.
pub struct Solved {
    pub blocks: Vec<LocalBlocks>,
    pub trace_system: TraceSystem,
    pub solution: Solution,
}

/// Assembles, condenses, solves the trace system and recovers volumes.
pub fn solve(disc: &Discretization) -> Result<Solved> {
    let blocks = disc.assemble_all()?;
    let (mut ts, rec) = condense(&disc.space, &blocks)?;
    ts.constrained = disc.constrained_dofs();
    let trace = ts.solve()?;
    let solution = recover(&disc.space, disc.mesh.elements().len(), &rec, &trace);
    Ok(Solved { blocks, trace_system: ts, solution })
}

/// Full volume-plus-trace system, assembled and solved without
/// condensation. Used to cross-check the condensed path.
pub fn solve_monolithic(disc: &Discretization, blocks: &[LocalBlocks]) -> Result<Solution> {
    let space = &disc.space;
    let nvol = space.n_volume;
    let n = nvol + space.n_trace;
    let mut trips = Vec::new();
    let mut rhs = vec![0.0; n];
    let push = |trips: &mut Vec<(usize, usize, f64)>, r0: usize, c0: usize, m: &DMatrix<f64>| {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != 0.0 {
                    trips.push((r0 + r, c0 + c, m[(r, c)]));
                }
            }
        }
    };
    for b in blocks {
        let ov = space.volume_offset[b.element];
        push(&mut trips, ov, ov, &b.avv);
        for (i, v) in b.fv.iter().enumerate() {
            rhs[ov + i] += v;
        }
        for f in &b.faces {
            let ot = nvol + space.trace_offset[f.mortar];
            push(&mut trips, ov, ot, &f.avt);
            push(&mut trips, ot, ov, &f.atv);
            push(&mut trips, ot, ot, &f.att);
            for (i, v) in f.ft.iter().enumerate() {
                rhs[ot + i] += v;
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, trips);
    let x = sparse_solve(&a, &rhs, SOLVE_TOLERANCE)?;
    let mut volume = vec![DVector::zeros(0); disc.mesh.elements().len()];
    for k in disc.mesh.active_elements() {
        let o = space.volume_offset[k];
        volume[k] = DVector::from_column_slice(&x[o..o + space.volume_size(k)]);
    }
    Ok(Solution { volume, trace: x[nvol..].to_vec() })
}
