//! Triangular meshes of a rectangle with red refinement and a
//! 1-irregularity closure.
//!
//! Vertices carry integer keys on a dyadic lattice attached to the initial
//! tensor grid, so refinement midpoints and face matching are exact.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{Matrix2, Vector2};

use crate::error::{HdgError, Result};

pub type Point = Vector2<f64>;

/// Bits of sub-cell resolution in a vertex key.
pub const KEY_SHIFT: u32 = 32;
/// Deepest refinement level allowed below the initial grid.
pub const MAX_LEVEL: u32 = 30;

pub const DEFAULT_P_MIN: usize = 1;
pub const DEFAULT_P_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundarySide {
    Left,
    Right,
    Bottom,
    Top,
}

impl BoundarySide {
    pub const ALL: [BoundarySide; 4] =
        [BoundarySide::Left, BoundarySide::Right, BoundarySide::Bottom, BoundarySide::Top];

    pub fn name(self) -> &'static str {
        match self {
            BoundarySide::Left => "left",
            BoundarySide::Right => "right",
            BoundarySide::Bottom => "bottom",
            BoundarySide::Top => "top",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub key: [u64; 2],
    pub x: Point,
}

#[derive(Debug, Clone)]
pub struct Element {
    /// Vertex ids in counterclockwise order.
    pub vertices: [usize; 3],
    pub degree: usize,
    pub region: u32,
    pub active: bool,
    pub parent: Option<usize>,
    pub children: Option<[usize; 4]>,
    pub level: u32,
}

/// Affine map x = v0 + J (xi, eta) from the reference triangle.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub origin: Point,
    pub jac: Matrix2<f64>,
    pub inv: Matrix2<f64>,
    pub det: f64,
}

impl Affine {
    pub fn map(&self, xi: f64, eta: f64) -> Point {
        self.origin + self.jac * Vector2::new(xi, eta)
    }

    pub fn inverse(&self, x: &Point) -> (f64, f64) {
        let r = self.inv * (x - self.origin);
        (r[0], r[1])
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, dxi: f64, deta: f64) -> (f64, f64) {
        let g = self.inv.transpose() * Vector2::new(dxi, deta);
        (g[0], g[1])
    }
}

/// Summary of one refinement pass.
#[derive(Debug, Clone, Default)]
pub struct RefineOutcome {
    /// Every element split in this pass, requested or forced.
    pub refined: Vec<usize>,
    /// Elements split only to restore 1-irregularity.
    pub forced: Vec<usize>,
    pub children: BTreeMap<usize, [usize; 4]>,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    xs: Vec<f64>,
    ys: Vec<f64>,
    vertices: Vec<Vertex>,
    lookup: HashMap<[u64; 2], usize>,
    elements: Vec<Element>,
    p_min: usize,
    p_max: usize,
}

/// Face `f` of a triangle joins local vertices f and f + 1.
pub fn face_vertices(tri: &[usize; 3], f: usize) -> (usize, usize) {
    (tri[f], tri[(f + 1) % 3])
}

impl Mesh {
    /// Uniform nx-by-ny grid of the rectangle, each cell cut along its
    /// (1, 1) diagonal into two triangles.
    pub fn structured(
        domain: [f64; 4],
        nx: usize,
        ny: usize,
        degree: usize,
        region: impl Fn(&Point) -> u32,
    ) -> Result<Mesh> {
        let [x0, x1, y0, y1] = domain;
        if nx == 0 || ny == 0 {
            return Err(HdgError::Parameter("nx and ny must be positive".into()));
        }
        if !(x1 > x0 && y1 > y0) {
            return Err(HdgError::Parameter("domain must have positive extent".into()));
        }
        let xs = (0..=nx).map(|i| x0 + (x1 - x0) * i as f64 / nx as f64).collect();
        let ys = (0..=ny).map(|j| y0 + (y1 - y0) * j as f64 / ny as f64).collect();
        Mesh::tensor(xs, ys, degree, region)
    }

    /// Tensor grid with the given breakpoints.
    pub fn tensor(xs: Vec<f64>, ys: Vec<f64>, degree: usize, region: impl Fn(&Point) -> u32) -> Result<Mesh> {
        for (name, v) in [("x", &xs), ("y", &ys)] {
            if v.len() < 2 {
                return Err(HdgError::Parameter(format!("{name} breakpoints need at least two entries")));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(HdgError::Parameter(format!("{name} breakpoints must increase strictly")));
            }
        }
        if !(DEFAULT_P_MIN..=DEFAULT_P_MAX).contains(&degree) {
            return Err(HdgError::Parameter(format!(
                "initial degree {degree} outside [{DEFAULT_P_MIN}, {DEFAULT_P_MAX}]"
            )));
        }
        let nx = xs.len() - 1;
        let ny = ys.len() - 1;
        let mut mesh = Mesh {
            xs,
            ys,
            vertices: Vec::new(),
            lookup: HashMap::new(),
            elements: Vec::new(),
            p_min: DEFAULT_P_MIN,
            p_max: DEFAULT_P_MAX,
        };
        let s = 1u64 << KEY_SHIFT;
        for j in 0..ny {
            for i in 0..nx {
                let (i, j) = (i as u64, j as u64);
                let v00 = mesh.vertex_at([i * s, j * s]);
                let v10 = mesh.vertex_at([(i + 1) * s, j * s]);
                let v11 = mesh.vertex_at([(i + 1) * s, (j + 1) * s]);
                let v01 = mesh.vertex_at([i * s, (j + 1) * s]);
                for tri in [[v00, v10, v11], [v00, v11, v01]] {
                    mesh.push_element(tri, degree, 0, None, 0);
                }
            }
        }
        for k in 0..mesh.elements.len() {
            let c = mesh.centroid(k);
            mesh.elements[k].region = region(&c);
        }
        Ok(mesh)
    }

    pub fn set_degree_bounds(&mut self, p_min: usize, p_max: usize) -> Result<()> {
        if p_min < 1 || p_min > p_max {
            return Err(HdgError::Parameter(format!("invalid degree bounds [{p_min}, {p_max}]")));
        }
        self.p_min = p_min;
        self.p_max = p_max;
        for e in &mut self.elements {
            e.degree = e.degree.clamp(p_min, p_max);
        }
        Ok(())
    }

    pub fn p_min(&self) -> usize {
        self.p_min
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn domain(&self) -> [f64; 4] {
        [self.xs[0], *self.xs.last().unwrap(), self.ys[0], *self.ys.last().unwrap()]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &Element {
        &self.elements[k]
    }

    pub fn active_elements(&self) -> Vec<usize> {
        (0..self.elements.len()).filter(|&k| self.elements[k].active).collect()
    }

    pub fn n_active(&self) -> usize {
        self.elements.iter().filter(|e| e.active).count()
    }

    pub fn set_degree(&mut self, k: usize, p: usize) {
        self.elements[k].degree = p.clamp(self.p_min, self.p_max);
    }

    fn key_to_coord(breaks: &[f64], key: u64) -> f64 {
        let cell = (key >> KEY_SHIFT) as usize;
        let frac = (key & ((1u64 << KEY_SHIFT) - 1)) as f64 / (1u64 << KEY_SHIFT) as f64;
        if cell + 1 >= breaks.len() {
            return breaks[breaks.len() - 1];
        }
        breaks[cell] + frac * (breaks[cell + 1] - breaks[cell])
    }

    fn vertex_at(&mut self, key: [u64; 2]) -> usize {
        if let Some(&v) = self.lookup.get(&key) {
            return v;
        }
        let x = Point::new(Self::key_to_coord(&self.xs, key[0]), Self::key_to_coord(&self.ys, key[1]));
        let id = self.vertices.len();
        self.vertices.push(Vertex { key, x });
        self.lookup.insert(key, id);
        id
    }

    fn push_element(&mut self, vertices: [usize; 3], degree: usize, region: u32, parent: Option<usize>, level: u32) -> usize {
        self.elements.push(Element { vertices, degree, region, active: true, parent, children: None, level });
        self.elements.len() - 1
    }

    pub fn points(&self, k: usize) -> [Point; 3] {
        let v = self.elements[k].vertices;
        [self.vertices[v[0]].x, self.vertices[v[1]].x, self.vertices[v[2]].x]
    }

    pub fn affine(&self, k: usize) -> Affine {
        let [a, b, c] = self.points(k);
        let jac = Matrix2::new(b[0] - a[0], c[0] - a[0], b[1] - a[1], c[1] - a[1]);
        let det = jac.determinant();
        let inv = jac.try_inverse().expect("non-degenerate element");
        Affine { origin: a, jac, inv, det }
    }

    pub fn area(&self, k: usize) -> f64 {
        0.5 * self.affine(k).det
    }

    /// Element diameter, the longest edge.
    pub fn diameter(&self, k: usize) -> f64 {
        let p = self.points(k);
        (0..3).map(|f| (p[(f + 1) % 3] - p[f]).norm()).fold(0.0, f64::max)
    }

    pub fn centroid(&self, k: usize) -> Point {
        let p = self.points(k);
        (p[0] + p[1] + p[2]) / 3.0
    }

    pub fn face_length(&self, k: usize, f: usize) -> f64 {
        let p = self.points(k);
        (p[(f + 1) % 3] - p[f]).norm()
    }

    pub fn min_diameter(&self) -> f64 {
        self.active_elements().iter().map(|&k| self.diameter(k)).fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn find_vertex(&self, key: [u64; 2]) -> Option<usize> {
        self.lookup.get(&key).copied()
    }

    pub(crate) fn midpoint_key(&self, a: usize, b: usize) -> [u64; 2] {
        let ka = self.vertices[a].key;
        let kb = self.vertices[b].key;
        [(ka[0] + kb[0]) / 2, (ka[1] + kb[1]) / 2]
    }

    /// Side of the rectangle an edge lies on, if any.
    pub fn boundary_side(&self, a: usize, b: usize) -> Option<BoundarySide> {
        let ka = self.vertices[a].key;
        let kb = self.vertices[b].key;
        let xmax = ((self.xs.len() - 1) as u64) << KEY_SHIFT;
        let ymax = ((self.ys.len() - 1) as u64) << KEY_SHIFT;
        if ka[0] == 0 && kb[0] == 0 {
            Some(BoundarySide::Left)
        } else if ka[0] == xmax && kb[0] == xmax {
            Some(BoundarySide::Right)
        } else if ka[1] == 0 && kb[1] == 0 {
            Some(BoundarySide::Bottom)
        } else if ka[1] == ymax && kb[1] == ymax {
            Some(BoundarySide::Top)
        } else {
            None
        }
    }

    /// Map from an undirected vertex pair to the active (element, face)
    /// pairs that own it as a full face.
    pub(crate) fn active_edge_map(&self) -> HashMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (k, e) in self.elements.iter().enumerate() {
            if !e.active {
                continue;
            }
            for f in 0..3 {
                let (a, b) = face_vertices(&e.vertices, f);
                map.entry((a.min(b), a.max(b))).or_default().push((k, f));
            }
        }
        map
    }

    /// Active elements with a face that carries more than one hanging node.
    pub fn irregular_elements(&self) -> Vec<usize> {
        let map = self.active_edge_map();
        let other = |a: usize, b: usize, k: usize| {
            map.get(&(a.min(b), a.max(b))).is_some_and(|v| v.iter().any(|&(l, _)| l != k))
        };
        let mut out = Vec::new();
        for (k, e) in self.elements.iter().enumerate() {
            if !e.active {
                continue;
            }
            let bad = (0..3).any(|f| {
                let (a, b) = face_vertices(&e.vertices, f);
                if other(a, b, k) || self.boundary_side(a, b).is_some() {
                    return false;
                }
                match self.find_vertex(self.midpoint_key(a, b)) {
                    None => false,
                    Some(m) => !(other(a, m, k) && other(m, b, k)),
                }
            });
            if bad {
                out.push(k);
            }
        }
        out
    }

    fn split(&mut self, k: usize) -> Result<[usize; 4]> {
        let e = self.elements[k].clone();
        if !e.active {
            return Err(HdgError::MeshIntegrity(format!("element {k} is not active")));
        }
        if e.level >= MAX_LEVEL {
            return Err(HdgError::Unsupported(format!("refinement deeper than {MAX_LEVEL} levels")));
        }
        let [v0, v1, v2] = e.vertices;
        let m01 = self.vertex_at(self.midpoint_key(v0, v1));
        let m12 = self.vertex_at(self.midpoint_key(v1, v2));
        let m20 = self.vertex_at(self.midpoint_key(v2, v0));
        let tris = [[v0, m01, m20], [m01, v1, m12], [m20, m12, v2], [m12, m20, m01]];
        let mut kids = [0; 4];
        for (c, tri) in tris.iter().enumerate() {
            kids[c] = self.push_element(*tri, e.degree, e.region, Some(k), e.level + 1);
        }
        self.elements[k].active = false;
        self.elements[k].children = Some(kids);
        Ok(kids)
    }

    /// Red-refines the marked active elements, then splits further elements
    /// until every face carries at most one hanging node. Children inherit
    /// the parent degree and region.
    pub fn refine(&mut self, marked: &[usize]) -> Result<RefineOutcome> {
        let mut out = RefineOutcome::default();
        let mut queue: Vec<usize> = marked.to_vec();
        queue.sort_unstable();
        queue.dedup();
        for &k in &queue {
            if k >= self.elements.len() || !self.elements[k].active {
                return Err(HdgError::Parameter(format!("element {k} cannot be refined")));
            }
        }
        for k in queue {
            let kids = self.split(k)?;
            out.refined.push(k);
            out.children.insert(k, kids);
        }
        loop {
            let bad = self.irregular_elements();
            if bad.is_empty() {
                break;
            }
            for k in bad {
                let kids = self.split(k)?;
                out.refined.push(k);
                out.forced.push(k);
                out.children.insert(k, kids);
            }
        }
        Ok(out)
    }

    pub fn refine_uniform(&mut self) -> Result<RefineOutcome> {
        let all = self.active_elements();
        self.refine(&all)
    }
}
