//! Mortar skeleton of an active mesh.
//!
//! Every mortar conforms to the smaller of its adjacent faces: a coarse face
//! opposite two refined neighbours yields two mortars, each covering half of
//! the coarse face.

use crate::error::{HdgError, Result};
use crate::mesh::{face_vertices, BoundarySide, Mesh, Point};

/// One side of a mortar: an element face restricted to the face-parameter
/// interval from `t0` to `t1` (reversed when `t0 > t1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideRef {
    pub element: usize,
    pub face: usize,
    pub t0: f64,
    pub t1: f64,
}

#[derive(Debug, Clone)]
pub struct Mortar {
    pub left: SideRef,
    pub right: Option<SideRef>,
    pub boundary: Option<BoundarySide>,
    pub degree: usize,
    /// Outward unit normal of the left element.
    pub normal: Point,
    /// Start and end points; the mortar parameter s runs from `a` to `b`.
    pub a: Point,
    pub b: Point,
    pub length: f64,
}

impl Mortar {
    pub fn point(&self, s: f64) -> Point {
        self.a + (self.b - self.a) * s
    }

    pub fn midpoint(&self) -> Point {
        self.point(0.5)
    }

    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    pub fn side(&self, side: Side) -> Option<SideRef> {
        match side {
            Side::Left => Some(self.left),
            Side::Right => self.right,
        }
    }

    /// Outward normal seen from the given side.
    pub fn normal_for(&self, side: Side) -> Point {
        match side {
            Side::Left => self.normal,
            Side::Right => -self.normal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone)]
pub struct Skeleton {
    pub mortars: Vec<Mortar>,
    /// Mortars touching each element, with the side the element occupies.
    pub element_mortars: Vec<Vec<(usize, Side)>>,
}

impl Skeleton {
    /// Builds the skeleton of the active mesh. Mortars are ordered by
    /// (left element, local face, sub-interval).
    pub fn build(mesh: &Mesh) -> Result<Skeleton> {
        let map = mesh.active_edge_map();
        let elements = mesh.elements();
        let mut mortars: Vec<Mortar> = Vec::new();
        let other = |a: usize, b: usize, k: usize| -> Option<(usize, usize)> {
            map.get(&(a.min(b), a.max(b))).and_then(|v| v.iter().find(|&&(l, _)| l != k).copied())
        };
        let right_ref = |l: usize, g: usize, start: usize| -> SideRef {
            let (p, _) = face_vertices(&elements[l].vertices, g);
            if p == start {
                SideRef { element: l, face: g, t0: 0.0, t1: 1.0 }
            } else {
                SideRef { element: l, face: g, t0: 1.0, t1: 0.0 }
            }
        };
        for (k, e) in elements.iter().enumerate() {
            if !e.active {
                continue;
            }
            let pts = mesh.points(k);
            for f in 0..3 {
                let (a, b) = face_vertices(&e.vertices, f);
                let pa = pts[f];
                let pb = pts[(f + 1) % 3];
                let d = pb - pa;
                let normal = Point::new(d[1], -d[0]) / d.norm();
                let make = |t0: f64, t1: f64, right: Option<SideRef>, boundary: Option<BoundarySide>| {
                    let ma = pa + d * t0;
                    let mb = pa + d * t1;
                    let degree = match right {
                        Some(r) => e.degree.max(elements[r.element].degree),
                        None => e.degree,
                    };
                    Mortar {
                        left: SideRef { element: k, face: f, t0, t1 },
                        right,
                        boundary,
                        degree,
                        normal,
                        a: ma,
                        b: mb,
                        length: (mb - ma).norm(),
                    }
                };
                if let Some((l, g)) = other(a, b, k) {
                    if k < l {
                        mortars.push(make(0.0, 1.0, Some(right_ref(l, g, a)), None));
                    }
                    continue;
                }
                if let Some(side) = mesh.boundary_side(a, b) {
                    mortars.push(make(0.0, 1.0, None, Some(side)));
                    continue;
                }
                let Some(m) = mesh.find_vertex(mesh.midpoint_key(a, b)) else {
                    // fine side of a split face, owned by the coarse neighbour
                    continue;
                };
                match (other(a, m, k), other(m, b, k)) {
                    (Some((l1, g1)), Some((l2, g2))) => {
                        mortars.push(make(0.0, 0.5, Some(right_ref(l1, g1, a)), None));
                        mortars.push(make(0.5, 1.0, Some(right_ref(l2, g2, m)), None));
                    }
                    _ => {
                        return Err(HdgError::MeshIntegrity(format!(
                            "face {f} of element {k} carries more than one hanging node"
                        )))
                    }
                }
            }
        }
        let mut element_mortars = vec![Vec::new(); elements.len()];
        for (i, m) in mortars.iter().enumerate() {
            element_mortars[m.left.element].push((i, Side::Left));
            if let Some(r) = m.right {
                element_mortars[r.element].push((i, Side::Right));
            }
        }
        let skeleton = Skeleton { mortars, element_mortars };
        skeleton.check_coverage(mesh)?;
        Ok(skeleton)
    }

    fn check_coverage(&self, mesh: &Mesh) -> Result<()> {
        for k in mesh.active_elements() {
            let mut cover = [0.0f64; 3];
            for &(i, side) in &self.element_mortars[k] {
                let r = self.mortars[i].side(side).unwrap();
                cover[r.face] += (r.t1 - r.t0).abs();
            }
            for (f, c) in cover.iter().enumerate() {
                if (c - 1.0).abs() > 1e-12 {
                    return Err(HdgError::MeshIntegrity(format!(
                        "face {f} of element {k} is covered to {c} by mortars"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_interior(&self) -> usize {
        self.mortars.iter().filter(|m| !m.is_boundary()).count()
    }
}
