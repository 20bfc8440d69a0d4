//! Conforming triangle meshes with boundary tags and periodic pairing.

mod generate;
mod locate;
mod periodic;
mod refine;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point};

pub use generate::{generate_parallelogram, generate_rect, generate_rect_with_breaks};
pub use locate::Locator;
pub use periodic::{pair_lateral, pair_periodic, Axis};
pub use refine::refine;

/// Tolerance (cell units) for classifying boundary points.
pub const TAG_TOL: f64 = 1e-9;

/// Boundary edge classification.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    GammaL,
    GammaR,
    Top,
    Bottom,
    Other,
}

/// Boundary condition on the sides of the morphing region not shared with the cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LateralBc {
    #[default]
    Periodic,
    Neumann,
}

/// Geometry of the morphing region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphSpec {
    pub x_e: f64,
    pub s: f64,
    pub delta: f64,
    pub y_l: f64,
    pub y_u: f64,
    pub theta: f64,
    pub lateral_bc: LateralBc,
}

impl Default for MorphSpec {
    fn default() -> Self {
        Self {
            x_e: 0.0,
            s: 0.0,
            delta: 0.5,
            y_l: 0.0,
            y_u: 1.0,
            theta: std::f64::consts::FRAC_PI_2,
            lateral_bc: LateralBc::Periodic,
        }
    }
}

impl MorphSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_e, self.s, self.delta, self.y_l, self.y_u, self.theta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("MorphSpec: all fields must be finite"));
        }
        if self.delta <= 0.0 {
            return Err(Error::invalid(format!(
                "MorphSpec: delta must be > 0 (got {})",
                self.delta
            )));
        }
        if self.y_u <= self.y_l {
            return Err(Error::invalid(format!(
                "MorphSpec: y_u must exceed y_l (got y_l = {}, y_u = {})",
                self.y_l, self.y_u
            )));
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return Err(Error::invalid(format!(
                "MorphSpec: theta must lie in (0, pi) (got {})",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn is_cartesian(&self) -> bool {
        (self.theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12
    }

    /// Horizontal offset of the inclined sides per unit height.
    pub fn cot_theta(&self) -> f64 {
        if self.is_cartesian() {
            0.0
        } else {
            1.0 / self.theta.tan()
        }
    }

    pub fn height(&self) -> f64 {
        self.y_u - self.y_l
    }

    /// Abscissae of the lower ends of the two sides.
    pub fn x_left(&self) -> f64 {
        self.x_e + self.s - 0.5 * self.delta
    }

    pub fn x_right(&self) -> f64 {
        self.x_e + self.s + 0.5 * self.delta
    }

    /// Area of the region (parallelogram base times height).
    pub fn area(&self) -> f64 {
        self.delta * self.height()
    }

    /// The interface line E, oriented upward along the sides.
    pub fn interface(&self) -> geom::Line {
        geom::Line {
            origin: [self.x_e, self.y_l],
            dir: [self.theta.cos(), self.theta.sin()],
        }
    }

    pub fn gamma_l(&self) -> geom::Segment {
        let c = self.cot_theta() * self.height();
        geom::Segment::new([self.x_left(), self.y_l], [self.x_left() + c, self.y_u])
    }

    pub fn gamma_r(&self) -> geom::Segment {
        let c = self.cot_theta() * self.height();
        geom::Segment::new([self.x_right(), self.y_l], [self.x_right() + c, self.y_u])
    }

    /// Whether `p` lies in the closed region.
    pub fn contains(&self, p: Point, tol: f64) -> bool {
        if p[1] < self.y_l - tol || p[1] > self.y_u + tol {
            return false;
        }
        let shift = self.cot_theta() * (p[1] - self.y_l);
        p[0] >= self.x_left() + shift - tol && p[0] <= self.x_right() + shift + tol
    }
}

/// Conforming triangulation. Triangles are counter-clockwise, with the newest
/// vertex first so that `(v1, v2)` is the refinement edge.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary edges keyed by sorted vertex pair.
    pub boundary: BTreeMap<(usize, usize), Tag>,
    /// `(primary, secondary)` vertex pairs; the secondary is the primary
    /// translated by `periodic_shift`.
    pub periodic_pairs: Vec<(usize, usize)>,
    pub periodic_shift: Option<Point>,
    pub generation: Vec<u32>,
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Edge numbering shared by P2 spaces and refinement.
#[derive(Clone, Debug)]
pub struct EdgeTable {
    pub edges: Vec<[usize; 2]>,
    /// Per triangle, the edge opposite each local vertex.
    pub tri_edges: Vec<[usize; 3]>,
    pub index: HashMap<(usize, usize), usize>,
    /// Triangles incident to each edge (second is `usize::MAX` on the boundary).
    pub neighbors: Vec<[usize; 2]>,
}

impl TriMesh {
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * geom::orient(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Longest edge length of triangle `t`.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        geom::norm(geom::sub(a, b))
            .max(geom::norm(geom::sub(b, c)))
            .max(geom::norm(geom::sub(c, a)))
    }

    pub fn edges(&self) -> EdgeTable {
        let mut index = HashMap::with_capacity(self.triangles.len() * 2);
        let mut edges = Vec::with_capacity(self.triangles.len() * 2);
        let mut neighbors: Vec<[usize; 2]> = Vec::with_capacity(self.triangles.len() * 2);
        let mut tri_edges = Vec::with_capacity(self.triangles.len());
        for (t, tri) in self.triangles.iter().enumerate() {
            let mut te = [0; 3];
            for k in 0..3 {
                let key = edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    neighbors.push([usize::MAX, usize::MAX]);
                    edges.len() - 1
                });
                let slot = &mut neighbors[id];
                if slot[0] == usize::MAX {
                    slot[0] = t;
                } else {
                    slot[1] = t;
                }
                te[k] = id;
            }
            tri_edges.push(te);
        }
        EdgeTable {
            edges,
            tri_edges,
            index,
            neighbors,
        }
    }

    /// Vertices lying on edges with the given tag, sorted by index.
    pub fn tagged_vertices(&self, tag: Tag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary
            .iter()
            .filter(|(_, &t)| t == tag)
            .flat_map(|(&(a, b), _)| [a, b])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn has_tag(&self, tag: Tag) -> bool {
        self.boundary.values().any(|&t| t == tag)
    }

    /// Edge lengths, one per distinct edge.
    pub fn edge_lengths(&self) -> Vec<f64> {
        self.edges()
            .edges
            .iter()
            .map(|&[a, b]| geom::norm(geom::sub(self.vertices[a], self.vertices[b])))
            .collect()
    }

    /// Check every structural invariant, returning a description of the
    /// first violation.
    pub fn check(&self) -> std::result::Result<(), String> {
        if self.generation.len() != self.triangles.len() {
            return Err("generation length differs from triangle count".into());
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= self.vertices.len()) {
                return Err(format!("triangle {t} references a missing vertex"));
            }
            if self.area(t) <= 0.0 {
                return Err(format!("triangle {t} has non-positive area {}", self.area(t)));
            }
        }
        let table = self.edges();
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(format!("vertex {v} is not used by any triangle"));
        }
        for (e, nb) in table.neighbors.iter().enumerate() {
            let key = (table.edges[e][0], table.edges[e][1]);
            let on_boundary = nb[1] == usize::MAX;
            if on_boundary != self.boundary.contains_key(&key) {
                return Err(format!(
                    "edge {key:?}: boundary flag disagrees with incidence (hanging vertex or missing tag)"
                ));
            }
        }
        if self.boundary.len() != table.neighbors.iter().filter(|n| n[1] == usize::MAX).count() {
            return Err("boundary map lists edges that are not in the mesh".into());
        }
        // a hanging vertex shows up as a vertex lying in the interior of an edge
        let locator = Locator::new(self);
        for (e, &[a, b]) in table.edges.iter().enumerate() {
            if table.neighbors[e][1] != usize::MAX {
                continue;
            }
            let m = geom::midpoint(self.vertices[a], self.vertices[b]);
            if locator.locate(self, m).is_none() {
                return Err(format!("boundary edge ({a}, {b}) midpoint is not covered"));
            }
        }
        if let Some(shift) = self.periodic_shift {
            for &(p, s) in &self.periodic_pairs {
                let d = geom::sub(self.vertices[s], geom::add(self.vertices[p], shift));
                if geom::norm(d) > 1e-12 {
                    return Err(format!("periodic pair ({p}, {s}) is off by {d:?}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    #[test]
    fn morph_spec_validation() {
        let ok = MorphSpec::default();
        assert!(ok.validate().is_ok());
        assert!(MorphSpec { delta: 0.0, ..ok }.validate().is_err());
        assert!(MorphSpec { y_u: -1.0, ..ok }.validate().is_err());
        assert!(MorphSpec { theta: 0.0, ..ok }.validate().is_err());
        assert!(MorphSpec { theta: 3.2, ..ok }.validate().is_err());
        assert!(ok.is_cartesian());
        assert_eq!(ok.cot_theta(), 0.0);
    }

    #[test]
    fn edge_table_counts() {
        let m = generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.25).unwrap();
        let t = m.edges();
        // Euler: V - E + F = 1 for a disc
        assert_eq!(m.num_vertices() + m.num_triangles(), t.edges.len() + 1);
        m.check().unwrap();
    }
}
