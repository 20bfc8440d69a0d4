//! Degree-of-freedom layout and constraints.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom::{self, Point};
use crate::mesh::{edge_key, EdgeTable, Tag, TriMesh};

/// P2 node numbering: vertices first, then one node per edge.
#[derive(Debug)]
pub struct P2Layout {
    pub table: EdgeTable,
    pub num_vertices: usize,
}

impl P2Layout {
    pub fn new(mesh: &TriMesh) -> Self {
        Self {
            table: mesh.edges(),
            num_vertices: mesh.num_vertices(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_vertices + self.table.edges.len()
    }

    /// The six P2 nodes of triangle `t` in local order.
    pub fn element_nodes(&self, mesh: &TriMesh, t: usize) -> [usize; 6] {
        let [a, b, c] = mesh.triangles[t];
        let e = self.table.tri_edges[t];
        let n = self.num_vertices;
        [a, b, c, n + e[0], n + e[1], n + e[2]]
    }

    pub fn node_point(&self, mesh: &TriMesh, node: usize) -> Point {
        if node < self.num_vertices {
            mesh.vertices[node]
        } else {
            let [a, b] = self.table.edges[node - self.num_vertices];
            geom::midpoint(mesh.vertices[a], mesh.vertices[b])
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    VectorP2,
    ScalarP1,
}

/// A finite element space on a mesh together with its essential constraints.
///
/// Velocity DOFs are numbered `2 * node + component`.
#[derive(Clone, Debug)]
pub struct FunctionSpace {
    pub mesh: Arc<TriMesh>,
    pub layout: Arc<P2Layout>,
    pub kind: SpaceKind,
    /// Prescribed values keyed by raw DOF index.
    pub dirichlet: BTreeMap<usize, f64>,
    /// Whether the mesh's periodic pairs identify DOFs.
    pub periodic: bool,
}

impl FunctionSpace {
    pub fn vector_p2(mesh: Arc<TriMesh>, layout: Arc<P2Layout>) -> Self {
        Self {
            periodic: !mesh.periodic_pairs.is_empty(),
            mesh,
            layout,
            kind: SpaceKind::VectorP2,
            dirichlet: BTreeMap::new(),
        }
    }

    pub fn scalar_p1(mesh: Arc<TriMesh>, layout: Arc<P2Layout>) -> Self {
        Self {
            periodic: !mesh.periodic_pairs.is_empty(),
            mesh,
            layout,
            kind: SpaceKind::ScalarP1,
            dirichlet: BTreeMap::new(),
        }
    }

    pub fn num_dofs(&self) -> usize {
        match self.kind {
            SpaceKind::VectorP2 => 2 * self.layout.num_nodes(),
            SpaceKind::ScalarP1 => self.layout.num_vertices,
        }
    }

    /// Nodes carried by the edges with `tag` (vertices and edge midpoints).
    pub fn boundary_nodes(&self, tag: Tag) -> Vec<usize> {
        let mut nodes = Vec::new();
        for (&(a, b), &t) in &self.mesh.boundary {
            if t != tag {
                continue;
            }
            nodes.extend([a, b]);
            if self.kind == SpaceKind::VectorP2 {
                nodes.push(self.layout.num_vertices + self.layout.table.index[&(a, b)]);
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Interpolate `g` at every DOF location on edges tagged `tag`, for the
    /// selected components.
    pub fn apply_dirichlet(
        &self,
        tag: Tag,
        components: [bool; 2],
        g: impl Fn(Point) -> [f64; 2],
    ) -> Result<Self> {
        if !self.mesh.has_tag(tag) {
            return Err(Error::invalid(format!("mesh has no boundary edges tagged {tag:?}")));
        }
        let mut out = self.clone();
        for node in self.boundary_nodes(tag) {
            let x = self.layout.node_point(&self.mesh, node);
            let v = g(x);
            match self.kind {
                SpaceKind::VectorP2 => {
                    for c in 0..2 {
                        if components[c] {
                            out.dirichlet.insert(2 * node + c, v[c]);
                        }
                    }
                }
                SpaceKind::ScalarP1 => {
                    out.dirichlet.insert(node, v[0]);
                }
            }
        }
        Ok(out)
    }

    /// Representative node of each node's periodic class.
    pub fn node_classes(&self) -> Vec<usize> {
        let n = match self.kind {
            SpaceKind::VectorP2 => self.layout.num_nodes(),
            SpaceKind::ScalarP1 => self.layout.num_vertices,
        };
        let mut uf = UnionFind::new(n);
        if self.periodic {
            for (a, b) in periodic_node_pairs(&self.mesh, &self.layout, self.kind) {
                uf.union(a, b);
            }
        }
        (0..n).map(|i| uf.find(i)).collect()
    }
}

/// Node pairs identified by periodicity: the mesh's vertex pairs plus, for
/// P2, the midpoints of paired edges.
pub fn periodic_node_pairs(mesh: &TriMesh, layout: &P2Layout, kind: SpaceKind) -> Vec<(usize, usize)> {
    let mut pairs = mesh.periodic_pairs.clone();
    if kind == SpaceKind::VectorP2 && !pairs.is_empty() {
        let partner: std::collections::HashMap<usize, usize> = pairs.iter().copied().collect();
        let mut extra = Vec::new();
        for &(a, b) in mesh.boundary.keys() {
            if let (Some(&pa), Some(&pb)) = (partner.get(&a), partner.get(&b)) {
                if let Some(&f) = layout.table.index.get(&edge_key(pa, pb)) {
                    let e = layout.table.index[&(a, b)];
                    extra.push((layout.num_vertices + e, layout.num_vertices + f));
                }
            }
        }
        pairs.extend(extra);
    }
    pairs
}

/// Disjoint-set forest with path halving; the root is the smallest index.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::mesh::{generate_rect, pair_periodic, Axis};

    fn space(periodic: bool) -> FunctionSpace {
        let mut m = generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.25).unwrap();
        if periodic {
            m = pair_periodic(&m, Axis::Y).unwrap();
        }
        let layout = Arc::new(P2Layout::new(&m));
        FunctionSpace::vector_p2(Arc::new(m), layout)
    }

    #[test]
    fn dof_counts() {
        let s = space(false);
        let nv = s.mesh.num_vertices();
        let ne = s.layout.table.edges.len();
        assert_eq!(s.num_dofs(), 2 * (nv + ne));
        let p = FunctionSpace::scalar_p1(s.mesh.clone(), s.layout.clone());
        assert_eq!(p.num_dofs(), nv);
    }

    #[test]
    fn constant_dirichlet_sets_x_dofs() {
        let s = space(false).apply_dirichlet(Tag::GammaL, [true, false], |_| [1.0, 7.0]).unwrap();
        // 5 vertices + 4 midpoints on the left side
        assert_eq!(s.dirichlet.len(), 9);
        assert!(s.dirichlet.iter().all(|(&d, &v)| d % 2 == 0 && v == 1.0));
        let z = space(false)
            .apply_dirichlet(Tag::GammaL, [true, true], |_| [0.0, 0.0])
            .unwrap()
            .apply_dirichlet(Tag::GammaR, [true, true], |_| [0.0, 0.0])
            .unwrap();
        assert_eq!(z.dirichlet.len(), 36);
        assert!(z.dirichlet.values().all(|&v| v == 0.0));
    }

    #[test]
    fn missing_tag_rejected() {
        let s = space(false);
        assert!(s.apply_dirichlet(Tag::Other, [true, true], |_| [0.0; 2]).is_err());
    }

    #[test]
    fn periodic_classes_merge_top_and_bottom() {
        let s = space(true);
        let cls = s.node_classes();
        let distinct: std::collections::BTreeSet<_> = cls.iter().collect();
        // 5 top vertices and 4 top midpoints fold onto the bottom
        assert_eq!(distinct.len(), s.layout.num_nodes() - 9);
    }
}
