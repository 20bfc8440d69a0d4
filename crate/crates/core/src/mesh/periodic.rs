use serde::{Deserialize, Serialize};

use super::{LateralBc, MorphSpec, Tag, TriMesh};
use crate::error::{Error, Result};
use crate::geom::{self, Point};

const MATCH_TOL: f64 = 1e-10;

/// Direction of periodicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Bottom (primary) identified with Top (secondary).
    Y,
    /// GammaL (primary) identified with GammaR (secondary).
    X,
}

impl Axis {
    fn sides(self) -> (Tag, Tag) {
        match self {
            Axis::Y => (Tag::Bottom, Tag::Top),
            Axis::X => (Tag::GammaL, Tag::GammaR),
        }
    }

    pub(crate) fn from_shift(shift: Point) -> Self {
        if shift[1].abs() > shift[0].abs() {
            Axis::Y
        } else {
            Axis::X
        }
    }
}

/// Identify vertices on opposite sides of the mesh.
pub fn pair_periodic(mesh: &TriMesh, axis: Axis) -> Result<TriMesh> {
    let (ptag, stag) = axis.sides();
    let along = |p: Point| match axis {
        Axis::Y => p[0],
        Axis::X => p[1],
    };
    let sort_side = |tag| {
        let mut v = mesh.tagged_vertices(tag);
        v.sort_by(|&a, &b| along(mesh.vertices[a]).total_cmp(&along(mesh.vertices[b])));
        v
    };
    let prim = sort_side(ptag);
    let sec = sort_side(stag);
    let (Some(&p0), Some(&s0)) = (prim.first(), sec.first()) else {
        return Err(Error::invalid(format!(
            "periodic pairing needs both {ptag:?} and {stag:?} boundaries"
        )));
    };
    let shift = geom::sub(mesh.vertices[s0], mesh.vertices[p0]);
    let fail = |v: usize, reason: String| Error::Pairing {
        vertex: v,
        x: mesh.vertices[v][0],
        y: mesh.vertices[v][1],
        reason,
    };
    let mut pairs = Vec::with_capacity(sec.len());
    let mut j = 0;
    for &s in &sec {
        let target = geom::sub(mesh.vertices[s], shift);
        while j < prim.len() && along(mesh.vertices[prim[j]]) < along(target) - MATCH_TOL {
            j += 1;
        }
        match prim.get(j) {
            Some(&p) if geom::norm(geom::sub(mesh.vertices[p], target)) <= MATCH_TOL => {
                pairs.push((p, s));
                j += 1;
            }
            _ => {
                return Err(fail(s, format!("no {ptag:?} partner for this {stag:?} vertex")));
            }
        }
    }
    if pairs.len() != prim.len() {
        let unmatched = prim
            .iter()
            .copied()
            .find(|p| !pairs.iter().any(|&(q, _)| q == *p))
            .unwrap_or(prim[0]);
        return Err(fail(unmatched, format!("no {stag:?} partner for this {ptag:?} vertex")));
    }
    let mut out = mesh.clone();
    // snap secondaries onto exact translates so the invariant holds to round-off
    for &(p, s) in &pairs {
        out.vertices[s] = geom::add(mesh.vertices[p], shift);
    }
    out.periodic_pairs = pairs;
    out.periodic_shift = Some(shift);
    Ok(out)
}

/// Apply the lateral condition of the morphing region: Top/Bottom pairing
/// when periodic, nothing for Neumann.
pub fn pair_lateral(mesh: &TriMesh, spec: &MorphSpec) -> Result<TriMesh> {
    match spec.lateral_bc {
        LateralBc::Periodic => pair_periodic(mesh, Axis::Y),
        LateralBc::Neumann => {
            let mut out = mesh.clone();
            out.periodic_pairs.clear();
            out.periodic_shift = None;
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::mesh::{generate_parallelogram, generate_rect, refine};
    use std::f64::consts::PI;

    #[test]
    fn structured_pairs_every_top_vertex() {
        let m = generate_rect(Rect::new(-0.25, 0.25, 0.0, 1.0), 0.05).unwrap();
        let p = pair_periodic(&m, Axis::Y).unwrap();
        assert_eq!(p.periodic_pairs.len(), m.tagged_vertices(Tag::Top).len());
        assert_eq!(p.periodic_shift, Some([0.0, 1.0]));
        p.check().unwrap();
        let x = pair_periodic(&m, Axis::X).unwrap();
        assert_eq!(x.periodic_pairs.len(), m.tagged_vertices(Tag::GammaR).len());
    }

    #[test]
    fn one_sided_refinement_breaks_pairing() {
        let m = generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.25).unwrap();
        // a triangle touching the top edge only
        let t = (0..m.num_triangles())
            .find(|&t| m.triangles[t].iter().filter(|&&v| m.vertices[v][1] == 1.0).count() == 2)
            .unwrap();
        let r = refine(&m, &[t]);
        match pair_periodic(&r, Axis::Y) {
            Err(Error::Pairing { y, .. }) => assert!((y - 1.0).abs() < 1e-12 || y.abs() < 1e-12),
            other => panic!("expected pairing failure, got {other:?}"),
        }
    }

    #[test]
    fn inclined_pairs_and_neumann() {
        let spec = MorphSpec { delta: 0.4, theta: PI / 4.0, ..MorphSpec::default() };
        let m = generate_parallelogram(&spec, 0.1).unwrap();
        let p = pair_lateral(&m, &spec).unwrap();
        assert_eq!(p.periodic_pairs.len(), 5);
        p.check().unwrap();
        let neu = MorphSpec { lateral_bc: LateralBc::Neumann, ..spec };
        let q = pair_lateral(&m, &neu).unwrap();
        assert!(q.periodic_pairs.is_empty());
    }
}
