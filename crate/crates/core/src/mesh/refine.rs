use std::collections::HashMap;

use super::periodic::Axis;
use super::{edge_key, Tag, TriMesh};
use crate::geom;

/// Newest-vertex bisection refinement.
///
/// Each marked triangle has all three edges bisected (four children). The
/// closure marks the refinement edge of any triangle with a marked edge, and
/// mirrors marks across periodic sides so that paired boundaries remain
/// translates of each other.
pub fn refine(mesh: &TriMesh, marked: &[usize]) -> TriMesh {
    if marked.is_empty() {
        return mesh.clone();
    }
    let table = mesh.edges();
    let ne = table.edges.len();
    let mut edge_marked = vec![false; ne];
    for &t in marked {
        for &e in &table.tri_edges[t] {
            edge_marked[e] = true;
        }
    }

    let partner_edge = periodic_edge_partners(mesh, &table.index);

    loop {
        let mut changed = false;
        for te in &table.tri_edges {
            if !edge_marked[te[0]] && (edge_marked[te[1]] || edge_marked[te[2]]) {
                edge_marked[te[0]] = true;
                changed = true;
            }
        }
        for (&e, &f) in &partner_edge {
            if edge_marked[e] && !edge_marked[f] {
                edge_marked[f] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut vertices = mesh.vertices.clone();
    let mut mid = vec![usize::MAX; ne];
    for e in 0..ne {
        if edge_marked[e] {
            let [a, b] = table.edges[e];
            mid[e] = vertices.len();
            vertices.push(geom::midpoint(mesh.vertices[a], mesh.vertices[b]));
        }
    }

    let mut periodic_pairs = mesh.periodic_pairs.clone();
    if let Some(shift) = mesh.periodic_shift {
        let (ptag, _) = sides(Axis::from_shift(shift));
        for (&e, &f) in &partner_edge {
            if !edge_marked[e] {
                continue;
            }
            let [a, b] = table.edges[e];
            if mesh.boundary.get(&(a, b)) == Some(&ptag) {
                vertices[mid[f]] = geom::add(vertices[mid[e]], shift);
                periodic_pairs.push((mid[e], mid[f]));
            }
        }
    }

    let mut triangles = Vec::with_capacity(mesh.triangles.len() * 2);
    let mut generation = Vec::with_capacity(mesh.triangles.len() * 2);
    for (t, &[v0, v1, v2]) in mesh.triangles.iter().enumerate() {
        let te = table.tri_edges[t];
        let g = mesh.generation[t];
        if !edge_marked[te[0]] {
            triangles.push([v0, v1, v2]);
            generation.push(g);
            continue;
        }
        let m = mid[te[0]];
        if edge_marked[te[2]] {
            let q = mid[te[2]];
            triangles.push([q, m, v0]);
            triangles.push([q, v1, m]);
            generation.extend([g + 2, g + 2]);
        } else {
            triangles.push([m, v0, v1]);
            generation.push(g + 1);
        }
        if edge_marked[te[1]] {
            let r = mid[te[1]];
            triangles.push([r, m, v2]);
            triangles.push([r, v0, m]);
            generation.extend([g + 2, g + 2]);
        } else {
            triangles.push([m, v2, v0]);
            generation.push(g + 1);
        }
    }

    let mut boundary = mesh.boundary.clone();
    for (&(a, b), &tag) in &mesh.boundary {
        let e = table.index[&(a, b)];
        if edge_marked[e] {
            boundary.remove(&(a, b));
            boundary.insert(edge_key(a, mid[e]), tag);
            boundary.insert(edge_key(mid[e], b), tag);
        }
    }

    TriMesh {
        vertices,
        triangles,
        boundary,
        periodic_pairs,
        periodic_shift: mesh.periodic_shift,
        generation,
    }
}

fn sides(axis: Axis) -> (Tag, Tag) {
    match axis {
        Axis::Y => (Tag::Bottom, Tag::Top),
        Axis::X => (Tag::GammaL, Tag::GammaR),
    }
}

/// Map each periodic boundary edge to the edge it is identified with.
fn periodic_edge_partners(
    mesh: &TriMesh,
    index: &HashMap<(usize, usize), usize>,
) -> HashMap<usize, usize> {
    let mut out = HashMap::new();
    let Some(shift) = mesh.periodic_shift else {
        return out;
    };
    let (ptag, _) = sides(Axis::from_shift(shift));
    let partner: HashMap<usize, usize> = mesh.periodic_pairs.iter().copied().collect();
    for (&(a, b), &tag) in &mesh.boundary {
        if tag != ptag {
            continue;
        }
        let (Some(&sa), Some(&sb)) = (partner.get(&a), partner.get(&b)) else {
            continue;
        };
        if let Some(&f) = index.get(&edge_key(sa, sb)) {
            let e = index[&(a, b)];
            out.insert(e, f);
            out.insert(f, e);
        }
    }
    out
}
