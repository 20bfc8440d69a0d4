use std::fmt::Write;

use crate::fem::FlowSolution;
use crate::material::DensityField;
use crate::mesh::TriMesh;

fn grid(mesh: &TriMesh, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for p in &mesh.vertices {
        let _ = writeln!(s, "{:.17e} {:.17e} 0", p[0], p[1]);
    }
    let nt = mesh.num_triangles();
    let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("5\n");
    }
    s
}

fn scalars(s: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v:.17e}");
    }
}

/// Density as point data named `rho`.
pub fn density_vtk(field: &DensityField, title: &str) -> String {
    let mut s = grid(&field.mesh, title);
    let _ = writeln!(s, "POINT_DATA {}", field.values.len());
    scalars(&mut s, "rho", field.values.iter().copied());
    s
}

/// Vertex velocities and pressures.
pub fn flow_vtk(u: &FlowSolution, title: &str) -> String {
    let mesh = &*u.mesh;
    let mut s = grid(mesh, title);
    let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
    let _ = writeln!(s, "VECTORS velocity double");
    for v in 0..mesh.num_vertices() {
        let w = u.vertex_velocity(v);
        let _ = writeln!(s, "{:.17e} {:.17e} 0", w[0], w[1]);
    }
    scalars(&mut s, "pressure", u.pressure.iter().copied());
    s
}

/// Per-triangle error indicator as cell data named `eta`.
pub fn indicator_vtk(mesh: &TriMesh, eta: &[f64], title: &str) -> String {
    let mut s = grid(mesh, title);
    let _ = writeln!(s, "CELL_DATA {}", mesh.num_triangles());
    scalars(&mut s, "eta", eta.iter().copied());
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::mesh::generate_rect;
    use std::sync::Arc;

    #[test]
    fn density_file_layout() {
        let m = Arc::new(generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.5).unwrap());
        let f = DensityField::constant(m.clone(), 0.25).unwrap();
        let s = density_vtk(&f, "t");
        assert!(s.starts_with("# vtk DataFile Version 3.0\nt\nASCII\nDATASET UNSTRUCTURED_GRID\n"));
        assert!(s.contains(&format!("POINTS {} double", m.num_vertices())));
        assert!(s.contains(&format!("CELLS {} {}", m.num_triangles(), 4 * m.num_triangles())));
        assert_eq!(s.lines().filter(|l| *l == "5").count(), m.num_triangles());
        assert!(s.contains("SCALARS rho double 1"));
        let eta = vec![1.0; m.num_triangles()];
        assert!(indicator_vtk(&m, &eta, "e").contains(&format!("CELL_DATA {}", m.num_triangles())));
    }
}
