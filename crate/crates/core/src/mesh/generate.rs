use std::collections::BTreeMap;

use super::{edge_key, MorphSpec, Tag, TriMesh};
use crate::error::{Error, Result};
use crate::geom::{Point, Rect};

fn divisions(len: f64, h: f64) -> usize {
    ((len / h).round() as usize).max(1)
}

/// Structured mesh of a rectangle with alternating diagonals.
pub fn generate_rect(domain: Rect, h: f64) -> Result<TriMesh> {
    generate_rect_with_breaks(domain, h, &[])
}

/// Like [`generate_rect`], but the vertical grid lines pass through every
/// abscissa in `breaks` that lies strictly inside the domain.
pub fn generate_rect_with_breaks(domain: Rect, h: f64, breaks: &[f64]) -> Result<TriMesh> {
    check_inputs(domain, h)?;
    let mut knots = vec![domain.x0];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&b| b > domain.x0 + 1e-9 && b < domain.x1 - 1e-9)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    knots.extend(inner);
    knots.push(domain.x1);
    let mut xs = vec![domain.x0];
    for w in knots.windows(2) {
        let n = divisions(w[1] - w[0], h);
        for i in 1..=n {
            xs.push(if i == n {
                w[1]
            } else {
                w[0] + (w[1] - w[0]) * i as f64 / n as f64
            });
        }
    }
    let ny = divisions(domain.height(), h);
    Ok(structured(&xs, domain.y0, domain.y1, ny, 0.0))
}

/// Structured mesh of the morphing region; a rectangle when `theta = pi/2`.
pub fn generate_parallelogram(spec: &MorphSpec, h: f64) -> Result<TriMesh> {
    spec.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("mesh spacing must be positive (got {h})")));
    }
    let (x0, x1) = (spec.x_left(), spec.x_right());
    let nx = divisions(spec.delta, h);
    let xs: Vec<f64> = (0..=nx)
        .map(|i| if i == nx { x1 } else { x0 + (x1 - x0) * i as f64 / nx as f64 })
        .collect();
    let ny = divisions(spec.height(), h);
    Ok(structured(&xs, spec.y_l, spec.y_u, ny, spec.cot_theta()))
}

fn check_inputs(domain: Rect, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!("mesh spacing must be positive (got {h})")));
    }
    let finite = [domain.x0, domain.x1, domain.y0, domain.y1]
        .iter()
        .all(|v| v.is_finite());
    if !finite || domain.width() <= 0.0 || domain.height() <= 0.0 {
        return Err(Error::invalid(format!("degenerate domain {domain:?}")));
    }
    Ok(())
}

/// Grid over columns `xs` (at `y = y0`) and `ny` rows, sheared by `cot`.
fn structured(xs: &[f64], y0: f64, y1: f64, ny: usize, cot: f64) -> TriMesh {
    let nx = xs.len() - 1;
    let stride = nx + 1;
    let mut vertices: Vec<Point> = Vec::with_capacity(stride * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { y1 } else { y0 + (y1 - y0) * j as f64 / ny as f64 };
        let shift = (y - y0) * cot;
        for &x in xs {
            vertices.push([x + shift, y]);
        }
    }
    let id = |i: usize, j: usize| j * stride + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([p10, p11, p00]);
                triangles.push([p01, p00, p11]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p11, p01, p10]);
            }
        }
    }
    let mut boundary = BTreeMap::new();
    for i in 0..nx {
        boundary.insert(edge_key(id(i, 0), id(i + 1, 0)), Tag::Bottom);
        boundary.insert(edge_key(id(i, ny), id(i + 1, ny)), Tag::Top);
    }
    for j in 0..ny {
        boundary.insert(edge_key(id(0, j), id(0, j + 1)), Tag::GammaL);
        boundary.insert(edge_key(id(nx, j), id(nx, j + 1)), Tag::GammaR);
    }
    let generation = vec![0; triangles.len()];
    TriMesh {
        vertices,
        triangles,
        boundary,
        periodic_pairs: Vec::new(),
        periodic_shift: None,
        generation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::LateralBc;
    use std::f64::consts::PI;

    fn median(mut v: Vec<f64>) -> f64 {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    #[test]
    fn coarse_unit_square() {
        let m = generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.5).unwrap();
        assert!((8..=16).contains(&m.num_triangles()));
        m.check().unwrap();
    }

    #[test]
    fn fine_unit_square_count_and_spacing() {
        let h = 1.0 / 60.0;
        let m = generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), h).unwrap();
        assert_eq!(m.num_triangles(), 7200);
        let med = median(m.edge_lengths());
        assert!((med - h).abs() <= 0.25 * h, "median edge {med}");
        m.check().unwrap();
    }

    #[test]
    fn morphing_rectangle_tags() {
        let m = generate_rect(Rect::new(-0.25, 0.25, 0.0, 1.0), 1.0 / 60.0).unwrap();
        for (&(a, b), &tag) in &m.boundary {
            let (pa, pb) = (m.vertices[a], m.vertices[b]);
            match tag {
                Tag::GammaL => assert!(pa[0] == -0.25 && pb[0] == -0.25),
                Tag::GammaR => assert!(pa[0] == 0.25 && pb[0] == 0.25),
                Tag::Bottom => assert!(pa[1] == 0.0 && pb[1] == 0.0),
                Tag::Top => assert!(pa[1] == 1.0 && pb[1] == 1.0),
                Tag::Other => panic!("unexpected tag"),
            }
        }
        assert_eq!(m.tagged_vertices(Tag::GammaL).len(), 61);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(generate_rect(Rect::new(0.0, 0.0, 0.0, 1.0), 0.1).is_err());
        assert!(generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), 0.0).is_err());
        let bad = MorphSpec { theta: PI, ..MorphSpec::default() };
        assert!(generate_parallelogram(&bad, 0.1).is_err());
    }

    #[test]
    fn parallelogram_degenerates_to_rect() {
        let spec = MorphSpec::default();
        let p = generate_parallelogram(&spec, 1.0 / 30.0).unwrap();
        let r = generate_rect(Rect::new(-0.25, 0.25, 0.0, 1.0), 1.0 / 30.0).unwrap();
        assert_eq!(p.vertices, r.vertices);
        assert_eq!(p.triangles, r.triangles);
    }

    #[test]
    fn inclined_sides_follow_theta() {
        for theta in [PI / 4.0, PI / 3.0] {
            let spec = MorphSpec {
                delta: 0.4,
                theta,
                lateral_bc: LateralBc::Neumann,
                ..MorphSpec::default()
            };
            let m = generate_parallelogram(&spec, 1.0 / 20.0).unwrap();
            m.check().unwrap();
            let cot = 1.0 / theta.tan();
            for (&(a, b), &tag) in &m.boundary {
                let mid = crate::geom::midpoint(m.vertices[a], m.vertices[b]);
                let x_line = match tag {
                    Tag::GammaL => spec.x_left(),
                    Tag::GammaR => spec.x_right(),
                    _ => continue,
                };
                assert!((mid[0] - (x_line + mid[1] * cot)).abs() < 1e-12);
            }
            assert!((m.total_area() - spec.area()).abs() < 1e-12);
        }
    }

    #[test]
    fn breaks_are_honoured() {
        let m = generate_rect_with_breaks(Rect::new(-1.0, 1.0, 0.0, 1.0), 0.1, &[-0.23, 0.31]).unwrap();
        for b in [-0.23, 0.31] {
            assert!(m.vertices.iter().any(|p| p[0] == b));
        }
        m.check().unwrap();
    }
}
