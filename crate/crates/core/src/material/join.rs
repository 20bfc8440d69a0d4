//! Composition of the cell densities with the morphed region.

use std::sync::Arc;

use super::DensityField;
use crate::error::{Error, Result};
use crate::geom::{self, Point, Rect};
use crate::mesh::{generate_rect, generate_rect_with_breaks, Locator, MorphSpec, TriMesh};

/// Rectangles carrying the left cells, the right cells, and their union.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domains {
    pub left: Rect,
    pub right: Rect,
    pub omega: Rect,
}

/// Cell domains for `spec`. In Cartesian mode these are single cells on
/// either side of the interface. Otherwise both lattices occupy one block
/// spanning the region's height, with two cells of margin on each side of the
/// inclined strip, and the interface line splits it.
pub fn domains(spec: &MorphSpec) -> Domains {
    let (yl, yu) = (spec.y_l, spec.y_u);
    if spec.is_cartesian() {
        Domains {
            left: Rect::new(spec.x_e - 1.0, spec.x_e, yl, yu),
            right: Rect::new(spec.x_e, spec.x_e + 1.0, yl, yu),
            omega: Rect::new(spec.x_e - 1.0, spec.x_e + 1.0, yl, yu),
        }
    } else {
        let c = spec.cot_theta() * spec.height();
        let block = Rect::new(spec.x_e - 2.0 + c.min(0.0), spec.x_e + 2.0 + c.max(0.0), yl, yu);
        Domains {
            left: block,
            right: block,
            omega: block,
        }
    }
}

/// Reject morphing regions whose sides leave their cell domains.
pub fn check_containment(spec: &MorphSpec) -> Result<()> {
    spec.validate()?;
    let d = domains(spec);
    let e = spec.interface();
    let (gl, gr) = (spec.gamma_l(), spec.gamma_r());
    let inside = |r: &Rect, p: Point| p[0] > r.x0 && p[0] < r.x1 && p[1] >= r.y0 - 1e-12 && p[1] <= r.y1 + 1e-12;
    for p in [gl.a, gl.b] {
        if !inside(&d.left, p) || e.signed_distance(p) >= 0.0 {
            return Err(Error::invalid(format!(
                "Gamma_L at ({:.4}, {:.4}) lies outside the left cell domain (s = {}, delta = {}); require |s| < delta/2",
                p[0], p[1], spec.s, spec.delta
            )));
        }
    }
    for p in [gr.a, gr.b] {
        if !inside(&d.right, p) || e.signed_distance(p) <= 0.0 {
            return Err(Error::invalid(format!(
                "Gamma_R at ({:.4}, {:.4}) lies outside the right cell domain (s = {}, delta = {}); require |s| < delta/2",
                p[0], p[1], spec.s, spec.delta
            )));
        }
    }
    Ok(())
}

fn region_polygon(spec: &MorphSpec) -> [Point; 4] {
    let (gl, gr) = (spec.gamma_l(), spec.gamma_r());
    [gl.a, gr.a, gr.b, gl.b]
}

/// Exact integral of a P1 density over its mesh intersected with the
/// morphing region and one side of the interface (`side = -1` left, `+1` right).
fn integrate_clipped(rho: &DensityField, spec: &MorphSpec, side: f64) -> f64 {
    let poly = region_polygon(spec);
    let e = spec.interface();
    let mesh = &rho.mesh;
    let mut total = 0.0;
    for t in 0..mesh.num_triangles() {
        let c = mesh.corners(t);
        let mut clipped = c.to_vec();
        for k in 0..4 {
            let (a, b) = (poly[k], poly[(k + 1) % 4]);
            clipped = geom::clip_halfplane(&clipped, |p| -geom::orient(a, b, p));
            if clipped.len() < 3 {
                break;
            }
        }
        if clipped.len() >= 3 {
            clipped = geom::clip_halfplane(&clipped, |p| -side * e.signed_distance(p));
        }
        if clipped.len() < 3 {
            continue;
        }
        let [a, b, cc] = c;
        let val = |p: Point| {
            let l = geom::barycentric(a, b, cc, p);
            let [i, j, k] = mesh.triangles[t];
            l[0] * rho.values[i] + l[1] * rho.values[j] + l[2] * rho.values[k]
        };
        for k in 1..clipped.len() - 1 {
            let (p, q, r) = (clipped[0], clipped[k], clipped[k + 1]);
            let area = 0.5 * geom::orient(p, q, r);
            let g = [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0];
            total += area * val(g);
        }
    }
    total
}

/// Volume cap preserving the amount of cell material inside the region.
pub fn volume_fraction_beta(rho_l: &DensityField, rho_r: &DensityField, spec: &MorphSpec) -> f64 {
    let left = integrate_clipped(rho_l, spec, -1.0);
    let right = integrate_clipped(rho_r, spec, 1.0);
    ((left + right) / spec.area()).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Left,
    Morph,
    Right,
}

/// Joined density on a fresh mesh of the whole domain.
#[derive(Clone, Debug)]
pub struct JoinedDensity {
    pub field: DensityField,
    pub region: Vec<Region>,
}

/// Compose the cell densities with the morphed density on a mesh of the full
/// domain with spacing `h`.
pub fn join_densities(
    rho_l: &DensityField,
    rho_r: &DensityField,
    rho_y: &DensityField,
    spec: &MorphSpec,
    h: f64,
) -> Result<JoinedDensity> {
    check_containment(spec)?;
    let d = domains(spec);
    let mesh: TriMesh = if spec.is_cartesian() {
        generate_rect_with_breaks(d.omega, h, &[spec.x_left(), spec.x_right()])?
    } else {
        generate_rect(d.omega, h)?
    };
    let mesh = Arc::new(mesh);
    let (ll, lr, ly) = (
        Locator::new(&rho_l.mesh),
        Locator::new(&rho_r.mesh),
        Locator::new(&rho_y.mesh),
    );
    let e = spec.interface();
    let mut values = Vec::with_capacity(mesh.num_vertices());
    let mut region = Vec::with_capacity(mesh.num_vertices());
    for &p in &mesh.vertices {
        let (r, v) = if spec.contains(p, 1e-9) {
            (Region::Morph, rho_y.sample(&ly, p))
        } else if e.signed_distance(p) < 0.0 {
            (Region::Left, rho_l.sample(&ll, p))
        } else {
            (Region::Right, rho_r.sample(&lr, p))
        };
        values.push(v.clamp(0.0, 1.0));
        region.push(r);
    }
    Ok(JoinedDensity {
        field: DensityField::new(mesh, values)?,
        region,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(rect: Rect, c: f64) -> DensityField {
        DensityField::constant(Arc::new(generate_rect(rect, 0.05).unwrap()), c).unwrap()
    }

    #[test]
    fn beta_of_constant_fields() {
        let spec = MorphSpec::default();
        let d = domains(&spec);
        let beta = volume_fraction_beta(&cell(d.left, 0.3), &cell(d.right, 0.5), &spec);
        assert!((beta - 0.4).abs() < 1e-12);
        let beta = volume_fraction_beta(&cell(d.left, 1.0), &cell(d.right, 1.0), &spec);
        assert!((beta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn beta_matches_slab_integral() {
        // x-independent densities: beta is a weighted average of the slab means
        let spec = MorphSpec { s: 0.2, delta: 0.5, ..MorphSpec::default() };
        let d = domains(&spec);
        let f = |rect: Rect, g: fn(f64) -> f64| {
            let m = Arc::new(generate_rect(rect, 0.05).unwrap());
            let v = m.vertices.iter().map(|p| g(p[1])).collect();
            DensityField::new(m, v).unwrap()
        };
        let gl = |y: f64| y;
        let gr = |y: f64| 1.0 - 0.5 * y;
        let beta = volume_fraction_beta(&f(d.left, gl), &f(d.right, gr), &spec);
        // left part has width 0.05 (x in (-0.05, 0)), right part 0.45
        let slab = (0.05 * 0.5 + 0.45 * 0.75) / 0.5;
        assert!((beta - slab).abs() < 1e-12, "{beta} vs {slab}");
    }

    #[test]
    fn join_constant_is_constant() {
        let spec = MorphSpec::default();
        let d = domains(&spec);
        let y = cell(Rect::new(-0.25, 0.25, 0.0, 1.0), 0.7);
        let j = join_densities(&cell(d.left, 0.7), &cell(d.right, 0.7), &y, &spec, 0.05).unwrap();
        assert!(j.field.values.iter().all(|&v| (v - 0.7).abs() < 1e-15));
        assert!(j.region.contains(&Region::Morph));
        assert!(j.region.contains(&Region::Left));
        assert!(j.region.contains(&Region::Right));
    }

    #[test]
    fn containment() {
        assert!(check_containment(&MorphSpec::default()).is_ok());
        let out = MorphSpec { s: 0.3, ..MorphSpec::default() };
        assert!(check_containment(&out).is_err());
        let inclined = MorphSpec {
            delta: 0.4,
            theta: std::f64::consts::FRAC_PI_4,
            ..MorphSpec::default()
        };
        assert!(check_containment(&inclined).is_ok());
    }
}
