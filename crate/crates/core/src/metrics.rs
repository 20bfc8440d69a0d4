//! Scalar summaries of density layouts.

use crate::fem::UnionFind;
use crate::geom::{Point, Rect};
use crate::material::{DensityField, JoinedDensity, RveGeometry};
use crate::mesh::{Locator, MorphSpec, Tag};

/// Fraction of nodes with `0.05 < rho < 0.95`.
pub fn intermediate_fraction(rho: &DensityField) -> f64 {
    let n = rho.values.iter().filter(|&&v| v > 0.05 && v < 0.95).count();
    n as f64 / rho.values.len().max(1) as f64
}

/// Whether the solid phase (`rho < threshold`) connects the `GammaL` side to
/// the `GammaR` side through mesh edges, periodic pairs included.
pub fn solid_spans(rho: &DensityField, threshold: f64) -> bool {
    let mesh = &*rho.mesh;
    let solid = |v: usize| rho.values[v] < threshold;
    let mut uf = UnionFind::new(mesh.num_vertices());
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if solid(a) && solid(b) {
                uf.union(a, b);
            }
        }
    }
    for &(a, b) in &mesh.periodic_pairs {
        if solid(a) && solid(b) {
            uf.union(a, b);
        }
    }
    let roots = |tag: Tag, uf: &mut UnionFind| -> Vec<usize> {
        let mut r: Vec<usize> = mesh
            .tagged_vertices(tag)
            .into_iter()
            .filter(|&v| solid(v))
            .map(|v| uf.find(v))
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    };
    let left = roots(Tag::GammaL, &mut uf);
    let right = roots(Tag::GammaR, &mut uf);
    left.iter().any(|r| right.binary_search(r).is_ok())
}

/// Cell centres of a grid with `n` cells per unit length over `rect`.
pub fn grid_points(rect: Rect, n: usize) -> Vec<Point> {
    let nx = ((rect.width() * n as f64).round() as usize).max(1);
    let ny = ((rect.height() * n as f64).round() as usize).max(1);
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push([
                rect.x0 + (i as f64 + 0.5) * rect.width() / nx as f64,
                rect.y0 + (j as f64 + 0.5) * rect.height() / ny as f64,
            ]);
        }
    }
    out
}

/// Grid points inside the morphing region.
pub fn region_points(spec: &MorphSpec, n: usize) -> Vec<Point> {
    let c = spec.cot_theta() * spec.height();
    let rect = Rect::new(
        spec.x_left() + c.min(0.0),
        spec.x_right() + c.max(0.0),
        spec.y_l,
        spec.y_u,
    );
    grid_points(rect, n)
        .into_iter()
        .filter(|&p| spec.contains(p, 0.0))
        .collect()
}

pub fn sample(rho: &DensityField, points: &[Point]) -> Vec<f64> {
    let loc = Locator::new(&rho.mesh);
    points.iter().map(|&p| rho.sample(&loc, p)).collect()
}

/// Intersection over union of two masks (1 when both are empty).
pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of the solid phases (`rho < 0.5`) of two morphing densities, on a grid
/// with `n` cells per unit length.
pub fn solid_iou(a: &DensityField, b: &DensityField, spec: &MorphSpec, n: usize) -> f64 {
    let pts = region_points(spec, n);
    let ma: Vec<bool> = sample(a, &pts).iter().map(|&v| v < 0.5).collect();
    let mb: Vec<bool> = sample(b, &pts).iter().map(|&v| v < 0.5).collect();
    iou(&ma, &mb)
}

/// Area where the joined field differs by more than 0.5 from the two cells
/// placed side by side.
pub fn modified_area(joined: &JoinedDensity, rho_l: &DensityField, rho_r: &DensityField, spec: &MorphSpec, n: usize) -> f64 {
    let rect = joined_bounds(joined);
    let pts = grid_points(rect, n);
    let e = spec.interface();
    let (ll, lr) = (Locator::new(&rho_l.mesh), Locator::new(&rho_r.mesh));
    let jv = sample(&joined.field, &pts);
    let count = pts
        .iter()
        .zip(&jv)
        .filter(|(p, v)| {
            let orig = if e.signed_distance(**p) < 0.0 {
                rho_l.sample(&ll, **p)
            } else {
                rho_r.sample(&lr, **p)
            };
            (**v - orig).abs() > 0.5
        })
        .count();
    count as f64 * rect.area() / pts.len() as f64
}

fn joined_bounds(joined: &JoinedDensity) -> Rect {
    let v = &joined.field.mesh.vertices;
    let fold = |f: fn(f64, f64) -> f64, k: usize, init: f64| v.iter().fold(init, |m, p| f(m, p[k]));
    Rect::new(
        fold(f64::min, 0, f64::MAX),
        fold(f64::max, 0, f64::MIN),
        fold(f64::min, 1, f64::MAX),
        fold(f64::max, 1, f64::MIN),
    )
}

/// Largest difference between the morphed density and the cell densities
/// at the mesh nodes on `GammaL` and `GammaR`.
pub fn trace_jump(rho_y: &DensityField, rho_l: &DensityField, rho_r: &DensityField) -> f64 {
    let mesh = &*rho_y.mesh;
    let mut worst = 0.0_f64;
    for (tag, cell) in [(Tag::GammaL, rho_l), (Tag::GammaR, rho_r)] {
        let lc = Locator::new(&cell.mesh);
        for v in mesh.tagged_vertices(tag) {
            let want = cell.sample(&lc, mesh.vertices[v]).clamp(0.0, 1.0);
            worst = worst.max((rho_y.values[v] - want).abs());
        }
    }
    worst
}

/// IoU of the fluid phase of the morphed density with the fluid phase of
/// `geom` itself, over the morphing region.
pub fn channel_iou(rho_y: &DensityField, geom: &RveGeometry, spec: &MorphSpec, n: usize) -> f64 {
    let pts = region_points(spec, n);
    let got: Vec<bool> = sample(rho_y, &pts).iter().map(|&v| v >= 0.5).collect();
    let want: Vec<bool> = pts.iter().map(|&p| geom.density(p) >= 0.5).collect();
    iou(&got, &want)
}
