use super::TriMesh;
use crate::geom::{self, Point};

/// Bucket grid over triangle bounding boxes for point location.
#[derive(Clone, Debug)]
pub struct Locator {
    x0: f64,
    y0: f64,
    dx: f64,
    dy: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

const INSIDE_TOL: f64 = 1e-10;

impl Locator {
    pub fn new(mesh: &TriMesh) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &mesh.vertices {
            x0 = x0.min(p[0]);
            x1 = x1.max(p[0]);
            y0 = y0.min(p[1]);
            y1 = y1.max(p[1]);
        }
        let n = ((mesh.num_triangles() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let (w, h) = ((x1 - x0).max(1e-300), (y1 - y0).max(1e-300));
        let (nx, ny) = if w >= h {
            (n, ((n as f64 * h / w).ceil() as usize).max(1))
        } else {
            (((n as f64 * w / h).ceil() as usize).max(1), n)
        };
        let (dx, dy) = (w / nx as f64, h / ny as f64);
        let mut buckets = vec![Vec::new(); nx * ny];
        let cell = |v: f64, o: f64, d: f64, n: usize| (((v - o) / d).floor().max(0.0) as usize).min(n - 1);
        for t in 0..mesh.num_triangles() {
            let c = mesh.corners(t);
            let bx0 = c.iter().map(|p| p[0]).fold(f64::MAX, f64::min) - INSIDE_TOL;
            let bx1 = c.iter().map(|p| p[0]).fold(f64::MIN, f64::max) + INSIDE_TOL;
            let by0 = c.iter().map(|p| p[1]).fold(f64::MAX, f64::min) - INSIDE_TOL;
            let by1 = c.iter().map(|p| p[1]).fold(f64::MIN, f64::max) + INSIDE_TOL;
            for j in cell(by0, y0, dy, ny)..=cell(by1, y0, dy, ny) {
                for i in cell(bx0, x0, dx, nx)..=cell(bx1, x0, dx, nx) {
                    buckets[j * nx + i].push(t as u32);
                }
            }
        }
        Self {
            x0,
            y0,
            dx,
            dy,
            nx,
            ny,
            buckets,
        }
    }

    fn bucket(&self, p: Point) -> Option<usize> {
        let fi = (p[0] - self.x0) / self.dx;
        let fj = (p[1] - self.y0) / self.dy;
        let slack = 1e-9;
        if fi < -slack || fj < -slack || fi > self.nx as f64 + slack || fj > self.ny as f64 + slack {
            return None;
        }
        let i = (fi.floor().max(0.0) as usize).min(self.nx - 1);
        let j = (fj.floor().max(0.0) as usize).min(self.ny - 1);
        Some(j * self.nx + i)
    }

    /// Triangle containing `p` together with its barycentric coordinates.
    pub fn locate(&self, mesh: &TriMesh, p: Point) -> Option<(usize, [f64; 3])> {
        let b = self.bucket(p)?;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[b] {
            let t = t as usize;
            let [a, bb, c] = mesh.corners(t);
            let l = geom::barycentric(a, bb, c, p);
            let worst = l[0].min(l[1]).min(l[2]);
            if worst >= 0.0 {
                return Some((t, l));
            }
            if best.as_ref().is_none_or(|x| worst > x.2) {
                best = Some((t, l, worst));
            }
        }
        match best {
            Some((t, l, worst)) if worst >= -INSIDE_TOL => Some((t, clamp_bary(l))),
            _ => None,
        }
    }

    /// Like [`Locator::locate`] but falls back to the nearest triangle
    /// (clamped barycentrics) for points slightly outside the mesh.
    pub fn locate_or_nearest(&self, mesh: &TriMesh, p: Point) -> (usize, [f64; 3]) {
        if let Some(hit) = self.locate(mesh, p) {
            return hit;
        }
        let mut best = (0, [1.0, 0.0, 0.0], f64::MAX);
        for t in 0..mesh.num_triangles() {
            let [a, b, c] = mesh.corners(t);
            let l = clamp_bary(geom::barycentric(a, b, c, p));
            let q = [
                l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
            ];
            let d = geom::norm(geom::sub(p, q));
            if d < best.2 {
                best = (t, l, d);
            }
        }
        (best.0, best.1)
    }
}

fn clamp_bary(l: [f64; 3]) -> [f64; 3] {
    let c = [l[0].max(0.0), l[1].max(0.0), l[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use crate::mesh::generate_rect;

    #[test]
    fn locates_every_centroid() {
        let m = generate_rect(Rect::new(-0.5, 1.5, 0.0, 1.0), 0.1).unwrap();
        let loc = Locator::new(&m);
        for t in 0..m.num_triangles() {
            let (found, l) = loc.locate(&m, m.centroid(t)).unwrap();
            assert_eq!(found, t);
            assert!(l.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-12));
        }
        assert!(loc.locate(&m, [3.0, 0.5]).is_none());
        let (t, _) = loc.locate_or_nearest(&m, [1.5 + 1e-6, 0.5]);
        assert!(m.centroid(t)[0] > 1.3);
    }
}
