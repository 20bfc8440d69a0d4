//! Restrictions of finite element fields to straight segments.

use super::DensityField;
use crate::fem::FlowSolution;
use crate::geom::{self, Segment};
use crate::mesh::TriMesh;

/// Field to restrict.
#[derive(Clone, Copy)]
pub enum TraceSource<'a> {
    Density(&'a DensityField),
    /// Velocity component 0 (x) or 1 (y).
    Velocity(&'a FlowSolution, usize),
}

impl TraceSource<'_> {
    fn mesh(&self) -> &TriMesh {
        match self {
            TraceSource::Density(d) => &d.mesh,
            TraceSource::Velocity(u, _) => &u.mesh,
        }
    }

    fn eval(&self, t: usize, l: [f64; 3]) -> f64 {
        match self {
            TraceSource::Density(d) => d.at(t, l),
            TraceSource::Velocity(u, c) => u.velocity_at(t, l)[*c],
        }
    }
}

/// Piecewise quadratic in arc length; each piece is given by its values at
/// the two ends and the midpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub segment: Segment,
    pub pieces: Vec<(f64, f64, [f64; 3])>,
}

impl Trace {
    pub fn constant(segment: Segment, c: f64) -> Self {
        Self {
            segment,
            pieces: vec![(0.0, segment.length(), [c; 3])],
        }
    }

    pub fn length(&self) -> f64 {
        self.segment.length()
    }

    /// Value at arc length `s`, clamped to the segment.
    pub fn eval(&self, s: f64) -> f64 {
        let k = self.pieces.partition_point(|p| p.1 < s).min(self.pieces.len() - 1);
        let (t0, t1, v) = self.pieces[k];
        let x = ((s - t0) / (t1 - t0)).clamp(0.0, 1.0);
        v[0] * (1.0 - x) * (1.0 - 2.0 * x) + v[1] * 4.0 * x * (1.0 - x) + v[2] * x * (2.0 * x - 1.0)
    }

    /// Value at the projection of `p` onto the segment.
    pub fn eval_at(&self, p: geom::Point) -> f64 {
        self.eval(self.segment.param(p))
    }

    pub fn max_abs(&self) -> f64 {
        self.pieces
            .iter()
            .flat_map(|p| p.2)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, f: f64) {
        for p in &mut self.pieces {
            for v in &mut p.2 {
                *v *= f;
            }
        }
    }

    /// Integral over the segment (Simpson's rule is exact per piece).
    pub fn integral(&self) -> f64 {
        self.pieces
            .iter()
            .map(|(a, b, v)| (b - a) * (v[0] + 4.0 * v[1] + v[2]) / 6.0)
            .sum()
    }
}

/// Restrict `source` to `segment`. Parts of the segment not covered by the
/// mesh are bridged by the neighbouring pieces.
pub fn extract_trace(source: TraceSource<'_>, segment: Segment) -> Trace {
    let mesh = source.mesh();
    let len = segment.length();
    let eps = 1e-12 * len.max(1.0);
    let mut hits: Vec<(f64, f64, usize)> = (0..mesh.num_triangles())
        .filter_map(|t| {
            segment
                .clip_to_triangle(mesh.corners(t), eps)
                .map(|(a, b)| (a, b, t))
        })
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut pieces = Vec::with_capacity(hits.len());
    let mut end = 0.0_f64;
    for (a, b, t) in hits {
        if b <= end + eps {
            continue;
        }
        let a = a.max(end);
        let [p, q, r] = mesh.corners(t);
        let val = |s: f64| {
            let x = segment.at(s);
            // the element polynomial extends exactly past the clip tolerance
            source.eval(t, geom::barycentric(p, q, r, x))
        };
        pieces.push((a, b, [val(a), val(0.5 * (a + b)), val(b)]));
        end = b;
    }
    if pieces.is_empty() {
        // the segment misses the mesh entirely; use the nearest element
        let loc = crate::mesh::Locator::new(mesh);
        let (t, l) = loc.locate_or_nearest(mesh, segment.at(0.5 * len));
        let v = source.eval(t, l);
        pieces.push((0.0, len, [v; 3]));
    }
    Trace { segment, pieces }
}
