//! Lagrange bases on a triangle in barycentric form.
//!
//! Local P2 numbering: vertices 0, 1, 2, then the midpoints of the edges
//! opposite each vertex: 3 = (1, 2), 4 = (2, 0), 5 = (0, 1).

use crate::geom::{self, Point};

/// Per-triangle geometric data.
#[derive(Clone, Copy, Debug)]
pub struct Element {
    pub corners: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl Element {
    pub fn new(corners: [Point; 3]) -> Self {
        let [a, b, c] = corners;
        let det = geom::orient(a, b, c);
        let grad_lambda = [
            [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
            [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
            [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
        ];
        Self {
            corners,
            area: 0.5 * det,
            grad_lambda,
        }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let [a, b, c] = self.corners;
        [
            l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
            l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
        ]
    }

    pub fn p2_grads(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_lambda;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            let s = 4.0 * l[i] - 1.0;
            out[i] = [s * g[i][0], s * g[i][1]];
        }
        for (k, (i, j)) in [(1, 2), (2, 0), (0, 1)].into_iter().enumerate() {
            out[3 + k] = [
                4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
                4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
            ];
        }
        out
    }
}

pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

/// Barycentric coordinates of the six local P2 nodes.
pub const P2_NODES: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];
