//! Recovery-based error indicator and mesh adaptation by regeneration.

use crate::fem::quadrature::degree5;
use crate::geom::{self, Point};
use crate::material::DensityField;
use crate::mesh::{refine, Locator, TriMesh};
use crate::par::{self, Execution};

/// Per-triangle estimate `|| G(rho) - grad rho ||_{L2(K)}` where `G` is the
/// area-weighted average of element gradients around each vertex.
pub fn zz_estimate(rho: &DensityField, exec: Execution) -> Vec<f64> {
    let mesh = &*rho.mesh;
    let grads: Vec<[f64; 2]> = par::map_indices(exec, mesh.num_triangles(), |t| element_gradient(rho, t));
    let mut g = vec![[0.0; 2]; mesh.num_vertices()];
    let mut w = vec![0.0; mesh.num_vertices()];
    for (t, gr) in grads.iter().enumerate() {
        let a = mesh.area(t);
        for &v in &mesh.triangles[t] {
            g[v][0] += a * gr[0];
            g[v][1] += a * gr[1];
            w[v] += a;
        }
    }
    for (gv, wv) in g.iter_mut().zip(&w) {
        gv[0] /= wv;
        gv[1] /= wv;
    }
    let rule = degree5();
    par::map_indices(exec, mesh.num_triangles(), |t| {
        let [a, b, c] = mesh.triangles[t];
        let area = mesh.area(t);
        let ge = grads[t];
        let mut s = 0.0;
        for (l, wq) in rule.points.iter().zip(rule.weights) {
            let dx = l[0] * g[a][0] + l[1] * g[b][0] + l[2] * g[c][0] - ge[0];
            let dy = l[0] * g[a][1] + l[1] * g[b][1] + l[2] * g[c][1] - ge[1];
            s += wq * area * (dx * dx + dy * dy);
        }
        s.sqrt()
    })
}

fn element_gradient(rho: &DensityField, t: usize) -> [f64; 2] {
    let el = crate::fem::Element::new(rho.mesh.corners(t));
    let [a, b, c] = rho.mesh.triangles[t];
    let r = [rho.values[a], rho.values[b], rho.values[c]];
    let gl = el.grad_lambda;
    [
        r[0] * gl[0][0] + r[1] * gl[1][0] + r[2] * gl[2][0],
        r[0] * gl[0][1] + r[1] * gl[1][1] + r[2] * gl[2][1],
    ]
}

/// Global estimate `sqrt(sum eta_K^2)`.
pub fn total_estimate(eta: &[f64]) -> f64 {
    eta.iter().map(|e| e * e).sum::<f64>().sqrt()
}

/// Relative change of mesh cardinality between two adaptation cycles.
pub fn err_c(card_prev: usize, card_next: usize) -> f64 {
    assert!(card_prev > 0, "previous cardinality must be positive");
    (card_next as f64 - card_prev as f64).abs() / card_prev as f64
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptParams {
    pub tol: f64,
    /// Maximum number of uniform refinement levels above the base mesh.
    pub max_refine_level: u32,
    pub element_budget: usize,
    /// Base spacing, for the interior refinement rule.
    pub h0: f64,
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self {
            tol: 2.5e-6,
            max_refine_level: 2,
            element_budget: 200_000,
            h0: 1.0 / 60.0,
        }
    }
}

pub struct AdaptOutcome {
    pub mesh: TriMesh,
    /// The element budget stopped refinement early.
    pub truncated: bool,
}

/// Target refinement generation of each element of `mesh`.
///
/// With `tau = TOL / sqrt(#T)`, elements with `eta > tau` gain
/// `ceil(log4(eta / tau))` levels, elements with `eta < tau / 4` lose levels,
/// and the rest keep theirs. Largely fluid elements coarser than `2 h0` gain
/// one level.
pub fn target_generations(mesh: &TriMesh, eta: &[f64], rho: Option<&DensityField>, p: &AdaptParams) -> Vec<u32> {
    let n = mesh.num_triangles();
    let tau = p.tol / (n as f64).sqrt();
    let cap = 2 * p.max_refine_level as i64;
    (0..n)
        .map(|t| {
            let g = mesh.generation[t] as i64;
            let ratio = (eta[t] / tau).log(4.0);
            let levels = if eta[t] > tau {
                ratio.ceil() as i64
            } else if ratio < -1.0 {
                if ratio.is_finite() { ratio.ceil() as i64 } else { -cap - g }
            } else {
                0
            };
            let mut target = g + 2 * levels;
            if let Some(r) = rho {
                let [a, b, c] = mesh.triangles[t];
                let mean = (r.values[a] + r.values[b] + r.values[c]) / 3.0;
                if mean >= 0.9 && mesh.diameter(t) > 2.0 * p.h0 {
                    target = target.max(g + 2);
                }
            }
            target.clamp(0, cap) as u32
        })
        .collect()
}

/// Rebuild from `base` and refine until every element reaches the target
/// generation of the element of `current` it overlaps.
pub fn mark_and_adapt(base: &TriMesh, current: &TriMesh, targets: &[u32], p: &AdaptParams) -> AdaptOutcome {
    let loc = Locator::new(current);
    let target_at = |x: Point| {
        let (t, _) = loc.locate_or_nearest(current, x);
        targets[t]
    };
    let mut mesh = base.clone();
    let mut truncated = false;
    loop {
        let marks: Vec<usize> = (0..mesh.num_triangles())
            .filter(|&t| {
                let c = mesh.corners(t);
                let g = mesh.centroid(t);
                let want = [
                    g,
                    geom::midpoint(g, c[0]),
                    geom::midpoint(g, c[1]),
                    geom::midpoint(g, c[2]),
                ]
                .into_iter()
                .map(target_at)
                .max()
                .unwrap_or(0);
                mesh.generation[t] < want
            })
            .collect();
        if marks.is_empty() {
            break;
        }
        if mesh.num_triangles() + 3 * marks.len() > p.element_budget {
            log::warn!(
                "adaptation stopped at {} elements: refining {} more would exceed the budget of {}",
                mesh.num_triangles(),
                marks.len(),
                p.element_budget
            );
            truncated = true;
            break;
        }
        mesh = refine(&mesh, &marks);
    }
    AdaptOutcome { mesh, truncated }
}
