//! Sparse direct solution of the saddle system.

use std::sync::Arc;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use faer::Mat;

use super::basis::{p2_values, Element};
use super::{Discretization, P2Layout, SaddleSystem};
use crate::error::{Error, Result};
use crate::mesh::TriMesh;

const REFINE_TOL: f64 = 1e-10;
const MAX_REFINE: usize = 6;

/// Velocity (P2, raw DOF numbering) and pressure (P1, per vertex).
#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub mesh: Arc<TriMesh>,
    pub layout: Arc<P2Layout>,
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Zero-mean pressure multiplier (zero when no gauge was needed).
    pub multiplier: f64,
    /// Normwise backward error `|b - Ax| / (|A| |x| + |b|)` (max norms) of
    /// the reduced linear system.
    pub relative_residual: f64,
}

impl FlowSolution {
    pub fn velocity_at(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let nodes = self.layout.element_nodes(&self.mesh, t);
        let phi = p2_values(l);
        let mut u = [0.0; 2];
        for i in 0..6 {
            u[0] += phi[i] * self.velocity[2 * nodes[i]];
            u[1] += phi[i] * self.velocity[2 * nodes[i] + 1];
        }
        u
    }

    /// `g[c][d] = d u_c / d x_d`.
    pub fn velocity_gradient_at(&self, el: &Element, t: usize, l: [f64; 3]) -> [[f64; 2]; 2] {
        let nodes = self.layout.element_nodes(&self.mesh, t);
        let grads = el.p2_grads(l);
        let mut g = [[0.0; 2]; 2];
        for i in 0..6 {
            for c in 0..2 {
                let u = self.velocity[2 * nodes[i] + c];
                g[c][0] += u * grads[i][0];
                g[c][1] += u * grads[i][1];
            }
        }
        g
    }

    pub fn pressure_at(&self, t: usize, l: [f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.triangles[t];
        l[0] * self.pressure[a] + l[1] * self.pressure[b] + l[2] * self.pressure[c]
    }

    /// Nodal velocity of vertex `v`.
    pub fn vertex_velocity(&self, v: usize) -> [f64; 2] {
        [self.velocity[2 * v], self.velocity[2 * v + 1]]
    }

    pub fn max_abs_velocity(&self) -> f64 {
        self.velocity.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `y = A x` for a column-major sparse matrix.
pub fn matvec(a: &SparseColMat<usize, f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    let sym = a.symbolic();
    let vals = a.val();
    let cp = sym.col_ptr();
    let ri = sym.row_idx();
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for k in cp[j]..cp[j + 1] {
            y[ri[k]] += vals[k] * xj;
        }
    }
    y
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Max-norm of a sparse matrix (largest absolute row sum).
fn matrix_norm_inf(a: &SparseColMat<usize, f64>) -> f64 {
    let mut rows = vec![0.0; a.nrows()];
    let sym = a.symbolic();
    for j in 0..a.ncols() {
        for k in sym.col_range(j) {
            rows[sym.row_idx()[k]] += a.val()[k].abs();
        }
    }
    norm_inf(&rows)
}

/// Factor and solve, with iterative refinement until the normwise backward
/// error is at most 1e-10.
pub fn solve_saddle(disc: &Discretization, sys: &SaddleSystem) -> Result<FlowSolution> {
    let n = sys.rhs.len();
    if sys.matrix.nrows() != n || n != disc.size() {
        return Err(Error::Solver("system size does not match the discretization".into()));
    }
    let symbolic = match disc.symbolic.get() {
        Some(s) => s.clone(),
        None => {
            let s = SymbolicLu::try_new(sys.matrix.symbolic())
                .map_err(|e| Error::Solver(format!("symbolic factorization: {e:?}")))?;
            let _ = disc.symbolic.set(s.clone());
            s
        }
    };
    let lu = Lu::try_new_with_symbolic(symbolic, sys.matrix.as_ref()).map_err(|e| {
        Error::Solver(format!(
            "numeric factorization failed ({e:?}); the system is singular{}",
            if disc.has_gauge() { "" } else { " (is a pressure gauge missing?)" }
        ))
    })?;

    let bnorm = norm_inf(&sys.rhs);
    let anorm = matrix_norm_inf(&sys.matrix);
    let mut x = vec![0.0; n];
    let mut rel = 0.0;
    if bnorm > 0.0 {
        let mut r = sys.rhs.clone();
        for _ in 0..=MAX_REFINE {
            let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| r[i]);
            lu.solve_in_place(rhs.as_mut());
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += rhs[(i, 0)];
            }
            let ax = matvec(&sys.matrix, &x);
            r = sys.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm_inf(&r) / (anorm * norm_inf(&x) + bnorm);
            if rel <= REFINE_TOL {
                break;
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Solver("non-finite solution; the system is singular".into()));
        }
        if rel > 1e-6 {
            return Err(Error::Solver(format!(
                "solution residual {rel:.3e} after refinement; the system is numerically singular"
            )));
        }
        if rel > REFINE_TOL {
            log::warn!("saddle solve residual {rel:.3e} above {REFINE_TOL:.0e}");
        }
    }
    let (velocity, pressure, multiplier) = disc.expand(&x);
    Ok(FlowSolution {
        mesh: disc.velocity.mesh.clone(),
        layout: disc.velocity.layout.clone(),
        velocity,
        pressure,
        multiplier,
        relative_residual: rel,
    })
}
