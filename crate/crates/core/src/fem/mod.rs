//! Taylor-Hood (P2 velocity, P1 pressure) discretization of the generalized
//! Stokes-Brinkman system.

mod assemble;
mod basis;
pub mod quadrature;
mod solve;
mod space;

use std::sync::{Arc, OnceLock};

use faer::sparse::linalg::solvers::SymbolicLu;
use faer::sparse::{Argsort, SymbolicSparseColMat};

use crate::error::Result;
use crate::geom;
use crate::mesh::{Axis, Tag, TriMesh};

pub use assemble::{assemble, assemble_blocks, local_system, BodyForce, LocalSystem, RawBlocks, SaddleSystem};
pub use basis::{p2_values, Element, P2_NODES};
pub use solve::{matvec, solve_saddle, FlowSolution};
pub use space::{periodic_node_pairs, FunctionSpace, P2Layout, SpaceKind, UnionFind};

const FIXED: u32 = u32::MAX;

/// Constrained DOF numbering for one velocity space, plus cached sparsity and
/// symbolic factorization reused across solves on the same mesh.
pub struct Discretization {
    pub velocity: FunctionSpace,
    /// Free unknown per raw velocity DOF, `FIXED` when prescribed.
    u_index: Vec<u32>,
    /// Prescribed value per raw velocity DOF (class average).
    u_value: Vec<f64>,
    /// Pressure unknown per vertex.
    p_index: Vec<usize>,
    n_u: usize,
    n_p: usize,
    gauge: bool,
    /// Lumped P1 mass per pressure unknown.
    lumped: Vec<f64>,
    pub(crate) pattern: OnceLock<(SymbolicSparseColMat<usize>, Argsort<usize>)>,
    pub(crate) symbolic: OnceLock<SymbolicLu<usize>>,
}

impl Discretization {
    pub fn new(velocity: FunctionSpace) -> Result<Self> {
        let mesh = velocity.mesh.clone();
        let layout = velocity.layout.clone();
        let classes = velocity.node_classes();
        let nu_raw = 2 * layout.num_nodes();

        let mut sum = vec![0.0; nu_raw];
        let mut count = vec![0u32; nu_raw];
        for (&d, &v) in &velocity.dirichlet {
            let cd = 2 * classes[d / 2] + d % 2;
            sum[cd] += v;
            count[cd] += 1;
        }
        let mut class_index = vec![FIXED; nu_raw];
        let mut n_u = 0usize;
        let mut u_index = vec![FIXED; nu_raw];
        let mut u_value = vec![0.0; nu_raw];
        for d in 0..nu_raw {
            let cd = 2 * classes[d / 2] + d % 2;
            if count[cd] > 0 {
                u_value[d] = sum[cd] / count[cd] as f64;
            } else {
                if class_index[cd] == FIXED {
                    class_index[cd] = n_u as u32;
                    n_u += 1;
                }
                u_index[d] = class_index[cd];
            }
        }

        let pspace = FunctionSpace::scalar_p1(mesh.clone(), layout.clone());
        let pclasses = if velocity.periodic {
            pspace.node_classes()
        } else {
            (0..layout.num_vertices).collect()
        };
        let mut pclass_index = vec![usize::MAX; layout.num_vertices];
        let mut p_index = vec![0; layout.num_vertices];
        let mut n_p = 0;
        for v in 0..layout.num_vertices {
            let c = pclasses[v];
            if pclass_index[c] == usize::MAX {
                pclass_index[c] = n_p;
                n_p += 1;
            }
            p_index[v] = pclass_index[c];
        }
        let mut lumped = vec![0.0; n_p];
        for t in 0..mesh.num_triangles() {
            let a3 = mesh.area(t) / 3.0;
            for &v in &mesh.triangles[t] {
                lumped[p_index[v]] += a3;
            }
        }

        let gauge = normal_velocity_fully_constrained(&mesh, &layout, &velocity.periodic, &u_index);
        Ok(Self {
            velocity,
            u_index,
            u_value,
            p_index,
            n_u,
            n_p,
            gauge,
            lumped,
            pattern: OnceLock::new(),
            symbolic: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.velocity.mesh
    }

    pub fn layout(&self) -> &Arc<P2Layout> {
        &self.velocity.layout
    }

    /// Whether a zero-mean pressure multiplier is part of the system.
    pub fn has_gauge(&self) -> bool {
        self.gauge
    }

    pub fn num_velocity_unknowns(&self) -> usize {
        self.n_u
    }

    pub fn num_pressure_unknowns(&self) -> usize {
        self.n_p
    }

    pub fn size(&self) -> usize {
        self.n_u + self.n_p + usize::from(self.gauge)
    }

    fn nnz_hint(&self) -> usize {
        self.velocity.mesh.num_triangles() * (72 + 72) + 2 * self.n_p
    }

    #[inline]
    fn free(&self, dof: usize) -> Option<usize> {
        let i = self.u_index[dof];
        (i != FIXED).then_some(i as usize)
    }

    /// Prescribed value of a raw velocity DOF (zero for free DOFs).
    pub fn fixed_value(&self, dof: usize) -> Option<f64> {
        (self.u_index[dof] == FIXED).then_some(self.u_value[dof])
    }

    /// Emit reduced matrix entries in a fixed order and accumulate the
    /// right-hand side, lifting prescribed values.
    fn scatter(&self, locals: &[LocalSystem], rhs: &mut [f64], mut emit: impl FnMut(usize, usize, f64)) {
        let mesh = &*self.velocity.mesh;
        let layout = &*self.velocity.layout;
        for (t, loc) in locals.iter().enumerate() {
            let nodes = layout.element_nodes(mesh, t);
            let dofs: [usize; 12] = std::array::from_fn(|k| 2 * nodes[k / 2] + k % 2);
            let free: [Option<usize>; 12] = std::array::from_fn(|k| self.free(dofs[k]));
            for i in 0..12 {
                let Some(ri) = free[i] else { continue };
                rhs[ri] += loc.load[i];
                for j in (i % 2..12).step_by(2) {
                    let a = loc.a(i, j);
                    match free[j] {
                        Some(cj) => emit(ri, cj, a),
                        None => rhs[ri] -= a * self.u_value[dofs[j]],
                    }
                }
            }
            for (q, &v) in mesh.triangles[t].iter().enumerate() {
                let pq = self.n_u + self.p_index[v];
                for k in 0..12 {
                    let b = loc.div[q][k];
                    match free[k] {
                        Some(ck) => {
                            emit(pq, ck, b);
                            emit(ck, pq, b);
                        }
                        None => rhs[pq] -= b * self.u_value[dofs[k]],
                    }
                }
            }
        }
        if self.gauge {
            let g = self.n_u + self.n_p;
            for (i, &m) in self.lumped.iter().enumerate() {
                emit(self.n_u + i, g, m);
                emit(g, self.n_u + i, m);
            }
        }
    }

    /// Expand a reduced solution vector to raw velocity and per-vertex pressure.
    fn expand(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let velocity = (0..self.u_index.len())
            .map(|d| match self.free(d) {
                Some(i) => x[i],
                None => self.u_value[d],
            })
            .collect();
        let pressure = self.p_index.iter().map(|&i| x[self.n_u + i]).collect();
        let mult = if self.gauge { x[self.n_u + self.n_p] } else { 0.0 };
        (velocity, pressure, mult)
    }
}

/// True when every boundary edge outside the periodic sides has its normal
/// velocity prescribed at all three nodes, so pressure is defined only up to
/// a constant.
fn normal_velocity_fully_constrained(
    mesh: &TriMesh,
    layout: &P2Layout,
    periodic: &bool,
    u_index: &[u32],
) -> bool {
    let periodic_tags: &[Tag] = match (*periodic, mesh.periodic_shift) {
        (true, Some(s)) => match Axis::from_shift(s) {
            Axis::Y => &[Tag::Top, Tag::Bottom],
            Axis::X => &[Tag::GammaL, Tag::GammaR],
        },
        _ => &[],
    };
    let mut any = false;
    for (&(a, b), tag) in &mesh.boundary {
        if periodic_tags.contains(tag) {
            continue;
        }
        any = true;
        let d = geom::sub(mesh.vertices[b], mesh.vertices[a]);
        let n = [d[1], -d[0]];
        let nn = geom::norm(n);
        let mid = layout.num_vertices + layout.table.index[&(a, b)];
        for node in [a, b, mid] {
            for c in 0..2 {
                if (n[c] / nn).abs() > 1e-12 && u_index[2 * node + c] != FIXED {
                    return false;
                }
            }
        }
    }
    any
}
