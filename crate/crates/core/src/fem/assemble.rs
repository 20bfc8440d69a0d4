//! Element integrals and global assembly of the Taylor-Hood system.

use faer::sparse::{Pair, SparseColMat, SymbolicSparseColMat, Triplet};

use super::basis::{p2_values, Element};
use super::quadrature::degree5;
use super::Discretization;
use crate::error::{Error, Result};
use crate::geom::Point;
use crate::material::{AlphaParams, DensityField};
use crate::par::{self, Execution};

/// Volumetric forcing.
#[derive(Clone, Copy)]
pub enum BodyForce<'a> {
    Constant([f64; 2]),
    Field(&'a (dyn Fn(Point) -> [f64; 2] + Sync)),
}

impl BodyForce<'_> {
    #[inline]
    pub fn at(&self, x: Point) -> [f64; 2] {
        match self {
            BodyForce::Constant(f) => *f,
            BodyForce::Field(g) => g(x),
        }
    }
}

/// Element contributions in local numbering (velocity DOF `2 * node + comp`).
#[derive(Clone, Debug)]
pub struct LocalSystem {
    /// Scalar P2 stiffness scaled by the viscosity.
    pub viscous: [[f64; 6]; 6],
    /// Scalar P2 mass weighted by the Brinkman coefficient.
    pub brinkman: [[f64; 6]; 6],
    /// `-int psi_q d(phi_i)/dx_c` at `[q][2 i + c]`.
    pub div: [[f64; 12]; 3],
    pub load: [f64; 12],
}

impl LocalSystem {
    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        if i % 2 == j % 2 {
            self.viscous[i / 2][j / 2] + self.brinkman[i / 2][j / 2]
        } else {
            0.0
        }
    }
}

/// Integrate one element with the degree-5 rule. `rho` holds the three
/// vertex densities.
pub fn local_system(
    el: &Element,
    rho: [f64; 3],
    mu: f64,
    alpha: &AlphaParams,
    force: BodyForce<'_>,
) -> LocalSystem {
    let rule = degree5();
    let mut out = LocalSystem {
        viscous: [[0.0; 6]; 6],
        brinkman: [[0.0; 6]; 6],
        div: [[0.0; 12]; 3],
        load: [0.0; 12],
    };
    for (l, w) in rule.points.iter().zip(rule.weights) {
        let wa = w * el.area;
        let phi = p2_values(*l);
        let grad = el.p2_grads(*l);
        let r = l[0] * rho[0] + l[1] * rho[1] + l[2] * rho[2];
        let al = alpha.alpha(r);
        let f = force.at(el.point(*l));
        for i in 0..6 {
            for j in i..6 {
                out.viscous[i][j] += wa * mu * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
                out.brinkman[i][j] += wa * al * phi[i] * phi[j];
            }
            for c in 0..2 {
                out.load[2 * i + c] += wa * f[c] * phi[i];
                for q in 0..3 {
                    out.div[q][2 * i + c] -= wa * l[q] * grad[i][c];
                }
            }
        }
    }
    for i in 0..6 {
        for j in 0..i {
            out.viscous[i][j] = out.viscous[j][i];
            out.brinkman[i][j] = out.brinkman[j][i];
        }
    }
    out
}

/// Assembled reduced saddle-point system.
pub struct SaddleSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
}

/// Unreduced global blocks, for inspection and tests.
pub struct RawBlocks {
    pub viscous: SparseColMat<usize, f64>,
    pub brinkman: SparseColMat<usize, f64>,
    /// Unweighted vector mass matrix.
    pub mass: SparseColMat<usize, f64>,
    pub div: SparseColMat<usize, f64>,
    pub load: Vec<f64>,
}

fn check_density(disc: &Discretization, rho: &DensityField, mu: f64) -> Result<()> {
    if !std::sync::Arc::ptr_eq(&disc.velocity.mesh, &rho.mesh) && *disc.velocity.mesh != *rho.mesh {
        return Err(Error::invalid("density lives on a different mesh"));
    }
    if let Some((i, v)) = rho.values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("density {v} at node {i} outside [0, 1]")));
    }
    if !(mu > 0.0) {
        return Err(Error::invalid(format!("viscosity must be positive (got {mu})")));
    }
    Ok(())
}

pub(crate) fn local_systems(
    disc: &Discretization,
    rho: &DensityField,
    mu: f64,
    alpha: &AlphaParams,
    force: BodyForce<'_>,
    exec: Execution,
) -> Vec<LocalSystem> {
    let mesh = &*disc.velocity.mesh;
    par::map_indices(exec, mesh.num_triangles(), |t| {
        let [a, b, c] = mesh.triangles[t];
        let el = Element::new(mesh.corners(t));
        local_system(&el, [rho.values[a], rho.values[b], rho.values[c]], mu, alpha, force)
    })
}

/// Assemble the constrained saddle system of `disc`.
pub fn assemble(
    disc: &Discretization,
    rho: &DensityField,
    mu: f64,
    alpha: &AlphaParams,
    force: BodyForce<'_>,
    exec: Execution,
) -> Result<SaddleSystem> {
    check_density(disc, rho, mu)?;
    alpha.validate()?;
    let locals = local_systems(disc, rho, mu, alpha, force, exec);
    let n = disc.size();
    let mut rhs = vec![0.0; n];
    let mut vals = Vec::with_capacity(disc.nnz_hint());
    let cached = disc.pattern.get();
    let mut pairs = Vec::new();
    disc.scatter(&locals, &mut rhs, |r, c, v| {
        vals.push(v);
        if cached.is_none() {
            pairs.push(Pair { row: r, col: c });
        }
    });
    let pattern = match cached {
        Some(p) => p,
        None => {
            let built = SymbolicSparseColMat::try_new_from_indices(n, n, &pairs)
                .map_err(|e| Error::Solver(format!("sparsity pattern: {e:?}")))?;
            let _ = disc.pattern.set(built);
            disc.pattern.get().expect("pattern just set")
        }
    };
    let matrix = SparseColMat::new_from_argsort(pattern.0.clone(), &pattern.1, &vals)
        .map_err(|e| Error::Solver(format!("matrix values: {e:?}")))?;
    Ok(SaddleSystem { matrix, rhs })
}

/// Assemble the global blocks without constraints.
pub fn assemble_blocks(
    disc: &Discretization,
    rho: &DensityField,
    mu: f64,
    alpha: &AlphaParams,
    force: BodyForce<'_>,
) -> Result<RawBlocks> {
    check_density(disc, rho, mu)?;
    let mesh = &*disc.velocity.mesh;
    let layout = &*disc.velocity.layout;
    let locals = local_systems(disc, rho, mu, alpha, force, Execution::Sequential);
    let nu = 2 * layout.num_nodes();
    let np = layout.num_vertices;
    let (mut tv, mut tb, mut tm, mut td) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut load = vec![0.0; nu];
    let ones = AlphaParams {
        alpha_max: 1.0,
        alpha_min: 1.0,
        phi: 1.0,
    };
    for (t, loc) in locals.iter().enumerate() {
        let nodes = layout.element_nodes(mesh, t);
        let [a, b, c] = mesh.triangles[t];
        let el = Element::new(mesh.corners(t));
        let mass = local_system(&el, [0.0; 3], 1.0, &ones, BodyForce::Constant([0.0; 2])).brinkman;
        for i in 0..6 {
            for cc in 0..2 {
                let gi = 2 * nodes[i] + cc;
                load[gi] += loc.load[2 * i + cc];
                for j in 0..6 {
                    let gj = 2 * nodes[j] + cc;
                    tv.push(Triplet::new(gi, gj, loc.viscous[i][j]));
                    tb.push(Triplet::new(gi, gj, loc.brinkman[i][j]));
                    tm.push(Triplet::new(gi, gj, mass[i][j]));
                }
            }
        }
        for (q, &v) in [a, b, c].iter().enumerate() {
            for k in 0..12 {
                td.push(Triplet::new(v, 2 * nodes[k / 2] + k % 2, loc.div[q][k]));
            }
        }
    }
    let build = |n, m, t: &[Triplet<usize, usize, f64>]| {
        SparseColMat::try_new_from_triplets(n, m, t).map_err(|e| Error::Solver(format!("{e:?}")))
    };
    Ok(RawBlocks {
        viscous: build(nu, nu, &tv)?,
        brinkman: build(nu, nu, &tb)?,
        mass: build(nu, nu, &tm)?,
        div: build(np, nu, &td)?,
        load,
    })
}
