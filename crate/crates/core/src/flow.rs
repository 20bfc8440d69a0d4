//! Auxiliary flux problems, the state solve and the energy objective.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::{self, BodyForce, Discretization, Element, FlowSolution, FunctionSpace, P2Layout};
use crate::fem::quadrature::degree5;
use crate::material::{AlphaParams, DensityField};
use crate::par::{self, Execution};

/// Flow through one lattice domain driven by a constant body force.
#[derive(Clone, Debug)]
pub struct AuxiliaryProblem {
    pub rho: DensityField,
    pub force: [f64; 2],
    pub mu: f64,
    pub alpha: AlphaParams,
}

/// Solve with traction-free conditions on the whole boundary; the Brinkman
/// term makes the problem coercive without any essential condition.
pub fn solve_flux(problem: &AuxiliaryProblem, exec: Execution) -> Result<FlowSolution> {
    let mesh = problem.rho.mesh.clone();
    let layout = Arc::new(P2Layout::new(&mesh));
    let mut space = FunctionSpace::vector_p2(mesh, layout);
    space.periodic = false;
    let disc = Discretization::new(space)?;
    let sys = fem::assemble(
        &disc,
        &problem.rho,
        problem.mu,
        &problem.alpha,
        BodyForce::Constant(problem.force),
        exec,
    )?;
    fem::solve_saddle(&disc, &sys)
}

/// Repeated state solves on a fixed discretization.
pub struct StateSolver {
    pub disc: Discretization,
    pub mu: f64,
    pub alpha: AlphaParams,
    pub force: [f64; 2],
    pub exec: Execution,
}

impl StateSolver {
    pub fn solve(&self, rho: &DensityField) -> Result<FlowSolution> {
        let sys = fem::assemble(
            &self.disc,
            rho,
            self.mu,
            &self.alpha,
            BodyForce::Constant(self.force),
            self.exec,
        )?;
        fem::solve_saddle(&self.disc, &sys)
    }

    pub fn objective(&self, u: &FlowSolution, rho: &DensityField) -> f64 {
        objective_j(u, rho, self.mu, &self.alpha, self.force, self.exec)
    }
}

/// `(a_rho(u, u), F(u))` by the degree-5 rule.
pub fn energy_parts(
    u: &FlowSolution,
    rho: &DensityField,
    mu: f64,
    alpha: &AlphaParams,
    f: [f64; 2],
    exec: Execution,
) -> (f64, f64) {
    let mesh = &*u.mesh;
    let rule = degree5();
    let parts = par::map_indices(exec, mesh.num_triangles(), |t| {
        let el = Element::new(mesh.corners(t));
        let (mut a, mut load) = (0.0, 0.0);
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let wa = w * el.area;
            let v = u.velocity_at(t, *l);
            let g = u.velocity_gradient_at(&el, t, *l);
            let grad2 = g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1];
            let r = rho.at(t, *l);
            a += wa * (mu * grad2 + alpha.alpha(r) * (v[0] * v[0] + v[1] * v[1]));
            load += wa * (f[0] * v[0] + f[1] * v[1]);
        }
        (a, load)
    });
    parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
}

/// Total potential energy `1/2 a_rho(u, u) - F(u)`.
pub fn objective_j(
    u: &FlowSolution,
    rho: &DensityField,
    mu: f64,
    alpha: &AlphaParams,
    f: [f64; 2],
    exec: Execution,
) -> f64 {
    let (a, load) = energy_parts(u, rho, mu, alpha, f, exec);
    0.5 * a - load
}

/// Area-weighted mean velocity.
pub fn mean_velocity(u: &FlowSolution) -> [f64; 2] {
    let mesh = &*u.mesh;
    let rule = degree5();
    let mut s = [0.0; 2];
    let mut area = 0.0;
    for t in 0..mesh.num_triangles() {
        let a = mesh.area(t);
        area += a;
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let v = u.velocity_at(t, *l);
            s[0] += w * a * v[0];
            s[1] += w * a * v[1];
        }
    }
    [s[0] / area, s[1] / area]
}
