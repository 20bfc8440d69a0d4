//! Projected-gradient density update with a single volume constraint.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::quadrature::degree5;
use crate::fem::{FlowSolution, UnionFind};
use crate::flow::StateSolver;
use crate::material::{AlphaParams, DensityField};
use crate::par::{self, Execution};

/// Design variables: one value per periodic class of density nodes.
#[derive(Clone, Debug)]
pub struct Design {
    /// Class of each vertex.
    pub class_of: Vec<usize>,
    /// Integral of the class's P1 basis functions.
    pub mass: Vec<f64>,
    /// Prescribed value of each class, if any.
    pub fixed: Vec<Option<f64>>,
    pub total_area: f64,
}

impl Design {
    /// `fixed` gives per-vertex prescribed densities; conflicting values in one
    /// class are averaged.
    pub fn new(mesh: &crate::mesh::TriMesh, fixed: &[Option<f64>]) -> Result<Self> {
        let n = mesh.num_vertices();
        if fixed.len() != n {
            return Err(Error::invalid("fixed-value list does not match the mesh"));
        }
        let mut uf = UnionFind::new(n);
        for &(a, b) in &mesh.periodic_pairs {
            uf.union(a, b);
        }
        let mut root_class = vec![usize::MAX; n];
        let mut class_of = vec![0; n];
        let mut nc = 0;
        for v in 0..n {
            let r = uf.find(v);
            if root_class[r] == usize::MAX {
                root_class[r] = nc;
                nc += 1;
            }
            class_of[v] = root_class[r];
        }
        let mut mass = vec![0.0; nc];
        for t in 0..mesh.num_triangles() {
            let a3 = mesh.area(t) / 3.0;
            for &v in &mesh.triangles[t] {
                mass[class_of[v]] += a3;
            }
        }
        let mut sum = vec![0.0; nc];
        let mut cnt = vec![0u32; nc];
        for (v, f) in fixed.iter().enumerate() {
            if let Some(x) = f {
                if !(0.0..=1.0).contains(x) {
                    return Err(Error::invalid(format!("fixed density {x} at node {v} outside [0, 1]")));
                }
                sum[class_of[v]] += x;
                cnt[class_of[v]] += 1;
            }
        }
        let fixed = (0..nc)
            .map(|c| (cnt[c] > 0).then(|| sum[c] / cnt[c] as f64))
            .collect();
        Ok(Self {
            class_of,
            mass,
            fixed,
            total_area: mesh.total_area(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.mass.len()
    }

    pub fn to_classes(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes()];
        for (v, &c) in self.class_of.iter().enumerate() {
            out[c] = values[v];
        }
        out
    }

    pub fn to_vertices(&self, classes: &[f64]) -> Vec<f64> {
        self.class_of.iter().map(|&c| classes[c]).collect()
    }

    /// Sum a per-vertex vector over classes.
    pub fn reduce(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes()];
        for (v, &c) in self.class_of.iter().enumerate() {
            out[c] += values[v];
        }
        out
    }

    pub fn volume(&self, classes: &[f64]) -> f64 {
        classes.iter().zip(&self.mass).map(|(r, m)| r * m).sum()
    }
}

/// `y` projected onto `{lo <= rho <= hi, sum(mass * rho) <= budget}` in the
/// mass-weighted norm: `rho = clip(y - lambda, lo, hi)` with the smallest
/// feasible `lambda >= 0`.
pub fn project_volume(y: &[f64], lo: &[f64], hi: &[f64], mass: &[f64], budget: f64) -> Result<Vec<f64>> {
    let at = |lam: f64| -> Vec<f64> {
        y.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| (v - lam).clamp(l, h))
            .collect()
    };
    let vol = |r: &[f64]| r.iter().zip(mass).map(|(a, m)| a * m).sum::<f64>();
    let r0 = at(0.0);
    if vol(&r0) <= budget {
        return Ok(r0);
    }
    let floor: f64 = lo.iter().zip(mass).map(|(a, m)| a * m).sum();
    if floor > budget + 1e-12 {
        return Err(Error::Bracket(format!(
            "lower bounds alone use volume {floor:.6e} above the budget {budget:.6e}"
        )));
    }
    let (mut a, mut b) = (0.0_f64, 1.0_f64);
    let span = y.iter().zip(lo).map(|(v, l)| v - l).fold(0.0_f64, f64::max);
    b = b.max(span);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if vol(&at(mid)) > budget {
            a = mid;
        } else {
            b = mid;
        }
        if b - a < 1e-15 * (1.0 + b) {
            break;
        }
    }
    Ok(at(b))
}

/// Problem data for the density optimization on a fixed mesh.
pub struct OptProblem {
    pub state: StateSolver,
    pub design: Design,
    pub beta: f64,
    pub move_cap: f64,
}

impl OptProblem {
    fn budget(&self) -> f64 {
        self.beta * self.design.total_area
    }

    /// Feasible density closest to `rho` (fixed classes set, volume projected).
    pub fn project(&self, rho: &DensityField) -> Result<DensityField> {
        let d = &self.design;
        let y = d.to_classes(&rho.values);
        let lo: Vec<f64> = d.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        let hi: Vec<f64> = d.fixed.iter().map(|f| f.unwrap_or(1.0)).collect();
        let y: Vec<f64> = y.iter().zip(&lo).zip(&hi).map(|((v, l), h)| v.clamp(*l, *h)).collect();
        let r = project_volume(&y, &lo, &hi, &d.mass, self.budget())?;
        DensityField::new(rho.mesh.clone(), d.to_vertices(&r))
    }
}

/// Nodal gradient of the energy: `int 1/2 alpha'(rho) |u|^2 phi_i`.
pub fn sensitivity(u: &FlowSolution, rho: &DensityField, alpha: &AlphaParams, exec: Execution) -> Vec<f64> {
    let mesh = &*rho.mesh;
    let rule = degree5();
    let local = par::map_indices(exec, mesh.num_triangles(), |t| {
        let area = mesh.area(t);
        let mut g = [0.0; 3];
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let v = u.velocity_at(t, *l);
            let dens = 0.5 * alpha.dalpha(rho.at(t, *l)) * (v[0] * v[0] + v[1] * v[1]);
            for k in 0..3 {
                g[k] += w * area * dens * l[k];
            }
        }
        g
    });
    let mut out = vec![0.0; mesh.num_vertices()];
    for (t, g) in local.iter().enumerate() {
        for k in 0..3 {
            out[mesh.triangles[t][k]] += g[k];
        }
    }
    out
}

/// `P(rho - t grad / mass)`: the gradient step in the mass metric projected
/// onto the box, the move cap around `rho` and the volume budget.
fn projected_point(problem: &OptProblem, rho: &[f64], gc: &[f64], t: f64) -> Result<Vec<f64>> {
    let d = &problem.design;
    let cap = problem.move_cap;
    let n = rho.len();
    let (mut lo, mut hi, mut y) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for c in 0..n {
        if let Some(f) = d.fixed[c] {
            lo[c] = f;
            hi[c] = f;
            y[c] = f;
            continue;
        }
        lo[c] = (rho[c] - cap).max(0.0);
        hi[c] = (rho[c] + cap).min(1.0);
        y[c] = rho[c] - t * gc[c] / d.mass[c];
    }
    project_volume(&y, &lo, &hi, &d.mass, problem.budget())
}

/// Step length moving the median free node by the move cap. The gradient
/// spans many orders of magnitude (alpha' is steep near solid), so scaling
/// by its largest entry would freeze most nodes.
fn initial_step(problem: &OptProblem, gc: &[f64]) -> f64 {
    let d = &problem.design;
    let mut mags: Vec<f64> = (0..gc.len())
        .filter(|&c| d.fixed[c].is_none())
        .map(|c| (gc[c] / d.mass[c]).abs())
        .filter(|&v| v > 0.0)
        .collect();
    if mags.is_empty() {
        return 0.0;
    }
    let k = mags.len() / 2;
    problem.move_cap / *mags.select_nth_unstable_by(k, f64::total_cmp).1
}

/// One projected gradient step with the initial step length.
pub fn step(problem: &OptProblem, rho: &DensityField, grad: &[f64]) -> Result<DensityField> {
    let d = &problem.design;
    let rc = d.to_classes(&rho.values);
    let gc = d.reduce(grad);
    let next = projected_point(problem, &rc, &gc, initial_step(problem, &gc))?;
    DensityField::new(rho.mesh.clone(), d.to_vertices(&next))
}

/// One accepted iterate.
#[derive(Clone, Debug, Serialize)]
pub struct OptRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub max_change: f64,
    pub mesh_cells: usize,
}

#[derive(Clone, Debug, Default)]
pub struct OptHistory {
    pub records: Vec<OptRecord>,
    /// Trial steps (state solves after the initial one).
    pub trials: usize,
    pub converged: bool,
}

/// Final state of [`run_optimize`].
pub struct OptOutcome {
    pub rho: DensityField,
    pub state: FlowSolution,
    pub history: OptHistory,
}

/// Spectral projected gradient: iterate until the projected step, and so the
/// largest nodal change, falls below `topt` or `max_inner` trial steps have
/// been taken. Trials are halved along the projected step until J decreases
/// sufficiently, so J never increases.
pub fn run_optimize(problem: &OptProblem, rho0: &DensityField, topt: f64, max_inner: usize) -> Result<OptOutcome> {
    run_optimize_observed(problem, rho0, topt, max_inner, &mut |_, _| {})
}

/// [`run_optimize`], calling `observer` on the projected start and on every
/// accepted iterate.
pub fn run_optimize_observed(
    problem: &OptProblem,
    rho0: &DensityField,
    topt: f64,
    max_inner: usize,
    observer: &mut dyn FnMut(&OptRecord, &DensityField),
) -> Result<OptOutcome> {
    let d = &problem.design;
    let exec = problem.state.exec;
    let mut rho = problem.project(rho0)?;
    let mut u = problem.state.solve(&rho)?;
    let mut j = problem.state.objective(&u, &rho);
    let cells = rho.mesh.num_triangles();
    let mut history = OptHistory::default();
    history.records.push(OptRecord {
        iter: 0,
        j,
        c: rho.integral() / d.total_area,
        max_change: 0.0,
        mesh_cells: cells,
    });
    observer(&history.records[0], &rho);
    let mut rc = d.to_classes(&rho.values);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut t_ref = 0.0;
    let mut accepted = 0;
    while history.trials < max_inner {
        let gc = d.reduce(&sensitivity(&u, &rho, &problem.state.alpha, exec));
        // Barzilai-Borwein length in the mass metric, kept within six
        // decades of the initial one.
        let t = match prev.take() {
            None => {
                t_ref = initial_step(problem, &gc);
                t_ref
            }
            Some((step, g_old)) => {
                let ss: f64 = step.iter().zip(&d.mass).map(|(s, m)| m * s * s).sum();
                let sy: f64 = step.iter().zip(gc.iter().zip(&g_old)).map(|(s, (a, b))| s * (a - b)).sum();
                if sy > 0.0 {
                    (ss / sy).clamp(1e-6 * t_ref, 1e6 * t_ref)
                } else {
                    1e6 * t_ref
                }
            }
        };
        let target = projected_point(problem, &rc, &gc, t)?;
        let dir: Vec<f64> = target.iter().zip(&rc).map(|(a, b)| a - b).collect();
        let slope: f64 = dir.iter().zip(&gc).map(|(a, g)| a * g).sum();
        let full_change = dir.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut lambda = 1.0;
        let mut taken = None;
        while history.trials < max_inner && lambda >= 1e-6 {
            let trial: Vec<f64> = rc.iter().zip(&dir).map(|(r, v)| r + lambda * v).collect();
            let trial_field = DensityField::new(rho.mesh.clone(), d.to_vertices(&trial))?;
            let ut = problem.state.solve(&trial_field)?;
            let jt = problem.state.objective(&ut, &trial_field);
            history.trials += 1;
            if jt <= j + 1e-4 * lambda * slope {
                taken = Some((trial, trial_field, ut, jt));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, field, ut, jt)) = taken else {
            history.converged = lambda < 1e-6;
            break;
        };
        let step: Vec<f64> = trial.iter().zip(&rc).map(|(a, b)| a - b).collect();
        let max_change = step.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prev = Some((step, gc));
        accepted += 1;
        rc = trial;
        rho = field;
        u = ut;
        j = jt;
        history.records.push(OptRecord {
            iter: accepted,
            j,
            c: rho.integral() / d.total_area,
            max_change,
            mesh_cells: cells,
        });
        observer(history.records.last().expect("just pushed"), &rho);
        // Converged when even the unshortened projected step is below TOPT.
        if full_change < topt {
            history.converged = true;
            break;
        }
    }
    Ok(OptOutcome {
        rho,
        state: u,
        history,
    })
}
