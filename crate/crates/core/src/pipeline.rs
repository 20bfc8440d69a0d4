//! The full morphing run: cell densities, auxiliary flows, matching
//! conditions, the optimize/adapt loop and the final join.

use std::sync::Arc;

use serde::Serialize;

use crate::adapt::{self, AdaptParams};
use crate::config::{ConfluenceConfig, MatchingFlags};
use crate::error::{Error, Result};
use crate::fem::{Discretization, FlowSolution, FunctionSpace, P2Layout};
use crate::flow::{self, AuxiliaryProblem, StateSolver};
use crate::geom::{self, Rect, Segment};
use crate::material::{
    build_rve, domains, extract_trace, join_densities, volume_fraction_beta, DensityField, JoinedDensity, Trace,
    TraceSource,
};
use crate::mesh::{generate_parallelogram, generate_rect, pair_lateral, LateralBc, MorphSpec, Tag, TriMesh};
use crate::optimize::{self, Design, OptProblem, OptRecord};
use crate::par::{self, Execution};

/// Densities and auxiliary flows of the two lattices.
#[derive(Clone, Debug)]
pub struct CellStage {
    pub left: DensityField,
    pub right: DensityField,
    pub flow_left: FlowSolution,
    pub flow_right: FlowSolution,
}

/// Build both cell densities and solve the two flux problems.
pub fn prepare_cells(cfg: &ConfluenceConfig, exec: Execution) -> Result<CellStage> {
    let d = domains(&cfg.morph);
    let h = cfg.mesh.cell_h();
    let build = |rect: Rect, cell: &crate::config::CellConfig| -> Result<DensityField> {
        let mesh = Arc::new(generate_rect(rect, h)?);
        build_rve(&cell.geometry(h)?, mesh)
    };
    let left = build(d.left, &cfg.cells.left).map_err(|e| e.in_stage("import"))?;
    let right = build(d.right, &cfg.cells.right).map_err(|e| e.in_stage("import"))?;
    let problem = |rho: &DensityField| AuxiliaryProblem {
        rho: rho.clone(),
        force: cfg.force_vector(),
        mu: cfg.physics.mu,
        alpha: cfg.physics.alpha(),
    };
    let (pl, pr) = (problem(&left), problem(&right));
    let (fl, fr) = par::join(exec, || flow::solve_flux(&pl, exec), || flow::solve_flux(&pr, exec));
    Ok(CellStage {
        flow_left: fl.map_err(|e| e.in_stage("flux"))?,
        flow_right: fr.map_err(|e| e.in_stage("flux"))?,
        left,
        right,
    })
}

/// Prescribed data on one side of the morphing region.
#[derive(Clone, Debug)]
pub struct SideConditions {
    pub segment: Segment,
    /// Velocity components, `None` where the component is left free.
    pub velocity: [Option<Trace>; 2],
    pub density: Option<Trace>,
}

impl SideConditions {
    pub fn components(&self) -> [bool; 2] {
        [self.velocity[0].is_some(), self.velocity[1].is_some()]
    }

    pub fn velocity_at(&self, p: geom::Point) -> [f64; 2] {
        let c = |k: usize| self.velocity[k].as_ref().map_or(0.0, |t| t.eval_at(p));
        [c(0), c(1)]
    }

    /// Flux of the prescribed velocity through the side along `n`.
    fn flux(&self, n: geom::Point) -> f64 {
        (0..2)
            .filter_map(|k| self.velocity[k].as_ref().map(|t| n[k] * t.integral()))
            .sum()
    }
}

/// How the two prescribed fluxes were made equal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxBalance {
    /// No velocity data, or the lateral sides let fluid through.
    NotNeeded,
    /// Both sides rescaled to the mean flux.
    Scaled,
    /// A uniform normal velocity added on each side.
    Shifted,
}

#[derive(Clone, Debug)]
pub struct MatchingConditions {
    pub left: SideConditions,
    pub right: SideConditions,
    pub flags: MatchingFlags,
    /// Fluxes through the two sides before balancing.
    pub raw_flux: [f64; 2],
    pub balance: FluxBalance,
}

/// Extract the traces of the cell flows and densities on the two sides of
/// the morphing region. When the velocity data fixes the normal component
/// and the lateral sides are periodic, incompressibility requires equal
/// fluxes through both sides; the traces are then balanced to the mean flux.
pub fn assemble_matching_conditions(
    u_l: &FlowSolution,
    u_r: &FlowSolution,
    rho_l: &DensityField,
    rho_r: &DensityField,
    spec: &MorphSpec,
    flags: MatchingFlags,
) -> Result<MatchingConditions> {
    crate::material::check_containment(spec)?;
    let comps = flags.enforce_velocity_bc.components();
    let side = |u: &FlowSolution, rho: &DensityField, segment: Segment| SideConditions {
        segment,
        velocity: [0, 1].map(|k| comps[k].then(|| extract_trace(TraceSource::Velocity(u, k), segment))),
        density: flags
            .enforce_density_bc
            .then(|| extract_trace(TraceSource::Density(rho), segment)),
    };
    let mut left = side(u_l, rho_l, spec.gamma_l());
    let mut right = side(u_r, rho_r, spec.gamma_r());
    let n = [spec.theta.sin(), -spec.theta.cos()];
    let n = if spec.is_cartesian() { [1.0, 0.0] } else { n };
    let raw_flux = [left.flux(n), right.flux(n)];
    let normal_fixed = (0..2).all(|k| comps[k] || n[k] == 0.0) && comps.iter().any(|&c| c);
    let balance = if !normal_fixed || spec.lateral_bc == LateralBc::Neumann {
        FluxBalance::NotNeeded
    } else {
        let target = 0.5 * (raw_flux[0] + raw_flux[1]);
        if raw_flux[0] * raw_flux[1] > 0.0 {
            for (s, f) in [(&mut left, raw_flux[0]), (&mut right, raw_flux[1])] {
                for t in s.velocity.iter_mut().flatten() {
                    t.scale(target / f);
                }
            }
            FluxBalance::Scaled
        } else {
            for (s, f) in [(&mut left, raw_flux[0]), (&mut right, raw_flux[1])] {
                let len = s.segment.length();
                // spread the deficit over the constrained components along n
                let w: f64 = (0..2).filter(|&k| comps[k]).map(|k| n[k] * n[k]).sum();
                for k in 0..2 {
                    if let Some(t) = s.velocity[k].as_mut() {
                        let c = (target - f) / len * n[k] / w;
                        for p in &mut t.pieces {
                            for v in &mut p.2 {
                                *v += c;
                            }
                        }
                    }
                }
            }
            FluxBalance::Shifted
        }
    };
    Ok(MatchingConditions {
        left,
        right,
        flags,
        raw_flux,
        balance,
    })
}

/// Initial mesh of the morphing region with its lateral condition applied.
pub fn morph_mesh(spec: &MorphSpec, h: f64) -> Result<TriMesh> {
    let m = if spec.is_cartesian() {
        generate_rect(Rect::new(spec.x_left(), spec.x_right(), spec.y_l, spec.y_u), h)?
    } else {
        generate_parallelogram(spec, h)?
    };
    pair_lateral(&m, spec)
}

/// Prescribed densities at the vertices of `mesh` (all `None` when the
/// density is left free).
pub fn fixed_densities(mesh: &TriMesh, mc: &MatchingConditions) -> Vec<Option<f64>> {
    let mut out = vec![None; mesh.num_vertices()];
    for (tag, side) in [(Tag::GammaL, &mc.left), (Tag::GammaR, &mc.right)] {
        if let Some(t) = &side.density {
            for v in mesh.tagged_vertices(tag) {
                out[v] = Some(t.eval_at(mesh.vertices[v]).clamp(0.0, 1.0));
            }
        }
    }
    out
}

/// Velocity space of the morphing region with the matching conditions.
pub fn state_solver(mesh: Arc<TriMesh>, mc: &MatchingConditions, cfg: &ConfluenceConfig, exec: Execution) -> Result<StateSolver> {
    let layout = Arc::new(P2Layout::new(&mesh));
    let mut space = FunctionSpace::vector_p2(mesh, layout);
    for (tag, side) in [(Tag::GammaL, &mc.left), (Tag::GammaR, &mc.right)] {
        let comps = side.components();
        if comps.iter().any(|&c| c) {
            space = space.apply_dirichlet(tag, comps, |p| side.velocity_at(p))?;
        }
    }
    Ok(StateSolver {
        disc: Discretization::new(space)?,
        mu: cfg.physics.mu,
        alpha: cfg.physics.alpha(),
        force: cfg.force_vector(),
        exec,
    })
}

/// Optimization problem on one mesh of the morphing region.
pub fn build_problem(
    mesh: Arc<TriMesh>,
    mc: &MatchingConditions,
    cfg: &ConfluenceConfig,
    beta: f64,
    exec: Execution,
) -> Result<OptProblem> {
    let design = Design::new(&mesh, &fixed_densities(&mesh, mc))?;
    Ok(OptProblem {
        state: state_solver(mesh, mc, cfg, exec)?,
        design,
        beta,
        move_cap: cfg.tolerances.move_cap,
    })
}

/// One optimize/adapt cycle.
#[derive(Clone, Debug, Serialize)]
pub struct CycleRecord {
    pub cycle: usize,
    pub cells: usize,
    pub next_cells: usize,
    pub err_c: f64,
    pub estimate: f64,
    pub iterations: usize,
    pub solves: usize,
    pub converged: bool,
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopExit {
    Stagnation,
    MaxCycles,
}

/// Accepted iterate passed to an observer.
pub struct Iterate<'a> {
    pub cycle: usize,
    pub record: &'a OptRecord,
    pub rho: &'a DensityField,
    pub design: &'a Design,
    pub beta: f64,
}

pub struct ConfluenceResult {
    pub cells: Arc<CellStage>,
    pub matching: MatchingConditions,
    pub beta: f64,
    /// Optimized density on the last mesh it was optimized on.
    pub rho_y: DensityField,
    pub state: FlowSolution,
    pub joined: JoinedDensity,
    /// Accepted iterates of all cycles; `iter` counts across cycles.
    pub history: Vec<OptRecord>,
    pub cycles: Vec<CycleRecord>,
    /// Mesh sizes `#T^0, #T^1, ...`.
    pub cardinalities: Vec<usize>,
    pub exit: LoopExit,
}

pub fn run_confluence(cfg: &ConfluenceConfig, exec: Execution) -> Result<ConfluenceResult> {
    run_confluence_with(cfg, None, exec, &mut |_| {})
}

/// Run with optional precomputed cell data and an observer of every
/// accepted iterate.
pub fn run_confluence_with(
    cfg: &ConfluenceConfig,
    cells: Option<Arc<CellStage>>,
    exec: Execution,
    observer: &mut dyn FnMut(&Iterate<'_>),
) -> Result<ConfluenceResult> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let cells = match cells {
        Some(c) => c,
        None => Arc::new(prepare_cells(cfg, exec)?),
    };
    let spec = &cfg.morph;
    let mc = assemble_matching_conditions(
        &cells.flow_left,
        &cells.flow_right,
        &cells.left,
        &cells.right,
        spec,
        cfg.matching,
    )
    .map_err(|e| e.in_stage("matching"))?;
    let beta = cfg
        .physics
        .beta
        .unwrap_or_else(|| volume_fraction_beta(&cells.left, &cells.right, spec));

    let ap = AdaptParams {
        tol: cfg.tolerances.tol,
        max_refine_level: cfg.mesh.max_refine_level,
        element_budget: cfg.mesh.element_budget,
        h0: cfg.mesh.h0,
    };
    let base = morph_mesh(spec, cfg.mesh.h0).map_err(|e| e.in_stage("mesh"))?;
    let mut mesh = Arc::new(base.clone());
    let mut rho = DensityField::constant(mesh.clone(), cfg.physics.rho0)?;
    let mut cardinalities = vec![mesh.num_triangles()];
    let mut cycles = Vec::new();
    let mut history: Vec<OptRecord> = Vec::new();
    let mut exit = LoopExit::MaxCycles;
    let mut last = None;
    for k in 0..cfg.tolerances.kmax {
        let problem = build_problem(mesh.clone(), &mc, cfg, beta, exec).map_err(|e| e.in_stage("optimize"))?;
        let offset = history.last().map_or(0, |r| r.iter + 1);
        let mut watch = |rec: &OptRecord, r: &DensityField| {
            observer(&Iterate {
                cycle: k,
                record: rec,
                rho: r,
                design: &problem.design,
                beta,
            })
        };
        let out = optimize::run_optimize_observed(
            &problem,
            &rho,
            cfg.tolerances.topt,
            cfg.tolerances.max_inner,
            &mut watch,
        )
        .map_err(|e| e.in_stage("optimize"))?;
        history.extend(out.history.records.iter().map(|r| OptRecord {
            iter: r.iter + offset,
            ..r.clone()
        }));
        let eta = adapt::zz_estimate(&out.rho, exec);
        let targets = adapt::target_generations(&mesh, &eta, Some(&out.rho), &ap);
        let adapted = adapt::mark_and_adapt(&base, &mesh, &targets, &ap);
        let next = adapted.mesh.num_triangles();
        let err_c = adapt::err_c(mesh.num_triangles(), next);
        cycles.push(CycleRecord {
            cycle: k,
            cells: mesh.num_triangles(),
            next_cells: next,
            err_c,
            estimate: adapt::total_estimate(&eta),
            iterations: out.history.records.len() - 1,
            solves: out.history.trials + 1,
            converged: out.history.converged,
            truncated: adapted.truncated,
        });
        cardinalities.push(next);
        log::info!(
            "cycle {k}: {} cells, {} iterations, J = {:.6e}, errC = {err_c:.4}",
            mesh.num_triangles(),
            out.history.records.len() - 1,
            out.history.records.last().map_or(f64::NAN, |r| r.j)
        );
        let stagnated = err_c <= cfg.tolerances.ctol;
        let new_mesh = Arc::new(adapted.mesh);
        rho = out.rho.transfer(new_mesh.clone());
        last = Some(out);
        if stagnated {
            exit = LoopExit::Stagnation;
            break;
        }
        mesh = new_mesh;
    }
    if exit == LoopExit::MaxCycles {
        log::warn!("adaptation loop reached kmax = {} without stagnation", cfg.tolerances.kmax);
    }
    let out = last.ok_or_else(|| Error::invalid("no optimization cycle was run"))?;
    let joined = join_densities(&cells.left, &cells.right, &out.rho, spec, cfg.mesh.join_h())
        .map_err(|e| e.in_stage("join"))?;
    Ok(ConfluenceResult {
        cells,
        matching: mc,
        beta,
        rho_y: out.rho,
        state: out.state,
        joined,
        history,
        cycles,
        cardinalities,
        exit,
    })
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Delta,
    S,
    AlphaMax,
    Theta,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(Self::Delta),
            "s" => Ok(Self::S),
            "alpha_max" => Ok(Self::AlphaMax),
            "theta" => Ok(Self::Theta),
            _ => Err(Error::invalid(format!(
                "unknown sweep parameter `{s}` (expected delta, s, alpha_max or theta)"
            ))),
        }
    }
}

impl SweepParam {
    pub fn apply(self, cfg: &ConfluenceConfig, value: f64) -> ConfluenceConfig {
        let mut c = cfg.clone();
        match self {
            Self::Delta => c.morph.delta = value,
            Self::S => c.morph.s = value,
            Self::AlphaMax => c.physics.alpha_max = value,
            Self::Theta => c.morph.theta = value,
        }
        c
    }

    /// Whether every run of the sweep shares the cell stage.
    fn shares_cells(self, cfg: &ConfluenceConfig) -> bool {
        matches!(self, Self::Delta | Self::S) && cfg.morph.is_cartesian()
    }
}

pub struct SweepEntry {
    pub value: f64,
    pub outcome: Result<ConfluenceResult>,
}

/// Independent runs over `values`, at most `jobs` at a time. Failures of
/// single runs are kept in their entries.
pub fn sweep(
    cfg: &ConfluenceConfig,
    param: SweepParam,
    values: &[f64],
    jobs: usize,
    exec: Execution,
) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::invalid("sweep needs at least one value"));
    }
    let shared = if param.shares_cells(cfg) {
        Some(Arc::new(prepare_cells(cfg, exec)?))
    } else {
        None
    };
    Ok(par::map_bounded(jobs, values.to_vec(), |value| {
        let c = param.apply(cfg, value);
        let outcome = run_confluence_with(&c, shared.clone(), exec, &mut |_| {});
        if let Err(e) = &outcome {
            log::warn!("sweep value {value} failed: {e}");
        }
        SweepEntry { value, outcome }
    }))
}
