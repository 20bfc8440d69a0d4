//! Oracle suites shared by the command line and the acceptance tests.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adapt;
use crate::config::ConfluenceConfig;
use crate::error::Result;
use crate::fem::quadrature::degree5;
use crate::fem::{self, BodyForce, Discretization, Element, FunctionSpace, P2Layout};
use crate::geom::Rect;
use crate::material::{AlphaParams, DensityField, RveKind};
use crate::mesh::{generate_rect, MorphSpec, Tag};
use crate::optimize;
use crate::par::Execution;
use crate::pipeline;

/// One row of the manufactured-solution study.
#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub h: f64,
    pub velocity_l2: f64,
    pub pressure_l2: f64,
}

fn mms_velocity(x: [f64; 2]) -> [f64; 2] {
    [
        PI * (PI * x[0]).sin() * (PI * x[1]).cos(),
        -PI * (PI * x[0]).cos() * (PI * x[1]).sin(),
    ]
}

fn mms_pressure(x: [f64; 2]) -> f64 {
    (PI * x[0]).cos()
}

/// Brinkman coefficient used in the study: `rho = 1` with `alpha_min = 1`.
pub const MMS_ALPHA: AlphaParams = AlphaParams {
    alpha_max: 10.0,
    alpha_min: 1.0,
    phi: 0.6,
};

/// Solve the manufactured problem on the unit square with full Dirichlet data
/// and return the L2 errors.
pub fn manufactured_errors(h: f64, mu: f64, exec: Execution) -> Result<ConvergenceRow> {
    let mesh = Arc::new(generate_rect(Rect::new(0.0, 1.0, 0.0, 1.0), h)?);
    let layout = Arc::new(P2Layout::new(&mesh));
    let mut space = FunctionSpace::vector_p2(mesh.clone(), layout);
    for tag in [Tag::GammaL, Tag::GammaR, Tag::Top, Tag::Bottom] {
        space = space.apply_dirichlet(tag, [true, true], mms_velocity)?;
    }
    let disc = Discretization::new(space)?;
    let rho = DensityField::constant(mesh.clone(), 1.0)?;
    let alpha = MMS_ALPHA.alpha_min;
    let force = move |x: [f64; 2]| {
        let u = mms_velocity(x);
        let k = 2.0 * PI * PI * mu + alpha;
        [k * u[0] - PI * (PI * x[0]).sin(), k * u[1]]
    };
    let sys = fem::assemble(&disc, &rho, mu, &MMS_ALPHA, BodyForce::Field(&force), exec)?;
    let sol = fem::solve_saddle(&disc, &sys)?;
    let rule = degree5();
    let (mut eu, mut ep) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let el = Element::new(mesh.corners(t));
        for (l, w) in rule.points.iter().zip(rule.weights) {
            let x = el.point(*l);
            let (u, ue) = (sol.velocity_at(t, *l), mms_velocity(x));
            eu += w * el.area * ((u[0] - ue[0]).powi(2) + (u[1] - ue[1]).powi(2));
            ep += w * el.area * (sol.pressure_at(t, *l) - mms_pressure(x)).powi(2);
        }
    }
    Ok(ConvergenceRow {
        h,
        velocity_l2: eu.sqrt(),
        pressure_l2: ep.sqrt(),
    })
}

/// Observed orders between consecutive rows.
pub fn rates(rows: &[ConvergenceRow]) -> Vec<(f64, f64)> {
    rows.windows(2)
        .map(|w| {
            let r = (w[0].h / w[1].h).ln();
            (
                (w[0].velocity_l2 / w[1].velocity_l2).ln() / r,
                (w[0].pressure_l2 / w[1].pressure_l2).ln() / r,
            )
        })
        .collect()
}

/// Least-squares slopes of `log(error)` against `log(h)` over all rows.
pub fn fitted_orders(rows: &[ConvergenceRow]) -> (f64, f64) {
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let slope = |ys: Vec<f64>| {
        let ym = ys.iter().sum::<f64>() / n;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
        let den: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
        num / den
    };
    (
        slope(rows.iter().map(|r| r.velocity_l2.ln()).collect()),
        slope(rows.iter().map(|r| r.pressure_l2.ln()).collect()),
    )
}

pub fn convergence_study(hs: &[f64], exec: Execution) -> Result<Vec<ConvergenceRow>> {
    hs.iter().map(|&h| manufactured_errors(h, 1.0, exec)).collect()
}

/// `count` distinct indices drawn from `pool` with a fixed seed.
pub fn sample_nodes(pool: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample(&mut rng, pool.len(), count.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Analytic and finite-difference derivative of the objective at one node.
#[derive(Clone, Copy, Debug)]
pub struct GradientRow {
    pub node: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

/// Compare the nodal sensitivity with central differences of the objective
/// (step `1e-5`) at `count` random interior nodes of a morphing mesh with
/// spacing `h`, joining cells B and D under full matching conditions. The
/// density is random in [0.2, 0.8] away from the constrained sides.
pub fn gradient_check(h: f64, count: usize, seed: u64, exec: Execution) -> Result<Vec<GradientRow>> {
    let mut cfg = ConfluenceConfig::pair(RveKind::B, RveKind::D);
    cfg.mesh.h0 = h;
    cfg.mesh.cell_h = Some(h.min(1.0 / 20.0));
    let cells = pipeline::prepare_cells(&cfg, exec)?;
    let mc = pipeline::assemble_matching_conditions(
        &cells.flow_left,
        &cells.flow_right,
        &cells.left,
        &cells.right,
        &cfg.morph,
        cfg.matching,
    )?;
    let mesh = Arc::new(pipeline::morph_mesh(&cfg.morph, h)?);
    let problem = pipeline::build_problem(mesh.clone(), &mc, &cfg, 1.0, exec)?;
    let d = &problem.design;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes: Vec<f64> = d
        .fixed
        .iter()
        .map(|f| f.unwrap_or_else(|| rng.random_range(0.2..0.8)))
        .collect();
    let rho = DensityField::new(mesh.clone(), d.to_vertices(&classes))?;
    let state = &problem.state;
    let u = state.solve(&rho)?;
    let grad = optimize::sensitivity(&u, &rho, &state.alpha, exec);
    let boundary: std::collections::BTreeSet<usize> = mesh.boundary.keys().flat_map(|&(a, b)| [a, b]).collect();
    let pool: Vec<usize> = (0..mesh.num_vertices()).filter(|v| !boundary.contains(v)).collect();
    let eps = 1e-5;
    sample_nodes(&pool, count, seed)
        .into_iter()
        .map(|node| {
            let j_at = |delta: f64| -> Result<f64> {
                let mut r = rho.clone();
                r.values[node] += delta;
                let ur = state.solve(&r)?;
                Ok(state.objective(&ur, &r))
            };
            let fd = (j_at(eps)? - j_at(-eps)?) / (2.0 * eps);
            let analytic = grad[node];
            Ok(GradientRow {
                node,
                analytic,
                finite_difference: fd,
                relative_error: (fd - analytic).abs() / analytic.abs().max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}

/// Outcome of one named property check.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

/// Interpolation-law checks: exact end values, the mid value, and strict
/// monotonicity and convexity on a 1000-point sample.
pub fn alpha_checks(p: &AlphaParams) -> Vec<Check> {
    let a0 = p.alpha(0.0);
    let a1 = p.alpha(1.0);
    let expected = p.alpha_max + (p.alpha_min - p.alpha_max) * (1.0 + p.phi) * 0.5 / (0.5 + p.phi);
    let mid = (p.alpha(0.5) - expected).abs() / expected.abs();
    let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| p.alpha(x)).collect();
    let monotone = vals.windows(2).all(|w| w[1] < w[0]);
    let convex = vals.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9 * w[0].abs());
    let fd = xs[1..999]
        .iter()
        .map(|&x| {
            let h = 1e-6;
            let num = (p.alpha(x + h) - p.alpha(x - h)) / (2.0 * h);
            (num - p.dalpha(x)).abs() / p.dalpha(x).abs()
        })
        .fold(0.0, f64::max);
    vec![
        check("alpha(0) = alpha_max", a0 == p.alpha_max, format!("{a0:e}")),
        check("alpha(1) = alpha_min", a1 == p.alpha_min, format!("{a1:e}")),
        check("alpha(0.5) closed form", mid <= 1e-12, format!("relative error {mid:.2e}")),
        check("alpha strictly decreasing", monotone, "1000 samples".into()),
        check("alpha convex", convex, "1000 samples".into()),
        check("dalpha matches central differences", fd <= 1e-6, format!("max relative error {fd:.2e}")),
    ]
}

/// Property checks that need no long runs.
pub fn invariants(exec: Execution) -> Result<Vec<Check>> {
    let mut out = alpha_checks(&AlphaParams::default());

    let spec = MorphSpec::default();
    let dom = crate::material::domains(&spec);
    let cell = |r: Rect, c: f64| -> Result<DensityField> { DensityField::constant(Arc::new(generate_rect(r, 0.05)?), c) };
    let (l, r) = (cell(dom.left, 0.35)?, cell(dom.right, 0.35)?);
    let y = DensityField::constant(Arc::new(pipeline::morph_mesh(&spec, 0.05)?), 0.35)?;
    let j1 = crate::material::join_densities(&l, &r, &y, &spec, 0.05)?;
    let j2 = crate::material::join_densities(&l, &r, &y, &spec, 0.05)?;
    let exact = j1.field.values.iter().all(|&v| v == 0.35);
    out.push(check("join exact for constant fields", exact, format!("{} nodes", j1.field.values.len())));
    out.push(check("join idempotent", j1.field.values == j2.field.values, String::new()));

    // one projected step from a random density under a random gradient
    let mesh = Arc::new(pipeline::morph_mesh(&spec, 0.1)?);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fixed: Vec<Option<f64>> = (0..mesh.num_vertices())
        .map(|v| (mesh.vertices[v][0] <= spec.x_left() + 1e-12).then_some(0.25))
        .collect();
    let design = optimize::Design::new(&mesh, &fixed)?;
    let cfg = ConfluenceConfig::default();
    let layout = Arc::new(P2Layout::new(&mesh));
    let problem = optimize::OptProblem {
        state: crate::flow::StateSolver {
            disc: Discretization::new(FunctionSpace::vector_p2(mesh.clone(), layout))?,
            mu: 1.0,
            alpha: cfg.physics.alpha(),
            force: [1.0, 0.0],
            exec,
        },
        design,
        beta: 0.3,
        move_cap: 0.2,
    };
    let start: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.random_range(0.0..1.0)).collect();
    let rho = problem.project(&DensityField::new(mesh.clone(), start)?)?;
    let grad: Vec<f64> = (0..mesh.num_vertices()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let next = optimize::step(&problem, &rho, &grad)?;
    let boxed = next.values.iter().all(|v| (0.0..=1.0).contains(v));
    let vol = next.integral() - problem.beta * mesh.total_area();
    let kept = (0..mesh.num_vertices()).all(|v| fixed[v].is_none_or(|f| next.values[v] == f));
    let moved = next
        .values
        .iter()
        .zip(&rho.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    out.push(check("step keeps box bounds", boxed, String::new()));
    out.push(check("step keeps volume", vol <= 1e-8, format!("excess {vol:.2e}")));
    out.push(check("step keeps fixed densities", kept, String::new()));
    out.push(check("step respects move cap", moved <= 0.2 + 1e-12, format!("max change {moved:.3}")));

    let e = [adapt::err_c(1000, 1010), adapt::err_c(7, 7), adapt::err_c(1000, 1500)];
    out.push(check(
        "errC formula",
        (e[0] - 0.01).abs() < 1e-15 && e[1] == 0.0 && e[2] == 0.5,
        format!("{e:?}"),
    ));

    let lin = DensityField::new(mesh.clone(), mesh.vertices.iter().map(|p| p[0] + 0.5).collect())?;
    let eta = adapt::zz_estimate(&lin, exec).into_iter().fold(0.0, f64::max);
    out.push(check("recovery exact on linear fields", eta <= 1e-12, format!("max {eta:.1e}")));

    let mut m = (*mesh).clone();
    let mut ok = true;
    for round in 0..3 {
        let marks: Vec<usize> = (0..m.num_triangles()).filter(|t| (t * 7 + round) % 5 == 0).collect();
        m = crate::mesh::refine(&m, &marks);
        ok &= m.check().is_ok();
    }
    out.push(check("refinement stays conforming and periodic", ok, format!("{} triangles", m.num_triangles())));
    Ok(out)
}
