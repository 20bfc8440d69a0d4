//! End-to-end acceptance criteria. Each criterion prints one PASS/FAIL line.
//! The process exits non-zero on a failure only when `ACCEPTANCE_STRICT` is
//! set, so the report always completes.

use std::sync::Arc;
use std::time::Instant;

use confluence::adapt;
use confluence::config::{ConfluenceConfig, VelocityBc};
use confluence::material::{AlphaParams, RveKind};
use confluence::metrics;
use confluence::mesh::LateralBc;
use confluence::par::Execution;
use confluence::pipeline::{self, CellStage, ConfluenceResult, Iterate, LoopExit};
use confluence::verify;

const EXEC: Execution = Execution::Parallel;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

/// Per-iterate invariants gathered by the run observer.
#[derive(Default)]
struct Audit {
    iterates: usize,
    box_violations: usize,
    volume_excess: f64,
    fixed_violations: usize,
    j_increases: usize,
    last: Option<(usize, f64)>,
    /// Last max nodal change of each cycle.
    final_change: Vec<f64>,
}

impl Audit {
    fn observe(&mut self, it: &Iterate<'_>) {
        self.iterates += 1;
        let values = &it.rho.values;
        self.box_violations += values.iter().filter(|v| !(0.0..=1.0).contains(*v)).count();
        let budget = it.beta * it.design.total_area;
        self.volume_excess = self.volume_excess.max(it.rho.integral() - budget);
        for (v, &c) in it.design.class_of.iter().enumerate() {
            if let Some(f) = it.design.fixed[c] {
                if values[v] != f {
                    self.fixed_violations += 1;
                }
            }
        }
        if let Some((cycle, j)) = self.last {
            if cycle == it.cycle && it.record.j > j {
                self.j_increases += 1;
            }
        }
        if self.final_change.len() <= it.cycle {
            self.final_change.resize(it.cycle + 1, f64::NAN);
        }
        self.final_change[it.cycle] = it.record.max_change;
        self.last = Some((it.cycle, it.record.j));
    }

    fn feasible(&self) -> bool {
        self.box_violations == 0 && self.volume_excess <= 1e-8 && self.fixed_violations == 0
    }

    fn describe(&self) -> String {
        format!(
            "{} iterates, box violations {}, volume excess {:.1e}, fixed violations {}, J increases {}",
            self.iterates, self.box_violations, self.volume_excess.max(0.0), self.fixed_violations, self.j_increases
        )
    }
}

struct Run {
    result: ConfluenceResult,
    audit: Audit,
    seconds: f64,
}

fn run(label: &str, cfg: &ConfluenceConfig, cells: Option<Arc<CellStage>>) -> confluence::Result<Run> {
    let start = Instant::now();
    let mut audit = Audit::default();
    let result = pipeline::run_confluence_with(cfg, cells, EXEC, &mut |it| audit.observe(it))?;
    let seconds = start.elapsed().as_secs_f64();
    eprintln!(
        "  [{label}] {:.0} s, cardinalities {:?}, exit {:?}",
        seconds, result.cardinalities, result.exit
    );
    Ok(Run { result, audit, seconds })
}

fn bd_config() -> ConfluenceConfig {
    let mut cfg = ConfluenceConfig::pair(RveKind::B, RveKind::D);
    cfg.mesh.h0 = 1.0 / 30.0;
    cfg
}

fn criterion_mms() -> confluence::Result<Outcome> {
    let start = Instant::now();
    let rows = verify::convergence_study(&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], EXEC)?;
    let secs = start.elapsed().as_secs_f64();
    let (ou, op) = verify::fitted_orders(&rows);
    let ok = (ou - 3.0).abs() <= 0.3 && (op - 2.0).abs() <= 0.3 && secs < 60.0;
    Ok(outcome(ok, format!("velocity order {ou:.3}, pressure order {op:.3}, {secs:.1} s")))
}

fn criterion_alpha() -> Outcome {
    let checks = verify::alpha_checks(&AlphaParams::default());
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let mid = checks.iter().find(|c| c.name == "alpha(0.5) closed form").map_or(String::new(), |c| c.detail.clone());
    if failed.is_empty() {
        outcome(true, format!("{} checks, alpha(0.5) {mid}", checks.len()))
    } else {
        outcome(false, format!("failed: {}", failed.join(", ")))
    }
}

fn criterion_gradient() -> confluence::Result<Outcome> {
    let start = Instant::now();
    let rows = verify::gradient_check(0.1, 12, 2024, EXEC)?;
    let secs = start.elapsed().as_secs_f64();
    let worst = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let ok = rows.len() >= 10 && worst <= 1e-4 && secs < 120.0;
    Ok(outcome(ok, format!("{} nodes, worst relative error {worst:.2e}, {secs:.1} s", rows.len())))
}

fn criterion_optimizer(bd: &Run, cfg: &ConfluenceConfig) -> Outcome {
    let r = &bd.result;
    let topt = cfg.tolerances.topt;
    let by_topt = r.cycles.iter().zip(&bd.audit.final_change).all(|(c, &m)| {
        c.converged && c.iterations <= cfg.tolerances.max_inner && m < topt
    });
    let iters: Vec<usize> = r.cycles.iter().map(|c| c.iterations).collect();
    let ok = bd.audit.feasible() && bd.audit.j_increases == 0 && by_topt;
    outcome(ok, format!("{}; inner iterations per cycle {iters:?}", bd.audit.describe()))
}

fn criterion_loop(bd: &Run, cfg: &ConfluenceConfig) -> Outcome {
    let r = &bd.result;
    let formula = r.cycles.iter().all(|c| {
        let want = (c.next_cells as f64 - c.cells as f64).abs() / c.cells as f64;
        c.err_c == want && adapt::err_c(c.cells, c.next_cells) == want
    });
    let last = r.cycles.last().expect("at least one cycle");
    let exit_ok = match r.exit {
        LoopExit::Stagnation => last.err_c <= cfg.tolerances.ctol,
        LoopExit::MaxCycles => r.cycles.len() == cfg.tolerances.kmax,
    };
    let card = &r.cardinalities;
    let (peak_at, peak) = card.iter().enumerate().fold((0, 0), |m, (i, &c)| if c > m.1 { (i, c) } else { m });
    let shape = peak_at <= 3 && *card.last().unwrap() < peak;
    let ok = formula && exit_ok && shape;
    outcome(ok, format!("errC exact {formula}, exit {:?}, cardinalities {card:?} (peak at k = {peak_at})", r.exit))
}

fn criterion_matching(bd: &Run, cfg: &ConfluenceConfig) -> confluence::Result<Outcome> {
    let r = &bd.result;
    let cells = r.cells.clone();
    // exactness against the imposed traces
    let mesh = &*r.rho_y.mesh;
    let mut exact = true;
    for (tag, side) in [(confluence::mesh::Tag::GammaL, &r.matching.left), (confluence::mesh::Tag::GammaR, &r.matching.right)] {
        let t = side.density.as_ref().expect("density BC on");
        for v in mesh.tagged_vertices(tag) {
            exact &= r.rho_y.values[v] == t.eval_at(mesh.vertices[v]).clamp(0.0, 1.0);
        }
    }
    let jump_on = metrics::trace_jump(&r.rho_y, &cells.left, &cells.right);

    let mut off = cfg.clone();
    off.matching.enforce_density_bc = false;
    let off = run("no density BC", &off, Some(cells.clone()))?;
    let jump_off = metrics::trace_jump(&off.result.rho_y, &cells.left, &cells.right);

    let mut xonly = cfg.clone();
    xonly.matching.enforce_velocity_bc = VelocityBc::XOnly;
    let xonly = run("x-only velocity BC", &xonly, Some(cells.clone()))?;
    let jump_x = metrics::trace_jump(&xonly.result.rho_y, &cells.left, &cells.right);

    let degrade = jump_off >= 10.0 * jump_on && jump_off > 1e-3;
    let ok = exact && degrade && off.audit.feasible() && xonly.audit.feasible();
    Ok(outcome(
        ok,
        format!(
            "constrained nodes exact {exact}; max trace jump with BC {jump_on:.1e}, without density BC {jump_off:.3}, x-only velocity {jump_x:.1e}"
        ),
    ))
}

fn criterion_bar() -> confluence::Result<Outcome> {
    let mut cfg = ConfluenceConfig::pair(RveKind::Bar, RveKind::Bar);
    cfg.mesh.h0 = 1.0 / 40.0;
    let r = run("Bar-Bar", &cfg, None)?;
    let geom = cfg.cells.left.geometry(cfg.mesh.cell_h())?;
    let overlap = metrics::channel_iou(&r.result.rho_y, &geom, &cfg.morph, 200);
    let ok = overlap >= 0.9 && r.seconds < 300.0;
    Ok(outcome(ok, format!("channel overlap {overlap:.3}, {:.0} s", r.seconds)))
}

fn criterion_connectivity() -> confluence::Result<Outcome> {
    let mut cfg = ConfluenceConfig::pair(RveKind::A, RveKind::B);
    cfg.mesh.h0 = 1.0 / 30.0;
    let r = run("A-B", &cfg, None)?;
    let cells = &r.result.cells;
    let before_l = metrics::solid_spans(&cells.left, 0.5);
    let spans = metrics::solid_spans(&r.result.rho_y, 0.5);
    Ok(outcome(
        spans,
        format!("solid spans GammaL to GammaR: {spans} (left cell alone spans its own sides: {before_l})"),
    ))
}

fn criterion_robustness(bd: &Run, cfg: &ConfluenceConfig) -> confluence::Result<Outcome> {
    let spec = cfg.morph;
    let mut fields = Vec::new();
    for a in [2.5e4, 2.5e6] {
        let mut c = cfg.clone();
        c.physics.alpha_max = a;
        fields.push((a, run(&format!("alpha_max {a:e}"), &c, None)?.result.rho_y));
    }
    fields.insert(1, (cfg.physics.alpha_max, bd.result.rho_y.clone()));
    let mut ious = Vec::new();
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            ious.push(metrics::solid_iou(&fields[i].1, &fields[j].1, &spec, 200));
        }
    }
    let iou_ok = ious.iter().all(|&v| v >= 0.8);

    let cells = bd.result.cells.clone();
    let mut areas = Vec::new();
    for delta in [0.3, 0.5, 0.7] {
        let r = if delta == cfg.morph.delta {
            None
        } else {
            let mut c = cfg.clone();
            c.morph.delta = delta;
            Some(run(&format!("delta {delta}"), &c, Some(cells.clone()))?)
        };
        let res = r.as_ref().map_or(&bd.result, |r| &r.result);
        let mut c = cfg.clone();
        c.morph.delta = delta;
        areas.push(metrics::modified_area(&res.joined, &cells.left, &cells.right, &c.morph, 200));
    }
    let monotone = areas.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
    Ok(outcome(
        iou_ok && monotone,
        format!("alpha_max pairwise IoU [{}]; modified area at delta 0.3/0.5/0.7 [{}]", fmt(&ious), fmt(&areas)),
    ))
}

fn criterion_inclined() -> confluence::Result<Outcome> {
    let mut details = Vec::new();
    let mut ok = true;
    for (theta, l, r, name) in [
        (std::f64::consts::FRAC_PI_4, RveKind::A, RveKind::B, "pi/4"),
        (std::f64::consts::FRAC_PI_3, RveKind::D, RveKind::C, "pi/3"),
    ] {
        let mut cfg = ConfluenceConfig::pair(l, r);
        cfg.mesh.h0 = 1.0 / 30.0;
        cfg.morph.theta = theta;
        cfg.morph.delta = 0.4;
        cfg.morph.lateral_bc = LateralBc::Neumann;
        cfg.physics.alpha_max = 2.5e6;
        let run = run(&format!("theta {name}"), &cfg, None)?;
        let pairs = run.result.rho_y.mesh.periodic_pairs.len();
        let jump = metrics::trace_jump(&run.result.rho_y, &run.result.cells.left, &run.result.cells.right);
        let good = pairs == 0 && run.audit.feasible() && run.audit.j_increases == 0 && jump <= 1e-12;
        ok &= good;
        details.push(format!("theta {name}: periodic pairs {pairs}, {}, trace jump {jump:.1e}", run.audit.describe()));
    }
    Ok(outcome(ok, details.join("; ")))
}

fn report(n: usize, name: &str, o: confluence::Result<Outcome>, failures: &mut usize) {
    let o = o.unwrap_or_else(|e| outcome(false, format!("error: {e}")));
    if !o.passed {
        *failures += 1;
    }
    println!("{} [{n:>2}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; only a name
    // filter would matter and there is nothing to filter.
    let mut failures = 0;
    report(1, "Stokes-Brinkman convergence", criterion_mms(), &mut failures);
    report(2, "interpolation law", Ok(criterion_alpha()), &mut failures);
    report(3, "gradient fidelity", criterion_gradient(), &mut failures);

    let cfg = bd_config();
    match run("B-D", &cfg, None) {
        Ok(bd) => {
            report(4, "optimizer feasibility and descent", Ok(criterion_optimizer(&bd, &cfg)), &mut failures);
            report(5, "adaptation loop semantics", Ok(criterion_loop(&bd, &cfg)), &mut failures);
            report(6, "matching conditions", criterion_matching(&bd, &cfg), &mut failures);
            report(7, "identity sanity", criterion_bar(), &mut failures);
            report(8, "connectivity creation", criterion_connectivity(), &mut failures);
            report(9, "sensitivity robustness", criterion_robustness(&bd, &cfg), &mut failures);
        }
        Err(e) => {
            for (n, name) in [
                (4, "optimizer feasibility and descent"),
                (5, "adaptation loop semantics"),
                (6, "matching conditions"),
            ] {
                report(n, name, Err(confluence::Error::InvalidInput(format!("B-D run failed: {e}"))), &mut failures);
            }
            report(7, "identity sanity", criterion_bar(), &mut failures);
            report(8, "connectivity creation", criterion_connectivity(), &mut failures);
            report(9, "sensitivity robustness", Err(confluence::Error::InvalidInput("B-D run failed".into())), &mut failures);
        }
    }
    report(10, "non-Cartesian mode", criterion_inclined(), &mut failures);

    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
