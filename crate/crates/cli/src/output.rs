//! Result directories and the run manifest.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use confluence::io::{self, GrayImage};
use confluence::geom::Rect;
use confluence::pipeline::CycleRecord;
use confluence::{metrics, ConfluenceConfig, ConfluenceResult, Error};
use serde::Serialize;

pub struct RenderOptions {
    pub tile: (u32, u32),
    pub res: u32,
}

#[derive(Serialize)]
pub struct StageStatus {
    pub stage: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Serialize)]
pub struct Summary {
    pub beta: f64,
    pub exit: confluence::pipeline::LoopExit,
    pub cardinalities: Vec<usize>,
    pub cycles: Vec<CycleRecord>,
    pub final_j: f64,
    pub volume_fraction: f64,
    pub intermediate_fraction: f64,
    pub solid_spans: bool,
    pub trace_jump: f64,
    pub raw_flux: [f64; 2],
    pub flux_balance: confluence::pipeline::FluxBalance,
}

/// Everything needed to reproduce and audit one run.
#[derive(Serialize)]
pub struct Manifest {
    pub version: &'static str,
    pub config: ConfluenceConfig,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub outputs: Vec<String>,
    pub stages: Vec<StageStatus>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

impl Manifest {
    pub fn start(cfg: &ConfluenceConfig) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            started_unix: now(),
            finished_unix: None,
            outputs: Vec::new(),
            stages: Vec::new(),
            summary: None,
            error: None,
        }
    }

    fn fail(&mut self, stage: &str, e: &dyn std::fmt::Display) {
        self.stages.push(StageStatus {
            stage: stage.to_string(),
            ok: false,
            message: Some(e.to_string()),
        });
        self.error.get_or_insert_with(|| e.to_string());
    }

    fn ok(&mut self, stage: &str) {
        self.stages.push(StageStatus {
            stage: stage.to_string(),
            ok: true,
            message: None,
        });
    }

    /// Written last, atomically.
    pub fn finish(&mut self, dir: &Path) -> confluence::Result<()> {
        self.finished_unix = Some(now());
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        io::atomic_write(&dir.join("manifest.json"), text.as_bytes())
    }
}

fn bounds(field: &confluence::material::DensityField, y: Option<(f64, f64)>) -> Rect {
    let v = &field.mesh.vertices;
    let fold = |f: fn(f64, f64) -> f64, k: usize, init: f64| v.iter().fold(init, |m, p| f(m, p[k]));
    let (y0, y1) = y.unwrap_or((fold(f64::min, 1, f64::MAX), fold(f64::max, 1, f64::MIN)));
    Rect::new(fold(f64::min, 0, f64::MAX), fold(f64::max, 0, f64::MIN), y0, y1)
}

/// Render of the joined field over its whole domain.
pub fn render_joined(r: &ConfluenceResult, res: u32) -> GrayImage {
    io::render_density(&r.joined.field, bounds(&r.joined.field, None), res)
}

/// Write the artifacts of a finished (or failed) run into `dir`; returns
/// whether every stage succeeded.
pub fn record_run(
    dir: &Path,
    cfg: &ConfluenceConfig,
    result: confluence::Result<ConfluenceResult>,
    render: &RenderOptions,
    manifest: &mut Manifest,
) -> bool {
    let r = match result {
        Ok(r) => r,
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => stage.to_string(),
                _ => "run".to_string(),
            };
            manifest.fail(&stage, &e);
            return false;
        }
    };
    for s in ["import", "flux", "matching", "optimize", "adapt", "join"] {
        manifest.ok(s);
    }
    let spec = cfg.morph;
    let last = r.history.last();
    manifest.summary = Some(Summary {
        beta: r.beta,
        exit: r.exit,
        cardinalities: r.cardinalities.clone(),
        cycles: r.cycles.clone(),
        final_j: last.map_or(f64::NAN, |x| x.j),
        volume_fraction: r.rho_y.volume_fraction(),
        intermediate_fraction: metrics::intermediate_fraction(&r.rho_y),
        solid_spans: metrics::solid_spans(&r.rho_y, 0.5),
        trace_jump: metrics::trace_jump(&r.rho_y, &r.cells.left, &r.cells.right),
        raw_flux: r.matching.raw_flux,
        flux_balance: r.matching.balance,
    });
    let write = |name: &str, bytes: &[u8]| io::atomic_write(&dir.join(name), bytes);
    let morph_bounds = bounds(&r.rho_y, Some((spec.y_l, spec.y_u)));
    let steps: Vec<(&str, Box<dyn Fn() -> confluence::Result<()> + '_>)> = vec![
        ("rho_Y.vtk", Box::new(|| write("rho_Y.vtk", io::density_vtk(&r.rho_y, "rho_Y").as_bytes()))),
        (
            "rho_LYR.vtk",
            Box::new(|| write("rho_LYR.vtk", io::density_vtk(&r.joined.field, "rho_LYR").as_bytes())),
        ),
        ("flow_Y.vtk", Box::new(|| write("flow_Y.vtk", io::flow_vtk(&r.state, "flow_Y").as_bytes()))),
        ("history.csv", Box::new(|| write("history.csv", &io::history_csv(&r.history)?))),
        (
            "tiles.png",
            Box::new(|| {
                let img = io::tile(&render_joined(&r, render.res), render.tile.0, render.tile.1);
                io::save_png(&img, &dir.join("tiles.png"))
            }),
        ),
        (
            "rho_Y.png",
            Box::new(|| io::save_png(&io::render_density(&r.rho_y, morph_bounds, render.res), &dir.join("rho_Y.png"))),
        ),
        ("config.toml", Box::new(|| write("config.toml", cfg.to_toml_string()?.as_bytes()))),
    ];
    let mut ok = true;
    for (name, f) in steps {
        match f() {
            Ok(()) => manifest.outputs.push(name.to_string()),
            Err(e) => {
                manifest.fail("output", &format!("{name}: {e}"));
                ok = false;
            }
        }
    }
    if ok {
        manifest.ok("output");
    }
    ok
}
