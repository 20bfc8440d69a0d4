use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::bail;
use clap::{Parser, Subcommand, ValueEnum};
use confluence::par::Execution;
use confluence::pipeline::SweepParam;
use confluence::ConfluenceConfig;

mod output;

use output::{Manifest, RenderOptions};

#[derive(Parser)]
#[command(name = "confluence", version, about = "Design the junction between two periodic lattices by Stokes flow topology optimization")]
struct Cli {
    /// Run single-threaded.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct OutputArgs {
    /// Results directory (the CONFLUENCE_OUT environment variable takes precedence).
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,

    /// Replication of the joined field in the tiled render, as NxM.
    #[arg(long, default_value = "4x4", value_parser = parse_tile)]
    tile: (u32, u32),

    /// Render resolution in pixels per cell.
    #[arg(long, default_value_t = 128)]
    png_res: u32,
}

impl OutputArgs {
    fn dir(&self) -> PathBuf {
        std::env::var_os("CONFLUENCE_OUT")
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| self.out_dir.clone())
    }

    fn render(&self) -> RenderOptions {
        RenderOptions {
            tile: self.tile,
            res: self.png_res,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one morphing problem.
    Morph {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Repeat a run over several values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// delta, s, alpha_max or theta
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        /// Runs executed at the same time.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Run an oracle suite and print a pass/fail table.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Gradient,
    Convergence,
    Invariants,
}

fn parse_tile(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let n: u32 = a.trim().parse().map_err(|_| format!("bad tile count `{a}`"))?;
    let m: u32 = b.trim().parse().map_err(|_| format!("bad tile count `{b}`"))?;
    if n == 0 || m == 0 {
        return Err("tile counts must be positive".into());
    }
    Ok((n, m))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Morph { config, out } => morph(&config, &out, exec),
        Command::Sweep {
            config,
            param,
            values,
            jobs,
            out,
        } => sweep(&config, &param, &values, jobs, &out, exec),
        Command::Verify { suite } => verify(suite, exec),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load(path: &Path) -> anyhow::Result<ConfluenceConfig> {
    Ok(ConfluenceConfig::load(path)?)
}

fn morph(config: &Path, out: &OutputArgs, exec: Execution) -> anyhow::Result<bool> {
    let cfg = load(config)?;
    let dir = out.dir();
    let mut manifest = Manifest::start(&cfg);
    let result = confluence::run_confluence(&cfg, exec);
    let ok = output::record_run(&dir, &cfg, result, &out.render(), &mut manifest);
    manifest.finish(&dir)?;
    if let Some(e) = &manifest.error {
        eprintln!("error: {e}");
    }
    Ok(ok)
}

fn sweep(config: &Path, param: &str, values: &[f64], jobs: usize, out: &OutputArgs, exec: Execution) -> anyhow::Result<bool> {
    let cfg = load(config)?;
    let param: SweepParam = param.parse()?;
    if values.is_empty() {
        bail!("--values needs at least one value");
    }
    let dir = out.dir();
    let entries = confluence::sweep(&cfg, param, values, jobs.max(1), exec)?;
    let mut sheet = Vec::new();
    let mut summary = Vec::new();
    let mut all_ok = true;
    for entry in entries {
        let name = format!("{}={}", serde_json::to_value(param)?.as_str().unwrap_or("param"), entry.value);
        let run_dir = dir.join(&name);
        let run_cfg = param.apply(&cfg, entry.value);
        let mut manifest = Manifest::start(&run_cfg);
        if let Ok(r) = &entry.outcome {
            sheet.push(output::render_joined(r, out.png_res));
        }
        let ok = output::record_run(&run_dir, &run_cfg, entry.outcome, &out.render(), &mut manifest);
        manifest.finish(&run_dir)?;
        all_ok &= ok;
        summary.push(serde_json::json!({
            "value": entry.value,
            "dir": name,
            "ok": ok,
            "error": manifest.error,
        }));
        match &manifest.error {
            None => println!("{name}: ok"),
            Some(e) => println!("{name}: FAILED: {e}"),
        }
    }
    if !sheet.is_empty() {
        confluence::io::save_png(&confluence::io::contact_sheet(&sheet), &dir.join("sheet.png"))?;
    }
    let text = serde_json::to_string_pretty(&serde_json::json!({ "param": param, "runs": summary }))?;
    confluence::io::atomic_write(&dir.join("sweep.json"), text.as_bytes())?;
    Ok(all_ok)
}

fn verify(suite: Suite, exec: Execution) -> anyhow::Result<bool> {
    use confluence::verify;
    let mut ok = true;
    match suite {
        Suite::Gradient => {
            let rows = verify::gradient_check(0.1, 12, 2024, exec)?;
            println!("{:>6} {:>16} {:>16} {:>10}  status", "node", "analytic", "finite diff", "rel err");
            for r in rows {
                let pass = r.relative_error <= 1e-4;
                ok &= pass;
                println!(
                    "{:>6} {:>16.8e} {:>16.8e} {:>10.2e}  {}",
                    r.node,
                    r.analytic,
                    r.finite_difference,
                    r.relative_error,
                    if pass { "PASS" } else { "FAIL" }
                );
            }
        }
        Suite::Convergence => {
            let rows = verify::convergence_study(&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], exec)?;
            println!("{:>8} {:>14} {:>14}", "h", "velocity L2", "pressure L2");
            for r in &rows {
                println!("{:>8.5} {:>14.6e} {:>14.6e}", r.h, r.velocity_l2, r.pressure_l2);
            }
            for (k, (ru, rp)) in verify::rates(&rows).iter().enumerate() {
                println!("rates {} -> {}: velocity {ru:.3}, pressure {rp:.3}", k, k + 1);
            }
            let (ou, op) = verify::fitted_orders(&rows);
            let pu = (ou - 3.0).abs() <= 0.3;
            let pp = (op - 2.0).abs() <= 0.3;
            ok = pu && pp;
            println!("fitted velocity order {ou:.3} (3 +- 0.3): {}", if pu { "PASS" } else { "FAIL" });
            println!("fitted pressure order {op:.3} (2 +- 0.3): {}", if pp { "PASS" } else { "FAIL" });
        }
        Suite::Invariants => {
            for c in verify::invariants(exec)? {
                ok &= c.passed;
                println!("{:<44} {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
            }
        }
    }
    Ok(ok)
}
