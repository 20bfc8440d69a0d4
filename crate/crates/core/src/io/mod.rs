//! File formats: legacy VTK, PNG renders, PGM rasters and CSV histories.

mod render;
mod vtk;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::material::Raster;
use crate::optimize::OptRecord;

pub use image::GrayImage;
pub use render::{contact_sheet, render_density, save_png, tile};
pub use vtk::{density_vtk, flow_vtk, indicator_vtk};

/// Write through a temporary sibling and rename, so readers never observe a
/// partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Parse an ASCII (P2) PGM image into a raster in [0, 1].
pub fn parse_pgm(text: &str) -> Result<Raster> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let bad = |msg: &str| Error::invalid(format!("PGM: {msg}"));
    if tokens.next() != Some("P2") {
        return Err(bad("only the ASCII P2 variant is supported"));
    }
    let mut num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| bad(&format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|_| bad(&format!("malformed {what}")))
    };
    let (w, h, max) = (num("width")?, num("height")?, num("maximum value")?);
    if max == 0 {
        return Err(bad("maximum value must be positive"));
    }
    let mut data = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let v = num("pixel value")?;
        if v > max {
            return Err(bad(&format!("pixel value {v} exceeds the maximum {max}")));
        }
        data.push(v as f64 / max as f64);
    }
    Raster::new(w, h, data)
}

pub fn read_pgm(path: &Path) -> Result<Raster> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&text)
}

/// Optimization history with columns `iter, J, C, max_change, mesh_cells`.
pub fn history_csv(records: &[OptRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<history>", e))?;
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}
