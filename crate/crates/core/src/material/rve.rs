//! Parametric unit-cell densities.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DensityField;
use crate::error::{Error, Result};
use crate::geom::{Point, Segment};
use crate::mesh::TriMesh;
use crate::par::{self, Execution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RveKind {
    /// Diagonal cross joining opposite corners.
    A,
    /// Vertical strut at x = 0.6 with a horizontal strut at y = 0.25.
    B,
    /// Vertical strut at x = 0.5 with horizontal struts at y = 0.3 and 0.8.
    C,
    /// Diamond through the edge midpoints.
    D,
    /// Horizontal strut at y = 0.5.
    Bar,
    /// Grayscale image, 1 = white = fluid.
    Raster,
}

/// Grayscale grid in [0, 1], row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::invalid(format!(
                "raster of {width}x{height} with {} samples",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Bilinear sample with periodic wrap; pixel centres sit at
    /// `((i + 0.5) / W, 1 - (j + 0.5) / H)`.
    pub fn sample(&self, p: Point) -> f64 {
        let (w, h) = (self.width as f64, self.height as f64);
        let u = p[0].rem_euclid(1.0) * w - 0.5;
        let v = (1.0 - p[1].rem_euclid(1.0)) * h - 0.5;
        let (i0, j0) = (u.floor(), v.floor());
        let (fu, fv) = (u - i0, v - j0);
        let at = |i: f64, j: f64| {
            let ii = (i as i64).rem_euclid(self.width as i64) as usize;
            let jj = (j as i64).rem_euclid(self.height as i64) as usize;
            self.data[jj * self.width + ii]
        };
        (1.0 - fu) * (1.0 - fv) * at(i0, j0)
            + fu * (1.0 - fv) * at(i0 + 1.0, j0)
            + (1.0 - fu) * fv * at(i0, j0 + 1.0)
            + fu * fv * at(i0 + 1.0, j0 + 1.0)
    }
}

/// A unit-cell density with a linear solid-to-fluid ramp across strut edges.
#[derive(Clone, Debug, PartialEq)]
pub struct RveGeometry {
    pub kind: RveKind,
    /// Solid strut width.
    pub strut_width: f64,
    /// Width of the linear transition band.
    pub ramp: f64,
    pub raster: Option<Arc<Raster>>,
}

impl RveGeometry {
    pub fn new(kind: RveKind, strut_width: f64, ramp: f64) -> Self {
        Self {
            kind,
            strut_width,
            ramp,
            raster: None,
        }
    }

    pub fn raster(raster: Raster) -> Self {
        Self {
            kind: RveKind::Raster,
            strut_width: 0.0,
            ramp: 0.0,
            raster: Some(Arc::new(raster)),
        }
    }

    fn struts(&self) -> Vec<Segment> {
        let s = |a: Point, b: Point| Segment::new(a, b);
        match self.kind {
            RveKind::A => vec![s([0.0, 0.0], [1.0, 1.0]), s([1.0, 0.0], [0.0, 1.0])],
            RveKind::B => vec![s([0.6, 0.0], [0.6, 1.0]), s([0.0, 0.25], [1.0, 0.25])],
            RveKind::C => vec![
                s([0.5, 0.0], [0.5, 1.0]),
                s([0.0, 0.3], [1.0, 0.3]),
                s([0.0, 0.8], [1.0, 0.8]),
            ],
            RveKind::D => vec![
                s([0.5, 0.0], [1.0, 0.5]),
                s([1.0, 0.5], [0.5, 1.0]),
                s([0.5, 1.0], [0.0, 0.5]),
                s([0.0, 0.5], [0.5, 0.0]),
            ],
            RveKind::Bar => vec![s([0.0, 0.5], [1.0, 0.5])],
            RveKind::Raster => Vec::new(),
        }
    }

    /// Distance from `p` to the nearest strut, over periodic images.
    fn strut_distance(&self, struts: &[Segment], p: Point) -> f64 {
        let q = [p[0].rem_euclid(1.0), p[1].rem_euclid(1.0)];
        let mut d = f64::MAX;
        for seg in struts {
            for dx in [-1.0, 0.0, 1.0] {
                for dy in [-1.0, 0.0, 1.0] {
                    d = d.min(seg.distance([q[0] + dx, q[1] + dy]));
                }
            }
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RveKind::Raster => match &self.raster {
                Some(r) if r.width > 0 && r.height > 0 => Ok(()),
                _ => Err(Error::invalid("raster geometry has an empty grid")),
            },
            _ => {
                if !(self.strut_width > 0.0 && self.strut_width < 1.0) || self.ramp < 0.0 {
                    return Err(Error::invalid(format!(
                        "strut width must lie in (0, 1) and ramp be non-negative (got {}, {})",
                        self.strut_width, self.ramp
                    )));
                }
                Ok(())
            }
        }
    }

    /// Density at a point; periodic with unit period in both directions.
    pub fn density(&self, p: Point) -> f64 {
        if let Some(r) = &self.raster {
            return r.sample(p).clamp(0.0, 1.0);
        }
        let d = self.strut_distance(&self.struts(), p);
        let half = 0.5 * self.strut_width;
        if self.ramp <= 0.0 {
            return if d < half { 0.0 } else { 1.0 };
        }
        (0.5 + (d - half) / self.ramp).clamp(0.0, 1.0)
    }
}

/// Nodal interpolation of the geometry onto `mesh`.
pub fn build_rve(geom: &RveGeometry, mesh: Arc<TriMesh>) -> Result<DensityField> {
    geom.validate()?;
    let values = par::map_indices(Execution::Parallel, mesh.num_vertices(), |v| {
        geom.density(mesh.vertices[v])
    });
    DensityField::new(mesh, values)
}
