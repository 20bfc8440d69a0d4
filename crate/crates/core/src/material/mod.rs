//! Density fields, the inverse-permeability law and cell geometries.

pub mod join;
mod rve;
mod trace;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Locator, TriMesh};

pub use join::{check_containment, domains, join_densities, volume_fraction_beta, Domains, JoinedDensity, Region};
pub use rve::{build_rve, Raster, RveGeometry, RveKind};
pub use trace::{extract_trace, Trace, TraceSource};

/// Bounds and penalization of the Brinkman coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaParams {
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub phi: f64,
}

impl Default for AlphaParams {
    fn default() -> Self {
        Self {
            alpha_max: 2.5e5,
            alpha_min: 2.5e-4,
            phi: 0.6,
        }
    }
}

impl AlphaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min < self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::invalid(format!(
                "alpha bounds must satisfy 0 < alpha_min < alpha_max (got {}, {})",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return Err(Error::invalid(format!("phi must be positive (got {})", self.phi)));
        }
        Ok(())
    }

    /// Unchecked evaluation for interpolated densities already known to lie in [0, 1].
    #[inline]
    pub fn alpha(&self, rho: f64) -> f64 {
        if rho == 0.0 {
            return self.alpha_max;
        }
        if rho == 1.0 {
            return self.alpha_min;
        }
        self.alpha_max + (self.alpha_min - self.alpha_max) * rho * (1.0 + self.phi) / (rho + self.phi)
    }

    #[inline]
    pub fn dalpha(&self, rho: f64) -> f64 {
        let d = rho + self.phi;
        (self.alpha_min - self.alpha_max) * self.phi * (1.0 + self.phi) / (d * d)
    }
}

fn check_unit(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::invalid(format!("density {rho} outside [0, 1]")))
    }
}

pub fn alpha_of_rho(rho: f64, params: &AlphaParams) -> Result<f64> {
    check_unit(rho)?;
    Ok(params.alpha(rho))
}

pub fn dalpha_drho(rho: f64, params: &AlphaParams) -> Result<f64> {
    check_unit(rho)?;
    Ok(params.dalpha(rho))
}

/// Piecewise-linear nodal density.
#[derive(Clone, Debug)]
pub struct DensityField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::invalid(format!(
                "density has {} values for {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("density {v} at node {i} outside [0, 1]")));
        }
        Ok(Self { mesh, values })
    }

    pub fn constant(mesh: Arc<TriMesh>, c: f64) -> Result<Self> {
        let n = mesh.num_vertices();
        Self::new(mesh, vec![c; n])
    }

    pub fn at(&self, t: usize, l: [f64; 3]) -> f64 {
        let [a, b, c] = self.mesh.triangles[t];
        l[0] * self.values[a] + l[1] * self.values[b] + l[2] * self.values[c]
    }

    /// Integral over the mesh (exact for P1).
    pub fn integral(&self) -> f64 {
        (0..self.mesh.num_triangles())
            .map(|t| {
                let [a, b, c] = self.mesh.triangles[t];
                self.mesh.area(t) * (self.values[a] + self.values[b] + self.values[c]) / 3.0
            })
            .sum()
    }

    /// Mean density over the mesh.
    pub fn volume_fraction(&self) -> f64 {
        self.integral() / self.mesh.total_area()
    }

    /// Nodal interpolation onto another mesh; points outside this mesh take
    /// the nearest value.
    pub fn transfer(&self, target: Arc<TriMesh>) -> DensityField {
        let loc = Locator::new(&self.mesh);
        let values = target
            .vertices
            .iter()
            .map(|&p| {
                let (t, l) = loc.locate_or_nearest(&self.mesh, p);
                self.at(t, l).clamp(0.0, 1.0)
            })
            .collect();
        DensityField {
            mesh: target,
            values,
        }
    }

    /// Point evaluation through a prebuilt locator.
    pub fn sample(&self, loc: &Locator, p: crate::geom::Point) -> f64 {
        let (t, l) = loc.locate_or_nearest(&self.mesh, p);
        self.at(t, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_endpoints_and_midpoint() {
        let p = AlphaParams::default();
        assert_eq!(alpha_of_rho(0.0, &p).unwrap(), p.alpha_max);
        assert_eq!(alpha_of_rho(1.0, &p).unwrap(), p.alpha_min);
        // frozen oracle value
        let a = alpha_of_rho(0.5, &p).unwrap();
        assert!((a - 68181.818363636363636).abs() / a < 1e-12);
        assert!(alpha_of_rho(-0.1, &p).is_err());
        assert!(alpha_of_rho(1.1, &p).is_err());
    }

    #[test]
    fn dalpha_frozen_value() {
        let p = AlphaParams::default();
        let d = dalpha_drho(1.0, &p).unwrap();
        assert!((d - -93749.999906250000000).abs() / d.abs() < 1e-12);
    }

    #[test]
    fn large_phi_limit_is_linear() {
        let p = AlphaParams { phi: 1e9, ..AlphaParams::default() };
        for i in 0..=10 {
            let r = i as f64 / 10.0;
            let d = p.dalpha(r);
            let lin = p.alpha_min - p.alpha_max;
            assert!((d - lin).abs() / lin.abs() < 1e-8);
        }
    }

    #[test]
    fn params_validation() {
        assert!(AlphaParams::default().validate().is_ok());
        let bad = AlphaParams { alpha_min: 1.0, alpha_max: 0.5, phi: 0.6 };
        assert!(bad.validate().is_err());
        let bad = AlphaParams { phi: 0.0, ..AlphaParams::default() };
        assert!(bad.validate().is_err());
    }
}
