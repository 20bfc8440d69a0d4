//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::{join, AlphaParams, RveGeometry, RveKind};
use crate::mesh::MorphSpec;

/// Velocity matching on the two sides of the morphing region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityBc {
    #[default]
    Full,
    XOnly,
    None,
}

impl VelocityBc {
    /// Constrained velocity components.
    pub fn components(self) -> [bool; 2] {
        match self {
            VelocityBc::Full => [true, true],
            VelocityBc::XOnly => [true, false],
            VelocityBc::None => [false, false],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingFlags {
    pub enforce_density_bc: bool,
    pub enforce_velocity_bc: VelocityBc,
}

impl Default for MatchingFlags {
    fn default() -> Self {
        Self {
            enforce_density_bc: true,
            enforce_velocity_bc: VelocityBc::Full,
        }
    }
}

/// One unit cell. `ramp` defaults to twice the cell mesh spacing; `raster`
/// is a PGM file, resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellConfig {
    pub kind: RveKind,
    pub strut_width: f64,
    pub ramp: Option<f64>,
    pub raster: Option<PathBuf>,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            kind: RveKind::A,
            strut_width: 0.12,
            ramp: None,
            raster: None,
        }
    }
}

impl CellConfig {
    pub fn of(kind: RveKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    /// Geometry for a cell meshed with spacing `h`.
    pub fn geometry(&self, h: f64) -> Result<RveGeometry> {
        let geom = match (self.kind, &self.raster) {
            (RveKind::Raster, Some(path)) => RveGeometry::raster(crate::io::read_pgm(path)?),
            (RveKind::Raster, None) => {
                return Err(Error::Config("raster cell needs a `raster` file".into()));
            }
            (kind, _) => RveGeometry::new(kind, self.strut_width, self.ramp.unwrap_or(2.0 * h)),
        };
        geom.validate()?;
        Ok(geom)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cells {
    pub left: CellConfig,
    pub right: CellConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub mu: f64,
    pub alpha_max: f64,
    pub alpha_min: f64,
    pub phi: f64,
    /// Magnitude of the body force, applied normal to the interface.
    pub force: f64,
    /// Volume cap replacing the one computed from the cells.
    pub beta: Option<f64>,
    /// Initial density of the morphing region.
    pub rho0: f64,
}

impl Default for Physics {
    fn default() -> Self {
        let a = AlphaParams::default();
        Self {
            mu: 1.0,
            alpha_max: a.alpha_max,
            alpha_min: a.alpha_min,
            phi: a.phi,
            force: 1.0,
            beta: None,
            rho0: 0.5,
        }
    }
}

impl Physics {
    pub fn alpha(&self) -> AlphaParams {
        AlphaParams {
            alpha_max: self.alpha_max,
            alpha_min: self.alpha_min,
            phi: self.phi,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Stagnation threshold on the relative change of the mesh size.
    pub ctol: f64,
    /// Global budget for the recovery estimate.
    pub tol: f64,
    /// Largest nodal density change at which the inner loop stops.
    pub topt: f64,
    /// Maximum number of adaptation cycles.
    pub kmax: usize,
    /// Maximum number of state solves per cycle.
    pub max_inner: usize,
    pub move_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            ctol: 1.5e-2,
            tol: 2.5e-6,
            topt: 1e-3,
            kmax: 50,
            max_inner: 200,
            move_cap: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Spacing of the initial morphing mesh.
    pub h0: f64,
    /// Spacing of the cell meshes (defaults to `h0`).
    pub cell_h: Option<f64>,
    /// Spacing of the joined mesh (defaults to `h0`).
    pub join_h: Option<f64>,
    pub max_refine_level: u32,
    pub element_budget: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self {
            h0: 1.0 / 60.0,
            cell_h: None,
            join_h: None,
            max_refine_level: 2,
            element_budget: 200_000,
        }
    }
}

impl MeshConfig {
    pub fn cell_h(&self) -> f64 {
        self.cell_h.unwrap_or(self.h0)
    }

    pub fn join_h(&self) -> f64 {
        self.join_h.unwrap_or(self.h0)
    }
}

/// Everything a run needs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfluenceConfig {
    pub cells: Cells,
    pub morph: MorphSpec,
    pub physics: Physics,
    pub tolerances: Tolerances,
    pub mesh: MeshConfig,
    pub matching: MatchingFlags,
}

impl ConfluenceConfig {
    /// Default parameters joining two built-in cells.
    pub fn pair(left: RveKind, right: RveKind) -> Self {
        Self {
            cells: Cells {
                left: CellConfig::of(left),
                right: CellConfig::of(right),
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a file; relative raster paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                e => e,
            })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        for cell in [&mut cfg.cells.left, &mut cfg.cells.right] {
            if let Some(r) = &cell.raster {
                if r.is_relative() {
                    cell.raster = Some(dir.join(r));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn force_vector(&self) -> [f64; 2] {
        let f = self.physics.force;
        if self.morph.is_cartesian() {
            [f, 0.0]
        } else {
            // unit normal of the interface, pointing from left to right
            [f * self.morph.theta.sin(), -f * self.morph.theta.cos()]
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.morph.validate()?;
        join::check_containment(&self.morph)?;
        self.physics.alpha().validate()?;
        let p = &self.physics;
        let t = &self.tolerances;
        let m = &self.mesh;
        let positive = [
            ("physics.mu", p.mu),
            ("physics.force", p.force),
            ("tolerances.ctol", t.ctol),
            ("tolerances.tol", t.tol),
            ("tolerances.topt", t.topt),
            ("tolerances.move_cap", t.move_cap),
            ("mesh.h0", m.h0),
            ("mesh.cell_h", m.cell_h()),
            ("mesh.join_h", m.join_h()),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive (got {v})")));
            }
        }
        if t.kmax < 1 || t.max_inner < 1 {
            return Err(Error::Config("tolerances.kmax and tolerances.max_inner must be at least 1".into()));
        }
        if t.move_cap > 1.0 {
            return Err(Error::Config(format!("tolerances.move_cap must not exceed 1 (got {})", t.move_cap)));
        }
        if !(0.0..=1.0).contains(&p.rho0) {
            return Err(Error::Config(format!("physics.rho0 must lie in [0, 1] (got {})", p.rho0)));
        }
        if let Some(b) = p.beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::Config(format!("physics.beta must lie in [0, 1] (got {b})")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ConfluenceConfig::pair(RveKind::B, RveKind::D);
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ConfluenceConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn sections_are_optional() {
        let cfg = ConfluenceConfig::from_toml_str(
            "[cells.left]\nkind = \"B\"\n[morph]\ndelta = 0.3\n[matching]\nenforce_velocity_bc = \"x_only\"\n",
        )
        .unwrap();
        assert_eq!(cfg.cells.left.kind, RveKind::B);
        assert_eq!(cfg.morph.delta, 0.3);
        assert_eq!(cfg.matching.enforce_velocity_bc, VelocityBc::XOnly);
        assert!(cfg.matching.enforce_density_bc);
        assert_eq!(cfg.tolerances.kmax, 50);
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let err = ConfluenceConfig::from_toml_str("[morph]\ndelta = 0.5\nbogus = 1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = ConfluenceConfig::default();
        cfg.morph.delta = 0.0;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("MorphSpec") && msg.contains("delta"), "{msg}");
        let mut cfg = ConfluenceConfig::default();
        cfg.morph.s = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = ConfluenceConfig::default();
        cfg.physics.rho0 = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ConfluenceConfig::default();
        cfg.tolerances.kmax = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn force_is_normal_to_the_interface() {
        let mut cfg = ConfluenceConfig::default();
        assert_eq!(cfg.force_vector(), [1.0, 0.0]);
        cfg.morph.theta = std::f64::consts::FRAC_PI_4;
        let f = cfg.force_vector();
        let d = [cfg.morph.theta.cos(), cfg.morph.theta.sin()];
        assert!((f[0] * d[0] + f[1] * d[1]).abs() < 1e-15);
        assert!(f[0] > 0.0);
    }
}
