use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{make_canonical_mesh, read_mesh_file, QuadratureSpec, Shape, SurfaceMesh};
use crate::medium::{DirectionLookup, EffectiveRoute, VoxelGrid};
use crate::multiparticle::{IncidentField, Region};
use crate::polarizability::MaterialContrast;
use crate::scattering::{FarZoneMargins, WaveContext};
use crate::{c64, Background, CVec3, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Polarizability tensors of one body.
    Tensors,
    /// Far-field S-matrices of one body.
    Single,
    /// Coupled N-body system and its field grid.
    Nbody,
    /// Effective-field equation for a density of particles.
    Medium,
    /// Surface current and near field of a perfectly conducting body.
    Nearfield,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Tensors => "tensors",
            Mode::Single => "single",
            Mode::Nbody => "nbody",
            Mode::Medium => "medium",
            Mode::Nearfield => "nearfield",
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtxConfig {
    pub k: f64,
    #[serde(default = "one")]
    pub eps0: f64,
    #[serde(default = "one")]
    pub mu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncidentConfig {
    pub direction: [f64; 3],
    /// Real and imaginary parts of E₀.
    pub polarization: [f64; 3],
    pub polarization_im: [f64; 3],
}

impl Default for IncidentConfig {
    fn default() -> Self {
        Self { direction: [0.0, 0.0, 1.0], polarization: [1.0, 0.0, 0.0], polarization_im: [0.0; 3] }
    }
}

impl IncidentConfig {
    pub fn field(&self) -> Result<IncidentField> {
        let e = CVec3::from_fn(|i, _| c64(self.polarization[i], self.polarization_im[i]));
        IncidentField::plane_wave(self.direction.into(), e).map_err(|e| Error::InvalidConfiguration(format!("incident: {e}")))
    }
}

/// Relative material constants; `sigma = inf` is a perfect conductor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialConfig {
    pub eps: f64,
    pub eps_im: f64,
    pub mu: f64,
    pub mu_im: f64,
    pub sigma: f64,
    pub omega: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        Self { eps: 1.0, eps_im: 0.0, mu: 1.0, mu_im: 0.0, sigma: 0.0, omega: 1.0 }
    }
}

impl MaterialConfig {
    pub fn contrast(&self, background: Background) -> Result<MaterialContrast> {
        MaterialContrast::new(c64(self.eps, self.eps_im), c64(self.mu, self.mu_im), self.sigma, self.omega, background)
            .map_err(|e| Error::InvalidConfiguration(format!("material: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TensorMethod {
    /// Boundary-integral series on the body mesh.
    #[default]
    Series,
    /// Closed-form ball tensors (spheres only).
    ClosedForm,
}

fn default_refinement() -> u32 {
    2
}

fn default_order() -> usize {
    6
}

/// One particle shape with its material, centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyConfig {
    pub shape: Option<Shape>,
    /// Triangle soup or STL file, relative to the config file.
    pub mesh_file: Option<PathBuf>,
    #[serde(default = "default_refinement")]
    pub refinement: u32,
    /// Series order n of the polarizability approximation.
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub material: MaterialConfig,
    #[serde(default)]
    pub method: TensorMethod,
}

impl BodyConfig {
    fn check(&self, field: &str) -> Result<()> {
        match (&self.shape, &self.mesh_file) {
            (Some(_), Some(_)) => return Err(config_error(field, "give either shape or mesh_file, not both")),
            (None, None) => return Err(config_error(field, "needs a shape or a mesh_file")),
            _ => {}
        }
        if self.method == TensorMethod::ClosedForm && !matches!(self.shape, Some(Shape::Sphere { .. })) {
            return Err(config_error(field, "method = \"closed-form\" requires a sphere shape"));
        }
        if self.order < 1 {
            return Err(config_error(field, "order must be at least 1"));
        }
        Ok(())
    }

    pub fn mesh(&self, base_dir: &Path) -> Result<SurfaceMesh> {
        match (&self.shape, &self.mesh_file) {
            (Some(shape), _) => make_canonical_mesh(shape, self.refinement),
            (None, Some(path)) => read_mesh_file(&base_dir.join(path)),
            (None, None) => Err(Error::InvalidConfiguration("body needs a shape or a mesh_file".into())),
        }
    }

    /// Refinement level when the mesh is generated, none for mesh files.
    pub fn refinement_level(&self) -> Option<u32> {
        self.shape.map(|_| self.refinement)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Placement {
    List {
        positions: Vec<[f64; 3]>,
    },
    Lattice {
        counts: [usize; 3],
        spacing: f64,
        #[serde(default)]
        origin: [f64; 3],
    },
    /// Uniform in a box with rejection of pairs closer than `min_distance`.
    Random {
        count: usize,
        region: Region,
        min_distance: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub body: BodyConfig,
    pub placement: Placement,
}

/// Solver settings shared by the modes; unset values take each module's default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub dense_cap: Option<usize>,
    pub strict_dominance: bool,
    /// Guard radius of the field grid in units of the minimum particle distance.
    pub guard_margin: Option<f64>,
    /// Effective-field route (medium mode).
    pub route: Option<EffectiveRoute>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub region: Region,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterConfig {
    pub directions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    pub grid: VoxelGrid,
    /// Constant number density with template 0 everywhere.
    pub density: Option<f64>,
    /// Density CSV (ix,iy,iz,density[,template]), relative to the config file.
    pub density_file: Option<PathBuf>,
    pub templates: Vec<BodyConfig>,
    #[serde(default)]
    pub lookup: DirectionLookup,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A scene and the pipeline stage to run on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub ctx: CtxConfig,
    /// Seed of the random placement helpers.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub incident: IncidentConfig,
    pub body: Option<BodyConfig>,
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
    pub medium: Option<MediumConfig>,
    pub grid: Option<GridConfig>,
    pub scatter: Option<ScatterConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub regime: FarZoneMargins,
    /// Directory that relative input paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_error(field: &str, msg: &str) -> Error {
    Error::InvalidConfiguration(format!("{field}: {msg}"))
}

impl RunConfig {
    /// Parses and checks a TOML config; `base_dir` resolves relative input paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        config.check()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn wave_context(&self) -> Result<WaveContext> {
        let bg = Background::new(self.ctx.eps0, self.ctx.mu0).map_err(|e| Error::InvalidConfiguration(format!("ctx: {e}")))?;
        WaveContext::new(self.ctx.k, bg).map_err(|e| Error::InvalidConfiguration(format!("ctx: {e}")))
    }

    /// Mode-required sections present, k > 0, tolerances positive.
    pub fn check(&self) -> Result<()> {
        if !(self.ctx.k > 0.0 && self.ctx.k.is_finite()) {
            return Err(config_error("ctx.k", &format!("must be positive and finite, got {}", self.ctx.k)));
        }
        self.wave_context()?;
        if let Some(tol) = self.solver.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(config_error("solver.tol", &format!("must be positive, got {tol}")));
            }
        }
        if self.solver.max_iter == Some(0) {
            return Err(config_error("solver.max_iter", "must be at least 1"));
        }
        if let Some(m) = self.solver.guard_margin {
            if !(m >= 0.0 && m.is_finite()) {
                return Err(config_error("solver.guard_margin", &format!("must be non-negative, got {m}")));
            }
        }
        self.quadrature.validate().map_err(|e| config_error("quadrature", &e.to_string()))?;
        if !(self.regime.max_ka > 0.0 && self.regime.min_kd > 0.0) {
            return Err(config_error("regime", "max_ka and min_kd must be positive"));
        }
        self.incident.field()?;
        let needs_body = matches!(self.mode, Mode::Tensors | Mode::Single | Mode::Nearfield);
        match (&self.body, needs_body) {
            (Some(b), true) => b.check("body")?,
            (None, true) => return Err(config_error("body", &format!("mode \"{}\" requires a [body] section", self.mode.name()))),
            (Some(_), false) => return Err(config_error("body", &format!("not used by mode \"{}\"", self.mode.name()))),
            (None, false) => {}
        }
        if self.mode == Mode::Nearfield && self.body.as_ref().is_some_and(|b| b.method == TensorMethod::ClosedForm) {
            return Err(config_error("body.method", "the near-field solver needs a mesh, not closed-form tensors"));
        }
        if !self.groups.is_empty() && self.mode != Mode::Nbody {
            return Err(config_error("groups", "only used by mode \"nbody\""));
        }
        for (g, group) in self.groups.iter().enumerate() {
            group.body.check(&format!("groups[{g}].body"))?;
            match &group.placement {
                Placement::Lattice { spacing, .. } if !(*spacing > 0.0) => {
                    return Err(config_error(&format!("groups[{g}].placement.spacing"), "must be positive"));
                }
                Placement::Random { min_distance, .. } if !(*min_distance >= 0.0) => {
                    return Err(config_error(&format!("groups[{g}].placement.min_distance"), "must be non-negative"));
                }
                _ => {}
            }
        }
        match (&self.medium, self.mode == Mode::Medium) {
            (Some(m), true) => {
                if m.density.is_some() == m.density_file.is_some() {
                    return Err(config_error("medium", "give exactly one of density and density_file"));
                }
                if m.templates.is_empty() {
                    return Err(config_error("medium.templates", "at least one particle template is required"));
                }
                for (t, body) in m.templates.iter().enumerate() {
                    body.check(&format!("medium.templates[{t}]"))?;
                }
            }
            (None, true) => return Err(config_error("medium", "mode \"medium\" requires a [medium] section")),
            (Some(_), false) => return Err(config_error("medium", &format!("not used by mode \"{}\"", self.mode.name()))),
            (None, false) => {}
        }
        match (&self.scatter, self.mode == Mode::Single) {
            (Some(s), true) if s.directions.is_empty() => return Err(config_error("scatter.directions", "must not be empty")),
            (None, true) => return Err(config_error("scatter", "mode \"single\" requires a [scatter] section")),
            (Some(_), false) => return Err(config_error("scatter", &format!("not used by mode \"{}\"", self.mode.name()))),
            _ => {}
        }
        if self.grid.is_some() && !matches!(self.mode, Mode::Nbody | Mode::Nearfield) {
            return Err(config_error("grid", &format!("not used by mode \"{}\"", self.mode.name())));
        }
        if let Some(g) = &self.grid {
            g.region.points(g.resolution.max(1)).map_err(|e| config_error("grid.region", &e.to_string()))?;
            if g.resolution == 0 {
                return Err(config_error("grid.resolution", "must be at least 1"));
            }
        }
        Ok(())
    }
}
