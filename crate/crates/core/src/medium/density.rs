use std::io::{Read, Write};

use nalgebra::{Matrix6, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::icosphere_directions;
use crate::multiparticle::ParticleInstance;
use crate::scattering::{SOperator6, WaveContext};
use crate::{Error, Point, Result};

/// Regular grid of cubic voxels; `origin` is the lower corner of voxel (0, 0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelGrid {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
}

impl VoxelGrid {
    pub fn new(origin: [f64; 3], spacing: f64, dims: [usize; 3]) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) || dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(format!("voxel grid needs spacing > 0 and nonzero dims, got {spacing}, {dims:?}")));
        }
        Ok(Self { origin, spacing, dims })
    }

    /// Grid of n³ voxels exactly covering the cube [lo, hi]³.
    pub fn cube(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new([lo; 3], (hi - lo) / n as f64, [n; 3])
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing.powi(3)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        [i, j, index / (self.dims[0] * self.dims[1])]
    }

    pub fn center(&self, index: usize) -> Point {
        let c = self.coords(index);
        Point::from_fn(|a, _| self.origin[a] + (c[a] as f64 + 0.5) * self.spacing)
    }
}

/// Sidecar metadata written next to voxel CSV files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub grid: VoxelGrid,
    pub k: Option<f64>,
}

impl GridMeta {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Number density N(y) per voxel and the particle template occupying each voxel.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: VoxelGrid,
    pub density: Vec<f64>,
    pub template: Vec<Option<usize>>,
    pub templates: Vec<ParticleInstance>,
}

impl DensityField {
    pub fn new(grid: VoxelGrid, density: Vec<f64>, template: Vec<Option<usize>>, templates: Vec<ParticleInstance>) -> Result<Self> {
        if density.len() != grid.len() || template.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("expected {} voxel values", grid.len())));
        }
        for (v, (&n, t)) in density.iter().zip(&template).enumerate() {
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::InvalidConfiguration(format!("voxel {v} has invalid density {n}")));
            }
            match t {
                Some(t) if *t >= templates.len() => {
                    return Err(Error::InvalidConfiguration(format!("voxel {v} refers to missing template {t}")));
                }
                None if n > 0.0 => {
                    return Err(Error::InvalidConfiguration(format!("voxel {v} has density {n} but no particle template")));
                }
                _ => {}
            }
        }
        Ok(Self { grid, density, template, templates })
    }

    /// Constant density with a single template in every voxel.
    pub fn uniform(grid: VoxelGrid, density: f64, template: ParticleInstance) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![density; n], vec![Some(0); n], vec![template])
    }

    /// CSV with columns ix,iy,iz,density,template (empty template for none).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["ix", "iy", "iz", "density", "template"]).map_err(crate::multiparticle::csv_error)?;
        for (v, (n, t)) in self.density.iter().zip(&self.template).enumerate() {
            let c = self.grid.coords(v);
            let t = t.map(|t| t.to_string()).unwrap_or_default();
            out.write_record([c[0].to_string(), c[1].to_string(), c[2].to_string(), format!("{n:.17e}"), t])
                .map_err(crate::multiparticle::csv_error)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads a density CSV (ix,iy,iz,density[,template]); voxels not listed have zero density.
/// A missing template column assigns template 0 to every listed voxel.
pub fn read_density_csv<R: Read>(r: R, grid: VoxelGrid, templates: Vec<ParticleInstance>) -> Result<DensityField> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut density = vec![0.0; grid.len()];
    let mut template = vec![None; grid.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(crate::multiparticle::csv_error)?;
        let row = line + 2;
        let field = |i: usize| record.get(i).ok_or_else(|| Error::Parse(format!("density CSV line {row}: missing column {}", i + 1)));
        let parse_index = |i: usize| -> Result<usize> {
            field(i)?.parse().map_err(|e| Error::Parse(format!("density CSV line {row}, column {}: {e}", i + 1)))
        };
        let (i, j, k) = (parse_index(0)?, parse_index(1)?, parse_index(2)?);
        if i >= grid.dims[0] || j >= grid.dims[1] || k >= grid.dims[2] {
            return Err(Error::Parse(format!("density CSV line {row}: voxel ({i}, {j}, {k}) outside the grid")));
        }
        let n: f64 = field(3)?.parse().map_err(|e| Error::Parse(format!("density CSV line {row}, column 4: {e}")))?;
        let t = match record.get(4) {
            Some("") => None,
            Some(_) => Some(parse_index(4)?),
            None => Some(0),
        };
        let v = grid.index(i, j, k);
        density[v] = n;
        template[v] = t;
    }
    DensityField::new(grid, density, template, templates)
}

/// How q(y, β) is evaluated for a scattering direction β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DirectionLookup {
    /// The template operator built for β itself.
    #[default]
    Exact,
    /// The tabulated operator at the nearest icosahedral node (12, 42, 162 nodes for levels 0, 1, 2).
    NearestNode { level: u32 },
}

/// Level of the icosahedral table used for the isotropy check.
const ISOTROPY_LEVEL: u32 = 2;
const ISOTROPY_TOL: f64 = 1e-6;

/// q(y, β) = N(y)𝒮(β; template(y)) on a voxel grid.
#[derive(Debug, Clone)]
pub struct PotentialQ {
    pub density: DensityField,
    pub ctx: WaveContext,
    pub lookup: DirectionLookup,
    /// True when every used template's operator is direction independent.
    pub isotropic: bool,
    directions: Vec<Vector3<f64>>,
    tables: Vec<Vec<Matrix6<Complex64>>>,
}

fn template_operator(t: &ParticleInstance, beta: &Vector3<f64>, ctx: &WaveContext) -> Matrix6<Complex64> {
    SOperator6::for_direction(&t.alpha, &t.beta, beta, ctx, t.volume).expect("unit direction").matrix
}

pub fn q_from_density(density: &DensityField, ctx: &WaveContext, lookup: DirectionLookup) -> Result<PotentialQ> {
    let level = match lookup {
        DirectionLookup::Exact => ISOTROPY_LEVEL,
        DirectionLookup::NearestNode { level } if level <= 4 => level,
        DirectionLookup::NearestNode { level } => {
            return Err(Error::InvalidArgument(format!("direction table level {level} exceeds 4")));
        }
    };
    let directions = icosphere_directions(level);
    let tables: Vec<Vec<Matrix6<Complex64>>> = density
        .templates
        .iter()
        .map(|t| directions.iter().map(|b| template_operator(t, b, ctx)).collect())
        .collect();
    let iso_dirs = icosphere_directions(ISOTROPY_LEVEL);
    let used: Vec<usize> = (0..density.templates.len())
        .filter(|&t| density.template.iter().zip(&density.density).any(|(u, &n)| *u == Some(t) && n > 0.0))
        .collect();
    let isotropic = used.iter().all(|&t| {
        let ops: Vec<_> = iso_dirs.iter().map(|b| template_operator(&density.templates[t], b, ctx)).collect();
        let scale = ops.iter().map(|m| m.norm()).fold(0.0, f64::max);
        ops.iter().all(|m| (m - ops[0]).norm() <= ISOTROPY_TOL * scale)
    });
    Ok(PotentialQ { density: density.clone(), ctx: *ctx, lookup, isotropic, directions, tables })
}

impl PotentialQ {
    pub fn grid(&self) -> &VoxelGrid {
        &self.density.grid
    }

    pub fn is_zero(&self) -> bool {
        self.density.density.iter().all(|&n| n == 0.0)
    }

    pub(crate) fn nearest_node(&self, beta: &Vector3<f64>) -> usize {
        self.directions
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, d)| {
                let c = d.dot(beta);
                if c > best.1 { (i, c) } else { best }
            })
            .0
    }

    pub(crate) fn tables_entry(&self, template: usize, node: usize) -> Matrix6<Complex64> {
        self.tables[template][node]
    }

    /// q(y_v, β) as a 6×6 matrix.
    pub fn operator(&self, voxel: usize, beta: &Vector3<f64>) -> Matrix6<Complex64> {
        let n = self.density.density[voxel];
        let Some(t) = self.density.template[voxel] else {
            return Matrix6::zeros();
        };
        if n == 0.0 {
            return Matrix6::zeros();
        }
        let s = match self.lookup {
            DirectionLookup::Exact => template_operator(&self.density.templates[t], &beta.normalize(), &self.ctx),
            DirectionLookup::NearestNode { .. } => self.tables[t][self.nearest_node(&beta.normalize())],
        };
        s * Complex64::new(n, 0.0)
    }
}
