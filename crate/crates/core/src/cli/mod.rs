//! Batch driver: a TOML scene config in, CSV artifacts and a JSON run report out.

mod config;

pub use config::{
    BodyConfig, CtxConfig, GridConfig, GroupConfig, IncidentConfig, MaterialConfig, MediumConfig, Mode, Placement, RunConfig,
    ScatterConfig, SolverConfig, TensorMethod,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::geometry::{Panel, SurfaceMesh};
use crate::medium::{q_from_density, read_density_csv, solve_effective_field, DensityField, EffectiveOptions, EffectiveRoute, VoxelGrid};
use crate::multiparticle::{
    csv_error, lattice_positions, random_positions, FieldGrid, LocalFields, ParticleInstance, Scene, SolverOptions,
};
use crate::nearfield::{near_field_at, solve_current, BoundaryOperatorA, CurrentOptions};
use crate::polarizability::{BChain, MaterialContrast, PolarizabilityTensor};
use crate::scattering::{farzone_error_report, s_matrix_e, write_s_matrix_csv, FarZoneReport, ScatterFrame, WaveContext};
use crate::{CTensor, Error, Point, Result};

pub const REPORT_FILE: &str = "run_report.json";

/// Far-zone margins of one particle (or particle template).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeEntry {
    pub particle: usize,
    pub ka: f64,
    /// Nearest-neighbour kd; absent for a lone particle.
    pub kd: Option<f64>,
    pub a_over_d: Option<f64>,
    pub regime_ok: bool,
    pub violations: Vec<String>,
}

impl RegimeEntry {
    fn new(particle: usize, a: f64, d: Option<f64>, k: f64, report: &FarZoneReport) -> Self {
        Self {
            particle,
            ka: k * a,
            kd: d.map(|d| k * d),
            a_over_d: d.map(|d| a / d),
            regime_ok: report.regime_ok,
            violations: report.violations.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesEntry {
    pub tensor: String,
    pub order: usize,
    pub q_hat: f64,
    pub error_estimate: f64,
    pub correction_ratios: Vec<f64>,
}

/// Diagnostics and bookkeeping of one run; `validate` fills everything except the solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: Mode,
    pub seed: u64,
    pub particles: usize,
    pub regime_ok: bool,
    pub regime: Vec<RegimeEntry>,
    pub dominance_bound: Option<f64>,
    pub series: Vec<SeriesEntry>,
    pub route: Option<String>,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    pub condition: Option<f64>,
    pub memory_estimate_bytes: u64,
    /// Wall-clock seconds per stage; the only entries that vary between identical runs.
    pub timings: BTreeMap<String, f64>,
    /// Files written, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunReport {
    fn new(config: &RunConfig) -> Self {
        Self {
            mode: config.mode,
            seed: config.seed,
            particles: 0,
            regime_ok: true,
            regime: Vec::new(),
            dominance_bound: None,
            series: Vec::new(),
            route: None,
            iterations: None,
            residual: None,
            condition: None,
            memory_estimate_bytes: 0,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn numbers(&self) -> Vec<f64> {
        let mut out = vec![];
        for r in &self.regime {
            out.push(r.ka);
            out.extend(r.kd);
            out.extend(r.a_over_d);
        }
        out.extend(self.dominance_bound);
        for s in &self.series {
            out.push(s.q_hat);
            out.push(s.error_estimate);
            out.extend(&s.correction_ratios);
        }
        out.extend(self.residual);
        out.extend(self.condition);
        out.extend(self.timings.values());
        out
    }

    /// Errors if any numeric entry is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        match self.numbers().into_iter().find(|x| !x.is_finite()) {
            Some(x) => Err(Error::Contract(format!("run report contains the non-finite value {x}"))),
            None => Ok(()),
        }
    }

    fn set_regime(&mut self, regime: Vec<RegimeEntry>) {
        self.regime_ok = regime.iter().all(|r| r.regime_ok);
        self.regime = regime;
    }

    fn violations(&self) -> Vec<String> {
        self.regime
            .iter()
            .flat_map(|r| r.violations.iter().map(move |v| format!("particle {}: {v}", r.particle)))
            .collect()
    }
}

/// Process exit status for an error: 2 config, 3 non-convergence, 4 regime violation, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidConfiguration(_) | Error::InvalidArgument(_) => 2,
        Error::NonConvergence { .. } | Error::NeumannDivergence { .. } | Error::SeriesDivergence { .. } | Error::NearEigenvalue { .. } => 3,
        Error::Regime(_) => 4,
        _ => 1,
    }
}

// Bytes of a dense complex matrix of side n, with one LU copy.
fn dense_bytes(n: usize) -> u64 {
    2 * 16 * (n as u64) * (n as u64)
}

// The two dense real panel operators of the polarizability series.
fn series_bytes(panels: usize) -> u64 {
    2 * 8 * (panels as u64) * (panels as u64)
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Self(Instant::now())
    }

    fn stop(self, report: &mut RunReport, name: &str) {
        report.timings.insert(name.into(), self.0.elapsed().as_secs_f64());
    }
}

/// Tensors of one body, with the series record when computed from the mesh.
struct BodyTensors {
    particle: ParticleInstance,
    alpha: PolarizabilityTensor,
    beta: PolarizabilityTensor,
    panels: usize,
}

fn body_tensors(body: &BodyConfig, config: &RunConfig, ctx: &WaveContext, with_series: bool) -> Result<BodyTensors> {
    let contrast = body.material.contrast(ctx.background)?;
    if let (TensorMethod::ClosedForm, Some(crate::geometry::Shape::Sphere { radius })) = (body.method, body.shape) {
        let particle = ParticleInstance::ball(Point::zeros(), radius, &contrast)?;
        let alpha = PolarizabilityTensor::from_tensor(particle.alpha);
        let beta = PolarizabilityTensor::from_tensor(particle.beta);
        return Ok(BodyTensors { particle, alpha, beta, panels: 0 });
    }
    let mesh = body.mesh(&config.base_dir)?;
    let panels = mesh.num_panels();
    if !with_series {
        // Placeholder tensors for diagnostics that only need the size.
        let particle = ParticleInstance::from_tensors(Point::zeros(), CTensor::zeros(), CTensor::zeros(), mesh_volume(&mesh), mesh.characteristic_dimension())?;
        let z = PolarizabilityTensor::zero();
        return Ok(BodyTensors { particle, alpha: z.clone(), beta: z, panels });
    }
    let (alpha, beta, volume) = series_tensors(&mesh, &contrast, config, body.order)?;
    let particle = ParticleInstance::from_tensors(Point::zeros(), alpha.tensor, beta.tensor, volume, mesh.characteristic_dimension())?;
    Ok(BodyTensors { particle, alpha, beta, panels })
}

fn mesh_volume(mesh: &SurfaceMesh) -> f64 {
    mesh.panels().iter().map(|p: &Panel| p.centroid.dot(&p.normal) * p.area).sum::<f64>() / 3.0
}

fn series_tensors(mesh: &SurfaceMesh, contrast: &MaterialContrast, config: &RunConfig, order: usize) -> Result<(PolarizabilityTensor, PolarizabilityTensor, f64)> {
    let chain = BChain::compute(mesh, order, &config.quadrature)?;
    let gamma = contrast.gamma_eps()?;
    let alpha = if gamma.norm() == 0.0 {
        PolarizabilityTensor { order, ..PolarizabilityTensor::zero() }
    } else {
        chain.alpha(gamma, order)?
    };
    let beta = chain.beta(contrast, mesh.characteristic_dimension(), order)?;
    Ok((alpha, beta, chain.volume()))
}

fn series_entry(name: &str, t: &PolarizabilityTensor) -> SeriesEntry {
    SeriesEntry {
        tensor: name.into(),
        order: t.order,
        q_hat: t.q_hat,
        error_estimate: t.error_estimate,
        correction_ratios: t.correction_ratios(),
    }
}

fn single_regime(particle: &ParticleInstance, ctx: &WaveContext, config: &RunConfig) -> RegimeEntry {
    let mut r = farzone_error_report(particle.size, f64::INFINITY, ctx.k, &config.regime);
    r.violations.retain(|v| !v.starts_with("kd"));
    r.regime_ok = r.violations.is_empty();
    RegimeEntry::new(0, particle.size, None, ctx.k, &r)
}

fn group_positions(config: &RunConfig) -> Result<Vec<Vec<Point>>> {
    config
        .groups
        .iter()
        .enumerate()
        .map(|(g, group)| match &group.placement {
            Placement::List { positions } => Ok(positions.iter().map(|p| Point::from(*p)).collect()),
            Placement::Lattice { counts, spacing, origin } => {
                Ok(lattice_positions(*counts, *spacing).into_iter().map(|p| p + Point::from(*origin)).collect())
            }
            Placement::Random { count, region, min_distance } => {
                random_positions(*count, region, *min_distance, config.seed.wrapping_add(g as u64))
                    .map_err(|e| Error::InvalidConfiguration(format!("groups[{g}].placement: {e}")))
            }
        })
        .collect()
}

fn build_scene(config: &RunConfig, ctx: &WaveContext, with_series: bool, report: &mut RunReport) -> Result<Scene> {
    let positions = group_positions(config)?;
    let mut particles = Vec::new();
    for (group, pos) in config.groups.iter().zip(&positions) {
        if pos.is_empty() {
            continue;
        }
        let t = body_tensors(&group.body, config, ctx, with_series)?;
        report.memory_estimate_bytes = report.memory_estimate_bytes.max(series_bytes(t.panels));
        if t.panels > 0 && with_series {
            report.series.push(series_entry("alpha", &t.alpha));
            report.series.push(series_entry("beta", &t.beta));
        }
        particles.extend(pos.iter().map(|p| t.particle.translated_to(*p)));
    }
    let scene = Scene::new(particles, config.incident.field()?, *ctx).map_err(|e| Error::InvalidConfiguration(format!("groups: {e}")))?;
    report.particles = scene.particles.len();
    let regime = scene
        .regime_reports(&config.regime)
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let d = nearest_distance(&scene, i);
            RegimeEntry::new(i, scene.particles[i].size, d, ctx.k, r)
        })
        .collect();
    report.set_regime(regime);
    Ok(scene)
}

fn nearest_distance(scene: &Scene, i: usize) -> Option<f64> {
    let p = scene.particles[i].position;
    let d = scene
        .particles
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, q)| (p - q.position).norm())
        .fold(f64::INFINITY, f64::min);
    d.is_finite().then_some(d)
}

fn solver_options(config: &RunConfig) -> SolverOptions {
    let d = SolverOptions::default();
    SolverOptions {
        tol: config.solver.tol.unwrap_or(d.tol),
        max_iter: config.solver.max_iter.unwrap_or(d.max_iter),
        strict_dominance: config.solver.strict_dominance,
        dense_cap: config.solver.dense_cap.unwrap_or(d.dense_cap),
        guard_margin: config.solver.guard_margin.unwrap_or(d.guard_margin),
    }
}

fn current_options(config: &RunConfig) -> CurrentOptions {
    let d = CurrentOptions::default();
    CurrentOptions {
        tol: config.solver.tol.unwrap_or(d.tol),
        max_iter: config.solver.max_iter.unwrap_or(d.max_iter),
        dense_cap: config.solver.dense_cap.unwrap_or(d.dense_cap),
        ..d
    }
}

fn effective_options(config: &RunConfig) -> EffectiveOptions {
    let d = EffectiveOptions::default();
    EffectiveOptions {
        tol: config.solver.tol.unwrap_or(d.tol),
        max_iter: config.solver.max_iter.unwrap_or(d.max_iter),
        route: config.solver.route.unwrap_or(d.route),
        direct_cap: config.solver.dense_cap.unwrap_or(d.direct_cap),
    }
}

fn medium_density(config: &RunConfig, ctx: &WaveContext, with_series: bool, report: &mut RunReport) -> Result<DensityField> {
    let m = config.medium.as_ref().ok_or_else(|| Error::InvalidConfiguration("medium: section missing".into()))?;
    let grid = VoxelGrid::new(m.grid.origin, m.grid.spacing, m.grid.dims).map_err(|e| Error::InvalidConfiguration(format!("medium.grid: {e}")))?;
    let mut templates = Vec::new();
    for (t, body) in m.templates.iter().enumerate() {
        let bt = body_tensors(body, config, ctx, with_series)?;
        report.memory_estimate_bytes = report.memory_estimate_bytes.max(series_bytes(bt.panels));
        if bt.panels > 0 && with_series {
            report.series.push(series_entry(&format!("alpha[{t}]"), &bt.alpha));
            report.series.push(series_entry(&format!("beta[{t}]"), &bt.beta));
        }
        templates.push(bt.particle);
    }
    let density = match (m.density, &m.density_file) {
        (Some(n), _) => DensityField::uniform(grid, n, templates[0].clone()),
        (None, Some(path)) => {
            let path = config.base_dir.join(path);
            let file = File::open(&path).map_err(|e| Error::InvalidConfiguration(format!("medium.density_file {}: {e}", path.display())))?;
            read_density_csv(std::io::BufReader::new(file), grid, templates)
        }
        (None, None) => Err(Error::InvalidConfiguration("medium: no density given".into())),
    }
    .map_err(|e| match e {
        Error::Io(io) => Error::Io(io),
        other => Error::InvalidConfiguration(format!("medium: {other}")),
    })?;
    // Mean spacing d = N^{-1/3} at the densest voxel of each template.
    let regime = density
        .templates
        .iter()
        .enumerate()
        .map(|(t, p)| {
            let n_max = density
                .density
                .iter()
                .zip(&density.template)
                .filter(|(_, u)| **u == Some(t))
                .map(|(n, _)| *n)
                .fold(0.0, f64::max);
            let d = (n_max > 0.0).then(|| n_max.powf(-1.0 / 3.0));
            let r = farzone_error_report(p.size, d.unwrap_or(f64::INFINITY), ctx.k, &config.regime);
            let mut entry = RegimeEntry::new(t, p.size, d, ctx.k, &r);
            if d.is_none() {
                entry.violations.retain(|v| !v.starts_with("kd"));
                entry.regime_ok = entry.violations.is_empty();
            }
            entry
        })
        .collect();
    report.set_regime(regime);
    report.particles = density.templates.len();
    let occupied = density.density.iter().filter(|n| **n > 0.0).count();
    let direct = effective_options(config).route != EffectiveRoute::Neumann && occupied <= effective_options(config).direct_cap;
    let solve = if direct { dense_bytes(6 * occupied) } else { 6 * 16 * 4 * grid.len() as u64 };
    report.memory_estimate_bytes = report.memory_estimate_bytes.max(solve);
    Ok(density)
}

fn nearfield_memory(panels: usize, options: &CurrentOptions) -> u64 {
    let gamma = 48 * (panels as u64) * (panels as u64);
    let dense = if panels <= options.dense_cap { dense_bytes(2 * panels) } else { 0 };
    gamma + dense
}

/// Pre-flight diagnostics: regime margins, dominance bound, memory estimate. Writes nothing.
pub fn validate(config: &RunConfig) -> Result<RunReport> {
    config.check()?;
    let ctx = config.wave_context()?;
    let mut report = RunReport::new(config);
    match config.mode {
        Mode::Tensors | Mode::Single | Mode::Nearfield => {
            let body = config.body.as_ref().expect("checked");
            let t = body_tensors(body, config, &ctx, false)?;
            report.particles = 1;
            report.set_regime(vec![single_regime(&t.particle, &ctx, config)]);
            report.memory_estimate_bytes = match config.mode {
                Mode::Nearfield => nearfield_memory(t.panels, &current_options(config)),
                _ => series_bytes(t.panels),
            };
            if config.mode == Mode::Tensors {
                // Static problem: the wavelength plays no role.
                report.set_regime(Vec::new());
            }
        }
        Mode::Nbody => {
            // The bound needs the tensors; closed-form bodies are cheap, series bodies are computed.
            let scene = build_scene(config, &ctx, true, &mut report)?;
            let bound = scene.dominance_bound()?;
            report.dominance_bound = Some(bound.bound);
            let n = scene.particles.len();
            let solve = if bound.dominant { 4 * 6 * 16 * n as u64 } else { dense_bytes(6 * n) };
            report.memory_estimate_bytes = report.memory_estimate_bytes.max(solve);
        }
        Mode::Medium => {
            medium_density(config, &ctx, false, &mut report)?;
        }
    }
    report.check_finite()?;
    Ok(report)
}

struct Output<'a> {
    dir: &'a Path,
    report: &'a mut RunReport,
}

impl Output<'_> {
    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.report.outputs.push(name.into());
        Ok(())
    }
}

fn strict_check(report: &RunReport, config: &RunConfig) -> Result<()> {
    if config.solver.strict_dominance && !report.regime_ok {
        return Err(Error::Regime(report.violations().join("; ")));
    }
    Ok(())
}

/// Runs the configured stage, writes its CSV files and `run_report.json` into the output
/// directory and returns the report.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.check()?;
    let ctx = config.wave_context()?;
    let mut report = RunReport::new(config);
    let dir = config.output.clone();
    std::fs::create_dir_all(&dir)?;
    match config.mode {
        Mode::Tensors => run_tensors(config, &ctx, &dir, &mut report)?,
        Mode::Single => run_single(config, &ctx, &dir, &mut report)?,
        Mode::Nbody => run_nbody(config, &ctx, &dir, &mut report)?,
        Mode::Medium => run_medium(config, &ctx, &dir, &mut report)?,
        Mode::Nearfield => run_nearfield(config, &ctx, &dir, &mut report)?,
    }
    report.check_finite()?;
    report.outputs.push(REPORT_FILE.into());
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Contract(e.to_string()))?;
    std::fs::write(dir.join(REPORT_FILE), json + "\n")?;
    Ok(report)
}

fn run_tensors(config: &RunConfig, ctx: &WaveContext, dir: &Path, report: &mut RunReport) -> Result<()> {
    let body = config.body.as_ref().expect("checked");
    let timer = Timer::start();
    let t = body_tensors(body, config, ctx, true)?;
    timer.stop(report, "tensors");
    report.particles = 1;
    report.memory_estimate_bytes = series_bytes(t.panels);
    report.route = Some(match body.method {
        TensorMethod::Series => "series".into(),
        TensorMethod::ClosedForm => "closed-form".into(),
    });
    if t.panels > 0 {
        report.series = vec![series_entry("alpha", &t.alpha), series_entry("beta", &t.beta)];
    }
    let mut out = Output { dir, report };
    out.write("alpha.csv", |w| t.alpha.write_csv(w, body.refinement_level()))?;
    out.write("beta.csv", |w| t.beta.write_csv(w, body.refinement_level()))
}

fn run_single(config: &RunConfig, ctx: &WaveContext, dir: &Path, report: &mut RunReport) -> Result<()> {
    let body = config.body.as_ref().expect("checked");
    let timer = Timer::start();
    let t = body_tensors(body, config, ctx, true)?;
    timer.stop(report, "tensors");
    report.particles = 1;
    report.memory_estimate_bytes = series_bytes(t.panels);
    report.set_regime(vec![single_regime(&t.particle, ctx, config)]);
    strict_check(report, config)?;
    if t.panels > 0 {
        report.series = vec![series_entry("alpha", &t.alpha), series_entry("beta", &t.beta)];
    }
    let incident = config.incident.direction.into();
    let scatter = config.scatter.as_ref().expect("checked");
    let mut matrices = Vec::new();
    for (i, dir) in scatter.directions.iter().enumerate() {
        let frame = ScatterFrame::new(&incident, &(*dir).into()).map_err(|e| Error::InvalidConfiguration(format!("scatter.directions[{i}]: {e}")))?;
        let p = &t.particle;
        matrices.push((s_matrix_e(&frame.to_local(&p.alpha), &frame.to_local(&p.beta), &frame, ctx, p.volume), frame.theta));
    }
    let mut out = Output { dir, report };
    out.write("alpha.csv", |w| t.alpha.write_csv(w, body.refinement_level()))?;
    out.write("beta.csv", |w| t.beta.write_csv(w, body.refinement_level()))?;
    out.write("s_matrix.csv", |w| matrices.iter().try_for_each(|(m, theta)| write_s_matrix_csv(&mut *w, m, *theta)))
}

fn write_local_fields<W: Write>(w: W, scene: &Scene, fields: &LocalFields) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["particle".to_string(), "x".into(), "y".into(), "z".into()];
    for f in ["E", "H"] {
        for c in 1..=3 {
            header.push(format!("Re {f}{c}"));
            header.push(format!("Im {f}{c}"));
        }
    }
    out.write_record(&header).map_err(csv_error)?;
    for (i, (p, u)) in scene.particles.iter().zip(&fields.values).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.position.iter().map(|c| format!("{c:.17e}")));
        for z in u.iter() {
            row.push(format!("{:.17e}", z.re));
            row.push(format!("{:.17e}", z.im));
        }
        out.write_record(&row).map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn run_nbody(config: &RunConfig, ctx: &WaveContext, dir: &Path, report: &mut RunReport) -> Result<()> {
    let timer = Timer::start();
    let scene = build_scene(config, ctx, true, report)?;
    timer.stop(report, "tensors");
    strict_check(report, config)?;
    let options = solver_options(config);
    let timer = Timer::start();
    let (fields, bound) = scene.solve(&options)?;
    timer.stop(report, "solve");
    report.dominance_bound = Some(bound.bound);
    report.route = Some(match fields.route {
        crate::multiparticle::SolverRoute::FixedPoint => "fixed-point".into(),
        crate::multiparticle::SolverRoute::Direct => "direct".into(),
    });
    report.iterations = Some(fields.iterations);
    report.residual = Some(fields.residual);
    report.condition = fields.condition;
    let n = scene.particles.len();
    let solve = if bound.dominant { 4 * 6 * 16 * n as u64 } else { dense_bytes(6 * n) };
    report.memory_estimate_bytes = report.memory_estimate_bytes.max(solve);
    let grid = match &config.grid {
        Some(g) => {
            let timer = Timer::start();
            let grid = scene.field_grid(&g.region, g.resolution, &fields, options.guard_margin)?;
            timer.stop(report, "field_grid");
            Some(grid)
        }
        None => None,
    };
    let mut out = Output { dir, report };
    out.write("local_fields.csv", |w| write_local_fields(w, &scene, &fields))?;
    if let Some(grid) = grid {
        out.write("field_grid.csv", |w| grid.write_csv(w))?;
    }
    Ok(())
}

fn run_medium(config: &RunConfig, ctx: &WaveContext, dir: &Path, report: &mut RunReport) -> Result<()> {
    let timer = Timer::start();
    let density = medium_density(config, ctx, true, report)?;
    timer.stop(report, "tensors");
    strict_check(report, config)?;
    let lookup = config.medium.as_ref().expect("checked").lookup;
    let timer = Timer::start();
    let q = q_from_density(&density, ctx, lookup)?;
    let solution = solve_effective_field(&q, &config.incident.field()?, &effective_options(config))?;
    timer.stop(report, "solve");
    report.route = Some(
        match solution.route {
            EffectiveRoute::Auto => "auto",
            EffectiveRoute::Neumann => "neumann",
            EffectiveRoute::Direct => "direct",
        }
        .into(),
    );
    report.iterations = Some(solution.iterations);
    report.residual = Some(solution.residual);
    let meta = solution.meta().to_toml()?;
    let mut out = Output { dir, report };
    out.write("density.csv", |w| density.write_csv(w))?;
    out.write("effective_field.csv", |w| solution.write_csv(w))?;
    out.write("effective_field.toml", |w| Ok(w.write_all(meta.as_bytes())?))
}

fn run_nearfield(config: &RunConfig, ctx: &WaveContext, dir: &Path, report: &mut RunReport) -> Result<()> {
    let body = config.body.as_ref().expect("checked");
    let mesh = body.mesh(&config.base_dir)?;
    let size = mesh.characteristic_dimension();
    let regime = farzone_error_report(size, f64::INFINITY, ctx.k, &config.regime);
    let mut entry = RegimeEntry::new(0, size, None, ctx.k, &regime);
    entry.violations.retain(|v| !v.starts_with("kd"));
    entry.regime_ok = entry.violations.is_empty();
    report.particles = 1;
    report.set_regime(vec![entry]);
    strict_check(report, config)?;
    let options = current_options(config);
    report.memory_estimate_bytes = nearfield_memory(mesh.num_panels(), &options);
    let timer = Timer::start();
    let op = BoundaryOperatorA::assemble(&mesh, ctx, &config.quadrature)?;
    timer.stop(report, "assembly");
    let incident = config.incident.field()?;
    let timer = Timer::start();
    let current = solve_current(&op, &incident, ctx, &options)?;
    timer.stop(report, "solve");
    report.route = Some(if mesh.num_panels() <= options.dense_cap { "dense-lu" } else { "gmres" }.into());
    report.iterations = Some(current.iterations);
    report.residual = Some(current.residual);
    report.condition = Some(current.condition);
    let grid = match &config.grid {
        Some(g) => {
            let timer = Timer::start();
            let points = g.region.points(g.resolution)?;
            // Points on or inside the body are masked.
            let outside: Vec<bool> = points.iter().map(|x| outside_mesh(&mesh, x)).collect();
            let probe: Vec<Point> = points.iter().zip(&outside).filter(|(_, o)| **o).map(|(x, _)| *x).collect();
            let mut values = near_field_at(&probe, &current, &incident, ctx)?.into_iter();
            let values = outside.iter().map(|o| if *o { values.next() } else { None }).collect();
            timer.stop(report, "near_field");
            Some(FieldGrid { resolution: g.resolution, points, values })
        }
        None => None,
    };
    let mut out = Output { dir, report };
    out.write("current.csv", |w| current.write_csv(w))?;
    if let Some(grid) = grid {
        out.write("near_field.csv", |w| grid.write_csv(w))?;
    }
    Ok(())
}

// Solid angle of a closed mesh seen from x: 4π inside, 0 outside. Points within a small
// fraction of a panel diameter from the surface count as inside.
fn outside_mesh(mesh: &SurfaceMesh, x: &Point) -> bool {
    let mut omega = 0.0;
    for panel in mesh.panels() {
        if crate::geometry::point_triangle_distance(&panel.vertices, x) < 1e-6 * panel.diameter() {
            return false;
        }
        let [a, b, c] = panel.vertices.map(|v| v - x);
        let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
        let num = a.dot(&b.cross(&c));
        let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
        omega += 2.0 * num.atan2(den);
    }
    omega.abs() < 2.0 * std::f64::consts::PI
}
