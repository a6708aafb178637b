//! Command-line front end: argument parsing, run configuration, JSON
//! reports and the convergence study.

use clap::{Args, Parser, Subcommand};
use fbms_core::ambient::AmbientDomain;
use fbms_core::bounds::{certify, CertifyInput, CertifyOptions, FlavorPair, IndexCertificate};
use fbms_core::exemplars::ExemplarSurface;
use fbms_core::hodge::{harmonic_basis, BoundaryFlavor};
use fbms_core::jacobi::{morse_index, SolverMode, SurfaceSource};
use fbms_core::mesh::{read_field, read_mesh, topology, write_field, write_mesh, TriSurfaceMesh};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub const TOOL: &str = "fbms";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "FBMS_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_APPLICABLE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Usage(String),
    #[error("{0}")]
    Pipeline(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

fn pipeline<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Pipeline(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "fbms",
    version,
    about = "Morse index and index bounds of free boundary minimal surfaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Sample an exemplar surface and write its mesh and |A|² field.
    Exemplar(ExemplarArgs),
    /// Morse index over a refinement hierarchy.
    Index(IndexArgs),
    /// Harmonic 1-form basis of one boundary flavor.
    Hodge(HodgeArgs),
    /// Full certificate: homology, spectrum, harmonic forms, identities and
    /// theorem verdicts.
    Certify(CertifyArgs),
    /// Identity residuals and index over successively finer exemplar meshes.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Mesh file in the FBMS-MESH format.
    #[arg(long, conflicts_with = "exemplar")]
    pub mesh: Option<PathBuf>,
    /// Per-vertex |A|² values in the FBMS-FIELD format (mesh input only).
    #[arg(long, requires = "mesh")]
    pub fields: Option<PathBuf>,
    /// Built-in exemplar: disk or catenoid.
    #[arg(long)]
    pub exemplar: Option<String>,
    /// Ambient domain, e.g. "ball r=1". Defaults to the exemplar's domain
    /// or the unit ball.
    #[arg(long)]
    pub domain: Option<String>,
    /// Exemplar sampling resolution.
    #[arg(long, default_value_t = 16)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON report path; the report goes to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Single worker thread.
    #[arg(long)]
    pub deterministic: bool,
    /// Eigensolver: dense, iterative or auto.
    #[arg(long, default_value = "auto", value_parser = parse_solver)]
    pub solver: SolverMode,
}

fn parse_solver(s: &str) -> Result<SolverMode, String> {
    match s {
        "dense" => Ok(SolverMode::Dense),
        "iterative" => Ok(SolverMode::Iterative),
        "auto" => Ok(SolverMode::Auto),
        other => Err(format!("unknown solver '{other}' (expected dense, iterative or auto)")),
    }
}

#[derive(Debug, Args)]
pub struct ExemplarArgs {
    #[arg(long)]
    pub name: String,
    #[arg(long, default_value_t = 16)]
    pub resolution: usize,
    /// Mesh output path; the |A|² field goes next to it with extension
    /// `.field`.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    /// Initial number of eigenpairs.
    #[arg(long, default_value_t = 12)]
    pub m: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct HodgeArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    /// normal or tangential.
    #[arg(long, default_value = "normal")]
    pub flavor: String,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long, default_value_t = 0)]
    pub refine: usize,
    #[arg(long, default_value_t = 12)]
    pub m: usize,
    /// Weight of Theorem F.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2000)]
    pub convexity_samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[arg(long)]
    pub exemplar: String,
    /// Resolution of the coarsest level; each level doubles it.
    #[arg(long, default_value_t = 16)]
    pub resolution: usize,
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    #[arg(long, default_value_t = 12)]
    pub m: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubcommandKind {
    Exemplar,
    Index,
    Hodge,
    Certify,
    Convergence,
}

/// Everything a run depends on; embedded verbatim in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: SubcommandKind,
    pub mesh: Option<PathBuf>,
    pub fields: Option<PathBuf>,
    pub exemplar: Option<String>,
    pub domain: Option<String>,
    pub resolution: usize,
    pub refinements: usize,
    pub eigenpairs: usize,
    pub alpha: f64,
    pub flavor: Option<String>,
    pub levels: usize,
    pub out: Option<PathBuf>,
    /// Mesh output of the exemplar subcommand.
    pub mesh_out: Option<PathBuf>,
    pub deterministic: bool,
    pub solver: SolverMode,
    pub convexity_samples: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            subcommand: SubcommandKind::Certify,
            mesh: None,
            fields: None,
            exemplar: None,
            domain: None,
            resolution: 16,
            refinements: 0,
            eigenpairs: 12,
            alpha: 0.5,
            flavor: None,
            levels: 3,
            out: None,
            mesh_out: None,
            deterministic: false,
            solver: SolverMode::Auto,
            convexity_samples: 2000,
            seed: 7,
        }
    }
}

pub const MIN_RESOLUTION: usize = 4;
pub const MAX_REFINEMENTS: usize = 5;

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        if self.resolution < MIN_RESOLUTION {
            return usage(format!("resolution {} is below {MIN_RESOLUTION}", self.resolution));
        }
        if self.refinements > MAX_REFINEMENTS {
            return usage(format!("refinements {} exceed {MAX_REFINEMENTS}", self.refinements));
        }
        if self.eigenpairs < 1 {
            return usage("m must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return usage(format!("alpha {} is outside [0, 1]", self.alpha));
        }
        match self.subcommand {
            SubcommandKind::Exemplar | SubcommandKind::Convergence if self.exemplar.is_none() => {
                return usage("an exemplar name is required".into())
            }
            SubcommandKind::Index | SubcommandKind::Hodge | SubcommandKind::Certify
                if self.mesh.is_some() == self.exemplar.is_some() =>
            {
                return usage("give exactly one of --mesh and --exemplar".into())
            }
            _ => {}
        }
        if self.subcommand == SubcommandKind::Convergence && !(1..=MAX_REFINEMENTS + 1).contains(&self.levels) {
            return usage(format!("levels {} outside [1, {}]", self.levels, MAX_REFINEMENTS + 1));
        }
        if self.subcommand == SubcommandKind::Exemplar && self.mesh_out.is_none() {
            return usage("--out is required".into());
        }
        Ok(())
    }

    /// Worker threads: one in deterministic mode, otherwise the available
    /// parallelism capped by `FBMS_THREADS`.
    pub fn worker_threads(&self) -> usize {
        if self.deterministic {
            return 1;
        }
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        match std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(cap) if cap >= 1 => available.min(cap),
            _ => available,
        }
    }
}

impl From<&Cli> for RunConfig {
    fn from(cli: &Cli) -> Self {
        let base = RunConfig::default();
        let with_surface = |kind, s: &SurfaceArgs, c: &CommonArgs| RunConfig {
            subcommand: kind,
            mesh: s.mesh.clone(),
            fields: s.fields.clone(),
            exemplar: s.exemplar.clone(),
            domain: s.domain.clone(),
            resolution: s.resolution,
            out: c.out.clone(),
            deterministic: c.deterministic,
            solver: c.solver,
            ..base.clone()
        };
        match &cli.command {
            CliCommand::Exemplar(a) => RunConfig {
                subcommand: SubcommandKind::Exemplar,
                exemplar: Some(a.name.clone()),
                resolution: a.resolution,
                mesh_out: Some(a.out.clone()),
                out: a.report.clone(),
                ..base
            },
            CliCommand::Index(a) => RunConfig {
                refinements: a.refine,
                eigenpairs: a.m,
                ..with_surface(SubcommandKind::Index, &a.surface, &a.common)
            },
            CliCommand::Hodge(a) => RunConfig {
                flavor: Some(a.flavor.clone()),
                ..with_surface(SubcommandKind::Hodge, &a.surface, &a.common)
            },
            CliCommand::Certify(a) => RunConfig {
                refinements: a.refine,
                eigenpairs: a.m,
                alpha: a.alpha,
                convexity_samples: a.convexity_samples,
                seed: a.seed,
                ..with_surface(SubcommandKind::Certify, &a.surface, &a.common)
            },
            CliCommand::Convergence(a) => RunConfig {
                subcommand: SubcommandKind::Convergence,
                exemplar: Some(a.exemplar.clone()),
                resolution: a.resolution,
                levels: a.levels,
                eigenpairs: a.m,
                out: a.common.out.clone(),
                deterministic: a.common.deterministic,
                solver: a.common.solver,
                ..base
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NotApplicable,
    Error,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub status: RunStatus,
    pub result: Option<serde_json::Value>,
    pub error: Option<String>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            RunStatus::Ok => EXIT_OK,
            RunStatus::NotApplicable => EXIT_NOT_APPLICABLE,
            RunStatus::Error => EXIT_ERROR,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Outcome of a subcommand before it is wrapped into a report.
struct Outcome {
    result: serde_json::Value,
    status: RunStatus,
    summary: String,
}

fn to_value<S: Serialize>(x: &S) -> serde_json::Value {
    serde_json::to_value(x).expect("results serialize")
}

/// A surface read from disk or sampled from an exemplar.
enum LoadedSurface {
    Exemplar(ExemplarSurface<f64>),
    Mesh {
        mesh: TriSurfaceMesh<f64>,
        domain: AmbientDomain<f64>,
        a_squared: Option<Vec<f64>>,
        name: String,
    },
}

fn load_surface(config: &RunConfig) -> Result<LoadedSurface, CliError> {
    let domain = config
        .domain
        .as_deref()
        .map(AmbientDomain::from_spec)
        .transpose()
        .map_err(pipeline)?;
    if let Some(name) = &config.exemplar {
        let e = ExemplarSurface::by_name(name).map_err(pipeline)?;
        return Ok(LoadedSurface::Exemplar(match domain {
            Some(d) => e.with_domain(d),
            None => e,
        }));
    }
    let path = config
        .mesh
        .as_ref()
        .ok_or_else(|| CliError::Usage("no input surface".into()))?;
    let mesh = read_mesh::<f64>(path).map_err(pipeline)?;
    let a_squared = match &config.fields {
        Some(p) => {
            let a = read_field::<f64>(p).map_err(pipeline)?;
            if a.len() != mesh.n_vertices() {
                return Err(CliError::Pipeline(format!(
                    "{} field values for {} vertices",
                    a.len(),
                    mesh.n_vertices()
                )));
            }
            Some(a)
        }
        None => None,
    };
    Ok(LoadedSurface::Mesh {
        mesh,
        domain: domain.unwrap_or_else(AmbientDomain::unit_ball),
        a_squared,
        name: path.display().to_string(),
    })
}

fn run_exemplar(config: &RunConfig) -> Result<Outcome, CliError> {
    let e = ExemplarSurface::<f64>::by_name(config.exemplar.as_deref().unwrap_or("")).map_err(pipeline)?;
    let s = e.sample_mesh(config.resolution).map_err(pipeline)?;
    let mesh_path = config.mesh_out.clone().expect("validated");
    let field_path = mesh_path.with_extension("field");
    write_mesh(&mesh_path, &s.mesh).map_err(pipeline)?;
    write_field(&field_path, &s.fields.a_squared).map_err(pipeline)?;
    let topo = topology(&s.mesh).map_err(pipeline)?;
    let result = serde_json::json!({
        "name": e.name(),
        "mesh": mesh_path,
        "fields": field_path,
        "vertices": s.mesh.n_vertices(),
        "triangles": s.mesh.n_triangles(),
        "topology": topo,
    });
    Ok(Outcome {
        summary: format!(
            "{}: {} vertices, {} triangles, genus {}, {} boundary components -> {}",
            e.name(),
            s.mesh.n_vertices(),
            s.mesh.n_triangles(),
            topo.genus,
            topo.boundary_components,
            mesh_path.display()
        ),
        result,
        status: RunStatus::Ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexResult {
    pub index: usize,
    pub report: fbms_core::jacobi::StabilityReport,
}

fn run_index(config: &RunConfig) -> Result<Outcome, CliError> {
    let (index, report) = match load_surface(config)? {
        LoadedSurface::Exemplar(e) => {
            let s = e.sample_mesh(config.resolution).map_err(pipeline)?;
            morse_index(
                &s.mesh,
                &SurfaceSource::Exemplar(&e),
                config.refinements,
                config.eigenpairs,
                config.solver,
            )
        }
        LoadedSurface::Mesh {
            mesh,
            domain,
            a_squared,
            ..
        } => morse_index(
            &mesh,
            &SurfaceSource::Mesh {
                domain: &domain,
                a_squared,
            },
            config.refinements,
            config.eigenpairs,
            config.solver,
        ),
    }
    .map_err(pipeline)?;
    let summary = format!(
        "index {index} (levels {:?}, stable {})",
        report.levels.iter().map(|l| l.negative_count).collect::<Vec<_>>(),
        report.stable
    );
    Ok(Outcome {
        result: to_value(&IndexResult { index, report }),
        status: RunStatus::Ok,
        summary,
    })
}

fn run_hodge(config: &RunConfig) -> Result<Outcome, CliError> {
    let flavor: BoundaryFlavor = config.flavor.as_deref().unwrap_or("normal").parse().map_err(pipeline)?;
    let mesh = match load_surface(config)? {
        LoadedSurface::Exemplar(e) => e.sample_mesh(config.resolution).map_err(pipeline)?.mesh,
        LoadedSurface::Mesh { mesh, .. } => mesh,
    };
    let basis = harmonic_basis(&mesh, flavor, config.solver).map_err(pipeline)?;
    Ok(Outcome {
        summary: format!(
            "{} harmonic space: dimension {}, spectral gap {:.4e}",
            flavor.name(),
            basis.dim(),
            basis.spectral_gap
        ),
        result: to_value(&basis.record(&mesh)),
        status: RunStatus::Ok,
    })
}

fn certify_options(config: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        refinements: config.refinements,
        eigenpairs: config.eigenpairs,
        alpha: config.alpha,
        mode: config.solver,
        convexity_samples: config.convexity_samples,
        seed: config.seed,
    }
}

fn certify_loaded(surface: &LoadedSurface, config: &RunConfig) -> Result<IndexCertificate, CliError> {
    let options = certify_options(config);
    match surface {
        LoadedSurface::Exemplar(e) => certify(
            &CertifyInput::Exemplar {
                surface: e,
                resolution: config.resolution,
            },
            &options,
        ),
        LoadedSurface::Mesh {
            mesh,
            domain,
            a_squared,
            name,
        } => certify(
            &CertifyInput::Mesh {
                name: name.clone(),
                mesh,
                domain,
                a_squared: a_squared.clone(),
            },
            &options,
        ),
    }
    .map_err(pipeline)
}

fn run_certify(config: &RunConfig) -> Result<Outcome, CliError> {
    let cert = certify_loaded(&load_surface(config)?, config)?;
    let status = if cert.verdicts.any_not_applicable() {
        RunStatus::NotApplicable
    } else {
        RunStatus::Ok
    };
    let v = &cert.verdicts;
    let summary = format!(
        "{}: index {} | A {:?} (bound {}) B {:?} (bound {}) C {:?} (bound {}) F {:?} (bound {}) | {} errors",
        cert.surface.name,
        cert.spectrum
            .as_ref()
            .map_or("unavailable".to_string(), |s| s.index.to_string()),
        v.a.status,
        v.a.bound,
        v.b.status,
        v.b.bound,
        v.c.status,
        v.c.bound,
        v.f.status,
        v.f.bound,
        cert.diagnostics.errors.len()
    );
    Ok(Outcome {
        result: to_value(&cert),
        status,
        summary,
    })
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub resolution: usize,
    pub vertices: usize,
    pub index: Option<usize>,
    pub resolved_index: Option<usize>,
    pub harmonic_dims: FlavorPair<Option<usize>>,
    pub homology_dims: FlavorPair<usize>,
    /// Residual name to value; see [`RESIDUALS`].
    pub residuals: BTreeMap<String, Option<f64>>,
    pub errors: Vec<String>,
}

/// Residuals tracked by the convergence study.
pub const RESIDUALS: [&str; 7] = [
    "prop41_1",
    "prop41_2",
    "bochner_1",
    "bochner_2",
    "ident_1",
    "ident_2",
    "boundary_algebra",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub exemplar: String,
    pub levels: Vec<ConvergenceLevel>,
    /// Observed order `log₂(r_{l−1} / r_l)` per residual and level `l ≥ 1`.
    pub orders: BTreeMap<String, Vec<Option<f64>>>,
}

fn level_row(level: usize, resolution: usize, cert: &IndexCertificate) -> ConvergenceLevel {
    let id = &cert.identities;
    let values = [
        id.test_functions_1.map(|c| c.relative_residual),
        id.test_functions_2.map(|c| c.relative_residual),
        id.bochner_1.map(|c| c.relative_residual),
        id.bochner_2.map(|c| c.relative_residual),
        id.ident_1.map(|c| c.relative_residual),
        id.ident_2.map(|c| c.relative_residual),
        id.boundary_algebra.map(|b| b.max_defect),
    ];
    ConvergenceLevel {
        level,
        resolution,
        vertices: cert.surface.vertices,
        index: cert.spectrum.as_ref().map(|s| s.index),
        resolved_index: cert.spectrum.as_ref().and_then(|s| s.resolved_index),
        harmonic_dims: cert.hodge.dims,
        homology_dims: cert.hodge.homology_dims,
        residuals: RESIDUALS.iter().map(|n| n.to_string()).zip(values).collect(),
        errors: cert.diagnostics.errors.clone(),
    }
}

/// Certifies the exemplar at resolutions `r, 2r, 4r, …`, each sampled
/// analytically, and reports residuals with their observed orders. Levels
/// run on up to `threads` workers; rows are assembled in level order.
pub fn convergence_study(config: &RunConfig, threads: usize) -> Result<ConvergenceReport, CliError> {
    let surface = load_surface(config)?;
    let name = config.exemplar.clone().unwrap_or_default();
    let resolutions: Vec<usize> = (0..config.levels).map(|l| config.resolution << l).collect();
    let rows: Mutex<Vec<Option<Result<ConvergenceLevel, CliError>>>> =
        Mutex::new((0..resolutions.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let work = || loop {
        let l = next.fetch_add(1, Ordering::SeqCst);
        if l >= resolutions.len() {
            break;
        }
        let level_config = RunConfig {
            resolution: resolutions[l],
            refinements: 0,
            ..config.clone()
        };
        let row = certify_loaded(&surface, &level_config).map(|c| level_row(l, resolutions[l], &c));
        rows.lock().expect("no worker panicked")[l] = Some(row);
    };
    let threads = threads.clamp(1, resolutions.len().max(1));
    if threads == 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    let levels = rows
        .into_inner()
        .expect("no worker panicked")
        .into_iter()
        .map(|r| r.expect("every level ran"))
        .collect::<Result<Vec<_>, _>>()?;
    let orders = RESIDUALS
        .iter()
        .map(|&n| {
            let col: Vec<Option<f64>> = levels.iter().map(|l| l.residuals[n]).collect();
            let ord = col
                .windows(2)
                .map(|w| match (w[0], w[1]) {
                    (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
                    _ => None,
                })
                .collect();
            (n.to_string(), ord)
        })
        .collect();
    Ok(ConvergenceReport {
        exemplar: name,
        levels,
        orders,
    })
}

fn run_convergence(config: &RunConfig) -> Result<Outcome, CliError> {
    let report = convergence_study(config, config.worker_threads())?;
    let mut summary = format!("{} convergence study\n", report.exemplar);
    summary.push_str("res  index  dims(n,t)  prop41_1  prop41_2  bochner_1  bochner_2\n");
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
    let opt = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
    for l in &report.levels {
        summary.push_str(&format!(
            "{:<4} {:<6} {},{}        {}  {}  {}  {}\n",
            l.resolution,
            opt(l.index),
            opt(l.harmonic_dims.normal),
            opt(l.harmonic_dims.tangential),
            fmt(l.residuals["prop41_1"]),
            fmt(l.residuals["prop41_2"]),
            fmt(l.residuals["bochner_1"]),
            fmt(l.residuals["bochner_2"]),
        ));
    }
    Ok(Outcome {
        result: to_value(&report),
        status: RunStatus::Ok,
        summary: summary.trim_end().to_string(),
    })
}

/// Runs one configuration and returns the report without writing it.
pub fn execute(config: &RunConfig) -> Report {
    let outcome = config.validate().and_then(|_| match config.subcommand {
        SubcommandKind::Exemplar => run_exemplar(config),
        SubcommandKind::Index => run_index(config),
        SubcommandKind::Hodge => run_hodge(config),
        SubcommandKind::Certify => run_certify(config),
        SubcommandKind::Convergence => run_convergence(config),
    });
    let (status, result, error, summary) = match outcome {
        Ok(o) => (o.status, Some(o.result), None, Some(o.summary)),
        Err(e) => (RunStatus::Error, None, Some(e.to_string()), None),
    };
    if let Some(s) = summary {
        if config.out.is_some() || config.subcommand == SubcommandKind::Exemplar {
            println!("{s}");
        }
    }
    Report {
        tool: TOOL.into(),
        version: VERSION.into(),
        config: config.clone(),
        status,
        result,
        error,
    }
}

fn write_report(path: &Path, report: &Report) -> Result<(), CliError> {
    std::fs::write(path, report.to_json()).map_err(|source| CliError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Runs one configuration, writes its report and returns the exit code.
pub fn run(config: &RunConfig) -> i32 {
    let report = execute(config);
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    match &config.out {
        Some(path) => {
            if let Err(e) = write_report(path, &report) {
                eprintln!("error: {e}");
                return EXIT_ERROR;
            }
        }
        None if config.subcommand != SubcommandKind::Exemplar => print!("{}", report.to_json()),
        None => {}
    }
    report.exit_code()
}
