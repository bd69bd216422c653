//! `meshfit` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 refit did not converge,
//! 4 transfer queries without samples, 5 file I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use meshfit::config::{ConfigError, RefitConfig};
use meshfit::demo::DemoName;
use meshfit::mesh::io::{load_mesh, save_mesh, MeshFormat};
use meshfit::mesh::quality::{quality_report, QualityReport};
use meshfit::mesh::region::Region;
use meshfit::solver::{refit, NewtonReport, SolverError};
use meshfit::transfer::{
    gauss_points, transfer_fields, FieldSamples, FieldValues, Mat3, TransferConfig, TransferError,
};
use meshfit::{Mesh, MeshError, Vec3};

#[derive(Debug, Parser)]
#[command(name = "meshfit", version, about = "Hexahedral mesh refitting and field transfer")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a demonstration mesh.
    Demo(DemoArgs),
    /// Regularize a mesh by minimizing the distortion potential.
    Refit(RefitArgs),
    /// Transfer field samples from an old mesh to a new one.
    Transfer(TransferArgs),
    /// Per-element skewness report.
    Quality(QualityArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Native,
    Vtk,
}

impl From<Format> for MeshFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Native => MeshFormat::Native,
            Format::Vtk => MeshFormat::VtkLegacy,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Demo {
    DistortedGrid,
    Pyramid,
    ShearedBlock,
    LocalizedGrid,
    HeavyDistorted,
}

impl From<Demo> for DemoName {
    fn from(d: Demo) -> Self {
        match d {
            Demo::DistortedGrid => DemoName::DistortedGrid,
            Demo::Pyramid => DemoName::Pyramid,
            Demo::ShearedBlock => DemoName::ShearedBlock,
            Demo::LocalizedGrid => DemoName::LocalizedGrid,
            Demo::HeavyDistorted => DemoName::HeavyDistorted,
        }
    }
}

#[derive(Debug, Args)]
struct DemoArgs {
    name: Demo,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = meshfit::demo::DEFAULT_SEED)]
    seed: u64,
    /// Output format; defaults to the extension of --out.
    #[arg(long)]
    format: Option<Format>,
    /// Also write synthetic fields into this directory: a nodal linear
    /// scalar (linear.csv) and an SPD tensor at quadrature points (stretch.csv).
    #[arg(long)]
    fields: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RefitArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Refit configuration: a JSON file, or inline JSON starting with '{'.
    #[arg(long)]
    config: Option<String>,
    /// Directory for newton.csv, quality_before.csv and quality_after.csv.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct TransferArgs {
    #[arg(long)]
    old_mesh: PathBuf,
    #[arg(long)]
    new_mesh: PathBuf,
    /// Field to transfer as name=path (repeatable).
    #[arg(long = "field", value_parser = parse_field, required = true)]
    fields: Vec<(String, PathBuf)>,
    /// Transfer configuration: a JSON file, or inline JSON starting with '{'.
    #[arg(long)]
    config: String,
    /// Output directory; each field is written to <out>/<name>.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct QualityArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Element-centroid filter: sphere:cx,cy,cz,r or ring:r_ring,z,width.
    #[arg(long)]
    region: Option<Region>,
    /// Per-element CSV output.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
}

fn parse_field(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("field '{s}' must look like name=path")),
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Orphans(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Orphans(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

fn mesh_error(path: &Path, e: MeshError) -> CliError {
    match e {
        MeshError::Io(_) | MeshError::Parse { .. } => CliError::Io(format!("{}: {e}", path.display())),
        other => CliError::Config(format!("{}: {other}", path.display())),
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<TransferError> for CliError {
    fn from(e: TransferError) -> Self {
        match e {
            TransferError::Orphans(_) => CliError::Orphans(e.to_string()),
            TransferError::Io { .. } | TransferError::Csv(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn format_for(path: &Path, format: Option<Format>) -> MeshFormat {
    format.map_or_else(|| MeshFormat::from_path(path), MeshFormat::from)
}

fn read_mesh(path: &Path, format: Option<Format>) -> Result<Mesh, CliError> {
    load_mesh(path, format_for(path, format)).map_err(|e| mesh_error(path, e))
}

fn write_mesh(mesh: &Mesh, path: &Path, format: Option<Format>) -> Result<(), CliError> {
    save_mesh(mesh, path, format_for(path, format)).map_err(|e| mesh_error(path, e))
}

/// Inline JSON when the argument starts with '{', otherwise a file path.
fn config_text(arg: &str) -> Result<String, CliError> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_owned())
    } else {
        std::fs::read_to_string(arg).map_err(|e| io_error(Path::new(arg), e))
    }
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| io_error(path, e))
}

fn write_quality(report: &QualityReport, path: &Path) -> Result<(), CliError> {
    report.write_csv(create_file(path)?).map_err(|e| io_error(path, e))
}

fn cmd_demo(args: &DemoArgs) -> Result<(), CliError> {
    let name = DemoName::from(args.name);
    let mesh = name.generate(args.seed);
    write_mesh(&mesh, &args.out, args.format)?;
    println!(
        "{}: {} elements, {} nodes -> {}",
        name.as_str(),
        mesh.num_elements(),
        mesh.num_nodes(),
        args.out.display()
    );
    if let Some(dir) = &args.fields {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        let linear = FieldValues::Scalar(mesh.nodes.iter().map(|x| 1.0 + 2.0 * x.x - x.y + 0.5 * x.z).collect());
        let qp = gauss_points(&mesh);
        let stretch = FieldValues::Tensor(qp.iter().map(synthetic_stretch).collect());
        for (file, samples) in [
            ("linear.csv", FieldSamples::new(mesh.nodes.clone(), linear)?),
            ("stretch.csv", FieldSamples::new(qp, stretch)?),
        ] {
            let path = dir.join(file);
            samples.save(&path)?;
            println!("field {} ({} samples)", path.display(), samples.len());
        }
    }
    Ok(())
}

/// Smooth SPD tensor field used by the demo fields.
fn synthetic_stretch(x: &Vec3) -> Mat3 {
    let a = Mat3::new(1.0, 0.2 * x.y, 0.0, 0.0, 1.0 + 0.3 * x.x, 0.1 * x.z, 0.1 * x.x, 0.0, 1.0);
    a.transpose() * a
}

fn write_refit_report(dir: &Path, newton: &NewtonReport, before: &QualityReport, after: &QualityReport) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join("newton.csv");
    newton.write_csv(create_file(&path)?).map_err(|e| io_error(&path, e))?;
    write_quality(before, &dir.join("quality_before.csv"))?;
    write_quality(after, &dir.join("quality_after.csv"))
}

fn cmd_refit(args: &RefitArgs) -> Result<(), CliError> {
    let mesh = read_mesh(&args.mesh, args.format)?;
    let cfg = match &args.config {
        Some(arg) => RefitConfig::from_json(&config_text(arg)?)?,
        None => RefitConfig::default(),
    };
    log::debug!("effective config: {}", cfg.to_json());
    let problem = cfg.problem(&mesh)?;
    let before = quality_report(&mesh, None);
    let (positions, report, failure) = match refit(&problem) {
        Ok(r) => (r.positions, r.report, None),
        Err(SolverError::NonConvergence { reason, positions, report }) => {
            (positions, report, Some(format!("refit did not converge: {reason}")))
        }
        Err(e @ (SolverError::Singular { .. } | SolverError::Invalid(_))) => return Err(CliError::Config(e.to_string())),
        Err(e) => return Err(CliError::NotConverged(e.to_string())),
    };
    let mut out = problem.mesh.clone();
    out.nodes = positions;
    let after = quality_report(&out, None);
    write_mesh(&out, &args.out, args.format)?;
    if let Some(dir) = &args.report {
        write_refit_report(dir, &report, &before, &after)?;
    }
    println!("newton: {report}");
    println!("before: {}", before.summary);
    println!("after:  {}", after.summary);
    match failure {
        None => Ok(()),
        Some(msg) => Err(CliError::NotConverged(format!("{msg}; best-so-far mesh written to {}", args.out.display()))),
    }
}

/// Tensors whose symmetric part is not positive definite.
fn spd_violations(values: &FieldValues) -> Option<usize> {
    match values {
        FieldValues::Scalar(_) => None,
        FieldValues::Tensor(ts) => {
            Some(ts.iter().filter(|t| ((*t + t.transpose()) * 0.5).cholesky().is_none()).count())
        }
    }
}

fn cmd_transfer(args: &TransferArgs) -> Result<(), CliError> {
    let old = read_mesh(&args.old_mesh, args.format)?;
    let new = read_mesh(&args.new_mesh, args.format)?;
    let cfg = TransferConfig::from_json(&config_text(&args.config)?)?;
    let fields = args
        .fields
        .iter()
        .map(|(name, path)| Ok((name.clone(), FieldSamples::load(path)?)))
        .collect::<Result<Vec<_>, TransferError>>()?;
    let out = transfer_fields(&old, &new, &fields, &cfg)?;
    std::fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    for (field, (_, input)) in out.iter().zip(&fields) {
        let path = args.out.join(format!("{}.csv", field.name));
        field.samples.save(&path)?;
        let spd = match (spd_violations(&input.values), spd_violations(&field.samples.values)) {
            (Some(0), Some(n)) => format!(", {n} SPD violations"),
            _ => String::new(),
        };
        println!(
            "{}: {:?} at {:?}, {}{spd} -> {}",
            field.name,
            field.scheme,
            field.location,
            field.summary,
            path.display()
        );
    }
    Ok(())
}

fn cmd_quality(args: &QualityArgs) -> Result<(), CliError> {
    let mesh = read_mesh(&args.mesh, args.format)?;
    let report = match &args.region {
        Some(region) => quality_report(&mesh, Some(&|x: &Vec3| region.contains(x))),
        None => quality_report(&mesh, None),
    };
    if let Some(path) = &args.report {
        write_quality(&report, path)?;
    }
    println!("{}", report.summary);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Demo(a) => cmd_demo(a),
        Command::Refit(a) => cmd_refit(a),
        Command::Transfer(a) => cmd_transfer(a),
        Command::Quality(a) => cmd_quality(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
