//! Command-line front end: trajectory tools, condition controls and capture
//! are separate subcommands sharing one binary.

pub mod error;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::Vector3;

use trajcap_core::align::{self, RansacParams, SimilarityTransform, DEFAULT_METERS_PER_UNIT, DEFAULT_STRIDE_M};
use trajcap_core::conditions::{ConditionSet, DegradationTable, TimeOfDay, Weather};
use trajcap_core::poseio;
use trajcap_core::simworld::{self, Aabb, Intrinsics};
use trajcap_core::trajectory::{self, DensifyParams, EulerRotation, OrientationMode};

pub use error::{CliError, Result};
use output::{read_text, write_all, write_one};

#[derive(Debug, Parser)]
#[command(name = "trajcap", version, about = "Synthetic camera-pose trajectories, capture and alignment scoring")]
pub struct Cli {
    /// Seed for every random draw; identical inputs and seed give identical output.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the visitation path of a sparse trajectory.
    Expand(ExpandArgs),
    /// Generate trajectory_dense.txt from a sparse trajectory.
    Densify(DensifyArgs),
    /// Add Gaussian noise to a dense trajectory's camera positions and yaw.
    Perturb(PerturbArgs),
    /// Retrace a dense trajectory in a synthetic world and write 6dpose_list.txt.
    Capture(CaptureArgs),
    /// Simulate SfM camera positions for a manifest under a hidden gauge.
    Simrecon(SimreconArgs),
    /// Align reconstructed positions to the manifest and report errors.
    Align(AlignArgs),
    /// Estimate meters per game unit from stride samples.
    Calibrate(CalibrateArgs),
    /// Keep every n-th manifest record.
    Subsample(SubsampleArgs),
    /// Draw sparse and/or dense trajectories as SVG.
    Plot(PlotArgs),
    /// Export a world, reconstruction or manifest as a PLY point cloud.
    ExportPly(ExportPlyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum LabelStyle {
    #[default]
    Roman,
    Number,
}

#[derive(Debug, Args)]
pub struct SparseInput {
    /// vertex.txt
    #[arg(long)]
    pub vertex: PathBuf,
    /// vertex_order.txt
    #[arg(long)]
    pub order: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub input: SparseInput,
    #[arg(long, value_enum, default_value_t = LabelStyle::Roman)]
    pub labels: LabelStyle,
}

#[derive(Debug, Args)]
pub struct DensifyArgs {
    #[command(flatten)]
    pub input: SparseInput,
    #[arg(long, default_value = "trajectory_dense.txt")]
    pub out: PathBuf,
    /// Walking speed in game units per second.
    #[arg(long, default_value_t = 1.6)]
    pub speed: f64,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    /// Camera height above the protagonist.
    #[arg(long, default_value_t = 0.75, allow_hyphen_values = true)]
    pub eye_offset: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub ground_z: f64,
    /// File of "rx ry rz" lines, one per output frame; default follows the path.
    #[arg(long)]
    pub orientations: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[arg(long)]
    pub dense: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub pos_sigma: f64,
    /// Degrees.
    #[arg(long, default_value_t = 0.0)]
    pub yaw_sigma: f64,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    #[arg(long, value_enum, default_value_t = WeatherArg::Clear)]
    pub weather: WeatherArg,
    #[arg(long = "time", value_enum, default_value_t = TimeArg::Day)]
    pub time_of_day: TimeArg,
    #[arg(long, default_value_t = 0.0)]
    pub vehicle_density: f64,
    #[arg(long, default_value_t = 0.0)]
    pub pedestrian_density: f64,
    /// Degradation table overriding the built-in defaults.
    #[arg(long)]
    pub profile: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeatherArg {
    Clear,
    Rain,
    Snow,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimeArg {
    Day,
    Night,
}

impl ConditionArgs {
    pub fn condition_set(&self) -> ConditionSet {
        ConditionSet {
            weather: match self.weather {
                WeatherArg::Clear => Weather::Clear,
                WeatherArg::Rain => Weather::Rain,
                WeatherArg::Snow => Weather::Snow,
            },
            time_of_day: match self.time_of_day {
                TimeArg::Day => TimeOfDay::Day,
                TimeArg::Night => TimeOfDay::Night,
            },
            vehicle_density: self.vehicle_density,
            pedestrian_density: self.pedestrian_density,
        }
    }

    fn table(&self) -> Result<DegradationTable> {
        match &self.profile {
            None => Ok(DegradationTable::default()),
            Some(p) => DegradationTable::parse_over(DegradationTable::default(), &read_text(p)?)
                .map_err(|e| CliError::from(e).in_file(p)),
        }
    }
}

#[derive(Debug, Args)]
pub struct CaptureArgs {
    #[arg(long)]
    pub dense: PathBuf,
    /// Receives 6dpose_list.txt, observations.txt and world.txt.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Existing world file; otherwise one is generated.
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub landmarks: usize,
    /// minx,miny,minz,maxx,maxy,maxz; default pads the trajectory extent.
    #[arg(long, value_parser = parse_floats::<6>, allow_hyphen_values = true)]
    pub bounds: Option<[f64; 6]>,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 60.0)]
    pub hfov: f64,
    #[arg(long, default_value_t = 1920)]
    pub width: u32,
    #[arg(long, default_value_t = 1080)]
    pub height: u32,
    #[arg(long, default_value_t = 200.0)]
    pub max_range: f64,
    /// Pixel noise before the weather multiplier.
    #[arg(long, default_value_t = 1.0)]
    pub pixel_sigma: f64,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[command(flatten)]
    pub conditions: ConditionArgs,
}

#[derive(Debug, Args)]
pub struct SimreconArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long, value_parser = parse_floats::<3>, default_value = "0,0,1", allow_hyphen_values = true)]
    pub axis: [f64; 3],
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub angle_deg: f64,
    #[arg(long, value_parser = parse_floats::<3>, default_value = "0,0,0", allow_hyphen_values = true)]
    pub translation: [f64; 3],
    /// Position noise in reconstruction units.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    #[arg(long, default_value_t = 10.0)]
    pub outlier_radius: f64,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    #[arg(long)]
    pub recon: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Inlier bound in game units.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 0.999)]
    pub confidence: f64,
    #[arg(long, default_value_t = DEFAULT_METERS_PER_UNIT)]
    pub meters_per_unit: f64,
    /// Fit a rigid transform instead of a similarity.
    #[arg(long)]
    pub no_scale: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Lines of "x y z steps_since_previous".
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long, default_value_t = DEFAULT_STRIDE_M)]
    pub stride_m: f64,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub stride: usize,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long, requires = "order")]
    pub vertex: Option<PathBuf>,
    #[arg(long, requires = "vertex")]
    pub order: Option<PathBuf>,
    #[arg(long)]
    pub dense: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PlySource {
    #[arg(long)]
    pub world: Option<PathBuf>,
    #[arg(long)]
    pub recon: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPlyArgs {
    #[command(flatten)]
    pub source: PlySource,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_floats<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got {}", parts.len()));
    }
    let mut out = [0.0; N];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("'{p}' is not a finite number"))?;
    }
    Ok(out)
}

/// Distinct stream seeds for the independent random parts of one command.
fn derive_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn load_sparse(input: &SparseInput) -> Result<trajectory::SparseTrajectory> {
    let vertex = read_text(&input.vertex)?;
    let order = read_text(&input.order)?;
    Ok(poseio::read_sparse(&vertex, &order)?)
}

fn load_dense(path: &Path, fps: f64) -> Result<trajectory::DenseTrajectory> {
    poseio::read_dense(&read_text(path)?, fps).map_err(|e| CliError::from(e).in_file(path))
}

fn load_manifest(path: &Path) -> Result<poseio::CaptureManifest> {
    poseio::read_manifest(&read_text(path)?).map_err(|e| CliError::from(e).in_file(path))
}

fn load_orientations(path: &Path) -> Result<Vec<EulerRotation>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let vals: Vec<f64> = toks.iter().filter_map(|t| t.parse::<f64>().ok()).filter(|v| v.is_finite()).collect();
        if toks.len() != 3 || vals.len() != 3 {
            return Err(CliError::Input(format!(
                "{}: line {}: expected 'rx ry rz'",
                path.display(),
                i + 1
            )));
        }
        out.push(EulerRotation::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

/// Runs one parsed command. Returns the text to print on stdout.
pub fn run(cli: Cli) -> Result<String> {
    let seed = cli.seed;
    match cli.command {
        Command::Expand(a) => cmd_expand(&a),
        Command::Densify(a) => cmd_densify(&a),
        Command::Perturb(a) => cmd_perturb(&a, seed),
        Command::Capture(a) => cmd_capture(&a, seed),
        Command::Simrecon(a) => cmd_simrecon(&a, seed),
        Command::Align(a) => cmd_align(&a, seed),
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::Subsample(a) => cmd_subsample(&a),
        Command::Plot(a) => cmd_plot(&a),
        Command::ExportPly(a) => cmd_export_ply(&a),
    }
}

pub fn cmd_expand(a: &ExpandArgs) -> Result<String> {
    let sparse = load_sparse(&a.input)?;
    let path = sparse.expand_visitation()?;
    let labels: Vec<String> = path
        .iter()
        .map(|&i| match a.labels {
            LabelStyle::Roman => plot::roman(i + 1),
            LabelStyle::Number => (i + 1).to_string(),
        })
        .collect();
    Ok(format!("{}\n", labels.join(" ")))
}

pub fn cmd_densify(a: &DensifyArgs) -> Result<String> {
    let sparse = load_sparse(&a.input)?;
    let orientation_mode = match &a.orientations {
        Some(p) => OrientationMode::Supplied(load_orientations(p)?),
        None => OrientationMode::Forward,
    };
    let params = DensifyParams {
        speed: a.speed,
        fps: a.fps,
        eye_offset_z: a.eye_offset,
        ground_z: a.ground_z,
        orientation_mode,
    };
    let dense = trajectory::densify(&sparse, &params)?;
    write_one(&a.out, poseio::write_dense(&dense))?;
    Ok(format!("{} frames -> {}\n", dense.len(), a.out.display()))
}

pub fn cmd_perturb(a: &PerturbArgs, seed: u64) -> Result<String> {
    let dense = load_dense(&a.dense, a.fps)?;
    let noisy = trajectory::perturb(&dense, a.pos_sigma, a.yaw_sigma, seed)?;
    write_one(&a.out, poseio::write_dense(&noisy))?;
    Ok(format!("{} frames -> {}\n", noisy.len(), a.out.display()))
}

fn default_bounds(dense: &trajectory::DenseTrajectory) -> Result<Aabb> {
    let mut lo = Vector3::repeat(f64::MAX);
    let mut hi = Vector3::repeat(f64::MIN);
    for s in dense.samples() {
        lo = lo.inf(&s.camera_pos);
        hi = hi.sup(&s.camera_pos);
    }
    let pad = Vector3::new(30.0, 30.0, 0.0);
    let lo = lo - pad - Vector3::new(0.0, 0.0, 5.0);
    let hi = hi + pad + Vector3::new(0.0, 0.0, 15.0);
    Ok(Aabb::new(lo, hi)?)
}

pub const MANIFEST_FILE: &str = "6dpose_list.txt";
pub const OBSERVATIONS_FILE: &str = "observations.txt";
pub const WORLD_FILE: &str = "world.txt";

pub fn cmd_capture(a: &CaptureArgs, seed: u64) -> Result<String> {
    let dense = load_dense(&a.dense, a.fps)?;
    let cond = a.conditions.condition_set().validate()?;
    let table = a.conditions.table()?;
    let world = match &a.world {
        Some(p) => simworld::read_world(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p))?,
        None => {
            let bounds = match a.bounds {
                Some(b) => Aabb::new(Vector3::new(b[0], b[1], b[2]), Vector3::new(b[3], b[4], b[5]))?,
                None => default_bounds(&dense)?,
            };
            simworld::generate_world(derive_seed(seed, 1), a.landmarks, bounds)?
        }
    };
    let intr = Intrinsics::from_hfov(a.hfov, a.width, a.height, a.max_range);
    let (manifest, obs) = simworld::retrace(&dense, &world, &intr, &cond, &table, a.pixel_sigma, derive_seed(seed, 2))?;
    write_all(&[
        (a.out_dir.join(MANIFEST_FILE), poseio::write_manifest(&manifest)),
        (a.out_dir.join(OBSERVATIONS_FILE), simworld::write_observations(&obs)),
        (a.out_dir.join(WORLD_FILE), simworld::write_world(&world)),
    ])?;
    Ok(format!(
        "{} images, {} observations of {} landmarks -> {}\n",
        manifest.len(),
        obs.total(),
        world.landmarks.len(),
        a.out_dir.display()
    ))
}

pub fn cmd_simrecon(a: &SimreconArgs, seed: u64) -> Result<String> {
    let manifest = load_manifest(&a.manifest)?;
    let gauge = SimilarityTransform::from_axis_angle(a.scale, Vector3::from(a.axis), a.angle_deg, Vector3::from(a.translation))?;
    let recon = simworld::simulate_reconstruction(&manifest, &gauge, a.noise_sigma, a.outlier_fraction, a.outlier_radius, seed)?;
    write_one(&a.out, poseio::write_reconstruction(&recon))?;
    Ok(format!("{} positions -> {}\n", recon.len(), a.out.display()))
}

pub fn cmd_align(a: &AlignArgs, seed: u64) -> Result<String> {
    let recon_text = read_text(&a.recon)?;
    let recon = poseio::read_reconstruction(&recon_text).map_err(|e| CliError::from(e).in_file(&a.recon))?;
    let manifest = load_manifest(&a.manifest)?;
    let params = RansacParams {
        threshold: a.threshold,
        max_iterations: a.max_iterations,
        confidence: a.confidence,
        min_sample: 3,
        seed,
        with_scale: !a.no_scale,
    };
    let report = align::evaluate(&recon, &manifest, &params, a.meters_per_unit)?;
    write_one(&a.out, poseio::write_report(&report))?;
    Ok(format!(
        "average_error {} m, median_error {} m, inliers {}/{}\n",
        poseio::fmt_fixed(report.average_error),
        poseio::fmt_fixed(report.median_error),
        report.inlier_count(),
        report.total_count()
    ))
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<String> {
    let text = read_text(&a.samples)?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() || toks[0].starts_with('#') {
            continue;
        }
        let bad = || CliError::Input(format!("{}: line {}: expected 'x y z steps'", a.samples.display(), i + 1));
        if toks.len() != 4 {
            return Err(bad());
        }
        let xyz: Vec<f64> = toks[..3].iter().filter_map(|t| t.parse::<f64>().ok()).filter(|v| v.is_finite()).collect();
        let steps: u32 = toks[3].parse().map_err(|_| bad())?;
        if xyz.len() != 3 {
            return Err(bad());
        }
        samples.push((Vector3::new(xyz[0], xyz[1], xyz[2]), steps));
    }
    let mpu = align::calibrate_unit_scale(&samples, a.stride_m)?;
    Ok(format!("{mpu:.6}\n"))
}

pub fn cmd_subsample(a: &SubsampleArgs) -> Result<String> {
    let manifest = load_manifest(&a.manifest)?;
    let reduced = manifest.subsample(a.stride, a.offset)?;
    write_one(&a.out, poseio::write_manifest(&reduced))?;
    Ok(format!("{} of {} records -> {}\n", reduced.len(), manifest.len(), a.out.display()))
}

pub fn cmd_plot(a: &PlotArgs) -> Result<String> {
    let sparse = match (&a.vertex, &a.order) {
        (Some(vertex), Some(order)) => Some(load_sparse(&SparseInput { vertex: vertex.clone(), order: order.clone() })?),
        _ => None,
    };
    let dense = a.dense.as_deref().map(|p| load_dense(p, 60.0)).transpose()?;
    if sparse.is_none() && dense.is_none() {
        return Err(CliError::Input("plot needs --vertex/--order and/or --dense".into()));
    }
    write_one(&a.out, plot::render(sparse.as_ref(), dense.as_ref()))?;
    Ok(format!("-> {}\n", a.out.display()))
}

pub fn cmd_export_ply(a: &ExportPlyArgs) -> Result<String> {
    let points: Vec<Vector3<f64>> = if let Some(p) = &a.source.world {
        simworld::read_world(&read_text(p)?).map_err(|e| CliError::from(e).in_file(p))?.landmarks
    } else if let Some(p) = &a.source.recon {
        poseio::read_reconstruction(&read_text(p)?)
            .map_err(|e| CliError::from(e).in_file(p))?
            .entries()
            .iter()
            .map(|(_, v)| *v)
            .collect()
    } else if let Some(p) = &a.source.manifest {
        load_manifest(p)?.records().iter().map(|r| r.camera_pos).collect()
    } else {
        return Err(CliError::Input("export-ply needs --world, --recon or --manifest".into()));
    };
    write_one(&a.out, simworld::points_to_ply(&points))?;
    Ok(format!("{} points -> {}\n", points.len(), a.out.display()))
}
