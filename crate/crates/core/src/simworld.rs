//! Deterministic synthetic world standing in for the game engine.
//!
//! A [`World`] is a cloud of point landmarks. [`retrace`] replays a dense
//! trajectory through a pinhole camera and records which landmarks each
//! frame sees, and [`simulate_reconstruction`] produces what an SfM run
//! would report for the captured cameras: the true positions pushed through
//! an unknown similarity gauge, with noise and gross outliers.

use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use thiserror::Error;

use crate::align::SimilarityTransform;
use crate::conditions::{degradation, ConditionError, ConditionSet, DegradationTable};
use crate::poseio::{fmt_fixed, CaptureManifest, CaptureRecord, PoseIoError, ReconstructedSet};
use crate::trajectory::DenseTrajectory;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("bounds are degenerate: min {min:?} is not below max {max:?} on every axis")]
    DegenerateBounds { min: [f64; 3], max: [f64; 3] },
    #[error("landmark count must be positive")]
    NoLandmarks,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Conditions(#[from] ConditionError),
    #[error(transparent)]
    Io(#[from] PoseIoError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        let ok = (0..3).all(|i| min[i].is_finite() && max[i].is_finite() && min[i] < max[i]);
        if !ok {
            return Err(SimError::DegenerateBounds { min: min.into(), max: max.into() });
        }
        Ok(Self { min, max })
    }

    pub fn center(&self) -> Vector3<f64> {
        0.5 * (self.min + self.max)
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Landmark `i` has id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub landmarks: Vec<Vector3<f64>>,
    pub seed: u64,
    pub bounds: Aabb,
}

/// Draws `count` landmarks uniformly inside `bounds`.
pub fn generate_world(seed: u64, count: usize, bounds: Aabb) -> Result<World> {
    Aabb::new(bounds.min, bounds.max)?;
    if count == 0 {
        return Err(SimError::NoLandmarks);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let landmarks = (0..count)
        .map(|_| {
            Vector3::from_fn(|i, _| {
                let p = rng.random_range(bounds.min[i]..bounds.max[i]);
                p.clamp(bounds.min[i], bounds.max[i])
            })
        })
        .collect();
    Ok(World { landmarks, seed, bounds })
}

/// `# seed`/`# bounds` headers followed by `id x y z` lines.
pub fn write_world(world: &World) -> String {
    let mut out = String::with_capacity(48 * (world.landmarks.len() + 2));
    let (lo, hi) = (world.bounds.min, world.bounds.max);
    let _ = writeln!(out, "# seed {}", world.seed);
    let _ = writeln!(out, "# bounds {} {} {} {} {} {}", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z);
    for (id, p) in world.landmarks.iter().enumerate() {
        let _ = writeln!(out, "{id} {} {} {}", fmt_fixed(p.x), fmt_fixed(p.y), fmt_fixed(p.z));
    }
    out
}

fn parse_error(line: usize, message: String) -> SimError {
    SimError::Io(PoseIoError::Parse { line, column: 1, message })
}

/// Reads [`write_world`] output. Ids must run `0..M` in order. Without a
/// bounds header the landmarks' bounding box is used.
pub fn read_world(text: &str) -> Result<World> {
    let mut seed = 0;
    let mut bounds = None;
    let mut landmarks = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0].starts_with('#') {
            let rest: Vec<&str> = toks.iter().copied().skip_while(|t| *t == "#").collect();
            match rest.first().map(|k| k.trim_start_matches('#')) {
                Some("seed") if rest.len() == 2 => {
                    seed = rest[1].parse().map_err(|_| parse_error(line, "bad seed".into()))?;
                }
                Some("bounds") if rest.len() == 7 => {
                    let v: Vec<f64> = rest[1..]
                        .iter()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| parse_error(line, "bad bounds".into()))?;
                    bounds = Some(Aabb::new(Vector3::new(v[0], v[1], v[2]), Vector3::new(v[3], v[4], v[5]))?);
                }
                _ => {}
            }
            continue;
        }
        if toks.len() != 4 {
            return Err(SimError::Io(PoseIoError::WrongFieldCount { line, expected: 4, found: toks.len() }));
        }
        let id: usize = toks[0].parse().map_err(|_| parse_error(line, format!("bad id '{}'", toks[0])))?;
        if id != landmarks.len() {
            return Err(parse_error(line, format!("expected id {}, found {id}", landmarks.len())));
        }
        let mut p = Vector3::zeros();
        for k in 0..3 {
            p[k] = toks[k + 1]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_error(line, format!("'{}' is not a finite number", toks[k + 1])))?;
        }
        landmarks.push(p);
    }
    if landmarks.is_empty() {
        return Err(SimError::NoLandmarks);
    }
    let bounds = match bounds {
        Some(b) => b,
        None => {
            let mut lo = landmarks[0];
            let mut hi = landmarks[0];
            for p in &landmarks {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            // Pad flat extents so the box stays non-degenerate.
            Aabb::new(lo.map(|v| v - 1e-6), hi.map(|v| v + 1e-6))?
        }
    };
    Ok(World { landmarks, seed, bounds })
}

/// ASCII PLY point cloud.
pub fn points_to_ply(points: &[Vector3<f64>]) -> String {
    let mut out = String::with_capacity(40 * (points.len() + 8));
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", points.len());
    out.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in points {
        let _ = writeln!(out, "{} {} {}", fmt_fixed(p.x), fmt_fixed(p.y), fmt_fixed(p.z));
    }
    out
}

/// Pinhole camera with a range limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub max_range: f64,
}

impl Default for Intrinsics {
    /// 60° horizontal field of view at 1920×1080.
    fn default() -> Self {
        Self::from_hfov(60.0, 1920, 1080, 200.0)
    }
}

impl Intrinsics {
    pub fn from_hfov(hfov_deg: f64, width: u32, height: u32, max_range: f64) -> Self {
        Self {
            focal: 0.5 * width as f64 / (0.5 * hfov_deg).to_radians().tan(),
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
            max_range,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(SimError::InvalidIntrinsics("focal must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SimError::InvalidIntrinsics("image size must be positive"));
        }
        if !(0.0..=self.width as f64).contains(&self.cx) || !(0.0..=self.height as f64).contains(&self.cy) {
            return Err(SimError::InvalidIntrinsics("principal point outside the image"));
        }
        if !(self.max_range > 0.0) {
            return Err(SimError::InvalidIntrinsics("max_range must be positive"));
        }
        Ok(())
    }

    fn in_image(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub landmark_id: usize,
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservations {
    pub frame: u64,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSet {
    pub frames: Vec<FrameObservations>,
}

impl ObservationSet {
    pub fn total(&self) -> usize {
        self.frames.iter().map(|f| f.observations.len()).sum()
    }
}

/// `frame id u v` lines.
pub fn write_observations(obs: &ObservationSet) -> String {
    let mut out = String::new();
    for f in &obs.frames {
        for o in &f.observations {
            let _ = writeln!(out, "{} {} {} {}", f.frame, o.landmark_id, fmt_fixed(o.u), fmt_fixed(o.v));
        }
    }
    out
}

/// Reads `frame id u v` lines; frames with no observations do not appear.
pub fn read_observations(text: &str) -> Result<ObservationSet> {
    let mut set = ObservationSet::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() || toks[0].starts_with('#') {
            continue;
        }
        if toks.len() != 4 {
            return Err(SimError::Io(PoseIoError::WrongFieldCount { line, expected: 4, found: toks.len() }));
        }
        let frame: u64 = toks[0].parse().map_err(|_| parse_error(line, format!("bad frame '{}'", toks[0])))?;
        let landmark_id: usize = toks[1].parse().map_err(|_| parse_error(line, format!("bad id '{}'", toks[1])))?;
        let u: f64 = toks[2].parse().map_err(|_| parse_error(line, format!("bad u '{}'", toks[2])))?;
        let v: f64 = toks[3].parse().map_err(|_| parse_error(line, format!("bad v '{}'", toks[3])))?;
        match set.frames.last_mut() {
            Some(f) if f.frame == frame => f.observations.push(Observation { landmark_id, u, v }),
            _ => set.frames.push(FrameObservations { frame, observations: vec![Observation { landmark_id, u, v }] }),
        }
    }
    Ok(set)
}

/// Synthetic image file name for a frame.
pub fn frame_image_name(frame: u64) -> String {
    format!("frame_{frame:06}.png")
}

/// Projects a world point into a camera at `center` with body-to-world
/// rotation `rot`. Returns `None` when the point is behind the camera.
///
/// Camera axes: `X` right, `Y` down, `Z` along the body forward axis.
pub fn project(intr: &Intrinsics, center: &Vector3<f64>, rot: &nalgebra::Matrix3<f64>, p: &Vector3<f64>) -> Option<(f64, f64)> {
    let body = rot.transpose() * (p - center);
    let (x_cam, y_cam, z_cam) = (-body.y, -body.z, body.x);
    if z_cam <= 0.0 {
        return None;
    }
    Some((intr.cx + intr.focal * x_cam / z_cam, intr.cy + intr.focal * y_cam / z_cam))
}

/// Replays `dense` through the camera, one manifest record per frame.
///
/// A landmark is seen when it lies in front of the camera, within
/// `max_range`, and projects inside the image. Each sighting is dropped
/// with the condition's dropout rate, otherwise perturbed by Gaussian pixel
/// noise of `base_pixel_sigma` times the condition's multiplier; noisy
/// points that leave the image are discarded. Frame `k` draws from RNG
/// stream `k`, so frames are independent of each other.
pub fn retrace(
    dense: &DenseTrajectory,
    world: &World,
    intr: &Intrinsics,
    cond: &ConditionSet,
    table: &DegradationTable,
    base_pixel_sigma: f64,
    seed: u64,
) -> Result<(CaptureManifest, ObservationSet)> {
    intr.validate()?;
    if !(base_pixel_sigma >= 0.0 && base_pixel_sigma.is_finite()) {
        return Err(SimError::InvalidParameter { name: "base_pixel_sigma", value: base_pixel_sigma });
    }
    let profile = degradation(cond, table)?;
    let sigma = base_pixel_sigma * profile.pixel_noise_multiplier;
    let noise = Normal::new(0.0, sigma).map_err(|_| SimError::InvalidParameter { name: "pixel_sigma", value: sigma })?;
    let dropout = profile.dropout_rate;

    let mut records = Vec::with_capacity(dense.len());
    let mut frames = Vec::with_capacity(dense.len());
    for sample in dense.samples() {
        records.push(CaptureRecord {
            image_name: frame_image_name(sample.frame),
            camera_pos: sample.camera_pos,
            camera_rot: sample.camera_rot,
        });

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(sample.frame);
        let rot = sample.camera_rot.to_matrix();
        let mut observations = Vec::new();
        for (id, p) in world.landmarks.iter().enumerate() {
            if (p - sample.camera_pos).norm() > intr.max_range {
                continue;
            }
            let Some((u, v)) = project(intr, &sample.camera_pos, &rot, p) else {
                continue;
            };
            if !intr.in_image(u, v) {
                continue;
            }
            if dropout > 0.0 && rng.random::<f64>() < dropout {
                continue;
            }
            let (u, v) = if sigma > 0.0 {
                (u + noise.sample(&mut rng), v + noise.sample(&mut rng))
            } else {
                (u, v)
            };
            if intr.in_image(u, v) {
                observations.push(Observation { landmark_id: id, u, v });
            }
        }
        frames.push(FrameObservations { frame: sample.frame, observations });
    }
    let manifest = CaptureManifest::new(records, *cond)?;
    Ok((manifest, ObservationSet { frames }))
}

/// [`simulate_reconstruction`] output with the ground-truth outlier labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedReconstruction {
    pub set: ReconstructedSet,
    pub outliers: Vec<bool>,
}

/// Camera positions as an SfM system would report them: each ground-truth
/// position gets isotropic Gaussian noise, `floor(outlier_fraction * N)`
/// of them are additionally thrown in a random direction by a distance
/// drawn uniformly from `[outlier_radius, 2 * outlier_radius]`, and the
/// result is mapped through `gauge`. Noise and radius are in game units, so
/// the inverse gauge sees exactly the stated perturbation.
pub fn simulate_reconstruction(
    manifest: &CaptureManifest,
    gauge: &SimilarityTransform,
    noise_sigma: f64,
    outlier_fraction: f64,
    outlier_radius: f64,
    seed: u64,
) -> Result<ReconstructedSet> {
    simulate_reconstruction_labeled(manifest, gauge, noise_sigma, outlier_fraction, outlier_radius, seed).map(|s| s.set)
}

pub fn simulate_reconstruction_labeled(
    manifest: &CaptureManifest,
    gauge: &SimilarityTransform,
    noise_sigma: f64,
    outlier_fraction: f64,
    outlier_radius: f64,
    seed: u64,
) -> Result<SimulatedReconstruction> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(SimError::InvalidParameter { name: "noise_sigma", value: noise_sigma });
    }
    if !(0.0..=1.0).contains(&outlier_fraction) {
        return Err(SimError::InvalidParameter { name: "outlier_fraction", value: outlier_fraction });
    }
    if !(outlier_radius >= 0.0 && outlier_radius.is_finite()) {
        return Err(SimError::InvalidParameter { name: "outlier_radius", value: outlier_radius });
    }
    let n = manifest.len();
    let n_out = (outlier_fraction * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut outliers = vec![false; n];
    for i in rand::seq::index::sample(&mut rng, n, n_out) {
        outliers[i] = true;
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|_| SimError::InvalidParameter { name: "noise_sigma", value: noise_sigma })?;

    let mut entries = Vec::with_capacity(n);
    for (rec, &is_out) in manifest.records().iter().zip(&outliers) {
        // Perturbations are drawn in game units, before the gauge.
        let mut p = rec.camera_pos;
        if noise_sigma > 0.0 {
            p += Vector3::from_fn(|_, _| noise.sample(&mut rng));
        }
        if is_out {
            p += random_unit(&mut rng) * rng.random_range(outlier_radius..=2.0 * outlier_radius);
        }
        entries.push((rec.image_name.clone(), gauge.apply(&p)));
    }
    Ok(SimulatedReconstruction { set: ReconstructedSet::new(entries)?, outliers })
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}
