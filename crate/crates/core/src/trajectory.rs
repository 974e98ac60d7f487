//! Sparse waypoint plans and their expansion into dense, fixed-rate 6DOF
//! pose streams.
//!
//! A [`SparseTrajectory`] is a list of 2D map vertices together with, for
//! every vertex, the set of steps at which it is visited. Expanding the
//! visitation index yields the ordered path; [`densify`] then walks that
//! path at constant speed and emits one [`PoseSample`] per frame.
//!
//! # Rotation convention
//!
//! Camera rotations are stored as [`EulerRotation`] in degrees and denote an
//! intrinsic yaw-pitch-roll sequence in a right-handed, Z-up world frame. The
//! camera body frame has `+x` forward, `+y` left and `+z` up, so at zero
//! rotation the camera looks along world `+x`:
//!
//! * `rz` (yaw) rotates about the world up axis, counter-clockwise seen from
//!   above, so a path tangent with heading `atan2(dy, dx)` has `rz` equal to
//!   that heading.
//! * `rx` (pitch) rotates about the body lateral axis, positive looks up.
//! * `ry` (roll) rotates about the body forward axis, positive is clockwise
//!   as seen by the camera (right side goes down).

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Errors raised while building or walking a trajectory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("step {0} is assigned to more than one vertex")]
    DuplicateStep(u32),
    #[error("step {0} is missing from the visitation order")]
    MissingStep(u32),
    #[error("visitation order references vertex {vertex} but only {count} vertices exist")]
    DanglingVertexRef { vertex: usize, count: usize },
    #[error("visitation steps are numbered from 1, found step 0 on vertex {0}")]
    ZeroStep(usize),
    #[error("visitation order is empty")]
    EmptyOrder,
    #[error("vertex {0} has non-finite coordinates")]
    NonFiniteVertex(usize),
    #[error("path has fewer than two distinct points")]
    DegeneratePath,
    #[error("supplied orientation list has {supplied} entries but the trajectory has {frames} frames")]
    SuppliedLengthMismatch { supplied: usize, frames: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
}

pub type Result<T> = std::result::Result<T, TrajectoryError>;

/// A point on the top-down 2D map, in game units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vertex2 {
    pub x: f64,
    pub y: f64,
}

impl Vertex2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Vertex2) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

/// Waypoints plus the per-vertex visitation steps.
///
/// Vertices are addressed by zero-based index in code; files and labels use
/// one-based numbering.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTrajectory {
    vertices: Vec<Vertex2>,
    orders: Vec<Vec<u32>>,
}

impl SparseTrajectory {
    /// Builds a sparse trajectory and checks that the steps form exactly
    /// `1..=S` with every step owned by an existing vertex.
    ///
    /// `orders[i]` holds the steps at which vertex `i` is visited. A vertex
    /// may be listed with no steps; `orders` may be shorter than `vertices`
    /// (trailing vertices are then never visited) but not longer.
    pub fn new(vertices: Vec<Vertex2>, orders: Vec<Vec<u32>>) -> Result<Self> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(TrajectoryError::NonFiniteVertex(i));
        }
        let sparse = Self { vertices, orders };
        sparse.expand_visitation()?;
        Ok(sparse)
    }

    pub fn vertices(&self) -> &[Vertex2] {
        &self.vertices
    }

    pub fn orders(&self) -> &[Vec<u32>] {
        &self.orders
    }

    /// Number of visitation steps `S`.
    pub fn step_count(&self) -> usize {
        self.orders.iter().map(Vec::len).sum()
    }

    /// Returns the path as zero-based vertex indices, one per step.
    pub fn expand_visitation(&self) -> Result<Vec<usize>> {
        expand_visitation(&self.vertices, &self.orders)
    }

    /// The visited vertices with cumulative arclength along the path.
    pub fn path_polyline(&self) -> Result<Vec<(Vertex2, f64)>> {
        let path = self.expand_visitation()?;
        let points: Vec<Vertex2> = path.iter().map(|&i| self.vertices[i]).collect();
        polyline_from_points(&points)
    }
}

fn expand_visitation(vertices: &[Vertex2], orders: &[Vec<u32>]) -> Result<Vec<usize>> {
    if orders.len() > vertices.len() {
        return Err(TrajectoryError::DanglingVertexRef {
            vertex: orders.len(),
            count: vertices.len(),
        });
    }
    let total: usize = orders.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(TrajectoryError::EmptyOrder);
    }
    let mut slots: Vec<Option<usize>> = vec![None; total];
    for (vertex, steps) in orders.iter().enumerate() {
        for &step in steps {
            if step == 0 {
                return Err(TrajectoryError::ZeroStep(vertex + 1));
            }
            let slot = step as usize - 1;
            if slot >= total {
                // A step beyond S implies a duplicate or a gap below it.
                return Err(out_of_range_cause(orders, total));
            }
            if slots[slot].is_some() {
                return Err(TrajectoryError::DuplicateStep(step));
            }
            slots[slot] = Some(vertex);
        }
    }
    slots
        .iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(TrajectoryError::MissingStep(i as u32 + 1)))
        .collect()
}

fn out_of_range_cause(orders: &[Vec<u32>], total: usize) -> TrajectoryError {
    let mut seen = vec![false; total];
    for &step in orders.iter().flatten() {
        if step >= 1 && (step as usize) <= total {
            if seen[step as usize - 1] {
                return TrajectoryError::DuplicateStep(step);
            }
            seen[step as usize - 1] = true;
        }
    }
    let gap = seen.iter().position(|s| !s).unwrap_or(0);
    TrajectoryError::MissingStep(gap as u32 + 1)
}

/// Pairs each point with its cumulative arclength.
pub fn polyline_from_points(points: &[Vertex2]) -> Result<Vec<(Vertex2, f64)>> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += points[i - 1].distance(p);
        }
        out.push((*p, acc));
    }
    if out.len() < 2 || acc <= 0.0 {
        return Err(TrajectoryError::DegeneratePath);
    }
    Ok(out)
}

/// Camera orientation in degrees; see the module docs for the convention.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerRotation {
    /// Pitch.
    pub rx: f64,
    /// Roll.
    pub ry: f64,
    /// Yaw.
    pub rz: f64,
}

impl EulerRotation {
    pub const fn new(rx: f64, ry: f64, rz: f64) -> Self {
        Self { rx, ry, rz }
    }

    pub const fn yaw(rz: f64) -> Self {
        Self { rx: 0.0, ry: 0.0, rz }
    }

    /// Each angle wrapped to `[-180, 180)`.
    pub fn canonical(&self) -> Self {
        Self {
            rx: wrap_degrees(self.rx),
            ry: wrap_degrees(self.ry),
            rz: wrap_degrees(self.rz),
        }
    }

    /// Equality after canonicalization, within `tol` degrees per angle.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let a = self.canonical();
        let b = other.canonical();
        angle_diff(a.rx, b.rx) <= tol && angle_diff(a.ry, b.ry) <= tol && angle_diff(a.rz, b.rz) <= tol
    }

    /// Rotation taking camera-body coordinates to world coordinates.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let yaw = Rotation3::from_axis_angle(&Vector3::z_axis(), self.rz.to_radians());
        let pitch = Rotation3::from_axis_angle(&Vector3::y_axis(), -self.rx.to_radians());
        let roll = Rotation3::from_axis_angle(&Vector3::x_axis(), self.ry.to_radians());
        (yaw * pitch * roll).into_inner()
    }
}

fn wrap_degrees(a: f64) -> f64 {
    let w = (a + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

fn angle_diff(a: f64, b: f64) -> f64 {
    wrap_degrees(a - b).abs()
}

/// One frame of a dense trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSample {
    pub frame: u64,
    pub protagonist_pos: Vector3<f64>,
    pub camera_pos: Vector3<f64>,
    pub camera_rot: EulerRotation,
}

/// Timestamped pose stream at a fixed frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTrajectory {
    samples: Vec<PoseSample>,
    fps: f64,
}

impl DenseTrajectory {
    /// Requires a non-empty sample list, `fps > 0` and strictly increasing
    /// frame indices.
    pub fn new(samples: Vec<PoseSample>, fps: f64) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(TrajectoryError::InvalidParameter { name: "fps", value: fps });
        }
        if samples.is_empty() {
            return Err(TrajectoryError::DegeneratePath);
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].frame <= w[0].frame) {
            return Err(TrajectoryError::InvalidParameter {
                name: "frame",
                value: w[1].frame as f64,
            });
        }
        Ok(Self { samples, fps })
    }

    pub fn samples(&self) -> &[PoseSample] {
        &self.samples
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Timestamp of a sample in seconds.
    pub fn time_of(&self, sample: &PoseSample) -> f64 {
        sample.frame as f64 / self.fps
    }
}

/// How camera rotations are assigned during densification.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum OrientationMode {
    /// Yaw follows the path tangent; pitch and roll are zero.
    #[default]
    Forward,
    /// One user-supplied rotation per output frame.
    Supplied(Vec<EulerRotation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensifyParams {
    /// Walking speed, game units per second.
    pub speed: f64,
    pub fps: f64,
    /// Camera height above the protagonist.
    pub eye_offset_z: f64,
    pub ground_z: f64,
    pub orientation_mode: OrientationMode,
}

impl Default for DensifyParams {
    fn default() -> Self {
        Self {
            speed: 1.6,
            fps: 60.0,
            eye_offset_z: 0.75,
            ground_z: 0.0,
            orientation_mode: OrientationMode::Forward,
        }
    }
}

impl DensifyParams {
    fn validate(&self) -> Result<()> {
        for (name, value) in [("speed", self.speed), ("fps", self.fps)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(TrajectoryError::InvalidParameter { name, value });
            }
        }
        for (name, value) in [("eye_offset_z", self.eye_offset_z), ("ground_z", self.ground_z)] {
            if !value.is_finite() {
                return Err(TrajectoryError::InvalidParameter { name, value });
            }
        }
        Ok(())
    }

    /// Arclength advanced per frame.
    pub fn step_length(&self) -> f64 {
        self.speed / self.fps
    }
}

// Slack on the frame-count floor so that lengths which are an exact multiple
// of the step in real arithmetic are not lost to rounding in L / step.
const FRAME_COUNT_SLACK: f64 = 1e-9;

/// Number of frames emitted for a path of length `length`.
pub fn frame_count(length: f64, step: f64) -> usize {
    (length / step + FRAME_COUNT_SLACK).floor() as usize + 1
}

/// Walks the expanded path at constant speed and emits one pose per frame.
pub fn densify(sparse: &SparseTrajectory, params: &DensifyParams) -> Result<DenseTrajectory> {
    let polyline = sparse.path_polyline()?;
    densify_polyline(&polyline, params)
}

/// Densifies an explicit polyline given as `(point, cumulative arclength)`.
pub fn densify_polyline(polyline: &[(Vertex2, f64)], params: &DensifyParams) -> Result<DenseTrajectory> {
    params.validate()?;
    let walker = PolylineWalker::new(polyline)?;
    let step = params.step_length();
    let count = frame_count(walker.length(), step);

    if let OrientationMode::Supplied(rots) = &params.orientation_mode {
        if rots.len() != count {
            return Err(TrajectoryError::SuppliedLengthMismatch {
                supplied: rots.len(),
                frames: count,
            });
        }
    }

    let samples = (0..count)
        .map(|k| {
            let s = (k as f64 * step).min(walker.length());
            let (p, heading) = walker.at(s);
            let protagonist_pos = Vector3::new(p.x, p.y, params.ground_z);
            let camera_pos = protagonist_pos + Vector3::new(0.0, 0.0, params.eye_offset_z);
            let camera_rot = match &params.orientation_mode {
                OrientationMode::Forward => EulerRotation::yaw(heading),
                OrientationMode::Supplied(rots) => rots[k],
            };
            PoseSample {
                frame: k as u64,
                protagonist_pos,
                camera_pos,
                camera_rot,
            }
        })
        .collect();
    DenseTrajectory::new(samples, params.fps)
}

/// Arclength lookup over the non-degenerate segments of a polyline.
struct PolylineWalker {
    // (start point, end point, start arclength, segment length)
    segments: Vec<(Vertex2, Vertex2, f64, f64)>,
    length: f64,
}

impl PolylineWalker {
    fn new(polyline: &[(Vertex2, f64)]) -> Result<Self> {
        let mut segments = Vec::with_capacity(polyline.len().saturating_sub(1));
        for w in polyline.windows(2) {
            let (a, sa) = w[0];
            let (b, sb) = w[1];
            let len = sb - sa;
            if len > 0.0 {
                segments.push((a, b, sa, len));
            }
        }
        let length = match (segments.first(), segments.last()) {
            (Some(first), Some(last)) => last.2 + last.3 - first.2,
            _ => return Err(TrajectoryError::DegeneratePath),
        };
        // Re-base arclengths so the walk starts at zero.
        let base = segments[0].2;
        for seg in &mut segments {
            seg.2 -= base;
        }
        Ok(Self { segments, length })
    }

    fn length(&self) -> f64 {
        self.length
    }

    /// Position and heading (degrees) at arclength `s`. At a joint the
    /// outgoing segment wins; past the end the final segment is reused.
    fn at(&self, s: f64) -> (Vertex2, f64) {
        let idx = self
            .segments
            .partition_point(|seg| seg.2 <= s)
            .saturating_sub(1)
            .min(self.segments.len() - 1);
        let (a, b, start, len) = self.segments[idx];
        let t = ((s - start) / len).clamp(0.0, 1.0);
        let p = Vertex2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let heading = (b.y - a.y).atan2(b.x - a.x) * 180.0 / PI;
        (p, heading)
    }
}

/// Adds i.i.d. Gaussian noise to camera positions and yaw.
///
/// Protagonist positions and frame indices are left untouched. A zero sigma
/// leaves the corresponding fields bit-identical.
pub fn perturb(dense: &DenseTrajectory, pos_sigma: f64, yaw_sigma: f64, seed: u64) -> Result<DenseTrajectory> {
    for (name, value) in [("pos_sigma", pos_sigma), ("yaw_sigma", yaw_sigma)] {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(TrajectoryError::InvalidParameter { name, value });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos_noise = Normal::new(0.0, pos_sigma).expect("sigma checked");
    let yaw_noise = Normal::new(0.0, yaw_sigma).expect("sigma checked");
    let samples = dense
        .samples()
        .iter()
        .map(|s| {
            let mut out = *s;
            if pos_sigma > 0.0 {
                for c in out.camera_pos.iter_mut() {
                    *c += pos_noise.sample(&mut rng);
                }
            }
            if yaw_sigma > 0.0 {
                out.camera_rot.rz += yaw_noise.sample(&mut rng);
            }
            out
        })
        .collect();
    DenseTrajectory::new(samples, dense.fps())
}
