//! Plain-text readers and writers.
//!
//! | file                   | data line                                        |
//! |------------------------|--------------------------------------------------|
//! | `vertex.txt`           | `x y`                                            |
//! | `vertex_order.txt`     | visitation steps of vertex *i* on line *i*       |
//! | `trajectory_dense.txt` | protagonist XYZ, camera XYZ, rotation XYZ        |
//! | `6dpose_list.txt`      | image name, camera XYZ, rotation XYZ             |
//! | reconstruction         | image name, XYZ                                  |
//! | alignment report       | `key value...` lines, then `residual` lines      |
//!
//! Readers accept any run of spaces or tabs between tokens and both LF and
//! CRLF line endings. Writers use single spaces, LF, and fixed-point floats
//! with six fractional digits for pose data. Manifest condition metadata is
//! carried in `# key value` header lines.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use crate::align::{AlignmentReport, SimilarityTransform};
use crate::conditions::{ConditionSet, TimeOfDay, Weather};
use crate::trajectory::{DenseTrajectory, EulerRotation, PoseSample, SparseTrajectory, TrajectoryError, Vertex2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseIoError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("line {line}: expected {expected} fields, found {found}")]
    WrongFieldCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate image name '{name}'")]
    DuplicateImageName { line: usize, name: String },
    #[error("invalid image name '{0}'")]
    InvalidImageName(String),
    #[error("file contains no data lines")]
    Empty,
    #[error(transparent)]
    InvariantViolation(#[from] TrajectoryError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, PoseIoError>;

/// Six fractional digits, fixed-point.
pub fn fmt_fixed(v: f64) -> String {
    format!("{v:.6}")
}

/// Whitespace tokens of a line with their 1-based character columns.
fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, ch) in line.char_indices() {
        let ws = ch == ' ' || ch == '\t';
        match (ws, start) {
            (true, Some(s)) => {
                out.push((s, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter()
        .map(|(byte, tok)| (line[..byte].chars().count() + 1, tok))
        .collect()
}

/// Lines with their 1-based numbers, CR stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn is_blank(line: &str) -> bool {
    line.chars().all(|c| c == ' ' || c == '\t')
}

fn parse_f64(line: usize, (column, tok): (usize, &str)) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| PoseIoError::Parse {
            line,
            column,
            message: format!("'{tok}' is not a finite number"),
        })
}

fn parse_vec3(line: usize, toks: &[(usize, &str)]) -> Result<Vector3<f64>> {
    Ok(Vector3::new(
        parse_f64(line, toks[0])?,
        parse_f64(line, toks[1])?,
        parse_f64(line, toks[2])?,
    ))
}

fn expect_fields(line: usize, toks: &[(usize, &str)], expected: usize) -> Result<()> {
    if toks.len() != expected {
        return Err(PoseIoError::WrongFieldCount { line, expected, found: toks.len() });
    }
    Ok(())
}

fn push_vec3(out: &mut String, v: &Vector3<f64>) {
    let _ = write!(out, "{} {} {}", fmt_fixed(v.x), fmt_fixed(v.y), fmt_fixed(v.z));
}

fn push_rot(out: &mut String, r: &EulerRotation) {
    let _ = write!(out, "{} {} {}", fmt_fixed(r.rx), fmt_fixed(r.ry), fmt_fixed(r.rz));
}

// ---------------------------------------------------------------------------
// Sparse trajectory

/// Parses `vertex.txt` and `vertex_order.txt`.
///
/// Blank lines in the vertex file are skipped. In the order file line *i*
/// belongs to vertex *i*; a blank line there means the vertex is never
/// visited, and trailing blank lines are ignored.
pub fn read_sparse(vertex_text: &str, order_text: &str) -> Result<SparseTrajectory> {
    let mut vertices = Vec::new();
    for (line, raw) in lines(vertex_text) {
        if is_blank(raw) {
            continue;
        }
        let toks = tokens(raw);
        expect_fields(line, &toks, 2)?;
        vertices.push(Vertex2::new(parse_f64(line, toks[0])?, parse_f64(line, toks[1])?));
    }

    let mut orders: Vec<Vec<u32>> = Vec::new();
    for (line, raw) in lines(order_text) {
        let steps = tokens(raw)
            .into_iter()
            .map(|(column, tok)| {
                tok.parse::<u32>().map_err(|_| PoseIoError::Parse {
                    line,
                    column,
                    message: format!("'{tok}' is not a visitation step"),
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        orders.push(steps);
    }
    while orders.last().is_some_and(Vec::is_empty) {
        orders.pop();
    }
    Ok(SparseTrajectory::new(vertices, orders)?)
}

/// Serializes to `(vertex.txt, vertex_order.txt)` contents.
pub fn write_sparse(sparse: &SparseTrajectory) -> (String, String) {
    let mut vertex = String::new();
    for v in sparse.vertices() {
        let _ = writeln!(vertex, "{} {}", fmt_fixed(v.x), fmt_fixed(v.y));
    }
    let mut order = String::new();
    for steps in sparse.orders() {
        let line: Vec<String> = steps.iter().map(u32::to_string).collect();
        let _ = writeln!(order, "{}", line.join(" "));
    }
    (vertex, order)
}

// ---------------------------------------------------------------------------
// Dense trajectory

pub fn write_dense(dense: &DenseTrajectory) -> String {
    let mut out = String::with_capacity(dense.len() * 96);
    for s in dense.samples() {
        push_vec3(&mut out, &s.protagonist_pos);
        out.push(' ');
        push_vec3(&mut out, &s.camera_pos);
        out.push(' ');
        push_rot(&mut out, &s.camera_rot);
        out.push('\n');
    }
    out
}

/// Reads `trajectory_dense.txt`. The file carries no timing, so frames are
/// numbered from zero in line order at the given `fps`.
pub fn read_dense(text: &str, fps: f64) -> Result<DenseTrajectory> {
    let mut samples = Vec::new();
    for (line, raw) in lines(text) {
        if is_blank(raw) {
            continue;
        }
        let toks = tokens(raw);
        expect_fields(line, &toks, 9)?;
        let protagonist_pos = parse_vec3(line, &toks[0..3])?;
        let camera_pos = parse_vec3(line, &toks[3..6])?;
        let r = parse_vec3(line, &toks[6..9])?;
        samples.push(PoseSample {
            frame: samples.len() as u64,
            protagonist_pos,
            camera_pos,
            camera_rot: EulerRotation::new(r.x, r.y, r.z),
        });
    }
    if samples.is_empty() {
        return Err(PoseIoError::Empty);
    }
    Ok(DenseTrajectory::new(samples, fps)?)
}

// ---------------------------------------------------------------------------
// Capture manifest

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    pub image_name: String,
    pub camera_pos: Vector3<f64>,
    pub camera_rot: EulerRotation,
}

fn check_image_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('#') {
        return Err(PoseIoError::InvalidImageName(name.to_string()));
    }
    Ok(())
}

/// Per-image poses in frame order plus the conditions they were captured
/// under.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureManifest {
    records: Vec<CaptureRecord>,
    pub conditions: ConditionSet,
}

impl CaptureManifest {
    pub fn new(records: Vec<CaptureRecord>, conditions: ConditionSet) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            check_image_name(&r.image_name)?;
            if !seen.insert(r.image_name.as_str()) {
                return Err(PoseIoError::DuplicateImageName { line: i + 1, name: r.image_name.clone() });
            }
        }
        Ok(Self { records, conditions })
    }

    pub fn records(&self) -> &[CaptureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Keeps every `stride`-th record starting at `offset`.
    pub fn subsample(&self, stride: usize, offset: usize) -> Result<Self> {
        if stride == 0 {
            return Err(PoseIoError::Invalid("subsampling stride must be at least 1".into()));
        }
        let records = self.records.iter().skip(offset).step_by(stride).cloned().collect();
        Ok(Self { records, conditions: self.conditions })
    }
}

const KEY_WEATHER: &str = "weather";
const KEY_TIME: &str = "time_of_day";
const KEY_VEHICLE: &str = "vehicle_density";
const KEY_PEDESTRIAN: &str = "pedestrian_density";

pub fn write_manifest(m: &CaptureManifest) -> String {
    let mut out = String::with_capacity(64 * (m.len() + 4));
    let c = &m.conditions;
    let _ = writeln!(out, "# {KEY_WEATHER} {}", c.weather);
    let _ = writeln!(out, "# {KEY_TIME} {}", c.time_of_day);
    let _ = writeln!(out, "# {KEY_VEHICLE} {}", c.vehicle_density);
    let _ = writeln!(out, "# {KEY_PEDESTRIAN} {}", c.pedestrian_density);
    for r in m.records() {
        out.push_str(&r.image_name);
        out.push(' ');
        push_vec3(&mut out, &r.camera_pos);
        out.push(' ');
        push_rot(&mut out, &r.camera_rot);
        out.push('\n');
    }
    out
}

fn header_error(line: usize, column: usize, message: String) -> PoseIoError {
    PoseIoError::Parse { line, column, message }
}

/// Reads `6dpose_list.txt`. Unknown `#` lines are ignored; missing
/// condition keys fall back to [`ConditionSet::default`].
pub fn read_manifest(text: &str) -> Result<CaptureManifest> {
    let mut conditions = ConditionSet::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in lines(text) {
        if is_blank(raw) {
            continue;
        }
        let toks = tokens(raw);
        if toks[0].1.starts_with('#') {
            let rest: Vec<(usize, &str)> = if toks[0].1 == "#" {
                toks[1..].to_vec()
            } else {
                // "#key value"
                let (col, tok) = toks[0];
                std::iter::once((col + 1, &tok[1..])).chain(toks[1..].iter().copied()).collect()
            };
            if let [(_, key), (col, value)] = rest.as_slice() {
                match *key {
                    KEY_WEATHER => {
                        conditions.weather = value
                            .parse::<Weather>()
                            .map_err(|e| header_error(line, *col, e.to_string()))?
                    }
                    KEY_TIME => {
                        conditions.time_of_day = value
                            .parse::<TimeOfDay>()
                            .map_err(|e| header_error(line, *col, e.to_string()))?
                    }
                    KEY_VEHICLE => conditions.vehicle_density = parse_f64(line, (*col, value))?,
                    KEY_PEDESTRIAN => conditions.pedestrian_density = parse_f64(line, (*col, value))?,
                    _ => {}
                }
            }
            continue;
        }
        expect_fields(line, &toks, 7)?;
        let name = toks[0].1;
        if !seen.insert(name.to_string()) {
            return Err(PoseIoError::DuplicateImageName { line, name: name.to_string() });
        }
        let camera_pos = parse_vec3(line, &toks[1..4])?;
        let r = parse_vec3(line, &toks[4..7])?;
        records.push(CaptureRecord {
            image_name: name.to_string(),
            camera_pos,
            camera_rot: EulerRotation::new(r.x, r.y, r.z),
        });
    }
    crate::conditions::validate(conditions).map_err(|e| PoseIoError::Invalid(e.to_string()))?;
    CaptureManifest::new(records, conditions)
}

// ---------------------------------------------------------------------------
// Reconstruction

/// Camera positions from an external reconstruction, keyed by image name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructedSet {
    entries: Vec<(String, Vector3<f64>)>,
}

impl ReconstructedSet {
    pub fn new(entries: Vec<(String, Vector3<f64>)>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for (i, (name, _)) in entries.iter().enumerate() {
            check_image_name(name)?;
            if !seen.insert(name.as_str()) {
                return Err(PoseIoError::DuplicateImageName { line: i + 1, name: name.clone() });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(String, Vector3<f64>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn read_reconstruction(text: &str) -> Result<ReconstructedSet> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line, raw) in lines(text) {
        if is_blank(raw) {
            continue;
        }
        let toks = tokens(raw);
        if toks[0].1.starts_with('#') {
            continue;
        }
        expect_fields(line, &toks, 4)?;
        let name = toks[0].1;
        if !seen.insert(name.to_string()) {
            return Err(PoseIoError::DuplicateImageName { line, name: name.to_string() });
        }
        entries.push((name.to_string(), parse_vec3(line, &toks[1..4])?));
    }
    ReconstructedSet::new(entries)
}

pub fn write_reconstruction(set: &ReconstructedSet) -> String {
    let mut out = String::new();
    for (name, p) in set.entries() {
        out.push_str(name);
        out.push(' ');
        push_vec3(&mut out, p);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Alignment report

/// Serializes an alignment report.
///
/// ```text
/// transform <scale> <r00 r01 r02 r10 r11 r12 r20 r21 r22> <tx ty tz>
/// average_error_m <m>
/// median_error_m <m>
/// inlier_count <n>
/// total_count <n>
/// meters_per_unit <f>
/// inlier_average_error_m <m>
/// inlier_median_error_m <m>
/// residual <image name> <m> <1 if inlier else 0>
/// ```
///
/// Transform entries and `meters_per_unit` carry twelve fractional digits,
/// errors six.
pub fn write_report(r: &AlignmentReport) -> String {
    let mut out = String::new();
    let t: Vec<String> = r.transform.to_array().iter().map(|v| format!("{v:.12}")).collect();
    let _ = writeln!(out, "transform {}", t.join(" "));
    let _ = writeln!(out, "average_error_m {}", fmt_fixed(r.average_error));
    let _ = writeln!(out, "median_error_m {}", fmt_fixed(r.median_error));
    let _ = writeln!(out, "inlier_count {}", r.inlier_count());
    let _ = writeln!(out, "total_count {}", r.total_count());
    let _ = writeln!(out, "meters_per_unit {:.12}", r.meters_per_unit);
    let _ = writeln!(out, "inlier_average_error_m {}", fmt_fixed(r.inlier_average_error));
    let _ = writeln!(out, "inlier_median_error_m {}", fmt_fixed(r.inlier_median_error));
    for ((name, res), inlier) in r.names.iter().zip(&r.residuals).zip(&r.inlier_mask) {
        let _ = writeln!(out, "residual {name} {} {}", fmt_fixed(*res), u8::from(*inlier));
    }
    out
}

/// Parses a report written by [`write_report`]. Values carry the precision
/// of the text.
pub fn read_report(text: &str) -> Result<AlignmentReport> {
    let mut transform = None;
    let mut scalars: [Option<f64>; 5] = [None; 5];
    let mut counts: [Option<usize>; 2] = [None; 2];
    let mut names = Vec::new();
    let mut residuals = Vec::new();
    let mut inlier_mask = Vec::new();
    const SCALAR_KEYS: [&str; 5] = [
        "average_error_m",
        "median_error_m",
        "meters_per_unit",
        "inlier_average_error_m",
        "inlier_median_error_m",
    ];

    for (line, raw) in lines(text) {
        if is_blank(raw) {
            continue;
        }
        let toks = tokens(raw);
        let key = toks[0].1;
        match key {
            "transform" => {
                expect_fields(line, &toks, 14)?;
                let mut v = [0.0; 13];
                for (slot, tok) in v.iter_mut().zip(&toks[1..]) {
                    *slot = parse_f64(line, *tok)?;
                }
                transform = Some(SimilarityTransform::from_array(&v).map_err(|e| PoseIoError::Invalid(e.to_string()))?);
            }
            "inlier_count" | "total_count" => {
                expect_fields(line, &toks, 2)?;
                let (column, tok) = toks[1];
                let n = tok.parse::<usize>().map_err(|_| PoseIoError::Parse {
                    line,
                    column,
                    message: format!("'{tok}' is not a count"),
                })?;
                counts[usize::from(key == "total_count")] = Some(n);
            }
            "residual" => {
                expect_fields(line, &toks, 4)?;
                names.push(toks[1].1.to_string());
                residuals.push(parse_f64(line, toks[2])?);
                inlier_mask.push(match toks[3].1 {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(PoseIoError::Parse {
                            line,
                            column: toks[3].0,
                            message: format!("inlier flag must be 0 or 1, got '{other}'"),
                        })
                    }
                });
            }
            _ => {
                if let Some(i) = SCALAR_KEYS.iter().position(|k| *k == key) {
                    expect_fields(line, &toks, 2)?;
                    scalars[i] = Some(parse_f64(line, toks[1])?);
                } else {
                    return Err(PoseIoError::Parse {
                        line,
                        column: toks[0].0,
                        message: format!("unknown report key '{key}'"),
                    });
                }
            }
        }
    }

    let missing = |what: &str| PoseIoError::Invalid(format!("report is missing '{what}'"));
    let transform = transform.ok_or_else(|| missing("transform"))?;
    let mut vals = [0.0; 5];
    for (i, v) in scalars.iter().enumerate() {
        vals[i] = v.ok_or_else(|| missing(SCALAR_KEYS[i]))?;
    }
    let inlier_count = counts[0].ok_or_else(|| missing("inlier_count"))?;
    let total_count = counts[1].ok_or_else(|| missing("total_count"))?;
    let report = AlignmentReport {
        transform,
        names,
        inlier_mask,
        residuals,
        average_error: vals[0],
        median_error: vals[1],
        meters_per_unit: vals[2],
        inlier_average_error: vals[3],
        inlier_median_error: vals[4],
    };
    if report.total_count() != total_count || report.inlier_count() != inlier_count {
        return Err(PoseIoError::Invalid("residual lines disagree with the stated counts".into()));
    }
    Ok(report)
}
