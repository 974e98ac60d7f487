//! Similarity alignment of reconstructed camera positions to groundtruth.
//!
//! [`umeyama`] is the closed-form least-squares similarity estimator;
//! [`ransac_align`] wraps it in a seeded hypothesize-and-verify loop and
//! [`evaluate`] turns the result into metric error statistics.

use std::collections::HashMap;

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::poseio::{CaptureManifest, ReconstructedSet};

/// Nominal adult walking stride in meters.
pub const DEFAULT_STRIDE_M: f64 = 0.762;
/// Stride of the protagonist measured in game units.
pub const DEFAULT_STRIDE_UNITS: f64 = 0.9;
/// Game unit to meter factor implied by the two stride constants.
pub const DEFAULT_METERS_PER_UNIT: f64 = DEFAULT_STRIDE_M / DEFAULT_STRIDE_UNITS;

const ORTHONORMAL_TOL: f64 = 1e-9;
// Ratio of the second to the first eigenvalue of the source scatter below
// which the points are treated as collinear.
const COLLINEAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error("point sets differ in length ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("source points are coincident or collinear")]
    DegenerateConfiguration,
    #[error("{found} points given, at least {required} required")]
    TooFewPoints { found: usize, required: usize },
    #[error("best hypothesis has {best} inliers, at least {required} required")]
    NoConsensus { best: usize, required: usize },
    #[error("only {matched} image names are shared between reconstruction and manifest, at least {required} required")]
    InsufficientOverlap { matched: usize, required: usize },
    #[error("at least two calibration samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("calibration samples cover zero distance")]
    ZeroDistance,
    #[error("calibration sample {0} has a zero step count")]
    ZeroSteps(usize),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("invalid transform: {0}")]
    InvalidTransform(&'static str),
}

pub type Result<T> = std::result::Result<T, AlignError>;

/// `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(AlignError::InvalidTransform("scale must be positive and finite"));
        }
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(AlignError::InvalidTransform("non-finite entry"));
        }
        let gram_err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if gram_err > ORTHONORMAL_TOL {
            return Err(AlignError::InvalidTransform("rotation is not orthonormal"));
        }
        if (rotation.determinant() - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(AlignError::InvalidTransform("rotation determinant is not +1"));
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation of `angle_deg` about `axis`.
    pub fn from_axis_angle(scale: f64, axis: Vector3<f64>, angle_deg: f64, translation: Vector3<f64>) -> Result<Self> {
        let axis = Unit::try_new(axis, 1e-12).ok_or(AlignError::InvalidTransform("zero rotation axis"))?;
        let rotation = Rotation3::from_axis_angle(&axis, angle_deg.to_radians()).into_inner();
        Self::new(scale, rotation, translation)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `(1/s, Rᵀ, -(1/s) Rᵀ t)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let inv_s = 1.0 / self.scale;
        Self {
            scale: inv_s,
            rotation: rt,
            translation: -inv_s * (rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.apply(&other.translation),
        }
    }

    /// Scale, row-major rotation, translation.
    pub fn to_array(&self) -> [f64; 13] {
        let mut out = [0.0; 13];
        out[0] = self.scale;
        for r in 0..3 {
            for c in 0..3 {
                out[1 + 3 * r + c] = self.rotation[(r, c)];
            }
        }
        out[10..].copy_from_slice(self.translation.as_slice());
        out
    }

    pub fn from_array(v: &[f64; 13]) -> Result<Self> {
        let rotation = Matrix3::from_row_slice(&v[1..10]);
        Self::new(v[0], rotation, Vector3::new(v[10], v[11], v[12]))
    }
}

pub fn apply(t: &SimilarityTransform, p: &Vector3<f64>) -> Vector3<f64> {
    t.apply(p)
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares similarity (or rigid, when `with_scale` is false) mapping
/// `src` onto `dst`.
///
/// Centers both sets, takes the SVD of the cross-covariance and flips the
/// axis of the smallest singular value when needed so the result is a
/// proper rotation. Needs at least three non-collinear source points.
pub fn umeyama(src: &[Vector3<f64>], dst: &[Vector3<f64>], with_scale: bool) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch { src: src.len(), dst: dst.len() });
    }
    if src.len() < 3 {
        return Err(AlignError::TooFewPoints { found: src.len(), required: 3 });
    }
    let n = src.len() as f64;
    let mu_src = centroid(src);
    let mu_dst = centroid(dst);

    let mut scatter = Matrix3::zeros();
    let mut cross = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let sc = s - mu_src;
        let dc = d - mu_dst;
        scatter += sc * sc.transpose();
        cross += dc * sc.transpose();
    }
    scatter /= n;
    cross /= n;

    let var_src = scatter.trace();
    let eig = SymmetricEigen::new(scatter).eigenvalues;
    let mut ev = [eig[0], eig[1], eig[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    if !(var_src > 0.0) || ev[0] <= 0.0 || ev[1] <= COLLINEAR_TOL * ev[0] {
        return Err(AlignError::DegenerateConfiguration);
    }

    let svd = cross.svd(true, true);
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let sv = svd.singular_values;
    let smallest = (0..3).min_by(|&a, &b| sv[a].total_cmp(&sv[b])).unwrap_or(2);
    let mut sign = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        sign[smallest] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&sign) * v_t;
    let scale = if with_scale {
        sv.component_mul(&sign).sum() / var_src
    } else {
        1.0
    };
    if !(scale > 0.0) {
        return Err(AlignError::DegenerateConfiguration);
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    SimilarityTransform::new(scale, rotation, translation).map_err(|_| AlignError::DegenerateConfiguration)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacParams {
    /// Inlier residual bound in destination units.
    pub threshold: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub min_sample: usize,
    pub seed: u64,
    pub with_scale: bool,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            max_iterations: 2000,
            confidence: 0.999,
            min_sample: 3,
            seed: 0,
            with_scale: true,
        }
    }
}

impl RansacParams {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(AlignError::InvalidParameter { name: "threshold", value: self.threshold });
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(AlignError::InvalidParameter { name: "confidence", value: self.confidence });
        }
        if self.min_sample < 3 {
            return Err(AlignError::InvalidParameter { name: "min_sample", value: self.min_sample as f64 });
        }
        if self.max_iterations == 0 {
            return Err(AlignError::InvalidParameter { name: "max_iterations", value: 0.0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    /// Refit on the winning consensus set.
    pub transform: SimilarityTransform,
    /// Inliers under the refit transform.
    pub inliers: Vec<bool>,
    /// Consensus size of the winning minimal-sample hypothesis.
    pub hypothesis_inliers: usize,
    /// Iterations consumed, degenerate draws included.
    pub iterations: usize,
    /// Whether every minimal sample was enumerated instead of drawn.
    pub exhaustive: bool,
}

impl RansacResult {
    pub fn inlier_count(&self) -> usize {
        self.inliers.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy)]
struct Score {
    count: usize,
    mean_residual: f64,
}

impl Score {
    fn beats(&self, other: &Score) -> bool {
        self.count > other.count || (self.count == other.count && self.mean_residual < other.mean_residual)
    }
}

fn score(t: &SimilarityTransform, src: &[Vector3<f64>], dst: &[Vector3<f64>], threshold: f64) -> Score {
    let mut count = 0;
    let mut sum = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let r = (d - t.apply(s)).norm();
        if r < threshold {
            count += 1;
            sum += r;
        }
    }
    let mean_residual = if count > 0 { sum / count as f64 } else { f64::INFINITY };
    Score { count, mean_residual }
}

fn inlier_mask(t: &SimilarityTransform, src: &[Vector3<f64>], dst: &[Vector3<f64>], threshold: f64) -> Vec<bool> {
    src.iter().zip(dst).map(|(s, d)| (d - t.apply(s)).norm() < threshold).collect()
}

/// `n choose k`, saturating.
fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Robust similarity alignment of `src` onto `dst`.
///
/// Each iteration fits [`umeyama`] to a minimal sample and counts points
/// with residual below `threshold`. The largest consensus set wins, ties
/// going to the lower mean inlier residual and then to the earlier
/// iteration. Iteration `k` draws its sample from its own RNG stream, so the
/// outcome does not depend on evaluation order. When the number of distinct
/// minimal samples fits in `max_iterations` they are all enumerated instead
/// of drawn. Collinear samples are skipped but still count as iterations.
///
/// Random sampling stops early once the probability of never having drawn
/// an all-inlier sample, `(1 - w^m)^k`, falls below `1 - confidence`.
pub fn ransac_align(src: &[Vector3<f64>], dst: &[Vector3<f64>], params: &RansacParams) -> Result<RansacResult> {
    params.validate()?;
    if src.len() != dst.len() {
        return Err(AlignError::LengthMismatch { src: src.len(), dst: dst.len() });
    }
    let n = src.len();
    let m = params.min_sample;
    if n < m {
        return Err(AlignError::TooFewPoints { found: n, required: m });
    }

    let mut best: Option<(SimilarityTransform, Score)> = None;
    let consider = |sample: &[usize], best: &mut Option<(SimilarityTransform, Score)>| {
        let s: Vec<Vector3<f64>> = sample.iter().map(|&i| src[i]).collect();
        let d: Vec<Vector3<f64>> = sample.iter().map(|&i| dst[i]).collect();
        if let Ok(t) = umeyama(&s, &d, params.with_scale) {
            let sc = score(&t, src, dst, params.threshold);
            if best.as_ref().is_none_or(|(_, b)| sc.beats(b)) {
                *best = Some((t, sc));
            }
        }
    };

    let combos = binomial(n, m);
    let exhaustive = combos <= params.max_iterations;
    let mut iterations = 0;
    if exhaustive {
        let mut idx: Vec<usize> = (0..m).collect();
        loop {
            iterations += 1;
            consider(&idx, &mut best);
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    } else {
        let failure_bound = 1.0 - params.confidence;
        for k in 0..params.max_iterations {
            iterations = k + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(k as u64);
            let sample = rand::seq::index::sample(&mut rng, n, m).into_vec();
            consider(&sample, &mut best);
            if let Some((_, sc)) = &best {
                let w = sc.count as f64 / n as f64;
                let p_fail = (1.0 - w.powi(m as i32)).powi(iterations as i32);
                if p_fail < failure_bound {
                    break;
                }
            }
        }
    }

    let required = m + 1;
    let (hypothesis, best_score) = match best {
        Some(b) if b.1.count >= required => b,
        Some(b) => return Err(AlignError::NoConsensus { best: b.1.count, required }),
        None => return Err(AlignError::NoConsensus { best: 0, required }),
    };

    let consensus = inlier_mask(&hypothesis, src, dst, params.threshold);
    let (cs, cd): (Vec<_>, Vec<_>) = src
        .iter()
        .zip(dst)
        .zip(&consensus)
        .filter(|(_, &keep)| keep)
        .map(|((s, d), _)| (*s, *d))
        .unzip();
    let transform = umeyama(&cs, &cd, params.with_scale).unwrap_or(hypothesis);
    let inliers = inlier_mask(&transform, src, dst, params.threshold);

    Ok(RansacResult {
        transform,
        inliers,
        hypothesis_inliers: best_score.count,
        iterations,
        exhaustive,
    })
}

/// Mean and median of `values`; the median of an even count is the mean of
/// the two middle values. Both are zero for an empty slice.
pub fn mean_and_median(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    (mean, median)
}

/// Outcome of aligning a reconstruction to groundtruth.
///
/// `average_error` and `median_error` cover every matched image; the
/// `inlier_*` fields restrict them to the final inlier set.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentReport {
    pub transform: SimilarityTransform,
    /// Matched image names, in manifest order.
    pub names: Vec<String>,
    pub inlier_mask: Vec<bool>,
    /// Per-image position error in meters.
    pub residuals: Vec<f64>,
    pub average_error: f64,
    pub median_error: f64,
    pub inlier_average_error: f64,
    pub inlier_median_error: f64,
    pub meters_per_unit: f64,
}

impl AlignmentReport {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }

    pub fn total_count(&self) -> usize {
        self.inlier_mask.len()
    }
}

/// Aligns reconstructed positions (matched by image name) onto the
/// manifest's camera positions and reports errors in meters.
pub fn evaluate(
    recon: &ReconstructedSet,
    manifest: &CaptureManifest,
    params: &RansacParams,
    meters_per_unit: f64,
) -> Result<AlignmentReport> {
    if !(meters_per_unit > 0.0 && meters_per_unit.is_finite()) {
        return Err(AlignError::InvalidParameter { name: "meters_per_unit", value: meters_per_unit });
    }
    let by_name: HashMap<&str, &Vector3<f64>> = recon
        .entries()
        .iter()
        .map(|(name, p)| (name.as_str(), p))
        .collect();
    let mut names = Vec::new();
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for rec in manifest.records() {
        if let Some(p) = by_name.get(rec.image_name.as_str()) {
            names.push(rec.image_name.clone());
            src.push(**p);
            dst.push(rec.camera_pos);
        }
    }
    if names.len() < params.min_sample {
        return Err(AlignError::InsufficientOverlap { matched: names.len(), required: params.min_sample });
    }

    let fit = ransac_align(&src, &dst, params)?;
    let residuals: Vec<f64> = src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (d - fit.transform.apply(s)).norm() * meters_per_unit)
        .collect();
    let (average_error, median_error) = mean_and_median(&residuals);
    let inlier_residuals: Vec<f64> = residuals
        .iter()
        .zip(&fit.inliers)
        .filter(|(_, &keep)| keep)
        .map(|(r, _)| *r)
        .collect();
    let (inlier_average_error, inlier_median_error) = mean_and_median(&inlier_residuals);

    Ok(AlignmentReport {
        transform: fit.transform,
        names,
        inlier_mask: fit.inliers,
        residuals,
        average_error,
        median_error,
        inlier_average_error,
        inlier_median_error,
        meters_per_unit,
    })
}

/// Meters per game unit from positions logged every few walking steps.
///
/// Each sample is a position plus the number of strides taken since the
/// previous sample (ignored for the first). The stride in game units is the
/// walked distance over the step total; the result is `stride_m` divided by
/// that.
pub fn calibrate_unit_scale(samples: &[(Vector3<f64>, u32)], stride_m: f64) -> Result<f64> {
    if !(stride_m > 0.0 && stride_m.is_finite()) {
        return Err(AlignError::InvalidParameter { name: "stride_m", value: stride_m });
    }
    if samples.len() < 2 {
        return Err(AlignError::TooFewSamples(samples.len()));
    }
    let mut distance = 0.0;
    let mut steps: u64 = 0;
    for (i, w) in samples.windows(2).enumerate() {
        let (prev, _) = w[0];
        let (cur, n) = w[1];
        if n == 0 {
            return Err(AlignError::ZeroSteps(i + 1));
        }
        distance += (cur - prev).norm();
        steps += n as u64;
    }
    if !(distance > 0.0) {
        return Err(AlignError::ZeroDistance);
    }
    let stride_units = distance / steps as f64;
    Ok(stride_m / stride_units)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn rz(deg: f64) -> Matrix3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), deg.to_radians()).into_inner()
    }

    fn random_points(rng: &mut impl Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                    rng.random_range(-half..half),
                )
            })
            .collect()
    }

    #[test]
    fn apply_examples() {
        let p = Vector3::new(1.0, 1.0, 1.0);
        assert_eq!(apply(&SimilarityTransform::identity(), &p), p);
        let t = SimilarityTransform::new(2.0, Matrix3::identity(), Vector3::zeros()).unwrap();
        assert_eq!(t.apply(&p), Vector3::new(2.0, 2.0, 2.0));
        let t = SimilarityTransform::new(1.0, rz(90.0), Vector3::zeros()).unwrap();
        assert_abs_diff_eq!(t.apply(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn transform_validation() {
        assert!(SimilarityTransform::new(0.0, Matrix3::identity(), Vector3::zeros()).is_err());
        assert!(SimilarityTransform::new(1.0, Matrix3::identity() * 1.1, Vector3::zeros()).is_err());
        let reflect = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(SimilarityTransform::new(1.0, reflect, Vector3::zeros()).is_err());
        assert!(SimilarityTransform::from_axis_angle(1.0, Vector3::zeros(), 10.0, Vector3::zeros()).is_err());
    }

    #[test]
    fn array_round_trip() {
        let t = SimilarityTransform::from_axis_angle(0.5, Vector3::new(1.0, 2.0, 3.0), 33.0, Vector3::new(1.0, -2.0, 4.0)).unwrap();
        assert_eq!(SimilarityTransform::from_array(&t.to_array()).unwrap(), t);
    }

    #[test]
    fn umeyama_identity() {
        let src = vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 2.0, 0.0),
            Vector3::new(0.3, 0.1, 1.5),
        ];
        let t = umeyama(&src, &src, true).unwrap();
        assert_abs_diff_eq!(t.scale(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*t.rotation(), Matrix3::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(*t.translation(), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn umeyama_recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_points(&mut rng, 10, 5.0);
        let truth = SimilarityTransform::new(2.0, rz(90.0), Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let t = umeyama(&src, &dst, true).unwrap();
        assert_abs_diff_eq!(t.scale(), 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(*t.rotation(), rz(90.0), epsilon = 1e-9);
        assert_abs_diff_eq!(*t.translation(), Vector3::new(1.0, 2.0, 3.0), epsilon = 1e-9);
    }

    #[test]
    fn umeyama_without_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = random_points(&mut rng, 8, 5.0);
        let truth = SimilarityTransform::new(3.0, rz(30.0), Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let t = umeyama(&src, &dst, false).unwrap();
        assert_eq!(t.scale(), 1.0);
        assert_abs_diff_eq!(*t.rotation(), rz(30.0), epsilon = 1e-9);
    }

    #[test]
    fn umeyama_planar_reflection_is_corrected() {
        // Three points are always coplanar; the cross-covariance is rank 2.
        let src = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)];
        let truth = SimilarityTransform::from_axis_angle(1.5, Vector3::new(1.0, 1.0, 0.2), 140.0, Vector3::new(3.0, 2.0, 1.0)).unwrap();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let t = umeyama(&src, &dst, true).unwrap();
        assert_abs_diff_eq!(t.rotation().determinant(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*t.rotation(), *truth.rotation(), epsilon = 1e-9);
        assert_abs_diff_eq!(t.scale(), 1.5, epsilon = 1e-9);
    }

    #[test]
    fn umeyama_degenerate_inputs() {
        let collinear = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 1.0, 1.0), Vector3::new(2.0, 2.0, 2.0)];
        assert_eq!(umeyama(&collinear, &collinear, true), Err(AlignError::DegenerateConfiguration));
        let same = vec![Vector3::new(1.0, 2.0, 3.0); 4];
        assert_eq!(umeyama(&same, &same, true), Err(AlignError::DegenerateConfiguration));
        assert!(matches!(umeyama(&same[..3], &same, true), Err(AlignError::LengthMismatch { .. })));
        assert!(matches!(umeyama(&same[..2], &same[..2], true), Err(AlignError::TooFewPoints { .. })));
    }

    #[test]
    fn inverse_round_trip() {
        let t = SimilarityTransform::from_axis_angle(0.37, Vector3::new(0.2, -1.0, 0.4), 71.0, Vector3::new(4.0, 5.0, -6.0)).unwrap();
        let p = Vector3::new(1.5, -2.5, 0.25);
        assert_abs_diff_eq!(t.inverse().apply(&t.apply(&p)), p, epsilon = 1e-12);
        let id = t.compose(&t.inverse());
        assert_abs_diff_eq!(id.scale(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(*id.translation(), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn ransac_clean_data_matches_umeyama() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = random_points(&mut rng, 50, 10.0);
        let truth = SimilarityTransform::from_axis_angle(1.7, Vector3::new(0.0, 1.0, 1.0), -20.0, Vector3::new(0.5, 0.0, 9.0)).unwrap();
        let dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
        let res = ransac_align(&src, &dst, &RansacParams::default()).unwrap();
        assert!(res.inliers.iter().all(|&b| b));
        let plain = umeyama(&src, &dst, true).unwrap();
        for (a, b) in res.transform.to_array().iter().zip(plain.to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        assert!(!res.exhaustive);
    }

    #[test]
    fn ransac_errors() {
        let pts = vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)];
        assert!(matches!(ransac_align(&pts, &pts, &RansacParams::default()), Err(AlignError::TooFewPoints { .. })));
        let bad = RansacParams { threshold: 0.0, ..Default::default() };
        assert!(matches!(ransac_align(&pts, &pts, &bad), Err(AlignError::InvalidParameter { name: "threshold", .. })));
        let bad = RansacParams { min_sample: 2, ..Default::default() };
        assert!(ransac_align(&pts, &pts, &bad).is_err());
    }

    #[test]
    fn ransac_random_data_has_no_consensus() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let src = random_points(&mut rng, 40, 50.0);
        let dst = random_points(&mut rng, 40, 50.0);
        let params = RansacParams { threshold: 1e-3, ..Default::default() };
        assert!(matches!(ransac_align(&src, &dst, &params), Err(AlignError::NoConsensus { .. })));
    }

    #[test]
    fn combinations_enumerate_all() {
        let mut idx = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut idx, 6) {
            count += 1;
        }
        assert_eq!(count, 20);
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(500, 3), 20_708_500);
        assert_eq!(binomial(2, 3), 0);
    }

    #[test]
    fn mean_median() {
        assert_eq!(mean_and_median(&[0.4, 0.1, 0.3, 0.2]), (0.25, 0.25));
        assert_eq!(mean_and_median(&[3.0, 1.0, 2.0]), (2.0, 2.0));
        assert_eq!(mean_and_median(&[]), (0.0, 0.0));
    }

    #[test]
    fn calibration_examples() {
        // 9 units over 10 steps.
        let samples = vec![
            (Vector3::new(0.0, 0.0, 0.0), 0),
            (Vector3::new(2.7, 0.0, 0.0), 3),
            (Vector3::new(2.7, 3.6, 0.0), 4),
            (Vector3::new(2.7, 3.6, 2.7), 3),
        ];
        let mpu = calibrate_unit_scale(&samples, DEFAULT_STRIDE_M).unwrap();
        assert_abs_diff_eq!(mpu, 0.762 / 0.9, epsilon = 1e-12);
        assert!((mpu - 0.85).abs() < 0.005);

        let two = vec![(Vector3::zeros(), 7), (Vector3::new(0.762, 0.0, 0.0), 1)];
        assert_abs_diff_eq!(calibrate_unit_scale(&two, 0.762).unwrap(), 1.0, epsilon = 1e-15);

        let still = vec![(Vector3::new(1.0, 1.0, 1.0), 0), (Vector3::new(1.0, 1.0, 1.0), 2)];
        assert_eq!(calibrate_unit_scale(&still, 0.762), Err(AlignError::ZeroDistance));
        assert_eq!(calibrate_unit_scale(&two[..1], 0.762), Err(AlignError::TooFewSamples(1)));
        let zero = vec![(Vector3::zeros(), 1), (Vector3::x(), 0)];
        assert_eq!(calibrate_unit_scale(&zero, 0.762), Err(AlignError::ZeroSteps(1)));
    }
}
