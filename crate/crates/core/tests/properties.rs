use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trajcap_core::align::{evaluate, ransac_align, umeyama, AlignError, RansacParams, SimilarityTransform};
use trajcap_core::conditions::ConditionSet;
use trajcap_core::poseio::{CaptureManifest, CaptureRecord, ReconstructedSet};
use trajcap_core::trajectory::{
    densify, densify_polyline, perturb, polyline_from_points, DenseTrajectory, DensifyParams, EulerRotation,
    PoseSample, SparseTrajectory, Vertex2,
};

fn vertex() -> impl Strategy<Value = Vertex2> {
    (-100.0..100.0f64, -100.0..100.0f64).prop_map(|(x, y)| Vertex2::new(x, y))
}

/// A random visitation order over 2..8 vertices, every vertex visited at
/// least once and some more than once.
fn sparse_strategy() -> impl Strategy<Value = SparseTrajectory> {
    (2usize..8)
        .prop_flat_map(|n| (prop::collection::vec(vertex(), n), prop::collection::vec(0..n, 0..10)))
        .prop_flat_map(|(vertices, extra)| {
            let owners: Vec<usize> = (0..vertices.len()).chain(extra).collect();
            (Just(vertices), Just(owners).prop_shuffle())
        })
        .prop_map(|(vertices, owners)| {
            let mut orders = vec![Vec::new(); vertices.len()];
            for (slot, owner) in owners.iter().enumerate() {
                orders[*owner].push(slot as u32 + 1);
            }
            SparseTrajectory::new(vertices, orders).unwrap()
        })
}

/// Independent walker: steps `k * step` from the start and locates each
/// arclength by scanning segments from the beginning.
fn brute_walk(points: &[Vertex2], step: f64) -> Vec<Vertex2> {
    let total: f64 = points.windows(2).map(|w| w[0].distance(&w[1])).sum();
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let s = k as f64 * step;
        if s > total + 1e-9 * step {
            break;
        }
        let mut remaining = s.min(total);
        let mut pos = *points.last().unwrap();
        for w in points.windows(2) {
            let len = w[0].distance(&w[1]);
            if remaining <= len && len > 0.0 {
                let t = remaining / len;
                pos = Vertex2::new(w[0].x + t * (w[1].x - w[0].x), w[0].y + t * (w[1].y - w[0].y));
                break;
            }
            remaining -= len;
        }
        out.push(pos);
        k += 1;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_is_a_bijection(sparse in sparse_strategy()) {
        let path = sparse.expand_visitation().unwrap();
        prop_assert_eq!(path.len(), sparse.step_count());
        let mut rebuilt = vec![Vec::new(); sparse.vertices().len()];
        for (slot, v) in path.iter().enumerate() {
            rebuilt[*v].push(slot as u32 + 1);
        }
        let mut expected: Vec<Vec<u32>> = sparse.orders().to_vec();
        for o in &mut expected {
            o.sort_unstable();
        }
        prop_assert_eq!(rebuilt, expected);
    }

    #[test]
    fn densify_matches_brute_walker(points in prop::collection::vec(vertex(), 2..6), speed in 0.5..20.0f64, fps in 1.0..120.0f64) {
        prop_assume!(points.windows(2).map(|w| w[0].distance(&w[1])).sum::<f64>() > 1e-3);
        let polyline = polyline_from_points(&points).unwrap();
        let params = DensifyParams { speed, fps, ..Default::default() };
        let dense = densify_polyline(&polyline, &params).unwrap();
        let oracle = brute_walk(&points, speed / fps);
        prop_assert_eq!(dense.len(), oracle.len());
        for (s, o) in dense.samples().iter().zip(&oracle) {
            prop_assert!((s.protagonist_pos.x - o.x).abs() < 1e-9);
            prop_assert!((s.protagonist_pos.y - o.y).abs() < 1e-9);
        }
    }

    #[test]
    fn densify_depends_only_on_step(sparse in sparse_strategy(), k in 1u32..6) {
        prop_assume!(sparse.path_polyline().is_ok());
        let base = DensifyParams { speed: 1.6, fps: 60.0, ..Default::default() };
        let scaled = DensifyParams { speed: 1.6 * k as f64, fps: 60.0 * k as f64, ..Default::default() };
        let a = densify(&sparse, &base).unwrap();
        let b = densify(&sparse, &scaled).unwrap();
        prop_assert_eq!(a.len(), b.len());
        for (p, q) in a.samples().iter().zip(b.samples()) {
            prop_assert!((p.protagonist_pos - q.protagonist_pos).norm() < 1e-9);
        }
    }

    #[test]
    fn straight_segment_has_constant_forward_rotation(a in vertex(), b in vertex()) {
        prop_assume!(a.distance(&b) > 1e-3);
        let sparse = SparseTrajectory::new(vec![a, b], vec![vec![1], vec![2]]).unwrap();
        let dense = densify(&sparse, &DensifyParams::default()).unwrap();
        let first = dense.samples()[0].camera_rot;
        prop_assert_eq!(first.rx, 0.0);
        prop_assert_eq!(first.ry, 0.0);
        prop_assert!(dense.samples().iter().all(|s| s.camera_rot == first));
    }

    #[test]
    fn zero_sigma_perturb_is_identity(seed in any::<u64>(), n in 1usize..50) {
        let samples = (0..n).map(|k| PoseSample {
            frame: k as u64,
            protagonist_pos: Vector3::new(k as f64, 0.5, 0.0),
            camera_pos: Vector3::new(k as f64, 0.5, 0.75),
            camera_rot: EulerRotation::new(1.0, 2.0, k as f64),
        }).collect();
        let d = DenseTrajectory::new(samples, 60.0).unwrap();
        prop_assert_eq!(perturb(&d, 0.0, 0.0, seed).unwrap(), d);
    }
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle).into_inner()
}

fn random_cloud(rng: &mut impl Rng, n: usize, half: f64) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::from_fn(|_, _| rng.random_range(-half..half)))
        .collect()
}

fn sse(t: &SimilarityTransform, src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> f64 {
    src.iter().zip(dst).map(|(s, d)| (d - t.apply(s)).norm_squared()).sum()
}

#[test]
fn umeyama_beats_nearby_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..10 {
        let n = rng.random_range(5..60);
        let src = random_cloud(&mut rng, n, 10.0);
        let truth = SimilarityTransform::new(rng.random_range(0.3..3.0), random_rotation(&mut rng), Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0))).unwrap();
        let dst: Vec<_> = src
            .iter()
            .map(|p| truth.apply(p) + Vector3::from_fn(|_, _| rng.random_range(-0.2..0.2)))
            .collect();
        let best = umeyama(&src, &dst, true).unwrap();
        let best_cost = sse(&best, &src, &dst);
        for _ in 0..1000 {
            let axis = Unit::new_normalize(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
            let dr = Rotation3::from_axis_angle(&axis, rng.random_range(-0.02..0.02)).into_inner();
            let cand = SimilarityTransform::new(
                best.scale() * (1.0 + rng.random_range(-0.02..0.02)),
                dr * best.rotation(),
                best.translation() + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05)),
            )
            .unwrap();
            assert!(sse(&cand, &src, &dst) >= best_cost - 1e-9 * best_cost.max(1.0));
        }
    }
}

#[test]
fn umeyama_is_equivariant_to_rigid_motion_of_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..50 {
        let n = rng.random_range(4..40);
        let src = random_cloud(&mut rng, n, 10.0);
        let dst = random_cloud(&mut rng, n, 10.0);
        let g = SimilarityTransform::new(1.0, random_rotation(&mut rng), Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0))).unwrap();
        let moved: Vec<_> = dst.iter().map(|p| g.apply(p)).collect();
        let lhs = umeyama(&src, &moved, true).unwrap();
        let rhs = g.compose(&umeyama(&src, &dst, true).unwrap());
        for (a, b) in lhs.to_array().iter().zip(rhs.to_array()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn inverse_round_trips_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..200 {
        let t = SimilarityTransform::new(rng.random_range(0.1..10.0), random_rotation(&mut rng), Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0))).unwrap();
        let p = Vector3::from_fn(|_, _| rng.random_range(-10.0..10.0));
        assert!((t.inverse().apply(&t.apply(&p)) - p).amax() < 1e-12);
    }
}

#[test]
fn ransac_is_deterministic_per_seed() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let src = random_cloud(&mut rng, 80, 20.0);
    let truth = SimilarityTransform::new(1.3, random_rotation(&mut rng), Vector3::new(1.0, 2.0, 3.0)).unwrap();
    let mut dst: Vec<_> = src.iter().map(|p| truth.apply(p)).collect();
    for p in dst.iter_mut().take(30) {
        *p += Vector3::new(50.0, -40.0, 10.0);
    }
    let params = RansacParams { seed: 77, ..Default::default() };
    let a = ransac_align(&src, &dst, &params).unwrap();
    let b = ransac_align(&src, &dst, &params).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.inlier_count(), 50);
}

/// Exhaustive consensus search written directly against `umeyama`.
fn brute_force_consensus(src: &[Vector3<f64>], dst: &[Vector3<f64>], threshold: f64) -> Option<(usize, Vec<bool>)> {
    let n = src.len();
    let mut best: Option<(usize, f64, SimilarityTransform)> = None;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let s = [src[i], src[j], src[k]];
                let d = [dst[i], dst[j], dst[k]];
                let Ok(t) = umeyama(&s, &d, true) else { continue };
                let res: Vec<f64> = src.iter().zip(dst).map(|(a, b)| (b - t.apply(a)).norm()).collect();
                let inl: Vec<f64> = res.into_iter().filter(|r| *r < threshold).collect();
                let count = inl.len();
                let mean = if count > 0 { inl.iter().sum::<f64>() / count as f64 } else { f64::INFINITY };
                let better = match &best {
                    None => true,
                    Some((c, m, _)) => count > *c || (count == *c && mean < *m),
                };
                if better {
                    best = Some((count, mean, t));
                }
            }
        }
    }
    let (count, _, t) = best?;
    let consensus: Vec<usize> = (0..n).filter(|&i| (dst[i] - t.apply(&src[i])).norm() < threshold).collect();
    let cs: Vec<_> = consensus.iter().map(|&i| src[i]).collect();
    let cd: Vec<_> = consensus.iter().map(|&i| dst[i]).collect();
    let refit = umeyama(&cs, &cd, true).unwrap_or(t);
    let mask = (0..n).map(|i| (dst[i] - refit.apply(&src[i])).norm() < threshold).collect();
    Some((count, mask))
}

#[test]
fn ransac_agrees_with_exhaustive_search_on_small_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for trial in 0..200 {
        let n = rng.random_range(4..=6);
        let src = random_cloud(&mut rng, n, 5.0);
        let truth = SimilarityTransform::new(rng.random_range(0.5..2.0), random_rotation(&mut rng), Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0))).unwrap();
        let mut dst: Vec<_> = src
            .iter()
            .map(|p| truth.apply(p) + Vector3::from_fn(|_, _| rng.random_range(-0.05..0.05)))
            .collect();
        let n_out = rng.random_range(0..=2);
        for p in dst.iter_mut().take(n_out) {
            *p += Vector3::from_fn(|_, _| rng.random_range(-20.0..20.0));
        }
        let threshold = 0.3;
        let combos = n * (n - 1) * (n - 2) / 6;
        let params = RansacParams { threshold, max_iterations: combos, seed: trial, ..Default::default() };
        let oracle = brute_force_consensus(&src, &dst, threshold);
        match (ransac_align(&src, &dst, &params), oracle) {
            (Ok(res), Some((count, mask))) => {
                assert!(res.exhaustive);
                assert_eq!(res.hypothesis_inliers, count, "trial {trial}");
                assert_eq!(res.inliers, mask, "trial {trial}");
            }
            (Err(AlignError::NoConsensus { best, .. }), Some((count, _))) => {
                assert_eq!(best, count, "trial {trial}");
                assert!(count < 4);
            }
            (other, oracle) => panic!("trial {trial}: {other:?} vs {oracle:?}"),
        }
    }
}

fn manifest_and_recon(n: usize, sigma: f64, seed: u64) -> (CaptureManifest, ReconstructedSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut entries = Vec::new();
    let gauge = SimilarityTransform::new(0.7, random_rotation(&mut rng), Vector3::new(3.0, -1.0, 2.0)).unwrap();
    for i in 0..n {
        let p = Vector3::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0), rng.random_range(0.0..5.0));
        let name = format!("frame_{i:06}.png");
        records.push(CaptureRecord { image_name: name.clone(), camera_pos: p, camera_rot: EulerRotation::default() });
        let noise = if sigma > 0.0 { Vector3::from_fn(|_, _| rng.random_range(-sigma..sigma)) } else { Vector3::zeros() };
        entries.push((name, gauge.apply(&p) + noise));
    }
    (
        CaptureManifest::new(records, ConditionSet::default()).unwrap(),
        ReconstructedSet::new(entries).unwrap(),
    )
}

#[test]
fn evaluate_scales_linearly_with_unit_factor() {
    let (m, r) = manifest_and_recon(60, 0.1, 5);
    let params = RansacParams { threshold: 1.0, ..Default::default() };
    let a = evaluate(&r, &m, &params, 1.0).unwrap();
    let b = evaluate(&r, &m, &params, 0.85).unwrap();
    assert!((b.average_error - 0.85 * a.average_error).abs() < 1e-12);
    assert!((b.median_error - 0.85 * a.median_error).abs() < 1e-12);
    assert_eq!(a.inlier_mask, b.inlier_mask);
}

#[test]
fn evaluate_matches_by_name_and_reports_overlap() {
    let (m, r) = manifest_and_recon(10, 0.0, 6);
    // Keep only three recon entries plus one unknown name.
    let mut entries: Vec<_> = r.entries()[..3].to_vec();
    entries.push(("stranger.png".into(), Vector3::zeros()));
    let partial = ReconstructedSet::new(entries).unwrap();
    let params = RansacParams::default();
    assert!(matches!(
        evaluate(&partial, &m, &params, 1.0),
        Err(AlignError::InsufficientOverlap { .. }) | Err(AlignError::NoConsensus { .. })
    ));
    let two = ReconstructedSet::new(r.entries()[..2].to_vec()).unwrap();
    assert_eq!(
        evaluate(&two, &m, &params, 1.0),
        Err(AlignError::InsufficientOverlap { matched: 2, required: 3 })
    );
    let report = evaluate(&r, &m, &params, 1.0).unwrap();
    assert_eq!(report.total_count(), 10);
    assert!(report.average_error < 1e-9);
}
