use facelab_core::geometry::{
    canonical_2d, canonical_3d, euler_from_landmarks, rotation_from_euler, smooth_landmarks,
    smoothing_weights, umeyama, AlignmentMeta, AlignmentTemplate, EulerAngles, ExtractionMode,
    LandmarkSet, SimilarityTransform, TEMPLATE_CENTER, TEMPLATE_SCALE,
};
use facelab_core::imgcore::Image;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0)])
        .collect()
}

fn residual(t: &SimilarityTransform, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| {
            let p = t.apply(*s);
            (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2)
        })
        .sum()
}

/// Orthographic projection of a rotated rig, the same way the renderer does it.
fn project(angles: EulerAngles, scale: f64, center: [f64; 2]) -> LandmarkSet {
    let r = rotation_from_euler(&angles);
    let pts = canonical_3d()
        .iter()
        .map(|p| {
            let x = r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2];
            let y = r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2];
            [center[0] + scale * x, center[1] + scale * y]
        })
        .collect();
    LandmarkSet::new(pts).unwrap()
}

#[test]
fn umeyama_identity_and_translation() {
    let src = random_points(1, 10);
    let t = umeyama(&src, &src).unwrap();
    assert!((t.scale - 1.0).abs() < 1e-12);
    assert!(t.angle().abs() < 1e-12);
    assert!(t.translation.iter().all(|v| v.abs() < 1e-10));

    let dst: Vec<_> = src.iter().map(|p| [p[0] + 5.0, p[1] - 3.0]).collect();
    let t = umeyama(&src, &dst).unwrap();
    assert!((t.scale - 1.0).abs() < 1e-12);
    assert!((t.translation[0] - 5.0).abs() < 1e-10);
    assert!((t.translation[1] + 3.0).abs() < 1e-10);
}

#[test]
fn umeyama_recovers_known_similarity() {
    let truth = SimilarityTransform::from_parts(1.5, 30f64.to_radians(), [2.0, 7.0]);
    let src = random_points(7, 68);
    let dst: Vec<_> = src.iter().map(|&p| truth.apply(p)).collect();
    let t = umeyama(&src, &dst).unwrap();
    assert!((t.scale - 1.5).abs() < 1e-9);
    for i in 0..2 {
        assert!((t.translation[i] - truth.translation[i]).abs() < 1e-9);
        for j in 0..2 {
            assert!((t.rotation[i][j] - truth.rotation[i][j]).abs() < 1e-9);
        }
    }
}

#[test]
fn umeyama_never_returns_reflection() {
    // Mirror image: the best proper rotation is still a rotation.
    let src = random_points(3, 20);
    let dst: Vec<_> = src.iter().map(|p| [-p[0], p[1]]).collect();
    let t = umeyama(&src, &dst).unwrap();
    let r = t.rotation;
    let det = r[0][0] * r[1][1] - r[0][1] * r[1][0];
    assert!((det - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn umeyama_is_a_local_minimum(seed in 0u64..10_000, noise in 0.0f64..3.0) {
        let src = random_points(seed, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let truth = SimilarityTransform::from_parts(rng.random_range(0.3..3.0), rng.random_range(-3.0..3.0), [1.0, -4.0]);
        let dst: Vec<_> = src.iter().map(|&p| {
            let q = truth.apply(p);
            [q[0] + noise * rng.random_range(-1.0..1.0), q[1] + noise * rng.random_range(-1.0..1.0)]
        }).collect();
        let t = umeyama(&src, &dst).unwrap();
        let base = residual(&t, &src, &dst);
        let tol = 1e-9 * base.max(1.0);
        for d in [-1e-3, 1e-3] {
            let mut a = t; a.scale += d;
            prop_assert!(residual(&a, &src, &dst) >= base - tol);
            let a = SimilarityTransform::from_parts(t.scale, t.angle() + d, t.translation);
            prop_assert!(residual(&a, &src, &dst) >= base - tol);
            for k in 0..2 {
                let mut a = t; a.translation[k] += d;
                prop_assert!(residual(&a, &src, &dst) >= base - tol);
            }
        }
    }

    #[test]
    fn umeyama_is_rotation_equivariant(seed in 0u64..10_000, q in -3.0f64..3.0) {
        let src = random_points(seed, 15);
        let dst = random_points(seed + 1, 15);
        let t = umeyama(&src, &dst).unwrap();
        let rq = SimilarityTransform::from_parts(1.0, q, [0.0, 0.0]);
        let src_q: Vec<_> = src.iter().map(|&p| rq.apply(p)).collect();
        let t2 = umeyama(&src_q, &dst).unwrap();
        // R' = R·Qᵀ
        let expected = t.compose(&rq.inverse().unwrap());
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((t2.rotation[i][j] - expected.rotation[i][j]).abs() < 1e-9);
            }
        }
        prop_assert!((t2.scale - t.scale).abs() < 1e-9 * t.scale.max(1.0));
    }

    #[test]
    fn alignment_transform_round_trips(seed in 0u64..10_000, size in 16usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = SimilarityTransform::from_parts(rng.random_range(50.0..300.0), rng.random_range(-1.0..1.0), [rng.random_range(0.0..400.0), rng.random_range(0.0..400.0)]);
        let lms = LandmarkSet::new(canonical_2d().iter().map(|&p| {
            let q = truth.apply(p);
            [q[0] + rng.random_range(-2.0..2.0), q[1] + rng.random_range(-2.0..2.0)]
        }).collect()).unwrap();
        let template = AlignmentTemplate::new(ExtractionMode::FullFace);
        let img = Image::zeros(32, 32, 3);
        let (face, t) = facelab_core::geometry::align_face(&img, &lms, &template, size).unwrap();
        prop_assert_eq!(face.width(), size);
        let inv = t.inverse().unwrap();
        for &p in lms.points() {
            let back = inv.apply(t.apply(p));
            prop_assert!((back[0] - p[0]).abs() < 1e-6 && (back[1] - p[1]).abs() < 1e-6);
        }
    }
}

#[test]
fn align_face_on_template_is_identity() {
    let template = AlignmentTemplate::new(ExtractionMode::WholeFace);
    let lms = template.target_landmarks(128);
    let img = Image::from_fn(128, 128, 3, |x, y, c| ((x + 2 * y + c) % 7) as f64 / 7.0);
    let (face, t) = facelab_core::geometry::align_face(&img, &lms, &template, 128).unwrap();
    assert!((t.scale - 1.0).abs() < 1e-9);
    assert!(t.angle().abs() < 1e-9);
    assert!(face.max_abs_diff(&img) < 1e-6);
    assert!(facelab_core::geometry::align_face(&img, &lms, &template, 15).is_err());
}

#[test]
fn alignment_meta_round_trip() {
    let t = SimilarityTransform::from_parts(0.5, 0.3, [10.0, -2.0]);
    let meta = AlignmentMeta::new(&t, ExtractionMode::HalfFace, 96);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    meta.save(&path).unwrap();
    let back = AlignmentMeta::load(&path).unwrap();
    assert_eq!(back, meta);
    assert_eq!(back.transform(), t);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"mode\": \"half_face\""));
}

#[test]
fn smoothing_constant_and_identity() {
    let l = LandmarkSet::new(random_points(9, 68)).unwrap();
    let seq = vec![l.clone(); 7];
    for w in [1, 3, 5, 9] {
        let out = smooth_landmarks(&seq, w).unwrap();
        for o in &out {
            for (a, b) in o.points().iter().zip(l.points()) {
                assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            }
        }
    }
    let varied: Vec<_> = (0..5).map(|i| l.translated(i as f64 * 3.7, -(i as f64))).collect();
    assert_eq!(smooth_landmarks(&varied, 1).unwrap(), varied);
}

#[test]
fn smoothing_attenuates_impulse_by_center_weight() {
    let base = LandmarkSet::new(vec![[10.0, 20.0]; 68]).unwrap();
    let mut seq = vec![base.clone(); 11];
    seq[5] = base.translated(10.0, 0.0);
    let out = smooth_landmarks(&seq, 5).unwrap();
    // Independent weight evaluation: σ = 5/6, taps at offsets -2..=2.
    let sigma: f64 = 5.0 / 6.0;
    let raw: Vec<f64> = (-2..=2).map(|d: i32| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let center = raw[2] / raw.iter().sum::<f64>();
    let peak = out[5].points()[0][0] - 10.0;
    assert!((peak - 10.0 * center).abs() < 1e-12, "{peak} vs {}", 10.0 * center);
    assert!((out[5].points()[0][1] - 20.0).abs() < 1e-12);
    let w = smoothing_weights(11, 5, 5);
    assert!((w[2].1 - center).abs() < 1e-15);
}

#[test]
fn euler_frontal_is_zero() {
    let lms = LandmarkSet::new(
        canonical_3d()
            .iter()
            .map(|p| [TEMPLATE_CENTER[0] + TEMPLATE_SCALE * p[0], TEMPLATE_CENTER[1] + TEMPLATE_SCALE * p[1]])
            .collect(),
    )
    .unwrap();
    let e = euler_from_landmarks(&lms, canonical_3d()).unwrap();
    assert!(e.yaw.abs() < 1e-6 && e.pitch.abs() < 1e-6 && e.roll.abs() < 1e-6, "{e:?}");
}

#[test]
fn euler_recovers_yaw_and_roll() {
    let e = euler_from_landmarks(&project(EulerAngles::new(25.0, 0.0, 0.0), 60.0, [64.0, 64.0]), canonical_3d()).unwrap();
    assert!((e.yaw - 25.0).abs() < 0.5, "{e:?}");

    let frontal = project(EulerAngles::default(), 60.0, [64.0, 64.0]);
    let rot = SimilarityTransform::from_parts(1.0, 10f64.to_radians(), [0.0, 0.0]);
    let rolled = frontal.map(|p| {
        let q = rot.apply([p[0] - 64.0, p[1] - 64.0]);
        [q[0] + 64.0, q[1] + 64.0]
    });
    let e = euler_from_landmarks(&rolled, canonical_3d()).unwrap();
    assert!((e.roll - 10.0).abs() < 0.5 && e.yaw.abs() < 0.5 && e.pitch.abs() < 0.5, "{e:?}");

    for &(y, p, r) in &[(-30.0, 12.0, 5.0), (15.0, -8.0, -20.0)] {
        let e = euler_from_landmarks(&project(EulerAngles::new(y, p, r), 45.0, [10.0, 90.0]), canonical_3d()).unwrap();
        assert!((e.yaw - y).abs() < 1e-6 && (e.pitch - p).abs() < 1e-6 && (e.roll - r).abs() < 1e-6, "{e:?}");
    }
}

#[test]
fn euler_rejects_degenerate_inputs() {
    let flat: Vec<[f64; 3]> = canonical_3d().iter().map(|p| [p[0], p[1], 0.0]).collect();
    let lms = project(EulerAngles::default(), 50.0, [0.0, 0.0]);
    assert!(euler_from_landmarks(&lms, &flat).is_err());
    let collapsed = LandmarkSet::new(vec![[3.0, 3.0]; 68]).unwrap();
    assert!(euler_from_landmarks(&collapsed, canonical_3d()).is_err());
}

mod with_renderer {
    use facelab_core::datasim::{render, IdentityParams, StateParams};
    use facelab_core::geometry::{align_face, AlignmentTemplate, ExtractionMode};

    #[test]
    fn rotated_face_aligns_onto_template() {
        let st = StateParams {
            roll: 20.0,
            background_seed: 3,
            ..Default::default()
        };
        let r = render(&IdentityParams::default(), &st, 128).unwrap();
        for mode in [ExtractionMode::HalfFace, ExtractionMode::FullFace, ExtractionMode::WholeFace] {
            let template = AlignmentTemplate::new(mode);
            let (face, t) = align_face(&r.image, &r.landmarks, &template, 96).unwrap();
            assert_eq!((face.width(), face.height()), (96, 96));
            for (p, q) in r.landmarks.points().iter().zip(template.target_points(96)) {
                let a = t.apply(*p);
                assert!((a[0] - q[0]).abs() < 0.5 && (a[1] - q[1]).abs() < 0.5);
            }
            assert!((t.angle().to_degrees() + 20.0).abs() < 1e-6);
        }
    }

    #[test]
    fn translation_does_not_change_aligned_face() {
        let st = StateParams {
            yaw: 10.0,
            background_seed: 8,
            ..Default::default()
        };
        let id = IdentityParams::random(5);
        let r = render(&id, &st, 128).unwrap();
        // The renderer's shift pans the whole frame, background included.
        let (dx, dy) = (6.5, -4.25);
        let shifted = StateParams { shift: [dx / 128.0, dy / 128.0], ..st };
        let m = render(&id, &shifted, 128).unwrap();
        let (moved, moved_lms) = (m.image, m.landmarks);
        for (p, q) in moved_lms.points().iter().zip(r.landmarks.points()) {
            assert!((p[0] - q[0] - dx).abs() < 1e-9 && (p[1] - q[1] - dy).abs() < 1e-9);
        }
        let template = AlignmentTemplate::new(ExtractionMode::FullFace);
        let (a, _) = align_face(&r.image, &r.landmarks, &template, 96).unwrap();
        let (b, _) = align_face(&moved, &moved_lms, &template, 96).unwrap();
        let diff = a.max_abs_diff(&b);
        assert!(diff < 0.02, "{diff}");
    }
}
