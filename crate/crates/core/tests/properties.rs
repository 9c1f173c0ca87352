//! Property tests for the invariants that hold over whole input spaces.

use proptest::prelude::*;
use usrec_core::ddf::{DdfSet, LandmarkSet};
use usrec_core::io::{decode_ddf, encode_ddf};
use usrec_core::metrics::{evaluate_transforms, ScanMetricReport, ScanStatus};
use usrec_core::ranking::{normalize_metric, round3, OvertimePolicy, ScanScore, Tournament};
use usrec_core::se3::ScaleTransform;
use usrec_core::se3::{
    image_relative, mat_from_pose6, pose6_from_mat, relative_tool, Pose6, RigidTransform,
};
use usrec_core::sim::{
    corrupt_locals, gen_trajectory, CorruptionSpec, Direction, Shape, TrajectorySpec,
};

fn pose() -> impl Strategy<Value = Pose6> {
    (
        -200.0..200.0f64,
        -200.0..200.0f64,
        -200.0..200.0f64,
        -3.1..3.1f64,
        -1.4..1.4f64,
        -3.1..3.1f64,
    )
        .prop_map(|(tx, ty, tz, rx, ry, rz)| Pose6::new(tx, ty, tz, rx, ry, rz))
}

fn transform() -> impl Strategy<Value = RigidTransform> {
    pose().prop_map(|p| mat_from_pose6(&p).unwrap())
}

fn small_local() -> impl Strategy<Value = RigidTransform> {
    (
        -2.0..2.0f64,
        -2.0..2.0f64,
        -2.0..2.0f64,
        -0.05..0.05f64,
        -0.05..0.05f64,
        -0.05..0.05f64,
    )
        .prop_map(|(a, b, c, d, e, f)| mat_from_pose6(&Pose6::new(a, b, c, d, e, f)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn compose_is_associative(a in transform(), b in transform(), c in transform()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!(left.max_abs_diff(&right) < 1e-10);
    }

    #[test]
    fn inverse_is_two_sided(a in transform()) {
        let id = RigidTransform::identity();
        prop_assert!(a.compose(&a.inverse()).max_abs_diff(&id) < 1e-12);
        prop_assert!(a.inverse().compose(&a).max_abs_diff(&id) < 1e-12);
        prop_assert!(a.inverse().inverse().max_abs_diff(&a) < 1e-12);
        prop_assert_eq!(a.compose(&id), a);
    }

    #[test]
    fn pose_round_trip(p in pose()) {
        let m = mat_from_pose6(&p).unwrap();
        prop_assert!(mat_from_pose6(&pose6_from_mat(&m)).unwrap().max_abs_diff(&m) < 1e-9);
    }

    #[test]
    fn relative_poses_chain(i in transform(), j in transform(), k in transform()) {
        let direct = relative_tool(&i, &k);
        let chained = relative_tool(&j, &k).compose(&relative_tool(&i, &j));
        prop_assert!(direct.max_abs_diff(&chained) < 1e-10);
    }

    #[test]
    fn conjugation_stays_rigid(rel in transform(), rigid in transform()) {
        prop_assert!(image_relative(&rel, &rigid).orthonormality_error() < 1e-10);
    }

    #[test]
    fn normalization_bounds(
        values in prop::collection::vec(0.0..50.0f64, 1..12),
        fail_mask in prop::collection::vec(any::<bool>(), 12),
    ) {
        let failed = &fail_mask[..values.len()];
        let n = normalize_metric(&values, failed);
        prop_assert!(n.iter().all(|x| (0.0..=1.0).contains(x)));
        for (k, &f) in failed.iter().enumerate() {
            if f {
                prop_assert_eq!(n[k], 0.0);
            }
        }
        if failed.iter().any(|f| !f) {
            let live: Vec<f64> = (0..values.len()).filter(|&k| !failed[k]).map(|k| n[k]).collect();
            prop_assert!(live.contains(&1.0));
        }
        // Lower raw error never scores lower.
        for a in 0..values.len() {
            for b in 0..values.len() {
                if !failed[a] && !failed[b] && values[a] < values[b] {
                    prop_assert!(n[a] >= n[b]);
                }
            }
        }
    }

    #[test]
    fn composite_scores_are_means(g in 0.0..1.0f64, gl in 0.0..1.0f64, l in 0.0..1.0f64, ll in 0.0..1.0f64) {
        let s = ScanScore::from_normalized(g, gl, l, ll);
        prop_assert!((s.fs - (g + gl + l + ll) / 4.0).abs() < 1e-12);
        prop_assert!((s.fs - (s.gs + s.ls) / 2.0).abs() < 1e-12);
        prop_assert!((s.fs - (s.ps + s.lms) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_is_permutation_invariant_and_dense(
        metrics in prop::collection::vec((1.0..20.0f64, 1.0..20.0f64, 0.05..0.3f64, 0.05..0.3f64, 1.0..60.0f64), 2..8),
        rotate in 0usize..8,
    ) {
        let records: Vec<(String, String, ScanMetricReport)> = metrics
            .iter()
            .enumerate()
            .map(|(t, &(a, b, c, d, rt))| {
                let r = ScanMetricReport { gpe: Some(a), gle: Some(b), lpe: Some(c), lle: Some(d), runtime_s: rt, status: ScanStatus::Ok };
                (format!("t{t}"), "s".to_string(), r)
            })
            .collect();
        let mut shuffled = records.clone();
        shuffled.rotate_left(rotate % records.len());
        let a = Tournament::from_records(records).leaderboard(OvertimePolicy::Keep);
        let b = Tournament::from_records(shuffled).leaderboard(OvertimePolicy::Keep);
        prop_assert_eq!(&a, &b);
        let ranks: Vec<usize> = a.iter().map(|e| e.rank).collect();
        prop_assert_eq!(ranks, (1..=a.len()).collect::<Vec<_>>());
        for w in a.windows(2) {
            prop_assert!(round3(w[0].overall) >= round3(w[1].overall));
        }
    }

    #[test]
    fn ddf_bytes_round_trip(
        (n, w, h) in (2u32..5, 1u32..5, 1u32..5),
        l in 0u32..4,
        seed in any::<u32>(),
    ) {
        let dense = DdfSet::dense_len(n, w, h);
        let sparse = 3 * l as usize;
        let value = |k: usize, salt: u32| (((k as u32).wrapping_mul(2_654_435_761) ^ seed ^ salt) as f32 / 1e6) as f64;
        let set = DdfSet {
            width: w,
            height: h,
            frame_count: n,
            landmark_count: l,
            gp: (0..dense).map(|k| value(k, 1)).collect(),
            gl: (0..sparse).map(|k| value(k, 2)).collect(),
            lp: (0..dense).map(|k| value(k, 3)).collect(),
            ll: (0..sparse).map(|k| value(k, 4)).collect(),
        };
        let bytes = encode_ddf(&set).unwrap();
        prop_assert_eq!(bytes.len(), 24 + 4 * (2 * dense + 2 * sparse));
        prop_assert_eq!(decode_ddf(&bytes).unwrap(), set);
    }

    #[test]
    fn reverse_scan_revisits_forward_poses(len in 20.0..200.0f64, frames in 3usize..40, shape in 0usize..3) {
        let shape = [Shape::Straight, Shape::CShape, Shape::SShape][shape];
        let mut spec = TrajectorySpec::new(shape, len, frames);
        let forward = gen_trajectory(&spec).unwrap();
        spec.direction = Direction::Reverse;
        let reverse = gen_trajectory(&spec).unwrap();
        for (a, b) in forward.poses().iter().zip(reverse.poses().iter().rev()) {
            prop_assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn gpe_grows_with_bias(locals in prop::collection::vec(small_local(), 2..12), b1 in 0.01..0.5f64, extra in 0.01..0.5f64) {
        let scale = ScaleTransform::new(0.5, 0.5).unwrap();
        let score = |b: f64| {
            let pred = corrupt_locals(&locals, &CorruptionSpec { bias: [0.0, 0.0, b], ..Default::default() }).unwrap();
            evaluate_transforms(&pred, &locals, &scale, &LandmarkSet::default(), 6, 4, 1.0, 120.0).unwrap().gpe.unwrap()
        };
        prop_assert!(score(b1 + extra) > score(b1));
    }
}
