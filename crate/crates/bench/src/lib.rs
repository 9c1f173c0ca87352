//! Fixtures shared by the benchmarks in `benches/`.

use nalgebra::Vector3;
use usrec_core::calib::PinheadObservation;
use usrec_core::ddf::{gt_locals, LandmarkSet};
use usrec_core::rng::StreamRng;
use usrec_core::se3::{RigidTransform, ScaleTransform};
use usrec_core::sim::{
    corrupt_locals, default_calibration, gen_landmarks, gen_pinhead_observations, gen_trajectory,
    CorruptionSpec, Shape, TrajectorySpec,
};

/// Predicted and ground-truth locals of one simulated C-shaped sweep.
pub struct ScanFixture {
    pub pred: Vec<RigidTransform>,
    pub gt: Vec<RigidTransform>,
    pub scale: ScaleTransform,
    pub landmarks: LandmarkSet,
    pub width: u32,
    pub height: u32,
}

pub fn scan(frames: usize, width: u32, height: u32) -> ScanFixture {
    let calib = default_calibration();
    let mut spec = TrajectorySpec::new(Shape::CShape, 200.0, frames);
    spec.width = width;
    spec.height = height;
    spec.jitter_trans = 0.2;
    spec.jitter_rot = 0.002;
    spec.seed = 1;
    let gt = gt_locals(&gen_trajectory(&spec).expect("valid spec"), &calib.t_rigid);
    let noise = CorruptionSpec {
        sigma_rot: 0.001,
        sigma_trans: 0.02,
        bias: [0.0, 0.0, 0.01],
        seed: 2,
    };
    ScanFixture {
        pred: corrupt_locals(&gt, &noise).expect("valid corruption"),
        gt,
        scale: calib.scale().expect("positive scale"),
        landmarks: gen_landmarks(frames, 20, width, height, 3),
        width,
        height,
    }
}

/// Pinhead observations of the default calibration with pixel noise.
pub fn observations(count: usize, pixel_noise: f64) -> Vec<PinheadObservation> {
    let pin = Vector3::new(30.0, -20.0, 150.0);
    gen_pinhead_observations(&default_calibration(), &pin, count, pixel_noise, 4)
        .expect("valid observations")
}

/// Team ids, final scores `fs[team][scan]` and runtimes for a bootstrap run.
pub fn score_matrix(teams: usize, scans: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = StreamRng::new(5);
    let ids = (0..teams).map(|t| format!("team{t}")).collect();
    let fs = (0..teams)
        .map(|t| {
            (0..scans)
                .map(|_| (t as f64 / teams as f64 + rng.range(0.0, 0.3)).min(1.0))
                .collect()
        })
        .collect();
    let runtimes = (0..teams)
        .map(|_| (0..scans).map(|_| rng.range(5.0, 90.0)).collect())
        .collect();
    (ids, fs, runtimes)
}
