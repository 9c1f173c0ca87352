use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn usrec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usrec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Decodes a DDF file by hand: header words and the f32 payload.
fn raw_ddf(path: &Path) -> ([u32; 4], Vec<f32>) {
    let bytes = fs::read(path).unwrap();
    assert_eq!(&bytes[..8], b"TUSDDF01");
    let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap());
    let payload = bytes[24..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ([word(0), word(1), word(2), word(3)], payload)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const IDENTITY_CALIB: &str =
    "sx = 0.5\nsy = 0.25\nrotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]\ntranslation = [0, 0, 0]\n";

fn static_poses(n: usize) -> String {
    (0..n)
        .map(|k| format!("{k},{},1,0,0,5,0,1,0,-3,0,0,1,2,0,0,0,1\n", k as f64 * 0.05))
        .collect()
}

#[test]
fn simulate_writes_one_row_per_frame_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for out in [&a, &b] {
        let o = usrec(&[
            "simulate",
            "--shape",
            "straight",
            "--length-mm",
            "100",
            "--frames",
            "101",
            "--jitter-trans",
            "0.2",
            "--jitter-rot",
            "0.005",
            "--seed",
            "17",
            "--out",
            s(out),
        ]);
        assert!(o.status.success(), "{o:?}");
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1 + 101);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn simulate_rejects_unknown_shape() {
    let dir = TempDir::new().unwrap();
    let o = usrec(&[
        "simulate",
        "--shape",
        "zigzag",
        "--length-mm",
        "10",
        "--frames",
        "5",
        "--out",
        s(&p(&dir, "x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

fn rms_from(out: &str) -> f64 {
    let line = out
        .lines()
        .find(|l| l.starts_with("rms residual:"))
        .unwrap();
    line.split_whitespace().nth(2).unwrap().parse().unwrap()
}

#[test]
fn calibrate_noiseless_and_noisy() {
    let dir = TempDir::new().unwrap();
    let obs = p(&dir, "obs.csv");
    let sim = |noise: &str| {
        usrec(&[
            "simulate",
            "--shape",
            "straight",
            "--length-mm",
            "10",
            "--frames",
            "2",
            "--out",
            s(&p(&dir, "poses.csv")),
            "--observations-out",
            s(&obs),
            "--observation-count",
            "30",
            "--pixel-noise",
            noise,
            "--seed",
            "4",
        ])
    };
    assert!(sim("0").status.success());
    let o = usrec(&[
        "calibrate",
        "--observations",
        s(&obs),
        "--out",
        s(&p(&dir, "c.toml")),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert!(rms_from(&stdout(&o)) < 1e-8);
    let calib = fs::read_to_string(p(&dir, "c.toml")).unwrap();
    assert!(calib.contains("pin_world") && calib.contains("rms_residual"));

    assert!(sim("0.5").status.success());
    let o = usrec(&[
        "calibrate",
        "--observations",
        s(&obs),
        "--out",
        s(&p(&dir, "c.toml")),
    ]);
    assert!(o.status.success(), "{o:?}");
    // 0.5 px at 0.2 mm/px is 0.1 mm per axis of in-plane noise.
    let rms = rms_from(&stdout(&o));
    assert!(rms > 0.02 && rms < 0.3, "{rms}");
}

#[test]
fn calibrate_needs_enough_observations() {
    let dir = TempDir::new().unwrap();
    let obs = p(&dir, "obs.csv");
    let o = usrec(&[
        "simulate",
        "--shape",
        "straight",
        "--length-mm",
        "10",
        "--frames",
        "2",
        "--out",
        s(&p(&dir, "poses.csv")),
        "--observations-out",
        s(&obs),
        "--observation-count",
        "3",
    ]);
    assert!(o.status.success());
    let o = usrec(&[
        "calibrate",
        "--observations",
        s(&obs),
        "--out",
        s(&p(&dir, "c.toml")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("insufficient data"));
}

#[test]
fn static_scan_has_zero_ddf() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "poses.csv"), static_poses(4)).unwrap();
    fs::write(p(&dir, "calib.toml"), IDENTITY_CALIB).unwrap();
    fs::write(p(&dir, "lm.csv"), "frame_index,u,v\n1,2,3\n3,0,4\n").unwrap();
    let o = usrec(&[
        "ddf-gt",
        "--poses",
        s(&p(&dir, "poses.csv")),
        "--calib",
        s(&p(&dir, "calib.toml")),
        "--landmarks",
        s(&p(&dir, "lm.csv")),
        "--width",
        "5",
        "--height",
        "6",
        "--out",
        s(&p(&dir, "gt.ddf")),
    ]);
    assert!(o.status.success(), "{o:?}");
    let (header, payload) = raw_ddf(&p(&dir, "gt.ddf"));
    assert_eq!(header, [4, 5, 6, 2]);
    assert_eq!(payload.len(), 2 * 3 * 5 * 6 * 3 + 2 * 2 * 3);
    assert!(payload.iter().all(|&x| x == 0.0));
}

/// Straight perpendicular sweep with the default probe: frame `i` sits `i`
/// step lengths along the image normal of frame 0.
fn straight_scan(
    dir: &TempDir,
    frames: &str,
    length: &str,
    w: &str,
    h: &str,
) -> (PathBuf, PathBuf, PathBuf) {
    let (poses, calib, pred) = (p(dir, "gt.csv"), p(dir, "calib.toml"), p(dir, "pred.csv"));
    let o = usrec(&[
        "simulate",
        "--shape",
        "straight",
        "--length-mm",
        length,
        "--frames",
        frames,
        "--out",
        s(&poses),
        "--calib-out",
        s(&calib),
        "--pred-out",
        s(&pred),
        "--pred-bias",
        "0,0,0.1",
        "--width",
        w,
        "--height",
        h,
    ]);
    assert!(o.status.success(), "{o:?}");
    (poses, calib, pred)
}

fn ddf_gt(dir: &TempDir, poses: &Path, calib: &Path, w: &str, h: &str, out: &str) -> PathBuf {
    let out = p(dir, out);
    let o = usrec(&[
        "ddf-gt",
        "--poses",
        s(poses),
        "--calib",
        s(calib),
        "--width",
        w,
        "--height",
        h,
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    out
}

#[test]
fn straight_scan_corner_displacements() {
    let dir = TempDir::new().unwrap();
    let (poses, calib, _) = straight_scan(&dir, "11", "10", "4", "3");
    let gt = ddf_gt(&dir, &poses, &calib, "4", "3", "gt.ddf");
    let (header, payload) = raw_ddf(&gt);
    assert_eq!(header, [11, 4, 3, 0]);
    // GP of frame i at every pixel, corners included, is (0, 0, i) mm.
    for i in 1..=10usize {
        for px in 0..12 {
            let k = ((i - 1) * 12 + px) * 3;
            let v = &payload[k..k + 3];
            assert!(
                v[0].abs() < 1e-5 && v[1].abs() < 1e-5 && (v[2] - i as f32).abs() < 1e-5,
                "{i} {px} {v:?}"
            );
        }
    }
}

#[test]
fn evaluate_identical_biased_and_unreadable() {
    let dir = TempDir::new().unwrap();
    let (poses, calib, pred_poses) = straight_scan(&dir, "11", "10", "4", "3");
    let gt = ddf_gt(&dir, &poses, &calib, "4", "3", "gt.ddf");
    let pred = ddf_gt(&dir, &pred_poses, &calib, "4", "3", "pred.ddf");
    let report = p(&dir, "r.json");

    let o = usrec(&[
        "evaluate",
        "--pred",
        s(&gt),
        "--gt",
        s(&gt),
        "--runtime-s",
        "2",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success(), "{o:?}");
    let r = json(&report);
    for k in ["gpe", "gle", "lpe", "lle"] {
        assert_eq!(r[k].as_f64(), Some(0.0), "{k}");
    }
    assert_eq!(r["status"], "ok");

    let o = usrec(&[
        "evaluate",
        "--pred",
        s(&pred),
        "--gt",
        s(&gt),
        "--runtime-s",
        "2",
        "--out",
        s(&report),
    ]);
    assert!(o.status.success());
    let r = json(&report);
    // Local bias b = 0.1 mm: LPE = b; frame i drifts i·b, so GPE = b·(1+…+10)/10.
    assert!((r["lpe"].as_f64().unwrap() - 0.1).abs() < 1e-6);
    assert!((r["gpe"].as_f64().unwrap() - 0.55).abs() < 1e-5);

    let o = usrec(&[
        "evaluate",
        "--pred",
        s(&p(&dir, "missing.ddf")),
        "--gt",
        s(&gt),
        "--runtime-s",
        "2",
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(4));
    let r = json(&report);
    assert_eq!(r["status"], "failed");
    assert!(r["gpe"].is_null());

    fs::write(p(&dir, "junk.ddf"), b"TUSDDF99 not a real file").unwrap();
    let o = usrec(&[
        "evaluate",
        "--pred",
        s(&p(&dir, "junk.ddf")),
        "--gt",
        s(&gt),
        "--runtime-s",
        "2",
        "--out",
        s(&report),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn evaluate_dimension_mismatch_is_input_error() {
    let dir = TempDir::new().unwrap();
    let (poses, calib, _) = straight_scan(&dir, "5", "4", "4", "3");
    let a = ddf_gt(&dir, &poses, &calib, "4", "3", "a.ddf");
    let b = ddf_gt(&dir, &poses, &calib, "3", "4", "b.ddf");
    let o = usrec(&[
        "evaluate",
        "--pred",
        s(&a),
        "--gt",
        s(&b),
        "--runtime-s",
        "1",
        "--out",
        s(&p(&dir, "r.json")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_is_thread_count_independent() {
    let dir = TempDir::new().unwrap();
    let o = usrec(&[
        "simulate",
        "--shape",
        "s_shape",
        "--length-mm",
        "60",
        "--frames",
        "12",
        "--out",
        s(&p(&dir, "gt.csv")),
        "--calib-out",
        s(&p(&dir, "calib.toml")),
        "--pred-out",
        s(&p(&dir, "pred.csv")),
        "--pred-sigma-rot",
        "0.01",
        "--pred-sigma-trans",
        "0.2",
        "--width",
        "32",
        "--height",
        "24",
    ]);
    assert!(o.status.success());
    let gt = ddf_gt(
        &dir,
        &p(&dir, "gt.csv"),
        &p(&dir, "calib.toml"),
        "32",
        "24",
        "gt.ddf",
    );
    let pred = ddf_gt(
        &dir,
        &p(&dir, "pred.csv"),
        &p(&dir, "calib.toml"),
        "32",
        "24",
        "pred.ddf",
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = p(&dir, &format!("r{threads}.json"));
        let o = usrec(&[
            "--threads",
            threads,
            "evaluate",
            "--pred",
            s(&pred),
            "--gt",
            s(&gt),
            "--runtime-s",
            "1",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success());
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

fn write_report(dir: &Path, team: &str, scan: &str, m: [f64; 4], runtime: f64) {
    let text = format!(
        "{{\"team\": \"{team}\", \"scan\": \"{scan}\", \"gpe\": {}, \"gle\": {}, \"lpe\": {}, \"lle\": {}, \"runtime_s\": {runtime}, \"status\": \"ok\"}}",
        m[0], m[1], m[2], m[3]
    );
    fs::write(dir.join(format!("{team}_{scan}.json")), text).unwrap();
}

fn ranked_teams(board: &serde_json::Value) -> Vec<String> {
    board["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["team"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn rank_published_table_as_one_scan() {
    let dir = TempDir::new().unwrap();
    let reports = dir.path().join("reports");
    fs::create_dir(&reports).unwrap();
    let teams = [
        "FiMoNet",
        "RecuVol",
        "FlowNet",
        "MoGLo-Net",
        "PLPPI",
        "Baseline",
    ];
    let gpe = [7.191, 6.858, 5.970, 9.388, 12.093, 12.490];
    let gle = [6.281, 5.978, 5.167, 8.459, 10.366, 11.129];
    let lpe = [0.097, 0.101, 0.111, 0.112, 0.122, 0.135];
    let lle = [0.084, 0.088, 0.096, 0.100, 0.107, 0.118];
    for k in 0..6 {
        write_report(
            &reports,
            teams[k],
            "mean",
            [gpe[k], gle[k], lpe[k], lle[k]],
            1.0,
        );
    }
    let out = p(&dir, "board.json");
    let o = usrec(&["rank", "--reports-dir", s(&reports), "--out", s(&out)]);
    assert!(o.status.success(), "{o:?}");
    let board = json(&out);
    assert_eq!(ranked_teams(&board), teams);
    // Independently computed final scores, to three decimals.
    let text = fs::read_to_string(&out).unwrap();
    for fs3 in ["0.906", "0.876", "0.820", "0.515", "0.214", "0.000"] {
        assert!(text.contains(&format!("\"overall\": {fs3},")), "{fs3}");
    }
}

#[test]
fn rank_six_team_monotone_and_runtime_tie_break() {
    let dir = TempDir::new().unwrap();
    let reports = dir.path().join("reports");
    fs::create_dir(&reports).unwrap();
    for t in 0..6 {
        for scan in 0..4 {
            let f = 1.0 + t as f64 + 0.1 * scan as f64;
            write_report(
                &reports,
                &format!("team{t}"),
                &format!("s{scan}"),
                [5.0 * f, 4.0 * f, 0.1 * f, 0.09 * f],
                3.0,
            );
        }
    }
    let out = p(&dir, "board.json");
    assert!(
        usrec(&["rank", "--reports-dir", s(&reports), "--out", s(&out)])
            .status
            .success()
    );
    assert_eq!(
        ranked_teams(&json(&out)),
        (0..6).map(|t| format!("team{t}")).collect::<Vec<_>>()
    );

    let tie = dir.path().join("tie");
    fs::create_dir(&tie).unwrap();
    write_report(&tie, "alpha", "s", [5.0, 4.0, 0.1, 0.1], 9.0);
    write_report(&tie, "beta", "s", [5.0, 4.0, 0.1, 0.1], 2.0);
    write_report(&tie, "gamma", "s", [6.0, 5.0, 0.2, 0.2], 1.0);
    assert!(usrec(&["rank", "--reports-dir", s(&tie), "--out", s(&out)])
        .status
        .success());
    assert_eq!(ranked_teams(&json(&out)), ["beta", "alpha", "gamma"]);
}

#[test]
fn stats_power_bootstrap_clt_pearson() {
    let dir = TempDir::new().unwrap();
    let o = usrec(&[
        "stats",
        "--mode",
        "power",
        "--mean-diff",
        "0.25",
        "--sd",
        "0.46",
        "--alpha",
        "0.05",
        "--power",
        "0.9",
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).lines().next(), Some("31"));

    let scores = p(&dir, "scores.csv");
    let mut text = String::from("team,scan,score,runtime_s\n");
    for t in 0..4 {
        for scan in 0..10 {
            text += &format!(
                "t{t},s{scan},{},1\n",
                0.9 - 0.25 * t as f64 + 0.01 * (scan % 3) as f64
            );
        }
    }
    fs::write(&scores, &text).unwrap();
    let out = p(&dir, "boot.json");
    let o = usrec(&[
        "stats",
        "--mode",
        "bootstrap",
        "--scores",
        s(&scores),
        "--seed",
        "7",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let r = json(&out);
    assert_eq!(r["resamples"], 2000);
    for t in 0..4 {
        assert_eq!(r["frequencies"][t][t].as_f64(), Some(1.0));
    }
    let o = usrec(&["stats", "--mode", "bootstrap", "--scores", s(&scores)]);
    assert_eq!(o.status.code(), Some(2), "seed is required");

    fs::write(
        &scores,
        "team,scan,score,runtime_s\nt,a,0.4,1\nt,b,0.4,1\nt,c,0.4,1\n",
    )
    .unwrap();
    let o = usrec(&[
        "stats",
        "--mode",
        "clt",
        "--scores",
        s(&scores),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert_eq!(json(&out)["entries"][0]["stderr"].as_f64(), Some(0.0));

    let pairs = p(&dir, "pairs.csv");
    fs::write(&pairs, "x,y\n1,1\n2,3\n3,2\n4,5\n").unwrap();
    let o = usrec(&[
        "stats",
        "--mode",
        "pearson",
        "--scores",
        s(&pairs),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    assert!((json(&out)["r"].as_f64().unwrap() - 0.831_521_84).abs() < 1e-8);
}

#[test]
fn rank_scores_feed_stats() {
    let dir = TempDir::new().unwrap();
    let reports = dir.path().join("reports");
    fs::create_dir(&reports).unwrap();
    for t in 0..3 {
        for scan in 0..5 {
            let f = 1.0 + 2.0 * t as f64;
            write_report(
                &reports,
                &format!("team{t}"),
                &format!("s{scan}"),
                [f, f, 0.1 * f, 0.1 * f],
                1.0,
            );
        }
    }
    let scores = p(&dir, "scores.csv");
    let o = usrec(&[
        "rank",
        "--reports-dir",
        s(&reports),
        "--out",
        s(&p(&dir, "b.json")),
        "--scores-out",
        s(&scores),
    ]);
    assert!(o.status.success());
    let out = p(&dir, "boot.json");
    let o = usrec(&[
        "stats",
        "--mode",
        "bootstrap",
        "--scores",
        s(&scores),
        "--seed",
        "1",
        "--resamples",
        "50",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(
        json(&out)["median_rank"],
        serde_json::json!([1.0, 2.0, 3.0])
    );
}

#[test]
fn traj_static_straight_and_missing_calib() {
    let dir = TempDir::new().unwrap();
    fs::write(p(&dir, "static.csv"), static_poses(5)).unwrap();
    fs::write(p(&dir, "calib.toml"), IDENTITY_CALIB).unwrap();
    let out = p(&dir, "tracks.csv");
    let o = usrec(&[
        "traj",
        "--poses",
        s(&p(&dir, "static.csv")),
        "--calib",
        s(&p(&dir, "calib.toml")),
        "--width",
        "8",
        "--height",
        "6",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let text = fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1)
        .collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| *r == rows[0]));

    let (poses, calib, _) = straight_scan(&dir, "9", "16", "8", "6");
    let o = usrec(&[
        "traj",
        "--poses",
        s(&poses),
        "--calib",
        s(&calib),
        "--width",
        "8",
        "--height",
        "6",
        "--out",
        s(&out),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let values: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|x| x.parse().unwrap()).collect())
        .collect();
    // Each corner moves along a line: every point is its start plus a
    // multiple of the first step.
    for c in 0..4 {
        let at = |f: usize| [values[f][3 * c], values[f][3 * c + 1], values[f][3 * c + 2]];
        let (a, b) = (at(0), at(1));
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        for f in 2..values.len() {
            let q = at(f);
            let e = [q[0] - a[0], q[1] - a[1], q[2] - a[2]];
            let cross = [
                d[1] * e[2] - d[2] * e[1],
                d[2] * e[0] - d[0] * e[2],
                d[0] * e[1] - d[1] * e[0],
            ];
            assert!(
                cross.iter().map(|x| x.abs()).sum::<f64>() < 1e-9,
                "corner {c} frame {f}"
            );
        }
    }

    let o = usrec(&[
        "traj",
        "--poses",
        s(&poses),
        "--calib",
        s(&p(&dir, "nope.toml")),
        "--width",
        "8",
        "--height",
        "6",
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
