use std::collections::BTreeSet;
use std::path::Path;

use usrec_core::calib::{solve_spatial, JacobianMode, SolverOptions};
use usrec_core::ddf::{gt_ddf_from_scan, gt_locals, poses_from_locals, LandmarkSet};
use usrec_core::io::{self, DdfFile, ReportRecord, ScoreRow};
use usrec_core::metrics::ScanMetricReport;
use usrec_core::ranking::{
    bootstrap_ranks, clt_distribution, paired_t_power, paired_t_sample_size, pearson_r, round3,
    OvertimePolicy, Tail, Tournament,
};
use usrec_core::se3::{accumulate_chain, corner_tracks};
use usrec_core::sim::{
    corrupt_locals, gen_landmarks, gen_pinhead_observations, gen_trajectory, CorruptionSpec,
    TrajectorySpec,
};
use usrec_core::Error;

use crate::{
    CalibrateArgs, DdfGtArgs, EvaluateArgs, Failure, PolicyArg, RankArgs, SimulateArgs, StatsArgs,
    StatsMode, TailArg, TrajArgs,
};

type Outcome = Result<(), Failure>;

/// Pin position used for simulated calibration sessions, mm.
const SIM_PIN: [f64; 3] = [30.0, -20.0, 150.0];

pub fn simulate(a: &SimulateArgs) -> Outcome {
    let mut spec = TrajectorySpec::new(a.shape, a.length_mm, a.frames);
    spec.direction = a.direction;
    spec.orientation = a.orientation;
    spec.curvature = a.curvature;
    spec.jitter_trans = a.jitter_trans;
    spec.jitter_rot = a.jitter_rot;
    spec.seed = a.seed;
    spec.width = a.width;
    spec.height = a.height;
    let scan = gen_trajectory(&spec)?;
    io::write_poses(&a.out, &scan)?;
    println!("wrote {} poses to {}", scan.frame_count(), a.out.display());

    if let Some(path) = &a.calib_out {
        io::write_calibration(path, &spec.calibration, false)?;
    }
    if let Some(path) = &a.observations_out {
        let obs = gen_pinhead_observations(
            &spec.calibration,
            &SIM_PIN.into(),
            a.observation_count,
            a.pixel_noise,
            a.seed,
        )?;
        io::write_observations(path, &obs)?;
    }
    if let Some(path) = &a.landmarks_out {
        let lm = gen_landmarks(
            scan.frame_count(),
            a.landmarks_per_frame,
            a.width,
            a.height,
            a.seed,
        );
        io::write_landmarks(path, &lm)?;
    }
    if let Some(path) = &a.pred_out {
        let corruption = CorruptionSpec {
            sigma_rot: a.pred_sigma_rot,
            sigma_trans: a.pred_sigma_trans,
            bias: a.pred_bias,
            seed: a.pred_seed,
        };
        let t_rigid = &spec.calibration.t_rigid;
        let pred = corrupt_locals(&gt_locals(&scan, t_rigid), &corruption)?;
        let poses =
            poses_from_locals(&scan.poses()[0], &pred, t_rigid, scan.timestamps().to_vec())?;
        io::write_poses(path, &poses)?;
    }
    Ok(())
}

pub fn calibrate(a: &CalibrateArgs) -> Outcome {
    let obs = io::read_observations(&a.observations)?;
    let opts = SolverOptions {
        max_iterations: a.max_iter,
        jacobian: if a.analytic_jacobian {
            JacobianMode::Analytic
        } else {
            JacobianMode::ForwardDifference
        },
        restarts: a.restarts,
        seed: a.seed,
    };
    let sol = solve_spatial(&obs, &opts)?;
    io::write_calibration(&a.out, &sol, true)?;
    println!("rms residual: {:e} mm", sol.rms_residual);
    println!(
        "sx = {}, sy = {} mm/px, iterations = {}",
        sol.sx, sol.sy, sol.iterations
    );
    if !sol.converged {
        return Err(Failure::NonConvergence(format!(
            "solver stopped after {} iterations without converging",
            sol.iterations
        )));
    }
    Ok(())
}

fn landmarks_or_empty(path: Option<&Path>) -> Result<LandmarkSet, Error> {
    path.map_or_else(|| Ok(LandmarkSet::default()), io::read_landmarks)
}

pub fn ddf_gt(a: &DdfGtArgs) -> Outcome {
    let scan = io::read_poses(&a.poses)?;
    let calib = io::read_calibration(&a.calib)?;
    let landmarks = landmarks_or_empty(a.landmarks.as_deref())?;
    let ddf = gt_ddf_from_scan(&scan, &calib, &landmarks, a.width, a.height)?;
    io::write_ddf(&a.out, &ddf)?;
    println!(
        "wrote N={} {}x{} L={} to {}",
        ddf.frame_count,
        ddf.width,
        ddf.height,
        ddf.landmark_count,
        a.out.display()
    );
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Outcome {
    let scan = a.scan.clone().unwrap_or_else(|| {
        a.gt.file_stem()
            .map_or_else(|| "scan".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let gt = DdfFile::open(&a.gt)?;
    let write = |report: ScanMetricReport| {
        let record = ReportRecord {
            team: a.team.clone(),
            scan: scan.clone(),
            report,
        };
        io::write_report(&a.out, &record)
    };
    let pred = match DdfFile::open(&a.pred) {
        Ok(p) => p,
        Err(e) => {
            write(ScanMetricReport::failed(a.runtime_s))?;
            return Err(Failure::PredictionUnreadable(format!(
                "prediction unreadable ({e}); wrote a failed report"
            )));
        }
    };
    let report = io::evaluate_ddf_files(&pred, &gt, a.runtime_s, a.time_limit_s)?;
    write(report)?;
    if let Some([gpe, gle, lpe, lle]) = report.values() {
        println!(
            "GPE {gpe} GLE {gle} LPE {lpe} LLE {lle} (mm), status {:?}",
            report.status
        );
    }
    Ok(())
}

pub fn rank(a: &RankArgs) -> Outcome {
    let records = io::read_reports_dir(&a.reports_dir)?;
    let mut seen = BTreeSet::new();
    for r in &records {
        if !seen.insert((r.team.clone(), r.scan.clone())) {
            return Err(Failure::Input(format!(
                "duplicate report for team '{}' on scan '{}'",
                r.team, r.scan
            )));
        }
    }
    let policy = match a.overtime_policy {
        PolicyArg::Keep => OvertimePolicy::Keep,
        PolicyArg::Fail => OvertimePolicy::Fail,
    };
    let tournament =
        Tournament::from_records(records.into_iter().map(|r| (r.team, r.scan, r.report)));
    let board = tournament.leaderboard(policy);
    io::write_leaderboard(&a.out, &board, tournament.scans.len(), policy)?;
    for e in &board {
        println!(
            "{:>3}  {:<24} {:.3}  {:.3} s",
            e.rank,
            e.team,
            round3(e.overall),
            e.mean_runtime_s
        );
    }
    if let Some(path) = &a.scores_out {
        let fs = tournament.final_scores(policy);
        let mut rows = Vec::new();
        for (t, team) in tournament.teams.iter().enumerate() {
            for (s, scan) in tournament.scans.iter().enumerate() {
                rows.push(ScoreRow {
                    team: team.clone(),
                    scan: scan.clone(),
                    score: fs[t][s],
                    runtime_s: tournament.reports[s][t].map_or(0.0, |r| r.runtime_s),
                });
            }
        }
        std::fs::write(path, io::scores_to_string(&rows))
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

/// Team ids, `values[team][scan]` and `runtimes[team][scan]` from a score
/// table that must cover every (team, scan) pair exactly once.
type ScoreMatrix = (Vec<String>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn score_matrix(rows: &[ScoreRow]) -> Result<ScoreMatrix, Failure> {
    let teams: Vec<String> = rows
        .iter()
        .map(|r| r.team.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let scans: Vec<String> = rows
        .iter()
        .map(|r| r.scan.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut values = vec![vec![None; scans.len()]; teams.len()];
    for r in rows {
        let t = teams.binary_search(&r.team).expect("collected");
        let s = scans.binary_search(&r.scan).expect("collected");
        if values[t][s].replace((r.score, r.runtime_s)).is_some() {
            return Err(Failure::Input(format!(
                "duplicate score for team '{}' on scan '{}'",
                r.team, r.scan
            )));
        }
    }
    let mut scores = Vec::with_capacity(teams.len());
    let mut runtimes = Vec::with_capacity(teams.len());
    for (t, row) in values.iter().enumerate() {
        let mut sc = Vec::with_capacity(scans.len());
        let mut rt = Vec::with_capacity(scans.len());
        for (s, v) in row.iter().enumerate() {
            let (score, runtime) = v.ok_or_else(|| {
                Failure::Input(format!(
                    "no score for team '{}' on scan '{}'",
                    teams[t], scans[s]
                ))
            })?;
            sc.push(score);
            rt.push(runtime);
        }
        scores.push(sc);
        runtimes.push(rt);
    }
    Ok((teams, scores, runtimes))
}

fn emit(out: Option<&Path>, value: &serde_json::Value) -> Outcome {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn required<'a>(scores: &'a Option<std::path::PathBuf>, mode: &str) -> Result<&'a Path, Failure> {
    scores
        .as_deref()
        .ok_or_else(|| Failure::Input(format!("--scores is required for --mode {mode}")))
}

pub fn stats(a: &StatsArgs) -> Outcome {
    let out = a.out.as_deref();
    match a.mode {
        StatsMode::Bootstrap => {
            let seed = a
                .seed
                .ok_or_else(|| Failure::Input("--seed is required for --mode bootstrap".into()))?;
            let rows = io::read_scores(required(&a.scores, "bootstrap")?)?;
            let (teams, scores, runtimes) = score_matrix(&rows)?;
            let report = bootstrap_ranks(&teams, &scores, &runtimes, a.resamples, seed)?;
            for (t, team) in teams.iter().enumerate() {
                println!(
                    "{team}: modal rank {}, median rank {}",
                    report.modal_rank()[t],
                    report.median_rank[t]
                );
            }
            emit(
                out,
                &serde_json::to_value(&report).expect("report serializes"),
            )
        }
        StatsMode::Clt => {
            let rows = io::read_scores(required(&a.scores, "clt")?)?;
            let (teams, scores, _) = score_matrix(&rows)?;
            let report = clt_distribution(&teams, &scores)?;
            emit(
                out,
                &serde_json::to_value(&report).expect("report serializes"),
            )
        }
        StatsMode::Pearson => {
            let (x, y) = io::read_pairs(required(&a.scores, "pearson")?)?;
            let r = pearson_r(&x, &y)?;
            println!("r = {r}");
            emit(out, &serde_json::json!({ "n": x.len(), "r": r }))
        }
        StatsMode::Power => {
            let d = match (a.effect_size, a.mean_diff, a.sd) {
                (Some(d), None, None) => d,
                (None, Some(m), Some(sd)) if sd > 0.0 => m / sd,
                _ => {
                    return Err(Failure::Input(
                        "give either --effect-size or both --mean-diff and a positive --sd".into(),
                    ))
                }
            };
            let (tail, name) = match a.tail {
                TailArg::One => (Tail::One, "one"),
                TailArg::Two => (Tail::Two, "two"),
            };
            let n = paired_t_sample_size(d, a.alpha, a.power, tail)?;
            let achieved = paired_t_power(n, d, a.alpha, tail);
            println!("{n}");
            emit(
                out,
                &serde_json::json!({
                    "effect_size": d,
                    "alpha": a.alpha,
                    "target_power": a.power,
                    "tail": name,
                    "n": n,
                    "achieved_power": achieved,
                }),
            )
        }
    }
}

pub fn traj(a: &TrajArgs) -> Outcome {
    let calib = io::read_calibration(&a.calib)?;
    let scan = io::read_poses(&a.poses)?;
    let globals = accumulate_chain(&gt_locals(&scan, &calib.t_rigid));
    let tracks = corner_tracks(&globals, &calib.scale()?, a.width, a.height)?;
    std::fs::write(&a.out, io::corner_tracks_to_string(&tracks))
        .map_err(|e| Failure::Input(format!("{}: {e}", a.out.display())))?;
    println!(
        "wrote {} frames of corner tracks to {}",
        tracks.len(),
        a.out.display()
    );
    Ok(())
}
