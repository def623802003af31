//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reid_lab::cli::{cmd_sweep, RunConfig};
use reid_lab::degrade::{add_noise, quantize, subsample_fps, Degradation, DimPreset};
use reid_lab::eval::{classify_log_probs, run_sweep, EvalReport, ScoredWindow};
use reid_lab::features::{apply_mask, featurize, to_body_relative, FeatureConfig, BODY_CHANNELS};
use reid_lab::ingest::{build_dataset, write_recording, SplitConfig};
use reid_lab::model::{log_softmax, Network, TrainConfig};
use reid_lab::motion::{slerp, Pose, PoseFrame, Recording, UnitQuat};
use reid_lab::synthgen::generate_dataset;

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, fail: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(fail)
    }
}

// Gradients below this scale are compared on an absolute basis: central
// differences at step 1e-5 carry about 1e-11 of round-off.
const GRAD_SCALE_FLOOR: f64 = 1e-5;

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (steps, h) = (5, 1e-5);
    let mut worst_rel: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    for seed in 0..3 {
        let net = Network::<f64>::init(6, &[8, 4], 4, seed);
        let xs: Vec<f64> = (0..steps * 6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let label = rng.random_range(0..4);
        let (_, g) = net.sample_loss_and_grad(&xs, steps, label);
        let analytic: Vec<f64> = g.tensors().iter().flat_map(|t| t.iter().copied()).collect();
        let mut probe = net.clone();
        let loss = |n: &Network<f64>| -n.log_probs(&xs, steps)[label];
        let mut k = 0;
        for ti in 0..probe.tensors().len() {
            for i in 0..probe.tensors()[ti].len() {
                let orig = probe.tensors()[ti][i];
                probe.tensors_mut()[ti][i] = orig + h;
                let up = loss(&probe);
                probe.tensors_mut()[ti][i] = orig - h;
                let down = loss(&probe);
                probe.tensors_mut()[ti][i] = orig;
                let n = (up - down) / (2.0 * h);
                let a = analytic[k];
                worst_abs = worst_abs.max((a - n).abs());
                worst_rel = worst_rel.max((a - n).abs() / a.abs().max(n.abs()).max(GRAD_SCALE_FLOOR));
                k += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let msg = format!("max rel err {worst_rel:.2e}, max abs err {worst_abs:.2e}, {elapsed:.2?}");
    check(worst_rel < 1e-5 && worst_abs < 1e-9 && elapsed < Duration::from_secs(60), msg.clone(), msg)
}

fn body_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let pose = |rng: &mut ChaCha8Rng| Pose::new(random_vec(rng, 5.0), random_quat(rng));
        let f = PoseFrame { t: 0.0, head: pose(&mut rng), left: pose(&mut rng), right: pose(&mut rng) };
        let yaw = rng.random_range(-10.0..10.0);
        let shift = random_vec(&mut rng, 100.0);
        let (r, q) = (yaw_matrix(yaw), UnitQuat::from_yaw(yaw));
        let mv = |p: &Pose| Pose::new(mat_vec(&r, p.position) + shift, q * p.orientation);
        let g = PoseFrame { t: 0.0, head: mv(&f.head), left: mv(&f.left), right: mv(&f.right) };
        let (a, _) = to_body_relative(&f, None, None);
        let (b, _) = to_body_relative(&g, None, None);
        for c in 0..BODY_CHANNELS {
            worst = worst.max((a.0[c] - b.0[c]).abs());
        }
    }
    let msg = format!("1000 frames, max component difference {worst:.2e}");
    check(worst < 1e-9, msg.clone(), msg)
}

fn slerp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let a = random_quat(&mut rng);
        let b = random_quat(&mut rng);
        let u = rng.random_range(0.0..=1.0);
        let (ra, rb) = (quat_to_matrix(a), quat_to_matrix(b));
        let (axis, angle) = matrix_axis_angle(&mat_mul(&transpose(&ra), &rb));
        let expect = mat_mul(&ra, &axis_angle_matrix(axis, u * angle));
        worst = worst.max(rotation_distance(&expect, &quat_to_matrix(slerp(a, b, u))));
    }
    let msg = format!("100 pairs, max angular error {worst:.2e} rad");
    check(worst < 1e-9, msg.clone(), msg)
}

fn random_recording(rng: &mut ChaCha8Rng, frames: usize) -> Recording {
    let pose = |rng: &mut ChaCha8Rng| Pose::new(random_vec(rng, 2.0), random_quat(rng));
    let fs = (0..frames)
        .map(|i| PoseFrame { t: i as f64 / 30.0, head: pose(rng), left: pose(rng), right: pose(rng) })
        .collect();
    Recording::new("u", "s", 0, 30.0, fs).unwrap()
}

fn neutral_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rec = &generate_dataset(1, 1, 40.0, 30.0, 4).unwrap()[0];
    let mut failures = Vec::new();
    if add_noise(rec, 0.0, 9).unwrap() != *rec {
        failures.push("noise sigma=0");
    }
    if subsample_fps(rec, 30).unwrap() != *rec {
        failures.push("subsample to 30 fps");
    }
    let windows = featurize(rec, &FeatureConfig::default(), 0).unwrap();
    let all = DimPreset::All.mask();
    if windows.iter().any(|w| apply_mask(w, &all).unwrap() != *w) {
        failures.push("full dimension preset");
    }
    for d in [Degradation::None, Degradation::GaussianNoise { sigma: 0.0 }, Degradation::ReducedFps { fps: 30 }] {
        if d.apply_raw(rec, 1).unwrap() != *rec {
            failures.push("neutral condition");
        }
    }
    let steps = [0.0001, 0.001, 0.01, 0.1, 1.0];
    let mut idempotent = 0;
    for i in 0..100 {
        let r = random_recording(&mut rng, 20);
        let step = steps[i % steps.len()];
        let (once, _) = quantize(&r, step);
        let (twice, _) = quantize(&once, step);
        idempotent += (once == twice) as usize;
    }
    if idempotent != 100 {
        failures.push("quantize idempotence");
    }
    let msg = format!("bit-exact neutral operators; quantize idempotent on {idempotent}/100 recordings");
    check(failures.is_empty(), msg, format!("failed: {failures:?}; idempotent {idempotent}/100"))
}

struct DeskRun {
    baseline: EvalReport,
    quantized: EvalReport,
    epochs: (usize, usize),
    elapsed: Duration,
}

fn desk_run() -> Result<DeskRun, String> {
    let start = Instant::now();
    let recs = generate_dataset(8, 12, 60.0, 30.0, 0).map_err(|e| e.to_string())?;
    let ds = build_dataset(recs, SplitConfig::new(8, 2, 2).unwrap()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { hidden_sizes: vec![32, 16], epochs: 30, seed: 0, ..TrainConfig::default() };
    let conditions = [Degradation::None, Degradation::ReducedPrecision { step: 0.0001 }];
    let mut out = run_sweep(&ds, &conditions, &cfg, 30.0).map_err(|e| e.to_string())?;
    let q = out.pop().unwrap();
    let b = out.pop().unwrap();
    Ok(DeskRun {
        epochs: (b.log.epochs.len(), q.log.epochs.len()),
        baseline: b.report,
        quantized: q.report,
        elapsed: start.elapsed(),
    })
}

fn desk_end_to_end(run: &Result<DeskRun, String>) -> Outcome {
    let run = run.as_ref().map_err(|e| e.clone())?;
    let r = &run.baseline;
    let msg = format!(
        "per-sample {}, per-session {}, per-user {}, {} epochs, sweep time {:.1?}",
        r.per_sample, r.per_session, r.per_user, run.epochs.0, run.elapsed
    );
    let pass = r.per_session.value() >= 0.9
        && r.per_user.correct == r.per_user.total
        && r.num_users == 8
        && run.epochs.0 <= 30
        && run.elapsed <= Duration::from_secs(600);
    check(pass, msg.clone(), msg)
}

fn mild_degradation(run: &Result<DeskRun, String>) -> Outcome {
    let run = run.as_ref().map_err(|e| e.clone())?;
    let (b, q) = (run.baseline.per_sample, run.quantized.per_sample);
    // Exact in integers: |b.c/b.t - q.c/q.t| <= 1/100.
    let diff = (b.correct * q.total).abs_diff(q.correct * b.total);
    let msg = format!("per-sample {b} clean vs {q} at step 0.0001 m");
    check(100 * diff <= b.total * q.total, msg.clone(), msg)
}

fn shape_contract() -> Outcome {
    let rec = &generate_dataset(1, 1, 61.0, 30.0, 5).unwrap()[0];
    let w = featurize(rec, &FeatureConfig::default(), 0).unwrap();
    let widths: Vec<usize> = [
        DimPreset::All,
        DimPreset::HandsOnly,
        DimPreset::HandRotationsOnly,
        DimPreset::LeftRotationOnly,
        DimPreset::LeftRotationWOnly,
    ]
    .iter()
    .map(|p| apply_mask(&w[0], &p.mask()).unwrap().channels)
    .collect();
    let msg = format!("window {:?}, {} windows, preset widths {widths:?}", w[0].shape(), w.len());
    check(w.len() == 2 && w[0].shape() == (900, 36) && widths == [36, 28, 16, 8, 2], msg.clone(), msg)
}

fn aggregation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..50 {
        let users = rng.random_range(2..6);
        let n_windows = rng.random_range(1..30);
        let mut scored = Vec::new();
        for k in 0..n_windows {
            let logits: Vec<f64> = (0..users).map(|_| rng.random_range(-4.0..4.0)).collect();
            let label = rng.random_range(0..users);
            let session = format!("s{}", k % 3);
            scored.push(ScoredWindow { label, session_id: session, log_probs: log_softmax(&logits) });
        }
        let report = EvalReport::from_scored(&scored).unwrap();

        // Recount everything with plain loops.
        let argmax = |v: &[f64]| (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
        let sample_hits = scored.iter().filter(|s| argmax(&s.log_probs) == s.label).count();
        let mut sessions: Vec<(usize, String)> = scored.iter().map(|s| (s.label, s.session_id.clone())).collect();
        sessions.sort();
        sessions.dedup();
        let mut session_hits = 0;
        for (label, sid) in &sessions {
            let members: Vec<&ScoredWindow> = scored.iter().filter(|s| s.label == *label && &s.session_id == sid).collect();
            let mut sum = vec![0.0; users];
            for m in &members {
                for (a, b) in sum.iter_mut().zip(&m.log_probs) {
                    *a += b;
                }
            }
            let refs: Vec<&[f64]> = members.iter().map(|m| &m.log_probs[..]).collect();
            let p = classify_log_probs(sid, *label, &refs).unwrap();
            if p.predicted != argmax(&sum) || p.summed.iter().zip(&sum).any(|(a, b)| (a - b).abs() > 1e-12) {
                bad += 1;
            }
            session_hits += (argmax(&sum) == *label) as usize;
            let mut shuffled = refs.clone();
            shuffled.shuffle(&mut rng);
            if classify_log_probs(sid, *label, &shuffled).unwrap() != p {
                bad += 1;
            }
            // Shifting every log-probability by a constant keeps the decision.
            let shifted: Vec<Vec<f64>> = members.iter().map(|m| m.log_probs.iter().map(|v| v - 3.0).collect()).collect();
            let srefs: Vec<&[f64]> = shifted.iter().map(|v| &v[..]).collect();
            if classify_log_probs(sid, *label, &srefs).unwrap().predicted != p.predicted {
                bad += 1;
            }
        }
        let mut user_hits = 0;
        let mut users_seen = 0;
        for u in 0..users {
            let mut sum = vec![0.0; users];
            let mut any = false;
            for s in scored.iter().filter(|s| s.label == u) {
                any = true;
                for (a, b) in sum.iter_mut().zip(&s.log_probs) {
                    *a += b;
                }
            }
            if any {
                users_seen += 1;
                user_hits += (argmax(&sum) == u) as usize;
            }
        }
        if (report.per_sample.correct, report.per_sample.total) != (sample_hits, n_windows)
            || (report.per_session.correct, report.per_session.total) != (session_hits, sessions.len())
            || (report.per_user.correct, report.per_user.total) != (user_hits, users_seen)
        {
            bad += 1;
        }
    }
    check(bad == 0, "50 cases agree with recount; order and shift invariant".into(), format!("{bad} mismatches"))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    std::fs::create_dir(&data).unwrap();
    for r in generate_dataset(3, 4, 10.0, 30.0, 9).unwrap() {
        write_recording(&data.join(format!("{}_{}.jsonl", r.user_id, r.session_id)), &r).unwrap();
    }
    let text = "recordings = data\nsplit = 2, 1, 1\nout = run\nseed = 5\nepochs = 3\nbatch_size = 2\n\
                hidden_sizes = 8, 4\nwindow_seconds = 5\ngaussian_noise = 0.05\nreduced_fps = 10\nreduced_dims = hands_only\n";
    let mut csvs = Vec::new();
    for k in 0..2 {
        let mut cfg = RunConfig::parse(text, tmp.path()).map_err(|e| e.to_string())?;
        cfg.out = tmp.path().join(format!("run{k}"));
        cmd_sweep(&cfg, text).map_err(|e| e.to_string())?;
        csvs.push(std::fs::read(cfg.out.join("sweep.csv")).unwrap());
    }
    let rows = String::from_utf8_lossy(&csvs[0]).lines().count() - 1;
    check(
        csvs[0] == csvs[1],
        format!("{rows} rows, {} bytes, identical across reruns", csvs[0].len()),
        "sweep CSVs differ between reruns".into(),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: Outcome| {
        match &r {
            Ok(m) => println!("PASS {n} {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL {n} {name}: {m}");
            }
        }
    };
    report(1, "gradient oracle", gradient_oracle());
    report(2, "body-relative invariance", body_invariance());
    report(3, "slerp oracle", slerp_oracle());
    report(4, "neutral degradation identity", neutral_identities());
    let desk = desk_run();
    report(5, "desk-scale end-to-end", desk_end_to_end(&desk));
    report(6, "mild-degradation stability", mild_degradation(&desk));
    report(7, "shape contract", shape_contract());
    report(8, "aggregation correctness", aggregation());
    report(9, "sweep determinism", determinism());
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
