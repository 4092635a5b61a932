use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use fasbeam::analysis::MetricsReport;
use fasbeam::neural::read_trace;

const SCENES: &str = r#"
version = 1
seed = 11

[splits]
train = 3
valid = 0
test = 2

[scene]
sample_rate = 8000
n_mics = 2
duration_secs = 0.25
t60 = [0.15, 0.25]

[scene.pool]
kind = "synthetic"
seed = 1
n_speech = 4
n_noise = 2
secs = 0.5
"#;

const MODEL: &str = r#"
version = 1

[model]
frame_len = 16
hop = 8
embed_dim = 8
blocks_per_repeat = 2
repeats = 1
bottleneck = 8
hidden = 16

[train]
steps = 4
learning_rate = 1e-3
optimizer = "adam"
batch_size = 2
checkpoint_every = 2
"#;

fn fasbeam(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fasbeam"))
        .args(args.iter().map(|a| a.as_ref()))
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

struct Fixture {
    root: PathBuf,
    data: PathBuf,
    model_cfg: PathBuf,
    checkpoint: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let root = tempfile::tempdir().unwrap().keep();
        let cfg = write(&root, "scenes.toml", SCENES);
        let data = root.join("data");
        let o = fasbeam(&[&"simulate", &"--config", &cfg, &"--out", &data]);
        assert!(o.status.success(), "{}", stderr(&o));
        let model_cfg = write(&root, "model.toml", MODEL);
        let run = root.join("run");
        let o = fasbeam(&[&"train", &"--config", &model_cfg, &"--data", &data, &"--out", &run]);
        assert!(o.status.success(), "{}", stderr(&o));
        Fixture {
            checkpoint: run.join("latest.json"),
            root,
            data,
            model_cfg,
        }
    })
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn simulate_is_deterministic_and_counts_match() {
    let f = fixture();
    let again = f.root.join("data_again");
    let cfg = f.root.join("scenes.toml");
    assert!(fasbeam(&[&"simulate", &"--config", &cfg, &"--out", &again]).status.success());
    assert_eq!(tree(&f.data), tree(&again));
    assert_eq!(std::fs::read_dir(f.data.join("train")).unwrap().count(), 3);
    assert_eq!(std::fs::read_dir(f.data.join("test")).unwrap().count(), 2);

    let other = f.root.join("data_seed");
    let o = fasbeam(&[&"simulate", &"--config", &cfg, &"--out", &other, &"--seed", &"12", &"--set", &"splits.train=0"]);
    assert!(o.status.success());
    let a = std::fs::read(f.data.join("test/test-00000/mixture.wav")).unwrap();
    let b = std::fs::read(other.join("test/test-00000/mixture.wav")).unwrap();
    assert_ne!(a, b);
    let resolved: serde_json::Value = serde_json::from_slice(&std::fs::read(other.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 12);
}

#[test]
fn config_errors_exit_with_one() {
    let f = fixture();
    let out = f.root.join("bad");
    let o = fasbeam(&[&"simulate", &"--out", &out, &"--set", &"scene.room_sise=[3, 8]"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("room_sise"));
    let o = fasbeam(&[&"simulate", &"--out", &out, &"--set", &"version=2"]);
    assert_eq!(o.status.code(), Some(1));
    let o = fasbeam(&[&"simulate", &"--out", &out, &"--set", &"scene.n_mics=0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = fasbeam(&[&"simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fasbeam(&[&"--help"]).status.code(), Some(0));
}

#[test]
fn oracle_methods_and_segments() {
    let f = fixture();
    let o = fasbeam(&[&"oracle", &"--method", &"beamformit", &"--data", &f.data]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for m in ["td-mvdr", "td-mwf", "fd-mvdr", "fd-sdw-mwf", "mb-mvdr", "mb-gev"] {
        assert!(err.contains(m), "{err}");
    }

    let all = f.root.join("oracle_all");
    let o = fasbeam(&[&"oracle", &"--method", &"all", &"--data", &f.data, &"--out", &all]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: MetricsReport = serde_json::from_slice(&std::fs::read(all.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rep.aggregates.len(), 6);
    assert_eq!(rep.scenes.len(), 12);

    // `full` and a segment longer than the utterance both use one covariance estimate
    let mut reports = Vec::new();
    for seg in ["full", "5000"] {
        let out = f.root.join(format!("oracle_{seg}"));
        let o = fasbeam(&[&"oracle", &"--method", &"fd-sdw-mwf", &"--data", &f.data, &"--segment-ms", &seg, &"--out", &out]);
        assert!(o.status.success(), "{}", stderr(&o));
        let rep: MetricsReport = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
        reports.push(rep.scenes.iter().map(|s| s.si_snri).collect::<Vec<_>>());
    }
    assert_eq!(reports[0], reports[1]);
    let full = &rep.scenes.iter().filter(|s| s.method == "fd-sdw-mwf").map(|s| s.si_snri).collect::<Vec<_>>();
    assert_eq!(&reports[0], full);

    let o = fasbeam(&[&"oracle", &"--method", &"td-mwf", &"--data", &f.data, &"--segment-ms", &"100"]);
    assert_eq!(o.status.code(), Some(1));
    let o = fasbeam(&[&"oracle", &"--method", &"fd-mvdr", &"--data", &f.data, &"--segment-ms", &"soon"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_reports_and_missing_checkpoint() {
    let f = fixture();
    let out = f.root.join("eval");
    let o = fasbeam(&[&"eval", &"--checkpoint", &f.checkpoint, &"--data", &f.data, &"--out", &out, &"--sit"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: MetricsReport = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(rep.scenes.len(), 2);
    assert_eq!(rep.aggregates[0].method, "fasnet");
    assert!(rep.scenes.iter().all(|s| s.si_snri.is_finite()));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 + 1);

    let o = fasbeam(&[&"eval", &"--checkpoint", &f.root.join("nope.json"), &"--data", &f.data]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.json"));
}

#[test]
fn zero_learning_rate_gives_flat_trace() {
    let f = fixture();
    // a single-scene dataset makes every batch identical
    let one = f.root.join("one");
    let sdir = one.join("test-00000");
    std::fs::create_dir_all(&sdir).unwrap();
    for e in std::fs::read_dir(f.data.join("test/test-00000")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, sdir.join(p.file_name().unwrap())).unwrap();
    }
    let out = f.root.join("flat");
    let o = fasbeam(&[
        &"train", &"--config", &f.model_cfg, &"--data", &one, &"--out", &out,
        &"--set", &"train.learning_rate=0.0",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = read_trace(out.join("trace.csv")).unwrap();
    assert_eq!(trace.len(), 4);
    assert!(trace[0].loss.is_finite());
    assert!(trace.iter().all(|r| r.loss == trace[0].loss));
    let start: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("step_0.json")).unwrap()).unwrap();
    let end: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("latest.json")).unwrap()).unwrap();
    assert_eq!(start["params"], end["params"]);
}

#[test]
fn resume_matches_uninterrupted_run() {
    let f = fixture();
    let full = read_trace(f.checkpoint.with_file_name("trace.csv")).unwrap();
    let half = f.root.join("half");
    let o = fasbeam(&[&"train", &"--config", &f.model_cfg, &"--data", &f.data, &"--out", &half, &"--steps", &"2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let resumed = f.root.join("resumed");
    let o = fasbeam(&[
        &"train", &"--config", &f.model_cfg, &"--data", &f.data, &"--out", &resumed,
        &"--resume", &half.join("latest.json"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tail = read_trace(resumed.join("trace.csv")).unwrap();
    assert_eq!(tail.len(), 2);
    assert_eq!(tail[0], full[2]);
    assert_eq!(tail[1], full[3]);
    assert_eq!(
        std::fs::read(resumed.join("latest.json")).unwrap(),
        std::fs::read(&f.checkpoint).unwrap()
    );
}

#[test]
fn mel_objective_trains() {
    let f = fixture();
    let out = f.root.join("mel");
    let o = fasbeam(&[
        &"train", &"--config", &f.model_cfg, &"--data", &f.data, &"--out", &out,
        &"--set", &"train.objective=mel-si-mse", &"--steps", &"2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = read_trace(out.join("trace.csv")).unwrap();
    assert_eq!(trace.len(), 2);
    assert!(trace.iter().all(|r| r.loss.is_finite() && r.loss >= 0.0));
}

#[test]
fn train_rejects_mismatched_model() {
    let f = fixture();
    let o = fasbeam(&[
        &"train", &"--config", &f.model_cfg, &"--data", &f.data, &"--out", &f.root.join("mismatch"),
        &"--set", &"model.channels=3",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn beampattern_exports_one_file_per_frame() {
    let f = fixture();
    let scene = f.data.join("test/test-00001");
    let out = f.root.join("bp");
    let o = fasbeam(&[&"beampattern", &"--checkpoint", &f.checkpoint, &"--scene", &scene, &"--frames", &"0,3,7", &"--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    for t in [0, 3, 7] {
        let csv = std::fs::read_to_string(out.join(format!("frame_{t}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("freq_hz,doa_deg,db"));
        let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 65 * 360);
        assert!(rows.iter().all(|r| r.len() == 3 && r[2] <= 1e-9 && r[2] >= -40.0));
        assert!(out.join(format!("frame_{t}.pgm")).exists());
    }
    let o = fasbeam(&[&"beampattern", &"--checkpoint", &f.checkpoint, &"--scene", &scene, &"--frames", &"100000", &"--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("out of range"));
}

#[test]
fn gradcheck_passes_and_corruption_fails() {
    let f = fixture();
    let report = f.root.join("gc.json");
    let o = fasbeam(&[&"gradcheck", &"--out", &report]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("tcn1.bottleneck.w") && stdout.contains("gate2.V"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert!(json["groups"].as_array().unwrap().iter().all(|g| g["rel_error"].as_f64().unwrap() < 1e-4));

    let o = fasbeam(&[&"gradcheck", &"--corrupt", &"gate1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gate1"));
}
