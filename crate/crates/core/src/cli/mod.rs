//! The `fasbeam` command line.
//!
//! Every command reads an optional TOML config (`version = 1`), fills missing keys with
//! defaults and applies `--set key.path=value` overrides. Exit codes: 0 on success, 1 for
//! invalid input or configuration, 2 for runtime failures.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use toml::Value;

use self::config::{get_path, resolve, set_path, user_table, CONFIG_VERSION};
use crate::analysis::{
    beampattern, default_doa_grid, default_freq_grid, report_metrics, write_pgm, MetricsReport, ScoreOptions,
    SystemInfo, PATTERN_FLOOR_DB,
};
use crate::error::{Error, Result};
use crate::neural::{
    fasnet_forward, gradcheck, load_checkpoint, Example, FasnetConfig, GradcheckOptions, TrainConfig, Trainer,
};
use crate::neural::{init_model, save_checkpoint};
use crate::objectives::Objective;
use crate::oraclebf::{segment_beamform, OracleMethod, OracleOptions, OracleSignals};
use crate::scenesim::{read_dataset, read_scene, sample_scene, scene_seed, write_scene, SceneConfig, SceneRecord};

#[derive(Debug, Parser)]
#[command(name = "fasbeam", version, about = "Low-latency filter-and-sum beamforming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render train/valid/test scene datasets.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Master seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Config override, e.g. `scene.n_mics=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Train a FaSNet model on a simulated dataset.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset root written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from a training checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Total number of steps (overrides `train.steps`).
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Score a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Directory for `metrics.csv` and `metrics.json`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shift-invariant scoring (best shift within ±2 ms).
        #[arg(long)]
        sit: bool,
    },
    /// Run oracle beamformers on a dataset split.
    Oracle {
        /// Method name or `all`.
        #[arg(long)]
        method: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        /// Covariance segment length in ms, or `full`.
        #[arg(long, default_value = "full")]
        segment_ms: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sit: bool,
    },
    /// Export per-frame beampatterns of a model's learned filters.
    Beampattern {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Scene directory.
        #[arg(long)]
        scene: PathBuf,
        /// Comma-separated frame indices.
        #[arg(long, value_delimiter = ',', required = true)]
        frames: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Output source whose filters are analysed.
        #[arg(long, default_value_t = 0)]
        source: usize,
        /// Unnormalized dB instead of per-frequency normalized dB.
        #[arg(long)]
        raw: bool,
    },
    /// Compare analytic gradients with finite differences.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Test hook: perturb analytic gradients of tensors with this name prefix.
        #[arg(long)]
        corrupt: Option<String>,
        /// Write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
}

/// Scene counts per split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Splits {
    pub fn iter(&self) -> [(&'static str, usize); 3] {
        [("train", self.train), ("valid", self.valid), ("test", self.test)]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub version: u32,
    /// Master seed; every scene seed derives from it.
    pub seed: u64,
    pub scene: SceneConfig,
    pub splits: Splits,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            version: CONFIG_VERSION,
            seed: 0,
            scene: SceneConfig::default(),
            splits: Splits {
                train: 200,
                valid: 50,
                test: 30,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainRunConfig {
    pub version: u32,
    /// Dataset split used for training.
    pub split: String,
    pub model: FasnetConfig,
    pub train: TrainConfig,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        TrainRunConfig {
            version: CONFIG_VERSION,
            split: "train".into(),
            model: FasnetConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckSettings {
    pub seed: u64,
    pub signal_len: usize,
    pub step: f64,
    pub tolerance: f64,
    pub objective: Objective,
    /// Offset added by `--corrupt`.
    pub corrupt_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradcheckRunConfig {
    pub version: u32,
    pub model: FasnetConfig,
    pub gradcheck: GradcheckSettings,
}

impl Default for GradcheckRunConfig {
    fn default() -> Self {
        let d = GradcheckOptions::default();
        GradcheckRunConfig {
            version: CONFIG_VERSION,
            model: FasnetConfig::tiny(),
            gradcheck: GradcheckSettings {
                seed: d.seed,
                signal_len: d.signal_len,
                step: d.step,
                tolerance: d.tolerance,
                objective: d.objective,
                corrupt_offset: 1e-2,
            },
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            sets,
        } => {
            let mut user = user_table(config.as_deref(), &sets)?;
            if let Some(s) = seed {
                set_path(&mut user, "seed", Value::Integer(s as i64))?;
            }
            simulate(&resolve(&SimulateConfig::default(), user)?, &out)
        }
        Command::Train {
            config,
            data,
            out,
            resume,
            steps,
            sets,
        } => train(config.as_deref(), &sets, &data, &out, resume.as_deref(), steps),
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
            sit,
        } => eval(&checkpoint, &data, &split, out.as_deref(), sit),
        Command::Oracle {
            method,
            data,
            split,
            segment_ms,
            out,
            sit,
        } => oracle(&method, &data, &split, &segment_ms, out.as_deref(), sit),
        Command::Beampattern {
            checkpoint,
            scene,
            frames,
            out,
            source,
            raw,
        } => export_beampatterns(&checkpoint, &scene, &frames, &out, source, raw),
        Command::Gradcheck {
            config,
            corrupt,
            out,
            sets,
        } => {
            let cfg = resolve(&GradcheckRunConfig::default(), user_table(config.as_deref(), &sets)?)?;
            run_gradcheck(&cfg, corrupt, out.as_deref())
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?).map_err(|e| Error::io(path, e))
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} {} does not exist", path.display())))
    }
}

/// Renders every split into `out/<split>/` and records the resolved config in
/// `out/simulate.json`.
pub fn simulate(cfg: &SimulateConfig, out: &Path) -> Result<()> {
    cfg.scene.validate()?;
    let (speech, noise) = cfg.scene.pool.load(cfg.scene.sample_rate)?;
    create_dir(out)?;
    write_json(&out.join("simulate.json"), cfg)?;
    for (split, count) in cfg.splits.iter() {
        let dir = out.join(split);
        create_dir(&dir)?;
        for i in 0..count {
            let mut scene = sample_scene(&cfg.scene, scene_seed(cfg.seed, split, i), &speech, &noise)?;
            scene.id = format!("{split}-{i:05}");
            write_scene(&scene, &dir)?;
        }
        eprintln!("{split}: {count} scenes");
    }
    Ok(())
}

/// `data/<split>` when it exists, otherwise `data` itself.
fn split_dir(data: &Path, split: &str) -> Result<PathBuf> {
    require(data, "dataset")?;
    let d = data.join(split);
    Ok(if d.is_dir() { d } else { data.to_path_buf() })
}

fn examples(records: &[SceneRecord]) -> Vec<Example> {
    records
        .iter()
        .map(|r| Example {
            mixture: r.mixture.clone(),
            targets: r.targets.clone(),
        })
        .collect()
}

fn check_model_fits(model: &FasnetConfig, records: &[SceneRecord]) -> Result<()> {
    for r in records {
        if r.mixture.n_channels() != model.channels || r.targets.len() != model.sources {
            return Err(Error::Config(format!(
                "model expects {} channels and {} sources but scene {} has {} and {}",
                model.channels,
                model.sources,
                r.id(),
                r.mixture.n_channels(),
                r.targets.len()
            )));
        }
    }
    Ok(())
}

fn train(
    config: Option<&Path>,
    sets: &[String],
    data: &Path,
    out: &Path,
    resume: Option<&Path>,
    steps: Option<usize>,
) -> Result<()> {
    let mut user = user_table(config, sets)?;
    if let Some(s) = steps {
        set_path(&mut user, "train.steps", Value::Integer(s as i64))?;
    }
    let split = get_path(&user, "split").and_then(Value::as_str).unwrap_or("train").to_string();
    let records = read_dataset(split_dir(data, &split)?)?;
    // channel and source counts follow the dataset unless given explicitly
    if get_path(&user, "model.channels").is_none() {
        set_path(&mut user, "model.channels", Value::Integer(records[0].mixture.n_channels() as i64))?;
    }
    if get_path(&user, "model.sources").is_none() {
        set_path(&mut user, "model.sources", Value::Integer(records[0].targets.len() as i64))?;
    }
    let cfg = resolve(&TrainRunConfig::default(), user)?;
    cfg.model.validate()?;
    cfg.train.validate()?;
    check_model_fits(&cfg.model, &records)?;
    let data = examples(&records);

    let mut trainer = match resume {
        Some(p) => {
            require(p, "checkpoint")?;
            let ck = load_checkpoint(p)?;
            if ck.config != cfg.model {
                return Err(Error::Config(format!(
                    "checkpoint {} was trained with a different model config",
                    p.display()
                )));
            }
            Trainer::from_checkpoint(&ck, Some(cfg.train.clone()))?
        }
        None => Trainer::new(init_model(&cfg.model, cfg.train.seed)?, cfg.train.clone())?,
    };
    create_dir(out)?;
    write_json(&out.join("train.json"), &cfg)?;
    if trainer.step == 0 {
        save_checkpoint(out.join("step_0.json"), &trainer.checkpoint())?;
    }
    let every = (cfg.train.steps / 20).max(1);
    let total = cfg.train.steps;
    trainer.run(&data, Some(out), |r| {
        if (r.step + 1) % every == 0 || r.step + 1 == total {
            eprintln!("step {:>6}  loss {:>9.4}  grad {:>9.4}", r.step + 1, r.loss, r.grad_norm);
        }
    })?;
    Ok(())
}

fn finish_report(report: &MetricsReport, out: Option<&Path>) -> Result<()> {
    for a in &report.aggregates {
        println!(
            "{:<20} scenes {:>4}  SI-SNR {:>7.2} dB  SI-SNRi {:>7.2} dB",
            a.method, a.n_scenes, a.mean_si_snr, a.mean_si_snri
        );
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        report.write_csv(dir.join("metrics.csv"))?;
        report.write_json(dir.join("metrics.json"))?;
    }
    Ok(())
}

fn eval(checkpoint: &Path, data: &Path, split: &str, out: Option<&Path>, sit: bool) -> Result<()> {
    require(checkpoint, "checkpoint")?;
    let model = load_checkpoint(checkpoint)?.model()?;
    let records = read_dataset(split_dir(data, split)?)?;
    check_model_fits(&model.config, &records)?;
    let outputs = records
        .iter()
        .map(|r| Ok(fasnet_forward(&r.mixture, &model)?.signals))
        .collect::<Result<Vec<_>>>()?;
    let system = SystemInfo {
        method: "fasnet".into(),
        n_mics: model.config.channels,
        causal: model.config.causal,
    };
    let report = report_metrics(&records, &outputs, &system, ScoreOptions { shift_invariant: sit })?;
    finish_report(&report, out)
}

fn parse_segment(s: &str) -> Result<Option<f64>> {
    if s == "full" {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(Some(v)),
        _ => Err(Error::Config(format!("segment length '{s}' must be a positive number of ms or 'full'"))),
    }
}

/// Per-target oracle estimates for one scene.
pub fn oracle_outputs(method: OracleMethod, record: &SceneRecord, opts: &OracleOptions) -> Result<Vec<Vec<f64>>> {
    let rirs = record.manifest.direct_rirs()?;
    record
        .direct_images
        .iter()
        .zip(&rirs)
        .map(|(image, rir)| {
            let sig = OracleSignals {
                mixture: &record.mixture,
                target_image: image,
                direct_rirs: rir,
                reference: record.manifest.reference,
            };
            segment_beamform(method, &sig, opts)
        })
        .collect()
}

fn oracle(method: &str, data: &Path, split: &str, segment: &str, out: Option<&Path>, sit: bool) -> Result<()> {
    let methods: Vec<OracleMethod> = if method == "all" {
        OracleMethod::ALL.to_vec()
    } else {
        vec![method.parse()?]
    };
    let segment_ms = parse_segment(segment)?;
    let records = read_dataset(split_dir(data, split)?)?;
    let opts = OracleOptions {
        segment_ms,
        ..OracleOptions::default()
    };
    let mut report = MetricsReport::default();
    for m in methods {
        let td = matches!(m, OracleMethod::TdMvdr | OracleMethod::TdMwf);
        if td && segment_ms.is_some() && method == "all" {
            eprintln!("{m}: skipped, time-domain methods use the whole utterance");
            continue;
        }
        let outputs = records
            .iter()
            .map(|r| oracle_outputs(m, r, &opts))
            .collect::<Result<Vec<_>>>()?;
        let name = match segment_ms {
            Some(s) => format!("{m}@{s}ms"),
            None => m.to_string(),
        };
        let system = SystemInfo {
            method: name,
            n_mics: records[0].mixture.n_channels(),
            causal: false,
        };
        report.merge(report_metrics(&records, &outputs, &system, ScoreOptions { shift_invariant: sit })?);
    }
    finish_report(&report, out)
}

fn export_beampatterns(
    checkpoint: &Path,
    scene: &Path,
    frames: &[usize],
    out: &Path,
    source: usize,
    raw: bool,
) -> Result<()> {
    require(checkpoint, "checkpoint")?;
    require(scene, "scene")?;
    let model = load_checkpoint(checkpoint)?.model()?;
    let record = read_scene(scene)?;
    check_model_fits(&model.config, std::slice::from_ref(&record))?;
    if source >= model.config.sources {
        return Err(Error::InvalidInput(format!(
            "source {source} out of range (model has {})",
            model.config.sources
        )));
    }
    let fwd = fasnet_forward(&record.mixture, &model)?;
    let n_frames = fwd.grid.n_frames;
    if let Some(&t) = frames.iter().find(|&&t| t >= n_frames) {
        return Err(Error::InvalidInput(format!("frame {t} out of range (scene has {n_frames} frames)")));
    }
    let fs = record.mixture.sample_rate();
    let (freqs, doas) = (default_freq_grid(fs), default_doa_grid());
    create_dir(out)?;
    for &t in frames {
        let filters: Vec<Vec<f64>> = fwd.filters.iter().map(|per| per[source].row(t).to_vec()).collect();
        let bp = beampattern(&filters, model.config.frame_len, &record.manifest.array, fs, &freqs, &doas)?;
        let db = if raw { bp.raw_db() } else { bp.normalized_db(PATTERN_FLOOR_DB) };
        // raw rasters span 60 dB below their peak
        let floor = if raw {
            db.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - 60.0
        } else {
            PATTERN_FLOOR_DB
        };
        bp.write_csv(out.join(format!("frame_{t}.csv")), &db)?;
        write_pgm(out.join(format!("frame_{t}.pgm")), &db, floor)?;
    }
    eprintln!("wrote {} beampatterns to {}", frames.len(), out.display());
    Ok(())
}

fn run_gradcheck(cfg: &GradcheckRunConfig, corrupt: Option<String>, out: Option<&Path>) -> Result<()> {
    cfg.model.validate()?;
    let g = &cfg.gradcheck;
    let opts = GradcheckOptions {
        seed: g.seed,
        signal_len: g.signal_len,
        step: g.step,
        tolerance: g.tolerance,
        objective: g.objective,
        corrupt: corrupt.map(|p| (p, g.corrupt_offset)),
    };
    let report = gradcheck(&cfg.model, &opts)?;
    println!("{:<28} {:>7} {:>12} {:>12}  result", "group", "size", "rel_error", "max_abs");
    for e in &report.groups {
        println!(
            "{:<28} {:>7} {:>12.3e} {:>12.3e}  {}",
            e.name,
            e.size,
            e.rel_error,
            e.max_abs_error,
            if e.passed { "ok" } else { "FAIL" }
        );
    }
    println!("max relative error {:.3e} (tolerance {:.0e})", report.max_rel_error(), report.tolerance);
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<_> = report.groups.iter().filter(|g| !g.passed).map(|g| g.name.as_str()).collect();
        Err(Error::Numerical(format!("gradient check failed for {}", failed.join(", "))))
    }
}
