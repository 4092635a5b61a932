use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::array::ArraySpec;
use super::pools::{synthetic_pools, SignalPool};
use super::rir::{direct_path_rir, image_method_rir, RirExtent, RoomSpec};
use crate::error::{Error, Result};
use crate::sigcore::{energy, fft_convolve, MultichannelSignal};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// One speaker plus one noise source; the target is the direct-path speaker.
    Ese,
    /// Two speakers plus one noise source; both direct-path speakers are targets.
    Ess,
}

impl Task {
    pub fn n_targets(self) -> usize {
        match self {
            Task::Ese => 1,
            Task::Ess => 2,
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ese" => Ok(Task::Ese),
            "ess" => Ok(Task::Ess),
            _ => Err(Error::Config(format!("unknown task '{s}'; expected ese or ess"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Speech,
    Noise,
}

/// Where source signals come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PoolSpec {
    /// Generated speech-like and colored-noise signals.
    Synthetic {
        seed: u64,
        n_speech: usize,
        n_noise: usize,
        secs: f64,
    },
    /// Directories of mono WAV files at the scene sample rate.
    Directory { speech: PathBuf, noise: PathBuf },
}

impl Default for PoolSpec {
    fn default() -> Self {
        PoolSpec::Synthetic {
            seed: 0,
            n_speech: 200,
            n_noise: 50,
            secs: 4.0,
        }
    }
}

impl PoolSpec {
    /// Speech and noise pools at `sample_rate`.
    pub fn load(&self, sample_rate: u32) -> Result<(SignalPool, SignalPool)> {
        match self {
            PoolSpec::Synthetic {
                seed,
                n_speech,
                n_noise,
                secs,
            } => {
                if *n_speech == 0 || *n_noise == 0 || !(*secs > 0.0) {
                    return Err(Error::Config("synthetic pools need signals of positive length".into()));
                }
                Ok(synthetic_pools(*seed, *n_speech, *n_noise, *secs, sample_rate))
            }
            PoolSpec::Directory { speech, noise } => {
                let s = SignalPool::from_wav_dir(speech)?;
                let n = SignalPool::from_wav_dir(noise)?;
                for (p, name) in [(&s, "speech"), (&n, "noise")] {
                    if p.sample_rate != sample_rate {
                        return Err(Error::Config(format!(
                            "{name} pool is at {} Hz but scenes are at {sample_rate} Hz",
                            p.sample_rate
                        )));
                    }
                }
                Ok((s, n))
            }
        }
    }
}

/// Scene sampling parameters. Ranges are inclusive `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub task: Task,
    pub sample_rate: u32,
    pub n_mics: usize,
    pub duration_secs: f64,
    /// Range of room length and width in m.
    pub room_size: [f64; 2],
    pub room_height: f64,
    pub t60: [f64; 2],
    pub wall_margin: f64,
    pub array_diameter: f64,
    pub array_height: f64,
    pub source_height: f64,
    /// Smallest horizontal distance between a source and the array center.
    pub min_source_distance: f64,
    /// Speaker-to-noise ratio (ESS: relative to the weaker speaker).
    pub snr_db: [f64; 2],
    /// ESS only: first speaker relative to the second.
    pub speaker_ratio_db: [f64; 2],
    pub reference: usize,
    pub max_attempts: usize,
    pub pool: PoolSpec,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            task: Task::Ese,
            sample_rate: 16000,
            n_mics: 4,
            duration_secs: 3.0,
            room_size: [3.0, 8.0],
            room_height: 3.0,
            t60: [0.2, 0.6],
            wall_margin: 0.5,
            array_diameter: 0.1,
            array_height: 1.0,
            source_height: 1.0,
            min_source_distance: 0.3,
            snr_db: [-5.0, 15.0],
            speaker_ratio_db: [-5.0, 5.0],
            reference: 0,
            max_attempts: 1000,
            pool: PoolSpec::default(),
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::Config(format!("{name} must be a finite range [lo, hi] with lo <= hi")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

impl SceneConfig {
    /// Small 2-microphone speech enhancement setup: 8 kHz, 1 s scenes.
    pub fn toy() -> Self {
        SceneConfig {
            sample_rate: 8000,
            n_mics: 2,
            duration_secs: 1.0,
            pool: PoolSpec::Synthetic {
                seed: 0,
                n_speech: 200,
                n_noise: 50,
                secs: 2.0,
            },
            ..SceneConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("room_size", self.room_size)?;
        check_range("t60", self.t60)?;
        check_range("snr_db", self.snr_db)?;
        check_range("speaker_ratio_db", self.speaker_ratio_db)?;
        if self.sample_rate == 0 {
            return Err(Error::Config("sample_rate must be positive".into()));
        }
        if self.n_mics == 0 {
            return Err(Error::Config("n_mics must be at least 1".into()));
        }
        if self.reference >= self.n_mics {
            return Err(Error::Config("reference must index a microphone".into()));
        }
        if !(self.duration_secs > 0.0) || self.n_samples() == 0 {
            return Err(Error::Config("duration_secs must be positive".into()));
        }
        if !(self.t60[0] > 0.0) {
            return Err(Error::Config("t60 must be positive".into()));
        }
        let free = self.room_size[0] - 2.0 * (self.wall_margin + self.array_diameter / 2.0);
        if !(self.wall_margin >= 0.0 && free > 0.0) {
            return Err(Error::Config("room_size too small for wall_margin and array".into()));
        }
        for (name, h) in [("array_height", self.array_height), ("source_height", self.source_height)] {
            if !(h > 0.0 && h < self.room_height) {
                return Err(Error::Config(format!("{name} must lie inside the room")));
            }
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        (self.duration_secs * self.sample_rate as f64).round() as usize
    }
}

/// One point source in a scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub position: [f64; 3],
    /// Gain applied to the pool excerpt, in dB.
    pub gain_db: f64,
    pub pool_index: usize,
    /// Start sample of the excerpt (wrapping around the pool signal).
    pub offset: usize,
}

impl SourceSpec {
    pub fn gain(&self) -> f64 {
        10f64.powf(self.gain_db / 20.0)
    }
}

/// A rendered scene with every intermediate signal kept in memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: String,
    pub seed: u64,
    pub config: SceneConfig,
    pub room: RoomSpec,
    pub array: ArraySpec,
    pub sources: Vec<SourceSpec>,
    /// Sampled speaker-to-noise ratio in dB.
    pub snr_db: f64,
    /// ESS speaker ratio in dB.
    pub speaker_ratio_db: Option<f64>,
    /// Unscaled pool excerpts, one per source.
    pub source_signals: Vec<Vec<f64>>,
    /// Full responses `[source][mic]`.
    pub rirs: Vec<Vec<Vec<f64>>>,
    /// Line-of-sight responses `[source][mic]`.
    pub direct_rirs: Vec<Vec<Vec<f64>>>,
    pub mixture: MultichannelSignal,
    /// Direct-path image of every target speaker at every microphone.
    pub direct_images: Vec<MultichannelSignal>,
    /// Direct-path targets at the reference microphone.
    pub targets: Vec<Vec<f64>>,
}

impl Scene {
    pub fn reference(&self) -> usize {
        self.config.reference
    }

    /// Source indices of the targets, in target order.
    pub fn target_sources(&self) -> Vec<usize> {
        target_sources(&self.sources)
    }
}

fn target_sources(sources: &[SourceSpec]) -> Vec<usize> {
    sources
        .iter()
        .enumerate()
        .filter(|(_, s)| s.kind == SourceKind::Speech)
        .map(|(i, _)| i)
        .collect()
}

fn truncated_convolution(x: &[f64], h: &[f64], len: usize) -> Vec<f64> {
    let mut y = fft_convolve(x, h);
    y.resize(len, 0.0);
    y
}

/// Direct-path responses of `source` to every microphone, `len` samples each.
pub fn direct_rirs_for(array: &ArraySpec, source: [f64; 3], sample_rate: u32, len: usize) -> Result<Vec<Vec<f64>>> {
    array
        .mic_positions()
        .into_iter()
        .map(|m| {
            let mut g = direct_path_rir(source, m, sample_rate, len)?;
            g.truncate(len);
            Ok(g)
        })
        .collect()
}

fn sample_geometry(cfg: &SceneConfig, rng: &mut ChaCha8Rng, n_sources: usize) -> Result<(RoomSpec, ArraySpec, Vec<[f64; 3]>)> {
    let length = uniform(rng, cfg.room_size);
    let width = uniform(rng, cfg.room_size);
    let t60 = uniform(rng, cfg.t60);
    let room = RoomSpec::new(length, width, cfg.room_height, t60)?;
    let r = cfg.array_diameter / 2.0;
    let m = cfg.wall_margin + r;
    let center = [uniform(rng, [m, length - m]), uniform(rng, [m, width - m])];
    let array = ArraySpec::circular(center, cfg.n_mics, cfg.array_diameter, cfg.array_height)?;
    let mut positions = Vec::with_capacity(n_sources);
    for _ in 0..n_sources {
        let mut placed = None;
        for _ in 0..cfg.max_attempts {
            let x = uniform(rng, [cfg.wall_margin, length - cfg.wall_margin]);
            let y = uniform(rng, [cfg.wall_margin, width - cfg.wall_margin]);
            let d = ((x - center[0]).powi(2) + (y - center[1]).powi(2)).sqrt();
            if d >= cfg.min_source_distance.max(r + 1e-3) {
                placed = Some([x, y, cfg.source_height]);
                break;
            }
        }
        positions.push(placed.ok_or_else(|| Error::InvalidInput(format!(
            "no valid source position after {} attempts",
            cfg.max_attempts
        )))?);
    }
    Ok((room, array, positions))
}

/// Samples and renders one scene. `(config, seed)` determines the result.
///
/// Source gains are set so that the relative levels hold between the direct-path
/// images at the reference microphone. The first speaker keeps unit gain.
pub fn sample_scene(cfg: &SceneConfig, seed: u64, speech: &SignalPool, noise: &SignalPool) -> Result<Scene> {
    let id = format!("seed-{seed}");
    let scene_err = |e: Error| match e {
        Error::Scene { .. } => e,
        other => Error::Scene {
            scene_id: id.clone(),
            reason: other.to_string(),
        },
    };
    cfg.validate()?;
    if speech.is_empty() || noise.is_empty() {
        return Err(Error::InvalidInput("speech and noise pools must be non-empty".into()));
    }
    for p in [speech, noise] {
        if p.sample_rate != cfg.sample_rate {
            return Err(Error::InvalidInput(format!(
                "pool sample rate {} differs from scene rate {}",
                p.sample_rate, cfg.sample_rate
            )));
        }
    }
    let fs = cfg.sample_rate;
    let n = cfg.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds: Vec<SourceKind> = match cfg.task {
        Task::Ese => vec![SourceKind::Speech, SourceKind::Noise],
        Task::Ess => vec![SourceKind::Speech, SourceKind::Speech, SourceKind::Noise],
    };
    let (room, array, positions) = sample_geometry(cfg, &mut rng, kinds.len()).map_err(scene_err)?;

    let mut picks: Vec<(usize, usize)> = Vec::new();
    let mut used_speech = Vec::new();
    for &k in &kinds {
        let pool = if k == SourceKind::Speech { speech } else { noise };
        let mut idx = rng.random_range(0..pool.len());
        if k == SourceKind::Speech && pool.len() > used_speech.len() {
            while used_speech.contains(&idx) {
                idx = rng.random_range(0..pool.len());
            }
            used_speech.push(idx);
        }
        let offset = rng.random_range(0..pool.signals[idx].len().max(1));
        picks.push((idx, offset));
    }
    let snr_db = uniform(&mut rng, cfg.snr_db);
    let speaker_ratio_db = (cfg.task == Task::Ess).then(|| uniform(&mut rng, cfg.speaker_ratio_db));

    let signals: Vec<Vec<f64>> = kinds
        .iter()
        .zip(&picks)
        .map(|(&k, &(idx, off))| {
            let pool = if k == SourceKind::Speech { speech } else { noise };
            pool.excerpt(idx, off, n)
        })
        .collect();

    let rir_len = ((room.t60 * fs as f64).ceil() as usize).max(1);
    let mics = array.mic_positions();
    let direct_rirs: Vec<Vec<Vec<f64>>> = positions
        .iter()
        .map(|&p| direct_rirs_for(&array, p, fs, rir_len))
        .collect::<Result<_>>()
        .map_err(scene_err)?;
    let r = cfg.reference;
    let ref_energy: Vec<f64> = signals
        .iter()
        .zip(&direct_rirs)
        .map(|(s, g)| energy(&truncated_convolution(s, &g[r], n)))
        .collect();
    if ref_energy.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::Scene {
            scene_id: id,
            reason: "silent source excerpt".into(),
        });
    }
    // gains as power ratios relative to the first speaker
    let mut power = vec![1.0; kinds.len()];
    let weak = match speaker_ratio_db {
        Some(ratio) => {
            power[1] = ref_energy[0] / ref_energy[1] * 10f64.powf(-ratio / 10.0);
            ref_energy[0].min(power[1] * ref_energy[1])
        }
        None => ref_energy[0],
    };
    let last = kinds.len() - 1;
    power[last] = weak / ref_energy[last] * 10f64.powf(-snr_db / 10.0);

    let sources: Vec<SourceSpec> = kinds
        .iter()
        .zip(&positions)
        .zip(&picks)
        .zip(&power)
        .map(|(((&kind, &position), &(pool_index, offset)), &p)| SourceSpec {
            kind,
            position,
            gain_db: 10.0 * p.log10(),
            pool_index,
            offset,
        })
        .collect();

    let mut rirs = Vec::with_capacity(sources.len());
    let mut mix = vec![vec![0.0; n]; mics.len()];
    for (s, sig) in sources.iter().zip(&signals) {
        let g = s.gain();
        let mut per_mic = Vec::with_capacity(mics.len());
        for (i, &m) in mics.iter().enumerate() {
            let h = image_method_rir(&room, s.position, m, fs, RirExtent::Samples(rir_len)).map_err(scene_err)?;
            for (o, v) in mix[i].iter_mut().zip(truncated_convolution(sig, &h, n)) {
                *o += g * v;
            }
            per_mic.push(h);
        }
        rirs.push(per_mic);
    }
    let mixture = MultichannelSignal::new(mix, fs).map_err(scene_err)?;

    let mut direct_images = Vec::new();
    let mut targets = Vec::new();
    for k in target_sources(&sources) {
        let g = sources[k].gain();
        let chans: Vec<Vec<f64>> = direct_rirs[k]
            .iter()
            .map(|h| truncated_convolution(&signals[k], h, n).into_iter().map(|v| g * v).collect())
            .collect();
        targets.push(chans[r].clone());
        direct_images.push(MultichannelSignal::new(chans, fs).map_err(scene_err)?);
    }

    Ok(Scene {
        id,
        seed,
        config: cfg.clone(),
        room,
        array,
        sources,
        snr_db,
        speaker_ratio_db,
        source_signals: signals,
        rirs,
        direct_rirs,
        mixture,
        direct_images,
        targets,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of scene `index` in a split derived from a master seed.
pub fn scene_seed(master: u64, split: &str, index: usize) -> u64 {
    let tag = split.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    splitmix64(splitmix64(master ^ tag).wrapping_add(index as u64))
}

/// Renders `count` scenes named `{split}-{index:05}`.
pub fn generate_split(cfg: &SceneConfig, master_seed: u64, split: &str, count: usize) -> Result<Vec<Scene>> {
    cfg.validate()?;
    let (speech, noise) = cfg.pool.load(cfg.sample_rate)?;
    (0..count)
        .map(|i| {
            let mut s = sample_scene(cfg, scene_seed(master_seed, split, i), &speech, &noise)?;
            s.id = format!("{split}-{i:05}");
            Ok(s)
        })
        .collect()
}
