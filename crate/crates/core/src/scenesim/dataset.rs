use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::array::ArraySpec;
use super::rir::RoomSpec;
use super::scene::{direct_rirs_for, sample_scene, Scene, SceneConfig, SourceKind, SourceSpec, Task};
use crate::error::{Error, Result};
use crate::sigcore::{read_wav, write_wav, MultichannelSignal};

pub const MANIFEST_VERSION: u32 = 1;

const ESE_NOTE: &str = "ese scenes contain one speaker and one noise source; ess scenes contain two speakers and one noise source";

/// Per-scene record written next to the audio stems.
///
/// - `sources`: geometry, pool excerpt and gain of every source; speakers come first
/// - `targets`: source index of each `target_c{k}.wav` (1-based `k`)
/// - `snr_db`: speaker-to-noise ratio on direct paths at `reference` (ESS: weaker speaker)
/// - `config` and `seed` re-render the scene exactly
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub scene_id: String,
    pub seed: u64,
    pub task: Task,
    pub sample_rate: u32,
    pub n_samples: usize,
    pub reference: usize,
    pub room: RoomSpec,
    pub array: ArraySpec,
    pub sources: Vec<SourceSpec>,
    pub targets: Vec<usize>,
    pub snr_db: f64,
    pub speaker_ratio_db: Option<f64>,
    pub rir_len: usize,
    pub note: String,
    pub config: SceneConfig,
}

impl Manifest {
    pub fn from_scene(scene: &Scene) -> Self {
        Manifest {
            version: MANIFEST_VERSION,
            scene_id: scene.id.clone(),
            seed: scene.seed,
            task: scene.config.task,
            sample_rate: scene.config.sample_rate,
            n_samples: scene.mixture.len(),
            reference: scene.reference(),
            room: scene.room.clone(),
            array: scene.array.clone(),
            sources: scene.sources.clone(),
            targets: scene.target_sources(),
            snr_db: scene.snr_db,
            speaker_ratio_db: scene.speaker_ratio_db,
            rir_len: scene.direct_rirs.first().and_then(|r| r.first()).map_or(0, |g| g.len()),
            note: ESE_NOTE.into(),
            config: scene.config.clone(),
        }
    }

    fn scene_error(&self, reason: impl Into<String>) -> Error {
        Error::Scene {
            scene_id: self.scene_id.clone(),
            reason: reason.into(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(self.scene_error(format!("unsupported manifest version {}", self.version)));
        }
        if self.reference >= self.array.n_mics {
            return Err(self.scene_error("reference microphone out of range"));
        }
        if self.targets.iter().any(|&k| k >= self.sources.len() || self.sources[k].kind != SourceKind::Speech) {
            return Err(self.scene_error("targets must index speech sources"));
        }
        Ok(())
    }

    /// Direct-path responses `[target][mic]` recomputed from the geometry.
    pub fn direct_rirs(&self) -> Result<Vec<Vec<Vec<f64>>>> {
        self.targets
            .iter()
            .map(|&k| direct_rirs_for(&self.array, self.sources[k].position, self.sample_rate, self.rir_len))
            .collect()
    }

    /// Re-renders the scene from its configuration and seed, checking that the geometry
    /// and gains match this manifest.
    pub fn render(&self) -> Result<Scene> {
        self.check()?;
        let (speech, noise) = self.config.pool.load(self.config.sample_rate)?;
        let mut scene = sample_scene(&self.config, self.seed, &speech, &noise).map_err(|e| self.scene_error(e.to_string()))?;
        scene.id = self.scene_id.clone();
        let again = Manifest::from_scene(&scene);
        if again != *self {
            return Err(self.scene_error("re-rendered scene does not match its manifest"));
        }
        Ok(scene)
    }
}

/// A scene loaded from disk. Samples went through float32.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneRecord {
    pub manifest: Manifest,
    pub mixture: MultichannelSignal,
    /// Direct-path targets at the reference microphone.
    pub targets: Vec<Vec<f64>>,
    /// Direct-path target images at every microphone.
    pub direct_images: Vec<MultichannelSignal>,
}

impl SceneRecord {
    pub fn id(&self) -> &str {
        &self.manifest.scene_id
    }
}

impl From<&Scene> for SceneRecord {
    fn from(s: &Scene) -> Self {
        SceneRecord {
            manifest: Manifest::from_scene(s),
            mixture: s.mixture.clone(),
            targets: s.targets.clone(),
            direct_images: s.direct_images.clone(),
        }
    }
}

/// Writes `<dir>/<scene_id>/{mixture.wav, target_c{k}.wav, direct_c{k}.wav, manifest.json}`
/// for every scene.
pub fn write_dataset(scenes: &[Scene], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for scene in scenes {
        write_scene(scene, dir)?;
    }
    Ok(())
}

pub fn write_scene(scene: &Scene, dir: &Path) -> Result<PathBuf> {
    let sdir = dir.join(&scene.id);
    fs::create_dir_all(&sdir).map_err(|e| Error::io(&sdir, e))?;
    write_wav(sdir.join("mixture.wav"), &scene.mixture)?;
    let fs_ = scene.config.sample_rate;
    for (k, (t, img)) in scene.targets.iter().zip(&scene.direct_images).enumerate() {
        write_wav(sdir.join(format!("target_c{}.wav", k + 1)), &MultichannelSignal::mono(t.clone(), fs_)?)?;
        write_wav(sdir.join(format!("direct_c{}.wav", k + 1)), img)?;
    }
    let path = sdir.join("manifest.json");
    let json = serde_json::to_string_pretty(&Manifest::from_scene(scene))?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(sdir)
}

/// Reads one scene directory; every failure names the scene.
pub fn read_scene(sdir: &Path) -> Result<SceneRecord> {
    let id = sdir.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let named = |reason: String| Error::Scene {
        scene_id: id.clone(),
        reason,
    };
    let path = sdir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| named(format!("cannot read manifest: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| named(format!("invalid manifest: {e}")))?;
    manifest.check()?;
    let mixture = read_wav(sdir.join("mixture.wav")).map_err(|e| named(e.to_string()))?;
    if mixture.n_channels() != manifest.array.n_mics || mixture.len() != manifest.n_samples {
        return Err(manifest.scene_error("mixture shape differs from manifest"));
    }
    let mut targets = Vec::new();
    let mut direct_images = Vec::new();
    for k in 1..=manifest.targets.len() {
        let t = read_wav(sdir.join(format!("target_c{k}.wav"))).map_err(|e| named(e.to_string()))?;
        let d = read_wav(sdir.join(format!("direct_c{k}.wav"))).map_err(|e| named(e.to_string()))?;
        if t.len() != mixture.len() || d.len() != mixture.len() || d.n_channels() != mixture.n_channels() {
            return Err(manifest.scene_error(format!("target {k} shape differs from the mixture")));
        }
        targets.push(t.channel(0).to_vec());
        direct_images.push(d);
    }
    Ok(SceneRecord {
        manifest,
        mixture,
        targets,
        direct_images,
    })
}

/// Reads every scene directory under `dir` in name order.
pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Vec<SceneRecord>> {
    let dir = dir.as_ref();
    let mut dirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join("manifest.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidInput(format!("no scenes found in {}", dir.display())));
    }
    dirs.iter().map(|d| read_scene(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenesim::{generate_split, PoolSpec};

    fn config() -> SceneConfig {
        SceneConfig {
            task: Task::Ess,
            sample_rate: 8000,
            n_mics: 3,
            duration_secs: 0.25,
            t60: [0.1, 0.15],
            pool: PoolSpec::Synthetic {
                seed: 2,
                n_speech: 3,
                n_noise: 2,
                secs: 0.5,
            },
            ..SceneConfig::default()
        }
    }

    fn f32_round(x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| v as f32 as f64).collect()
    }

    #[test]
    fn round_trip_and_rerender() {
        let scenes = generate_split(&config(), 11, "test", 2).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_dataset(&scenes, tmp.path()).unwrap();
        let recs = read_dataset(tmp.path()).unwrap();
        assert_eq!(recs.len(), 2);
        for (s, r) in scenes.iter().zip(&recs) {
            assert_eq!(r.manifest, Manifest::from_scene(s));
            for i in 0..3 {
                assert_eq!(r.mixture.channel(i), f32_round(s.mixture.channel(i)).as_slice());
            }
            assert_eq!(r.targets[1], f32_round(&s.targets[1]));
            let again = r.manifest.render().unwrap();
            assert_eq!(&again, s);
            let g = r.manifest.direct_rirs().unwrap();
            assert_eq!(g[0], s.direct_rirs[0]);
        }
    }

    #[test]
    fn corrupt_manifest_names_scene() {
        let scenes = generate_split(&config(), 1, "valid", 1).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        write_dataset(&scenes, tmp.path()).unwrap();
        let m = tmp.path().join("valid-00000/manifest.json");
        fs::write(&m, "{\"version\": 1, \"scene_id\": ").unwrap();
        let err = read_dataset(tmp.path()).unwrap_err();
        assert!(matches!(&err, Error::Scene { scene_id, .. } if scene_id == "valid-00000"), "{err}");
        assert!(err.is_validation());
    }
}
