use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{best_permutation, shift_invariant_si_snr, si_snr, DEFAULT_MAX_SHIFT_MS};
use crate::scenesim::SceneRecord;

/// Identifies the system that produced a set of outputs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SystemInfo {
    pub method: String,
    pub n_mics: usize,
    pub causal: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScoreOptions {
    /// Score with the best integer shift within ±2 ms.
    pub shift_invariant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetric {
    pub scene_id: String,
    pub method: String,
    pub n_mics: usize,
    pub causal: bool,
    /// Output SI-SNR averaged over targets, in dB.
    pub si_snr: f64,
    /// Improvement over the unprocessed reference channel, in dB.
    pub si_snri: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetric {
    pub method: String,
    pub n_mics: usize,
    pub causal: bool,
    pub n_scenes: usize,
    pub mean_si_snr: f64,
    pub mean_si_snri: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenes: Vec<SceneMetric>,
    pub aggregates: Vec<AggregateMetric>,
}

fn score(est: &[f64], target: &[f64], fs: u32, opts: ScoreOptions) -> Result<f64> {
    if opts.shift_invariant {
        Ok(shift_invariant_si_snr(est, target, DEFAULT_MAX_SHIFT_MS, fs)?.0)
    } else {
        si_snr(est, target)
    }
}

/// Scores one scene. Outputs are matched to targets by the permutation with the best
/// mean SI-SNR.
pub fn score_scene(record: &SceneRecord, outputs: &[Vec<f64>], opts: ScoreOptions) -> Result<(f64, f64)> {
    let fs = record.mixture.sample_rate();
    let mix = record.mixture.channel(record.manifest.reference);
    if outputs.len() != record.targets.len() {
        return Err(Error::Shape(format!(
            "scene {}: {} outputs for {} targets",
            record.id(),
            outputs.len(),
            record.targets.len()
        )));
    }
    let mut table = Vec::with_capacity(outputs.len());
    for t in &record.targets {
        let mut row = Vec::with_capacity(outputs.len());
        for o in outputs {
            if o.len() != t.len() {
                return Err(Error::Shape(format!("scene {}: output length differs from target", record.id())));
            }
            row.push(-score(o, t, fs, opts)?);
        }
        table.push(row);
    }
    let (neg, _) = best_permutation(&table);
    let base = record
        .targets
        .iter()
        .map(|t| score(mix, t, fs, opts))
        .sum::<Result<f64>>()?
        / record.targets.len() as f64;
    Ok((-neg, -neg - base))
}

/// Per-scene and aggregate SI-SNRi for one system. `outputs[s]` holds the estimates
/// for scene `s`, one per target.
pub fn report_metrics(
    records: &[SceneRecord],
    outputs: &[Vec<Vec<f64>>],
    system: &SystemInfo,
    opts: ScoreOptions,
) -> Result<MetricsReport> {
    if records.len() != outputs.len() {
        return Err(Error::Shape(format!("{} scenes but {} outputs", records.len(), outputs.len())));
    }
    let mut report = MetricsReport::default();
    for (r, o) in records.iter().zip(outputs) {
        let (s, i) = score_scene(r, o, opts)?;
        report.scenes.push(SceneMetric {
            scene_id: r.id().to_string(),
            method: system.method.clone(),
            n_mics: system.n_mics,
            causal: system.causal,
            si_snr: s,
            si_snri: i,
        });
    }
    report.aggregate();
    Ok(report)
}

impl MetricsReport {
    /// Recomputes the per-system means.
    pub fn aggregate(&mut self) {
        let mut groups: BTreeMap<(String, usize, bool), Vec<&SceneMetric>> = BTreeMap::new();
        for s in &self.scenes {
            groups.entry((s.method.clone(), s.n_mics, s.causal)).or_default().push(s);
        }
        self.aggregates = groups
            .into_iter()
            .map(|((method, n_mics, causal), rows)| {
                let n = rows.len() as f64;
                AggregateMetric {
                    method,
                    n_mics,
                    causal,
                    n_scenes: rows.len(),
                    mean_si_snr: rows.iter().map(|r| r.si_snr).sum::<f64>() / n,
                    mean_si_snri: rows.iter().map(|r| r.si_snri).sum::<f64>() / n,
                }
            })
            .collect();
    }

    pub fn merge(&mut self, other: MetricsReport) {
        self.scenes.extend(other.scenes);
        self.aggregate();
    }

    pub fn mean_si_snri(&self, method: &str) -> Option<f64> {
        let rows: Vec<_> = self.scenes.iter().filter(|s| s.method == method).collect();
        (!rows.is_empty()).then(|| rows.iter().map(|r| r.si_snri).sum::<f64>() / rows.len() as f64)
    }

    /// Per-scene rows followed by aggregate rows (scene id `mean`).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene_id,method,n_mics,causal,n_scenes,si_snr,si_snri\n");
        for s in &self.scenes {
            out.push_str(&format!(
                "{},{},{},{},1,{},{}\n",
                s.scene_id, s.method, s.n_mics, s.causal, s.si_snr, s.si_snri
            ));
        }
        for a in &self.aggregates {
            out.push_str(&format!(
                "mean,{},{},{},{},{},{}\n",
                a.method, a.n_mics, a.causal, a.n_scenes, a.mean_si_snr, a.mean_si_snri
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}
