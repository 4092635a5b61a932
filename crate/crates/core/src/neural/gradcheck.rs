use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::FasnetConfig;
use super::model::{init_model, FasnetModel};
use super::train::{example_loss_and_grad, pit_objective, Example};
use crate::error::Result;
use crate::objectives::Objective;
use crate::sigcore::MultichannelSignal;
use crate::tensor::Mat;

/// Settings for [`gradcheck`].
#[derive(Clone, Debug)]
pub struct GradcheckOptions {
    pub seed: u64,
    pub signal_len: usize,
    /// Central-difference step.
    pub step: f64,
    pub tolerance: f64,
    pub objective: Objective,
    /// Test hook: adds this offset to the analytic gradient of every tensor whose name
    /// starts with the given prefix.
    pub corrupt: Option<(String, f64)>,
}

impl Default for GradcheckOptions {
    fn default() -> Self {
        GradcheckOptions {
            seed: 0,
            signal_len: 64,
            step: 1e-5,
            tolerance: 1e-4,
            objective: Objective::SiSnr,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupError {
    pub name: String,
    pub size: usize,
    /// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`, 0 when both vanish.
    pub rel_error: f64,
    pub max_abs_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub loss: f64,
    pub tolerance: f64,
    pub groups: Vec<GroupError>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().fold(0.0, |m, g| m.max(g.rel_error))
    }
}

/// Random observation for gradient checks: a shared source with a per-channel delay
/// plus independent noise.
pub fn random_example(config: &FasnetConfig, len: usize, seed: u64) -> Result<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources: Vec<Vec<f64>> = (0..config.sources)
        .map(|_| (0..len + 8).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let chans = (0..config.channels)
        .map(|i| {
            (0..len)
                .map(|n| {
                    let s: f64 = sources.iter().enumerate().map(|(c, s)| s[n + (i + c) % 8]).sum();
                    s + 0.3 * rng.random_range(-1.0..1.0)
                })
                .collect()
        })
        .collect();
    let targets = sources.iter().map(|s| s[..len].to_vec()).collect();
    Ok(Example {
        mixture: MultichannelSignal::new(chans, 8000)?,
        targets,
    })
}

fn loss_only(model: &FasnetModel, ex: &Example, objective: Objective) -> Result<f64> {
    let out = super::fasnet::fasnet_forward(&ex.mixture, model)?;
    Ok(pit_objective(&out.signals, &ex.targets, objective, ex.mixture.sample_rate())?.0)
}

/// Compares analytic parameter gradients of the training loss with central finite
/// differences, tensor by tensor, for every scalar parameter.
pub fn gradcheck(config: &FasnetConfig, opts: &GradcheckOptions) -> Result<GradcheckReport> {
    let model = init_model(config, opts.seed)?;
    let ex = random_example(config, opts.signal_len, opts.seed.wrapping_add(1))?;
    let (loss, mut grads) = example_loss_and_grad(&model, &ex, opts.objective)?;
    if let Some((prefix, offset)) = &opts.corrupt {
        for (g, p) in grads.iter_mut().zip(&model.params) {
            if p.name.starts_with(prefix.as_str()) {
                g.data.iter_mut().for_each(|v| *v += offset);
            }
        }
    }
    let mut groups = Vec::with_capacity(model.params.len());
    let mut probe = model.clone();
    for (pi, p) in model.params.iter().enumerate() {
        let mut numeric = Mat::zeros(p.value.rows, p.value.cols);
        for i in 0..p.value.len() {
            let orig = p.value.data[i];
            probe.params[pi].value.data[i] = orig + opts.step;
            let lp = loss_only(&probe, &ex, opts.objective)?;
            probe.params[pi].value.data[i] = orig - opts.step;
            let lm = loss_only(&probe, &ex, opts.objective)?;
            probe.params[pi].value.data[i] = orig;
            numeric.data[i] = (lp - lm) / (2.0 * opts.step);
        }
        let ana = &grads[pi];
        let diff: f64 = ana
            .data
            .iter()
            .zip(&numeric.data)
            .map(|(a, n)| (a - n).powi(2))
            .sum::<f64>()
            .sqrt();
        let max_abs_error = ana
            .data
            .iter()
            .zip(&numeric.data)
            .fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
        let scale = ana.norm().max(numeric.norm());
        let rel_error = if scale > 0.0 { diff / scale } else { 0.0 };
        groups.push(GroupError {
            name: p.name.clone(),
            size: p.value.len(),
            rel_error,
            max_abs_error,
            passed: rel_error < opts.tolerance,
        });
    }
    Ok(GradcheckReport {
        loss,
        tolerance: opts.tolerance,
        groups,
    })
}
