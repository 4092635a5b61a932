use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
use super::fasnet::fasnet_graph;
use super::model::FasnetModel;
use crate::error::{Error, Result};
use crate::objectives::{
    best_permutation, mel_si_mse_with_grad, si_snr_with_grad, MelBank, Objective, StftConfig,
};
use crate::sigcore::MultichannelSignal;
use crate::tensor::Mat;

/// One training or evaluation example: an `N`-channel mixture and `C` reference-channel
/// targets.
#[derive(Clone, Debug)]
pub struct Example {
    pub mixture: MultichannelSignal,
    pub targets: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Momentum,
    Adam,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Momentum coefficient (momentum optimizer) or first-moment decay (Adam).
    pub momentum: f64,
    /// Second-moment decay (Adam only).
    pub beta2: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub objective: Objective,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            learning_rate: 1e-3,
            momentum: 0.9,
            beta2: 0.999,
            clip_norm: 5.0,
            batch_size: 1,
            objective: Objective::SiSnr,
            optimizer: OptimizerKind::Momentum,
            seed: 0,
            checkpoint_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.beta2) {
            return fail("momentum and beta2 must be in [0, 1)");
        }
        if !(self.clip_norm > 0.0) {
            return fail("clip_norm must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        Ok(())
    }
}

/// Per-parameter optimizer buffers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    /// Velocity (momentum) or first moment (Adam).
    pub first: Vec<Mat>,
    /// Second moment (Adam); empty for momentum.
    pub second: Vec<Mat>,
}

/// One line of the loss trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub loss: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

/// uPIT loss over `C` estimates and the gradient with respect to each estimate.
/// Returns `(loss, grads, perm)` where `perm[c]` is the estimate assigned to target `c`.
pub fn pit_objective(
    estimates: &[Vec<f64>],
    targets: &[Vec<f64>],
    objective: Objective,
    sample_rate: u32,
) -> Result<(f64, Vec<Vec<f64>>, Vec<usize>)> {
    let c = targets.len();
    if estimates.len() != c || c == 0 {
        return Err(Error::Shape(format!(
            "{} estimates for {c} targets",
            estimates.len()
        )));
    }
    let mel = match objective {
        Objective::MelSiMse => {
            let cfg = StftConfig::for_rate(sample_rate);
            let bank = MelBank::default_for(&cfg, sample_rate)?;
            Some((cfg, bank))
        }
        Objective::SiSnr => None,
    };
    let pair = |e: &[f64], t: &[f64], grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
        match &mel {
            None => {
                let (v, g) = si_snr_with_grad(e, t, grad)?;
                Ok((-v, g.map(|g| g.into_iter().map(|x| -x).collect())))
            }
            Some((cfg, bank)) => mel_si_mse_with_grad(e, t, cfg, bank, grad),
        }
    };
    let mut losses = vec![vec![0.0; c]; c];
    for (ti, t) in targets.iter().enumerate() {
        for (ei, e) in estimates.iter().enumerate() {
            losses[ti][ei] = pair(e, t, false)?.0;
        }
    }
    let (loss, perm) = best_permutation(&losses);
    let mut grads = vec![Vec::new(); c];
    for (ti, &ei) in perm.iter().enumerate() {
        let g = pair(&estimates[ei], &targets[ti], true)?.1.expect("gradient requested");
        grads[ei] = g.into_iter().map(|v| v / c as f64).collect();
    }
    Ok((loss, grads, perm))
}

/// Objective value and parameter gradients for one example.
pub fn example_loss_and_grad(
    model: &FasnetModel,
    example: &Example,
    objective: Objective,
) -> Result<(f64, Vec<Mat>)> {
    let pass = fasnet_graph(&example.mixture, model)?;
    let est = pass.signals();
    let (loss, grads, _) = pit_objective(&est, &example.targets, objective, example.mixture.sample_rate())?;
    Ok((loss, pass.backward(model, &grads)?))
}

/// Momentum SGD (or Adam) over a fixed example set with per-step deterministic
/// sampling.
pub struct Trainer {
    pub model: FasnetModel,
    pub config: TrainConfig,
    /// Number of completed steps.
    pub step: usize,
    state: OptimizerState,
}

impl Trainer {
    pub fn new(model: FasnetModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        model.check_layout()?;
        let zeros = |m: &FasnetModel| -> Vec<Mat> {
            m.params
                .iter()
                .map(|p| Mat::zeros(p.value.rows, p.value.cols))
                .collect()
        };
        let second = match config.optimizer {
            OptimizerKind::Adam => zeros(&model),
            OptimizerKind::Momentum => Vec::new(),
        };
        let state = OptimizerState {
            first: zeros(&model),
            second,
        };
        Ok(Trainer {
            model,
            config,
            step: 0,
            state,
        })
    }

    /// Restores model, optimizer and step counter. Training settings come from the
    /// checkpoint unless `config` overrides them.
    pub fn from_checkpoint(ckpt: &Checkpoint, config: Option<TrainConfig>) -> Result<Self> {
        let model = ckpt.model()?;
        let config = match (config, &ckpt.train) {
            (Some(c), _) => c,
            (None, Some(c)) => c.clone(),
            (None, None) => {
                return Err(Error::Config(
                    "checkpoint has no training settings; pass them explicitly".into(),
                ))
            }
        };
        let mut t = Trainer::new(model, config)?;
        if let Some(state) = &ckpt.optimizer {
            let ok = |v: &Vec<Mat>| {
                v.len() == t.model.params.len()
                    && v.iter().zip(&t.model.params).all(|(m, p)| m.shape() == p.value.shape())
            };
            let second_ok = match t.config.optimizer {
                OptimizerKind::Adam => ok(&state.second),
                OptimizerKind::Momentum => state.second.is_empty(),
            };
            if !ok(&state.first) || !second_ok {
                return Err(Error::Config(
                    "optimizer state does not match model or optimizer kind".into(),
                ));
            }
            t.state = state.clone();
        }
        t.step = ckpt.step;
        Ok(t)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config: self.model.config.clone(),
            step: self.step,
            params: self.model.params.clone(),
            train: Some(self.config.clone()),
            optimizer: Some(self.state.clone()),
        }
    }

    /// Example indices used by step `step`; depends only on the seed and the step.
    pub fn batch_indices(&self, step: usize, n_examples: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(step as u64);
        (0..self.config.batch_size)
            .map(|_| rng.random_range(0..n_examples))
            .collect()
    }

    /// Batch-mean loss and gradients at the current parameters.
    pub fn loss_and_grad(&self, data: &[Example], indices: &[usize]) -> Result<(f64, Vec<Mat>)> {
        let mut total = 0.0;
        let mut acc: Option<Vec<Mat>> = None;
        for &i in indices {
            let (loss, grads) = example_loss_and_grad(&self.model, &data[i], self.config.objective)?;
            total += loss;
            match &mut acc {
                None => acc = Some(grads),
                Some(a) => {
                    for (x, g) in a.iter_mut().zip(&grads) {
                        x.data.iter_mut().zip(&g.data).for_each(|(x, g)| *x += g);
                    }
                }
            }
        }
        let k = indices.len() as f64;
        let mut grads = acc.ok_or_else(|| Error::InvalidInput("empty batch".into()))?;
        grads
            .iter_mut()
            .for_each(|g| g.data.iter_mut().for_each(|v| *v /= k));
        Ok((total / k, grads))
    }

    /// Runs one optimizer step. On a non-finite loss or gradient the parameters are left
    /// untouched and [`Error::Diverged`] is returned.
    pub fn train_step(&mut self, data: &[Example]) -> Result<StepRecord> {
        if data.is_empty() {
            return Err(Error::InvalidInput("training set is empty".into()));
        }
        let step = self.step;
        let indices = self.batch_indices(step, data.len());
        let (loss, grads) = self.loss_and_grad(data, &indices)?;
        let grad_norm = grads
            .iter()
            .map(|g| g.data.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(Error::Diverged {
                step,
                reason: format!("loss {loss}, gradient norm {grad_norm}"),
            });
        }
        let clip = if grad_norm > self.config.clip_norm {
            self.config.clip_norm / grad_norm
        } else {
            1.0
        };
        self.apply(&grads, clip);
        if !self.model.is_finite() {
            return Err(Error::Diverged {
                step,
                reason: "parameters became non-finite".into(),
            });
        }
        self.step += 1;
        Ok(StepRecord {
            step,
            loss,
            grad_norm,
        })
    }

    fn apply(&mut self, grads: &[Mat], clip: f64) {
        let lr = self.config.learning_rate;
        let beta1 = self.config.momentum;
        match self.config.optimizer {
            OptimizerKind::Momentum => {
                for ((p, v), g) in self.model.params.iter_mut().zip(&mut self.state.first).zip(grads) {
                    for ((w, v), g) in p.value.data.iter_mut().zip(&mut v.data).zip(&g.data) {
                        *v = beta1 * *v + g * clip;
                        *w -= lr * *v;
                    }
                }
            }
            OptimizerKind::Adam => {
                let beta2 = self.config.beta2;
                let t = (self.step + 1) as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                let eps = 1e-8;
                for (((p, m), v), g) in self
                    .model
                    .params
                    .iter_mut()
                    .zip(&mut self.state.first)
                    .zip(&mut self.state.second)
                    .zip(grads)
                {
                    for (((w, m), v), g) in p
                        .value
                        .data
                        .iter_mut()
                        .zip(&mut m.data)
                        .zip(&mut v.data)
                        .zip(&g.data)
                    {
                        let g = g * clip;
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
        }
    }

    /// Trains until `config.steps` steps are complete. With an output directory, the
    /// trace is appended to `trace.csv` and checkpoints go to `step_{n}.json` and
    /// `latest.json`; on divergence the last good state is saved as `last_good.json`.
    pub fn run(
        &mut self,
        data: &[Example],
        out_dir: Option<&Path>,
        mut on_step: impl FnMut(&StepRecord),
    ) -> Result<Vec<StepRecord>> {
        let mut trace_file = match out_dir {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join("trace.csv");
                let fresh = self.step == 0 || !path.exists();
                let mut f = OpenOptions::new()
                    .create(true)
                    .write(true)
                    .append(!fresh)
                    .truncate(fresh)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                if fresh {
                    writeln!(f, "step,loss,grad_norm").map_err(|e| Error::io(&path, e))?;
                }
                Some((f, path))
            }
            None => None,
        };
        let mut records = Vec::new();
        while self.step < self.config.steps {
            let rec = match self.train_step(data) {
                Ok(r) => r,
                Err(e) => {
                    if let (Some(dir), Error::Diverged { .. }) = (out_dir, &e) {
                        save_checkpoint(dir.join("last_good.json"), &self.checkpoint())?;
                    }
                    return Err(e);
                }
            };
            if let Some((f, path)) = &mut trace_file {
                writeln!(f, "{},{:.17e},{:.17e}", rec.step, rec.loss, rec.grad_norm)
                    .map_err(|e| Error::io(path.as_path(), e))?;
            }
            on_step(&rec);
            records.push(rec);
            if let Some(dir) = out_dir {
                let every = self.config.checkpoint_every;
                if (every > 0 && self.step % every == 0) || self.step == self.config.steps {
                    let ck = self.checkpoint();
                    save_checkpoint(step_path(dir, self.step), &ck)?;
                    save_checkpoint(dir.join("latest.json"), &ck)?;
                }
            }
        }
        Ok(records)
    }
}

fn step_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("step_{step}.json"))
}

/// Reads a trace written by [`Trainer::run`].
pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<StepRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize| Error::InvalidInput(format!("{}: bad trace line {line}", path.display()));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad(i + 1));
        }
        out.push(StepRecord {
            step: f[0].parse().map_err(|_| bad(i + 1))?,
            loss: f[1].parse().map_err(|_| bad(i + 1))?,
            grad_norm: f[2].parse().map_err(|_| bad(i + 1))?,
        });
    }
    Ok(out)
}
