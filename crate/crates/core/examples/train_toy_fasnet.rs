//! Trains a reduced two-channel FaSNet with 4 ms frames on toy echoic enhancement
//! scenes and reports held-out SI-SNRi before and after training.
//!
//! cargo run --release --example train_toy_fasnet [steps] [n_train]

use fasbeam::neural::{fasnet_forward, init_model, Example, FasnetConfig, FasnetModel, OptimizerKind, TrainConfig, Trainer};
use fasbeam::objectives::si_snr_improvement;
use fasbeam::scenesim::{generate_split, Scene, SceneConfig};

fn examples(scenes: &[Scene]) -> Vec<Example> {
    scenes
        .iter()
        .map(|s| Example {
            mixture: s.mixture.clone(),
            targets: s.targets.clone(),
        })
        .collect()
}

fn mean_si_snri(model: &FasnetModel, data: &[Example]) -> fasbeam::Result<f64> {
    let mut total = 0.0;
    for ex in data {
        let y = fasnet_forward(&ex.mixture, model)?.signals;
        total += si_snr_improvement(&y[0], &ex.targets[0], ex.mixture.channel(0))?;
    }
    Ok(total / data.len() as f64)
}

fn main() -> fasbeam::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let steps = args.next().flatten().unwrap_or(300);
    let n_train = args.next().flatten().unwrap_or(100);

    let scene_cfg = SceneConfig::toy();
    let train = examples(&generate_split(&scene_cfg, 0, "train", n_train)?);
    let test = examples(&generate_split(&scene_cfg, 0, "test", 10)?);

    let model_cfg = FasnetConfig::toy(scene_cfg.sample_rate, 4.0);
    let train_cfg = TrainConfig {
        steps,
        learning_rate: 1e-3,
        optimizer: OptimizerKind::Adam,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let mut trainer = Trainer::new(init_model(&model_cfg, 0)?, train_cfg)?;
    println!("held-out SI-SNRi before training: {:.2} dB", mean_si_snri(&trainer.model, &test)?);
    let every = (steps / 10).max(1);
    trainer.run(&train, None, |r| {
        if (r.step + 1) % every == 0 {
            println!("step {:>5}  loss {:>8.3}", r.step + 1, r.loss);
        }
    })?;
    println!("held-out SI-SNRi after {steps} steps: {:.2} dB", mean_si_snri(&trainer.model, &test)?);
    Ok(())
}
