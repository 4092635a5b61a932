use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::FasnetConfig;
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// A named parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub value: Mat,
}

/// All learnable weights of both stages together with the architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct FasnetModel {
    pub config: FasnetConfig,
    pub params: Vec<Param>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Norm {
    pub gamma: usize,
    pub beta: usize,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct BlockLayout {
    pub conv_in: Linear,
    pub prelu1: usize,
    pub norm1: Norm,
    pub depthwise: Linear,
    pub dilation: usize,
    pub prelu2: usize,
    pub norm2: Norm,
    pub residual: Linear,
    pub skip: Linear,
}

#[derive(Clone, Debug)]
pub(crate) struct TcnLayout {
    pub in_norm: Norm,
    pub bottleneck: Linear,
    pub blocks: Vec<BlockLayout>,
    pub out_prelu: usize,
    pub out: Linear,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GateLayout {
    pub w: usize,
    pub b: usize,
    pub v: usize,
    pub q: usize,
}

/// Parameter indices, in creation order.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub embed: usize,
    pub tcn1: TcnLayout,
    pub gate1: GateLayout,
    pub tcn2: TcnLayout,
    pub gate2: GateLayout,
}

#[derive(Clone, Copy, Debug)]
enum Init {
    FanIn(usize),
    Zeros,
    Ones,
    Const(f64),
}

struct Spec {
    name: String,
    rows: usize,
    cols: usize,
    init: Init,
}

#[derive(Default)]
struct Builder {
    specs: Vec<Spec>,
}

const PRELU_INIT: f64 = 0.25;

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push(Spec {
            name,
            rows,
            cols,
            init,
        });
        self.specs.len() - 1
    }

    fn linear(&mut self, prefix: &str, fan_in: usize, fan_out: usize) -> Linear {
        Linear {
            w: self.add(format!("{prefix}.w"), fan_in, fan_out, Init::FanIn(fan_in)),
            b: self.add(format!("{prefix}.b"), 1, fan_out, Init::Zeros),
        }
    }

    fn norm(&mut self, prefix: &str, width: usize) -> Norm {
        Norm {
            gamma: self.add(format!("{prefix}.gamma"), 1, width, Init::Ones),
            beta: self.add(format!("{prefix}.beta"), 1, width, Init::Zeros),
        }
    }

    fn prelu(&mut self, name: String) -> usize {
        self.add(name, 1, 1, Init::Const(PRELU_INIT))
    }

    fn tcn(&mut self, prefix: &str, cfg: &FasnetConfig) -> TcnLayout {
        let (b, hc) = (cfg.bottleneck, cfg.hidden);
        let in_norm = self.norm(&format!("{prefix}.in_norm"), cfg.feature_dim());
        let bottleneck = self.linear(&format!("{prefix}.bottleneck"), cfg.feature_dim(), b);
        let mut blocks = Vec::new();
        for r in 0..cfg.repeats {
            for p in 0..cfg.blocks_per_repeat {
                let bp = format!("{prefix}.block{r}_{p}");
                blocks.push(BlockLayout {
                    conv_in: self.linear(&format!("{bp}.conv_in"), b, hc),
                    prelu1: self.prelu(format!("{bp}.prelu1.alpha")),
                    norm1: self.norm(&format!("{bp}.norm1"), hc),
                    depthwise: Linear {
                        w: self.add(format!("{bp}.depthwise.w"), hc, cfg.kernel, Init::FanIn(cfg.kernel)),
                        b: self.add(format!("{bp}.depthwise.b"), 1, hc, Init::Zeros),
                    },
                    dilation: 1 << p,
                    prelu2: self.prelu(format!("{bp}.prelu2.alpha")),
                    norm2: self.norm(&format!("{bp}.norm2"), hc),
                    residual: self.linear(&format!("{bp}.residual"), hc, b),
                    skip: self.linear(&format!("{bp}.skip"), hc, b),
                });
            }
        }
        TcnLayout {
            in_norm,
            bottleneck,
            blocks,
            out_prelu: self.prelu(format!("{prefix}.out_prelu.alpha")),
            out: self.linear(&format!("{prefix}.out"), b, cfg.embed_dim),
        }
    }

    fn gate(&mut self, prefix: &str, k: usize, width: usize) -> GateLayout {
        GateLayout {
            w: self.add(format!("{prefix}.W"), k, width, Init::FanIn(k)),
            b: self.add(format!("{prefix}.b"), 1, width, Init::Zeros),
            v: self.add(format!("{prefix}.V"), k, width, Init::FanIn(k)),
            q: self.add(format!("{prefix}.q"), 1, width, Init::Zeros),
        }
    }
}

fn build(cfg: &FasnetConfig) -> (Layout, Vec<Spec>) {
    let mut b = Builder::default();
    let embed = b.add("embed.U".into(), cfg.frame_len, cfg.embed_dim, Init::FanIn(cfg.frame_len));
    let tcn1 = b.tcn("tcn1", cfg);
    let gate1 = b.gate("gate1", cfg.embed_dim, cfg.sources * cfg.taps());
    let tcn2 = b.tcn("tcn2", cfg);
    let gate2 = b.gate("gate2", cfg.embed_dim, cfg.taps());
    (
        Layout {
            embed,
            tcn1,
            gate1,
            tcn2,
            gate2,
        },
        b.specs,
    )
}

impl Layout {
    pub(crate) fn new(cfg: &FasnetConfig) -> Self {
        build(cfg).0
    }
}

/// Deterministic initialization: weights uniform in `±1/sqrt(fan_in)`, zero biases,
/// unit norm gains and PReLU slopes of 0.25.
pub fn init_model(config: &FasnetConfig, seed: u64) -> Result<FasnetModel> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = build(config)
        .1
        .into_iter()
        .map(|s| {
            let n = s.rows * s.cols;
            let data = match s.init {
                Init::FanIn(fan_in) => {
                    let a = 1.0 / (fan_in as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-a..a)).collect()
                }
                Init::Zeros => vec![0.0; n],
                Init::Ones => vec![1.0; n],
                Init::Const(v) => vec![v; n],
            };
            Param {
                name: s.name,
                value: Mat::from_vec(s.rows, s.cols, data),
            }
        })
        .collect();
    Ok(FasnetModel {
        config: config.clone(),
        params,
    })
}

/// Exact number of scalar parameters.
pub fn count_params(model: &FasnetModel) -> usize {
    model.params.iter().map(|p| p.value.len()).sum()
}

impl FasnetModel {
    pub fn param(&self, name: &str) -> Option<&Mat> {
        self.params.iter().find(|p| p.name == name).map(|p| &p.value)
    }

    /// Parameter count of the tensors whose names start with `prefix`.
    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| p.value.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.is_finite())
    }

    /// Checks that names and shapes agree with the configured architecture.
    pub fn check_layout(&self) -> Result<()> {
        self.config.validate()?;
        let specs = build(&self.config).1;
        if specs.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "model has {} tensors, config expects {}",
                self.params.len(),
                specs.len()
            )));
        }
        for (s, p) in specs.iter().zip(&self.params) {
            if s.name != p.name || (s.rows, s.cols) != p.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter '{}' {:?} does not match expected '{}' {:?}",
                    p.name,
                    p.value.shape(),
                    s.name,
                    (s.rows, s.cols)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_model() {
        let c = FasnetConfig::tiny();
        assert_eq!(init_model(&c, 5).unwrap(), init_model(&c, 5).unwrap());
        assert_ne!(init_model(&c, 5).unwrap(), init_model(&c, 6).unwrap());
    }

    #[test]
    fn default_counts() {
        let m = init_model(&FasnetConfig::default(), 0).unwrap();
        assert_eq!(m.count_prefix("tcn1."), 686_807);
        assert_eq!(m.count_prefix("tcn2."), 686_807);
        assert_eq!(m.count_prefix("gate1."), 66_690);
        assert_eq!(count_params(&m), 1_523_378);
        m.check_layout().unwrap();
    }
}
