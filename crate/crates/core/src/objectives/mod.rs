//! Training losses and evaluation metrics.

mod mel;
mod pit;
mod si_snr;
mod sit;

pub use mel::{mel_si_mse, mel_si_mse_with_grad, MelBank, StftConfig};
pub use pit::{best_permutation, neg_si_snr, pairwise_losses, upit_loss, MAX_PIT_SOURCES};
pub use si_snr::{si_snr, si_snr_improvement, si_snr_with_grad, SI_SNR_CAP_DB};
pub use sit::{shift_invariant_si_snr, DEFAULT_MAX_SHIFT_MS};

use serde::{Deserialize, Serialize};

/// Training objective selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    SiSnr,
    MelSiMse,
}

impl std::str::FromStr for Objective {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "si-snr" => Ok(Objective::SiSnr),
            "mel-si-mse" => Ok(Objective::MelSiMse),
            other => Err(crate::Error::Config(format!(
                "unknown objective '{other}' (expected si-snr or mel-si-mse)"
            ))),
        }
    }
}
