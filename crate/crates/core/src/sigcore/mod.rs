//! Signal plumbing shared by every other module: framing, filtering, overlap-add,
//! STFT and WAV I/O. All internal processing is `f64`.

mod filter;
mod framing;
mod signal;
pub mod stft;
mod wav;

pub use filter::{fft_convolve, valid_filter, valid_filter_fft};
pub(crate) use filter::valid_filter_into;
pub use framing::{frame_matrices, frame_signal, overlap_add, ContextFrame, FrameGrid};
pub use signal::MultichannelSignal;
pub use stft::{Spectrogram, Stft};
pub use wav::{read_wav, write_wav, write_wav_as, WavEncoding};

/// Signal energy `Σ x²`.
pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}
