//! RIFF/WAVE reading and writing for PCM16 and IEEE float32, interleaved channels.

use std::fs;
use std::path::Path;

use super::MultichannelSignal;
use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedWav {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<MultichannelSignal> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_wav(&bytes).map_err(|reason| match reason {
        DecodeError::Unsupported(s) => Error::UnsupportedWav(s),
        DecodeError::Malformed(s) => malformed(path, s),
    })
}

enum DecodeError {
    Unsupported(String),
    Malformed(String),
}

fn decode_wav(bytes: &[u8]) -> std::result::Result<MultichannelSignal, DecodeError> {
    use DecodeError::*;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Malformed("missing RIFF/WAVE header".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Malformed("chunk size overflow".into()))?;
        if body_end > bytes.len() {
            return Err(Malformed(format!(
                "chunk '{}' truncated",
                String::from_utf8_lossy(id)
            )));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Malformed("fmt chunk too short".into()));
                }
                let mut tag = u16_at(body, 0);
                let channels = u16_at(body, 2);
                let rate = u32_at(body, 4);
                let bits = u16_at(body, 14);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(Malformed("extensible fmt chunk too short".into()));
                    }
                    tag = u16_at(body, 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| Malformed("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Malformed("no data chunk".into()))?;
    if channels == 0 {
        return Err(Malformed("zero channels".into()));
    }
    let n_ch = channels as usize;
    let width = match (tag, bits) {
        (FORMAT_PCM, 16) => 2,
        (FORMAT_FLOAT, 32) => 4,
        _ => {
            return Err(Unsupported(format!(
                "format tag {tag} with {bits} bits per sample"
            )))
        }
    };
    let frame_bytes = width * n_ch;
    if data.len() % frame_bytes != 0 {
        return Err(Malformed("data chunk is not a whole number of frames".into()));
    }
    let n = data.len() / frame_bytes;
    let mut out = vec![Vec::with_capacity(n); n_ch];
    for f in 0..n {
        for (c, ch) in out.iter_mut().enumerate() {
            let i = f * frame_bytes + c * width;
            let v = if width == 2 {
                i16::from_le_bytes([data[i], data[i + 1]]) as f64 / 32768.0
            } else {
                f32::from_le_bytes([data[i], data[i + 1], data[i + 2], data[i + 3]]) as f64
            };
            ch.push(v);
        }
    }
    MultichannelSignal::new(out, rate).map_err(|e| Malformed(e.to_string()))
}

/// Writes IEEE float32 samples.
pub fn write_wav(path: impl AsRef<Path>, x: &MultichannelSignal) -> Result<()> {
    write_wav_as(path, x, WavEncoding::Float32)
}

pub fn write_wav_as(
    path: impl AsRef<Path>,
    x: &MultichannelSignal,
    encoding: WavEncoding,
) -> Result<()> {
    let path = path.as_ref();
    let n_ch = x.n_channels();
    if n_ch > u16::MAX as usize {
        return Err(Error::InvalidInput("too many channels for wav".into()));
    }
    let (tag, width) = match encoding {
        WavEncoding::Pcm16 => (FORMAT_PCM, 2usize),
        WavEncoding::Float32 => (FORMAT_FLOAT, 4usize),
    };
    let data_len = x.len() * n_ch * width;
    let mut buf = Vec::with_capacity(44 + data_len);
    buf.extend_from_slice(b"RIFF");
    buf.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    buf.extend_from_slice(b"WAVE");
    buf.extend_from_slice(b"fmt ");
    buf.extend_from_slice(&16u32.to_le_bytes());
    buf.extend_from_slice(&tag.to_le_bytes());
    buf.extend_from_slice(&(n_ch as u16).to_le_bytes());
    buf.extend_from_slice(&x.sample_rate().to_le_bytes());
    buf.extend_from_slice(&(x.sample_rate() * (n_ch * width) as u32).to_le_bytes());
    buf.extend_from_slice(&((n_ch * width) as u16).to_le_bytes());
    buf.extend_from_slice(&((width * 8) as u16).to_le_bytes());
    buf.extend_from_slice(b"data");
    buf.extend_from_slice(&(data_len as u32).to_le_bytes());
    for n in 0..x.len() {
        for c in 0..n_ch {
            let v = x.channel(c)[n];
            match encoding {
                WavEncoding::Float32 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
                WavEncoding::Pcm16 => {
                    let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                    buf.extend_from_slice(&q.to_le_bytes());
                }
            }
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
