//! Raw detector dump: little-endian f32 interleaved (i_v, i_h) plus a
//! `key = value` text sidecar.

use crate::error::{Error, Result};
use crate::series::RealSeriesPair;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSidecar {
    pub sample_rate: f64,
    pub length: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl WaveformSidecar {
    pub fn to_text(&self) -> String {
        format!(
            "sample_rate = {}\nlength = {}\nseed = {}\nconfig_hash = {}\n",
            self.sample_rate, self.length, self.seed, self.config_hash
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut sample_rate = None;
        let mut length = None;
        let mut seed = None;
        let mut hash = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            match k {
                "sample_rate" => {
                    let x: f64 = v
                        .parse()
                        .map_err(|_| err(format!("bad sample_rate `{v}`")))?;
                    if !(x > 0.0 && x.is_finite()) {
                        return Err(err(format!("sample_rate must be positive, got {x}")));
                    }
                    sample_rate = Some(x);
                }
                "length" => length = Some(v.parse().map_err(|_| err(format!("bad length `{v}`")))?),
                "seed" => seed = Some(v.parse().map_err(|_| err(format!("bad seed `{v}`")))?),
                "config_hash" => {
                    if v.is_empty() || !v.chars().all(|c| c.is_ascii_hexdigit()) {
                        return Err(err(format!("config_hash must be hex, got `{v}`")));
                    }
                    hash = Some(v.to_string());
                }
                _ => return Err(err(format!("unknown key `{k}`"))),
            }
        }
        let last = text.lines().count().max(1);
        let missing = |k: &str| Error::Parse {
            line: last,
            msg: format!("missing key `{k}`"),
        };
        Ok(WaveformSidecar {
            sample_rate: sample_rate.ok_or_else(|| missing("sample_rate"))?,
            length: length.ok_or_else(|| missing("length"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            config_hash: hash.ok_or_else(|| missing("config_hash"))?,
        })
    }
}

fn with_ext(base: &Path, ext: &str) -> PathBuf {
    let mut s = base.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Encodes samples as interleaved little-endian f32.
pub fn encode_samples(pair: &RealSeriesPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(pair.len() * 8);
    for (a, b) in pair.i_v.iter().zip(&pair.i_h) {
        out.extend_from_slice(&(*a as f32).to_le_bytes());
        out.extend_from_slice(&(*b as f32).to_le_bytes());
    }
    out
}

pub fn decode_samples(bytes: &[u8], sidecar: &WaveformSidecar) -> Result<RealSeriesPair> {
    if !bytes.len().is_multiple_of(8) || bytes.len() / 8 != sidecar.length {
        return Err(Error::Parse {
            line: 0,
            msg: format!(
                "sample payload has {} bytes, sidecar declares {} pairs",
                bytes.len(),
                sidecar.length
            ),
        });
    }
    let mut i_v = Vec::with_capacity(sidecar.length);
    let mut i_h = Vec::with_capacity(sidecar.length);
    for c in bytes.chunks_exact(8) {
        i_v.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64);
        i_h.push(f32::from_le_bytes([c[4], c[5], c[6], c[7]]) as f64);
    }
    RealSeriesPair::new(i_v, i_h, sidecar.sample_rate)
}

/// Writes `<base>.f32` and `<base>.txt`.
pub fn write_waveform(
    base: &Path,
    pair: &RealSeriesPair,
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    let side = WaveformSidecar {
        sample_rate: pair.sample_rate,
        length: pair.len(),
        seed,
        config_hash: config_hash.to_string(),
    };
    fs::write(with_ext(base, ".f32"), encode_samples(pair))?;
    fs::write(with_ext(base, ".txt"), side.to_text())?;
    Ok(())
}

pub fn read_waveform(base: &Path) -> Result<(RealSeriesPair, WaveformSidecar)> {
    let side = WaveformSidecar::parse(&fs::read_to_string(with_ext(base, ".txt"))?)?;
    let bytes = fs::read(with_ext(base, ".f32"))?;
    Ok((decode_samples(&bytes, &side)?, side))
}
