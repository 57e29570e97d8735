//! Multichannel WAV I/O. Writes 32-bit IEEE float; reads float or integer PCM.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};

pub fn write_f32(path: &Path, channels: &[Vec<f64>], sample_rate: u32) -> Result<()> {
    let n_ch = channels.len();
    if n_ch == 0 || n_ch > u16::MAX as usize {
        return Err(Error::InvalidConfig(format!("cannot write {n_ch} channels")));
    }
    let len = channels[0].len();
    if let Some(bad) = channels.iter().find(|c| c.len() != len) {
        return Err(Error::LengthMismatch {
            what: "channel lengths",
            left: len,
            right: bad.len(),
        });
    }
    let spec = WavSpec {
        channels: n_ch as u16,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec)?;
    for i in 0..len {
        for ch in channels {
            w.write_sample(ch[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

/// Returns `(channels, sample_rate)`.
pub fn read(path: &Path) -> Result<(Vec<Vec<f64>>, u32)> {
    let mut r = WavReader::open(path)?;
    let spec = r.spec();
    let n_ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let frames = interleaved.len() / n_ch.max(1);
    let mut channels = vec![Vec::with_capacity(frames); n_ch];
    for frame in interleaved.chunks_exact(n_ch) {
        for (c, v) in frame.iter().enumerate() {
            channels[c].push(*v);
        }
    }
    Ok((channels, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x = vec![vec![0.5, -0.25, 0.125], vec![1.0, 0.0, -1.0]];
        write_f32(&p, &x, 24_000).unwrap();
        let (y, sr) = read(&p).unwrap();
        assert_eq!(sr, 24_000);
        assert_eq!(y, x);
    }

    #[test]
    fn ragged_channels_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        assert!(write_f32(&p, &[vec![0.0; 3], vec![0.0; 2]], 24_000).is_err());
    }
}
