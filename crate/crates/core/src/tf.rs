//! STFT analysis/synthesis and real/imaginary feature packing.
//!
//! Frames are centered: frame `t` covers samples `[t·hop − N/2, t·hop + N/2)`
//! with zeros outside the signal, giving `1 + len/hop` frames. Synthesis is
//! weighted overlap-add divided by the summed squared window.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub fft_size: usize,
    pub hop: usize,
    pub sample_rate: u32,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            fft_size: 1024,
            hop: 512,
            sample_rate: 24_000,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_size < 2 || self.fft_size % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "fft_size must be even and >= 2, got {}",
                self.fft_size
            )));
        }
        if self.hop == 0 || self.hop > self.fft_size {
            return Err(Error::InvalidConfig(format!(
                "hop must be in 1..={}, got {}",
                self.fft_size, self.hop
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample_rate must be positive".into()));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frames_for(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.bins()).map(|k| self.bin_frequency(k)).collect()
    }

    /// Analysis window (periodic Hann).
    pub fn window(&self) -> Vec<f64> {
        hann(self.fft_size)
    }

    /// Checks that overlap-added squared windows never vanish, which the
    /// weighted overlap-add synthesis divides by.
    pub fn check_overlap_add(&self) -> Result<()> {
        self.validate()?;
        let w = self.window();
        let peak = w.iter().map(|v| v * v).fold(0.0, f64::max);
        for n in 0..self.hop {
            let env: f64 = w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum();
            if env <= 1e-10 * peak {
                return Err(Error::NotOverlapAddable {
                    fft_size: self.fft_size,
                    hop: self.hop,
                });
            }
        }
        Ok(())
    }
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 - 0.5 * (2.0 * PI * j as f64 / n as f64).cos())
        .collect()
}

/// Complex time-frequency block, `frames × bins × channels`, stored t-major,
/// then f, then c.
#[derive(Debug, Clone, PartialEq)]
pub struct StftTensor {
    frames: usize,
    bins: usize,
    channels: usize,
    data: Vec<Complex64>,
    pub config: StftConfig,
}

impl StftTensor {
    pub fn zeros(frames: usize, channels: usize, config: StftConfig) -> Self {
        let bins = config.bins();
        StftTensor {
            frames,
            bins,
            channels,
            data: vec![Complex64::new(0.0, 0.0); frames * bins * channels],
            config,
        }
    }

    pub fn from_vec(
        frames: usize,
        channels: usize,
        data: Vec<Complex64>,
        config: StftConfig,
    ) -> Result<Self> {
        let bins = config.bins();
        if data.len() != frames * bins * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{frames}x{bins}x{channels}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(StftTensor {
            frames,
            bins,
            channels,
            data,
            config,
        })
    }

    pub fn from_fn(
        frames: usize,
        channels: usize,
        config: StftConfig,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut t = Self::zeros(frames, channels, config);
        for ti in 0..frames {
            for fi in 0..t.bins {
                for c in 0..channels {
                    let i = t.index(ti, fi, c);
                    t.data[i] = f(ti, fi, c);
                }
            }
        }
        t
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.bins, self.channels)
    }

    #[inline]
    pub fn index(&self, t: usize, f: usize, c: usize) -> usize {
        (t * self.bins + f) * self.channels + c
    }

    #[inline]
    pub fn get(&self, t: usize, f: usize, c: usize) -> Complex64 {
        self.data[self.index(t, f, c)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, f: usize, c: usize, v: Complex64) {
        let i = self.index(t, f, c);
        self.data[i] = v;
    }

    /// The `channels` values at one time-frequency point.
    pub fn cell(&self, t: usize, f: usize) -> &[Complex64] {
        let i = self.index(t, f, 0);
        &self.data[i..i + self.channels]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn scaled(&self, z: Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= z);
        out
    }

    pub fn same_shape(&self, other: &StftTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                actual: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Multichannel STFT; `signal[c]` holds the samples of channel `c`.
pub fn stft(signal: &[Vec<f64>], config: &StftConfig) -> Result<StftTensor> {
    config.validate()?;
    let channels = signal.len();
    let len = signal.first().map_or(0, Vec::len);
    if channels == 0 || len == 0 {
        return Err(Error::EmptySignal);
    }
    if let Some(bad) = signal.iter().find(|s| s.len() != len) {
        return Err(Error::LengthMismatch {
            what: "channel lengths",
            left: len,
            right: bad.len(),
        });
    }
    let n = config.fft_size;
    let bins = config.bins();
    let frames = config.frames_for(len);
    let window = config.window();
    let fft = plan(n, false);
    let half = (n / 2) as isize;

    let mut out = StftTensor::zeros(frames, channels, *config);
    let frame_len = bins * channels;
    par::for_each_chunk_mut(&mut out.data, frame_len, |t, block| {
        let start = (t * config.hop) as isize - half;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for (c, chan) in signal.iter().enumerate() {
            for (j, b) in buf.iter_mut().enumerate() {
                let idx = start + j as isize;
                let x = if idx >= 0 && (idx as usize) < len {
                    chan[idx as usize]
                } else {
                    0.0
                };
                *b = Complex64::new(x * window[j], 0.0);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for f in 0..bins {
                block[f * channels + c] = buf[f];
            }
        }
    });
    Ok(out)
}

/// Inverse of [`stft`]. `length` defaults to `(frames − 1)·hop` samples.
pub fn istft(tensor: &StftTensor, length: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let config = tensor.config;
    config.check_overlap_add()?;
    let n = config.fft_size;
    let hop = config.hop;
    let frames = tensor.frames;
    let channels = tensor.channels;
    let bins = tensor.bins;
    let len = length.unwrap_or(frames.saturating_sub(1) * hop);
    let window = config.window();
    let ifft = plan(n, true);
    let half = (n / 2) as isize;

    // per-frame time-domain, windowed
    let frame_signals: Vec<Vec<f64>> = par::map_range(frames, |t| {
        let mut out = vec![0.0; n * channels];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
        for c in 0..channels {
            for f in 0..bins {
                buf[f] = tensor.get(t, f, c);
            }
            for f in bins..n {
                buf[f] = buf[n - f].conj();
            }
            // DC and Nyquist must be real for a real signal
            buf[0].im = 0.0;
            buf[n / 2].im = 0.0;
            ifft.process_with_scratch(&mut buf, &mut scratch);
            for j in 0..n {
                out[c * n + j] = buf[j].re / n as f64 * window[j];
            }
        }
        out
    });

    let mut signal = vec![vec![0.0; len]; channels];
    let mut envelope = vec![0.0; len];
    for (t, fs) in frame_signals.iter().enumerate() {
        let start = (t * hop) as isize - half;
        for j in 0..n {
            let idx = start + j as isize;
            if idx < 0 || idx as usize >= len {
                continue;
            }
            let i = idx as usize;
            envelope[i] += window[j] * window[j];
            for c in 0..channels {
                signal[c][i] += fs[c * n + j];
            }
        }
    }
    for chan in signal.iter_mut() {
        for (x, e) in chan.iter_mut().zip(&envelope) {
            if *e > 1e-12 {
                *x /= e;
            } else {
                *x = 0.0;
            }
        }
    }
    Ok(signal)
}

/// Real-valued feature block `frames × bins × 2C` with channel layout
/// `[Re(c0), Im(c0), Re(c1), Im(c1), ...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub frames: usize,
    pub bins: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub config: StftConfig,
}

pub fn pack_real_imag(tensor: &StftTensor) -> FeatureBlock {
    let mut data = Vec::with_capacity(tensor.data.len() * 2);
    for v in &tensor.data {
        data.push(v.re);
        data.push(v.im);
    }
    FeatureBlock {
        frames: tensor.frames,
        bins: tensor.bins,
        channels: tensor.channels * 2,
        data,
        config: tensor.config,
    }
}

pub fn unpack_real_imag(block: &FeatureBlock) -> Result<StftTensor> {
    if block.channels % 2 != 0 {
        return Err(Error::ShapeMismatch {
            expected: "even feature channel count".into(),
            actual: block.channels.to_string(),
        });
    }
    if block.data.len() != block.frames * block.bins * block.channels {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{}x{}", block.frames, block.bins, block.channels),
            actual: format!("{} values", block.data.len()),
        });
    }
    let data = block
        .data
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    StftTensor::from_vec(block.frames, block.channels / 2, data, block.config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(channels: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..channels)
            .map(|_| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn two_seconds_gives_94_frames() {
        let cfg = StftConfig::default();
        let x = vec![vec![0.1; 48_000]];
        let s = stft(&x, &cfg).unwrap();
        assert_eq!((s.frames(), s.bins()), (94, 513));
    }

    #[test]
    fn dc_lands_in_bin_zero() {
        let cfg = StftConfig::default();
        let s = stft(&[vec![1.0; 8192]], &cfg).unwrap();
        // interior frames only; edge frames see the zero padding
        for t in 2..s.frames() - 2 {
            let dc = s.get(t, 0, 0).norm();
            for f in 2..s.bins() {
                assert!(s.get(t, f, 0).norm() <= 1e-10 * dc);
            }
            // bin 1 leaks through the Hann main lobe
            assert_abs_diff_eq!(s.get(t, 1, 0).norm(), dc / 2.0, epsilon = 1e-9 * dc);
        }
    }

    #[test]
    fn centered_impulse_gives_window_spectrum() {
        let cfg = StftConfig::default();
        let mut x = vec![0.0; 4096];
        let t = 3;
        x[t * cfg.hop] = 1.0;
        let s = stft(&[x], &cfg).unwrap();
        // impulse sits at window index N/2 where w = 1: |X(f)| = 1
        for f in 0..s.bins() {
            assert_abs_diff_eq!(s.get(t, f, 0).norm(), 1.0, epsilon = 1e-12);
        }
        // neighbouring frame sees the impulse at its window edge (w = 0)
        for f in 0..s.bins() {
            assert!(s.get(t + 2, f, 0).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_reconstructs() {
        let cfg = StftConfig::default();
        let x = noise(3, 48_000, 1);
        let s = stft(&x, &cfg).unwrap();
        let y = istft(&s, Some(48_000)).unwrap();
        for (a, b) in x.iter().zip(&y) {
            for (u, v) in a.iter().zip(b) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn istft_zero_and_linearity() {
        let cfg = StftConfig::default();
        let z = StftTensor::zeros(10, 2, cfg);
        assert!(istft(&z, None).unwrap().iter().flatten().all(|v| *v == 0.0));

        let x = noise(1, 6000, 2);
        let s = stft(&x, &cfg).unwrap().scaled(Complex64::new(2.0, 0.0));
        let y = istft(&s, Some(6000)).unwrap();
        for (u, v) in x[0].iter().zip(&y[0]) {
            assert_abs_diff_eq!(2.0 * u, v, epsilon = 1e-6);
        }
    }

    #[test]
    fn non_overlapping_config_rejected() {
        let cfg = StftConfig {
            fft_size: 1024,
            hop: 1024,
            sample_rate: 24_000,
        };
        let t = StftTensor::zeros(4, 1, cfg);
        assert!(matches!(
            istft(&t, None),
            Err(Error::NotOverlapAddable { .. })
        ));
        assert!(StftConfig::default().check_overlap_add().is_ok());
    }

    #[test]
    fn empty_signal_rejected() {
        assert!(matches!(
            stft(&[], &StftConfig::default()),
            Err(Error::EmptySignal)
        ));
        assert!(matches!(
            stft(&[vec![]], &StftConfig::default()),
            Err(Error::EmptySignal)
        ));
    }

    #[test]
    fn pack_layout_and_round_trip() {
        let cfg = StftConfig {
            fft_size: 16,
            hop: 8,
            sample_rate: 1000,
        };
        let s = stft(&noise(4, 64, 3), &cfg).unwrap();
        let p = pack_real_imag(&s);
        assert_eq!(p.channels, 8);
        assert_eq!(p.data[2], s.get(0, 0, 1).re);
        assert_eq!(p.data[3], s.get(0, 0, 1).im);
        assert_eq!(unpack_real_imag(&p).unwrap(), s);

        let real = StftTensor::from_fn(2, 2, cfg, |t, f, c| Complex64::new((t + f + c) as f64, 0.0));
        let p = pack_real_imag(&real);
        assert!(p.data.iter().skip(1).step_by(2).all(|v| *v == 0.0));

        let mut odd = p.clone();
        odd.channels = 3;
        assert!(unpack_real_imag(&odd).is_err());
    }
}
