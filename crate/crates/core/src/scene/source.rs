//! Mono excitation signals: a synthetic generator and a WAV corpus loader.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::wav;

#[derive(Debug, Clone, PartialEq)]
pub struct MonoSignal {
    pub id: String,
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    /// Hex SHA-256 of the source file, or of the f32 little-endian samples
    /// for generated signals.
    pub sha256: String,
}

const SYNTH_PREFIX: &str = "synth:";

pub fn synthetic_id(seed: u64) -> String {
    format!("{SYNTH_PREFIX}{seed:016x}")
}

pub fn parse_synthetic_id(id: &str) -> Option<u64> {
    id.strip_prefix(SYNTH_PREFIX)
        .and_then(|h| u64::from_str_radix(h, 16).ok())
}

fn sample_hash(samples: &[f64]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        h.update((*s as f32).to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Broadband noise with a random spectral tilt, a few resonances and a slow
/// amplitude envelope that never drops to silence. RMS is 0.05.
pub fn synthetic_source(seed: u64, len: usize, sample_rate: u32) -> MonoSignal {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = len.max(2);
    let mut spec: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut spec);

    let fs = sample_rate as f64;
    let tilt = rng.random_range(0.0..1.5);
    let resonances: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=4))
        .map(|_| {
            let center = (rng.random_range(100f64.ln()..8000f64.ln())).exp();
            let width = rng.random_range(0.1..0.6);
            let gain = rng.random_range(0.5..3.0);
            (center, width, gain)
        })
        .collect();
    for k in 0..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let mut g = (f.max(50.0) / 1000.0).powf(-tilt / 2.0);
        for (c, w, a) in &resonances {
            let x = (f.max(1.0) / c).ln() / w;
            g *= 1.0 + a * (-0.5 * x * x).exp();
        }
        if f < 20.0 {
            g *= f / 20.0;
        }
        spec[k] *= g;
        if k > 0 && k < n - k {
            spec[n - k] = spec[k].conj();
        }
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    let mut samples: Vec<f64> = spec.iter().take(len).map(|v| v.re).collect();

    // piecewise-linear envelope with knots every 50-200 ms
    let mut knots = vec![(0usize, rng.random_range(0.0..1.0))];
    while knots.last().unwrap().0 < len {
        let step = (rng.random_range(0.05..0.2) * fs) as usize;
        knots.push((knots.last().unwrap().0 + step.max(1), rng.random_range(0.0..1.0)));
    }
    let mut seg = 0;
    for (i, s) in samples.iter_mut().enumerate() {
        while knots[seg + 1].0 <= i {
            seg += 1;
        }
        let (a, va) = knots[seg];
        let (b, vb) = knots[seg + 1];
        let u = (i - a) as f64 / (b - a) as f64;
        let v = va + (vb - va) * (0.5 - 0.5 * (PI * u).cos());
        *s *= 0.3 + 0.7 * v;
    }

    let rms = (samples.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        samples.iter_mut().for_each(|v| *v *= 0.05 / rms);
    }
    MonoSignal {
        id: synthetic_id(seed),
        sha256: sample_hash(&samples),
        samples,
        sample_rate,
    }
}

/// Resolves a signal id produced by [`synthetic_id`].
pub fn resolve_synthetic(id: &str, len: usize, sample_rate: u32) -> Result<MonoSignal> {
    let seed = parse_synthetic_id(id)
        .ok_or_else(|| Error::InvalidConfig(format!("`{id}` is not a synthetic signal id")))?;
    Ok(synthetic_source(seed, len, sample_rate))
}

/// Loads every `*.wav` in `dir` (sorted by file name). Files must be mono.
pub fn load_corpus(dir: &Path) -> Result<Vec<MonoSignal>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for p in paths {
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        let (mut channels, sample_rate) = wav::read(&p)?;
        if channels.len() != 1 {
            return Err(Error::Format(format!(
                "{}: expected mono, found {} channels",
                p.display(),
                channels.len()
            )));
        }
        out.push(MonoSignal {
            id: p.file_name().unwrap().to_string_lossy().into_owned(),
            samples: channels.remove(0),
            sample_rate,
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_deterministic_and_normalized() {
        let a = synthetic_source(9, 48_000, 24_000);
        let b = synthetic_source(9, 48_000, 24_000);
        assert_eq!(a, b);
        let rms = (a.samples.iter().map(|v| v * v).sum::<f64>() / 48_000.0).sqrt();
        assert!((rms - 0.05).abs() < 1e-12);
        assert_ne!(a.samples, synthetic_source(10, 48_000, 24_000).samples);
    }

    #[test]
    fn id_round_trip() {
        let id = synthetic_id(0xdead_beef);
        assert_eq!(parse_synthetic_id(&id), Some(0xdead_beef));
        assert_eq!(parse_synthetic_id("dog.wav"), None);
        assert_eq!(resolve_synthetic(&id, 100, 24_000).unwrap().id, id);
    }

    #[test]
    fn corpus_loads_mono_files() {
        let dir = tempfile::tempdir().unwrap();
        wav::write_f32(&dir.path().join("b.wav"), &[vec![0.1; 10]], 24_000).unwrap();
        wav::write_f32(&dir.path().join("a.wav"), &[vec![0.2; 10]], 24_000).unwrap();
        let c = load_corpus(dir.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].id, "a.wav");
        assert_eq!(c[0].sha256.len(), 64);

        wav::write_f32(&dir.path().join("c.wav"), &[vec![0.0; 4], vec![0.0; 4]], 24_000).unwrap();
        assert!(load_corpus(dir.path()).is_err());
    }
}
