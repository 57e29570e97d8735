use num_complex::Complex64;
use rustfft::FftPlanner;

use super::geometry::ArrayGeometry;
use super::render::{render_ambi_rirs, render_mic_rirs, Rirs};
use super::room::image_sources;
use super::source::MonoSignal;
use super::spec::{SceneConfig, SceneSpec};
use crate::error::{Error, Result};

/// Microphone and reference Ambisonic impulse responses for one source.
#[derive(Debug, Clone, PartialEq)]
pub struct RirSet {
    pub mic: Rirs,
    pub ambi: Rirs,
}

/// Rendered scene audio, both `channels × samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneAudio {
    pub mics: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

pub fn scene_rirs(spec: &SceneSpec, array: &ArrayGeometry, config: &SceneConfig) -> Result<Vec<RirSet>> {
    spec.source_positions
        .iter()
        .map(|src| {
            let images = image_sources(&spec.room, *src, spec.array_position)?;
            Ok(RirSet {
                mic: render_mic_rirs(&images, array, spec.array_position, config.sample_rate)?,
                ambi: render_ambi_rirs(&images, spec.array_position, config.sh, config.sample_rate)?,
            })
        })
        .collect()
}

/// First `out_len` samples of `signal ∗ filter` for each filter.
pub fn convolve_truncated(signal: &[f64], filters: &[Vec<f64>], out_len: usize) -> Vec<Vec<f64>> {
    let sig = &signal[..signal.len().min(out_len)];
    let max_filter = filters.iter().map(Vec::len).max().unwrap_or(0);
    if sig.is_empty() || max_filter == 0 {
        return vec![vec![0.0; out_len]; filters.len()];
    }
    let needed = (sig.len() + max_filter - 1).min(out_len.max(1) + max_filter);
    let n = needed.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);

    let mut s: Vec<Complex64> = sig.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    s.resize(n, Complex64::new(0.0, 0.0));
    fwd.process(&mut s);

    filters
        .iter()
        .map(|h| {
            let mut hf: Vec<Complex64> = h.iter().map(|v| Complex64::new(*v, 0.0)).collect();
            hf.resize(n, Complex64::new(0.0, 0.0));
            fwd.process(&mut hf);
            for (a, b) in hf.iter_mut().zip(&s) {
                *a *= b;
            }
            inv.process(&mut hf);
            let scale = 1.0 / n as f64;
            (0..out_len)
                .map(|i| if i < n { hf[i].re * scale } else { 0.0 })
                .collect()
        })
        .collect()
}

fn accumulate(acc: &mut [Vec<f64>], add: Vec<Vec<f64>>) {
    for (a, b) in acc.iter_mut().zip(add) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Convolves each source with its RIRs and sums into microphone and reference
/// channels of exactly `config.scene_samples()` samples.
pub fn synth_scene(
    spec: &SceneSpec,
    array: &ArrayGeometry,
    signals: &[MonoSignal],
    config: &SceneConfig,
) -> Result<SceneAudio> {
    let rirs = scene_rirs(spec, array, config)?;
    synth_from_rirs(&rirs, signals, config)
}

pub fn synth_from_rirs(rirs: &[RirSet], signals: &[MonoSignal], config: &SceneConfig) -> Result<SceneAudio> {
    if rirs.len() != signals.len() {
        return Err(Error::LengthMismatch {
            what: "source signals vs sources",
            left: signals.len(),
            right: rirs.len(),
        });
    }
    let len = config.scene_samples();
    for s in signals {
        if s.sample_rate != config.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: config.sample_rate,
                actual: s.sample_rate,
            });
        }
        if s.samples.len() < len {
            return Err(Error::SignalTooShort {
                needed: len,
                actual: s.samples.len(),
            });
        }
    }
    let q = rirs.first().map_or(0, |r| r.mic.channels.len());
    let k = config.sh.channels();
    let mut mics = vec![vec![0.0; len]; q];
    let mut reference = vec![vec![0.0; len]; k];
    for (set, sig) in rirs.iter().zip(signals) {
        let mut filters = set.mic.channels.clone();
        filters.extend(set.ambi.channels.iter().cloned());
        let mut out = convolve_truncated(&sig.samples, &filters, len);
        let ambi = out.split_off(set.mic.channels.len());
        accumulate(&mut mics, out);
        accumulate(&mut reference, ambi);
    }
    Ok(SceneAudio {
        mics,
        reference,
        sample_rate: config.sample_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::source::synthetic_source;
    use crate::scene::spec::sample_scene_spec;
    use approx::assert_abs_diff_eq;

    fn direct_convolution(x: &[f64], h: &[f64], len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                (0..h.len())
                    .filter(|k| *k <= n && n - k < x.len())
                    .map(|k| h[k] * x[n - k])
                    .sum()
            })
            .collect()
    }

    #[test]
    fn unit_impulse_is_identity() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.1).sin()).collect();
        let y = convolve_truncated(&x, &[vec![1.0]], 500);
        for (a, b) in x.iter().zip(&y[0]) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let x: Vec<f64> = (0..300).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect();
        let h: Vec<f64> = (0..77).map(|i| (-(i as f64) / 20.0).exp()).collect();
        let y = convolve_truncated(&x, &[h.clone()], 350);
        let d = direct_convolution(&x, &h, 350);
        for (a, b) in y[0].iter().zip(&d) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    fn small_config() -> SceneConfig {
        SceneConfig {
            scene_seconds: 0.25,
            max_image_order: 3,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn two_sources_superpose() {
        let cfg = small_config();
        let mut spec = sample_scene_spec(5, &cfg).unwrap();
        while spec.source_positions.len() < 2 {
            spec = sample_scene_spec(spec.seed + 1, &cfg).unwrap();
        }
        spec.source_positions.truncate(2);
        spec.source_signal_ids.truncate(2);
        let array = ArrayGeometry::tetra();
        let n = cfg.scene_samples();
        let sigs = [synthetic_source(1, n, 24_000), synthetic_source(2, n, 24_000)];
        let both = synth_scene(&spec, &array, &sigs, &cfg).unwrap();

        let mut sum = SceneAudio {
            mics: vec![vec![0.0; n]; 4],
            reference: vec![vec![0.0; n]; 4],
            sample_rate: 24_000,
        };
        for i in 0..2 {
            let mut one = spec.clone();
            one.source_positions = vec![spec.source_positions[i]];
            one.source_signal_ids = vec![spec.source_signal_ids[i].clone()];
            let a = synth_scene(&one, &array, &sigs[i..=i], &cfg).unwrap();
            accumulate(&mut sum.mics, a.mics);
            accumulate(&mut sum.reference, a.reference);
        }
        for (a, b) in both.mics.iter().flatten().zip(sum.mics.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in both.reference.iter().flatten().zip(sum.reference.iter().flatten()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_rate_and_short_signals() {
        let cfg = small_config();
        let spec = sample_scene_spec(3, &cfg).unwrap();
        let n = cfg.scene_samples();
        let array = ArrayGeometry::tetra();
        let ns = spec.source_positions.len();
        let wrong: Vec<_> = (0..ns).map(|i| synthetic_source(i as u64, n, 16_000)).collect();
        assert!(matches!(
            synth_scene(&spec, &array, &wrong, &cfg),
            Err(Error::SampleRateMismatch { .. })
        ));
        let short: Vec<_> = (0..ns).map(|i| synthetic_source(i as u64, n - 1, 24_000)).collect();
        assert!(matches!(
            synth_scene(&spec, &array, &short, &cfg),
            Err(Error::SignalTooShort { .. })
        ));
    }

    #[test]
    fn output_length_is_exact() {
        let cfg = small_config();
        let spec = sample_scene_spec(8, &cfg).unwrap();
        let n = cfg.scene_samples();
        let sigs: Vec<_> = (0..spec.source_positions.len())
            .map(|i| synthetic_source(i as u64, n + 1000, 24_000))
            .collect();
        let a = synth_scene(&spec, &ArrayGeometry::irregular(), &sigs, &cfg).unwrap();
        assert!(a.mics.iter().chain(&a.reference).all(|c| c.len() == n));
        assert_eq!(a, synth_scene(&spec, &ArrayGeometry::irregular(), &sigs, &cfg).unwrap());
    }
}
