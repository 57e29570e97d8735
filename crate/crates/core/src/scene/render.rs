//! Impulse-response rendering from image sources.
//!
//! Each image contributes `amplitude / distance` delayed by `distance / c`
//! through a Hann-windowed sinc kernel of [`FD_TAPS`] taps centered on the
//! exact (fractional) arrival time.

use std::f64::consts::PI;

use super::geometry::{add, distance, sub, ArrayGeometry, Vec3};
use super::room::ImageSourceSet;
use crate::error::{Error, Result};
use crate::sh::{eval_real_sh_into, Direction, ShConfig};

pub const FD_TAPS: usize = 81;
const HALF_WIDTH: f64 = FD_TAPS as f64 / 2.0;
const MIN_DISTANCE: f64 = 1e-3;

/// Multichannel impulse responses of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Rirs {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl Rirs {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Windowed-sinc fractional delay kernel evaluated at offset `t` samples
/// from the arrival time. Zero for `|t| ≥ FD_TAPS / 2`.
#[inline]
pub fn fd_kernel(t: f64) -> f64 {
    if t.abs() >= HALF_WIDTH {
        return 0.0;
    }
    let window = 0.5 + 0.5 * (2.0 * PI * t / FD_TAPS as f64).cos();
    let sinc = if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    };
    window * sinc
}

/// Adds `gain · kernel(n − delay)` into `out`, dropping taps outside it.
#[inline]
pub fn add_fractional_impulse(out: &mut [f64], delay: f64, gain: f64) {
    let first = (delay - HALF_WIDTH).ceil().max(0.0) as usize;
    let last = (delay + HALF_WIDTH).floor();
    if last < 0.0 {
        return;
    }
    let last = (last as usize).min(out.len().saturating_sub(1));
    for n in first..=last {
        out[n] += gain * fd_kernel(n as f64 - delay);
    }
}

fn rir_length(max_delay: f64) -> usize {
    max_delay.ceil() as usize + FD_TAPS / 2 + 2
}

/// Microphone RIRs for an acoustically transparent array of ideal omnis.
pub fn render_mic_rirs(
    images: &ImageSourceSet,
    array: &ArrayGeometry,
    array_position: Vec3,
    sample_rate: u32,
) -> Result<Rirs> {
    if sample_rate == 0 {
        return Err(Error::InvalidConfig("sample rate must be positive".into()));
    }
    let fs = sample_rate as f64;
    let c = images.speed_of_sound;
    let mics: Vec<Vec3> = array
        .positions
        .iter()
        .map(|p| add(array_position, *p))
        .collect();

    let mut max_delay: f64 = 0.0;
    for img in images.images.iter().filter(|i| i.amplitude != 0.0) {
        for m in &mics {
            let d = distance(img.position, *m);
            if d < MIN_DISTANCE {
                return Err(Error::ColocatedSource { distance: d });
            }
            max_delay = max_delay.max(d / c * fs);
        }
    }
    let len = rir_length(max_delay);
    let mut channels = vec![vec![0.0; len]; mics.len()];
    for img in images.images.iter().filter(|i| i.amplitude != 0.0) {
        for (m, out) in mics.iter().zip(channels.iter_mut()) {
            let d = distance(img.position, *m);
            add_fractional_impulse(out, d / c * fs, img.amplitude / d);
        }
    }
    Ok(Rirs {
        channels,
        sample_rate,
    })
}

/// Reference Ambisonic RIRs at the array center: every image is treated as a
/// far-field point source encoded with the real SHs of its direction.
pub fn render_ambi_rirs(
    images: &ImageSourceSet,
    array_position: Vec3,
    config: ShConfig,
    sample_rate: u32,
) -> Result<Rirs> {
    if sample_rate == 0 {
        return Err(Error::InvalidConfig("sample rate must be positive".into()));
    }
    let fs = sample_rate as f64;
    let c = images.speed_of_sound;
    let k = config.channels();

    let mut max_delay: f64 = 0.0;
    for img in images.images.iter().filter(|i| i.amplitude != 0.0) {
        let d = distance(img.position, array_position);
        if d < MIN_DISTANCE {
            return Err(Error::ColocatedSource { distance: d });
        }
        max_delay = max_delay.max(d / c * fs);
    }
    let len = rir_length(max_delay);
    let mut channels = vec![vec![0.0; len]; k];
    let mut y = vec![0.0; k];
    for img in images.images.iter().filter(|i| i.amplitude != 0.0) {
        let rel = sub(img.position, array_position);
        let d = distance(img.position, array_position);
        let dir = Direction::from_vector(rel)?;
        eval_real_sh_into(dir, config.order, &mut y);
        let delay = d / c * fs;
        let gain = img.amplitude / d;
        for (out, yk) in channels.iter_mut().zip(&y) {
            add_fractional_impulse(out, delay, gain * yk);
        }
    }
    Ok(Rirs {
        channels,
        sample_rate,
    })
}
