//! Per-frequency error metrics between a reference and an estimated STFT, and
//! the frequency-weighted composite training loss built from them.
//!
//! All metrics average over frames `t` and channels `c` separately for every
//! frequency bin `f`:
//!
//! * `MAE(f)  = 1/(TC) Σ_t Σ_c |y − ŷ|`
//! * `E(f)    = 1/T Σ_t |Σ_c |y|² − Σ_c |ŷ|²|`
//! * `C(f)    = 1/C Σ_c |Σ_t y* ŷ|² / (Σ_t |y|² Σ_t |ŷ|²)`
//! * `S(f)    = 1/(TC) Σ_t Σ_c |20 log10(|y| / |ŷ|)|`

pub mod report;
pub mod weights;

use log::warn;

use crate::error::Result;
use crate::par;
use crate::tf::StftTensor;

pub use report::{aggregate_reports, emit_comparison, emit_report, evaluate, read_report, MetricsReport};
pub use weights::{Breakpoints, CoherenceTerm, LossWeights};

pub fn mae(reference: &StftTensor, estimate: &StftTensor) -> Result<Vec<f64>> {
    reference.same_shape(estimate)?;
    let (frames, bins, channels) = reference.shape();
    let norm = 1.0 / (frames * channels) as f64;
    Ok(par::map_range(bins, |f| {
        let mut acc = 0.0;
        for t in 0..frames {
            for (y, e) in reference.cell(t, f).iter().zip(estimate.cell(t, f)) {
                acc += (y - e).norm();
            }
        }
        acc * norm
    }))
}

pub fn energy_error(reference: &StftTensor, estimate: &StftTensor) -> Result<Vec<f64>> {
    reference.same_shape(estimate)?;
    let (frames, bins, _) = reference.shape();
    Ok(par::map_range(bins, |f| {
        let mut acc = 0.0;
        for t in 0..frames {
            let ey: f64 = reference.cell(t, f).iter().map(|v| v.norm_sqr()).sum();
            let ee: f64 = estimate.cell(t, f).iter().map(|v| v.norm_sqr()).sum();
            acc += (ey - ee).abs();
        }
        acc / frames as f64
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coherence {
    pub per_bin: Vec<f64>,
    /// `(bin, channel)` terms set to 0 because a channel was all zeros.
    pub zero_terms: usize,
}

pub fn coherence(reference: &StftTensor, estimate: &StftTensor) -> Result<Coherence> {
    reference.same_shape(estimate)?;
    let (frames, bins, channels) = reference.shape();
    let per: Vec<(f64, usize)> = par::map_range(bins, |f| {
        let mut sum = 0.0;
        let mut zeros = 0;
        for c in 0..channels {
            let mut cross = num_complex::Complex64::new(0.0, 0.0);
            let mut py = 0.0;
            let mut pe = 0.0;
            for t in 0..frames {
                let y = reference.get(t, f, c);
                let e = estimate.get(t, f, c);
                cross += y.conj() * e;
                py += y.norm_sqr();
                pe += e.norm_sqr();
            }
            let den = py * pe;
            if den > 0.0 {
                sum += (cross.norm_sqr() / den).min(1.0);
            } else {
                zeros += 1;
            }
        }
        (sum / channels as f64, zeros)
    });
    let zero_terms = per.iter().map(|p| p.1).sum();
    if zero_terms > 0 {
        warn!("coherence: {zero_terms} all-zero channel terms set to 0");
    }
    Ok(Coherence {
        per_bin: per.into_iter().map(|p| p.0).collect(),
        zero_terms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagSpectrumError {
    /// Average over all valid cells of a bin.
    pub mean: Vec<f64>,
    /// `channels × bins`, each averaged over that channel's valid cells.
    pub per_channel: Vec<Vec<f64>>,
    /// Cells skipped because either magnitude was zero.
    pub excluded: usize,
}

pub fn mag_spectrum_error(reference: &StftTensor, estimate: &StftTensor) -> Result<MagSpectrumError> {
    reference.same_shape(estimate)?;
    let (frames, bins, channels) = reference.shape();
    struct Bin {
        sum: f64,
        count: usize,
        ch_sum: Vec<f64>,
        ch_count: Vec<usize>,
    }
    let per: Vec<Bin> = par::map_range(bins, |f| {
        let mut b = Bin {
            sum: 0.0,
            count: 0,
            ch_sum: vec![0.0; channels],
            ch_count: vec![0; channels],
        };
        for t in 0..frames {
            for c in 0..channels {
                let y = reference.get(t, f, c).norm();
                let e = estimate.get(t, f, c).norm();
                if y == 0.0 || e == 0.0 {
                    continue;
                }
                let d = (20.0 * (y / e).log10()).abs();
                b.sum += d;
                b.count += 1;
                b.ch_sum[c] += d;
                b.ch_count[c] += 1;
            }
        }
        b
    });
    let ratio = |s: f64, n: usize| if n > 0 { s / n as f64 } else { 0.0 };
    let excluded = frames * bins * channels - per.iter().map(|b| b.count).sum::<usize>();
    if excluded > 0 {
        warn!("magnitude spectrum error: {excluded} zero-magnitude cells excluded");
    }
    Ok(MagSpectrumError {
        mean: per.iter().map(|b| ratio(b.sum, b.count)).collect(),
        per_channel: (0..channels)
            .map(|c| per.iter().map(|b| ratio(b.ch_sum[c], b.ch_count[c])).collect())
            .collect(),
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeLoss {
    pub total: f64,
    /// `α·MAE + β·E + γ·coherence-term` per bin.
    pub per_bin: Vec<f64>,
    pub mae: Vec<f64>,
    pub energy: Vec<f64>,
    pub coherence: Vec<f64>,
}

/// Combines per-bin component values with weights evaluated at `freqs`.
pub fn combine_loss(
    freqs: &[f64],
    mae: &[f64],
    energy: &[f64],
    coherence: &[f64],
    weights: &LossWeights,
) -> (f64, Vec<f64>) {
    let per_bin: Vec<f64> = freqs
        .iter()
        .enumerate()
        .map(|(f, hz)| {
            let (a, b, g) = weights.at(*hz);
            let c = match weights.coherence_term {
                CoherenceTerm::OneMinus => 1.0 - coherence[f],
                CoherenceTerm::Literal => coherence[f],
            };
            a * mae[f] + b * energy[f] + g * c
        })
        .collect();
    let total = per_bin.iter().sum::<f64>() / per_bin.len().max(1) as f64;
    (total, per_bin)
}

pub fn composite_loss(reference: &StftTensor, estimate: &StftTensor, weights: &LossWeights) -> Result<CompositeLoss> {
    weights.validate()?;
    let mae = mae(reference, estimate)?;
    let energy = energy_error(reference, estimate)?;
    let coherence = coherence(reference, estimate)?.per_bin;
    let freqs = reference.config.frequencies();
    let (total, per_bin) = combine_loss(&freqs, &mae, &energy, &coherence, weights);
    Ok(CompositeLoss {
        total,
        per_bin,
        mae,
        energy,
        coherence,
    })
}
