use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{coherence, combine_loss, energy_error, mae, mag_spectrum_error, LossWeights};
use crate::error::{Error, Result};
use crate::tf::StftTensor;

/// Per-bin metric values of one reference/estimate pair (or an average of
/// several).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub freqs: Vec<f64>,
    pub mae: Vec<f64>,
    pub energy: Vec<f64>,
    pub coherence: Vec<f64>,
    pub s_mean: Vec<f64>,
    /// `channels × bins`.
    pub s_channels: Vec<Vec<f64>>,
    pub composite: f64,
    pub excluded_cells: usize,
    pub zero_coherence_terms: usize,
}

impl MetricsReport {
    pub fn bins(&self) -> usize {
        self.freqs.len()
    }

    pub fn channels(&self) -> usize {
        self.s_channels.len()
    }

    /// Recomputes `composite` from the stored per-bin components.
    pub fn recompute_composite(&mut self, weights: &LossWeights) {
        self.composite = combine_loss(&self.freqs, &self.mae, &self.energy, &self.coherence, weights).0;
    }

    /// Mean of `values` over bins whose frequency lies in `[lo, hi]`.
    pub fn band_mean(&self, values: &[f64], lo: f64, hi: f64) -> f64 {
        let sel: Vec<f64> = self
            .freqs
            .iter()
            .zip(values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(_, v)| *v)
            .collect();
        sel.iter().sum::<f64>() / sel.len().max(1) as f64
    }
}

pub fn evaluate(reference: &StftTensor, estimate: &StftTensor, weights: &LossWeights) -> Result<MetricsReport> {
    weights.validate()?;
    let mae = mae(reference, estimate)?;
    let energy = energy_error(reference, estimate)?;
    let coh = coherence(reference, estimate)?;
    let s = mag_spectrum_error(reference, estimate)?;
    let freqs = reference.config.frequencies();
    let composite = combine_loss(&freqs, &mae, &energy, &coh.per_bin, weights).0;
    Ok(MetricsReport {
        freqs,
        mae,
        energy,
        coherence: coh.per_bin,
        s_mean: s.mean,
        s_channels: s.per_channel,
        composite,
        excluded_cells: s.excluded,
        zero_coherence_terms: coh.zero_terms,
    })
}

/// Element-wise mean of reports with identical bin and channel counts.
pub fn aggregate_reports(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let Some(first) = reports.first() else {
        return Ok(MetricsReport::default());
    };
    for r in reports {
        if r.bins() != first.bins() || r.channels() != first.channels() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} bins x {} channels", first.bins(), first.channels()),
                actual: format!("{} bins x {} channels", r.bins(), r.channels()),
            });
        }
    }
    let n = reports.len() as f64;
    let mean = |get: &dyn Fn(&MetricsReport) -> &Vec<f64>| -> Vec<f64> {
        (0..first.bins())
            .map(|f| reports.iter().map(|r| get(r)[f]).sum::<f64>() / n)
            .collect()
    };
    Ok(MetricsReport {
        freqs: first.freqs.clone(),
        mae: mean(&|r| &r.mae),
        energy: mean(&|r| &r.energy),
        coherence: mean(&|r| &r.coherence),
        s_mean: mean(&|r| &r.s_mean),
        s_channels: (0..first.channels())
            .map(|c| mean(&|r| &r.s_channels[c]))
            .collect(),
        composite: reports.iter().map(|r| r.composite).sum::<f64>() / n,
        excluded_cells: reports.iter().map(|r| r.excluded_cells).sum(),
        zero_coherence_terms: reports.iter().map(|r| r.zero_coherence_terms).sum(),
    })
}

fn header(channels: usize) -> Vec<String> {
    let mut h: Vec<String> = ["freq_hz", "mae", "energy_err", "coherence", "s_mean"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..channels).map(|c| format!("s_ch{c}")));
    h
}

/// Writes one CSV row per bin. Values use the shortest text that parses back
/// to the same f64.
pub fn emit_report(report: &MetricsReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header(report.channels()))?;
    for f in 0..report.bins() {
        let mut row = vec![
            report.freqs[f].to_string(),
            report.mae[f].to_string(),
            report.energy[f].to_string(),
            report.coherence[f].to_string(),
            report.s_mean[f].to_string(),
        ];
        row.extend(report.s_channels.iter().map(|c| c[f].to_string()));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Side-by-side per-bin table of two reports over the same bins.
pub fn emit_comparison(baseline: &MetricsReport, learned: &MetricsReport, path: &Path) -> Result<()> {
    if baseline.freqs != learned.freqs {
        return Err(Error::ShapeMismatch {
            expected: format!("{} bins", baseline.bins()),
            actual: format!("{} bins", learned.bins()),
        });
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record([
        "freq_hz",
        "baseline_mae",
        "learned_mae",
        "baseline_energy_err",
        "learned_energy_err",
        "baseline_coherence",
        "learned_coherence",
        "baseline_s_mean",
        "learned_s_mean",
    ])?;
    for f in 0..baseline.bins() {
        w.write_record([
            baseline.freqs[f],
            baseline.mae[f],
            learned.mae[f],
            baseline.energy[f],
            learned.energy[f],
            baseline.coherence[f],
            learned.coherence[f],
            baseline.s_mean[f],
            learned.s_mean[f],
        ]
        .map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Parses a CSV written by [`emit_report`]. Scalar fields are not stored in
/// the CSV and come back as zero.
pub fn read_report(path: &Path) -> Result<MetricsReport> {
    let mut r = csv::Reader::from_path(path)?;
    let cols = r.headers()?.len();
    if cols < 5 {
        return Err(Error::Format(format!("{}: expected at least 5 columns", path.display())));
    }
    let channels = cols - 5;
    let mut rep = MetricsReport {
        s_channels: vec![Vec::new(); channels],
        ..MetricsReport::default()
    };
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format(format!("{s}: {e}"))))
            .collect::<Result<_>>()?;
        rep.freqs.push(vals[0]);
        rep.mae.push(vals[1]);
        rep.energy.push(vals[2]);
        rep.coherence.push(vals[3]);
        rep.s_mean.push(vals[4]);
        for c in 0..channels {
            rep.s_channels[c].push(vals[5 + c]);
        }
    }
    Ok(rep)
}
