//! End-to-end helpers shared by the command line tool, the acceptance suite
//! and the benches.

use crate::encoder::{aliasing_frequency, apply_static, apply_tf, array_atfs, design_baseline, BaselineDesign, DesignOptions};
use crate::error::{Error, Result};
use crate::formats::AnyMatrix;
use crate::metrics::{evaluate, LossWeights, MetricsReport};
use crate::scene::{ArrayGeometry, SceneAudio};
use crate::sh::{sphere_grid, ShConfig};
use crate::tf::{istft, stft, StftConfig, StftTensor};

/// Quadrature degree used for the baseline design.
pub const DEFAULT_GRID_DEGREE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineParams {
    pub sh: ShConfig,
    pub stft: StftConfig,
    pub speed_of_sound: f64,
    pub gain_cap_db: f64,
    pub grid_degree: usize,
    /// Apply diffuse-field EQ above the aliasing frequency.
    pub diffuse_eq: bool,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            sh: ShConfig::FIRST_ORDER,
            stft: StftConfig::default(),
            speed_of_sound: crate::scene::room::DEFAULT_SPEED_OF_SOUND,
            gain_cap_db: crate::encoder::DEFAULT_GAIN_CAP_DB,
            grid_degree: DEFAULT_GRID_DEGREE,
            diffuse_eq: true,
        }
    }
}

/// Designs the least-squares baseline for `geometry`. Diffuse-field EQ needs
/// an aliasing frequency, so it is silently skipped for arrays whose
/// microphones all sit at one point.
pub fn baseline_for_array(geometry: &ArrayGeometry, params: &BaselineParams) -> Result<BaselineDesign> {
    geometry.validate()?;
    params.stft.validate()?;
    let grid = sphere_grid(params.grid_degree.max(2 * params.sh.order))?;
    let freqs = params.stft.frequencies();
    let atfs = array_atfs(geometry, &grid, &freqs, params.speed_of_sound);
    let aliasing_hz = if params.diffuse_eq && geometry.max_radius() > 1e-9 {
        Some(aliasing_frequency(geometry, params.sh.order.max(1), params.speed_of_sound)?)
    } else {
        None
    };
    design_baseline(
        &atfs,
        &grid,
        params.sh,
        DesignOptions {
            gain_cap_db: params.gain_cap_db,
            aliasing_hz,
        },
        params.stft.sample_rate as f64,
        params.stft.fft_size,
    )
}

/// Applies a static or time-variant matrix to the STFT of `mics`.
pub fn encode_mics(matrix: &AnyMatrix, mics: &[Vec<f64>], config: &StftConfig) -> Result<StftTensor> {
    let x = stft(mics, config)?;
    match matrix {
        AnyMatrix::Static(m) => {
            check_matrix_config(m.sample_rate, m.fft_size, config)?;
            apply_static(m, &x)
        }
        AnyMatrix::TimeVariant(m) => apply_tf(m, &x),
    }
}

fn check_matrix_config(sample_rate: f64, fft_size: usize, config: &StftConfig) -> Result<()> {
    if fft_size != config.fft_size || sample_rate != config.sample_rate as f64 {
        return Err(Error::InvalidConfig(format!(
            "matrix designed for {sample_rate} Hz / {fft_size}-point FFT, STFT uses {} Hz / {}",
            config.sample_rate, config.fft_size
        )));
    }
    Ok(())
}

/// Encodes and resynthesizes `len` samples per Ambisonic channel.
pub fn encode_to_signals(matrix: &AnyMatrix, mics: &[Vec<f64>], config: &StftConfig) -> Result<(StftTensor, Vec<Vec<f64>>)> {
    let len = mics.first().map_or(0, Vec::len);
    let y = encode_mics(matrix, mics, config)?;
    let out = istft(&y, Some(len))?;
    Ok((y, out))
}

/// Metrics of an estimated Ambisonic signal against the scene reference.
pub fn evaluate_signals(
    reference: &[Vec<f64>],
    estimate: &[Vec<f64>],
    config: &StftConfig,
    weights: &LossWeights,
) -> Result<MetricsReport> {
    let r = stft(reference, config)?;
    let e = stft(estimate, config)?;
    evaluate(&r, &e, weights)
}

/// Baseline metrics for a rendered scene.
pub fn evaluate_scene(
    audio: &SceneAudio,
    matrix: &AnyMatrix,
    config: &StftConfig,
    weights: &LossWeights,
) -> Result<MetricsReport> {
    let y = encode_mics(matrix, &audio.mics, config)?;
    let r = stft(&audio.reference, config)?;
    evaluate(&r, &y, weights)
}
