//! Encoding matrices: the least-squares baseline design and application of
//! static `M(f)` or time-variant `M(t,f)` matrices to microphone STFTs.

pub mod atf;
pub mod design;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;
use crate::tf::StftTensor;

pub use atf::{array_atfs, AtfMatrix};
pub use design::{
    aliasing_frequency, design_baseline, encoding_error, eq_crossfade, regularized_objective,
    BaselineDesign, DesignOptions, DEFAULT_GAIN_CAP_DB,
};

/// Time-invariant encoder: one complex `rows × cols` matrix per frequency
/// bin, stored bin-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodingMatrix {
    bins: usize,
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    pub sample_rate: f64,
    pub fft_size: usize,
}

impl EncodingMatrix {
    pub fn from_vec(
        bins: usize,
        rows: usize,
        cols: usize,
        data: Vec<Complex64>,
        sample_rate: f64,
        fft_size: usize,
    ) -> Result<Self> {
        if data.len() != bins * rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{bins}x{rows}x{cols}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(EncodingMatrix {
            bins,
            rows,
            cols,
            data,
            sample_rate,
            fft_size,
        })
    }

    pub fn identity(bins: usize, n: usize, sample_rate: f64, fft_size: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); bins * n * n];
        for f in 0..bins {
            for i in 0..n {
                data[f * n * n + i * n + i] = Complex64::new(1.0, 0.0);
            }
        }
        EncodingMatrix {
            bins,
            rows: n,
            cols: n,
            data,
            sample_rate,
            fft_size,
        }
    }

    pub fn zeros(bins: usize, rows: usize, cols: usize, sample_rate: f64, fft_size: usize) -> Self {
        EncodingMatrix {
            bins,
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); bins * rows * cols],
            sample_rate,
            fft_size,
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// `rows × cols` block of bin `f`, row-major.
    pub fn bin(&self, f: usize) -> &[Complex64] {
        let n = self.rows * self.cols;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn get(&self, f: usize, r: usize, c: usize) -> Complex64 {
        self.bin(f)[r * self.cols + c]
    }

    /// Filter gain `‖row‖₂` of channel `r` at bin `f`, in dB.
    pub fn row_gain_db(&self, f: usize, r: usize) -> f64 {
        let b = self.bin(f);
        let g: f64 = b[r * self.cols..(r + 1) * self.cols]
            .iter()
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            .sqrt();
        20.0 * g.log10()
    }

    pub fn max_row_gain_db(&self) -> f64 {
        (0..self.bins)
            .flat_map(|f| (0..self.rows).map(move |r| (f, r)))
            .map(|(f, r)| self.row_gain_db(f, r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Time-variant encoder `M(t, f)`, stored t-major, then f, then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TfEncodingMatrix {
    frames: usize,
    bins: usize,
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
    pub sample_rate: f64,
    pub fft_size: usize,
}

impl TfEncodingMatrix {
    pub fn from_vec(
        frames: usize,
        bins: usize,
        rows: usize,
        cols: usize,
        data: Vec<Complex64>,
        sample_rate: f64,
        fft_size: usize,
    ) -> Result<Self> {
        if data.len() != frames * bins * rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{frames}x{bins}x{rows}x{cols}"),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(TfEncodingMatrix {
            frames,
            bins,
            rows,
            cols,
            data,
            sample_rate,
            fft_size,
        })
    }

    /// Repeats a static matrix over `frames` frames.
    pub fn from_static(m: &EncodingMatrix, frames: usize) -> Self {
        let mut data = Vec::with_capacity(frames * m.data.len());
        for _ in 0..frames {
            data.extend_from_slice(&m.data);
        }
        TfEncodingMatrix {
            frames,
            bins: m.bins,
            rows: m.rows,
            cols: m.cols,
            data,
            sample_rate: m.sample_rate,
            fft_size: m.fft_size,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn cell(&self, t: usize, f: usize) -> &[Complex64] {
        let n = self.rows * self.cols;
        let i = (t * self.bins + f) * n;
        &self.data[i..i + n]
    }
}

#[inline]
fn apply_cell(m: &[Complex64], x: &[Complex64], out: &mut [Complex64]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in row.iter().zip(x) {
            acc += a * b;
        }
        *o = acc;
    }
}

fn check_axes(bins: usize, cols: usize, x: &StftTensor) -> Result<()> {
    if bins != x.bins() || cols != x.channels() {
        return Err(Error::ShapeMismatch {
            expected: format!("{bins} bins x {cols} channels"),
            actual: format!("{} bins x {} channels", x.bins(), x.channels()),
        });
    }
    Ok(())
}

/// `b̄(t,f) = M(f) x(t,f)`.
pub fn apply_static(matrix: &EncodingMatrix, x: &StftTensor) -> Result<StftTensor> {
    check_axes(matrix.bins, matrix.cols, x)?;
    let mut out = StftTensor::zeros(x.frames(), matrix.rows, x.config);
    let rows = matrix.rows;
    let bins = x.bins();
    par::for_each_chunk_mut(out.data_mut(), bins * rows, |t, frame| {
        for f in 0..bins {
            apply_cell(matrix.bin(f), x.cell(t, f), &mut frame[f * rows..(f + 1) * rows]);
        }
    });
    Ok(out)
}

/// `b̄(t,f) = M(t,f) x(t,f)`.
pub fn apply_tf(matrix: &TfEncodingMatrix, x: &StftTensor) -> Result<StftTensor> {
    check_axes(matrix.bins, matrix.cols, x)?;
    if matrix.frames != x.frames() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} frames", matrix.frames),
            actual: format!("{} frames", x.frames()),
        });
    }
    let mut out = StftTensor::zeros(x.frames(), matrix.rows, x.config);
    let rows = matrix.rows;
    let bins = x.bins();
    par::for_each_chunk_mut(out.data_mut(), bins * rows, |t, frame| {
        for f in 0..bins {
            apply_cell(matrix.cell(t, f), x.cell(t, f), &mut frame[f * rows..(f + 1) * rows]);
        }
    });
    Ok(out)
}
