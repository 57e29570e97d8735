//! Little-endian binary exchange formats.
//!
//! | magic       | header after magic                                        | payload order      |
//! |-------------|-----------------------------------------------------------|--------------------|
//! | `AMBTEN1\0` | u32 T, u32 F, u32 C, u32 flags                            | t, f, c            |
//! | `AMBENC1\0` | u32 F, u32 rows, u32 cols, f64 sample_rate, f64 fft_size  | f, row, col        |
//! | `AMBTFE1\0` | u32 T, u32 F, u32 rows, u32 cols, f64 sample_rate, f64 fft_size | t, f, row, col |
//!
//! Payload values are complex numbers stored as (real, imag) pairs of f32.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::encoder::{EncodingMatrix, TfEncodingMatrix};
use crate::error::{Error, Result};
use crate::tf::{StftConfig, StftTensor};

pub const TENSOR_MAGIC: &[u8; 8] = b"AMBTEN1\0";
pub const MATRIX_MAGIC: &[u8; 8] = b"AMBENC1\0";
pub const TF_MATRIX_MAGIC: &[u8; 8] = b"AMBTFE1\0";

/// Frames are centered on `t·hop` with zero padding at the edges.
pub const FLAG_CENTERED: u32 = 1;
/// Periodic Hann analysis window.
pub const FLAG_HANN: u32 = 1 << 1;
pub const TENSOR_FLAGS: u32 = FLAG_CENTERED | FLAG_HANN;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn expect_magic(c: &mut Cursor, magic: &[u8; 8]) -> Result<()> {
    let m = c.take(8)?;
    if m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(m),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit in u32")))
}

fn put_complex(out: &mut Vec<u8>, data: &[Complex64]) {
    out.reserve(data.len() * 8);
    for v in data {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
}

pub fn encode_tensor(t: &StftTensor) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(24 + t.data().len() * 8);
    out.extend_from_slice(TENSOR_MAGIC);
    for (v, what) in [(t.frames(), "T"), (t.bins(), "F"), (t.channels(), "C")] {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    out.extend_from_slice(&TENSOR_FLAGS.to_le_bytes());
    put_complex(&mut out, t.data());
    Ok(out)
}

/// The header carries no hop or sample rate; they come from `config`, whose
/// bin count must match.
pub fn decode_tensor(bytes: &[u8], config: StftConfig) -> Result<StftTensor> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    expect_magic(&mut c, TENSOR_MAGIC)?;
    let frames = c.u32()? as usize;
    let bins = c.u32()? as usize;
    let channels = c.u32()? as usize;
    let flags = c.u32()?;
    if flags != TENSOR_FLAGS {
        return Err(Error::Format(format!(
            "tensor flags {flags:#x} do not match framing convention {TENSOR_FLAGS:#x}"
        )));
    }
    if bins != config.bins() {
        return Err(Error::Format(format!(
            "tensor has {bins} bins, config expects {}",
            config.bins()
        )));
    }
    let data = c.complex(frames * bins * channels)?;
    c.finish()?;
    StftTensor::from_vec(frames, channels, data, config)
}

pub fn encode_matrix(m: &EncodingMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(36 + m.data().len() * 8);
    out.extend_from_slice(MATRIX_MAGIC);
    for (v, what) in [(m.bins(), "F"), (m.rows(), "rows"), (m.cols(), "cols")] {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    out.extend_from_slice(&m.sample_rate.to_le_bytes());
    out.extend_from_slice(&(m.fft_size as f64).to_le_bytes());
    put_complex(&mut out, m.data());
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8]) -> Result<EncodingMatrix> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    expect_magic(&mut c, MATRIX_MAGIC)?;
    let bins = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let sample_rate = c.f64()?;
    let fft_size = c.f64()?;
    let data = c.complex(bins * rows * cols)?;
    c.finish()?;
    EncodingMatrix::from_vec(bins, rows, cols, data, sample_rate, fft_size as usize)
}

pub fn encode_tf_matrix(m: &TfEncodingMatrix) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(40 + m.data().len() * 8);
    out.extend_from_slice(TF_MATRIX_MAGIC);
    for (v, what) in [
        (m.frames(), "T"),
        (m.bins(), "F"),
        (m.rows(), "rows"),
        (m.cols(), "cols"),
    ] {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    out.extend_from_slice(&m.sample_rate.to_le_bytes());
    out.extend_from_slice(&(m.fft_size as f64).to_le_bytes());
    put_complex(&mut out, m.data());
    Ok(out)
}

pub fn decode_tf_matrix(bytes: &[u8]) -> Result<TfEncodingMatrix> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    expect_magic(&mut c, TF_MATRIX_MAGIC)?;
    let frames = c.u32()? as usize;
    let bins = c.u32()? as usize;
    let rows = c.u32()? as usize;
    let cols = c.u32()? as usize;
    let sample_rate = c.f64()?;
    let fft_size = c.f64()?;
    let data = c.complex(frames * bins * rows * cols)?;
    c.finish()?;
    TfEncodingMatrix::from_vec(frames, bins, rows, cols, data, sample_rate, fft_size as usize)
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

fn write_all(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_tensor(path: &Path, t: &StftTensor) -> Result<()> {
    write_all(path, &encode_tensor(t)?)
}

pub fn read_tensor(path: &Path, config: StftConfig) -> Result<StftTensor> {
    decode_tensor(&read_all(path)?, config)
}

pub fn write_matrix(path: &Path, m: &EncodingMatrix) -> Result<()> {
    write_all(path, &encode_matrix(m)?)
}

pub fn read_matrix(path: &Path) -> Result<EncodingMatrix> {
    decode_matrix(&read_all(path)?)
}

pub fn write_tf_matrix(path: &Path, m: &TfEncodingMatrix) -> Result<()> {
    write_all(path, &encode_tf_matrix(m)?)
}

pub fn read_tf_matrix(path: &Path) -> Result<TfEncodingMatrix> {
    decode_tf_matrix(&read_all(path)?)
}

/// Either kind of encoding matrix, told apart by magic.
#[derive(Debug, Clone)]
pub enum AnyMatrix {
    Static(EncodingMatrix),
    TimeVariant(TfEncodingMatrix),
}

pub fn read_any_matrix(path: &Path) -> Result<AnyMatrix> {
    let bytes = read_all(path)?;
    match bytes.get(..8) {
        Some(m) if m == MATRIX_MAGIC => Ok(AnyMatrix::Static(decode_matrix(&bytes)?)),
        Some(m) if m == TF_MATRIX_MAGIC => Ok(AnyMatrix::TimeVariant(decode_tf_matrix(&bytes)?)),
        _ => Err(Error::Format(format!(
            "{}: not an AMBENC1 or AMBTFE1 file",
            path.display()
        ))),
    }
}
