use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scene::geometry::{dot, ArrayGeometry};
use crate::sh::SphereGrid;

/// Array transfer functions sampled on a sphere grid: for every frequency a
/// `mics × directions` complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AtfMatrix {
    pub freqs: Vec<f64>,
    pub mics: usize,
    pub directions: usize,
    data: Vec<Complex64>,
}

impl AtfMatrix {
    pub fn from_vec(freqs: Vec<f64>, mics: usize, directions: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != freqs.len() * mics * directions {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}x{}", freqs.len(), mics, directions),
                actual: format!("{} values", data.len()),
            });
        }
        Ok(AtfMatrix {
            freqs,
            mics,
            directions,
            data,
        })
    }

    pub fn bins(&self) -> usize {
        self.freqs.len()
    }

    /// `mics × directions` block of bin `f`.
    pub fn bin(&self, f: usize) -> &[Complex64] {
        let n = self.mics * self.directions;
        &self.data[f * n..(f + 1) * n]
    }

    pub fn get(&self, f: usize, mic: usize, dir: usize) -> Complex64 {
        self.bin(f)[mic * self.directions + dir]
    }
}

/// Open array of ideal omnidirectional microphones under plane-wave
/// incidence: `h_q(f, d) = exp(+i 2πf/c ⟨r_q, u_d⟩)`.
pub fn array_atfs(
    geometry: &ArrayGeometry,
    grid: &SphereGrid,
    freqs: &[f64],
    speed_of_sound: f64,
) -> AtfMatrix {
    let q = geometry.len();
    let d = grid.len();
    // projections ⟨r_q, u_d⟩ are frequency independent
    let proj: Vec<f64> = geometry
        .positions
        .iter()
        .flat_map(|r| grid.directions().iter().map(move |dir| dot(*r, dir.unit_vector())))
        .collect();
    let mut data = Vec::with_capacity(freqs.len() * q * d);
    for f in freqs {
        let k = 2.0 * PI * f / speed_of_sound;
        data.extend(proj.iter().map(|p| Complex64::from_polar(1.0, k * p)));
    }
    AtfMatrix {
        freqs: freqs.to_vec(),
        mics: q,
        directions: d,
        data,
    }
}
