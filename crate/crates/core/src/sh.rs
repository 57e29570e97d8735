//! Real spherical harmonics (ACN channel order, N3D normalization, no
//! Condon-Shortley phase), product-Gauss spherical quadrature and the point-source
//! spherical harmonic transform.
//!
//! With N3D every harmonic integrates to `∫ Y² dΩ = 4π`, so `Y₀₀ ≡ 1` and the
//! first-order dipoles peak at `√3`. Multiply order-`n` channels by
//! [`n3d_to_sn3d`] to obtain ambiX (SN3D) signals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A direction on the unit sphere. Azimuth is counterclockwise from +x in
/// `[-π, π)`, elevation is measured from the horizontal plane in `[-π/2, π/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    /// Builds a direction, wrapping azimuth into `[-π, π)`. Elevation outside
    /// `[-π/2, π/2]` is rejected.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !azimuth.is_finite() || !elevation.is_finite() {
            return Err(Error::InvalidConfig("non-finite direction".into()));
        }
        if elevation.abs() > PI / 2.0 + 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "elevation {elevation} outside [-π/2, π/2]"
            )));
        }
        Ok(Direction {
            azimuth: wrap_azimuth(azimuth),
            elevation: elevation.clamp(-PI / 2.0, PI / 2.0),
        })
    }

    /// Direction of a nonzero vector.
    pub fn from_vector(v: [f64; 3]) -> Result<Self> {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if !(r > 0.0) {
            return Err(Error::InvalidGeometry("zero-length direction vector".into()));
        }
        let azimuth = v[1].atan2(v[0]);
        let elevation = (v[2] / r).clamp(-1.0, 1.0).asin();
        Direction::new(azimuth, elevation)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [ce * ca, ce * sa, se]
    }
}

fn wrap_azimuth(az: f64) -> f64 {
    let w = (az + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w - 2.0 * PI
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShConfig {
    pub order: usize,
}

impl ShConfig {
    pub const FIRST_ORDER: ShConfig = ShConfig { order: 1 };

    pub fn new(order: usize) -> Self {
        ShConfig { order }
    }

    pub fn channels(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }
}

impl Default for ShConfig {
    fn default() -> Self {
        Self::FIRST_ORDER
    }
}

/// ACN channel index of harmonic `(n, m)`.
pub fn acn(n: usize, m: i64) -> usize {
    ((n * n + n) as i64 + m) as usize
}

/// Inverse of [`acn`].
pub fn acn_to_nm(index: usize) -> (usize, i64) {
    let n = (index as f64).sqrt().floor() as usize;
    let n = if (n + 1) * (n + 1) <= index { n + 1 } else { n };
    (n, index as i64 - (n * n + n) as i64)
}

/// Scale factor taking an order-`n` N3D channel to SN3D.
pub fn n3d_to_sn3d(n: usize) -> f64 {
    1.0 / ((2 * n + 1) as f64).sqrt()
}

/// Real SH values, ACN ordered, length `(N+1)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShVector(pub Vec<f64>);

impl ShVector {
    pub fn zeros(config: ShConfig) -> Self {
        ShVector(vec![0.0; config.channels()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for ShVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Evaluates all real spherical harmonics up to `config.order` at `dir`.
pub fn eval_real_sh(dir: Direction, config: ShConfig) -> ShVector {
    let mut out = vec![0.0; config.channels()];
    eval_real_sh_into(dir, config.order, &mut out);
    ShVector(out)
}

pub(crate) fn eval_real_sh_into(dir: Direction, order: usize, out: &mut [f64]) {
    let x = dir.elevation.sin();
    let s = dir.elevation.cos().max(0.0);
    let legendre = associated_legendre(order, x, s);
    for n in 0..=order {
        for m in 0..=n {
            let p = legendre[n * (n + 1) / 2 + m];
            let norm = n3d_norm(n, m);
            if m == 0 {
                out[n * n + n] = norm * p;
            } else {
                let (sm, cm) = (m as f64 * dir.azimuth).sin_cos();
                out[n * n + n + m] = norm * p * cm;
                out[n * n + n - m] = norm * p * sm;
            }
        }
    }
}

/// `P_n^m(x)` for `0 ≤ m ≤ n ≤ order` without the Condon-Shortley phase,
/// packed triangularly at `n(n+1)/2 + m`. `s` is `sqrt(1 - x²)`.
fn associated_legendre(order: usize, x: f64, s: f64) -> Vec<f64> {
    let idx = |n: usize, m: usize| n * (n + 1) / 2 + m;
    let mut p = vec![0.0; (order + 1) * (order + 2) / 2];
    p[0] = 1.0;
    for m in 0..=order {
        if m > 0 {
            p[idx(m, m)] = p[idx(m - 1, m - 1)] * (2 * m - 1) as f64 * s;
        }
        if m < order {
            p[idx(m + 1, m)] = x * (2 * m + 1) as f64 * p[idx(m, m)];
        }
        for n in (m + 2)..=order {
            p[idx(n, m)] = ((2 * n - 1) as f64 * x * p[idx(n - 1, m)]
                - (n + m - 1) as f64 * p[idx(n - 2, m)])
                / (n - m) as f64;
        }
    }
    p
}

fn n3d_norm(n: usize, m: usize) -> f64 {
    // (n-m)!/(n+m)! as a running product to stay finite for larger orders
    let mut ratio = 1.0;
    for k in (n - m + 1)..=(n + m) {
        ratio /= k as f64;
    }
    let delta = if m == 0 { 1.0 } else { 2.0 };
    ((2 * n + 1) as f64 * delta * ratio).sqrt()
}

/// A spherical quadrature rule. Weights are positive and sum to 4π.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    directions: Vec<Direction>,
    weights: Vec<f64>,
    exact_degree: usize,
}

pub const MIN_GRID_DEGREE: usize = 1;
pub const MAX_GRID_DEGREE: usize = 64;

impl SphereGrid {
    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Highest spherical polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    /// Highest SH order whose pairwise products this grid integrates exactly.
    pub fn max_sh_order(&self) -> usize {
        self.exact_degree / 2
    }

    /// `Σ_k w_k f(d_k)`.
    pub fn integrate(&self, f: impl Fn(Direction) -> f64) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * f(*d))
            .sum()
    }

    /// SH matrix sampled on the grid, row-major `channels × len`.
    pub fn sh_matrix(&self, config: ShConfig) -> Vec<f64> {
        let k = config.channels();
        let d = self.len();
        let mut out = vec![0.0; k * d];
        let mut buf = vec![0.0; k];
        for (j, dir) in self.directions.iter().enumerate() {
            eval_real_sh_into(*dir, config.order, &mut buf);
            for (i, v) in buf.iter().enumerate() {
                out[i * d + j] = *v;
            }
        }
        out
    }
}

/// Gauss-Legendre (in sin elevation) × equiangular azimuth product grid,
/// exact for spherical polynomials up to degree `2 * min_degree`.
pub fn sphere_grid(min_degree: usize) -> Result<SphereGrid> {
    if !(MIN_GRID_DEGREE..=MAX_GRID_DEGREE).contains(&min_degree) {
        return Err(Error::UnsupportedDegree {
            requested: min_degree,
            min: MIN_GRID_DEGREE,
            max: MAX_GRID_DEGREE,
        });
    }
    let exact = 2 * min_degree;
    let n_el = min_degree + 1;
    let n_az = exact + 1;
    let (nodes, gl_weights) = gauss_legendre(n_el);
    let az_weight = 2.0 * PI / n_az as f64;

    let mut directions = Vec::with_capacity(n_el * n_az);
    let mut weights = Vec::with_capacity(n_el * n_az);
    for (x, w) in nodes.iter().zip(&gl_weights) {
        let el = x.asin();
        for j in 0..n_az {
            let az = -PI + 2.0 * PI * j as f64 / n_az as f64;
            directions.push(Direction::new(az, el)?);
            weights.push(w * az_weight);
        }
    }
    Ok(SphereGrid {
        directions,
        weights,
        exact_degree: exact,
    })
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `Σ_i amplitudes[i] · y_N(dirs[i])`.
pub fn sht_point_sources(
    amplitudes: &[f64],
    dirs: &[Direction],
    config: ShConfig,
) -> Result<ShVector> {
    if amplitudes.len() != dirs.len() {
        return Err(Error::LengthMismatch {
            what: "amplitudes vs directions",
            left: amplitudes.len(),
            right: dirs.len(),
        });
    }
    let mut acc = vec![0.0; config.channels()];
    let mut buf = vec![0.0; config.channels()];
    for (a, d) in amplitudes.iter().zip(dirs) {
        eval_real_sh_into(*d, config.order, &mut buf);
        for (o, y) in acc.iter_mut().zip(&buf) {
            *o += a * y;
        }
    }
    Ok(ShVector(acc))
}
