//! Signal-independent least-squares encoder design.
//!
//! Per frequency and per Ambisonic channel `k`, the row `m_k` minimizes
//!
//! ```text
//! J_k(m) = Σ_d w_d |m h(f,d) − Y_k(d)|² + μ_k ‖m‖²
//! ```
//!
//! with `μ_k` found by bisection so that the row gain `‖m_k‖` (white-noise
//! amplification of the channel filter) stays under the cap. Above the
//! aliasing frequency each row is rescaled so that its diffuse-field energy
//! matches the ideal harmonic, faded in over one third of an octave and
//! limited by the same cap.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::atf::AtfMatrix;
use super::EncodingMatrix;
use crate::error::{Error, Result};
use crate::par;
use crate::scene::geometry::ArrayGeometry;
use crate::sh::{ShConfig, SphereGrid};

pub const DEFAULT_GAIN_CAP_DB: f64 = 15.0;
/// Width of the diffuse-field EQ fade-in, in octaves.
pub const EQ_CROSSFADE_OCTAVES: f64 = 1.0 / 3.0;

const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions {
    pub gain_cap_db: f64,
    /// Diffuse-field EQ is skipped when `None`.
    pub aliasing_hz: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            gain_cap_db: DEFAULT_GAIN_CAP_DB,
            aliasing_hz: None,
        }
    }
}

/// Designed matrix plus the per-bin, per-row regularization and EQ gains that
/// produced it.
#[derive(Debug, Clone)]
pub struct BaselineDesign {
    pub matrix: EncodingMatrix,
    /// `bins × rows` Tikhonov parameters.
    pub regularization: Vec<f64>,
    /// `bins × rows` linear diffuse-field EQ gains (1 where not applied).
    pub eq_gains: Vec<f64>,
}

impl BaselineDesign {
    pub fn max_row_gain_db(&self) -> f64 {
        self.matrix.max_row_gain_db()
    }
}

/// `N·c / (2π r_max)`, with `r_max` the largest microphone distance from the
/// array centroid. A rule of thumb (kr = N), not a sharp limit.
pub fn aliasing_frequency(geometry: &ArrayGeometry, order: usize, speed_of_sound: f64) -> Result<f64> {
    let r = geometry.max_radius();
    if !(r > 1e-9) {
        return Err(Error::InvalidGeometry(
            "all microphones at the centroid; aliasing frequency undefined".into(),
        ));
    }
    Ok(order as f64 * speed_of_sound / (2.0 * std::f64::consts::PI * r))
}

/// Fade-in weight of the diffuse-field EQ at `freq`: 0 at or below the
/// aliasing frequency, 1 from a third octave above, raised cosine in
/// log-frequency between.
pub fn eq_crossfade(freq: f64, aliasing_hz: f64) -> f64 {
    if freq <= aliasing_hz {
        return 0.0;
    }
    let oct = (freq / aliasing_hz).log2() / EQ_CROSSFADE_OCTAVES;
    if oct >= 1.0 {
        1.0
    } else {
        0.5 - 0.5 * (std::f64::consts::PI * oct).cos()
    }
}

/// Per-bin normal equations of the discretized objective.
pub(crate) struct NormalEquations {
    /// `Σ_d w_d h_d h_dᴴ`, `mics × mics`.
    pub gram: DMatrix<Complex64>,
    /// `Σ_d w_d y_d h_dᴴ`, `rows × mics`.
    pub cross: DMatrix<Complex64>,
    /// `Σ_d w_d Y_k(d)²` per row.
    pub target_energy: Vec<f64>,
}

pub(crate) fn normal_equations(atf_bin: &[Complex64], q: usize, sh: &[f64], k: usize, weights: &[f64]) -> NormalEquations {
    let d = weights.len();
    let mut gram = DMatrix::<Complex64>::zeros(q, q);
    let mut cross = DMatrix::<Complex64>::zeros(k, q);
    for a in 0..q {
        let ha = &atf_bin[a * d..(a + 1) * d];
        for b in a..q {
            let hb = &atf_bin[b * d..(b + 1) * d];
            let v: Complex64 = (0..d).map(|i| weights[i] * ha[i] * hb[i].conj()).sum();
            gram[(a, b)] = v;
            gram[(b, a)] = v.conj();
        }
        for r in 0..k {
            let y = &sh[r * d..(r + 1) * d];
            cross[(r, a)] = (0..d).map(|i| weights[i] * y[i] * ha[i].conj()).sum();
        }
    }
    let target_energy = (0..k)
        .map(|r| (0..d).map(|i| weights[i] * sh[r * d + i] * sh[r * d + i]).sum())
        .collect();
    NormalEquations {
        gram,
        cross,
        target_energy,
    }
}

/// Row solutions `m(μ) = c · diag(1/(λ+μ)) · Uᴴ` from the eigendecomposition
/// of the Gram matrix, with `c = b U`.
struct RowSolver {
    eigvals: Vec<f64>,
    eigvecs: DMatrix<Complex64>,
}

impl RowSolver {
    fn new(gram: &DMatrix<Complex64>) -> Self {
        let eig = gram.clone().symmetric_eigen();
        RowSolver {
            eigvals: eig.eigenvalues.iter().map(|v| v.max(0.0)).collect(),
            eigvecs: eig.eigenvectors,
        }
    }

    fn lambda_max(&self) -> f64 {
        self.eigvals.iter().copied().fold(0.0, f64::max)
    }

    fn projected(&self, b: &[Complex64]) -> Vec<Complex64> {
        let q = self.eigvals.len();
        (0..q)
            .map(|i| (0..q).map(|j| b[j] * self.eigvecs[(j, i)]).sum())
            .collect()
    }

    fn gain(&self, c: &[Complex64], mu: f64) -> f64 {
        c.iter()
            .zip(&self.eigvals)
            .map(|(ci, l)| {
                let den = l + mu;
                if den > 0.0 {
                    ci.norm_sqr() / (den * den)
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            .sqrt()
    }

    fn row(&self, c: &[Complex64], mu: f64) -> Vec<Complex64> {
        let q = self.eigvals.len();
        let scaled: Vec<Complex64> = c
            .iter()
            .zip(&self.eigvals)
            .map(|(ci, l)| if l + mu > 0.0 { ci / (l + mu) } else { Complex64::new(0.0, 0.0) })
            .collect();
        (0..q)
            .map(|j| (0..q).map(|i| scaled[i] * self.eigvecs[(j, i)].conj()).sum())
            .collect()
    }

    /// Smallest `μ` keeping the row gain at or below `cap`, to bisection
    /// precision, never below the numerical floor for singular systems.
    fn regularization(&self, c: &[Complex64], cap: f64) -> f64 {
        let lmax = self.lambda_max().max(f64::MIN_POSITIVE);
        let lmin = self.eigvals.iter().copied().fold(f64::INFINITY, f64::min);
        let floor = if lmin > 1e-12 * lmax { 0.0 } else { 1e-10 * lmax };
        if self.gain(c, floor) <= cap {
            return floor;
        }
        let mut hi = lmax;
        while self.gain(c, hi) > cap {
            hi *= 2.0;
        }
        let mut lo = floor.max(1e-14 * lmax);
        for _ in 0..BISECTION_STEPS {
            let mid = (lo * hi).sqrt();
            if self.gain(c, mid) > cap {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo < 1.0 + 1e-12 {
                break;
            }
        }
        hi
    }
}

fn diffuse_energy(row: &[Complex64], gram: &DMatrix<Complex64>) -> f64 {
    let q = row.len();
    let mut e = Complex64::new(0.0, 0.0);
    for a in 0..q {
        for b in 0..q {
            e += row[a] * gram[(a, b)] * row[b].conj();
        }
    }
    e.re.max(0.0)
}

/// Designs the baseline encoder from sampled ATFs. `grid` must be the grid the
/// ATFs were sampled on.
pub fn design_baseline(
    atfs: &AtfMatrix,
    grid: &SphereGrid,
    config: ShConfig,
    options: DesignOptions,
    sample_rate: f64,
    fft_size: usize,
) -> Result<BaselineDesign> {
    if !(options.gain_cap_db > 0.0) || !options.gain_cap_db.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "gain cap must be a positive number of dB, got {}",
            options.gain_cap_db
        )));
    }
    if grid.max_sh_order() < config.order {
        return Err(Error::InvalidConfig(format!(
            "grid exact to degree {} cannot resolve order-{} products",
            grid.exact_degree(),
            config.order
        )));
    }
    if atfs.directions != grid.len() {
        return Err(Error::LengthMismatch {
            what: "ATF directions vs grid",
            left: atfs.directions,
            right: grid.len(),
        });
    }
    let q = atfs.mics;
    let k = config.channels();
    let cap = 10f64.powf(options.gain_cap_db / 20.0);
    let sh = grid.sh_matrix(config);
    let weights = grid.weights();

    struct Bin {
        rows: Vec<Complex64>,
        mu: Vec<f64>,
        eq: Vec<f64>,
    }

    let bins: Vec<Bin> = par::map_range(atfs.bins(), |f| {
        let ne = normal_equations(atfs.bin(f), q, &sh, k, weights);
        let solver = RowSolver::new(&ne.gram);
        let fade = options
            .aliasing_hz
            .map_or(0.0, |fa| eq_crossfade(atfs.freqs[f], fa));
        let mut rows = Vec::with_capacity(k * q);
        let mut mu = Vec::with_capacity(k);
        let mut eq = Vec::with_capacity(k);
        for r in 0..k {
            let b: Vec<Complex64> = (0..q).map(|j| ne.cross[(r, j)]).collect();
            let c = solver.projected(&b);
            let m = solver.regularization(&c, cap);
            let mut row = solver.row(&c, m);
            let mut g = 1.0;
            if fade > 0.0 {
                let energy = diffuse_energy(&row, &ne.gram);
                let norm = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if energy > 0.0 && norm > 0.0 {
                    let full = (ne.target_energy[r] / energy).sqrt();
                    g = full.powf(fade).min(cap / norm);
                    row.iter_mut().for_each(|v| *v *= g);
                }
            }
            rows.extend(row);
            mu.push(m);
            eq.push(g);
        }
        Bin { rows, mu, eq }
    });

    let mut data = Vec::with_capacity(atfs.bins() * k * q);
    let mut regularization = Vec::with_capacity(atfs.bins() * k);
    let mut eq_gains = Vec::with_capacity(atfs.bins() * k);
    for b in bins {
        data.extend(b.rows);
        regularization.extend(b.mu);
        eq_gains.extend(b.eq);
    }
    let matrix = EncodingMatrix::from_vec(atfs.bins(), k, q, data, sample_rate, fft_size)?;
    Ok(BaselineDesign {
        matrix,
        regularization,
        eq_gains,
    })
}

/// Regularized objective `Σ_k [Σ_d w_d |m_k h_d − Y_k(d)|² + μ_k ‖m_k‖²]`
/// of one bin, evaluated directly on the grid.
pub fn regularized_objective(
    matrix_bin: &[Complex64],
    atf_bin: &[Complex64],
    grid: &SphereGrid,
    config: ShConfig,
    mu: &[f64],
) -> f64 {
    let k = config.channels();
    let d = grid.len();
    let q = matrix_bin.len() / k;
    let sh = grid.sh_matrix(config);
    let mut total = 0.0;
    for r in 0..k {
        let row = &matrix_bin[r * q..(r + 1) * q];
        for i in 0..d {
            let est: Complex64 = (0..q).map(|j| row[j] * atf_bin[j * d + i]).sum();
            total += grid.weights()[i] * (est - sh[r * d + i]).norm_sqr();
        }
        total += mu[r] * row.iter().map(|v| v.norm_sqr()).sum::<f64>();
    }
    total
}

/// Grid-weighted mean of `‖M h(d) − y(d)‖²` over directions for one bin,
/// normalized by `4π`.
pub fn encoding_error(matrix_bin: &[Complex64], atf_bin: &[Complex64], grid: &SphereGrid, config: ShConfig) -> f64 {
    let zero = vec![0.0; config.channels()];
    regularized_objective(matrix_bin, atf_bin, grid, config, &zero) / (4.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::atf::array_atfs;
    use crate::sh::sphere_grid;
    use crate::tf::StftConfig;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const C: f64 = 343.0;

    fn tetra_design(aliasing: Option<f64>, grid_degree: usize) -> (AtfMatrix, SphereGrid, BaselineDesign) {
        let grid = sphere_grid(grid_degree).unwrap();
        let cfg = StftConfig::default();
        let atfs = array_atfs(&ArrayGeometry::tetra(), &grid, &cfg.frequencies(), C);
        let d = design_baseline(
            &atfs,
            &grid,
            ShConfig::FIRST_ORDER,
            DesignOptions {
                gain_cap_db: 15.0,
                aliasing_hz: aliasing,
            },
            24_000.0,
            1024,
        )
        .unwrap();
        (atfs, grid, d)
    }

    #[test]
    fn aliasing_frequency_values() {
        let f = aliasing_frequency(&ArrayGeometry::tetra(), 1, C).unwrap();
        assert_abs_diff_eq!(f, 606.56, epsilon = 0.01);
        let f2 = aliasing_frequency(&ArrayGeometry::tetrahedron(0.18), 1, C).unwrap();
        assert_abs_diff_eq!(f2, f / 2.0, epsilon = 1e-9);
        let n2 = aliasing_frequency(&ArrayGeometry::tetra(), 2, C).unwrap();
        assert_eq!(n2, 2.0 * f);
        let single = ArrayGeometry::new("one", vec![[0.0; 3]]).unwrap();
        assert!(aliasing_frequency(&single, 1, C).is_err());
    }

    #[test]
    fn crossfade_shape() {
        assert_eq!(eq_crossfade(500.0, 600.0), 0.0);
        assert_eq!(eq_crossfade(600.0, 600.0), 0.0);
        assert_eq!(eq_crossfade(600.0 * 2f64.powf(1.0 / 3.0) + 1e-6, 600.0), 1.0);
        let mid = eq_crossfade(600.0 * 2f64.powf(1.0 / 6.0), 600.0);
        assert_abs_diff_eq!(mid, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn self_matching_atfs_give_identity() {
        let grid = sphere_grid(4).unwrap();
        let cfg = ShConfig::FIRST_ORDER;
        let sh = grid.sh_matrix(cfg);
        let data: Vec<Complex64> = sh.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let atfs = AtfMatrix::from_vec(vec![1000.0], 4, grid.len(), data).unwrap();
        let d = design_baseline(&atfs, &grid, cfg, DesignOptions::default(), 24_000.0, 1024).unwrap();
        let m = d.matrix.bin(0);
        for i in 0..grid.len() {
            for r in 0..4 {
                let est: Complex64 = (0..4).map(|j| m[r * 4 + j] * sh[j * grid.len() + i]).sum();
                assert_abs_diff_eq!(est.re, sh[r * grid.len() + i], epsilon = 1e-8);
                assert_abs_diff_eq!(est.im, 0.0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn rejects_non_positive_cap() {
        let grid = sphere_grid(2).unwrap();
        let atfs = array_atfs(&ArrayGeometry::tetra(), &grid, &[100.0], C);
        for cap in [0.0, -3.0, f64::NAN] {
            let opts = DesignOptions {
                gain_cap_db: cap,
                aliasing_hz: None,
            };
            assert!(design_baseline(&atfs, &grid, ShConfig::FIRST_ORDER, opts, 24_000.0, 1024).is_err());
        }
    }

    #[test]
    fn gain_cap_holds_for_tetra() {
        let fa = aliasing_frequency(&ArrayGeometry::tetra(), 1, C).unwrap();
        let (_, _, d) = tetra_design(Some(fa), 12);
        assert!(d.max_row_gain_db() <= 15.0 + 0.1, "{}", d.max_row_gain_db());
        // low frequencies need the full cap on the dipoles
        let low = d.matrix.row_gain_db(2, 1);
        assert_abs_diff_eq!(low, 15.0, epsilon = 0.01);
    }

    #[test]
    fn error_lower_in_band_than_above_aliasing() {
        let (atfs, grid, d) = tetra_design(None, 16);
        let cfg = StftConfig::default();
        let bin = |hz: f64| (hz * cfg.fft_size as f64 / cfg.sample_rate as f64).round() as usize;
        let e500 = encoding_error(d.matrix.bin(bin(500.0)), atfs.bin(bin(500.0)), &grid, ShConfig::FIRST_ORDER);
        let e4k = encoding_error(d.matrix.bin(bin(4000.0)), atfs.bin(bin(4000.0)), &grid, ShConfig::FIRST_ORDER);
        assert!(e500 < e4k, "{e500} vs {e4k}");
    }

    #[test]
    fn design_is_locally_optimal() {
        let (atfs, grid, d) = tetra_design(None, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = ShConfig::FIRST_ORDER;
        for f in (3..513).step_by(51) {
            let m = d.matrix.bin(f);
            let mu = &d.regularization[f * 4..f * 4 + 4];
            let j0 = regularized_objective(m, atfs.bin(f), &grid, cfg, mu);
            for _ in 0..10 {
                let p: Vec<Complex64> = m
                    .iter()
                    .map(|v| v + Complex64::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3)))
                    .collect();
                let j1 = regularized_objective(&p, atfs.bin(f), &grid, cfg, mu);
                assert!(j1 >= j0 - 1e-12 * j0.max(1.0), "bin {f}: {j1} < {j0}");
            }
        }
    }

    #[test]
    fn more_regularization_never_raises_gain() {
        let grid = sphere_grid(8).unwrap();
        let atfs = array_atfs(&ArrayGeometry::irregular(), &grid, &[150.0, 900.0, 3000.0], C);
        let sh = grid.sh_matrix(ShConfig::FIRST_ORDER);
        for f in 0..3 {
            let ne = normal_equations(atfs.bin(f), 4, &sh, 4, grid.weights());
            let solver = RowSolver::new(&ne.gram);
            for r in 0..4 {
                let b: Vec<Complex64> = (0..4).map(|j| ne.cross[(r, j)]).collect();
                let c = solver.projected(&b);
                let mut prev = f64::INFINITY;
                for e in -8..4 {
                    let mu = 10f64.powi(e);
                    let row = solver.row(&c, mu);
                    let g = row.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                    assert_abs_diff_eq!(g, solver.gain(&c, mu), epsilon = 1e-9 * g.max(1.0));
                    assert!(g <= prev * (1.0 + 1e-12));
                    prev = g;
                }
            }
        }
    }

    #[test]
    fn diffuse_eq_matches_ideal_energy() {
        let fa = aliasing_frequency(&ArrayGeometry::tetra(), 1, C).unwrap();
        let (atfs, grid, d) = tetra_design(Some(fa), 24);
        let sh = grid.sh_matrix(ShConfig::FIRST_ORDER);
        let full = fa * 2f64.powf(EQ_CROSSFADE_OCTAVES);
        for f in 0..atfs.bins() {
            if atfs.freqs[f] < full {
                continue;
            }
            let ne = normal_equations(atfs.bin(f), 4, &sh, 4, grid.weights());
            let m = d.matrix.bin(f);
            for r in 0..4 {
                let e = diffuse_energy(&m[r * 4..r * 4 + 4], &ne.gram);
                let db = 10.0 * (e / ne.target_energy[r]).log10();
                assert!(db.abs() <= 0.5, "bin {f} row {r}: {db} dB");
            }
        }
    }

    #[test]
    fn single_mic_array_is_handled() {
        let grid = sphere_grid(4).unwrap();
        let geo = ArrayGeometry::new("one", vec![[0.0; 3]]).unwrap();
        let atfs = array_atfs(&geo, &grid, &[0.0, 1000.0], C);
        let d = design_baseline(&atfs, &grid, ShConfig::FIRST_ORDER, DesignOptions::default(), 24_000.0, 1024).unwrap();
        let m = d.matrix.bin(1);
        assert_abs_diff_eq!(m[0].re, 1.0, epsilon = 1e-8);
        for r in 1..4 {
            assert!(m[r].norm() < 1e-8);
        }
        assert!(d.matrix.data().iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }
}
