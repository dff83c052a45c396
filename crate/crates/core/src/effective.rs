//! Steady-state effective Hamiltonian `H_eff = -log(e^{-beta H} T_c)`.
//!
//! The chain is pseudo-Hermitian: with `S = e^{theta sigma_z}` per cell,
//! `H_0 = S^-1 H S` is Hermitian and the steady state is
//! `rho = S e^{-beta H_0} S`. Two independent evaluations are provided: a
//! closed form for the Bloch Hamiltonian and a spectral route that never
//! forms `rho` itself.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diagonal, c64, from_rows, hermitian_part, neg_log_gram, ComplexMatrix, HermitianSpectrum,
    ZERO,
};
use crate::model::{band_gap, bloch_hamiltonian, lattice_hamiltonian, Boundary, ModelParams};

/// Above this value of `beta * Delta_k / 2` the state magnitude is evaluated
/// in logarithmic form.
pub const LOG_DOMAIN_THRESHOLD: f64 = 30.0;

/// `S = diag(e^theta, e^-theta)` per cell, `theta = ln((J + gamma) / (J - gamma)) / 4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub theta: f64,
}

impl SimilarityTransform {
    pub fn cell_diagonal(&self) -> [f64; 2] {
        [self.theta.exp(), (-self.theta).exp()]
    }

    pub fn lattice_diagonal(&self, cells: usize) -> Vec<f64> {
        self.cell_diagonal()
            .into_iter()
            .cycle()
            .take(2 * cells)
            .collect()
    }

    pub fn bloch(&self) -> ComplexMatrix {
        let [a, b] = self.cell_diagonal();
        from_rows(&[[c64::new(a, 0.0), ZERO], [ZERO, c64::new(b, 0.0)]])
    }

    pub fn lattice(&self, cells: usize) -> ComplexMatrix {
        block_diagonal(&self.bloch(), cells)
    }

    /// `S^-1 h S` for a matrix in the same site ordering.
    pub fn conjugate(&self, h: &ComplexMatrix) -> ComplexMatrix {
        let cells = h.nrows() / 2;
        let d = self.lattice_diagonal(cells);
        ComplexMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * (d[j] / d[i]))
    }
}

pub fn hermitianizing_transform(params: &ModelParams) -> Result<SimilarityTransform> {
    params.validate()?;
    let (j, g) = (params.coupling, params.gamma);
    Ok(SimilarityTransform {
        theta: 0.25 * ((j + g) / (j - g)).ln(),
    })
}

/// Positive-definite `T_c` with `H T_c = T_c H^dag`.
#[derive(Debug, Clone)]
pub struct MetricOperator {
    pub matrix: ComplexMatrix,
}

/// `T_c = S^2`, i.e. `diag(sqrt((J + gamma)/(J - gamma)), sqrt((J - gamma)/(J + gamma)))`
/// per cell (Bloch form: one cell).
pub fn metric_operator_model(params: &ModelParams) -> Result<MetricOperator> {
    let s = hermitianizing_transform(params)?;
    let doubled = SimilarityTransform {
        theta: 2.0 * s.theta,
    };
    Ok(MetricOperator {
        matrix: doubled.bloch(),
    })
}

impl MetricOperator {
    pub fn lattice(&self, cells: usize) -> MetricOperator {
        MetricOperator {
            matrix: block_diagonal(&self.matrix, cells),
        }
    }
}

/// `H_eff(k) = W / |A| (A_y sigma_y + A_z sigma_z)`.
#[derive(Debug, Clone)]
pub struct EffectiveBloch {
    pub matrix: ComplexMatrix,
    /// `W(k) >= 0`, half the splitting of the two effective levels.
    pub magnitude: f64,
    pub a_y: f64,
    pub a_z: f64,
}

impl EffectiveBloch {
    fn from_components(magnitude: f64, a_y: f64, a_z: f64, k: f64) -> Result<Self> {
        let norm = a_y.hypot(a_z);
        if norm == 0.0 {
            return Err(Error::Degenerate { k });
        }
        let c = magnitude / norm;
        let matrix = from_rows(&[
            [c64::new(c * a_z, 0.0), c64::new(0.0, -c * a_y)],
            [c64::new(0.0, c * a_y), c64::new(-c * a_z, 0.0)],
        ]);
        Ok(Self {
            matrix,
            magnitude,
            a_y,
            a_z,
        })
    }

    fn from_matrix(matrix: ComplexMatrix) -> Self {
        let a_z = 0.5 * (matrix[(0, 0)].re - matrix[(1, 1)].re);
        let a_y = matrix[(1, 0)].im;
        let a_x = matrix[(1, 0)].re;
        Self {
            magnitude: (a_x * a_x + a_y * a_y + a_z * a_z).sqrt(),
            matrix,
            a_y,
            a_z,
        }
    }

    /// Full effective splitting `2 W`.
    pub fn gap(&self) -> f64 {
        2.0 * self.magnitude
    }
}

fn require_closed_form(params: &ModelParams) -> Result<()> {
    params.validate()?;
    if params.sin_offset != 0.0 {
        return Err(Error::InvalidParams(
            "closed form covers the reciprocal chain only (sin_offset = 0)".into(),
        ));
    }
    Ok(())
}

fn require_beta(params: &ModelParams) -> Result<f64> {
    params.beta().ok_or_else(|| {
        Error::InvalidParams("finite temperature required (use the zero-temperature form)".into())
    })
}

/// Pieces of the closed form shared by the finite- and zero-temperature paths.
struct BandGeometry {
    coupling: f64,
    gamma: f64,
    /// `U - t cos k`.
    mass: f64,
    /// `(J^2 - gamma^2) sin^2 k`.
    transverse_sq: f64,
    /// `Delta_k / 2`.
    half_gap: f64,
}

impl BandGeometry {
    fn new(params: &ModelParams, k: f64) -> Result<Self> {
        let s = k.sin();
        Ok(Self {
            coupling: params.coupling,
            gamma: params.gamma,
            mass: params.onsite - params.hopping * k.cos(),
            transverse_sq: params.coupling_product() * s * s,
            half_gap: 0.5 * band_gap(params, k)?,
        })
    }

    /// `1 - |mass| / half_gap` without cancellation.
    fn one_minus_abs_ratio(&self) -> f64 {
        self.transverse_sq / ((self.half_gap + self.mass.abs()) * self.half_gap)
    }

    /// `(J - gamma m, J + gamma m)` with `m = mass / half_gap`.
    fn split_couplings(&self) -> (f64, f64) {
        let (j, g) = (self.coupling, self.gamma);
        let m = self.mass / self.half_gap;
        let close = (j - g.abs()) + g.abs() * self.one_minus_abs_ratio();
        let far = j + (g * m).abs();
        if g * m > 0.0 {
            (close, far)
        } else {
            (far, close)
        }
    }

    fn reduced_coupling(&self) -> f64 {
        ((self.coupling - self.gamma) * (self.coupling + self.gamma)).sqrt()
    }

    /// `W` from `cosh W = [J cosh b + 2 gamma (t cos k - U) sinh(b) / Delta] / r`.
    fn magnitude(&self, beta: f64) -> f64 {
        let b = beta * self.half_gap;
        if b > LOG_DOMAIN_THRESHOLD {
            self.magnitude_log_domain(b)
        } else {
            self.magnitude_direct(beta, b)
        }
    }

    fn magnitude_direct(&self, beta: f64, b: f64) -> f64 {
        let sinhc = if b > 1e-8 { b.sinh() / b } else { 1.0 };
        let x = (self.coupling * b.cosh() - self.gamma * self.mass * beta * sinhc)
            / self.reduced_coupling();
        x.max(1.0).acosh()
    }

    fn magnitude_log_domain(&self, b: f64) -> f64 {
        let (minus, plus) = self.split_couplings();
        let ln_x = b
            + (minus / (2.0 * self.reduced_coupling())).ln()
            + ((-2.0 * b).exp() * plus / minus).ln_1p();
        ln_x + (1.0 + (1.0 - (-2.0 * ln_x).exp()).max(0.0).sqrt()).ln()
    }

    /// `A_z = U - t cos k - (gamma / 2J) Delta coth(b)`.
    fn a_z(&self, beta: f64) -> f64 {
        let b = beta * self.half_gap;
        let (j, g, mass) = (self.coupling, self.gamma, self.mass);
        // half_gap * coth(b) and half_gap * (coth(b) - 1), both finite as b -> 0.
        let (gap_coth, gap_coth_excess) = if b > 1e-8 {
            (b / b.tanh() / beta, 2.0 * b / (2.0 * b).exp_m1() / beta)
        } else {
            (1.0 / beta, 1.0 / beta)
        };
        if mass * g > 0.0 {
            let (am, ag) = (mass.abs(), g.abs());
            let mass_minus_gap = -self.transverse_sq / (am + self.half_gap);
            let value = am * (j - ag) / j + ag / j * mass_minus_gap - ag / j * gap_coth_excess;
            mass.signum() * value
        } else {
            mass - g / j * gap_coth
        }
    }

    fn a_z_ground(&self) -> f64 {
        let (j, g, mass) = (self.coupling, self.gamma, self.mass);
        if mass * g > 0.0 {
            let (am, ag) = (mass.abs(), g.abs());
            let mass_minus_gap = -self.transverse_sq / (am + self.half_gap);
            mass.signum() * (am * (j - ag) / j + ag / j * mass_minus_gap)
        } else {
            mass - g / j * self.half_gap
        }
    }

    fn a_y(&self, k: f64) -> f64 {
        let (j, g) = (self.coupling, self.gamma);
        k.sin() * (j - g) * (j + g) / j
    }
}

pub fn effective_bloch_closed_form(params: &ModelParams, k: f64) -> Result<EffectiveBloch> {
    require_closed_form(params)?;
    let beta = require_beta(params)?;
    let geometry = BandGeometry::new(params, k)?;
    EffectiveBloch::from_components(
        geometry.magnitude(beta),
        geometry.a_y(k),
        geometry.a_z(beta),
        k,
    )
}

/// `lim_{T -> 0} T H_eff(k)`: same eigenvectors as the finite-temperature
/// state at vanishing temperature, with energies rescaled to stay finite.
pub fn effective_bloch_zero_temperature(params: &ModelParams, k: f64) -> Result<EffectiveBloch> {
    require_closed_form(params)?;
    let geometry = BandGeometry::new(params, k)?;
    EffectiveBloch::from_components(geometry.half_gap, geometry.a_y(k), geometry.a_z_ground(), k)
}

/// Square root of the metric used to build `rho = R e^{-beta H_0} R^dag`.
pub enum MetricRoot<'a> {
    Diagonal(&'a [f64]),
    Dense(&'a ComplexMatrix),
}

/// Spectrum of `-log(R e^{-beta H_0} R^dag)` for Hermitian `H_0`.
///
/// Uses `rho = e^{-beta E_min} B B^dag` with
/// `B = R V e^{-beta (Lambda - E_min) / 2}`, so no entry of `B` exceeds the
/// norm of `R` and `rho` is never formed.
pub fn thermal_log_spectrum(
    h0: &ComplexMatrix,
    root: MetricRoot<'_>,
    beta: f64,
) -> Result<HermitianSpectrum> {
    let spectrum = HermitianSpectrum::of(h0)?;
    let n = spectrum.dim();
    let e_min = spectrum.values[0];
    let weights: Vec<f64> = spectrum
        .values
        .iter()
        .map(|e| (-0.5 * beta * (e - e_min)).exp())
        .collect();
    let scaled = ComplexMatrix::from_fn(n, n, |i, j| spectrum.vectors[(i, j)] * weights[j]);
    let b = match root {
        MetricRoot::Diagonal(d) => {
            if d.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "metric root has {} entries, matrix has {n} rows",
                    d.len()
                )));
            }
            ComplexMatrix::from_fn(n, n, |i, j| scaled[(i, j)] * d[i])
        }
        MetricRoot::Dense(r) => {
            if r.ncols() != n || r.nrows() != n {
                return Err(Error::DimensionMismatch("metric root shape".into()));
            }
            r * &scaled
        }
    };
    let mut out = neg_log_gram(&b)?;
    out.values.iter_mut().for_each(|v| *v += beta * e_min);
    Ok(out)
}

pub fn effective_bloch_via_log(params: &ModelParams, k: f64) -> Result<EffectiveBloch> {
    params.validate()?;
    let beta = require_beta(params)?;
    let s = hermitianizing_transform(params)?;
    let h0 = s.conjugate(&bloch_hamiltonian(params, k));
    let d = s.cell_diagonal();
    let spectrum = thermal_log_spectrum(&h0, MetricRoot::Diagonal(&d), beta)?;
    Ok(EffectiveBloch::from_matrix(hermitian_part(
        &spectrum.reconstruct(),
    )))
}

/// Eigenvalues and eigenvectors of the lattice `H_eff`, energies ascending.
pub fn effective_lattice_spectrum(params: &ModelParams, bc: Boundary) -> Result<HermitianSpectrum> {
    let beta = require_beta(params)?;
    let s = hermitianizing_transform(params)?;
    let h0 = s.conjugate(&lattice_hamiltonian(params, bc)?);
    let d = s.lattice_diagonal(params.cells);
    thermal_log_spectrum(&h0, MetricRoot::Diagonal(&d), beta)
}

pub fn effective_lattice(params: &ModelParams, bc: Boundary) -> Result<ComplexMatrix> {
    Ok(hermitian_part(
        &effective_lattice_spectrum(params, bc)?.reconstruct(),
    ))
}

/// `U_c(-/+) = (T/2) ln((J + gamma)/(J - gamma)) -/+ t`.
pub fn critical_points(params: &ModelParams) -> (f64, f64) {
    let (j, g) = (params.coupling, params.gamma);
    let centre = 0.5 * params.temperature * ((j + g) / (j - g)).ln();
    (centre - params.hopping, centre + params.hopping)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    /// `n_a + n_b` for each cell.
    pub per_cell: Vec<f64>,
    pub particles: usize,
}

/// Lowest-`N` filling of the effective single-particle levels.
pub fn density_profile(
    params: &ModelParams,
    bc: Boundary,
    particles: usize,
) -> Result<DensityProfile> {
    params.validate()?;
    let sites = 2 * params.cells;
    if particles > sites {
        return Err(Error::InvalidParams(format!(
            "{particles} particles do not fit on {sites} sites"
        )));
    }
    let spectrum = effective_lattice_spectrum(params, bc)?;
    if particles > 0 && particles < sites {
        let (lower, upper) = (spectrum.values[particles - 1], spectrum.values[particles]);
        if upper - lower < 1e-10 {
            return Err(Error::DegenerateFilling {
                lower,
                upper,
                splitting: upper - lower,
            });
        }
    }
    let v = &spectrum.vectors;
    let per_cell = (0..params.cells)
        .map(|c| {
            (0..particles)
                .map(|m| v[(2 * c, m)].norm_sqr() + v[(2 * c + 1, m)].norm_sqr())
                .sum()
        })
        .collect();
    Ok(DensityProfile {
        per_cell,
        particles,
    })
}

/// Default number of cells summed at each edge: `max(5, L / 10)`.
///
/// The boundary modes of the chain decay over tens of cells, so a fixed
/// five-cell window captures only a fraction of their weight on long chains.
pub fn default_edge_window(cells: usize) -> usize {
    (cells / 10).max(5)
}

pub fn edge_accumulation(profile: &DensityProfile) -> f64 {
    edge_accumulation_with_window(profile, default_edge_window(profile.per_cell.len()))
}

/// Excess over the mean filling `N / L`, summed over `window` cells at each edge.
pub fn edge_accumulation_with_window(profile: &DensityProfile, window: usize) -> f64 {
    let cells = profile.per_cell.len();
    if cells == 0 {
        return 0.0;
    }
    let window = window.min(cells / 2);
    let mean = profile.particles as f64 / cells as f64;
    let left = profile.per_cell[..window].iter();
    let right = profile.per_cell[cells - window..].iter();
    left.chain(right).map(|n| n - mean).sum()
}
