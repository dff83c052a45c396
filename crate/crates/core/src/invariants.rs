//! Band and state winding numbers, open-chain zero modes and the phase map.
//!
//! The winding of a chiral family is the phase accumulated by
//! `det <-|Q(k)|+>` around the Brillouin zone, where `|+->` span the
//! eigenspaces of the chiral operator and `Q = 1 - 2 P` flattens `H` onto the
//! orthogonal projector `P` of its `Re E < 0` eigenvectors. For Hermitian `H`
//! this is `sign(H)` and the result equals
//! `(1 / 4 pi i) int tr Gamma H^-1 dH/dk`. For non-Hermitian families the
//! trace integral is not quantized, while the flattened winding stays integral
//! and changes only where the line gap closes.

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::effective::{
    critical_points, effective_bloch_closed_form, effective_bloch_zero_temperature,
    effective_lattice_spectrum, EffectiveBloch,
};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, eigenvalues, identity, inverse, max_abs, BiorthogonalDecomposition, ComplexMatrix,
    HermitianSpectrum, I, ONE,
};
use crate::model::{bloch_vector, gap_closing_points, lattice_hamiltonian, Boundary, ModelParams};
use crate::sweep::{map_ordered, Execution};
use crate::symmetry::{operator_square, OperatorSquare, SymmetryOp};

pub const DEFAULT_GRID: usize = 2001;
pub const GAP_THRESHOLD: f64 = 1e-12;
pub const CHIRAL_THRESHOLD: f64 = 1e-8;
pub const BOUNDARY_DISTANCE: f64 = 1e-9;
pub const DEFAULT_ZERO_MODE_FRACTION: f64 = 1e-3;

const REFINEMENT_FACTOR: usize = 4;
const MAX_REFINEMENTS: usize = 2;
const MAX_PHASE_STEP: f64 = PI / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingResult {
    pub value: i64,
    /// Accumulated phase over `2 pi` before rounding.
    pub raw: f64,
    /// Grid actually used, after any refinement.
    pub grid_size: usize,
}

/// `det q(k)` on the loop together with the gap indicator `|det H(k)|`.
struct LoopSample {
    phase: c64,
    det_abs: f64,
}

fn grid(size: usize) -> impl Iterator<Item = f64> {
    (0..size).map(move |i| -PI + 2.0 * PI * i as f64 / size as f64)
}

fn accumulate<F>(grid_size: usize, sample: F) -> Result<WindingResult>
where
    F: Fn(f64) -> Result<LoopSample>,
{
    if grid_size < 3 {
        return Err(Error::InvalidParams(format!(
            "grid of {grid_size} points is too coarse"
        )));
    }
    let mut size = grid_size;
    for _ in 0..=MAX_REFINEMENTS {
        let samples = grid(size).map(&sample).collect::<Result<Vec<_>>>()?;
        let min_det = samples
            .iter()
            .map(|s| s.det_abs)
            .fold(f64::INFINITY, f64::min);
        if min_det < GAP_THRESHOLD {
            return Err(Error::GapClosed { min_det });
        }
        let steps: Vec<f64> = samples
            .iter()
            .zip(samples.iter().cycle().skip(1))
            .map(|(a, b)| (b.phase * a.phase.conj()).arg())
            .collect();
        if steps.iter().all(|d| d.abs() < MAX_PHASE_STEP) {
            let raw = steps.iter().sum::<f64>() / (2.0 * PI);
            return Ok(WindingResult {
                value: raw.round() as i64,
                raw,
                grid_size: size,
            });
        }
        size *= REFINEMENT_FACTOR;
    }
    Err(Error::UnresolvedPhase {
        grid_size: size / REFINEMENT_FACTOR,
    })
}

/// Orthonormal bases of the `-1` and `+1` eigenspaces of a chiral operator.
struct ChiralBasis {
    minus: ComplexMatrix,
    plus: ComplexMatrix,
    operator: ComplexMatrix,
}

impl ChiralBasis {
    fn new(op: &SymmetryOp) -> Result<Self> {
        if op.antiunitary || operator_square(op)? != OperatorSquare::Plus {
            return Err(Error::InvalidParams(
                "chiral operator must be unitary with square +1".into(),
            ));
        }
        let n = op.unitary.nrows();
        let spectrum = HermitianSpectrum::of(&op.unitary)?;
        let negatives = spectrum.values.iter().filter(|v| **v < 0.0).count();
        if 2 * negatives != n {
            return Err(Error::InvalidParams(
                "chiral operator eigenspaces must have equal dimension".into(),
            ));
        }
        let half = n / 2;
        Ok(Self {
            minus: spectrum.vectors.subcols(0, half).to_owned(),
            plus: spectrum.vectors.subcols(half, half).to_owned(),
            operator: op.unitary.clone(),
        })
    }

    fn dim(&self) -> usize {
        self.operator.nrows()
    }

    /// `|| Gamma H^dag Gamma^-1 + H ||` relative to `max(1, ||H||)`.
    fn residual(&self, h: &ComplexMatrix) -> f64 {
        let g = &self.operator;
        let defect = g * h.adjoint() * g.adjoint() + h;
        max_abs(defect.as_ref()) / max_abs(h.as_ref()).max(1.0)
    }

    fn block_det(&self, q: &ComplexMatrix) -> c64 {
        (self.minus.adjoint() * q * &self.plus).determinant()
    }
}

/// Eigenvector of `[[z, b], [c, -z]]` for its eigenvalue with negative real
/// part; `None` when both eigenvalues sit on the imaginary axis.
fn lower_eigenvector_2x2(z: c64, b: c64, c: c64) -> Option<[c64; 2]> {
    let lambda = (z * z + b * c).sqrt();
    if lambda.re <= 0.0 {
        return None;
    }
    // Both candidates span the kernel of H + lambda; keep the better scaled one.
    let first = [b, -(z + lambda)];
    let second = [lambda - z, -c];
    let norm = |v: &[c64; 2]| v[0].norm_sqr() + v[1].norm_sqr();
    Some(if norm(&first) >= norm(&second) {
        first
    } else {
        second
    })
}

/// `<-|1 - 2P|+>` in the `sigma_x` eigenbasis `(1, +-1) / sqrt 2`, up to a
/// positive factor.
fn sigma_x_block(v: [c64; 2]) -> c64 {
    -(v[0] - v[1]) * (v[0] + v[1]).conj()
}

/// `1 - 2 P` for the `Re E < 0` eigenvectors of a traceless 2x2 matrix.
fn flatten_2x2(h: &ComplexMatrix) -> Option<ComplexMatrix> {
    let (a, b, c, d) = (h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
    let scale = max_abs(h.as_ref());
    if (a + d).norm() > 1e-14 * scale {
        return None;
    }
    let v = lower_eigenvector_2x2((a - d) * 0.5, b, c)?;
    let n = v[0].norm_sqr() + v[1].norm_sqr();
    Some(ComplexMatrix::from_fn(2, 2, |i, j| {
        let delta = if i == j { ONE } else { c64::new(0.0, 0.0) };
        delta - v[i] * v[j].conj() * (2.0 / n)
    }))
}

fn flatten(h: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let n = h.nrows();
    if n == 2 {
        let det_abs = (h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)]).norm();
        if let Some(q) = flatten_2x2(h) {
            return Ok((q, det_abs));
        }
        if det_abs < GAP_THRESHOLD {
            return Err(Error::GapClosed { min_det: det_abs });
        }
    }
    let decomposition = BiorthogonalDecomposition::new(h, 1e-12)?;
    let det_abs: f64 = decomposition.eigenvalues.iter().map(|e| e.norm()).product();
    let lower: Vec<usize> = (0..n)
        .filter(|&m| decomposition.eigenvalues[m].re < 0.0)
        .collect();
    if 2 * lower.len() != n {
        return Err(Error::GapClosed { min_det: det_abs });
    }
    let r = ComplexMatrix::from_fn(n, lower.len(), |i, j| decomposition.right[(i, lower[j])]);
    let gram = r.adjoint() * &r;
    let projector = &r * inverse(&gram) * r.adjoint();
    Ok((identity(n) - projector * 2.0, det_abs))
}

/// Winding of a chiral Bloch family `k -> H(k)` around `[-pi, pi)`.
pub fn winding_number<F>(
    hamiltonian: F,
    chiral: &SymmetryOp,
    grid_size: usize,
) -> Result<WindingResult>
where
    F: Fn(f64) -> Result<ComplexMatrix>,
{
    let basis = ChiralBasis::new(chiral)?;
    accumulate(grid_size, |k| {
        let h = hamiltonian(k)?;
        if h.nrows() != basis.dim() || h.ncols() != basis.dim() {
            return Err(Error::DimensionMismatch(format!(
                "chiral operator is {0}x{0}, H(k) is {1}x{2}",
                basis.dim(),
                h.nrows(),
                h.ncols()
            )));
        }
        let residual = basis.residual(&h);
        if residual > CHIRAL_THRESHOLD {
            return Err(Error::NotChiral { residual });
        }
        let (q, det_abs) = flatten(&h)?;
        Ok(LoopSample {
            phase: basis.block_det(&q),
            det_abs,
        })
    })
}

/// `W` from the Bloch Hamiltonian.
///
/// Same loop as `winding_number` with `Gamma = sigma_x`, evaluated on the
/// Bloch vector directly; the chiral relation holds by construction.
pub fn band_invariant(params: &ModelParams, grid_size: usize) -> Result<WindingResult> {
    params.validate()?;
    accumulate(grid_size, |k| {
        let [x, y, z] = bloch_vector(params, k);
        let (b, c) = (x - I * y, x + I * y);
        let det_abs = (z * z + b * c).norm();
        let v = lower_eigenvector_2x2(z, b, c).ok_or(Error::GapClosed { min_det: det_abs })?;
        Ok(LoopSample {
            phase: sigma_x_block(v),
            det_abs,
        })
    })
}

/// `w` from the closed-form effective Hamiltonian; `T = 0` uses the
/// zero-temperature limit.
///
/// The loop is fed the unit-normalized family `H_eff / W(k)`, since the
/// entries of `H_eff` grow like `beta`; the gap test uses `W(k)^2 = |det H_eff|`.
pub fn state_invariant(params: &ModelParams, grid_size: usize) -> Result<WindingResult> {
    params.validate()?;
    let effective = |k: f64| -> Result<EffectiveBloch> {
        let result = if params.temperature > 0.0 {
            effective_bloch_closed_form(params, k)
        } else {
            effective_bloch_zero_temperature(params, k)
        };
        result.map_err(|e| match e {
            Error::Degenerate { .. } => Error::GapClosed { min_det: 0.0 },
            other => other,
        })
    };
    accumulate(grid_size, |k| {
        let h = effective(k)?;
        // sign(H_eff) = (A_y sigma_y + A_z sigma_z) / |A|, whose sigma_x
        // off-diagonal block is (A_z - i A_y) / |A|.
        Ok(LoopSample {
            phase: c64::new(h.a_z, -h.a_y),
            det_abs: h.magnitude * h.magnitude,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroModes {
    pub count: usize,
    pub energies: Vec<[f64; 2]>,
}

pub fn zero_modes(spectrum: &[c64], tol_abs: f64) -> ZeroModes {
    let energies: Vec<[f64; 2]> = spectrum
        .iter()
        .filter(|e| e.norm() < tol_abs)
        .map(|e| [e.re, e.im])
        .collect();
    ZeroModes {
        count: energies.len(),
        energies,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumKind {
    Bands,
    Effective,
}

impl std::str::FromStr for SpectrumKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bands" | "nh" => Ok(Self::Bands),
            "effective" | "eff" => Ok(Self::Effective),
            other => Err(Error::InvalidParams(format!(
                "unknown spectrum kind '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Zero-mode threshold as a fraction of the spectral scale: the spectral
    /// radius for `H_NH`, the bandwidth for `H_eff`.
    pub zero_mode_fraction: f64,
    pub execution: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            zero_mode_fraction: DEFAULT_ZERO_MODE_FRACTION,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumScan {
    pub u_values: Vec<f64>,
    pub eigenvalues: Vec<Vec<c64>>,
    pub zero_mode_count: Vec<usize>,
    pub zero_mode_tol: Vec<f64>,
}

/// Spectrum with its zero-mode scale.
pub fn lattice_spectrum(
    params: &ModelParams,
    bc: Boundary,
    kind: SpectrumKind,
) -> Result<(Vec<c64>, f64)> {
    match kind {
        SpectrumKind::Bands => {
            let values = eigenvalues(&lattice_hamiltonian(params, bc)?)?;
            let radius = values.iter().map(|e| e.norm()).fold(0.0, f64::max);
            Ok((values, radius))
        }
        SpectrumKind::Effective => {
            let spectrum = effective_lattice_spectrum(params, bc)?;
            let width = spectrum.values.last().copied().unwrap_or(0.0)
                - spectrum.values.first().copied().unwrap_or(0.0);
            Ok((
                spectrum.values.iter().map(|&e| c64::new(e, 0.0)).collect(),
                width,
            ))
        }
    }
}

pub fn spectrum_scan(
    base: &ModelParams,
    u_values: &[f64],
    bc: Boundary,
    kind: SpectrumKind,
    options: ScanOptions,
) -> Result<SpectrumScan> {
    let rows = map_ordered(u_values, options.execution, |&u| {
        let (values, scale) = lattice_spectrum(&base.with_onsite(u), bc, kind)?;
        let tol = options.zero_mode_fraction * scale;
        let count = zero_modes(&values, tol).count;
        Ok((values, count, tol))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut scan = SpectrumScan {
        u_values: u_values.to_vec(),
        eigenvalues: Vec::with_capacity(rows.len()),
        zero_mode_count: Vec::with_capacity(rows.len()),
        zero_mode_tol: Vec::with_capacity(rows.len()),
    };
    for (values, count, tol) in rows {
        scan.eigenvalues.push(values);
        scan.zero_mode_count.push(count);
        scan.zero_mode_tol.push(tol);
    }
    Ok(scan)
}

/// Phase-diagram regions labelled by `(W, w)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    I,
    II,
    III,
    IV,
}

impl Region {
    pub fn from_invariants(band: i64, state: i64) -> Option<Self> {
        match (band, state) {
            (0, 0) => Some(Self::I),
            (0, 1) => Some(Self::II),
            (1, 0) => Some(Self::III),
            (1, 1) => Some(Self::IV),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub onsite: f64,
    pub gamma: f64,
    pub band_winding: i64,
    pub state_winding: i64,
    pub region: Region,
}

/// Distance from `U` to the nearest band or state transition.
pub fn transition_distance(params: &ModelParams) -> f64 {
    let (g_minus, g_plus) = gap_closing_points(params);
    let (c_minus, c_plus) = critical_points(params);
    [g_minus, g_plus, c_minus, c_plus]
        .into_iter()
        .map(|line| (params.onsite - line).abs())
        .fold(f64::INFINITY, f64::min)
}

pub fn region(params: &ModelParams, grid_size: usize) -> Result<PhasePoint> {
    params.validate()?;
    let distance = transition_distance(params);
    if distance < BOUNDARY_DISTANCE {
        return Err(Error::OnBoundary { distance });
    }
    let band = band_invariant(params, grid_size)?.value;
    let state = state_invariant(params, grid_size)?.value;
    let region = Region::from_invariants(band, state).ok_or_else(|| {
        Error::InvalidParams(format!(
            "windings ({band}, {state}) fall outside the phase map"
        ))
    })?;
    Ok(PhasePoint {
        onsite: params.onsite,
        gamma: params.gamma,
        band_winding: band,
        state_winding: state,
        region,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSample {
    pub onsite: f64,
    pub gamma: f64,
    pub outcome: Result<PhasePoint>,
}

/// Region map over a `U x gamma` grid, `U`-major.
pub fn phase_diagram(
    base: &ModelParams,
    u_values: &[f64],
    gamma_values: &[f64],
    grid_size: usize,
    execution: Execution,
) -> Vec<PhaseSample> {
    let points: Vec<(f64, f64)> = u_values
        .iter()
        .flat_map(|&u| gamma_values.iter().map(move |&g| (u, g)))
        .collect();
    map_ordered(&points, execution, |&(onsite, gamma)| PhaseSample {
        onsite,
        gamma,
        outcome: region(&base.with_onsite(onsite).with_gamma(gamma), grid_size),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingRow {
    pub onsite: f64,
    pub band: Option<WindingResult>,
    pub state: Option<WindingResult>,
}

/// `(W, w)` along a `U` sweep; failed points carry `None`.
pub fn winding_sweep(
    base: &ModelParams,
    u_values: &[f64],
    grid_size: usize,
    execution: Execution,
) -> Vec<WindingRow> {
    map_ordered(u_values, execution, |&onsite| {
        let params = base.with_onsite(onsite);
        WindingRow {
            onsite,
            band: band_invariant(&params, grid_size).ok(),
            state: state_invariant(&params, grid_size).ok(),
        }
    })
}
