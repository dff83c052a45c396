//! Steady states of general single-particle non-Hermitian systems coupled to
//! a bath: metric operators, the maximal-imaginary-part reduction, and the
//! large-`alpha` equivalence with `Re H - alpha Im H`.
//!
//! The metric is parametrized as `T = sum_c R_c W_c R_c^dag`, with `R_c` the
//! right eigenvectors of a degenerate cluster and `W_c` a Hermitian block.
//! Every such `T` satisfies `H T = T H^dag` for a real spectrum. The bath
//! constraints `X_a T - T X_a^dag = 0` are linear in the entries of the `W_c`;
//! for Hermitian couplings this is `[T, C_a] = 0`, equivalent to
//! `[log T, C_a] = 0` since `T` is positive definite.

use faer::Mat;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::effective::{thermal_log_spectrum, MetricRoot};
use crate::error::{Error, Result};
use crate::linalg::{
    c64, eigenvalues, hermitian_part, hermitian_sqrt, identity, inverse, max_abs, require_square,
    scale, BiorthogonalDecomposition, ComplexMatrix, HermitianSpectrum, I, ONE, ZERO,
};

#[derive(Debug, Clone)]
pub struct GeneralSystem {
    pub hamiltonian: ComplexMatrix,
    pub couplings: Vec<ComplexMatrix>,
}

impl GeneralSystem {
    pub fn new(hamiltonian: ComplexMatrix, couplings: Vec<ComplexMatrix>) -> Result<Self> {
        let n = require_square(&hamiltonian, "Hamiltonian")?;
        for (a, c) in couplings.iter().enumerate() {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "coupling {a} is {}x{}, Hamiltonian is {n}x{n}",
                    c.nrows(),
                    c.ncols()
                )));
            }
        }
        Ok(Self {
            hamiltonian,
            couplings,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }
}

/// Onsite densities `|i><i|` for every site.
pub fn density_couplings(sites: usize) -> Vec<ComplexMatrix> {
    (0..sites)
        .map(|i| {
            ComplexMatrix::from_fn(
                sites,
                sites,
                |r, c| if r == i && c == i { ONE } else { ZERO },
            )
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricOptions {
    /// Largest `|Im E|` accepted as real, relative to `max(1, spectral radius)`.
    pub real_tol: f64,
    /// Eigenvalues closer than this (relative) share a metric block.
    pub cluster_tol: f64,
    /// Singular values of the constraint operator below this (relative to
    /// the largest) span the admissible directions.
    pub null_tol: f64,
    /// Eigenvector matrices with condition number above `1 / defect_tol`
    /// count as defective.
    pub defect_tol: f64,
    /// Modes within this (relative) of the maximal imaginary part are retained.
    pub max_im_tol: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            real_tol: 1e-9,
            cluster_tol: 1e-9,
            null_tol: 1e-10,
            defect_tol: 1e-10,
            max_im_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricResiduals {
    /// `|| H T - T H^dag ||`.
    pub conjugacy: f64,
    /// `|| H T - T H ||`, kept for comparison with the undaggered condition.
    pub undaggered: f64,
    /// `max_a || X_a T - T X_a^dag ||`.
    pub constraint: f64,
}

#[derive(Debug, Clone)]
pub struct MetricSolution {
    pub metric: ComplexMatrix,
    /// Diagonal of the weight blocks, aligned with `modes`.
    pub mode_weights: Vec<f64>,
    /// Basis columns the metric is built on (all modes, or the retained ones).
    pub modes: Vec<usize>,
    pub basis: BiorthogonalDecomposition,
    /// Dimension of the admissible set beyond the overall scale.
    pub extra_nullity: usize,
    pub residuals: MetricResiduals,
}

impl MetricSolution {
    pub fn require_unique(self) -> Result<Self> {
        match self.extra_nullity {
            0 => Ok(self),
            extra => Err(Error::NonUnique { extra }),
        }
    }
}

fn relative_scale(basis: &BiorthogonalDecomposition) -> f64 {
    basis.spectral_radius().max(1.0)
}

fn require_real(basis: &BiorthogonalDecomposition, tol: f64) -> Result<()> {
    let max_imag = basis
        .eigenvalues
        .iter()
        .map(|e| e.im.abs())
        .fold(0.0, f64::max);
    if max_imag > tol * relative_scale(basis) {
        return Err(Error::ComplexSpectrum { max_imag });
    }
    Ok(())
}

/// One real coordinate of a Hermitian weight block, as `sum coeff |R_x><R_y|`.
struct Direction {
    terms: Vec<(c64, usize, usize)>,
    diagonal: bool,
}

fn directions(clusters: &[Vec<usize>]) -> Vec<Direction> {
    let mut out = Vec::new();
    for cluster in clusters {
        for (a, &x) in cluster.iter().enumerate() {
            out.push(Direction {
                terms: vec![(ONE, x, x)],
                diagonal: true,
            });
            for &y in &cluster[a + 1..] {
                out.push(Direction {
                    terms: vec![(ONE, x, y), (ONE, y, x)],
                    diagonal: false,
                });
                out.push(Direction {
                    terms: vec![(I, x, y), (-I, y, x)],
                    diagonal: false,
                });
            }
        }
    }
    out
}

/// Groups `modes` whose real energies agree within `tol`.
fn cluster_modes(energies: &[f64], modes: &[usize], tol: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &m in modes {
        match clusters
            .iter_mut()
            .find(|c| c.iter().any(|&o| (energies[o] - energies[m]).abs() <= tol))
        {
            Some(c) => c.push(m),
            None => clusters.push(vec![m]),
        }
    }
    clusters
}

/// Real nullspace basis of the map `x -> {X_a T(x) - T(x) X_a^dag}`.
///
/// Constraint blocks are folded into a running triangular factor, so memory
/// stays at one coupling's worth of rows.
fn admissible_directions(
    right: &ComplexMatrix,
    dirs: &[Direction],
    constraints: &[ComplexMatrix],
    null_tol: f64,
) -> Result<Mat<f64>> {
    let n = right.nrows();
    let p = dirs.len();
    let mut triangle: Mat<f64> = Mat::zeros(0, p);
    for x in constraints {
        // u_m = X R_m, so X |R_x><R_y| - |R_x><R_y| X^dag = u_x R_y^dag - R_x u_y^dag.
        let u = x * right;
        let mut block: Mat<f64> = Mat::zeros(triangle.nrows() + 2 * n * n, p);
        block
            .submatrix_mut(0, 0, triangle.nrows(), p)
            .copy_from(&triangle);
        let offset = triangle.nrows();
        for (col, dir) in dirs.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    let mut v = ZERO;
                    for &(coeff, a, b) in &dir.terms {
                        v += coeff
                            * (u[(i, a)] * right[(j, b)].conj() - right[(i, a)] * u[(j, b)].conj());
                    }
                    let row = offset + 2 * (i * n + j);
                    block[(row, col)] = v.re;
                    block[(row + 1, col)] = v.im;
                }
            }
        }
        triangle = block.qr().thin_R().to_owned();
    }
    if triangle.nrows() < p {
        let mut padded = Mat::zeros(p, p);
        padded
            .submatrix_mut(0, 0, triangle.nrows(), p)
            .copy_from(&triangle);
        triangle = padded;
    }
    let svd = triangle.thin_svd().map_err(|_| Error::NoConvergence)?;
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    // Relative to the couplings themselves, so an operator that vanishes
    // identically is not judged by its own round-off.
    let reference = constraints
        .iter()
        .map(|x| max_abs(x.as_ref()))
        .fold(s.iter().copied().fold(0.0, f64::max), f64::max);
    let v = svd.V();
    let null: Vec<usize> = (0..p).filter(|&i| s[i] <= null_tol * reference).collect();
    Ok(Mat::from_fn(p, null.len(), |r, c| v[(r, null[c])]))
}

/// Weight blocks from coordinates; `None` unless every block is positive definite.
fn weight_blocks(
    clusters: &[Vec<usize>],
    dirs: &[Direction],
    x: &[f64],
) -> Option<Vec<ComplexMatrix>> {
    let mut blocks: Vec<ComplexMatrix> = clusters
        .iter()
        .map(|c| ComplexMatrix::zeros(c.len(), c.len()))
        .collect();
    let locate = |mode: usize| -> (usize, usize) {
        clusters
            .iter()
            .enumerate()
            .find_map(|(ci, c)| c.iter().position(|&m| m == mode).map(|pos| (ci, pos)))
            .expect("mode belongs to a cluster")
    };
    for (dir, &xi) in dirs.iter().zip(x) {
        for &(coeff, a, b) in &dir.terms {
            let (ci, ia) = locate(a);
            let (_, ib) = locate(b);
            blocks[ci][(ia, ib)] += coeff * xi;
        }
    }
    let largest = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(largest > 0.0) {
        return None;
    }
    for block in &blocks {
        let spectrum = HermitianSpectrum::of(block).ok()?;
        if !(spectrum.values[0] > 1e-12 * largest) {
            return None;
        }
    }
    Some(blocks)
}

struct Assembled {
    metric: ComplexMatrix,
    mode_weights: Vec<f64>,
    extra_nullity: usize,
}

fn assemble(
    basis: &BiorthogonalDecomposition,
    modes: &[usize],
    constraints: &[ComplexMatrix],
    options: &MetricOptions,
) -> Result<Assembled> {
    let energies: Vec<f64> = basis.eigenvalues.iter().map(|e| e.re).collect();
    let clusters = cluster_modes(
        &energies,
        modes,
        options.cluster_tol * relative_scale(basis),
    );
    let dirs = directions(&clusters);
    let null = admissible_directions(&basis.right, &dirs, constraints, options.null_tol)?;
    if null.ncols() == 0 {
        return Err(Error::NotThermalizable(
            "the bath constraints admit no metric".into(),
        ));
    }
    // Prefer the projection of uniform weights onto the admissible set, then
    // its basis vectors in either orientation.
    let uniform: Vec<f64> = dirs
        .iter()
        .map(|d| if d.diagonal { 1.0 } else { 0.0 })
        .collect();
    let coeffs: Vec<f64> = (0..null.ncols())
        .map(|c| (0..dirs.len()).map(|r| null[(r, c)] * uniform[r]).sum())
        .collect();
    let projected: Vec<f64> = (0..dirs.len())
        .map(|r| (0..null.ncols()).map(|c| null[(r, c)] * coeffs[c]).sum())
        .collect();
    let mut candidates = vec![projected];
    for c in 0..null.ncols() {
        let column: Vec<f64> = (0..dirs.len()).map(|r| null[(r, c)]).collect();
        candidates.push(column.iter().map(|v| -v).collect());
        candidates.push(column);
    }
    let blocks = candidates
        .iter()
        .find_map(|x| weight_blocks(&clusters, &dirs, x))
        .ok_or_else(|| {
            Error::NotThermalizable(format!(
                "no positive metric among {} admissible directions",
                null.ncols()
            ))
        })?;

    let n = basis.dim();
    let mut metric = ComplexMatrix::zeros(n, n);
    let mut weight_of = vec![0.0; n];
    for (cluster, block) in clusters.iter().zip(&blocks) {
        let rc = ComplexMatrix::from_fn(n, cluster.len(), |i, j| basis.right[(i, cluster[j])]);
        metric += &rc * block * rc.adjoint();
        for (pos, &m) in cluster.iter().enumerate() {
            weight_of[m] = block[(pos, pos)].re;
        }
    }
    let metric = hermitian_part(&metric);
    // Unit (pseudo-)determinant over the covered modes.
    let spectrum = HermitianSpectrum::of(&metric)?;
    let rank = modes.len();
    let log_det: f64 = spectrum.values[n - rank..].iter().map(|v| v.ln()).sum();
    let factor = (-log_det / rank as f64).exp();
    Ok(Assembled {
        metric: metric * factor,
        mode_weights: modes.iter().map(|&m| weight_of[m] * factor).collect(),
        extra_nullity: null.ncols() - 1,
    })
}

fn residuals(
    h: &ComplexMatrix,
    metric: &ComplexMatrix,
    constraints: &[ComplexMatrix],
) -> MetricResiduals {
    let ht = h * metric;
    let constraint = constraints
        .iter()
        .map(|x| max_abs((x * metric - metric * x.adjoint()).as_ref()))
        .fold(0.0, f64::max);
    MetricResiduals {
        conjugacy: max_abs((&ht - metric * h.adjoint()).as_ref()),
        undaggered: max_abs((&ht - metric * h).as_ref()),
        constraint,
    }
}

/// Metric of a real-spectrum system, normalized to `det T = 1`.
///
/// When several independent metrics are admissible the one closest to
/// uniform weights is returned and `extra_nullity` records the excess;
/// `require_unique` turns that into an error.
pub fn solve_metric(system: &GeneralSystem, options: &MetricOptions) -> Result<MetricSolution> {
    let basis = BiorthogonalDecomposition::new(&system.hamiltonian, options.defect_tol)?;
    require_real(&basis, options.real_tol)?;
    let modes: Vec<usize> = (0..basis.dim()).collect();
    let assembled = assemble(&basis, &modes, &system.couplings, options)?;
    Ok(MetricSolution {
        residuals: residuals(&system.hamiltonian, &assembled.metric, &system.couplings),
        metric: assembled.metric,
        mode_weights: assembled.mode_weights,
        modes,
        basis,
        extra_nullity: assembled.extra_nullity,
    })
}

/// `H - i max_m(Im E_m)`.
pub fn imaginary_shift_normalize(h: &ComplexMatrix) -> Result<ComplexMatrix> {
    let shift = eigenvalues(h)?
        .iter()
        .map(|e| e.im)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(h - scale(&identity(h.nrows()), c64::new(0.0, shift)))
}

/// Projection onto the modes with maximal imaginary part.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub projector: ComplexMatrix,
    /// `P H' P` with `H'` shifted so the retained modes are real.
    pub hamiltonian: ComplexMatrix,
    pub couplings: Vec<ComplexMatrix>,
    pub retained_modes: Vec<usize>,
    /// Decomposition of the shifted `H'`.
    pub basis: BiorthogonalDecomposition,
}

pub fn max_im_projector(system: &GeneralSystem, options: &MetricOptions) -> Result<ReducedSystem> {
    let mut basis = BiorthogonalDecomposition::new(&system.hamiltonian, options.defect_tol)?;
    let shift = basis.max_imag();
    basis.eigenvalues.iter_mut().for_each(|e| e.im -= shift);
    let tol = options.max_im_tol * relative_scale(&basis);
    let retained: Vec<usize> = (0..basis.dim())
        .filter(|&m| basis.eigenvalues[m].im >= -tol)
        .collect();
    let n = basis.dim();
    let r = ComplexMatrix::from_fn(n, retained.len(), |i, j| basis.right[(i, retained[j])]);
    let l = ComplexMatrix::from_fn(n, retained.len(), |i, j| basis.left[(i, retained[j])]);
    let projector = &r * l.adjoint();
    let shifted = &system.hamiltonian - scale(&identity(n), c64::new(0.0, shift));
    let reduce = |m: &ComplexMatrix| &projector * m * &projector;
    Ok(ReducedSystem {
        hamiltonian: reduce(&shifted),
        couplings: system.couplings.iter().map(reduce).collect(),
        retained_modes: retained,
        projector,
        basis,
    })
}

/// Metric on the retained subspace of a reduced system, normalized to unit
/// pseudo-determinant.
pub fn solve_reduced(reduced: &ReducedSystem, options: &MetricOptions) -> Result<MetricSolution> {
    let modes = reduced.retained_modes.clone();
    let assembled = assemble(&reduced.basis, &modes, &reduced.couplings, options)?;
    Ok(MetricSolution {
        residuals: residuals(&reduced.hamiltonian, &assembled.metric, &reduced.couplings),
        metric: assembled.metric,
        mode_weights: assembled.mode_weights,
        modes,
        basis: reduced.basis.clone(),
        extra_nullity: assembled.extra_nullity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    Full,
    Reduced,
}

#[derive(Debug, Clone)]
pub struct GeneralMetric {
    pub path: SolvePath,
    pub solution: MetricSolution,
}

/// Solves directly for a real spectrum, otherwise through the reduction.
pub fn solve_general(system: &GeneralSystem, options: &MetricOptions) -> Result<GeneralMetric> {
    match solve_metric(system, options) {
        Ok(solution) => Ok(GeneralMetric {
            path: SolvePath::Full,
            solution,
        }),
        Err(Error::ComplexSpectrum { .. }) => Ok(GeneralMetric {
            path: SolvePath::Reduced,
            solution: solve_reduced(&max_im_projector(system, options)?, options)?,
        }),
        Err(e) => Err(e),
    }
}

/// `sum_m (Re E_m - alpha Im E_m) |R_m><L_m|`.
pub fn h_alpha(h: &ComplexMatrix, alpha: f64, defect_tol: f64) -> Result<ComplexMatrix> {
    let basis = BiorthogonalDecomposition::new(h, defect_tol)?;
    Ok(basis.reconstruct_with(|e| c64::new(e.re - alpha * e.im, 0.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeProbabilities {
    pub energies: Vec<f64>,
    pub probabilities: Vec<f64>,
}

/// `P_n ~ e^{-beta E_n} <L_n|T|L_n>` over the given modes.
pub fn mode_probabilities(
    basis: &BiorthogonalDecomposition,
    metric: &ComplexMatrix,
    modes: &[usize],
    beta: f64,
) -> Result<ModeProbabilities> {
    let n = basis.dim();
    let mut energies = Vec::with_capacity(modes.len());
    let mut logs = Vec::with_capacity(modes.len());
    for &m in modes {
        let l = basis.left.col(m);
        let tl = metric * l;
        let w: f64 = (0..n).map(|i| (l[i].conj() * tl[i]).re).sum();
        if !(w > 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: w });
        }
        let e = basis.eigenvalues[m].re;
        energies.push(e);
        logs.push(-beta * e + w.ln());
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|v| (v - top).exp()).sum();
    Ok(ModeProbabilities {
        energies,
        probabilities: logs.iter().map(|v| (v - top).exp() / z).collect(),
    })
}

pub fn steady_probabilities(
    h: &ComplexMatrix,
    metric: &ComplexMatrix,
    beta: f64,
    options: &MetricOptions,
) -> Result<ModeProbabilities> {
    let basis = BiorthogonalDecomposition::new(h, options.defect_tol)?;
    require_real(&basis, options.real_tol)?;
    let modes: Vec<usize> = (0..basis.dim()).collect();
    mode_probabilities(&basis, metric, &modes, beta)
}

/// `-log(e^{-beta H} T)`, evaluated as `-log(R e^{-beta H_0} R)` with
/// `R = T^{1/2}` and `H_0 = R^-1 H R` Hermitian.
pub fn effective_from_general(
    h: &ComplexMatrix,
    metric: &ComplexMatrix,
    beta: f64,
) -> Result<ComplexMatrix> {
    let root = hermitian_sqrt(metric)?;
    let h0 = hermitian_part(&(inverse(&root) * h * &root));
    let spectrum = thermal_log_spectrum(&h0, MetricRoot::Dense(&root), beta)?;
    Ok(hermitian_part(&spectrum.reconstruct()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem3Check {
    pub discrepancy: f64,
    pub retained_modes: Vec<usize>,
    pub reduced_probabilities: Vec<f64>,
    pub alpha_probabilities: Vec<f64>,
}

/// Compares the reduced steady state with the one built from
/// `h_alpha(H, alpha)`, on the retained modes.
pub fn theorem3_check(
    system: &GeneralSystem,
    alpha: f64,
    beta: f64,
    options: &MetricOptions,
) -> Result<Theorem3Check> {
    let reduced = max_im_projector(system, options)?;
    let route_a = solve_reduced(&reduced, options)?;
    let pa = mode_probabilities(
        &reduced.basis,
        &route_a.metric,
        &reduced.retained_modes,
        beta,
    )?;

    let shifted = imaginary_shift_normalize(&system.hamiltonian)?;
    let ha = h_alpha(&shifted, alpha, options.defect_tol)?;
    let route_b = solve_metric(
        &GeneralSystem::new(ha.clone(), system.couplings.clone())?,
        options,
    )?;
    let all: Vec<usize> = (0..route_b.basis.dim()).collect();
    let pb = mode_probabilities(&route_b.basis, &route_b.metric, &all, beta)?;

    let n = reduced.basis.dim();
    let matched: Vec<f64> = reduced
        .retained_modes
        .iter()
        .map(|&m| {
            let overlap = |j: usize| -> f64 {
                (0..n)
                    .map(|i| reduced.basis.right[(i, m)].conj() * route_b.basis.right[(i, j)])
                    .sum::<c64>()
                    .norm()
            };
            let best = (0..n)
                .max_by(|&a, &b| overlap(a).total_cmp(&overlap(b)))
                .expect("non-empty");
            pb.probabilities[best]
        })
        .collect();
    let discrepancy = pa
        .probabilities
        .iter()
        .zip(&matched)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Theorem3Check {
        discrepancy,
        retained_modes: reduced.retained_modes,
        reduced_probabilities: pa.probabilities,
        alpha_probabilities: matched,
    })
}

/// Random diagonalizable `H = V D V^-1` with `retained` modes at the maximal
/// imaginary part (zero) and the rest weakly lossy, coupled to a bath through
/// the eigenprojectors of `G = V W V^dag`, which is therefore an admissible
/// metric.
pub fn random_lossy_system(n: usize, retained: usize, seed: u64) -> Result<GeneralSystem> {
    if retained == 0 || retained > n {
        return Err(Error::InvalidParams(format!(
            "cannot retain {retained} of {n} modes"
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let v = ComplexMatrix::from_fn(n, n, |i, j| {
        let noise = c64::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4));
        if i == j {
            ONE + noise
        } else {
            noise
        }
    });
    let energies: Vec<c64> = (0..n)
        .map(|m| {
            let re = rng.gen_range(-1.0..1.0);
            let im = if m < retained {
                0.0
            } else {
                rng.gen_range(-0.01..-0.002)
            };
            c64::new(re, im)
        })
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let vd = ComplexMatrix::from_fn(n, n, |i, j| v[(i, j)] * energies[j]);
    let h = vd * inverse(&v);
    let vw = ComplexMatrix::from_fn(n, n, |i, j| v[(i, j)] * weights[j]);
    let g = hermitian_part(&(vw * v.adjoint()));
    let spectrum = HermitianSpectrum::of(&g)?;
    let couplings = (0..n)
        .map(|a| {
            let q = spectrum.vectors.col(a);
            ComplexMatrix::from_fn(n, n, |i, j| q[i] * q[j].conj())
        })
        .collect();
    GeneralSystem::new(h, couplings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{effective_bloch_closed_form, metric_operator_model};
    use crate::linalg::{diagonal, from_rows, hermitian_log, max_abs_diff};
    use crate::model::{bloch_hamiltonian, lattice_hamiltonian, Boundary, ModelParams};
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| {
            c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn model_metric_from_density_couplings() {
        let (j, g) = (1.0f64, 0.5f64);
        let p = ModelParams::new(0.3, 1.0, j, g, 1.0, 4).unwrap();
        let h = lattice_hamiltonian(&p, Boundary::Open).unwrap();
        let system = GeneralSystem::new(h, density_couplings(8)).unwrap();
        let solution = solve_metric(&system, &MetricOptions::default())
            .unwrap()
            .require_unique()
            .unwrap();
        let a = ((j + g) / (j - g)).sqrt();
        let expected = diagonal(
            &(0..8)
                .map(|i| c64::new(if i % 2 == 0 { a } else { 1.0 / a }, 0.0))
                .collect::<Vec<_>>(),
        );
        assert!(
            max_abs_diff(&solution.metric, &expected) < 1e-8,
            "{:?}",
            solution.metric
        );
        assert!(solution.residuals.conjugacy < 1e-10);
        assert!(solution.residuals.constraint < 1e-10);
        assert!(solution.residuals.undaggered > 1e-3);
        let log_t = hermitian_log(&solution.metric).unwrap();
        for c in &system.couplings {
            assert!(max_abs((&log_t * c - c * &log_t).as_ref()) < 1e-10);
        }
    }

    #[test]
    fn hermitian_commuting_couplings_admit_identity() {
        let h = hermitian_part(&random_matrix(5, 3));
        let spectrum = HermitianSpectrum::of(&h).unwrap();
        let couplings = (0..5)
            .map(|a| {
                let q = spectrum.vectors.col(a);
                ComplexMatrix::from_fn(5, 5, |i, j| q[i] * q[j].conj())
            })
            .collect();
        let solution = solve_metric(
            &GeneralSystem::new(h, couplings).unwrap(),
            &MetricOptions::default(),
        );
        let solution = solution.unwrap_or_else(|e| panic!("{e}"));
        assert!(max_abs_diff(&solution.metric, &identity(5)) < 1e-10);
        assert_eq!(solution.extra_nullity, 4);
        assert!(matches!(
            solution.require_unique(),
            Err(Error::NonUnique { extra: 4 })
        ));
    }

    #[test]
    fn incompatible_couplings_are_not_thermalizable() {
        // A coupling mixing two non-orthogonal modes of distinct energy leaves
        // only the zero metric.
        let h = from_rows(&[[ONE, c64::new(0.5, 0.0)], [ZERO, -ONE]]);
        let couplings = vec![
            from_rows(&[[ZERO, ONE], [ONE, ZERO]]),
            from_rows(&[[ONE, ZERO], [ZERO, ZERO]]),
        ];
        let result = solve_metric(
            &GeneralSystem::new(h, couplings).unwrap(),
            &MetricOptions::default(),
        );
        assert!(
            matches!(result, Err(Error::NotThermalizable(_))),
            "{result:?}"
        );
    }

    #[test]
    fn complex_spectrum_is_rejected_then_reduced() {
        let h = diagonal(&[c64::new(1.0, 0.0), c64::new(2.0, -1.0)]);
        let system = GeneralSystem::new(h, density_couplings(2)).unwrap();
        assert!(matches!(
            solve_metric(&system, &MetricOptions::default()),
            Err(Error::ComplexSpectrum { .. })
        ));
        let reduced = max_im_projector(&system, &MetricOptions::default()).unwrap();
        assert_eq!(reduced.retained_modes, vec![0]);
        assert!(max_abs_diff(&reduced.projector, &diagonal(&[ONE, ZERO])) < 1e-14);
        let general = solve_general(&system, &MetricOptions::default()).unwrap();
        assert_eq!(general.path, SolvePath::Reduced);
    }

    #[test]
    fn shift_and_h_alpha_on_diagonals() {
        let d = diagonal(&[c64::new(1.0, 1.0), c64::new(2.0, 0.0)]);
        let shifted = imaginary_shift_normalize(&d).unwrap();
        assert!(
            max_abs_diff(
                &shifted,
                &diagonal(&[c64::new(1.0, 0.0), c64::new(2.0, -1.0)])
            ) < 1e-14
        );
        let ha = h_alpha(&d, 10.0, 1e-10).unwrap();
        assert!(max_abs_diff(&ha, &diagonal(&[c64::new(-9.0, 0.0), c64::new(2.0, 0.0)])) < 1e-13);
        let herm = hermitian_part(&random_matrix(4, 8));
        assert!(max_abs_diff(&h_alpha(&herm, 7.0, 1e-10).unwrap(), &herm) < 1e-12);
        assert!(max_abs_diff(&imaginary_shift_normalize(&herm).unwrap(), &herm) < 1e-12);
    }

    #[test]
    fn periodic_model_shift_zeroes_max_imag() {
        let p = ModelParams::new(0.3, 1.0, 1.0, 0.5, 1.0, 8).unwrap();
        let h = lattice_hamiltonian(&p, Boundary::Periodic).unwrap();
        let scaled = scale(&h, c64::new(1.0, 0.3)) + scale(&identity(16), c64::new(0.0, 0.7));
        let shifted = imaginary_shift_normalize(&scaled).unwrap();
        let top = eigenvalues(&shifted)
            .unwrap()
            .iter()
            .map(|e| e.im)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(top.abs() < 1e-12);
    }

    #[test]
    fn hermitian_boltzmann_weights() {
        let h = hermitian_part(&random_matrix(4, 5));
        let probs = steady_probabilities(&h, &identity(4), 1.3, &MetricOptions::default()).unwrap();
        let z: f64 = probs.energies.iter().map(|e| (-1.3 * e).exp()).sum();
        for (e, p) in probs.energies.iter().zip(&probs.probabilities) {
            assert!((p - (-1.3 * e).exp() / z).abs() < 1e-12);
        }
        assert!((probs.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let heff = effective_from_general(&h, &identity(4), 1.3).unwrap();
        assert!(max_abs_diff(&heff, &(&h * 1.3)) < 1e-12);
    }

    #[test]
    fn bloch_probabilities_follow_similarity_route() {
        let p = ModelParams::new(0.3, 1.0, 1.0, 0.5, 1.0, 4).unwrap();
        let h = bloch_hamiltonian(&p, 0.7);
        let metric = metric_operator_model(&p).unwrap().matrix;
        let probs = steady_probabilities(&h, &metric, 1.0, &MetricOptions::default()).unwrap();
        // With H = S H_0 S^-1 and unit right eigenvectors, the weight of mode
        // n is e^{-beta E_n} <v_n|S^2|v_n> for the eigenvectors v_n of H_0.
        let s = crate::effective::hermitianizing_transform(&p).unwrap();
        let spectrum = HermitianSpectrum::of(&s.conjugate(&h)).unwrap();
        let d = s.cell_diagonal();
        let raw: Vec<f64> = (0..2)
            .map(|n| {
                let v = spectrum.vectors.col(n);
                let w: f64 = (0..2).map(|i| d[i] * d[i] * v[i].norm_sqr()).sum();
                (-spectrum.values[n]).exp() * w
            })
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in probs.probabilities.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-12, "{a} vs {}", b / z);
        }
    }

    #[test]
    fn general_effective_matches_closed_form() {
        let p = ModelParams::new(0.3, 1.0, 1.0, 0.5, 1.0, 4).unwrap();
        let k = 1.1;
        let h = bloch_hamiltonian(&p, k);
        let metric = metric_operator_model(&p).unwrap().matrix;
        let heff = effective_from_general(&h, &metric, 1.0).unwrap();
        let closed = effective_bloch_closed_form(&p, k).unwrap().matrix;
        assert!(max_abs_diff(&heff, &closed) < 1e-8);
        assert!(crate::linalg::hermitian_defect(&heff) < 1e-12);
    }

    #[test]
    fn real_spectrum_routes_coincide() {
        let p = ModelParams::new(0.3, 1.0, 1.0, 0.5, 1.0, 3).unwrap();
        let h = lattice_hamiltonian(&p, Boundary::Open).unwrap();
        let system = GeneralSystem::new(h, density_couplings(6)).unwrap();
        let check = theorem3_check(&system, 1e3, 1.0, &MetricOptions::default()).unwrap();
        assert_eq!(check.retained_modes.len(), 6);
        assert!(check.discrepancy < 1e-10);
    }

    #[test]
    fn reduction_keeps_top_modes() {
        let system = random_lossy_system(6, 3, 11).unwrap();
        let reduced = max_im_projector(&system, &MetricOptions::default()).unwrap();
        let p = &reduced.projector;
        assert!(max_abs_diff(&(p * p), p) < 1e-10);
        let trace: c64 = (0..6).map(|i| p[(i, i)]).sum();
        assert!((trace - c64::new(3.0, 0.0)).norm() < 1e-10);
        let solution = solve_reduced(&reduced, &MetricOptions::default()).unwrap();
        let spectrum = HermitianSpectrum::of(&solution.metric).unwrap();
        assert!(spectrum.values[0] > -1e-10);
        assert!(solution.residuals.constraint < 1e-10);
        assert!(solution.residuals.conjugacy < 1e-10);
    }

    #[test]
    fn theorem3_converges_in_alpha() {
        let system = random_lossy_system(5, 2, 42).unwrap();
        let options = MetricOptions::default();
        let d: Vec<f64> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&a| {
                theorem3_check(&system, a, 1.0, &options)
                    .unwrap()
                    .discrepancy
            })
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d[2] < 1e-6, "{d:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn recovered_metric_matches_construction(seed in 0u64..1_000_000, n in 3usize..7) {
            let system = random_lossy_system(n, n, seed).unwrap();
            let solution = solve_metric(&system, &MetricOptions::default()).unwrap();
            prop_assert!(solution.residuals.conjugacy < 1e-10);
            prop_assert!(solution.residuals.constraint < 1e-10);
            prop_assert!(HermitianSpectrum::of(&solution.metric).unwrap().values[0] > 0.0);
            let probs = steady_probabilities(&system.hamiltonian, &solution.metric, 0.8, &MetricOptions::default()).unwrap();
            prop_assert!((probs.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn h_alpha_is_real_and_keeps_eigenvectors(seed in 0u64..1_000_000, alpha in 0.5f64..50.0) {
            let h = random_matrix(5, seed);
            let Ok(basis) = BiorthogonalDecomposition::new(&h, 1e-8) else { return Ok(()) };
            let ha = h_alpha(&h, alpha, 1e-8).unwrap();
            let values = eigenvalues(&ha).unwrap();
            let scale = values.iter().map(|e| e.norm()).fold(1.0, f64::max);
            prop_assert!(values.iter().all(|e| e.im.abs() < 1e-10 * scale * basis.condition));
            for m in 0..5 {
                let r = basis.right.col(m);
                let target = basis.eigenvalues[m].re - alpha * basis.eigenvalues[m].im;
                let hr = &ha * r;
                let defect = (0..5).map(|i| (hr[i] - r[i] * target).norm()).fold(0.0, f64::max);
                prop_assert!(defect < 1e-8 * scale);
            }
        }
    }
}
