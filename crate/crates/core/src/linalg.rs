//! Dense complex linear algebra on top of `faer`.
//!
//! Everything here works on small-to-medium dense matrices (up to a few
//! thousand rows). Spectral functions of Hermitian matrices go through an
//! eigendecomposition; `neg_log_gram` computes `-log(B B^H)` from an SVD of `B`
//! so that the Gram matrix, whose dynamic range can exceed `1e300`, is never
//! formed.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

pub type ComplexMatrix = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn sigma_x() -> ComplexMatrix {
    from_rows(&[[ZERO, ONE], [ONE, ZERO]])
}

pub fn sigma_y() -> ComplexMatrix {
    from_rows(&[[ZERO, -I], [I, ZERO]])
}

pub fn sigma_z() -> ComplexMatrix {
    from_rows(&[[ONE, ZERO], [ZERO, -ONE]])
}

pub fn identity(n: usize) -> ComplexMatrix {
    Mat::identity(n, n)
}

pub fn from_rows<const N: usize>(rows: &[[c64; N]; N]) -> ComplexMatrix {
    Mat::from_fn(N, N, |i, j| rows[i][j])
}

pub fn from_real(a: &Mat<f64>) -> ComplexMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// `diag(block, block, ...)` with `cells` copies.
pub fn block_diagonal(block: &ComplexMatrix, cells: usize) -> ComplexMatrix {
    let b = block.nrows();
    let mut out = Mat::zeros(b * cells, b * cells);
    for c in 0..cells {
        out.as_mut()
            .submatrix_mut(c * b, c * b, b, b)
            .copy_from(block.as_ref());
    }
    out
}

pub fn diagonal(values: &[c64]) -> ComplexMatrix {
    let n = values.len();
    Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { ZERO })
}

/// Largest entry modulus.
pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    max_abs((a - b).as_ref())
}

pub fn hermitian_defect(a: &ComplexMatrix) -> f64 {
    max_abs((a - a.adjoint()).as_ref())
}

pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()) * 0.5
    })
}

pub fn conjugate(a: &ComplexMatrix) -> ComplexMatrix {
    a.conjugate().to_owned()
}

pub fn scale(a: &ComplexMatrix, s: c64) -> ComplexMatrix {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn inverse(a: &ComplexMatrix) -> ComplexMatrix {
    a.partial_piv_lu().inverse()
}

pub fn require_square(a: &ComplexMatrix, what: &str) -> Result<usize> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

pub fn singular_values(a: &ComplexMatrix) -> Result<Vec<f64>> {
    a.singular_values().map_err(|_| Error::NoConvergence)
}

/// Spectral decomposition `A = V diag(values) V^H` of a Hermitian matrix,
/// eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianSpectrum {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianSpectrum {
    /// Decomposes the Hermitian part of `a`.
    pub fn of(a: &ComplexMatrix) -> Result<Self> {
        require_square(a, "Hermitian matrix")?;
        let h = hermitian_part(a);
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|_| Error::NoConvergence)?;
        let values: Vec<f64> = evd.S().column_vector().iter().map(|s| s.re).collect();
        let spectrum = Self {
            values,
            vectors: evd.U().to_owned(),
        };
        Ok(spectrum.sorted())
    }

    fn sorted(self) -> Self {
        let n = self.values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.values[a].total_cmp(&self.values[b]));
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return self;
        }
        let values = order.iter().map(|&o| self.values[o]).collect();
        let vectors = Mat::from_fn(self.vectors.nrows(), n, |i, j| self.vectors[(i, order[j])]);
        Self { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V diag(f(values)) V^H`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.dim();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.vectors[(i, j)] * fv[j]);
        scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|v| v)
    }
}

pub fn hermitian_log(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spectrum = HermitianSpectrum::of(a)?;
    let min = spectrum.values.first().copied().unwrap_or(0.0);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(spectrum.map(f64::ln))
}

pub fn hermitian_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let spectrum = HermitianSpectrum::of(a)?;
    let min = spectrum.values.first().copied().unwrap_or(0.0);
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: min,
        });
    }
    Ok(spectrum.map(f64::sqrt))
}

pub fn hermitian_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(HermitianSpectrum::of(a)?.map(f64::exp))
}

/// Spectrum of `-log(B B^H)`.
///
/// With `B = U s V^H`, the eigenpairs are `(-2 ln s_i, U_i)`. The singular
/// values come from `graded_svd`, which resolves each of them to high
/// relative accuracy when `B` is a well-conditioned matrix times a (possibly
/// extreme) column scaling. That is the shape `T^(1/2) V exp(-beta Lambda / 2)`
/// of a thermal state, whose Gram matrix may span hundreds of decades.
pub fn neg_log_gram(b: &ComplexMatrix) -> Result<HermitianSpectrum> {
    let (s, u) = graded_svd(b)?;
    if let Some(&bad) = s.iter().find(|&&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: bad * bad,
        });
    }
    let spectrum = HermitianSpectrum {
        values: s.iter().map(|x| -2.0 * x.ln()).collect(),
        vectors: u,
    };
    Ok(spectrum.sorted())
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// Singular values and left singular vectors of a square matrix by
/// column-pivoted QR followed by one-sided Jacobi on `R^H`.
///
/// `B P = Q R` gives `B B^H = Q R R^H Q^H`; orthogonalizing the columns of
/// `R^H` with plane rotations and applying the same rotations to the columns
/// of `Q` yields the left singular vectors of `B`. Bidiagonalization-based
/// SVDs only guarantee `eps * s_max` absolute error, which is useless for the
/// small singular values of strongly graded matrices.
pub fn graded_svd(b: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    let n = require_square(b, "matrix")?;
    let qr = b.col_piv_qr();
    let q = qr.compute_Q();
    let r = qr.R();
    // Column j of R^H is the conjugate of row j of R.
    let mut x = SplitColumns::from_fn(n, n, |i, j| if j <= i { r[(j, i)].conj() } else { ZERO });
    let mut u = SplitColumns::from_fn(n, n, |i, j| q[(i, j)]);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for col in p + 1..n {
                rotated |= x.orthogonalize_pair(p, col, &mut u);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence);
    }
    let s = (0..n).map(|j| x.norm_sqr(j).sqrt()).collect();
    Ok((s, u.to_matrix()))
}

/// Column-major storage with separate real and imaginary planes so the
/// rotation kernels vectorize.
struct SplitColumns {
    rows: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl SplitColumns {
    fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> c64) -> Self {
        let mut re = vec![0.0; rows * cols];
        let mut im = vec![0.0; rows * cols];
        for j in 0..cols {
            for i in 0..rows {
                let z = f(i, j);
                re[j * rows + i] = z.re;
                im[j * rows + i] = z.im;
            }
        }
        Self { rows, re, im }
    }

    fn to_matrix(&self) -> ComplexMatrix {
        let cols = self.re.len() / self.rows;
        Mat::from_fn(self.rows, cols, |i, j| {
            c64::new(self.re[j * self.rows + i], self.im[j * self.rows + i])
        })
    }

    fn norm_sqr(&self, j: usize) -> f64 {
        let range = j * self.rows..(j + 1) * self.rows;
        sum_squares(&self.re[range.clone()]) + sum_squares(&self.im[range])
    }

    /// `(x_p^H x_q, |x_p|^2, |x_q|^2)`.
    fn gram(&self, p: usize, q: usize) -> (c64, f64, f64) {
        let n = self.rows;
        let (pr, qr) = (&self.re[p * n..(p + 1) * n], &self.re[q * n..(q + 1) * n]);
        let (pi, qi) = (&self.im[p * n..(p + 1) * n], &self.im[q * n..(q + 1) * n]);
        let mut acc = [0.0f64; 16];
        let chunks = n / 4 * 4;
        for i in (0..chunks).step_by(4) {
            for l in 0..4 {
                let (a, b, c, d) = (pr[i + l], pi[i + l], qr[i + l], qi[i + l]);
                acc[l] += a * c + b * d;
                acc[4 + l] += a * d - b * c;
                acc[8 + l] += a * a + b * b;
                acc[12 + l] += c * c + d * d;
            }
        }
        for i in chunks..n {
            let (a, b, c, d) = (pr[i], pi[i], qr[i], qi[i]);
            acc[0] += a * c + b * d;
            acc[4] += a * d - b * c;
            acc[8] += a * a + b * b;
            acc[12] += c * c + d * d;
        }
        let sum = |k: usize| acc[k] + acc[k + 1] + acc[k + 2] + acc[k + 3];
        (c64::new(sum(0), sum(4)), sum(8), sum(12))
    }

    /// `x_p <- c x_p - s conj(phase) x_q`, `x_q <- s phase x_p + c x_q`.
    fn rotate(&mut self, p: usize, q: usize, c: f64, s: f64, phase: c64) {
        let n = self.rows;
        let (lo, hi) = (p.min(q), p.max(q));
        let (re_lo, re_hi) = self.re.split_at_mut(hi * n);
        let (im_lo, im_hi) = self.im.split_at_mut(hi * n);
        let (re_a, re_b) = (&mut re_lo[lo * n..(lo + 1) * n], &mut re_hi[..n]);
        let (im_a, im_b) = (&mut im_lo[lo * n..(lo + 1) * n], &mut im_hi[..n]);
        let (xr, xi, yr, yi) = if p < q {
            (re_a, im_a, re_b, im_b)
        } else {
            (re_b, im_b, re_a, im_a)
        };
        let (er, ei) = (phase.re, phase.im);
        for i in 0..n {
            let (a, b, c0, d) = (xr[i], xi[i], yr[i], yi[i]);
            // conj(phase) * y and phase * x
            let (cy_r, cy_i) = (er * c0 + ei * d, er * d - ei * c0);
            let (px_r, px_i) = (er * a - ei * b, er * b + ei * a);
            xr[i] = c * a - s * cy_r;
            xi[i] = c * b - s * cy_i;
            yr[i] = s * px_r + c * c0;
            yi[i] = s * px_i + c * d;
        }
    }

    /// One Jacobi step on columns `p < q`; returns whether a rotation was applied.
    fn orthogonalize_pair(&mut self, p: usize, q: usize, companion: &mut SplitColumns) -> bool {
        let (g, a, b) = self.gram(p, q);
        let gabs = g.norm();
        if gabs <= 1e-15 * (a * b).sqrt() || gabs == 0.0 {
            return false;
        }
        let zeta = (b - a) / (2.0 * gabs);
        let t = if zeta == 0.0 {
            1.0
        } else {
            zeta.signum() / (zeta.abs() + zeta.hypot(1.0))
        };
        let c = 1.0 / t.hypot(1.0);
        let s = c * t;
        let phase = g / gabs;
        self.rotate(p, q, c, s, phase);
        companion.rotate(p, q, c, s, phase);
        true
    }
}

fn sum_squares(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().map(|x| x * x).sum();
    for c in chunks {
        for l in 0..4 {
            acc[l] += c[l] * c[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Right/left eigenvectors of a diagonalizable matrix with `<L_m|R_n> = delta_mn`.
///
/// Right eigenvectors are unit-normalized columns of `right`; `left` holds the
/// columns of `(R^-1)^H`. Eigenvalues are sorted by real part, then imaginary
/// part.
#[derive(Debug, Clone)]
pub struct BiorthogonalDecomposition {
    pub eigenvalues: Vec<c64>,
    pub right: ComplexMatrix,
    pub left: ComplexMatrix,
    /// 2-norm condition number of `right`.
    pub condition: f64,
}

impl BiorthogonalDecomposition {
    /// Fails with `Defective` when the eigenvector matrix has condition number
    /// above `1 / tol`.
    pub fn new(h: &ComplexMatrix, tol: f64) -> Result<Self> {
        let n = require_square(h, "Hamiltonian")?;
        let evd = h.eigen().map_err(|_| Error::NoConvergence)?;
        let values: Vec<c64> = evd.S().column_vector().iter().copied().collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            values[a]
                .re
                .total_cmp(&values[b].re)
                .then(values[a].im.total_cmp(&values[b].im))
        });
        let u = evd.U();
        let mut right = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
        for j in 0..n {
            let norm = right.col(j).norm_l2();
            if norm > 0.0 {
                for i in 0..n {
                    right[(i, j)] /= norm;
                }
            }
        }
        let s = singular_values(&right)?;
        let smax = s.iter().copied().fold(0.0, f64::max);
        let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
        let condition = if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        };
        if !(condition <= 1.0 / tol) {
            return Err(Error::Defective { condition });
        }
        let left = inverse(&right).adjoint().to_owned();
        Ok(Self {
            eigenvalues: order.iter().map(|&o| values[o]).collect(),
            right,
            left,
            condition,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `sum_m f(E_m) |R_m><L_m|`.
    pub fn reconstruct_with(&self, f: impl Fn(c64) -> c64) -> ComplexMatrix {
        let n = self.dim();
        let fv: Vec<c64> = self.eigenvalues.iter().map(|&e| f(e)).collect();
        let scaled = Mat::from_fn(n, n, |i, j| self.right[(i, j)] * fv[j]);
        scaled * self.left.adjoint()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.norm())
            .fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|e| e.im)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Groups of (sorted) eigenvalue indices closer than `tol` to each other.
    pub fn clusters(&self, tol: f64) -> Vec<Vec<usize>> {
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for m in 0..self.dim() {
            let e = self.eigenvalues[m];
            match clusters
                .iter_mut()
                .find(|c| c.iter().any(|&o| (self.eigenvalues[o] - e).norm() <= tol))
            {
                Some(c) => c.push(m),
                None => clusters.push(vec![m]),
            }
        }
        clusters
    }
}

pub fn eigenvalues(h: &ComplexMatrix) -> Result<Vec<c64>> {
    require_square(h, "matrix")?;
    h.eigenvalues().map_err(|_| Error::NoConvergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| {
            c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
        let xy = &x * &y;
        assert!(max_abs_diff(&xy, &scale(&z, I)) < 1e-15);
        assert!(max_abs_diff(&(&x * &x), &identity(2)) < 1e-15);
    }

    #[test]
    fn graded_gram_log_keeps_small_eigenvalues() {
        // B = R(0.7) diag(1, e^-300); -log(B B^H) has eigenvalues 0 and 600.
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let tiny = (-300.0f64).exp();
        let b = from_rows(&[
            [c64::new(c, 0.0), c64::new(-s * tiny, 0.0)],
            [c64::new(s, 0.0), c64::new(c * tiny, 0.0)],
        ]);
        let spectrum = neg_log_gram(&b).unwrap();
        assert!(spectrum.values[0].abs() < 1e-12);
        assert!((spectrum.values[1] - 600.0).abs() < 1e-10);
    }

    #[test]
    fn graded_svd_resolves_tiny_singular_values() {
        // B = V diag(e^0, e^-10, ..., e^-70) with V unitary: singular values are the scales.
        let n = 8;
        let v = HermitianSpectrum::of(&hermitian_part(&random_matrix(n, 3)))
            .unwrap()
            .vectors;
        let b = Mat::from_fn(n, n, |i, j| v[(i, j)] * (-10.0 * j as f64).exp());
        let (s, u) = graded_svd(&b).unwrap();
        let mut logs: Vec<f64> = s.iter().map(|x| x.ln()).collect();
        logs.sort_by(|a, b| b.total_cmp(a));
        for (j, l) in logs.iter().enumerate() {
            assert!((l + 10.0 * j as f64).abs() < 1e-12, "level {j}: {l}");
        }
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(n)) < 1e-13);
    }

    #[test]
    fn log_of_indefinite_matrix_fails() {
        assert!(matches!(
            hermitian_log(&sigma_z()),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn jordan_block_is_defective() {
        let j = from_rows(&[[ONE, ONE], [ZERO, ONE]]);
        assert!(matches!(
            BiorthogonalDecomposition::new(&j, 1e-8),
            Err(Error::Defective { .. })
        ));
    }

    #[test]
    fn clusters_group_degenerate_levels() {
        let d = diagonal(&[ONE, c64::new(2.0, 0.0), ONE]);
        let b = BiorthogonalDecomposition::new(&d, 1e-8).unwrap();
        assert_eq!(b.clusters(1e-9), vec![vec![0, 1], vec![2]]);
    }

    proptest! {
        #[test]
        fn biorthogonality_and_reconstruction(n in 2usize..8, seed in any::<u64>()) {
            let h = random_matrix(n, seed);
            let b = BiorthogonalDecomposition::new(&h, 1e-10).unwrap();
            let overlap = b.left.adjoint() * &b.right;
            prop_assert!(max_abs_diff(&overlap, &identity(n)) < 1e-9 * b.condition);
            let back = b.reconstruct_with(|e| e);
            prop_assert!(max_abs_diff(&back, &h) < 1e-10 * b.condition);
        }

        #[test]
        fn exp_log_roundtrip(n in 1usize..7, seed in any::<u64>()) {
            let a = random_matrix(n, seed);
            let h = hermitian_part(&a);
            let e = hermitian_exp(&h).unwrap();
            let back = hermitian_log(&e).unwrap();
            prop_assert!(max_abs_diff(&back, &h) < 1e-11);
        }

        #[test]
        fn gram_log_matches_direct_log(n in 1usize..7, seed in any::<u64>()) {
            let b = random_matrix(n, seed);
            let gram = &b * b.adjoint();
            let direct = hermitian_log(&gram).unwrap();
            let via_svd = neg_log_gram(&b).unwrap().reconstruct();
            prop_assert!(max_abs_diff(&scale(&via_svd, -ONE), &direct) < 1e-8);
        }
    }
}
