use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("band gap is complex (radicand {radicand:e})")]
    ComplexGap { radicand: f64 },

    #[error("gamma = 0 leaves the Lindblad phase undefined")]
    GammaZero,

    #[error("effective Hamiltonian vanishes at k = {k} (A_y = A_z = 0)")]
    Degenerate { k: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("filling is ambiguous: levels {lower} and {upper} split by only {splitting:e}")]
    DegenerateFilling {
        lower: f64,
        upper: f64,
        splitting: f64,
    },

    #[error("eigenvector matrix is numerically singular (condition number {condition:e})")]
    Defective { condition: f64 },

    #[error("operator square is not +-1 (deviation {deviation:e})")]
    NotSignDefinite { deviation: f64 },

    #[error("symmetry pattern (ltrs {ltrs}, phs {phs}, lcs {lcs}) matches no class")]
    InconsistentReport { ltrs: i8, phs: i8, lcs: u8 },

    #[error("line gap closes on the loop (min |det H| = {min_det:e})")]
    GapClosed { min_det: f64 },

    #[error("chiral relation violated (residual {residual:e})")]
    NotChiral { residual: f64 },

    #[error("phase increments stay above pi/2 even with {grid_size} points")]
    UnresolvedPhase { grid_size: usize },

    #[error("point lies within {distance:e} of a phase boundary")]
    OnBoundary { distance: f64 },

    #[error("spectrum is not real (max |Im E| = {max_imag:e})")]
    ComplexSpectrum { max_imag: f64 },

    #[error("no admissible metric: {0}")]
    NotThermalizable(String),

    #[error("metric is not unique ({extra} additional admissible directions)")]
    NonUnique { extra: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigensolver did not converge")]
    NoConvergence,
}
