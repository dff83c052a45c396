//! Ordinary and linearized Altland-Zirnbauer symmetries, and the ten-fold
//! classification of steady states.
//!
//! Ordinary relations (with `U` the unitary part of the operator):
//!
//! | relation | defect |
//! |---|---|
//! | PHS | `U H^T(k) U^-1 + H(-k)` |
//! | TRS | `U H^*(k) U^-1 - H(-k)` |
//! | CS  | `U H^dag(k) U^-1 + H(k)` |
//! | SL  | `U H(k) U^-1 + H(k)` |
//!
//! Linearized relations replace the spectrum by its complex conjugate,
//! `C(H) = sum_m E_m^* |R_m><L_m|`:
//! `T H T^-1 = C(H)^*` and `Gamma H Gamma^-1 = -C(H)^dag`. For a real
//! spectrum `C(H) = H` and, for real operator matrices, they reduce to the
//! ordinary TRS and CS.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{
    block_diagonal, c64, conjugate, hermitian_part, identity, max_abs, max_abs_diff, sigma_x,
    sigma_z, BiorthogonalDecomposition, ComplexMatrix,
};
use crate::model::{bloch_hamiltonian, lattice_hamiltonian, Boundary, ModelParams};

pub const ORDINARY_THRESHOLD: f64 = 1e-10;
pub const LINEARIZED_THRESHOLD: f64 = 1e-8;
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumAction {
    Keep,
    Flip,
}

#[derive(Debug, Clone)]
pub struct SymmetryOp {
    pub unitary: ComplexMatrix,
    pub antiunitary: bool,
    pub momentum: MomentumAction,
}

impl SymmetryOp {
    pub fn new(
        unitary: ComplexMatrix,
        antiunitary: bool,
        momentum: MomentumAction,
    ) -> Result<Self> {
        let n = crate::linalg::require_square(&unitary, "symmetry operator")?;
        let defect = max_abs_diff(&(&unitary * unitary.adjoint()), &identity(n));
        if defect > 1e-12 {
            return Err(Error::InvalidParams(format!(
                "symmetry operator is not unitary (defect {defect:e})"
            )));
        }
        Ok(Self {
            unitary,
            antiunitary,
            momentum,
        })
    }

    pub fn time_reversal(unitary: ComplexMatrix) -> Result<Self> {
        Self::new(unitary, true, MomentumAction::Flip)
    }

    pub fn particle_hole(unitary: ComplexMatrix) -> Result<Self> {
        Self::new(unitary, true, MomentumAction::Flip)
    }

    pub fn chiral(unitary: ComplexMatrix) -> Result<Self> {
        Self::new(unitary, false, MomentumAction::Keep)
    }

    pub fn sublattice(unitary: ComplexMatrix) -> Result<Self> {
        Self::new(unitary, false, MomentumAction::Keep)
    }

    /// Repeats a per-cell operator over `cells` unit cells.
    pub fn on_lattice(&self, cells: usize) -> Self {
        Self {
            unitary: block_diagonal(&self.unitary, cells),
            antiunitary: self.antiunitary,
            momentum: self.momentum,
        }
    }

    fn dim(&self) -> usize {
        self.unitary.nrows()
    }

    /// `U A U^-1`.
    fn conjugate_by(&self, a: &ComplexMatrix) -> ComplexMatrix {
        &self.unitary * a * self.unitary.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    ParticleHole,
    TimeReversal,
    Chiral,
    Sublattice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LinearizedKind {
    TimeReversal,
    Chiral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Check {
    pub holds: bool,
    pub residual: f64,
}

impl Check {
    fn new(residual: f64, threshold: f64) -> Self {
        Self {
            holds: residual < threshold,
            residual,
        }
    }
}

/// `H(k)` paired with `H(-k)` on a grid, or a single real-space matrix.
#[derive(Debug, Clone)]
pub enum HamiltonianFamily {
    RealSpace(ComplexMatrix),
    Bloch(Vec<BlochSample>),
}

#[derive(Debug, Clone)]
pub struct BlochSample {
    pub k: f64,
    pub at_k: ComplexMatrix,
    pub at_minus_k: ComplexMatrix,
}

impl HamiltonianFamily {
    pub fn bloch(grid: usize, hamiltonian: impl Fn(f64) -> ComplexMatrix) -> Self {
        let samples = (0..grid)
            .map(|i| {
                let k = -PI + 2.0 * PI * i as f64 / grid as f64;
                BlochSample {
                    k,
                    at_k: hamiltonian(k),
                    at_minus_k: hamiltonian(-k),
                }
            })
            .collect();
        Self::Bloch(samples)
    }

    fn pairs(&self) -> Vec<(&ComplexMatrix, &ComplexMatrix)> {
        match self {
            Self::RealSpace(h) => vec![(h, h)],
            Self::Bloch(samples) => samples.iter().map(|s| (&s.at_k, &s.at_minus_k)).collect(),
        }
    }
}

pub fn check_ordinary(
    family: &HamiltonianFamily,
    op: &SymmetryOp,
    relation: Relation,
) -> Result<Check> {
    let mut worst = 0.0f64;
    for (h, h_minus) in family.pairs() {
        if h.nrows() != op.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator is {0}x{0}, Hamiltonian is {1}x{1}",
                op.dim(),
                h.nrows()
            )));
        }
        let partner = match op.momentum {
            MomentumAction::Keep => h,
            MomentumAction::Flip => h_minus,
        };
        let residual = match relation {
            Relation::ParticleHole => {
                max_abs((op.conjugate_by(&h.transpose().to_owned()) + partner).as_ref())
            }
            Relation::TimeReversal => max_abs((op.conjugate_by(&conjugate(h)) - partner).as_ref()),
            Relation::Chiral => {
                max_abs((op.conjugate_by(&h.adjoint().to_owned()) + partner).as_ref())
            }
            Relation::Sublattice => max_abs((op.conjugate_by(h) + partner).as_ref()),
        };
        worst = worst.max(residual);
    }
    Ok(Check::new(worst, ORDINARY_THRESHOLD))
}

/// Exceptional points are reported as `Defective` unless a perturbation is
/// requested, in which case a random Hermitian matrix of norm `epsilon`
/// (seeded, reproducible) is added before retrying once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            epsilon: 1e-10,
            seed: 0,
        }
    }
}

/// `C(H) = sum_m E_m^* |R_m><L_m|`.
pub fn conjugate_spectrum(h: &ComplexMatrix, degeneracy_tol: f64) -> Result<ComplexMatrix> {
    let decomposition = BiorthogonalDecomposition::new(h, degeneracy_tol)?;
    Ok(decomposition.reconstruct_with(|e| e.conj()))
}

pub fn conjugate_spectrum_perturbed(
    h: &ComplexMatrix,
    degeneracy_tol: f64,
    perturbation: Perturbation,
) -> Result<ComplexMatrix> {
    match conjugate_spectrum(h, degeneracy_tol) {
        Err(Error::Defective { .. }) => {
            let nudged = h + random_hermitian(h.nrows(), perturbation);
            conjugate_spectrum(&nudged, degeneracy_tol)
        }
        other => other,
    }
}

fn random_hermitian(n: usize, perturbation: Perturbation) -> ComplexMatrix {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perturbation.seed);
    let raw = ComplexMatrix::from_fn(n, n, |_, _| {
        c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = hermitian_part(&raw);
    let norm = max_abs(h.as_ref()).max(f64::MIN_POSITIVE);
    crate::linalg::scale(&h, c64::new(perturbation.epsilon / norm, 0.0))
}

pub fn check_linearized(
    h: &ComplexMatrix,
    op: &SymmetryOp,
    kind: LinearizedKind,
    degeneracy_tol: f64,
) -> Result<Check> {
    let conjugated = conjugate_spectrum(h, degeneracy_tol)?;
    linearized_residual(h, &conjugated, op, kind)
}

fn linearized_residual(
    h: &ComplexMatrix,
    conjugated: &ComplexMatrix,
    op: &SymmetryOp,
    kind: LinearizedKind,
) -> Result<Check> {
    if h.nrows() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {0}x{0}, Hamiltonian is {1}x{1}",
            op.dim(),
            h.nrows()
        )));
    }
    let transformed = op.conjugate_by(h);
    let residual = match kind {
        LinearizedKind::TimeReversal => max_abs_diff(&transformed, &conjugate(conjugated)),
        LinearizedKind::Chiral => max_abs((transformed + conjugated.adjoint()).as_ref()),
    };
    Ok(Check::new(residual, LINEARIZED_THRESHOLD))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorSquare {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl OperatorSquare {
    pub fn sign(self) -> i8 {
        match self {
            Self::Plus => 1,
            Self::Minus => -1,
        }
    }
}

/// `U U^*` for antiunitary operators, `U U` otherwise; must be `+-1`.
pub fn operator_square(op: &SymmetryOp) -> Result<OperatorSquare> {
    let square = if op.antiunitary {
        &op.unitary * conjugate(&op.unitary)
    } else {
        &op.unitary * &op.unitary
    };
    let id = identity(op.dim());
    let plus = max_abs_diff(&square, &id);
    let minus = max_abs((&square + &id).as_ref());
    if plus <= 1e-10 {
        Ok(OperatorSquare::Plus)
    } else if minus <= 1e-10 {
        Ok(OperatorSquare::Minus)
    } else {
        Err(Error::NotSignDefinite {
            deviation: plus.min(minus),
        })
    }
}

/// Candidate operators to test; missing candidates count as absent symmetries.
#[derive(Debug, Clone, Default)]
pub struct SymmetryCandidates {
    pub time_reversal: Option<SymmetryOp>,
    pub particle_hole: Option<SymmetryOp>,
    pub chiral: Option<SymmetryOp>,
    pub sublattice: Option<SymmetryOp>,
}

impl SymmetryCandidates {
    /// `T = 1`, `C = sigma_x`, `Gamma = sigma_x`, `S = sigma_z` per cell.
    pub fn model(cells: usize) -> Self {
        let id = identity(2);
        Self {
            time_reversal: Some(
                SymmetryOp::time_reversal(block_diagonal(&id, cells)).expect("unitary"),
            ),
            particle_hole: Some(
                SymmetryOp::particle_hole(block_diagonal(&sigma_x(), cells)).expect("unitary"),
            ),
            chiral: Some(SymmetryOp::chiral(block_diagonal(&sigma_x(), cells)).expect("unitary")),
            sublattice: Some(
                SymmetryOp::sublattice(block_diagonal(&sigma_z(), cells)).expect("unitary"),
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub degeneracy_tol: f64,
    pub perturbation: Option<Perturbation>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            degeneracy_tol: DEFAULT_DEGENERACY_TOL,
            perturbation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub phs: bool,
    pub trs: bool,
    pub cs: bool,
    pub sublattice: bool,
    pub ltrs: bool,
    pub lcs: bool,
    pub trs_square: Option<OperatorSquare>,
    pub ltrs_square: Option<OperatorSquare>,
    pub phs_square: Option<OperatorSquare>,
    pub residuals: BTreeMap<String, f64>,
}

/// Tests every candidate on a real-space matrix.
pub fn analyze(
    h: &ComplexMatrix,
    candidates: &SymmetryCandidates,
    options: AnalysisOptions,
) -> Result<SymmetryReport> {
    let family = HamiltonianFamily::RealSpace(h.clone());
    let mut residuals = BTreeMap::new();
    let needs_conjugate = candidates.time_reversal.is_some() || candidates.chiral.is_some();
    let conjugated = if needs_conjugate {
        Some(match options.perturbation {
            Some(p) => conjugate_spectrum_perturbed(h, options.degeneracy_tol, p)?,
            None => conjugate_spectrum(h, options.degeneracy_tol)?,
        })
    } else {
        None
    };
    let mut ordinary = |name: &str, op: &Option<SymmetryOp>, relation| -> Result<bool> {
        match op {
            Some(op) => {
                let check = check_ordinary(&family, op, relation)?;
                residuals.insert(name.to_string(), check.residual);
                Ok(check.holds)
            }
            None => Ok(false),
        }
    };
    let phs = ordinary("phs", &candidates.particle_hole, Relation::ParticleHole)?;
    let trs = ordinary("trs", &candidates.time_reversal, Relation::TimeReversal)?;
    let cs = ordinary("cs", &candidates.chiral, Relation::Chiral)?;
    let sublattice = ordinary("sublattice", &candidates.sublattice, Relation::Sublattice)?;
    let mut linearized = |name: &str, op: &Option<SymmetryOp>, kind| -> Result<bool> {
        match (op, &conjugated) {
            (Some(op), Some(c)) => {
                let check = linearized_residual(h, c, op, kind)?;
                residuals.insert(name.to_string(), check.residual);
                Ok(check.holds)
            }
            _ => Ok(false),
        }
    };
    let ltrs = linearized(
        "ltrs",
        &candidates.time_reversal,
        LinearizedKind::TimeReversal,
    )?;
    let lcs = linearized("lcs", &candidates.chiral, LinearizedKind::Chiral)?;
    let square = |present: bool, op: &Option<SymmetryOp>| -> Result<Option<OperatorSquare>> {
        match (present, op) {
            (true, Some(op)) => operator_square(op).map(Some),
            _ => Ok(None),
        }
    };
    Ok(SymmetryReport {
        phs,
        trs,
        cs,
        sublattice,
        ltrs,
        lcs,
        trs_square: square(trs, &candidates.time_reversal)?,
        ltrs_square: square(ltrs, &candidates.time_reversal)?,
        phs_square: square(phs, &candidates.particle_hole)?,
        residuals,
    })
}

/// Report for the real-space chain with the model's own operators.
pub fn model_symmetry_report(params: &ModelParams, bc: Boundary) -> Result<SymmetryReport> {
    let h = lattice_hamiltonian(params, bc)?;
    analyze(
        &h,
        &SymmetryCandidates::model(params.cells),
        AnalysisOptions::default(),
    )
}

/// Bloch family of the model on a uniform grid.
pub fn model_bloch_family(params: &ModelParams, grid: usize) -> HamiltonianFamily {
    HamiltonianFamily::bloch(grid, |k| bloch_hamiltonian(params, k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InvariantGroup {
    #[serde(rename = "0")]
    Trivial,
    Z,
    Z2,
}

impl fmt::Display for InvariantGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Trivial => "0",
            Self::Z => "Z",
            Self::Z2 => "Z2",
        })
    }
}

/// Altland-Zirnbauer classes of Hermitian Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AzClass {
    A,
    AI,
    AII,
    AIII,
    BDI,
    CII,
    D,
    C,
    DIII,
    CI,
}

impl AzClass {
    pub const ALL: [AzClass; 10] = [
        Self::A,
        Self::AI,
        Self::AII,
        Self::AIII,
        Self::BDI,
        Self::CII,
        Self::D,
        Self::C,
        Self::DIII,
        Self::CI,
    ];

    /// `(TRS, PHS, CS)` with `0` for absent and the operator square otherwise.
    pub fn signature(self) -> (i8, i8, u8) {
        match self {
            Self::A => (0, 0, 0),
            Self::AI => (1, 0, 0),
            Self::AII => (-1, 0, 0),
            Self::AIII => (0, 0, 1),
            Self::BDI => (1, 1, 1),
            Self::CII => (-1, -1, 1),
            Self::D => (0, 1, 0),
            Self::C => (0, -1, 0),
            Self::DIII => (-1, 1, 1),
            Self::CI => (1, -1, 1),
        }
    }
}

impl fmt::Display for AzClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Classes of non-Hermitian steady states: the AZ class of `H_eff`,
/// starred when the defining symmetries are the linearized ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateClass(pub AzClass);

impl StateClass {
    /// Classes whose defining TRS or CS is linearized carry a star.
    pub fn starred(self) -> bool {
        !matches!(self.0, AzClass::A | AzClass::D | AzClass::C)
    }

    /// Invariant groups in spatial dimensions 1, 2 and 3.
    pub fn invariant_groups(self) -> [InvariantGroup; 3] {
        use InvariantGroup::{Trivial as O, Z, Z2};
        match self.0 {
            AzClass::A => [O, Z, O],
            AzClass::AI => [O, O, O],
            AzClass::AII => [O, Z2, Z2],
            AzClass::AIII => [Z, O, Z],
            AzClass::BDI => [Z, O, O],
            AzClass::CII => [Z, O, Z2],
            AzClass::D => [Z2, Z, O],
            AzClass::C => [O, Z, O],
            AzClass::DIII => [Z2, Z2, Z],
            AzClass::CI => [O, O, Z],
        }
    }
}

impl fmt::Display for StateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0, if self.starred() { "*" } else { "" })
    }
}

impl Serialize for StateClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassLabel {
    pub state_class: StateClass,
    pub band_class_of_effective: AzClass,
    pub invariant_groups: [InvariantGroup; 3],
}

/// Maps `(LTRS, PHS, LCS)` to its row of the steady-state table.
pub fn classify(report: &SymmetryReport) -> Result<ClassLabel> {
    let sign = |present: bool, square: Option<OperatorSquare>| -> i8 {
        if present {
            square.map_or(0, OperatorSquare::sign)
        } else {
            0
        }
    };
    let ltrs = sign(report.ltrs, report.ltrs_square);
    let phs = sign(report.phs, report.phs_square);
    let lcs = u8::from(report.lcs);
    let class = AzClass::ALL
        .into_iter()
        .find(|c| c.signature() == (ltrs, phs, lcs))
        .ok_or(Error::InconsistentReport { ltrs, phs, lcs })?;
    let state_class = StateClass(class);
    Ok(ClassLabel {
        state_class,
        band_class_of_effective: class,
        invariant_groups: state_class.invariant_groups(),
    })
}
