//! The dissipative two-band chain
//!
//! `H(k) = (U - t cos k) sigma_z + J sin k sigma_y - i gamma sin k sigma_x`
//!
//! in momentum space, its real-space lattice form, and the jump operators
//! whose post-selected dynamics generates it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, from_rows, ComplexMatrix, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Staggered onsite potential `U`.
    pub onsite: f64,
    /// Intra-orbital hopping `t`.
    pub hopping: f64,
    /// Inter-orbital coupling `J`.
    pub coupling: f64,
    /// Non-reciprocal (dissipative) coupling `gamma`, `|gamma| < J`.
    pub gamma: f64,
    /// Temperature; zero means the ground-state limit.
    pub temperature: f64,
    /// Number of unit cells `L`.
    pub cells: usize,
    /// Replaces `sin k` by `sin k + offset`. Zero for the model proper;
    /// non-zero values give the variant without reciprocity.
    #[serde(default)]
    pub sin_offset: f64,
}

impl ModelParams {
    pub fn new(
        onsite: f64,
        hopping: f64,
        coupling: f64,
        gamma: f64,
        temperature: f64,
        cells: usize,
    ) -> Result<Self> {
        let params = Self {
            onsite,
            hopping,
            coupling,
            gamma,
            temperature,
            cells,
            sin_offset: 0.0,
        };
        params.validate()?;
        Ok(params)
    }

    /// `t = 0` is accepted: the sublattice-symmetric point `U = t = 0` is a
    /// legitimate (gapless-boundary) configuration of the chain.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("onsite", self.onsite),
            ("hopping", self.hopping),
            ("coupling", self.coupling),
            ("gamma", self.gamma),
            ("temperature", self.temperature),
            ("sin_offset", self.sin_offset),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("{name} is not finite")));
        }
        if self.hopping < 0.0 {
            return Err(Error::InvalidParams(format!(
                "hopping {} < 0",
                self.hopping
            )));
        }
        if self.coupling <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "coupling {} <= 0",
                self.coupling
            )));
        }
        if self.gamma.abs() >= self.coupling {
            return Err(Error::InvalidParams(format!(
                "|gamma| = {} must stay below coupling {}",
                self.gamma.abs(),
                self.coupling
            )));
        }
        if self.temperature < 0.0 {
            return Err(Error::InvalidParams(format!(
                "temperature {} < 0",
                self.temperature
            )));
        }
        if self.cells < 2 {
            return Err(Error::InvalidParams(format!("cells {} < 2", self.cells)));
        }
        Ok(())
    }

    /// Inverse temperature, `None` at zero temperature.
    pub fn beta(&self) -> Option<f64> {
        (self.temperature > 0.0).then(|| 1.0 / self.temperature)
    }

    pub fn with_onsite(mut self, onsite: f64) -> Self {
        self.onsite = onsite;
        self
    }

    pub fn with_hopping(mut self, hopping: f64) -> Self {
        self.hopping = hopping;
        self
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_cells(mut self, cells: usize) -> Self {
        self.cells = cells;
        self
    }

    pub fn with_sin_offset(mut self, offset: f64) -> Self {
        self.sin_offset = offset;
        self
    }

    /// `J^2 - gamma^2`, evaluated as `(J - gamma)(J + gamma)`.
    pub fn coupling_product(&self) -> f64 {
        (self.coupling - self.gamma) * (self.coupling + self.gamma)
    }

    /// `sqrt(J^2 - gamma^2)`, the coupling of the Hermitianized chain.
    pub fn reduced_coupling(&self) -> f64 {
        self.coupling_product().max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "open" | "obc" => Ok(Self::Open),
            "periodic" | "pbc" => Ok(Self::Periodic),
            other => Err(Error::InvalidParams(format!("unknown boundary '{other}'"))),
        }
    }
}

/// Coefficients `(x, y, z)` of `H(k) = x sigma_x + y sigma_y + z sigma_z`.
pub fn bloch_vector(params: &ModelParams, k: f64) -> [c64; 3] {
    let s = k.sin() + params.sin_offset;
    [
        c64::new(0.0, -params.gamma * s),
        c64::new(params.coupling * s, 0.0),
        c64::new(params.onsite - params.hopping * k.cos(), 0.0),
    ]
}

pub fn bloch_hamiltonian(params: &ModelParams, k: f64) -> ComplexMatrix {
    let s = k.sin() + params.sin_offset;
    let mass = params.onsite - params.hopping * k.cos();
    let (j, g) = (params.coupling, params.gamma);
    from_rows(&[
        [c64::new(mass, 0.0), c64::new(0.0, -(j + g) * s)],
        [c64::new(0.0, (j - g) * s), c64::new(-mass, 0.0)],
    ])
}

/// Hopping blocks of the lattice: `(onsite, forward, backward)` where
/// `forward` couples cell `j` to `j + 1` (row block `j`, column block `j + 1`).
fn lattice_blocks(params: &ModelParams) -> [[[c64; 2]; 2]; 3] {
    let (u, t, j, g, d) = (
        params.onsite,
        params.hopping,
        params.coupling,
        params.gamma,
        params.sin_offset,
    );
    let r = |x: f64| c64::new(x, 0.0);
    let onsite = [
        [r(u), c64::new(0.0, -(j + g) * d)],
        [c64::new(0.0, (j - g) * d), r(-u)],
    ];
    let forward = [
        [r(-t / 2.0), r((j + g) / 2.0)],
        [r(-(j - g) / 2.0), r(t / 2.0)],
    ];
    let backward = [
        [r(-t / 2.0), r(-(j + g) / 2.0)],
        [r((j - g) / 2.0), r(t / 2.0)],
    ];
    [onsite, forward, backward]
}

/// Real-space Hamiltonian on `2L` sites ordered `(a_1, b_1, ..., a_L, b_L)`.
pub fn lattice_hamiltonian(params: &ModelParams, bc: Boundary) -> Result<ComplexMatrix> {
    params.validate()?;
    let cells = params.cells;
    let [onsite, forward, backward] = lattice_blocks(params);
    let mut h = ComplexMatrix::zeros(2 * cells, 2 * cells);
    let mut add = |row: usize, col: usize, block: &[[c64; 2]; 2]| {
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * row + a, 2 * col + b)] += block[a][b];
            }
        }
    };
    for c in 0..cells {
        add(c, c, &onsite);
        let next = c + 1;
        if next < cells {
            add(c, next, &forward);
            add(next, c, &backward);
        } else if bc == Boundary::Periodic {
            add(c, 0, &forward);
            add(0, c, &backward);
        }
    }
    Ok(h)
}

/// `Delta_k`, the gap between the two bands at momentum `k`:
/// `2 sqrt(U^2 + J^2 - gamma^2 + (t^2 - J^2 + gamma^2) cos^2 k - 2 U t cos k)`.
///
/// Evaluated in the equivalent form `2 sqrt((U - t cos k)^2 + (J^2 - gamma^2) sin^2 k)`,
/// which does not cancel when `J^2` and `gamma^2` are both large.
pub fn band_gap(params: &ModelParams, k: f64) -> Result<f64> {
    let mass = params.onsite - params.hopping * k.cos();
    let s = k.sin() + params.sin_offset;
    let radicand = mass * mass + params.coupling_product() * s * s;
    if radicand < 0.0 {
        return Err(Error::ComplexGap { radicand });
    }
    Ok(2.0 * radicand.sqrt())
}

/// Onsite values `U` at which the bulk gap closes (at `k = pi` and `k = 0`).
pub fn gap_closing_points(params: &ModelParams) -> (f64, f64) {
    (-params.hopping, params.hopping)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LindbladNormalization {
    /// Prefactor `sqrt(|gamma|)`: reproduces the model's anti-Hermitian part.
    Consistent,
    /// Prefactor `sqrt(2 |gamma|)` as sometimes written; over-counts the
    /// dissipative hopping by a factor of two.
    AsPrinted,
}

impl LindbladNormalization {
    pub fn prefactor(self, gamma: f64) -> f64 {
        match self {
            Self::Consistent => gamma.abs().sqrt(),
            Self::AsPrinted => (2.0 * gamma.abs()).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LindbladOptions {
    pub normalization: LindbladNormalization,
    /// Under open boundaries the `j = 0` and `j = L` operators each touch a
    /// single site. Dropping them removes loss from the two end sites.
    pub keep_boundary_singles: bool,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self {
            normalization: LindbladNormalization::Consistent,
            keep_boundary_singles: true,
        }
    }
}

/// Jump operators `L = sum_i coefficients[i] c_i` over the `2L` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LindbladSet {
    pub operators: Vec<Vec<c64>>,
    pub prefactor: f64,
}

impl LindbladSet {
    /// `sum_a l_a^* l_a^T`, the single-particle matrix of `sum_a L_a^dag L_a`.
    pub fn loss_matrix(&self) -> ComplexMatrix {
        let n = self.operators.first().map_or(0, Vec::len);
        let mut m = ComplexMatrix::zeros(n, n);
        for op in &self.operators {
            for (i, ci) in op.iter().enumerate().filter(|(_, c)| **c != ZERO) {
                for (j, cj) in op.iter().enumerate().filter(|(_, c)| **c != ZERO) {
                    m[(i, j)] += ci.conj() * cj;
                }
            }
        }
        m
    }
}

pub fn lindblad_operators(params: &ModelParams, bc: Boundary) -> Result<LindbladSet> {
    lindblad_operators_with(params, bc, LindbladOptions::default())
}

/// `L_1j = p (a_j + i s b_{j+1})`, `L_2j = p (b_j + i s a_{j+1})` with
/// `s = sign(gamma)`; `j = 0..=L` under open boundaries (absent sites are
/// zero) and `j = 1..=L` with wrap-around under periodic ones.
pub fn lindblad_operators_with(
    params: &ModelParams,
    bc: Boundary,
    options: LindbladOptions,
) -> Result<LindbladSet> {
    params.validate()?;
    if params.gamma == 0.0 {
        return Err(Error::GammaZero);
    }
    let cells = params.cells;
    let prefactor = options.normalization.prefactor(params.gamma);
    let phase = c64::new(0.0, params.gamma.signum()) * prefactor;
    let amplitude = ONE * prefactor;
    // Cells are 1-based here; `None` marks the absent sites 0 and L + 1.
    let site = |cell: usize, orbital: usize| -> Option<usize> {
        match bc {
            Boundary::Open => (1..=cells)
                .contains(&cell)
                .then(|| 2 * (cell - 1) + orbital),
            Boundary::Periodic => Some(2 * ((cell - 1) % cells) + orbital),
        }
    };
    let range = match bc {
        Boundary::Open => 0..=cells,
        Boundary::Periodic => 1..=cells,
    };
    let mut operators = Vec::new();
    for j in range {
        if bc == Boundary::Open && !options.keep_boundary_singles && (j == 0 || j == cells) {
            continue;
        }
        for (own, other) in [(0, 1), (1, 0)] {
            let mut op = vec![ZERO; 2 * cells];
            if let Some(i) = site(j, own) {
                op[i] += amplitude;
            }
            if let Some(i) = site(j + 1, other) {
                op[i] += phase;
            }
            operators.push(op);
        }
    }
    Ok(LindbladSet {
        operators,
        prefactor,
    })
}

/// `max | H - (H_S - (i/2) sum_a l_a^dag l_a + i p^2 I) |` at the
/// single-particle level, `p` the jump-operator prefactor.
pub fn lindblad_residual(params: &ModelParams, bc: Boundary, set: &LindbladSet) -> Result<f64> {
    let h = lattice_hamiltonian(params, bc)?;
    let n = h.nrows();
    let loss = set.loss_matrix();
    if loss.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "jump operators act on {} sites, lattice has {n}",
            loss.nrows()
        )));
    }
    let constant = c64::new(0.0, set.prefactor * set.prefactor);
    let half_i = c64::new(0.0, 0.5);
    let mut residual = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let hermitian = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
            let mut rebuilt = hermitian - half_i * loss[(i, j)];
            if i == j {
                rebuilt += constant;
            }
            residual = residual.max((h[(i, j)] - rebuilt).norm());
        }
    }
    Ok(residual)
}

pub fn verify_lindblad_consistency(params: &ModelParams, bc: Boundary) -> Result<f64> {
    let set = lindblad_operators(params, bc)?;
    lindblad_residual(params, bc, &set)
}
