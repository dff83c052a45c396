use std::path::Path;

use nhtopo::effective::{default_edge_window, density_profile, edge_accumulation_with_window};
use nhtopo::invariants::{lattice_spectrum, phase_diagram, winding_sweep};
use nhtopo::linalg::ComplexMatrix;
use nhtopo::statmech::{
    density_couplings, effective_from_general, mode_probabilities, random_lossy_system, solve_general,
    theorem3_check, GeneralSystem, SolvePath,
};
use nhtopo::symmetry::{analyze, classify, AnalysisOptions, SymmetryCandidates, SymmetryOp};
use nhtopo::sweep::{map_ordered, Execution};
use nhtopo::Error;
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::matrix_file::{read_operator, MatrixFile};
use crate::output::{col, complex, complex_col, matrix, Cell, Output, Table};
use crate::settings::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    PhaseDiagram,
    SpectrumScan,
    Density,
    Winding,
    Classify,
    Metric,
    Theorem3Demo,
}

impl Command {
    pub const ALL: [(Self, &'static str, &'static str); 7] = [
        (Self::PhaseDiagram, "phase-diagram", "regions I-IV over a (U, gamma) grid"),
        (Self::SpectrumScan, "spectrum-scan", "lattice spectra and zero modes along a U sweep"),
        (Self::Density, "density", "particles per cell of the steady state"),
        (Self::Winding, "winding", "band and state winding numbers along a U sweep"),
        (Self::Classify, "classify", "symmetry report and class of a matrix"),
        (Self::Metric, "metric", "metric operator and steady state of a matrix with couplings"),
        (Self::Theorem3Demo, "theorem3-demo", "reduced steady state against the alpha limit"),
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().find(|(_, n, _)| *n == name).map(|(c, _, _)| *c)
    }

    pub fn run(self, config: &RunConfig, execution: Execution) -> Result<Output> {
        match self {
            Self::PhaseDiagram => Ok(phase_diagram_table(config, execution)),
            Self::SpectrumScan => Ok(spectrum_table(config, execution)),
            Self::Density => density(config),
            Self::Winding => Ok(winding_table(config, execution)),
            Self::Classify => classify_matrix(config),
            Self::Metric => metric(config),
            Self::Theorem3Demo => theorem3_demo(config, execution),
        }
    }
}

fn error_text(e: &Error) -> Cell {
    Cell::Text(e.to_string())
}

fn phase_diagram_table(config: &RunConfig, execution: Execution) -> Output {
    let mut table = Table::new(&[col("U"), col("gamma"), col("W"), col("w"), col("region"), col("error")]);
    let samples = phase_diagram(
        &config.params,
        &config.u_range.values(),
        &config.gamma_range.values(),
        config.grid,
        execution,
    );
    for s in samples {
        let (u, g) = (Cell::Float(s.onsite), Cell::Float(s.gamma));
        table.push(match s.outcome {
            Ok(p) => vec![
                u,
                g,
                Cell::Int(p.band_winding),
                Cell::Int(p.state_winding),
                Cell::Text(p.region.to_string()),
                Cell::Empty,
            ],
            Err(Error::OnBoundary { .. }) => {
                vec![u, g, Cell::Empty, Cell::Empty, Cell::Text("boundary".into()), Cell::Empty]
            }
            Err(e) => vec![u, g, Cell::Empty, Cell::Empty, Cell::Empty, error_text(&e)],
        });
    }
    Output::Table(table)
}

fn spectrum_table(config: &RunConfig, execution: Execution) -> Output {
    let mut table = Table::new(&[col("U"), col("index"), complex_col("E"), col("is_zero_mode"), col("error")]);
    let u_values = config.u_range.values();
    let spectra = map_ordered(&u_values, execution, |&u| {
        let (mut values, scale) = lattice_spectrum(&config.params.with_onsite(u), config.boundary, config.which)?;
        values.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Ok::<_, Error>((values, config.tolerances.zero_mode * scale))
    });
    for (&u, spectrum) in u_values.iter().zip(spectra) {
        match spectrum {
            Ok((values, tol)) => {
                for (i, e) in values.into_iter().enumerate() {
                    table.push(vec![
                        Cell::Float(u),
                        Cell::from(i),
                        Cell::Complex(e),
                        Cell::Bool(e.norm() < tol),
                        Cell::Empty,
                    ]);
                }
            }
            Err(e) => table.push(vec![Cell::Float(u), Cell::Empty, Cell::Empty, Cell::Empty, error_text(&e)]),
        }
    }
    Output::Table(table)
}

fn density(config: &RunConfig) -> Result<Output> {
    let params = &config.params;
    let particles = config.particles.unwrap_or(params.cells + 1);
    let profile = density_profile(params, config.boundary, particles)?;
    let window = config.window.unwrap_or_else(|| default_edge_window(params.cells));
    let mut table = Table::new(&[col("cell"), col("occupation")]);
    for (cell, &n) in profile.per_cell.iter().enumerate() {
        table.push(vec![Cell::from(cell), Cell::Float(n)]);
    }
    table.summary = vec![
        ("edge_accumulation", Cell::Float(edge_accumulation_with_window(&profile, window))),
        ("window", Cell::from(window)),
        ("particles", Cell::from(particles)),
    ];
    Ok(Output::Table(table))
}

fn winding_table(config: &RunConfig, execution: Execution) -> Output {
    let mut table = Table::new(&[col("U"), col("W"), col("w")]);
    for row in winding_sweep(&config.params, &config.u_range.values(), config.grid, execution) {
        table.push(vec![
            Cell::Float(row.onsite),
            row.band.map_or(Cell::Empty, |r| Cell::Int(r.value)),
            row.state.map_or(Cell::Empty, |r| Cell::Int(r.value)),
        ]);
    }
    Output::Table(table)
}

fn require_matrix(config: &RunConfig) -> Result<MatrixFile> {
    let path = config
        .matrix
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --matrix PATH".into()))?;
    MatrixFile::read(path)
}

fn candidates(config: &RunConfig, dim: usize) -> Result<SymmetryCandidates> {
    let ops = &config.operators;
    let mut candidates = if ops.model {
        if !dim.is_multiple_of(2) {
            return Err(CliError::Usage(format!("model operators need an even dimension, got {dim}")));
        }
        SymmetryCandidates::model(dim / 2)
    } else {
        SymmetryCandidates::default()
    };
    let load = |path: &Path, make: fn(ComplexMatrix) -> nhtopo::Result<SymmetryOp>| -> Result<SymmetryOp> {
        let unitary = read_operator(path)?;
        if unitary.nrows() != dim {
            return Err(CliError::Usage(format!(
                "{}: operator is {}x{}, matrix is {dim}x{dim}",
                path.display(),
                unitary.nrows(),
                unitary.nrows()
            )));
        }
        Ok(make(unitary)?)
    };
    if let Some(p) = &ops.time_reversal {
        candidates.time_reversal = Some(load(p, SymmetryOp::time_reversal)?);
    }
    if let Some(p) = &ops.particle_hole {
        candidates.particle_hole = Some(load(p, SymmetryOp::particle_hole)?);
    }
    if let Some(p) = &ops.chiral {
        candidates.chiral = Some(load(p, SymmetryOp::chiral)?);
    }
    if let Some(p) = &ops.sublattice {
        candidates.sublattice = Some(load(p, SymmetryOp::sublattice)?);
    }
    Ok(candidates)
}

fn classify_matrix(config: &RunConfig) -> Result<Output> {
    let file = require_matrix(config)?;
    let candidates = candidates(config, file.hamiltonian.nrows())?;
    let options = AnalysisOptions {
        degeneracy_tol: config.tolerances.degeneracy,
        perturbation: None,
    };
    let report = analyze(&file.hamiltonian, &candidates, options)?;
    let label = classify(&report);
    Ok(Output::Report(json!({
        "report": report,
        "label": label.as_ref().ok(),
        "label_error": label.as_ref().err().map(ToString::to_string),
    })))
}

fn metric(config: &RunConfig) -> Result<Output> {
    let file = require_matrix(config)?;
    let couplings = if file.couplings.is_empty() {
        density_couplings(file.hamiltonian.nrows())
    } else {
        file.couplings
    };
    let system = GeneralSystem::new(file.hamiltonian, couplings)?;
    let options = &config.tolerances.metric;
    let solved = solve_general(&system, options)?;
    let solution = &solved.solution;
    let probabilities = mode_probabilities(&solution.basis, &solution.metric, &solution.modes, config.beta)?;
    // The reduced metric is singular off the retained subspace, so only the
    // full solution defines an effective Hamiltonian on the whole space.
    let effective = match solved.path {
        SolvePath::Full => Some(effective_from_general(&system.hamiltonian, &solution.metric, config.beta)?),
        SolvePath::Reduced => None,
    };
    let energies: Vec<Value> = solution
        .modes
        .iter()
        .map(|&m| complex(solution.basis.eigenvalues[m]))
        .collect();
    Ok(Output::Report(json!({
        "path": solved.path,
        "beta": config.beta,
        "metric": matrix(&solution.metric),
        "modes": solution.modes,
        "mode_weights": solution.mode_weights,
        "energies": energies,
        "probabilities": probabilities.probabilities,
        "extra_nullity": solution.extra_nullity,
        "residuals": solution.residuals,
        "effective_hamiltonian": effective.as_ref().map(matrix),
    })))
}

fn theorem3_demo(config: &RunConfig, execution: Execution) -> Result<Output> {
    let systems: Vec<(u64, GeneralSystem)> = match &config.matrix {
        Some(_) => {
            let file = require_matrix(config)?;
            vec![(config.seed, GeneralSystem::new(file.hamiltonian, file.couplings)?)]
        }
        None => (0..config.systems as u64)
            .map(|i| {
                let seed = config.seed + i;
                Ok((seed, random_lossy_system(config.size, config.retained, seed)?))
            })
            .collect::<Result<_>>()?,
    };
    let jobs: Vec<(u64, &GeneralSystem, f64)> = systems
        .iter()
        .flat_map(|(seed, s)| config.alphas.iter().map(move |&a| (*seed, s, a)))
        .collect();
    let options = config.tolerances.metric;
    let checks = map_ordered(&jobs, execution, |&(_, system, alpha)| {
        theorem3_check(system, alpha, config.beta, &options)
    });
    let mut table = Table::new(&[col("seed"), col("alpha"), col("discrepancy"), col("retained"), col("error")]);
    for (&(seed, _, alpha), check) in jobs.iter().zip(checks) {
        let seed = Cell::Int(seed as i64);
        table.push(match check {
            Ok(c) => vec![seed, Cell::Float(alpha), Cell::Float(c.discrepancy), Cell::from(c.retained_modes.len()), Cell::Empty],
            Err(e) => vec![seed, Cell::Float(alpha), Cell::Empty, Cell::Empty, error_text(&e)],
        });
    }
    Ok(Output::Table(table))
}
