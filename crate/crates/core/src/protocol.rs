//! The preparation procedure: measure box A₁ with `M̃_i`, label box A₂ with
//! `(i, j)`, and collect the four conditional states with their
//! probabilities.
//!
//! There is no way to act on box A₂ after the A₁ measurement, so the
//! i-averaged states agree by construction rather than by assumption.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{kron, partial_trace_first, ComplexMatrix};
use crate::quantum::{
    bb84_measurements, bell_phi_plus, local_unitary, tilted_measurement, werner_state,
    DensityOperator, NoiseSpec, TwoOutcomeMeasurement,
};

/// Branches with probability below this carry no conditional state.
pub const P_MIN: f64 = 1e-12;

/// `(i, j)`: measurement setting and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchLabel {
    pub setting: u8,
    pub outcome: u8,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 4] = [
        BranchLabel::new(0, 0),
        BranchLabel::new(0, 1),
        BranchLabel::new(1, 0),
        BranchLabel::new(1, 1),
    ];

    pub const fn new(setting: u8, outcome: u8) -> Self {
        Self { setting, outcome }
    }

    /// Position in [`BranchLabel::ALL`].
    pub fn index(self) -> usize {
        2 * self.setting as usize + self.outcome as usize
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.setting, self.outcome)
    }
}

/// Source state and the two measurements available on box A₁.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparationScenario {
    state: DensityOperator,
    measurements: [TwoOutcomeMeasurement; 2],
    dim_a: usize,
    dim_b: usize,
    p_min: f64,
}

impl PreparationScenario {
    pub fn new(
        state: DensityOperator,
        measurement0: TwoOutcomeMeasurement,
        measurement1: TwoOutcomeMeasurement,
    ) -> Result<Self> {
        let dim_a = measurement0.dim();
        if measurement1.dim() != dim_a {
            return Err(Error::DimensionMismatch {
                context: "measurement dimensions",
                expected: dim_a,
                found: measurement1.dim(),
            });
        }
        if !state.dim().is_multiple_of(dim_a) {
            return Err(Error::DimensionMismatch {
                context: "source dimension divisible by measured box",
                expected: dim_a,
                found: state.dim(),
            });
        }
        Ok(Self {
            dim_b: state.dim() / dim_a,
            state,
            measurements: [measurement0, measurement1],
            dim_a,
            p_min: P_MIN,
        })
    }

    /// Bell source with the computational and diagonal measurements.
    pub fn ideal() -> Self {
        let (m0, m1) = bb84_measurements();
        Self::new(bell_phi_plus().projector(), m0, m1).unwrap()
    }

    /// The ideal setup degraded by one noise model.
    pub fn with_noise(noise: &NoiseSpec) -> Result<Self> {
        noise.validate()?;
        let (m0, m1) = bb84_measurements();
        let bell = bell_phi_plus().projector();
        match noise {
            NoiseSpec::None => Ok(Self::ideal()),
            NoiseSpec::Werner { visibility } => Self::new(werner_state(*visibility)?, m0, m1),
            NoiseSpec::TiltedMeasurement { alpha } => {
                Self::new(bell, m0, tilted_measurement(*alpha))
            }
            NoiseSpec::LocalUnitary { theta, phi, lambda } => {
                let u = kron(
                    &ComplexMatrix::identity(2),
                    &local_unitary(*theta, *phi, *lambda),
                );
                let rotated = &(&u * bell.matrix()) * &u.adjoint();
                Self::new(DensityOperator::new(rotated)?, m0, m1)
            }
            NoiseSpec::Custom { state } => Self::new(state.clone(), m0, m1),
        }
    }

    pub fn with_p_min(mut self, p_min: f64) -> Self {
        self.p_min = p_min;
        self
    }

    pub fn state(&self) -> &DensityOperator {
        &self.state
    }

    pub fn measurement(&self, setting: usize) -> &TwoOutcomeMeasurement {
        &self.measurements[setting]
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }
}

/// Result of steering with one measurement element.
#[derive(Debug, Clone, PartialEq)]
pub struct Steered {
    pub probability: f64,
    /// `None` when `probability < p_min`.
    pub conditional: Option<DensityOperator>,
    /// `tr_{A₁}[(E ⊗ I) ρ̃]`, Hermitian part.
    pub unnormalized: ComplexMatrix,
}

/// Measures box A₁ of `state` with `element` and returns the outcome
/// probability and the normalized state left in box A₂.
pub fn steer_branch(
    state: &DensityOperator,
    element: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    p_min: f64,
) -> Result<Steered> {
    if element.rows() != dim_a || !element.is_square() {
        return Err(Error::DimensionMismatch {
            context: "measurement element",
            expected: dim_a,
            found: element.rows(),
        });
    }
    if state.dim() != dim_a * dim_b {
        return Err(Error::DimensionMismatch {
            context: "bipartite source",
            expected: dim_a * dim_b,
            found: state.dim(),
        });
    }
    let lifted = kron(element, &ComplexMatrix::identity(dim_b));
    let unnormalized =
        partial_trace_first(&(&lifted * state.matrix()), dim_a, dim_b)?.hermitian_part();
    let probability = unnormalized.trace().re.max(0.0);
    let conditional = if probability >= p_min {
        let scaled = unnormalized.scale_real(1.0 / probability);
        Some(match DensityOperator::new(scaled.clone()) {
            Ok(rho) => rho,
            // amplification of rounding error in low-probability branches
            Err(_) => DensityOperator::from_clipped(scaled)?,
        })
    } else {
        None
    };
    Ok(Steered {
        probability,
        conditional,
        unnormalized,
    })
}

/// One labeled conditional state in box A₂.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeredBranch {
    pub label: BranchLabel,
    pub probability: f64,
    pub conditional: Option<DensityOperator>,
    unnormalized: ComplexMatrix,
}

impl SteeredBranch {
    pub fn is_defined(&self) -> bool {
        self.conditional.is_some()
    }
}

/// The four branches together with the two i-averaged states.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeredEnsemble {
    branches: [SteeredBranch; 4],
    averaged: [DensityOperator; 2],
}

impl SteeredEnsemble {
    /// Builds an ensemble from declared `(p(j|i), ρ_{i,j})` entries in
    /// [`BranchLabel::ALL`] order, for feeding hand-written ensembles to the
    /// analysis. Probabilities must be normalized per setting.
    pub fn from_declared(entries: [(f64, Option<DensityOperator>); 4]) -> Result<Self> {
        let dim = entries
            .iter()
            .find_map(|(_, rho)| rho.as_ref().map(DensityOperator::dim))
            .ok_or(Error::TooFewStates {
                required: 1,
                found: 0,
            })?;
        let mut branches = Vec::with_capacity(4);
        for ((probability, conditional), label) in entries.into_iter().zip(BranchLabel::ALL) {
            if !(0.0..=1.0).contains(&probability) {
                return Err(Error::OutOfRange {
                    name: "branch probability",
                    value: probability,
                    range: "[0,1]",
                });
            }
            let unnormalized = match &conditional {
                Some(rho) if rho.dim() != dim => {
                    return Err(Error::DimensionMismatch {
                        context: "declared branch state",
                        expected: dim,
                        found: rho.dim(),
                    })
                }
                Some(rho) => rho.matrix().scale_real(probability),
                None => ComplexMatrix::zeros(dim, dim),
            };
            branches.push(SteeredBranch {
                label,
                probability,
                conditional,
                unnormalized,
            });
        }
        Self::assemble(branches.try_into().expect("four branches"))
    }

    fn assemble(branches: [SteeredBranch; 4]) -> Result<Self> {
        let mut averaged = Vec::with_capacity(2);
        for setting in 0..2 {
            let total = branches[2 * setting].probability + branches[2 * setting + 1].probability;
            if (total - 1.0).abs() > 1e-10 {
                return Err(Error::OutOfRange {
                    name: "p(0|i) + p(1|i)",
                    value: total,
                    range: "1 ± 1e-10",
                });
            }
            let sum = &branches[2 * setting].unnormalized + &branches[2 * setting + 1].unnormalized;
            averaged.push(DensityOperator::new(sum)?);
        }
        Ok(Self {
            branches,
            averaged: averaged.try_into().expect("two settings"),
        })
    }

    pub fn branches(&self) -> &[SteeredBranch; 4] {
        &self.branches
    }

    pub fn branch(&self, label: BranchLabel) -> &SteeredBranch {
        &self.branches[label.index()]
    }

    /// `p(j|i)`.
    pub fn probability(&self, setting: usize, outcome: usize) -> f64 {
        self.branches[2 * setting + outcome].probability
    }

    /// `[[p(0|0), p(1|0)], [p(0|1), p(1|1)]]`.
    pub fn probability_table(&self) -> [[f64; 2]; 2] {
        [
            [self.probability(0, 0), self.probability(0, 1)],
            [self.probability(1, 0), self.probability(1, 1)],
        ]
    }

    /// Dimension of box A₂.
    pub fn dim(&self) -> usize {
        self.averaged[0].dim()
    }

    pub fn averaged(&self, setting: usize) -> &DensityOperator {
        &self.averaged[setting]
    }
}

/// Runs both measurements on box A₁ and collects all four branches.
pub fn run_preparation(scenario: &PreparationScenario) -> Result<SteeredEnsemble> {
    let mut branches = Vec::with_capacity(4);
    for label in BranchLabel::ALL {
        let element = scenario.measurements[label.setting as usize].element(label.outcome as usize);
        let steered = steer_branch(
            &scenario.state,
            element,
            scenario.dim_a,
            scenario.dim_b,
            scenario.p_min,
        )?;
        branches.push(SteeredBranch {
            label,
            probability: steered.probability,
            conditional: steered.conditional,
            unnormalized: steered.unnormalized,
        });
    }
    SteeredEnsemble::assemble(branches.try_into().expect("four branches"))
}

/// `Σ_j p(j|i) ρ_{i,j}`.
pub fn average_state(ensemble: &SteeredEnsemble, setting: usize) -> &DensityOperator {
    ensemble.averaged(setting)
}
