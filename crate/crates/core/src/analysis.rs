//! Dimension analysis of a steered ensemble.
//!
//! Given the four branches `(i, j)`, this module
//!
//! 1. measures how far the two i-averaged states are apart (the
//!    no-signaling residual, zero for every protocol output),
//! 2. if all branches are pure, rebuilds `|1,0⟩` and `|1,1⟩` from
//!    `|0,0⟩` and `|0,1⟩` by applying the common average operator to the
//!    vectors `|(1,1)⊥⟩` and `|(1,0)⊥⟩`,
//! 3. falls back to the degenerate case `|1,1⟩ = e^{iθ}|1,0⟩` when the
//!    two i=1 states are parallel,
//! 4. reports the numerical span rank, which never exceeds two, and
//!    whether the quartet admits unambiguous discrimination.
//!
//! Mixed ensembles only get purities and fidelities; the span analysis is
//! restricted to the pure case.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    inner, norm, numeric_rank, phase_aligned_distance, trace_norm, RankResult, DEFAULT_RANK_REL_TOL,
};
use crate::protocol::{BranchLabel, SteeredEnsemble, P_MIN};
use crate::quantum::{
    dominant_pure_component, fidelity, ket0, ket1, ket_minus, ket_plus, PureState, PURITY_TOL,
};

/// Pairwise fidelity above which two states count as identical.
pub const IDENTICAL_FIDELITY_TOL: f64 = 1e-9;

/// Numerical thresholds for the analysis, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rank_rel_tol: f64,
    pub purity_tol: f64,
    pub nosignal_tol: f64,
    pub degenerate_tol: f64,
    pub p_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel_tol: DEFAULT_RANK_REL_TOL,
            purity_tol: PURITY_TOL,
            nosignal_tol: 1e-11,
            degenerate_tol: 1e-9,
            p_min: P_MIN,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("rank_rel_tol", self.rank_rel_tol),
            ("purity_tol", self.purity_tol),
            ("nosignal_tol", self.nosignal_tol),
            ("degenerate_tol", self.degenerate_tol),
            ("p_min", self.p_min),
        ];
        for (name, value) in named {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        Ok(())
    }

    fn is_degenerate(&self, overlap_sq: f64) -> bool {
        1.0 - overlap_sq < self.degenerate_tol
    }
}

/// Trace distance between the two i-averaged states.
pub fn nosignaling_residual(ensemble: &SteeredEnsemble) -> Result<f64> {
    let diff = ensemble.averaged(0).matrix() - ensemble.averaged(1).matrix();
    Ok(0.5 * trace_norm(&diff)?)
}

/// `|1,0⟩ − ⟨1,1|1,0⟩|1,1⟩`, unnormalized. Orthogonal to `s11`; its squared
/// norm is `1 − |⟨1,1|1,0⟩|²`.
pub fn perp_state(s10: &PureState, s11: &PureState) -> Vec<Complex64> {
    perp(s10.amplitudes(), Some(s11.amplitudes()))
}

fn perp(target: &[Complex64], other: Option<&[Complex64]>) -> Vec<Complex64> {
    match other {
        Some(other) => {
            assert_eq!(target.len(), other.len(), "perp_state dimension mismatch");
            let c = inner(other, target);
            target.iter().zip(other).map(|(t, o)| t - c * o).collect()
        }
        None => target.to_vec(),
    }
}

/// Four pure steered states, possibly with vacuous branches, and the
/// probability table used as prefactors in the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct PureQuartet {
    states: [Option<PureState>; 4],
    probabilities: [[f64; 2]; 2],
}

impl PureQuartet {
    /// `states` in [`BranchLabel::ALL`] order; `probabilities[i][j] = p(j|i)`.
    pub fn new(states: [Option<PureState>; 4], probabilities: [[f64; 2]; 2]) -> Result<Self> {
        let dims: Vec<usize> = states.iter().flatten().map(PureState::dim).collect();
        if let Some(&d) = dims.first() {
            if let Some(&bad) = dims.iter().find(|&&x| x != d) {
                return Err(Error::DimensionMismatch {
                    context: "quartet states",
                    expected: d,
                    found: bad,
                });
            }
        }
        Ok(Self {
            states,
            probabilities,
        })
    }

    /// Dominant pure components of an ensemble whose defined branches are
    /// all pure; `None` when any defined branch is mixed.
    pub fn from_ensemble(ensemble: &SteeredEnsemble, purity_tol: f64) -> Result<Option<Self>> {
        let mut states: [Option<PureState>; 4] = Default::default();
        for (slot, branch) in states.iter_mut().zip(ensemble.branches()) {
            if let Some(rho) = &branch.conditional {
                if rho.purity() < 1.0 - purity_tol {
                    return Ok(None);
                }
                *slot = Some(dominant_pure_component(rho)?.state);
            }
        }
        Self::new(states, ensemble.probability_table()).map(Some)
    }

    /// Same states, different prefactors (e.g. sampled frequencies).
    pub fn with_probabilities(mut self, probabilities: [[f64; 2]; 2]) -> Self {
        self.probabilities = probabilities;
        self
    }

    pub fn state(&self, label: BranchLabel) -> Option<&PureState> {
        self.states[label.index()].as_ref()
    }

    pub fn probability(&self, label: BranchLabel) -> f64 {
        self.probabilities[label.setting as usize][label.outcome as usize]
    }

    /// Labels whose state is present, in canonical order.
    pub fn defined_labels(&self) -> Vec<BranchLabel> {
        BranchLabel::ALL
            .into_iter()
            .filter(|l| self.states[l.index()].is_some())
            .collect()
    }

    pub fn defined_states(&self) -> Vec<PureState> {
        self.states.iter().flatten().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessBranch {
    /// Reconstruction carried out.
    Generic,
    /// `1 − |⟨1,1|1,0⟩|² < ε_deg`; see [`degenerate_analysis`].
    Degenerate,
    /// The target branch never occurs.
    Vacuous,
}

/// Reconstruction of one i=1 state from the two i=0 states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanWitness {
    pub target: BranchLabel,
    pub branch: WitnessBranch,
    /// `|⟨1,1|1,0⟩|²`.
    pub overlap_sq: f64,
    pub perp_state: Vec<Complex64>,
    pub coeff_00: Complex64,
    pub coeff_01: Complex64,
    /// Norm of the reconstruction before normalization; 1 when the
    /// probabilities are exact.
    pub raw_norm: Option<f64>,
    pub reconstructed: Option<PureState>,
    /// Phase-aligned distance between reconstruction and target.
    pub residual: Option<f64>,
}

/// Rebuilds `|1,0⟩` from `|0,0⟩, |0,1⟩` via `|(1,1)⊥⟩`.
pub fn reconstruct_1_0(quartet: &PureQuartet, tol: &Tolerances) -> SpanWitness {
    reconstruct(quartet, 0, tol)
}

/// Rebuilds `|1,1⟩` from `|0,0⟩, |0,1⟩` via `|(1,0)⊥⟩`.
pub fn reconstruct_1_1(quartet: &PureQuartet, tol: &Tolerances) -> SpanWitness {
    reconstruct(quartet, 1, tol)
}

fn reconstruct(quartet: &PureQuartet, outcome: u8, tol: &Tolerances) -> SpanWitness {
    let target_label = BranchLabel::new(1, outcome);
    let other_label = BranchLabel::new(1, 1 - outcome);
    let zero = Complex64::new(0.0, 0.0);
    let mut witness = SpanWitness {
        target: target_label,
        branch: WitnessBranch::Vacuous,
        overlap_sq: 0.0,
        perp_state: Vec::new(),
        coeff_00: zero,
        coeff_01: zero,
        raw_norm: None,
        reconstructed: None,
        residual: None,
    };
    let target_prob = quartet.probability(target_label);
    let Some(target) = quartet
        .state(target_label)
        .filter(|_| target_prob >= tol.p_min)
    else {
        return witness;
    };
    let other = quartet.state(other_label).map(PureState::amplitudes);
    witness.overlap_sq = other.map_or(0.0, |o| inner(o, target.amplitudes()).norm_sqr().min(1.0));
    witness.perp_state = perp(target.amplitudes(), other);
    if tol.is_degenerate(witness.overlap_sq) {
        witness.branch = WitnessBranch::Degenerate;
        return witness;
    }
    witness.branch = WitnessBranch::Generic;

    // Σ_j p(j|0) |0,j⟩⟨0,j|perp⟩
    let dim = target.dim();
    let mut raw = vec![zero; dim];
    let mut coeffs = [zero; 2];
    for (j, coeff) in coeffs.iter_mut().enumerate() {
        let label = BranchLabel::new(0, j as u8);
        if let Some(s) = quartet.state(label) {
            *coeff = quartet.probability(label) * inner(s.amplitudes(), &witness.perp_state);
            raw.iter_mut()
                .zip(s.amplitudes())
                .for_each(|(r, a)| *r += *coeff * a);
        }
    }
    witness.coeff_00 = coeffs[0];
    witness.coeff_01 = coeffs[1];

    // p(j|1) (1 − |⟨1,1|1,0⟩|²), with the second factor evaluated as ‖perp‖²
    let denominator = target_prob * norm(&witness.perp_state).powi(2);
    raw.iter_mut().for_each(|r| *r /= denominator);
    witness.raw_norm = Some(norm(&raw));
    match PureState::normalized(raw) {
        Ok(rebuilt) => {
            witness.residual = Some(phase_aligned_distance(
                rebuilt.amplitudes(),
                target.amplitudes(),
            ));
            witness.reconstructed = Some(rebuilt);
        }
        Err(_) => witness.residual = Some(norm(target.amplitudes())),
    }
    witness
}

/// Parallel-state case of the i=1 pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegenerateReport {
    /// `|⟨1,1|1,0⟩|²`.
    pub overlap_sq: f64,
    /// `arg⟨1,0|1,1⟩`, present iff the pair is degenerate.
    pub theta: Option<f64>,
    pub all_identical: bool,
}

/// Classifies the i=1 pair. When `|1,1⟩ = e^{iθ}|1,0⟩` up to
/// `degenerate_tol`, extracts θ and checks whether the whole quartet
/// coincides (all pairwise fidelities ≥ 1 − [`IDENTICAL_FIDELITY_TOL`] and
/// numerical rank 1).
///
/// Takes raw amplitudes so that a caller-supplied relative phase survives;
/// [`PureState`] inputs are phase-canonical and yield θ = 0 for identical
/// rays.
pub fn degenerate_analysis(
    s10: &[Complex64],
    s11: &[Complex64],
    quartet: &[&[Complex64]],
    tol: &Tolerances,
) -> Result<DegenerateReport> {
    let overlap = inner(s10, s11);
    let overlap_sq = overlap.norm_sqr().min(1.0);
    if !tol.is_degenerate(overlap_sq) {
        return Ok(DegenerateReport {
            overlap_sq,
            theta: None,
            all_identical: false,
        });
    }
    let pairwise = quartet.iter().enumerate().all(|(k, a)| {
        quartet[k + 1..]
            .iter()
            .all(|b| inner(a, b).norm_sqr() >= 1.0 - IDENTICAL_FIDELITY_TOL)
    });
    let columns: Vec<Vec<Complex64>> = quartet.iter().map(|s| s.to_vec()).collect();
    let all_identical = pairwise && numeric_rank(&columns, tol.rank_rel_tol)?.rank == 1;
    Ok(DegenerateReport {
        overlap_sq,
        theta: Some(overlap.arg()),
        all_identical,
    })
}

/// Numerical dimension of the span of the given states.
pub fn span_rank(states: &[PureState], rel_tol: f64) -> Result<RankResult> {
    let columns: Vec<Vec<Complex64>> = states.iter().map(|s| s.amplitudes().to_vec()).collect();
    numeric_rank(&columns, rel_tol)
}

/// Unambiguous discrimination is possible iff the states are linearly
/// independent.
pub fn usd_feasible(states: &[PureState], rel_tol: f64) -> Result<bool> {
    if states.len() < 2 {
        return Err(Error::TooFewStates {
            required: 2,
            found: states.len(),
        });
    }
    Ok(span_rank(states, rel_tol)?.rank == states.len())
}

/// Fidelity of each branch against `|0⟩, |1⟩, |+⟩, |−⟩`; `None` for
/// vacuous branches.
pub fn bb84_fidelities(ensemble: &SteeredEnsemble) -> Result<[Option<f64>; 4]> {
    if ensemble.dim() != 2 {
        return Err(Error::Inapplicable(format!(
            "BB84 targets are qubit states, box A2 has dimension {}",
            ensemble.dim()
        )));
    }
    let targets = [ket0(), ket1(), ket_plus(), ket_minus()];
    let mut out = [None; 4];
    for ((slot, branch), target) in out.iter_mut().zip(ensemble.branches()).zip(&targets) {
        if let Some(rho) = &branch.conditional {
            *slot = Some(fidelity(rho, &target.projector())?);
        }
    }
    Ok(out)
}

/// Full verdict on one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub nosignal_residual: f64,
    /// `tr(ρ²)` per branch; `None` for vacuous branches.
    pub purities: [Option<f64>; 4],
    pub all_pure: bool,
    /// Vacuous branches left out of the quartet.
    pub excluded: Vec<BranchLabel>,
    pub span_rank: Option<usize>,
    pub witnesses: Option<[SpanWitness; 2]>,
    pub degenerate: Option<DegenerateReport>,
    pub usd_feasible: Option<bool>,
    pub bb84_fidelities: Option<[Option<f64>; 4]>,
}

/// Runs the whole analysis with the ensemble's own probabilities.
pub fn analyze(ensemble: &SteeredEnsemble, tol: &Tolerances) -> Result<DimensionReport> {
    analyze_with_probabilities(ensemble, tol, None)
}

/// As [`analyze`], optionally substituting estimated probabilities as the
/// reconstruction prefactors. States and the no-signaling residual stay
/// exact.
pub fn analyze_with_probabilities(
    ensemble: &SteeredEnsemble,
    tol: &Tolerances,
    estimated: Option<[[f64; 2]; 2]>,
) -> Result<DimensionReport> {
    let nosignal_residual = nosignaling_residual(ensemble)?;
    let purities = ensemble
        .branches()
        .clone()
        .map(|b| b.conditional.as_ref().map(|rho| rho.purity()));
    let excluded: Vec<BranchLabel> = ensemble
        .branches()
        .iter()
        .filter(|b| !b.is_defined())
        .map(|b| b.label)
        .collect();
    let bb84 = match bb84_fidelities(ensemble) {
        Ok(f) => Some(f),
        Err(Error::Inapplicable(_)) => None,
        Err(e) => return Err(e),
    };
    let mut report = DimensionReport {
        nosignal_residual,
        purities,
        all_pure: false,
        excluded,
        span_rank: None,
        witnesses: None,
        degenerate: None,
        usd_feasible: None,
        bb84_fidelities: bb84,
    };

    let Some(mut quartet) = PureQuartet::from_ensemble(ensemble, tol.purity_tol)? else {
        return Ok(report);
    };
    if let Some(table) = estimated {
        quartet = quartet.with_probabilities(table);
    }
    report.all_pure = true;
    let states = quartet.defined_states();
    report.span_rank = Some(span_rank(&states, tol.rank_rel_tol)?.rank);
    report.usd_feasible = Some(usd_feasible(&states, tol.rank_rel_tol)?);
    report.witnesses = Some([
        reconstruct_1_0(&quartet, tol),
        reconstruct_1_1(&quartet, tol),
    ]);
    if let (Some(s10), Some(s11)) = (
        quartet.state(BranchLabel::new(1, 0)),
        quartet.state(BranchLabel::new(1, 1)),
    ) {
        let amps: Vec<&[Complex64]> = states.iter().map(PureState::amplitudes).collect();
        report.degenerate = Some(degenerate_analysis(
            s10.amplitudes(),
            s11.amplitudes(),
            &amps,
            tol,
        )?);
    }
    Ok(report)
}
