//! Validated quantum objects: pure states, density operators and binary
//! measurements, plus the ideal Bell/BB84 constructions and noise models.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{
    canonicalize_phase, ginibre, haar_random_pure, haar_random_unitary, hermitian_eig, norm,
    ComplexMatrix, HERMITIAN_TOL, MAX_DIM,
};

/// Tolerance on unit norm, trace, and eigenvalue positivity.
pub const STATE_TOL: f64 = 1e-10;

/// A state is classified pure iff `tr(ρ²) ≥ 1 − PURITY_TOL`.
pub const PURITY_TOL: f64 = 1e-9;

/// Eigenvalue gap below which the top eigenvalue counts as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-12;

/// Eigenvalues below this are treated as zero when taking matrix square
/// roots inside [`fidelity`].
const SPECTRAL_CUTOFF: f64 = 1e-14;

/// Unit vector with canonical global phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Accepts a vector whose norm is already 1 within [`STATE_TOL`].
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = checked_norm(&amplitudes)?;
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::Norm { norm: n });
        }
        Self::normalized(amplitudes)
    }

    /// Normalizes any non-zero vector.
    pub fn normalized(mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = checked_norm(&amplitudes)?;
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        amplitudes.iter_mut().for_each(|z| *z /= n);
        canonicalize_phase(&mut amplitudes);
        Ok(Self { amplitudes })
    }

    pub fn from_real(amplitudes: &[f64]) -> Result<Self> {
        Self::normalized(amplitudes.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &PureState) -> Complex64 {
        crate::numerics::inner(&self.amplitudes, &other.amplitudes)
    }

    pub fn projector(&self) -> DensityOperator {
        DensityOperator {
            matrix: ComplexMatrix::outer(&self.amplitudes, &self.amplitudes),
        }
    }
}

fn checked_norm(v: &[Complex64]) -> Result<f64> {
    if v.is_empty() || v.len() > MAX_DIM {
        return Err(Error::BadShape {
            rows: v.len(),
            cols: 1,
            max: MAX_DIM,
        });
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(norm(v))
}

/// Deserialization checks the norm but keeps the stored phase untouched, so
/// a serialized state parses back to the same amplitudes.
impl TryFrom<Vec<Complex64>> for PureState {
    type Error = Error;

    fn try_from(amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = checked_norm(&amplitudes)?;
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::Norm { norm: n });
        }
        Ok(Self { amplitudes })
    }
}

impl From<PureState> for Vec<Complex64> {
    fn from(s: PureState) -> Self {
        s.amplitudes
    }
}

pub fn ket0() -> PureState {
    PureState::from_real(&[1.0, 0.0]).unwrap()
}

pub fn ket1() -> PureState {
    PureState::from_real(&[0.0, 1.0]).unwrap()
}

pub fn ket_plus() -> PureState {
    PureState::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).unwrap()
}

pub fn ket_minus() -> PureState {
    PureState::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]).unwrap()
}

/// Hermitian, positive semidefinite, unit-trace operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    matrix: ComplexMatrix,
}

impl DensityOperator {
    /// Validates and symmetrizes.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let matrix = validated_hermitian(matrix)?;
        let trace = matrix.trace().re;
        if (trace - 1.0).abs() > STATE_TOL {
            return Err(Error::Trace { trace });
        }
        let min_eigenvalue = *hermitian_eig(&matrix)?.values.last().unwrap();
        if min_eigenvalue < -STATE_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { matrix })
    }

    /// Nearest valid state to a Hermitian, positive-trace matrix: negative
    /// eigenvalues are clipped and the trace renormalized.
    pub fn from_clipped(matrix: ComplexMatrix) -> Result<Self> {
        let matrix = validated_hermitian(matrix)?;
        let eig = hermitian_eig(&matrix)?;
        let kept: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
        if kept.is_nan() || kept <= 0.0 {
            return Err(Error::Trace { trace: kept });
        }
        let n = matrix.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (value, vector) in eig.values.iter().zip(&eig.vectors) {
            if *value > 0.0 {
                out = &out + &ComplexMatrix::outer(vector, vector).scale_real(value / kept);
            }
        }
        Ok(Self {
            matrix: out.hermitian_part(),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.as_slice().iter().map(Complex64::norm_sqr).sum()
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        crate::numerics::inner(psi, &self.matrix.apply(psi)).re
    }
}

fn validated_hermitian(matrix: ComplexMatrix) -> Result<ComplexMatrix> {
    if !matrix.is_square() {
        return Err(Error::NotSquare {
            rows: matrix.rows(),
            cols: matrix.cols(),
        });
    }
    let deviation = matrix.hermitian_deviation();
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(matrix.hermitian_part())
}

/// Binary POVM `{E₀, E₁}` with `E₀ + E₁ = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoOutcomeMeasurement {
    elements: [ComplexMatrix; 2],
}

impl TwoOutcomeMeasurement {
    pub fn new(element0: ComplexMatrix, element1: ComplexMatrix) -> Result<Self> {
        let element0 = validated_hermitian(element0)?;
        let element1 = validated_hermitian(element1)?;
        if element0.rows() != element1.rows() {
            return Err(Error::DimensionMismatch {
                context: "measurement elements",
                expected: element0.rows(),
                found: element1.rows(),
            });
        }
        for e in [&element0, &element1] {
            let min_eigenvalue = *hermitian_eig(e)?.values.last().unwrap();
            if min_eigenvalue < -STATE_TOL {
                return Err(Error::NotPositive { min_eigenvalue });
            }
        }
        let deviation =
            (&element0 + &element1).max_abs_diff(&ComplexMatrix::identity(element0.rows()));
        if deviation > STATE_TOL {
            return Err(Error::Completeness { deviation });
        }
        Ok(Self {
            elements: [element0, element1],
        })
    }

    /// `{|χ⟩⟨χ|, I − |χ⟩⟨χ|}`.
    pub fn from_projector(chi: &PureState) -> Self {
        let e0 = chi.projector().into_matrix();
        let e1 = &ComplexMatrix::identity(chi.dim()) - &e0;
        Self {
            elements: [e0, e1.hermitian_part()],
        }
    }

    pub fn dim(&self) -> usize {
        self.elements[0].rows()
    }

    /// Element for outcome `j ∈ {0, 1}`.
    pub fn element(&self, outcome: usize) -> &ComplexMatrix {
        &self.elements[outcome]
    }

    pub fn elements(&self) -> &[ComplexMatrix; 2] {
        &self.elements
    }
}

/// `(|00⟩ + |11⟩)/√2`.
pub fn bell_phi_plus() -> PureState {
    PureState::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]).unwrap()
}

pub fn computational_measurement() -> TwoOutcomeMeasurement {
    tilted_measurement(0.0)
}

pub fn hadamard_measurement() -> TwoOutcomeMeasurement {
    tilted_measurement(FRAC_PI_4)
}

/// The ideal pair `(M₀, M₁)`: computational and diagonal bases.
pub fn bb84_measurements() -> (TwoOutcomeMeasurement, TwoOutcomeMeasurement) {
    (computational_measurement(), hadamard_measurement())
}

/// Projective measurement onto `cos α|0⟩ + sin α|1⟩` and its complement.
pub fn tilted_measurement(alpha: f64) -> TwoOutcomeMeasurement {
    let (s, c) = alpha.sin_cos();
    let e0 = ComplexMatrix::from_real_rows(&[&[c * c, c * s], &[c * s, s * s]]).unwrap();
    let e1 = ComplexMatrix::from_real_rows(&[&[s * s, -c * s], &[-c * s, c * c]]).unwrap();
    TwoOutcomeMeasurement { elements: [e0, e1] }
}

/// `v|φ+⟩⟨φ+| + (1 − v) I/4`.
pub fn werner_state(visibility: f64) -> Result<DensityOperator> {
    if !(0.0..=1.0).contains(&visibility) {
        return Err(Error::OutOfRange {
            name: "visibility v",
            value: visibility,
            range: "[0,1]",
        });
    }
    let bell = bell_phi_plus().projector().into_matrix();
    let noise = ComplexMatrix::identity(4).scale_real((1.0 - visibility) / 4.0);
    Ok(DensityOperator {
        matrix: &bell.scale_real(visibility) + &noise,
    })
}

/// Single-qubit rotation `U(θ, φ, λ)` in the standard three-angle form.
pub fn local_unitary(theta: f64, phi: f64, lambda: f64) -> ComplexMatrix {
    let (s, c) = (theta / 2.0).sin_cos();
    let e = |angle: f64| Complex64::from_polar(1.0, angle);
    ComplexMatrix::new(
        2,
        2,
        vec![
            Complex64::new(c, 0.0),
            -e(lambda) * s,
            e(phi) * s,
            e(phi + lambda) * c,
        ],
    )
    .unwrap()
}

/// `tr(ρ²)`.
pub fn purity(rho: &DensityOperator) -> f64 {
    rho.purity()
}

pub fn is_pure(rho: &DensityOperator, purity_tol: f64) -> bool {
    rho.purity() >= 1.0 - purity_tol
}

/// Uhlmann fidelity `(tr √(√a b √a))²`.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            context: "fidelity operands",
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let root_a = psd_sqrt(a.matrix())?;
    let inner = (&(&root_a * b.matrix()) * &root_a).hermitian_part();
    let root_sum: f64 = hermitian_eig(&inner)?
        .values
        .iter()
        .filter(|&&v| v > SPECTRAL_CUTOFF)
        .map(|v| v.sqrt())
        .sum();
    Ok((root_sum * root_sum).clamp(0.0, 1.0))
}

fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(m)?;
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (value, vector) in eig.values.iter().zip(&eig.vectors) {
        if *value > SPECTRAL_CUTOFF {
            out = &out + &ComplexMatrix::outer(vector, vector).scale_real(value.sqrt());
        }
    }
    Ok(out)
}

/// Top eigenvector of a density operator and its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantComponent {
    pub state: PureState,
    pub weight: f64,
    /// The top eigenvalue was within [`DEGENERACY_GAP`] of the next one.
    pub degenerate: bool,
}

/// Extracts the dominant pure component. When the top eigenvalue is
/// degenerate the representative is the normalized projection of the
/// computational basis vector with the largest overlap onto the top
/// eigenspace (first index on ties), so the result is deterministic.
pub fn dominant_pure_component(rho: &DensityOperator) -> Result<DominantComponent> {
    let eig = hermitian_eig(rho.matrix())?;
    let top = eig.values[0];
    let degenerate = eig.values.len() > 1 && top - eig.values[1] < DEGENERACY_GAP;
    if !degenerate {
        return Ok(DominantComponent {
            state: PureState::normalized(eig.vectors[0].clone())?,
            weight: top,
            degenerate,
        });
    }
    let space: Vec<&Vec<Complex64>> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .take_while(|(v, _)| top - **v < DEGENERACY_GAP)
        .map(|(_, vec)| vec)
        .collect();
    let dim = rho.dim();
    let projected = |k: usize| -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for v in &space {
            let coeff = v[k];
            out.iter_mut()
                .zip(v.iter())
                .for_each(|(o, x)| *o += coeff.conj() * x);
        }
        out
    };
    let mut best = (0, -1.0);
    for k in 0..dim {
        let n = norm(&projected(k));
        if n > best.1 + 1e-12 {
            best = (k, n);
        }
    }
    Ok(DominantComponent {
        state: PureState::normalized(projected(best.0))?,
        weight: top,
        degenerate,
    })
}

/// Imperfect-device models applied to the ideal Bell + BB84 setup.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    None,
    /// Werner mixing of the source with visibility `v ∈ [0, 1]`.
    Werner {
        visibility: f64,
    },
    /// Replaces `M₁` by [`tilted_measurement`] at angle `alpha`.
    TiltedMeasurement {
        alpha: f64,
    },
    /// Rotates the second box of the source by [`local_unitary`].
    LocalUnitary {
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    /// Replaces the source by an explicit two-qubit state.
    Custom {
        state: DensityOperator,
    },
}

impl NoiseSpec {
    pub fn parameters(&self) -> Vec<f64> {
        match self {
            NoiseSpec::None | NoiseSpec::Custom { .. } => Vec::new(),
            NoiseSpec::Werner { visibility } => vec![*visibility],
            NoiseSpec::TiltedMeasurement { alpha } => vec![*alpha],
            NoiseSpec::LocalUnitary { theta, phi, lambda } => vec![*theta, *phi, *lambda],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseSpec::Werner { visibility } => werner_state(*visibility).map(|_| ()),
            NoiseSpec::Custom { state } if state.dim() != 4 => Err(Error::DimensionMismatch {
                context: "custom two-qubit source",
                expected: 4,
                found: state.dim(),
            }),
            other => match other.parameters().into_iter().find(|p| !p.is_finite()) {
                Some(value) => Err(Error::OutOfRange {
                    name: "noise angle",
                    value,
                    range: "finite reals",
                }),
                None => Ok(()),
            },
        }
    }
}

/// Random mixed state `G G† / tr(G G†)` from a `dim × rank` Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    let g = ginibre(dim, rank, rng)?;
    let gg = &g * &g.adjoint();
    let trace = gg.trace().re;
    DensityOperator::new(gg.scale_real(1.0 / trace))
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState> {
    PureState::normalized(haar_random_pure(dim, rng)?)
}

/// Random binary POVM: `E₀ = U diag(λ) U†` with `λ_k` uniform on `[0, 1]`.
pub fn random_two_outcome<R: Rng + ?Sized>(
    dim: usize,
    rng: &mut R,
) -> Result<TwoOutcomeMeasurement> {
    let u = haar_random_unitary(dim, rng)?;
    let weights: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let e0 = (&(&u * &ComplexMatrix::diag(&weights)) * &u.adjoint()).hermitian_part();
    let e1 = (&ComplexMatrix::identity(dim) - &e0).hermitian_part();
    TwoOutcomeMeasurement::new(e0, e1)
}

/// Random rank-1 projective measurement `{|χ⟩⟨χ|, I − |χ⟩⟨χ|}`.
pub fn random_rank_one<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<TwoOutcomeMeasurement> {
    Ok(TwoOutcomeMeasurement::from_projector(&random_pure_state(
        dim, rng,
    )?))
}
