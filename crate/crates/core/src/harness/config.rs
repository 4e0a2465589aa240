use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sweep::SweepSpec;
use super::{HarnessError, HarnessResult};
use crate::analysis::Tolerances;
use crate::numerics::{haar_random_pure, kron, ComplexMatrix};
use crate::protocol::PreparationScenario;
use crate::quantum::{
    bell_phi_plus, computational_measurement, hadamard_measurement, tilted_measurement,
    werner_state, DensityOperator, PureState, TwoOutcomeMeasurement,
};

/// Source state of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Bell,
    Werner {
        v: f64,
    },
    /// `|a⟩⟨a| ⊗ |b⟩⟨b|`; vectors are normalized on load.
    Product {
        a: Vec<Complex64>,
        b: Vec<Complex64>,
    },
    /// Haar-random pure state on `dim_a × dim_b`; `dim_a` follows the
    /// measurements.
    RandomPure {
        seed: u64,
        #[serde(default = "default_dim_b")]
        dim_b: usize,
    },
    Explicit {
        matrix: ComplexMatrix,
    },
}

fn default_dim_b() -> usize {
    2
}

/// One of the two measurements on box A₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementSpec {
    Computational,
    Hadamard,
    Tilted {
        alpha: f64,
    },
    Explicit {
        element0: ComplexMatrix,
        element1: ComplexMatrix,
    },
}

impl MeasurementSpec {
    fn build(&self) -> crate::Result<TwoOutcomeMeasurement> {
        match self {
            MeasurementSpec::Computational => Ok(computational_measurement()),
            MeasurementSpec::Hadamard => Ok(hadamard_measurement()),
            MeasurementSpec::Tilted { alpha } if !alpha.is_finite() => {
                Err(crate::Error::OutOfRange {
                    name: "alpha",
                    value: *alpha,
                    range: "finite reals",
                })
            }
            MeasurementSpec::Tilted { alpha } => Ok(tilted_measurement(*alpha)),
            MeasurementSpec::Explicit { element0, element1 } => {
                TwoOutcomeMeasurement::new(element0.clone(), element1.clone())
            }
        }
    }
}

/// A complete, serializable description of one preparation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub state: StateSpec,
    pub measurements: [MeasurementSpec; 2],
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Estimate `p(j|i)` from this many sampled outcomes per setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ScenarioConfig {
    /// Bell source with the computational and diagonal measurements.
    pub fn ideal() -> Self {
        Self {
            state: StateSpec::Bell,
            measurements: [MeasurementSpec::Computational, MeasurementSpec::Hadamard],
            tolerances: Tolerances::default(),
            seed: 0,
            sample_shots: None,
            sweep: None,
        }
    }

    /// Checks every invariant, including the physical validity of explicit
    /// matrices and the sweep description.
    pub fn validate(&self) -> HarnessResult<()> {
        self.build_scenario()?;
        if self.sample_shots == Some(0) {
            return Err(HarnessError::from_core(
                "sample_shots",
                crate::Error::OutOfRange {
                    name: "sample_shots",
                    value: 0.0,
                    range: "[1, inf)",
                },
            ));
        }
        if let Some(sweep) = &self.sweep {
            sweep.validate(self)?;
        }
        Ok(())
    }

    pub fn build_scenario(&self) -> HarnessResult<PreparationScenario> {
        self.tolerances
            .validate()
            .map_err(|e| HarnessError::from_core("tolerances", e))?;
        let m0 = self.measurements[0]
            .build()
            .map_err(|e| HarnessError::from_core("measurements[0]", e))?;
        let m1 = self.measurements[1]
            .build()
            .map_err(|e| HarnessError::from_core("measurements[1]", e))?;
        let state = self.build_state(m0.dim())?;
        PreparationScenario::new(state, m0, m1)
            .map(|s| s.with_p_min(self.tolerances.p_min))
            .map_err(|e| HarnessError::from_core("scenario", e))
    }

    fn build_state(&self, dim_a: usize) -> HarnessResult<DensityOperator> {
        match &self.state {
            StateSpec::Bell => Ok(bell_phi_plus().projector()),
            StateSpec::Werner { v } => {
                werner_state(*v).map_err(|e| HarnessError::from_core("state.werner.v", e))
            }
            StateSpec::Product { a, b } => {
                let a = PureState::normalized(a.clone())
                    .map_err(|e| HarnessError::from_core("state.product.a", e))?;
                let b = PureState::normalized(b.clone())
                    .map_err(|e| HarnessError::from_core("state.product.b", e))?;
                DensityOperator::new(kron(a.projector().matrix(), b.projector().matrix()))
                    .map_err(|e| HarnessError::from_core("state.product", e))
            }
            StateSpec::RandomPure { seed, dim_b } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let v = haar_random_pure(dim_a * dim_b, &mut rng)
                    .map_err(|e| HarnessError::from_core("state.random_pure.dim_b", e))?;
                Ok(PureState::normalized(v)
                    .map_err(|e| HarnessError::from_core("state.random_pure", e))?
                    .projector())
            }
            StateSpec::Explicit { matrix } => DensityOperator::new(matrix.clone())
                .map_err(|e| HarnessError::from_core("state.explicit.matrix", e)),
        }
    }
}

/// Parses and validates scenario text, filling default tolerances.
pub fn parse_scenario(text: &str) -> HarnessResult<ScenarioConfig> {
    let config: ScenarioConfig = serde_yaml::with::singleton_map_recursive::deserialize(
        serde_yaml::Deserializer::from_str(text),
    )
    .map_err(|e| HarnessError::Parse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn load_scenario(path: impl AsRef<Path>) -> HarnessResult<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text).map_err(|e| match e {
        HarnessError::Parse(msg) => HarnessError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
