use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{MeasurementSpec, ScenarioConfig, StateSpec};
use super::report::{run_once, ReportDocument};
use super::{HarnessError, HarnessResult};

/// Grid over one scalar parameter of a scenario.
///
/// `parameter` is a dotted path: `state.werner.v` or
/// `measurements.<0|1>.tilted.alpha`. The prefixes `state_spec` and
/// `measurement_specs` are accepted as synonyms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    #[serde(default = "default_trials")]
    pub trials_per_step: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_shots: Option<u64>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    WernerVisibility,
    TiltAngle(usize),
}

impl SweepSpec {
    fn target(&self) -> HarnessResult<Target> {
        let parts: Vec<&str> = self.parameter.split('.').collect();
        match parts.as_slice() {
            ["state" | "state_spec", "werner", "v"] => Ok(Target::WernerVisibility),
            ["measurements" | "measurement_specs", "0", "tilted", "alpha"] => {
                Ok(Target::TiltAngle(0))
            }
            ["measurements" | "measurement_specs", "1", "tilted", "alpha"] => {
                Ok(Target::TiltAngle(1))
            }
            _ => Err(HarnessError::Sweep(format!(
                "unresolvable parameter path `{}`",
                self.parameter
            ))),
        }
    }

    /// Checks the grid and that the path resolves against `base`.
    pub fn validate(&self, base: &ScenarioConfig) -> HarnessResult<()> {
        if !self.from.is_finite() || !self.to.is_finite() {
            return Err(HarnessError::Sweep("grid bounds must be finite".into()));
        }
        if self.from > self.to {
            return Err(HarnessError::Sweep(format!(
                "degenerate grid: from = {} exceeds to = {}",
                self.from, self.to
            )));
        }
        if self.steps < 2 {
            return Err(HarnessError::Sweep(format!(
                "degenerate grid: steps = {} (need at least 2)",
                self.steps
            )));
        }
        if self.trials_per_step == 0 {
            return Err(HarnessError::Sweep(
                "trials_per_step must be at least 1".into(),
            ));
        }
        if self.sample_shots == Some(0) {
            return Err(HarnessError::Sweep(
                "sample_shots must be at least 1".into(),
            ));
        }
        match (self.target()?, &base.state) {
            (Target::WernerVisibility, StateSpec::Werner { .. }) => {}
            (Target::WernerVisibility, _) => {
                return Err(HarnessError::Sweep(format!(
                    "`{}` needs a werner state",
                    self.parameter
                )))
            }
            (Target::TiltAngle(i), _)
                if !matches!(base.measurements[i], MeasurementSpec::Tilted { .. }) =>
            {
                return Err(HarnessError::Sweep(format!(
                    "`{}` needs a tilted measurement in slot {i}",
                    self.parameter
                )))
            }
            _ => {}
        }
        // The grid is monotone, so the endpoints bound every point.
        self.unit_config(base, 0, 0).build_scenario()?;
        self.unit_config(base, self.steps - 1, 0).build_scenario()?;
        Ok(())
    }

    /// Grid points from `from` to `to` inclusive; both ends are exact.
    pub fn grid(&self) -> Vec<f64> {
        let last = self.steps.saturating_sub(1).max(1);
        (0..self.steps)
            .map(|k| {
                if k == last {
                    self.to
                } else {
                    self.from + (self.to - self.from) * (k as f64 / last as f64)
                }
            })
            .collect()
    }

    /// The scenario evaluated at grid point `point`, trial `trial`.
    pub fn unit_config(&self, base: &ScenarioConfig, point: usize, trial: usize) -> ScenarioConfig {
        let value = self.grid()[point];
        let seed = derive_seed(base.seed, point as u64, trial as u64);
        let mut config = base.clone();
        config.sweep = None;
        config.seed = seed;
        config.sample_shots = self.sample_shots.or(base.sample_shots);
        if let StateSpec::RandomPure {
            seed: state_seed, ..
        } = &mut config.state
        {
            *state_seed = seed;
        }
        match self.target() {
            Ok(Target::WernerVisibility) => config.state = StateSpec::Werner { v: value },
            Ok(Target::TiltAngle(i)) => {
                config.measurements[i] = MeasurementSpec::Tilted { alpha: value }
            }
            Err(_) => {}
        }
        config
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one unit of sweep work, independent of execution order.
pub fn derive_seed(seed: u64, point: u64, trial: u64) -> u64 {
    seed ^ splitmix64((point << 32) | (trial & 0xffff_ffff))
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRecord {
    pub param: f64,
    pub trial: usize,
    /// `probabilities[i][j] = p(j|i)`.
    pub probabilities: [[f64; 2]; 2],
    pub estimated: bool,
    pub nosignal: f64,
    pub purities: [Option<f64>; 4],
    pub rank: Option<usize>,
    pub fidelities: Option<[Option<f64>; 4]>,
}

impl SweepRecord {
    pub fn from_document(param: f64, trial: usize, doc: &ReportDocument) -> Self {
        Self {
            param,
            trial,
            probabilities: doc.probabilities,
            estimated: doc.probabilities_estimated,
            nosignal: doc.report.nosignal_residual,
            purities: doc.report.purities,
            rank: doc.report.span_rank,
            fidelities: doc.report.bb84_fidelities,
        }
    }
}

/// Evaluates every (point, trial) pair in parallel; records come back in
/// grid order, trials innermost.
pub fn run_sweep(config: &ScenarioConfig, sweep: &SweepSpec) -> HarnessResult<Vec<SweepRecord>> {
    sweep.validate(config)?;
    let grid = sweep.grid();
    let units: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..sweep.trials_per_step).map(move |t| (p, t)))
        .collect();
    units
        .into_par_iter()
        .map(|(point, trial)| {
            let doc = run_once(&sweep.unit_config(config, point, trial))?;
            Ok(SweepRecord::from_document(grid[point], trial, &doc))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn werner_sweep(steps: usize) -> SweepSpec {
        SweepSpec {
            parameter: "state.werner.v".into(),
            from: 0.0,
            to: 1.0,
            steps,
            trials_per_step: 1,
            sample_shots: None,
        }
    }

    fn werner_base() -> ScenarioConfig {
        ScenarioConfig {
            state: StateSpec::Werner { v: 0.5 },
            ..ScenarioConfig::ideal()
        }
    }

    #[test]
    fn grid_hits_both_ends() {
        let spec = SweepSpec {
            from: 0.1,
            to: 0.7,
            ..werner_sweep(7)
        };
        let grid = spec.grid();
        assert_eq!(grid.len(), 7);
        assert_eq!(grid[0], 0.1);
        assert_eq!(grid[6], 0.7);
        assert!(grid.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn bad_grids_are_rejected() {
        let base = werner_base();
        assert!(werner_sweep(1).validate(&base).is_err());
        let backwards = SweepSpec {
            from: 1.0,
            to: 0.0,
            ..werner_sweep(3)
        };
        assert!(backwards.validate(&base).is_err());
        let out_of_range = SweepSpec {
            to: 1.2,
            ..werner_sweep(3)
        };
        assert!(out_of_range.validate(&base).is_err());
    }

    #[test]
    fn unresolvable_paths_are_rejected() {
        let base = werner_base();
        for path in [
            "state.werner.w",
            "seed",
            "measurements.2.tilted.alpha",
            "measurements.0.tilted.alpha",
        ] {
            let spec = SweepSpec {
                parameter: path.into(),
                ..werner_sweep(3)
            };
            let err = spec.validate(&base).unwrap_err();
            assert!(matches!(err, HarnessError::Sweep(_)), "{path}: {err}");
        }
        let spec = SweepSpec {
            parameter: "state_spec.werner.v".into(),
            ..werner_sweep(3)
        };
        spec.validate(&base).unwrap();
        assert!(werner_sweep(3).validate(&ScenarioConfig::ideal()).is_err());
    }

    #[test]
    fn werner_purities_follow_closed_form() {
        let records = run_sweep(&werner_base(), &werner_sweep(5)).unwrap();
        assert_eq!(records.len(), 5);
        for r in &records {
            let expected = (1.0 + r.param * r.param) / 2.0;
            for p in r.purities {
                assert!((p.unwrap() - expected).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn seeds_are_distinct_per_unit() {
        let mut seen = std::collections::HashSet::new();
        for p in 0..20 {
            for t in 0..20 {
                assert!(seen.insert(derive_seed(7, p, t)));
            }
        }
        assert_ne!(derive_seed(0, 0, 0), 0);
    }

    #[test]
    fn random_pure_trials_differ() {
        let base = ScenarioConfig {
            state: StateSpec::RandomPure { seed: 1, dim_b: 2 },
            measurements: [
                MeasurementSpec::Computational,
                MeasurementSpec::Tilted { alpha: 0.5 },
            ],
            ..ScenarioConfig::ideal()
        };
        let spec = SweepSpec {
            parameter: "measurements.1.tilted.alpha".into(),
            from: 0.1,
            to: 0.5,
            steps: 2,
            trials_per_step: 3,
            sample_shots: None,
        };
        let records = run_sweep(&base, &spec).unwrap();
        assert_eq!(records.len(), 6);
        assert_eq!(
            records
                .iter()
                .map(|r| (r.param, r.trial))
                .collect::<Vec<_>>(),
            vec![(0.1, 0), (0.1, 1), (0.1, 2), (0.5, 0), (0.5, 1), (0.5, 2)]
        );
        assert_ne!(records[0].probabilities, records[1].probabilities);
        assert!(records.iter().all(|r| r.rank.unwrap() <= 2));
    }
}
