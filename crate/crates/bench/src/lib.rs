//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steerdim::quantum::{random_density, random_pure_state, random_rank_one, random_two_outcome};
use steerdim::PreparationScenario;

/// Random two-qubit pure source with rank-1 projective measurements.
pub fn pure_qubit_scenario(seed: u64) -> PreparationScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = random_pure_state(4, &mut rng).unwrap().projector();
    let m0 = random_rank_one(2, &mut rng).unwrap();
    let m1 = random_rank_one(2, &mut rng).unwrap();
    PreparationScenario::new(source, m0, m1).unwrap()
}

/// Random mixed source on `dim_a × dim_b` with random binary POVMs.
pub fn mixed_scenario(dim_a: usize, dim_b: usize, seed: u64) -> PreparationScenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dim_a * dim_b;
    let source = random_density(n, n, &mut rng).unwrap();
    let m0 = random_two_outcome(dim_a, &mut rng).unwrap();
    let m1 = random_two_outcome(dim_a, &mut rng).unwrap();
    PreparationScenario::new(source, m0, m1).unwrap()
}
