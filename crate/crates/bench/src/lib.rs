//! Shared fixtures for the criterion benches.

use ghzion::{Complex64, Frame, StateVector, TrapParams};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Normalized state with uniformly drawn real and imaginary parts.
pub fn random_state(params: TrapParams, seed: u64) -> StateVector {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut amps: Vec<Complex64> = (0..params.dim())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    StateVector::from_amplitudes(params, Frame::RESONANT, 0.0, amps).expect("valid random state")
}
