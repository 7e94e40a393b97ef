#![allow(dead_code)]

pub mod programs;

use ghzion::{Complex64, Frame, StateVector, TrapParams};
use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::Rng;

pub fn random_amplitudes(rng: &mut StdRng, dim: usize) -> Vec<Complex64> {
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    amps
}

pub fn random_state(rng: &mut StdRng, params: TrapParams, frame: Frame, clock: f64) -> StateVector {
    let amps = random_amplitudes(rng, params.dim());
    StateVector::from_amplitudes(params, frame, clock, amps).unwrap()
}

pub fn random_params(rng: &mut StdRng, n_ions: usize, n_max: usize) -> TrapParams {
    TrapParams {
        n_ions,
        trap_freq: rng.random_range(0.5..3.0),
        lamb_dicke: rng.random_range(0.05..0.3),
        base_rabi: rng.random_range(0.5..2.0),
        fock_cutoff: n_max,
    }
}

pub fn dense_apply(u: &DMatrix<Complex64>, state: &StateVector) -> Vec<Complex64> {
    let v = DVector::from_column_slice(state.amplitudes());
    (u * v).iter().copied().collect()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn unitarity_error(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    let id = DMatrix::<Complex64>::identity(n, n);
    (prod - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
