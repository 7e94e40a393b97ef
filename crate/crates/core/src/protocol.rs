//! The five-pulse GHZ preparation and the entangled Ramsey scheme.
//!
//! Preparation, starting from |J,-J>|0> with pulses scheduled back to back:
//!
//! 1. carrier pi/2 on ion N
//! 2. red-sideband pi (n = 0) on ion N
//! 3. collective dispersive pi (n = 1)
//! 4. dispersive pi (n = 1) on ion N
//! 5. red-sideband pi (n = 0) on ion N
//!
//! which ends in (|J,-J> + |J,J>)|0>/sqrt(2) with the motion back in its
//! ground state. The Ramsey scheme runs the same sequence in the laser frame,
//! waits T, replays the five pulses in reverse order and reads out ion N.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{BasisIndex, Frame, StateVector, TrapParams};
use crate::pulses::{self, Mode, PulseSpec, RabiLaw};

/// Detuning, relative to the slowest Rabi frequency, above which the pulse
/// maps are no longer trusted in the laser frame.
pub const VALIDITY_RATIO: f64 = 0.01;

/// The preparation pulses in application order.
pub fn preparation_sequence(n_ions: usize, mode: Mode) -> [PulseSpec; 5] {
    [
        PulseSpec::carrier_pi_half(n_ions),
        PulseSpec::jc_pi(n_ions, 0, mode),
        PulseSpec::dispersive_collective(1, mode),
        PulseSpec::dispersive_single(n_ions, 1, mode),
        PulseSpec::jc_pi(n_ions, 0, mode),
    ]
}

/// The preparation pulses replayed in reverse order.
pub fn reversed_preparation_sequence(n_ions: usize, mode: Mode) -> [PulseSpec; 5] {
    let mut seq = preparation_sequence(n_ions, mode);
    seq.reverse();
    seq
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepareOptions {
    pub mode: Mode,
    /// Frame the preparation runs in.
    pub frame: Frame,
    /// Atomic resonance omega_0; only used to report phi = N omega_0 t5.
    pub omega0: Option<f64>,
    /// Laser phase of each of the five pulses. The first one sets the GHZ
    /// phase; the others are a hook for sensitivity checks.
    pub laser_phases: [f64; 5],
}

impl Default for PrepareOptions {
    fn default() -> Self {
        Self { mode: Mode::Ideal, frame: Frame::RESONANT, omega0: None, laser_phases: [0.0; 5] }
    }
}

#[derive(Clone, Debug)]
pub struct PreparationReport {
    pub final_state: StateVector,
    /// Fidelity with `target_ghz(carrier phase)`; global phase ignored.
    pub fidelity_vs_target: f64,
    /// States after each of the five pulses (t1..t5).
    pub step_states: Vec<StateVector>,
    pub pulse_times: [f64; 5],
    /// phi = N omega_0 t5 in the Schroedinger picture, when omega_0 is known.
    pub phi_schroedinger: Option<f64>,
}

/// Applies `spec` and trips on leakage into the top Fock level.
fn apply_guarded(state: &mut StateVector, spec: &PulseSpec, detune_during: bool) -> Result<f64> {
    let tp = pulses::apply(state, spec)?;
    if detune_during {
        pulses::apply_detuning_phase(state, tp);
    }
    state.check_leakage()?;
    Ok(tp)
}

pub fn prepare_max_entangled(params: TrapParams, mode: Mode) -> Result<PreparationReport> {
    prepare_with(params, &PrepareOptions { mode, ..PrepareOptions::default() })
}

pub fn prepare_with(params: TrapParams, options: &PrepareOptions) -> Result<PreparationReport> {
    let mut state = StateVector::ground_state(params, options.frame)?;
    let mut step_states = Vec::with_capacity(5);
    let mut pulse_times = [0.0; 5];
    let sequence = preparation_sequence(params.n_ions, options.mode);
    for (k, spec) in sequence.iter().enumerate() {
        let spec = spec.with_phase(options.laser_phases[k]);
        apply_guarded(&mut state, &spec, false)?;
        pulse_times[k] = state.clock();
        step_states.push(state.clone());
    }
    let target = StateVector::target_ghz(params, options.frame, options.laser_phases[0])?;
    let fidelity_vs_target = state.fidelity(&target)?;
    Ok(PreparationReport {
        phi_schroedinger: options.omega0.map(|w| params.n_ions as f64 * w * pulse_times[4]),
        final_state: state,
        fidelity_vs_target,
        step_states,
        pulse_times,
    })
}

fn superposition(
    params: TrapParams,
    frame: Frame,
    clock: f64,
    terms: &[(BasisIndex, C64)],
) -> Result<StateVector> {
    let mut amps = vec![C64::new(0.0, 0.0); params.dim()];
    for &(idx, a) in terms {
        amps[idx.flat(params.n_ions)] += a;
    }
    StateVector::from_amplitudes(params, frame, clock, amps)
}

/// Closed-form state after preparation step `step` (1..=5) at time `t`,
/// with all laser phases zero.
pub fn analytic_step_state(params: TrapParams, frame: Frame, step: usize, t: f64) -> Result<StateVector> {
    let n = params.n_ions;
    let ion_n = 1usize << (n - 1);
    let all = params.ion_dim() - 1;
    let others_excited = all & !ion_n; // |J',J'>|g_N>
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let i = C64::new(0.0, 1.0);
    let precess = C64::from_polar(1.0, -params.trap_freq * t);
    let b = BasisIndex::new;
    let terms = match step {
        1 => vec![(b(0, 0), s), (b(ion_n, 0), s)],
        2 => vec![(b(0, 0), s), (b(0, 1), s * i * precess)],
        3 => vec![(b(0, 0), s), (b(all, 1), s * i * precess)],
        4 => vec![(b(0, 0), s), (b(others_excited, 1), -s * i * precess)],
        5 => vec![(b(0, 0), s), (b(all, 0), s)],
        _ => return Err(Error::InvalidParams(format!("no preparation step {step}"))),
    };
    superposition(params, frame, t, &terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepResidual {
    pub step: usize,
    pub time: f64,
    /// 1 - |<analytic|simulated>|^2.
    pub infidelity: f64,
    /// Largest amplitude deviation, global phase included.
    pub max_amp_error: f64,
}

impl StepResidual {
    pub fn within(&self, tolerance: f64) -> bool {
        self.infidelity <= tolerance
    }
}

/// Compares every step state of `report` with its closed form.
pub fn verify_trajectory(report: &PreparationReport) -> Result<Vec<StepResidual>> {
    report
        .step_states
        .iter()
        .zip(report.pulse_times)
        .enumerate()
        .map(|(k, (state, t))| {
            let reference = analytic_step_state(*state.params(), state.frame(), k + 1, t)?;
            Ok(StepResidual {
                step: k + 1,
                time: t,
                infidelity: 1.0 - state.fidelity(&reference)?,
                max_amp_error: state.max_abs_diff(&reference)?,
            })
        })
        .collect()
}

/// Replays the preparation pulses in reverse order starting at the state's
/// clock.
pub fn reversed_sequence(state: &StateVector, mode: Mode) -> Result<StateVector> {
    let mut out = state.clone();
    for spec in reversed_preparation_sequence(state.params().n_ions, mode) {
        apply_guarded(&mut out, &spec, false)?;
    }
    Ok(out)
}

/// P = {1 - (-1)^N cos(N Delta T)} / 2.
pub fn ramsey_probability(n_ions: usize, detuning: f64, wait: f64) -> f64 {
    let parity = if n_ions.is_multiple_of(2) { 1.0 } else { -1.0 };
    let n = n_ions as f64;
    0.5 * (1.0 - parity * (n * detuning * wait).cos())
}

/// Closed-form final Ramsey state
/// (1/2)|J',-J'>{(1 + (-1)^N c)|g_N> + (1 - (-1)^N c)|e_N>}|0>, c = e^{-i N Delta T}.
pub fn ramsey_final_state(params: TrapParams, detuning: f64, wait: f64, clock: f64) -> Result<StateVector> {
    let n = params.n_ions;
    let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let c = C64::from_polar(parity, -(n as f64) * detuning * wait);
    let one = C64::new(1.0, 0.0);
    superposition(
        params,
        Frame::laser(detuning),
        clock,
        &[
            (BasisIndex::new(0, 0), (one + c) * 0.5),
            (BasisIndex::new(1 << (n - 1), 0), (one - c) * 0.5),
        ],
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamseyConfig {
    pub detuning_grid: Vec<f64>,
    pub wait_time: f64,
    pub params: TrapParams,
    pub mode: Mode,
    /// Also apply exp(-i Delta tp n_e) during each pulse, which the pulse
    /// maps neglect. Diagnostic only.
    pub detuning_during_pulses: bool,
}

impl RamseyConfig {
    pub fn new(params: TrapParams, wait_time: f64, detuning_grid: Vec<f64>) -> Self {
        Self { detuning_grid, wait_time, params, mode: Mode::Ideal, detuning_during_pulses: false }
    }

    /// Evenly spaced grid of `points` detunings in [lo, hi].
    pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..points)
                .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
                .collect(),
        }
    }
}

/// Warning text when |Delta| is not small against every Rabi frequency used.
pub fn validity_warning(params: &TrapParams, detuning: f64) -> Option<String> {
    let law = RabiLaw::new(params);
    let slowest = law.carrier().min(law.jc(0)).min(law.dispersive(1));
    let limit = VALIDITY_RATIO * slowest;
    (detuning.abs() > limit).then(|| {
        format!(
            "|delta| = {:e} exceeds {VALIDITY_RATIO} x min Rabi frequency ({limit:e}); pulse maps assume |delta| << Omega",
            detuning.abs()
        )
    })
}

#[derive(Clone, Debug)]
pub struct RamseyRun {
    pub state: StateVector,
    /// Probability of ion N in |e>.
    pub p_excited: f64,
}

pub fn ramsey_run(config: &RamseyConfig, detuning: f64) -> Result<RamseyRun> {
    if config.wait_time.is_nan() || config.wait_time < 0.0 {
        return Err(Error::NegativeTime(config.wait_time));
    }
    let params = config.params;
    let detune_during = config.detuning_during_pulses;
    let mut state = StateVector::ground_state(params, Frame::laser(detuning))?;
    for spec in preparation_sequence(params.n_ions, config.mode) {
        apply_guarded(&mut state, &spec, detune_during)?;
    }
    pulses::free_evolve(&mut state, config.wait_time)?;
    for spec in reversed_preparation_sequence(params.n_ions, config.mode) {
        apply_guarded(&mut state, &spec, detune_during)?;
    }
    let p_excited = state.excited_population(params.n_ions)?;
    Ok(RamseyRun { state, p_excited })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RamseySample {
    pub delta: f64,
    #[serde(rename = "T")]
    pub wait: f64,
    #[serde(rename = "P_sim")]
    pub p_sim: f64,
    #[serde(rename = "P_analytic")]
    pub p_analytic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RamseyResult {
    pub samples: Vec<RamseySample>,
    pub max_abs_error: f64,
    pub warnings: Vec<String>,
}

impl RamseyResult {
    /// `delta,T,P_sim,P_analytic`, 15 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,T,P_sim,P_analytic\n");
        for s in &self.samples {
            writeln!(out, "{:.14e},{:.14e},{:.14e},{:.14e}", s.delta, s.wait, s.p_sim, s.p_analytic)
                .expect("writing to a String");
        }
        out
    }
}

/// Runs every grid point on its own state (in parallel) and compares with
/// the closed-form fringe. Samples keep grid order.
pub fn ramsey_scan(config: &RamseyConfig) -> Result<RamseyResult> {
    if config.detuning_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    config.params.validate()?;
    let n = config.params.n_ions;
    let samples = config
        .detuning_grid
        .par_iter()
        .map(|&delta| {
            let run = ramsey_run(config, delta)?;
            Ok(RamseySample {
                delta,
                wait: config.wait_time,
                p_sim: run.p_excited,
                p_analytic: ramsey_probability(n, delta, config.wait_time),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_error = samples
        .iter()
        .map(|s| (s.p_sim - s.p_analytic).abs())
        .fold(0.0, f64::max);
    let mut warnings: Vec<String> = Vec::new();
    let worst = config.detuning_grid.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    warnings.extend(validity_warning(&config.params, worst));
    Ok(RamseyResult { samples, max_abs_error, warnings })
}

/// Smallest Delta > 0 at which the simulated excitation probability of ion N
/// has a local maximum, for fixed wait `config.wait_time`.
///
/// A coarse scan brackets the peak, then bisection on the sign of a central
/// difference of P pins it down; bisecting on P itself would stall at
/// sqrt(machine epsilon) because the peak is flat.
pub fn first_fringe_maximum(config: &RamseyConfig) -> Result<f64> {
    let wait = config.wait_time;
    if wait.is_nan() || wait <= 0.0 {
        return Err(Error::InvalidParams("fringe search needs a positive wait time".into()));
    }
    let p = |delta: f64| ramsey_run(config, delta).map(|r| r.p_excited);
    let step = PI / (32.0 * config.params.n_ions as f64 * wait);
    let (mut prev, mut cur) = (p(0.0)?, p(step)?);
    let mut k = 1usize;
    let bracket = loop {
        let next = p((k + 1) as f64 * step)?;
        if cur >= prev && cur > next {
            break ((k - 1) as f64 * step, (k + 1) as f64 * step);
        }
        prev = cur;
        cur = next;
        k += 1;
        if k > 1 << 16 {
            return Err(Error::InvalidParams("no fringe maximum found".into()));
        }
    };
    let h = (bracket.1 - bracket.0) * 1e-3;
    let slope = |x: f64| -> Result<f64> { Ok(p(x + h)? - p(x - h)?) };
    let (mut lo, mut hi) = bracket;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
