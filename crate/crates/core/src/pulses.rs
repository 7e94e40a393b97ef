//! Laser pulses acting on the ion string, applied matrix-free.
//!
//! Every pulse is the frame-R propagator
//! `U(t0, tp) = F(t0 + tp) U_I F(t0)^dagger`, where `F(t) = exp(-i nu n t)` is
//! the free vibrational evolution and `U_I` the interaction-picture rotation
//! of the resonant couplings. In [`Mode::Ideal`] only the targeted transition
//! rotates (by exactly pi, or pi/2 for the carrier); in [`Mode::Physical`]
//! every Fock level rotates by the angle its own Rabi frequency produces
//! during the targeted pulse length.
//!
//! [`dense_matrix`] builds the same propagators from explicit Hamiltonians
//! and a matrix exponential; it is the oracle for the kernels below.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Frame, StateVector, TrapParams};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dimension limit for [`dense_matrix`].
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PulseKind {
    CarrierPiHalf,
    JaynesCummingsPi,
    DispersiveSinglePi,
    DispersiveCollectivePi,
    Wait,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Ideal,
    Physical,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ideal => "ideal",
            Mode::Physical => "physical",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ideal" => Ok(Mode::Ideal),
            "physical" => Ok(Mode::Physical),
            other => Err(format!("unknown mode '{other}' (expected ideal or physical)")),
        }
    }
}

/// One pulse or wait.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// 1-based ion; ignored for collective pulses and waits.
    pub target_ion: usize,
    /// Fock number labelling the targeted transition; for the sideband it is
    /// the lower level of `|g, n+1> <-> |e, n>`.
    pub target_n: usize,
    pub mode: Mode,
    /// Length of a wait. Pulse lengths follow from [`RabiLaw`].
    pub duration: f64,
    /// Phase of this pulse's field relative to the common origin t = 0.
    pub laser_phase: f64,
}

impl PulseSpec {
    fn pulse(kind: PulseKind, target_ion: usize, target_n: usize, mode: Mode) -> Self {
        Self { kind, target_ion, target_n, mode, duration: 0.0, laser_phase: 0.0 }
    }

    pub fn carrier_pi_half(ion: usize) -> Self {
        Self::pulse(PulseKind::CarrierPiHalf, ion, 0, Mode::Ideal)
    }

    pub fn jc_pi(ion: usize, target_n: usize, mode: Mode) -> Self {
        Self::pulse(PulseKind::JaynesCummingsPi, ion, target_n, mode)
    }

    pub fn dispersive_single(ion: usize, target_n: usize, mode: Mode) -> Self {
        Self::pulse(PulseKind::DispersiveSinglePi, ion, target_n, mode)
    }

    pub fn dispersive_collective(target_n: usize, mode: Mode) -> Self {
        Self::pulse(PulseKind::DispersiveCollectivePi, 0, target_n, mode)
    }

    pub fn wait(duration: f64) -> Self {
        Self { duration, ..Self::pulse(PulseKind::Wait, 0, 0, Mode::Ideal) }
    }

    pub fn with_phase(mut self, laser_phase: f64) -> Self {
        self.laser_phase = laser_phase;
        self
    }

    /// Checks the spec against `params` without touching any state.
    pub fn validate(&self, params: &TrapParams) -> Result<()> {
        if !self.laser_phase.is_finite() {
            return Err(Error::InvalidParams("laser phase must be finite".into()));
        }
        let check_ion = || {
            if self.target_ion == 0 || self.target_ion > params.n_ions {
                Err(Error::IonOutOfRange { ion: self.target_ion, n_ions: params.n_ions })
            } else {
                Ok(())
            }
        };
        match self.kind {
            PulseKind::CarrierPiHalf => check_ion()?,
            PulseKind::JaynesCummingsPi => {
                check_ion()?;
                if self.target_n + 1 > params.fock_cutoff {
                    return Err(Error::SidebandPastCutoff {
                        target_n: self.target_n,
                        n_max: params.fock_cutoff,
                    });
                }
            }
            PulseKind::DispersiveSinglePi | PulseKind::DispersiveCollectivePi => {
                if self.kind == PulseKind::DispersiveSinglePi {
                    check_ion()?;
                }
                if self.target_n == 0 {
                    return Err(Error::DispersiveAtGround);
                }
                if self.target_n > params.fock_cutoff {
                    return Err(Error::FockOutOfRange {
                        n: self.target_n,
                        n_max: params.fock_cutoff,
                    });
                }
            }
            PulseKind::Wait => {
                if !self.duration.is_finite() || self.duration < 0.0 {
                    return Err(Error::NegativeTime(self.duration));
                }
            }
        }
        self.duration(params).map(|_| ())
    }

    /// Time the pulse occupies: pi/2 Omega, pi/Omega_JC^(n), pi/Omega_dis^(n),
    /// or the explicit wait.
    pub fn duration(&self, params: &TrapParams) -> Result<f64> {
        let law = RabiLaw::new(params);
        let rabi = match self.kind {
            PulseKind::Wait => return Ok(self.duration),
            PulseKind::CarrierPiHalf => return Ok(FRAC_PI_2 / positive("carrier", law.carrier())?),
            PulseKind::JaynesCummingsPi => positive("Jaynes-Cummings", law.jc(self.target_n))?,
            PulseKind::DispersiveSinglePi | PulseKind::DispersiveCollectivePi => {
                if self.target_n == 0 {
                    return Err(Error::DispersiveAtGround);
                }
                positive("dispersive", law.dispersive(self.target_n))?
            }
        };
        Ok(PI / rabi)
    }
}

fn positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::ZeroRabi { what, value })
    }
}

/// Rabi frequencies to leading order in the Lamb-Dicke parameter, with the
/// common proportionality constant fixed to Omega_0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiLaw {
    base: f64,
    eta: f64,
    n_ions: f64,
}

impl RabiLaw {
    pub fn new(params: &TrapParams) -> Self {
        Self {
            base: params.base_rabi,
            eta: params.lamb_dicke,
            n_ions: params.n_ions as f64,
        }
    }

    pub fn carrier(&self) -> f64 {
        self.base
    }

    /// Omega_0 eta sqrt(n+1) / sqrt(N) for `|g,n+1> <-> |e,n>`.
    pub fn jc(&self, n: usize) -> f64 {
        self.base * self.eta * ((n + 1) as f64).sqrt() / self.n_ions.sqrt()
    }

    /// Omega_0 eta^2 n / N; shared by the single-ion and collective pulses.
    pub fn dispersive(&self, n: usize) -> f64 {
        self.base * self.eta * self.eta * n as f64 / self.n_ions
    }
}

/// Applies `spec` at the state's current clock, advances the clock by the
/// pulse duration, and returns that duration.
pub fn apply(state: &mut StateVector, spec: &PulseSpec) -> Result<f64> {
    let params = *state.params();
    spec.validate(&params)?;
    let tp = spec.duration(&params)?;
    let t0 = state.clock();
    let phi = spec.laser_phase;
    match spec.kind {
        PulseKind::CarrierPiHalf => carrier_kernel(state, spec.target_ion, tp, phi),
        PulseKind::JaynesCummingsPi => {
            jc_kernel(state, spec.target_ion, spec.target_n, spec.mode, t0, tp, phi)
        }
        PulseKind::DispersiveSinglePi => dispersive_kernel(
            state,
            &[spec.target_ion],
            spec.target_n,
            spec.mode,
            tp,
            phi,
        ),
        PulseKind::DispersiveCollectivePi => {
            let ions: Vec<usize> = (1..=params.n_ions).collect();
            dispersive_kernel(state, &ions, spec.target_n, spec.mode, tp, phi)
        }
        PulseKind::Wait => free_phases(state, tp, state.frame().detuning),
    }
    state.advance_clock(tp);
    Ok(tp)
}

/// Resonant pi/2 pulse on `ion`.
pub fn apply_carrier_pi_half(state: &mut StateVector, ion: usize) -> Result<f64> {
    apply(state, &PulseSpec::carrier_pi_half(ion))
}

/// Red-sideband pi pulse tuned to `|g, target_n + 1> <-> |e, target_n>`.
pub fn apply_jc_pulse(
    state: &mut StateVector,
    ion: usize,
    target_n: usize,
    mode: Mode,
) -> Result<f64> {
    apply(state, &PulseSpec::jc_pi(ion, target_n, mode))
}

/// Dispersive pi pulse on one ion: a NOT on `ion` controlled by the motion
/// being in `|target_n>` rather than `|0>`.
pub fn apply_dispersive_single(
    state: &mut StateVector,
    ion: usize,
    target_n: usize,
    mode: Mode,
) -> Result<f64> {
    apply(state, &PulseSpec::dispersive_single(ion, target_n, mode))
}

/// Dispersive pi pulse on every ion at once.
pub fn apply_dispersive_collective(
    state: &mut StateVector,
    target_n: usize,
    mode: Mode,
) -> Result<f64> {
    apply(state, &PulseSpec::dispersive_collective(target_n, mode))
}

/// Free evolution for `duration`: `exp(-i nu n T) exp(-i Delta T n_e)`.
pub fn free_evolve(state: &mut StateVector, duration: f64) -> Result<f64> {
    apply(state, &PulseSpec::wait(duration))
}

/// Detuning phase `exp(-i Delta tp n_e)` accumulated while a pulse of length
/// `duration` runs in frame R'. The pulse maps ignore it; this quantifies the
/// error of doing so. The clock is not advanced.
pub fn apply_detuning_phase(state: &mut StateVector, duration: f64) {
    let angle = state.frame().detuning * duration;
    electronic_phases(state, angle);
}

fn electronic_phases(state: &mut StateVector, angle: f64) {
    if angle == 0.0 {
        return;
    }
    let n_ions = state.params().n_ions;
    let per_popcount: Vec<C64> =
        (0..=n_ions).map(|k| C64::from_polar(1.0, -angle * k as f64)).collect();
    let ion_dim = state.params().ion_dim();
    for block in state.amplitudes_mut().chunks_mut(ion_dim) {
        for (bits, a) in block.iter_mut().enumerate() {
            *a *= per_popcount[bits.count_ones() as usize];
        }
    }
}

/// Multiplies level n by `exp(-i nu n T)` and each ion configuration by
/// `exp(-i Delta T popcount)`. Level 0 with zero detuning is left untouched.
fn free_phases(state: &mut StateVector, duration: f64, detuning: f64) {
    let params = *state.params();
    let nu = params.trap_freq;
    let per_popcount: Vec<C64> = (0..=params.n_ions)
        .map(|k| C64::from_polar(1.0, -detuning * duration * k as f64))
        .collect();
    for (n, block) in state.amplitudes_mut().chunks_mut(params.ion_dim()).enumerate() {
        if n == 0 && detuning == 0.0 {
            continue;
        }
        let vib = C64::from_polar(1.0, -nu * n as f64 * duration);
        for (bits, a) in block.iter_mut().enumerate() {
            *a *= vib * per_popcount[bits.count_ones() as usize];
        }
    }
}

/// (cos theta/2, sin theta/2) for theta = pi * ratio, exact at ratio 1.
fn half_angle(ratio: f64) -> (f64, f64) {
    if ratio == 1.0 {
        (0.0, 1.0)
    } else {
        let half = FRAC_PI_2 * ratio;
        (half.cos(), half.sin())
    }
}

/// `|g> -> c|g> + e^{i phi} s|e>`, `|e> -> c|e> - e^{-i phi} s|g>`, times `phase`.
#[inline]
fn rotate_pair(g: &mut C64, e: &mut C64, c: f64, up: C64, down: C64, phase: C64) {
    let (a_g, a_e) = (*g, *e);
    *g = phase * (a_g * c - down * a_e);
    *e = phase * (up * a_g + a_e * c);
}

fn carrier_kernel(state: &mut StateVector, ion: usize, tp: f64, phi: f64) {
    let params = *state.params();
    let mask = 1usize << (ion - 1);
    let s = FRAC_1_SQRT_2;
    let up = C64::from_polar(s, phi);
    let down = C64::from_polar(s, -phi);
    for (n, block) in state.amplitudes_mut().chunks_mut(params.ion_dim()).enumerate() {
        let phase = C64::from_polar(1.0, -params.trap_freq * n as f64 * tp);
        for bits in (0..block.len()).filter(|b| b & mask == 0) {
            let (lo, hi) = block.split_at_mut(bits | mask);
            rotate_pair(&mut lo[bits], &mut hi[0], s, up, down, phase);
        }
    }
}

fn dispersive_kernel(
    state: &mut StateVector,
    ions: &[usize],
    target_n: usize,
    mode: Mode,
    tp: f64,
    phi: f64,
) {
    let params = *state.params();
    let nu = params.trap_freq;
    // Level 0 has zero coupling and zero free phase: never touched.
    for (m, block) in state.amplitudes_mut().chunks_mut(params.ion_dim()).enumerate().skip(1) {
        let free = C64::from_polar(1.0, -nu * m as f64 * tp);
        let ratio = match mode {
            Mode::Ideal if m == target_n => 1.0,
            Mode::Ideal => 0.0,
            Mode::Physical => m as f64 / target_n as f64,
        };
        if ratio == 0.0 {
            block.iter_mut().for_each(|a| *a *= free);
            continue;
        }
        let (c, s) = half_angle(ratio);
        let up = C64::from_polar(s, phi);
        let down = C64::from_polar(s, -phi);
        for &ion in ions {
            let mask = 1usize << (ion - 1);
            for bits in (0..block.len()).filter(|b| b & mask == 0) {
                let (lo, hi) = block.split_at_mut(bits | mask);
                rotate_pair(&mut lo[bits], &mut hi[0], c, up, down, ONE);
            }
        }
        block.iter_mut().for_each(|a| *a *= free);
    }
}

fn jc_kernel(
    state: &mut StateVector,
    ion: usize,
    target_n: usize,
    mode: Mode,
    t0: f64,
    tp: f64,
    phi: f64,
) {
    let params = *state.params();
    let nu = params.trap_freq;
    let dim = params.ion_dim();
    let n_max = params.fock_cutoff;
    let mask = 1usize << (ion - 1);
    let law = RabiLaw::new(&params);
    let free = |m: usize| C64::from_polar(1.0, -nu * m as f64 * tp);

    let amps = state.amplitudes_mut();
    // Pair (|e, m>, |g, m+1>) for every configuration of the other ions.
    for m in 0..n_max {
        let ratio = match mode {
            Mode::Ideal if m == target_n => 1.0,
            Mode::Ideal => 0.0,
            Mode::Physical if m == target_n => 1.0,
            Mode::Physical => law.jc(m) / law.jc(target_n),
        };
        let (c, s) = half_angle(ratio);
        let diag_e = free(m) * c;
        let diag_g = free(m + 1) * c;
        // |g, m+1> -> |e, m>: i e^{i phi} e^{i nu (t0 - m tp)}
        let raise = I * C64::from_polar(s, phi + nu * (t0 - m as f64 * tp));
        // |e, m> -> |g, m+1>: i e^{-i phi} e^{-i nu (t0 + (m+1) tp)}
        let lower = I * C64::from_polar(s, -phi - nu * (t0 + (m + 1) as f64 * tp));
        let (lo, hi) = amps.split_at_mut((m + 1) * dim);
        let level_m = &mut lo[m * dim..];
        let level_up = &mut hi[..dim];
        for bits in (0..dim).filter(|b| b & mask != 0) {
            let e = level_m[bits];
            let g = level_up[bits & !mask];
            level_m[bits] = diag_e * e + raise * g;
            level_up[bits & !mask] = lower * e + diag_g * g;
        }
    }
    // Uncoupled corners: |g, 0> keeps phase 1, |e, n_max> only precesses.
    let top = free(n_max);
    for bits in (0..dim).filter(|b| b & mask != 0) {
        amps[n_max * dim + bits] *= top;
    }
}

fn kron_ion(n_ions: usize, ion: usize, op: &DMatrix<C64>) -> DMatrix<C64> {
    let above = DMatrix::<C64>::identity(1 << (n_ions - ion), 1 << (n_ions - ion));
    let below = DMatrix::<C64>::identity(1 << (ion - 1), 1 << (ion - 1));
    above.kronecker(op).kronecker(&below)
}

/// Explicit propagator of `spec` starting at `t0`, built as
/// `F(t0 + tp) expm(-i H_I tp) F(t0)^dagger` from the interaction Hamiltonian
/// written in terms of `sigma+`, `a` and `n`.
pub fn dense_matrix(
    spec: &PulseSpec,
    params: &TrapParams,
    frame: Frame,
    t0: f64,
) -> Result<DMatrix<C64>> {
    params.validate()?;
    spec.validate(params)?;
    let dim = params.dim();
    if dim > DENSE_LIMIT {
        return Err(Error::DimensionTooLarge { dim, limit: DENSE_LIMIT });
    }
    let n_ions = params.n_ions;
    let fd = params.fock_dim();
    let tp = spec.duration(params)?;
    let law = RabiLaw::new(params);
    let phi = spec.laser_phase;

    // Basis order within a 2x2 ion block: index 0 = |g>, 1 = |e>.
    let sigma_plus = DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]);
    let excited = DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    // A = i e^{i phi} sigma+ - i e^{-i phi} sigma-
    let flip = {
        let raise = &sigma_plus * (I * C64::from_polar(1.0, phi));
        &raise + raise.adjoint()
    };
    let fock_identity = DMatrix::<C64>::identity(fd, fd);
    let number = DMatrix::from_fn(fd, fd, |r, c| if r == c { C64::new(r as f64, 0.0) } else { ZERO });
    let annihilate = DMatrix::from_fn(fd, fd, |r, c| {
        if c == r + 1 { C64::new((c as f64).sqrt(), 0.0) } else { ZERO }
    });
    let ket_bra = |r: usize, c: usize| {
        DMatrix::from_fn(fd, fd, move |i, j| if i == r && j == c { ONE } else { ZERO })
    };
    let half = |x: f64| C64::new(x / 2.0, 0.0);

    let hamiltonian: DMatrix<C64> = match spec.kind {
        PulseKind::CarrierPiHalf => {
            fock_identity.kronecker(&kron_ion(n_ions, spec.target_ion, &flip)) * half(law.carrier())
        }
        PulseKind::JaynesCummingsPi => {
            let sp = kron_ion(n_ions, spec.target_ion, &sigma_plus);
            let (fock_op, scale) = match spec.mode {
                // sum_m Omega_JC^(m) over pairs == eta Omega_0 / sqrt(N) * (sigma+ a)
                Mode::Physical => (annihilate, law.jc(0)),
                Mode::Ideal => (ket_bra(spec.target_n, spec.target_n + 1), law.jc(spec.target_n)),
            };
            let coupling = fock_op.kronecker(&sp) * C64::from_polar(1.0, phi);
            (&coupling + coupling.adjoint()) * half(-scale)
        }
        PulseKind::DispersiveSinglePi | PulseKind::DispersiveCollectivePi => {
            let ions: Vec<usize> = if spec.kind == PulseKind::DispersiveSinglePi {
                vec![spec.target_ion]
            } else {
                (1..=n_ions).collect()
            };
            let mut ion_sum = DMatrix::<C64>::zeros(1 << n_ions, 1 << n_ions);
            for ion in ions {
                ion_sum += kron_ion(n_ions, ion, &flip);
            }
            match spec.mode {
                Mode::Physical => number.kronecker(&ion_sum) * half(law.dispersive(1)),
                Mode::Ideal => ket_bra(spec.target_n, spec.target_n)
                    .kronecker(&ion_sum)
                    * half(law.dispersive(spec.target_n)),
            }
        }
        PulseKind::Wait => {
            let mut ion_sum = DMatrix::<C64>::zeros(1 << n_ions, 1 << n_ions);
            for ion in 1..=n_ions {
                ion_sum += kron_ion(n_ions, ion, &excited);
            }
            fock_identity.kronecker(&ion_sum) * C64::new(frame.detuning, 0.0)
        }
    };

    let interaction = (hamiltonian * C64::new(0.0, -tp)).exp();
    let frame_phase = |t: f64| {
        DMatrix::from_fn(dim, dim, |r, c| {
            if r == c {
                let n = r >> n_ions;
                C64::from_polar(1.0, -params.trap_freq * n as f64 * t)
            } else {
                ZERO
            }
        })
    };
    Ok(frame_phase(t0 + tp) * interaction * frame_phase(t0).adjoint())
}

/// Largest amplitude difference between the matrix-free kernel and the
/// dense propagator for one pulse on `state`. Neither input is modified.
pub fn dense_discrepancy(state: &StateVector, spec: &PulseSpec) -> Result<f64> {
    let u = dense_matrix(spec, state.params(), state.frame(), state.clock())?;
    let v = nalgebra::DVector::from_column_slice(state.amplitudes());
    let dense = u * v;
    let mut fast = state.clone();
    apply(&mut fast, spec)?;
    Ok(fast
        .amplitudes()
        .iter()
        .zip(dense.iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}
