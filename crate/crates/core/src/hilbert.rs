//! Joint Hilbert space of N two-level ions and one truncated vibrational mode.
//!
//! Amplitudes are stored Fock-major: the flat index of `|s_1 .. s_N>|n>` is
//! `n * 2^N + bits`, where bit `j - 1` of `bits` is set when ion `j` is in
//! `|e>`. Pulse operators are block diagonal (or couple neighbouring blocks) in
//! `n`, so every pulse can be applied block by block without a matrix.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register supported; 2^20 * (n_max + 1) amplitudes is already
/// far beyond what the protocol needs.
pub const MAX_IONS: usize = 20;

/// Population allowed at the Fock cutoff before [`StateVector::check_leakage`]
/// reports truncation error.
pub const LEAKAGE_TOLERANCE: f64 = 1e-10;

/// Trap and laser parameters shared by every pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Number of ions N.
    pub n_ions: usize,
    /// Axial trap frequency nu_x (rad/s).
    pub trap_freq: f64,
    /// Lamb-Dicke parameter eta_x.
    pub lamb_dicke: f64,
    /// Carrier Rabi frequency Omega_0 (rad/s); scales every other Rabi rate.
    pub base_rabi: f64,
    /// Highest retained Fock level n_max.
    pub fock_cutoff: usize,
}

impl Default for TrapParams {
    fn default() -> Self {
        Self {
            n_ions: 2,
            trap_freq: 1.0,
            lamb_dicke: 0.1,
            base_rabi: 1.0,
            fock_cutoff: 4,
        }
    }
}

impl TrapParams {
    pub fn new(n_ions: usize, fock_cutoff: usize) -> Self {
        Self { n_ions, fock_cutoff, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 1 || self.n_ions > MAX_IONS {
            return Err(Error::InvalidParams(format!(
                "n_ions = {} must lie in 1..={}",
                self.n_ions, MAX_IONS
            )));
        }
        if self.fock_cutoff < 1 {
            return Err(Error::InvalidParams("fock_cutoff must be at least 1".into()));
        }
        for (name, v) in [
            ("trap_freq", self.trap_freq),
            ("lamb_dicke", self.lamb_dicke),
            ("base_rabi", self.base_rabi),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Number of electronic configurations, 2^N.
    pub fn ion_dim(&self) -> usize {
        1 << self.n_ions
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        self.ion_dim() * self.fock_dim()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameTag {
    /// Rotating at the atomic resonance omega_0.
    #[serde(rename = "R")]
    R,
    /// Rotating at the laser frequency omega = omega_0 - detuning.
    #[serde(rename = "Rprime")]
    RPrime,
}

/// Interaction picture in which amplitudes are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub tag: FrameTag,
    /// Delta = omega_0 - omega (rad/s); always zero in frame R.
    pub detuning: f64,
}

impl Frame {
    pub const RESONANT: Frame = Frame { tag: FrameTag::R, detuning: 0.0 };

    pub fn laser(detuning: f64) -> Self {
        Frame { tag: FrameTag::RPrime, detuning }
    }
}

impl Default for Frame {
    fn default() -> Self {
        Frame::RESONANT
    }
}

/// Decomposed flat index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub ion_bits: usize,
    pub fock_n: usize,
}

impl BasisIndex {
    pub fn new(ion_bits: usize, fock_n: usize) -> Self {
        Self { ion_bits, fock_n }
    }

    pub fn flat(self, n_ions: usize) -> usize {
        (self.fock_n << n_ions) | self.ion_bits
    }

    pub fn from_flat(flat: usize, n_ions: usize) -> Self {
        Self {
            ion_bits: flat & ((1 << n_ions) - 1),
            fock_n: flat >> n_ions,
        }
    }

    /// Whether 1-based `ion` is excited.
    pub fn is_excited(self, ion: usize) -> bool {
        self.ion_bits >> (ion - 1) & 1 == 1
    }
}

/// Which extreme Dicke state |J, +-J>.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DickeExtreme {
    /// |J, -J>: every ion in |g>.
    Lowest,
    /// |J, J>: every ion in |e>.
    Highest,
}

/// Pure state of ions plus motion, tagged with its frame and clock.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<C64>,
    params: TrapParams,
    frame: Frame,
    clock: f64,
}

impl StateVector {
    /// |J, -J>|0> at t = 0.
    pub fn ground_state(params: TrapParams, frame: Frame) -> Result<Self> {
        Self::basis_state(params, frame, BasisIndex::new(0, 0))
    }

    pub fn basis_state(params: TrapParams, frame: Frame, index: BasisIndex) -> Result<Self> {
        params.validate()?;
        validate_frame(frame)?;
        if index.fock_n > params.fock_cutoff {
            return Err(Error::FockOutOfRange { n: index.fock_n, n_max: params.fock_cutoff });
        }
        if index.ion_bits >= params.ion_dim() {
            return Err(Error::Mismatch(format!(
                "ion word {:#b} has more than {} bits",
                index.ion_bits, params.n_ions
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); params.dim()];
        amplitudes[index.flat(params.n_ions)] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, params, frame, clock: 0.0 })
    }

    /// |J, -J>|n> or |J, J>|n>.
    pub fn dicke_extreme(
        params: TrapParams,
        frame: Frame,
        which: DickeExtreme,
        fock_n: usize,
    ) -> Result<Self> {
        params.validate()?;
        let bits = match which {
            DickeExtreme::Lowest => 0,
            DickeExtreme::Highest => params.ion_dim() - 1,
        };
        Self::basis_state(params, frame, BasisIndex::new(bits, fock_n))
    }

    /// (|J,-J> + e^{i phi}|J,J>)|0> / sqrt(2).
    pub fn target_ghz(params: TrapParams, frame: Frame, phi: f64) -> Result<Self> {
        let mut state = Self::ground_state(params, frame)?;
        let all = params.ion_dim() - 1;
        state.amplitudes[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        state.amplitudes[all] = C64::from_polar(FRAC_1_SQRT_2, phi);
        Ok(state)
    }

    /// Builds a state from raw amplitudes in flat order. The vector must be
    /// normalized to within 1e-10.
    pub fn from_amplitudes(
        params: TrapParams,
        frame: Frame,
        clock: f64,
        amplitudes: Vec<C64>,
    ) -> Result<Self> {
        params.validate()?;
        validate_frame(frame)?;
        if amplitudes.len() != params.dim() {
            return Err(Error::Mismatch(format!(
                "expected {} amplitudes, got {}",
                params.dim(),
                amplitudes.len()
            )));
        }
        let state = Self { amplitudes, params, frame, clock };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Mismatch(format!("amplitudes have norm {norm}, expected 1")));
        }
        Ok(state)
    }

    pub fn params(&self) -> &TrapParams {
        &self.params
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub(crate) fn advance_clock(&mut self, dt: f64) {
        self.clock += dt;
    }

    pub fn amplitude(&self, index: BasisIndex) -> C64 {
        self.amplitudes[index.flat(self.params.n_ions)]
    }

    /// Euclidean norm (not squared).
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.params != other.params {
            return Err(Error::Mismatch("trap parameters differ".into()));
        }
        if self.frame != other.frame {
            return Err(Error::Mismatch(format!(
                "frames differ ({:?} vs {:?})",
                self.frame, other.frame
            )));
        }
        Ok(())
    }

    /// <self|other>.
    pub fn inner(&self, other: &Self) -> Result<C64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |<self|other>|^2, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    /// Largest |a_k - b_k| over all amplitudes; sensitive to global phase.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Total probability of the basis states selected by `pred`.
    pub fn probability<F>(&self, pred: F) -> f64
    where
        F: Fn(BasisIndex) -> bool,
    {
        let n_ions = self.params.n_ions;
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| pred(BasisIndex::from_flat(*k, n_ions)))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Probability of finding 1-based `ion` in |e>.
    pub fn excited_population(&self, ion: usize) -> Result<f64> {
        self.check_ion(ion)?;
        Ok(self.probability(|idx| idx.is_excited(ion)))
    }

    /// Marginal distribution over the Fock levels 0..=n_max.
    pub fn fock_populations(&self) -> Vec<f64> {
        self.amplitudes
            .chunks(self.params.ion_dim())
            .map(|block| block.iter().map(|a| a.norm_sqr()).sum())
            .collect()
    }

    pub fn check_ion(&self, ion: usize) -> Result<()> {
        if ion == 0 || ion > self.params.n_ions {
            return Err(Error::IonOutOfRange { ion, n_ions: self.params.n_ions });
        }
        Ok(())
    }

    /// Fails when the population parked at n = n_max exceeds
    /// [`LEAKAGE_TOLERANCE`], i.e. the truncation can no longer be trusted.
    pub fn check_leakage(&self) -> Result<()> {
        let top = *self.fock_populations().last().expect("fock_dim >= 2");
        if top > LEAKAGE_TOLERANCE {
            return Err(Error::Leakage { n_max: self.params.fock_cutoff, population: top });
        }
        Ok(())
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            n_ions: self.params.n_ions,
            n_max: self.params.fock_cutoff,
            frame: self.frame,
            clock: self.clock,
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_dump()).expect("state dump serializes")
    }
}

fn validate_frame(frame: Frame) -> Result<()> {
    match frame.tag {
        FrameTag::R if frame.detuning != 0.0 => Err(Error::InvalidParams(
            "frame R must have zero detuning".into(),
        )),
        _ if !frame.detuning.is_finite() => {
            Err(Error::InvalidParams("detuning must be finite".into()))
        }
        _ => Ok(()),
    }
}

/// Serialized form used by `--dump-state`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub n_ions: usize,
    pub n_max: usize,
    pub frame: Frame,
    pub clock: f64,
    /// `[re, im]` pairs in flat order `n * 2^N + bits`.
    pub amplitudes: Vec<[f64; 2]>,
}
