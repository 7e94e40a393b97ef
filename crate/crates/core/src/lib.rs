//! State-vector simulation of a deterministic N-ion GHZ preparation.
//!
//! N two-level ions share one quantized axial vibrational mode. Four kinds of
//! laser pulse (carrier pi/2, red-sideband pi, single-ion and collective
//! dispersive pi) act on the joint state with exact free-evolution phase
//! bookkeeping. [`protocol`] strings them into the five-pulse GHZ preparation
//! and the entangled Ramsey scheme; [`seqlang`] runs arbitrary pulse programs.

pub mod error;
pub mod hilbert;
pub mod protocol;
pub mod pulses;
pub mod seqlang;

pub use error::{Error, Result};
pub use hilbert::{BasisIndex, DickeExtreme, Frame, FrameTag, StateDump, StateVector, TrapParams};
pub use pulses::{Mode, PulseKind, PulseSpec, RabiLaw};
pub use seqlang::{ParseDiagnostic, SequenceProgram, Step};
pub use num_complex::Complex64;
