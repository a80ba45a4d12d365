//! W-state preparation on an all-to-all Heisenberg register, ideal and via
//! spin torque from scattered electrons.
//!
//! The static register is indexed with qubit 1 as the most significant bit;
//! the one-hot label `u_i` is the integer `2^(i−1)`. In the scattering
//! problem the flying qubit sits above all static qubits.

pub mod error;
pub mod fom;
pub mod ideal;
pub mod kraus;
pub mod linalg;
pub mod protocol;
pub mod scattering;
pub mod state;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use fom::{FomSample, GridSpec, StructureReport};
pub use ideal::{EvolutionCoeffs, JumpSpec, PhaseBranch, PhaseCorrection};
pub use kraus::{EffectiveExchange, Engine, KrausPair, RunOptions, StopCriterion};
pub use protocol::{StagePlan, Strategy, TorqueOptions};
pub use scattering::{ChannelConfig, InjectedSpin, ScatterElement};
pub use state::{Basis, DensityMatrix, PhaseRotate, StateVector};
pub use trace::{EvolutionTrace, TraceRecord};
