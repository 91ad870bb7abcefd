//! Simulation of the selective vibronic interaction of two trapped ions driven
//! by a pair of detuned Raman pulses.
//!
//! The model keeps the electronic two-level structure of both ions together
//! with their centre-of-mass and relative (stretch) motional modes. Operators
//! are dense matrices on electronic ⊗ CM ⊗ relative (see [`BasisDescriptor`]);
//! time evolution uses an adaptive Dormand–Prince integrator.

pub mod error;
pub mod fock;
pub mod hamiltonian;
pub mod operator;
pub mod propagator;
pub mod protocols;
pub mod spectroscopy;

pub use error::{Error, Result};
pub use fock::{ModeParams, Sideband};
pub use hamiltonian::{
    build_effective_hamiltonian, build_full_hamiltonian, corrected_drive, stark_shifts, target_levels, DriveParams,
    EffectiveHamiltonian, StarkShiftTable, TargetLevels,
};
pub use operator::{BasisDescriptor, ElectronicLabel, Factor, OperatorMatrix};
pub use propagator::{
    evolve, evolve_between, evolve_sampled, fidelity, EvolveOptions, Hamiltonian, HarmonicHamiltonian, Observable,
    Trajectory, VibronicState,
};
pub use protocols::{
    apply_pulse, measure_electronic, protocol_bell_motional, protocol_entanglement_transfer, protocol_hole_burning,
    pulse_duration, BranchOutcome, Correction, Model, PulseSpec, Target,
};
pub use spectroscopy::{find_magic_eta, resonance_residual, scan, MagicEtaResult, ScanGrid};
