//! Statevector simulation of charge-conserving brickwork circuits on qudit
//! chains, with Schmidt spectra, Rényi entropies, charge-transport
//! diagnostics and per-instance certificates of the entropy-growth bound.
//!
//! Sites are 1-based and site 1 is the most significant base-`d` digit of a
//! basis index.

pub mod circuit;
pub mod cli;
pub mod entanglement;
pub mod error;
pub mod gates;
pub mod harness;
pub mod output;
pub mod rng;
pub mod state;
pub mod transport;

pub use circuit::{
    deviation_state, evolve, evolve_modified, modify_circuit, sample_circuit, BrickworkCircuit, ModifiedCircuit,
};
pub use entanglement::{
    check_renyi_bounds, eckart_young_overlap, min_entropy, renyi_entropy, schmidt_coefficients, schmidt_spectrum,
    von_neumann, SchmidtSpectrum,
};
pub use error::{Error, Result};
pub use gates::{apply_gate, gate_phase_00, haar_unitary, sector_decomposition, ChargeConservingGate, ChargeSector};
pub use harness::{
    entropy_growth_sweep, enumerate_s_prime, run_instance, ExperimentSpec, ProofCertificate, SPrimeReport, WidthMode,
};
pub use state::{
    charge_expectation, inner_product, product_state, project_local_zero, x_eigenstate, z_basis_state, ChainConfig,
    LocalLabel, StateVector,
};
pub use transport::{
    bulk_charge_decay, charge_profile, condition_inequality_check, ensemble_average_profile, random_walk_oracle,
    ChargeProfile, DecayFit,
};
