//! Quantum-information objectives on tensor trains: stabilizer Rényi
//! entropy, approximate stabilizer-rank decompositions and the minimum output
//! Rényi-2 entropy of tensor-power channels.

mod channel;
mod pauli;
mod renyi;
mod sre;
mod stabrank;

pub use channel::{ChannelSpec, QuantumChannel};
pub use pauli::{Pauli, PauliString};
pub use renyi::{
    dense_min_output_entropy, min_output_entropy, output_purity, output_purity_dense, renyi2_cost,
    renyi2_entropy, ChannelRun, MinEntropyResult,
};
pub use sre::{pauli_fourth_moment, sre2_dense, sre2_mps, sre2_tt};
pub use stabrank::{
    h_state, h_state_power, optimal_coefficients, stab_rank_cost, stab_rank_solve,
    StabDecomposition, StabRankConfig, StabRankResult,
};
