//! QAOA state-vector engine and direct parameter training.

pub mod engine;
pub mod optimize;

pub use engine::{
    build_cost_vector, expectation, expectation_of_state, run_ansatz, sample, sample_state, CostVector,
    QaoaParams, StateVector,
};
pub use optimize::{direct_train, nelder_mead, TrainBudget, Trained};
