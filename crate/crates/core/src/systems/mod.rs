//! Benchmark plants, Lyapunov certificates, predictors and the gravitational
//! `m`-body problem.

pub mod benchmark;
pub mod hamiltonian;
pub mod lyapunov;
pub mod predictor;

pub use benchmark::{control_rhs, default_a, BenchmarkKind, ControlBenchmark, DEFAULT_A};
pub use hamiltonian::{
    feature_gradients, hamiltonian, hamiltonian_grads, learned_field_into, learned_hamiltonian,
    symplectic_predictor_rhs, symplectic_predictor_rhs_into, HamiltonianSpec, MomentumMode,
};
pub use lyapunov::{lyapunov_residual, solve_lyapunov, LyapunovCertificate};
pub use predictor::{
    build_predictor, discrete_sampling_step, matrix_exp, DiscretePredictorSpec, Predictor, Regressor, SamplingStep,
};
