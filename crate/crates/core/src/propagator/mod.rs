//! Density-matrix propagation under the driven collective master equation.

mod evolve;
mod hamiltonian;
mod integrator;
mod lindblad;
mod operator;
mod state;

pub use evolve::{evolve, evolve_with, DriftBounds, Evolution, EvolutionSchedule, EvolutionStats};
pub use hamiltonian::{build_effective_hamiltonian, build_hamiltonian, DrivePulse};
pub use integrator::{integrate, IntegrationStats, Method, StepControl};
pub use lindblad::{lindblad_rhs, Generator};
pub use operator::{CollectiveTerms, SparseOperator};
pub use state::{initial_ground_state, pair_state, DensityMatrix, DEFAULT_MAX_ATOMS};
