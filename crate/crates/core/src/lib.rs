//! Collective spontaneous emission of dipole-coupled two-level atoms.
//!
//! The crate builds free-space dipole-dipole couplings for a set of atoms,
//! propagates the driven collective master equation for the full `2^N`
//! density matrix, extracts emission observables and runs the time-windowed
//! decay analysis used to separate super- and subradiant emission.
//!
//! All kernels are generic over the scalar type ([`Real`], `f32` or `f64`);
//! the aliases below pin the double-precision types used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod greens;
pub mod observables;
pub mod propagator;
pub mod scalar;
pub mod units;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real, Vec3};

pub type AtomConfiguration = greens::AtomConfiguration<f64>;
pub type CouplingMatrices = greens::CouplingMatrices<f64>;
pub type DensityMatrix = propagator::DensityMatrix<f64>;
pub type DrivePulse = propagator::DrivePulse<f64>;
pub type EvolutionSchedule = propagator::EvolutionSchedule<f64>;
pub type EmissionTrajectory = observables::EmissionTrajectory<f64>;
pub type ObservablesConfig = observables::ObservablesConfig<f64>;
pub type StateTag = observables::StateTag<f64>;
pub type DecayAnalysis = analysis::DecayAnalysis<f64>;
pub type DecayWindows = analysis::DecayWindows<f64>;
pub type EnsembleSpec = ensemble::EnsembleSpec<f64>;

pub type AtomConfigurationF32 = greens::AtomConfiguration<f32>;
pub type DensityMatrixF32 = propagator::DensityMatrix<f32>;
pub type EmissionTrajectoryF32 = observables::EmissionTrajectory<f32>;
