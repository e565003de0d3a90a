#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod extended;
pub mod gibbs;
pub mod oracle;
pub mod percolation;
pub mod potential;
pub mod quadrature;
pub mod replicas;
pub mod rng;
pub mod space;
pub mod stats;

pub use config::{conditional_energy, PointConfiguration};
pub use coupling::{simulate_coupled, CoupledObserver, CoupledState, CoupledTrajectory};
pub use dynamics::{BirthDeathSpec, Jump, Observer, Trajectory};
pub use error::{Error, Result};
pub use extended::{ExtendedReal, KahanSum};
pub use gibbs::{ExactSampler, GibbsSpec};
pub use oracle::{discretize, exact_stationary, CoupledDiscreteChain, DiscreteChain, DiscretizedInstance};
pub use percolation::{poisson_tail, run_percolation, HittingRecord, PercolationReport, WindowPolicy};
pub use potential::{BuiltinPotential, PotentialKind, PotentialSpec, TemperednessEstimate};
pub use replicas::{ReplicaRunner, Sequential};
pub use rng::ReplicaRng;
pub use space::{BoxGrid, BoxRegion, GridIndex, VertexClass};
