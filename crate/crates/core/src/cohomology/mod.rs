//! Birkhoff sums, periodic obstructions, coboundary reconstruction,
//! regularity estimates and the lattice (aperiodicity) test.

pub mod birkhoff;
pub mod holder;
pub mod lattice;
pub mod observable;
pub mod obstruction;
pub mod solve;

pub use birkhoff::{birkhoff_average, birkhoff_sum, DitheredOrbit};
pub use holder::{holder_estimate, Band, HolderEstimate, HolderMetric};
pub use lattice::{aperiodicity_test, LatticeOutcome, LatticeVerdict, ResidualRow};
pub use observable::{Observable, ObservableFn, Seminorm};
pub use obstruction::{livsic_obstructions, obstructions_from, ObstructionReport, OrbitSum};
pub use solve::{solve_coboundary, RangeAt, SampledFunction, StartPoint};
