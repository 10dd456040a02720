pub mod cohomology;
pub mod error;
pub mod gibbs_markov;
pub mod inducing;
pub mod interval;
pub mod maps;
pub mod sampling;
pub mod sum;
pub mod symbolic;
pub mod system;
pub mod transfer;

pub use cohomology::{
    aperiodicity_test, birkhoff_average, birkhoff_sum, holder_estimate, livsic_obstructions, solve_coboundary,
    HolderEstimate, HolderMetric, LatticeOutcome, LatticeVerdict, Observable, ObstructionReport, SampledFunction,
    Seminorm, StartPoint,
};
pub use error::{Error, Result};
pub use gibbs_markov::{
    check_bip, check_distortion, check_expansion, check_iterate_distortion, check_tower_axioms, AxiomReport, Verdict,
};
pub use inducing::{induce, induced_metric, induced_observable, return_time, tower_of, InducedSystem, YoungTower};
pub use interval::Interval;
pub use maps::{doubling_map, lsv_map, Branch, BranchFn, Orbit, PiecewiseMap, Symbol};
pub use symbolic::{
    cylinder, periodic_points, separation_time, MarkovPartition, OrbitFlag, PeriodicOrbit, PeriodicPoints, Separation,
};
pub use system::MarkovSystem;
pub use transfer::{
    centering_constant, doeblin_fortet_estimate, green_kubo_variance, invariant_density, ulam_matrix,
    CenteringConstant, Density, DoeblinFortet, UlamOperator, VarianceEstimate, VarianceMode, VarianceParams,
};
