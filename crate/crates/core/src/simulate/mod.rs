//! Monte Carlo verification harness.

pub mod eigen;
pub mod engine;
pub mod population;
pub mod report;
pub mod stats;

pub use eigen::{sym_eigen, top_eigenpairs, SymEigen};
pub use engine::{
    mc_run, spike_estimates, Centering, Execution, Experiment, McConfig, McRun, QuadFormExperiment, SeedPolicy,
    SesquilinearExperiment, SpikeEstimate, SpikeEstimates, SpikedExperiment, SpikedTarget, Statistic, Target,
};
pub use population::{
    sample_covariance, sample_population, seeded_symmetric, LatentDist, PopulationDist, SpikeSampler,
};
pub use report::{verify, write_replicates_csv, MCReport, TargetResult, Verification};
