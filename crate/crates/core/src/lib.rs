//! Core algorithms for interacting-particle simulations on space-time
//! regions: exact rational geometry, reproducible Poisson event timelines,
//! reachability queries, state evolution, and renormalization-block
//! experiments.

pub mod blocks;
pub mod contact;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod gbt;
pub mod paths;
pub mod regions;
pub mod rng;
pub mod stats;
pub mod substrate;

pub use blocks::{
    crossing_event, o_event, open_path_exists, open_path_witness, percolation_field,
    solve_integer_wedge, union_complement_blocks, verify_containment, y_slopes,
    ContainmentReport, IntegerSolution, OTranslate, PercolationField, RenormLattice, SlopePair,
    YRegion,
};
pub use contact::{evolve, evolve_many, extract_edges, Configuration, EvolveOptions, Trajectory};
pub use error::{Error, Result};
pub use experiments::{
    block_open_check, coupling_check, edge_growth_check, estimate_edge_speed, estimate_lambda_c,
    gbt_coexistence, open_path_check, run_from_config, strip_volatile, survival_curve,
    survival_probability, BlockOpenReport, CouplingReport, EdgeGrowthReport, EdgeSpeedReport,
    EstimateReport, ExperimentConfig, GbtCoexistenceReport, LambdaCReport, OpenPathReport,
    Reproducibility, SurvivalCurveReport,
};
pub use gbt::{evolve_gbt, two_block_set, GbtConfiguration, GbtRates, GbtState, GbtTrajectory};
pub use exact::Rat;
pub use paths::{active_path_exists, BlockSet, PathQuery};
pub use regions::{HalfSpace, Lean, Parallelogram, Region, Wedge};
pub use rng::SeedRecord;
pub use substrate::{
    Event, EventSource, EventTimeline, SiteWindow, SpaceTimePoint, StreamingTimeline,
    TimelineParams,
};
