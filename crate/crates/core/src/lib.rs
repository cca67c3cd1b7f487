//! Exploratory spatial data analysis over polygon lattices: contiguity
//! weights, global and local Moran statistics with permutation inference,
//! facility-per-cluster tallies, neighbor-mean imputation and composite
//! vulnerability scoring.

pub mod attributes;
pub mod autocorr;
pub mod error;
pub mod impute;
pub mod lattice;
pub mod numfmt;
pub mod pipeline;
pub mod points;
pub mod scoring;
pub mod synthetic;
pub mod weights;

pub use attributes::{parse_attributes, parse_broadcast_attributes, AttributeOptions, AttributeTable};
pub use autocorr::{
    bivariate_local_moran, classify, global_bivariate_moran, global_bivariate_moran_inference,
    global_moran, global_moran_inference, local_moran, spatial_lag, standardize, ClusterClass,
    Inference, LisaOptions, LisaResult, MoranResult,
};
pub use error::{Error, ErrorCategory, Result};
pub use impute::{impute_missing, Imputation};
pub use lattice::{parse_lattice, Region, RegionLattice};
pub use points::{parse_points, spatial_join, JoinAssignment, PointSet};
pub use scoring::{composite_score, rank_regions, CompositeScoreConfig, Direction, ScoreReport};
pub use weights::{build_contiguity, Contiguity, SpatialWeights};
pub use pipeline::{run, run_file, Prepared, RunConfig, RunSummary, TallyTable};
