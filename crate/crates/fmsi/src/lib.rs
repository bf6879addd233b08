//! Testing SNP x methylation-curve interactions on a continuous phenotype.
//!
//! The pipeline: sparse per-individual methylation measurements are kernel-smoothed
//! onto a common grid ([`curves`]), expanded against a B-spline basis with a
//! curvature penalty ([`basis`]), and fit jointly with genotype main effects and
//! distance-weighted SNP x curve interaction terms as a penalized linear model
//! whose smoothing parameter is chosen by REML ([`model`]). The overall
//! interaction is tested with a Wald-type F statistic ([`inference`]), with a
//! per-CpG pairwise regression + Bonferroni procedure as the comparison baseline.
//! [`simgen`] and [`harness`] generate synthetic cohorts and drive the Monte
//! Carlo studies (type-I error, power, weight-misspecification, mixture noise,
//! baseline comparison).

pub mod basis;
pub mod curves;
pub mod dist;
pub mod error;
pub mod floatfmt;
pub mod harness;
pub mod inference;
pub mod model;
pub mod simgen;

pub use basis::{PenaltyMatrix, SplineBasis, WeightForm, WeightSpec};
pub use harness::{run_study, write_outputs, StudyKind, StudyResult, StudySpec};
pub use curves::{CurveSet, MethylationSample, SmoothingConfig};
pub use error::{Error, ErrorClass, Result};
pub use inference::{BaselineResult, RawCohort, TestResult};
pub use model::{Dataset, DesignBlocks, FittedModel, ModelDims};
pub use simgen::{
    CohortTemplate, DeltaSpec, MixtureNoise, NoiseSpec, ScenarioSpec, ScenarioTemplate, SimConfig,
};


