//! Nonparametric maximum likelihood for interval censored survival times with
//! a continuous mark observed only for uncensored subjects.
//!
//! The product-limit MLE ([`plmle`]) is cheap but generally inconsistent;
//! [`limits`] computes what it converges to instead, [`consistency`] measures
//! the damage, and [`repaired`] fits the mark-discretized competing-risks MLE
//! that fixes it.

// `!(x > 0.0)` is used deliberately so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cheb;
pub mod consistency;
pub mod data;
pub mod limits;
pub mod maxint;
pub mod plmle;
pub mod quad;
pub mod repaired;
pub mod simulate;

pub use consistency::{check_consistency, ConsistencyError, DiscrepancyReport, Verdict};
pub use data::{
    derive_endpoints, order_dataset, DataError, DerivedEndpoints, Endpoint, Observation, OrderedDataset, OrderedRecord,
};
pub use limits::{EvaluationWindow, LimitEngine, LimitError, PopulationModel};
pub use maxint::{
    brute_force_maximal_intersections, height_at, maximal_intersections, observed_sets, MaximalIntersection,
    ObservedSet, Region,
};
pub use plmle::{
    empirical_processes, fit, fit_masses, impute_right_endpoints, log_likelihood, nonuniqueness_diagnostics, Bound,
    EmpiricalProcesses, MassVector, PlmleError,
};
pub use quad::{QuadratureConfig, QuadratureFailure};
pub use repaired::{
    discretize_marks, eval_repaired_f, fit_cr_mle, CompetingRisksDataset, EmConfig, MarkGrid, RepairError,
    SubDistributionEstimate,
};
