//! Operating characteristics and optimal design of the headstarted
//! (generalized) Shiryaev-Roberts chart for a shift in the mean of a
//! Gaussian process.
//!
//! The chart statistic is `R_n = (1 + R_{n-1}) exp(mu X_n - mu^2/2)` started
//! at `R_0 = r`, and it stops at the first `n >= 1` with `R_n >= A`.
//! [`solver`] computes the ARL to false alarm, the delay profile `ADD_k` and
//! the integral delay from integral equations; [`metrics`] turns them into
//! SADD, RIADD and the stationary delay lower bound; [`optimizer`] finds the
//! headstart and limit that close the gap between the two at a given ARL;
//! [`montecarlo`] provides an independent simulation check.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod normal;
pub mod optimizer;
pub mod quadrature;
pub mod solver;
pub mod table;

pub use error::{GsrError, Result};
pub use metrics::{
    evaluate, ChartDesign, DelayProfile, NumericsConfig, PerformanceReport, SaddArgmax,
};
pub use model::{kernel_cdf, kernel_density, score, xi, ModelParams, Regime, XiSeries};
pub use optimizer::{calibrate_threshold, optimize_design, DesignResult, SearchConfig};
pub use quadrature::{build_discretization, Discretization};
pub use solver::{build_operator, GsrSolver, KernelMatrix, NodeFunction, ProfileOptions};
