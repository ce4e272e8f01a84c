//! Streaming sequential change point detection based on two-sample
//! U-statistics.
//!
//! A change-free historic sample is compared against an open-ended stream of
//! monitoring observations through a kernelized two-sample statistic
//! (difference of means, Wilcoxon rank indicator, or symmetric sum), one of
//! three monitoring schemes (CUSUM, mMOSUM, Page-CUSUM), and a weighted
//! boundary whose critical values come from Monte-Carlo simulation of the
//! corresponding Wiener-process limit functionals.
//!
//! The crate also ships a scenario-grid simulation harness (empirical size,
//! size-corrected power, detection delay) and a CSV analysis pipeline with
//! monthly deseasonalization; both are exposed through the `seqcp` binary.

pub mod critvals;
pub mod dist;
pub mod error;
pub mod kernels;
pub mod monitor;
pub mod pipeline;
pub mod sim;
pub mod weights;

pub use dist::{Innovation, ReferenceCdf};
pub use error::{Error, Result};
pub use kernels::{HoeffdingComponents, KernelKind, KernelSpec, VariancePolicy};
pub use monitor::{
    brute_detector, brute_scheme_stat, init_monitor, step, Decision, HistoricSummary,
    MonitorState, Scheme, TracePoint,
};
pub use weights::{hetero_weight, rho, Normalization, WeightConfig};
