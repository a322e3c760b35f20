//! High-dimensional one- and two-sample tests for U-statistic parameter
//! vectors based on (s0,p)-norms, calibrated by a Gaussian multiplier
//! bootstrap, with a data-adaptive combination over several `p`.
//!
//! Typical use:
//!
//! ```
//! use spnorm_core::{run_adaptive_test, AdaptiveConfig, Kernel, Problem, Sample};
//! # use ndarray::Array2;
//! # let x = Sample::new(Array2::from_shape_fn((20, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64)).unwrap();
//! # let y = Sample::new(Array2::from_shape_fn((20, 4), |(i, j)| ((i * 5 + j) % 13) as f64)).unwrap();
//! let problem = Problem::TwoSample { x, y };
//! let report = run_adaptive_test(&problem, &Kernel::mean(4), &AdaptiveConfig::default(), 42).unwrap();
//! println!("combined P-value {}", report.p_value);
//! ```

pub mod adaptive;
pub mod bootstrap;
pub mod error;
pub mod hotelling;
pub mod norms;
pub mod rng;
pub mod simgen;
pub mod study;
pub mod ustat;

pub use adaptive::{
    adaptive_pvalue, adaptive_statistic, default_exponents, default_s0, double_loop_adaptive,
    double_loop_bootstrap, lowcost_bootstrap_adaptive, run_adaptive_test, AdaptiveConfig,
    AdaptiveReport, Method, PreparedTest, Problem,
};
pub use bootstrap::{
    bootstrap_centered_ustat, bootstrap_stats_one, bootstrap_stats_two, critical_value,
    gen_multipliers, individual_pvalue, individual_tests, BootstrapEnsemble, Calibrator,
    IndividualResult, MultiplierMatrix,
};
pub use error::{Error, Result};
pub use hotelling::{hotelling_t2, hotelling_test, HotellingReport};
pub use norms::{sp_norm, sp_norm_batch, Exponent, SpNormConfig};
pub use simgen::{Model, ModelSpec, ShiftSpec};
pub use study::{run_study, StudyConfig, StudyResult};
pub use ustat::{
    compute_ustat, eval_kernel, standardize_one_sample, standardize_two_sample, Kernel,
    KernelFamily, PairSet, Sample, Side, StatVector, UStatSummary,
};
