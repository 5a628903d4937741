//! Adaptive vibrotactile perception-threshold exams.
//!
//! * [`staircase`]: the one-up/one-down staircase and its threshold rules.
//! * [`observer`]: simulated participants with known psychometric functions.
//! * [`calibration`]: commanded intensity to peak acceleration lookup.
//! * [`clinical`]: tuning-fork and monofilament comparator exams.
//! * [`session`]: the timed trial runner and its CSV format.
//! * [`stats`]: tests, effect sizes, correlations and quantiles.
//! * [`study`]: synthetic cohorts, the virtual study and its report.
//!
//! Runnable walkthroughs for each area live in this crate's `examples/`.

pub mod calibration;
pub mod clinical;
pub mod observer;
pub mod session;
pub mod site;
pub mod staircase;
pub mod stats;
pub mod study;

pub use site::{BodySite, SiteClass};
