//! Marked empirical process tests of the drift and diffusion forms.

pub mod bootstrap;
pub mod marks;
pub mod procedure;
pub mod process;
pub mod study;

pub use bootstrap::{bootstrap_resample, BootstrapSample, InnovationRecord};
pub use marks::{drift_marks, vol_marks};
pub use procedure::{bootstrap_decision, gof_test, GofConfig, GofReport, GofResult, TestKind};
pub use process::{
    cvm_statistic, ks_statistic, process_eval, Coordinates, EvalMode, Functional, MarkedProcessEval,
};
pub use study::{mc_study, McStudy, StudyDesign, StudyTable};
