//! Numerical versions of the stability, load-bearing, workspace and arc-fit studies.

mod load;
mod pcc;
pub mod report;
mod stability;
mod workspace;

pub use load::{run_load, LoadCurve, LoadMode, LoadProtocol, LoadReport};
pub use pcc::{run_pcc_validation, PccResult};
pub use stability::{
    percent_reduction, run_stability, run_stability_serial, DeviationReport, Reduction, Scheme,
    StabilityProtocol, StabilityRow, ThetaSummary,
};
pub use workspace::{run_workspace, run_workspace_serial, WorkspaceReport};
