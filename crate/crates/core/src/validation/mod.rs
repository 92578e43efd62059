//! Model validation: Theil statistics against reference modes, invariant
//! checks, sensitivity sweeps, extreme conditions and calibration.

pub mod acceptance;
pub mod calibrate;
pub mod extreme;
pub mod invariants;
pub mod reference;
pub mod sensitivity;
pub mod theil;

pub use acceptance::{AcceptanceReport, Criterion};
pub use calibrate::{calibrate, CalibrationReport, CalibrationResult, CalibrationSpec};
pub use extreme::{extreme_conditions, ExtremeCase};
pub use invariants::check_run;
pub use reference::{validate_references, ReferenceMode, ReferenceOutcome};
pub use sensitivity::{sensitivity_sweep, SensitivityReport};
pub use theil::{theils_u, TheilStats};
