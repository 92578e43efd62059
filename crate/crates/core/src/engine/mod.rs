//! Fixed-step system-dynamics machinery.

pub mod clock;
pub mod curves;
pub mod inputs;
pub mod integrate;
pub mod state;

pub use clock::{CalendarMonth, SimClock};
pub use curves::{GompertzCurve, LogisticCurve};
pub use inputs::{SmoothState, StepInput};
pub use integrate::{euler_step, simulate, DerivativeModel, Diagnostic, DiagnosticKind, Evaluation, Trajectory};
pub use state::{StateVector, StockSpec};
