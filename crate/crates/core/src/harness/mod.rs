//! Deterministic simulation, adversaries and the scaling-effort meter.

pub mod adversary;
pub mod net;
pub mod scaling;
pub mod scenario;

pub use adversary::{
    byte_chi_square, collude, contains_plaintext, AdversaryModel, Capability, CollusionOutcome, CompromiseReport,
    CHI_SQUARE_BYTE_LIMIT, SCAN_WINDOW,
};
pub use net::{
    Abort, Delivery, Hook, HookAction, LinkDirection, LinkFilter, NodeControl, SimConnector, SimNet, Transcript,
    TranscriptEntry,
};
pub use scaling::{fit_growth, measure_scaling, Growth, SamplePoint, ScalingReport, MEASURED_ACTIONS, RATIO_TOLERANCE, SWEEP};
pub use scenario::{run_scenario, Scenario, ScenarioError, ScenarioOutcome, StepOutcome};
