//! Three-phase unbalanced distribution feeder toolkit: dataset parsing,
//! sweep power flow, PMU placement, zone-parallel WLS state estimation,
//! UPFC compensation waveforms and an ANFIS regressor.

pub mod anfis;
pub mod cli;
pub mod feeder_model;
pub mod pmu_placement;
pub mod power_flow;
pub mod state_estimation;
pub mod upfc_control;
