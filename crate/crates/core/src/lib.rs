//! Probing-signal injection, DREM virtual-output filtering and state observers for
//! electromechanical systems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod control;
pub mod drem;
pub mod engine;
pub mod ems_models;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod observers;
pub mod ltv_ops;
pub mod scalar;
pub mod signals;

pub use error::{Error, Result};
pub use scalar::Real;

/// `f64` instantiations of the generic building blocks.
pub mod f64 {
    pub type Mat = crate::linalg::Mat<f64>;
    pub type ProbingSpec = crate::signals::ProbingSpec<f64>;
    pub type Waveform = crate::signals::Waveform<f64>;
    pub type Delay = crate::ltv_ops::Delay<f64>;
    pub type WindowMean = crate::ltv_ops::WindowMean<f64>;
    pub type Lowpass = crate::ltv_ops::Lowpass<f64>;
    pub type VirtualRegressor = crate::ltv_ops::VirtualRegressor<f64>;
    pub type ScalarGradState = crate::drem::ScalarGradState<f64>;
    pub type MixedRegression = crate::drem::MixedRegression<f64>;
    pub type DremEstimator = crate::drem::DremEstimator<f64>;
    pub type WindowDemodulator = crate::drem::WindowDemodulator<f64>;
    pub type QuadraticEmsModel = crate::ems_models::QuadraticEmsModel<f64>;
    pub type MagLevParams = crate::ems_models::MagLevParams<f64>;
    pub type OpticalSwitchParams = crate::ems_models::OpticalSwitchParams<f64>;
    pub type ElectricalObserver = crate::observers::ElectricalObserver<f64>;
    pub type MagLevAdaptiveObserver = crate::observers::MagLevAdaptiveObserver<f64>;
    pub type MagLevLuenberger = crate::observers::MagLevLuenberger<f64>;
    pub type OptSwObserver = crate::observers::OptSwObserver<f64>;
    pub type IdaPbcGains = crate::control::IdaPbcGains<f64>;
    pub type Backstepping = crate::control::Backstepping<f64>;
    pub type Reference = crate::control::Reference<f64>;
}
