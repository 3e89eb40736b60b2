//! State observers driven by the measured output and an estimate of the
//! virtual output.
//!
//! Every observer advances over one grid interval from the samples at both
//! ends of the interval; inside the integrator stages the samples are
//! interpolated linearly.

mod electrical;
mod maglev;
mod optical_switch;

pub use electrical::ElectricalObserver;
pub use maglev::{
    FluxLaw, LuenbergerForm, LuenbergerGains, MagLevAdaptiveObserver, MagLevEstimate,
    MagLevObserverGains, MagLevLuenberger,
};
pub use optical_switch::{OptSwEstimate, OptSwObserver};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Output, input and virtual-output estimate at the two ends of a step.
#[derive(Clone, Copy, Debug)]
pub struct StepSignals<'a, T> {
    pub y: [&'a [T]; 2],
    pub u: [&'a [T]; 2],
    pub yv_hat: [&'a [T]; 2],
}

impl<'a, T: Real> StepSignals<'a, T> {
    /// Signals held constant over the step.
    pub fn held(y: &'a [T], u: &'a [T], yv_hat: &'a [T]) -> Self {
        StepSignals {
            y: [y, y],
            u: [u, u],
            yv_hat: [yv_hat, yv_hat],
        }
    }

    pub(crate) fn at(&self, theta: T) -> (Vec<T>, Vec<T>, Vec<T>) {
        (
            lerp(self.y, theta),
            lerp(self.u, theta),
            lerp(self.yv_hat, theta),
        )
    }

    pub(crate) fn scalar_at(&self, theta: T) -> (T, T, T) {
        let f = |p: [&[T]; 2]| p[0][0] + theta * (p[1][0] - p[0][0]);
        (f(self.y), f(self.u), f(self.yv_hat))
    }

    pub(crate) fn check(&self, ny: usize, nu: usize, nv: usize) -> Result<()> {
        let ok = self.y.iter().all(|s| s.len() == ny)
            && self.u.iter().all(|s| s.len() == nu)
            && self.yv_hat.iter().all(|s| s.len() == nv);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "observer expects {ny} outputs, {nu} inputs and {nv} virtual outputs"
            )))
        }
    }
}

fn lerp<T: Real>(p: [&[T]; 2], theta: T) -> Vec<T> {
    p[0].iter()
        .zip(p[1])
        .map(|(&a, &b)| a + theta * (b - a))
        .collect()
}

/// Lower clamp on the virtual-output estimate that also tracks how long the
/// estimate has been sitting on the floor.
#[derive(Clone, Debug)]
pub struct Projection<T> {
    floor: T,
    dwell_limit: usize,
    dwell: usize,
    warned: bool,
}

impl<T: Real> Projection<T> {
    /// `dwell_limit` is the number of consecutive clamped steps after which an
    /// excitation-loss warning is raised.
    pub fn new(floor: T, dwell_limit: usize) -> Result<Self> {
        if !(floor > T::zero()) || !floor.is_finite() {
            return Err(Error::config(format!(
                "projection floor must be positive, got {floor}"
            )));
        }
        Ok(Projection {
            floor,
            dwell_limit,
            dwell: 0,
            warned: false,
        })
    }

    pub fn floor(&self) -> T {
        self.floor
    }

    pub fn clamp(&self, v: T) -> T {
        v.max(self.floor)
    }

    /// Records whether the end-of-step estimate was clamped.
    pub fn record(&mut self, raw: T) {
        if raw < self.floor {
            self.dwell += 1;
            if self.dwell > self.dwell_limit && !self.warned {
                self.warned = true;
                log::warn!(
                    "virtual-output estimate held at projection floor {} for {} steps; excitation may be lost",
                    self.floor,
                    self.dwell
                );
            }
        } else {
            self.dwell = 0;
        }
    }

    /// True once the estimate has dwelt on the floor longer than allowed.
    pub fn excitation_lost(&self) -> bool {
        self.warned
    }

    pub fn dwell(&self) -> usize {
        self.dwell
    }
}
