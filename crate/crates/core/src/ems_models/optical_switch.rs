//! Electrostatic micro-mirror: `C(q) = c₁(q + c₀)`, `q > 0`, voltage output.

use std::sync::Arc;

use super::{CapacitiveOutput, ConstitutiveMaps, EmsStructure, QuadraticEmsModel};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpticalSwitchParams<T> {
    pub m: T,
    pub a1: T,
    pub a2: T,
    pub c0: T,
    pub c1: T,
    pub r_c: T,
    pub r_m: T,
}

impl<T: Real> Default for OpticalSwitchParams<T> {
    /// Mechanical mode near 10 rad/s, electrical time constant 0.1 s at `q = 1e-3`.
    fn default() -> Self {
        OpticalSwitchParams {
            m: T::lit(1e-3),
            a1: T::lit(0.1),
            a2: T::lit(1e3),
            c0: T::lit(1e-3),
            c1: T::lit(1e-3),
            r_c: T::lit(5e4),
            r_m: T::lit(5e-3),
        }
    }
}

impl<T: Real> OpticalSwitchParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("a1", self.a1),
            ("a2", self.a2),
            ("c0", self.c0),
            ("c1", self.c1),
            ("r_c", self.r_c),
            ("r_m", self.r_m),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(format!(
                    "optical switch parameter `{name}` must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn capacitance(&self, q: T) -> T {
        self.c1 * (q + self.c0)
    }

    /// `𝔟/(R_C c₁(q + c₀))`.
    pub fn virtual_output(&self, q: T, scaling: T) -> T {
        scaling / (self.r_c * self.capacitance(q))
    }

    pub fn position_from_virtual(&self, yv: T, scaling: T) -> T {
        scaling / (self.r_c * self.c1 * yv) - self.c0
    }

    /// Electrostatic plus spring force on the mirror at charge `Q`, without damping.
    pub fn force(&self, charge: T, q: T) -> T {
        let cap = self.capacitance(q);
        -self.a1 * q - self.a2 * q * q * q + charge * charge * self.c1 / (T::lit(2.0) * cap * cap)
    }

    /// Source voltage whose steady charge holds the mirror at `q`.
    pub fn holding_voltage(&self, q: T) -> T {
        let spring = self.a1 * q + self.a2 * q * q * q;
        (T::lit(2.0) * spring / self.c1).sqrt()
    }

    pub fn model(&self, scaling: T, guard_margin: T) -> Result<QuadraticEmsModel<T>> {
        self.validate()?;
        QuadraticEmsModel::new(
            EmsStructure {
                r_c: Mat::diag(&[self.r_c]),
                r_l: Mat::zeros(0, 0),
                r_m: Mat::diag(&[self.r_m]),
                inertia: Mat::diag(&[self.m]),
                b_ce: vec![scaling],
                b_le: vec![],
                output: CapacitiveOutput::Voltage,
                guard_margin,
            },
            Arc::new(OpticalSwitchMaps { params: *self }),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OpticalSwitchMaps<T> {
    pub params: OpticalSwitchParams<T>,
}

impl<T: Real> ConstitutiveMaps<T> for OpticalSwitchMaps<T> {
    fn capacitance(&self, q: &[T]) -> Mat<T> {
        Mat::diag(&[self.params.capacitance(q[0])])
    }

    fn capacitance_grad(&self, _q: &[T], _j: usize) -> Mat<T> {
        Mat::diag(&[self.params.c1])
    }

    fn inductance(&self, _q: &[T]) -> Mat<T> {
        Mat::zeros(0, 0)
    }

    fn inductance_grad(&self, _q: &[T], _j: usize) -> Mat<T> {
        Mat::zeros(0, 0)
    }

    fn potential(&self, q: &[T]) -> T {
        let q = q[0];
        self.params.a1 * q * q / T::lit(2.0) + self.params.a2 * q * q * q * q / T::lit(4.0)
    }

    fn potential_grad(&self, q: &[T]) -> Vec<T> {
        let q = q[0];
        vec![self.params.a1 * q + self.params.a2 * q * q * q]
    }

    fn check_admissible(&self, q: &[T], margin: T) -> Result<()> {
        if q[0] > margin {
            Ok(())
        } else {
            Err(Error::Domain {
                coordinate: "q".into(),
                value: q[0].as_f64(),
                detail: "mirror position must stay positive".into(),
            })
        }
    }
}
