//! One-degree-of-freedom magnetic levitation: `L(q) = k/(c − q)`, `q < c`.

use std::sync::Arc;

use super::{CapacitiveOutput, ConstitutiveMaps, EmsStructure, QuadraticEmsModel};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagLevParams<T> {
    /// Ball mass, kg.
    pub m: T,
    /// Gravitational acceleration, m/s².
    pub gravity: T,
    /// Coil resistance, Ω.
    pub resistance: T,
    /// Position offset, m.
    pub c: T,
    /// Inductance constant, H·m.
    pub k: T,
}

impl<T: Real> MagLevParams<T> {
    /// Laboratory-scale values used for simulation.
    pub fn simulation() -> Self {
        MagLevParams {
            m: T::lit(0.0844),
            gravity: T::lit(9.81),
            resistance: T::lit(2.52),
            c: T::lit(0.005),
            k: T::lit(6404.2e-6),
        }
    }

    /// Values identified on the experimental rig.
    pub fn experiment() -> Self {
        MagLevParams {
            resistance: T::lit(10.615),
            c: T::lit(0.0079),
            k: T::lit(49950e-6),
            ..Self::simulation()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("m", self.m),
            ("gravity", self.gravity),
            ("resistance", self.resistance),
            ("c", self.c),
            ("k", self.k),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(format!(
                    "maglev parameter `{name}` must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Flux that balances gravity, `√(2kmG)`.
    pub fn lambda_star(&self) -> T {
        (T::lit(2.0) * self.k * self.m * self.gravity).sqrt()
    }

    pub fn inductance(&self, q: T) -> T {
        self.k / (self.c - q)
    }

    /// Coil current `λ(c − q)/k`.
    pub fn current(&self, lambda: T, q: T) -> T {
        lambda * (self.c - q) / self.k
    }

    /// `(c − q)/k`, positive on the admissible region.
    pub fn virtual_output(&self, q: T) -> T {
        (self.c - q) / self.k
    }

    /// Inverse of [`Self::virtual_output`].
    pub fn position_from_virtual(&self, yv: T) -> T {
        self.c - self.k * yv
    }

    /// Coil voltage holding `λ⋆` at position `q`.
    pub fn holding_voltage(&self, q: T) -> T {
        self.resistance * self.current(self.lambda_star(), q)
    }

    pub fn model(&self, scaling: T, guard_margin: T) -> Result<QuadraticEmsModel<T>> {
        self.validate()?;
        QuadraticEmsModel::new(
            EmsStructure {
                r_c: Mat::zeros(0, 0),
                r_l: Mat::diag(&[self.resistance]),
                r_m: Mat::diag(&[T::zero()]),
                inertia: Mat::diag(&[self.m]),
                b_ce: vec![],
                b_le: vec![scaling],
                output: CapacitiveOutput::Current,
                guard_margin,
            },
            Arc::new(MagLevMaps { params: *self }),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MagLevMaps<T> {
    pub params: MagLevParams<T>,
}

impl<T: Real> ConstitutiveMaps<T> for MagLevMaps<T> {
    fn capacitance(&self, _q: &[T]) -> Mat<T> {
        Mat::zeros(0, 0)
    }

    fn capacitance_grad(&self, _q: &[T], _j: usize) -> Mat<T> {
        Mat::zeros(0, 0)
    }

    fn inductance(&self, q: &[T]) -> Mat<T> {
        Mat::diag(&[self.params.inductance(q[0])])
    }

    fn inductance_grad(&self, q: &[T], _j: usize) -> Mat<T> {
        let gap = self.params.c - q[0];
        Mat::diag(&[self.params.k / (gap * gap)])
    }

    fn potential(&self, q: &[T]) -> T {
        self.params.m * self.params.gravity * q[0]
    }

    fn potential_grad(&self, _q: &[T]) -> Vec<T> {
        vec![self.params.m * self.params.gravity]
    }

    fn check_admissible(&self, q: &[T], margin: T) -> Result<()> {
        if q[0] < self.params.c - margin {
            Ok(())
        } else {
            Err(Error::Domain {
                coordinate: "q".into(),
                value: q[0].as_f64(),
                detail: format!("ball must stay below c = {}", self.params.c),
            })
        }
    }
}
