//! Full-state observer for the electrostatic micro-mirror.

use super::{Projection, StepSignals};
use crate::ems_models::OpticalSwitchParams;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptSwEstimate<T> {
    pub charge: T,
    pub q: T,
    pub p: T,
}

#[derive(Clone, Debug)]
pub struct OptSwObserver<T> {
    params: OpticalSwitchParams<T>,
    scaling: T,
    gamma: T,
    charge: T,
    p: T,
    q: T,
    projection: Projection<T>,
}

impl<T: Real> OptSwObserver<T> {
    pub fn new(
        params: OpticalSwitchParams<T>,
        scaling: T,
        gamma: T,
        charge0: T,
        p0: T,
        projection: Projection<T>,
    ) -> Result<Self> {
        params.validate()?;
        if !(gamma > T::zero()) {
            return Err(Error::config(format!("observer gain must be positive, got {gamma}")));
        }
        if !(scaling > T::zero()) {
            return Err(Error::config("optical switch observer needs a positive injection scaling"));
        }
        Ok(OptSwObserver {
            params,
            scaling,
            gamma,
            charge: charge0,
            p: p0,
            q: T::nan(),
            projection,
        })
    }

    pub fn projection(&self) -> &Projection<T> {
        &self.projection
    }

    /// Position reconstructed from a projected virtual output.
    pub fn position(&self, yv_hat: T) -> T {
        self.params
            .position_from_virtual(self.projection.clamp(yv_hat), self.scaling)
    }

    pub fn estimate(&self) -> OptSwEstimate<T> {
        OptSwEstimate {
            charge: self.charge,
            q: self.q,
            p: self.p,
        }
    }

    pub fn step(&mut self, sig: &StepSignals<'_, T>, dt: T) -> Result<OptSwEstimate<T>> {
        sig.check(1, 1, 1)?;
        let par = self.params;
        let (b, gamma) = (self.scaling, self.gamma);
        let proj = &self.projection;
        let field = |tau: T, x: &[T]| -> Result<Vec<T>> {
            let (y, u, yv) = sig.scalar_at(tau / dt);
            let yv = proj.clamp(yv);
            let q = par.position_from_virtual(yv, b);
            let dq = (u - y) / par.r_c + gamma * yv * (b * y / par.r_c - yv * x[0]);
            let dp = par.force(x[0], q) - par.r_m / par.m * x[1];
            Ok(vec![dq, dp])
        };
        let next = rk4_step(field, T::zero(), &[self.charge, self.p], dt)?;
        self.charge = next[0];
        self.p = next[1];
        let yv_end = sig.yv_hat[1][0];
        self.projection.record(yv_end);
        self.q = self.position(yv_end);
        Ok(self.estimate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn observer(gamma: f64, charge0: f64) -> (OpticalSwitchParams<f64>, OptSwObserver<f64>) {
        let par = OpticalSwitchParams::default();
        let floor = 0.05 * par.virtual_output(1e-3, 0.1);
        let obs =
            OptSwObserver::new(par, 0.1, gamma, charge0, 0.0, Projection::new(floor, 100).unwrap())
                .unwrap();
        (par, obs)
    }

    #[test]
    fn charge_error_decays_at_gradient_rate() {
        // frozen mirror, constant source: Q stays at C(q)·v
        let (par, mut obs) = observer(40.0, 0.0);
        let q = 1.5e-3;
        let v = 0.4;
        let charge = par.capacitance(q) * v;
        let yv = [par.virtual_output(q, 0.1)];
        let (y, u) = ([v], [v]);
        let dt = 1e-4;
        let rate = 40.0 * yv[0] * yv[0];
        let e0 = -charge;
        for k in 1..=2000 {
            obs.step(&StepSignals::held(&y, &u, &yv), dt).unwrap();
            let t = k as f64 * dt;
            let err = obs.estimate().charge - charge;
            let oracle = e0 * (-rate * t).exp();
            if k % 200 == 0 {
                assert!((err / oracle - 1.0).abs() < 0.1, "t={t}: {err} vs {oracle}");
            }
        }
        assert!((obs.estimate().q - q).abs() < 1e-15);
    }

    #[test]
    fn consistent_start_at_equilibrium_stays_exact() {
        let par = OpticalSwitchParams::<f64>::default();
        let q = 2e-3;
        let v = par.holding_voltage(q);
        let charge = par.capacitance(q) * v;
        let floor = 0.05 * par.virtual_output(1e-3, 0.1);
        let mut obs =
            OptSwObserver::new(par, 0.1, 30.0, charge, 0.0, Projection::new(floor, 10).unwrap())
                .unwrap();
        let yv = [par.virtual_output(q, 0.1)];
        for _ in 0..1000 {
            let e = obs.step(&StepSignals::held(&[v], &[v], &yv), 1e-4).unwrap();
            assert!((e.charge - charge).abs() < 1e-18 && e.p.abs() < 1e-15);
        }
    }

    #[test]
    fn floor_keeps_position_bounded() {
        let (par, mut obs) = observer(40.0, 0.0);
        let e = obs
            .step(&StepSignals::held(&[0.0], &[0.0], &[-3.0]), 1e-4)
            .unwrap();
        let q_max = par.position_from_virtual(obs.projection().floor(), 0.1);
        assert!(e.q.is_finite() && (e.q - q_max).abs() < 1e-15);
    }
}
