//! Gradient observer for the electrical coordinates `x_E = (Q, λ)`:
//! `x̂̇_E = ẋ_E(y, u) + γŶ_vᵀ(ℬ_E y − Ŷ_v x̂_E)`.

use super::StepSignals;
use crate::ems_models::QuadraticEmsModel;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct ElectricalObserver<T> {
    x_hat: Vec<T>,
    gamma: T,
}

impl<T: Real> ElectricalObserver<T> {
    pub fn new(x_hat0: Vec<T>, gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::config(format!("observer gain must be positive, got {gamma}")));
        }
        Ok(ElectricalObserver { x_hat: x_hat0, gamma })
    }

    pub fn x_hat(&self) -> &[T] {
        &self.x_hat
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn step(
        &mut self,
        model: &QuadraticEmsModel<T>,
        sig: &StepSignals<'_, T>,
        dt: T,
    ) -> Result<&[T]> {
        let n = model.input_len();
        if self.x_hat.len() != n {
            return Err(Error::config(format!(
                "observer state has length {}, model has {n} electrical coordinates",
                self.x_hat.len()
            )));
        }
        sig.check(n, n, n)?;
        let gamma = self.gamma;
        let field = |tau: T, x: &[T]| -> Result<Vec<T>> {
            let (y, u, yv) = sig.at(tau / dt);
            let mut dx = model.electrical_drift(&y, &u);
            let (lhs, reg) = model.electrical_regression(&y, &yv);
            let pred = reg.mul_vec(x);
            let resid: Vec<T> = lhs.iter().zip(&pred).map(|(&a, &b)| a - b).collect();
            let corr = reg.transpose().mul_vec(&resid);
            for (d, c) in dx.iter_mut().zip(corr) {
                *d += gamma * c;
            }
            Ok(dx)
        };
        self.x_hat = rk4_step(field, T::zero(), &self.x_hat, dt)?;
        Ok(&self.x_hat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ems_models::MagLevParams;

    #[test]
    fn consistent_start_stays_exact() {
        let p = MagLevParams::<f64>::simulation();
        let m = p.model(1.0, 1e-6).unwrap();
        let mut obs = ElectricalObserver::new(vec![0.1], 50.0).unwrap();
        let dt = 1e-4;
        let mut lambda = 0.1_f64;
        let q = 0.001;
        let u = 0.3;
        for _ in 0..1000 {
            let y0 = [p.current(lambda, q)];
            // λ̇ = u − R i(λ) is linear in λ at fixed q
            let rate = p.resistance * (p.c - q) / p.k;
            let next = (lambda - u / rate) * (-rate * dt).exp() + u / rate;
            let y1 = [p.current(next, q)];
            let yv = [p.virtual_output(q)];
            let sig = StepSignals {
                y: [&y0, &y1],
                u: [&[u], &[u]],
                yv_hat: [&yv, &yv],
            };
            obs.step(&m, &sig, dt).unwrap();
            lambda = next;
            assert!((obs.x_hat()[0] - lambda).abs() < 1e-9);
        }
    }
}
