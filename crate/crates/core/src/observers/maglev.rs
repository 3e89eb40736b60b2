//! Adaptive observer for the levitated ball with unknown coil resistance, and
//! a second-order Luenberger alternative for the momentum.
//!
//! Coordinates: `x₁ = λ`, `x₂ = (c − q)/k = y_v`, `x₃ = p`.

use super::{Projection, StepSignals};
use crate::ems_models::MagLevParams;
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::scalar::Real;

/// Injection term of the flux estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FluxLaw {
    /// `+γ_λ ŷ_v (y − ŷ_v x̂₁)`: error dynamics `−γ_λ y_v² x̃₁`.
    #[default]
    Gradient,
    /// `−γ_λ (y − ŷ_v x̂₁)`: error dynamics `+γ_λ y_v x̃₁`, unstable.
    Verbatim,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagLevObserverGains<T> {
    pub gamma_r: T,
    pub gamma_lambda: T,
    pub gamma_p: T,
    pub a: T,
}

impl<T: Real> MagLevObserverGains<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_r", self.gamma_r),
            ("gamma_lambda", self.gamma_lambda),
            ("gamma_p", self.gamma_p),
            ("a", self.a),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::config(format!(
                    "observer gain `{name}` must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MagLevEstimate<T> {
    pub r: T,
    pub lambda: T,
    pub q: T,
    pub p: T,
    /// Left side of the resistance regression.
    pub y_r: T,
    pub phi_r: T,
}

#[derive(Clone, Debug)]
pub struct MagLevAdaptiveObserver<T> {
    params: MagLevParams<T>,
    gains: MagLevObserverGains<T>,
    law: FluxLaw,
    /// `(R̂, x̂₁, z, v₁, v₂, φ_R)`
    state: [T; 6],
    last_yv: T,
    projection: Projection<T>,
}

fn resistance_regression<T: Real>(a: T, y: T, yv: T, v1: T, v2: T) -> T {
    -v1 + a * y / yv - a * v2
}

impl<T: Real> MagLevAdaptiveObserver<T> {
    /// All filter and KKL states start at zero.
    pub fn new(
        params: MagLevParams<T>,
        gains: MagLevObserverGains<T>,
        law: FluxLaw,
        r_hat0: T,
        projection: Projection<T>,
    ) -> Result<Self> {
        params.validate()?;
        gains.validate()?;
        let z = T::zero();
        Ok(MagLevAdaptiveObserver {
            params,
            gains,
            law,
            state: [r_hat0, z, z, z, z, z],
            last_yv: projection.floor(),
            projection,
        })
    }

    /// Overrides the flux and KKL states, e.g. for a consistent start.
    pub fn set_flux_and_kkl(&mut self, lambda: T, z: T) {
        self.state[1] = lambda;
        self.state[2] = z;
    }

    /// Overrides the resistance filters.
    pub fn set_filters(&mut self, v1: T, v2: T, phi_r: T) {
        self.state[3] = v1;
        self.state[4] = v2;
        self.state[5] = phi_r;
    }

    pub fn projection(&self) -> &Projection<T> {
        &self.projection
    }

    pub fn gains(&self) -> &MagLevObserverGains<T> {
        &self.gains
    }

    /// Estimate at the last step, using `y` for the regression readout.
    pub fn estimate(&self, y: T) -> MagLevEstimate<T> {
        let [r, x1, z, v1, v2, phi] = self.state;
        let yv = self.last_yv;
        MagLevEstimate {
            r,
            lambda: x1,
            q: self.params.position_from_virtual(yv),
            p: z - self.gains.gamma_p * yv,
            y_r: resistance_regression(self.gains.a, y, yv, v1, v2),
            phi_r: phi,
        }
    }

    pub fn step(&mut self, sig: &StepSignals<'_, T>, dt: T) -> Result<MagLevEstimate<T>> {
        sig.check(1, 1, 1)?;
        let par = self.params;
        let g = self.gains;
        let law = self.law;
        let proj = &self.projection;
        let km = par.k * par.m;
        let mg = par.m * par.gravity;
        let two_k = T::lit(2.0) * par.k;
        let field = |tau: T, s: &[T]| -> Result<Vec<T>> {
            let (y, u, yv) = sig.scalar_at(tau / dt);
            let yv = proj.clamp(yv);
            let (r, x1, z, v1, v2, phi) = (s[0], s[1], s[2], s[3], s[4], s[5]);
            let y_r = resistance_regression(g.a, y, yv, v1, v2);
            let innov = y - yv * x1;
            let inj = match law {
                FluxLaw::Gradient => g.gamma_lambda * yv * innov,
                FluxLaw::Verbatim => -g.gamma_lambda * innov,
            };
            Ok(vec![
                g.gamma_r * phi * (y_r - phi * r),
                -r * y + u + inj,
                -(g.gamma_p / km) * z + x1 * x1 / two_k + g.gamma_p * g.gamma_p / km * yv - mg,
                -g.a * v1 + g.a * u,
                -g.a * v2 + g.a * y / yv,
                -g.a * phi - g.a * y,
            ])
        };
        let next = rk4_step(field, T::zero(), &self.state, dt)?;
        self.state.copy_from_slice(&next);
        let yv_end = sig.yv_hat[1][0];
        self.projection.record(yv_end);
        self.last_yv = self.projection.clamp(yv_end);
        Ok(self.estimate(sig.y[1][0]))
    }
}

/// Correction law of the Luenberger momentum observer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LuenbergerForm {
    /// `ż₂ = x̂₁²/(2k) − mG − l₂(x₂ − z₁)`: error polynomial `s² + l₁s + l₂/(km)`.
    #[default]
    Corrected,
    /// `ż₂ = x̂₁²/(2k) − mG + l₂(x₂ − z₂)`: pulls `z₂` towards `x₂`, not towards `p`.
    Verbatim,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LuenbergerGains<T> {
    pub l1: T,
    pub l2: T,
}

impl<T: Real> LuenbergerGains<T> {
    /// Gains placing both error poles at `−ω`.
    pub fn double_pole(omega: T, params: &MagLevParams<T>) -> Self {
        LuenbergerGains {
            l1: T::lit(2.0) * omega,
            l2: omega * omega * params.k * params.m,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MagLevLuenberger<T> {
    params: MagLevParams<T>,
    gains: LuenbergerGains<T>,
    form: LuenbergerForm,
    z: [T; 2],
}

impl<T: Real> MagLevLuenberger<T> {
    pub fn new(
        params: MagLevParams<T>,
        gains: LuenbergerGains<T>,
        form: LuenbergerForm,
        z0: [T; 2],
    ) -> Result<Self> {
        params.validate()?;
        if !(gains.l1 > T::zero() && gains.l2 > T::zero()) {
            return Err(Error::config("Luenberger gains must be positive"));
        }
        Ok(MagLevLuenberger {
            params,
            gains,
            form,
            z: z0,
        })
    }

    pub fn p_hat(&self) -> T {
        self.z[1]
    }

    pub fn state(&self) -> [T; 2] {
        self.z
    }

    /// `x2` and `x1_hat` are `[start, end]` samples of `ŷ_v` and `λ̂`.
    pub fn step(&mut self, x2: [T; 2], x1_hat: [T; 2], dt: T) -> Result<T> {
        let par = self.params;
        let LuenbergerGains { l1, l2 } = self.gains;
        let form = self.form;
        let km = par.k * par.m;
        let mg = par.m * par.gravity;
        let two_k = T::lit(2.0) * par.k;
        let field = |tau: T, z: &[T]| -> Result<Vec<T>> {
            let th = tau / dt;
            let x2 = x2[0] + th * (x2[1] - x2[0]);
            let x1 = x1_hat[0] + th * (x1_hat[1] - x1_hat[0]);
            let force = x1 * x1 / two_k - mg;
            let dz2 = match form {
                LuenbergerForm::Corrected => force - l2 * (x2 - z[0]),
                LuenbergerForm::Verbatim => force + l2 * (x2 - z[1]),
            };
            Ok(vec![-z[1] / km + l1 * (x2 - z[0]), dz2])
        };
        let next = rk4_step(field, T::zero(), &self.z, dt)?;
        self.z = [next[0], next[1]];
        Ok(self.z[1])
    }
}
