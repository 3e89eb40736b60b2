//! Distance between an injected trajectory and its averaged counterpart.

use crate::ems_models::QuadraticEmsModel;
use crate::error::Result;
use crate::integrate::rk4_step;
use crate::scalar::Real;
use crate::signals::ProbingSpec;

/// Initial condition of the averaged system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AveragedStart {
    /// `x̄(0) = x(0) − εS(0)g𝔟`.
    #[default]
    Corrected,
    /// `x̄(0) = x(0)`.
    Uncorrected,
}

/// Integrates the plant under `u_c + s(t/ε)𝔟` and under `u_c` alone on the
/// same grid and returns `sup_t ‖x − x̄ − εS(t/ε)g𝔟‖∞`.
pub fn averaging_residual<T: Real>(
    model: &QuadraticEmsModel<T>,
    probe: &ProbingSpec<T>,
    u_c: &[T],
    x0: &[T],
    horizon: T,
    steps_per_period: usize,
    start: AveragedStart,
) -> Result<T> {
    let eps = probe.epsilon();
    let dt = eps / T::lit(steps_per_period as f64);
    let steps = (horizon / dt + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let ripple = |t: T| -> Vec<T> {
        let s = eps * probe.primitive(t);
        model.input_map(probe.scaling()).into_iter().map(|v| v * s).collect()
    };
    let mut x = x0.to_vec();
    let mut x_bar: Vec<T> = match start {
        AveragedStart::Corrected => x0.iter().zip(ripple(T::zero())).map(|(a, r)| *a - r).collect(),
        AveragedStart::Uncorrected => x0.to_vec(),
    };
    let mut worst = T::zero();
    for k in 0..=steps {
        let t = T::lit(k as f64) * dt;
        for ((a, b), r) in x.iter().zip(&x_bar).zip(ripple(t)) {
            worst = worst.max((*a - *b - r).abs());
        }
        if k == steps {
            break;
        }
        x = rk4_step(|tau, s: &[T]| model.dynamics(s, &probe.inject(u_c, tau)?), t, &x, dt)?;
        x_bar = rk4_step(|_, s: &[T]| model.averaged_dynamics(s, u_c), t, &x_bar, dt)?;
    }
    Ok(worst)
}
