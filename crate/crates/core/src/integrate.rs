//! Classical fixed-step fourth-order Runge-Kutta.
//!
//! Every ODE in the toolkit (plant, lags, estimators, observers) advances
//! through these two functions so the whole closed loop lives on one grid.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One RK4 step of `ẋ = field(t, x)`.
///
/// Inputs the field closes over are held for the whole step; the field may
/// still depend on `t` for signals known analytically. A non-finite stage
/// derivative aborts with a snapshot of the state at the start of the step.
pub fn rk4_step<T, F>(mut field: F, t: T, x: &[T], dt: T) -> Result<Vec<T>>
where
    T: Real,
    F: FnMut(T, &[T]) -> Result<Vec<T>>,
{
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);

    let check = |k: &[T]| -> Result<()> {
        if k.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite {
                channel: "derivative".into(),
                time: t.as_f64(),
                snapshot: x.iter().map(|v| v.as_f64()).collect(),
            })
        }
    };

    let k1 = field(t, x)?;
    check(&k1)?;
    let x2: Vec<T> = x.iter().zip(&k1).map(|(&xi, &k)| xi + half * dt * k).collect();
    let k2 = field(t + half * dt, &x2)?;
    check(&k2)?;
    let x3: Vec<T> = x.iter().zip(&k2).map(|(&xi, &k)| xi + half * dt * k).collect();
    let k3 = field(t + half * dt, &x3)?;
    check(&k3)?;
    let x4: Vec<T> = x.iter().zip(&k3).map(|(&xi, &k)| xi + dt * k).collect();
    let k4 = field(t + dt, &x4)?;
    check(&k4)?;

    Ok((0..x.len())
        .map(|i| x[i] + dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect())
}

/// RK4 for a scalar autonomous field with held inputs.
#[inline]
pub fn rk4_scalar<T: Real>(f: impl Fn(T) -> T, x: T, dt: T) -> T {
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let k1 = f(x);
    let k2 = f(x + half * dt * k1);
    let k3 = f(x + half * dt * k2);
    let k4 = f(x + dt * k3);
    x + dt / T::lit(6.0) * (k1 + two * k2 + two * k3 + k4)
}
