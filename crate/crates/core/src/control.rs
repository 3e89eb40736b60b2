//! MagLev controllers and position references.

use crate::ems_models::MagLevParams;
use crate::error::{Error, Result};
use crate::scalar::{signed_sqrt, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IdaPbcGains<T> {
    pub kp: T,
    pub alpha: T,
    pub lambda_star: T,
    pub q_star: T,
    pub p_star: T,
}

impl<T: Real> IdaPbcGains<T> {
    pub fn validate(&self) -> Result<()> {
        if self.kp > T::zero() && self.alpha > T::zero() {
            Ok(())
        } else {
            Err(Error::config("IDA-PBC gains kp and alpha must be positive"))
        }
    }
}

/// Sign of the resistive compensation term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResistanceTerm {
    /// `+R̂i`, the voltage that holds the flux at rest.
    #[default]
    Compensate,
    /// `−R̂i`.
    Verbatim,
}

/// `u_C = ±R̂i − K_p((λ − λ⋆)/α + (q − q⋆)) − (α/m + K_p)(p − p⋆)`.
pub fn ida_pbc<T: Real>(
    g: &IdaPbcGains<T>,
    term: ResistanceTerm,
    mass: T,
    state: [T; 3],
    r_hat: T,
    current: T,
) -> T {
    let [lambda, q, p] = state;
    let ri = match term {
        ResistanceTerm::Compensate => r_hat * current,
        ResistanceTerm::Verbatim => -r_hat * current,
    };
    ri - g.kp * ((lambda - g.lambda_star) / g.alpha + (q - g.q_star))
        - (g.alpha / mass + g.kp) * (p - g.p_star)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BackstepGains<T> {
    pub gamma1: T,
    pub gamma2: T,
    pub ki: T,
}

/// Backstepping law with an integral action on the position error.
#[derive(Clone, Debug)]
pub struct Backstepping<T> {
    gains: BackstepGains<T>,
    u_i: T,
}

impl<T: Real> Backstepping<T> {
    pub fn new(gains: BackstepGains<T>) -> Result<Self> {
        if gains.gamma1 > T::zero() && gains.gamma2 > T::zero() && gains.ki > T::zero() {
            Ok(Backstepping {
                gains,
                u_i: T::zero(),
            })
        } else {
            Err(Error::config("backstepping gains must be positive"))
        }
    }

    pub fn integral(&self) -> T {
        self.u_i
    }

    /// `Υ(q, p) = (2/k)(mG − γ₁(p − p⋆) − γ₂m(q − q⋆))`.
    pub fn upsilon(&self, par: &MagLevParams<T>, q: T, p: T, q_star: T, p_star: T) -> T {
        let g = &self.gains;
        T::lit(2.0) / par.k
            * (par.m * par.gravity - g.gamma1 * (p - p_star) - g.gamma2 * par.m * (q - q_star))
    }

    /// `u₀ = R(c − q)|Υ|^{1/2}sign(Υ) − K_i u_I` at the current integrator value.
    pub fn output(&self, par: &MagLevParams<T>, r: T, q: T, p: T, q_star: T, p_star: T) -> T {
        r * (par.c - q) * signed_sqrt(self.upsilon(par, q, p, q_star, p_star)) - self.gains.ki * self.u_i
    }

    /// Returns `u₀`, then advances `u̇_I = q − q⋆` over the step.
    pub fn step(
        &mut self,
        par: &MagLevParams<T>,
        r: T,
        state: (T, T),
        q_star: T,
        p_star: T,
        dt: T,
    ) -> T {
        let (q, p) = state;
        let u0 = self.output(par, r, q, p, q_star, p_star);
        self.u_i += (q - q_star) * dt;
        u0
    }
}

/// Position reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference<T> {
    Constant(T),
    /// Alternates between `low` (first half period) and `high`, with linear ramps.
    Pulse {
        low: T,
        high: T,
        period: T,
        ramp: T,
    },
    Sine {
        mean: T,
        amplitude: T,
        frequency: T,
    },
}

impl<T: Real> Reference<T> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Reference::Pulse { period, ramp, .. } => {
                if !(period > T::zero()) || !(ramp >= T::zero()) || ramp > period / T::lit(2.0) {
                    return Err(Error::config(
                        "pulse reference needs period > 0 and 0 <= ramp <= period/2",
                    ));
                }
                Ok(())
            }
            Reference::Sine { frequency, .. } if !(frequency >= T::zero()) => {
                Err(Error::config("sine reference frequency must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, t: T) -> T {
        match *self {
            Reference::Constant(v) => v,
            Reference::Pulse {
                low,
                high,
                period,
                ramp,
            } => {
                let half = period / T::lit(2.0);
                let phase = t - (t / period).floor() * period;
                let ramp_frac = |s: T| if ramp > T::zero() { (s / ramp).min(T::one()) } else { T::one() };
                let w = if phase < half {
                    if t >= period && phase < ramp {
                        T::one() - ramp_frac(phase)
                    } else {
                        T::zero()
                    }
                } else {
                    ramp_frac(phase - half)
                };
                low + (high - low) * w
            }
            Reference::Sine {
                mean,
                amplitude,
                frequency,
            } => mean + amplitude * (T::two_pi() * frequency * t).sin(),
        }
    }

    /// Levels the reference settles on, for steady-error checks.
    pub fn levels(&self) -> Vec<T> {
        match *self {
            Reference::Constant(v) => vec![v],
            Reference::Pulse { low, high, .. } => vec![low, high],
            Reference::Sine { .. } => vec![],
        }
    }
}
