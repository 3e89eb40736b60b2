//! Sampled realizations of the delay `𝒟_d`, the weighted zero-order hold
//! `𝒵_w` (sliding-window mean), first-order lags `a/(s+a)`, the scalar
//! regression signal `Y = 𝒟_d[y] − 𝒵_{2d}[y]`, and the frequency response of
//! the resulting operator `G_d`.
//!
//! Delays and windows are exact integer numbers of grid steps. Until a buffer
//! has filled, history is taken as zero and the operator reports that it is
//! still warming up.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::integrate::rk4_scalar;
use crate::scalar::Real;

/// Relative tolerance when snapping a duration onto the step grid.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Number of grid steps in `duration`; errors unless it is an integer multiple of `dt`.
pub fn snap_steps<T: Real>(duration: T, dt: T, what: &str) -> Result<usize> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::config(format!("step size must be positive, got {dt}")));
    }
    if !(duration > T::zero()) || !duration.is_finite() {
        return Err(Error::config(format!("{what} must be positive, got {duration}")));
    }
    let ratio = duration / dt;
    let n = ratio.round();
    let snap = ((n * dt - duration) / duration).abs();
    if snap.as_f64() > SNAP_TOLERANCE || n < T::one() {
        return Err(Error::config(format!(
            "{what} = {duration} is not an integer multiple of dt = {dt} (ratio {ratio})"
        )));
    }
    Ok(n.to_usize().unwrap_or(0))
}

/// A single-input single-output operator advanced once per grid step.
pub trait SampledOperator<T> {
    fn step(&mut self, v: T) -> T;
    /// False while the output still depends on zero-padded history.
    fn is_warm(&self) -> bool;
    fn dt(&self) -> T;
}

/// `𝒟_d[v](t) = v(t − d)`.
#[derive(Clone, Debug)]
pub struct Delay<T> {
    dt: T,
    buf: Vec<T>,
    head: usize,
    seen: usize,
}

impl<T: Real> Delay<T> {
    pub fn new(d: T, dt: T) -> Result<Self> {
        let n = snap_steps(d, dt, "delay d")?;
        Ok(Delay {
            dt,
            buf: vec![T::zero(); n],
            head: 0,
            seen: 0,
        })
    }

    pub fn steps(&self) -> usize {
        self.buf.len()
    }

    pub fn delay(&self) -> T {
        self.dt * T::lit(self.buf.len() as f64)
    }
}

impl<T: Real> SampledOperator<T> for Delay<T> {
    fn step(&mut self, v: T) -> T {
        let out = self.buf[self.head];
        self.buf[self.head] = v;
        self.head = (self.head + 1) % self.buf.len();
        self.seen += 1;
        out
    }

    fn is_warm(&self) -> bool {
        self.seen > self.buf.len()
    }

    fn dt(&self) -> T {
        self.dt
    }
}

/// `𝒵_w[v](t) = (χ(t) − χ(t−w))/w` with `χ̇ = v` accumulated by the trapezoid rule.
#[derive(Clone, Debug)]
pub struct WindowMean<T> {
    dt: T,
    width: T,
    chi: T,
    prev: Option<T>,
    // χ at the last n grid points
    history: Vec<T>,
    head: usize,
    seen: usize,
}

impl<T: Real> WindowMean<T> {
    pub fn new(w: T, dt: T) -> Result<Self> {
        let n = snap_steps(w, dt, "window w")?;
        Ok(WindowMean {
            dt,
            width: dt * T::lit(n as f64),
            chi: T::zero(),
            prev: None,
            history: vec![T::zero(); n],
            head: 0,
            seen: 0,
        })
    }

    pub fn width(&self) -> T {
        self.width
    }

    pub fn steps(&self) -> usize {
        self.history.len()
    }
}

impl<T: Real> SampledOperator<T> for WindowMean<T> {
    fn step(&mut self, v: T) -> T {
        if let Some(p) = self.prev {
            self.chi += self.dt * (p + v) * T::lit(0.5);
        }
        self.prev = Some(v);
        let old = self.history[self.head];
        self.history[self.head] = self.chi;
        self.head = (self.head + 1) % self.history.len();
        self.seen += 1;
        (self.chi - old) / self.width
    }

    fn is_warm(&self) -> bool {
        self.seen > self.history.len()
    }

    fn dt(&self) -> T {
        self.dt
    }
}

/// First-order lag `ẋ = −a x + a v`, unit DC gain.
#[derive(Clone, Debug)]
pub struct Lowpass<T> {
    a: T,
    dt: T,
    x: T,
}

impl<T: Real> Lowpass<T> {
    pub fn new(a: T, dt: T, x0: T) -> Result<Self> {
        if !(a > T::zero()) || !a.is_finite() {
            return Err(Error::config(format!("lowpass pole a must be positive, got {a}")));
        }
        if !(dt > T::zero()) {
            return Err(Error::config(format!("step size must be positive, got {dt}")));
        }
        Ok(Lowpass { a, dt, x: x0 })
    }

    pub fn value(&self) -> T {
        self.x
    }

    pub fn pole(&self) -> T {
        self.a
    }
}

impl<T: Real> SampledOperator<T> for Lowpass<T> {
    fn step(&mut self, v: T) -> T {
        let a = self.a;
        self.x = rk4_scalar(|x| -a * x + a * v, self.x, self.dt);
        self.x
    }

    fn is_warm(&self) -> bool {
        true
    }

    fn dt(&self) -> T {
        self.dt
    }
}

/// One channel of `Y = 𝒟_d[y] − 𝒵_{2d}[y]` from a paired delay and window.
pub fn build_y<T: Real>(y: T, delay: &mut Delay<T>, window: &mut WindowMean<T>) -> Result<T> {
    if delay.dt() != window.dt() {
        return Err(Error::config(format!(
            "paired operators disagree on dt: delay {} vs window {}",
            delay.dt(),
            window.dt()
        )));
    }
    if window.steps() != 2 * delay.steps() {
        return Err(Error::config(format!(
            "window must span twice the delay: {} vs 2 x {} steps",
            window.steps(),
            delay.steps()
        )));
    }
    Ok(delay.step(y) - window.step(y))
}

/// Componentwise regression signal `Y(t)` for an `m`-dimensional output.
#[derive(Clone, Debug)]
pub struct VirtualRegressor<T> {
    channels: Vec<(Delay<T>, WindowMean<T>)>,
}

impl<T: Real> VirtualRegressor<T> {
    pub fn new(d: T, dt: T, outputs: usize) -> Result<Self> {
        let delay = Delay::new(d, dt)?;
        let window = WindowMean::new(T::lit(2.0) * delay.delay(), dt)?;
        Ok(VirtualRegressor {
            channels: vec![(delay, window); outputs],
        })
    }

    pub fn step(&mut self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.channels.len() {
            return Err(Error::config(format!(
                "regressor built for {} outputs, got {}",
                self.channels.len(),
                y.len()
            )));
        }
        self.channels
            .iter_mut()
            .zip(y)
            .map(|((delay, window), &v)| build_y(v, delay, window))
            .collect()
    }

    pub fn is_warm(&self) -> bool {
        self.channels.iter().all(|(dl, w)| dl.is_warm() && w.is_warm())
    }
}

/// `G_d(jω) = e^{−jωd} + (e^{−2jωd} − 1)/(2jωd)`, with the removable singularity at 0.
pub fn gd_freq_response<T: Real>(d: T, omega: T) -> Complex<T> {
    let x = omega * d;
    if x.abs() < T::lit(1e-2) {
        // Σ_j (−1)^j (j+1−2^j)/(j+1)! z^j, z = jx; the j = 0, 1 terms vanish
        let z = Complex::new(T::zero(), x);
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut zj = z * z;
        let mut fact = T::lit(6.0); // (j+1)! at j = 2
        for j in 2..12_i32 {
            let coeff = T::lit(((j + 1) as f64) - 2f64.powi(j)) / fact;
            let term = zj * coeff;
            acc = if j % 2 == 0 { acc + term } else { acc - term };
            zj *= z;
            fact *= T::lit((j + 2) as f64);
        }
        return acc;
    }
    let s = Complex::new(T::zero(), omega);
    let two_ds = s * (T::lit(2.0) * d);
    (-s * d).exp() + ((-two_ds).exp() - T::one()) / two_ds
}
