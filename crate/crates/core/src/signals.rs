//! Probing signals: the 1-periodic zero-mean waveform `s`, its zero-mean
//! primitive `S`, and the injected input `u = u_C + s(t/ε)·b`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Shape of the injected waveform over one unit period.
#[derive(Clone, Debug, PartialEq)]
pub enum Waveform<T> {
    /// `sin(2πτ)`.
    Sinusoid,
    /// `+1` on `[0, ½)`, `-1` on `[½, 1)`.
    Square,
    Tabulated(TabulatedWave<T>),
}

/// Piecewise-linear periodic waveform through uniformly spaced samples.
///
/// Samples are mean-corrected on construction. The primitive is exact for the
/// piecewise-linear interpolant, which makes it the cumulative trapezoid sum at
/// the nodes and a quadratic in between.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedWave<T> {
    samples: Vec<T>,
    // ∫₀^{τ_k} s, k = 0..=N
    cumulative: Vec<T>,
    // ∫₀¹∫₀^σ s
    double_integral: T,
}

impl<T: Real> TabulatedWave<T> {
    pub const MIN_SAMPLES: usize = 4;

    pub fn new(samples: &[T]) -> Result<Self> {
        if samples.len() < Self::MIN_SAMPLES {
            return Err(Error::config(format!(
                "tabulated waveform needs at least {} samples per period, got {}",
                Self::MIN_SAMPLES,
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("tabulated waveform contains non-finite samples"));
        }
        let n = T::lit(samples.len() as f64);
        let mean = samples.iter().fold(T::zero(), |a, &b| a + b) / n;
        let samples: Vec<T> = samples.iter().map(|&v| v - mean).collect();

        let h = T::one() / n;
        let half = T::lit(0.5);
        let sixth = T::one() / T::lit(6.0);
        let len = samples.len();
        let mut cumulative = Vec::with_capacity(len + 1);
        let mut double_integral = T::zero();
        let mut acc = T::zero();
        cumulative.push(acc);
        for k in 0..len {
            let (a, b) = (samples[k], samples[(k + 1) % len]);
            // ∫ over the cell of the quadratic primitive
            double_integral += h * acc + h * h * a * half + h * h * (b - a) * sixth;
            acc += h * half * (a + b);
            cumulative.push(acc);
        }
        Ok(TabulatedWave {
            samples,
            cumulative,
            double_integral,
        })
    }

    /// Parses one sample per line; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Parse {
                line: i + 1,
                message: format!("invalid waveform sample `{line}`"),
            })?;
            samples.push(T::lit(v));
        }
        Self::new(&samples)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_text(&text)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    fn locate(&self, tau: T) -> (usize, T, T) {
        let n = self.samples.len();
        let h = T::one() / T::lit(n as f64);
        let pos = wrap(tau) * T::lit(n as f64);
        let k = pos.floor().to_usize().unwrap_or(0).min(n - 1);
        let frac = pos - T::lit(k as f64);
        (k, frac * h, h)
    }

    fn value(&self, tau: T) -> T {
        let (k, dh, h) = self.locate(tau);
        let a = self.samples[k];
        let b = self.samples[(k + 1) % self.samples.len()];
        a + (b - a) * dh / h
    }

    fn integral(&self, tau: T) -> T {
        let (k, dh, h) = self.locate(tau);
        let a = self.samples[k];
        let b = self.samples[(k + 1) % self.samples.len()];
        self.cumulative[k] + dh * a + dh * dh * (b - a) / (T::lit(2.0) * h)
    }
}

/// Maps any phase into `[0, 1)`.
#[inline]
fn wrap<T: Real>(tau: T) -> T {
    let w = tau - tau.floor();
    if w >= T::one() {
        T::zero()
    } else {
        w
    }
}

impl<T: Real> Waveform<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Waveform::Sinusoid => "sinusoid",
            Waveform::Square => "square",
            Waveform::Tabulated(_) => "tabulated",
        }
    }

    /// `s(τ mod 1)`.
    pub fn s(&self, tau: T) -> T {
        let tau = wrap(tau);
        match self {
            Waveform::Sinusoid => (T::two_pi() * tau).sin(),
            Waveform::Square => {
                if tau < T::lit(0.5) {
                    T::one()
                } else {
                    -T::one()
                }
            }
            Waveform::Tabulated(w) => w.value(tau),
        }
    }

    /// `∫₀^τ s`, without the mean correction. Periodic because `s` has zero mean.
    pub fn integral(&self, tau: T) -> T {
        let tau = wrap(tau);
        match self {
            Waveform::Sinusoid => (T::one() - (T::two_pi() * tau).cos()) / T::two_pi(),
            Waveform::Square => {
                if tau < T::lit(0.5) {
                    tau
                } else {
                    T::one() - tau
                }
            }
            Waveform::Tabulated(w) => w.integral(tau),
        }
    }

    /// `∫₀¹∫₀^σ s(τ) dτ dσ`.
    pub fn double_integral(&self) -> T {
        match self {
            Waveform::Sinusoid => T::one() / T::two_pi(),
            Waveform::Square => T::lit(0.25),
            Waveform::Tabulated(w) => w.double_integral,
        }
    }

    /// Zero-mean primitive `S₀(τ) = ∫₀^τ s − ∫₀¹∫₀^σ s`.
    pub fn s0(&self, tau: T) -> T {
        match self {
            Waveform::Sinusoid => -(T::two_pi() * wrap(tau)).cos() / T::two_pi(),
            _ => self.integral(tau) - self.double_integral(),
        }
    }
}

/// Periodic injection waveform, period scale ε and input scaling vector `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbingSpec<T> {
    waveform: Waveform<T>,
    epsilon: T,
    scaling: Vec<T>,
}

impl<T: Real> ProbingSpec<T> {
    pub fn new(waveform: Waveform<T>, epsilon: T, scaling: Vec<T>) -> Result<Self> {
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::config(format!(
                "probe epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        if scaling.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("probe scaling vector must be finite"));
        }
        Ok(ProbingSpec {
            waveform,
            epsilon,
            scaling,
        })
    }

    pub fn sinusoid(epsilon: T, scaling: Vec<T>) -> Result<Self> {
        Self::new(Waveform::Sinusoid, epsilon, scaling)
    }

    pub fn waveform(&self) -> &Waveform<T> {
        &self.waveform
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn scaling(&self) -> &[T] {
        &self.scaling
    }

    /// Waveform value at dimensionless phase `tau`.
    pub fn s(&self, tau: T) -> T {
        self.waveform.s(tau)
    }

    /// `s(t/ε)` at physical time `t`.
    pub fn s_at(&self, t: T) -> T {
        self.waveform.s(t / self.epsilon)
    }

    /// `S(t) = S₀(t/ε)`; ε-periodic with zero mean.
    pub fn primitive(&self, t: T) -> T {
        self.waveform.s0(t / self.epsilon)
    }

    /// `∫₀^{t/ε} s` without the double-integral correction, for ablations.
    pub fn primitive_uncorrected(&self, t: T) -> T {
        self.waveform.integral(t / self.epsilon)
    }

    /// The injected part `s(t/ε)·b`.
    pub fn injection(&self, t: T) -> Vec<T> {
        let s = self.s_at(t);
        self.scaling.iter().map(|&b| s * b).collect()
    }

    /// `u = u_C + s(t/ε)·b`.
    pub fn inject(&self, u_c: &[T], t: T) -> Result<Vec<T>> {
        if u_c.len() != self.scaling.len() {
            return Err(Error::config(format!(
                "nominal input has length {}, probe scaling has length {}",
                u_c.len(),
                self.scaling.len()
            )));
        }
        let s = self.s_at(t);
        Ok(u_c
            .iter()
            .zip(&self.scaling)
            .map(|(&u, &b)| u + s * b)
            .collect())
    }
}
