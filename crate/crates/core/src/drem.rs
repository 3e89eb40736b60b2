//! Dynamic regressor extension and mixing, the scalar gradient law it
//! enables, and the virtual-output filter built on top of them.
//!
//! The filter runs on the regression `Y(t) = S(t)·θ₂(t−ε) + O(ε²)` where
//! `θ₂ = ε·y_v`. Its state is kept in the rescaled form
//! `ŷ̇_v = (γ/ε)·S·(Y − ε·S·ŷ_v)` so the estimate is read out without dividing
//! by ε.

use crate::error::{Error, Result};
use crate::integrate::rk4_scalar;
use crate::linalg::{adjugate, det, Field, Mat};
use crate::scalar::Real;

/// State of the scalar-regressor gradient filter for `m` output channels.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGradState<T> {
    yv_hat: Vec<T>,
    gamma: T,
    epsilon: T,
    gamma_star: Option<T>,
}

impl<T: Real> ScalarGradState<T> {
    /// Filter with explicit gain `gamma`. When `gamma_star` is given the gain
    /// must satisfy `gamma·epsilon >= gamma_star`.
    pub fn new(yv0: Vec<T>, gamma: T, epsilon: T, gamma_star: Option<T>) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::config(format!("filter gain must be positive, got {gamma}")));
        }
        if !(epsilon > T::zero() && epsilon < T::one()) {
            return Err(Error::config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if let Some(gs) = gamma_star {
            if !(gs > T::zero()) {
                return Err(Error::config(format!("gamma_star must be positive, got {gs}")));
            }
            // equality is the default schedule; allow rounding
            if gamma * epsilon < gs * (T::one() - T::lit(1e-12)) {
                return Err(Error::config(format!(
                    "gain too small: gamma*epsilon = {} < gamma_star = {gs}",
                    gamma * epsilon
                )));
            }
        }
        Ok(ScalarGradState {
            yv_hat: yv0,
            gamma,
            epsilon,
            gamma_star,
        })
    }

    /// Default schedule `γ = γ⋆/ε`.
    pub fn scheduled(yv0: Vec<T>, gamma_star: T, epsilon: T) -> Result<Self> {
        Self::new(yv0, gamma_star / epsilon, epsilon, Some(gamma_star))
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn gamma_star(&self) -> Option<T> {
        self.gamma_star
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Current virtual-output estimate `ŷ_v`.
    pub fn yv_hat(&self) -> &[T] {
        &self.yv_hat
    }

    /// `θ̂₂ = ε·ŷ_v`.
    pub fn theta_hat(&self) -> Vec<T> {
        self.yv_hat.iter().map(|&v| v * self.epsilon).collect()
    }

    /// Advances the filter one step with `S(t)` and `Y(t)` held over the step.
    pub fn step(&mut self, s_now: T, y_now: &[T], dt: T) -> Result<&[T]> {
        if y_now.len() != self.yv_hat.len() {
            return Err(Error::config(format!(
                "filter has {} channels, regression has {}",
                self.yv_hat.len(),
                y_now.len()
            )));
        }
        let g = self.gamma / self.epsilon;
        let eps = self.epsilon;
        for (v, &y) in self.yv_hat.iter_mut().zip(y_now) {
            *v = rk4_scalar(|x| g * s_now * (y - eps * s_now * x), *v, dt);
        }
        Ok(&self.yv_hat)
    }
}

/// Scalar regressions `𝒞 = Δ·θ` produced by mixing.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedRegression<T> {
    pub delta: T,
    pub c_mixed: Vec<T>,
}

/// `Δ = det Φ`, `𝒞 = adj(Φ)·C`. `Δ = 0` is a valid result meaning no excitation.
pub fn extend_mix<T: Field>(c: &[T], phi: &Mat<T>) -> Result<MixedRegression<T>> {
    if !phi.is_square() || phi.rows() != c.len() {
        return Err(Error::config(format!(
            "extended regressor must be {n}x{n} for {n} measurements, got {}x{}",
            phi.rows(),
            phi.cols(),
            n = c.len()
        )));
    }
    Ok(MixedRegression {
        delta: det(phi),
        c_mixed: adjugate(phi).mul_vec(c),
    })
}

/// One step of `θ̂̇ᵢ = γᵢ·Δ·(𝒞ᵢ − Δ·θ̂ᵢ)` with inputs held over the step.
pub fn scalar_gradient_step<T: Real>(theta_i: T, delta: T, c_i: T, gamma_i: T, dt: T) -> T {
    rk4_scalar(|th| gamma_i * delta * (c_i - delta * th), theta_i, dt)
}

/// Element-wise gradient estimator over a mixed regression.
#[derive(Clone, Debug)]
pub struct DremEstimator<T> {
    theta_hat: Vec<T>,
    gains: Vec<T>,
}

impl<T: Real> DremEstimator<T> {
    pub fn new(theta0: Vec<T>, gains: Vec<T>) -> Result<Self> {
        if theta0.len() != gains.len() {
            return Err(Error::config("one gain per parameter required"));
        }
        if gains.iter().any(|g| !(*g > T::zero())) {
            return Err(Error::config("adaptation gains must be positive"));
        }
        Ok(DremEstimator {
            theta_hat: theta0,
            gains,
        })
    }

    pub fn theta_hat(&self) -> &[T] {
        &self.theta_hat
    }

    pub fn step(&mut self, mixed: &MixedRegression<T>, dt: T) -> Result<&[T]> {
        if mixed.c_mixed.len() != self.theta_hat.len() {
            return Err(Error::config("mixed regression dimension mismatch"));
        }
        for ((th, &g), &c) in self.theta_hat.iter_mut().zip(&self.gains).zip(&mixed.c_mixed) {
            *th = scalar_gradient_step(*th, mixed.delta, c, g, dt);
        }
        Ok(&self.theta_hat)
    }
}

/// Least-squares fit of `y ≈ θ₁ + S·θ₂` over a window; returns `(θ̂₁, θ̂₂/ε)`.
///
/// Baseline comparator: averaging over a finite moving horizon of whole
/// injection periods.
pub fn window_demod_baseline<T: Real>(y: &[T], s: &[T], epsilon: T) -> Result<(T, T)> {
    if y.len() != s.len() || y.is_empty() {
        return Err(Error::config(format!(
            "window histories must be non-empty and equally long ({} vs {})",
            y.len(),
            s.len()
        )));
    }
    let n = T::lit(y.len() as f64);
    let s_mean = s.iter().fold(T::zero(), |a, &b| a + b) / n;
    let y_mean = y.iter().fold(T::zero(), |a, &b| a + b) / n;
    let (mut sxx, mut sxy, mut smax) = (T::zero(), T::zero(), T::zero());
    for (&si, &yi) in s.iter().zip(y) {
        let ds = si - s_mean;
        sxx += ds * ds;
        sxy += ds * (yi - y_mean);
        smax = smax.max(si.abs());
    }
    if !(sxx > T::epsilon() * n * smax * smax) || sxx == T::zero() {
        return Err(Error::NoExcitation(
            "probing primitive is constant over the demodulation window".into(),
        ));
    }
    let theta2 = sxy / sxx;
    let theta1 = y_mean - theta2 * s_mean;
    Ok((theta1, theta2 / epsilon))
}

/// Streaming form of [`window_demod_baseline`] over the last `len` samples.
#[derive(Clone, Debug)]
pub struct WindowDemodulator<T> {
    epsilon: T,
    y: Vec<T>,
    s: Vec<T>,
    head: usize,
    filled: bool,
    estimate: Option<(T, T)>,
}

impl<T: Real> WindowDemodulator<T> {
    /// Window of `periods` injection periods at `steps_per_period` samples each.
    pub fn new(epsilon: T, periods: usize, steps_per_period: usize) -> Result<Self> {
        if periods == 0 || steps_per_period == 0 {
            return Err(Error::config("demodulation window must hold at least one period"));
        }
        let len = periods * steps_per_period;
        Ok(WindowDemodulator {
            epsilon,
            y: vec![T::zero(); len],
            s: vec![T::zero(); len],
            head: 0,
            filled: false,
            estimate: None,
        })
    }

    /// Pushes one sample; returns `(ȳ̂, ŷ_v)` once the window is full.
    pub fn step(&mut self, y: T, s: T) -> Result<Option<(T, T)>> {
        self.y[self.head] = y;
        self.s[self.head] = s;
        self.head = (self.head + 1) % self.y.len();
        if self.head == 0 {
            self.filled = true;
        }
        if !self.filled {
            return Ok(None);
        }
        let est = window_demod_baseline(&self.y, &self.s, self.epsilon)?;
        self.estimate = Some(est);
        Ok(Some(est))
    }

    pub fn estimate(&self) -> Option<(T, T)> {
        self.estimate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::ProbingSpec;
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn extend_mix_scalar_case() {
        let m = extend_mix(&[14.0], &Mat::from_rows(&[vec![7.0]])).unwrap();
        assert_eq!(m.delta, 7.0);
        assert_eq!(m.c_mixed, vec![14.0]);
    }

    #[test]
    fn extend_mix_singular_regressor_has_zero_delta() {
        let phi = Mat::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(extend_mix(&[1.0, 1.0], &phi).unwrap().delta, 0.0);
    }

    #[test]
    fn extend_mix_two_by_two_against_hand_adjugate() {
        let phi = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let m = extend_mix(&[5.0, 6.0], &phi).unwrap();
        assert_eq!(m.delta, -2.0);
        assert_eq!(m.c_mixed, vec![4.0 * 5.0 - 2.0 * 6.0, -3.0 * 5.0 + 1.0 * 6.0]);
        // θ solving C = Φθ: θ = (−4, 4.5); 𝒞 = Δθ
        let theta = [-4.0_f64, 4.5];
        for i in 0..2 {
            assert!((m.c_mixed[i] - m.delta * theta[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn extend_mix_is_exact_over_rationals() {
        let r = |a: i64, b: i64| Ratio::new(a, b);
        let phi = Mat::from_rows(&[
            vec![r(1, 2), r(1, 3), r(2, 7)],
            vec![r(-1, 5), r(3, 4), r(1, 1)],
            vec![r(2, 3), r(0, 1), r(-5, 6)],
        ]);
        let theta = [r(3, 11), r(-2, 9), r(7, 5)];
        let c = phi.mul_vec(&theta);
        let m = extend_mix(&c, &phi).unwrap();
        for i in 0..3 {
            assert_eq!(m.c_mixed[i], m.delta * theta[i]);
        }
    }

    #[test]
    fn extend_mix_rejects_shape_mismatch() {
        let phi = Mat::from_rows(&[vec![1.0, 2.0]]);
        assert!(extend_mix(&[1.0], &phi).is_err());
    }

    proptest! {
        #[test]
        fn extend_mix_is_linear_in_measurements(
            a in prop::collection::vec(-5.0f64..5.0, 9),
            c1 in prop::collection::vec(-5.0f64..5.0, 3),
            c2 in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            let phi = Mat::from_fn(3, 3, |i, j| a[3 * i + j]);
            let m1 = extend_mix(&c1, &phi).unwrap();
            let m2 = extend_mix(&c2, &phi).unwrap();
            let sum: Vec<f64> = c1.iter().zip(&c2).map(|(x, y)| x + y).collect();
            let m = extend_mix(&sum, &phi).unwrap();
            prop_assert_eq!(m.delta, m1.delta);
            for i in 0..3 {
                prop_assert!((m.c_mixed[i] - m1.c_mixed[i] - m2.c_mixed[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gradient_step_frozen_without_excitation() {
        assert_eq!(scalar_gradient_step(0.7, 0.0, 3.0, 10.0, 0.01), 0.7);
    }

    #[test]
    fn gradient_step_converges_exponentially() {
        let (theta, gamma, dt) = (2.0_f64, 5.0, 1e-3);
        let mut th = 0.0;
        for k in 1..=1000 {
            th = scalar_gradient_step(th, 1.0, theta, gamma, dt);
            let exact = theta * (1.0 - (-gamma * k as f64 * dt).exp());
            assert!((th - exact).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn gradient_error_is_monotone(
            theta in -10.0f64..10.0,
            th0 in -10.0f64..10.0,
            deltas in prop::collection::vec(-3.0f64..3.0, 200),
        ) {
            let (gamma, dt) = (2.0, 1e-2);
            let mut th = th0;
            let mut err = (th - theta).abs();
            for d in deltas {
                th = scalar_gradient_step(th, d, d * theta, gamma, dt);
                let e = (th - theta).abs();
                prop_assert!(e <= err + 1e-12);
                err = e;
            }
        }
    }

    #[test]
    fn filter_gain_validation() {
        assert!(ScalarGradState::new(vec![0.0], 0.0, 0.01, None).is_err());
        assert!(ScalarGradState::new(vec![0.0], 100.0, 0.01, Some(2.0)).is_err());
        assert!(ScalarGradState::new(vec![0.0], 300.0, 0.01, Some(2.0)).is_ok());
        let s = ScalarGradState::scheduled(vec![0.0], 10.0, 0.01).unwrap();
        assert_eq!(s.gamma(), 1000.0);
    }

    #[test]
    fn filter_decays_with_zero_regression() {
        let eps = 0.01;
        let dt = eps / 100.0;
        let p = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        let mut f = ScalarGradState::scheduled(vec![0.05 / eps], 10.0, eps).unwrap();
        let mut prev = f.theta_hat()[0];
        for k in 0..5000 {
            let t = k as f64 * dt;
            f.step(p.primitive(t), &[0.0], dt).unwrap();
            let th = f.theta_hat()[0];
            assert!(th.abs() <= prev.abs() + 1e-15);
            prev = th;
        }
        // mean decay rate γ/(8π²) over 0.5 s
        assert!(prev.abs() < 0.05 * (-5.0_f64).exp());
    }

    #[test]
    fn filter_recovers_constant_virtual_output() {
        // synthetic y = εS·3; reference solution from a 20x finer grid
        let eps = 0.01;
        let p = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        let run = |sub: usize| {
            let dt = eps / (100.0 * sub as f64);
            let mut f = ScalarGradState::scheduled(vec![0.0], 10.0, eps).unwrap();
            let mut r = crate::ltv_ops::VirtualRegressor::new(eps, dt, 1).unwrap();
            let mut out = Vec::new();
            for k in 0..(100 * sub * 200) {
                let t = k as f64 * dt;
                let yv = r.step(&[eps * p.primitive(t) * 3.0]).unwrap();
                if r.is_warm() {
                    f.step(p.primitive(t), &yv, dt).unwrap();
                }
                if k % sub == 0 {
                    out.push(f.yv_hat()[0]);
                }
            }
            out
        };
        let coarse = run(1);
        let fine = run(20);
        let n = coarse.len();
        for k in (n / 2)..n {
            assert!((coarse[k] - 3.0).abs() < 0.01);
            assert!((coarse[k] - fine[k]).abs() < 1e-3);
        }
    }

    #[test]
    fn window_demod_exact_on_noise_free_signal() {
        let eps = 0.01;
        let steps = 100;
        let p = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        let dt = eps / steps as f64;
        let s: Vec<f64> = (0..10 * steps).map(|k| p.primitive(k as f64 * dt)).collect();
        let y: Vec<f64> = s.iter().map(|&si| 1.0 + eps * si * 2.0).collect();
        let (m, yv) = window_demod_baseline(&y, &s, eps).unwrap();
        assert!((m - 1.0).abs() < 1e-8 && (yv - 2.0).abs() < 1e-8);

        let yc = vec![0.4; s.len()];
        let (_, yv) = window_demod_baseline(&yc, &s, eps).unwrap();
        assert!(yv.abs() < 1e-12);

        let flat = vec![0.2; s.len()];
        assert!(matches!(
            window_demod_baseline(&y, &flat, eps),
            Err(Error::NoExcitation(_))
        ));
    }

    #[test]
    fn window_demod_variance_shrinks_with_window() {
        let eps = 0.01;
        let steps = 20;
        let dt = eps / steps as f64;
        let p = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1e-3).unwrap();
        let mut var_for = |n: usize| {
            let trials = 400;
            let mut est = Vec::with_capacity(trials);
            for _ in 0..trials {
                let offset = rng.gen_range(0..steps);
                let s: Vec<f64> = (0..n * steps)
                    .map(|k| p.primitive((k + offset) as f64 * dt))
                    .collect();
                let y: Vec<f64> = s
                    .iter()
                    .map(|&si| 1.0 + eps * si * 2.0 + noise.sample(&mut rng))
                    .collect();
                est.push(window_demod_baseline(&y, &s, eps).unwrap().1);
            }
            let m = est.iter().sum::<f64>() / trials as f64;
            est.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (trials - 1) as f64
        };
        let ratio = var_for(10) / var_for(40);
        assert!((2.0..=6.0).contains(&ratio), "variance ratio {ratio}");
    }

    #[test]
    fn streaming_demodulator_matches_batch() {
        let eps = 0.01;
        let steps = 50;
        let dt = eps / steps as f64;
        let p = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        let mut w = WindowDemodulator::new(eps, 3, steps).unwrap();
        let mut ys = Vec::new();
        let mut ss = Vec::new();
        for k in 0..400 {
            let t = k as f64 * dt;
            let s = p.primitive(t);
            let y = 0.5 + 0.1 * t + eps * s * (1.0 + t);
            ys.push(y);
            ss.push(s);
            let out = w.step(y, s).unwrap();
            if k + 1 < 150 {
                assert!(out.is_none());
            } else {
                let batch =
                    window_demod_baseline(&ys[k + 1 - 150..], &ss[k + 1 - 150..], eps).unwrap();
                let got = out.unwrap();
                assert!((got.0 - batch.0).abs() < 1e-12 && (got.1 - batch.1).abs() < 1e-9);
            }
        }
    }
}
