//! Steady-state error, jitter and excitation diagnostics over a trajectory.

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Estimate/truth channel pairs and the label used for their metrics.
pub const ERROR_PAIRS: [(&str, &str, &str); 9] = [
    ("yv_hat", "yv", "yv"),
    ("yv_hat_baseline", "yv", "yv_baseline"),
    ("lambda_hat", "lambda", "lambda"),
    ("charge_hat", "charge", "charge"),
    ("r_hat", "r", "r"),
    ("q_hat", "q", "q"),
    ("p_hat", "p", "p"),
    ("p_hat_l", "p", "p_luenberger"),
    ("q", "q_star", "tracking"),
];

/// Ordered name/value record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metrics {
    pub entries: Vec<(String, f64)>,
}

impl Metrics {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    fn push(&mut self, name: String, v: f64) {
        self.entries.push((name, v));
    }
}

impl std::fmt::Display for Metrics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (n, v) in &self.entries {
            writeln!(f, "{n} = {v:.6e}")?;
        }
        Ok(())
    }
}

/// `(sup, rms, mean)` of `a − b`.
pub fn error_stats(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let n = a.len().min(b.len());
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let (mut sup, mut sq, mut sum) = (0.0f64, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let e = x - y;
        sup = sup.max(e.abs());
        sq += e * e;
        sum += e;
    }
    (sup, (sq / n as f64).sqrt(), sum / n as f64)
}

/// RMS of `x` minus its centred moving average over `half` samples each side.
pub fn jitter(x: &[f64], half: usize) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().copied().unwrap_or(0.0) + v);
    }
    let mut sq = 0.0;
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half + 1).min(n);
        let mean = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        sq += (x[i] - mean).powi(2);
    }
    (sq / n as f64).sqrt()
}

/// Minimum over sliding windows of `∫ φ² dt` (trapezoid), i.e. the smallest
/// Gram eigenvalue of a scalar regressor.
pub fn windowed_gram_min(phi: &[f64], dt: f64, window: f64) -> Result<f64> {
    let w = (window / dt).round() as usize;
    if w == 0 || phi.len() < w + 1 {
        return Err(Error::EmptyWindow(format!(
            "excitation window of {w} steps needs {} samples, have {}",
            w + 1,
            phi.len()
        )));
    }
    let mut cum = Vec::with_capacity(phi.len());
    cum.push(0.0);
    for k in 1..phi.len() {
        let seg = 0.5 * dt * (phi[k - 1] * phi[k - 1] + phi[k] * phi[k]);
        cum.push(cum[k - 1] + seg);
    }
    Ok((w..phi.len())
        .map(|k| cum[k] - cum[k - w])
        .fold(f64::INFINITY, f64::min))
}

/// Metrics over `t ≥ t_settle`. `epsilon` sets the excitation window and the
/// jitter window (ten injection periods).
pub fn compute_metrics(traj: &Trajectory, t_settle: f64, epsilon: f64) -> Result<Metrics> {
    let t = traj.time();
    let start = t.iter().position(|&v| v >= t_settle - 1e-12);
    let start = match start {
        Some(s) if s < t.len() => s,
        _ => {
            return Err(Error::EmptyWindow(format!(
                "no samples at or after t_settle = {t_settle}"
            )))
        }
    };
    let half = ((5.0 * epsilon / traj.dt()).round() as usize).max(1);
    let mut m = Metrics::default();
    for (est, truth, label) in ERROR_PAIRS {
        let (Some(a), Some(b)) = (traj.channel(est), traj.channel(truth)) else {
            continue;
        };
        let (sup, rms, mean) = error_stats(&a[start..], &b[start..]);
        m.push(format!("{label}_sup"), sup);
        m.push(format!("{label}_rms"), rms);
        m.push(format!("{label}_bias"), mean);
        if est.ends_with("_hat") || est.ends_with("_baseline") {
            m.push(format!("{label}_jitter"), jitter(&a[start..], half));
        }
    }
    for ch in ["S", "phi_r"] {
        if let Some(phi) = traj.channel(ch) {
            m.push(format!("pe_{ch}"), windowed_gram_min(&phi[start..], traj.dt(), epsilon)?);
        }
    }
    Ok(m)
}
