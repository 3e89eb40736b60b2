//! Port-Hamiltonian electromechanical systems with quadratic electrical energy.
//!
//! State layout is `x = (Q, λ, q, p)`: charges, flux linkages, mechanical
//! positions, momenta. With `H = ½QᵀC⁻¹(q)Q + ½λᵀL⁻¹(q)λ + ½pᵀM⁻¹p + V(q)` the
//! equations of motion are
//!
//! ```text
//! Q̇ = −R_C⁻¹∇_Q H + R_C⁻¹ i_C
//! λ̇ = −R_L ∇_λ H + v_L
//! q̇ = ∇_p H
//! ṗ = −∇_q H − R_M ∇_p H
//! ```

mod maglev;
mod optical_switch;

use std::fmt::Debug;
use std::ops::Range;
use std::sync::Arc;

pub use maglev::{MagLevMaps, MagLevParams};
pub use optical_switch::{OpticalSwitchMaps, OpticalSwitchParams};

use crate::error::{Error, Result};
use crate::linalg::{inverse, is_symmetric, symmetric_eigenvalues, Mat};
use crate::scalar::Real;

/// Position-dependent constitutive relations of one device.
pub trait ConstitutiveMaps<T>: Debug + Send + Sync {
    /// `C(q)`, `n_C × n_C`.
    fn capacitance(&self, q: &[T]) -> Mat<T>;
    /// `∂C/∂q_j`.
    fn capacitance_grad(&self, q: &[T], j: usize) -> Mat<T>;
    /// `L(q)`, `n_L × n_L`.
    fn inductance(&self, q: &[T]) -> Mat<T>;
    /// `∂L/∂q_j`.
    fn inductance_grad(&self, q: &[T], j: usize) -> Mat<T>;
    /// Mechanical potential energy `V(q)`.
    fn potential(&self, q: &[T]) -> T;
    fn potential_grad(&self, q: &[T]) -> Vec<T>;
    /// Errors when `q` is within `margin` of a singularity of `C(q)` or `L(q)`.
    fn check_admissible(&self, q: &[T], margin: T) -> Result<()>;
}

/// Which capacitive output is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CapacitiveOutput {
    /// `R_C⁻¹ v_C`, the natural output `gᵀ∇H`.
    Current,
    /// `v_C` itself.
    Voltage,
}

#[derive(Clone, Debug)]
pub struct QuadraticEmsModel<T> {
    n_c: usize,
    n_l: usize,
    n_m: usize,
    r_c: Mat<T>,
    r_c_inv: Mat<T>,
    r_l: Mat<T>,
    r_m: Mat<T>,
    inertia_inv: Mat<T>,
    b_ce: Vec<T>,
    b_le: Vec<T>,
    output: CapacitiveOutput,
    guard_margin: T,
    maps: Arc<dyn ConstitutiveMaps<T>>,
}

/// Structural data for [`QuadraticEmsModel::new`].
#[derive(Clone, Debug)]
pub struct EmsStructure<T> {
    pub r_c: Mat<T>,
    pub r_l: Mat<T>,
    pub r_m: Mat<T>,
    pub inertia: Mat<T>,
    pub b_ce: Vec<T>,
    pub b_le: Vec<T>,
    pub output: CapacitiveOutput,
    pub guard_margin: T,
}

/// Default distance kept from singular configurations, in natural units.
pub const DEFAULT_GUARD_MARGIN: f64 = 1e-6;

fn check_definite<T: Real>(m: &Mat<T>, name: &str, semi: bool) -> Result<()> {
    if !m.is_square() {
        return Err(Error::config(format!("{name} must be square")));
    }
    let scale = (0..m.rows()).fold(T::zero(), |a, i| a.max(m[(i, i)].abs()));
    let tol = T::lit(1e-12) * scale.max(T::min_positive_value());
    if !is_symmetric(m, tol) {
        return Err(Error::config(format!("{name} must be symmetric")));
    }
    let ev = symmetric_eigenvalues(m);
    let ok = ev
        .iter()
        .all(|&l| if semi { l >= -tol } else { l > T::zero() });
    if !ok {
        let kind = if semi { "semidefinite" } else { "definite" };
        return Err(Error::config(format!(
            "{name} must be positive {kind}; eigenvalues {ev:?}"
        )));
    }
    Ok(())
}

impl<T: Real> QuadraticEmsModel<T> {
    pub fn new(s: EmsStructure<T>, maps: Arc<dyn ConstitutiveMaps<T>>) -> Result<Self> {
        let n_c = s.r_c.rows();
        let n_l = s.r_l.rows();
        let n_m = s.inertia.rows();
        if n_c > 0 {
            check_definite(&s.r_c, "R_C", false)?;
        }
        if n_l > 0 {
            check_definite(&s.r_l, "R_L", false)?;
        }
        if n_m > 0 {
            check_definite(&s.r_m, "R_M", true)?;
            check_definite(&s.inertia, "inertia", false)?;
        }
        if s.r_m.rows() != n_m || s.b_ce.len() != n_c || s.b_le.len() != n_l {
            return Err(Error::config("port dimensions disagree"));
        }
        if !(s.guard_margin >= T::zero()) {
            return Err(Error::config("guard margin must be non-negative"));
        }
        let r_c_inv = inverse(&s.r_c).ok_or_else(|| Error::config("R_C is singular"))?;
        let inertia_inv =
            inverse(&s.inertia).ok_or_else(|| Error::config("inertia is singular"))?;
        Ok(QuadraticEmsModel {
            n_c,
            n_l,
            n_m,
            r_c: s.r_c,
            r_c_inv,
            r_l: s.r_l,
            r_m: s.r_m,
            inertia_inv,
            b_ce: s.b_ce,
            b_le: s.b_le,
            output: s.output,
            guard_margin: s.guard_margin,
            maps,
        })
    }

    pub fn ports(&self) -> (usize, usize, usize) {
        (self.n_c, self.n_l, self.n_m)
    }

    pub fn state_len(&self) -> usize {
        self.n_c + self.n_l + 2 * self.n_m
    }

    pub fn input_len(&self) -> usize {
        self.n_c + self.n_l
    }

    pub fn output_convention(&self) -> CapacitiveOutput {
        self.output
    }

    pub fn scaling(&self) -> Vec<T> {
        self.b_ce.iter().chain(&self.b_le).copied().collect()
    }

    pub fn charge_range(&self) -> Range<usize> {
        0..self.n_c
    }

    pub fn flux_range(&self) -> Range<usize> {
        self.n_c..self.n_c + self.n_l
    }

    pub fn position_range(&self) -> Range<usize> {
        let s = self.n_c + self.n_l;
        s..s + self.n_m
    }

    pub fn momentum_range(&self) -> Range<usize> {
        let s = self.n_c + self.n_l + self.n_m;
        s..s + self.n_m
    }

    /// Electrical coordinates `x_E = (Q, λ)`.
    pub fn electrical<'a>(&self, x: &'a [T]) -> &'a [T] {
        &x[..self.n_c + self.n_l]
    }

    pub fn maps(&self) -> &dyn ConstitutiveMaps<T> {
        self.maps.as_ref()
    }

    fn check_state(&self, x: &[T]) -> Result<()> {
        if x.len() != self.state_len() {
            return Err(Error::config(format!(
                "state has length {}, model expects {}",
                x.len(),
                self.state_len()
            )));
        }
        self.maps
            .check_admissible(&x[self.position_range()], self.guard_margin)
    }

    fn inv_c(&self, q: &[T]) -> Result<Mat<T>> {
        inverse(&self.maps.capacitance(q)).ok_or_else(|| Error::Domain {
            coordinate: "q".into(),
            value: q.first().map_or(f64::NAN, |v| v.as_f64()),
            detail: "capacitance matrix is singular".into(),
        })
    }

    fn inv_l(&self, q: &[T]) -> Result<Mat<T>> {
        inverse(&self.maps.inductance(q)).ok_or_else(|| Error::Domain {
            coordinate: "q".into(),
            value: q.first().map_or(f64::NAN, |v| v.as_f64()),
            detail: "inductance matrix is singular".into(),
        })
    }

    /// `∇H(x)` in the state layout.
    pub fn grad_h(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_state(x)?;
        let q = &x[self.position_range()];
        let charges = &x[self.charge_range()];
        let fluxes = &x[self.flux_range()];
        let p = &x[self.momentum_range()];
        let half = T::lit(0.5);

        let mut g = Vec::with_capacity(self.state_len());
        let (ci, li) = (
            if self.n_c > 0 { Some(self.inv_c(q)?) } else { None },
            if self.n_l > 0 { Some(self.inv_l(q)?) } else { None },
        );
        if let Some(ci) = &ci {
            g.extend(ci.mul_vec(charges));
        }
        if let Some(li) = &li {
            g.extend(li.mul_vec(fluxes));
        }
        let dv = self.maps.potential_grad(q);
        for j in 0..self.n_m {
            // ∂(M⁻¹)/∂q_j = −M⁻¹ (∂M/∂q_j) M⁻¹
            let mut dq = dv[j];
            if let Some(ci) = &ci {
                let d = ci.mul(&self.maps.capacitance_grad(q, j)).mul(ci);
                dq -= half * d.quad_form(charges);
            }
            if let Some(li) = &li {
                let d = li.mul(&self.maps.inductance_grad(q, j)).mul(li);
                dq -= half * d.quad_form(fluxes);
            }
            g.push(dq);
        }
        g.extend(self.inertia_inv.mul_vec(p));
        Ok(g)
    }

    pub fn hamiltonian(&self, x: &[T]) -> Result<T> {
        self.check_state(x)?;
        let q = &x[self.position_range()];
        let half = T::lit(0.5);
        let mut h = self.maps.potential(q);
        if self.n_c > 0 {
            h += half * self.inv_c(q)?.quad_form(&x[self.charge_range()]);
        }
        if self.n_l > 0 {
            h += half * self.inv_l(q)?.quad_form(&x[self.flux_range()]);
        }
        h += half * self.inertia_inv.quad_form(&x[self.momentum_range()]);
        Ok(h)
    }

    /// `ẋ = ℱ∇H + g·u`, `u = (i_C, v_L)`.
    pub fn dynamics(&self, x: &[T], u: &[T]) -> Result<Vec<T>> {
        if u.len() != self.input_len() {
            return Err(Error::config(format!(
                "input has length {}, model expects {}",
                u.len(),
                self.input_len()
            )));
        }
        let gh = self.grad_h(x)?;
        let (nc, nl, nm) = (self.n_c, self.n_l, self.n_m);
        let mut dx = Vec::with_capacity(self.state_len());
        if nc > 0 {
            let diff: Vec<T> = (0..nc).map(|i| u[i] - gh[i]).collect();
            dx.extend(self.r_c_inv.mul_vec(&diff));
        }
        if nl > 0 {
            let drop = self.r_l.mul_vec(&gh[nc..nc + nl]);
            dx.extend((0..nl).map(|i| u[nc + i] - drop[i]));
        }
        let gq = &gh[nc + nl..nc + nl + nm];
        let gp = &gh[nc + nl + nm..];
        dx.extend_from_slice(gp);
        let damp = self.r_m.mul_vec(gp);
        dx.extend((0..nm).map(|j| -gq[j] - damp[j]));
        Ok(dx)
    }

    /// `g·u`, the state direction an input enters along.
    pub fn input_map(&self, u: &[T]) -> Vec<T> {
        let (nc, nl, nm) = (self.n_c, self.n_l, self.n_m);
        let mut v = Vec::with_capacity(self.state_len());
        if nc > 0 {
            v.extend(self.r_c_inv.mul_vec(&u[..nc]));
        }
        v.extend_from_slice(&u[nc..nc + nl]);
        v.extend(std::iter::repeat_n(T::zero(), 2 * nm));
        v
    }

    /// Same vector field driven by the nominal input only.
    pub fn averaged_dynamics(&self, x_bar: &[T], u_c: &[T]) -> Result<Vec<T>> {
        self.dynamics(x_bar, u_c)
    }

    /// Power-conjugate port output `gᵀ∇H = (R_C⁻¹v_C, i_L)`.
    pub fn port_output(&self, x: &[T]) -> Result<Vec<T>> {
        let gh = self.grad_h(x)?;
        let mut y = self.r_c_inv.mul_vec(&gh[self.charge_range()]);
        y.extend_from_slice(&gh[self.flux_range()]);
        Ok(y)
    }

    /// Measured output under this model's capacitive convention.
    pub fn natural_output(&self, x: &[T]) -> Result<Vec<T>> {
        match self.output {
            CapacitiveOutput::Current => self.port_output(x),
            CapacitiveOutput::Voltage => {
                let gh = self.grad_h(x)?;
                Ok(gh[..self.n_c + self.n_l].to_vec())
            }
        }
    }

    /// Ground-truth `y_v = ∇hᵀ g b` for the measured output.
    pub fn true_virtual_output(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_state(x)?;
        let q = &x[self.position_range()];
        let mut yv = Vec::with_capacity(self.input_len());
        if self.n_c > 0 {
            let ci = self.inv_c(q)?;
            let v = ci.mul_vec(&self.r_c_inv.mul_vec(&self.b_ce));
            match self.output {
                CapacitiveOutput::Current => yv.extend(self.r_c_inv.mul_vec(&v)),
                CapacitiveOutput::Voltage => yv.extend(v),
            }
        }
        if self.n_l > 0 {
            yv.extend(self.inv_l(q)?.mul_vec(&self.b_le));
        }
        Ok(yv)
    }

    /// `∇Hᵀ R ∇H`, the power dissipated in the resistive elements.
    pub fn dissipation(&self, x: &[T]) -> Result<T> {
        let gh = self.grad_h(x)?;
        let mut d = T::zero();
        if self.n_c > 0 {
            d += self.r_c_inv.quad_form(&gh[self.charge_range()]);
        }
        if self.n_l > 0 {
            d += self.r_l.quad_form(&gh[self.flux_range()]);
        }
        if self.n_m > 0 {
            d += self.r_m.quad_form(&gh[self.momentum_range()]);
        }
        Ok(d)
    }

    /// `ẋ_E` computed from measured output and input only.
    pub fn electrical_drift(&self, y: &[T], u: &[T]) -> Vec<T> {
        let (nc, nl) = (self.n_c, self.n_l);
        let mut dx = Vec::with_capacity(nc + nl);
        if nc > 0 {
            let v_c: Vec<T> = match self.output {
                CapacitiveOutput::Voltage => y[..nc].to_vec(),
                CapacitiveOutput::Current => self.r_c.mul_vec(&y[..nc]),
            };
            let diff: Vec<T> = (0..nc).map(|i| u[i] - v_c[i]).collect();
            dx.extend(self.r_c_inv.mul_vec(&diff));
        }
        if nl > 0 {
            let drop = self.r_l.mul_vec(&y[nc..nc + nl]);
            dx.extend((0..nl).map(|i| u[nc + i] - drop[i]));
        }
        dx
    }

    /// Linear regression `ℬ_E y = Y_v x_E` assembled from an output sample and
    /// a virtual output (true or estimated). Returns `(ℬ_E y, Y_v)`.
    pub fn electrical_regression(&self, y: &[T], yv: &[T]) -> (Vec<T>, Mat<T>) {
        let (nc, nl) = (self.n_c, self.n_l);
        let rows = usize::from(nc > 0) + usize::from(nl > 0);
        let mut lhs = Vec::with_capacity(rows);
        let mut reg = Mat::zeros(rows, nc + nl);
        let mut r = 0;
        if nc > 0 {
            // bring the capacitive block to the current convention
            let (y_c, yv_c) = match self.output {
                CapacitiveOutput::Current => (y[..nc].to_vec(), yv[..nc].to_vec()),
                CapacitiveOutput::Voltage => (
                    self.r_c_inv.mul_vec(&y[..nc]),
                    self.r_c_inv.mul_vec(&yv[..nc]),
                ),
            };
            lhs.push(dot(&self.b_ce, &y_c));
            let row = self.r_c.transpose().mul_vec(&yv_c);
            for (j, v) in row.into_iter().enumerate() {
                reg[(r, j)] = v;
            }
            r += 1;
        }
        if nl > 0 {
            lhs.push(dot(&self.b_le, &y[nc..nc + nl]));
            for j in 0..nl {
                reg[(r, nc + j)] = yv[nc + j];
            }
        }
        (lhs, reg)
    }

    /// `R_E = diag(R_C⁻¹, R_L)` as used by the electrical observer.
    pub fn r_l(&self) -> &Mat<T> {
        &self.r_l
    }

    pub fn r_c(&self) -> &Mat<T> {
        &self.r_c
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::rk4_step;

    /// Two-port device: one capacitor, one inductor, two mechanical coordinates.
    #[derive(Debug)]
    struct Toy;

    impl ConstitutiveMaps<f64> for Toy {
        fn capacitance(&self, q: &[f64]) -> Mat<f64> {
            Mat::diag(&[0.5 * (1.0 + q[0] * q[0])])
        }
        fn capacitance_grad(&self, q: &[f64], j: usize) -> Mat<f64> {
            Mat::diag(&[if j == 0 { q[0] } else { 0.0 }])
        }
        fn inductance(&self, q: &[f64]) -> Mat<f64> {
            Mat::diag(&[2.0 / (3.0 - q[1])])
        }
        fn inductance_grad(&self, q: &[f64], j: usize) -> Mat<f64> {
            Mat::diag(&[if j == 1 { 2.0 / (3.0 - q[1]).powi(2) } else { 0.0 }])
        }
        fn potential(&self, q: &[f64]) -> f64 {
            0.5 * (q[0] * q[0] + 2.0 * q[1] * q[1])
        }
        fn potential_grad(&self, q: &[f64]) -> Vec<f64> {
            vec![q[0], 2.0 * q[1]]
        }
        fn check_admissible(&self, q: &[f64], margin: f64) -> Result<()> {
            if q[1] < 3.0 - margin {
                Ok(())
            } else {
                Err(Error::Domain {
                    coordinate: "q[1]".into(),
                    value: q[1],
                    detail: "must stay below 3".into(),
                })
            }
        }
    }

    fn toy(r_m: f64) -> QuadraticEmsModel<f64> {
        QuadraticEmsModel::new(
            EmsStructure {
                r_c: Mat::diag(&[2.0]),
                r_l: Mat::diag(&[0.7]),
                r_m: Mat::diag(&[r_m, r_m]),
                inertia: Mat::diag(&[1.5, 0.8]),
                b_ce: vec![1.0],
                b_le: vec![0.5],
                output: CapacitiveOutput::Current,
                guard_margin: 1e-6,
            },
            Arc::new(Toy),
        )
        .unwrap()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = toy(0.1);
        let x = [0.3, -0.4, 0.2, 1.1, 0.5, -0.25];
        let g = m.grad_h(&x).unwrap();
        for i in 0..x.len() {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (m.hamiltonian(&xp).unwrap() - m.hamiltonian(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn unforced_lossless_mechanics_dissipates_energy() {
        let m = toy(0.0);
        let mut x = vec![0.3, -0.4, 0.2, 1.1, 0.5, -0.25];
        let dt = 1e-3;
        for _ in 0..200 {
            let h0 = m.hamiltonian(&x).unwrap();
            x = rk4_step(|_, s: &[f64]| m.dynamics(s, &[0.0, 0.0]), 0.0, &x, dt).unwrap();
            assert!(m.hamiltonian(&x).unwrap() <= h0 + 1e-12);
        }
    }

    #[test]
    fn power_balance_along_forced_trajectory() {
        let m = toy(0.2);
        let mut x = vec![0.3, -0.4, 0.2, 1.1, 0.5, -0.25];
        let dt = 1e-4;
        let h0 = m.hamiltonian(&x).unwrap();
        let mut budget = 0.0;
        let u = |t: f64| vec![0.4 * (7.0 * t).sin(), 0.3];
        let rate = |x: &[f64], t: f64| {
            let y = m.port_output(x).unwrap();
            dot(&y, &u(t)) - m.dissipation(x).unwrap()
        };
        for k in 0..5000 {
            let t = k as f64 * dt;
            let a = rate(&x, t);
            x = rk4_step(|s, st: &[f64]| m.dynamics(st, &u(s)), t, &x, dt).unwrap();
            budget += 0.5 * dt * (a + rate(&x, t + dt));
        }
        let dh = m.hamiltonian(&x).unwrap() - h0;
        assert!((dh - budget).abs() < 1e-6 * (1.0 + dh.abs()), "{dh} vs {budget}");
    }

    #[test]
    fn regression_identity_with_true_virtual_output() {
        let m = toy(0.1);
        for x in [
            [0.3, -0.4, 0.2, 1.1, 0.5, -0.25],
            [-1.0, 2.0, -0.7, -2.0, 0.0, 0.3],
        ] {
            let y = m.natural_output(&x).unwrap();
            let yv = m.true_virtual_output(&x).unwrap();
            let (lhs, reg) = m.electrical_regression(&y, &yv);
            let rhs = reg.mul_vec(m.electrical(&x));
            for (a, b) in lhs.iter().zip(&rhs) {
                assert!((a - b).abs() < 1e-15 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn electrical_drift_matches_dynamics() {
        let m = toy(0.1);
        let x = [0.3, -0.4, 0.2, 1.1, 0.5, -0.25];
        let u = [0.2, -0.9];
        let dx = m.dynamics(&x, &u).unwrap();
        let y = m.natural_output(&x).unwrap();
        let drift = m.electrical_drift(&y, &u);
        assert!((drift[0] - dx[0]).abs() < 1e-15 && (drift[1] - dx[1]).abs() < 1e-15);
    }

    #[test]
    fn output_is_linear_in_charge_and_flux() {
        let m = toy(0.1);
        let x = [0.3, -0.4, 0.2, 1.1, 0.5, -0.25];
        let x2 = [0.6, -0.8, 0.2, 1.1, 0.5, -0.25];
        let (y, y2) = (m.natural_output(&x).unwrap(), m.natural_output(&x2).unwrap());
        assert!((y2[0] - 2.0 * y[0]).abs() < 1e-15 && (y2[1] - 2.0 * y[1]).abs() < 1e-15);
    }

    #[test]
    fn construction_rejects_indefinite_dissipation() {
        let bad = EmsStructure {
            r_c: Mat::diag(&[2.0]),
            r_l: Mat::diag(&[-0.7]),
            r_m: Mat::diag(&[0.0, 0.0]),
            inertia: Mat::diag(&[1.0, 1.0]),
            b_ce: vec![1.0],
            b_le: vec![1.0],
            output: CapacitiveOutput::Current,
            guard_margin: 1e-6,
        };
        assert!(matches!(
            QuadraticEmsModel::new(bad, Arc::new(Toy)),
            Err(Error::Config(_))
        ));
        let asym = EmsStructure {
            r_c: Mat::diag(&[2.0]),
            r_l: Mat::diag(&[0.7]),
            r_m: Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]),
            inertia: Mat::diag(&[1.0, 1.0]),
            b_ce: vec![1.0],
            b_le: vec![1.0],
            output: CapacitiveOutput::Current,
            guard_margin: 1e-6,
        };
        assert!(QuadraticEmsModel::new(asym, Arc::new(Toy)).is_err());
    }

    #[test]
    fn guard_violation_is_a_labelled_domain_error() {
        let m = toy(0.1);
        let err = m.dynamics(&[0.0, 0.0, 0.0, 3.0, 0.0, 0.0], &[0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Domain { ref coordinate, .. } if coordinate == "q[1]"));
    }
}
