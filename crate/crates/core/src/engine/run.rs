//! Fixed-step closed-loop simulation.

use super::config::{
    ControlConfig, Feedback, ObserverKind, PlantConfig, Scenario, ShapeConfig, YvSource,
};
use super::noise::NoiseSource;
use super::trajectory::Trajectory;
use crate::control::{ida_pbc, Backstepping, IdaPbcGains, Reference};
use crate::drem::{ScalarGradState, WindowDemodulator};
use crate::ems_models::{MagLevParams, OpticalSwitchParams, QuadraticEmsModel};
use crate::error::{Error, Result};
use crate::integrate::rk4_step;
use crate::ltv_ops::VirtualRegressor;
use crate::observers::{
    ElectricalObserver, MagLevAdaptiveObserver, MagLevEstimate, MagLevLuenberger, OptSwEstimate,
    OptSwObserver, Projection, StepSignals,
};
use crate::scalar::Real;
use crate::signals::{ProbingSpec, TabulatedWave, Waveform};

/// Extra work beyond what the scenario itself needs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Also run the moving-window demodulator and log `yv_hat_baseline`.
    pub baseline: bool,
}

pub fn run_scenario(scn: &Scenario) -> Result<Trajectory> {
    run_scenario_with::<f64>(scn, RunOptions::default())
}

#[derive(Clone, Copy)]
enum Plant<T> {
    MagLev(MagLevParams<T>),
    OptSw(OpticalSwitchParams<T>),
}

fn cast_maglev<T: Real>(p: &MagLevParams<f64>) -> MagLevParams<T> {
    MagLevParams {
        m: T::lit(p.m),
        gravity: T::lit(p.gravity),
        resistance: T::lit(p.resistance),
        c: T::lit(p.c),
        k: T::lit(p.k),
    }
}

fn cast_optsw<T: Real>(p: &OpticalSwitchParams<f64>) -> OpticalSwitchParams<T> {
    OpticalSwitchParams {
        m: T::lit(p.m),
        a1: T::lit(p.a1),
        a2: T::lit(p.a2),
        c0: T::lit(p.c0),
        c1: T::lit(p.c1),
        r_c: T::lit(p.r_c),
        r_m: T::lit(p.r_m),
    }
}

enum Obs<T> {
    None,
    Electrical(ElectricalObserver<T>),
    MagLev {
        obs: MagLevAdaptiveObserver<T>,
        luenberger: Option<MagLevLuenberger<T>>,
        est: MagLevEstimate<T>,
    },
    OptSw(OptSwObserver<T>, OptSwEstimate<T>),
}

enum Ctrl<T> {
    OpenLoop(T),
    Feedforward,
    IdaPbc {
        kp: T,
        alpha: T,
        term: crate::control::ResistanceTerm,
        feedback: Feedback,
    },
    Backstepping(Backstepping<T>, Feedback),
}

struct Runner<T: Real> {
    plant: Plant<T>,
    model: QuadraticEmsModel<T>,
    probe: ProbingSpec<T>,
    reference: Reference<T>,
    ctrl: Ctrl<T>,
    obs: Obs<T>,
    yv_source: YvSource,
    floor: T,
}

impl<T: Real> Runner<T> {
    fn true_yv(&self, x: &[T]) -> Result<T> {
        Ok(self.model.true_virtual_output(x)?[0])
    }

    /// Position, flux/charge, momentum and resistance the controller acts on.
    fn feedback_state(&self, x: &[T], feedback: Feedback, y_meas: T) -> ([T; 3], T, T) {
        match (feedback, &self.obs, self.plant) {
            (Feedback::Observer, Obs::MagLev { est, .. }, _) => {
                ([est.lambda, est.q, est.p], est.r, y_meas)
            }
            (_, obs, Plant::MagLev(p)) => {
                let r = match obs {
                    Obs::MagLev { est, .. } => est.r,
                    _ => p.resistance,
                };
                ([x[0], x[1], x[2]], r, p.current(x[0], x[1]))
            }
            (_, _, Plant::OptSw(_)) => ([x[0], x[1], x[2]], T::zero(), T::zero()),
        }
    }

    fn command(&self, x: &[T], t: T, y_meas: T) -> T {
        let q_star = self.reference.value(t);
        match &self.ctrl {
            Ctrl::OpenLoop(u) => *u,
            Ctrl::Feedforward => match self.plant {
                Plant::OptSw(p) => p.holding_voltage(q_star.max(T::zero())),
                Plant::MagLev(p) => p.holding_voltage(q_star),
            },
            Ctrl::IdaPbc {
                kp,
                alpha,
                term,
                feedback,
            } => {
                let Plant::MagLev(p) = self.plant else {
                    return T::zero();
                };
                let (state, r, i) = self.feedback_state(x, *feedback, y_meas);
                let g = IdaPbcGains {
                    kp: *kp,
                    alpha: *alpha,
                    lambda_star: p.lambda_star(),
                    q_star,
                    p_star: T::zero(),
                };
                ida_pbc(&g, *term, p.m, state, r, i)
            }
            Ctrl::Backstepping(b, feedback) => {
                let Plant::MagLev(p) = self.plant else {
                    return T::zero();
                };
                let (state, r_hat, _) = self.feedback_state(x, *feedback, y_meas);
                let r = match feedback {
                    Feedback::State => p.resistance,
                    Feedback::Observer => r_hat,
                };
                b.output(&p, r, state[1], state[2], q_star, T::zero())
            }
        }
    }

    fn advance_controller(&mut self, x: &[T], t: T, y_meas: T, dt: T) {
        let q_star = self.reference.value(t);
        let q = match &self.ctrl {
            Ctrl::Backstepping(_, fb) => self.feedback_state(x, *fb, y_meas).0[1],
            _ => return,
        };
        if let Ctrl::Backstepping(b, _) = &mut self.ctrl {
            let par = match self.plant {
                Plant::MagLev(p) => p,
                Plant::OptSw(_) => return,
            };
            b.step(&par, T::zero(), (q, T::zero()), q_star, T::zero(), dt);
        }
    }
}

fn waveform<T: Real>(shape: &ShapeConfig) -> Result<Waveform<T>> {
    Ok(match shape {
        ShapeConfig::Sinusoid => Waveform::Sinusoid,
        ShapeConfig::Square => Waveform::Square,
        ShapeConfig::Tabulated { wave, .. } => {
            let samples: Vec<T> = wave.samples().iter().map(|&v| T::lit(v)).collect();
            Waveform::Tabulated(TabulatedWave::new(&samples)?)
        }
    })
}

/// Channel names in logging order for a scenario.
pub fn channel_names(scn: &Scenario, opts: RunOptions) -> Vec<String> {
    let maglev = matches!(scn.plant, PlantConfig::MagLev(_));
    let mut n: Vec<&str> = vec!["t", "q_star"];
    if maglev {
        n.extend(["lambda", "q", "p", "i"]);
    } else {
        n.extend(["charge", "q", "p", "v_c"]);
    }
    n.extend(["y", "u_c", "u", "S", "Y", "yv", "yv_hat"]);
    if opts.baseline || scn.observer.yv_source == YvSource::Baseline {
        n.push("yv_hat_baseline");
    }
    match &scn.observer.kind {
        ObserverKind::None => {}
        ObserverKind::Electrical { .. } => n.push(if maglev { "lambda_hat" } else { "charge_hat" }),
        ObserverKind::MagLevAdaptive { luenberger, .. } => {
            n.extend(["r", "r_hat", "lambda_hat", "q_hat", "p_hat", "phi_r", "y_r"]);
            if luenberger.is_some() {
                n.push("p_hat_l");
            }
        }
        ObserverKind::OpticalSwitch { .. } => n.extend(["charge_hat", "q_hat", "p_hat"]),
    }
    n.into_iter().map(String::from).collect()
}

/// Runs `scn` in scalar type `T`; the log is kept in `f64`.
pub fn run_scenario_with<T: Real>(scn: &Scenario, opts: RunOptions) -> Result<Trajectory> {
    scn.validate()?;
    let eps = T::lit(scn.probe.epsilon);
    let dt_f = scn.dt();
    let dt = T::lit(dt_f);
    let steps = scn.steps();
    let b = T::lit(scn.probe.scaling);
    let probe = ProbingSpec::new(waveform(&scn.probe.shape)?, eps, vec![b])?;
    let margin = T::lit(scn.guard_margin);

    let (plant, model) = match &scn.plant {
        PlantConfig::MagLev(p) => {
            let p = cast_maglev::<T>(p);
            (Plant::MagLev(p), p.model(b, margin)?)
        }
        PlantConfig::OpticalSwitch(p) => {
            let p = cast_optsw::<T>(p);
            (Plant::OptSw(p), p.model(b, margin)?)
        }
    };
    let reference = match scn.reference {
        Reference::Constant(v) => Reference::Constant(T::lit(v)),
        Reference::Pulse {
            low,
            high,
            period,
            ramp,
        } => Reference::Pulse {
            low: T::lit(low),
            high: T::lit(high),
            period: T::lit(period),
            ramp: T::lit(ramp),
        },
        Reference::Sine {
            mean,
            amplitude,
            frequency,
        } => Reference::Sine {
            mean: T::lit(mean),
            amplitude: T::lit(amplitude),
            frequency: T::lit(frequency),
        },
    };

    let mut x: Vec<T> = match (&scn.init, plant) {
        (Some(v), _) => v.iter().map(|&a| T::lit(a)).collect(),
        (None, Plant::MagLev(p)) => vec![p.lambda_star(), T::zero(), T::zero()],
        (None, Plant::OptSw(p)) => {
            let q0 = reference.value(T::zero()).max(T::lit(1e-4));
            vec![p.capacitance(q0) * p.holding_voltage(q0), q0, T::zero()]
        }
    };

    // nominal virtual output sets the projection floor
    let yv_nominal = match plant {
        Plant::MagLev(p) => p.virtual_output(reference.value(T::zero())),
        Plant::OptSw(p) => p.virtual_output(reference.value(T::zero()).max(T::lit(1e-4)), b),
    };
    let floor = T::lit(scn.observer.floor_fraction) * yv_nominal.abs();
    let dwell_steps = (scn.observer.dwell / dt_f).round() as usize;
    let projection = || Projection::new(floor, dwell_steps);
    // the maglev observer works on the unscaled `(c − q)/k`
    let b_div = if b == T::zero() { T::one() } else { b };

    let obs = match &scn.observer.kind {
        ObserverKind::None => Obs::None,
        ObserverKind::Electrical { gamma, x0 } => {
            Obs::Electrical(ElectricalObserver::new(vec![T::lit(*x0)], T::lit(*gamma))?)
        }
        ObserverKind::MagLevAdaptive {
            gains,
            law,
            r_hat0,
            lambda0,
            luenberger,
        } => {
            let Plant::MagLev(p) = plant else {
                return Err(Error::config("maglev observer on a non-maglev plant"));
            };
            let g = crate::observers::MagLevObserverGains {
                gamma_r: T::lit(gains.gamma_r),
                gamma_lambda: T::lit(gains.gamma_lambda),
                gamma_p: T::lit(gains.gamma_p),
                a: T::lit(gains.a),
            };
            let mut o = MagLevAdaptiveObserver::new(p, g, *law, T::lit(*r_hat0), projection()?)?;
            let yv0 = (T::lit(scn.drem.yv0) / b_div).max(floor);
            // z starts so that p̂(0) = 0
            o.set_flux_and_kkl(T::lit(*lambda0), g.gamma_p * yv0);
            let lu = match luenberger {
                Some((lg, form)) => Some(MagLevLuenberger::new(
                    p,
                    crate::observers::LuenbergerGains {
                        l1: T::lit(lg.l1),
                        l2: T::lit(lg.l2),
                    },
                    *form,
                    [yv0, T::zero()],
                )?),
                None => None,
            };
            let mut est = o.estimate(T::zero());
            est.q = p.position_from_virtual(yv0);
            est.p = T::zero();
            Obs::MagLev {
                obs: o,
                luenberger: lu,
                est,
            }
        }
        ObserverKind::OpticalSwitch { gamma, charge0 } => {
            let Plant::OptSw(p) = plant else {
                return Err(Error::config("optical switch observer on a different plant"));
            };
            let o = OptSwObserver::new(p, b, T::lit(*gamma), T::lit(*charge0), T::zero(), projection()?)?;
            let q0 = o.position(T::lit(scn.drem.yv0));
            let est = OptSwEstimate {
                charge: T::lit(*charge0),
                q: q0,
                p: T::zero(),
            };
            Obs::OptSw(o, est)
        }
    };

    let ctrl = match &scn.control {
        ControlConfig::OpenLoop { u } => Ctrl::OpenLoop(T::lit(*u)),
        ControlConfig::Feedforward => Ctrl::Feedforward,
        ControlConfig::IdaPbc {
            kp,
            alpha,
            term,
            feedback,
        } => Ctrl::IdaPbc {
            kp: T::lit(*kp),
            alpha: T::lit(*alpha),
            term: *term,
            feedback: *feedback,
        },
        ControlConfig::Backstepping { gains, feedback } => Ctrl::Backstepping(
            Backstepping::new(crate::control::BackstepGains {
                gamma1: T::lit(gains.gamma1),
                gamma2: T::lit(gains.gamma2),
                ki: T::lit(gains.ki),
            })?,
            *feedback,
        ),
    };

    let mut run = Runner {
        plant,
        model,
        probe,
        reference,
        ctrl,
        obs,
        yv_source: scn.observer.yv_source,
        floor,
    };

    let d = eps * T::lit(scn.drem.delay_periods as f64);
    let mut regressor = VirtualRegressor::new(d, dt, 1)?;
    let gamma_n = T::lit(scn.drem.normalized_gain(scn.probe.epsilon));
    let mut filter = ScalarGradState::new(vec![T::lit(scn.drem.yv0)], gamma_n, eps, None)?;
    let with_baseline = opts.baseline || scn.observer.yv_source == YvSource::Baseline;
    let mut baseline = if with_baseline {
        Some(WindowDemodulator::new(eps, scn.baseline_periods, scn.sim.steps_per_period)?)
    } else {
        None
    };
    let mut yv_base = T::lit(scn.drem.yv0);
    let mut noise = NoiseSource::new(scn.noise)?;

    let names = channel_names(scn, opts);
    let mut traj = Trajectory::with_capacity(names, dt_f, steps + 1);

    let time = |k: usize| T::lit(k as f64 * dt_f);
    let measure = |x: &[T], noise: &mut NoiseSource, k: usize, model: &QuadraticEmsModel<T>| -> Result<(T, T)> {
        let clean = model.natural_output(x)?[0];
        Ok((clean, clean + T::lit(noise.sample(k as f64 * dt_f))))
    };

    let (mut y_clean, mut y) = measure(&x, &mut noise, 0, &run.model)?;
    let mut big_y = regressor.step(&[y])?[0];
    if let Some(bl) = baseline.as_mut() {
        if let Some((_, v)) = bl.step(y, run.probe.primitive(T::zero()))? {
            yv_base = v;
        }
    }
    let mut yv_hat = filter.yv_hat()[0];

    let mut row: Vec<f64> = Vec::with_capacity(traj.names().len());
    for k in 0..=steps {
        let t = time(k);
        let u_c = run.command(&x, t, y);
        let u_now = u_c + run.probe.injection(t)[0];
        let yv_true = run.true_yv(&x)?;

        row.clear();
        row.push(t.as_f64());
        row.push(run.reference.value(t).as_f64());
        row.extend(x.iter().map(|v| v.as_f64()));
        row.push(y_clean.as_f64());
        for v in [y, u_c, u_now, run.probe.primitive(t), big_y, yv_true, yv_hat] {
            row.push(v.as_f64());
        }
        if with_baseline {
            row.push(yv_base.as_f64());
        }
        match &run.obs {
            Obs::None => {}
            Obs::Electrical(o) => row.push(o.x_hat()[0].as_f64()),
            Obs::MagLev {
                luenberger, est, ..
            } => {
                let r = match run.plant {
                    Plant::MagLev(p) => p.resistance,
                    Plant::OptSw(_) => T::zero(),
                };
                for v in [r, est.r, est.lambda, est.q, est.p, est.phi_r, est.y_r] {
                    row.push(v.as_f64());
                }
                if let Some(l) = luenberger {
                    row.push(l.p_hat().as_f64());
                }
            }
            Obs::OptSw(_, est) => {
                for v in [est.charge, est.q, est.p] {
                    row.push(v.as_f64());
                }
            }
        }
        traj.push_row(&row)?;
        if k == steps {
            break;
        }

        // plant over [t, t + dt] with the nominal input held
        let probe = &run.probe;
        let model = &run.model;
        let x_next = rk4_step(
            |tau, s: &[T]| model.dynamics(s, &probe.inject(&[u_c], tau)?),
            t,
            &x,
            dt,
        )?;
        let t_next = time(k + 1);
        let (yc_next, y_next) = measure(&x_next, &mut noise, k + 1, &run.model)?;
        let u_next = u_c + run.probe.injection(t_next)[0];

        big_y = regressor.step(&[y_next])?[0];
        let warm = regressor.is_warm();
        let yv_prev = yv_hat;
        if warm {
            let s_next = run.probe.primitive(t_next);
            yv_hat = filter.step(s_next, &[big_y], dt)?[0];
            if !yv_hat.is_finite() {
                return Err(Error::NonFinite {
                    channel: "yv_hat".into(),
                    time: t_next.as_f64(),
                    snapshot: vec![yv_prev.as_f64(), big_y.as_f64(), s_next.as_f64()],
                });
            }
        }
        let base_prev = yv_base;
        if let Some(bl) = baseline.as_mut() {
            if let Some((_, v)) = bl.step(y_next, run.probe.primitive(t_next))? {
                yv_base = v;
            }
        }

        if warm {
            let (v0, v1) = match run.yv_source {
                YvSource::Filter => (yv_prev, yv_hat),
                YvSource::Baseline => (base_prev, yv_base),
                YvSource::Truth => (yv_true, run.true_yv(&x_next)?),
            };
            let (ys, us, vs) = ([y, y_next], [u_now, u_next], [v0, v1]);
            let sig = StepSignals {
                y: [&ys[..1], &ys[1..]],
                u: [&us[..1], &us[1..]],
                yv_hat: [&vs[..1], &vs[1..]],
            };
            let floor = run.floor;
            match &mut run.obs {
                Obs::None => {}
                Obs::Electrical(o) => {
                    o.step(&run.model, &sig, dt)?;
                }
                Obs::MagLev {
                    obs,
                    luenberger,
                    est,
                } => {
                    let ws = [v0 / b_div, v1 / b_div];
                    let sig = StepSignals {
                        yv_hat: [&ws[..1], &ws[1..]],
                        ..sig
                    };
                    let (v0, v1) = (ws[0], ws[1]);
                    let lambda_prev = est.lambda;
                    *est = obs.step(&sig, dt)?;
                    if let Some(l) = luenberger {
                        l.step([v0.max(floor), v1.max(floor)], [lambda_prev, est.lambda], dt)?;
                    }
                }
                Obs::OptSw(o, est) => {
                    *est = o.step(&sig, dt)?;
                }
            }
        }

        run.advance_controller(&x, t, y, dt);
        x = x_next;
        y = y_next;
        y_clean = yc_next;
    }
    Ok(traj)
}
