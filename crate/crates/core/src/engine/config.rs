//! Scenario description and its flat `section.key = value` text format.
//!
//! Parsing is strict: every key must belong to the schema of the selected
//! model, observer and controller. `model.preset` fills in defaults that the
//! remaining keys override.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::noise::{NoiseConvention, NoiseSpec};
use crate::control::{BackstepGains, Reference, ResistanceTerm};
use crate::ems_models::{MagLevParams, OpticalSwitchParams, DEFAULT_GUARD_MARGIN};
use crate::error::{Error, Result};
use crate::observers::{FluxLaw, LuenbergerForm, LuenbergerGains, MagLevObserverGains};
use crate::signals::TabulatedWave;

pub const PRESETS: [&str; 3] = ["maglev-sim", "maglev-exp", "optsw-sim"];

#[derive(Clone, Debug, PartialEq)]
pub enum PlantConfig {
    MagLev(MagLevParams<f64>),
    OpticalSwitch(OpticalSwitchParams<f64>),
}

impl PlantConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            PlantConfig::MagLev(_) => "maglev",
            PlantConfig::OpticalSwitch(_) => "optical_switch",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeConfig {
    Sinusoid,
    Square,
    Tabulated { path: String, wave: TabulatedWave<f64> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub epsilon: f64,
    pub scaling: f64,
    pub shape: ShapeConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub steps_per_period: usize,
    pub horizon: f64,
    pub t_settle: f64,
    pub seed: u64,
}

/// How `drem.gamma` is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GainUnits {
    /// Gain on the physical-time regressor `ε·S`, i.e. `θ̇ = γ(εS)(Y − εSθ)` with `θ = y_v`.
    #[default]
    Physical,
    /// Gain on the normalised regressor `S`, i.e. `θ̇₂ = γS(Y − Sθ₂)` with `θ₂ = εy_v`.
    Normalized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DremConfig {
    pub gamma: f64,
    pub units: GainUnits,
    /// Delay `d` in injection periods.
    pub delay_periods: usize,
    pub yv0: f64,
}

impl DremConfig {
    /// Gain of the normalised filter `θ̇₂ = γS(Y − Sθ₂)`.
    pub fn normalized_gain(&self, epsilon: f64) -> f64 {
        match self.units {
            GainUnits::Physical => self.gamma * epsilon * epsilon,
            GainUnits::Normalized => self.gamma,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum YvSource {
    #[default]
    Filter,
    Baseline,
    Truth,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObserverKind {
    None,
    Electrical {
        gamma: f64,
        x0: f64,
    },
    MagLevAdaptive {
        gains: MagLevObserverGains<f64>,
        law: FluxLaw,
        r_hat0: f64,
        lambda0: f64,
        luenberger: Option<(LuenbergerGains<f64>, LuenbergerForm)>,
    },
    OpticalSwitch {
        gamma: f64,
        charge0: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverConfig {
    pub kind: ObserverKind,
    pub yv_source: YvSource,
    pub floor_fraction: f64,
    pub dwell: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Feedback {
    #[default]
    State,
    Observer,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControlConfig {
    OpenLoop { u: f64 },
    /// Equilibrium voltage for the reference position.
    Feedforward,
    IdaPbc {
        kp: f64,
        alpha: f64,
        term: ResistanceTerm,
        feedback: Feedback,
    },
    Backstepping {
        gains: BackstepGains<f64>,
        feedback: Feedback,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    pub every: usize,
    pub columns: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub preset: Option<String>,
    pub plant: PlantConfig,
    pub guard_margin: f64,
    pub probe: ProbeConfig,
    pub sim: SimConfig,
    pub noise: NoiseSpec,
    pub drem: DremConfig,
    pub baseline_periods: usize,
    pub observer: ObserverConfig,
    pub control: ControlConfig,
    pub reference: Reference<f64>,
    /// Initial plant state; `None` selects the model default.
    pub init: Option<Vec<f64>>,
    pub output: OutputConfig,
}

impl Scenario {
    pub fn epsilon(&self) -> f64 {
        self.probe.epsilon
    }

    pub fn dt(&self) -> f64 {
        self.probe.epsilon / self.sim.steps_per_period as f64
    }

    /// Number of steps; the grid has one more point.
    pub fn steps(&self) -> usize {
        (self.sim.horizon / self.dt() + 1e-9).floor() as usize
    }

    /// Named starting point.
    pub fn preset(name: &str) -> Result<Scenario> {
        let maglev_common = |params: MagLevParams<f64>| Scenario {
            preset: Some(name.to_string()),
            plant: PlantConfig::MagLev(params),
            guard_margin: DEFAULT_GUARD_MARGIN,
            probe: ProbeConfig {
                epsilon: 1.0 / 300.0,
                scaling: 1.0,
                shape: ShapeConfig::Sinusoid,
            },
            sim: SimConfig {
                steps_per_period: 100,
                horizon: 10.0,
                t_settle: 5.0,
                seed: 1,
            },
            noise: NoiseSpec {
                power: 1e-10,
                sample_time: 1e-3,
                seed: 1,
                convention: NoiseConvention::PowerPerSample,
            },
            drem: DremConfig {
                gamma: 3.5e8,
                units: GainUnits::Physical,
                delay_periods: 1,
                yv0: params.virtual_output(0.0),
            },
            baseline_periods: 10,
            observer: ObserverConfig {
                kind: ObserverKind::MagLevAdaptive {
                    gains: MagLevObserverGains {
                        gamma_r: 500.0,
                        gamma_lambda: 8000.0,
                        gamma_p: 30.0,
                        a: 500.0,
                    },
                    law: FluxLaw::Gradient,
                    r_hat0: 2.0,
                    lambda0: 0.0,
                    luenberger: Some((
                        LuenbergerGains::double_pole(200.0, &params),
                        LuenbergerForm::Corrected,
                    )),
                },
                yv_source: YvSource::Filter,
                floor_fraction: 0.05,
                dwell: 0.1,
            },
            control: ControlConfig::IdaPbc {
                kp: 200.7,
                alpha: 33.4,
                term: ResistanceTerm::Compensate,
                feedback: Feedback::State,
            },
            reference: Reference::Pulse {
                low: 0.0,
                high: 2e-3,
                period: 4.0,
                ramp: 5e-3,
            },
            init: None,
            output: OutputConfig {
                every: 1,
                columns: None,
            },
        };
        match name {
            "maglev-sim" => Ok(maglev_common(MagLevParams::simulation())),
            "maglev-exp" => {
                let params = MagLevParams::experiment();
                let mut s = maglev_common(params);
                s.probe.epsilon = 1.0 / 33.0;
                s.probe.scaling = 1.5;
                s.drem = DremConfig {
                    gamma: 4e5,
                    units: GainUnits::Physical,
                    delay_periods: 10,
                    yv0: 1.5 * params.virtual_output(0.0),
                };
                s.observer.kind = ObserverKind::MagLevAdaptive {
                    gains: MagLevObserverGains {
                        gamma_r: 50.0,
                        gamma_lambda: 8000.0,
                        gamma_p: 20.0,
                        a: 10.0,
                    },
                    law: FluxLaw::Gradient,
                    r_hat0: 2.0,
                    lambda0: 0.0,
                    luenberger: None,
                };
                s.control = ControlConfig::Backstepping {
                    gains: BackstepGains {
                        gamma1: 340.0,
                        gamma2: 3.0,
                        ki: 1.0,
                    },
                    feedback: Feedback::State,
                };
                Ok(s)
            }
            "optsw-sim" => {
                let params = OpticalSwitchParams::default();
                let mut s = maglev_common(MagLevParams::simulation());
                s.plant = PlantConfig::OpticalSwitch(params);
                s.probe.scaling = 0.1;
                s.noise.power = 0.0;
                s.drem.gamma = 3.5e8;
                s.drem.yv0 = params.virtual_output(2e-3, 0.1);
                s.observer.kind = ObserverKind::OpticalSwitch {
                    gamma: 40.0,
                    charge0: 0.0,
                };
                s.control = ControlConfig::Feedforward;
                s.reference = Reference::Sine {
                    mean: 2e-3,
                    amplitude: 5e-4,
                    frequency: 0.2,
                };
                Ok(s)
            }
            other => Err(Error::config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            ))),
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario> {
        Self::from_file_with(path, &[])
    }

    /// Reads a file and applies `key = value` overrides on top of it.
    pub fn from_file_with(path: impl AsRef<Path>, overrides: &[(String, String)]) -> Result<Scenario> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse_with(&text, &base, overrides)
    }

    pub fn parse(text: &str) -> Result<Scenario> {
        Self::parse_with(text, Path::new("."), &[])
    }

    /// Relative waveform tables resolve against `base_dir`.
    pub fn parse_with(text: &str, base_dir: &Path, overrides: &[(String, String)]) -> Result<Scenario> {
        let mut entries = parse_entries(text)?;
        for (k, v) in overrides {
            let line = entries.get(k).map_or(0, |e| e.1);
            entries.insert(k.clone(), (v.clone(), line));
        }
        let mut r = Reader {
            entries,
            base_dir: base_dir.to_path_buf(),
        };
        let scn = r.scenario()?;
        r.finish()?;
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.plant {
            PlantConfig::MagLev(p) => p.validate()?,
            PlantConfig::OpticalSwitch(p) => p.validate()?,
        }
        let eps = self.probe.epsilon;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::config(format!("probe.epsilon must lie in (0, 1), got {eps}")));
        }
        if !self.probe.scaling.is_finite() {
            return Err(Error::config("probe.scaling must be finite"));
        }
        let n = self.sim.steps_per_period;
        if n < 10 || !n.is_multiple_of(10) {
            return Err(Error::config(format!(
                "sim.steps_per_period must be a positive multiple of 10, got {n}"
            )));
        }
        if !(self.sim.horizon > 0.0) {
            return Err(Error::config("sim.horizon must be positive"));
        }
        let warmup = 2.0 * self.drem.delay_periods as f64 * eps;
        if self.sim.horizon < warmup {
            return Err(Error::config(format!(
                "sim.horizon {} is shorter than the operator warm-up {warmup}",
                self.sim.horizon
            )));
        }
        if !(self.sim.t_settle >= 0.0 && self.sim.t_settle < self.sim.horizon) {
            return Err(Error::config("sim.t_settle must lie in [0, sim.horizon)"));
        }
        self.noise.validate(self.dt())?;
        if !(self.drem.gamma > 0.0) || !self.drem.gamma.is_finite() {
            return Err(Error::config("drem.gamma must be positive"));
        }
        if self.drem.delay_periods == 0 {
            return Err(Error::config("drem.delay must be at least one period"));
        }
        if self.baseline_periods == 0 {
            return Err(Error::config("baseline.periods must be positive"));
        }
        if !(self.observer.floor_fraction > 0.0 && self.observer.floor_fraction < 1.0) {
            return Err(Error::config("observer.floor_fraction must lie in (0, 1)"));
        }
        if !(self.observer.dwell >= 0.0) {
            return Err(Error::config("observer.dwell must be non-negative"));
        }
        self.reference.validate()?;
        let maglev = matches!(self.plant, PlantConfig::MagLev(_));
        match (&self.observer.kind, maglev) {
            (ObserverKind::MagLevAdaptive { gains, .. }, true) => {
                gains.validate()?;
                if let PlantConfig::MagLev(p) = &self.plant {
                    // RK4 is stable on the negative real axis up to 2.78
                    let pole = gains.gamma_p / (p.k * p.m);
                    if self.dt() * pole > 2.7 {
                        let need = (self.probe.epsilon * pole / 2.7 / 10.0).ceil() as usize * 10;
                        return Err(Error::config(format!(
                            "momentum filter pole {pole:.4e}/s is unstable at dt = {:.4e}; \
                             raise sim.steps_per_period to at least {need}",
                            self.dt()
                        )));
                    }
                }
            }
            (ObserverKind::OpticalSwitch { .. }, true) | (ObserverKind::MagLevAdaptive { .. }, false) => {
                return Err(Error::config(format!(
                    "observer.kind does not fit model.kind = {}",
                    self.plant.kind()
                )))
            }
            (ObserverKind::Electrical { gamma, .. }, _) | (ObserverKind::OpticalSwitch { gamma, .. }, _)
                if !(*gamma > 0.0) =>
            {
                return Err(Error::config("observer.gamma must be positive"))
            }
            _ => {}
        }
        match (&self.control, maglev) {
            (ControlConfig::IdaPbc { kp, alpha, .. }, true) => {
                if !(*kp > 0.0 && *alpha > 0.0) {
                    return Err(Error::config("control.kp and control.alpha must be positive"));
                }
            }
            (ControlConfig::Backstepping { gains, .. }, true) => {
                if !(gains.gamma1 > 0.0 && gains.gamma2 > 0.0 && gains.ki > 0.0) {
                    return Err(Error::config("backstepping gains must be positive"));
                }
            }
            (ControlConfig::IdaPbc { .. } | ControlConfig::Backstepping { .. }, false) => {
                return Err(Error::config("this controller needs model.kind = maglev"))
            }
            _ => {}
        }
        let observer_feedback = matches!(
            self.control,
            ControlConfig::IdaPbc { feedback: Feedback::Observer, .. }
                | ControlConfig::Backstepping { feedback: Feedback::Observer, .. }
        );
        if observer_feedback && !matches!(self.observer.kind, ObserverKind::MagLevAdaptive { .. }) {
            return Err(Error::config(
                "control.feedback = observer needs observer.kind = maglev_adaptive",
            ));
        }
        if let Some(x0) = &self.init {
            if x0.len() != 3 {
                return Err(Error::config("initial state must have three entries"));
            }
        }
        if self.output.every == 0 {
            return Err(Error::config("output.every must be positive"));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an identical scenario.
    pub fn to_config_string(&self) -> String {
        let mut o = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(o, "{k} = {v}");
        };
        if let Some(p) = &self.preset {
            kv("model.preset", p.clone());
        }
        kv("model.kind", self.plant.kind().into());
        match &self.plant {
            PlantConfig::MagLev(p) => {
                kv("model.m", fmt(p.m));
                kv("model.gravity", fmt(p.gravity));
                kv("model.resistance", fmt(p.resistance));
                kv("model.c", fmt(p.c));
                kv("model.k", fmt(p.k));
            }
            PlantConfig::OpticalSwitch(p) => {
                kv("model.m", fmt(p.m));
                kv("model.a1", fmt(p.a1));
                kv("model.a2", fmt(p.a2));
                kv("model.c0", fmt(p.c0));
                kv("model.c1", fmt(p.c1));
                kv("model.r_c", fmt(p.r_c));
                kv("model.r_m", fmt(p.r_m));
            }
        }
        kv("model.guard_margin", fmt(self.guard_margin));

        kv("probe.epsilon", fmt(self.probe.epsilon));
        kv("probe.scaling", fmt(self.probe.scaling));
        match &self.probe.shape {
            ShapeConfig::Sinusoid => kv("probe.shape", "sinusoid".into()),
            ShapeConfig::Square => kv("probe.shape", "square".into()),
            ShapeConfig::Tabulated { path, .. } => {
                kv("probe.shape", "tabulated".into());
                kv("probe.table", path.clone());
            }
        }

        kv("sim.steps_per_period", self.sim.steps_per_period.to_string());
        kv("sim.horizon", fmt(self.sim.horizon));
        kv("sim.t_settle", fmt(self.sim.t_settle));
        kv("sim.seed", self.sim.seed.to_string());

        kv("noise.power", fmt(self.noise.power));
        kv("noise.sample_time", fmt(self.noise.sample_time));
        kv(
            "noise.convention",
            match self.noise.convention {
                NoiseConvention::PowerPerSample => "power_per_sample",
                NoiseConvention::Variance => "variance",
            }
            .into(),
        );

        kv("drem.gamma", fmt(self.drem.gamma));
        kv(
            "drem.units",
            match self.drem.units {
                GainUnits::Physical => "physical",
                GainUnits::Normalized => "normalized",
            }
            .into(),
        );
        kv("drem.delay", self.drem.delay_periods.to_string());
        kv("drem.yv0", fmt(self.drem.yv0));
        kv("baseline.periods", self.baseline_periods.to_string());

        let ob = &self.observer;
        match &ob.kind {
            ObserverKind::None => kv("observer.kind", "none".into()),
            ObserverKind::Electrical { gamma, x0 } => {
                kv("observer.kind", "electrical".into());
                kv("observer.gamma", fmt(*gamma));
                kv("observer.x0", fmt(*x0));
            }
            ObserverKind::MagLevAdaptive {
                gains,
                law,
                r_hat0,
                lambda0,
                luenberger,
            } => {
                kv("observer.kind", "maglev_adaptive".into());
                kv("observer.gamma_r", fmt(gains.gamma_r));
                kv("observer.gamma_lambda", fmt(gains.gamma_lambda));
                kv("observer.gamma_p", fmt(gains.gamma_p));
                kv("observer.a", fmt(gains.a));
                kv(
                    "observer.flux_law",
                    match law {
                        FluxLaw::Gradient => "gradient",
                        FluxLaw::Verbatim => "verbatim",
                    }
                    .into(),
                );
                kv("observer.r_hat0", fmt(*r_hat0));
                kv("observer.lambda0", fmt(*lambda0));
                match luenberger {
                    Some((g, form)) => {
                        kv("observer.luenberger", "true".into());
                        kv("observer.l1", fmt(g.l1));
                        kv("observer.l2", fmt(g.l2));
                        kv(
                            "observer.luenberger_form",
                            match form {
                                LuenbergerForm::Corrected => "corrected",
                                LuenbergerForm::Verbatim => "verbatim",
                            }
                            .into(),
                        );
                    }
                    None => kv("observer.luenberger", "false".into()),
                }
            }
            ObserverKind::OpticalSwitch { gamma, charge0 } => {
                kv("observer.kind", "optical_switch".into());
                kv("observer.gamma", fmt(*gamma));
                kv("observer.charge0", fmt(*charge0));
            }
        }
        kv(
            "observer.yv_source",
            match ob.yv_source {
                YvSource::Filter => "filter",
                YvSource::Baseline => "baseline",
                YvSource::Truth => "truth",
            }
            .into(),
        );
        kv("observer.floor_fraction", fmt(ob.floor_fraction));
        kv("observer.dwell", fmt(ob.dwell));

        let feedback = |f: &Feedback| match f {
            Feedback::State => "state".to_string(),
            Feedback::Observer => "observer".to_string(),
        };
        match &self.control {
            ControlConfig::OpenLoop { u } => {
                kv("control.kind", "open_loop".into());
                kv("control.u", fmt(*u));
            }
            ControlConfig::Feedforward => kv("control.kind", "feedforward".into()),
            ControlConfig::IdaPbc {
                kp,
                alpha,
                term,
                feedback: fb,
            } => {
                kv("control.kind", "ida_pbc".into());
                kv("control.kp", fmt(*kp));
                kv("control.alpha", fmt(*alpha));
                kv(
                    "control.resistance_term",
                    match term {
                        ResistanceTerm::Compensate => "compensate",
                        ResistanceTerm::Verbatim => "verbatim",
                    }
                    .into(),
                );
                kv("control.feedback", feedback(fb));
            }
            ControlConfig::Backstepping { gains, feedback: fb } => {
                kv("control.kind", "backstepping".into());
                kv("control.gamma1", fmt(gains.gamma1));
                kv("control.gamma2", fmt(gains.gamma2));
                kv("control.ki", fmt(gains.ki));
                kv("control.feedback", feedback(fb));
            }
        }

        match self.reference {
            Reference::Constant(v) => {
                kv("reference.kind", "constant".into());
                kv("reference.value", fmt(v));
            }
            Reference::Pulse {
                low,
                high,
                period,
                ramp,
            } => {
                kv("reference.kind", "pulse".into());
                kv("reference.low", fmt(low));
                kv("reference.high", fmt(high));
                kv("reference.period", fmt(period));
                kv("reference.ramp", fmt(ramp));
            }
            Reference::Sine {
                mean,
                amplitude,
                frequency,
            } => {
                kv("reference.kind", "sine".into());
                kv("reference.mean", fmt(mean));
                kv("reference.amplitude", fmt(amplitude));
                kv("reference.frequency", fmt(frequency));
            }
        }

        if let Some(x0) = &self.init {
            let names = match self.plant {
                PlantConfig::MagLev(_) => ["init.lambda", "init.q", "init.p"],
                PlantConfig::OpticalSwitch(_) => ["init.charge", "init.q", "init.p"],
            };
            for (n, v) in names.iter().zip(x0) {
                kv(n, fmt(*v));
            }
        }

        kv("output.every", self.output.every.to_string());
        if let Some(cols) = &self.output.columns {
            kv("output.columns", cols.join(","));
        }
        o
    }
}

/// Shortest representation that reads back to the same `f64`.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

type Entries = BTreeMap<String, (String, usize)>;

fn parse_entries(text: &str) -> Result<Entries> {
    let mut out = Entries::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected `key = value`, found `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || !k.contains('.') {
            return Err(Error::Parse {
                line: line_no,
                message: format!("key `{k}` must have the form `section.name`"),
            });
        }
        if v.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("key `{k}` has no value"),
            });
        }
        if let Some((_, prev)) = out.insert(k.to_string(), (v.to_string(), line_no)) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{k}` (first set on line {prev})"),
            });
        }
    }
    Ok(out)
}

/// Parses a number, accepting a single `a/b` quotient.
pub fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            Some(a / b)
        }
        None => s.parse().ok(),
    }
}

struct Reader {
    entries: Entries,
    base_dir: PathBuf,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_number(&v).map(Some).ok_or_else(|| Error::Parse {
                line,
                message: format!("`{key}`: expected a number, found `{v}`"),
            }),
        }
    }

    fn required_f64(&mut self, key: &str) -> Result<f64> {
        self.opt_f64(key)?
            .ok_or_else(|| Error::config(format!("missing required key `{key}`")))
    }

    fn int<N: std::str::FromStr>(&mut self, key: &str, default: N) -> Result<N> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("`{key}`: expected a non-negative integer, found `{v}`"),
            }),
        }
    }

    fn word<E: Copy>(&mut self, key: &str, default: E, options: &[(&str, E)]) -> Result<E> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => options
                .iter()
                .find(|(name, _)| *name == v)
                .map(|(_, e)| *e)
                .ok_or_else(|| Error::Parse {
                    line,
                    message: format!(
                        "`{key}`: unknown value `{v}`; expected one of {}",
                        options.iter().map(|o| o.0).collect::<Vec<_>>().join(", ")
                    ),
                }),
        }
    }

    fn kind(&mut self, key: &str, default: Option<&str>, options: &[&str]) -> Result<String> {
        match self.take(key) {
            None => default
                .map(str::to_string)
                .ok_or_else(|| Error::config(format!("missing required key `{key}`"))),
            Some((v, line)) => {
                if options.contains(&v.as_str()) {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        line,
                        message: format!(
                            "`{key}`: unknown value `{v}`; expected one of {}",
                            options.join(", ")
                        ),
                    })
                }
            }
        }
    }

    fn finish(self) -> Result<()> {
        let mut rest: Vec<_> = self.entries.into_iter().collect();
        rest.sort_by_key(|(_, (_, line))| *line);
        match rest.first() {
            None => Ok(()),
            Some((k, (_, line))) => Err(Error::Parse {
                line: *line,
                message: format!("unknown key `{k}`"),
            }),
        }
    }

    fn scenario(&mut self) -> Result<Scenario> {
        let preset = match self.take("model.preset") {
            None => None,
            Some((name, line)) => Some(Scenario::preset(&name).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?),
        };
        let preset_kind = preset.as_ref().map(|p| p.plant.kind());
        let kind = self.kind("model.kind", preset_kind, &["maglev", "optical_switch"])?;
        let mut s = match preset {
            Some(p) if p.plant.kind() == kind => p,
            Some(_) => {
                return Err(Error::config("model.kind contradicts model.preset"));
            }
            None => {
                let mut base = Scenario::preset(if kind == "maglev" { "maglev-sim" } else { "optsw-sim" })?;
                base.preset = None;
                base
            }
        };

        s.plant = match s.plant {
            PlantConfig::MagLev(d) => PlantConfig::MagLev(MagLevParams {
                m: self.f64("model.m", d.m)?,
                gravity: self.f64("model.gravity", d.gravity)?,
                resistance: self.f64("model.resistance", d.resistance)?,
                c: self.f64("model.c", d.c)?,
                k: self.f64("model.k", d.k)?,
            }),
            PlantConfig::OpticalSwitch(d) => PlantConfig::OpticalSwitch(OpticalSwitchParams {
                m: self.f64("model.m", d.m)?,
                a1: self.f64("model.a1", d.a1)?,
                a2: self.f64("model.a2", d.a2)?,
                c0: self.f64("model.c0", d.c0)?,
                c1: self.f64("model.c1", d.c1)?,
                r_c: self.f64("model.r_c", d.r_c)?,
                r_m: self.f64("model.r_m", d.r_m)?,
            }),
        };
        s.guard_margin = self.f64("model.guard_margin", s.guard_margin)?;

        s.probe.epsilon = self.required_f64("probe.epsilon")?;
        s.probe.scaling = self.f64("probe.scaling", s.probe.scaling)?;
        let shape_default = match s.probe.shape {
            ShapeConfig::Sinusoid => "sinusoid",
            ShapeConfig::Square => "square",
            ShapeConfig::Tabulated { .. } => "tabulated",
        };
        let shape = self.kind("probe.shape", Some(shape_default), &["sinusoid", "square", "tabulated"])?;
        s.probe.shape = match shape.as_str() {
            "sinusoid" => ShapeConfig::Sinusoid,
            "square" => ShapeConfig::Square,
            _ => {
                let (path, line) = self
                    .take("probe.table")
                    .ok_or_else(|| Error::config("probe.shape = tabulated needs `probe.table`"))?;
                let full = self.base_dir.join(&path);
                let wave = TabulatedWave::load(&full).map_err(|e| match e {
                    Error::Parse { line: l, message } => Error::Parse {
                        line: l,
                        message: format!("{}: {message}", full.display()),
                    },
                    other => Error::Parse {
                        line,
                        message: format!("probe.table `{}`: {other}", full.display()),
                    },
                })?;
                ShapeConfig::Tabulated { path, wave }
            }
        };

        s.sim.steps_per_period = self.int("sim.steps_per_period", s.sim.steps_per_period)?;
        s.sim.horizon = self.f64("sim.horizon", s.sim.horizon)?;
        s.sim.t_settle = self.f64("sim.t_settle", s.sim.t_settle)?;
        s.sim.seed = self.int("sim.seed", s.sim.seed)?;

        s.noise.power = self.f64("noise.power", s.noise.power)?;
        s.noise.sample_time = self.f64("noise.sample_time", s.noise.sample_time)?;
        s.noise.convention = self.word(
            "noise.convention",
            s.noise.convention,
            &[
                ("power_per_sample", NoiseConvention::PowerPerSample),
                ("variance", NoiseConvention::Variance),
            ],
        )?;
        s.noise.seed = s.sim.seed;

        s.drem.gamma = self.f64("drem.gamma", s.drem.gamma)?;
        s.drem.units = self.word(
            "drem.units",
            s.drem.units,
            &[("physical", GainUnits::Physical), ("normalized", GainUnits::Normalized)],
        )?;
        s.drem.delay_periods = self.int("drem.delay", s.drem.delay_periods)?;
        s.drem.yv0 = self.f64("drem.yv0", s.drem.yv0)?;
        s.baseline_periods = self.int("baseline.periods", s.baseline_periods)?;

        self.observer(&mut s)?;
        self.control(&mut s)?;
        self.reference(&mut s)?;

        let names = match s.plant {
            PlantConfig::MagLev(_) => ["init.lambda", "init.q", "init.p"],
            PlantConfig::OpticalSwitch(_) => ["init.charge", "init.q", "init.p"],
        };
        let given: Vec<Option<f64>> = names
            .iter()
            .map(|n| self.opt_f64(n))
            .collect::<Result<_>>()?;
        if given.iter().any(Option::is_some) {
            if given.iter().any(Option::is_none) {
                return Err(Error::config(format!(
                    "set all of {} or none",
                    names.join(", ")
                )));
            }
            s.init = Some(given.into_iter().flatten().collect());
        }

        s.output.every = self.int("output.every", s.output.every)?;
        if let Some((cols, _)) = self.take("output.columns") {
            s.output.columns = Some(cols.split(',').map(|c| c.trim().to_string()).collect());
        }
        Ok(s)
    }

    fn observer(&mut self, s: &mut Scenario) -> Result<()> {
        let maglev = match s.plant {
            PlantConfig::MagLev(p) => Some(p),
            PlantConfig::OpticalSwitch(_) => None,
        };
        let current = match s.observer.kind {
            ObserverKind::None => "none",
            ObserverKind::Electrical { .. } => "electrical",
            ObserverKind::MagLevAdaptive { .. } => "maglev_adaptive",
            ObserverKind::OpticalSwitch { .. } => "optical_switch",
        };
        let kind = self.kind(
            "observer.kind",
            Some(current),
            &["none", "electrical", "maglev_adaptive", "optical_switch"],
        )?;
        s.observer.kind = match kind.as_str() {
            "none" => ObserverKind::None,
            "electrical" => {
                let (g0, x0) = match s.observer.kind {
                    ObserverKind::Electrical { gamma, x0 } => (gamma, x0),
                    _ => (50.0, 0.0),
                };
                ObserverKind::Electrical {
                    gamma: self.f64("observer.gamma", g0)?,
                    x0: self.f64("observer.x0", x0)?,
                }
            }
            "maglev_adaptive" => {
                let params = maglev.unwrap_or_else(MagLevParams::simulation);
                let (g, law, r0, l0, lu) = match &s.observer.kind {
                    ObserverKind::MagLevAdaptive {
                        gains,
                        law,
                        r_hat0,
                        lambda0,
                        luenberger,
                    } => (*gains, *law, *r_hat0, *lambda0, *luenberger),
                    _ => (
                        MagLevObserverGains {
                            gamma_r: 500.0,
                            gamma_lambda: 8000.0,
                            gamma_p: 30.0,
                            a: 500.0,
                        },
                        FluxLaw::Gradient,
                        2.0,
                        0.0,
                        None,
                    ),
                };
                let gains = MagLevObserverGains {
                    gamma_r: self.f64("observer.gamma_r", g.gamma_r)?,
                    gamma_lambda: self.f64("observer.gamma_lambda", g.gamma_lambda)?,
                    gamma_p: self.f64("observer.gamma_p", g.gamma_p)?,
                    a: self.f64("observer.a", g.a)?,
                };
                let law = self.word(
                    "observer.flux_law",
                    law,
                    &[("gradient", FluxLaw::Gradient), ("verbatim", FluxLaw::Verbatim)],
                )?;
                let r_hat0 = self.f64("observer.r_hat0", r0)?;
                let lambda0 = self.f64("observer.lambda0", l0)?;
                let on = self.word("observer.luenberger", lu.is_some(), &[("true", true), ("false", false)])?;
                let luenberger = if on {
                    let (lg, form) = lu.unwrap_or((
                        LuenbergerGains::double_pole(200.0, &params),
                        LuenbergerForm::Corrected,
                    ));
                    let lg = LuenbergerGains {
                        l1: self.f64("observer.l1", lg.l1)?,
                        l2: self.f64("observer.l2", lg.l2)?,
                    };
                    let form = self.word(
                        "observer.luenberger_form",
                        form,
                        &[("corrected", LuenbergerForm::Corrected), ("verbatim", LuenbergerForm::Verbatim)],
                    )?;
                    Some((lg, form))
                } else {
                    None
                };
                ObserverKind::MagLevAdaptive {
                    gains,
                    law,
                    r_hat0,
                    lambda0,
                    luenberger,
                }
            }
            _ => {
                let (g0, c0) = match s.observer.kind {
                    ObserverKind::OpticalSwitch { gamma, charge0 } => (gamma, charge0),
                    _ => (40.0, 0.0),
                };
                ObserverKind::OpticalSwitch {
                    gamma: self.f64("observer.gamma", g0)?,
                    charge0: self.f64("observer.charge0", c0)?,
                }
            }
        };
        s.observer.yv_source = self.word(
            "observer.yv_source",
            s.observer.yv_source,
            &[
                ("filter", YvSource::Filter),
                ("baseline", YvSource::Baseline),
                ("truth", YvSource::Truth),
            ],
        )?;
        s.observer.floor_fraction = self.f64("observer.floor_fraction", s.observer.floor_fraction)?;
        s.observer.dwell = self.f64("observer.dwell", s.observer.dwell)?;
        Ok(())
    }

    fn control(&mut self, s: &mut Scenario) -> Result<()> {
        let current = match s.control {
            ControlConfig::OpenLoop { .. } => "open_loop",
            ControlConfig::Feedforward => "feedforward",
            ControlConfig::IdaPbc { .. } => "ida_pbc",
            ControlConfig::Backstepping { .. } => "backstepping",
        };
        let kind = self.kind(
            "control.kind",
            Some(current),
            &["open_loop", "feedforward", "ida_pbc", "backstepping"],
        )?;
        let fb_opts = [("state", Feedback::State), ("observer", Feedback::Observer)];
        s.control = match kind.as_str() {
            "open_loop" => {
                let u0 = match s.control {
                    ControlConfig::OpenLoop { u } => u,
                    _ => 0.0,
                };
                ControlConfig::OpenLoop {
                    u: self.f64("control.u", u0)?,
                }
            }
            "feedforward" => ControlConfig::Feedforward,
            "ida_pbc" => {
                let (kp, alpha, term, fb) = match s.control {
                    ControlConfig::IdaPbc {
                        kp,
                        alpha,
                        term,
                        feedback,
                    } => (kp, alpha, term, feedback),
                    _ => (200.7, 33.4, ResistanceTerm::Compensate, Feedback::State),
                };
                ControlConfig::IdaPbc {
                    kp: self.f64("control.kp", kp)?,
                    alpha: self.f64("control.alpha", alpha)?,
                    term: self.word(
                        "control.resistance_term",
                        term,
                        &[
                            ("compensate", ResistanceTerm::Compensate),
                            ("verbatim", ResistanceTerm::Verbatim),
                        ],
                    )?,
                    feedback: self.word("control.feedback", fb, &fb_opts)?,
                }
            }
            _ => {
                let (g, fb) = match s.control {
                    ControlConfig::Backstepping { gains, feedback } => (gains, feedback),
                    _ => (
                        BackstepGains {
                            gamma1: 340.0,
                            gamma2: 3.0,
                            ki: 1.0,
                        },
                        Feedback::State,
                    ),
                };
                ControlConfig::Backstepping {
                    gains: BackstepGains {
                        gamma1: self.f64("control.gamma1", g.gamma1)?,
                        gamma2: self.f64("control.gamma2", g.gamma2)?,
                        ki: self.f64("control.ki", g.ki)?,
                    },
                    feedback: self.word("control.feedback", fb, &fb_opts)?,
                }
            }
        };
        Ok(())
    }

    fn reference(&mut self, s: &mut Scenario) -> Result<()> {
        let current = match s.reference {
            Reference::Constant(_) => "constant",
            Reference::Pulse { .. } => "pulse",
            Reference::Sine { .. } => "sine",
        };
        let kind = self.kind("reference.kind", Some(current), &["constant", "pulse", "sine"])?;
        s.reference = match kind.as_str() {
            "constant" => {
                let v = match s.reference {
                    Reference::Constant(v) => v,
                    _ => 0.0,
                };
                Reference::Constant(self.f64("reference.value", v)?)
            }
            "pulse" => {
                let (lo, hi, per, ramp) = match s.reference {
                    Reference::Pulse {
                        low,
                        high,
                        period,
                        ramp,
                    } => (low, high, period, ramp),
                    _ => (0.0, 2e-3, 4.0, 5e-3),
                };
                Reference::Pulse {
                    low: self.f64("reference.low", lo)?,
                    high: self.f64("reference.high", hi)?,
                    period: self.f64("reference.period", per)?,
                    ramp: self.f64("reference.ramp", ramp)?,
                }
            }
            _ => {
                let (m, a, f) = match s.reference {
                    Reference::Sine {
                        mean,
                        amplitude,
                        frequency,
                    } => (mean, amplitude, frequency),
                    _ => (0.0, 1e-3, 0.2),
                };
                Reference::Sine {
                    mean: self.f64("reference.mean", m)?,
                    amplitude: self.f64("reference.amplitude", a)?,
                    frequency: self.f64("reference.frequency", f)?,
                }
            }
        };
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIM: &str = "model.preset = maglev-sim\nprobe.epsilon = 0.003333333333\n";

    #[test]
    fn coarse_grid_for_momentum_filter_is_rejected() {
        let err = Scenario::parse("model.preset = maglev-sim\nprobe.epsilon = 1/150\n").unwrap_err();
        assert!(err.to_string().contains("sim.steps_per_period to at least 140"), "{err}");
        let ok = "model.preset = maglev-sim\nprobe.epsilon = 1/150\nsim.steps_per_period = 140\n";
        assert!(Scenario::parse(ok).is_ok());
    }

    #[test]
    fn preset_with_epsilon_parses() {
        let s = Scenario::parse(SIM).unwrap();
        assert_eq!(s.plant, PlantConfig::MagLev(MagLevParams::simulation()));
        assert!((s.dt() - 0.003333333333 / 100.0).abs() < 1e-18);
        match s.control {
            ControlConfig::IdaPbc { kp, alpha, .. } => assert_eq!((kp, alpha), (200.7, 33.4)),
            _ => panic!("preset controller"),
        }
    }

    #[test]
    fn experiment_preset_gains() {
        let s = Scenario::parse("model.preset = maglev-exp\nprobe.epsilon = 1/33\n").unwrap();
        match s.control {
            ControlConfig::Backstepping { gains, .. } => {
                assert_eq!((gains.ki, gains.gamma1, gains.gamma2), (1.0, 340.0, 3.0))
            }
            _ => panic!("preset controller"),
        }
        assert_eq!(s.drem.delay_periods, 10);
        assert!((s.epsilon() - 1.0 / 33.0).abs() < 1e-18);
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = Scenario::parse(&format!("{SIM}\nobserver.gama_r = 5\n")).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("observer.gama_r"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn key_outside_selected_schema_is_unknown() {
        // optical-switch parameters do not exist on the maglev model
        let err = Scenario::parse(&format!("{SIM}model.a1 = 1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn missing_epsilon_is_an_error() {
        let err = Scenario::parse("model.preset = maglev-sim\n").unwrap_err();
        assert!(err.is_config() && err.to_string().contains("probe.epsilon"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = Scenario::parse("model.preset = maglev-sim\n\nprobe.epsilon 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = Scenario::parse(&format!("{SIM}sim.horizon = ten\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = Scenario::parse(&format!("{SIM}probe.epsilon = 0.1\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn step_count_must_give_ten_steps_per_period() {
        assert!(Scenario::parse(&format!("{SIM}sim.steps_per_period = 15\n")).is_err());
        assert!(Scenario::parse(&format!("{SIM}sim.steps_per_period = 20\nobserver.kind = none\n")).is_ok());
    }

    #[test]
    fn canonical_form_round_trips() {
        for text in [
            SIM.to_string(),
            "model.preset = maglev-exp\nprobe.epsilon = 1/33\nobserver.luenberger = true\n".into(),
            "model.kind = optical_switch\nprobe.epsilon = 0.005\nobserver.kind = electrical\ninit.charge = 1e-7\ninit.q = 1e-3\ninit.p = 0\n".into(),
            format!("{SIM}reference.kind = constant\nreference.value = 0.001\ncontrol.kind = open_loop\ncontrol.u = 0.2\noutput.columns = t,q\n"),
        ] {
            let a = Scenario::parse(&text).unwrap();
            let once = a.to_config_string();
            let b = Scenario::parse(&once).unwrap();
            assert_eq!(a, b);
            assert_eq!(once, b.to_config_string());
        }
    }

    #[test]
    fn overrides_replace_values() {
        let s = Scenario::parse_with(
            SIM,
            Path::new("."),
            &[("probe.epsilon".into(), "1/600".into())],
        )
        .unwrap();
        assert!((s.epsilon() - 1.0 / 600.0).abs() < 1e-18);
    }

    #[test]
    fn tabulated_probe_reads_table_relative_to_config() {
        let dir = std::env::temp_dir().join(format!("virtout-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("wave.txt"), "# one period\n0\n1\n0\n-1\n").unwrap();
        let cfg = dir.join("s.cfg");
        std::fs::write(&cfg, format!("{SIM}probe.shape = tabulated\nprobe.table = wave.txt\n")).unwrap();
        let s = Scenario::from_file(&cfg).unwrap();
        assert!(matches!(s.probe.shape, ShapeConfig::Tabulated { ref wave, .. } if wave.samples().len() == 4));
        std::fs::write(dir.join("wave.txt"), "0\n1\nx\n").unwrap();
        let err = Scenario::from_file(&cfg).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
