use proptest::prelude::*;
use virtout::control::{ida_pbc, BackstepGains, Backstepping, IdaPbcGains, ResistanceTerm};
use virtout::ems_models::{MagLevParams, OpticalSwitchParams};
use virtout::engine::{run_scenario, Scenario};
use virtout::ltv_ops::{Delay, SampledOperator, WindowMean};
use virtout::observers::{ElectricalObserver, StepSignals};
use virtout::signals::ProbingSpec;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #[test]
    fn probe_is_periodic(inv_eps in 10.0f64..1000.0, t in 0.0f64..10.0) {
        let eps = 1.0 / inv_eps;
        let probe = ProbingSpec::sinusoid(eps, vec![1.0]).unwrap();
        prop_assert!((probe.s_at(t + eps) - probe.s_at(t)).abs() < 1e-10);
    }

    #[test]
    fn zero_scaling_leaves_input_untouched(u in -100.0f64..100.0, t in 0.0f64..5.0) {
        let probe = ProbingSpec::sinusoid(1.0 / 300.0, vec![0.0]).unwrap();
        prop_assert_eq!(probe.inject(&[u], t).unwrap(), vec![u]);
    }

    #[test]
    fn delay_and_window_have_unit_gain(
        input in prop::collection::vec(-10.0f64..10.0, 50..400),
        steps in 1usize..40,
    ) {
        let dt = 1e-3;
        let mut delay = Delay::new(steps as f64 * dt, dt).unwrap();
        let mut window = WindowMean::new(steps as f64 * dt, dt).unwrap();
        let bound = max_abs(&input) * (1.0 + 1e-12);
        for &v in &input {
            prop_assert!(delay.step(v).abs() <= bound);
            prop_assert!(window.step(v).abs() <= bound);
        }
    }

    #[test]
    fn maglev_regression_identity(lambda in 0.01f64..0.3, q in 0.0f64..0.0049, p in -0.1f64..0.1, b in 0.0f64..3.0) {
        let model = MagLevParams::<f64>::simulation().model(b, 1e-6).unwrap();
        let x = [lambda, q, p];
        let y = model.natural_output(&x).unwrap();
        let yv = model.true_virtual_output(&x).unwrap();
        let (lhs, reg) = model.electrical_regression(&y, &yv);
        let rhs = reg.mul_vec(model.electrical(&x));
        prop_assert!((lhs[0] - rhs[0]).abs() <= 1e-12 * lhs[0].abs().max(1.0));
    }

    #[test]
    fn optical_switch_regression_identity(charge in -1e-5f64..1e-5, q in 1e-5f64..5e-3, p in -1e-3f64..1e-3, b in 0.0f64..3.0) {
        let model = OpticalSwitchParams::<f64>::default().model(b, 1e-9).unwrap();
        let x = [charge, q, p];
        let y = model.natural_output(&x).unwrap();
        let yv = model.true_virtual_output(&x).unwrap();
        let (lhs, reg) = model.electrical_regression(&y, &yv);
        let rhs = reg.mul_vec(model.electrical(&x));
        prop_assert!((lhs[0] - rhs[0]).abs() <= 1e-10 * lhs[0].abs().max(1e-12));
    }

    #[test]
    fn electrical_error_is_monotone_with_exact_virtual_output(
        lambda in 0.02f64..0.3,
        q in 0.0f64..0.004,
        offset in -0.1f64..0.1,
        gamma in 1.0f64..500.0,
    ) {
        let par = MagLevParams::<f64>::simulation();
        let model = par.model(1.0, 1e-6).unwrap();
        let x = [lambda, q, 0.0];
        let y = model.natural_output(&x).unwrap();
        let yv = model.true_virtual_output(&x).unwrap();
        // flux at rest under u = R·i
        let u = [par.resistance * y[0]];
        let mut obs = ElectricalObserver::new(vec![lambda + offset], gamma).unwrap();
        let sig = StepSignals::held(&y, &u, &yv);
        let mut err = offset.abs();
        for _ in 0..200 {
            let next = (obs.step(&model, &sig, 1e-3).unwrap()[0] - lambda).abs();
            prop_assert!(next <= err * (1.0 + 1e-12) + 1e-15);
            err = next;
        }
    }

    #[test]
    fn controllers_are_finite_on_admissible_states(
        lambda in -0.5f64..0.5,
        q in 0.0f64..0.0079,
        p in -1.0f64..1.0,
        q_star in 0.0f64..0.004,
        r in 0.0f64..20.0,
    ) {
        let sim = MagLevParams::<f64>::simulation();
        let g = IdaPbcGains { kp: 200.7, alpha: 33.4, lambda_star: sim.lambda_star(), q_star, p_star: 0.0 };
        let i = sim.current(lambda, q.min(0.0049));
        for term in [ResistanceTerm::Compensate, ResistanceTerm::Verbatim] {
            prop_assert!(ida_pbc(&g, term, sim.m, [lambda, q.min(0.0049), p], r, i).is_finite());
        }
        let exp = MagLevParams::<f64>::experiment();
        let mut b = Backstepping::new(BackstepGains { gamma1: 340.0, gamma2: 3.0, ki: 1.0 }).unwrap();
        prop_assert!(b.step(&exp, r, (q, p), q_star, 0.0, 1e-4).is_finite());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_round_trip_is_idempotent(
        inv_eps in 300.0f64..1000.0,
        gamma in 1e6f64..1e10,
        kp in 1.0f64..1e3,
        gamma_r in 1.0f64..1e4,
        power in 0.0f64..1e-8,
        seed in any::<u64>(),
    ) {
        let text = format!(
            "model.preset = maglev-sim\nprobe.epsilon = {}\ndrem.gamma = {gamma}\ncontrol.kp = {kp}\n\
             observer.gamma_r = {gamma_r}\nnoise.power = {power}\nsim.seed = {seed}\n",
            1.0 / inv_eps
        );
        let a = Scenario::parse(&text).unwrap();
        let once = a.to_config_string();
        let b = Scenario::parse(&once).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(once, b.to_config_string());
    }
}

fn short(seed: u64) -> Scenario {
    Scenario::parse(&format!(
        "model.preset = maglev-sim\nprobe.epsilon = 1/300\nsim.horizon = 0.2\nsim.t_settle = 0.1\nsim.seed = {seed}\n"
    ))
    .unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let a = run_scenario(&short(7)).unwrap().to_csv_string();
    let b = run_scenario(&short(7)).unwrap().to_csv_string();
    let c = run_scenario(&short(8)).unwrap().to_csv_string();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn written_trajectories_are_finite() {
    let traj = run_scenario(&short(3)).unwrap();
    for name in traj.names() {
        assert!(traj.channel(name).unwrap().iter().all(|v| v.is_finite()), "{name}");
    }
}
