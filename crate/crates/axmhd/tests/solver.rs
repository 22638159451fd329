mod common;

use axmhd::solver::{cache_residual, Scheme, Solver, SolverConfig, State};
use axmhd::Error;
use common::{full_step_mms_error, order, small_config, stream_mms_error, temporal_mms_error};

#[test]
fn stream_solve_second_order() {
    let e: Vec<f64> = [32, 64, 128].iter().map(|&n| stream_mms_error(n)).collect();
    for w in e.windows(2) {
        assert!(order(w[0], w[1]) >= 1.9, "{e:?}");
    }
}

#[test]
fn full_step_second_order_in_space() {
    let e: Vec<f64> = [32, 64, 128].iter().map(|&n| full_step_mms_error(n)).collect();
    for w in e.windows(2) {
        assert!(order(w[0], w[1]) >= 1.9, "{e:?}");
    }
}

#[test]
fn step_third_order_in_time() {
    let e: Vec<f64> = [0.05, 0.025, 0.0125].iter().map(|&dt| temporal_mms_error(dt)).collect();
    for w in e.windows(2) {
        assert!(order(w[0], w[1]) >= 2.5, "{e:?}");
    }
}

#[test]
fn divergence_and_elliptic_residual_every_step() {
    let solver = Solver::new(small_config(0.5)).unwrap();
    let mut steps = 0;
    solver
        .run(solver.initial_state().unwrap(), None, |s, st, info| {
            assert!(info.divergence <= 1e-10, "step {}: {:e}", info.step, info.divergence);
            assert!(cache_residual(&s.stream, st.derived().unwrap()) <= 1e-10);
            steps += 1;
            Ok(())
        })
        .unwrap();
    assert!(steps > 2);
}

fn final_state(cfg: SolverConfig) -> State {
    let solver = Solver::new(cfg).unwrap();
    solver.run(solver.initial_state().unwrap(), None, |_, _, _| Ok(())).unwrap()
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    for scheme in [Scheme::Central2, Scheme::Upwind3] {
        let cfg = SolverConfig { scheme, ..small_config(0.3) };
        let a = final_state(cfg.clone());
        let b = final_state(cfg.clone());
        assert!(a.bitwise_eq(&b));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| final_state(cfg));
        assert!(a.bitwise_eq(&c), "result depends on the worker count");
    }
}

#[test]
fn oversized_step_is_a_cfl_error() {
    let solver = Solver::new(small_config(1.0)).unwrap();
    let s = solver.initial_state().unwrap();
    match solver.step(&s, 10.0) {
        Err(Error::Cfl { courant, suggested_dt, .. }) => {
            assert!(courant > 0.4);
            assert!(suggested_dt > 0.0 && suggested_dt < 10.0);
        }
        other => panic!("expected a CFL error, got {other:?}"),
    }
}

#[test]
fn zero_end_time_visits_only_the_initial_state() {
    let solver = Solver::new(small_config(0.0)).unwrap();
    let s0 = solver.initial_state().unwrap();
    let mut seen = Vec::new();
    let s = solver.run(s0.clone(), None, |_, _, info| {
        seen.push((info.step, info.n_steps));
        Ok(())
    });
    assert_eq!(seen, vec![(0, 0)]);
    assert!(s.unwrap().bitwise_eq(&s0));
}

#[test]
fn default_step_divides_end_time() {
    let solver = Solver::new(small_config(0.7)).unwrap();
    let mut s = solver.initial_state().unwrap();
    let dt = solver.default_dt(&mut s);
    let n = 0.7 / dt;
    assert!((n - n.round()).abs() < 1e-9 && dt <= 0.05);
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(Solver::new(SolverConfig { cfl: 1.5, ..small_config(1.0) }), Err(Error::Param(_))));
    assert!(matches!(Solver::new(SolverConfig { dt: Some(-1.0), ..small_config(1.0) }), Err(Error::Param(_))));
    assert!(matches!(Solver::new(SolverConfig { nz: 24, ..small_config(1.0) }), Err(Error::Grid(_))));
}

#[test]
fn zero_data_stays_zero() {
    let solver = Solver::new(small_config(0.2)).unwrap();
    let g = solver.grid.clone();
    let s = solver.run(State::zero(&g), Some(0.05), |_, _, _| Ok(())).unwrap();
    assert_eq!(s.gamma.max_abs(), 0.0);
    assert_eq!(s.pi.max_abs(), 0.0);
}
