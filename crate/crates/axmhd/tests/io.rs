use axmhd::checkpoint::{check_digest, decode, encode, read_checkpoint, write_checkpoint};
use axmhd::config::parse_config;
use axmhd::diagnostics::Monitor;
use axmhd::grid::{build_grid, Parity, ScalarFieldRZ};
use axmhd::records::{parse_csv, read_records, to_csv, write_records};
use axmhd::solver::{Scheme, Solver, State};
use axmhd::Error;
use proptest::prelude::*;

const MINIMAL: &str = "[grid]\nnr = 32\nnz = 32\n[time]\nt_end = 0.3\n";

fn key_of(r: Result<impl std::fmt::Debug, Error>) -> String {
    match r {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn minimal_config_takes_defaults() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!((c.solver.nr, c.solver.nz), (32, 32));
    assert_eq!(c.solver.r_extent, 4.0);
    assert_eq!(c.solver.cfl, 0.4);
    assert_eq!(c.solver.scheme, Scheme::Central2);
    assert_eq!(c.solver.dt, None);
    assert!(c.losing.is_none());
    assert_eq!(c.seed, 0);
}

#[test]
fn config_errors_name_the_key() {
    assert_eq!(key_of(parse_config("[grid]\nnr = 32\nnz = 12\n[time]\nt_end = 1.0\n")), "grid.nz");
    assert_eq!(key_of(parse_config(&format!("{MINIMAL}[scheme]\nadvection = \"weno\"\n"))), "scheme.advection");
    assert_eq!(key_of(parse_config(&format!("{MINIMAL}cfl = \"fast\"\n"))), "time.cfl");
    assert!(key_of(parse_config(&format!("{MINIMAL}[grid2]\nx = 1\n"))).contains("grid2"));
    assert!(key_of(parse_config("[grid]\nnr = 32\nnz = 32\nnq = 3\n[time]\nt_end = 1.0\n")).contains("nq"));
    assert!(key_of(parse_config("[grid]\nnr = 32\nnz = 32\n")).contains("t_end"));
}

#[test]
fn digest_ignores_output_and_tracks_physics() {
    let a = parse_config(MINIMAL).unwrap();
    let b = parse_config(&format!("{MINIMAL}[output]\ndir = \"elsewhere\"\ncheckpoint_every = 5\n")).unwrap();
    let c = parse_config(&MINIMAL.replace("0.3", "0.4")).unwrap();
    assert_eq!(a.digest(), parse_config(MINIMAL).unwrap().digest());
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), c.digest());
    assert_eq!(a.digest_hex().len(), 64);
}

fn sample_state(t: f64, vals: &[f64]) -> State {
    let g = build_grid(8, 8, 4.0, 2.0 * std::f64::consts::PI).unwrap();
    let n = g.len();
    let gamma: Vec<f64> = (0..n).map(|i| vals[i % vals.len()] * (i as f64 + 1.0)).collect();
    let pi: Vec<f64> = (0..n).map(|i| -vals[(i + 1) % vals.len()]).collect();
    State::new(t, ScalarFieldRZ::with_values(&g, Parity::Even, gamma), ScalarFieldRZ::with_values(&g, Parity::Even, pi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checkpoint_round_trip_is_bitwise(vals in prop::collection::vec(any::<f64>(), 1..16), t in any::<f64>(),
                                        step in 0usize..1_000_000, seed in any::<u64>(), monitor in prop::collection::vec(any::<f64>(), 0..40)) {
        let s = sample_state(t, &vals);
        let digest = [7u8; 32];
        let bytes = encode(&s, step, 0.01, seed, digest, &monitor);
        let ck = decode(&bytes).unwrap();
        prop_assert!(ck.state.t.to_bits() == t.to_bits());
        prop_assert!(ck.state.gamma.values.iter().zip(&s.gamma.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(ck.state.pi.values.iter().zip(&s.pi.values).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert!(ck.monitor.iter().zip(&monitor).all(|(a, b)| a.to_bits() == b.to_bits()));
        prop_assert_eq!(ck.monitor.len(), monitor.len());
        prop_assert_eq!((ck.header.step, ck.header.seed, ck.header.digest), (step, seed, digest));
        prop_assert_eq!(encode(&ck.state, step, 0.01, seed, digest, &ck.monitor), bytes);
    }
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let bytes = encode(&sample_state(0.5, &[1.0, 2.0]), 3, 0.1, 1, [0; 32], &[1.0, 2.0]);
    for cut in [0, 3, 50, bytes.len() - 1] {
        assert!(matches!(decode(&bytes[..cut]), Err(Error::Checkpoint(_))), "cut at {cut}");
    }
    let mut long = bytes.clone();
    long.push(0);
    assert!(matches!(decode(&long), Err(Error::Checkpoint(_))));
    let mut magic = bytes.clone();
    magic[0] = b'X';
    assert!(matches!(decode(&magic), Err(Error::Checkpoint(m)) if m.contains("magic")));
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(matches!(decode(&version), Err(Error::Checkpoint(m)) if m.contains("version")));
}

#[test]
fn digest_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.axmh");
    write_checkpoint(&path, &sample_state(0.0, &[1.0]), 0, 0.1, 0, [1; 32], &[]).unwrap();
    let ck = read_checkpoint(&path).unwrap();
    assert!(check_digest(&ck, &[1; 32]).is_ok());
    assert!(matches!(check_digest(&ck, &[2; 32]), Err(Error::Checkpoint(_))));
    assert!(!path.with_extension("tmp").exists());
}

fn run_records(cfg_text: &str) -> (State, Monitor) {
    let cfg = parse_config(cfg_text).unwrap();
    let solver = Solver::new(cfg.solver.clone()).unwrap();
    let mut m = Monitor::new(axmhd::diagnostics::MonitorConfig { box_n: None, ..cfg.monitors.clone() }, cfg.solver.cadence);
    let s = solver.run(solver.initial_state().unwrap(), None, |s, st, info| m.observe(s, st, info)).unwrap();
    (s, m)
}

#[test]
fn records_files_are_reproducible() {
    let text = format!("{MINIMAL}[output]\ncadence = 2\n");
    let (_, a) = run_records(&text);
    let (_, b) = run_records(&text);
    let pg = &a.cfg.pgrid;
    assert_eq!(to_csv(&a.records, pg), to_csv(&b.records, pg));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.csv");
    write_records(&path, &a.records, pg).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(to_csv(&back, pg), std::fs::read_to_string(&path).unwrap());
    write_records(&path, &[], pg).unwrap();
    assert!(read_records(&path).unwrap().is_empty());
    assert!(parse_csv("t,step\n1,2,3\n").is_err());
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let text = format!("{MINIMAL}[output]\ncadence = 2\n");
    let cfg = parse_config(&text).unwrap();
    let mcfg = axmhd::diagnostics::MonitorConfig { box_n: None, ..cfg.monitors.clone() };
    let solver = Solver::new(cfg.solver.clone()).unwrap();
    let (whole, whole_m) = run_records(&text);

    let mut s0 = solver.initial_state().unwrap();
    let dt = solver.default_dt(&mut s0);
    let stop = 5;
    let mut m = Monitor::new(mcfg.clone(), 2);
    let mut saved = None;
    solver
        .run_from(s0, dt, 0, |s, st, info| {
            m.observe(s, st, info)?;
            if info.step == stop {
                saved = Some(encode(st, stop, dt, cfg.seed, cfg.digest(), &m.snapshot()));
                return Err(Error::Param("interrupted".into()));
            }
            Ok(())
        })
        .unwrap_err();
    let mut prior: Vec<_> = m.records.clone();
    let ck = decode(&saved.unwrap()).unwrap();
    check_digest(&ck, &cfg.digest()).unwrap();
    let mut m2 = Monitor::restore(mcfg, 2, &ck.monitor).unwrap();
    let resumed = solver.run_from(ck.state, ck.header.dt, ck.header.step, |s, st, info| m2.observe(s, st, info)).unwrap();
    prior.extend(m2.records);
    assert!(resumed.bitwise_eq(&whole));
    assert_eq!(to_csv(&prior, &whole_m.cfg.pgrid), to_csv(&whole_m.records, &whole_m.cfg.pgrid));
}
