//! Invariant checks over a configured run, the Littlewood–Paley self-test, and the
//! passive-scalar scenarios behind the `verify`, `lp-selftest` and `losing` commands.

use crate::checkpoint::read_checkpoint;
use crate::config::{LosingScenario, LosingVelocity, RunConfig};
use crate::diagnostics::{interpolation_ratio, miao_zheng_residual, DiagnosticRecord, Monitor};
use crate::error::{Error, Result};
use crate::field3d::Field3D;
use crate::grid::{build_grid, GridRZ, Parity, ScalarFieldRZ, VelocityRZ};
use crate::losing::{
    commutator_bound_report, evolve_passive, losing_bound_report, sigma_schedule, LosingReport, LosingSchedule, PassiveConfig,
    Trajectory, VelocitySource,
};
use crate::lp::{self, BlockKind};
use crate::solver::advect::central_rate;
use crate::solver::{cache_residual, recover_velocity, Scheme, Solver, State, StreamSolver};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, measured: impl Into<String>) -> Self {
        Check { name: name.into(), status: if pass { Status::Pass } else { Status::Fail }, measured: measured.into() }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
        };
        write!(f, "{s} {}: {}", self.name, self.measured)
    }
}

pub fn all_passed(checks: &[Check]) -> bool {
    checks.iter().all(Check::passed)
}

/// Largest finite value of a record column; None when every entry is NaN.
pub fn column_max(records: &[DiagnosticRecord], f: impl Fn(&DiagnosticRecord) -> f64) -> Option<f64> {
    records.iter().map(f).filter(|v| !v.is_nan()).fold(None, |a, v| Some(a.map_or(v, |m: f64| m.max(v))))
}

fn bounded(name: &str, v: Option<f64>, limit: f64) -> Check {
    match v {
        None => Check::new(name, true, "inactive (zero data)"),
        Some(x) => Check::new(name, x <= limit, format!("{x:.6e} (limit {limit:e})")),
    }
}

fn finite(name: &str, v: Option<f64>) -> Check {
    match v {
        None => Check::new(name, true, "inactive (zero data)"),
        Some(x) => Check::new(name, x.is_finite(), format!("{x:.6e}")),
    }
}

pub const DIVERGENCE_TOL: f64 = 1e-10;
pub const ELLIPTIC_TOL: f64 = 1e-10;
pub const ENERGY_TOL: f64 = 1e-4;
pub const UPWIND_MAX_PRINCIPLE_TOL: f64 = 1e-12;
/// Recorded threshold on the central2 overshoot at run resolution.
pub const CENTRAL_OVERSHOOT_TOL: f64 = 5e-2;
/// Recorded threshold on ‖ω‖_√𝕃 growth.
pub const SQRTL_GROWTH_LIMIT: f64 = 5.0;
pub const INTERPOLATION_TOL: f64 = 1e-6;
pub const MIAO_ZHENG_TOL: f64 = 1e-2;

/// u = (a(r) sin kz, 0): the equality case of the vertical interpolation inequality.
pub fn single_mode_velocity(g: &Arc<GridRZ>, mode: usize) -> VelocityRZ {
    let k = 2.0 * PI * mode as f64 / g.lz;
    let w = 0.2 * g.r_extent;
    VelocityRZ {
        ur: ScalarFieldRZ::from_fn(g, Parity::Odd, |r, z| r * (-(r * r) / (w * w)).exp() * (k * z).sin()),
        uz: ScalarFieldRZ::zeros(g, Parity::Even),
    }
}

/// Γ and u_r/r for ψ = r e^{−a r²} sin z: Γ = e^{−a r²}(8a + 1 − 4a²r²) sin z, u_r/r = −e^{−a r²} cos z.
pub fn manufactured_gamma_ur(g: &Arc<GridRZ>, a: f64) -> (ScalarFieldRZ, ScalarFieldRZ) {
    let gamma = ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| (-a * r * r).exp() * (8.0 * a + 1.0 - 4.0 * a * a * r * r) * z.sin());
    let ur_r = ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| -(-a * r * r).exp() * z.cos());
    (gamma, ur_r)
}

/// Horizontal period of the manufactured Miao–Zheng box. Periodic images of Δ^{-1} on the
/// sin z mode decay like e^{−L/2}, about 1e-7 here.
pub const MIAO_ZHENG_BOX: f64 = 32.0;
/// Box resolution of the manufactured check in `verify`.
pub const MIAO_ZHENG_N: usize = 128;

/// Miao–Zheng residual of the manufactured pair (a = 1) on an N³ box over a meridian grid
/// Nr = 256, Nz = 64, R = 8, Lz = 2π.
pub fn miao_zheng_manufactured(n_box: usize) -> Result<f64> {
    let g = build_grid(256, 64, 8.0, 2.0 * PI)?;
    let (gamma, ur_r) = manufactured_gamma_ur(&g, 1.0);
    miao_zheng_residual(&gamma, &ur_r, n_box, MIAO_ZHENG_BOX)
}

/// Runs the configured simulation and checks every per-run invariant.
pub fn verify_run(run: &RunConfig) -> Result<(Vec<Check>, Vec<DiagnosticRecord>)> {
    let solver = Solver::new(run.solver.clone())?;
    let mut state = solver.initial_state()?;
    let dt = match solver.cfg.dt {
        Some(d) => d,
        None => solver.default_dt(&mut state),
    };
    let mut monitor = Monitor::new(run.monitors.clone(), solver.cfg.cadence);
    let mut max_div = 0.0f64;
    let probe_step = 3usize;
    let mut probe: Option<State> = None;
    let outcome = solver.run_from(state.clone(), dt, 0, |s, st, info| {
        max_div = max_div.max(info.divergence);
        if info.step == probe_step.min(info.n_steps) {
            probe = Some(st.clone());
        }
        monitor.observe(s, st, info)
    });
    let mut checks = Vec::new();
    let last = match outcome {
        Ok(s) => {
            checks.push(Check::new("run completes without abort", true, format!("t = {}", s.t)));
            Some(s)
        }
        Err(e) => {
            checks.push(Check::new("run completes without abort", false, e.to_string()));
            None
        }
    };
    let recs = &monitor.records;
    checks.push(Check::new("divergence residual every step", max_div <= DIVERGENCE_TOL, format!("{max_div:.3e} (limit {DIVERGENCE_TOL:e})")));
    if let Some(mut s) = last {
        let d = s.ensure_derived(&solver.stream).clone();
        let res = cache_residual(&solver.stream, &d);
        let res = if res.is_nan() { 0.0 } else { res };
        checks.push(Check::new("elliptic residual of final state", res <= ELLIPTIC_TOL, format!("{res:.3e} (limit {ELLIPTIC_TOL:e})")));
    }
    checks.push(bounded("energy identity residual", column_max(recs, |r| r.energy_residual.abs()), ENERGY_TOL));
    let mp = if monitor.ratio_pi_max == 0.0 { None } else { Some(monitor.ratio_pi_max) };
    match solver.cfg.scheme {
        Scheme::Upwind3 => checks.push(bounded("maximum principle for Pi (upwind3)", mp, 1.0 + UPWIND_MAX_PRINCIPLE_TOL)),
        Scheme::Central2 => checks.push(bounded("bounded Pi overshoot (central2)", mp, 1.0 + CENTRAL_OVERSHOOT_TOL)),
    }
    checks.push(finite("b_theta growth ratio", column_max(recs, |r| r.ratio_b)));
    checks.push(finite("Gamma Lorentz ratio", column_max(recs, |r| r.ratio_lorentz)));
    checks.push(finite("Gamma L2 ratio", column_max(recs, |r| r.ratio_l2)));
    let sq0 = recs.first().map(|r| r.omega_sqrtl).unwrap_or(0.0);
    let growth = if sq0 > 0.0 { column_max(recs, |r| r.omega_sqrtl / sq0) } else { None };
    checks.push(bounded("sqrt-L vorticity growth", growth, SQRTL_GROWTH_LIMIT));
    checks.push(finite("sqrt-p slope of vorticity", column_max(recs, |r| r.omega_slope.abs())));
    checks.push(finite("vertical smoothing sup (dzu_weighted)", column_max(recs, |r| r.dzu_weighted)));
    checks.push(finite("vertical smoothing sup (uq_sum)", column_max(recs, |r| r.uq_sum)));
    checks.push(finite("BKM integral", column_max(recs, |r| r.bkm_integral)));
    checks.push(finite("Calderon-Zygmund p-growth ratio", column_max(recs, |r| r.cz_ratio)));
    let single = interpolation_ratio(&single_mode_velocity(&solver.grid, 2), &run.monitors.pgrid)?;
    checks.push(Check::new(
        "interpolation ratio on a single mode",
        (single - 1.0).abs() <= INTERPOLATION_TOL,
        format!("{single:.12} (limit 1 +/- {INTERPOLATION_TOL:e})"),
    ));
    if run.monitors.box_n.is_some() {
        let n = MIAO_ZHENG_N;
        let mz = miao_zheng_manufactured(n)?;
        checks.push(Check::new("Miao-Zheng identity (manufactured)", mz <= MIAO_ZHENG_TOL, format!("{mz:.3e} at N = {n} (limit {MIAO_ZHENG_TOL:e})")));
    }
    if let Some(p) = probe {
        let replay = Solver::new(solver.cfg.clone())?;
        let mut s = replay.initial_state()?;
        for _ in 0..probe_step.min(((solver.cfg.t_end / dt) - 1e-9).ceil().max(0.0) as usize) {
            s = replay.step_forced(&s, dt, None)?.0;
        }
        checks.push(Check::new("bitwise determinism of repeated steps", s.bitwise_eq(&p), format!("t = {}", p.t)));
    }
    Ok((checks, monitor.records))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BernsteinRow {
    pub j: i32,
    /// ‖Λ Δ_j f‖₂ / (2^j ‖Δ_j f‖₂).
    pub two_sided_l2: f64,
    /// ‖Λ Δ_j f‖_∞ / (2^j ‖Δ_j f‖_∞).
    pub two_sided_inf: f64,
    /// ‖Λ Δ_j f‖_∞ / (2^{j + 3j/2} ‖Δ_j f‖₂).
    pub upper_2_inf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfTest {
    pub checks: Vec<Check>,
    pub bernstein: Vec<BernsteinRow>,
    pub commutator_l2: f64,
    pub commutator_lp: f64,
    pub product_ratio: f64,
}

pub const PARTITION_TOL: f64 = 1e-8;
pub const BONY_TOL: f64 = 1e-8;

fn rel_sup(a: &Field3D, b: &Field3D) -> f64 {
    let m = b.max_abs();
    let d = a.zip(b, |x, y| x - y).max_abs();
    if m == 0.0 {
        d
    } else {
        d / m
    }
}

/// Seeded Littlewood–Paley self-test on an N³ box of period 2π.
pub fn lp_selftest(seed: u64, n: usize) -> Result<SelfTest> {
    if !(n >= 16 && n.is_power_of_two()) {
        return Err(Error::Param(format!("self-test size {n} must be a power of two >= 16")));
    }
    let dims = [n; 3];
    let periods = [2.0 * PI; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = Field3D::zeros(dims, periods);
    let jm = lp::jmax_box(&probe);
    let mut checks = Vec::new();

    let full = lp::random_bandlimited(dims, periods, jm, &mut rng);
    let sum = lp::blocks(&full).into_iter().fold(Field3D::zeros(dims, periods), |acc, (_, b)| acc.zip(&b, |x, y| x + y));
    let pu = rel_sup(&sum, &full);
    checks.push(Check::new("partition of unity", pu <= PARTITION_TOL, format!("{pu:.3e} (limit {PARTITION_TOL:e})")));

    let mut bern = Vec::new();
    for j in 1..jm {
        let b = lp::lp_project(&full, j, BlockKind::Delta)?;
        let lb = lp::lambda_frac(&b, 1.0, lp::Direction::Full)?;
        let w = 2f64.powi(j);
        bern.push(BernsteinRow {
            j,
            two_sided_l2: lb.l2() / (w * b.l2()),
            two_sided_inf: lb.max_abs() / (w * b.max_abs()),
            upper_2_inf: lb.max_abs() / (w * 2f64.powf(1.5 * j as f64) * b.l2()),
        });
    }
    let (lo, hi) = bern.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.two_sided_l2), b.max(r.two_sided_l2)));
    checks.push(Check::new(
        "Bernstein L2 ratios inside the annulus [3/4, 8/3]",
        lo >= 0.75 - 1e-12 && hi <= 8.0 / 3.0 + 1e-12,
        format!("[{lo:.6}, {hi:.6}]"),
    ));
    let inf_ok = bern.iter().all(|r| r.two_sided_inf.is_finite() && r.two_sided_inf > 0.0 && r.upper_2_inf.is_finite());
    let (ilo, ihi) = bern.iter().fold((f64::INFINITY, 0.0f64), |(a, b), r| (a.min(r.two_sided_inf), b.max(r.two_sided_inf)));
    checks.push(Check::new("Bernstein L-infinity ratios finite and positive", inf_ok, format!("[{ilo:.6}, {ihi:.6}]")));

    let u = lp::random_bandlimited(dims, periods, jm - 2, &mut rng);
    let v = lp::random_bandlimited(dims, periods, jm - 2, &mut rng);
    let (tuv, tvu, rem) = lp::bony_decompose(&u, &v)?;
    let recon = tuv.zip(&tvu, |a, b| a + b).zip(&rem, |a, b| a + b);
    let bony = rel_sup(&recon, &u.zip(&v, |a, b| a * b));
    checks.push(Check::new("Bony reconstruction", bony <= BONY_TOL, format!("{bony:.3e} (limit {BONY_TOL:e})")));

    let w = lp::random_solenoidal(dims, periods, jm - 2, &mut rng);
    let table = commutator_bound_report(&w, &v, 0.5, 2.0);
    let (cl2, clp) = match &table {
        Ok(t) => (t.max_l2, t.max_lp),
        Err(_) => (f64::NAN, f64::NAN),
    };
    checks.push(Check::new(
        "commutator ratios finite, no structural violation",
        table.is_ok() && cl2.is_finite() && clp.is_finite(),
        match &table {
            Ok(_) => format!("max L2 ratio {cl2:.6e}, max Lp ratio {clp:.6e}"),
            Err(e) => e.to_string(),
        },
    ));
    let pr = lp::product_estimate_ratio(&u, &v, 0.5, 2.0, f64::INFINITY, 2.0, f64::INFINITY, 2.0)?;
    checks.push(Check::new("product estimate ratio finite", pr.is_finite() && pr > 0.0, format!("{pr:.6e}")));
    Ok(SelfTest { checks, bernstein: bern, commutator_l2: cl2, commutator_lp: clp, product_ratio: pr })
}

/// ρ₀ = [g(r − r₀) + g(r + r₀)] cos(m 2πz/Lz), g(x) = e^{−x²/w²}.
pub fn ring_mode(g: &Arc<GridRZ>, r0: f64, w: f64, mode: usize) -> ScalarFieldRZ {
    let k = 2.0 * PI * mode as f64 / g.lz;
    ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| {
        ((-(r - r0).powi(2) / (w * w)).exp() + (-(r + r0).powi(2) / (w * w)).exp()) * (k * z).cos()
    })
}

/// u_r = 0, u_z = amp e^{−r²/w²}.
pub fn shear_velocity(g: &Arc<GridRZ>, amp: f64, w: f64) -> VelocityRZ {
    VelocityRZ {
        ur: ScalarFieldRZ::zeros(g, Parity::Odd),
        uz: ScalarFieldRZ::from_fn(g, Parity::Even, |r, _| amp * (-(r * r) / (w * w)).exp()),
    }
}

/// Velocity samples recovered from every `*.axmh` checkpoint in a directory, sorted by time.
pub fn replay_from_dir(dir: &Path) -> Result<Vec<(f64, VelocityRZ)>> {
    let mut samples = Vec::new();
    let mut stream: Option<StreamSolver> = None;
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "axmh"))
        .collect();
    paths.sort();
    for p in paths {
        let ck = read_checkpoint(&p)?;
        let s = stream.get_or_insert_with(|| StreamSolver::new(ck.state.grid()));
        let omega = ck.state.gamma.scale_r(Parity::Odd, |r| r);
        samples.push((ck.header.t, recover_velocity(&s.solve(&omega))));
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    samples.dedup_by(|a, b| a.0 == b.0);
    if samples.is_empty() {
        return Err(Error::Param(format!("no checkpoints found in {}", dir.display())));
    }
    Ok(samples)
}

/// Evolves the scenario's passive scalar on the run grid and returns the trajectory.
pub fn losing_trajectory(run: &RunConfig, scn: &LosingScenario) -> Result<Trajectory> {
    let (source, grid, t_end) = match &scn.velocity {
        LosingVelocity::Shear { amp, width } => {
            let g = build_grid(run.solver.nr, run.solver.nz, run.solver.r_extent, run.solver.lz)?;
            (VelocitySource::Frozen(shear_velocity(&g, *amp, *width)), g, scn.t_end)
        }
        LosingVelocity::Replay { dir } => {
            let s = replay_from_dir(dir)?;
            let g = s[0].1.ur.grid.clone();
            let t_end = scn.t_end.min(s.last().unwrap().0 - s[0].0);
            if s[0].0 != 0.0 {
                return Err(Error::Param("replay must start from a t = 0 checkpoint".into()));
            }
            (VelocitySource::Replay(s), g, t_end)
        }
    };
    let rho0 = ring_mode(&grid, scn.rho_r0, scn.rho_width, scn.rho_mode);
    let mut cfg = PassiveConfig::new(rho0, source);
    cfg.diffusion = scn.diffusion;
    cfg.cfl = run.solver.cfl;
    cfg.cadence = run.solver.cadence;
    cfg.pgrid = run.monitors.pgrid.clone();
    let dt = match scn.dt {
        Some(d) => d,
        None => {
            let rate = central_rate(&cfg.velocity.at(0.0)?);
            if rate > 0.0 {
                (0.5 * cfg.cfl / rate).min(0.05)
            } else {
                0.05
            }
        }
    };
    evolve_passive(&cfg, dt, t_end)
}

/// Schedule and bound report of one scenario over an existing trajectory.
pub fn losing_report(traj: &Trajectory, scn: &LosingScenario, r_extent: f64) -> Result<(LosingSchedule, LosingReport)> {
    let series: Vec<(f64, f64)> = traj.times.iter().copied().zip(traj.v.iter().copied()).collect();
    let t_end = *traj.times.last().unwrap();
    let sched = sigma_schedule(&series, scn.sigma, scn.eps, t_end)?;
    let rep = losing_bound_report(traj, &sched, scn.p, scn.box_n, scn.box_l.unwrap_or(2.0 * r_extent))?;
    Ok((sched, rep))
}
