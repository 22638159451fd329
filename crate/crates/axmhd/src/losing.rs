//! Testbed for losing estimates: a passive scalar ρ with ∂_tρ + u·∇ρ − ν∂_zzρ = f + ∂_z g,
//! Besov norms along the decaying index σ_t = σ − η∫₀^t V, and the commutator bounds.

use crate::error::{Error, Result};
use crate::field3d::{reconstruct_cartesian, Field3D};
use crate::grid::{curl_theta, wall_flux_derivative, Parity, ScalarFieldRZ, VelocityRZ};
use crate::lp::{self, BlockKind};
use crate::norms::{lp_norm, sqrtl_norm, PGrid};
use crate::solver::advect::central_rate;
use crate::solver::stepper;

/// Velocity driving the passive scalar.
#[derive(Debug, Clone)]
pub enum VelocitySource {
    Frozen(VelocityRZ),
    /// Samples (t, u) of a recorded run, linearly interpolated in time.
    Replay(Vec<(f64, VelocityRZ)>),
}

impl VelocitySource {
    pub fn at(&self, t: f64) -> Result<VelocityRZ> {
        match self {
            VelocitySource::Frozen(u) => Ok(u.clone()),
            VelocitySource::Replay(s) => {
                let first = s.first().ok_or_else(|| Error::Param("empty velocity replay".into()))?;
                let last = s.last().unwrap();
                let eps = 1e-12 * (1.0 + last.0.abs());
                if t < first.0 - eps || t > last.0 + eps {
                    return Err(Error::Param(format!("t = {t} outside replay window [{}, {}]", first.0, last.0)));
                }
                if s.len() == 1 {
                    return Ok(first.1.clone());
                }
                let k = s.partition_point(|x| x.0 <= t).clamp(1, s.len() - 1);
                let (t0, u0) = (&s[k - 1].0, &s[k - 1].1);
                let (t1, u1) = (&s[k].0, &s[k].1);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                let mix = |a: &ScalarFieldRZ, b: &ScalarFieldRZ| a.zip(b, a.parity, |x, y| (1.0 - w) * x + w * y);
                Ok(VelocityRZ { ur: mix(&u0.ur, &u1.ur), uz: mix(&u0.uz, &u1.uz) })
            }
        }
    }
}

pub type SourceFn = Box<dyn Fn(f64) -> ScalarFieldRZ + Sync>;

pub struct PassiveConfig {
    pub rho0: ScalarFieldRZ,
    pub f: Option<SourceFn>,
    pub g: Option<SourceFn>,
    pub velocity: VelocitySource,
    /// Vertical diffusion −∂_zz (on for the transport-diffusion case).
    pub diffusion: bool,
    pub cfl: f64,
    pub cadence: usize,
    pub pgrid: PGrid,
}

impl PassiveConfig {
    pub fn new(rho0: ScalarFieldRZ, velocity: VelocitySource) -> Self {
        PassiveConfig { rho0, f: None, g: None, velocity, diffusion: false, cfl: 0.4, cadence: 10, pgrid: PGrid::default() }
    }
}

/// Snapshots at cadence together with the velocity functionals entering V(t) and U(t).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub rho: Vec<ScalarFieldRZ>,
    pub f: Vec<Option<ScalarFieldRZ>>,
    pub g: Vec<Option<ScalarFieldRZ>>,
    /// V(t) = 1 + ‖ω(t)‖_√𝕃.
    pub v: Vec<f64>,
    /// ‖∂_z u‖²_{L^q}/q^{3/4} per q in the PGrid.
    pub dzu_weighted: Vec<Vec<f64>>,
    /// ‖u_r/r‖²_∞.
    pub ur_r_sq: Vec<f64>,
}

/// −(1/r)∂_r(r u_r ρ) − ∂_z(u_z ρ).
pub fn flux_tendency(rho: &ScalarFieldRZ, u: &VelocityRZ) -> Vec<f64> {
    let fr = u.ur.zip(rho, Parity::Odd, |a, b| a * b);
    let fz = u.uz.zip(rho, Parity::Even, |a, b| a * b);
    let a = wall_flux_derivative(&fr);
    let b = fz.dz();
    a.values.iter().zip(&b.values).map(|(x, y)| -(x + y)).collect()
}

fn magnitude(a: &ScalarFieldRZ, b: &ScalarFieldRZ) -> ScalarFieldRZ {
    a.zip(b, Parity::Even, |x, y| x.hypot(y))
}

fn velocity_functionals(u: &VelocityRZ, pgrid: &PGrid) -> Result<(f64, Vec<f64>, f64)> {
    let omega = curl_theta(u);
    let v = 1.0 + sqrtl_norm(&omega, pgrid);
    let dz = magnitude(&u.ur.dz(), &u.uz.dz());
    let w = pgrid.ps().iter().map(|&q| lp_norm(&dz, q).map(|n| n * n / q.powf(0.75))).collect::<Result<_>>()?;
    let urr = u.ur.scale_r(Parity::Even, |r| 1.0 / r).max_abs();
    Ok((v, w, urr * urr))
}

/// Evolves ρ to T with step dt (the last step is shortened to land on T).
pub fn evolve_passive(cfg: &PassiveConfig, dt: f64, t_end: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Param(format!("dt = {dt}, T = {t_end}")));
    }
    let g = cfg.rho0.grid.clone();
    let n_steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if n_steps == 0 { dt } else { t_end / n_steps as f64 };
    let mut traj = Trajectory { times: vec![], rho: vec![], f: vec![], g: vec![], v: vec![], dzu_weighted: vec![], ur_r_sq: vec![] };
    let mut rho = cfg.rho0.clone();
    let record = |t: f64, rho: &ScalarFieldRZ, traj: &mut Trajectory| -> Result<()> {
        let u = cfg.velocity.at(t)?;
        let (v, w, a) = velocity_functionals(&u, &cfg.pgrid)?;
        traj.times.push(t);
        traj.rho.push(rho.clone());
        traj.f.push(cfg.f.as_ref().map(|f| f(t)));
        traj.g.push(cfg.g.as_ref().map(|g| g(t)));
        traj.v.push(v);
        traj.dzu_weighted.push(w);
        traj.ur_r_sq.push(a);
        Ok(())
    };
    record(0.0, &rho, &mut traj)?;
    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * h;
        let y = vec![rho.values.clone()];
        let out = stepper::step(&g, &y, &[cfg.diffusion], t0, h, |t, v| {
            let u = cfg.velocity.at(t)?;
            let c = central_rate(&u) * h;
            if c > cfg.cfl {
                return Err(Error::Cfl { courant: c, safety: cfg.cfl, suggested_dt: cfg.cfl * h / c });
            }
            let q = ScalarFieldRZ::with_values(&g, Parity::Even, v[0].clone());
            let mut d = flux_tendency(&q, &u);
            if let Some(f) = &cfg.f {
                d.iter_mut().zip(&f(t).values).for_each(|(a, b)| *a += b);
            }
            if let Some(gf) = &cfg.g {
                d.iter_mut().zip(&gf(t).dz().values).for_each(|(a, b)| *a += b);
            }
            Ok::<_, Error>(vec![d])
        })?;
        rho = ScalarFieldRZ::with_values(&g, Parity::Even, out.into_iter().next().unwrap());
        let t = step as f64 * h;
        if !rho.is_finite() {
            return Err(Error::BlowUp { t, report: format!("passive scalar non-finite; max|ρ₀| = {:e}", cfg.rho0.max_abs()) });
        }
        if step % cfg.cadence.max(1) == 0 || step == n_steps {
            record(t, &rho, &mut traj)?;
        }
    }
    Ok(traj)
}

/// Cumulative trapezoid integrals at the sample times.
pub fn cumulative_trapezoid(t: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    for i in 0..t.len() {
        if i > 0 {
            acc += 0.5 * (t[i] - t[i - 1]) * (f[i] + f[i - 1]);
        }
        out.push(acc);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosingSchedule {
    pub sigma: f64,
    pub eps: f64,
    pub t_end: f64,
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    /// ∫₀^t V at the sample times.
    pub v_integral: Vec<f64>,
    pub eta: f64,
}

impl LosingSchedule {
    pub fn sigma_at_sample(&self, i: usize) -> f64 {
        self.sigma - self.eta * self.v_integral[i]
    }

    /// σ_t with V linearly interpolated between samples.
    pub fn sigma_at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= ts[0] {
            return self.sigma;
        }
        let k = ts.partition_point(|&x| x <= t).min(ts.len() - 1).max(1);
        let (t0, t1) = (ts[k - 1], ts[k]);
        let s = (t - t0).min(t1 - t0);
        let w = if t1 > t0 { s / (t1 - t0) } else { 0.0 };
        let vt = self.v[k - 1] + w * (self.v[k] - self.v[k - 1]);
        let i = self.v_integral[k - 1] + 0.5 * s * (self.v[k - 1] + vt);
        self.sigma - self.eta * i
    }

    pub fn sigma_end(&self) -> f64 {
        self.sigma_at_sample(self.times.len() - 1)
    }
}

/// Schedule from V samples (t_i, V_i) covering [0, T].
pub fn sigma_schedule(v_series: &[(f64, f64)], sigma: f64, eps: f64, t_end: f64) -> Result<LosingSchedule> {
    if !(sigma > -1.0 && sigma < 1.0) {
        return Err(Error::Param(format!("σ = {sigma} outside (−1, 1)")));
    }
    if !(eps >= 0.0) || sigma - eps <= -1.0 {
        return Err(Error::Param(format!("loss ε = {eps} must satisfy 0 ≤ ε < σ + 1 = {}", sigma + 1.0)));
    }
    if v_series.is_empty() || v_series[0].0 != 0.0 {
        return Err(Error::Param("V series must start at t = 0".into()));
    }
    if v_series.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Param("V series times must increase".into()));
    }
    let last = v_series.last().unwrap().0;
    if (last - t_end).abs() > 1e-12 * (1.0 + t_end) {
        return Err(Error::Param(format!("V series ends at {last}, expected T = {t_end}")));
    }
    if v_series.iter().any(|x| !(x.1 >= 1.0) || !x.1.is_finite()) {
        return Err(Error::Param("V(t) = 1 + ‖ω‖_√𝕃 must be finite and ≥ 1".into()));
    }
    let times: Vec<f64> = v_series.iter().map(|x| x.0).collect();
    let v: Vec<f64> = v_series.iter().map(|x| x.1).collect();
    let v_integral = cumulative_trapezoid(&times, &v);
    let total = *v_integral.last().unwrap();
    let eta = if total > 0.0 { eps / total } else { 0.0 };
    Ok(LosingSchedule { sigma, eps, t_end, times, v, v_integral, eta })
}

/// Block norms ‖Δ_j F‖_p for j = −1..=j_max (Parseval for p = 2).
pub fn block_profile(f: &Field3D, p: f64) -> Vec<f64> {
    if p == 2.0 {
        lp::block_l2_norms(f).into_iter().map(|x| x.1).collect()
    } else {
        lp::blocks(f).into_iter().map(|(_, b)| b.lp_norm(p)).collect()
    }
}

/// sup_j 2^{jσ} b_j over a profile starting at j = −1.
pub fn besov_from_profile(profile: &[f64], sigma: f64) -> f64 {
    profile.iter().enumerate().map(|(i, &b)| 2f64.powf((i as f64 - 1.0) * sigma) * b).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosingReport {
    pub times: Vec<f64>,
    pub sigma_t: Vec<f64>,
    pub r: Vec<f64>,
    pub sup_r: f64,
    /// log U(T) with C = 1.
    pub log_u: f64,
    /// log of U(T)·exp(U(T)³ ε^{−3} (∫V)⁴) with C = 1; infinite when ε = 0.
    pub log_bound_factor: f64,
}

/// r(t) = ‖ρ(t)‖_{B^{σ_t}_{p,∞}} / (‖ρ₀‖²_{B^σ_{p,∞}} + ∫₀^t ‖f‖²_{B^{σ_τ}} + ‖g‖²_{B^{σ_τ}} dτ)^{1/2}.
pub fn losing_bound_report(traj: &Trajectory, sched: &LosingSchedule, p: f64, box_n: usize, box_l: f64) -> Result<LosingReport> {
    if traj.times.len() != sched.times.len() || traj.times.iter().zip(&sched.times).any(|(a, b)| a != b) {
        return Err(Error::Param("schedule and trajectory sample times differ".into()));
    }
    let profiles: Vec<Vec<f64>> = traj
        .rho
        .iter()
        .map(|r| reconstruct_cartesian(r, box_n, box_l).map(|b| block_profile(&b, p)))
        .collect::<Result<_>>()?;
    let data_profile = |x: &Option<ScalarFieldRZ>| -> Result<Option<Vec<f64>>> {
        x.as_ref().map(|f| reconstruct_cartesian(f, box_n, box_l).map(|b| block_profile(&b, p))).transpose()
    };
    let n = traj.times.len();
    let mut data = vec![0.0; n];
    for i in 0..n {
        let s = sched.sigma_at_sample(i);
        let mut d = 0.0;
        if let Some(fp) = data_profile(&traj.f[i])? {
            d += besov_from_profile(&fp, s).powi(2);
        }
        if let Some(gp) = data_profile(&traj.g[i])? {
            d += besov_from_profile(&gp, s).powi(2);
        }
        data[i] = d;
    }
    let data_int = cumulative_trapezoid(&traj.times, &data);
    let b0 = besov_from_profile(&profiles[0], sched.sigma);
    let sigma_t: Vec<f64> = (0..n).map(|i| sched.sigma_at_sample(i)).collect();
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let num = besov_from_profile(&profiles[i], sigma_t[i]);
            let den = (b0 * b0 + data_int[i]).sqrt();
            if den == 0.0 {
                if num == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                num / den
            }
        })
        .collect();
    let sup_r = r.iter().cloned().fold(0.0, f64::max);
    let log_u = log_u(traj);
    let vint = *sched.v_integral.last().unwrap();
    let log_bound_factor =
        if sched.eps == 0.0 { f64::INFINITY } else { log_u + log_u.exp().powi(3) * sched.eps.powi(-3) * vint.powi(4) };
    Ok(LosingReport { times: traj.times.clone(), sigma_t, r, sup_r, log_u, log_bound_factor })
}

/// log U(T) = sup_q ∫₀^T (1 + ‖∂_z u‖²_{L^q}/q^{3/4}) + ∫₀^T ‖u_r/r‖²_∞, with C = 1.
pub fn log_u(traj: &Trajectory) -> f64 {
    let t = &traj.times;
    let nq = traj.dzu_weighted.first().map(|w| w.len()).unwrap_or(0);
    let tt = t.last().copied().unwrap_or(0.0);
    let sup_q = (0..nq)
        .map(|q| {
            let f: Vec<f64> = traj.dzu_weighted.iter().map(|w| w[q]).collect();
            *cumulative_trapezoid(t, &f).last().unwrap()
        })
        .fold(0.0, f64::max);
    let a = cumulative_trapezoid(t, &traj.ur_r_sq).last().copied().unwrap_or(0.0);
    tt + sup_q + a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommutatorRow {
    pub q: i32,
    pub lhs_l2: f64,
    pub rhs_l2: f64,
    pub lhs_lp: f64,
    pub rhs_lp: f64,
}

impl CommutatorRow {
    pub fn ratio_l2(&self) -> f64 {
        if self.lhs_l2 == 0.0 {
            0.0
        } else {
            self.lhs_l2 / self.rhs_l2
        }
    }

    pub fn ratio_lp(&self) -> f64 {
        if self.lhs_lp == 0.0 {
            0.0
        } else {
            self.lhs_lp / self.rhs_lp
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorTable {
    pub rows: Vec<CommutatorRow>,
    pub max_l2: f64,
    pub max_lp: f64,
}

fn frobenius(m: &[Field3D]) -> Field3D {
    let mut acc = m[0].map(|x| x * x);
    for c in &m[1..] {
        acc = acc.zip(c, |a, b| a + b * b);
    }
    acc.map(f64::sqrt)
}

fn box_sqrtl(f: &Field3D, pgrid: &PGrid) -> f64 {
    pgrid.ps().iter().map(|&p| f.lp_norm(p) / p.sqrt()).fold(0.0, f64::max)
}

/// Relative size below which a commutator is treated as rounding noise.
const NOISE: f64 = 1e-13;

/// Ratios ‖R_q‖ / RHS_q for both commutator bounds over q = 0..=j_max − 2:
/// L² form ‖∇u‖_∞ Σ_{q'≥q−4} 2^{q−q'}‖Δ_{q'}v‖₂ + ‖v‖_∞ Σ_{|q'−q|≤5} ‖Δ_{q'}∇u‖₂ and
/// L^p form ‖S_{q+5}∇u‖_∞ Σ_{|q'−q|≤5} ‖Δ_{q'}v‖_p + 2^{−qσ}√(q+2)‖ω‖_√𝕃 ‖v‖_{B^σ_{p,∞}}.
pub fn commutator_bound_report(u: &[Field3D; 3], v: &Field3D, sigma: f64, p: f64) -> Result<CommutatorTable> {
    if !(sigma > -1.0 && sigma < 1.0) {
        return Err(Error::Param(format!("σ = {sigma} outside (−1, 1)")));
    }
    let jm = lp::jmax_box(v);
    let grad: Vec<Field3D> = (0..3).flat_map(|c| (0..3).map(move |a| (c, a))).map(|(c, a)| u[c].derivative(a)).collect();
    let grad_norm = frobenius(&grad);
    let grad_inf = grad_norm.max_abs();
    let omega = lp::magnitude(&lp::curl(u));
    let pg = PGrid::default();
    let omega_sqrtl = box_sqrtl(&omega, &pg);
    let vb = lp::blocks(v);
    let v_l2: Vec<f64> = vb.iter().map(|(_, b)| b.l2()).collect();
    let v_lp: Vec<f64> = vb.iter().map(|(_, b)| b.lp_norm(p)).collect();
    let v_besov = besov_from_profile(&v_lp, sigma);
    let v_inf = v.max_abs();
    let grad_blocks_l2: Vec<f64> = (-1..=jm)
        .map(|j| {
            let s: f64 = grad.iter().map(|gc| lp::lp_project(gc, j, BlockKind::Delta).map(|b| b.l2().powi(2))).sum::<Result<f64>>()?;
            Ok(s.sqrt())
        })
        .collect::<Result<_>>()?;
    let idx = |q: i32| (q + 1) as usize;
    let scale = v.l2() * grad_norm.l2() + v_inf * grad_inf;
    let mut rows = Vec::new();
    for q in 0..=(jm - 2) {
        let rq = lp::commutator_rq(u, v, q)?;
        let lhs_l2 = rq.l2();
        let lhs_lp = rq.lp_norm(p);
        let near = |w: i32| ((q - w).max(-1)..=(q + w).min(jm)).map(idx);
        let a1 = grad_inf * ((q - 4).max(-1)..=jm).map(|qp| 2f64.powi(q - qp) * v_l2[idx(qp)]).sum::<f64>()
            + v_inf * near(5).map(|i| grad_blocks_l2[i]).sum::<f64>();
        let s5 = {
            let parts: Vec<Field3D> = grad.iter().map(|gc| lp::lp_project(gc, (q + 5).min(jm), BlockKind::S)).collect::<Result<_>>()?;
            frobenius(&parts).max_abs()
        };
        let a2 = s5 * near(5).map(|i| v_lp[i]).sum::<f64>()
            + 2f64.powf(-(q as f64) * sigma) * ((q + 2) as f64).sqrt() * omega_sqrtl * v_besov;
        for (lhs, rhs, name) in [(lhs_l2, a1, "L2"), (lhs_lp, a2, "Lp")] {
            if rhs == 0.0 && lhs > NOISE * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Structural(format!("{name} commutator bound violated at q = {q}: lhs {lhs:e}, rhs 0")));
            }
        }
        rows.push(CommutatorRow { q, lhs_l2, rhs_l2: a1, lhs_lp, rhs_lp: a2 });
    }
    let max_l2 = rows.iter().map(|r| r.ratio_l2()).fold(0.0, f64::max);
    let max_lp = rows.iter().map(|r| r.ratio_lp()).fold(0.0, f64::max);
    Ok(CommutatorTable { rows, max_l2, max_lp })
}
