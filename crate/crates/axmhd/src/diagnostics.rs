//! Time-series monitors for the a-priori estimates: energy identity, maximum principles,
//! Lorentz and √𝕃 bounds, vertical smoothing integrals, velocity-gradient ratios and high norms.

use crate::error::{Error, Result};
use crate::field3d::{reconstruct_azimuthal, reconstruct_cartesian, Field3D};
use crate::grid::{integrate_with, radial_derivative, Parity, ScalarFieldRZ, VelocityRZ};
use crate::lp::{self, BlockKind};
use crate::norms::{lorentz_norm, lp_norm, sobolev_hs_norm, sqrtl_norm, PGrid};
use crate::solver::{Derived, Solver, State, StepInfo};
use crate::spectral::C64;

/// Exponents of the Lemma-2.7-type ratios ‖Λ_v^α u‖ / (‖u‖₂ + ‖ω‖_√𝕃).
pub const LV_ALPHAS: [f64; 3] = [0.0, 0.5, 0.75];

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub pgrid: PGrid,
    /// Vertical regularity index in Σ_q 2^{qs}‖Δ_q^v u‖_p.
    pub s_vertical: f64,
    /// Sobolev index of the high-norm monitor (H^{s−1}).
    pub s_high: f64,
    /// Box resolution for reconstructed-field monitors; None disables them.
    pub box_n: Option<usize>,
    /// Horizontal box period; 2R when None.
    pub box_l: Option<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { pgrid: PGrid::default(), s_vertical: 1.75, s_high: 2.6, box_n: Some(64), box_l: None }
    }
}

/// One row of monitored quantities. NaN marks an inactive entry (0/0 ratio or skipped monitor).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub step: usize,
    pub e_kin: f64,
    pub e_mag: f64,
    pub d_z: f64,
    pub dz_integral: f64,
    pub energy_residual: f64,
    pub pi_lp: Vec<(f64, f64)>,
    pub pi_linf: f64,
    pub ratio_pi: f64,
    pub btheta_lp: Vec<(f64, f64)>,
    pub ratio_b: f64,
    pub gamma_l31: f64,
    pub gamma_l2: f64,
    pub gamma_dz_l2: f64,
    pub gamma_dz_integral: f64,
    pub ratio_lorentz: f64,
    pub ratio_l2: f64,
    pub omega_sqrtl: f64,
    pub omega_slope: f64,
    pub dzu_weighted: f64,
    pub uq_sum: f64,
    pub interp_ratio: f64,
    pub grad_u_inf: f64,
    pub bkm_integral: f64,
    pub ur_over_r_inf: f64,
    pub ur_ratio: f64,
    pub cz_ratio: f64,
    pub lv_l2: Vec<(f64, f64)>,
    pub lv_inf: Vec<(f64, f64)>,
    pub miao_zheng_residual: f64,
    pub h_omega: f64,
    pub h_btheta: f64,
    pub h_pi: f64,
    pub dz_omega_h_integral: f64,
    pub support_fraction: f64,
    pub divergence: f64,
    pub courant: f64,
}

fn key(prefix: &str, p: f64) -> String {
    format!("{prefix}_{p}")
}

impl DiagnosticRecord {
    /// Flat (name, value) list in the fixed column order.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut c: Vec<(String, f64)> = Vec::new();
        let mut push = |n: &str, v: f64| c.push((n.to_string(), v));
        push("t", self.t);
        push("step", self.step as f64);
        push("e_kin", self.e_kin);
        push("e_mag", self.e_mag);
        push("d_z", self.d_z);
        push("dz_integral", self.dz_integral);
        push("energy_residual", self.energy_residual);
        for &(p, v) in &self.pi_lp {
            push(&key("pi_lp", p), v);
        }
        push("pi_linf", self.pi_linf);
        push("ratio_pi", self.ratio_pi);
        for &(p, v) in &self.btheta_lp {
            push(&key("btheta_lp", p), v);
        }
        push("ratio_b", self.ratio_b);
        push("gamma_l31", self.gamma_l31);
        push("gamma_l2", self.gamma_l2);
        push("gamma_dz_l2", self.gamma_dz_l2);
        push("gamma_dz_integral", self.gamma_dz_integral);
        push("ratio_lorentz", self.ratio_lorentz);
        push("ratio_l2", self.ratio_l2);
        push("omega_sqrtl", self.omega_sqrtl);
        push("omega_slope", self.omega_slope);
        push("dzu_weighted", self.dzu_weighted);
        push("uq_sum", self.uq_sum);
        push("interp_ratio", self.interp_ratio);
        push("grad_u_inf", self.grad_u_inf);
        push("bkm_integral", self.bkm_integral);
        push("ur_over_r_inf", self.ur_over_r_inf);
        push("ur_ratio", self.ur_ratio);
        push("cz_ratio", self.cz_ratio);
        for &(a, v) in &self.lv_l2 {
            push(&key("lv_l2", a), v);
        }
        for &(a, v) in &self.lv_inf {
            push(&key("lv_inf", a), v);
        }
        push("miao_zheng_residual", self.miao_zheng_residual);
        push("h_omega", self.h_omega);
        push("h_btheta", self.h_btheta);
        push("h_pi", self.h_pi);
        push("dz_omega_h_integral", self.dz_omega_h_integral);
        push("support_fraction", self.support_fraction);
        push("divergence", self.divergence);
        push("courant", self.courant);
        c
    }

    /// Inverse of [`columns`](Self::columns).
    pub fn from_columns(cols: &[(String, f64)]) -> Result<Self> {
        let mut it = cols.iter().peekable();
        let mut next = |name: &str| -> Result<f64> {
            match it.next() {
                Some((n, v)) if n == name => Ok(*v),
                Some((n, _)) => Err(Error::Structural(format!("expected column {name}, found {n}"))),
                None => Err(Error::Structural(format!("missing column {name}"))),
            }
        };
        let t = next("t")?;
        let step = next("step")? as usize;
        let e_kin = next("e_kin")?;
        let e_mag = next("e_mag")?;
        let d_z = next("d_z")?;
        let dz_integral = next("dz_integral")?;
        let energy_residual = next("energy_residual")?;
        drop(next);
        let mut rest: Vec<(String, f64)> = cols[7..].to_vec();
        let take_map = |rest: &mut Vec<(String, f64)>, prefix: &str| -> Result<Vec<(f64, f64)>> {
            let mut out = Vec::new();
            let pre = format!("{prefix}_");
            while let Some((n, v)) = rest.first().cloned() {
                match n.strip_prefix(&pre) {
                    Some(p) => {
                        let p: f64 = p.parse().map_err(|_| Error::Structural(format!("bad column {n}")))?;
                        out.push((p, v));
                        rest.remove(0);
                    }
                    None => break,
                }
            }
            Ok(out)
        };
        let take = |rest: &mut Vec<(String, f64)>, name: &str| -> Result<f64> {
            if rest.is_empty() {
                return Err(Error::Structural(format!("missing column {name}")));
            }
            let (n, v) = rest.remove(0);
            if n != name {
                return Err(Error::Structural(format!("expected column {name}, found {n}")));
            }
            Ok(v)
        };
        let r = &mut rest;
        let rec = DiagnosticRecord {
            t,
            step,
            e_kin,
            e_mag,
            d_z,
            dz_integral,
            energy_residual,
            pi_lp: take_map(r, "pi_lp")?,
            pi_linf: take(r, "pi_linf")?,
            ratio_pi: take(r, "ratio_pi")?,
            btheta_lp: take_map(r, "btheta_lp")?,
            ratio_b: take(r, "ratio_b")?,
            gamma_l31: take(r, "gamma_l31")?,
            gamma_l2: take(r, "gamma_l2")?,
            gamma_dz_l2: take(r, "gamma_dz_l2")?,
            gamma_dz_integral: take(r, "gamma_dz_integral")?,
            ratio_lorentz: take(r, "ratio_lorentz")?,
            ratio_l2: take(r, "ratio_l2")?,
            omega_sqrtl: take(r, "omega_sqrtl")?,
            omega_slope: take(r, "omega_slope")?,
            dzu_weighted: take(r, "dzu_weighted")?,
            uq_sum: take(r, "uq_sum")?,
            interp_ratio: take(r, "interp_ratio")?,
            grad_u_inf: take(r, "grad_u_inf")?,
            bkm_integral: take(r, "bkm_integral")?,
            ur_over_r_inf: take(r, "ur_over_r_inf")?,
            ur_ratio: take(r, "ur_ratio")?,
            cz_ratio: take(r, "cz_ratio")?,
            lv_l2: take_map(r, "lv_l2")?,
            lv_inf: take_map(r, "lv_inf")?,
            miao_zheng_residual: take(r, "miao_zheng_residual")?,
            h_omega: take(r, "h_omega")?,
            h_btheta: take(r, "h_btheta")?,
            h_pi: take(r, "h_pi")?,
            dz_omega_h_integral: take(r, "dz_omega_h_integral")?,
            support_fraction: take(r, "support_fraction")?,
            divergence: take(r, "divergence")?,
            courant: take(r, "courant")?,
        };
        if !r.is_empty() {
            return Err(Error::Structural(format!("unexpected column {}", r[0].0)));
        }
        Ok(rec)
    }

    /// NaN-filled record carrying the column layout of a PGrid.
    pub fn blank(pgrid: &PGrid) -> Self {
        let n = f64::NAN;
        let per_p: Vec<(f64, f64)> = pgrid.ps().iter().map(|&p| (p, n)).collect();
        let per_a: Vec<(f64, f64)> = LV_ALPHAS.iter().map(|&a| (a, n)).collect();
        DiagnosticRecord {
            t: n,
            step: 0,
            e_kin: n,
            e_mag: n,
            d_z: n,
            dz_integral: n,
            energy_residual: n,
            pi_lp: per_p.clone(),
            pi_linf: n,
            ratio_pi: n,
            btheta_lp: per_p,
            ratio_b: n,
            gamma_l31: n,
            gamma_l2: n,
            gamma_dz_l2: n,
            gamma_dz_integral: n,
            ratio_lorentz: n,
            ratio_l2: n,
            omega_sqrtl: n,
            omega_slope: n,
            dzu_weighted: n,
            uq_sum: n,
            interp_ratio: n,
            grad_u_inf: n,
            bkm_integral: n,
            ur_over_r_inf: n,
            ur_ratio: n,
            cz_ratio: n,
            lv_l2: per_a.clone(),
            lv_inf: per_a,
            miao_zheng_residual: n,
            h_omega: n,
            h_btheta: n,
            h_pi: n,
            dz_omega_h_integral: n,
            support_fraction: n,
            divergence: n,
            courant: n,
        }
    }

    pub fn header(&self) -> Vec<String> {
        self.columns().into_iter().map(|c| c.0).collect()
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 {
            f64::NAN
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

/// Composite Simpson on uniformly spaced samples, with the 3/8 rule closing an odd interval count.
pub fn integrate_uniform(f: &[f64], h: f64) -> f64 {
    let n = f.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (f[0] + f[1]),
        _ => {
            let (m, tail) = if n % 2 == 0 { (n, 0.0) } else if n == 3 { (0, 3.0 * h / 8.0 * (f[0] + 3.0 * f[1] + 3.0 * f[2] + f[3])) } else {
                let k = n - 3;
                (k, 3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]))
            };
            let mut s = 0.0;
            let mut i = 0;
            while i < m {
                s += h / 3.0 * (f[i] + 4.0 * f[i + 1] + f[i + 2]);
                i += 2;
            }
            s + tail
        }
    }
}

/// Running trapezoid integral.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trapezoid {
    last: Option<(f64, f64)>,
    pub value: f64,
}

impl Trapezoid {
    pub fn push(&mut self, t: f64, f: f64) -> f64 {
        if let Some((t0, f0)) = self.last {
            self.value += 0.5 * (t - t0) * (f0 + f);
        }
        self.last = Some((t, f));
        self.value
    }
}

fn l2sq(f: &ScalarFieldRZ) -> f64 {
    integrate_with(f, |v| v * v)
}

fn velocity_sq(u: &VelocityRZ) -> f64 {
    l2sq(&u.ur) + l2sq(&u.uz)
}

fn magnitude(a: &ScalarFieldRZ, b: &ScalarFieldRZ) -> ScalarFieldRZ {
    a.zip(b, Parity::Even, |x, y| x.hypot(y))
}

/// |∇u| of an axisymmetric swirl-free field from its five nonzero Cartesian invariants.
pub fn grad_magnitude(u: &VelocityRZ) -> ScalarFieldRZ {
    let drr = radial_derivative(&u.ur);
    let dzr = u.ur.dz();
    let drz = radial_derivative(&u.uz);
    let dzz = u.uz.dz();
    let g = &u.ur.grid;
    let nz = g.nz;
    let vals = (0..g.len())
        .map(|idx| {
            let r = g.r()[idx / nz];
            let a = u.ur.values[idx] / r;
            (drr.values[idx].powi(2) + dzr.values[idx].powi(2) + drz.values[idx].powi(2) + dzz.values[idx].powi(2) + a * a)
                .sqrt()
        })
        .collect();
    ScalarFieldRZ::with_values(g, Parity::Even, vals)
}

pub fn ur_over_r(u: &VelocityRZ) -> ScalarFieldRZ {
    u.ur.scale_r(Parity::Even, |r| 1.0 / r)
}

/// Energy pieces (‖u‖², ‖b‖², ‖∂_z u‖²).
pub fn energy_parts(d: &Derived) -> (f64, f64, f64) {
    let dzu = VelocityRZ { ur: d.u.ur.dz(), uz: d.u.uz.dz() };
    (velocity_sq(&d.u), l2sq(&d.btheta), velocity_sq(&dzu))
}

/// max over p of ‖∂_z u‖_p / (‖Λ_v^{3/4}u‖_p^{3/4} ‖Λ_v^{7/4}u‖_p^{1/4}).
pub fn interpolation_ratio(u: &VelocityRZ, pgrid: &PGrid) -> Result<f64> {
    let dz = magnitude(&u.ur.dz(), &u.uz.dz());
    let a = magnitude(&lp::lambda_v(&u.ur, 0.75)?, &lp::lambda_v(&u.uz, 0.75)?);
    let b = magnitude(&lp::lambda_v(&u.ur, 1.75)?, &lp::lambda_v(&u.uz, 1.75)?);
    let mut best = f64::NAN;
    for &p in pgrid.ps() {
        let den = lp_norm(&a, p)?.powf(0.75) * lp_norm(&b, p)?.powf(0.25);
        let r = ratio(lp_norm(&dz, p)?, den);
        if !r.is_nan() {
            best = if best.is_nan() { r } else { best.max(r) };
        }
    }
    Ok(best)
}

/// Σ_{q=0}^{k_max} 2^{qs}‖Δ_q^v u‖_p for each p.
pub fn vertical_block_sums(u: &VelocityRZ, s: f64, pgrid: &PGrid) -> Result<Vec<f64>> {
    let kmax = u.ur.grid.kmax_vertical();
    let mut sums = vec![0.0; pgrid.ps().len()];
    for q in 0..=kmax {
        let bq = magnitude(&lp::vertical_block(&u.ur, q, BlockKind::Delta)?, &lp::vertical_block(&u.uz, q, BlockKind::Delta)?);
        let w = 2f64.powf(q as f64 * s);
        for (acc, &p) in sums.iter_mut().zip(pgrid.ps()) {
            *acc += w * lp_norm(&bq, p)?;
        }
    }
    Ok(sums)
}

/// Least-squares slope of ‖f‖_p against √p.
pub fn sqrt_p_slope(f: &ScalarFieldRZ, pgrid: &PGrid) -> Result<f64> {
    let xs: Vec<f64> = pgrid.ps().iter().map(|p| p.sqrt()).collect();
    let ys: Vec<f64> = pgrid.ps().iter().map(|&p| lp_norm(f, p)).collect::<Result<_>>()?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(if sxx == 0.0 { 0.0 } else { sxy / sxx })
}

/// Relative L² residual between u_r/r and ∂_zΔ^{-1}Γ − 2(∂_r/r)Δ^{-1}∂_zΔ^{-1}Γ on a periodic box,
/// with (∂_r/r)h = (x∂_x h + y∂_y h)/ρ².
pub fn miao_zheng_residual(gamma: &ScalarFieldRZ, ur_r: &ScalarFieldRZ, n: usize, l: f64) -> Result<f64> {
    let gb = reconstruct_cartesian(gamma, n, l)?;
    let lhs = reconstruct_cartesian(ur_r, n, l)?;
    let inv_lap = |a: f64, b: f64, c: f64| {
        let k2 = a * a + b * b + c * c;
        if k2 == 0.0 {
            0.0
        } else {
            -1.0 / k2
        }
    };
    let nyq = |f: &Field3D, c: f64| c.abs() >= std::f64::consts::PI * f.dims[2] as f64 / f.periods[2] * (1.0 - 1e-12);
    let first = gb.multiplier(|a, b, c| if nyq(&gb, c) { C64::new(0.0, 0.0) } else { C64::new(0.0, c * inv_lap(a, b, c)) });
    let h = first.multiplier(|a, b, c| C64::new(inv_lap(a, b, c), 0.0));
    let hx = h.derivative(0);
    let hy = h.derivative(1);
    let mut rhs = first.clone();
    let [nx, ny, nz] = rhs.dims;
    for ix in 0..nx {
        let x = rhs.coord(0, ix);
        for iy in 0..ny {
            let y = rhs.coord(1, iy);
            let rho2 = x * x + y * y;
            for iz in 0..nz {
                let idx = (ix * ny + iy) * nz + iz;
                rhs.data[idx] -= 2.0 * (x * hx.data[idx] + y * hy.data[idx]) / rho2;
            }
        }
    }
    let diff = rhs.zip(&lhs, |a, b| a - b);
    Ok(ratio(diff.l2(), lhs.l2()))
}

fn azimuthal_hs(f: &ScalarFieldRZ, n: usize, l: f64, s: f64) -> Result<f64> {
    let v = reconstruct_azimuthal(f, n, l)?;
    let mut t = 0.0;
    for c in &v[..2] {
        t += sobolev_hs_norm(c, s)?.powi(2);
    }
    Ok(t.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Initial {
    e0: f64,
    pi_mix: f64,
    gamma_l31: f64,
    gamma_l2sq: f64,
}

/// Collects records from a run; feed every step through [`observe`](Self::observe).
#[derive(Debug, Clone)]
pub struct Monitor {
    pub cfg: MonitorConfig,
    pub cadence: usize,
    pub records: Vec<DiagnosticRecord>,
    init: Option<Initial>,
    btheta0_lp: Vec<f64>,
    dz_samples: Vec<f64>,
    dt: f64,
    bkm: Trapezoid,
    ur_r_int: Trapezoid,
    ur_r_sq_int: Trapezoid,
    gamma_dz: Trapezoid,
    dzu_w: Vec<Trapezoid>,
    uq: Vec<Trapezoid>,
    dz_omega_h: Trapezoid,
    /// Largest ratio_pi seen: the L^∞ entry every step, all p at cadence.
    pub ratio_pi_max: f64,
}

impl Monitor {
    pub fn new(cfg: MonitorConfig, cadence: usize) -> Self {
        let np = cfg.pgrid.ps().len();
        Monitor {
            cfg,
            cadence: cadence.max(1),
            records: Vec::new(),
            init: None,
            btheta0_lp: Vec::new(),
            dz_samples: Vec::new(),
            dt: 0.0,
            bkm: Trapezoid::default(),
            ur_r_int: Trapezoid::default(),
            ur_r_sq_int: Trapezoid::default(),
            gamma_dz: Trapezoid::default(),
            dzu_w: vec![Trapezoid::default(); np],
            uq: vec![Trapezoid::default(); np],
            dz_omega_h: Trapezoid::default(),
            ratio_pi_max: 0.0,
        }
    }

    /// Running state (initial values, integrals, D_z samples) as a flat f64 vector; records are excluded.
    pub fn snapshot(&self) -> Vec<f64> {
        let mut v = Vec::new();
        match self.init {
            Some(i) => v.extend([1.0, i.e0, i.pi_mix, i.gamma_l31, i.gamma_l2sq]),
            None => v.extend([0.0; 5]),
        }
        v.extend([self.dt, self.ratio_pi_max]);
        for tr in self.trapezoids() {
            match tr.last {
                Some((t, f)) => v.extend([1.0, t, f, tr.value]),
                None => v.extend([0.0, 0.0, 0.0, tr.value]),
            }
        }
        for list in [&self.btheta0_lp, &self.dz_samples] {
            v.push(list.len() as f64);
            v.extend(list.iter());
        }
        v
    }

    /// Inverse of [`snapshot`](Self::snapshot).
    pub fn restore(cfg: MonitorConfig, cadence: usize, v: &[f64]) -> Result<Self> {
        let mut m = Monitor::new(cfg, cadence);
        let bad = || Error::Checkpoint("malformed monitor state".into());
        let mut it = v.iter().copied();
        let mut next = || it.next().ok_or_else(bad);
        let head: Vec<f64> = (0..5).map(|_| next()).collect::<Result<_>>()?;
        if head[0] == 1.0 {
            m.init = Some(Initial { e0: head[1], pi_mix: head[2], gamma_l31: head[3], gamma_l2sq: head[4] });
        }
        m.dt = next()?;
        m.ratio_pi_max = next()?;
        let ntr = m.trapezoids().len();
        let mut trs = Vec::with_capacity(ntr);
        for _ in 0..ntr {
            let (flag, t, f, value) = (next()?, next()?, next()?, next()?);
            trs.push(Trapezoid { last: (flag == 1.0).then_some((t, f)), value });
        }
        for (dst, src) in m.trapezoids_mut().into_iter().zip(trs) {
            *dst = src;
        }
        let mut list = || -> Result<Vec<f64>> {
            let n = next()?;
            if !(n >= 0.0 && n.fract() == 0.0) {
                return Err(bad());
            }
            (0..n as usize).map(|_| next()).collect()
        };
        m.btheta0_lp = list()?;
        m.dz_samples = list()?;
        if it.next().is_some() {
            return Err(bad());
        }
        Ok(m)
    }

    fn trapezoids(&self) -> Vec<&Trapezoid> {
        let mut v = vec![&self.bkm, &self.ur_r_int, &self.ur_r_sq_int, &self.gamma_dz, &self.dz_omega_h];
        v.extend(self.dzu_w.iter());
        v.extend(self.uq.iter());
        v
    }

    fn trapezoids_mut(&mut self) -> Vec<&mut Trapezoid> {
        let mut v = vec![&mut self.bkm, &mut self.ur_r_int, &mut self.ur_r_sq_int, &mut self.gamma_dz, &mut self.dz_omega_h];
        v.extend(self.dzu_w.iter_mut());
        v.extend(self.uq.iter_mut());
        v
    }

    /// ∫₀^t ‖u_r/r‖_∞ and ∫₀^t ‖u_r/r‖²_∞ so far.
    pub fn ur_r_integrals(&self) -> (f64, f64) {
        (self.ur_r_int.value, self.ur_r_sq_int.value)
    }

    pub fn observe(&mut self, solver: &Solver, s: &State, info: &StepInfo) -> Result<()> {
        let d = s.derived().ok_or_else(|| Error::Structural("derived fields not cached".into()))?;
        let pg = self.cfg.pgrid.clone();
        let t = s.t;
        let (e_kin, e_mag, d_z) = energy_parts(d);
        if info.step == 0 {
            let pi_mix = lp_norm(&s.pi, 2.0)?.max(s.pi.max_abs());
            self.init = Some(Initial {
                e0: e_kin + e_mag,
                pi_mix,
                gamma_l31: lorentz_norm(&s.gamma, 3.0, 1.0)?,
                gamma_l2sq: l2sq(&s.gamma),
            });
            self.btheta0_lp = pg.ps().iter().map(|&p| lp_norm(&d.btheta, p)).collect::<Result<_>>()?;
            self.btheta0_lp.push(d.btheta.max_abs());
            self.dt = info.dt;
        }
        let init = self.init.ok_or_else(|| Error::Structural("first observation must be step 0".into()))?;
        self.dz_samples.push(d_z);
        let dz_integral = integrate_uniform(&self.dz_samples, self.dt);
        let energy_residual = ratio(e_kin + e_mag + 2.0 * dz_integral - init.e0, init.e0);
        let grad = grad_magnitude(&d.u);
        let grad_u_inf = grad.max_abs();
        let bkm_integral = self.bkm.push(t, grad_u_inf);
        let urr = ur_over_r(&d.u);
        let ur_over_r_inf = urr.max_abs();
        self.ur_r_int.push(t, ur_over_r_inf);
        self.ur_r_sq_int.push(t, ur_over_r_inf * ur_over_r_inf);
        let dzg = s.gamma.dz();
        let gamma_dz_l2sq = l2sq(&dzg);
        let gamma_dz_integral = self.gamma_dz.push(t, gamma_dz_l2sq);

        let pi_linf = s.pi.max_abs();
        let r_inf = ratio(pi_linf, init.pi_mix);
        if !r_inf.is_nan() {
            self.ratio_pi_max = self.ratio_pi_max.max(r_inf);
        }

        let last = info.step == info.n_steps;
        if info.step % self.cadence != 0 && !last {
            return Ok(());
        }
        let pi_lp: Vec<(f64, f64)> = pg.ps().iter().map(|&p| lp_norm(&s.pi, p).map(|v| (p, v))).collect::<Result<_>>()?;
        let ratio_pi = ratio(pi_lp.iter().map(|x| x.1).fold(pi_linf, f64::max), init.pi_mix);
        if !ratio_pi.is_nan() {
            self.ratio_pi_max = self.ratio_pi_max.max(ratio_pi);
        }
        let dzu = VelocityRZ { ur: d.u.ur.dz(), uz: d.u.uz.dz() };
        let dzu_mag = magnitude(&dzu.ur, &dzu.uz);
        let sums = vertical_block_sums(&d.u, self.cfg.s_vertical, &pg)?;
        let mut dzu_weighted = 0.0f64;
        let mut uq_sum = 0.0f64;
        for (i, &p) in pg.ps().iter().enumerate() {
            let a = lp_norm(&dzu_mag, p)?.powi(2) / p.powf(0.75);
            dzu_weighted = dzu_weighted.max(self.dzu_w[i].push(t, a));
            uq_sum = uq_sum.max(self.uq[i].push(t, sums[i] / p.powf(1.5)));
        }

        let btheta_lp: Vec<(f64, f64)> = pg.ps().iter().map(|&p| lp_norm(&d.btheta, p).map(|v| (p, v))).collect::<Result<_>>()?;
        let growth = self.ur_r_int.value.exp();
        let mut ratio_b = f64::NAN;
        for (k, v) in btheta_lp.iter().map(|x| x.1).chain(std::iter::once(d.btheta.max_abs())).enumerate() {
            let r = ratio(v, growth * self.btheta0_lp[k]);
            if !r.is_nan() {
                ratio_b = if ratio_b.is_nan() { r } else { ratio_b.max(r) };
            }
        }
        let gamma_l31 = lorentz_norm(&s.gamma, 3.0, 1.0)?;
        let gamma_l2 = l2sq(&s.gamma).sqrt();
        let ratio_lorentz = ratio(gamma_l31, init.gamma_l31 + t.sqrt() * init.pi_mix.powi(2));
        let ratio_l2 = ratio(gamma_l2 * gamma_l2 + gamma_dz_integral, init.gamma_l2sq + t * init.pi_mix.powi(4));

        let omega = &d.omega;
        let omega_sqrtl = sqrtl_norm(omega, &pg);
        let omega_slope = sqrt_p_slope(omega, &pg)?;
        let interp_ratio = interpolation_ratio(&d.u, &pg)?;
        let ur_ratio = ratio(ur_over_r_inf, gamma_l31);
        let mut cz_ratio = f64::NAN;
        for &p in pg.ps() {
            let r = ratio(lp_norm(&grad, p)? * (p - 1.0), p * p * lp_norm(omega, p)?);
            if !r.is_nan() {
                cz_ratio = if cz_ratio.is_nan() { r } else { cz_ratio.max(r) };
            }
        }
        let u_l2 = (e_kin).sqrt();
        let base = u_l2 + omega_sqrtl;
        let mut lv_l2 = Vec::new();
        let mut lv_inf = Vec::new();
        for &a in LV_ALPHAS.iter() {
            let m = magnitude(&lp::lambda_v(&d.u.ur, a)?, &lp::lambda_v(&d.u.uz, a)?);
            lv_l2.push((a, ratio(l2sq(&m).sqrt(), base)));
            lv_inf.push((a, ratio(m.max_abs(), base)));
        }

        let (mut miao, mut h_omega, mut h_btheta, mut h_pi) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
        let mut dz_omega_h_integral = self.dz_omega_h.value;
        if let Some(n) = self.cfg.box_n {
            let l = self.cfg.box_l.unwrap_or(2.0 * solver.grid.r_extent);
            let alpha = self.cfg.s_high - 1.0;
            miao = miao_zheng_residual(&s.gamma, &urr, n, l).unwrap_or(f64::NAN);
            if let (Ok(a), Ok(b), Ok(c)) =
                (azimuthal_hs(omega, n, l, alpha), azimuthal_hs(&d.btheta, n, l, alpha), reconstruct_cartesian(&s.pi, n, l))
            {
                h_omega = a;
                h_btheta = b;
                h_pi = sobolev_hs_norm(&c, alpha)?;
                if let Ok(dz) = azimuthal_hs(&omega.dz(), n, l, alpha) {
                    dz_omega_h_integral = self.dz_omega_h.push(t, dz * dz);
                }
            }
        }

        self.records.push(DiagnosticRecord {
            t,
            step: info.step,
            e_kin,
            e_mag,
            d_z,
            dz_integral,
            energy_residual,
            pi_lp,
            pi_linf,
            ratio_pi,
            btheta_lp,
            ratio_b,
            gamma_l31,
            gamma_l2,
            gamma_dz_l2: gamma_dz_l2sq.sqrt(),
            gamma_dz_integral,
            ratio_lorentz,
            ratio_l2,
            omega_sqrtl,
            omega_slope,
            dzu_weighted,
            uq_sum,
            interp_ratio,
            grad_u_inf,
            bkm_integral,
            ur_over_r_inf,
            ur_ratio,
            cz_ratio,
            lv_l2,
            lv_inf,
            miao_zheng_residual: miao,
            h_omega,
            h_btheta,
            h_pi,
            dz_omega_h_integral,
            support_fraction: crate::field3d::support_fraction(omega).max(crate::field3d::support_fraction(&d.btheta)),
            divergence: info.divergence,
            courant: info.courant,
        });
        Ok(())
    }
}
