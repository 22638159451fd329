//! Littlewood–Paley analysis on periodic boxes.
//!
//! Frequencies are physical wavenumbers 2πn/L. Conventions: Δ_{-1} = χ(D), Δ_j = φ(2^{-j}D),
//! S_j = χ(2^{-j}D) for j ≥ 0 and S_j = 0 for j < 0, so S_j = Σ_{j' < j} Δ_{j'}.

use crate::error::{Error, Result};
use crate::field3d::Field3D;
use crate::grid::ScalarFieldRZ;
use crate::spectral::C64;
use rand::Rng;
use rayon::prelude::*;
use std::sync::OnceLock;

const TABLE_POINTS: usize = 4096;
const CHI_FLAT: f64 = 0.75;
const CHI_EDGE: f64 = 4.0 / 3.0;

/// Smooth radial pair (χ, φ) with φ(ξ) = χ(ξ/2) − χ(ξ).
#[derive(Debug, Clone)]
pub struct DyadicPartition {
    table: Vec<f64>,
}

fn glue(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

impl DyadicPartition {
    pub fn new() -> Self {
        let h = 1.0 / (TABLE_POINTS - 1) as f64;
        DyadicPartition { table: (0..TABLE_POINTS).map(|i| glue(i as f64 * h)).collect() }
    }

    /// Tabulated transition with four-point cubic interpolation, clamped to [0, 1].
    fn transition(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        let n = TABLE_POINTS - 1;
        let s = t * n as f64;
        let i = (s.floor() as usize).min(n - 1);
        let u = s - i as f64;
        let at = |k: isize| -> f64 {
            let k = k.clamp(0, n as isize) as usize;
            self.table[k]
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let v = p1
            + 0.5 * u * (p2 - p0 + u * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + u * (3.0 * (p1 - p2) + p3 - p0)));
        v.clamp(0.0, 1.0)
    }

    /// χ: 1 on [0, 3/4], 0 on [4/3, ∞).
    pub fn chi(&self, xi: f64) -> f64 {
        1.0 - self.transition((xi - CHI_FLAT) / (CHI_EDGE - CHI_FLAT))
    }

    /// φ supported in [3/4, 8/3].
    pub fn phi(&self, xi: f64) -> f64 {
        (self.chi(0.5 * xi) - self.chi(xi)).max(0.0)
    }

    pub fn delta(&self, j: i32, xi: f64) -> f64 {
        if j < 0 {
            self.chi(xi)
        } else {
            self.phi(xi * 0.5f64.powi(j))
        }
    }

    pub fn low(&self, j: i32, xi: f64) -> f64 {
        if j < 0 {
            0.0
        } else {
            self.chi(xi * 0.5f64.powi(j))
        }
    }
}

impl Default for DyadicPartition {
    fn default() -> Self {
        Self::new()
    }
}

pub fn partition() -> &'static DyadicPartition {
    static P: OnceLock<DyadicPartition> = OnceLock::new();
    P.get_or_init(DyadicPartition::new)
}

/// Largest block index whose support stays below the Nyquist wavenumber π n / L;
/// equals log2(n) − 2 for L = 2π.
pub fn jmax_for(n: usize, period: f64) -> i32 {
    let knyq = std::f64::consts::PI * n as f64 / period;
    (knyq.log2() + 1e-12).floor() as i32 - 1
}

pub fn jmax_box(f: &Field3D) -> i32 {
    (0..3).map(|a| jmax_for(f.dims[a], f.periods[a])).min().unwrap()
}

pub fn jmax_horizontal(f: &Field3D) -> i32 {
    jmax_for(f.dims[0], f.periods[0]).min(jmax_for(f.dims[1], f.periods[1]))
}

pub fn jmax_vertical(f: &Field3D) -> i32 {
    jmax_for(f.dims[2], f.periods[2])
}

/// Largest wavenumber on which blocks −1..=j reproduce the identity.
pub fn band_radius(j: i32) -> f64 {
    CHI_FLAT * 2f64.powi(j + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Delta,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Full,
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Flavor {
    Iso,
    Aniso { alpha: f64, beta: f64 },
}

fn kind_mult(kind: BlockKind, j: i32, xi: f64) -> f64 {
    match kind {
        BlockKind::Delta => partition().delta(j, xi),
        BlockKind::S => partition().low(j, xi),
    }
}

fn real(m: f64) -> C64 {
    C64::new(m, 0.0)
}

pub fn lp_project(f: &Field3D, j: i32, kind: BlockKind) -> Result<Field3D> {
    let jmax = jmax_box(f);
    if j > jmax {
        return Err(Error::BlockIndex { index: j, jmax });
    }
    if j < -1 {
        return Err(Error::BlockIndex { index: j, jmax });
    }
    Ok(f.multiplier(|a, b, c| real(kind_mult(kind, j, (a * a + b * b + c * c).sqrt()))))
}

/// Δ^h_j Δ^v_k.
pub fn aniso_project(f: &Field3D, j: i32, k: i32) -> Result<Field3D> {
    let (jh, jv) = (jmax_horizontal(f), jmax_vertical(f));
    if j > jh {
        return Err(Error::BlockIndex { index: j, jmax: jh });
    }
    if k > jv {
        return Err(Error::BlockIndex { index: k, jmax: jv });
    }
    let p = partition();
    Ok(f.multiplier(|a, b, c| real(p.delta(j, (a * a + b * b).sqrt()) * p.delta(k, c.abs()))))
}

pub fn vertical_block_box(f: &Field3D, k: i32, kind: BlockKind) -> Result<Field3D> {
    let kmax = jmax_vertical(f);
    if k > kmax || k < -1 {
        return Err(Error::BlockIndex { index: k, jmax: kmax });
    }
    Ok(f.multiplier(|_, _, c| real(kind_mult(kind, k, c.abs()))))
}

pub fn vertical_block(f: &ScalarFieldRZ, k: i32, kind: BlockKind) -> Result<ScalarFieldRZ> {
    let kmax = f.grid.kmax_vertical();
    if k > kmax || k < -1 {
        return Err(Error::BlockIndex { index: k, jmax: kmax });
    }
    Ok(f.z_multiplier(|c| kind_mult(kind, k, c.abs())))
}

/// All isotropic blocks j = −1..=j_max from one forward transform.
pub fn blocks(f: &Field3D) -> Vec<(i32, Field3D)> {
    let spec = f.spectrum();
    let jmax = jmax_box(f);
    (-1..=jmax)
        .map(|j| {
            let mut s = spec.clone();
            f.apply_to_spectrum(&mut s, |a, b, c| real(partition().delta(j, (a * a + b * b + c * c).sqrt())));
            (j, f.from_spectrum(s))
        })
        .collect()
}

/// Block L² norms via Parseval.
pub fn block_l2_norms(f: &Field3D) -> Vec<(i32, f64)> {
    let spec = f.spectrum();
    let [kx, ky, kz] = f.wavenumbers();
    let [_, ny, nz] = f.dims;
    let jmax = jmax_box(f);
    let scale = f.cell_volume() / f.len() as f64;
    (-1..=jmax)
        .map(|j| {
            let parts: Vec<f64> = spec
                .par_chunks(ny * nz)
                .enumerate()
                .map(|(ix, slab)| {
                    let mut s = 0.0;
                    for iy in 0..ny {
                        for iz in 0..nz {
                            let xi = (kx[ix] * kx[ix] + ky[iy] * ky[iy] + kz[iz] * kz[iz]).sqrt();
                            let m = partition().delta(j, xi);
                            if m != 0.0 {
                                s += m * m * slab[iy * nz + iz].norm_sqr();
                            }
                        }
                    }
                    s
                })
                .collect();
            (j, (parts.iter().sum::<f64>() * scale).sqrt())
        })
        .collect()
}

/// Fraction of spectral energy at |ξ| > band_radius(j).
pub fn out_of_band_fraction(f: &Field3D, j: i32) -> f64 {
    let spec = f.spectrum();
    let [kx, ky, kz] = f.wavenumbers();
    let [_, ny, nz] = f.dims;
    let cut = band_radius(j) * (1.0 + 1e-12);
    let parts: Vec<(f64, f64)> = spec
        .par_chunks(ny * nz)
        .enumerate()
        .map(|(ix, slab)| {
            let (mut tot, mut out) = (0.0, 0.0);
            for iy in 0..ny {
                for iz in 0..nz {
                    let e = slab[iy * nz + iz].norm_sqr();
                    tot += e;
                    if (kx[ix] * kx[ix] + ky[iy] * ky[iy] + kz[iz] * kz[iz]).sqrt() > cut {
                        out += e;
                    }
                }
            }
            (tot, out)
        })
        .collect();
    let tot: f64 = parts.iter().map(|p| p.0).sum();
    let out: f64 = parts.iter().map(|p| p.1).sum();
    if tot == 0.0 {
        0.0
    } else {
        out / tot
    }
}

const BAND_TOLERANCE: f64 = 1e-24;

fn require_band(f: &Field3D, j: i32, what: &str) -> Result<()> {
    let fr = out_of_band_fraction(f, j);
    if fr > BAND_TOLERANCE {
        return Err(Error::Dealias(format!("{what}: energy fraction {fr:e} above |ξ| = {}", band_radius(j))));
    }
    Ok(())
}

/// sup over blocks of weighted block L^p norms.
pub fn besov_norm(f: &Field3D, sigma: f64, p: f64, flavor: Flavor) -> Result<f64> {
    if sigma.abs() > 4.0 {
        return Err(Error::Param(format!("|σ| = {} > 4", sigma.abs())));
    }
    if !(p >= 1.0) {
        return Err(Error::Exponent(format!("p = {p} < 1")));
    }
    match flavor {
        Flavor::Iso => Ok(blocks(f)
            .iter()
            .map(|(j, b)| 2f64.powf(*j as f64 * sigma) * b.lp_norm(p))
            .fold(0.0, f64::max)),
        Flavor::Aniso { alpha, beta } => {
            let spec = f.spectrum();
            let p_ = partition();
            let mut best = 0.0f64;
            for j in -1..=jmax_horizontal(f) {
                for k in -1..=jmax_vertical(f) {
                    let mut s = spec.clone();
                    f.apply_to_spectrum(&mut s, |a, b, c| real(p_.delta(j, (a * a + b * b).sqrt()) * p_.delta(k, c.abs())));
                    let n = f.from_spectrum(s).lp_norm(p);
                    best = best.max(2f64.powf(j as f64 * alpha + k as f64 * beta) * n);
                }
            }
            Ok(best)
        }
    }
}

/// Per-block weighted norms 2^{jσ}‖Δ_j f‖_p for j = −1..=j_max.
pub fn besov_profile(f: &Field3D, sigma: f64, p: f64) -> Vec<f64> {
    blocks(f).iter().map(|(j, b)| 2f64.powf(*j as f64 * sigma) * b.lp_norm(p)).collect()
}

/// (T_U V, T_V U, R(U, V)) with T_U V = Σ_j S_{j−1}U Δ_j V and R = Σ_{|i−j|≤1} Δ_i U Δ_j V.
pub fn bony_decompose(u: &Field3D, v: &Field3D) -> Result<(Field3D, Field3D, Field3D)> {
    assert!(u.same_shape(v));
    let jm = jmax_box(u);
    require_band(u, jm - 2, "U")?;
    require_band(v, jm - 2, "V")?;
    let bu: Vec<Field3D> = blocks(u).into_iter().map(|b| b.1).collect();
    let bv: Vec<Field3D> = blocks(v).into_iter().map(|b| b.1).collect();
    let nb = bu.len();
    let mut tuv = Field3D::zeros(u.dims, u.periods);
    let mut tvu = tuv.clone();
    let mut rem = tuv.clone();
    // index b ↔ block j = b − 1; S_{j−1} = Σ_{i ≤ j−2} Δ_i
    let mut su = tuv.clone();
    let mut sv = tuv.clone();
    for b in 0..nb {
        if b >= 2 {
            su = su.zip(&bu[b - 2], |a, c| a + c);
            sv = sv.zip(&bv[b - 2], |a, c| a + c);
            tuv = tuv.zip(&su.zip(&bv[b], |a, c| a * c), |a, c| a + c);
            tvu = tvu.zip(&sv.zip(&bu[b], |a, c| a * c), |a, c| a + c);
        }
        for c in b.saturating_sub(1)..(b + 2).min(nb) {
            rem = rem.zip(&bu[b].zip(&bv[c], |x, y| x * y), |a, d| a + d);
        }
    }
    Ok((tuv, tvu, rem))
}

/// Spectral divergence of a vector field.
pub fn divergence(u: &[Field3D; 3]) -> Field3D {
    let d0 = u[0].derivative(0);
    let d1 = u[1].derivative(1);
    let d2 = u[2].derivative(2);
    d0.zip(&d1, |a, b| a + b).zip(&d2, |a, b| a + b)
}

/// Spectral curl of a vector field.
pub fn curl(u: &[Field3D; 3]) -> [Field3D; 3] {
    let d = |c: usize, a: usize| u[c].derivative(a);
    [
        d(2, 1).zip(&d(1, 2), |a, b| a - b),
        d(0, 2).zip(&d(2, 0), |a, b| a - b),
        d(1, 0).zip(&d(0, 1), |a, b| a - b),
    ]
}

pub fn magnitude(u: &[Field3D; 3]) -> Field3D {
    u[0].zip(&u[1], |a, b| a * a + b * b).zip(&u[2], |a, b| (a + b * b).sqrt())
}

pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Relative divergence residual ‖div U‖₂ / Σ_i ‖∂_i U_i‖₂.
pub fn divergence_residual(u: &[Field3D; 3]) -> f64 {
    let scale: f64 = (0..3).map(|a| u[a].derivative(a).l2()).sum();
    if scale == 0.0 {
        return 0.0;
    }
    divergence(u).l2() / scale
}

/// R_q(U, V) = S_{q+1}U·∇Δ_q V − Δ_q(U·∇V).
pub fn commutator_rq(u: &[Field3D; 3], v: &Field3D, q: i32) -> Result<Field3D> {
    let jm = jmax_box(v);
    if q > jm || q < -1 {
        return Err(Error::BlockIndex { index: q, jmax: jm });
    }
    let res = divergence_residual(u);
    if res > DIVERGENCE_TOLERANCE {
        return Err(Error::Divergence(res));
    }
    for c in u {
        require_band(c, jm - 2, "U")?;
    }
    require_band(v, jm - 2, "V")?;
    let dq = lp_project(v, q, BlockKind::Delta)?;
    let mut first = Field3D::zeros(v.dims, v.periods);
    let mut adv = first.clone();
    for a in 0..3 {
        let su = lp_project(&u[a], q + 1, BlockKind::S)?;
        first = first.zip(&su.zip(&dq.derivative(a), |x, y| x * y), |x, y| x + y);
        adv = adv.zip(&u[a].zip(&v.derivative(a), |x, y| x * y), |x, y| x + y);
    }
    let second = lp_project(&adv, q, BlockKind::Delta)?;
    Ok(first.zip(&second, |x, y| x - y))
}

/// Λ^α, Λ_v^α or Λ_h^α; the zero mode maps to zero.
pub fn lambda_frac(f: &Field3D, alpha: f64, dir: Direction) -> Result<Field3D> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::Param(format!("α = {alpha} outside [0, 2]")));
    }
    Ok(f.multiplier(|a, b, c| {
        let xi = match dir {
            Direction::Full => (a * a + b * b + c * c).sqrt(),
            Direction::Vertical => c.abs(),
            Direction::Horizontal => (a * a + b * b).sqrt(),
        };
        real(if xi == 0.0 { 0.0 } else { xi.powf(alpha) })
    }))
}

/// Λ_v^α on meridian data.
pub fn lambda_v(f: &ScalarFieldRZ, alpha: f64) -> Result<ScalarFieldRZ> {
    if !(0.0..=2.0).contains(&alpha) {
        return Err(Error::Param(format!("α = {alpha} outside [0, 2]")));
    }
    Ok(f.z_multiplier(|c| if c == 0.0 { 0.0 } else { c.abs().powf(alpha) }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinReport {
    /// ‖Λ^α Δ_j F‖_q / (2^{αj + jn(1/p − 1/q)} ‖Δ_j F‖_p)
    pub upper: f64,
    /// ‖Λ^α Δ_j F‖_q / (2^{αj} ‖Δ_j F‖_q)
    pub two_sided: f64,
}

pub fn bernstein_check(f: &Field3D, j: i32, alpha: f64, p: f64, q: f64) -> Result<BernsteinReport> {
    let b = lp_project(f, j, BlockKind::Delta)?;
    let np = b.lp_norm(p);
    let nq = b.lp_norm(q);
    if np == 0.0 || nq == 0.0 {
        return Err(Error::ZeroBlock(format!("Δ_{j} F vanishes")));
    }
    let l = lambda_frac(&b, alpha, Direction::Full)?.lp_norm(q);
    let jf = j as f64;
    let inv = |x: f64| if x.is_infinite() { 0.0 } else { 1.0 / x };
    let upper = l / (2f64.powf(alpha * jf + jf * 3.0 * (inv(p) - inv(q))) * np);
    let two_sided = l / (2f64.powf(alpha * jf) * nq);
    Ok(BernsteinReport { upper, two_sided })
}

/// ‖FG‖_{B^s_{p,∞}} / (‖F‖_{p1}‖G‖_{B^s_{p2,∞}} + ‖G‖_{r1}‖F‖_{B^s_{r2,∞}}).
#[allow(clippy::too_many_arguments)]
pub fn product_estimate_ratio(f: &Field3D, g: &Field3D, s: f64, p: f64, p1: f64, p2: f64, r1: f64, r2: f64) -> Result<f64> {
    let jm = jmax_box(f);
    require_band(f, jm - 2, "F")?;
    require_band(g, jm - 2, "G")?;
    let fg = f.zip(g, |a, b| a * b);
    let lhs = besov_norm(&fg, s, p, Flavor::Iso)?;
    let rhs = f.lp_norm(p1) * besov_norm(g, s, p2, Flavor::Iso)? + g.lp_norm(r1) * besov_norm(f, s, r2, Flavor::Iso)?;
    Ok(if rhs == 0.0 { 0.0 } else { lhs / rhs })
}

/// White noise restricted to |ξ| ≤ band_radius(j), normalised to unit max.
pub fn random_bandlimited<R: Rng>(dims: [usize; 3], periods: [f64; 3], j: i32, rng: &mut R) -> Field3D {
    let noise: Vec<f64> = (0..dims[0] * dims[1] * dims[2]).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let f = Field3D { dims, periods, data: noise };
    let cut = band_radius(j);
    let g = f.multiplier(|a, b, c| real(if (a * a + b * b + c * c).sqrt() <= cut { 1.0 } else { 0.0 }));
    let m = g.max_abs();
    if m == 0.0 {
        g
    } else {
        g.map(|v| v / m)
    }
}

/// Divergence-free random field curl A with A band-limited to j − 0 (curl keeps the band).
pub fn random_solenoidal<R: Rng>(dims: [usize; 3], periods: [f64; 3], j: i32, rng: &mut R) -> [Field3D; 3] {
    let a = [
        random_bandlimited(dims, periods, j, rng),
        random_bandlimited(dims, periods, j, rng),
        random_bandlimited(dims, periods, j, rng),
    ];
    curl(&a)
}
