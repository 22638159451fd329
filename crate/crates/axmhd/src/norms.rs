//! Lebesgue, Lorentz, 𝕃^a and Sobolev functionals of fields.

use crate::error::{Error, Result};
use crate::field3d::Field3D;
use crate::grid::ScalarFieldRZ;
use crate::lp;
use crate::spectral::det_sum;
use std::collections::BTreeMap;

pub const P_MAX: f64 = 256.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PGrid {
    ps: Vec<f64>,
}

impl Default for PGrid {
    fn default() -> Self {
        PGrid { ps: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0] }
    }
}

impl PGrid {
    pub fn new(ps: Vec<f64>) -> Result<Self> {
        if ps.is_empty() || ps[0] != 2.0 {
            return Err(Error::Exponent("PGrid must start at 2".into()));
        }
        if ps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Exponent("PGrid must be strictly increasing".into()));
        }
        if ps.iter().any(|p| !p.is_finite() || *p > P_MAX) {
            return Err(Error::Exponent(format!("PGrid entries must be finite and <= {P_MAX}")));
        }
        Ok(PGrid { ps })
    }

    pub fn ps(&self) -> &[f64] {
        &self.ps
    }
}

/// Named norm values at one instant.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NormReport {
    pub t: f64,
    pub values: BTreeMap<String, f64>,
}

impl NormReport {
    pub fn new(t: f64) -> Self {
        NormReport { t, values: BTreeMap::new() }
    }

    pub fn insert(&mut self, key: &str, v: f64) {
        debug_assert!(v >= 0.0 && v.is_finite(), "{key} = {v}");
        self.values.insert(key.to_string(), v);
    }
}

/// (Σ |f|^p w)^{1/p}, evaluated as M (Σ w exp(p log(|f|/M)))^{1/p} with M = max|f|.
pub fn lp_norm(f: &ScalarFieldRZ, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Exponent(format!("p = {p} < 1")));
    }
    let m = f.max_abs();
    if p.is_infinite() || m == 0.0 {
        return Ok(m);
    }
    let g = &f.grid;
    let nz = g.nz;
    let s = det_sum(g.nr, |i| {
        g.weight()[i]
            * f.values[i * nz..(i + 1) * nz]
                .iter()
                .map(|&v| if v == 0.0 { 0.0 } else { (p * (v.abs() / m).ln()).exp() })
                .sum::<f64>()
    });
    Ok(m * s.powf(1.0 / p))
}

/// Decreasing rearrangement as (value, cumulative measure) steps.
fn rearrangement(f: &ScalarFieldRZ) -> Vec<(f64, f64)> {
    let g = &f.grid;
    let nz = g.nz;
    let mut cells: Vec<(f64, f64)> = (0..g.len())
        .map(|idx| (f.values[idx].abs(), g.weight()[idx / nz]))
        .filter(|(a, _)| *a > 0.0)
        .collect();
    cells.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut steps: Vec<(f64, f64)> = Vec::with_capacity(cells.len());
    let mut t = 0.0;
    for (a, w) in cells {
        t += w;
        match steps.last_mut() {
            Some(last) if last.0 == a => last.1 = t,
            _ => steps.push((a, t)),
        }
    }
    steps
}

/// ‖f‖_{L^{p,q}} from the exact step-function rearrangement.
pub fn lorentz_norm(f: &ScalarFieldRZ, p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Exponent(format!("Lorentz p = {p} must satisfy 1 < p < ∞")));
    }
    if !(q == 1.0 || q >= 2.0) {
        return Err(Error::Exponent(format!("Lorentz q = {q} must be 1 or >= 2")));
    }
    let steps = rearrangement(f);
    if steps.is_empty() {
        return Ok(0.0);
    }
    if q.is_infinite() {
        return Ok(steps.iter().map(|&(a, t)| a * t.powf(1.0 / p)).fold(0.0, f64::max));
    }
    let e = q / p;
    let mut prev = 0.0f64;
    let mut s = 0.0;
    for &(a, t) in &steps {
        let tp = t.powf(e);
        s += a.powf(q) * (tp - prev);
        prev = tp;
    }
    Ok(((p / q) * s).powf(1.0 / q))
}

/// Result of a sup over the exponent grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LaReport {
    pub value: f64,
    pub argmax_p: f64,
    /// p ↦ ‖f‖_p / p^a is non-increasing from the maximiser to P_max.
    pub tail_decreasing: bool,
}

pub fn la_report(f: &ScalarFieldRZ, a: f64, pgrid: &PGrid) -> Result<LaReport> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Exponent(format!("a = {a} outside [0, 1]")));
    }
    let vals: Vec<f64> = pgrid.ps().iter().map(|&p| lp_norm(f, p).map(|v| v / p.powf(a))).collect::<Result<_>>()?;
    let (imax, value) = vals.iter().enumerate().fold((0, 0.0), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let tail_decreasing = vals[imax..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(LaReport { value, argmax_p: pgrid.ps()[imax], tail_decreasing })
}

pub fn la_norm(f: &ScalarFieldRZ, a: f64, pgrid: &PGrid) -> Result<f64> {
    la_report(f, a, pgrid).map(|r| r.value)
}

pub fn sqrtl_norm(f: &ScalarFieldRZ, pgrid: &PGrid) -> f64 {
    la_norm(f, 0.5, pgrid).expect("a = 1/2 is admissible")
}

/// (Σ_j 2^{2js} ‖Δ_j F‖²)^{1/2} over j = −1..j_max.
pub fn sobolev_hs_norm(f: &Field3D, s: f64) -> Result<f64> {
    if !(0.0..=4.0).contains(&s) {
        return Err(Error::Param(format!("Sobolev index {s} outside [0, 4]")));
    }
    let blocks = lp::block_l2_norms(f);
    Ok(blocks.iter().map(|&(j, n)| 2f64.powf(2.0 * j as f64 * s) * n * n).sum::<f64>().sqrt())
}
