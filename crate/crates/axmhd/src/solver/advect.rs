//! Advection operators: central second-order advective form and a limited third-order
//! upwind-biased finite-volume form with exactly solenoidal face fluxes.

use crate::grid::{radial_derivative, GridRZ, ScalarFieldRZ, VelocityRZ};
use crate::spectral::det_max;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Central2,
    Upwind3,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Central2 => "central2",
            Scheme::Upwind3 => "upwind3",
        }
    }
}

/// 2/3-rule mask in the vertical Fourier variable.
pub fn dealias(f: &ScalarFieldRZ) -> ScalarFieldRZ {
    let g = &f.grid;
    let kcut = 2.0 * PI / g.lz * (g.nz / 3) as f64 * (1.0 + 1e-12);
    f.z_multiplier(|k| if k.abs() <= kcut { 1.0 } else { 0.0 })
}

/// −(u_r ∂_r q + u_z ∂_z q).
pub fn central_tendency(q: &ScalarFieldRZ, u: &VelocityRZ, dealias_z: bool) -> Vec<f64> {
    let dr = radial_derivative(q);
    let dz = q.dz();
    let t = u.ur.zip(&dr, q.parity, |a, b| a * b).zip(&u.uz.zip(&dz, q.parity, |a, b| a * b), q.parity, |a, b| -(a + b));
    if dealias_z {
        dealias(&t).values
    } else {
        t.values
    }
}

/// max over cells of |u_r|/dr + π|u_z|/dz (spectral z symbol bound).
pub fn central_rate(u: &VelocityRZ) -> f64 {
    let g = &u.ur.grid;
    let nz = g.nz;
    det_max(g.nr, |i| {
        (0..nz)
            .map(|k| u.ur.values[i * nz + k].abs() / g.dr + PI * u.uz.values[i * nz + k].abs() / g.dz)
            .fold(0.0, f64::max)
    })
}

/// Face volume fluxes divided by 2π.
#[derive(Debug, Clone)]
pub struct Fluxes {
    nr: usize,
    nz: usize,
    /// radial face between cells i and i+1 at row k: index i*nz + k, i < nr − 1
    pub radial: Vec<f64>,
    /// vertical face between k and k+1 in column i: index i*nz + k
    pub vertical: Vec<f64>,
}

/// Corner values of Ψ = rψ at (r_{i+1/2}, z_{k+1/2}); Ψ = 0 on the axis and the rim.
fn corner_stream(psi: &ScalarFieldRZ) -> Vec<f64> {
    let g = &psi.grid;
    let (nr, nz) = (g.nr, g.nz);
    let half = g.dz * 0.5;
    let nyq = g.nz / 2;
    let kz = g.kz().to_vec();
    let shift: Vec<crate::spectral::C64> = kz
        .iter()
        .enumerate()
        .map(|(m, &k)| if m == nyq { crate::spectral::C64::new(0.0, 0.0) } else { crate::spectral::C64::from_polar(1.0, k * half) })
        .collect();
    let mut shifted = psi.values.clone();
    crate::spectral::filter_rows_complex(g.plan(), &mut shifted, &shift);
    let mut out = vec![0.0; (nr + 1) * nz];
    out.par_chunks_mut(nz).enumerate().for_each(|(c, row)| {
        // c = i + 1 for corner i + 1/2, i = −1..nr−1
        if c == 0 || c == nr {
            return;
        }
        let i = c - 1;
        let rf = g.r_face(i);
        for k in 0..nz {
            row[k] = rf * 0.5 * (shifted[i * nz + k] + shifted[(i + 1) * nz + k]);
        }
    });
    out
}

pub fn fluxes(psi: &ScalarFieldRZ) -> Fluxes {
    let g = &psi.grid;
    let (nr, nz) = (g.nr, g.nz);
    let c = corner_stream(psi);
    let corner = |ci: usize, k: usize| c[ci * nz + k];
    let mut radial = vec![0.0; nr * nz];
    radial.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        if i + 1 >= nr {
            return;
        }
        for k in 0..nz {
            let km = (k + nz - 1) % nz;
            row[k] = -(corner(i + 1, k) - corner(i + 1, km));
        }
    });
    let mut vertical = vec![0.0; nr * nz];
    vertical.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        for k in 0..nz {
            row[k] = corner(i + 1, k) - corner(i, k);
        }
    });
    Fluxes { nr, nz, radial, vertical }
}

/// Koren-limited κ = 1/3 face value from upwind-side cells (far, near, across).
#[inline]
fn face_value(far: f64, near: f64, across: f64) -> f64 {
    let dm = near - far;
    let dp = across - near;
    if dm * dp <= 0.0 {
        return near;
    }
    let (a, b) = (dm.abs(), dp.abs());
    near + 0.5 * dm.signum() * (2.0 * b).min((a + 2.0 * b) / 3.0).min(2.0 * a)
}

/// −(1/V)Σ_faces F q_face for a cell-centred Even scalar.
pub fn upwind_tendency(q: &ScalarFieldRZ, fl: &Fluxes) -> Vec<f64> {
    let g = &q.grid;
    let (nr, nz) = (fl.nr, fl.nz);
    let qa = |i: isize, k: usize| -> f64 {
        let ii = i.clamp(0, nr as isize - 1) as usize;
        q.values[ii * nz + k]
    };
    let mut gr = vec![0.0; nr * nz];
    gr.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        if i + 1 >= nr {
            return;
        }
        let ii = i as isize;
        for k in 0..nz {
            let f = fl.radial[i * nz + k];
            let v = if f > 0.0 { face_value(qa(ii - 1, k), qa(ii, k), qa(ii + 1, k)) } else { face_value(qa(ii + 2, k), qa(ii + 1, k), qa(ii, k)) };
            row[k] = f * v;
        }
    });
    let mut gz = vec![0.0; nr * nz];
    gz.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        let col = &q.values[i * nz..(i + 1) * nz];
        let at = |k: isize| col[k.rem_euclid(nz as isize) as usize];
        for k in 0..nz {
            let f = fl.vertical[i * nz + k];
            let kk = k as isize;
            let v = if f > 0.0 { face_value(at(kk - 1), at(kk), at(kk + 1)) } else { face_value(at(kk + 2), at(kk + 1), at(kk)) };
            row[k] = f * v;
        }
    });
    let mut out = vec![0.0; nr * nz];
    out.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        let vol = g.r()[i] * g.dr * g.dz;
        for k in 0..nz {
            let km = (k + nz - 1) % nz;
            let mut net = gz[i * nz + k] - gz[i * nz + km];
            if i + 1 < nr {
                net += gr[i * nz + k];
            }
            if i > 0 {
                net -= gr[(i - 1) * nz + k];
            }
            row[k] = -net / vol;
        }
    });
    out
}

/// max over cells of (outgoing volume flux)/V.
pub fn upwind_rate(fl: &Fluxes, g: &GridRZ) -> f64 {
    let (nr, nz) = (fl.nr, fl.nz);
    det_max(nr, |i| {
        let vol = g.r()[i] * g.dr * g.dz;
        (0..nz)
            .map(|k| {
                let km = (k + nz - 1) % nz;
                let mut out = fl.vertical[i * nz + k].max(0.0) + (-fl.vertical[i * nz + km]).max(0.0);
                if i + 1 < nr {
                    out += fl.radial[i * nz + k].max(0.0);
                }
                if i > 0 {
                    out += (-fl.radial[(i - 1) * nz + k]).max(0.0);
                }
                out / vol
            })
            .fold(0.0, f64::max)
    })
}

/// Net outflow per cell divided by V (zero to rounding by construction).
pub fn flux_divergence(fl: &Fluxes, g: &GridRZ) -> Vec<f64> {
    let (nr, nz) = (fl.nr, fl.nz);
    let mut out = vec![0.0; nr * nz];
    for i in 0..nr {
        let vol = g.r()[i] * g.dr * g.dz;
        for k in 0..nz {
            let km = (k + nz - 1) % nz;
            let mut net = fl.vertical[i * nz + k] - fl.vertical[i * nz + km];
            if i + 1 < nr {
                net += fl.radial[i * nz + k];
            }
            if i > 0 {
                net -= fl.radial[(i - 1) * nz + k];
            }
            out[i * nz + k] = net / vol;
        }
    }
    out
}
