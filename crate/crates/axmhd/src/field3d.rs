//! Triply periodic box fields and the bridge from meridian data.

use crate::error::{Error, Result};
use crate::grid::{Parity, ScalarFieldRZ, VelocityRZ};
use crate::spectral::{self, det_max, det_sum, Plan, C64};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

fn plan_cache() -> &'static Mutex<HashMap<usize, Plan>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plan>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

pub fn plan_for(n: usize) -> Plan {
    let mut c = plan_cache().lock().unwrap();
    c.entry(n).or_insert_with(|| Plan::new(n)).clone()
}

/// Box sample: horizontal coordinates are cell-centred (−L/2 + (i+½)dx, never on the axis),
/// vertical coordinates are nodal (−Lz/2 + k dz) to match the meridian grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field3D {
    pub dims: [usize; 3],
    pub periods: [f64; 3],
    pub data: Vec<f64>,
}

impl Field3D {
    pub fn zeros(dims: [usize; 3], periods: [f64; 3]) -> Self {
        Field3D { dims, periods, data: vec![0.0; dims[0] * dims[1] * dims[2]] }
    }

    /// Cube of side n and period l.
    pub fn cube(n: usize, l: f64) -> Self {
        Self::zeros([n, n, n], [l, l, l])
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        let h = self.periods[axis] / self.dims[axis] as f64;
        if axis < 2 {
            -0.5 * self.periods[axis] + (i as f64 + 0.5) * h
        } else {
            -0.5 * self.periods[axis] + i as f64 * h
        }
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64 + Sync>(dims: [usize; 3], periods: [f64; 3], f: F) -> Self {
        let mut out = Self::zeros(dims, periods);
        let proto = out.clone();
        let plane = dims[1] * dims[2];
        out.data.par_chunks_mut(plane).enumerate().for_each(|(ix, slab)| {
            let x = proto.coord(0, ix);
            for iy in 0..dims[1] {
                let y = proto.coord(1, iy);
                for iz in 0..dims[2] {
                    slab[iy * dims[2] + iz] = f(x, y, proto.coord(2, iz));
                }
            }
        });
        out
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..3).map(|a| self.periods[a] / self.dims[a] as f64).product()
    }

    pub fn same_shape(&self, o: &Field3D) -> bool {
        self.dims == o.dims && self.periods == o.periods
    }

    pub fn with_data(&self, data: Vec<f64>) -> Self {
        Field3D { dims: self.dims, periods: self.periods, data }
    }

    pub fn zip(&self, o: &Field3D, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        assert!(self.same_shape(o));
        self.with_data(self.data.par_iter().zip(o.data.par_iter()).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        self.with_data(self.data.par_iter().map(|&a| f(a)).collect())
    }

    pub fn max_abs(&self) -> f64 {
        let c = self.dims[2];
        det_max(self.data.len() / c, |j| self.data[j * c..(j + 1) * c].iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    pub fn mean(&self) -> f64 {
        let c = self.dims[2];
        det_sum(self.data.len() / c, |j| self.data[j * c..(j + 1) * c].iter().sum::<f64>()) / self.len() as f64
    }

    /// Box Lebesgue norm with uniform cell measure; p = ∞ gives the max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.max_abs();
        }
        let m = self.max_abs();
        if m == 0.0 {
            return 0.0;
        }
        let c = self.dims[2];
        let s = det_sum(self.data.len() / c, |j| {
            self.data[j * c..(j + 1) * c].iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>()
        });
        m * (s * self.cell_volume()).powf(1.0 / p)
    }

    pub fn l2(&self) -> f64 {
        self.lp_norm(2.0)
    }

    fn plans(&self) -> [Plan; 3] {
        [plan_for(self.dims[0]), plan_for(self.dims[1]), plan_for(self.dims[2])]
    }

    pub fn spectrum(&self) -> Vec<C64> {
        let mut buf: Vec<C64> = self.data.par_iter().map(|&v| C64::new(v, 0.0)).collect();
        spectral::fft3(&mut buf, self.dims, &self.plans(), false);
        buf
    }

    /// Real part of the inverse transform.
    pub fn from_spectrum(&self, mut spec: Vec<C64>) -> Self {
        spectral::fft3(&mut spec, self.dims, &self.plans(), true);
        self.with_data(spec.par_iter().map(|c| c.re).collect())
    }

    pub fn wavenumbers(&self) -> [Vec<f64>; 3] {
        [
            spectral::wavenumbers(self.dims[0], self.periods[0]),
            spectral::wavenumbers(self.dims[1], self.periods[1]),
            spectral::wavenumbers(self.dims[2], self.periods[2]),
        ]
    }

    /// Applies m(kx, ky, kz) in Fourier space.
    pub fn multiplier(&self, m: impl Fn(f64, f64, f64) -> C64 + Sync) -> Self {
        let mut spec = self.spectrum();
        self.apply_to_spectrum(&mut spec, m);
        self.from_spectrum(spec)
    }

    pub fn apply_to_spectrum(&self, spec: &mut [C64], m: impl Fn(f64, f64, f64) -> C64 + Sync) {
        let [kx, ky, kz] = self.wavenumbers();
        let [_, ny, nz] = self.dims;
        spec.par_chunks_mut(ny * nz).enumerate().for_each(|(ix, slab)| {
            for iy in 0..ny {
                for iz in 0..nz {
                    slab[iy * nz + iz] *= m(kx[ix], ky[iy], kz[iz]);
                }
            }
        });
    }

    /// Spectral partial derivative along an axis, Nyquist entries zeroed.
    pub fn derivative(&self, axis: usize) -> Self {
        let n = self.dims[axis];
        let l = self.periods[axis];
        let kmax = std::f64::consts::PI * n as f64 / l;
        self.multiplier(|kx, ky, kz| {
            let k = [kx, ky, kz][axis];
            if (k - kmax).abs() < 1e-9 * kmax {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, k)
            }
        })
    }
}

/// Spectral resampling of every row of a meridian field to `n` vertical points.
fn resample_rows(f: &ScalarFieldRZ, n: usize) -> Vec<f64> {
    let g = &f.grid;
    let nz = g.nz;
    if n == nz {
        return f.values.clone();
    }
    let p_in = plan_for(nz);
    let p_out = plan_for(n);
    let keep = nz.min(n) / 2;
    let mut out = vec![0.0; g.nr * n];
    out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let mut a: Vec<C64> = f.row(i).iter().map(|&v| C64::new(v, 0.0)).collect();
        p_in.forward(&mut a);
        let mut b = vec![C64::new(0.0, 0.0); n];
        let s = n as f64 / nz as f64;
        for m in 0..keep {
            b[m] = a[m] * s;
            if m > 0 {
                b[n - m] = a[nz - m] * s;
            }
        }
        p_out.inverse(&mut b);
        for (v, c) in row.iter_mut().zip(b) {
            *v = c.re;
        }
    });
    out
}

/// max |f| over r ≥ 0.9 R relative to max |f|.
pub fn support_fraction(f: &ScalarFieldRZ) -> f64 {
    let g = &f.grid;
    let m = f.max_abs();
    if m == 0.0 {
        return 0.0;
    }
    let outer = (0..g.nr).filter(|&i| g.r()[i] >= 0.9 * g.r_extent);
    outer.map(|i| f.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs()))).fold(0.0, f64::max) / m
}

pub const DECAY_TOLERANCE: f64 = 1e-8;

/// Cubic interpolation weights in r at radius rho; indices below zero use the parity ghost,
/// indices at or beyond Nr contribute zero.
fn radial_stencil(rho: f64, dr: f64) -> [(isize, f64); 4] {
    let s = rho / dr - 0.5;
    let i0 = s.floor() as isize;
    let t = s - i0 as f64;
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    [(i0 - 1, w[0]), (i0, w[1]), (i0 + 1, w[2]), (i0 + 2, w[3])]
}

/// Samples f(√(x²+y²), z) on an N×N×N box of horizontal period L.
pub fn reconstruct_cartesian(f: &ScalarFieldRZ, n: usize, l: f64) -> Result<Field3D> {
    reconstruct_with(f, n, l, |_, _, _| 1.0)
}

/// Reconstruction times an angular factor a(x, y, ρ) (used for vector components).
pub fn reconstruct_with(
    f: &ScalarFieldRZ,
    n: usize,
    l: f64,
    angular: impl Fn(f64, f64, f64) -> f64 + Sync,
) -> Result<Field3D> {
    let g = &f.grid;
    if !n.is_power_of_two() || n < 4 {
        return Err(Error::Param(format!("box size {n} must be a power of two >= 4")));
    }
    if l < 2.0 * g.r_extent {
        return Err(Error::Param(format!("box period {l} < 2R = {}", 2.0 * g.r_extent)));
    }
    let sf = support_fraction(f);
    if sf > DECAY_TOLERANCE {
        return Err(Error::Decay(format!("outer-rim amplitude fraction {sf:e} > {DECAY_TOLERANCE:e}")));
    }
    let mut out = Field3D::zeros([n, n, n], [l, l, g.lz]);
    let rows = resample_rows(f, n);
    let sign = f.parity.sign();
    let nr = g.nr as isize;
    let proto = out.clone();
    out.data.par_chunks_mut(n * n).enumerate().for_each(|(ix, slab)| {
        let x = proto.coord(0, ix);
        for iy in 0..n {
            let y = proto.coord(1, iy);
            let rho = (x * x + y * y).sqrt();
            if rho > g.r_extent {
                continue;
            }
            let a = angular(x, y, rho);
            let st = radial_stencil(rho, g.dr);
            let cell = &mut slab[iy * n..(iy + 1) * n];
            for &(ii, w) in st.iter() {
                let (idx, s) = if ii < 0 { ((-ii - 1) as usize, sign) } else if ii >= nr { continue } else { (ii as usize, 1.0) };
                let row = &rows[idx * n..(idx + 1) * n];
                let c = w * s * a;
                for (o, v) in cell.iter_mut().zip(row) {
                    *o += c * v;
                }
            }
        }
    });
    Ok(out)
}

/// Cartesian components (u_r x/ρ, u_r y/ρ, u_z).
pub fn reconstruct_velocity(u: &VelocityRZ, n: usize, l: f64) -> Result<[Field3D; 3]> {
    Ok([
        reconstruct_with(&u.ur, n, l, |x, _, rho| x / rho)?,
        reconstruct_with(&u.ur, n, l, |_, y, rho| y / rho)?,
        reconstruct_with(&u.uz, n, l, |_, _, _| 1.0)?,
    ])
}

/// Cartesian components (−b_θ y/ρ, b_θ x/ρ, 0).
pub fn reconstruct_azimuthal(b: &ScalarFieldRZ, n: usize, l: f64) -> Result<[Field3D; 3]> {
    debug_assert_eq!(b.parity, Parity::Odd);
    Ok([
        reconstruct_with(b, n, l, |_, y, rho| -y / rho)?,
        reconstruct_with(b, n, l, |x, _, rho| x / rho)?,
        Field3D::zeros([n, n, n], [l, l, b.grid.lz]),
    ])
}
