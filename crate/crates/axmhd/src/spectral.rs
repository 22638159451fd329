//! Periodic FFT helpers: row transforms along z and full 3D transforms.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub type C64 = Complex64;

/// Signed wavenumbers 2πn/L in FFT order. The Nyquist entry is reported as +π N/L.
pub fn wavenumbers(n: usize, period: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / period;
    (0..n)
        .map(|m| {
            let s = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            base * s
        })
        .collect()
}

/// Forward/inverse plan pair for one transform length.
#[derive(Clone)]
pub struct Plan {
    pub n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Plan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Plan({})", self.n)
    }
}

impl Plan {
    pub fn new(n: usize) -> Self {
        let mut p = FftPlanner::new();
        Plan { n, fwd: p.plan_fft_forward(n), inv: p.plan_fft_inverse(n) }
    }

    pub fn forward(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    /// Inverse transform including the 1/n normalization.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        let s = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Applies a real multiplier `m[k]` to every contiguous row of length `plan.n`.
pub fn filter_rows(plan: &Plan, data: &mut [f64], m: &[f64]) {
    let n = plan.n;
    data.par_chunks_mut(n).for_each_init(
        || vec![C64::new(0.0, 0.0); n],
        |buf, row| {
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = C64::new(v, 0.0);
            }
            plan.forward(buf);
            for (b, &f) in buf.iter_mut().zip(m) {
                *b *= f;
            }
            plan.inverse(buf);
            for (v, b) in row.iter_mut().zip(buf.iter()) {
                *v = b.re;
            }
        },
    );
}

/// Applies a complex multiplier to every row (used for odd-order derivatives).
pub fn filter_rows_complex(plan: &Plan, data: &mut [f64], m: &[C64]) {
    let n = plan.n;
    data.par_chunks_mut(n).for_each_init(
        || vec![C64::new(0.0, 0.0); n],
        |buf, row| {
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = C64::new(v, 0.0);
            }
            plan.forward(buf);
            for (b, &f) in buf.iter_mut().zip(m) {
                *b *= f;
            }
            plan.inverse(buf);
            for (v, b) in row.iter_mut().zip(buf.iter()) {
                *v = b.re;
            }
        },
    );
}

/// Multiplier of the first derivative, Nyquist mode zeroed.
pub fn derivative_multiplier(n: usize, period: f64) -> Vec<C64> {
    let k = wavenumbers(n, period);
    k.iter()
        .enumerate()
        .map(|(m, &km)| if n % 2 == 0 && m == n / 2 { C64::new(0.0, 0.0) } else { C64::new(0.0, km) })
        .collect()
}

/// In-place 3D transform of a row-major (x slowest, z fastest) complex array.
pub fn fft3(data: &mut [C64], dims: [usize; 3], plans: &[Plan; 3], inverse: bool) {
    let [nx, ny, nz] = dims;
    let run = |p: &Plan, b: &mut [C64]| if inverse { p.inverse(b) } else { p.forward(b) };
    // z lines are contiguous
    data.par_chunks_mut(nz).for_each(|line| run(&plans[2], line));
    // y lines: stride nz inside each x slab
    data.par_chunks_mut(ny * nz).for_each_init(
        || vec![C64::new(0.0, 0.0); ny],
        |buf, slab| {
            for iz in 0..nz {
                for iy in 0..ny {
                    buf[iy] = slab[iy * nz + iz];
                }
                run(&plans[1], buf);
                for iy in 0..ny {
                    slab[iy * nz + iz] = buf[iy];
                }
            }
        },
    );
    // x lines: gather columns, transform, scatter
    let plane = ny * nz;
    let mut cols: Vec<C64> = vec![C64::new(0.0, 0.0); data.len()];
    cols.par_chunks_mut(nx).enumerate().for_each(|(c, col)| {
        for ix in 0..nx {
            col[ix] = data[ix * plane + c];
        }
        run(&plans[0], col);
    });
    data.par_chunks_mut(plane).enumerate().for_each(|(ix, slab)| {
        for c in 0..plane {
            slab[c] = cols[c * nx + ix];
        }
    });
}

/// Sequential sum of per-chunk partial sums; order is fixed so results are reproducible.
pub fn det_sum<F>(n_chunks: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..n_chunks).into_par_iter().map(&f).collect();
    parts.iter().sum()
}

/// Maximum over chunks, reproducible.
pub fn det_max<F>(n_chunks: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..n_chunks).into_par_iter().map(&f).collect();
    parts.iter().cloned().fold(0.0, f64::max)
}
