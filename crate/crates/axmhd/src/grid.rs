//! Meridian-plane grid, axisymmetric scalar fields and cylindrical calculus.
//!
//! Storage is r-major with z fastest: value (i, k) lives at `i * nz + k`.

use crate::error::{Error, Result};
use crate::spectral::{self, det_max, det_sum, Plan, C64};
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct GridRZ {
    pub nr: usize,
    pub nz: usize,
    pub r_extent: f64,
    pub lz: f64,
    pub dr: f64,
    pub dz: f64,
    r: Vec<f64>,
    z: Vec<f64>,
    measure: Vec<f64>,
    weight: Vec<f64>,
    kz: Vec<f64>,
    dz_mult: Vec<C64>,
    plan: Plan,
}

impl GridRZ {
    pub fn r(&self) -> &[f64] {
        &self.r
    }

    /// z_k = -Lz/2 + k dz.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Cell measure m_i = 2π r_i dr dz.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Quadrature weight per radial index (midpoint plus end corrections).
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    /// Signed vertical wavenumbers in FFT order.
    pub fn kz(&self) -> &[f64] {
        &self.kz
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    pub fn len(&self) -> usize {
        self.nr * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        PI * self.r_extent * self.r_extent * self.lz
    }

    /// Largest vertical block index usable on this grid.
    pub fn kmax_vertical(&self) -> i32 {
        crate::lp::jmax_for(self.nz, self.lz)
    }

    /// Face radius r_{i+1/2} = (i+1) dr.
    pub fn r_face(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dr
    }

    pub fn same_shape(&self, other: &GridRZ) -> bool {
        self.nr == other.nr && self.nz == other.nz && self.r_extent == other.r_extent && self.lz == other.lz
    }
}

pub fn build_grid(nr: usize, nz: usize, r_extent: f64, lz: f64) -> Result<Arc<GridRZ>> {
    if nr < 8 {
        return Err(Error::Grid(format!("Nr = {nr} < 8")));
    }
    if nz < 8 || !nz.is_power_of_two() {
        return Err(Error::Grid(format!("Nz = {nz} must be a power of two >= 8")));
    }
    if !(r_extent > 0.0 && r_extent.is_finite()) || !(lz > 0.0 && lz.is_finite()) {
        return Err(Error::Grid(format!("extents must be positive (R = {r_extent}, Lz = {lz})")));
    }
    let dr = r_extent / nr as f64;
    // power-of-two division is exact, so dz * Nz == Lz
    let dz = lz / nz as f64;
    let r: Vec<f64> = (0..nr).map(|i| (i as f64 + 0.5) * dr).collect();
    let z: Vec<f64> = (0..nz).map(|k| -0.5 * lz + k as f64 * dz).collect();
    let measure: Vec<f64> = r.iter().map(|&ri| 2.0 * PI * ri * dr * dz).collect();
    let mut weight = measure.clone();
    let corr = [13.0 / 12.0, 7.0 / 8.0, 25.0 / 24.0];
    for (j, c) in corr.iter().enumerate() {
        weight[j] *= c;
        weight[nr - 1 - j] *= c;
    }
    let kz = spectral::wavenumbers(nz, lz);
    let dz_mult = spectral::derivative_multiplier(nz, lz);
    Ok(Arc::new(GridRZ { nr, nz, r_extent, lz, dr, dz, r, z, measure, weight, kz, dz_mult, plan: Plan::new(nz) }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn flip(self) -> Parity {
        match self {
            Parity::Even => Parity::Odd,
            Parity::Odd => Parity::Even,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScalarFieldRZ {
    pub grid: Arc<GridRZ>,
    pub values: Vec<f64>,
    pub parity: Parity,
}

impl ScalarFieldRZ {
    pub fn zeros(grid: &Arc<GridRZ>, parity: Parity) -> Self {
        ScalarFieldRZ { grid: grid.clone(), values: vec![0.0; grid.len()], parity }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(grid: &Arc<GridRZ>, parity: Parity, f: F) -> Self {
        let nz = grid.nz;
        let mut values = vec![0.0; grid.len()];
        values.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let ri = grid.r[i];
            for (k, v) in row.iter_mut().enumerate() {
                *v = f(ri, grid.z[k]);
            }
        });
        ScalarFieldRZ { grid: grid.clone(), values, parity }
    }

    pub fn with_values(grid: &Arc<GridRZ>, parity: Parity, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len());
        ScalarFieldRZ { grid: grid.clone(), values, parity }
    }

    #[inline]
    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.grid.nz + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let nz = self.grid.nz;
        &self.values[i * nz..(i + 1) * nz]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        let nz = self.grid.nz;
        det_max(self.grid.nr, |i| self.values[i * nz..(i + 1) * nz].iter().fold(0.0, |m, v| m.max(v.abs())))
    }

    /// Pointwise map keeping the grid; parity supplied by the caller.
    pub fn map(&self, parity: Parity, f: impl Fn(f64) -> f64 + Sync) -> Self {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        ScalarFieldRZ { grid: self.grid.clone(), values, parity }
    }

    /// Multiply row i by g(r_i).
    pub fn scale_r(&self, parity: Parity, g: impl Fn(f64) -> f64 + Sync) -> Self {
        let nz = self.grid.nz;
        let mut values = self.values.clone();
        values.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            let s = g(self.grid.r[i]);
            row.iter_mut().for_each(|v| *v *= s);
        });
        ScalarFieldRZ { grid: self.grid.clone(), values, parity }
    }

    pub fn zip(&self, other: &ScalarFieldRZ, parity: Parity, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        let values = self.values.par_iter().zip(other.values.par_iter()).map(|(&a, &b)| f(a, b)).collect();
        ScalarFieldRZ { grid: self.grid.clone(), values, parity }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(self.parity, |v| c * v)
    }

    /// Spectral z-derivative of order one.
    pub fn dz(&self) -> Self {
        let mut values = self.values.clone();
        spectral::filter_rows_complex(&self.grid.plan, &mut values, &self.grid.dz_mult);
        ScalarFieldRZ { grid: self.grid.clone(), values, parity: self.parity }
    }

    /// Applies a real multiplier m(ζ) in the vertical Fourier variable.
    pub fn z_multiplier(&self, m: impl Fn(f64) -> f64) -> Self {
        let mult: Vec<f64> = self.grid.kz.iter().map(|&k| m(k)).collect();
        let mut values = self.values.clone();
        spectral::filter_rows(&self.grid.plan, &mut values, &mult);
        ScalarFieldRZ { grid: self.grid.clone(), values, parity: self.parity }
    }
}

#[derive(Debug, Clone)]
pub struct VelocityRZ {
    pub ur: ScalarFieldRZ,
    pub uz: ScalarFieldRZ,
}

impl VelocityRZ {
    pub fn zeros(grid: &Arc<GridRZ>) -> Self {
        VelocityRZ { ur: ScalarFieldRZ::zeros(grid, Parity::Odd), uz: ScalarFieldRZ::zeros(grid, Parity::Even) }
    }
}

/// ∫ f 2πr dr dz with endpoint-corrected midpoint weights.
pub fn cylindrical_integral(f: &ScalarFieldRZ) -> f64 {
    let g = &f.grid;
    let nz = g.nz;
    det_sum(g.nr, |i| g.weight[i] * f.values[i * nz..(i + 1) * nz].iter().sum::<f64>())
}

/// Weighted sum of h(f) over cells.
pub fn integrate_with(f: &ScalarFieldRZ, h: impl Fn(f64) -> f64 + Sync) -> f64 {
    let g = &f.grid;
    let nz = g.nz;
    det_sum(g.nr, |i| g.weight[i] * f.values[i * nz..(i + 1) * nz].iter().map(|&v| h(v)).sum::<f64>())
}

/// Radial derivative: central interior, parity ghost at the axis, one-sided second order at the rim.
pub fn radial_derivative(f: &ScalarFieldRZ) -> ScalarFieldRZ {
    let g = &f.grid;
    let (nr, nz) = (g.nr, g.nz);
    let s = f.parity.sign();
    let inv2 = 0.5 / g.dr;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        for k in 0..nz {
            let at = |ii: usize| f.values[ii * nz + k];
            row[k] = if i == 0 {
                (at(1) - s * at(0)) * inv2
            } else if i == nr - 1 {
                (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) * inv2
            } else {
                (at(i + 1) - at(i - 1)) * inv2
            };
        }
    });
    ScalarFieldRZ { grid: g.clone(), values: out, parity: f.parity.flip() }
}

pub fn gradient_rz(f: &ScalarFieldRZ) -> (ScalarFieldRZ, ScalarFieldRZ) {
    (radial_derivative(f), f.dz())
}

/// (1/r) d/dr (r f) for an Odd field vanishing at r = R (odd reflection of r f about the rim face).
///
/// Shared by velocity recovery and the divergence so the two cancel exactly.
pub fn wall_flux_derivative(f: &ScalarFieldRZ) -> ScalarFieldRZ {
    let g = &f.grid;
    let (nr, nz) = (g.nr, g.nz);
    let inv2 = 0.5 / g.dr;
    let rn = g.r_extent + 0.5 * g.dr;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
        let ri = g.r[i];
        for k in 0..nz {
            let rf = |ii: usize| g.r[ii] * f.values[ii * nz + k];
            let lo = if i == 0 { rf(0) } else { rf(i - 1) };
            let hi = if i == nr - 1 { -rn * f.values[i * nz + k] } else { rf(i + 1) };
            row[k] = (hi - lo) * inv2 / ri;
        }
    });
    ScalarFieldRZ { grid: g.clone(), values: out, parity: Parity::Even }
}

/// ω_θ = ∂_z u_r − ∂_r u_z.
pub fn curl_theta(u: &VelocityRZ) -> ScalarFieldRZ {
    let dzur = u.ur.dz();
    let drz = radial_derivative(&u.uz);
    dzur.zip(&drz, Parity::Odd, |a, b| a - b)
}

/// Discrete (1/r)∂_r(r u_r) + ∂_z u_z and its L² norm.
pub fn divergence_axisym(u: &VelocityRZ) -> (ScalarFieldRZ, f64) {
    let a = wall_flux_derivative(&u.ur);
    let b = u.uz.dz();
    let d = a.zip(&b, Parity::Even, |x, y| x + y);
    let n = integrate_with(&d, |v| v * v).sqrt();
    (d, n)
}

/// ‖u‖_{L²} of a velocity field.
pub fn velocity_l2(u: &VelocityRZ) -> f64 {
    let g = &u.ur.grid;
    let nz = g.nz;
    det_sum(g.nr, |i| {
        let a = &u.ur.values[i * nz..(i + 1) * nz];
        let b = &u.uz.values[i * nz..(i + 1) * nz];
        g.weight[i] * a.iter().zip(b).map(|(x, y)| x * x + y * y).sum::<f64>()
    })
    .sqrt()
}
