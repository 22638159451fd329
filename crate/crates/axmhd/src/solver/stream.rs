//! Stream function: −(∂_rr + ∂_r/r − 1/r² + ∂_zz)ψ = ω_θ, ψ(R) = 0, ψ odd at the axis.
//!
//! Radial operator in flux form (1/r)∂_r(r∂_rψ) − ψ/r² on the cell-centred grid; the axis
//! face has zero area so no ghost is needed there, the rim uses ψ_N = −ψ_{N−1}.

use crate::grid::{wall_flux_derivative, GridRZ, Parity, ScalarFieldRZ, VelocityRZ};
use crate::spectral::{det_sum, C64};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone)]
struct Factor {
    cprime: Vec<f64>,
    inv_den: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StreamSolver {
    grid: Arc<GridRZ>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    factors: Vec<Factor>,
}

impl StreamSolver {
    pub fn new(grid: &Arc<GridRZ>) -> Self {
        let g = grid.as_ref();
        let n = g.nr;
        let dr2 = g.dr * g.dr;
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let ri = g.r()[i];
            let rm = i as f64 * g.dr;
            let rp = g.r_face(i);
            lower[i] = -rm / (ri * dr2);
            upper[i] = -rp / (ri * dr2);
            diag[i] = (rm + rp) / (ri * dr2) + 1.0 / (ri * ri);
        }
        diag[n - 1] -= upper[n - 1];
        upper[n - 1] = 0.0;
        let factors = (0..=g.nz / 2)
            .map(|m| {
                let k2 = g.kz()[m] * g.kz()[m];
                let mut cprime = vec![0.0; n];
                let mut inv_den = vec![0.0; n];
                let mut prev = 0.0;
                for i in 0..n {
                    let den = diag[i] + k2 - lower[i] * prev;
                    assert!(den.abs() > 0.0, "singular stream system");
                    inv_den[i] = 1.0 / den;
                    cprime[i] = upper[i] * inv_den[i];
                    prev = cprime[i];
                }
                Factor { cprime, inv_den }
            })
            .collect();
        StreamSolver { grid: grid.clone(), lower, diag, upper, factors }
    }

    pub fn grid(&self) -> &Arc<GridRZ> {
        &self.grid
    }

    fn mode_index(&self, m: usize) -> usize {
        let nz = self.grid.nz;
        if m <= nz / 2 {
            m
        } else {
            nz - m
        }
    }

    pub fn solve(&self, omega: &ScalarFieldRZ) -> ScalarFieldRZ {
        let g = self.grid.as_ref();
        let (nr, nz) = (g.nr, g.nz);
        let plan = g.plan();
        let mut spec: Vec<C64> = omega.values.par_iter().map(|&v| C64::new(v, 0.0)).collect();
        spec.par_chunks_mut(nz).for_each(|row| plan.forward(row));
        let mut modes = vec![C64::new(0.0, 0.0); nr * nz];
        modes.par_chunks_mut(nr).enumerate().for_each(|(m, col)| {
            let f = &self.factors[self.mode_index(m)];
            let mut prev = C64::new(0.0, 0.0);
            for i in 0..nr {
                prev = (spec[i * nz + m] - prev * self.lower[i]) * f.inv_den[i];
                col[i] = prev;
            }
            for i in (0..nr - 1).rev() {
                let next = col[i + 1];
                col[i] -= next * f.cprime[i];
            }
        });
        let mut values = vec![0.0; nr * nz];
        values.par_chunks_mut(nz).enumerate().for_each_init(
            || vec![C64::new(0.0, 0.0); nz],
            |buf, (i, row)| {
                for m in 0..nz {
                    buf[m] = modes[m * nr + i];
                }
                plan.inverse(buf);
                for (v, b) in row.iter_mut().zip(buf.iter()) {
                    *v = b.re;
                }
            },
        );
        ScalarFieldRZ::with_values(&self.grid, Parity::Odd, values)
    }

    /// The discrete operator −L_h ψ (radial stencil plus spectral −∂_zz).
    pub fn apply(&self, psi: &ScalarFieldRZ) -> ScalarFieldRZ {
        let g = self.grid.as_ref();
        let (nr, nz) = (g.nr, g.nz);
        let dzz = psi.z_multiplier(|k| k * k);
        let mut out = vec![0.0; nr * nz];
        out.par_chunks_mut(nz).enumerate().for_each(|(i, row)| {
            for k in 0..nz {
                let mut v = self.diag[i] * psi.values[i * nz + k];
                if i > 0 {
                    v += self.lower[i] * psi.values[(i - 1) * nz + k];
                }
                if i + 1 < nr {
                    v += self.upper[i] * psi.values[(i + 1) * nz + k];
                }
                row[k] = v + dzz.values[i * nz + k];
            }
        });
        ScalarFieldRZ::with_values(&self.grid, Parity::Odd, out)
    }

    /// ‖−L_h ψ − ω‖ / ‖ω‖ with the cylindrical L² norm.
    pub fn residual(&self, psi: &ScalarFieldRZ, omega: &ScalarFieldRZ) -> f64 {
        let a = self.apply(psi);
        let g = self.grid.as_ref();
        let nz = g.nz;
        let num = det_sum(g.nr, |i| {
            g.weight()[i] * (0..nz).map(|k| (a.values[i * nz + k] - omega.values[i * nz + k]).powi(2)).sum::<f64>()
        });
        let den = det_sum(g.nr, |i| g.weight()[i] * omega.row(i).iter().map(|v| v * v).sum::<f64>());
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}

/// u_r = −∂_zψ, u_z = (1/r)∂_r(rψ) with the stencil shared by the divergence.
pub fn recover_velocity(psi: &ScalarFieldRZ) -> VelocityRZ {
    let ur = psi.dz().scaled(-1.0);
    let uz = wall_flux_derivative(psi);
    VelocityRZ { ur: ScalarFieldRZ { parity: Parity::Odd, ..ur }, uz }
}
