//! Four-stage third-order strong-stability-preserving Runge–Kutta with an exact vertical
//! integrating factor.
//!
//! Shu–Osher form (h = 11/20 dt, abscissas 0, 11/20, 11/16, 11/16, SSP coefficient 20/11):
//!   y1 = y + h F(y)
//!   y2 = 3/8 y + 5/8 (y1 + h F(y1))
//!   y3 = 4/9 y + 5/9 (y2 + h F(y2))
//!   y+ = 111/1331 y + 260/1331 y1 + 960/1331 (y3 + h F(y3))
//! Abscissas never decrease, so every integrating factor e^{(c_i − c_k) dt ∂_zz} is a forward
//! heat flow. Each stage is a convex combination of forward-Euler steps of size h.

use crate::grid::GridRZ;
use crate::spectral;

pub const H: f64 = 11.0 / 20.0;
pub const C1: f64 = 11.0 / 20.0;
pub const C2: f64 = 11.0 / 16.0;
pub const SSP_COEFFICIENT: f64 = 20.0 / 11.0;

/// Vertical heat flow e^{τ ∂_zz} applied to every row.
pub fn heat(g: &GridRZ, values: &mut [f64], tau: f64) {
    if tau == 0.0 {
        return;
    }
    let m: Vec<f64> = g.kz().iter().map(|k| (-k * k * tau).exp()).collect();
    spectral::filter_rows(g.plan(), values, &m);
}

/// One step for a set of fields; `diffusive[f]` selects which fields carry ∂_zz.
pub fn step<F, E>(g: &GridRZ, y: &[Vec<f64>], diffusive: &[bool], t: f64, dt: f64, mut rhs: F) -> Result<Vec<Vec<f64>>, E>
where
    F: FnMut(f64, &[Vec<f64>]) -> Result<Vec<Vec<f64>>, E>,
{
    let h = H * dt;
    let e = |v: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> {
        v.iter()
            .zip(diffusive)
            .map(|(f, &d)| {
                let mut f = f.clone();
                if d {
                    heat(g, &mut f, c * dt);
                }
                f
            })
            .collect()
    };
    let euler = |v: &[Vec<f64>], r: &[Vec<f64>]| -> Vec<Vec<f64>> {
        v.iter().zip(r).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + h * y).collect()).collect()
    };
    let comb = |terms: &[(f64, &Vec<Vec<f64>>)]| -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = terms[0].1.iter().map(|f| f.iter().map(|x| terms[0].0 * x).collect()).collect();
        for (c, v) in &terms[1..] {
            for (o, f) in out.iter_mut().zip(v.iter()) {
                for (a, b) in o.iter_mut().zip(f) {
                    *a += c * b;
                }
            }
        }
        out
    };

    let f0 = rhs(t, y)?;
    let y1 = e(&euler(y, &f0), C1);
    let f1 = rhs(t + C1 * dt, &y1)?;
    let ey_c2 = e(y, C2);
    let y2 = comb(&[(3.0 / 8.0, &ey_c2), (5.0 / 8.0, &e(&euler(&y1, &f1), C2 - C1))]);
    let f2 = rhs(t + C2 * dt, &y2)?;
    let y3 = comb(&[(4.0 / 9.0, &ey_c2), (5.0 / 9.0, &euler(&y2, &f2))]);
    let f3 = rhs(t + C2 * dt, &y3)?;
    Ok(comb(&[
        (111.0 / 1331.0, &e(y, 1.0)),
        (260.0 / 1331.0, &e(&y1, 1.0 - C1)),
        (960.0 / 1331.0, &e(&euler(&y3, &f3), 1.0 - C2)),
    ]))
}
