#![allow(dead_code)]

use axmhd::grid::{build_grid, GridRZ, Parity, ScalarFieldRZ};
use axmhd::solver::{Physics, Preset, Scheme, Solver, SolverConfig, State, StreamSolver};
use std::f64::consts::PI;
use std::sync::Arc;

pub fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

/// Cylindrical L² norm of a − b.
pub fn l2_diff(a: &ScalarFieldRZ, b: &ScalarFieldRZ) -> f64 {
    let g = &a.grid;
    let nz = g.nz;
    let s: f64 = (0..g.len()).map(|i| g.weight()[i / nz] * (a.values[i] - b.values[i]).powi(2)).sum();
    s.sqrt()
}

/// Error of the stream solve against ψ* = r(1 − r²/R²)² sin z on an n × 16 grid.
pub fn stream_mms_error(n: usize) -> f64 {
    let rr = 4.0;
    let g = build_grid(n, 16, rr, 2.0 * PI).unwrap();
    let r4 = rr.powi(4);
    let psi = ScalarFieldRZ::from_fn(&g, Parity::Odd, |r, z| r * (1.0 - r * r / (rr * rr)).powi(2) * z.sin());
    let omega = ScalarFieldRZ::from_fn(&g, Parity::Odd, |r, z| {
        let r2 = r * r;
        r * (r4 - 2.0 * rr * rr * r2 + 16.0 * rr * rr + r2 * r2 - 24.0 * r2) / r4 * z.sin()
    });
    let solved = StreamSolver::new(&g).solve(&omega);
    l2_diff(&solved, &psi) / l2_diff(&psi, &ScalarFieldRZ::zeros(&g, Parity::Odd))
}

fn mms_config(nr: usize, nz: usize, r_extent: f64, t_end: f64, dt: f64) -> SolverConfig {
    SolverConfig {
        nr,
        nz,
        r_extent,
        lz: 2.0 * PI,
        dt: Some(dt),
        t_end,
        cfl: 1.0,
        scheme: Scheme::Central2,
        dealias: false,
        cadence: 1,
        preset: Preset::default(),
        physics: Physics::default(),
    }
}

/// Manufactured pair ψ* = r e^{−r²} h(t) sin z, Π* = q(t) e^{−r²} cos z.
struct Exact;

impl Exact {
    fn h(t: f64) -> f64 {
        1.0 + 0.5 * t.sin()
    }
    fn dh(t: f64) -> f64 {
        0.5 * t.cos()
    }
    fn q(t: f64) -> f64 {
        0.5 * t.cos()
    }
    fn dq(t: f64) -> f64 {
        -0.5 * t.sin()
    }
    /// Γ = G(r) h sin z with G = e^{−r²}(9 − 4r²).
    fn big_g(r: f64) -> f64 {
        (-r * r).exp() * (9.0 - 4.0 * r * r)
    }
    fn big_g_r(r: f64) -> f64 {
        (-r * r).exp() * (-2.0 * r * (9.0 - 4.0 * r * r) - 8.0 * r)
    }
    fn gamma(r: f64, z: f64, t: f64) -> f64 {
        Self::big_g(r) * Self::h(t) * z.sin()
    }
    fn pi(r: f64, z: f64, t: f64) -> f64 {
        Self::q(t) * (-r * r).exp() * z.cos()
    }
    fn velocity(r: f64, z: f64, t: f64) -> (f64, f64) {
        let g = (-r * r).exp();
        (-r * g * Self::h(t) * z.cos(), g * (2.0 - 2.0 * r * r) * Self::h(t) * z.sin())
    }
    /// ∂_tΓ + u·∇Γ − ∂_zzΓ + ∂_z(Π²).
    fn forcing_gamma(r: f64, z: f64, t: f64) -> f64 {
        let (ur, uz) = Self::velocity(r, z, t);
        let h = Self::h(t);
        let gr = Self::big_g_r(r) * h * z.sin();
        let gz = Self::big_g(r) * h * z.cos();
        let p = Self::pi(r, z, t);
        let pz = -Self::q(t) * (-r * r).exp() * z.sin();
        Self::big_g(r) * Self::dh(t) * z.sin() + ur * gr + uz * gz + Self::gamma(r, z, t) + 2.0 * p * pz
    }
    /// ∂_tΠ + u·∇Π.
    fn forcing_pi(r: f64, z: f64, t: f64) -> f64 {
        let (ur, uz) = Self::velocity(r, z, t);
        let e = (-r * r).exp();
        let q = Self::q(t);
        Self::dq(t) * e * z.cos() + ur * (-2.0 * r * q * e * z.cos()) + uz * (-q * e * z.sin())
    }
}

fn exact_state(g: &Arc<GridRZ>, t: f64) -> State {
    State::new(
        t,
        ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| Exact::gamma(r, z, t)),
        ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| Exact::pi(r, z, t)),
    )
}

/// Relative L² error of (Γ, Π) at T = 0.2 after forced central2 steps of 1/200 on an
/// nr × 16 grid with analytic forcing.
pub fn full_step_mms_error(nr: usize) -> f64 {
    let (t_end, dt) = (0.2, 1.0 / 200.0);
    let solver = Solver::new(mms_config(nr, 16, 5.0, t_end, dt)).unwrap();
    let g = solver.grid.clone();
    let forcing = |t: f64| {
        let fg = ScalarFieldRZ::from_fn(&g, Parity::Even, |r, z| Exact::forcing_gamma(r, z, t));
        let fp = ScalarFieldRZ::from_fn(&g, Parity::Even, |r, z| Exact::forcing_pi(r, z, t));
        (fg.values, fp.values)
    };
    let mut s = exact_state(&g, 0.0);
    for _ in 0..(t_end / dt).round() as usize {
        s = solver.step_forced(&s, dt, Some(&forcing)).unwrap().0;
    }
    relative_error(&s, &exact_state(&g, s.t))
}

fn relative_error(s: &State, exact: &State) -> f64 {
    let g = s.grid();
    let zero = ScalarFieldRZ::zeros(g, Parity::Even);
    let num = l2_diff(&s.gamma, &exact.gamma).hypot(l2_diff(&s.pi, &exact.pi));
    let den = l2_diff(&exact.gamma, &zero).hypot(l2_diff(&exact.pi, &zero));
    num / den
}

/// Relative error at T = 0.5 on a 32 × 16 grid when the forcing makes the grid samples of
/// the manufactured pair an exact solution of the semi-discrete system.
pub fn temporal_mms_error(dt: f64) -> f64 {
    let t_end = 0.5;
    let solver = Solver::new(mms_config(32, 16, 5.0, t_end, dt)).unwrap();
    let g = solver.grid.clone();
    let forcing = |t: f64| {
        let s = exact_state(&g, t);
        let (ng, np) = solver.tendencies(&s);
        // dy*/dt − N_h(y*) − ∂_zz Γ*, with ∂_zz Γ* = −Γ* exactly on the sin z mode
        let fg = (0..g.len())
            .map(|i| {
                let (r, z) = (g.r()[i / g.nz], g.z()[i % g.nz]);
                Exact::big_g(r) * Exact::dh(t) * z.sin() - ng.values[i] + s.gamma.values[i]
            })
            .collect();
        let fp = (0..g.len())
            .map(|i| {
                let (r, z) = (g.r()[i / g.nz], g.z()[i % g.nz]);
                Exact::dq(t) * (-r * r).exp() * z.cos() - np.values[i]
            })
            .collect();
        (fg, fp)
    };
    let mut s = exact_state(&g, 0.0);
    for _ in 0..(t_end / dt).round() as usize {
        s = solver.step_forced(&s, dt, Some(&forcing)).unwrap().0;
    }
    relative_error(&s, &exact_state(&g, s.t))
}

/// Small configuration for invariants that do not need resolution.
pub fn small_config(t_end: f64) -> SolverConfig {
    SolverConfig { nr: 32, nz: 32, t_end, cadence: 1, ..SolverConfig::default() }
}
