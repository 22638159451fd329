//! Time integration in the variables Γ = ω_θ/r and Π = b_θ/r:
//!   ∂_tΓ + u·∇Γ − ∂_zzΓ = −∂_z(Π²),   ∂_tΠ + u·∇Π = 0,   u = ∇×(ψ e_θ), −Lψ = rΓ.

pub mod advect;
pub mod ic;
pub mod stepper;
pub mod stream;

use crate::error::{Error, Result};
use crate::grid::{build_grid, divergence_axisym, velocity_l2, GridRZ, Parity, ScalarFieldRZ, VelocityRZ};
pub use advect::Scheme;
pub use ic::{initial_condition, Preset};
use std::f64::consts::PI;
use std::sync::Arc;
pub use stream::{recover_velocity, StreamSolver};

/// Switches used by verification runs; all on for the physical system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Physics {
    pub advection: bool,
    pub lorentz: bool,
    pub diffusion: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Physics { advection: true, lorentz: true, diffusion: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nr: usize,
    pub nz: usize,
    pub r_extent: f64,
    pub lz: f64,
    /// Fixed step; chosen from the initial state when absent.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    pub cadence: usize,
    pub preset: Preset,
    pub physics: Physics,
}

/// ν_z is fixed to one by normalisation.
pub const NU_Z: f64 = 1.0;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            nr: 128,
            nz: 128,
            r_extent: 4.0,
            lz: 2.0 * PI,
            dt: None,
            t_end: 5.0,
            cfl: 0.4,
            scheme: Scheme::Central2,
            dealias: false,
            cadence: 10,
            preset: Preset::default(),
            physics: Physics::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Param(format!("dt = {dt} must be positive")));
            }
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::Param(format!("CFL factor {} outside (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Param(format!("T_end = {} must be >= 0", self.t_end)));
        }
        if self.cadence == 0 {
            return Err(Error::Param("cadence must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Derived {
    pub psi: ScalarFieldRZ,
    pub u: VelocityRZ,
    pub omega: ScalarFieldRZ,
    pub btheta: ScalarFieldRZ,
    pub fluxes: advect::Fluxes,
}

#[derive(Debug, Clone)]
pub struct State {
    pub t: f64,
    pub gamma: ScalarFieldRZ,
    pub pi: ScalarFieldRZ,
    derived: Option<Derived>,
}

impl State {
    pub fn new(t: f64, gamma: ScalarFieldRZ, pi: ScalarFieldRZ) -> Self {
        State { t, gamma, pi, derived: None }
    }

    pub fn zero(grid: &Arc<GridRZ>) -> Self {
        State::new(0.0, ScalarFieldRZ::zeros(grid, Parity::Even), ScalarFieldRZ::zeros(grid, Parity::Even))
    }

    pub fn grid(&self) -> &Arc<GridRZ> {
        &self.gamma.grid
    }

    pub fn derived(&self) -> Option<&Derived> {
        self.derived.as_ref()
    }

    pub fn invalidate(&mut self) {
        self.derived = None;
    }

    /// Fills the derived cache if it is stale.
    pub fn ensure_derived(&mut self, stream: &StreamSolver) -> &Derived {
        if self.derived.is_none() {
            self.derived = Some(derive(stream, &self.gamma, &self.pi));
        }
        self.derived.as_ref().unwrap()
    }

    pub fn bitwise_eq(&self, other: &State) -> bool {
        self.t.to_bits() == other.t.to_bits()
            && self.gamma.values.iter().zip(&other.gamma.values).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.pi.values.iter().zip(&other.pi.values).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.gamma.values.len() == other.gamma.values.len()
    }
}

pub fn derive(stream: &StreamSolver, gamma: &ScalarFieldRZ, pi: &ScalarFieldRZ) -> Derived {
    let omega = gamma.scale_r(Parity::Odd, |r| r);
    let btheta = pi.scale_r(Parity::Odd, |r| r);
    let psi = stream.solve(&omega);
    let u = recover_velocity(&psi);
    let fluxes = advect::fluxes(&psi);
    Derived { psi, u, omega, btheta, fluxes }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub courant: f64,
    /// ‖div u‖ / ‖u‖ after the step.
    pub divergence: f64,
}

pub type Forcing<'a> = &'a (dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Sync);

pub struct Solver {
    pub cfg: SolverConfig,
    pub grid: Arc<GridRZ>,
    pub stream: StreamSolver,
}

impl Solver {
    pub fn new(cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = build_grid(cfg.nr, cfg.nz, cfg.r_extent, cfg.lz)?;
        let stream = StreamSolver::new(&grid);
        Ok(Solver { cfg, grid, stream })
    }

    pub fn initial_state(&self) -> Result<State> {
        initial_condition(&self.cfg.preset, &self.grid)
    }

    /// Advective transport rate whose product with dt is the Courant number.
    pub fn transport_rate(&self, d: &Derived) -> f64 {
        match self.cfg.scheme {
            Scheme::Central2 => advect::central_rate(&d.u),
            Scheme::Upwind3 => advect::upwind_rate(&d.fluxes, &self.grid),
        }
    }

    /// Step from the initial state: Courant number cfl/2 against the flow plus the
    /// magnetic wave speed max|b_θ|, leaving headroom for growth; T_end is an integer
    /// number of steps.
    pub fn default_dt(&self, s: &mut State) -> f64 {
        let g = self.grid.clone();
        let d = s.ensure_derived(&self.stream);
        let flow = if self.cfg.physics.advection { self.transport_rate(d) } else { 0.0 };
        let wave = d.btheta.max_abs() * (1.0 / g.dr + PI / g.dz);
        let rate = flow + wave;
        let t_end = self.cfg.t_end;
        let mut dt = if rate > 0.0 { 0.5 * self.cfg.cfl / rate } else { 0.05 };
        dt = dt.min(0.05);
        if t_end > 0.0 {
            let n = (t_end / dt).ceil().max(1.0);
            dt = t_end / n;
        }
        dt
    }

    fn tendencies_of(&self, gamma: &[f64], pi: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let g = &self.grid;
        let gam = ScalarFieldRZ::with_values(g, Parity::Even, gamma.to_vec());
        let pif = ScalarFieldRZ::with_values(g, Parity::Even, pi.to_vec());
        let n = g.len();
        let mut dg = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let mut rate = 0.0;
        if self.cfg.physics.advection {
            let d = derive(&self.stream, &gam, &pif);
            rate = self.transport_rate(&d);
            match self.cfg.scheme {
                Scheme::Central2 => {
                    dg = advect::central_tendency(&gam, &d.u, self.cfg.dealias);
                    dp = advect::central_tendency(&pif, &d.u, self.cfg.dealias);
                }
                Scheme::Upwind3 => {
                    dg = advect::upwind_tendency(&gam, &d.fluxes);
                    dp = advect::upwind_tendency(&pif, &d.fluxes);
                }
            }
        }
        if self.cfg.physics.lorentz {
            let mut sq = pif.map(Parity::Even, |v| v * v);
            if self.cfg.dealias {
                sq = advect::dealias(&sq);
            }
            let s = sq.dz();
            for (a, b) in dg.iter_mut().zip(&s.values) {
                *a -= b;
            }
        }
        (dg, dp, rate)
    }

    /// (dΓ/dt without diffusion, dΠ/dt) at the state.
    pub fn tendencies(&self, s: &State) -> (ScalarFieldRZ, ScalarFieldRZ) {
        let (dg, dp, _) = self.tendencies_of(&s.gamma.values, &s.pi.values);
        (
            ScalarFieldRZ::with_values(&self.grid, Parity::Even, dg),
            ScalarFieldRZ::with_values(&self.grid, Parity::Even, dp),
        )
    }

    pub fn step(&self, s: &State, dt: f64) -> Result<State> {
        self.step_forced(s, dt, None).map(|(st, _)| st)
    }

    /// One step with optional additive forcing (Γ, Π) evaluated at stage times.
    /// Returns the new state and the largest stage Courant number.
    pub fn step_forced(&self, s: &State, dt: f64, forcing: Option<Forcing>) -> Result<(State, f64)> {
        let cfl = self.cfg.cfl;
        let mut courant = 0.0f64;
        let y = vec![s.gamma.values.clone(), s.pi.values.clone()];
        let diffusive = [self.cfg.physics.diffusion, false];
        let out = stepper::step(&self.grid, &y, &diffusive, s.t, dt, |t, v| {
            let (mut dg, mut dp, rate) = self.tendencies_of(&v[0], &v[1]);
            let c = rate * dt;
            courant = courant.max(c);
            if c > cfl {
                return Err(Error::Cfl { courant: c, safety: cfl, suggested_dt: cfl / rate });
            }
            if let Some(f) = forcing {
                let (fg, fp) = f(t);
                dg.iter_mut().zip(&fg).for_each(|(a, b)| *a += b);
                dp.iter_mut().zip(&fp).for_each(|(a, b)| *a += b);
            }
            Ok(vec![dg, dp])
        })?;
        let mut it = out.into_iter();
        let gamma = ScalarFieldRZ::with_values(&self.grid, Parity::Even, it.next().unwrap());
        let pi = ScalarFieldRZ::with_values(&self.grid, Parity::Even, it.next().unwrap());
        let t = s.t + dt;
        if !gamma.is_finite() || !pi.is_finite() {
            let report = format!(
                "non-finite fields; before the step max|Γ| = {:e}, max|Π| = {:e}",
                s.gamma.max_abs(),
                s.pi.max_abs()
            );
            return Err(Error::BlowUp { t, report });
        }
        let mut next = State::new(t, gamma, pi);
        next.ensure_derived(&self.stream);
        Ok((next, courant))
    }

    /// Advances to T_end at a fixed step, calling `hook` after the initial state and after every step.
    pub fn run<H>(&self, mut state: State, dt: Option<f64>, hook: H) -> Result<State>
    where
        H: FnMut(&Solver, &State, &StepInfo) -> Result<()>,
    {
        let dt = match dt.or(self.cfg.dt) {
            Some(d) => d,
            None => self.default_dt(&mut state),
        };
        self.run_from(state, dt, 0, hook)
    }

    /// Continues from a state reached after `first_step` steps of size dt. The hook sees
    /// step 0 only on a fresh start.
    pub fn run_from<H>(&self, mut state: State, dt: f64, first_step: usize, mut hook: H) -> Result<State>
    where
        H: FnMut(&Solver, &State, &StepInfo) -> Result<()>,
    {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Param(format!("dt = {dt} must be positive")));
        }
        let n_steps = first_step + ((self.cfg.t_end - state.t).max(0.0) / dt - 1e-9).ceil().max(0.0) as usize;
        state.ensure_derived(&self.stream);
        if first_step == 0 {
            let div0 = divergence_ratio(state.derived().unwrap());
            hook(self, &state, &StepInfo { step: 0, n_steps, dt, courant: 0.0, divergence: div0 })?;
        }
        for step in first_step + 1..=n_steps {
            let (next, courant) = self.step_forced(&state, dt, None)?;
            state = next;
            let divergence = divergence_ratio(state.derived().unwrap());
            hook(self, &state, &StepInfo { step, n_steps, dt, courant, divergence })?;
        }
        Ok(state)
    }
}

pub fn divergence_ratio(d: &Derived) -> f64 {
    let (_, n) = divergence_axisym(&d.u);
    let u = velocity_l2(&d.u);
    if u == 0.0 {
        n
    } else {
        n / u
    }
}

/// Relative residual of the elliptic solve behind the cache: ‖−L_h ψ − rΓ‖ / ‖rΓ‖.
pub fn cache_residual(stream: &StreamSolver, d: &Derived) -> f64 {
    stream.residual(&d.psi, &d.omega)
}
