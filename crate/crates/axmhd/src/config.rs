//! Run configuration: a TOML document of flat sections holding scalar values.
//!
//! ```toml
//! [grid]          # required: nr, nz
//! nr = 128
//! nz = 128        # power of two >= 8
//! r_extent = 4.0
//! lz = 6.283185307179586
//!
//! [time]          # required: t_end
//! t_end = 5.0
//! dt = 0.01       # optional; chosen from the initial state when absent
//! cfl = 0.4
//!
//! [scheme]
//! advection = "central2"   # or "upwind3"
//! dealias = false
//!
//! [physics]
//! advection = true
//! lorentz = true
//! diffusion = true
//!
//! [initial]
//! preset = "gaussian-ring" # or "orszag-tang-axisym", "random-bandlimited"
//! seed = 0
//! # preset parameters, see below
//!
//! [output]
//! dir = "out"
//! cadence = 10             # diagnostic cadence in steps
//! checkpoint_every = 0     # steps between checkpoints; 0 writes only the first and last
//!
//! [monitors]
//! p_max = 256              # PGrid = {2, 4, ..., p_max}
//! s_vertical = 1.75
//! s_high = 2.6
//! reconstructed = true     # 3D box monitors (Miao-Zheng, H^s norms)
//! box_n = 64
//! box_l = 8.0              # defaults to 2 r_extent
//!
//! [losing]                 # optional scenario for the `losing` command
//! velocity = "shear"       # or "replay" (reads checkpoints from replay_dir)
//! replay_dir = "out"
//! shear_amp = 1.0
//! shear_width = 1.0
//! sigma = 0.5
//! eps = 0.2
//! p = 2.0
//! t_end = 1.0
//! dt = 0.01
//! diffusion = false
//! rho_mode = 4
//! rho_r0 = 1.0
//! rho_width = 0.3
//! box_n = 64
//! box_l = 8.0
//! ```
//!
//! Preset parameters: gaussian-ring takes gamma_amp, gamma_r0, gamma_width, pi_amp, pi_r0,
//! pi_width; orszag-tang-axisym takes gamma_amp, pi_amp, width; random-bandlimited takes
//! gamma_amp, pi_amp, width and draws from `seed`.
//!
//! Unknown sections or keys and values of the wrong type are errors naming the key.
//! The digest covers every section except [output] and [losing], so a run can be resumed
//! into a different directory and a scenario edited without invalidating checkpoints.

use crate::diagnostics::MonitorConfig;
use crate::error::{Error, Result};
use crate::norms::PGrid;
use crate::solver::{Physics, Preset, Scheme, SolverConfig};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Steps between checkpoints; 0 writes only the initial and final states.
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LosingVelocity {
    /// u_r = 0, u_z = amp e^{−r²/width²}.
    Shear { amp: f64, width: f64 },
    /// Velocities recovered from the checkpoints in a run directory.
    Replay { dir: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LosingScenario {
    pub velocity: LosingVelocity,
    pub sigma: f64,
    pub eps: f64,
    pub p: f64,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub diffusion: bool,
    /// ρ₀ = ring(rho_r0, rho_width) · cos(rho_mode · 2πz/Lz).
    pub rho_mode: usize,
    pub rho_r0: f64,
    pub rho_width: f64,
    pub box_n: usize,
    pub box_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub monitors: MonitorConfig,
    pub losing: Option<LosingScenario>,
    pub seed: u64,
}

struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

fn err(key: &str, msg: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), msg: msg.into() }
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'a str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(err(name, "expected a section")),
        };
        Ok(Section { name, table, used: BTreeSet::new() })
    }

    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn float(&mut self, k: &str) -> Result<Option<f64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(err(&self.key(k), "expected a number")),
        }
    }

    fn uint(&mut self, k: &str) -> Result<Option<u64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(_) => Err(err(&self.key(k), "expected a non-negative integer")),
        }
    }

    fn boolean(&mut self, k: &str) -> Result<Option<bool>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(err(&self.key(k), "expected true or false")),
        }
    }

    fn string(&mut self, k: &str) -> Result<Option<String>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(err(&self.key(k), "expected a string")),
        }
    }

    fn require<T>(&self, k: &str, v: Option<T>) -> Result<T> {
        v.ok_or_else(|| err(&self.key(k), "missing required key"))
    }

    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.contains(k) {
                    return Err(err(&self.key(k), "unknown key"));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["grid", "time", "scheme", "physics", "initial", "output", "monitors", "losing"];

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(err(key, format!("{v} must be positive and finite")))
    }
}

fn preset_from(sec: &mut Section, seed: u64) -> Result<Preset> {
    let name = sec.string("preset")?.unwrap_or_else(|| "gaussian-ring".into());
    let base = Preset::from_name(&name).map_err(|e| err(&sec.key("preset"), e.to_string()))?;
    let mut get = |k: &str, d: f64| -> Result<f64> { Ok(sec.float(k)?.unwrap_or(d)) };
    Ok(match base {
        Preset::GaussianRing { gamma_amp, gamma_r0, gamma_width, pi_amp, pi_r0, pi_width } => Preset::GaussianRing {
            gamma_amp: get("gamma_amp", gamma_amp)?,
            gamma_r0: get("gamma_r0", gamma_r0)?,
            gamma_width: get("gamma_width", gamma_width)?,
            pi_amp: get("pi_amp", pi_amp)?,
            pi_r0: get("pi_r0", pi_r0)?,
            pi_width: get("pi_width", pi_width)?,
        },
        Preset::OrszagTangAxisym { gamma_amp, pi_amp, width } => Preset::OrszagTangAxisym {
            gamma_amp: get("gamma_amp", gamma_amp)?,
            pi_amp: get("pi_amp", pi_amp)?,
            width: get("width", width)?,
        },
        Preset::RandomBandlimited { gamma_amp, pi_amp, width, .. } => Preset::RandomBandlimited {
            gamma_amp: get("gamma_amp", gamma_amp)?,
            pi_amp: get("pi_amp", pi_amp)?,
            width: get("width", width)?,
            seed,
        },
    })
}

fn dyadic_pgrid(p_max: u64) -> Result<PGrid> {
    if p_max < 2 || !p_max.is_power_of_two() {
        return Err(err("monitors.p_max", format!("{p_max} must be a power of two >= 2")));
    }
    let mut ps = Vec::new();
    let mut p = 2u64;
    while p <= p_max {
        ps.push(p as f64);
        p *= 2;
    }
    PGrid::new(ps).map_err(|e| err("monitors.p_max", e.to_string()))
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| err("<document>", e.message().to_string()))?;
    for (k, v) in root.iter() {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(err(k, "unknown section"));
        }
        if let Value::Table(t) = v {
            for (kk, vv) in t.iter() {
                if matches!(vv, Value::Table(_) | Value::Array(_)) {
                    return Err(err(&format!("{k}.{kk}"), "expected a scalar value"));
                }
            }
        }
    }
    let mut cfg = SolverConfig::default();

    let mut grid = Section::new(&root, "grid")?;
    if !grid.present() {
        return Err(err("grid", "missing required section"));
    }
    let nr = grid.uint("nr")?;
    cfg.nr = grid.require("nr", nr)? as usize;
    let nz = grid.uint("nz")?;
    cfg.nz = grid.require("nz", nz)? as usize;
    if cfg.nr < 8 {
        return Err(err("grid.nr", format!("{} must be >= 8", cfg.nr)));
    }
    if cfg.nz < 8 || !cfg.nz.is_power_of_two() {
        return Err(err("grid.nz", format!("{} must be a power of two >= 8", cfg.nz)));
    }
    cfg.r_extent = positive("grid.r_extent", grid.float("r_extent")?.unwrap_or(4.0))?;
    cfg.lz = positive("grid.lz", grid.float("lz")?.unwrap_or(2.0 * PI))?;
    grid.finish()?;

    let mut time = Section::new(&root, "time")?;
    let t_end = time.float("t_end")?;
    cfg.t_end = time.require("t_end", t_end)?;
    if !(cfg.t_end >= 0.0 && cfg.t_end.is_finite()) {
        return Err(err("time.t_end", format!("{} must be >= 0", cfg.t_end)));
    }
    cfg.dt = time.float("dt")?.map(|d| positive("time.dt", d)).transpose()?;
    cfg.cfl = time.float("cfl")?.unwrap_or(0.4);
    if !(cfg.cfl > 0.0 && cfg.cfl <= 1.0) {
        return Err(err("time.cfl", format!("{} outside (0, 1]", cfg.cfl)));
    }
    time.finish()?;

    let mut scheme = Section::new(&root, "scheme")?;
    cfg.scheme = match scheme.string("advection")?.as_deref() {
        None | Some("central2") => Scheme::Central2,
        Some("upwind3") => Scheme::Upwind3,
        Some(o) => return Err(err("scheme.advection", format!("unknown scheme {o:?}"))),
    };
    cfg.dealias = scheme.boolean("dealias")?.unwrap_or(false);
    scheme.finish()?;

    let mut physics = Section::new(&root, "physics")?;
    let d = Physics::default();
    cfg.physics = Physics {
        advection: physics.boolean("advection")?.unwrap_or(d.advection),
        lorentz: physics.boolean("lorentz")?.unwrap_or(d.lorentz),
        diffusion: physics.boolean("diffusion")?.unwrap_or(d.diffusion),
    };
    physics.finish()?;

    let mut initial = Section::new(&root, "initial")?;
    let seed = initial.uint("seed")?.unwrap_or(0);
    cfg.preset = preset_from(&mut initial, seed)?;
    initial.finish()?;

    let mut output = Section::new(&root, "output")?;
    let out = OutputConfig {
        dir: PathBuf::from(output.string("dir")?.unwrap_or_else(|| "out".into())),
        checkpoint_every: output.uint("checkpoint_every")?.unwrap_or(0) as usize,
    };
    cfg.cadence = output.uint("cadence")?.unwrap_or(10) as usize;
    if cfg.cadence == 0 {
        return Err(err("output.cadence", "must be >= 1"));
    }
    output.finish()?;

    let mut mon = Section::new(&root, "monitors")?;
    let md = MonitorConfig::default();
    let pgrid = match mon.uint("p_max")? {
        Some(p) => dyadic_pgrid(p)?,
        None => md.pgrid.clone(),
    };
    let s_vertical = mon.float("s_vertical")?.unwrap_or(md.s_vertical);
    let s_high = mon.float("s_high")?.unwrap_or(md.s_high);
    if !(s_high > 1.0 && s_high.is_finite()) {
        return Err(err("monitors.s_high", format!("{s_high} must exceed 1")));
    }
    if !s_vertical.is_finite() {
        return Err(err("monitors.s_vertical", "must be finite"));
    }
    let reconstructed = mon.boolean("reconstructed")?.unwrap_or(true);
    let box_n = mon.uint("box_n")?.unwrap_or(64) as usize;
    if !(box_n >= 8 && box_n.is_power_of_two()) {
        return Err(err("monitors.box_n", format!("{box_n} must be a power of two >= 8")));
    }
    let box_l = mon.float("box_l")?.map(|l| positive("monitors.box_l", l)).transpose()?;
    mon.finish()?;
    let monitors = MonitorConfig { pgrid, s_vertical, s_high, box_n: reconstructed.then_some(box_n), box_l };

    let mut los = Section::new(&root, "losing")?;
    let losing = if los.present() { Some(losing_from(&mut los)?) } else { None };
    los.finish()?;

    cfg.validate().map_err(|e| err("<config>", e.to_string()))?;
    Ok(RunConfig { solver: cfg, output: out, monitors, losing, seed })
}

fn losing_from(s: &mut Section) -> Result<LosingScenario> {
    let velocity = match s.string("velocity")?.as_deref() {
        None | Some("shear") => {
            let amp = s.float("shear_amp")?.unwrap_or(1.0);
            if !amp.is_finite() {
                return Err(err("losing.shear_amp", "must be finite"));
            }
            LosingVelocity::Shear { amp, width: positive("losing.shear_width", s.float("shear_width")?.unwrap_or(1.0))? }
        }
        Some("replay") => {
            let dir = s.string("replay_dir")?;
            LosingVelocity::Replay { dir: PathBuf::from(s.require("replay_dir", dir)?) }
        }
        Some(o) => return Err(err("losing.velocity", format!("unknown velocity {o:?}"))),
    };
    let sigma = s.float("sigma")?.unwrap_or(0.5);
    let eps = s.float("eps")?.unwrap_or(0.2);
    if !(eps > 0.0 && eps < sigma) {
        return Err(err("losing.eps", format!("need 0 < eps < sigma, got eps = {eps}, sigma = {sigma}")));
    }
    let p = s.float("p")?.unwrap_or(2.0);
    if !(p >= 1.0 && p.is_finite()) {
        return Err(err("losing.p", format!("{p} must be in [1, inf)")));
    }
    let t_end = positive("losing.t_end", s.float("t_end")?.unwrap_or(1.0))?;
    let dt = s.float("dt")?.map(|d| positive("losing.dt", d)).transpose()?;
    let box_n = s.uint("box_n")?.unwrap_or(64) as usize;
    if !(box_n >= 8 && box_n.is_power_of_two()) {
        return Err(err("losing.box_n", format!("{box_n} must be a power of two >= 8")));
    }
    Ok(LosingScenario {
        velocity,
        sigma,
        eps,
        p,
        t_end,
        dt,
        diffusion: s.boolean("diffusion")?.unwrap_or(false),
        rho_mode: s.uint("rho_mode")?.unwrap_or(4) as usize,
        rho_r0: s.float("rho_r0")?.unwrap_or(1.0),
        rho_width: positive("losing.rho_width", s.float("rho_width")?.unwrap_or(0.3))?,
        box_n,
        box_l: s.float("box_l")?.map(|l| positive("losing.box_l", l)).transpose()?,
    })
}

impl RunConfig {
    /// Every digest-relevant value, one `key = value` line each, floats in round-trip form.
    pub fn canonical(&self) -> String {
        let c = &self.solver;
        let m = &self.monitors;
        let mut lines = vec![
            format!("grid.nr = {}", c.nr),
            format!("grid.nz = {}", c.nz),
            format!("grid.r_extent = {:?}", c.r_extent),
            format!("grid.lz = {:?}", c.lz),
            format!("time.t_end = {:?}", c.t_end),
            format!("time.dt = {:?}", c.dt),
            format!("time.cfl = {:?}", c.cfl),
            format!("scheme.advection = {}", c.scheme.name()),
            format!("scheme.dealias = {}", c.dealias),
            format!("physics.advection = {}", c.physics.advection),
            format!("physics.lorentz = {}", c.physics.lorentz),
            format!("physics.diffusion = {}", c.physics.diffusion),
            format!("initial.seed = {}", self.seed),
            format!("initial.preset = {:?}", c.preset),
            format!("output.cadence = {}", c.cadence),
            format!("monitors.pgrid = {:?}", m.pgrid.ps()),
            format!("monitors.s_vertical = {:?}", m.s_vertical),
            format!("monitors.s_high = {:?}", m.s_high),
            format!("monitors.box_n = {:?}", m.box_n),
            format!("monitors.box_l = {:?}", m.box_l),
        ];
        lines.push(String::new());
        lines.join("\n")
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        self.digest().iter().map(|b| format!("{b:02x}")).collect()
    }
}
