//! Initial-condition presets for (Γ₀, Π₀).

use super::State;
use crate::error::{Error, Result};
use crate::field3d::{support_fraction, DECAY_TOLERANCE};
use crate::grid::{GridRZ, Parity, ScalarFieldRZ};
use crate::lp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// Γ₀ = A[g(r−r₀) + g(r+r₀)] e^{−z̃²/δ²} with g(x) = e^{−x²/δ²}; Π₀ alike with its own parameters.
    GaussianRing { gamma_amp: f64, gamma_r0: f64, gamma_width: f64, pi_amp: f64, pi_r0: f64, pi_width: f64 },
    /// Γ₀ = A e^{−r²/w²} sin(2πz/Lz), Π₀ = B e^{−r²/w²} sin(4πz/Lz).
    OrszagTangAxisym { gamma_amp: f64, pi_amp: f64, width: f64 },
    /// Seeded sums of radial Gaussians times z-modes in vertical blocks j ≤ 4.
    RandomBandlimited { gamma_amp: f64, pi_amp: f64, width: f64, seed: u64 },
}

impl Default for Preset {
    fn default() -> Self {
        Preset::GaussianRing {
            gamma_amp: 1.0,
            gamma_r0: 1.5,
            gamma_width: 0.4,
            pi_amp: 0.25,
            pi_r0: 0.0,
            pi_width: 0.4,
        }
    }
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::GaussianRing { .. } => "gaussian-ring",
            Preset::OrszagTangAxisym { .. } => "orszag-tang-axisym",
            Preset::RandomBandlimited { .. } => "random-bandlimited",
        }
    }

    /// Default parameters for a preset name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "gaussian-ring" => Ok(Preset::default()),
            "orszag-tang-axisym" => Ok(Preset::OrszagTangAxisym { gamma_amp: 1.0, pi_amp: 1.0, width: 0.8 }),
            "random-bandlimited" => Ok(Preset::RandomBandlimited { gamma_amp: 1.0, pi_amp: 1.0, width: 0.6, seed: 0 }),
            other => Err(Error::Param(format!("unknown preset {other:?}"))),
        }
    }
}

fn periodic_distance(z: f64, lz: f64) -> f64 {
    z - lz * (z / lz).round()
}

fn ring(amp: f64, r0: f64, w: f64, lz: f64) -> impl Fn(f64, f64) -> f64 + Sync {
    move |r, z| {
        let zt = periodic_distance(z, lz);
        let g = (-(r - r0).powi(2) / (w * w)).exp() + (-(r + r0).powi(2) / (w * w)).exp();
        amp * g * (-(zt * zt) / (w * w)).exp()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!("{name} = {v} must be positive")))
    }
}

fn check_finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!("{name} = {v} must be finite")))
    }
}

fn random_profile(g: &Arc<GridRZ>, rng: &mut ChaCha8Rng, width: f64) -> Vec<f64> {
    let jv = 4.min(g.kmax_vertical());
    let kcut = lp::band_radius(jv);
    let k0 = 2.0 * PI / g.lz;
    let mmax = ((kcut / k0).floor() as usize).min(g.nz / 2 - 1);
    let terms: Vec<(f64, f64, f64, usize, f64)> = (0..8)
        .map(|_| {
            let c = rng.gen_range(-1.0..1.0);
            let r0 = rng.gen_range(0.0..1.5);
            let w = width * rng.gen_range(0.7..1.3);
            let m = rng.gen_range(0..=mmax);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (c, r0, w, m, phase)
        })
        .collect();
    let f = move |r: f64, z: f64| {
        terms
            .iter()
            .map(|&(c, r0, w, m, ph)| {
                let radial = (-(r - r0).powi(2) / (w * w)).exp() + (-(r + r0).powi(2) / (w * w)).exp();
                c * radial * (m as f64 * k0 * z + ph).cos()
            })
            .sum::<f64>()
    };
    ScalarFieldRZ::from_fn(g, Parity::Even, f).values
}

fn normalized(v: Vec<f64>, amp: f64) -> Vec<f64> {
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        v
    } else {
        v.into_iter().map(|x| amp * x / m).collect()
    }
}

pub fn initial_condition(preset: &Preset, g: &Arc<GridRZ>) -> Result<State> {
    let (gamma, pi) = match *preset {
        Preset::GaussianRing { gamma_amp, gamma_r0, gamma_width, pi_amp, pi_r0, pi_width } => {
            check_finite("gamma_amp", gamma_amp)?;
            check_finite("pi_amp", pi_amp)?;
            check_finite("gamma_r0", gamma_r0)?;
            check_finite("pi_r0", pi_r0)?;
            check_positive("gamma_width", gamma_width)?;
            check_positive("pi_width", pi_width)?;
            (
                ScalarFieldRZ::from_fn(g, Parity::Even, ring(gamma_amp, gamma_r0, gamma_width, g.lz)),
                ScalarFieldRZ::from_fn(g, Parity::Even, ring(pi_amp, pi_r0, pi_width, g.lz)),
            )
        }
        Preset::OrszagTangAxisym { gamma_amp, pi_amp, width } => {
            check_finite("gamma_amp", gamma_amp)?;
            check_finite("pi_amp", pi_amp)?;
            check_positive("width", width)?;
            let k = 2.0 * PI / g.lz;
            (
                ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| gamma_amp * (-(r * r) / (width * width)).exp() * (k * z).sin()),
                ScalarFieldRZ::from_fn(g, Parity::Even, |r, z| pi_amp * (-(r * r) / (width * width)).exp() * (2.0 * k * z).sin()),
            )
        }
        Preset::RandomBandlimited { gamma_amp, pi_amp, width, seed } => {
            check_finite("gamma_amp", gamma_amp)?;
            check_finite("pi_amp", pi_amp)?;
            check_positive("width", width)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gv = normalized(random_profile(g, &mut rng, width), gamma_amp);
            let pv = normalized(random_profile(g, &mut rng, width), pi_amp);
            (ScalarFieldRZ::with_values(g, Parity::Even, gv), ScalarFieldRZ::with_values(g, Parity::Even, pv))
        }
    };
    for (name, f) in [("Gamma", &gamma), ("Pi", &pi)] {
        let frac = support_fraction(f);
        if frac > DECAY_TOLERANCE {
            return Err(Error::Param(format!(
                "{} initial {name} reaches the outer wall: outer/max = {frac:e} > {DECAY_TOLERANCE:e}",
                preset.name()
            )));
        }
    }
    Ok(State::new(0.0, gamma, pi))
}
