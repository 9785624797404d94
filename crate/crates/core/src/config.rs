//! Plain `key = value` parameter files.
//!
//! Dimensionless keys set [`TrapParams`] fields directly; SI keys are
//! converted with the mass and frequency anchors (from the file or the base
//! parameters). `#` starts a comment.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{consts, TrapParams};

/// Parsed contents of a config file, all fields optional.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub omega0_ratio: Option<f64>,
    pub omega_perp_ratio: Option<f64>,
    pub x0_over_ax: Option<f64>,
    pub a_bb_over_ax: Option<f64>,
    pub a_ab_over_ax: Option<f64>,
    pub n_periods: Option<u32>,
    pub mass_kg: Option<f64>,
    pub omega_hz: Option<f64>,
    pub omega_perp_hz: Option<f64>,
    pub a_bb_nm: Option<f64>,
    pub a_ab_nm: Option<f64>,
    pub x0_nm: Option<f64>,
    pub n_max: Option<usize>,
    pub samples_per_period: Option<usize>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
}

impl ConfigValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = ConfigValues::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let num = || {
                value
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: {key}: not a number: {value}", lineno + 1)))
            };
            match key {
                "omega0_ratio" => out.omega0_ratio = Some(num()?),
                "omega_perp_ratio" => out.omega_perp_ratio = Some(num()?),
                "x0_over_ax" => out.x0_over_ax = Some(num()?),
                "a_bb_over_ax" => out.a_bb_over_ax = Some(num()?),
                "a_ab_over_ax" => out.a_ab_over_ax = Some(num()?),
                "mass_kg" => out.mass_kg = Some(num()?),
                "omega_hz" => out.omega_hz = Some(num()?),
                "omega_perp_hz" => out.omega_perp_hz = Some(num()?),
                "a_bb_nm" => out.a_bb_nm = Some(num()?),
                "a_ab_nm" => out.a_ab_nm = Some(num()?),
                "x0_nm" => out.x0_nm = Some(num()?),
                "rtol" => out.rtol = Some(num()?),
                "atol" => out.atol = Some(num()?),
                "n_max" | "samples_per_period" => {
                    let v: usize = value.parse().map_err(|_| {
                        Error::Config(format!("line {}: {key}: not a positive integer: {value}", lineno + 1))
                    })?;
                    if key == "n_max" {
                        out.n_max = Some(v);
                    } else {
                        out.samples_per_period = Some(v);
                    }
                }
                "n_periods" => {
                    out.n_periods = Some(value.parse().map_err(|_| {
                        Error::Config(format!("line {}: n_periods: not a positive integer: {value}", lineno + 1))
                    })?)
                }
                other => return Err(Error::Config(format!("line {}: unknown key {other}", lineno + 1))),
            }
        }
        Ok(out)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies these values on top of `base`.
    pub fn apply(&self, base: &TrapParams) -> Result<TrapParams> {
        let mut p = *base;
        if let Some(m) = self.mass_kg {
            p.mass_si = Some(m);
        }
        if let Some(f) = self.omega_hz {
            p.omega_si = Some(2.0 * PI * f);
        }
        let si_keys = [self.omega_perp_hz, self.a_bb_nm, self.a_ab_nm, self.x0_nm];
        if si_keys.iter().any(Option::is_some) {
            let (m, w) = match (p.mass_si, p.omega_si) {
                (Some(m), Some(w)) if m > 0.0 && w > 0.0 => (m, w),
                _ => return Err(Error::Config("SI keys need mass_kg and omega_hz".into())),
            };
            let a_x_nm = (consts::HBAR / (m * w)).sqrt() * 1e9;
            if let Some(f) = self.omega_perp_hz {
                p.omega_perp = 2.0 * PI * f / w;
            }
            if let Some(a) = self.a_bb_nm {
                p.a_bb = a / a_x_nm;
            }
            if let Some(a) = self.a_ab_nm {
                p.a_ab = a / a_x_nm;
            }
            if let Some(x) = self.x0_nm {
                p.x0 = x / a_x_nm;
            }
        }
        if let Some(v) = self.omega0_ratio {
            p.omega0 = v;
        }
        if let Some(v) = self.omega_perp_ratio {
            p.omega_perp = v;
        }
        if let Some(v) = self.x0_over_ax {
            p.x0 = v;
        }
        if let Some(v) = self.a_bb_over_ax {
            p.a_bb = v;
        }
        if let Some(v) = self.a_ab_over_ax {
            p.a_ab = v;
        }
        Ok(p)
    }
}
