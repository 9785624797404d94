//! Preset → config file → flag layering.

use clap::Args;
use collgate::config::ConfigValues;
use collgate::dynamics::SolverSettings;
use collgate::model::{GateSchedule, TrapParams};
use collgate::{Error, Result};
use serde::Serialize;

use crate::commands::Context;
use crate::{Mode, Preset};

/// Per-run parameter flags, in internal units (lengths in a_x, frequencies in ω).
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    #[arg(long)]
    pub a_bb: Option<f64>,
    #[arg(long)]
    pub a_ab: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long)]
    pub omega0: Option<f64>,
    #[arg(long)]
    pub omega_perp: Option<f64>,
    /// Gate duration in oscillation periods.
    #[arg(long)]
    pub periods: Option<u32>,
    /// Basis size (per coordinate for the ab pair).
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub samples_per_period: Option<usize>,
    #[arg(long)]
    pub rtol: Option<f64>,
    #[arg(long)]
    pub atol: Option<f64>,
}

/// Fully resolved inputs of one run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunConfig {
    pub params: TrapParams,
    pub n_periods: u32,
    pub n_max: Option<usize>,
    pub samples_per_period: usize,
    pub rtol: f64,
    pub atol: f64,
}

pub const BB_N_MAX: usize = 60;
pub const AB_N_MAX: usize = 56;

impl RunConfig {
    pub fn resolve(ctx: &Context, flags: &Overrides) -> Result<Self> {
        let (base, n_periods) = match ctx.preset {
            Preset::PaperFig2 => (TrapParams::paper_fig2(), 7),
        };
        let defaults = SolverSettings::default();
        let mut rc = RunConfig {
            params: base,
            n_periods,
            n_max: None,
            samples_per_period: defaults.samples_per_period,
            rtol: defaults.ode.rtol,
            atol: defaults.ode.atol,
        };
        if let Some(path) = &ctx.config {
            let file = ConfigValues::from_file(path)?;
            rc.params = file.apply(&rc.params)?;
            rc.n_periods = file.n_periods.unwrap_or(rc.n_periods);
            rc.n_max = file.n_max.or(rc.n_max);
            rc.samples_per_period = file.samples_per_period.unwrap_or(rc.samples_per_period);
            rc.rtol = file.rtol.unwrap_or(rc.rtol);
            rc.atol = file.atol.unwrap_or(rc.atol);
        }
        let p = &mut rc.params;
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.a_bb, flags.a_bb);
        set(&mut p.a_ab, flags.a_ab);
        set(&mut p.x0, flags.x0);
        set(&mut p.omega0, flags.omega0);
        set(&mut p.omega_perp, flags.omega_perp);
        set(&mut rc.rtol, flags.rtol);
        set(&mut rc.atol, flags.atol);
        rc.n_periods = flags.periods.unwrap_or(rc.n_periods);
        rc.n_max = flags.n_max.or(rc.n_max);
        rc.samples_per_period = flags.samples_per_period.unwrap_or(rc.samples_per_period);
        rc.check()?;
        Ok(rc)
    }

    fn check(&self) -> Result<()> {
        if self.n_periods == 0 {
            return Err(Error::Config("periods must be at least 1".into()));
        }
        if self.samples_per_period < 4 {
            return Err(Error::Config("samples_per_period must be at least 4".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::Config(format!("tolerances must be positive (rtol {}, atol {})", self.rtol, self.atol)));
        }
        if matches!(self.n_max, Some(n) if n < 2) {
            return Err(Error::Config("n_max must be at least 2".into()));
        }
        self.params.validate()?;
        Ok(())
    }

    pub fn schedule(&self) -> GateSchedule {
        GateSchedule::periods(self.n_periods)
    }

    pub fn settings(&self) -> SolverSettings {
        let mut s = SolverSettings { samples_per_period: self.samples_per_period, ..SolverSettings::default() };
        s.ode.rtol = self.rtol;
        s.ode.atol = self.atol;
        s
    }

    pub fn n_max_for(&self, mode: Mode) -> usize {
        self.n_max.unwrap_or(match mode {
            Mode::Ab => AB_N_MAX,
            Mode::Bb | Mode::Free => BB_N_MAX,
        })
    }
}
