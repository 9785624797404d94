use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Args;
use collgate::basis::{initial_coeffs_diff, initial_coeffs_same, OscillatorBasis, PairGeometry};
use collgate::dynamics::{free_same, propagate_diff, propagate_same, Trajectory};
use collgate::fidelity::{fidelity_report, write_fidelity_csv};
use collgate::model::{consts, TrapParams};
use collgate::observables::{summarize, write_trajectory_csv, RunSummary};
use collgate::trapfield::{self, LocalFrequencies, MirrorParams, TrapMinimum};
use collgate::validation::{self, CRITERIA};
use collgate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{cell, OutDir};
use crate::run_config::{Overrides, RunConfig};
use crate::{Axis, Mode, Preset, SweepArgs};

pub const SWEEP_CSV_HEADER: &str = "# collgate sweep v1";

pub struct Context {
    pub config: Option<PathBuf>,
    pub preset: Preset,
    pub out: PathBuf,
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Bb => "bb",
        Mode::Ab => "ab",
        Mode::Free => "free",
    }
}

/// Interacting trajectory and its non-interacting reference.
fn run_mode(rc: &RunConfig, mode: Mode) -> Result<(Trajectory, Trajectory)> {
    let (schedule, settings, n_max) = (rc.schedule(), rc.settings(), rc.n_max_for(mode));
    match mode {
        Mode::Bb | Mode::Free => {
            let mut p = rc.params;
            if mode == Mode::Free {
                p.a_bb = 0.0;
            }
            let basis = OscillatorBasis::relative(&p, n_max);
            let c0 = initial_coeffs_same(&p, &basis)?;
            let (traj, free) = rayon::join(
                || propagate_same(&c0, &p, &schedule, &settings),
                || free_same(&c0, &p, &schedule, &settings),
            );
            Ok((traj?, free?))
        }
        Mode::Ab => {
            let p = rc.params;
            let geo = PairGeometry::new(&p);
            let init = initial_coeffs_diff(&p, &geo.basis_cm(n_max), &geo.basis_rel(n_max))?;
            let p0 = TrapParams { a_ab: 0.0, ..p };
            let (traj, free) = rayon::join(
                || propagate_diff(&init, &p, &schedule, &settings),
                || propagate_diff(&init, &p0, &schedule, &settings),
            );
            Ok((traj?, free?))
        }
    }
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    mode: &'a str,
    config: RunConfig,
    n_max: usize,
    #[serde(flatten)]
    summary: RunSummary,
}

pub fn simulate(ctx: &Context, mode: Mode, flags: &Overrides) -> Result<ExitCode> {
    let rc = RunConfig::resolve(ctx, flags)?;
    let out = OutDir::create(&ctx.out)?;
    let (traj, free) = run_mode(&rc, mode)?;
    let summary = summarize(&traj, &free, &rc.schedule())?;
    let name = mode_name(mode);
    out.write(&format!("trajectory_{name}.csv"), |w| write_trajectory_csv(w, &traj, &free))?;
    let report = SimulateReport { mode: name, config: rc, n_max: rc.n_max_for(mode), summary };
    let path = out.write_json(&format!("summary_{name}.json"), &report)?;
    match report.summary.phi_coll {
        Some(phi) => println!("{name}: phi_coll = {phi:.6} rad ({:.4} pi), |O0| = {:.6}", phi / PI, report.summary.o0_abs),
        None => println!("{name}: phi_coll undefined, |O0| = {:.6}", report.summary.o0_abs),
    }
    println!("summary: {}", path.display());
    Ok(ExitCode::SUCCESS)
}

pub fn fidelity(ctx: &Context, temperatures: &[f64], n_cut: usize, flags: &Overrides) -> Result<ExitCode> {
    let rc = RunConfig::resolve(ctx, flags)?;
    if let Some(t) = temperatures.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Config(format!("temperature {t} must be finite and non-negative")));
    }
    let out = OutDir::create(&ctx.out)?;
    let report = fidelity_report(&rc.params, &rc.schedule(), &rc.settings(), rc.n_max_for(Mode::Bb), temperatures, n_cut)?;
    out.write("fidelity.csv", |w| write_fidelity_csv(w, &report.table))?;
    let path = out.write_json("fidelity.json", &report)?;
    println!("F(0) = {:.6}", report.f0);
    for row in &report.table {
        println!("kT = {:.3} hw0: F = {:.6}", row.kt_over_hw0, row.f_full);
    }
    println!("report: {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::ABb => "a_bb",
        Axis::AAb => "a_ab",
        Axis::X0 => "x0",
        Axis::Omega0 => "omega0",
        Axis::OmegaPerp => "omega_perp",
        Axis::NPeriods => "n_periods",
    }
}

/// Evenly spaced points with both ends included.
pub fn sweep_values(from: f64, to: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn with_axis(rc: &RunConfig, axis: Axis, v: f64) -> Result<RunConfig> {
    let mut rc = *rc;
    let p = &mut rc.params;
    match axis {
        Axis::ABb => p.a_bb = v,
        Axis::AAb => p.a_ab = v,
        Axis::X0 => p.x0 = v,
        Axis::Omega0 => p.omega0 = v,
        Axis::OmegaPerp => p.omega_perp = v,
        Axis::NPeriods => {
            if v.fract() != 0.0 || v < 1.0 {
                return Err(Error::Config(format!("n_periods must be a positive integer, got {v}")));
            }
            rc.n_periods = v as u32;
        }
    }
    rc.params.validate()?;
    Ok(rc)
}

pub fn sweep(ctx: &Context, args: &SweepArgs) -> Result<ExitCode> {
    let base = RunConfig::resolve(ctx, &args.overrides)?;
    let values = sweep_values(args.from, args.to, args.points);
    if args.axis == Axis::NPeriods {
        for &v in &values {
            with_axis(&base, args.axis, v)?;
        }
    }
    let out = OutDir::create(&ctx.out)?;
    let rows: Vec<std::result::Result<RunSummary, Error>> = values
        .par_iter()
        .map(|&v| {
            let rc = with_axis(&base, args.axis, v)?;
            let (traj, free) = run_mode(&rc, args.mode)?;
            summarize(&traj, &free, &rc.schedule())
        })
        .collect();
    let axis = axis_name(args.axis);
    let name = format!("sweep_{axis}_{}.csv", mode_name(args.mode));
    let path = out.write(&name, |w| {
        writeln!(w, "{SWEEP_CSV_HEADER}")?;
        writeln!(w, "axis,value,phi_coll,phi_a,phi_b,O0_abs,O_abs,flags,error")?;
        for (v, row) in values.iter().zip(&rows) {
            match row {
                Ok(s) => writeln!(
                    w,
                    "{axis},{},{},{},{},{},{},{},",
                    cell(Some(*v)),
                    cell(s.phi_coll),
                    cell(s.phi_a),
                    cell(s.phi_b),
                    cell(Some(s.o0_abs)),
                    cell(Some(s.o_abs)),
                    s.flags.join(";").replace(',', " ")
                )?,
                Err(e) => writeln!(w, "{axis},{},,,,,,,{}", cell(Some(*v)), e.kind())?,
            }
        }
        Ok(())
    })?;
    let failed = rows.iter().filter(|r| r.is_err()).count();
    for (v, r) in values.iter().zip(&rows) {
        if let Err(e) = r {
            log::warn!("{axis} = {v}: {e}");
        }
    }
    println!("{} points ({failed} failed): {}", values.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct CriterionRecord<'a> {
    id: u8,
    name: &'a str,
    passed: bool,
    measured: &'a str,
    target: &'a str,
    fault_injected: bool,
}

pub fn validate(ctx: &Context, criteria: Option<Vec<u8>>, fault: Option<u8>) -> Result<ExitCode> {
    let ids = criteria.unwrap_or_else(|| (1..=CRITERIA).collect());
    if let Some(bad) = ids.iter().chain(fault.as_ref()).find(|&&id| id == 0 || id > CRITERIA) {
        return Err(Error::Config(format!("criterion {bad} does not exist (1..={CRITERIA})")));
    }
    let out = OutDir::create(&ctx.out)?;
    let outcomes: Vec<_> = ids
        .iter()
        .map(|&id| {
            let o = validation::run_criterion(id, fault == Some(id));
            println!("{o}");
            o
        })
        .collect();
    let records: Vec<_> = outcomes
        .iter()
        .map(|o| CriterionRecord {
            id: o.id,
            name: &o.name,
            passed: o.passed,
            measured: &o.measured,
            target: &o.target,
            fault_injected: o.fault_injected,
        })
        .collect();
    out.write_json("validation.json", &records)?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

#[derive(Args, Debug)]
pub struct TrapfieldArgs {
    /// μ0·M0 of the tape in tesla.
    #[arg(long, default_value_t = 0.1)]
    pub mu0_m0: f64,
    /// Magnetization period in metres.
    #[arg(long, default_value_t = 1e-6)]
    pub period: f64,
    /// Tape thickness in metres.
    #[arg(long, default_value_t = 10e-6)]
    pub thickness: f64,
    /// Bias field along y in tesla.
    #[arg(long, default_value_t = 1e-3)]
    pub b_y: f64,
    /// Bias field along z in tesla.
    #[arg(long, default_value_t = 1e-3)]
    pub b_z: f64,
    #[arg(long, default_value_t = 0.5)]
    pub g_f: f64,
    #[arg(long, default_value_t = 2.0)]
    pub m_f: f64,
    /// Atomic mass in kg (default ⁸⁷Rb).
    #[arg(long)]
    pub mass_kg: Option<f64>,
    /// Number of periods scanned along x.
    #[arg(long, default_value_t = 2)]
    pub periods: u32,
    /// Map height range in periods.
    #[arg(long, default_value_t = 0.05)]
    pub z_min: f64,
    #[arg(long, default_value_t = 1.5)]
    pub z_max: f64,
    #[arg(long, default_value_t = 64)]
    pub nx: usize,
    #[arg(long, default_value_t = 64)]
    pub nz: usize,
}

#[derive(Serialize)]
struct TrapSite {
    minimum: TrapMinimum,
    frequencies_rad_s: LocalFrequencies,
    soft_frequency_hz: f64,
}

#[derive(Serialize)]
struct TrapfieldReport {
    mirror: MirrorParams,
    b0_t: f64,
    period_m: f64,
    trap_height_m: f64,
    mass_kg: f64,
    minima: Vec<TrapSite>,
}

pub fn trapfield(ctx: &Context, args: &TrapfieldArgs) -> Result<ExitCode> {
    if !(args.period > 0.0) {
        return Err(Error::Config(format!("period must be positive, got {}", args.period)));
    }
    let mp = MirrorParams {
        m0: args.mu0_m0 / trapfield::MU_0,
        k_m: 2.0 * PI / args.period,
        delta: args.thickness,
        b_ext_y: args.b_y,
        b_ext_z: args.b_z,
        g_f: args.g_f,
        m_f: args.m_f,
    };
    mp.validate()?;
    if !(args.z_min > 0.0 && args.z_max > args.z_min) || args.nx < 2 || args.nz < 2 || args.periods == 0 {
        return Err(Error::Config("map needs 0 < z_min < z_max, nx, nz >= 2 and periods >= 1".into()));
    }
    let mass = args.mass_kg.unwrap_or(consts::RB87_MASS);
    let out = OutDir::create(&ctx.out)?;
    let x_hi = args.periods as f64 * args.period;
    let xs: Vec<f64> = (0..args.nx).map(|i| x_hi * i as f64 / args.nx as f64).collect();
    let zs: Vec<f64> = sweep_values(args.z_min * args.period, args.z_max * args.period, args.nz);
    out.write("field_map.csv", |w| trapfield::write_field_map(w, &mp, &xs, &zs))?;
    let minima = trapfield::find_minima(&mp, 0.0, x_hi)?
        .into_iter()
        .map(|m| {
            let f = trapfield::local_frequencies(&mp, (m.x, m.z), mass)?;
            Ok(TrapSite { minimum: m, frequencies_rad_s: f, soft_frequency_hz: f.omega_soft / (2.0 * PI) })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = TrapfieldReport {
        mirror: mp,
        b0_t: mp.b0(),
        period_m: mp.period(),
        trap_height_m: trapfield::trap_height(&mp),
        mass_kg: mass,
        minima,
    };
    let path = out.write_json("trapfield.json", &report)?;
    for s in &report.minima {
        println!(
            "minimum at x = {:.4e} m, z = {:.4e} m: soft {:.1} Hz, stiff {:.1} Hz",
            s.minimum.x,
            s.minimum.z,
            s.soft_frequency_hz,
            s.frequencies_rad_s.omega_stiff / (2.0 * PI)
        );
    }
    println!("report: {}", path.display());
    Ok(ExitCode::SUCCESS)
}
