//! WebAssembly bindings behind `www/index.html`. Each export takes a few
//! numbers and returns a JSON string of curves ready for a canvas plot.

use std::f64::consts::PI;

use collgate::basis::{initial_coeffs_same, OscillatorBasis};
use collgate::dynamics::{free_same, propagate_same, SolverSettings};
use collgate::model::{GateSchedule, TrapParams};
use collgate::observables::{
    collisional_phase_lenient, energy_shift_bb, overlap_series, perturbative_phase_period,
};
use collgate::trapfield::{magnetic_potential, MirrorParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Phase staircase of two |b⟩ atoms.
#[derive(Debug, Serialize)]
pub struct Dynamics {
    pub t_over_tosc: Vec<f64>,
    pub phase: Vec<f64>,
    pub o0_abs: Vec<f64>,
    pub final_phase_over_pi: f64,
}

pub fn dynamics(a_bb_scale: f64, n_periods: u32) -> collgate::Result<Dynamics> {
    let mut p = TrapParams::paper_fig2();
    p.a_bb *= a_bb_scale;
    let schedule = GateSchedule::periods(n_periods.clamp(1, 20));
    let settings = SolverSettings { samples_per_period: 64, ..SolverSettings::default() };
    let c0 = initial_coeffs_same(&p, &OscillatorBasis::relative(&p, 60))?;
    let traj = propagate_same(&c0, &p, &schedule, &settings)?;
    let free = free_same(&c0, &p, &schedule, &settings)?;
    let o0 = overlap_series(&traj, &free)?;
    let phase = collisional_phase_lenient(&o0);
    Ok(Dynamics {
        t_over_tosc: traj.times_over_tosc(),
        final_phase_over_pi: phase.last().copied().unwrap_or(f64::NAN) / PI,
        phase,
        o0_abs: o0.iter().map(|z| z.norm()).collect(),
    })
}

/// First-order energy shift over one period and its integral.
#[derive(Debug, Serialize)]
pub struct EnergyShift {
    pub t_over_tosc: Vec<f64>,
    pub delta_e: Vec<f64>,
    pub phase_per_period: f64,
}

pub fn energy_shift(x0: f64, omega0: f64, points: usize) -> collgate::Result<EnergyShift> {
    let p = TrapParams { x0, omega0, ..TrapParams::paper_fig2() };
    p.validate()?;
    let n = points.clamp(2, 4096);
    let t_over_tosc: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let delta_e = t_over_tosc.iter().map(|&s| energy_shift_bb(&p, s * p.t_osc())).collect();
    Ok(EnergyShift { t_over_tosc, delta_e, phase_per_period: perturbative_phase_period(&p)? })
}

/// Mirror potential on an nx × nz grid, in μK, x fastest.
#[derive(Debug, Serialize)]
pub struct PotentialMap {
    pub nx: usize,
    pub nz: usize,
    pub x_um: Vec<f64>,
    pub z_um: Vec<f64>,
    pub v_uk: Vec<f64>,
}

pub fn potential_map(b_y_gauss: f64, b_z_gauss: f64, nx: usize, nz: usize) -> collgate::Result<PotentialMap> {
    const KB: f64 = 1.380649e-23;
    let mp = MirrorParams { b_ext_y: b_y_gauss * 1e-4, b_ext_z: b_z_gauss * 1e-4, ..MirrorParams::video_tape() };
    mp.validate()?;
    let (nx, nz) = (nx.clamp(2, 400), nz.clamp(2, 400));
    let period = mp.period();
    let x_um: Vec<f64> = (0..nx).map(|i| 2.0 * period * i as f64 / nx as f64 * 1e6).collect();
    let z_um: Vec<f64> = (0..nz).map(|j| period * (0.1 + 1.4 * j as f64 / (nz - 1) as f64) * 1e6).collect();
    let mut v_uk = Vec::with_capacity(nx * nz);
    for &z in &z_um {
        for &x in &x_um {
            v_uk.push(magnetic_potential(&mp, x * 1e-6, z * 1e-6)? / KB * 1e6);
        }
    }
    Ok(PotentialMap { nx, nz, x_um, z_um, v_uk })
}

fn to_js<T: Serialize>(r: collgate::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gateDynamics)]
pub fn gate_dynamics(a_bb_scale: f64, n_periods: u32) -> Result<String, JsError> {
    to_js(dynamics(a_bb_scale, n_periods))
}

#[wasm_bindgen(js_name = energyShift)]
pub fn energy_shift_js(x0: f64, omega0: f64, points: usize) -> Result<String, JsError> {
    to_js(energy_shift(x0, omega0, points))
}

#[wasm_bindgen(js_name = mirrorPotential)]
pub fn mirror_potential(b_y_gauss: f64, b_z_gauss: f64, nx: usize, nz: usize) -> Result<String, JsError> {
    to_js(potential_map(b_y_gauss, b_z_gauss, nx, nz))
}
