//! End-to-end acceptance checks at the reference parameters.
//!
//! Each criterion recomputes its observable from scratch and compares it
//! with a fixed target. A fault can be injected into any criterion: it
//! perturbs one input constant of that check, and the check is expected to
//! fail, which guards against checks that cannot fail.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{cm_overlap_sq, cm_wavefunction, rel_overlap_free_sq, rel_wavefunction_free};
use crate::basis::{initial_coeffs_diff, initial_coeffs_same, OscillatorBasis, PairGeometry};
use crate::dynamics::{free_same, propagate_diff, propagate_same, SolverSettings, Trajectory};
use crate::error::Result;
use crate::fidelity::{boltzmann_ratio, fidelity_full, fidelity_report, fidelity_simple, gate_run, thermal_weights};
use crate::model::{GateSchedule, TrapParams};
use crate::observables::{
    collisional_phase, constant_velocity_phase, perturbative_phase_period, recurrence_shift, velocity_validity_ratio,
};
use crate::oracle::{delta_regularization_study, grid_collisional_phase, overlap_with_spectral, GridSpec};
use crate::trapfield::{magnetic_potential, MirrorParams};

/// Number of criteria.
pub const CRITERIA: u8 = 9;

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub measured: String,
    pub target: String,
    pub seconds: f64,
    pub fault_injected: bool,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {} {}: {} | {} | target {} | {:.1} s{}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.measured,
            self.target,
            self.seconds,
            if self.fault_injected { " | fault injected" } else { "" }
        )
    }
}

struct Check {
    passed: bool,
    measured: String,
    target: String,
}

fn name(id: u8) -> &'static str {
    match id {
        1 => "collisional phase after 7 periods",
        2 => "perturbative phase per period",
        3 => "oscillation period shift",
        4 => "zero-temperature fidelity",
        5 => "thermal fidelity",
        6 => "closed-form overlaps",
        7 => "grid oracle equivalence",
        8 => "constant-velocity phase",
        9 => "property suite",
        _ => "unknown",
    }
}

fn settings(samples_per_period: usize) -> SolverSettings {
    SolverSettings { samples_per_period, ..Default::default() }
}

fn same_runs(p: &TrapParams, n_max: usize, periods: u32, spp: usize) -> Result<(Trajectory, Trajectory)> {
    let basis = OscillatorBasis::relative(p, n_max);
    let c0 = initial_coeffs_same(p, &basis)?;
    let sched = GateSchedule::periods(periods);
    Ok((propagate_same(&c0, p, &sched, &settings(spp))?, free_same(&c0, p, &sched, &settings(spp))?))
}

fn scaled_a_bb(factor: f64) -> TrapParams {
    let p = TrapParams::paper_fig2();
    TrapParams { a_bb: factor * p.a_bb, ..p }
}

fn c1(fault: bool) -> Result<Check> {
    let p = scaled_a_bb(if fault { 1.2 } else { 1.0 });
    let start = Instant::now();
    let (tr, fr) = same_runs(&p, 60, 7, 128)?;
    let phi = *collisional_phase(&tr, &fr)?.last().unwrap();
    let secs = start.elapsed().as_secs_f64();
    Ok(Check {
        passed: (phi - PI).abs() <= 0.05 * PI && secs < 60.0,
        measured: format!("phi_bb = {phi:.6} = {:.4} pi in {secs:.1} s", phi / PI),
        target: "pi +- 5%, < 60 s".into(),
    })
}

fn c2(fault: bool) -> Result<Check> {
    let p = scaled_a_bb(if fault { 1.2 } else { 1.0 });
    let seven = 7.0 * perturbative_phase_period(&p)?;
    Ok(Check {
        passed: (seven / PI - 0.97).abs() <= 0.01,
        measured: format!("7 phi_period = {:.5} pi", seven / PI),
        target: "0.97 pi +- 0.01 pi".into(),
    })
}

fn c3(fault: bool) -> Result<Check> {
    let p = scaled_a_bb(if fault { 2.5 } else { 1.0 });
    let (tr, _) = same_runs(&p, 60, 2, 512)?;
    let dt = recurrence_shift(&tr, 1)?;
    Ok(Check {
        passed: (dt - 1.4e-3).abs() <= 0.3e-3,
        measured: format!("dt/T_osc = {dt:.4e}"),
        target: "1.4e-3 +- 0.3e-3".into(),
    })
}

fn c4(fault: bool) -> Result<Check> {
    let p = scaled_a_bb(if fault { 1.5 } else { 1.0 });
    let run = gate_run(&p, &GateSchedule::periods(7), &settings(64), 60)?;
    let f = run.fidelity()?;
    Ok(Check {
        passed: (f - 0.99).abs() <= 0.01,
        measured: format!("F = {f:.5} (A = {:.6}, B = {:.5}, C = {:.5}, phi = {:.4} pi)", run.a, run.b, run.c, run.phi_bb / PI),
        target: "0.99 +- 0.01".into(),
    })
}

fn c5(fault: bool) -> Result<Check> {
    let p = TrapParams::paper_fig2();
    let kt = if fault { 4.0 } else { 2.0 };
    let start = Instant::now();
    let report = fidelity_report(&p, &GateSchedule::periods(7), &settings(64), 60, &[0.0, kt], 6)?;
    let secs = start.elapsed().as_secs_f64();
    let row = report.table[1];
    let gamma7 = boltzmann_ratio(kt)?.powi(7);
    let kelvin = p.temperature_kelvin(kt)?;
    let ok_f = (row.f_full - 0.96).abs() <= 0.02;
    let ok_g = (gamma7 - 0.030).abs() <= 0.001;
    let ok_t = (kelvin - 3.3e-6).abs() <= 0.3e-6;
    Ok(Check {
        passed: ok_f && ok_g && ok_t && secs < 300.0,
        measured: format!(
            "F = {:.5} (expansion {:.5}), gamma^7 = {gamma7:.5}, T = {:.3} uK in {secs:.1} s",
            row.f_full,
            row.f_expansion,
            kelvin * 1e6
        ),
        target: "F 0.96 +- 0.02, gamma^7 0.030 +- 0.001, T 3.3 +- 0.3 uK, < 300 s".into(),
    })
}

/// ∫ conj(f(x, t)) f(x, 0) dx by the trapezoid rule on [lo, hi].
fn grid_overlap(lo: f64, hi: f64, n: usize, f: impl Fn(f64, f64) -> Complex64, t: f64) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let o: Complex64 = (0..n)
        .map(|i| {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            f(x, t).conj() * f(x, 0.0) * (w * h)
        })
        .sum();
    o.norm_sqr()
}

fn c6(fault: bool) -> Result<Check> {
    let p = TrapParams::paper_fig2();
    // The fault evaluates the closed forms at a slightly wrong ω₀.
    let q = if fault { TrapParams { omega0: p.omega0 * (1.0 + 1e-5), ..p } } else { p };
    let golden = 0.5 * (5f64.sqrt() - 1.0);
    let mut worst: f64 = 0.0;
    for k in 1..=100 {
        let t = (k as f64 * golden).fract() * p.t_osc();
        let rel = grid_overlap(-25.0, 25.0, 8001, |x, s| rel_wavefunction_free(&p, x, s), t);
        let cm = grid_overlap(-12.0, 12.0, 4001, |x, s| cm_wavefunction(&p, x, s), t);
        worst = worst.max((rel - rel_overlap_free_sq(&q, t)).abs()).max((cm - cm_overlap_sq(&q, t)).abs());
    }
    let cm_min = cm_overlap_sq(&q, 0.25 * p.t_osc());
    let ok_min = (cm_min - 0.8).abs() < 1e-12;
    Ok(Check {
        passed: worst < 1e-8 && ok_min,
        measured: format!("max |closed - quadrature| = {worst:.2e}, min |O_cm|^2 = {cm_min:.12}"),
        target: "< 1e-8 at 100 times, min 0.8".into(),
    })
}

fn c7(fault: bool) -> Result<Check> {
    let p = TrapParams::paper_fig2();
    // The fault hands the spectral side a 5% larger scattering length.
    let ps = if fault { scaled_a_bb(1.05) } else { p };
    let t = p.t_osc();
    let (tr60, _) = same_runs(&ps, 60, 1, 64)?;
    let grid = grid_collisional_phase(&p, GridSpec::same_default(&p), t, 256)?;
    let overlap = overlap_with_spectral(&grid.interacting, &tr60, tr60.times.len() - 1)?.norm();
    let (tr, fr) = same_runs(&ps, 960, 1, 64)?;
    let phi_spec = *collisional_phase(&tr, &fr)?.last().unwrap();
    let study = delta_regularization_study(&p, &[0.1, 0.05, 0.025], t)?;
    let rel = (phi_spec - study.extrapolated).abs() / study.extrapolated;
    Ok(Check {
        passed: overlap > 0.999 && rel < 0.01,
        measured: format!(
            "overlap = {overlap:.7}, phi spectral(N=960) = {phi_spec:.5}, phi grid(sigma->0) = {:.5} +- {:.5}, diff {:.2}%",
            study.extrapolated,
            study.error_bar,
            100.0 * rel
        ),
        target: "overlap > 0.999, phases within 1%".into(),
    })
}

fn c8(fault: bool) -> Result<Check> {
    let p = TrapParams::paper_fig2();
    let v = p.x0 * p.omega * if fault { 1.03 } else { 1.0 };
    let cv = 2.0 * constant_velocity_phase(&p, v)?;
    let saddle = perturbative_phase_period(&p)?;
    let ratio = velocity_validity_ratio(&p);
    let rel = (cv - saddle).abs() / saddle;
    Ok(Check {
        passed: rel < 0.015 && (ratio - 0.07).abs() < 0.005,
        measured: format!("cv = {cv:.6}, saddle = {saddle:.6}, diff {:.3}%, ratio {ratio:.4}", 100.0 * rel),
        target: "within 1.5% at ratio 0.07".into(),
    })
}

fn c9(fault: bool) -> Result<Check> {
    let p = TrapParams::paper_fig2();
    let mut failures: Vec<String> = Vec::new();
    let mut note = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };

    // Unitarity and parity over two periods.
    let (tr, fr) = same_runs(&p, 60, 2, 256)?;
    note(tr.max_drift_per_period < 1e-8, format!("norm drift {:.2e}", tr.max_drift_per_period));
    let odd = tr.states.iter().flat_map(|s| s.iter().skip(1).step_by(2)).map(|c| c.norm()).fold(0.0, f64::max);
    note(odd < 1e-12, format!("odd amplitude {odd:.2e}"));

    // Free evolution is the identity in the interaction picture.
    let free = TrapParams { a_bb: 0.0, ..p };
    let (zt, zf) = same_runs(&free, 60, 1, 64)?;
    note(zt.states.iter().all(|s| s == &zt.states[0]), "a_s = 0 run is not static".into());
    note(collisional_phase(&zt, &zf)?.iter().all(|&x| x == 0.0), "a_s = 0 phase is not zero".into());

    // Half-period recurrence phase of the free relative motion.
    let half = if fault { 0.45 } else { 0.5 };
    let i = zt.times.iter().position(|&t| t >= half * p.t_osc() - 1e-12).unwrap();
    let arg = zt.overlap_propagated(i).arg();
    note((arg - PI / 2.0).abs() < 1e-6, format!("half-period arg O = {arg}"));

    // Fidelity specialization identity.
    for &c in &[0.5, 0.8, 0.95, 1.0] {
        for &phi in &[0.0, 1.0, PI, 4.0] {
            let d = (fidelity_full(1.0, c, c, phi)? - fidelity_simple(c * c, phi)).abs();
            note(d < 1e-12, format!("fidelity identity off by {d:e} at C={c}, phi={phi}"));
        }
    }

    // Thermal weights sum to one.
    for &kt in &[0.1, 1.0, 2.0, 10.0] {
        let s: f64 = thermal_weights(kt, 6)?.iter().sum();
        note((s - 1.0).abs() < 1e-14, format!("thermal weights sum to {s}"));
    }

    // Trap landscape: periodic in x and bounded below by the B_y floor.
    let mp = MirrorParams::video_tape();
    for k in 0..50 {
        let x = 0.037e-6 * k as f64;
        let z = 0.05e-6 + 0.02e-6 * k as f64;
        let v = magnetic_potential(&mp, x, z)?;
        let shifted = magnetic_potential(&mp, x + 3.0 * mp.period(), z)?;
        note((v - shifted).abs() <= 1e-12 * v, format!("potential not periodic at x={x}"));
        note(v >= mp.moment() * mp.b_ext_y * (1.0 - 1e-15), format!("potential below floor at ({x}, {z})"));
    }

    // Staircase: the phase grows at the collisions t_k = (2k+1) T/4.
    let phi = collisional_phase(&tr, &fr)?;
    let t = tr.times_over_tosc();
    for k in 0..4 {
        let centre = (2 * k + 1) as f64 / 4.0;
        let (lo, hi) = (centre - 0.25, centre + 0.25);
        let steepest = (1..t.len())
            .filter(|&j| t[j] > lo && t[j] <= hi)
            .max_by(|&a, &b| (phi[a] - phi[a - 1]).total_cmp(&(phi[b] - phi[b - 1])))
            .map(|j| t[j])
            .unwrap_or(f64::NAN);
        note((steepest - centre).abs() < 0.03, format!("collision {k} steepest at {steepest} T"));
    }

    // ab case: recurrence peaks decay period by period.
    let geo = PairGeometry::new(&p);
    let (bc, br) = (geo.basis_cm(56), geo.basis_rel(56));
    let init = initial_coeffs_diff(&p, &bc, &br)?;
    let spp = 64;
    let ab = propagate_diff(&init, &p, &GateSchedule::periods(4), &settings(spp))?;
    let peaks: Vec<f64> = (1..=4).map(|n| ab.overlap_initial(n * spp).norm()).collect();
    note(peaks.windows(2).all(|w| w[1] < w[0]) && peaks[0] < 1.0, format!("ab peaks {peaks:?}"));

    Ok(Check {
        passed: failures.is_empty(),
        measured: if failures.is_empty() {
            format!("all properties hold; ab peaks {:.3?}", peaks)
        } else {
            failures.join("; ")
        },
        target: "unitarity, parity, free identity, half-period arg, fidelity identity, weights, trapfield, staircase, ab decay"
            .into(),
    })
}

/// Runs criterion `id` (1..=9), with its fault injected when `fault` is set.
pub fn run_criterion(id: u8, fault: bool) -> CriterionOutcome {
    let start = Instant::now();
    let check = match id {
        1 => c1(fault),
        2 => c2(fault),
        3 => c3(fault),
        4 => c4(fault),
        5 => c5(fault),
        6 => c6(fault),
        7 => c7(fault),
        8 => c8(fault),
        9 => c9(fault),
        _ => Ok(Check { passed: false, measured: "no such criterion".into(), target: format!("1..={CRITERIA}") }),
    };
    let check = check.unwrap_or_else(|e| Check { passed: false, measured: format!("error: {e}"), target: String::new() });
    CriterionOutcome {
        id,
        name: name(id).into(),
        passed: check.passed,
        measured: check.measured,
        target: check.target,
        seconds: start.elapsed().as_secs_f64(),
        fault_injected: fault,
    }
}

/// Runs every criterion in order, injecting a fault into `fault` if given.
pub fn run_all(fault: Option<u8>) -> Vec<CriterionOutcome> {
    (1..=CRITERIA).map(|id| run_criterion(id, fault == Some(id))).collect()
}
