//! Gate map, minimum fidelity at zero temperature, and the thermal average
//! over relative-motion excitations.
//!
//! The minimum fidelity is min over internal input states χ of
//! ‖Σ_αβ p_αβ u_αβ‖², with p_αβ = |⟨αβ|χ⟩|² and u_αβ the final motional
//! state of branch αβ after removing the ideal phase-gate phases. Only the
//! real parts of the motional Gram matrix enter, and with single-atom
//! return amplitude A, two-atom return amplitude B² and interacting/free
//! overlap C² they are
//!
//! ```text
//!          aa      ab      ba      bb
//!   aa  [  1       A       A      −B²c ]
//!   ab  [  A       1       A²     −BCc ]
//!   ba  [  A       A²      1      −BCc ]
//!   bb  [ −B²c    −BCc    −BCc     1   ]      c = cos φ_bb
//! ```
//!
//! The quadratic form is minimized exactly over the probability simplex.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{excited_relative_state, initial_coeffs_same, OscillatorBasis};
use crate::dynamics::{free_same, propagate_same, SolverSettings, Trajectory};
use crate::error::{Error, Result};
use crate::model::{GateSchedule, TrapParams};
use crate::observables::{collisional_phase, excited_basis_size, wrap};

/// Default number of thermally populated excitations beyond the ground state.
pub const DEFAULT_N_CUT: usize = 6;
/// Header line of the fidelity table CSV.
pub const FIDELITY_CSV_HEADER: &str = "# collgate fidelity v1";

/// Phases entering the gate map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatePhases {
    pub phi_a: f64,
    pub phi_b: f64,
    /// Collisional phase of an |a⟩,|b⟩ pair; zero for displaced transverse traps.
    pub phi_ab: f64,
    pub phi_bb: f64,
}

/// Diagonal two-qubit map in the |aa⟩, |ab⟩, |ba⟩, |bb⟩ basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateMap {
    /// Entries e^{−iθ}; θ_aa = 2φ_a, θ_ab = θ_ba = φ_a + φ_b + φ_ab,
    /// θ_bb = φ_bb + 2φ_b.
    pub diagonal: [Complex64; 4],
    /// Conditional phase χ = arg U_aa + arg U_bb − arg U_ab − arg U_ba,
    /// in (−π, π]. Single-qubit phases cancel out of it.
    pub chi: f64,
}

impl GateMap {
    /// Distance of χ from π, the phase-gate condition.
    pub fn residue(&self) -> f64 {
        wrap(self.chi - PI).abs()
    }

    /// The map after removing single-qubit phases: diag(1, 1, 1, e^{iχ}).
    pub fn canonical(&self) -> [Complex64; 4] {
        let one = Complex64::new(1.0, 0.0);
        [one, one, one, Complex64::from_polar(1.0, self.chi)]
    }
}

pub fn gate_unitary(ph: &GatePhases) -> GateMap {
    let theta = [2.0 * ph.phi_a, ph.phi_a + ph.phi_b + ph.phi_ab, ph.phi_a + ph.phi_b + ph.phi_ab, ph.phi_bb + 2.0 * ph.phi_b];
    let diagonal = theta.map(|t| Complex64::from_polar(1.0, -t));
    let chi = wrap(-(theta[0] + theta[3] - theta[1] - theta[2]));
    GateMap { diagonal, chi }
}

/// Gram matrix of the four motional branches (real part).
pub fn branch_gram(a: f64, b: f64, c: f64, phi_bb: f64) -> [[f64; 4]; 4] {
    let k = phi_bb.cos();
    [
        [1.0, a, a, -b * b * k],
        [a, 1.0, a * a, -b * c * k],
        [a, a * a, 1.0, -b * c * k],
        [-b * b * k, -b * c * k, -b * c * k, 1.0],
    ]
}

fn quad_form(g: &[[f64; 4]; 4], p: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += p[i] * g[i][j] * p[j];
        }
    }
    s
}

/// Solves the bordered KKT system on the support `idx`; None when singular.
fn face_minimizer(g: &[[f64; 4]; 4], idx: &[usize]) -> Option<[f64; 4]> {
    let k = idx.len();
    let n = k + 1;
    let mut m = [[0.0f64; 6]; 5];
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            m[r][c] = g[i][j];
        }
        m[r][k] = 1.0;
        m[k][r] = 1.0;
    }
    m[k][n] = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut p = [0.0; 4];
    for (r, &i) in idx.iter().enumerate() {
        let v = m[r][n] / m[r][r];
        if v < -1e-12 {
            return None;
        }
        p[i] = v.max(0.0);
    }
    Some(p)
}

/// Minimum of pᵀGp over the probability simplex, with the minimizing p.
pub fn simplex_minimum(g: &[[f64; 4]; 4]) -> (f64, [f64; 4]) {
    let mut best = (f64::INFINITY, [0.0; 4]);
    for mask in 1u32..16 {
        let idx: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        if let Some(p) = face_minimizer(g, &idx) {
            let f = quad_form(g, &p);
            if f < best.0 {
                best = (f, p);
            }
        }
    }
    best
}

/// Minimum gate fidelity from the overlap roots A, B, C and φ_bb.
pub fn fidelity_full(a: f64, b: f64, c: f64, phi_bb: f64) -> Result<f64> {
    for (name, v) in [("A", a), ("B", b), ("C", c)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let (f, _) = simplex_minimum(&branch_gram(a, b, c, phi_bb));
    if !(-1e-12..=1.0 + 1e-12).contains(&f) {
        return Err(Error::Consistency(format!(
            "fidelity {f} outside [0, 1] for A = {a}, B = {b}, C = {c}: the overlaps are not realizable"
        )));
    }
    Ok(f.clamp(0.0, 1.0))
}

/// F = ½(1 − |O₀| cos φ_bb), valid for τ = N·T_osc where A = 1 and B = C.
pub fn fidelity_simple(o0_abs: f64, phi_bb: f64) -> f64 {
    0.5 * (1.0 - o0_abs * phi_bb.cos())
}

/// γ = exp(−ħω₀/k_BT) with k_BT given in units of ħω₀.
pub fn boltzmann_ratio(kt_over_hw0: f64) -> Result<f64> {
    if kt_over_hw0 < 0.0 || kt_over_hw0.is_nan() {
        return Err(Error::Domain(format!("temperature must be non-negative, got {kt_over_hw0}")));
    }
    Ok(if kt_over_hw0 == 0.0 { 0.0 } else { (-1.0 / kt_over_hw0).exp() })
}

/// Geometric populations P_n ∝ γⁿ of the relative-motion excitations,
/// normalized over n = 0..=n_cut.
pub fn thermal_weights(kt_over_hw0: f64, n_cut: usize) -> Result<Vec<f64>> {
    if n_cut < 1 {
        return Err(Error::Domain("n_cut must be at least 1".into()));
    }
    let g = boltzmann_ratio(kt_over_hw0)?;
    let raw: Vec<f64> = (0..=n_cut as i32).map(|n| g.powi(n)).collect();
    let z: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / z).collect())
}

/// Interaction outcome for the excited relative state ψ_(n) after τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub n: usize,
    pub o0_abs: f64,
    pub phi: f64,
}

impl Excitation {
    fn signal(&self) -> f64 {
        self.o0_abs * self.phi.cos()
    }
}

fn check_per_n(per_n: &[Excitation], n_cut: usize) -> Result<()> {
    if per_n.len() <= n_cut || per_n.iter().enumerate().take(n_cut + 1).any(|(i, e)| e.n != i) {
        return Err(Error::Contract(format!("excitations 0..={n_cut} are required in order")));
    }
    Ok(())
}

/// F(T) = ½{1 − Σ_n P_n |O₀(ψ_(n))| cos φ_(n)}.
pub fn fidelity_thermal(per_n: &[Excitation], kt_over_hw0: f64, n_cut: usize) -> Result<f64> {
    check_per_n(per_n, n_cut)?;
    let w = thermal_weights(kt_over_hw0, n_cut)?;
    Ok(0.5 * (1.0 - w.iter().zip(per_n).map(|(p, e)| p * e.signal()).sum::<f64>()))
}

/// Telescoped expansion F(0) − ½ Σ_{n=1}^{n_cut} γⁿ (X_n − X_{n−1}),
/// X_n = |O₀(ψ_(n))| cos φ_(n).
pub fn fidelity_thermal_expansion(per_n: &[Excitation], kt_over_hw0: f64, n_cut: usize) -> Result<f64> {
    check_per_n(per_n, n_cut)?;
    let g = boltzmann_ratio(kt_over_hw0)?;
    let x: Vec<f64> = per_n.iter().map(Excitation::signal).collect();
    let mut f = 0.5 * (1.0 - x[0]);
    for n in 1..=n_cut {
        f -= 0.5 * g.powi(n as i32) * (x[n] - x[n - 1]);
    }
    Ok(f)
}

/// One row of the temperature table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalRow {
    pub kt_over_hw0: f64,
    pub gamma: f64,
    pub f_full: f64,
    pub f_expansion: f64,
}

/// Everything the fidelity pipeline produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub phi_bb: f64,
    #[serde(rename = "F0")]
    pub f0: f64,
    #[serde(rename = "FT")]
    pub table: Vec<ThermalRow>,
    pub per_n: Vec<Excitation>,
    /// T in kelvin for each table row, when SI anchors are present.
    pub temperature_k: Option<Vec<f64>>,
}

/// Ground-state gate run: overlap roots and φ_bb at τ.
#[derive(Debug, Clone)]
pub struct GateRun {
    pub traj: Trajectory,
    pub free: Trajectory,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub phi_bb: f64,
}

impl GateRun {
    pub fn fidelity(&self) -> Result<f64> {
        fidelity_full(self.a, self.b, self.c, self.phi_bb)
    }
}

/// Propagates the bb initial state over the schedule and extracts A, B, C.
pub fn gate_run(params: &TrapParams, schedule: &GateSchedule, settings: &SolverSettings, n_max: usize) -> Result<GateRun> {
    let basis = OscillatorBasis::relative(params, n_max);
    let c0 = initial_coeffs_same(params, &basis)?;
    let traj = propagate_same(&c0, params, schedule, settings)?;
    let free = free_same(&c0, params, schedule, settings)?;
    let last = traj.times.len() - 1;
    let phi = collisional_phase(&traj, &free)?;
    let root = |z: Complex64| z.norm().min(1.0).sqrt();
    Ok(GateRun {
        a: root(free.overlap_initial(last)),
        b: root(traj.overlap_initial(last)),
        c: root(traj.overlap_with(&free, last)?),
        phi_bb: phi[last],
        traj,
        free,
    })
}

/// |O₀(ψ_(n), τ)| and φ_(n)(τ) for one excitation in a basis of size n_max.
pub fn excitation_run(
    params: &TrapParams,
    n: usize,
    schedule: &GateSchedule,
    settings: &SolverSettings,
    n_max: usize,
) -> Result<Excitation> {
    let basis = OscillatorBasis::relative(params, n_max);
    let c0 = excited_relative_state(n, params).project(&basis);
    let traj = propagate_same(&c0, params, schedule, settings)?;
    let free = free_same(&c0, params, schedule, settings)?;
    let phi = collisional_phase(&traj, &free)?;
    let last = traj.times.len() - 1;
    Ok(Excitation { n, o0_abs: traj.overlap_with(&free, last)?.norm(), phi: phi[last] })
}

/// Basis size shared by every run of a thermal average, so that the
/// differences between excitations carry no truncation bias.
pub fn thermal_basis_size(n_max: usize, n_cut: usize) -> usize {
    n_max.max(excited_basis_size(n_cut))
}

/// Full pipeline: ground-state gate run plus excitations 1..=n_cut, all
/// in one basis and run concurrently, and the temperature table.
pub fn fidelity_report(
    params: &TrapParams,
    schedule: &GateSchedule,
    settings: &SolverSettings,
    n_max: usize,
    temperatures: &[f64],
    n_cut: usize,
) -> Result<FidelityReport> {
    let n_eff = thermal_basis_size(n_max, n_cut);
    let (run, excited) = rayon::join(
        || gate_run(params, schedule, settings, n_eff),
        || (1..=n_cut).into_par_iter().map(|n| excitation_run(params, n, schedule, settings, n_eff)).collect::<Result<Vec<_>>>(),
    );
    let run = run?;
    let mut per_n = vec![Excitation { n: 0, o0_abs: run.c * run.c, phi: run.phi_bb }];
    per_n.extend(excited?);
    let table = temperatures
        .iter()
        .map(|&kt| {
            Ok(ThermalRow {
                kt_over_hw0: kt,
                gamma: boltzmann_ratio(kt)?,
                f_full: fidelity_thermal(&per_n, kt, n_cut)?,
                f_expansion: fidelity_thermal_expansion(&per_n, kt, n_cut)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let temperature_k = temperatures.iter().map(|&kt| params.temperature_kelvin(kt)).collect::<Result<Vec<_>>>().ok();
    Ok(FidelityReport { a: run.a, b: run.b, c: run.c, phi_bb: run.phi_bb, f0: run.fidelity()?, table, per_n, temperature_k })
}

fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

/// Writes `kT_over_hw0,gamma,F_full,F_expansion` rows.
pub fn write_fidelity_csv<W: Write>(out: &mut W, rows: &[ThermalRow]) -> Result<()> {
    writeln!(out, "{FIDELITY_CSV_HEADER}")?;
    writeln!(out, "kT_over_hw0,gamma,F_full,F_expansion")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", sig15(r.kt_over_hw0), sig15(r.gamma), sig15(r.f_full), sig15(r.f_expansion))?;
    }
    Ok(())
}
