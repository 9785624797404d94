//! Propagation of the interacting two-atom state in oscillator eigenbases.
//!
//! Both problems are solved in the interaction picture of a harmonic H₀, so
//! the coefficients only move through the perturbation:
//!
//! * two |b⟩ atoms: the relative coordinate in the (½, ω) basis, with the
//!   contact term g·δ(r) truncated to the rank-one matrix ψ_k(0)ψ_l(0);
//! * an |a⟩,|b⟩ pair: CM and relative coordinates in (2, ω̃) and (½, ω̃)
//!   bases coupled by κ·R·r, linear shifts, and the contact term at the
//!   relative-basis point −c_r.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::analytic::cm_overlap;
use crate::basis::{ModeCoefficients, OscillatorBasis, PairCoefficients, PairGeometry};
use crate::error::{Error, Result};
use crate::model::{effective_1d_coupling, GateSchedule, StatePair, TrapParams};
use crate::ode::{Dop853, OdeSettings, OdeStats};

/// Integrator tolerances and the recording cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub ode: OdeSettings,
    pub samples_per_period: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings { ode: OdeSettings::default(), samples_per_period: 512 }
    }
}

/// Largest tolerated |c_N|² in an initial state.
pub const INITIAL_TAIL_LIMIT: f64 = 1e-8;
/// Norm drift that aborts a run.
pub const NORM_FAILURE: f64 = 1e-6;

/// Which coefficient layout a trajectory holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryKind {
    /// Relative motion of two |b⟩ atoms; the CM part is analytic.
    Same { basis: OscillatorBasis },
    /// Coupled CM × relative motion of an |a⟩,|b⟩ pair.
    Pair { basis_cm: OscillatorBasis, basis_rel: OscillatorBasis, geometry: PairGeometry },
}

/// Sampled solution: interaction-picture coefficients at each time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: TrapParams,
    pub kind: TrajectoryKind,
    /// Sample times in internal units (T_osc = 2π/ω).
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    /// Largest truncation-tail weight seen at any sample.
    pub max_tail: f64,
    /// Largest norm drift over any single period.
    pub max_drift_per_period: f64,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn times_over_tosc(&self) -> Vec<f64> {
        let t_osc = self.params.t_osc();
        self.times.iter().map(|t| t / t_osc).collect()
    }

    /// H₀ eigenvalue of each coefficient.
    pub fn energies(&self) -> Vec<f64> {
        match self.kind {
            TrajectoryKind::Same { basis } => (0..basis.len()).map(|n| basis.energy(n)).collect(),
            TrajectoryKind::Pair { basis_cm, basis_rel, geometry } => {
                let mut e = Vec::with_capacity(basis_cm.len() * basis_rel.len());
                for j in 0..basis_cm.len() {
                    for k in 0..basis_rel.len() {
                        e.push((j + k + 1) as f64 * geometry.omega_tilde + geometry.offset);
                    }
                }
                e
            }
        }
    }

    /// Relative-mode coefficients at sample `i` (same-state runs only).
    pub fn mode_coefficients(&self, i: usize) -> Result<ModeCoefficients> {
        match self.kind {
            TrajectoryKind::Same { basis } => Ok(ModeCoefficients { basis, amps: self.states[i].clone() }),
            TrajectoryKind::Pair { .. } => Err(Error::Contract("pair trajectory has no single mode".into())),
        }
    }

    /// ⟨ψ(t_i)|ψ(0)⟩ within the propagated coordinates (relative motion
    /// only for same-state runs).
    pub fn overlap_propagated(&self, i: usize) -> Complex64 {
        let t = self.times[i];
        let e = self.energies();
        self.states[i]
            .iter()
            .zip(&self.states[0])
            .zip(&e)
            .map(|((c, c0), en)| c.conj() * c0 * Complex64::from_polar(1.0, en * t))
            .sum()
    }

    /// Full two-atom ⟨ψ(t_i)|ψ(0)⟩, including the analytic CM factor for
    /// same-state runs.
    pub fn overlap_initial(&self, i: usize) -> Complex64 {
        let o = self.overlap_propagated(i);
        match self.kind {
            TrajectoryKind::Same { .. } => o * cm_overlap(&self.params, self.times[i]),
            TrajectoryKind::Pair { .. } => o,
        }
    }

    fn same_layout(&self, other: &Trajectory) -> Result<()> {
        if self.kind != other.kind {
            return Err(Error::Contract("trajectories use different bases".into()));
        }
        if self.times.len() != other.times.len()
            || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0))
        {
            return Err(Error::Contract("trajectories use different time grids".into()));
        }
        Ok(())
    }

    /// ⟨ψ(t_i)|ψ⁽⁰⁾(t_i)⟩ against a reference run on the same grid. The
    /// free phases and the CM factor cancel.
    pub fn overlap_with(&self, free: &Trajectory, i: usize) -> Result<Complex64> {
        self.same_layout(free)?;
        Ok(self.states[i].iter().zip(&free.states[i]).map(|(a, b)| a.conj() * b).sum())
    }
}

fn sample_times(tau: f64, t_osc: f64, samples_per_period: usize) -> Vec<f64> {
    let n = ((tau / t_osc) * samples_per_period as f64).round().max(1.0) as usize;
    (0..=n).map(|k| tau * k as f64 / n as f64).collect()
}

fn run<F>(
    params: &TrapParams,
    kind: TrajectoryKind,
    init: Vec<Complex64>,
    tau: f64,
    settings: &SolverSettings,
    tail: impl Fn(&[Complex64]) -> f64,
    mut rhs: F,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let t_osc = params.t_osc();
    let times = sample_times(tau, t_osc, settings.samples_per_period);
    let norm0: f64 = init.iter().map(|c| c.norm_sqr()).sum();
    let mut y = init;
    let mut ode = Dop853::new(settings.ode, y.len());
    let mut states = Vec::with_capacity(times.len());
    let mut norms = Vec::with_capacity(times.len());
    let mut max_tail = tail(&y);
    let mut max_drift = 0.0f64;
    let mut period_start_norm = norm0;
    let mut next_period = t_osc;
    states.push(y.clone());
    norms.push(norm0);
    let mut t = 0.0;
    for &ts in &times[1..] {
        ode.advance(&mut rhs, &mut t, &mut y, ts)?;
        let norm: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        if (norm - norm0).abs() > NORM_FAILURE {
            return Err(Error::SolverFailure(format!(
                "norm drifted from {norm0} to {norm} by t = {:.6} T_osc ({} steps, {} rejected)",
                ts / t_osc,
                ode.stats.accepted,
                ode.stats.rejected
            )));
        }
        max_tail = max_tail.max(tail(&y));
        if ts >= next_period * (1.0 - 1e-12) || ts == *times.last().unwrap() {
            max_drift = max_drift.max((norm - period_start_norm).abs());
            period_start_norm = norm;
            next_period += t_osc;
        }
        states.push(y.clone());
        norms.push(norm);
    }
    if max_drift > 1e-8 {
        log::warn!("norm drift {max_drift:e} per period exceeds 1e-8");
    }
    Ok(Trajectory {
        params: *params,
        kind,
        times,
        states,
        norms,
        max_tail,
        max_drift_per_period: max_drift,
        stats: ode.stats,
    })
}

fn check_initial_tail(tail: f64, what: &str) -> Result<()> {
    if tail > INITIAL_TAIL_LIMIT {
        return Err(Error::Truncation(format!(
            "{what}: initial tail weight {tail:e} exceeds {INITIAL_TAIL_LIMIT:e}; increase n_max"
        )));
    }
    Ok(())
}

/// Propagates the relative motion of two |b⟩ atoms over the gate.
///
/// ċ_n = −i g ψ_n(0) e^{inωt} Σ_l ψ_l(0) e^{−ilωt} c_l, evaluated in O(N)
/// per right-hand side because the contact matrix has rank one.
pub fn propagate_same(
    init: &ModeCoefficients,
    params: &TrapParams,
    schedule: &GateSchedule,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    let basis = init.basis;
    if basis != OscillatorBasis::relative(params, basis.n_max) {
        return Err(Error::Contract("same-state propagation needs the (1/2, omega) relative basis".into()));
    }
    check_initial_tail(init.tail(), "relative mode")?;
    let tau = schedule.tau(params)?;
    let g = effective_1d_coupling(params, StatePair::Bb);
    let v = basis.eigenfunctions(0.0);
    // Odd levels vanish at the origin and never couple.
    let active: Vec<usize> = (0..basis.len()).filter(|&n| v[n] != 0.0).collect();
    let w = basis.frequency;
    let mut phase = vec![Complex64::new(0.0, 0.0); basis.len()];
    let rhs = move |t: f64, c: &[Complex64], dc: &mut [Complex64]| {
        let u = Complex64::from_polar(1.0, w * t);
        let mut p = Complex64::new(1.0, 0.0);
        for (n, ph) in phase.iter_mut().enumerate() {
            if n % 64 == 0 {
                p = Complex64::from_polar(1.0, n as f64 * w * t);
            }
            *ph = p;
            p *= u;
        }
        let mut s = Complex64::new(0.0, 0.0);
        for &l in &active {
            s += phase[l].conj() * c[l] * v[l];
        }
        let s = Complex64::new(0.0, -g) * s;
        for d in dc.iter_mut() {
            *d = Complex64::new(0.0, 0.0);
        }
        for &n in &active {
            dc[n] = phase[n] * s * v[n];
        }
    };
    run(
        params,
        TrajectoryKind::Same { basis },
        init.amps.clone(),
        tau,
        settings,
        |c| c.last().map_or(0.0, |z| z.norm_sqr()),
        rhs,
    )
}

/// Propagates an |a⟩,|b⟩ pair in coupled CM × relative bases.
pub fn propagate_diff(
    init: &PairCoefficients,
    params: &TrapParams,
    schedule: &GateSchedule,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    let geo = PairGeometry::new(params);
    let (bc, br) = (init.basis_cm, init.basis_rel);
    if bc != geo.basis_cm(bc.n_max) || br != geo.basis_rel(br.n_max) {
        return Err(Error::Contract("pair propagation needs the shifted omega-tilde bases".into()));
    }
    check_initial_tail(init.tail(), "pair state")?;
    let tau = schedule.tau(params)?;
    let g = effective_1d_coupling(params, StatePair::Ab);
    let (nj, nk) = (bc.len(), br.len());
    // The contact point r = 0 in the relative basis centred at +c_r.
    let v = br.eigenfunctions(0.0);
    let wt = geo.omega_tilde;
    let cross = geo.kappa / (2.0 * wt);
    let lin = geo.kappa * geo.c_cm / wt.sqrt();
    let sq: Vec<f64> = (0..=nj.max(nk)).map(|n| (n as f64).sqrt()).collect();
    let mut pw = vec![Complex64::new(0.0, 0.0); nk.max(3)];
    let mut sums = vec![Complex64::new(0.0, 0.0); nj];
    let rhs = move |t: f64, c: &[Complex64], dc: &mut [Complex64]| {
        let u = Complex64::from_polar(1.0, wt * t);
        let mut p = Complex64::new(1.0, 0.0);
        for (m, slot) in pw.iter_mut().enumerate() {
            if m % 64 == 0 {
                p = Complex64::from_polar(1.0, m as f64 * wt * t);
            }
            *slot = p;
            p *= u;
        }
        let (u1, u2) = (pw[1], pw[2]);
        let (u1c, u2c) = (u1.conj(), u2.conj());
        let at = |j: usize, k: usize| c[j * nk + k];
        for (j, s) in sums.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..nk {
                acc += pw[l].conj() * at(j, l) * v[l];
            }
            *s = acc * g;
        }
        for j in 0..nj {
            for k in 0..nk {
                let mut h = Complex64::new(0.0, 0.0);
                let mut x = Complex64::new(0.0, 0.0);
                if j + 1 < nj && k + 1 < nk {
                    x += at(j + 1, k + 1) * (sq[j + 1] * sq[k + 1]) * u2c;
                }
                if j > 0 && k > 0 {
                    x += at(j - 1, k - 1) * (sq[j] * sq[k]) * u2;
                }
                if j > 0 && k + 1 < nk {
                    x += at(j - 1, k + 1) * (sq[j] * sq[k + 1]);
                }
                if j + 1 < nj && k > 0 {
                    x += at(j + 1, k - 1) * (sq[j + 1] * sq[k]);
                }
                h += x * cross;
                let mut l = Complex64::new(0.0, 0.0);
                if j + 1 < nj {
                    l += at(j + 1, k) * sq[j + 1] * u1c;
                }
                if j > 0 {
                    l += at(j - 1, k) * sq[j] * u1;
                }
                if k + 1 < nk {
                    l -= at(j, k + 1) * sq[k + 1] * u1c;
                }
                if k > 0 {
                    l -= at(j, k - 1) * sq[k] * u1;
                }
                h += l * lin;
                h += pw[k] * sums[j] * v[k];
                dc[j * nk + k] = Complex64::new(h.im, -h.re);
            }
        }
    };
    let tail = move |c: &[Complex64]| {
        let row: f64 = (0..nk).map(|k| c[(nj - 1) * nk + k].norm_sqr()).sum();
        let col: f64 = (0..nj).map(|j| c[j * nk + nk - 1].norm_sqr()).sum();
        row.max(col)
    };
    run(
        params,
        TrajectoryKind::Pair { basis_cm: bc, basis_rel: br, geometry: geo },
        init.amps.clone(),
        tau,
        settings,
        tail,
        rhs,
    )
}

/// Spatial sampling for [`reconstruct_wavefunction`].
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// Points in the relative coordinate r.
    Line(Vec<f64>),
    /// Tensor grid in (R, r); output is row-major with R slow.
    Plane { cm: Vec<f64>, rel: Vec<f64> },
}

fn check_spacing(points: &[f64], basis: &OscillatorBasis) -> Result<()> {
    let limit = PI / basis.max_momentum();
    for w in points.windows(2) {
        let dx = w[1] - w[0];
        if dx <= 0.0 {
            return Err(Error::Resolution("grid must be strictly increasing".into()));
        }
        if dx > limit {
            return Err(Error::Resolution(format!(
                "grid spacing {dx} exceeds pi/k_max = {limit} for n_max = {}",
                basis.n_max
            )));
        }
    }
    Ok(())
}

/// Position-space wavefunction at sample `i`, with the free phases
/// e^{−iE t} re-attached.
pub fn reconstruct_wavefunction(traj: &Trajectory, i: usize, grid: &Grid) -> Result<Vec<Complex64>> {
    let t = traj.times[i];
    let e = traj.energies();
    let amps: Vec<Complex64> =
        traj.states[i].iter().zip(&e).map(|(c, en)| c * Complex64::from_polar(1.0, -en * t)).collect();
    match (&traj.kind, grid) {
        (TrajectoryKind::Same { basis }, Grid::Line(xs)) => {
            check_spacing(xs, basis)?;
            Ok(xs
                .iter()
                .map(|&x| basis.eigenfunctions(x).iter().zip(&amps).map(|(f, c)| c * f).sum())
                .collect())
        }
        (TrajectoryKind::Pair { basis_cm, basis_rel, .. }, Grid::Plane { cm, rel }) => {
            check_spacing(cm, basis_cm)?;
            check_spacing(rel, basis_rel)?;
            let nk = basis_rel.len();
            let frel: Vec<Vec<f64>> = rel.iter().map(|&r| basis_rel.eigenfunctions(r)).collect();
            let mut out = Vec::with_capacity(cm.len() * rel.len());
            for &xr in cm {
                let fc = basis_cm.eigenfunctions(xr);
                // Contract the CM index first.
                let mut partial = vec![Complex64::new(0.0, 0.0); nk];
                for (j, fj) in fc.iter().enumerate() {
                    for (k, p) in partial.iter_mut().enumerate() {
                        *p += amps[j * nk + k] * fj;
                    }
                }
                for fr in &frel {
                    out.push(partial.iter().zip(fr).map(|(p, f)| p * f).sum());
                }
            }
            Ok(out)
        }
        _ => Err(Error::Contract("grid dimensionality does not match the trajectory".into())),
    }
}

/// Free evolution of a relative-mode state: the interaction picture makes
/// it a constant trajectory on the standard time grid.
pub fn free_same(init: &ModeCoefficients, params: &TrapParams, schedule: &GateSchedule, settings: &SolverSettings) -> Result<Trajectory> {
    let free = TrapParams { a_bb: 0.0, ..*params };
    propagate_same(init, &free, schedule, settings)
}
