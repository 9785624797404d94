//! Split-operator grid propagator, an independent check on the spectral
//! solver.
//!
//! Two problems are supported: the relative coordinate of a |b⟩|b⟩ pair
//! (mass ½, one dimension) and the full two-atom |a⟩|b⟩ problem on an
//! (x1, x2) grid. The contact interaction is regularized as a normalized
//! Gaussian of width σ; [`delta_regularization_study`] removes the σ
//! dependence by extrapolation.
//!
//! Each step is a Strang splitting e^{−iVdt/2} e^{−iKdt} e^{−iVdt/2} with the
//! kinetic factor applied in momentum space through rustfft.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::{reconstruct_wavefunction, Grid, Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::model::{effective_1d_coupling, potential_va, StatePair, TrapParams};
use crate::observables::unwrap;

/// Largest |ψ| tolerated on the outermost grid points.
pub const BOUNDARY_LIMIT: f64 = 1e-8;
/// Required ratio σ/dx for a resolved contact.
pub const MIN_POINTS_PER_SIGMA: f64 = 2.0;
/// Bound on dt·E_b. E_b is the larger of ⟨H⟩ + 8ΔH of the initial state
/// and the kinetic energy 1/(2μσ²) at the contact's momentum scale 1/σ.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;

const BOUNDARY_CHECK_EVERY: usize = 64;

/// Which Hamiltonian the grid carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridProblem {
    /// Relative motion of two |b⟩ atoms in the merged well.
    SameRelative,
    /// Atom |a⟩ (x1) in its double well and atom |b⟩ (x2) in the merged well.
    Pair,
}

impl GridProblem {
    pub fn dims(self) -> usize {
        match self {
            GridProblem::SameRelative => 1,
            GridProblem::Pair => 2,
        }
    }
}

/// Grid layout and step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub problem: GridProblem,
    /// Points per axis; a power of two keeps the FFT fast.
    pub n: usize,
    /// Each axis covers [−half_width, half_width).
    pub half_width: f64,
    pub sigma: f64,
    pub dt: f64,
}

impl GridSpec {
    /// Relative-coordinate grid wide enough for both initial lobes at ±2x0.
    pub fn same_default(params: &TrapParams) -> Self {
        GridSpec { problem: GridProblem::SameRelative, n: 4096, half_width: 2.0 * params.x0 + 13.0, sigma: 0.05, dt: 2e-4 }
    }

    /// Two-atom grid. σ is set by the resolution affordable in two dimensions.
    pub fn pair_default(params: &TrapParams) -> Self {
        GridSpec { problem: GridProblem::Pair, n: 256, half_width: params.x0 + 7.0, sigma: 0.2, dt: 1.5e-3 }
    }

    /// Relative-coordinate grid sized for a given σ: about 2.5 points
    /// per σ and dt just inside the contact bound 0.1σ².
    pub fn same_for_sigma(params: &TrapParams, sigma: f64) -> Self {
        let half_width = 2.0 * params.x0 + 13.0;
        let n = ((5.0 * half_width / sigma).ceil() as usize).next_power_of_two();
        GridSpec { problem: GridProblem::SameRelative, n, half_width, sigma, dt: (0.09 * sigma * sigma).min(1.5e-3) }
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|i| -self.half_width + i as f64 * dx).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n < 8 || !(self.half_width > 0.0) || !(self.dt > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::Domain(format!("invalid grid {self:?}")));
        }
        Ok(())
    }
}

/// A wavefunction sampled on a uniform periodic grid, row-major with x1
/// slow in two dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridState {
    pub spec: GridSpec,
    pub psi: Vec<Complex64>,
}

fn gaussian(mass_freq: f64, x: f64, c: f64) -> f64 {
    (mass_freq / PI).powf(0.25) * (-0.5 * mass_freq * (x - c) * (x - c)).exp()
}

impl GridState {
    /// Samples `f` on the grid (f(x) in 1D, f(x1, x2) in 2D via `f2`).
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        spec.validate()?;
        let axis = spec.axis();
        let psi = match spec.problem.dims() {
            1 => axis.iter().map(|&x| f(&[x])).collect(),
            _ => axis.iter().flat_map(|&x1| axis.iter().map(move |&x2| (x1, x2))).map(|(x1, x2)| f(&[x1, x2])).collect(),
        };
        Ok(GridState { spec, psi })
    }

    /// The gate's initial state: (g₊ + g₋)/√2 in r for two |b⟩ atoms, or
    /// |a⟩ at −x0 times |b⟩ at +x0 for a pair. Renormalized on the grid.
    pub fn initial(params: &TrapParams, spec: GridSpec) -> Result<Self> {
        let (w0, x0) = (params.omega0, params.x0);
        let mut s = match spec.problem {
            GridProblem::SameRelative => GridState::from_fn(spec, |x| {
                let v = (gaussian(0.5 * w0, x[0], 2.0 * x0) + gaussian(0.5 * w0, x[0], -2.0 * x0)) / 2f64.sqrt();
                Complex64::new(v, 0.0)
            })?,
            GridProblem::Pair => GridState::from_fn(spec, |x| {
                Complex64::new(gaussian(w0, x[0], -x0) * gaussian(w0, x[1], x0), 0.0)
            })?,
        };
        s.normalize();
        Ok(s)
    }

    fn cell(&self) -> f64 {
        self.spec.dx().powi(self.spec.problem.dims() as i32)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.psi.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.cell()
    }

    pub fn normalize(&mut self) {
        let s = self.norm_sqr().sqrt();
        if s > 0.0 {
            self.psi.iter_mut().for_each(|c| *c /= s);
        }
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &GridState) -> Result<Complex64> {
        if self.spec.problem != other.spec.problem || self.spec.n != other.spec.n || self.spec.half_width != other.spec.half_width {
            return Err(Error::Contract("grid states live on different grids".into()));
        }
        Ok(self.psi.iter().zip(&other.psi).map(|(a, b)| a.conj() * b).sum::<Complex64>() * self.cell())
    }

    /// Largest |ψ| on the first and last point of every axis.
    pub fn boundary_amplitude(&self) -> f64 {
        let n = self.spec.n;
        match self.spec.problem.dims() {
            1 => self.psi[0].norm().max(self.psi[n - 1].norm()),
            _ => {
                let mut m: f64 = 0.0;
                for i in 0..n {
                    for idx in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
                        m = m.max(self.psi[idx].norm());
                    }
                }
                m
            }
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|c| c.norm_sqr()).collect()
    }
}

fn delta_sigma(x: f64, sigma: f64) -> f64 {
    (-x * x / (2.0 * sigma * sigma)).exp() / ((2.0 * PI).sqrt() * sigma)
}

fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * dx);
    (0..n).map(|i| if i < n / 2 { i as f64 } else { i as f64 - n as f64 } * dk).collect()
}

/// Potential and kinetic energy on the grid for the gate Hamiltonian.
fn hamiltonian_parts(params: &TrapParams, spec: &GridSpec, interacting: bool) -> (Vec<f64>, Vec<f64>) {
    let axis = spec.axis();
    let k = wavenumbers(spec.n, spec.dx());
    let w2 = params.omega * params.omega;
    match spec.problem {
        GridProblem::SameRelative => {
            let g = if interacting { effective_1d_coupling(params, StatePair::Bb) } else { 0.0 };
            let v = axis.iter().map(|&r| 0.25 * w2 * r * r + g * delta_sigma(r, spec.sigma)).collect();
            // K = p²/(2μ) with μ = ½.
            let t = k.iter().map(|q| q * q).collect();
            (v, t)
        }
        GridProblem::Pair => {
            let g = if interacting { effective_1d_coupling(params, StatePair::Ab) } else { 0.0 };
            let mut v = Vec::with_capacity(spec.n * spec.n);
            let mut t = Vec::with_capacity(spec.n * spec.n);
            for (i, &x1) in axis.iter().enumerate() {
                let va = potential_va(params, x1);
                for (j, &x2) in axis.iter().enumerate() {
                    v.push(va + 0.5 * w2 * x2 * x2 + g * delta_sigma(x2 - x1, spec.sigma));
                    t.push(0.5 * (k[i] * k[i] + k[j] * k[j]));
                }
            }
            (v, t)
        }
    }
}

fn transpose(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Strang-split propagator for a fixed Hamiltonian and step.
pub struct SplitOperator {
    spec: GridSpec,
    half_potential: Vec<Complex64>,
    /// e^{−iK dt}, with the inverse-FFT normalization folded in.
    kinetic: Vec<Complex64>,
    potential: Vec<f64>,
    kinetic_energy: Vec<f64>,
    contact_energy: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SplitOperator {
    pub fn new(params: &TrapParams, spec: GridSpec, interacting: bool) -> Result<Self> {
        spec.validate()?;
        if interacting && spec.sigma < MIN_POINTS_PER_SIGMA * spec.dx() {
            return Err(Error::Resolution(format!(
                "sigma = {} is below {MIN_POINTS_PER_SIGMA} dx = {}",
                spec.sigma,
                MIN_POINTS_PER_SIGMA * spec.dx()
            )));
        }
        let (v, t) = hamiltonian_parts(params, &spec, interacting);
        // Both problems have reduced mass ½ in the contact coordinate.
        let contact_energy = if interacting { 1.0 / (spec.sigma * spec.sigma) } else { 0.0 };
        let scale = 1.0 / (spec.n as f64).powi(spec.problem.dims() as i32);
        let half_potential = v.iter().map(|&e| Complex64::from_polar(1.0, -0.5 * e * spec.dt)).collect();
        let kinetic = t.iter().map(|&e| Complex64::from_polar(scale, -e * spec.dt)).collect();
        let mut planner = FftPlanner::new();
        Ok(SplitOperator {
            forward: planner.plan_fft_forward(spec.n),
            inverse: planner.plan_fft_inverse(spec.n),
            spec,
            half_potential,
            kinetic,
            potential: v,
            kinetic_energy: t,
            contact_energy,
        })
    }

    fn rows(&self, fft: &Arc<dyn Fft<f64>>, buf: &mut [Complex64]) {
        let n = self.spec.n;
        if self.spec.problem.dims() == 1 {
            fft.process(buf);
        } else {
            buf.par_chunks_mut(n * 32).for_each(|chunk| fft.process(chunk));
        }
    }

    /// Forward transform. In 2D the result is left transposed, which is
    /// harmless because the kinetic energy is symmetric in (k1, k2).
    fn to_momentum(&self, buf: &mut [Complex64]) {
        self.rows(&self.forward, buf);
        if self.spec.problem.dims() == 2 {
            transpose(buf, self.spec.n);
            self.rows(&self.forward, buf);
        }
    }

    /// Inverse of [`Self::to_momentum`], without the 1/N normalization.
    fn to_position(&self, buf: &mut [Complex64]) {
        self.rows(&self.inverse, buf);
        if self.spec.problem.dims() == 2 {
            transpose(buf, self.spec.n);
            self.rows(&self.inverse, buf);
        }
    }

    /// One full Strang step.
    pub fn step(&self, psi: &mut [Complex64]) {
        psi.iter_mut().zip(&self.half_potential).for_each(|(c, p)| *c *= p);
        self.to_momentum(psi);
        psi.iter_mut().zip(&self.kinetic).for_each(|(c, p)| *c *= p);
        self.to_position(psi);
        psi.iter_mut().zip(&self.half_potential).for_each(|(c, p)| *c *= p);
    }

    /// (⟨H⟩, ΔH) of a state.
    pub fn energy_moments(&self, state: &GridState) -> (f64, f64) {
        let norm = state.psi.iter().map(|c| c.norm_sqr()).sum::<f64>();
        let mut hk = state.psi.clone();
        self.to_momentum(&mut hk);
        let scale = 1.0 / (self.spec.n as f64).powi(self.spec.problem.dims() as i32);
        hk.iter_mut().zip(&self.kinetic_energy).for_each(|(c, e)| *c *= e * scale);
        self.to_position(&mut hk);
        let h_psi: Vec<Complex64> =
            hk.iter().zip(&state.psi).zip(&self.potential).map(|((k, p), v)| k + p * v).collect();
        let mean = state.psi.iter().zip(&h_psi).map(|(p, h)| (p.conj() * h).re).sum::<f64>() / norm;
        let sq = h_psi.iter().map(|h| h.norm_sqr()).sum::<f64>() / norm;
        (mean, (sq - mean * mean).max(0.0).sqrt())
    }

    /// Rejects steps that rotate the highest relevant energy by more than
    /// [`MAX_PHASE_PER_STEP`] radians.
    pub fn check_step(&self, state: &GridState) -> Result<()> {
        let (mean, spread) = self.energy_moments(state);
        let bound = (mean.abs() + 8.0 * spread).max(self.contact_energy);
        if self.spec.dt * bound >= MAX_PHASE_PER_STEP {
            return Err(Error::Resolution(format!(
                "dt * E_b = {} exceeds {MAX_PHASE_PER_STEP} (E_b = {bound})",
                self.spec.dt * bound
            )));
        }
        Ok(())
    }
}

/// Result of [`grid_propagate`].
#[derive(Debug, Clone)]
pub struct GridRun {
    pub final_state: GridState,
    /// Times of the stored density frames.
    pub frame_times: Vec<f64>,
    pub frames: Vec<Vec<f64>>,
    pub max_boundary: f64,
    pub steps: usize,
}

/// Step count and the spec with dt shrunk so that the steps land exactly
/// on `t_end`.
fn fit_steps(spec: GridSpec, t_end: f64) -> Result<(usize, GridSpec)> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::Domain(format!("t_end = {t_end}")));
    }
    let steps = (t_end / spec.dt * (1.0 - 1e-12)).ceil() as usize;
    if steps == 0 {
        return Ok((0, spec));
    }
    Ok((steps, GridSpec { dt: t_end / steps as f64, ..spec }))
}

fn check_boundary(state: &GridState, t: f64, max: &mut f64) -> Result<()> {
    let a = state.boundary_amplitude();
    *max = max.max(a);
    if a > BOUNDARY_LIMIT {
        return Err(Error::DomainTooSmall { t, amplitude: a });
    }
    Ok(())
}

/// Propagates `initial` under the gate Hamiltonian to `t_end`, with the
/// step shrunk to divide `t_end` evenly, storing |ψ|² every `frame_every` steps when requested.
pub fn grid_propagate(
    initial: &GridState,
    params: &TrapParams,
    t_end: f64,
    interacting: bool,
    frame_every: Option<usize>,
) -> Result<GridRun> {
    let mut max_boundary = 0.0;
    check_boundary(initial, 0.0, &mut max_boundary)?;
    let (steps, spec) = fit_steps(initial.spec, t_end)?;
    let op = SplitOperator::new(params, spec, interacting)?;
    op.check_step(initial)?;
    let mut state = GridState { spec, psi: initial.psi.clone() };
    let mut frame_times = Vec::new();
    let mut frames = Vec::new();
    let every = frame_every.filter(|&k| k > 0);
    if every.is_some() {
        frame_times.push(0.0);
        frames.push(state.density());
    }
    for s in 1..=steps {
        op.step(&mut state.psi);
        if s % BOUNDARY_CHECK_EVERY == 0 || s == steps {
            check_boundary(&state, s as f64 * spec.dt, &mut max_boundary)?;
        }
        if let Some(k) = every {
            if s % k == 0 {
                frame_times.push(s as f64 * spec.dt);
                frames.push(state.density());
            }
        }
    }
    Ok(GridRun { final_state: state, frame_times, frames, max_boundary, steps })
}

/// Collisional phase measured on the grid.
#[derive(Debug, Clone)]
pub struct GridPhase {
    pub times: Vec<f64>,
    /// ⟨ψ(t)|ψ⁽⁰⁾(t)⟩ at each recorded time.
    pub overlaps: Vec<Complex64>,
    /// Unwrapped arg of the overlaps.
    pub phases: Vec<f64>,
    pub interacting: GridState,
    pub free: GridState,
    pub max_boundary: f64,
}

impl GridPhase {
    pub fn final_phase(&self) -> f64 {
        *self.phases.last().unwrap_or(&0.0)
    }
}

/// Runs the interacting and the free problem in lockstep from the gate's
/// initial state and records their overlap every `record_every` steps.
pub fn grid_collisional_phase(params: &TrapParams, spec: GridSpec, t_end: f64, record_every: usize) -> Result<GridPhase> {
    let (steps, spec) = fit_steps(spec, t_end)?;
    let initial = GridState::initial(params, spec)?;
    let with = SplitOperator::new(params, spec, true)?;
    let without = SplitOperator::new(params, spec, false)?;
    with.check_step(&initial)?;
    let every = record_every.max(1);
    let mut a = initial.clone();
    let mut b = initial;
    let mut max_boundary = 0.0;
    let mut times = vec![0.0];
    let mut overlaps = vec![a.inner(&b)?];
    for s in 1..=steps {
        rayon::join(|| with.step(&mut a.psi), || without.step(&mut b.psi));
        let t = s as f64 * spec.dt;
        if s % BOUNDARY_CHECK_EVERY == 0 || s == steps {
            check_boundary(&a, t, &mut max_boundary)?;
            check_boundary(&b, t, &mut max_boundary)?;
        }
        if s % every == 0 || s == steps {
            times.push(t);
            overlaps.push(a.inner(&b)?);
        }
    }
    let phases = unwrap(&overlaps.iter().map(|o| o.arg()).collect::<Vec<_>>());
    Ok(GridPhase { times, overlaps, phases, interacting: a, free: b, max_boundary })
}

/// ⟨ψ_grid|ψ_spectral(t_i)⟩ with the spectral state evaluated on the grid
/// points. Pair grids are mapped to (R, r) = ((x1+x2)/2, x2 − x1), which
/// has unit Jacobian.
pub fn overlap_with_spectral(grid: &GridState, traj: &Trajectory, i: usize) -> Result<Complex64> {
    let axis = grid.spec.axis();
    let cell = grid.cell();
    match grid.spec.problem {
        GridProblem::SameRelative => {
            let spec_psi = reconstruct_wavefunction(traj, i, &Grid::Line(axis))?;
            Ok(grid.psi.iter().zip(&spec_psi).map(|(g, s)| g.conj() * s).sum::<Complex64>() * cell)
        }
        GridProblem::Pair => {
            let TrajectoryKind::Pair { basis_cm, basis_rel, .. } = traj.kind else {
                return Err(Error::Contract("pair grid needs a pair trajectory".into()));
            };
            let t = traj.times[i];
            let amps: Vec<Complex64> = traj.states[i]
                .iter()
                .zip(traj.energies())
                .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t))
                .collect();
            let n = grid.spec.n;
            let nk = basis_rel.len();
            let mut acc = Complex64::new(0.0, 0.0);
            for i1 in 0..n {
                for i2 in 0..n {
                    let g = grid.psi[i1 * n + i2];
                    if g.norm_sqr() < 1e-30 {
                        continue;
                    }
                    let (x1, x2) = (axis[i1], axis[i2]);
                    let fc = basis_cm.eigenfunctions(0.5 * (x1 + x2));
                    let fr = basis_rel.eigenfunctions(x2 - x1);
                    let mut s = Complex64::new(0.0, 0.0);
                    for (j, fj) in fc.iter().enumerate() {
                        let row = &amps[j * nk..(j + 1) * nk];
                        s += row.iter().zip(&fr).map(|(c, f)| c * f).sum::<Complex64>() * fj;
                    }
                    acc += g.conj() * s;
                }
            }
            Ok(acc * cell)
        }
    }
}

/// Phase at the end of one run of a σ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPoint {
    pub sigma: f64,
    pub n: usize,
    pub dt: f64,
    pub phase: f64,
    pub o0_abs: f64,
}

/// σ → 0 extrapolation of the relative-coordinate collisional phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationStudy {
    pub points: Vec<SigmaPoint>,
    pub extrapolated: f64,
    /// Size of the last extrapolation correction.
    pub error_bar: f64,
    /// Fitted power of σ in the leading error term, when determinable.
    pub order: Option<f64>,
    pub monotone: bool,
}

impl RegularizationStudy {
    /// Spread of the phase across the sweep, relative to the finest value.
    pub fn relative_spread(&self) -> f64 {
        let phases: Vec<f64> = self.points.iter().map(|p| p.phase).collect();
        let hi = phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = phases.iter().cloned().fold(f64::INFINITY, f64::min);
        let last = *phases.last().unwrap_or(&0.0);
        if last == 0.0 {
            0.0
        } else {
            (hi - lo) / last.abs()
        }
    }
}

/// Collisional phase of the |b⟩|b⟩ relative motion at `t_end` for each σ
/// (in decreasing order, each half the previous one), followed by
/// Richardson extrapolation from the three finest values. Non-monotone
/// convergence is reported with a warning and leaves the finest value as
/// the estimate.
pub fn delta_regularization_study(params: &TrapParams, sigmas: &[f64], t_end: f64) -> Result<RegularizationStudy> {
    if sigmas.len() < 3 {
        return Err(Error::Domain("need at least three values of sigma".into()));
    }
    if sigmas.windows(2).any(|w| ((w[0] / w[1]) - 2.0).abs() > 1e-9) {
        return Err(Error::Domain("sigmas must halve at each step".into()));
    }
    let points: Result<Vec<SigmaPoint>> = sigmas
        .par_iter()
        .map(|&sigma| {
            let spec = GridSpec::same_for_sigma(params, sigma);
            let run = grid_collisional_phase(params, spec, t_end, 64)?;
            let o = *run.overlaps.last().unwrap();
            Ok(SigmaPoint { sigma, n: spec.n, dt: run.interacting.spec.dt, phase: run.final_phase(), o0_abs: o.norm() })
        })
        .collect();
    let points = points?;
    let m = points.len();
    let (p1, p2, p3) = (points[m - 3].phase, points[m - 2].phase, points[m - 1].phase);
    let (d1, d2) = (p2 - p1, p3 - p2);
    let diffs: Vec<f64> = points.windows(2).map(|w| w[1].phase - w[0].phase).collect();
    let monotone = diffs.iter().all(|d| *d >= 0.0) || diffs.iter().all(|d| *d <= 0.0);
    if d1 == 0.0 && d2 == 0.0 {
        return Ok(RegularizationStudy { points, extrapolated: p3, error_bar: 0.0, order: None, monotone: true });
    }
    let ratio = d1 / d2;
    if !monotone || !(ratio > 1.0) {
        log::warn!("delta regularization does not converge monotonically: {diffs:?}");
        return Ok(RegularizationStudy { points, extrapolated: p3, error_bar: d1.abs().max(d2.abs()), order: None, monotone: false });
    }
    let order = ratio.log2();
    let correction = d2 / (ratio - 1.0);
    Ok(RegularizationStudy { points, extrapolated: p3 + correction, error_bar: correction.abs(), order: Some(order), monotone })
}

/// Header written before the binary density frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dt: f64,
    pub frames: usize,
}

/// Writes a JSON header line followed by the frames as little-endian f64,
/// x slow within each frame.
pub fn write_frames<W: Write>(out: &mut W, header: &FrameHeader, frames: &[Vec<f64>]) -> Result<()> {
    let size = header.nx * header.ny;
    if frames.len() != header.frames || frames.iter().any(|f| f.len() != size) {
        return Err(Error::Contract("frame sizes disagree with the header".into()));
    }
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for f in frames {
        for v in f {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Inverse of [`write_frames`].
pub fn read_frames(bytes: &[u8]) -> Result<(FrameHeader, Vec<Vec<f64>>)> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Contract("missing header".into()))?;
    let header: FrameHeader = serde_json::from_slice(&bytes[..nl])?;
    let body = &bytes[nl + 1..];
    let size = header.nx * header.ny;
    if body.len() != 8 * size * header.frames {
        return Err(Error::Contract("body length disagrees with the header".into()));
    }
    let values: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header, values.chunks(size.max(1)).map(|c| c.to_vec()).collect()))
}

/// Frame header for a run on `spec`, sampled every `frame_every` steps.
pub fn frame_header(spec: &GridSpec, frame_every: usize, frames: usize) -> FrameHeader {
    let ny = if spec.problem.dims() == 2 { spec.n } else { 1 };
    FrameHeader { nx: spec.n, ny, dx: spec.dx(), dt: spec.dt * frame_every as f64, frames }
}
