//! Overlaps, collisional and kinematic phases, and the perturbative phase
//! estimates derived from the energy shift ΔE(t) = ⟨ψ⁽⁰⁾(t)|u|ψ⁽⁰⁾(t)⟩.
//!
//! Sign convention: |ψ(t)⟩ ≈ e^{−iφ}|ψ⁽⁰⁾(t)⟩, so φ = arg⟨ψ(t)|ψ⁽⁰⁾(t)⟩ and a
//! repulsive contact interaction gives φ > 0.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{breathing_width, cm_overlap};
use crate::basis::{excited_relative_state, OscillatorBasis};
use crate::dynamics::{Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::model::{effective_1d_coupling, GateSchedule, StatePair, TrapParams};

/// Below this |O₀| the collisional phase is not reported.
pub const PHASE_OVERLAP_FLOOR: f64 = 0.5;
/// Peak ΔE/ħω above which a run is flagged as outside the perturbative regime.
pub const PERTURBATIVE_LIMIT: f64 = 0.3;
/// Header line of the trajectory CSV.
pub const TRAJECTORY_CSV_HEADER: &str = "# collgate trajectory v1";

/// Index of the sample interval containing t, or a range error.
fn locate(traj: &Trajectory, t: f64) -> Result<usize> {
    let t_end = traj.t_end();
    if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::TimeRange { t, t_end });
    }
    let i = traj.times.partition_point(|&s| s <= t);
    Ok(i.saturating_sub(1).min(traj.times.len().saturating_sub(2)))
}

/// Interaction-picture state at an arbitrary time by four-point Lagrange
/// interpolation of the stored snapshots.
pub fn state_at(traj: &Trajectory, t: f64) -> Result<Vec<Complex64>> {
    let n = traj.times.len();
    if n < 4 {
        let i = locate(traj, t)?;
        return Ok(traj.states[i].clone());
    }
    let i = locate(traj, t)?;
    if (traj.times[i] - t).abs() < 1e-14 * t.abs().max(1.0) {
        return Ok(traj.states[i].clone());
    }
    let lo = i.saturating_sub(1).min(n - 4);
    let nodes = &traj.times[lo..lo + 4];
    let mut out = vec![Complex64::new(0.0, 0.0); traj.states[0].len()];
    for (a, &ta) in nodes.iter().enumerate() {
        let mut w = 1.0;
        for (b, &tb) in nodes.iter().enumerate() {
            if a != b {
                w *= (t - tb) / (ta - tb);
            }
        }
        for (o, c) in out.iter_mut().zip(&traj.states[lo + a]) {
            *o += c * w;
        }
    }
    Ok(out)
}

/// O(ψ, t) = ⟨ψ(t)|ψ(0)⟩ at any t in the trajectory span.
pub fn overlap_with_initial(traj: &Trajectory, t: f64) -> Result<Complex64> {
    let c = state_at(traj, t)?;
    let e = traj.energies();
    let o: Complex64 = c
        .iter()
        .zip(&traj.states[0])
        .zip(&e)
        .map(|((c, c0), en)| c.conj() * c0 * Complex64::from_polar(1.0, en * t))
        .sum();
    Ok(match traj.kind {
        TrajectoryKind::Same { .. } => o * cm_overlap(&traj.params, t),
        TrajectoryKind::Pair { .. } => o,
    })
}

/// O₀(ψ, t) = ⟨ψ(t)|ψ⁽⁰⁾(t)⟩ against a noninteracting run.
pub fn overlap_interacting_vs_free(traj: &Trajectory, free: &Trajectory, t: f64) -> Result<Complex64> {
    // Layout check on the stored grid first.
    traj.overlap_with(free, 0)?;
    let a = state_at(traj, t)?;
    let b = state_at(free, t)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum())
}

/// Unwraps a sampled phase by nearest continuation.
pub fn unwrap(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    let mut prev: Option<f64> = None;
    for &x in raw {
        if let Some(p) = prev {
            let d = x + offset - p;
            offset -= 2.0 * PI * (d / (2.0 * PI)).round();
        }
        let v = x + offset;
        out.push(v);
        prev = Some(v);
    }
    out
}

/// O₀ at every stored sample.
pub fn overlap_series(traj: &Trajectory, free: &Trajectory) -> Result<Vec<Complex64>> {
    (0..traj.times.len()).map(|i| traj.overlap_with(free, i)).collect()
}

/// Unwrapped φ(t_i) = arg O₀(t_i) on the sample grid.
///
/// Fails as soon as |O₀| drops below [`PHASE_OVERLAP_FLOOR`].
pub fn collisional_phase(traj: &Trajectory, free: &Trajectory) -> Result<Vec<f64>> {
    let o = overlap_series(traj, free)?;
    if let Some((i, z)) = o.iter().enumerate().find(|(_, z)| z.norm() < PHASE_OVERLAP_FLOOR) {
        return Err(Error::PhaseIllDefined { t: traj.times[i], abs: z.norm() });
    }
    Ok(unwrap(&o.iter().map(|z| z.arg()).collect::<Vec<_>>()))
}

/// Like [`collisional_phase`] but returns NaN from the first sample where
/// the phase becomes ill-defined, for export.
pub fn collisional_phase_lenient(o: &[Complex64]) -> Vec<f64> {
    let defined = o.iter().position(|z| z.norm() < PHASE_OVERLAP_FLOOR).unwrap_or(o.len());
    let mut phi = unwrap(&o[..defined].iter().map(|z| z.arg()).collect::<Vec<_>>());
    phi.resize(o.len(), f64::NAN);
    phi
}

/// First-order energy shift of two |b⟩ atoms, ΔE_bb(t)/ħω:
/// a_s ω⊥ √(8Ω/π) exp[−2ω₀x0²(1 − ω₀Ω sin²ωt)], Ω the breathing width.
pub fn energy_shift_bb(params: &TrapParams, t: f64) -> f64 {
    let om = breathing_width(params, t) / params.omega;
    let s = (params.omega * t).sin();
    let w0 = params.omega0 / params.omega;
    let g = effective_1d_coupling(params, StatePair::Bb);
    let exponent = -2.0 * w0 * params.x0 * params.x0 * params.omega * (1.0 - w0 * om * s * s);
    0.5 * g * (8.0 * om * params.omega / PI).sqrt() * exponent.exp()
}

/// Largest ΔE_bb/ħω over one period (attained at the collision, ωt = π/2).
pub fn max_energy_shift_bb(params: &TrapParams) -> f64 {
    energy_shift_bb(params, 0.25 * params.t_osc())
}

/// ∫ f over one period by the periodic trapezoid rule, doubling the point
/// count until two estimates agree to `rtol`.
fn periodic_quadrature(period: f64, rtol: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let mut m = 256usize;
    let mut sum: f64 = (0..m).map(|k| f(period * k as f64 / m as f64)).sum();
    let mut prev = sum * period / m as f64;
    while m < 1 << 20 {
        // Only the new midpoints need evaluating.
        sum += (0..m).map(|k| f(period * (k as f64 + 0.5) / m as f64)).sum::<f64>();
        m *= 2;
        let est = sum * period / m as f64;
        if (est - prev).abs() <= rtol * est.abs().max(1e-300) {
            return Ok(est);
        }
        prev = est;
    }
    Err(Error::Accuracy(format!("periodic quadrature did not converge (last {prev})")))
}

/// First-order phase per period, ∫₀^{T_osc} ΔE_bb dt/ħ, by quadrature.
pub fn perturbative_phase_integral(params: &TrapParams) -> Result<f64> {
    periodic_quadrature(params.t_osc(), 1e-12, |t| energy_shift_bb(params, t))
}

/// Saddle-point phase per period, 4 a_s ω⊥ / √(x0²ω² − a0²ω0²/4).
pub fn perturbative_phase_period(params: &TrapParams) -> Result<f64> {
    let a0 = params.a0();
    let d = params.x0 * params.x0 * params.omega * params.omega - 0.25 * a0 * a0 * params.omega0 * params.omega0;
    if d <= 0.0 {
        return Err(Error::Domain(format!(
            "saddle-point phase needs x0 ω > a0 ω0 / 2 (got x0² ω² − a0² ω0²/4 = {d})"
        )));
    }
    Ok(2.0 * effective_1d_coupling(params, StatePair::Bb) / d.sqrt())
}

/// First-order phase per period for the excited relative state ψ_(n),
/// from its free evolution in the merged well.
pub fn perturbative_phase_excited(params: &TrapParams, n: usize) -> Result<f64> {
    let n_max = excited_basis_size(n);
    let basis = OscillatorBasis::relative(params, n_max);
    let c = excited_relative_state(n, params).project(&basis);
    let v = basis.eigenfunctions(0.0);
    let g = effective_1d_coupling(params, StatePair::Bb);
    let terms: Vec<(f64, f64)> = (0..basis.len())
        .filter(|&k| v[k] != 0.0)
        .map(|k| (c.amps[k].re * v[k], basis.energy(k)))
        .collect();
    periodic_quadrature(params.t_osc(), 1e-10, |t| {
        let psi: Complex64 = terms.iter().map(|&(a, e)| Complex64::from_polar(a, -e * t)).sum();
        g * psi.norm_sqr()
    })
}

/// Relative-basis size that holds ψ_(n) with a tail below 10⁻⁸ at the
/// reference geometry.
pub fn excited_basis_size(n: usize) -> usize {
    100 + 4 * n
}

/// Phase of one collision at constant relative speed v, g/v = 2a_sω⊥/v.
pub fn constant_velocity_phase(params: &TrapParams, v: f64) -> Result<f64> {
    if v <= 0.0 || !v.is_finite() {
        return Err(Error::Domain(format!("relative speed must be positive, got {v}")));
    }
    Ok(effective_1d_coupling(params, StatePair::Bb) / v)
}

/// Two collisions per period at v = x0ω: 4a_sω⊥/(x0ω).
pub fn constant_velocity_phase_period(params: &TrapParams) -> Result<f64> {
    Ok(2.0 * constant_velocity_phase(params, params.x0 * params.omega)?)
}

/// The validity ratio a0ω0/(4x0ω) of the constant-velocity picture.
pub fn velocity_validity_ratio(params: &TrapParams) -> f64 {
    params.a0() * params.omega0 / (4.0 * params.x0 * params.omega)
}

/// Kinematic phases (φ_a, φ_b) after N full periods,
/// φ_a = Nπ(ω₀ + 2ω⊥)/ω and φ_b = Nπ(ω + 2ω⊥)/ω.
pub fn kinematic_phases(params: &TrapParams, schedule: &GateSchedule) -> Result<(f64, f64)> {
    if !schedule.is_integer_periods() {
        return Err(Error::Contract(
            "closed-form kinematic phases need tau = N T_osc; use the numeric total phase instead".into(),
        ));
    }
    let n = f64::from(schedule.n_periods);
    let w = params.omega;
    Ok((n * PI * (params.omega0 + 2.0 * params.omega_perp) / w, n * PI * (w + 2.0 * params.omega_perp) / w))
}

/// Phase of an |a⟩ atom resting in its ω₀ well with ground-state transverse
/// motion, (ω₀/2 + ω⊥)t. Valid at any t.
pub fn kinematic_phase_a(params: &TrapParams, t: f64) -> f64 {
    (0.5 * params.omega0 + params.omega_perp) * t
}

/// Total phase Φ(t) = arg O(ψ, t) plus the transverse ground-state phase
/// 2ω⊥t of both atoms, reduced to (−π, π].
pub fn total_phase(traj: &Trajectory, t: f64) -> Result<f64> {
    let o = overlap_with_initial(traj, t)?;
    Ok(wrap(o.arg() + 2.0 * traj.params.omega_perp * t))
}

/// Reduces an angle to (−π, π].
pub fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Time of the |O(ψ, t)| maximum near k·T_osc, by a parabola through
/// ln|O| at the three samples around the discrete peak. Returned as the
/// shift (t_peak − kT_osc)/T_osc.
pub fn recurrence_shift(traj: &Trajectory, k: u32) -> Result<f64> {
    let t_osc = traj.params.t_osc();
    let target = f64::from(k) * t_osc;
    let window = 0.05 * t_osc;
    if target + window > traj.t_end() {
        return Err(Error::Contract(format!("trajectory must extend past {} T_osc to locate the peak", f64::from(k) + 0.05)));
    }
    let idx: Vec<usize> = (0..traj.times.len()).filter(|&i| (traj.times[i] - target).abs() <= window).collect();
    if idx.len() < 3 {
        return Err(Error::Contract(format!("trajectory does not cover k = {k} periods with margin")));
    }
    let mags: Vec<f64> = idx.iter().map(|&i| traj.overlap_initial(i).norm()).collect();
    let best = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
    if best == 0 || best == mags.len() - 1 {
        return Err(Error::Accuracy("recurrence peak lies on the search window edge".into()));
    }
    let (y1, y2, y3) = (mags[best - 1].ln(), mags[best].ln(), mags[best + 1].ln());
    let h = traj.times[idx[best] + 1] - traj.times[idx[best]];
    let shift = 0.5 * h * (y1 - y3) / (y1 - 2.0 * y2 + y3);
    Ok((traj.times[idx[best]] + shift - target) / t_osc)
}

/// One row of the phase bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub t_over_tosc: f64,
    pub o_abs: f64,
    pub o0_abs: f64,
    pub phi_coll: f64,
    pub phi_kin_a: f64,
    /// Only available in closed form at whole periods.
    pub phi_kin_b: Option<f64>,
    pub phi_total: f64,
}

/// Phase records at every sample of a same-state run.
pub fn phase_records(traj: &Trajectory, free: &Trajectory) -> Result<Vec<PhaseRecord>> {
    let o0 = overlap_series(traj, free)?;
    let phi = collisional_phase_lenient(&o0);
    let t_osc = traj.params.t_osc();
    let w = traj.params.omega;
    Ok(traj
        .times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let periods = t / t_osc;
            let whole = (periods - periods.round()).abs() < 1e-9;
            let o = traj.overlap_initial(i);
            PhaseRecord {
                t_over_tosc: periods,
                o_abs: o.norm(),
                o0_abs: o0[i].norm(),
                phi_coll: phi[i],
                phi_kin_a: kinematic_phase_a(&traj.params, t),
                phi_kin_b: whole.then(|| periods.round() * PI * (w + 2.0 * traj.params.omega_perp) / w),
                phi_total: wrap(o.arg() + 2.0 * traj.params.omega_perp * t),
            }
        })
        .collect())
}

fn sig15(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.14e}")
    }
}

/// Writes the trajectory CSV: one row per sample with the norm, O₀, |O|
/// and the unwrapped collisional phase, 15 significant digits.
pub fn write_trajectory_csv<W: Write>(out: &mut W, traj: &Trajectory, free: &Trajectory) -> Result<()> {
    let o0 = overlap_series(traj, free)?;
    let phi = collisional_phase_lenient(&o0);
    writeln!(out, "{TRAJECTORY_CSV_HEADER}")?;
    writeln!(out, "t_over_Tosc,norm,re_O0,im_O0,abs_O,phase_coll_rad")?;
    let t_osc = traj.params.t_osc();
    for (i, &t) in traj.times.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig15(t / t_osc),
            sig15(traj.norms[i]),
            sig15(o0[i].re),
            sig15(o0[i].im),
            sig15(traj.overlap_initial(i).norm()),
            sig15(phi[i])
        )?;
    }
    Ok(())
}

/// End-of-run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub phi_coll: Option<f64>,
    pub phi_a: Option<f64>,
    pub phi_b: Option<f64>,
    #[serde(rename = "O0_abs")]
    pub o0_abs: f64,
    #[serde(rename = "O_abs")]
    pub o_abs: f64,
    pub flags: Vec<String>,
}

/// Summarizes the final sample of a run against its free reference.
pub fn summarize(traj: &Trajectory, free: &Trajectory, schedule: &GateSchedule) -> Result<RunSummary> {
    let o0 = overlap_series(traj, free)?;
    let phi = collisional_phase_lenient(&o0);
    let last = traj.times.len() - 1;
    let mut flags = traj.params.validate()?;
    if max_energy_shift_bb(&traj.params) > PERTURBATIVE_LIMIT {
        flags.push("perturbative_regime_violated".into());
    }
    if phi[last].is_nan() {
        flags.push("phase_ill_defined".into());
    }
    let (phi_a, phi_b) = match kinematic_phases(&traj.params, schedule) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(_) => (None, None),
    };
    Ok(RunSummary {
        phi_coll: phi[last].is_finite().then_some(phi[last]),
        phi_a,
        phi_b,
        o0_abs: o0[last].norm(),
        o_abs: traj.overlap_initial(last).norm(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::rel_wavefunction_free;
    use crate::basis::initial_coeffs_same;
    use crate::dynamics::{free_same, propagate_same, SolverSettings};
    use approx::assert_relative_eq;

    fn reference() -> TrapParams {
        TrapParams::paper_fig2()
    }

    fn runs(p: &TrapParams, periods: u32, spp: usize) -> (Trajectory, Trajectory) {
        let b = OscillatorBasis::relative(p, 60);
        let c0 = initial_coeffs_same(p, &b).unwrap();
        let s = SolverSettings { samples_per_period: spp, ..Default::default() };
        let sched = GateSchedule::periods(periods);
        (propagate_same(&c0, p, &sched, &s).unwrap(), free_same(&c0, p, &sched, &s).unwrap())
    }

    #[test]
    fn unwrap_removes_jumps() {
        let raw = [3.0, -3.0, -2.5, 3.1, -3.1];
        let u = unwrap(&raw);
        for w in u.windows(2) {
            assert!((w[1] - w[0]).abs() < PI);
        }
        assert_relative_eq!(u[1], -3.0 + 2.0 * PI);
    }

    #[test]
    fn energy_shift_matches_free_wavefunction() {
        let p = reference();
        let g = effective_1d_coupling(&p, StatePair::Bb);
        for &t in &[0.0, 0.9, 1.4, PI / 2.0, 1.7, 2.9] {
            let direct = g * rel_wavefunction_free(&p, 0.0, t).norm_sqr();
            assert_relative_eq!(energy_shift_bb(&p, t), direct, max_relative = 1e-10, epsilon = 1e-300);
        }
    }

    #[test]
    fn energy_shift_at_rest_is_exponentially_small() {
        let p = reference();
        let expect = p.a_bb * p.omega_perp * (8.0 * p.omega0 / PI).sqrt() * (-2.0 * p.omega0 * 25.0f64).exp();
        assert_relative_eq!(energy_shift_bb(&p, 0.0), expect, max_relative = 1e-12);
        assert!(energy_shift_bb(&p, 0.0) < 1e-40);
    }

    #[test]
    fn energy_shift_peaks_at_collision() {
        let p = reference();
        let n = 200_001;
        let (mut best, mut arg) = (0.0, 0.0);
        for k in 0..n {
            let t = PI * k as f64 / (n - 1) as f64;
            let e = energy_shift_bb(&p, t);
            if e > best {
                best = e;
                arg = t;
            }
        }
        assert!((arg - PI / 2.0).abs() < 1e-3);
        assert!(best > PERTURBATIVE_LIMIT, "peak {best}");
    }

    #[test]
    fn first_order_phase_per_period() {
        let p = reference();
        let phi = perturbative_phase_integral(&p).unwrap();
        assert_relative_eq!(phi, 0.4302688776, epsilon = 1e-9);
        let saddle = perturbative_phase_period(&p).unwrap();
        assert_relative_eq!(saddle, 0.4367278217, epsilon = 1e-9);
        assert!((saddle - phi).abs() / saddle < 0.02);
    }

    #[test]
    #[ignore = "fails: quadrature and closed form both give 0.43027; 0.437 is the saddle-point value"]
    fn one_period_integral_is_0_437() {
        let phi = perturbative_phase_integral(&reference()).unwrap();
        assert!((phi - 0.437).abs() < 1e-3, "{phi}");
    }

    #[test]
    fn saddle_point_values() {
        let p = reference();
        let seven = 7.0 * perturbative_phase_period(&p).unwrap();
        assert!((seven / PI - 0.97).abs() < 0.01);
        assert_eq!(perturbative_phase_period(&TrapParams { a_bb: 0.0, ..p }).unwrap(), 0.0);
        let tight = TrapParams { x0: 0.3, ..p };
        assert!(matches!(perturbative_phase_period(&tight), Err(Error::Domain(_))));
    }

    #[test]
    fn saddle_point_fast_collision_limit() {
        // a0 ω0 / (x0 ω) → 0: the saddle-point phase becomes two constant-speed collisions.
        let p = TrapParams { x0: 2000.0, ..reference() };
        let cv = constant_velocity_phase(&p, p.x0).unwrap();
        assert_relative_eq!(perturbative_phase_period(&p).unwrap(), 2.0 * cv, max_relative = 1e-7);
    }

    #[test]
    fn constant_velocity_values() {
        let p = reference();
        let per_period = constant_velocity_phase_period(&p).unwrap();
        assert_relative_eq!(per_period, 0.4323384859, epsilon = 1e-9);
        assert_relative_eq!(velocity_validity_ratio(&p), 0.0707, epsilon = 1e-4);
        let v = 3.3;
        assert_relative_eq!(
            constant_velocity_phase(&p, 2.0 * v).unwrap(),
            0.5 * constant_velocity_phase(&p, v).unwrap()
        );
        assert!(constant_velocity_phase(&p, 1e12).unwrap() < 1e-11);
        assert!(constant_velocity_phase(&p, 0.0).is_err());
    }

    #[test]
    fn kinematic_phase_values() {
        let p = reference();
        let (a, b) = kinematic_phases(&p, &GateSchedule::periods(7)).unwrap();
        assert_relative_eq!(a / PI, 7.0 * (2.0 + 2.0 * p.omega_perp), max_relative = 1e-12);
        assert!((a / PI - 135.9).abs() < 0.05);
        assert!((b / PI - 128.9).abs() < 0.05);
        let single = TrapParams { omega_perp: 0.0, omega0: 1.0, ..p };
        let (a, b) = kinematic_phases(&single, &GateSchedule::periods(1)).unwrap();
        assert_relative_eq!(a, PI);
        assert_relative_eq!(b, PI);
        let shifted = GateSchedule { n_periods: 7, use_shifted_period: true, delta_t: Some(1.4e-3) };
        assert!(matches!(kinematic_phases(&p, &shifted), Err(Error::Contract(_))));
        assert_relative_eq!(kinematic_phase_a(&p, 7.0 * p.t_osc()), kinematic_phases(&p, &GateSchedule::periods(7)).unwrap().0);
    }

    #[test]
    fn excited_perturbative_phase_ground_matches_integral() {
        let p = reference();
        let direct = perturbative_phase_integral(&p).unwrap();
        assert_relative_eq!(perturbative_phase_excited(&p, 0).unwrap(), direct, max_relative = 1e-7);
    }

    #[test]
    fn excited_perturbative_phase_is_linear_and_close() {
        let p = reference();
        let p0 = perturbative_phase_excited(&p, 0).unwrap();
        for n in 1..=2 {
            let pn = perturbative_phase_excited(&p, n).unwrap();
            assert!((pn - p0).abs() / p0 < 0.15, "n = {n}: {pn} vs {p0}");
        }
        let half = TrapParams { a_bb: 0.5 * p.a_bb, ..p };
        assert_relative_eq!(
            perturbative_phase_excited(&half, 1).unwrap(),
            0.5 * perturbative_phase_excited(&p, 1).unwrap(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn interpolated_overlap_matches_samples() {
        let (tr, _) = runs(&TrapParams { a_bb: 0.0, ..reference() }, 1, 128);
        // Free motion: compare interpolated points with the analytic overlap.
        for &f in &[0.1234, 0.377, 0.5, 0.81] {
            let t = f * tr.params.t_osc();
            let o = overlap_with_initial(&tr, t).unwrap();
            let exact = crate::analytic::rel_overlap_free(&tr.params, t) * cm_overlap(&tr.params, t);
            assert!((o - exact).norm() < 1e-8, "t = {f}: {o} vs {exact}");
        }
        assert!(overlap_with_initial(&tr, 1.01 * tr.params.t_osc()).is_err());
        assert_relative_eq!(overlap_with_initial(&tr, 0.0).unwrap().re, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn half_period_recurrence() {
        let (tr, _) = runs(&TrapParams { a_bb: 0.0, ..reference() }, 1, 64);
        let o = overlap_with_initial(&tr, 0.5 * tr.params.t_osc()).unwrap();
        assert!((o.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn free_run_has_no_collisional_phase() {
        let (tr, fr) = runs(&TrapParams { a_bb: 0.0, ..reference() }, 1, 64);
        for (i, phi) in collisional_phase(&tr, &fr).unwrap().iter().enumerate() {
            assert_eq!(*phi, 0.0);
            assert_eq!(tr.overlap_with(&fr, i).unwrap().norm(), tr.norms[i].sqrt().powi(2));
        }
    }

    #[test]
    fn staircase_phase_over_one_period() {
        let p = reference();
        let (tr, fr) = runs(&p, 1, 512);
        let phi = collisional_phase(&tr, &fr).unwrap();
        let t = tr.times_over_tosc();
        let at = |f: f64| phi[t.iter().position(|&x| x >= f).unwrap()];
        // Before the first collision nothing has happened.
        assert!(at(0.12).abs() < 1e-4);
        let o0 = tr.overlap_with(&fr, t.iter().position(|&x| x >= 0.12).unwrap()).unwrap();
        assert!((o0.norm() - 1.0).abs() < 1e-4);
        // Flat between the collisions at T/4 and 3T/4.
        let plateau = at(0.45) - at(0.35);
        assert!(plateau.abs() < 1e-3, "plateau drift {plateau}");
        assert!(at(0.45) > 0.15 && at(0.45) < 0.3);
        assert!(phi.last().unwrap() > &0.4);
    }

    #[test]
    fn recurrence_shift_is_positive_and_small() {
        let (tr, _) = runs(&reference(), 2, 512);
        let dt = recurrence_shift(&tr, 1).unwrap();
        assert!((dt - 1.4e-3).abs() < 0.3e-3, "dt = {dt}");
        assert!(matches!(recurrence_shift(&tr, 2), Err(Error::Contract(_))));
        let (fr, _) = runs(&TrapParams { a_bb: 0.0, ..reference() }, 2, 512);
        assert!(recurrence_shift(&fr, 1).unwrap().abs() < 1e-6);
    }

    #[test]
    fn total_phase_decomposes() {
        let p = reference();
        let (tr, fr) = runs(&p, 2, 256);
        let phi = collisional_phase(&tr, &fr).unwrap();
        let sched = GateSchedule::periods(2);
        let (_, b) = kinematic_phases(&p, &sched).unwrap();
        let big = total_phase(&tr, tr.t_end()).unwrap();
        assert!(overlap_with_initial(&tr, tr.t_end()).unwrap().norm() > 0.95);
        let residue = wrap(big - phi.last().unwrap() - 2.0 * b);
        assert!(residue.abs() < 1e-2, "residue {residue}");
    }

    #[test]
    fn csv_and_summary() {
        let p = reference();
        let (tr, fr) = runs(&p, 1, 16);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &tr, &fr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRAJECTORY_CSV_HEADER));
        assert_eq!(lines.next(), Some("t_over_Tosc,norm,re_O0,im_O0,abs_O,phase_coll_rad"));
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row.len(), 6);
        assert_eq!((row[0], row[3], row[5]), (0.0, 0.0, 0.0));
        assert_relative_eq!(row[1], 1.0, epsilon = 1e-12);
        assert_relative_eq!(row[4], 1.0, epsilon = 1e-12);
        assert_eq!(text.lines().count(), 2 + tr.times.len());
        let s = summarize(&tr, &fr, &GateSchedule::periods(1)).unwrap();
        assert!(s.flags.contains(&"perturbative_regime_violated".to_string()));
        let json = serde_json::to_value(&s).unwrap();
        for key in ["phi_coll", "phi_a", "phi_b", "O0_abs", "flags"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let recs = phase_records(&tr, &fr).unwrap();
        assert_eq!(recs[0].phi_coll, 0.0);
        assert!(recs.last().unwrap().phi_kin_b.is_some());
        assert!(recs[3].phi_kin_b.is_none());
    }

    #[test]
    fn lenient_phase_stops_at_floor() {
        let o = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.9), Complex64::new(0.1, 0.0), Complex64::new(1.0, 0.0)];
        let phi = collisional_phase_lenient(&o);
        assert_relative_eq!(phi[1], PI / 2.0);
        assert!(phi[2].is_nan() && phi[3].is_nan());
    }
}
