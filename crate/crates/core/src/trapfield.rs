//! Magnetic-mirror microtraps above a sinusoidally magnetized tape.
//!
//! Axis conventions: x runs along the magnetization M = (M0 cos k_M x, 0, 0),
//! z is the height above the tape surface (z > 0), y is along the stripes.
//! The field is taken as
//!
//! ```text
//! B(x, z) = (B0 e^{−k z} cos kx,  B_y,  B0 e^{−k z} sin kx + B_z)
//! ```
//!
//! so that |B| reproduces the mirror-plus-bias potential. A different
//! assignment of the sin/cos pair to the x and z components shifts the
//! pattern by a quarter period and changes nothing below: periodicity, the
//! B_y floor, minima spacing and frequencies are convention independent.
//!
//! All quantities here are SI.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability (N/A²).
pub const MU_0: f64 = 1.25663706212e-6;
/// Bohr magneton (J/T).
pub const MU_B: f64 = 9.2740100783e-24;

pub const FIELD_MAP_HEADER: &str = "# collgate field map v1";

/// Tape and bias-field description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorParams {
    /// Magnetization amplitude (A/m).
    pub m0: f64,
    /// Magnetization wavenumber (rad/m).
    pub k_m: f64,
    /// Tape thickness (m).
    pub delta: f64,
    pub b_ext_y: f64,
    pub b_ext_z: f64,
    pub g_f: f64,
    pub m_f: f64,
}

impl MirrorParams {
    /// A 1 μm period tape with μ0·M0 = 0.1 T, 10 μm thick, 1 mT bias
    /// along z and y, holding ⁸⁷Rb in |F=2, m_F=2⟩.
    pub fn video_tape() -> Self {
        MirrorParams { m0: 0.1 / MU_0, k_m: 2.0 * PI / 1e-6, delta: 10e-6, b_ext_y: 1e-3, b_ext_z: 1e-3, g_f: 0.5, m_f: 2.0 }
    }

    /// B0 = μ0 M0 (1 − e^{−k δ})/2.
    pub fn b0(&self) -> f64 {
        0.5 * MU_0 * self.m0 * (1.0 - (-self.k_m * self.delta).exp())
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.k_m
    }

    /// g_F m_F μ_B, the energy per tesla.
    pub fn moment(&self) -> f64 {
        self.g_f * self.m_f * MU_B
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.m0, self.k_m, self.delta, self.b_ext_y, self.b_ext_z, self.g_f, self.m_f]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("mirror parameters must be finite".into()));
        }
        if !(self.k_m > 0.0) || !(self.delta > 0.0) {
            return Err(Error::Domain(format!("k_M = {} and delta = {} must be positive", self.k_m, self.delta)));
        }
        if !(self.b0() > 0.0) {
            return Err(Error::Domain(format!("B0 = {} must be positive", self.b0())));
        }
        if !(self.g_f * self.m_f > 0.0) {
            return Err(Error::NotATrap(format!("g_F m_F = {} is not a low-field seeker", self.g_f * self.m_f)));
        }
        Ok(())
    }
}

/// Field vector (T) at (x, z).
pub fn field(mp: &MirrorParams, x: f64, z: f64) -> [f64; 3] {
    let b = mp.b0() * (-mp.k_m * z).exp();
    let (s, c) = (mp.k_m * x).sin_cos();
    [b * c, mp.b_ext_y, b * s + mp.b_ext_z]
}

fn field_norm(mp: &MirrorParams, x: f64, z: f64) -> f64 {
    let [bx, by, bz] = field(mp, x, z);
    (bx * bx + by * by + bz * bz).sqrt()
}

/// V = g_F μ_B m_F |B| in joules.
pub fn magnetic_potential(mp: &MirrorParams, x: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("z = {z} is not above the surface")));
    }
    let b = field_norm(mp, x, z);
    let scale = mp.b0() + mp.b_ext_y.abs() + mp.b_ext_z.abs();
    if b <= 1e-14 * scale {
        return Err(Error::SpinFlipHazard { x, z });
    }
    Ok(mp.moment() * b)
}

/// Height ln(μ0 M0 / B0)/k_M of the minima pattern.
pub fn trap_height(mp: &MirrorParams) -> f64 {
    let b0 = mp.b0();
    assert!(MU_0 * mp.m0 > b0 && b0 > 0.0, "trap height needs mu0 M0 > B0 > 0");
    (MU_0 * mp.m0 / b0).ln() / mp.k_m
}

/// Point where the in-plane field cancels, if there is one above the
/// surface. Without a B_y component it is a field zero.
pub fn in_plane_zero(mp: &MirrorParams) -> Option<(f64, f64)> {
    let (b0, bz) = (mp.b0(), mp.b_ext_z);
    if bz == 0.0 || bz.abs() >= b0 {
        return None;
    }
    // b sin kx = −B_z with cos kx = 0.
    let x = if bz > 0.0 { 0.75 * mp.period() } else { 0.25 * mp.period() };
    Some((x, (b0 / bz.abs()).ln() / mp.k_m))
}

/// A located trap minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapMinimum {
    pub x: f64,
    pub z: f64,
    pub potential: f64,
    pub b_abs: f64,
}

fn potential_unchecked(mp: &MirrorParams, x: f64, z: f64) -> f64 {
    mp.moment() * field_norm(mp, x, z)
}

/// Gradient and Hessian of V by central differences with step h in both
/// directions.
fn derivatives(mp: &MirrorParams, x: f64, z: f64, h: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let v = |dx: f64, dz: f64| potential_unchecked(mp, x + dx, z + dz);
    let v0 = v(0.0, 0.0);
    let (vxp, vxm, vzp, vzm) = (v(h, 0.0), v(-h, 0.0), v(0.0, h), v(0.0, -h));
    let g = [(vxp - vxm) / (2.0 * h), (vzp - vzm) / (2.0 * h)];
    let hxx = (vxp - 2.0 * v0 + vxm) / (h * h);
    let hzz = (vzp - 2.0 * v0 + vzm) / (h * h);
    let hxz = (v(h, h) - v(h, -h) - v(-h, h) + v(-h, -h)) / (4.0 * h * h);
    (g, [[hxx, hxz], [hxz, hzz]])
}

fn sym_eigen(h: [[f64; 2]; 2]) -> (f64, f64) {
    let m = 0.5 * (h[0][0] + h[1][1]);
    let d = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[0][1]).sqrt();
    (m - d, m + d)
}

fn newton(mp: &MirrorParams, mut x: f64, mut z: f64) -> Option<(f64, f64)> {
    let h = 1e-5 / mp.k_m;
    for _ in 0..100 {
        let (g, hs) = derivatives(mp, x, z, h);
        let det = hs[0][0] * hs[1][1] - hs[0][1] * hs[0][1];
        let (lo, _) = sym_eigen(hs);
        let (mut dx, mut dz) = if lo > 0.0 && det > 0.0 {
            ((hs[1][1] * g[0] - hs[0][1] * g[1]) / det, (hs[0][0] * g[1] - hs[0][1] * g[0]) / det)
        } else {
            // Away from convexity fall back to a short gradient step.
            let n = (g[0] * g[0] + g[1] * g[1]).sqrt().max(f64::MIN_POSITIVE);
            (0.05 / mp.k_m * g[0] / n, 0.05 / mp.k_m * g[1] / n)
        };
        // Damping: never step more than a tenth of a period.
        let cap = 0.1 * mp.period();
        let len = (dx * dx + dz * dz).sqrt();
        if len > cap {
            dx *= cap / len;
            dz *= cap / len;
        }
        let v_old = potential_unchecked(mp, x, z);
        let mut step = 1.0;
        while step > 1e-6 && (z - step * dz <= 0.0 || potential_unchecked(mp, x - step * dx, z - step * dz) > v_old) {
            step *= 0.5;
        }
        x -= step * dx;
        z -= step * dz;
        if (step * len) < 1e-12 / mp.k_m {
            return Some((x, z));
        }
    }
    Some((x, z))
}

/// Local minima of V with x in [x_lo, x_hi), found by scanning a grid and
/// polishing each grid minimum with damped Newton. Sorted by x.
pub fn find_minima(mp: &MirrorParams, x_lo: f64, x_hi: f64) -> Result<Vec<TrapMinimum>> {
    mp.validate()?;
    if !(x_hi > x_lo) {
        return Err(Error::Domain("empty x range".into()));
    }
    if mp.b_ext_y == 0.0 {
        if let Some((x, z)) = in_plane_zero(mp) {
            return Err(Error::SpinFlipHazard { x, z });
        }
    }
    let (nx, nz) = ((((x_hi - x_lo) / mp.period()) * 64.0).ceil() as usize + 2, 160usize);
    let dx = (x_hi - x_lo) / nx as f64;
    let z_top = 8.0 / mp.k_m;
    let dz = z_top / nz as f64;
    let v: Vec<Vec<f64>> = (0..=nx + 1)
        .into_par_iter()
        .map(|i| {
            let x = x_lo + (i as f64 - 0.5) * dx;
            (1..=nz).map(|j| potential_unchecked(mp, x, j as f64 * dz)).collect()
        })
        .collect();
    let mut seeds = Vec::new();
    for i in 1..=nx {
        for j in 1..nz - 1 {
            let c = v[i][j];
            let neighbours = [v[i - 1][j], v[i + 1][j], v[i][j - 1], v[i][j + 1]];
            if neighbours.iter().all(|&n| c <= n) {
                seeds.push((x_lo + (i as f64 - 0.5) * dx, (j + 1) as f64 * dz));
            }
        }
    }
    let mut found: Vec<TrapMinimum> = Vec::new();
    for (sx, sz) in seeds {
        let Some((x, z)) = newton(mp, sx, sz) else { continue };
        if !(x >= x_lo && x < x_hi && z > 0.0) {
            continue;
        }
        if found.iter().any(|m| (m.x - x).abs() < 1e-6 * mp.period() && (m.z - z).abs() < 1e-6 * mp.period()) {
            continue;
        }
        let potential = magnetic_potential(mp, x, z)?;
        found.push(TrapMinimum { x, z, potential, b_abs: field_norm(mp, x, z) });
    }
    found.sort_by(|a, b| a.x.total_cmp(&b.x));
    Ok(found)
}

/// Trap frequencies at a minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrequencies {
    /// Angular frequencies (rad/s) along the Hessian eigenvectors, soft first.
    pub omega_soft: f64,
    pub omega_stiff: f64,
    /// Along the lab axes, from the diagonal of the Hessian.
    pub omega_x: f64,
    pub omega_z: f64,
    /// Largest relative change of a Hessian element between the last two
    /// Richardson levels.
    pub hessian_convergence: f64,
}

/// Harmonic frequencies at a verified minimum from a Richardson-extrapolated
/// finite-difference Hessian.
pub fn local_frequencies(mp: &MirrorParams, minimum: (f64, f64), mass_kg: f64) -> Result<LocalFrequencies> {
    mp.validate()?;
    if !(mass_kg > 0.0) {
        return Err(Error::Domain(format!("mass = {mass_kg}")));
    }
    let (x, z) = minimum;
    let h = 1e-3 / mp.k_m;
    let (g, coarse) = derivatives(mp, x, z, h);
    let (_, fine) = derivatives(mp, x, z, 0.5 * h);
    let (_, finer) = derivatives(mp, x, z, 0.25 * h);
    let rich = |a: [[f64; 2]; 2], b: [[f64; 2]; 2]| {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = (4.0 * b[i][j] - a[i][j]) / 3.0;
            }
        }
        r
    };
    let r1 = rich(coarse, fine);
    let r2 = rich(fine, finer);
    let scale = r2[0][0].abs().max(r2[1][1].abs());
    let mut change: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            change = change.max((r2[i][j] - r1[i][j]).abs() / scale);
        }
    }
    // The gradient must be small on the scale of curvature × step.
    let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    if gnorm > 1e-3 * scale * h {
        return Err(Error::Contract(format!("({x}, {z}) is not a stationary point (|grad V| = {gnorm:e})")));
    }
    let (lo, hi) = sym_eigen(r2);
    if lo <= 0.0 || r2[0][0] <= 0.0 || r2[1][1] <= 0.0 {
        return Err(Error::NotATrap(format!("curvature eigenvalues {lo:e}, {hi:e} at ({x}, {z})")));
    }
    Ok(LocalFrequencies {
        omega_soft: (lo / mass_kg).sqrt(),
        omega_stiff: (hi / mass_kg).sqrt(),
        omega_x: (r2[0][0] / mass_kg).sqrt(),
        omega_z: (r2[1][1] / mass_kg).sqrt(),
        hessian_convergence: change,
    })
}

/// Writes V and B on the tensor grid xs × zs, x slow.
pub fn write_field_map<W: Write>(out: &mut W, mp: &MirrorParams, xs: &[f64], zs: &[f64]) -> Result<()> {
    mp.validate()?;
    writeln!(out, "{FIELD_MAP_HEADER}")?;
    writeln!(out, "x_m,z_m,V_joule,Bx_T,By_T,Bz_T")?;
    for &x in xs {
        for &z in zs {
            let v = magnetic_potential(mp, x, z)?;
            let [bx, by, bz] = field(mp, x, z);
            writeln!(out, "{x:.14e},{z:.14e},{v:.14e},{bx:.14e},{by:.14e},{bz:.14e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::consts::RB87_MASS;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn thick(mp: MirrorParams) -> MirrorParams {
        MirrorParams { delta: 1.0, ..mp }
    }

    #[test]
    fn bare_mirror_amplitude() {
        let mp = MirrorParams { b_ext_y: 0.0, b_ext_z: 0.0, ..MirrorParams::video_tape() };
        let x = PI / (2.0 * mp.k_m);
        for z in [1e-8, 1e-7, 5e-7] {
            let b = magnetic_potential(&mp, x, z).unwrap() / mp.moment();
            assert_relative_eq!(b, mp.b0() * (-mp.k_m * z).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn thick_tape_height() {
        let mp = thick(MirrorParams::video_tape());
        assert_relative_eq!(mp.b0(), 0.5 * MU_0 * mp.m0, max_relative = 1e-14);
        assert_relative_eq!(trap_height(&mp), 2f64.ln() / mp.k_m, max_relative = 1e-12);
        assert!((trap_height(&mp) - 110e-9).abs() < 0.5e-9);
    }

    #[test]
    fn height_scales_inversely_with_wavenumber() {
        let a = MirrorParams::video_tape();
        let b = MirrorParams { k_m: 3.0 * a.k_m, delta: a.delta / 3.0, ..a };
        assert_relative_eq!(trap_height(&b), trap_height(&a) / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn field_zero_is_a_hazard() {
        let mp = MirrorParams { b_ext_y: 0.0, ..MirrorParams::video_tape() };
        let (x, z) = in_plane_zero(&mp).unwrap();
        assert!(field_norm(&mp, x, z) < 1e-15);
        assert!(matches!(magnetic_potential(&mp, x, z), Err(Error::SpinFlipHazard { .. })));
        assert!(matches!(find_minima(&mp, 0.0, mp.period()), Err(Error::SpinFlipHazard { .. })));
    }

    #[test]
    fn below_surface_is_rejected() {
        let mp = MirrorParams::video_tape();
        assert!(matches!(magnetic_potential(&mp, 0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters() {
        let mp = MirrorParams::video_tape();
        assert!(MirrorParams { k_m: 0.0, ..mp }.validate().is_err());
        assert!(MirrorParams { delta: -1.0, ..mp }.validate().is_err());
        assert!(matches!(MirrorParams { m_f: -1.0, ..mp }.validate(), Err(Error::NotATrap(_))));
    }

    #[test]
    fn minima_sit_on_the_in_plane_zero_one_period_apart() {
        let mp = MirrorParams::video_tape();
        let mins = find_minima(&mp, 0.0, 2.0 * mp.period()).unwrap();
        assert_eq!(mins.len(), 2, "{mins:?}");
        let (x0, z0) = in_plane_zero(&mp).unwrap();
        for (k, m) in mins.iter().enumerate() {
            assert_relative_eq!(m.x, x0 + k as f64 * mp.period(), max_relative = 1e-6);
            assert_relative_eq!(m.z, z0, max_relative = 1e-6);
            // sin(kx) = −B_z/(B0 e^{−kz}) at the minimum.
            let lhs = (mp.k_m * m.x).sin();
            assert_relative_eq!(lhs, -mp.b_ext_z / (mp.b0() * (-mp.k_m * m.z).exp()), max_relative = 1e-6);
            assert_relative_eq!(m.b_abs, mp.b_ext_y, max_relative = 1e-9);
        }
        assert_relative_eq!(mins[1].x - mins[0].x, mp.period(), max_relative = 1e-8);
    }

    #[test]
    fn frequencies_in_the_microtrap_band() {
        let mp = MirrorParams::video_tape();
        let m = find_minima(&mp, 0.0, mp.period()).unwrap()[0];
        let f = local_frequencies(&mp, (m.x, m.z), RB87_MASS).unwrap();
        for w in [f.omega_x, f.omega_z] {
            let hz = w / (2.0 * PI);
            assert!((2e4..1e7).contains(&hz), "{hz} Hz");
        }
        assert!(f.hessian_convergence < 1e-4, "{}", f.hessian_convergence);
        // Near the in-plane zero the trap is round with ω = k B_z √(μ/(m B_y)).
        let expect = mp.k_m * mp.b_ext_z * (mp.moment() / (RB87_MASS * mp.b_ext_y)).sqrt();
        assert_relative_eq!(f.omega_x, expect, max_relative = 1e-4);
        assert_relative_eq!(f.omega_z, expect, max_relative = 1e-4);
    }

    #[test]
    fn doubling_moment_scales_frequency_by_root_two() {
        let mp = MirrorParams::video_tape();
        let m = find_minima(&mp, 0.0, mp.period()).unwrap()[0];
        let a = local_frequencies(&mp, (m.x, m.z), RB87_MASS).unwrap();
        let b = local_frequencies(&MirrorParams { m_f: 2.0 * mp.m_f, ..mp }, (m.x, m.z), RB87_MASS).unwrap();
        assert_relative_eq!(b.omega_x / a.omega_x, 2f64.sqrt(), max_relative = 1e-6);
        assert_relative_eq!(b.omega_z / a.omega_z, 2f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn saddle_and_off_minimum_points_are_rejected() {
        let mp = MirrorParams::video_tape();
        let (x0, z0) = in_plane_zero(&mp).unwrap();
        // Half a period away, at the same height, V is a maximum in x.
        let r = local_frequencies(&mp, (x0 - 0.5 * mp.period(), z0), RB87_MASS);
        assert!(matches!(r, Err(Error::Contract(_)) | Err(Error::NotATrap(_))), "{r:?}");
        let r = local_frequencies(&mp, (x0 + 0.1 * mp.period(), z0), RB87_MASS);
        assert!(matches!(r, Err(Error::Contract(_))), "{r:?}");
    }

    #[test]
    fn field_map_rows() {
        let mp = MirrorParams::video_tape();
        let mut buf = Vec::new();
        write_field_map(&mut buf, &mp, &[0.0, 1e-7], &[1e-7, 2e-7, 3e-7]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], FIELD_MAP_HEADER);
        assert_eq!(lines[1], "x_m,z_m,V_joule,Bx_T,By_T,Bz_T");
        assert_eq!(lines.len(), 8);
        let row: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        let b = field(&mp, 0.0, 1e-7);
        assert_relative_eq!(row[2], magnetic_potential(&mp, 0.0, 1e-7).unwrap(), max_relative = 1e-14);
        assert_relative_eq!(row[3], b[0], max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn potential_is_periodic_in_x(x in -3e-6f64..3e-6, z in 1e-8f64..1e-6, periods in -5i32..5) {
            let mp = MirrorParams::video_tape();
            let a = magnetic_potential(&mp, x, z).unwrap();
            let b = magnetic_potential(&mp, x + f64::from(periods) * mp.period(), z).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn bias_sets_a_floor(x in -3e-6f64..3e-6, z in 1e-8f64..2e-6, by in 1e-5f64..1e-2, bz in -2e-2f64..2e-2) {
            let mp = MirrorParams { b_ext_y: by, b_ext_z: bz, ..MirrorParams::video_tape() };
            let v = magnetic_potential(&mp, x, z).unwrap();
            prop_assert!(v >= mp.moment() * by * (1.0 - 1e-15));
        }
    }
}
