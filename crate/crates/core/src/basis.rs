//! Harmonic-oscillator eigenbases and the projection of the gate's initial
//! states onto them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TrapParams;
use crate::quadrature::{hermite_functions_into, GaussHermite};

/// Truncated eigenbasis of a 1D oscillator with the given mass and
/// frequency, centred at `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorBasis {
    pub mass: f64,
    pub frequency: f64,
    pub center: f64,
    pub n_max: usize,
}

impl OscillatorBasis {
    pub fn new(mass: f64, frequency: f64, center: f64, n_max: usize) -> Result<Self> {
        if !(mass > 0.0 && frequency > 0.0 && mass.is_finite() && frequency.is_finite()) {
            return Err(Error::Domain(format!(
                "basis needs positive mass and frequency (got {mass}, {frequency})"
            )));
        }
        if !center.is_finite() {
            return Err(Error::Domain("basis center must be finite".into()));
        }
        Ok(OscillatorBasis { mass, frequency, center, n_max })
    }

    /// Relative-coordinate basis (mass 1/2, frequency ω, centred at 0).
    pub fn relative(params: &TrapParams, n_max: usize) -> Self {
        OscillatorBasis { mass: 0.5, frequency: params.omega, center: 0.0, n_max }
    }

    pub fn len(&self) -> usize {
        self.n_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Inverse length √(mass·frequency).
    pub fn inverse_length(&self) -> f64 {
        (self.mass * self.frequency).sqrt()
    }

    pub fn energy(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.frequency
    }

    /// Largest momentum carried by the basis, √((2N+1)·mass·freq).
    pub fn max_momentum(&self) -> f64 {
        ((2 * self.n_max + 1) as f64 * self.mass * self.frequency).sqrt()
    }

    /// Normalized eigenfunction ψ_n(x).
    pub fn eigenfunction(&self, n: usize, x: f64) -> Result<f64> {
        if n > self.n_max {
            return Err(Error::Range { n, n_max: self.n_max });
        }
        let mut buf = vec![0.0; n + 1];
        self.fill(x, &mut buf);
        Ok(buf[n])
    }

    /// All eigenfunctions ψ_0..ψ_{n_max} at x.
    pub fn eigenfunctions(&self, x: f64) -> Vec<f64> {
        let mut buf = vec![0.0; self.len()];
        self.fill(x, &mut buf);
        buf
    }

    fn fill(&self, x: f64, out: &mut [f64]) {
        let s = self.inverse_length();
        hermite_functions_into(s * (x - self.center), out);
        let norm = s.sqrt();
        for v in out.iter_mut() {
            *v *= norm;
        }
    }

    fn check_same(&self, other: &OscillatorBasis) -> Result<()> {
        if self != other {
            return Err(Error::Contract(format!("basis mismatch: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Rank-one matrix v vᵀ representing a truncated contact interaction.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub v: Vec<f64>,
}

impl RankOne {
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.v[k] * self.v[l]
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.v.iter().map(|a| self.v.iter().map(|b| a * b).collect()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.v.iter().map(|a| a * a).sum()
    }
}

/// Matrix elements ψ_k(x_c)ψ_l(x_c) of δ(x − x_c) in the basis.
pub fn delta_matrix_elements(basis: &OscillatorBasis, x_c: f64) -> RankOne {
    RankOne { v: basis.eigenfunctions(x_c) }
}

/// Overlaps ⟨n|g⟩ of a normalized Gaussian g with the basis states, where g
/// is the ground state of an oscillator with the basis mass, frequency
/// `width_freq`, centred at `center`.
pub fn gaussian_projection(basis: &OscillatorBasis, width_freq: f64, center: f64) -> Vec<f64> {
    let lam = width_freq / basis.frequency;
    let delta = basis.inverse_length() * (center - basis.center);
    let q = (lam - 1.0) / (lam + 1.0);
    let w = lam * delta / (lam + 1.0);
    let mut h = vec![0.0; basis.len()];
    h[0] = lam.powf(0.25) * (2.0 / (lam + 1.0)).sqrt() * (-lam * delta * delta / (2.0 * (lam + 1.0))).exp();
    if basis.n_max >= 1 {
        h[1] = w * 2f64.sqrt() * h[0];
    }
    for n in 1..basis.n_max {
        let nf = n as f64;
        h[n + 1] = w * (2.0 / (nf + 1.0)).sqrt() * h[n] - q * (nf / (nf + 1.0)).sqrt() * h[n - 1];
    }
    h
}

/// Complex amplitudes of one mode in the interaction picture: the free
/// phases e^{−i(n+½)ωt} are not included in `amps`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    pub basis: OscillatorBasis,
    pub amps: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoefficientsJson {
    n_max: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl ModeCoefficients {
    pub fn from_real(basis: OscillatorBasis, re: &[f64]) -> Self {
        ModeCoefficients { basis, amps: re.iter().map(|&x| Complex64::new(x, 0.0)).collect() }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Weight |c_N|² in the highest retained level.
    pub fn tail(&self) -> f64 {
        self.amps.last().map_or(0.0, |c| c.norm_sqr())
    }

    /// ⟨self|other⟩ in coefficient space.
    pub fn inner(&self, other: &ModeCoefficients) -> Result<Complex64> {
        self.basis.check_same(&other.basis)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn to_json(&self) -> Result<String> {
        let j = CoefficientsJson {
            n_max: self.basis.n_max,
            re: self.amps.iter().map(|c| c.re).collect(),
            im: self.amps.iter().map(|c| c.im).collect(),
        };
        Ok(serde_json::to_string(&j)?)
    }

    /// Reads amplitudes written by [`ModeCoefficients::to_json`] into `basis`.
    pub fn from_json(basis: OscillatorBasis, text: &str) -> Result<Self> {
        let j: CoefficientsJson = serde_json::from_str(text)?;
        if j.n_max != basis.n_max || j.re.len() != basis.len() || j.im.len() != basis.len() {
            return Err(Error::Contract("coefficient length does not match basis".into()));
        }
        let amps = j.re.iter().zip(&j.im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        Ok(ModeCoefficients { basis, amps })
    }
}

/// Amplitudes c_jk of a state of two coupled modes, stored row-major with
/// j indexing `basis_cm` and k indexing `basis_rel`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCoefficients {
    pub basis_cm: OscillatorBasis,
    pub basis_rel: OscillatorBasis,
    pub amps: Vec<Complex64>,
}

impl PairCoefficients {
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.basis_rel.len() + k
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.amps[self.index(j, k)]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Largest of the weights in the last row and the last column.
    pub fn tail(&self) -> f64 {
        let (nj, nk) = (self.basis_cm.len(), self.basis_rel.len());
        let row: f64 = (0..nk).map(|k| self.get(nj - 1, k).norm_sqr()).sum();
        let col: f64 = (0..nj).map(|j| self.get(j, nk - 1).norm_sqr()).sum();
        row.max(col)
    }
}

/// Geometry of the a–b problem in centre-of-mass and relative coordinates.
///
/// With atom |a⟩ in the ω₀-well at −x0 and atom |b⟩ in the merged ω-well,
/// R = (x₁+x₂)/2 (mass 2) and r = x₂ − x₁ (mass ½) both oscillate at
/// ω̃ = √((ω²+ω₀²)/2) about −c_R and +c_r, coupled by κ·R·r with
/// κ = (ω²−ω₀²)/2. The contact point r = 0 sits at −c_r in the shifted
/// relative coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairGeometry {
    pub omega_tilde: f64,
    pub c_cm: f64,
    pub c_rel: f64,
    pub kappa: f64,
    /// Energy offset left over after completing the squares.
    pub offset: f64,
}

impl PairGeometry {
    pub fn new(params: &TrapParams) -> Self {
        let (w, w0, x0) = (params.omega, params.omega0, params.x0);
        let wt2 = 0.5 * (w * w + w0 * w0);
        let c_cm = w0 * w0 * x0 / (2.0 * wt2);
        let c_rel = w0 * w0 * x0 / wt2;
        let kappa = 0.5 * (w * w - w0 * w0);
        let offset = 0.5 * w0 * w0 * x0 * x0 - wt2 * c_cm * c_cm - 0.25 * wt2 * c_rel * c_rel - kappa * c_cm * c_rel;
        PairGeometry { omega_tilde: wt2.sqrt(), c_cm, c_rel, kappa, offset }
    }

    /// Displacement of the contact point in unit-mass rotated coordinates,
    /// x0ω₀²/(√2 ω̃²).
    pub fn xi(&self) -> f64 {
        self.c_rel / 2f64.sqrt()
    }

    pub fn basis_cm(&self, n_max: usize) -> OscillatorBasis {
        OscillatorBasis { mass: 2.0, frequency: self.omega_tilde, center: -self.c_cm, n_max }
    }

    pub fn basis_rel(&self, n_max: usize) -> OscillatorBasis {
        OscillatorBasis { mass: 0.5, frequency: self.omega_tilde, center: self.c_rel, n_max }
    }
}

/// Initial relative-motion state of two |b⟩ atoms, (g₊ + g₋)/√2 with g± the
/// ω₀ ground states at r = ±2x0, in the relative basis.
///
/// The Gaussian projection recurrence stays regular at ω₀ = ω, where it
/// reduces to displaced coherent-state amplitudes.
pub fn initial_coeffs_same(params: &TrapParams, basis: &OscillatorBasis) -> Result<ModeCoefficients> {
    let want = OscillatorBasis::relative(params, basis.n_max);
    basis.check_same(&want)?;
    let plus = gaussian_projection(basis, params.omega0, 2.0 * params.x0);
    let minus = gaussian_projection(basis, params.omega0, -2.0 * params.x0);
    let c: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a + b) / 2f64.sqrt()).collect();
    Ok(ModeCoefficients::from_real(*basis, &c))
}

/// Initial a–b state (atom |a⟩ at −x0, atom |b⟩ at +x0, both in ω₀ ground
/// states). It factorizes as a_j·b_k in the shifted CM and relative bases.
pub fn initial_coeffs_diff(
    params: &TrapParams,
    basis_cm: &OscillatorBasis,
    basis_rel: &OscillatorBasis,
) -> Result<PairCoefficients> {
    let geo = PairGeometry::new(params);
    basis_cm.check_same(&geo.basis_cm(basis_cm.n_max))?;
    basis_rel.check_same(&geo.basis_rel(basis_rel.n_max))?;
    let a = gaussian_projection(basis_cm, params.omega0, 0.0);
    let b = gaussian_projection(basis_rel, params.omega0, 2.0 * params.x0);
    let mut amps = Vec::with_capacity(a.len() * b.len());
    for aj in &a {
        for bk in &b {
            amps.push(Complex64::new(aj * bk, 0.0));
        }
    }
    Ok(PairCoefficients { basis_cm: *basis_cm, basis_rel: *basis_rel, amps })
}

/// Relative-motion state with n quanta in each separated well,
/// ψ_(n)(r) = [χ_n(r + 2x0) + (−1)ⁿ χ_n(r − 2x0)]/√2, χ_n the n-th
/// eigenfunction of the (½, ω₀) oscillator. It is even in r and equals the
/// gate's initial state for n = 0.
#[derive(Debug, Clone, Copy)]
pub struct ExcitedState {
    pub n: usize,
    left: OscillatorBasis,
    right: OscillatorBasis,
}

/// Builds ψ_(n) for the given parameters.
pub fn excited_relative_state(n: usize, params: &TrapParams) -> ExcitedState {
    ExcitedState {
        n,
        left: OscillatorBasis { mass: 0.5, frequency: params.omega0, center: -2.0 * params.x0, n_max: n },
        right: OscillatorBasis { mass: 0.5, frequency: params.omega0, center: 2.0 * params.x0, n_max: n },
    }
}

impl ExcitedState {
    fn sign(&self) -> f64 {
        if self.n % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let l = self.left.eigenfunctions(r)[self.n];
        let rr = self.right.eigenfunctions(r)[self.n];
        (l + self.sign() * rr) / 2f64.sqrt()
    }

    /// Coefficients in `basis`, by Gauss–Hermite quadrature around each lobe
    /// with 4·N_max nodes.
    pub fn project(&self, basis: &OscillatorBasis) -> ModeCoefficients {
        let nodes = (4 * basis.n_max).max(4 * self.n + 8);
        let gh = GaussHermite::new(nodes);
        let mut c = vec![0.0; basis.len()];
        for (lobe, sign) in [(self.left, 1.0), (self.right, self.sign())] {
            // Product of the two Gaussian envelopes.
            let a = lobe.mass * lobe.frequency;
            let b = basis.mass * basis.frequency;
            let mid = (a * lobe.center + b * basis.center) / (a + b);
            let scale = (2.0 / (a + b)).sqrt();
            for (y, w) in gh.nodes.iter().zip(&gh.scaled_weights) {
                let x = mid + scale * y;
                let chi = lobe.eigenfunctions(x)[self.n];
                let weight = w * scale * sign * chi / 2f64.sqrt();
                if weight == 0.0 {
                    continue;
                }
                for (ck, psi) in c.iter_mut().zip(basis.eigenfunctions(x)) {
                    *ck += weight * psi;
                }
            }
        }
        ModeCoefficients::from_real(*basis, &c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrapParams;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn reference() -> TrapParams {
        TrapParams { omega0: 2.0, x0: 5.0, ..TrapParams::paper_fig2() }
    }

    #[test]
    fn eigenfunction_basics() {
        let b = OscillatorBasis::new(1.0, 1.0, 0.0, 5).unwrap();
        assert_relative_eq!(b.eigenfunction(0, 0.0).unwrap(), PI.powf(-0.25), epsilon = 1e-15);
        assert_eq!(b.eigenfunction(1, 0.0).unwrap(), 0.0);
        assert!(matches!(b.eigenfunction(6, 0.0), Err(Error::Range { n: 6, n_max: 5 })));
        assert!(OscillatorBasis::new(0.0, 1.0, 0.0, 3).is_err());
    }

    #[test]
    fn eigenfunctions_orthonormal_off_unit_scale() {
        let b = OscillatorBasis::new(0.5, 1.7, 0.3, 60).unwrap();
        let gh = GaussHermite::new(130);
        let s = 1.0 / b.inverse_length();
        let rows: Vec<Vec<f64>> = gh.nodes.iter().map(|y| b.eigenfunctions(b.center + s * y)).collect();
        for n in (0..=60).step_by(7) {
            for m in 0..=60 {
                let v: f64 = rows.iter().zip(&gh.scaled_weights).map(|(r, w)| w * s * r[n] * r[m]).sum();
                assert!((v - f64::from(u8::from(n == m))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn delta_elements() {
        let p = reference();
        let b = OscillatorBasis::relative(&p, 40);
        let d = delta_matrix_elements(&b, 0.0);
        for k in 0..=40 {
            for l in 0..=40 {
                if k % 2 == 1 || l % 2 == 1 {
                    assert_eq!(d.get(k, l), 0.0);
                }
            }
        }
        assert_relative_eq!(d.get(0, 0), (0.5 / PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn delta_trace_grows_like_sqrt_n() {
        // Σ_k ψ_k(0)² → √(2N)/π · √(μω) asymptotically (sum over even k).
        let p = reference();
        for n in [200usize, 800] {
            let tr = delta_matrix_elements(&OscillatorBasis::relative(&p, n), 0.0).trace();
            let asym = (2.0 * n as f64).sqrt() / PI * 0.5f64.sqrt();
            assert!((tr / asym - 1.0).abs() < 0.02, "n = {n}: {tr} vs {asym}");
        }
    }

    /// Direct quadrature of ⟨ψ_n|ψ_rel(0)⟩ on a fine uniform grid.
    fn quadrature_projection(p: &TrapParams, b: &OscillatorBasis) -> Vec<f64> {
        let (lo, hi, n) = (-30.0, 30.0, 24_001);
        let h = (hi - lo) / (n - 1) as f64;
        let g = |r: f64, c: f64| (0.5 * p.omega0 / PI).powf(0.25) * (-0.25 * p.omega0 * (r - c) * (r - c)).exp();
        let mut out = vec![0.0; b.len()];
        for i in 0..n {
            let r = lo + h * i as f64;
            let psi = (g(r, 2.0 * p.x0) + g(r, -2.0 * p.x0)) / 2f64.sqrt();
            for (o, e) in out.iter_mut().zip(b.eigenfunctions(r)) {
                *o += h * psi * e;
            }
        }
        out
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let p = reference();
        let b = OscillatorBasis::relative(&p, 60);
        let c = initial_coeffs_same(&p, &b).unwrap();
        let q = quadrature_projection(&p, &b);
        for (a, b) in c.amps.iter().zip(&q) {
            assert!((a.re - b).abs() < 1e-8);
        }
        assert!((c.norm_sqr() - 1.0).abs() < 1e-6);
        assert!(c.amps.iter().skip(1).step_by(2).all(|z| z.norm() == 0.0 || z.norm() < 1e-15));
    }

    #[test]
    fn doubling_n_max_is_stable() {
        let p = reference();
        let c60 = initial_coeffs_same(&p, &OscillatorBasis::relative(&p, 60)).unwrap();
        let c120 = initial_coeffs_same(&p, &OscillatorBasis::relative(&p, 120)).unwrap();
        for (a, b) in c60.amps.iter().zip(&c120.amps) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn coincident_gaussians() {
        let p = TrapParams { omega0: 1.0, x0: 0.0, ..reference() };
        let c = initial_coeffs_same(&p, &OscillatorBasis::relative(&p, 10)).unwrap();
        assert_relative_eq!(c.amps[0].re, 2f64.sqrt(), epsilon = 1e-14);
        assert!(c.amps[1..].iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn wrong_basis_is_rejected() {
        let p = reference();
        let b = OscillatorBasis::new(1.0, 1.0, 0.0, 10).unwrap();
        assert!(matches!(initial_coeffs_same(&p, &b), Err(Error::Contract(_))));
    }

    #[test]
    fn pair_geometry_values() {
        let geo = PairGeometry::new(&reference());
        assert_relative_eq!(geo.xi(), 5.0 * 4.0 / (2f64.sqrt() * 2.5), epsilon = 1e-12);
        assert_relative_eq!(geo.xi(), 5.657, epsilon = 1e-3);
        // (ω₀²−ω²)² ξ² / (4ω₀²)
        assert_relative_eq!(geo.offset, 9.0 * geo.xi().powi(2) / 16.0, epsilon = 1e-12);
    }

    #[test]
    fn pair_initial_state_matches_2d_quadrature() {
        let p = reference();
        let geo = PairGeometry::new(&p);
        // The CM Gaussian sits c_R = 4 away from the CM basis centre
        // (mean level ≈ 25), so 40 CM levels leave a 6e-4 tail.
        let short = initial_coeffs_diff(&p, &geo.basis_cm(40), &geo.basis_rel(40)).unwrap();
        assert!((short.norm_sqr() - 1.0).abs() < 1e-3);
        let (bc, br) = (geo.basis_cm(56), geo.basis_rel(40));
        let c = initial_coeffs_diff(&p, &bc, &br).unwrap();
        assert!((c.norm_sqr() - 1.0).abs() < 1e-8, "norm {}", c.norm_sqr());
        // Direct projection of ψ₋(x₁)ψ₊(x₂) for a few (j, k).
        let gh = GaussHermite::new(80);
        let w = gh.weights();
        let s = (2.0 / p.omega0).sqrt();
        for &(j, k) in &[(0usize, 0usize), (1, 3), (2, 7), (5, 12)] {
            let mut acc = 0.0;
            for (y1, w1) in gh.nodes.iter().zip(&w) {
                for (y2, w2) in gh.nodes.iter().zip(&w) {
                    let x1 = -p.x0 + s * y1;
                    let x2 = p.x0 + s * y2;
                    let (rc, rr) = (0.5 * (x1 + x2), x2 - x1);
                    let f = bc.eigenfunctions(rc)[j] * br.eigenfunctions(rr)[k];
                    // Jacobian of (x1,x2) → (R,r) is 1; the Gaussian factor
                    // g(x1)g(x2) = (ω₀/π)^{1/2} e^{−y1²−y2²}.
                    acc += w1 * w2 * s * s * f * (p.omega0 / PI).sqrt();
                }
            }
            assert!((acc - c.get(j, k).re).abs() < 1e-8, "({j},{k}): {acc} vs {}", c.get(j, k).re);
        }
        let other = initial_coeffs_diff(&TrapParams { a_ab: 0.3, ..p }, &bc, &br).unwrap();
        assert_eq!(other, c);
    }

    #[test]
    fn excited_zero_is_initial_state() {
        let p = reference();
        let b = OscillatorBasis::relative(&p, 60);
        let c = initial_coeffs_same(&p, &b).unwrap();
        let e = excited_relative_state(0, &p).project(&b);
        for (a, b) in c.amps.iter().zip(&e.amps) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn excited_states_even_and_orthonormal() {
        let p = reference();
        let states: Vec<_> = (0..=6).map(|n| excited_relative_state(n, &p)).collect();
        for s in &states {
            for r in [0.3, 4.1, 9.7, 12.0] {
                assert_relative_eq!(s.value(r), s.value(-r), epsilon = 1e-14);
            }
        }
        let (lo, hi, npts) = (-25.0, 25.0, 20_001);
        let h = (hi - lo) / (npts - 1) as f64;
        let vals: Vec<Vec<f64>> =
            states.iter().map(|s| (0..npts).map(|i| s.value(lo + h * i as f64)).collect()).collect();
        for n in 0..=6 {
            for m in 0..=6 {
                let ov: f64 = vals[n].iter().zip(&vals[m]).map(|(a, b)| a * b * h).sum();
                assert!((ov - f64::from(u8::from(n == m))).abs() < 1e-6, "<{n}|{m}> = {ov}");
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let p = reference();
        let b = OscillatorBasis::relative(&p, 8);
        let c = initial_coeffs_same(&p, &b).unwrap();
        let text = c.to_json().unwrap();
        assert!(text.starts_with("{\"n_max\":8"));
        assert_eq!(ModeCoefficients::from_json(b, &text).unwrap(), c);
    }
}
