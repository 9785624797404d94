//! Exact noninteracting evolution after the trap switch: a Gaussian released
//! from an ω₀-well into the merged ω-well breathes with width parameter
//! Ω(t) and its centre follows the classical orbit.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::model::TrapParams;

/// Gaussian ψ(x, t) = exp(−a x² + b x + c) with complex a, b, c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGaussian {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl LogGaussian {
    pub fn value(&self, x: f64) -> Complex64 {
        (-self.a * x * x + self.b * x + self.c).exp()
    }

    /// ⟨self|other⟩ = ∫ conj(self)·other dx, evaluated in closed form.
    pub fn overlap(&self, other: &LogGaussian) -> Complex64 {
        let a = self.a.conj() + other.a;
        let b = self.b.conj() + other.b;
        let c = self.c.conj() + other.c;
        (Complex64::new(PI, 0.0) / a).sqrt() * (b * b / (4.0 * a) + c).exp()
    }
}

/// Ground state of an oscillator (mass, frequency `width`) centred at `center`
/// at t = 0, evolving in a harmonic well of frequency `omega` centred at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub mass: f64,
    pub omega: f64,
    pub width: f64,
    pub center: f64,
}

impl GaussianPacket {
    /// Exponent coefficients at time t.
    pub fn log_form(&self, t: f64) -> LogGaussian {
        let (m, w, alpha, d) = (self.mass, self.omega, self.width, self.center);
        let lam = alpha / w;
        let (s, c) = (w * t).sin_cos();
        let x = Complex64::new(c, lam * s);
        let xdot = Complex64::new(-w * s, alpha * c);
        // Continuous branch of arg X(t): X e^{−iωt} has positive real part.
        let arg_x = w * t + ((lam - 1.0) * s * c).atan2(c * c + lam * s * s);
        let log_x = Complex64::new(x.norm().ln(), arg_x);
        let i = Complex64::i();
        let ac = 0.5 * m * xdot / x;
        let q = d * c;
        let p = -m * w * d * s;
        let action = -0.25 * m * w * d * d * (2.0 * w * t).sin();
        LogGaussian {
            a: -i * ac,
            b: -2.0 * i * ac * q + i * p,
            c: i * ac * q * q - i * p * q + i * action + 0.25 * (m * alpha / PI).ln() - 0.5 * log_x,
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Complex64 {
        self.log_form(t).value(x)
    }
}

/// Width parameter Ω(t) = ω²ω₀/(ω²cos²ωt + ω₀²sin²ωt).
pub fn breathing_width(params: &TrapParams, t: f64) -> f64 {
    let (w, w0) = (params.omega, params.omega0);
    let (s, c) = (w * t).sin_cos();
    w * w * w0 / (w * w * c * c + w0 * w0 * s * s)
}

fn cm_packet(params: &TrapParams) -> GaussianPacket {
    GaussianPacket { mass: 2.0, omega: params.omega, width: params.omega0, center: 0.0 }
}

fn rel_packets(params: &TrapParams) -> [GaussianPacket; 2] {
    let p = |d| GaussianPacket { mass: 0.5, omega: params.omega, width: params.omega0, center: d };
    [p(2.0 * params.x0), p(-2.0 * params.x0)]
}

/// Centre-of-mass wavefunction ψ_CM(R, t) of two |b⟩ atoms.
pub fn cm_wavefunction(params: &TrapParams, r: f64, t: f64) -> Complex64 {
    cm_packet(params).value(r, t)
}

/// ⟨ψ_CM(t)|ψ_CM(0)⟩.
pub fn cm_overlap(params: &TrapParams, t: f64) -> Complex64 {
    let p = cm_packet(params);
    p.log_form(t).overlap(&p.log_form(0.0))
}

/// |⟨ψ_CM(t)|ψ_CM(0)⟩|² in closed form.
pub fn cm_overlap_sq(params: &TrapParams, t: f64) -> f64 {
    let (w, w0) = (params.omega, params.omega0);
    let s = (w * t).sin();
    let k = (w0 * w0 - w * w).powi(2) / (4.0 * w0 * w0 * w * w);
    (1.0 + k * s * s).powf(-0.5)
}

/// Free relative wavefunction: two Gaussian lobes at ±2x0 cos ωt.
pub fn rel_wavefunction_free(params: &TrapParams, r: f64, t: f64) -> Complex64 {
    let [p, m] = rel_packets(params);
    (p.value(r, t) + m.value(r, t)) / 2f64.sqrt()
}

/// ⟨ψ_rel⁽⁰⁾(t)|ψ_rel(0)⟩, from exact Gaussian integrals.
pub fn rel_overlap_free(params: &TrapParams, t: f64) -> Complex64 {
    let packets = rel_packets(params);
    let mut acc = Complex64::new(0.0, 0.0);
    for a in &packets {
        for b in &packets {
            acc += a.log_form(t).overlap(&b.log_form(0.0));
        }
    }
    acc / 2.0
}

/// |⟨ψ_rel⁽⁰⁾(t)|ψ_rel(0)⟩|² in closed form, with
/// ω±² = ω² + ω₀² ± (ω² − ω₀²)cos ωt.
pub fn rel_overlap_free_sq(params: &TrapParams, t: f64) -> f64 {
    let (w, w0, x0) = (params.omega, params.omega0, params.x0);
    let (s, c) = (w * t).sin_cos();
    let (sh, ch) = (0.5 * w * t).sin_cos();
    let wp2 = w * w + w0 * w0 + (w * w - w0 * w0) * c;
    let wm2 = w * w + w0 * w0 - (w * w - w0 * w0) * c;
    let e = w0 * w * w * x0 * x0;
    let direct = (-8.0 * e * ch * ch / wp2).exp() + (-8.0 * e * sh * sh / wm2).exp();
    let phase = 4.0 * w * w0 * w0 * (w0 * w0 + w * w) * x0 * x0 * s / (wp2 * wm2);
    let cross = 2.0 * phase.cos() * (-4.0 * e * (ch * ch / wp2 + sh * sh / wm2)).exp();
    (direct + cross) * cm_overlap_sq(params, t)
}
