//! Physical parameters, unit conversion, the switching potentials and the
//! effective 1D contact strength.
//!
//! Internal units: ħ = m = ω = 1, so lengths are in a_x = √(ħ/mω), energies
//! in ħω and times in 1/ω. One oscillation period of the merged well is
//! `T_osc = 2π`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants (SI, CODATA 2018).
pub mod consts {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const K_B: f64 = 1.380_649e-23;
    pub const MU_B: f64 = 9.274_010_078_3e-24;
    pub const MU_0: f64 = 1.256_637_062_12e-6;
    /// Mass of a ⁸⁷Rb atom in kg.
    pub const RB87_MASS: f64 = 1.4432e-25;
}

/// One oscillation period of the merged well in internal time units.
pub const T_OSC: f64 = 2.0 * PI;

/// Dimensionless trap and gate parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    /// Frequency of the separated wells, in units of ω.
    pub omega0: f64,
    /// Frequency of the merged well; 1 in internal units.
    pub omega: f64,
    /// Transverse frequency, in units of ω.
    pub omega_perp: f64,
    /// Half-separation of the separated wells, in units of a_x.
    pub x0: f64,
    /// Scattering length for two |b⟩ atoms, in units of a_x.
    pub a_bb: f64,
    /// Scattering length for an |a⟩,|b⟩ pair, in units of a_x.
    pub a_ab: f64,
    /// Atomic mass in kg, if the parameters came from SI values.
    pub mass_si: Option<f64>,
    /// Merged-well angular frequency in rad/s, if known.
    pub omega_si: Option<f64>,
}

/// SI description of a trap, the input side of [`to_dimensionless`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiTrap {
    pub mass_kg: f64,
    /// Merged-well angular frequency (rad/s).
    pub omega: f64,
    /// Separated-well angular frequency (rad/s).
    pub omega0: f64,
    /// Transverse angular frequency (rad/s).
    pub omega_perp: f64,
    /// Half-separation of the wells (m).
    pub x0_m: f64,
    pub a_bb_m: f64,
    pub a_ab_m: f64,
}

impl SiTrap {
    /// ⁸⁷Rb at ω = 2π·17.23 kHz, ω⊥ = 2π·150 kHz, ω₀ = 2ω, x0 = 5 a_x,
    /// a_s = 5.1 nm for both pairs.
    pub fn rb87_reference() -> Self {
        let mass = consts::RB87_MASS;
        let omega = 2.0 * PI * 17.23e3;
        let a_x = (consts::HBAR / (mass * omega)).sqrt();
        SiTrap {
            mass_kg: mass,
            omega,
            omega0: 2.0 * omega,
            omega_perp: 2.0 * PI * 150e3,
            x0_m: 5.0 * a_x,
            a_bb_m: 5.1e-9,
            a_ab_m: 5.1e-9,
        }
    }
}

/// Converts an SI trap description to internal units.
pub fn to_dimensionless(si: &SiTrap) -> Result<TrapParams> {
    let positive = [
        ("mass_kg", si.mass_kg),
        ("omega", si.omega),
        ("omega0", si.omega0),
        ("omega_perp", si.omega_perp),
        ("x0_m", si.x0_m),
    ];
    for (name, v) in positive {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    for (name, v) in [("a_bb_m", si.a_bb_m), ("a_ab_m", si.a_ab_m)] {
        if !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite")));
        }
    }
    let a_x = (consts::HBAR / (si.mass_kg * si.omega)).sqrt();
    Ok(TrapParams {
        omega0: si.omega0 / si.omega,
        omega: 1.0,
        omega_perp: si.omega_perp / si.omega,
        x0: si.x0_m / a_x,
        a_bb: si.a_bb_m / a_x,
        a_ab: si.a_ab_m / a_x,
        mass_si: Some(si.mass_kg),
        omega_si: Some(si.omega),
    })
}

impl TrapParams {
    /// The reference parameter set (⁸⁷Rb, ω₀ = 2ω, x0 = 5 a_x).
    pub fn paper_fig2() -> Self {
        to_dimensionless(&SiTrap::rb87_reference()).expect("reference parameters are valid")
    }

    /// Inverse of [`to_dimensionless`]; needs the SI anchors.
    pub fn to_si(&self) -> Result<SiTrap> {
        let (mass, w_si) = self.anchors()?;
        let w = w_si / self.omega;
        let a_x = (consts::HBAR / (mass * w)).sqrt();
        Ok(SiTrap {
            mass_kg: mass,
            omega: self.omega * w,
            omega0: self.omega0 * w,
            omega_perp: self.omega_perp * w,
            x0_m: self.x0 * a_x,
            a_bb_m: self.a_bb * a_x,
            a_ab_m: self.a_ab * a_x,
        })
    }

    fn anchors(&self) -> Result<(f64, f64)> {
        match (self.mass_si, self.omega_si) {
            (Some(m), Some(w)) => Ok((m, w)),
            _ => Err(Error::Domain("SI anchors (mass, omega) not set".into())),
        }
    }

    /// Length unit a_x in metres.
    pub fn length_unit_m(&self) -> Result<f64> {
        let (m, w) = self.anchors()?;
        Ok((consts::HBAR / (m * w)).sqrt())
    }

    /// Energy unit ħω in joules.
    pub fn energy_unit_j(&self) -> Result<f64> {
        let (_, w) = self.anchors()?;
        Ok(consts::HBAR * w)
    }

    /// Converts k_B T in units of ħω₀ to kelvin.
    pub fn temperature_kelvin(&self, kt_over_hw0: f64) -> Result<f64> {
        Ok(kt_over_hw0 * self.omega0 * self.energy_unit_j()? / consts::K_B)
    }

    /// Width of the separated-well ground state, a₀ = 1/√ω₀.
    pub fn a0(&self) -> f64 {
        1.0 / self.omega0.sqrt()
    }

    /// Oscillation period of the merged well.
    pub fn t_osc(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Overlap of the two separated-well ground states, e^{−ω₀x0²}.
    pub fn well_overlap(&self) -> f64 {
        (-self.omega0 * self.x0 * self.x0).exp()
    }

    /// Checks the hard invariants and returns soft warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [
            ("omega0", self.omega0),
            ("omega", self.omega),
            ("omega_perp", self.omega_perp),
            ("x0", self.x0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.a_bb.is_finite() && self.a_ab.is_finite()) {
            return Err(Error::Domain("scattering lengths must be finite".into()));
        }
        if self.omega0 <= self.omega {
            return Err(Error::Domain(format!(
                "omega0 = {} must exceed omega = {}",
                self.omega0, self.omega
            )));
        }
        let mut warnings = Vec::new();
        if self.well_overlap() > 1e-6 {
            warnings.push(format!(
                "wells not separated: exp(-omega0 x0^2) = {:e}",
                self.well_overlap()
            ));
        }
        if self.a_bb < 0.0 || self.a_ab < 0.0 {
            warnings.push("attractive scattering length".into());
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }
}

/// Internal-state pair of the two atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StatePair {
    Bb,
    Ab,
}

/// Strength g of the 1D contact interaction g·δ(x₁ − x₂), in ħω·a_x.
pub fn effective_1d_coupling(params: &TrapParams, pair: StatePair) -> f64 {
    let a_s = match pair {
        StatePair::Bb => params.a_bb,
        StatePair::Ab => params.a_ab,
    };
    if a_s < 0.0 {
        log::warn!("attractive scattering length {a_s} for {pair:?}");
    }
    2.0 * a_s * params.omega_perp
}

/// Gate timing: N periods of the merged well, optionally stretched by the
/// measured period shift δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateSchedule {
    pub n_periods: u32,
    pub use_shifted_period: bool,
    /// Period shift in units of T_osc, once measured.
    pub delta_t: Option<f64>,
}

impl GateSchedule {
    pub fn periods(n_periods: u32) -> Self {
        GateSchedule { n_periods, use_shifted_period: false, delta_t: None }
    }

    /// Gate duration in units of T_osc.
    pub fn tau_over_tosc(&self) -> Result<f64> {
        if self.n_periods == 0 {
            return Err(Error::Domain("n_periods must be at least 1".into()));
        }
        let n = f64::from(self.n_periods);
        if self.use_shifted_period {
            match self.delta_t {
                Some(dt) => Ok(n * (1.0 + dt)),
                None => Err(Error::Contract("shifted period requested before δt was measured".into())),
            }
        } else {
            Ok(n)
        }
    }

    /// Gate duration in internal time units.
    pub fn tau(&self, params: &TrapParams) -> Result<f64> {
        Ok(self.tau_over_tosc()? * params.t_osc())
    }

    /// True when τ is an exact multiple of T_osc.
    pub fn is_integer_periods(&self) -> bool {
        !self.use_shifted_period || self.delta_t == Some(0.0)
    }
}

/// Potential of state |a⟩: two half-parabolas centred at ±x0.
pub fn potential_va(params: &TrapParams, x: f64) -> f64 {
    let d = x.abs() - params.x0;
    0.5 * params.omega0 * params.omega0 * d * d
}

/// Potential of state |b⟩: equal to v_a outside the gate, the merged
/// ω-well during 0 ≤ t ≤ τ.
pub fn potential_vb(params: &TrapParams, x: f64, t: f64, schedule: &GateSchedule) -> Result<f64> {
    let tau = schedule.tau(params)?;
    if (0.0..=tau).contains(&t) {
        Ok(0.5 * params.omega * params.omega * x * x)
    } else {
        Ok(potential_va(params, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_length_unit() {
        let p = TrapParams::paper_fig2();
        let a_x = p.length_unit_m().unwrap();
        assert!((a_x - 82.2e-9).abs() < 0.5e-9, "a_x = {a_x}");
        assert_relative_eq!(p.omega_perp, 150.0 / 17.23, max_relative = 1e-12);
        assert_relative_eq!(p.x0, 5.0, max_relative = 1e-12);
        assert_relative_eq!(p.a_bb, 0.062_075_8, max_relative = 1e-4);
    }

    #[test]
    fn si_round_trip() {
        let si = SiTrap::rb87_reference();
        let back = TrapParams::paper_fig2().to_si().unwrap();
        for (a, b) in [
            (si.mass_kg, back.mass_kg),
            (si.omega, back.omega),
            (si.omega0, back.omega0),
            (si.omega_perp, back.omega_perp),
            (si.x0_m, back.x0_m),
            (si.a_bb_m, back.a_bb_m),
            (si.a_ab_m, back.a_ab_m),
        ] {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_si() {
        let mut si = SiTrap::rb87_reference();
        si.mass_kg = 0.0;
        assert!(matches!(to_dimensionless(&si), Err(Error::Domain(_))));
    }

    #[test]
    fn coupling_values() {
        let mut p = TrapParams::paper_fig2();
        p.a_bb = 0.0621;
        p.omega_perp = 8.706;
        assert_relative_eq!(effective_1d_coupling(&p, StatePair::Bb), 1.081, max_relative = 1e-3);
        p.a_bb = 0.0;
        assert_eq!(effective_1d_coupling(&p, StatePair::Bb), 0.0);
    }

    #[test]
    fn potentials() {
        let mut p = TrapParams::paper_fig2();
        p.omega0 = 2.0;
        p.x0 = 5.0;
        assert_eq!(potential_va(&p, 5.0), 0.0);
        assert_eq!(potential_va(&p, -5.0), 0.0);
        assert_relative_eq!(potential_va(&p, 0.0), 50.0);
        let s = GateSchedule::periods(7);
        let tau = s.tau(&p).unwrap();
        assert_relative_eq!(potential_vb(&p, 1.3, tau / 2.0, &s).unwrap(), 0.5 * 1.3 * 1.3);
        assert_relative_eq!(potential_vb(&p, 1.3, tau + 1.0, &s).unwrap(), potential_va(&p, 1.3));
    }

    #[test]
    fn shifted_schedule_needs_measurement() {
        let s = GateSchedule { n_periods: 7, use_shifted_period: true, delta_t: None };
        assert!(matches!(s.tau_over_tosc(), Err(Error::Contract(_))));
        let s = GateSchedule { delta_t: Some(1.4e-3), ..s };
        assert_relative_eq!(s.tau_over_tosc().unwrap(), 7.0 * 1.0014);
    }

    #[test]
    fn validation_flags() {
        let p = TrapParams::paper_fig2();
        assert!(p.validate().unwrap().is_empty());
        let close = TrapParams { x0: 1.0, ..p };
        assert_eq!(close.validate().unwrap().len(), 1);
        let bad = TrapParams { omega0: 0.5, ..p };
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn potentials_even(x in -20.0f64..20.0, t in 0.0f64..40.0) {
            let p = TrapParams::paper_fig2();
            let s = GateSchedule::periods(7);
            proptest::prop_assert_eq!(potential_va(&p, x), potential_va(&p, -x));
            proptest::prop_assert_eq!(potential_vb(&p, x, t, &s).unwrap(), potential_vb(&p, -x, t, &s).unwrap());
        }

        #[test]
        fn coupling_bilinear(l in 0.01f64..10.0, m in 0.01f64..10.0) {
            let p = TrapParams::paper_fig2();
            let g = effective_1d_coupling(&p, StatePair::Bb);
            let q = TrapParams { a_bb: l * p.a_bb, omega_perp: m * p.omega_perp, ..p };
            let gq = effective_1d_coupling(&q, StatePair::Bb);
            proptest::prop_assert!((gq - l * m * g).abs() <= 1e-12 * gq.abs());
        }
    }
}
