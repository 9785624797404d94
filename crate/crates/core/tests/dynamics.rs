//! Convergence of the spectral propagators in basis size and tolerance.

use collgate::basis::{initial_coeffs_same, OscillatorBasis};
use collgate::dynamics::{free_same, propagate_same, SolverSettings};
use collgate::model::{GateSchedule, TrapParams};
use collgate::ode::OdeSettings;

fn phase_and_overlap(p: &TrapParams, n_max: usize, ode: OdeSettings) -> (f64, f64) {
    let b = OscillatorBasis::relative(p, n_max);
    let init = initial_coeffs_same(p, &b).unwrap();
    let s = SolverSettings { ode, samples_per_period: 32 };
    let sch = GateSchedule::periods(1);
    let tr = propagate_same(&init, p, &sch, &s).unwrap();
    let fr = free_same(&init, p, &sch, &s).unwrap();
    let i = tr.times.len() - 1;
    let o = tr.overlap_with(&fr, i).unwrap();
    (o.arg(), tr.overlap_initial(i).norm())
}

#[test]
fn tighter_tolerance_changes_nothing() {
    let p = TrapParams::paper_fig2();
    let loose = phase_and_overlap(&p, 60, OdeSettings::default());
    let tight = phase_and_overlap(&p, 60, OdeSettings { rtol: 1e-12, atol: 1e-14, ..OdeSettings::default() });
    assert!((loose.0 - tight.0).abs() < 1e-6, "{loose:?} {tight:?}");
    assert!((loose.1 - tight.1).abs() < 1e-6, "{loose:?} {tight:?}");
}

#[test]
fn free_observables_do_not_depend_on_basis_size() {
    let p = TrapParams { a_bb: 0.0, ..TrapParams::paper_fig2() };
    let a = phase_and_overlap(&p, 60, OdeSettings::default());
    let b = phase_and_overlap(&p, 120, OdeSettings::default());
    assert!((a.1 - b.1).abs() < 1e-6);
    assert_eq!(a.0, 0.0);
}

#[test]
fn interacting_phase_converges_from_above_as_inverse_root_n() {
    let p = TrapParams::paper_fig2();
    let phis: Vec<f64> =
        [60, 120, 240, 480].iter().map(|&n| phase_and_overlap(&p, n, OdeSettings::default()).0).collect();
    let d: Vec<f64> = phis.windows(2).map(|w| w[0] - w[1]).collect();
    assert!(d.iter().all(|&x| x > 0.0), "{phis:?}");
    // Successive differences shrink by a factor between √2 and 2 per doubling,
    // settling towards √2.
    for w in d.windows(2) {
        let r = w[0] / w[1];
        assert!((1.3..1.9).contains(&r), "ratio {r}, phases {phis:?}");
    }
}

#[test]
#[ignore = "fails: the contact truncation converges as 1/sqrt(N), a doubling moves the phase by ~1e-2"]
fn interacting_phase_is_stable_under_doubling() {
    let p = TrapParams::paper_fig2();
    let a = phase_and_overlap(&p, 60, OdeSettings::default());
    let b = phase_and_overlap(&p, 120, OdeSettings::default());
    assert!((a.0 - b.0).abs() < 1e-6, "{a:?} {b:?}");
}
