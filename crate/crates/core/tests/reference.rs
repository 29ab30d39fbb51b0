mod common;

use ::lmsss::example::{build_example, oracle_frf, ExampleConfig};
use ::lmsss::reference::lmfbs_couple_lenient;
use ::lmsss::*;
use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn pair_frfs(f: &[f64]) -> (FrfMatrix, FrfMatrix, InterfacePairing) {
    let a = chain("A", &[2.0, 1.0], &[4e3, 3e3], true);
    let b = chain("B", &[1.5, 1.0], &[2e3, 5e3], true);
    let ya = synth_frf(&as_acceleration(&disp(&a)).unwrap(), f).unwrap();
    let yb = synth_frf(&as_acceleration(&disp(&b)).unwrap(), f).unwrap();
    (ya, yb, InterfacePairing::new([(label("A", "n1"), label("B", "n1"))]))
}

#[test]
fn lmfbs_marks_the_static_point_as_failed() {
    let f = [0.0, 5.0, 10.0];
    let (mut ya, mut yb, pairing) = pair_frfs(&f);
    // accelerance vanishes at rest, so the interface operator is zero there
    ya.data[0].fill(Complex64::new(0.0, 0.0));
    yb.data[0].fill(Complex64::new(0.0, 0.0));
    let part = lmfbs_couple_lenient(&[&ya, &yb], &pairing, Execution::Sequential).unwrap();
    let failed = part.failures();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].0, 0.0);
    assert!(part.data[1].is_ok() && part.data[2].is_ok());
    assert!(matches!(
        lmfbs_couple(&[&ya, &yb], &pairing),
        Err(Error::SingularAtFrequency { freq_hz, .. }) if freq_hz == 0.0
    ));
}

#[test]
fn lmfbs_matches_state_space_coupling() {
    let f = grid();
    let (ya, yb, pairing) = pair_frfs(&f);
    let h = lmfbs_couple(&[&ya, &yb], &pairing).unwrap();
    let a = chain("A", &[2.0, 1.0], &[4e3, 3e3], true);
    let b = chain("B", &[1.5, 1.0], &[2e3, 5e3], true);
    let p = CouplingProblem::new(vec![disp(&a), disp(&b)], pairing).unwrap();
    let ss = synth_frf(&couple_accel(&p).unwrap(), &f).unwrap();
    assert!(max_err(&ss, &h) < 1e-9);
}

#[test]
fn retained_frf_drops_the_b_side() {
    let f = [3.0, 7.0];
    let (ya, yb, pairing) = pair_frfs(&f);
    let h = lmfbs_couple(&[&ya, &yb], &pairing).unwrap();
    let u = retain_unique_frf(&h, &pairing).unwrap();
    assert_eq!(u.inputs, vec![label("A", "n0"), label("A", "n1"), label("B", "n0")]);
    // both copies of the interface DOF are equal after coupling, so the average is either one
    let i = h.outputs.iter().position(|l| *l == label("A", "n1")).unwrap();
    assert!((u.data[0][(1, 1)] - h.data[0][(i, i)]).norm() < 1e-12 * h.data[0][(i, i)].norm());
}

#[test]
fn classical_coupling_needs_pairs_and_an_invertible_feedthrough() {
    let a = disp(&chain("A", &[2.0, 1.0], &[4e3, 3e3], true));
    let b = disp(&chain("B", &[1.5, 1.0], &[2e3, 5e3], true));
    assert!(matches!(
        classical_couple(&[a.clone(), b.clone()], &InterfacePairing::default()),
        Err(Error::Precondition(_))
    ));
    let pairing = InterfacePairing::new([(label("A", "n1"), label("B", "n1"))]);
    let m = ClassicalCouplingMatrix::from_pairing(&pairing).unwrap();
    assert_eq!(m.t, DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    // every DOF carries mass, so D^JJ is invertible
    let c = classical_couple(&[a, b], &pairing).unwrap();
    assert_eq!(c.outputs.last(), Some(&label("A", "n1")));
    assert_eq!(c.n_outputs(), 3);
}

#[test]
fn sjovall_rejects_ucf_models_with_driven_internal_states() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let ia: Vec<DofLabel> = ex.pairing.pairs.iter().map(|p| p.a.clone()).collect();
    let ib: Vec<DofLabel> = ex.pairing.pairs.iter().map(|p| p.b.clone()).collect();
    let ma = to_modal_form(&disp(&ex.a)).unwrap();
    let mb = to_modal_form(&disp(&ex.b)).unwrap();
    let (ua, _) = ucf_transform(&ma, &ia).unwrap();
    let (ub, _) = ucf_transform(&mb, &ib).unwrap();
    assert!(matches!(sjovall_couple(&ua, &ub, &ex.pairing), Err(Error::Structure(_))));
    let (sa, _) = sacf_transform(&ma, &ia).unwrap();
    let (sb, _) = sacf_transform(&mb, &ib).unwrap();
    let c = sjovall_couple(&sa, &sb, &ex.pairing).unwrap();
    let f = frequency_grid(20.0, 500.0, 2.0).unwrap();
    let h = synth_frf(&as_acceleration(&c).unwrap(), &f).unwrap();
    assert!(max_err(&oracle_frf(&ex.assembled, &f).unwrap(), &h) < 1e-8);
}

#[test]
fn dynamic_stiffness_inverts_the_accelerance() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let f = frequency_grid(20.0, 500.0, 10.0).unwrap();
    let h = oracle_frf(&ex.b, &f).unwrap();
    let z = dynamic_stiffness(&h).unwrap();
    assert_eq!(z.response_kind, ResponseKind::DynamicStiffness);
    for (k, hz) in f.iter().enumerate() {
        let w2 = (2.0 * std::f64::consts::PI * hz).powi(2);
        let n = h.inputs.len();
        let prod = &z.data[k] * &h.data[k] + DMatrix::<Complex64>::identity(n, n) * Complex64::new(w2, 0.0);
        assert!(prod.camax() < 1e-9 * w2);
    }
    // at zero frequency the accelerance is singular
    let sys = chain("S", &[1.0, 2.0], &[1e3, 2e3], true);
    let mut h0 = synth_frf(&as_acceleration(&disp(&sys)).unwrap(), &[0.0, 1.0]).unwrap();
    h0.data[0].fill(Complex64::new(0.0, 0.0));
    assert!(matches!(dynamic_stiffness(&h0), Err(Error::SingularAtFrequency { .. })));
}

#[test]
fn dynamic_stiffness_input_checks() {
    let sys = chain("S", &[1.0, 2.0], &[1e3, 2e3], true);
    let r = synth_frf(&disp(&sys), &[1.0]).unwrap();
    assert!(matches!(dynamic_stiffness(&r), Err(Error::Precondition(_))));
    let a = synth_frf(&as_acceleration(&disp(&sys)).unwrap(), &[1.0]).unwrap();
    let rect = a.select(&a.inputs, &a.outputs[..1]).unwrap();
    assert!(matches!(dynamic_stiffness(&rect), Err(Error::Dimension(_))));
}
