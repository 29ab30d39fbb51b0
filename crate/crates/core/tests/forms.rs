mod common;

use ::lmsss::example::{build_example, ExampleConfig};
use ::lmsss::forms::check_sacf_structure;
use ::lmsss::*;
use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_system(n: usize, seed: &[f64]) -> MechanicalSystem {
    let g = DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] * ((i + 2 * j) as f64).cos());
    let m = &g * g.transpose() + DMatrix::identity(n, n);
    let k = (&g.transpose() * &g + DMatrix::identity(n, n) * 2.0) * 1e3;
    let v = &k * 1e-3 + &m * 0.2;
    let dofs = (0..n).map(|i| label("R", &format!("d{i}"))).collect();
    MechanicalSystem::new(m, k, v, dofs).unwrap()
}

fn log_grid() -> Vec<f64> {
    (0..40).map(|i| 0.3 * 1.1f64.powi(i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ucf_and_sacf_preserve_frfs(
        n in 2usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 25),
        n_j in 1usize..3,
    ) {
        let sys = random_system(n, &seed);
        let m = disp(&sys);
        let iface: Vec<DofLabel> = sys.dofs.iter().take(n_j.min(n)).cloned().collect();
        let f = log_grid();
        let h = synth_frf(&m, &f).unwrap();
        for (t, tr) in [ucf_transform(&m, &iface).unwrap(), sacf_transform(&m, &iface).unwrap()] {
            prop_assert!(tr.condition_number.is_finite());
            prop_assert!(t.is_coupling_form());
            let back = reorder_io(&t, &m.inputs, &m.outputs);
            prop_assert!(max_err(&h, &synth_frf(&back, &f).unwrap()) < 1e-8);
        }
    }

    #[test]
    fn coupling_form_interface_rows_are_exact(
        n in 2usize..5,
        seed in proptest::collection::vec(-1.0f64..1.0, 25),
    ) {
        let sys = random_system(n, &seed);
        let iface = vec![sys.dofs[n - 1].clone()];
        let (t, _) = ucf_transform(&disp(&sys), &iface).unwrap();
        // first output is the interface DOF, reading the second state
        prop_assert_eq!(&t.outputs[0], &iface[0]);
        for k in 0..t.n_states() {
            prop_assert_eq!(t.c[(0, k)], if k == 1 { 1.0 } else { 0.0 });
            prop_assert_eq!(t.a[(1, k)], if k == 0 { 1.0 } else { 0.0 });
        }
        prop_assert_eq!(t.state_tags[0].name(), "deriv_interface_output");
    }
}

#[test]
fn sacf_blocks_vanish_on_the_example() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let iface: Vec<DofLabel> = ex.pairing.pairs.iter().map(|p| p.b.clone()).collect();
    let modal = to_modal_form(&disp(&ex.b)).unwrap();
    let (t, _) = sacf_transform(&modal, &iface).unwrap();
    check_sacf_structure(&t, iface.len()).unwrap();
    let n_j = iface.len();
    let n_i = t.n_states() - 2 * n_j;
    assert_eq!(t.b.view((2 * n_j, 0), (n_i, n_j)).amax(), 0.0);
}

#[test]
fn ucf_rejects_rank_deficient_interface_outputs() {
    let sys = chain("S", &[1.0, 2.0], &[1e3, 2e3], true);
    let mut m = disp(&sys);
    let row = m.c.row(0).into_owned();
    m.c.row_mut(1).copy_from(&row);
    let r = ucf_transform(&m, &sys.dofs);
    assert!(matches!(r, Err(Error::InterfaceOutputRankDeficient { rank: 1, expected: 2 })), "{r:?}");
}

#[test]
fn transforms_require_displacement_models() {
    let sys = chain("S", &[1.0, 2.0], &[1e3, 2e3], true);
    let acc = build_model(&sys, OutputKind::Acceleration).unwrap();
    assert!(matches!(ucf_transform(&acc, &sys.dofs[..1]), Err(Error::WrongOutputKind { .. })));
}

#[test]
fn too_many_interface_dofs_for_the_state_count() {
    // two states cannot hold two interface outputs and their derivatives
    let sys = chain("S", &[1.0, 2.0], &[1e3, 2e3], true);
    let full = disp(&sys);
    let one = full.select_io(&sys.dofs[..1], &sys.dofs[..1]).unwrap();
    let m = to_modal_form(&one).unwrap();
    let small = StateSpaceModel {
        a: m.a.view((0, 0), (2, 2)).into_owned(),
        b: m.b.rows(0, 2).into_owned(),
        c: m.c.columns(0, 2).into_owned(),
        state_tags: m.state_tags[..2].to_vec(),
        ..m
    };
    assert!(ucf_transform(&small, &sys.dofs[..1]).is_ok());
    let two = StateSpaceModel {
        inputs: vec![sys.dofs[0].clone(), label("S", "extra")],
        outputs: vec![sys.dofs[0].clone(), label("S", "extra")],
        b: DMatrix::from_fn(2, 2, |i, j| if j == 0 { small.b[(i, 0)] } else { 1.0 }),
        c: DMatrix::from_fn(2, 2, |i, j| if i == 0 { small.c[(0, j)] } else { 1.0 - j as f64 }),
        d: DMatrix::zeros(2, 2),
        ..small
    };
    let r = ucf_transform(&two, &two.inputs.clone());
    assert!(matches!(r, Err(Error::Structure(_))), "{r:?}");
}

#[test]
fn reduce_minimal_checks_tags() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let p = CouplingProblem::new(vec![disp(&ex.a), disp(&ex.b)], ex.pairing.clone()).unwrap();
    // untransformed models carry no interface tags
    let coupled = couple_accel(&p).unwrap();
    assert!(matches!(build_state_reduction(&coupled.state_tags, &p.pairing), Err(Error::Structure(_))));
}
