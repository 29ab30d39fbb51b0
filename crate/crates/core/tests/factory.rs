mod common;

use ::lmsss::example::{build_example, oracle_frf, ExampleConfig};
use ::lmsss::*;
use common::*;
use num_complex::Complex64;

fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

#[test]
fn modal_form_keeps_the_spectrum() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    for sys in [&ex.a, &ex.assembled] {
        let m = disp(sys);
        let modal = to_modal_form(&m).unwrap();
        let e0 = sorted(m.a.complex_eigenvalues().iter().copied().collect());
        let e1 = sorted(modal.a.complex_eigenvalues().iter().copied().collect());
        let rho = e0.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in e0.iter().zip(&e1) {
            assert!((x - y).norm() < 1e-9 * rho, "{x} vs {y}");
        }
    }
}

#[test]
fn modal_form_of_b_matches_the_oracle() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let f = frequency_grid(20.0, 500.0, 0.25).unwrap();
    let modal = to_modal_form(&disp(&ex.b)).unwrap();
    let h = synth_frf(&as_acceleration(&modal).unwrap(), &f).unwrap();
    let r = compare_frf(&oracle_frf(&ex.b, &f).unwrap(), &h, 1e-8).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn example_models_are_reciprocal() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let f = frequency_grid(20.0, 500.0, 5.0).unwrap();
    let h = oracle_frf(&ex.assembled, &f).unwrap();
    for hk in &h.data {
        assert!((hk - hk.transpose()).camax() < 1e-12 * hk.camax());
    }
}

#[test]
fn partitioning_permutes_the_frf() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let m = disp(&ex.b);
    let iface = vec![label("B", "p2"), label("B", "p1")];
    let (p, perm) = partition_interface_first(&m, &iface).unwrap();
    assert_eq!(perm.outputs[..2], [1, 0]);
    let f = [25.0, 80.0];
    let h0 = synth_frf(&m, &f).unwrap();
    let h1 = synth_frf(&p, &f).unwrap();
    for k in 0..f.len() {
        for (i, &pi) in perm.outputs.iter().enumerate() {
            for (j, &pj) in perm.inputs.iter().enumerate() {
                assert_eq!(h1.data[k][(i, j)], h0.data[k][(pi, pj)]);
            }
        }
    }
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let m = disp(&ex.assembled);
    let f = frequency_grid(20.0, 500.0, 1.0).unwrap();
    let a = synth_frf_with(&m, &f, Execution::Sequential).unwrap();
    let b = synth_frf_with(&m, &f, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_is_seeded_and_unbiased() {
    let ex = build_example(&ExampleConfig::default()).unwrap();
    let f = frequency_grid(20.0, 500.0, 0.25).unwrap();
    let h = oracle_frf(&ex.b, &f).unwrap();
    let a = perturb_frf(&h, NoiseSpec { sigma: 1e-3, seed: 42 }).unwrap();
    assert_eq!(a, perturb_frf(&h, NoiseSpec { sigma: 1e-3, seed: 42 }).unwrap());
    assert_ne!(a, perturb_frf(&h, NoiseSpec { sigma: 1e-3, seed: 43 }).unwrap());
    let diffs: Vec<Complex64> = a.data.iter().zip(&h.data).flat_map(|(x, y)| (x - y).iter().copied().collect::<Vec<_>>()).collect();
    let mean = diffs.iter().sum::<Complex64>() / diffs.len() as f64;
    // 30 736 draws per part: mean well inside 5 standard errors
    assert!(mean.re.abs() < 5.0 * 1e-3 / (diffs.len() as f64).sqrt());
    assert!(mean.im.abs() < 5.0 * 1e-3 / (diffs.len() as f64).sqrt());
}
