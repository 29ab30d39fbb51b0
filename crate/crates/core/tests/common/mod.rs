#![allow(dead_code)]

use ::lmsss::*;
use nalgebra::DMatrix;

pub fn label(c: &str, n: &str) -> DofLabel {
    DofLabel::new(c, n)
}

/// Fixed-free spring–mass chain with stiffness-proportional damping plus a
/// small mass-proportional part.
pub fn chain(id: &str, masses: &[f64], springs: &[f64], grounded: bool) -> MechanicalSystem {
    let n = masses.len();
    let mut k = DMatrix::zeros(n, n);
    if grounded {
        k[(0, 0)] += springs[0];
    }
    let off = usize::from(grounded);
    for i in 0..n - 1 {
        let s = springs[i + off];
        k[(i, i)] += s;
        k[(i + 1, i + 1)] += s;
        k[(i, i + 1)] -= s;
        k[(i + 1, i)] -= s;
    }
    let m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(masses));
    let v = &k * 2e-4 + &m * 0.3;
    let dofs = (0..n).map(|i| label(id, &format!("n{i}"))).collect();
    MechanicalSystem::new(m, k, v, dofs).unwrap()
}

pub fn disp(sys: &MechanicalSystem) -> StateSpaceModel {
    build_model(sys, OutputKind::Displacement).unwrap()
}

pub fn max_err(a: &FrfMatrix, b: &FrfMatrix) -> f64 {
    compare_frf(a, b, 0.0).unwrap().max_rel_err
}

pub fn grid() -> Vec<f64> {
    frequency_grid(1.0, 60.0, 0.5).unwrap()
}
