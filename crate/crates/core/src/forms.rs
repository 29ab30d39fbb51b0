//! Similarity transformations into coupling form and elimination of the
//! duplicated interface states of a coupled coupling-form model.
//!
//! A coupling-form state vector is `[ẏ^J; y^J; x^I]`: the first `2·n_J` rows
//! of `T` are `C^J A` and `C^J`, and the remaining rows `N` fill the rank.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factory::{partition_interface_first, IoPermutation};
use crate::interface::{boolean_pinv, StateReductionMap};
use crate::linalg::{
    condition_number, max_abs, mul_sum_compensated, nullspace_rows, numerical_rank, select_rows,
    solve_refined, vstack,
};
use crate::model::{DofLabel, OutputKind, StateSpaceModel, StateTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    #[serde(rename = "UCF")]
    Ucf,
    #[serde(rename = "SACF")]
    Sacf,
    #[serde(rename = "NCF")]
    Ncf,
}

impl FormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            FormKind::Ucf => "UCF",
            FormKind::Sacf => "SACF",
            FormKind::Ncf => "NCF",
        }
    }
}

/// Diagnostics of a transformation, also carried by a failed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub kind: FormKind,
    pub condition_number: f64,
    pub ncf_residual: Option<f64>,
    pub rank_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingFormTransform {
    pub kind: FormKind,
    pub t: DMatrix<f64>,
    pub n_block: DMatrix<f64>,
    pub condition_number: f64,
    pub ncf_residual: Option<f64>,
    /// Interface-first reordering applied to the inputs and outputs.
    pub permutation: IoPermutation,
}

impl CouplingFormTransform {
    pub fn report(&self) -> TransformReport {
        TransformReport {
            kind: self.kind,
            condition_number: self.condition_number,
            ncf_residual: self.ncf_residual,
            rank_ok: true,
        }
    }
}

struct Prepared {
    m: StateSpaceModel,
    perm: IoPermutation,
    labels: Vec<DofLabel>,
    /// `[C^J A; C^J]`
    r: DMatrix<f64>,
    n_j: usize,
}

fn prepare(m: &StateSpaceModel, interface: &[DofLabel]) -> Result<Prepared> {
    m.require_kind(OutputKind::Displacement)?;
    for l in interface {
        if m.input_index(l).is_none() || m.output_index(l).is_none() {
            return Err(Error::Precondition(format!(
                "interface DOF {l} must be both an input and an output"
            )));
        }
    }
    let (p, perm) = partition_interface_first(m, interface)?;
    let n_j = interface.len();
    let n = p.n_states();
    if n < 2 * n_j {
        return Err(Error::Structure(format!(
            "{n} states cannot hold {n_j} interface outputs and their derivatives"
        )));
    }
    let cj = p.c.rows(0, n_j).into_owned();
    let rank = numerical_rank(&cj);
    if n_j > 0 && rank < n_j {
        return Err(Error::InterfaceOutputRankDeficient { rank, expected: n_j });
    }
    let r = vstack(&[&(&cj * &p.a), &cj]);
    Ok(Prepared {
        labels: p.outputs[..n_j].to_vec(),
        m: p,
        perm,
        r,
        n_j,
    })
}

fn interface_inputs(p: &Prepared) -> Result<DMatrix<f64>> {
    let bj = p.m.b.columns(0, p.n_j).into_owned();
    let rank = numerical_rank(&bj);
    if p.n_j > 0 && rank < p.n_j {
        return Err(Error::InterfaceInputRankDeficient { rank, expected: p.n_j });
    }
    Ok(bj)
}

/// Applies `T = [R; N]`, or reports why it cannot.
fn finish(
    p: Prepared,
    n_block: DMatrix<f64>,
    kind: FormKind,
    ncf_residual: Option<f64>,
) -> Result<(StateSpaceModel, CouplingFormTransform)> {
    let n = p.m.n_states();
    let t = vstack(&[&p.r, &n_block]);
    let square = t.nrows() == n;
    let cond = if square { condition_number(&t) } else { f64::INFINITY };
    let rank_ok = square && numerical_rank(&t) == n && cond.is_finite();
    if !rank_ok {
        return Err(Error::TransformSingular(Box::new(TransformReport {
            kind,
            condition_number: cond,
            ncf_residual,
            rank_ok: false,
        })));
    }
    // right division by T through an LU of Tᵀ, no explicit inverse
    let singular = || {
        Error::TransformSingular(Box::new(TransformReport {
            kind,
            condition_number: cond,
            ncf_residual,
            rank_ok: false,
        }))
    };
    // right division by T: solve with Tᵀ, residuals in extended precision
    let tt = t.transpose();
    let lu_t = tt.clone().lu();
    let eye = DMatrix::identity(n, n);
    let right_div = |terms: &[(f64, &DMatrix<f64>, &DMatrix<f64>)]| {
        solve_refined(&tt, &lu_t, terms, 2)
            .map(|y| y.transpose())
            .ok_or_else(singular)
    };
    let n_j = p.n_j;
    let at = p.m.a.transpose();
    let mut a = right_div(&[(1.0, &at, &tt)])?;
    let mut c = right_div(&[(1.0, &eye, &p.m.c.transpose())])?;
    // rows that are exact by construction: d/dt y^J = ẏ^J, and the interface
    // outputs are the second state block
    for i in 0..n_j {
        for k in 0..n {
            a[(n_j + i, k)] = if k == i { 1.0 } else { 0.0 };
            c[(i, k)] = if k == n_j + i { 1.0 } else { 0.0 };
        }
    }
    let mut tags = Vec::with_capacity(n);
    tags.extend(p.labels.iter().cloned().map(StateTag::DerivInterfaceOutput));
    tags.extend(p.labels.iter().cloned().map(StateTag::InterfaceOutput));
    tags.resize(n, StateTag::Internal);
    let model = StateSpaceModel {
        a,
        b: mul_sum_compensated(&[(1.0, &t, &p.m.b)]),
        c,
        state_tags: tags,
        ..p.m
    }
    .checked()?;
    Ok((
        model,
        CouplingFormTransform {
            kind,
            t,
            n_block,
            condition_number: cond,
            ncf_residual,
            permutation: p.perm,
        },
    ))
}

/// Unconstrained coupling form: `N` spans the nullspace of `[C^J A; C^J]`.
pub fn ucf_transform(
    m: &StateSpaceModel,
    interface: &[DofLabel],
) -> Result<(StateSpaceModel, CouplingFormTransform)> {
    let p = prepare(m, interface)?;
    let n_block = nullspace_rows(&p.r);
    finish(p, n_block, FormKind::Ucf, None)
}

/// Coupling form whose internal states are not driven by interface inputs:
/// the rows of `N` are picked from the left nullspace of `B^J` by
/// column-pivoted QR of their components outside the rowspace of
/// `[C^J A; C^J]`.
pub fn sacf_transform(
    m: &StateSpaceModel,
    interface: &[DofLabel],
) -> Result<(StateSpaceModel, CouplingFormTransform)> {
    let p = prepare(m, interface)?;
    let bj = interface_inputs(&p)?;
    let n = p.m.n_states();
    let n_int = n - 2 * p.n_j;
    let n_b = nullspace_rows(&bj.transpose());
    let n_c = nullspace_rows(&p.r);
    // components of the candidate rows outside rowspace(R)
    let projected = &n_b * n_c.transpose() * &n_c;
    let mut order = DMatrix::from_fn(1, n_b.nrows(), |_, j| j as f64);
    if n_b.nrows() > 0 {
        let qr = projected.transpose().col_piv_qr();
        qr.p().permute_columns(&mut order);
    }
    let picked: Vec<usize> = order.iter().take(n_int).map(|&x| x as usize).collect();
    let n_block = select_rows(&n_b, &picked);
    let (model, tr) = finish(p, n_block, FormKind::Sacf, None)?;
    check_sacf_structure(&model, interface.len())?;
    Ok((zero_sacf_blocks(model, interface.len()), tr))
}

/// Compromise form: `N = N_C N_Bᵀ(N_B N_Bᵀ)⁻¹N_B`, the projection
/// of the UCF block onto the rowspace of the `B^J` nullspace. The residual
/// `‖N_C − N‖_max` is reported; a rank-deficient `T` is a typed failure.
pub fn ncf_transform(
    m: &StateSpaceModel,
    interface: &[DofLabel],
) -> Result<(StateSpaceModel, CouplingFormTransform)> {
    let p = prepare(m, interface)?;
    let bj = interface_inputs(&p)?;
    let n_b = nullspace_rows(&bj.transpose());
    let n_c = nullspace_rows(&p.r);
    let gram = &n_b * n_b.transpose();
    let proj = match gram.clone().lu().solve(&n_b) {
        Some(x) => n_b.transpose() * x,
        None => DMatrix::zeros(n_b.ncols(), n_b.ncols()),
    };
    let n_block = &n_c * proj;
    let residual = max_abs(&(&n_c - &n_block));
    finish(p, n_block, FormKind::Ncf, Some(residual))
}

/// Checks the zero blocks of a coupling-form model whose internal states are
/// not driven by interface inputs: `B` rows of `y^J` vanish, and internal
/// rows have no interface-input columns.
pub fn check_sacf_structure(m: &StateSpaceModel, n_j: usize) -> Result<()> {
    let tol = 1e-8 * max_abs(&m.b).max(f64::MIN_POSITIVE);
    let n = m.n_states();
    let d_rows = m.b.rows(n_j, n_j);
    let int_cols = m.b.view((2 * n_j, 0), (n - 2 * n_j, n_j));
    let worst = d_rows.amax().max(if int_cols.is_empty() { 0.0 } else { int_cols.amax() });
    if worst > tol {
        return Err(Error::Structure(format!(
            "input matrix zero blocks reach {worst:.3e} (tolerance {tol:.3e})"
        )));
    }
    Ok(())
}

fn zero_sacf_blocks(mut m: StateSpaceModel, n_j: usize) -> StateSpaceModel {
    let n = m.n_states();
    m.b.rows_mut(n_j, n_j).fill(0.0);
    m.b.view_mut((2 * n_j, 0), (n - 2 * n_j, n_j)).fill(0.0);
    m
}

/// `L_T⁺ Ā L_T`, `L_T⁺ B̄`, `C̄ L_T`: the duplicated interface states of a
/// coupled coupling-form model are merged into their `α` copies.
pub fn reduce_minimal(m: &StateSpaceModel, red: &StateReductionMap) -> Result<StateSpaceModel> {
    if red.n_states() != m.n_states() {
        return Err(Error::Dimension(format!(
            "reduction map is for {} states, model has {}",
            red.n_states(),
            m.n_states()
        )));
    }
    for r in 0..red.b_t.nrows() {
        let pick = |v: f64| (0..red.b_t.ncols()).find(|&c| red.b_t[(r, c)] == v);
        let (Some(i), Some(j)) = (pick(1.0), pick(-1.0)) else {
            return Err(Error::Structure(format!("reduction row {r} is malformed")));
        };
        let same = matches!(
            (&m.state_tags[i], &m.state_tags[j]),
            (StateTag::DerivInterfaceOutput(_), StateTag::DerivInterfaceOutput(_))
                | (StateTag::InterfaceOutput(_), StateTag::InterfaceOutput(_))
        );
        if !same {
            return Err(Error::Structure(format!(
                "states {i} and {j} are not matching interface states"
            )));
        }
    }
    let lp = boolean_pinv(&red.l_t)?;
    StateSpaceModel {
        a: &lp * &m.a * &red.l_t,
        b: &lp * &m.b,
        c: &m.c * &red.l_t,
        d: m.d.clone(),
        state_tags: red.kept.iter().map(|&i| m.state_tags[i].clone()).collect(),
        ..m.clone()
    }
    .checked()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{build_model, synth_frf};
    use crate::model::MechanicalSystem;

    fn oscillator() -> StateSpaceModel {
        let e = |x: f64| DMatrix::from_element(1, 1, x);
        let sys = MechanicalSystem::new(e(2.0), e(50.0), e(0.3), vec![DofLabel::new("S", "x")]).unwrap();
        build_model(&sys, OutputKind::Displacement).unwrap()
    }

    fn chain() -> StateSpaceModel {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 1.5]));
        let k = DMatrix::from_row_slice(3, 3, &[300.0, -100.0, 0.0, -100.0, 250.0, -150.0, 0.0, -150.0, 150.0]);
        let v = &k * 0.002;
        let dofs = (0..3).map(|i| DofLabel::new("S", format!("n{i}"))).collect();
        build_model(&MechanicalSystem::new(m, k, v, dofs).unwrap(), OutputKind::Displacement).unwrap()
    }

    fn frf_gap(a: &StateSpaceModel, b: &StateSpaceModel) -> f64 {
        let f = [0.3, 1.1, 2.7, 5.0];
        let b = crate::factory::reorder_io(b, &a.inputs, &a.outputs);
        let (ha, hb) = (synth_frf(a, &f).unwrap(), synth_frf(&b, &f).unwrap());
        ha.data
            .iter()
            .zip(&hb.data)
            .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max) / x.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    #[test]
    fn two_state_forms_have_no_internal_block() {
        let m = oscillator();
        let l = m.inputs.clone();
        for (t, tr) in [
            ucf_transform(&m, &l).unwrap(),
            sacf_transform(&m, &l).unwrap(),
            ncf_transform(&m, &l).unwrap(),
        ] {
            assert_eq!(tr.n_block.nrows(), 0);
            assert_eq!(tr.t, vstack(&[&(&m.c * &m.a), &m.c]));
            assert!(frf_gap(&m, &t) < 1e-12);
        }
        let (_, ncf) = ncf_transform(&m, &l).unwrap();
        assert_eq!(ncf.ncf_residual, Some(0.0));
    }

    #[test]
    fn ucf_output_rows_and_tags() {
        let m = chain();
        let iface = vec![m.inputs[2].clone(), m.inputs[0].clone()];
        let (t, tr) = ucf_transform(&m, &iface).unwrap();
        assert!((tr.t.rows(0, 4) * tr.n_block.transpose()).amax() < 1e-10);
        assert_eq!(t.outputs[0], iface[0]);
        assert_eq!(t.c[(0, 2)], 1.0);
        assert_eq!(t.c[(1, 3)], 1.0);
        assert_eq!(t.state_tags[1], StateTag::DerivInterfaceOutput(iface[1].clone()));
        assert!(frf_gap(&m, &t) < 1e-9);
    }

    #[test]
    fn sacf_zero_blocks() {
        let m = chain();
        let iface = vec![m.inputs[1].clone()];
        let (t, tr) = sacf_transform(&m, &iface).unwrap();
        let bj = t.b.column(0);
        assert!(bj.rows(1, 5).amax() == 0.0);
        assert!((&tr.n_block * m.b.column(1)).amax() < 1e-10);
        assert!(frf_gap(&m, &t) < 1e-9);
    }

    #[test]
    fn rank_deficient_interface_output() {
        let mut m = chain();
        let row = m.c.row(0).into_owned();
        m.c.set_row(1, &row);
        let iface = vec![m.inputs[0].clone(), m.inputs[1].clone()];
        assert!(matches!(
            ucf_transform(&m, &iface),
            Err(Error::InterfaceOutputRankDeficient { rank: 1, expected: 2 })
        ));
    }

    #[test]
    fn reduce_checks_dimensions() {
        let m = chain();
        let red = crate::interface::build_state_reduction(
            &vec![StateTag::Internal; 3],
            &Default::default(),
        )
        .unwrap();
        assert!(matches!(reduce_minimal(&m, &red), Err(Error::Dimension(_))));
    }
}
