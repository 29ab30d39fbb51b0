//! Independent coupling methods used to cross-check LM-SSS: frequency-based
//! dual assembly (LM-FBS), classical state-space substructuring with a
//! Boolean coupling matrix, and the two-model coupling of coupling-form
//! models whose internal states are not driven by interface inputs.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factory::as_acceleration;
use crate::forms::check_sacf_structure;
use crate::interface::{boolean_pinv, build_mapping, InterfaceMap, InterfacePairing, Pair};
use crate::linalg::{block_diag, hstack, max_abs, select_cols, select_rows, vstack, FactoredOperator, MAX_CONDITION};
use crate::lmsss::NEGATIVE_PREFIX;
use crate::model::{DofLabel, FrfMatrix, OutputKind, ResponseKind, StateSpaceModel, StateTag};
use crate::par::{self, Execution};

/// FRF sweep in which individual frequencies may have failed.
#[derive(Clone, Debug)]
pub struct PartialFrf {
    pub freqs_hz: Vec<f64>,
    pub data: Vec<std::result::Result<DMatrix<Complex64>, String>>,
    pub response_kind: ResponseKind,
    pub inputs: Vec<DofLabel>,
    pub outputs: Vec<DofLabel>,
}

impl PartialFrf {
    pub fn failures(&self) -> Vec<(f64, &str)> {
        self.freqs_hz
            .iter()
            .zip(&self.data)
            .filter_map(|(f, r)| r.as_ref().err().map(|e| (*f, e.as_str())))
            .collect()
    }

    /// The complete FRF, or the first failure.
    pub fn into_complete(self) -> Result<FrfMatrix> {
        let mut data = Vec::with_capacity(self.data.len());
        for (f, r) in self.freqs_hz.iter().zip(self.data) {
            data.push(r.map_err(|what| Error::SingularAtFrequency { freq_hz: *f, what })?);
        }
        FrfMatrix::new(self.freqs_hz, data, self.response_kind, self.inputs, self.outputs)
    }
}

/// Block-diagonal FRF slices with the stacked input and output labels.
type Stacked = (Vec<DMatrix<Complex64>>, Vec<DofLabel>, Vec<DofLabel>);

fn stack_frfs(frfs: &[&FrfMatrix]) -> Result<Stacked> {
    let first = frfs.first().ok_or_else(|| Error::Precondition("no FRFs to couple".into()))?;
    for f in frfs {
        if f.freqs_hz != first.freqs_hz {
            return Err(Error::GridMismatch);
        }
        if f.response_kind != first.response_kind {
            return Err(Error::Precondition("FRFs of different response kinds".into()));
        }
    }
    let inputs = frfs.iter().flat_map(|f| f.inputs.clone()).collect();
    let outputs = frfs.iter().flat_map(|f| f.outputs.clone()).collect();
    let data = (0..first.n_freqs())
        .map(|k| {
            let rows: usize = frfs.iter().map(|f| f.outputs.len()).sum();
            let cols: usize = frfs.iter().map(|f| f.inputs.len()).sum();
            let mut h = DMatrix::zeros(rows, cols);
            let (mut r, mut c) = (0, 0);
            for f in frfs {
                h.view_mut((r, c), f.data[k].shape()).copy_from(&f.data[k]);
                r += f.outputs.len();
                c += f.inputs.len();
            }
            h
        })
        .collect();
    Ok((data, inputs, outputs))
}

fn complex_condition(m: &DMatrix<Complex64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().svd(false, false).singular_values;
    let (max, min) = (s.max(), s.min());
    if min == 0.0 { f64::INFINITY } else { max / min }
}

/// Dual assembly per frequency, `Y_c = Y − Y B_uᵀ (B_y Y B_uᵀ)⁻¹ B_y Y`,
/// over the full DOF set. Frequencies where the interface operator is
/// singular are marked as failed instead of aborting the sweep.
pub fn lmfbs_couple_lenient(
    frfs: &[&FrfMatrix],
    pairing: &InterfacePairing,
    exec: Execution,
) -> Result<PartialFrf> {
    let (data, inputs, outputs) = stack_frfs(frfs)?;
    let in_map = build_mapping(&inputs, pairing)?;
    let out_map = build_mapping(&outputs, pairing)?;
    let cplx = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let by = cplx(&out_map.b_m);
    let bu_t = cplx(&in_map.b_m.transpose());
    let n_pairs = pairing.len();
    let out = par::map(exec, &data, |y| {
        if n_pairs == 0 {
            return Ok(y.clone());
        }
        let y_bu = y * &bu_t;
        let s = &by * &y_bu;
        let cond = complex_condition(&s);
        if !(cond <= MAX_CONDITION) {
            return Err(format!("interface operator condition number {cond:.3e}"));
        }
        let x = s
            .lu()
            .solve(&(&by * y))
            .ok_or_else(|| "interface operator singular".to_string())?;
        Ok(y - y_bu * x)
    });
    Ok(PartialFrf {
        freqs_hz: frfs[0].freqs_hz.clone(),
        data: out,
        response_kind: frfs[0].response_kind,
        inputs,
        outputs,
    })
}

/// Strict dual assembly: the first failing frequency is an error.
pub fn lmfbs_couple(frfs: &[&FrfMatrix], pairing: &InterfacePairing) -> Result<FrfMatrix> {
    lmfbs_couple_lenient(frfs, pairing, Execution::default())?.into_complete()
}

/// Keeps one DOF per pair: `L⁺ Y (Lᵀ)⁺`.
pub fn retain_unique_frf(f: &FrfMatrix, pairing: &InterfacePairing) -> Result<FrfMatrix> {
    let in_map = build_mapping(&f.inputs, pairing)?;
    let out_map = build_mapping(&f.outputs, pairing)?;
    retain_with_maps(f, &in_map, &out_map)
}

/// `(L_out⁺, (L_inᵀ)⁺)` as complex matrices.
fn retain_ops(in_map: &InterfaceMap, out_map: &InterfaceMap) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let cplx = |m: DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    Ok((cplx(boolean_pinv(&out_map.l)?), cplx(boolean_pinv(&in_map.l)?.transpose())))
}

fn retain_with_maps(f: &FrfMatrix, in_map: &InterfaceMap, out_map: &InterfaceMap) -> Result<FrfMatrix> {
    let (lo, li) = retain_ops(in_map, out_map)?;
    FrfMatrix::new(
        f.freqs_hz.clone(),
        f.data.iter().map(|h| &lo * h * &li).collect(),
        f.response_kind,
        in_map.unique_labels.clone(),
        out_map.unique_labels.clone(),
    )
}

/// [`retain_unique_frf`] on the frequencies that succeeded.
pub fn retain_unique_partial(f: &PartialFrf, pairing: &InterfacePairing) -> Result<PartialFrf> {
    let in_map = build_mapping(&f.inputs, pairing)?;
    let out_map = build_mapping(&f.outputs, pairing)?;
    let (lo, li) = retain_ops(&in_map, &out_map)?;
    Ok(PartialFrf {
        freqs_hz: f.freqs_hz.clone(),
        data: f.data.iter().map(|r| r.as_ref().map(|h| &lo * h * &li).map_err(Clone::clone)).collect(),
        response_kind: f.response_kind,
        inputs: in_map.unique_labels,
        outputs: out_map.unique_labels,
    })
}

fn negative_label(l: &DofLabel) -> DofLabel {
    DofLabel {
        component: format!("{NEGATIVE_PREFIX}{}", l.component),
        ..l.clone()
    }
}

/// Frequency-domain decoupling: the removed FRF enters with a minus sign.
/// Pairs list assembly DOFs as `a`, removed DOFs as `b`; the result holds
/// the `keep` DOFs.
pub fn lmfbs_decouple_lenient(
    assembly: &FrfMatrix,
    removed: &FrfMatrix,
    pairing: &InterfacePairing,
    keep: &[DofLabel],
    exec: Execution,
) -> Result<PartialFrf> {
    let neg = removed.scaled(Complex64::new(-1.0, 0.0)).map_labels(negative_label);
    let pairing = InterfacePairing {
        pairs: pairing
            .pairs
            .iter()
            .map(|p| Pair { a: p.a.clone(), b: negative_label(&p.b) })
            .collect(),
    };
    let full = lmfbs_couple_lenient(&[assembly, &neg], &pairing, exec)?;
    let in_map = build_mapping(&full.inputs, &pairing)?;
    let out_map = build_mapping(&full.outputs, &pairing)?;
    let pick = |list: &[DofLabel], l: &DofLabel| {
        list.iter().position(|x| x == l).ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let ii = keep.iter().map(|l| pick(&in_map.unique_labels, l)).collect::<Result<Vec<_>>>()?;
    let oo = keep.iter().map(|l| pick(&out_map.unique_labels, l)).collect::<Result<Vec<_>>>()?;
    let cplx = |m: DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let lo = cplx(select_rows(&boolean_pinv(&out_map.l)?, &oo));
    let li = cplx(select_cols(&boolean_pinv(&in_map.l)?.transpose(), &ii));
    Ok(PartialFrf {
        data: full.data.into_iter().map(|r| r.map(|h| &lo * h * &li)).collect(),
        inputs: keep.to_vec(),
        outputs: keep.to_vec(),
        ..full
    })
}

pub fn lmfbs_decouple(
    assembly: &FrfMatrix,
    removed: &FrfMatrix,
    pairing: &InterfacePairing,
    keep: &[DofLabel],
) -> Result<FrfMatrix> {
    lmfbs_decouple_lenient(assembly, removed, pairing, keep, Execution::default())?.into_complete()
}

/// Boolean coupling matrix over the stacked interface DOFs
/// `[a sides; b sides]`: row `k` sums the two DOFs of pair `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalCouplingMatrix {
    pub t: DMatrix<f64>,
    pub interface: Vec<DofLabel>,
}

impl ClassicalCouplingMatrix {
    pub fn from_pairing(pairing: &InterfacePairing) -> Result<Self> {
        pairing.check()?;
        let n = pairing.len();
        if n == 0 {
            return Err(Error::Precondition("classical coupling needs at least one pair".into()));
        }
        let mut t = DMatrix::zeros(n, 2 * n);
        for k in 0..n {
            t[(k, k)] = 1.0;
            t[(k, n + k)] = 1.0;
        }
        Ok(Self { t, interface: pairing.labels() })
    }
}

/// Classical coupling of acceleration models with a Boolean coupling matrix.
/// Produces the unique DOF set directly, ordered `[internal; interface]`
/// with the `a` label of each pair, and needs two factorizations.
pub fn classical_couple(models: &[StateSpaceModel], pairing: &InterfacePairing) -> Result<StateSpaceModel> {
    let tsj = ClassicalCouplingMatrix::from_pairing(pairing)?;
    let models = models.iter().map(as_acceleration).collect::<Result<Vec<_>>>()?;
    let cat = |f: fn(&StateSpaceModel) -> &DMatrix<f64>| block_diag(&models.iter().map(f).collect::<Vec<_>>());
    let (a, b, c, d) = (cat(|m| &m.a), cat(|m| &m.b), cat(|m| &m.c), cat(|m| &m.d));
    let inputs: Vec<DofLabel> = models.iter().flat_map(|m| m.inputs.clone()).collect();
    let outputs: Vec<DofLabel> = models.iter().flat_map(|m| m.outputs.clone()).collect();
    let locate = |list: &[DofLabel], l: &DofLabel| {
        list.iter().position(|x| x == l).ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let j_in = tsj.interface.iter().map(|l| locate(&inputs, l)).collect::<Result<Vec<_>>>()?;
    let j_out = tsj.interface.iter().map(|l| locate(&outputs, l)).collect::<Result<Vec<_>>>()?;
    let i_in: Vec<usize> = (0..inputs.len()).filter(|i| !j_in.contains(i)).collect();
    let i_out: Vec<usize> = (0..outputs.len()).filter(|i| !j_out.contains(i)).collect();

    let bj = select_cols(&b, &j_in);
    let bi = select_cols(&b, &i_in);
    let cj = select_rows(&c, &j_out);
    let ci = select_rows(&c, &i_out);
    let djj = select_cols(&select_rows(&d, &j_out), &j_in);
    let dji = select_cols(&select_rows(&d, &j_out), &i_in);
    let dij = select_cols(&select_rows(&d, &i_out), &j_in);
    let dii = select_cols(&select_rows(&d, &i_out), &i_in);

    let t = &tsj.t;
    let djj_op = FactoredOperator::new(&djj, "interface feed-through block")?;
    let djj_inv = djj_op.solve(&DMatrix::identity(djj.nrows(), djj.ncols()));
    let s = t * &djj_inv * t.transpose();
    let s_op = FactoredOperator::new(&s, "classical interface operator")?;
    let s_inv = s_op.solve(&DMatrix::identity(s.nrows(), s.ncols()));
    let q = &djj_inv * t.transpose() * &s_inv * t * &djj_inv - &djj_inv;
    let g = &djj_inv * t.transpose() * &s_inv;
    let h = &s_inv * t * &djj_inv;

    let a_bar = &a + &bj * &q * &cj;
    let b_bar = hstack(&[&(&bi + &bj * &q * &dji), &(&bj * &g)]);
    let c_bar = vstack(&[&(&ci + &dij * &q * &cj), &(&h * &cj)]);
    let d_bar = vstack(&[
        &hstack(&[&(&dii + &dij * &q * &dji), &(&dij * &g)]),
        &hstack(&[&(&h * &dji), &s_inv]),
    ]);
    let n_pairs = pairing.len();
    let j_labels: Vec<DofLabel> = tsj.interface[..n_pairs].to_vec();
    StateSpaceModel::new(
        a_bar,
        b_bar,
        c_bar,
        d_bar,
        OutputKind::Acceleration,
        i_in.iter().map(|&i| inputs[i].clone()).chain(j_labels.clone()).collect(),
        i_out.iter().map(|&i| outputs[i].clone()).chain(j_labels).collect(),
    )
}

/// Interface DOFs of a coupling-form model, in state order.
fn interface_labels(m: &StateSpaceModel) -> Vec<DofLabel> {
    m.state_tags
        .iter()
        .take_while(|t| matches!(t, StateTag::DerivInterfaceOutput(_)))
        .filter_map(|t| t.dof().cloned())
        .collect()
}

/// Reorders the interface states and interface inputs/outputs of a
/// coupling-form model to follow `order`.
fn align_interface(m: &StateSpaceModel, order: &[DofLabel]) -> Result<StateSpaceModel> {
    let current = interface_labels(m);
    let n_j = current.len();
    if order.len() != n_j {
        return Err(Error::Structure(format!(
            "model has {n_j} interface states, pairing has {}",
            order.len()
        )));
    }
    let p: Vec<usize> = order
        .iter()
        .map(|l| current.iter().position(|x| x == l).ok_or_else(|| Error::UnknownLabel(l.to_string())))
        .collect::<Result<_>>()?;
    let n = m.n_states();
    let states: Vec<usize> = p
        .iter()
        .copied()
        .chain(p.iter().map(|&i| n_j + i))
        .chain(2 * n_j..n)
        .collect();
    let io = |len: usize| -> Vec<usize> { p.iter().copied().chain(n_j..len).collect() };
    let io_in = io(m.n_inputs());
    let io_out = io(m.n_outputs());
    if (0..n_j).any(|k| m.inputs[k] != current[k] || m.outputs[k] != current[k]) {
        return Err(Error::Structure("interface inputs and outputs must come first".into()));
    }
    let permuted = m.permute_io(&io_in, &io_out);
    StateSpaceModel {
        a: select_cols(&select_rows(&m.a, &states), &states),
        b: select_rows(&permuted.b, &states),
        c: select_cols(&permuted.c, &states),
        state_tags: states.iter().map(|&i| m.state_tags[i].clone()).collect(),
        ..permuted
    }
    .checked()
}

/// Couples two displacement models in the input-decoupled coupling form.
/// States of the result are `[ẏ^J; y^J; x_α^I; x_β^I]`, inputs and outputs
/// `[J; α internal; β internal]`, with the `α` labels for `J`.
pub fn sjovall_couple(ma: &StateSpaceModel, mb: &StateSpaceModel, pairing: &InterfacePairing) -> Result<StateSpaceModel> {
    pairing.check()?;
    for m in [ma, mb] {
        m.require_kind(OutputKind::Displacement)?;
        if max_abs(&m.d) != 0.0 {
            return Err(Error::Precondition("models must have zero feed-through".into()));
        }
    }
    let a_side: Vec<DofLabel> = pairing.pairs.iter().map(|p| p.a.clone()).collect();
    let b_side: Vec<DofLabel> = pairing.pairs.iter().map(|p| p.b.clone()).collect();
    let ma = align_interface(ma, &a_side)?;
    let mb = align_interface(mb, &b_side)?;
    let nj = a_side.len();
    check_sacf_structure(&ma, nj)?;
    check_sacf_structure(&mb, nj)?;
    let (na, nb) = (ma.n_states() - 2 * nj, mb.n_states() - 2 * nj);
    let (ia, ib) = (ma.n_inputs() - nj, mb.n_inputs() - nj);
    let (oa, ob) = (ma.n_outputs() - nj, mb.n_outputs() - nj);

    let blk = |m: &DMatrix<f64>, r: usize, c: usize, h: usize, w: usize| m.view((r, c), (h, w)).into_owned();
    let bvv_a = blk(&ma.b, 0, 0, nj, nj);
    let bvv_b = blk(&mb.b, 0, 0, nj, nj);
    let gamma_op = FactoredOperator::new(&(&bvv_a + &bvv_b), "interface input sum")?;
    let gamma = gamma_op.solve(&DMatrix::identity(nj, nj));
    let ag = &bvv_a * &gamma; // B_α Γ
    let bg = &bvv_b * &gamma; // B_β Γ

    let n = 2 * nj + na + nb;
    let mut a = DMatrix::zeros(n, n);
    let av_a = blk(&ma.a, 0, 0, nj, 2 * nj);
    let av_b = blk(&mb.a, 0, 0, nj, 2 * nj);
    a.view_mut((0, 0), (nj, 2 * nj)).copy_from(&(&ag * &av_b + &bg * &av_a));
    a.view_mut((0, 2 * nj), (nj, na)).copy_from(&(&bg * blk(&ma.a, 0, 2 * nj, nj, na)));
    a.view_mut((0, 2 * nj + na), (nj, nb)).copy_from(&(&ag * blk(&mb.a, 0, 2 * nj, nj, nb)));
    for k in 0..nj {
        a[(nj + k, k)] = 1.0;
    }
    a.view_mut((2 * nj, 0), (na, 2 * nj)).copy_from(&blk(&ma.a, 2 * nj, 0, na, 2 * nj));
    a.view_mut((2 * nj, 2 * nj), (na, na)).copy_from(&blk(&ma.a, 2 * nj, 2 * nj, na, na));
    a.view_mut((2 * nj + na, 0), (nb, 2 * nj)).copy_from(&blk(&mb.a, 2 * nj, 0, nb, 2 * nj));
    a.view_mut((2 * nj + na, 2 * nj + na), (nb, nb)).copy_from(&blk(&mb.a, 2 * nj, 2 * nj, nb, nb));

    let ni = nj + ia + ib;
    let mut b = DMatrix::zeros(n, ni);
    b.view_mut((0, 0), (nj, nj)).copy_from(&(&ag * &bvv_b));
    b.view_mut((0, nj), (nj, ia)).copy_from(&(&bg * blk(&ma.b, 0, nj, nj, ia)));
    b.view_mut((0, nj + ia), (nj, ib)).copy_from(&(&ag * blk(&mb.b, 0, nj, nj, ib)));
    b.view_mut((2 * nj, nj), (na, ia)).copy_from(&blk(&ma.b, 2 * nj, nj, na, ia));
    b.view_mut((2 * nj + na, nj + ia), (nb, ib)).copy_from(&blk(&mb.b, 2 * nj, nj, nb, ib));

    let no = nj + oa + ob;
    let mut c = DMatrix::zeros(no, n);
    for k in 0..nj {
        c[(k, nj + k)] = 1.0;
    }
    c.view_mut((nj, 0), (oa, 2 * nj)).copy_from(&blk(&ma.c, nj, 0, oa, 2 * nj));
    c.view_mut((nj, 2 * nj), (oa, na)).copy_from(&blk(&ma.c, nj, 2 * nj, oa, na));
    c.view_mut((nj + oa, 0), (ob, 2 * nj)).copy_from(&blk(&mb.c, nj, 0, ob, 2 * nj));
    c.view_mut((nj + oa, 2 * nj + na), (ob, nb)).copy_from(&blk(&mb.c, nj, 2 * nj, ob, nb));

    let mut tags: Vec<StateTag> = a_side.iter().cloned().map(StateTag::DerivInterfaceOutput).collect();
    tags.extend(a_side.iter().cloned().map(StateTag::InterfaceOutput));
    tags.resize(n, StateTag::Internal);
    StateSpaceModel {
        a,
        b,
        c,
        d: DMatrix::zeros(no, ni),
        output_kind: OutputKind::Displacement,
        inputs: a_side.iter().cloned().chain(ma.inputs[nj..].iter().cloned()).chain(mb.inputs[nj..].iter().cloned()).collect(),
        outputs: a_side.iter().cloned().chain(ma.outputs[nj..].iter().cloned()).chain(mb.outputs[nj..].iter().cloned()).collect(),
        state_tags: tags,
    }
    .checked()
}

/// `Z(ω) = −ω² H(ω)⁻¹` from an accelerance FRF. Inputs of `Z` are the
/// outputs of `H` and vice versa.
pub fn dynamic_stiffness(f: &FrfMatrix) -> Result<FrfMatrix> {
    if f.response_kind != ResponseKind::Accelerance {
        return Err(Error::Precondition("dynamic stiffness needs an accelerance FRF".into()));
    }
    if f.inputs.len() != f.outputs.len() {
        return Err(Error::Dimension("dynamic stiffness needs a square FRF".into()));
    }
    let data = f
        .freqs_hz
        .iter()
        .zip(&f.data)
        .map(|(&hz, h)| {
            let w = 2.0 * std::f64::consts::PI * hz;
            let cond = complex_condition(h);
            let inv = if cond <= MAX_CONDITION { h.clone().try_inverse() } else { None };
            inv.map(|x| x * Complex64::new(-w * w, 0.0)).ok_or(Error::SingularAtFrequency {
                freq_hz: hz,
                what: "accelerance matrix".into(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    FrfMatrix::new(
        f.freqs_hz.clone(),
        data,
        ResponseKind::DynamicStiffness,
        f.outputs.clone(),
        f.inputs.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factory::{build_model, synth_frf};
    use crate::linalg::count_linear_solves;
    use crate::model::MechanicalSystem;

    fn oscillator(comp: &str, m: f64, k: f64, c: f64, kind: OutputKind) -> StateSpaceModel {
        let e = |x: f64| DMatrix::from_element(1, 1, x);
        let sys = MechanicalSystem::new(e(m), e(k), e(c), vec![DofLabel::new(comp, "x")]).unwrap();
        build_model(&sys, kind).unwrap()
    }

    fn rel_gap(a: &FrfMatrix, b: &FrfMatrix) -> f64 {
        a.data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max) / x.iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    const F: [f64; 4] = [0.5, 1.5, 2.0, 4.0];

    #[test]
    fn lmfbs_two_oscillators() {
        let a = oscillator("A", 2.0, 300.0, 0.4, OutputKind::Acceleration);
        let b = oscillator("B", 3.0, 500.0, 0.6, OutputKind::Acceleration);
        let pairing = InterfacePairing::new([(a.inputs[0].clone(), b.inputs[0].clone())]);
        let ya = synth_frf(&a, &F).unwrap();
        let yb = synth_frf(&b, &F).unwrap();
        let c = retain_unique_frf(&lmfbs_couple(&[&ya, &yb], &pairing).unwrap(), &pairing).unwrap();
        let merged = synth_frf(&oscillator("A", 5.0, 800.0, 1.0, OutputKind::Acceleration), &F).unwrap();
        assert!(rel_gap(&merged, &c) < 1e-10);
        let back = lmfbs_decouple(&merged, &ya, &InterfacePairing::new([(a.inputs[0].clone(), a.inputs[0].clone())]), &a.inputs).unwrap();
        assert!(rel_gap(&yb, &back) < 1e-10);
    }

    #[test]
    fn lmfbs_zero_pairs_and_grid_mismatch() {
        let a = synth_frf(&oscillator("A", 1.0, 10.0, 0.1, OutputKind::Acceleration), &F).unwrap();
        let same = lmfbs_couple(&[&a], &InterfacePairing::default()).unwrap();
        assert_eq!(same, a);
        let b = synth_frf(&oscillator("B", 1.0, 10.0, 0.1, OutputKind::Acceleration), &[1.0]).unwrap();
        assert!(matches!(lmfbs_couple(&[&a, &b], &InterfacePairing::default()), Err(Error::GridMismatch)));
    }

    #[test]
    fn classical_two_oscillators() {
        let a = oscillator("A", 2.0, 300.0, 0.4, OutputKind::Acceleration);
        let b = oscillator("B", 3.0, 500.0, 0.6, OutputKind::Acceleration);
        let pairing = InterfacePairing::new([(a.inputs[0].clone(), b.inputs[0].clone())]);
        let (c, solves) = count_linear_solves(|| classical_couple(&[a, b], &pairing).unwrap());
        assert_eq!(solves, 2);
        let merged = synth_frf(&oscillator("A", 5.0, 800.0, 1.0, OutputKind::Acceleration), &F).unwrap();
        assert!(rel_gap(&merged, &synth_frf(&c, &F).unwrap()) < 1e-10);
        assert!(classical_couple(&[], &InterfacePairing::default()).is_err());
    }

    #[test]
    fn sjovall_two_oscillators() {
        let a = oscillator("A", 2.0, 300.0, 0.4, OutputKind::Displacement);
        let b = oscillator("B", 3.0, 500.0, 0.6, OutputKind::Displacement);
        let (ta, _) = crate::forms::sacf_transform(&a, &a.inputs).unwrap();
        let (tb, _) = crate::forms::sacf_transform(&b, &b.inputs).unwrap();
        let pairing = InterfacePairing::new([(a.inputs[0].clone(), b.inputs[0].clone())]);
        let c = sjovall_couple(&ta, &tb, &pairing).unwrap();
        assert_eq!(c.n_states(), 2);
        let merged = synth_frf(&oscillator("A", 5.0, 800.0, 1.0, OutputKind::Displacement), &F).unwrap();
        assert!(rel_gap(&merged, &synth_frf(&c, &F).unwrap()) < 1e-9);
        assert!(sjovall_couple(&a, &b, &pairing).is_err());
    }

    #[test]
    fn stiffness_of_oscillator() {
        let (m, k, c) = (2.0, 800.0, 1.5);
        let h = synth_frf(&oscillator("A", m, k, c, OutputKind::Acceleration), &F).unwrap();
        let z = dynamic_stiffness(&h).unwrap();
        for (f, zk) in F.iter().zip(&z.data) {
            let w = 2.0 * std::f64::consts::PI * f;
            let want = Complex64::new(k - w * w * m, w * c);
            assert!((zk[(0, 0)] - want).norm() / want.norm() < 1e-12);
        }
        assert!(dynamic_stiffness(&z).is_err());
    }
}
