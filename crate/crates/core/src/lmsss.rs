//! Lagrange-multiplier state-space coupling and decoupling.
//!
//! Models are stacked block-diagonally and the interface forces are
//! eliminated with a single factorization of the `n_J × n_J` interface
//! operator.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::factory::{as_acceleration, negative_form};
use crate::forms::reduce_minimal;
use crate::interface::{
    boolean_pinv, build_mapping, build_state_reduction, InterfaceMap, InterfacePairing,
};
use crate::linalg::{balance_realization, block_diag, hstack, max_abs, FactoredOperator};
use crate::model::{
    DofLabel, FrfMatrix, OutputKind, ResponseKind, StateSpaceModel, StateTag,
};
use crate::par::{self, Execution};

/// Prefix given to the component id of a model subtracted by [`decouple`],
/// so its labels stay distinct from the assembly's.
pub const NEGATIVE_PREFIX: &str = "neg-";

/// Models to be joined and the pairing that joins them.
#[derive(Clone, Debug)]
pub struct CouplingProblem {
    pub models: Vec<StateSpaceModel>,
    pub pairing: InterfacePairing,
    /// Mapping over the stacked input labels.
    pub input_map: InterfaceMap,
    /// Mapping over the stacked output labels.
    pub output_map: InterfaceMap,
}

impl CouplingProblem {
    pub fn new(models: Vec<StateSpaceModel>, pairing: InterfacePairing) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Precondition("no models to couple".into()));
        }
        for m in &models {
            for p in &pairing.pairs {
                for l in [&p.a, &p.b] {
                    let has_in = m.input_index(l).is_some();
                    let has_out = m.output_index(l).is_some();
                    if has_in != has_out {
                        return Err(Error::Precondition(format!(
                            "interface DOF {l} is not collocated (input and output)"
                        )));
                    }
                }
            }
        }
        let inputs: Vec<DofLabel> = models.iter().flat_map(|m| m.inputs.clone()).collect();
        let outputs: Vec<DofLabel> = models.iter().flat_map(|m| m.outputs.clone()).collect();
        let input_map = build_mapping(&inputs, &pairing)?;
        let output_map = build_mapping(&outputs, &pairing)?;
        Ok(Self {
            models,
            pairing,
            input_map,
            output_map,
        })
    }

    pub fn n_pairs(&self) -> usize {
        self.pairing.len()
    }

    /// Same problem with the sign convention of the given pair rows reversed.
    pub fn with_flipped_rows(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        for &r in rows {
            out.input_map = out.input_map.flip_row(r);
            out.output_map = out.output_map.flip_row(r);
        }
        out
    }

    fn stacked(&self, models: &[StateSpaceModel]) -> Stacked {
        let refs = |f: fn(&StateSpaceModel) -> &DMatrix<f64>| -> DMatrix<f64> {
            block_diag(&models.iter().map(f).collect::<Vec<_>>())
        };
        Stacked {
            a: refs(|m| &m.a),
            b: refs(|m| &m.b),
            c: refs(|m| &m.c),
            d: refs(|m| &m.d),
            tags: models.iter().flat_map(|m| m.state_tags.clone()).collect(),
        }
    }

    fn assemble(
        &self,
        tags: Vec<StateTag>,
        [a, b, c, d]: [DMatrix<f64>; 4],
        kind: OutputKind,
    ) -> Result<StateSpaceModel> {
        StateSpaceModel {
            a,
            b,
            c,
            d,
            output_kind: kind,
            inputs: self.input_map.column_labels.clone(),
            outputs: self.output_map.column_labels.clone(),
            state_tags: tags,
        }
        .checked()
    }
}

struct Stacked {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    tags: Vec<StateTag>,
}

/// Coupled acceleration model over the full (duplicated) DOF set.
/// Displacement and velocity inputs are differentiated first.
pub fn couple_accel(p: &CouplingProblem) -> Result<StateSpaceModel> {
    let models = p
        .models
        .iter()
        .map(as_acceleration)
        .collect::<Result<Vec<_>>>()?;
    let Stacked { a, b, c, d, tags } = p.stacked(&models);
    if p.n_pairs() == 0 {
        return p.assemble(tags, [a, b, c, d], OutputKind::Acceleration);
    }
    let by = &p.output_map.b_m;
    let bu_t = p.input_map.b_m.transpose();
    let op = FactoredOperator::new(&(by * &d * &bu_t), "interface feed-through")?;
    let x = op.solve(&hstack(&[&(by * &c), &(by * &d)]));
    let n = a.nrows();
    let (xc, xd) = (x.columns(0, n), x.columns(n, d.ncols()));
    let b_bu = &b * &bu_t;
    let d_bu = &d * &bu_t;
    let a_bar = &a - &b_bu * xc;
    let b_bar = &b - &b_bu * xd;
    let c_bar = &c - &d_bu * xc;
    let d_bar = &d - &d_bu * xd;
    p.assemble(tags, [a_bar, b_bar, c_bar, d_bar], OutputKind::Acceleration)
}

/// Products shared by the displacement and velocity variants.
struct DispCoupling {
    a_bar: DMatrix<f64>,
    b_bar: DMatrix<f64>,
    stacked: Stacked,
    cab: DMatrix<f64>,
    bu_t: DMatrix<f64>,
    x_c: DMatrix<f64>,
    x_ca: DMatrix<f64>,
    x_cb: DMatrix<f64>,
    x_cab: DMatrix<f64>,
}

fn disp_coupling(p: &CouplingProblem) -> Result<DispCoupling> {
    for m in &p.models {
        m.require_kind(OutputKind::Displacement)?;
        if max_abs(&m.d) != 0.0 {
            return Err(Error::Precondition(
                "displacement coupling needs a zero feed-through matrix".into(),
            ));
        }
    }
    let s = p.stacked(&p.models);
    let (a, b, c) = (&s.a, &s.b, &s.c);
    let n = a.nrows();
    let ca = c * a;
    let cab = &ca * b;
    let cb = c * b;
    let bu_t = p.input_map.b_m.transpose();
    if p.n_pairs() == 0 {
        let ni = b.ncols();
        let no = c.nrows();
        return Ok(DispCoupling {
            a_bar: a.clone(),
            b_bar: b.clone(),
            x_c: DMatrix::zeros(0, n),
            x_ca: DMatrix::zeros(0, n),
            x_cb: DMatrix::zeros(0, ni),
            x_cab: DMatrix::zeros(0, ni),
            cab: DMatrix::zeros(no, ni),
            bu_t,
            stacked: s,
        });
    }
    let by = &p.output_map.b_m;
    let op = FactoredOperator::new(&(by * &cab * &bu_t), "interface feed-through")?;
    let ni = b.ncols();
    // one solve for every right-hand side
    let x = op.solve(&hstack(&[
        &(by * &ca * a),
        &(by * &cab),
        &(by * c),
        &(by * &ca),
        &(by * &cb),
    ]));
    let mut at = 0;
    let mut take = |w: usize| {
        let out = x.columns(at, w).into_owned();
        at += w;
        out
    };
    let x_caa = take(n);
    let x_cab = take(ni);
    let x_c = take(n);
    let x_ca = take(n);
    let x_cb = take(ni);
    let b_bu = b * &bu_t;
    Ok(DispCoupling {
        a_bar: a - &b_bu * &x_caa,
        b_bar: b - &b_bu * &x_cab,
        x_c,
        x_ca,
        x_cb,
        x_cab,
        cab,
        bu_t,
        stacked: s,
    })
}

/// Coupled displacement model; its feed-through is zero by construction.
pub fn couple_disp(p: &CouplingProblem) -> Result<StateSpaceModel> {
    let k = disp_coupling(p)?;
    let c_bar = &k.stacked.c - &k.cab * &k.bu_t * &k.x_c;
    let d = DMatrix::zeros(c_bar.nrows(), k.b_bar.ncols());
    p.assemble(k.stacked.tags, [k.a_bar, k.b_bar, c_bar, d], OutputKind::Displacement)
}

/// The displacement feed-through as the closed-form expression
/// `CAB − CAB·B_Mᵀ·X − C̄ĀB̄`, which should vanish numerically.
pub fn disp_feedthrough_closed_form(p: &CouplingProblem) -> Result<DMatrix<f64>> {
    let k = disp_coupling(p)?;
    let c_bar = &k.stacked.c - &k.cab * &k.bu_t * &k.x_c;
    let corr = if p.n_pairs() == 0 {
        DMatrix::zeros(k.cab.nrows(), k.cab.ncols())
    } else {
        &k.cab * &k.bu_t * &k.x_cab
    };
    Ok(&k.cab - corr - &c_bar * &k.a_bar * &k.b_bar)
}

/// Coupled velocity model.
pub fn couple_vel(p: &CouplingProblem) -> Result<StateSpaceModel> {
    let k = disp_coupling(p)?;
    let ca = &k.stacked.c * &k.stacked.a;
    let cb = &k.stacked.c * &k.stacked.b;
    let (c_bar, d_bar) = if p.n_pairs() == 0 {
        (ca, cb)
    } else {
        let cab_bu = &k.cab * &k.bu_t;
        (&ca - &cab_bu * &k.x_ca, &cb - &cab_bu * &k.x_cb)
    };
    p.assemble(k.stacked.tags, [k.a_bar, k.b_bar, c_bar, d_bar], OutputKind::Velocity)
}

/// Drops duplicated interface inputs and outputs: `B(Lᵀ)⁺`, `L⁺C`,
/// `L⁺D(Lᵀ)⁺`. Kept labels are the `a` side of each pair.
pub fn retain_unique_dofs(
    m: &StateSpaceModel,
    input_map: &InterfaceMap,
    output_map: &InterfaceMap,
) -> Result<StateSpaceModel> {
    if m.inputs != input_map.column_labels || m.outputs != output_map.column_labels {
        return Err(Error::Dimension(
            "model labels do not match the interface map".into(),
        ));
    }
    let lin_t_pinv = boolean_pinv(&input_map.l)?.transpose();
    let lout_pinv = boolean_pinv(&output_map.l)?;
    StateSpaceModel {
        b: &m.b * &lin_t_pinv,
        c: &lout_pinv * &m.c,
        d: &lout_pinv * &m.d * &lin_t_pinv,
        inputs: input_map.unique_labels.clone(),
        outputs: output_map.unique_labels.clone(),
        ..m.clone()
    }
    .checked()
}

fn negative_labels(l: &DofLabel) -> DofLabel {
    DofLabel {
        component: format!("{NEGATIVE_PREFIX}{}", l.component),
        ..l.clone()
    }
}

/// Subtracts `removed` from `assembly` by coupling the assembly with the
/// negative form of `removed`, then keeps the listed DOFs (inputs and
/// outputs, in the given order). Pairs list assembly DOFs as `a` and
/// `removed` DOFs as `b`.
pub fn decouple(
    assembly: &StateSpaceModel,
    removed: &StateSpaceModel,
    pairing: &InterfacePairing,
    keep: &[DofLabel],
) -> Result<StateSpaceModel> {
    let (p, coupled) = decouple_full(assembly, removed, pairing)?;
    let unique = retain_unique_dofs(&coupled, &p.input_map, &p.output_map)?;
    unique.select_io(keep, keep)
}

/// As [`decouple`] for coupling-form inputs, with the duplicated interface
/// states removed before the DOFs are selected.
pub fn decouple_minimal(
    assembly: &StateSpaceModel,
    removed: &StateSpaceModel,
    pairing: &InterfacePairing,
    keep: &[DofLabel],
) -> Result<StateSpaceModel> {
    let (p, coupled) = decouple_full(assembly, removed, pairing)?;
    let red = build_state_reduction(&coupled.state_tags, &p.pairing)?;
    let reduced = reduce_minimal(&coupled, &red)?;
    let unique = retain_unique_dofs(&reduced, &p.input_map, &p.output_map)?;
    unique.select_io(keep, keep)
}

fn decouple_full(
    assembly: &StateSpaceModel,
    removed: &StateSpaceModel,
    pairing: &InterfacePairing,
) -> Result<(CouplingProblem, StateSpaceModel)> {
    let neg = negative_form(&as_acceleration(removed)?)?.map_labels(negative_labels);
    let pairing = InterfacePairing {
        pairs: pairing
            .pairs
            .iter()
            .map(|p| crate::interface::Pair {
                a: p.a.clone(),
                b: negative_labels(&p.b),
            })
            .collect(),
    };
    let p = CouplingProblem::new(vec![as_acceleration(assembly)?, neg], pairing)?;
    let coupled = couple_accel(&p)?;
    Ok((p, coupled))
}

/// Interface forces `λ(ω)` per unit external input:
/// `λ = S⁻¹ B_M (C_D (iωI − Ā)⁻¹ B̄ + D_D)` with `S = B_M D_D B_Mᵀ`.
/// Output rows are labelled with the `a` DOF of each pair.
pub fn interface_forces_frf(p: &CouplingProblem, freqs_hz: &[f64]) -> Result<FrfMatrix> {
    interface_forces_frf_with(p, freqs_hz, Execution::default())
}

pub fn interface_forces_frf_with(
    p: &CouplingProblem,
    freqs_hz: &[f64],
    exec: Execution,
) -> Result<FrfMatrix> {
    let coupled = couple_accel(p)?;
    let models = p
        .models
        .iter()
        .map(as_acceleration)
        .collect::<Result<Vec<_>>>()?;
    let s = p.stacked(&models);
    let by = &p.output_map.b_m;
    let op = FactoredOperator::new(&(by * &s.d * p.input_map.b_m.transpose()), "interface feed-through")?;
    let left = op.solve(&hstack(&[&(by * &s.c), &(by * &s.d)]));
    let n = coupled.n_states();
    let cplx = |m: DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let (a, b, lc) = balance_realization(&coupled.a, &coupled.b, &left.columns(0, n).into_owned());
    let (a, b, lc) = (cplx(a), cplx(b), cplx(lc));
    let ld = cplx(left.columns(n, s.d.ncols()).into_owned());
    let data = par::try_map(exec, freqs_hz, |&f| {
        let w = 2.0 * std::f64::consts::PI * f;
        let res = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w) - &a;
        let x = res
            .lu()
            .solve(&b)
            .ok_or(Error::SingularResolvent { freq_hz: f })?;
        Ok::<_, Error>(&lc * x + &ld)
    })?;
    FrfMatrix::new(
        freqs_hz.to_vec(),
        data,
        ResponseKind::InterfaceForce,
        coupled.inputs.clone(),
        p.pairing.pairs.iter().map(|q| q.a.clone()).collect(),
    )
}

/// Summary of the pole locations of a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilitySummary {
    pub max_real_part: f64,
    pub n_unstable: usize,
}

/// Poles with real part above `tol·ρ(A)` count as unstable.
pub fn stability_summary(m: &StateSpaceModel, tol: f64) -> StabilitySummary {
    let eig = m.a.complex_eigenvalues();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    StabilitySummary {
        max_real_part: eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        n_unstable: eig.iter().filter(|z| z.re > tol * rho).count(),
    }
}
