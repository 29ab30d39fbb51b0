//! Model construction and model-to-model transformations: physical models from
//! M/K/V matrices, output-kind conversion, negative form, real modal form,
//! FRF synthesis and perturbation, interface-first reordering.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{
    balance_realization, condition_number, dot2, hstack, mul_sum_compensated,
    smallest_right_singular_rows, solve_refined, vstack,
};
use crate::model::{
    DofKind, DofLabel, FrfMatrix, MechanicalSystem, OutputKind, StateSpaceModel, StateTag,
};
use crate::par::{self, Execution};

/// Additive complex Gaussian noise on FRF entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            sigma: 5e-3,
            seed: 0,
        }
    }
}

/// Index maps produced by [`partition_interface_first`]: new input `k` is old
/// input `inputs[k]`, likewise for outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IoPermutation {
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

/// First-order realization of a mechanical system with states `[ẋ; x]`.
pub fn build_model(sys: &MechanicalSystem, kind: OutputKind) -> Result<StateSpaceModel> {
    let v = sys.violations();
    if !v.is_empty() {
        return Err(Error::InvalidModel(v));
    }
    let n = sys.n_dof();
    let minv = sys.mass.clone().try_inverse().ok_or(Error::MassSingular)?;
    if !minv.iter().all(|x| x.is_finite()) {
        return Err(Error::MassSingular);
    }
    let top = hstack(&[&(-&minv * &sys.damping), &(-&minv * &sys.stiffness)]);
    let bottom = hstack(&[&DMatrix::identity(n, n), &DMatrix::zeros(n, n)]);
    let a = vstack(&[&top, &bottom]);
    let b = vstack(&[&minv, &DMatrix::zeros(n, n)]);
    let (c, d) = match kind {
        OutputKind::Acceleration => (top, minv),
        OutputKind::Displacement => (
            hstack(&[&DMatrix::zeros(n, n), &DMatrix::identity(n, n)]),
            DMatrix::zeros(n, n),
        ),
        OutputKind::Velocity => (
            hstack(&[&DMatrix::identity(n, n), &DMatrix::zeros(n, n)]),
            DMatrix::zeros(n, n),
        ),
    };
    StateSpaceModel::new(a, b, c, d, kind, sys.dofs.clone(), sys.dofs.clone())
}

/// Double differentiation of a displacement model: `C·A·A`, `D + C·A·B`.
pub fn to_acceleration(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    m.require_kind(OutputKind::Displacement)?;
    let ca = &m.c * &m.a;
    Ok(StateSpaceModel {
        c: &ca * &m.a,
        d: &m.d + &ca * &m.b,
        output_kind: OutputKind::Acceleration,
        ..m.clone()
    })
}

/// Single differentiation of a displacement model: `C·A`, `C·B`.
pub fn to_velocity(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    m.require_kind(OutputKind::Displacement)?;
    Ok(StateSpaceModel {
        c: &m.c * &m.a,
        d: &m.c * &m.b,
        output_kind: OutputKind::Velocity,
        ..m.clone()
    })
}

/// Acceleration model from any output kind.
pub fn as_acceleration(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    match m.output_kind {
        OutputKind::Acceleration => Ok(m.clone()),
        OutputKind::Displacement => to_acceleration(m),
        OutputKind::Velocity => Ok(StateSpaceModel {
            c: &m.c * &m.a,
            d: &m.d + &m.c * &m.b,
            output_kind: OutputKind::Acceleration,
            ..m.clone()
        }),
    }
}

/// Negates `B` and `D` of an acceleration model. Coupling with the result
/// subtracts the model's dynamics.
pub fn negative_form(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    m.require_kind(OutputKind::Acceleration)?;
    Ok(StateSpaceModel {
        b: -&m.b,
        d: -&m.d,
        ..m.clone()
    })
}

/// Equivalent realization with a real block-diagonal state matrix: one
/// `[[σ, ω], [−ω, σ]]` block per complex pole pair, `1×1` blocks for isolated
/// real poles. Poles that coincide numerically (e.g. the double zero of a
/// rigid-body mode) share one block. Blocks are sorted by pole magnitude.
pub fn to_modal_form(m: &StateSpaceModel) -> Result<StateSpaceModel> {
    let n = m.n_states();
    if n == 0 {
        return Ok(m.clone());
    }
    let eig: Vec<Complex64> = m.a.complex_eigenvalues().iter().copied().collect();
    let clusters = cluster_eigenvalues(&eig);

    let mut bases = Vec::with_capacity(clusters.len());
    for cl in &clusters {
        let mut p = DMatrix::<Complex64>::identity(n, n);
        let ac = m.a.map(|x| Complex64::new(x, 0.0));
        for &i in cl {
            p = &p * (&ac - DMatrix::<Complex64>::identity(n, n) * eig[i]);
        }
        let p_re = p.map(|z| z.re);
        let (rows, _, _) = smallest_right_singular_rows(&p_re, cl.len());
        bases.push(refine_basis(&m.a, &eig, cl, rows.transpose()));
    }
    let v = hstack(&bases.iter().collect::<Vec<_>>());
    let cond = condition_number(&v);
    if !(cond < 1e10) {
        return Err(Error::NonDiagonalizable(format!(
            "eigenvector basis condition number {cond:.3e}"
        )));
    }
    let mut starts = Vec::with_capacity(clusters.len());
    let mut s = 0;
    for cl in &clusters {
        starts.push((s, cl.len()));
        s += cl.len();
    }
    let block_of = |i: usize| starts.iter().position(|&(s, k)| i >= s && i < s + k).unwrap();

    let mut v = v;
    for _ in 0..POLISH_STEPS {
        let t = v.clone().lu().solve(&(&m.a * &v)).expect("basis is well conditioned");
        match sylvester_step(&t, &starts) {
            Some(x) => v = &v * (DMatrix::identity(n, n) + x),
            None => break,
        }
    }
    // products and solves in extended precision: the realization feeds
    // sums whose terms cancel to many digits on weakly coupled entries
    let lu = v.clone().lu();
    let eye = DMatrix::identity(n, n);
    let solve = |rhs: &[(f64, &DMatrix<f64>, &DMatrix<f64>)]| {
        solve_refined(&v, &lu, rhs, 2).expect("basis is well conditioned")
    };
    let mut am = solve(&[(1.0, &m.a, &v)]);
    let mut bm = solve(&[(1.0, &eye, &m.b)]);
    let mut cm = mul_sum_compensated(&[(1.0, &m.c, &v)]);

    // Off-block entries must vanish; anything else means the invariant
    // subspaces were not separated.
    let scale = am.amax().max(f64::MIN_POSITIVE);
    let mut off = 0.0f64;
    for r in 0..n {
        for c in 0..n {
            if block_of(r) != block_of(c) {
                off = off.max(am[(r, c)].abs());
                am[(r, c)] = 0.0;
            }
        }
    }
    if off > 1e-8 * scale {
        return Err(Error::NonDiagonalizable(format!(
            "off-block residual {:.3e} relative",
            off / scale
        )));
    }

    for (ci, cl) in clusters.iter().enumerate() {
        let (s, k) = starts[ci];
        if k == 2 && eig[cl[0]].im.abs() > 0.0 && eig[cl[0]] != eig[cl[1]] {
            canonicalize_pair(&mut am, &mut bm, &mut cm, s);
        }
        // split each block's residue evenly between B and C; a power of two
        // keeps the scaling exact
        let nb = bm.rows(s, k).norm();
        let nc = cm.columns(s, k).norm();
        if nb > 0.0 && nc > 0.0 {
            let f = 2f64.powi(((nb / nc).log2() / 2.0).round() as i32);
            bm.rows_mut(s, k).scale_mut(1.0 / f);
            cm.columns_mut(s, k).scale_mut(f);
        }
    }

    StateSpaceModel {
        a: am,
        b: bm,
        c: cm,
        state_tags: vec![StateTag::Internal; n],
        ..m.clone()
    }
    .checked()
}

const POLISH_STEPS: usize = 3;

/// One Newton step towards block-diagonal `T`: solves
/// `T_ii X_ij − X_ij T_jj = −T_ij` for every off-diagonal block, so that
/// `(I + X)⁻¹ T (I + X)` has off-blocks of second order.
fn sylvester_step(t: &DMatrix<f64>, starts: &[(usize, usize)]) -> Option<DMatrix<f64>> {
    let n = t.nrows();
    let mut x = DMatrix::zeros(n, n);
    for &(si, ki) in starts {
        for &(sj, kj) in starts {
            if si == sj {
                continue;
            }
            let tii = t.view((si, si), (ki, ki));
            let tjj = t.view((sj, sj), (kj, kj));
            // column-major vec: (I ⊗ T_ii − T_jjᵀ ⊗ I) vec(X) = −vec(T_ij)
            let dim = ki * kj;
            let mut k = DMatrix::zeros(dim, dim);
            for c in 0..kj {
                for r in 0..ki {
                    let row = c * ki + r;
                    for r2 in 0..ki {
                        k[(row, c * ki + r2)] += tii[(r, r2)];
                    }
                    for c2 in 0..kj {
                        k[(row, c2 * ki + r)] -= tjj[(c2, c)];
                    }
                }
            }
            let rhs = DMatrix::from_fn(dim, 1, |q, _| -t[(si + q % ki, sj + q / ki)]);
            let sol = k.lu().solve(&rhs)?;
            for q in 0..dim {
                x[(si + q % ki, sj + q / ki)] = sol[q];
            }
        }
    }
    Some(x)
}

/// Inverse subspace iteration on `A − μI`, μ a slightly offset cluster
/// centre. The polynomial nullspace used as a start loses accuracy as
/// `‖A‖^k`; a few sweeps on the single shifted factor recover it.
fn refine_basis(a: &DMatrix<f64>, eig: &[Complex64], cl: &[usize], start: DMatrix<f64>) -> DMatrix<f64> {
    const SWEEPS: usize = 6;
    let n = a.nrows();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let centre = cl.iter().map(|&i| eig[i]).sum::<Complex64>() / cl.len() as f64;
    // distance to the rest of the spectrum; a shift at 1e-4 of it converges
    // quickly while keeping the shifted factor well conditioned
    let gap = (0..eig.len())
        .filter(|i| !cl.contains(i))
        .map(|i| (eig[i] - centre).norm().min((eig[i] - centre.conj()).norm()))
        .fold(rho, f64::min);
    let delta = 1e-4 * gap;
    // near-defective real poles (a rigid-body double zero) come out of the
    // eigensolver as a tiny conjugate pair; those stay a real cluster
    let upper: Vec<usize> = cl.iter().copied().filter(|&i| eig[i].im > 1e-6 * rho).collect();
    let real_cluster = upper.is_empty() || 2 * upper.len() != cl.len();
    let ac = a.map(|x| Complex64::new(x, 0.0));
    let (mu, mut x) = if real_cluster {
        let mu = cl.iter().map(|&i| eig[i].re).sum::<f64>() / cl.len() as f64;
        (Complex64::new(mu + delta, 0.0), start.map(|x| Complex64::new(x, 0.0)))
    } else {
        let mu = upper.iter().map(|&i| eig[i]).sum::<Complex64>() / upper.len() as f64;
        let k = upper.len();
        // fixed generic mix of the real basis; any combination with a
        // component along every upper eigenvector converges
        let mix = DMatrix::from_fn(2 * k, k, |r, c| {
            Complex64::new(1.0 / (1.0 + r as f64 + c as f64), 0.37 * (r as f64 - c as f64) + 0.21)
        });
        (mu + Complex64::new(delta, delta), start.map(|x| Complex64::new(x, 0.0)) * mix)
    };
    let lu = (ac - DMatrix::<Complex64>::identity(n, n) * mu).lu();
    for _ in 0..SWEEPS {
        match lu.solve(&x) {
            Some(y) if y.iter().all(|z| z.is_finite()) => x = y.qr().q(),
            _ => return start,
        }
    }
    if real_cluster {
        x.map(|z| z.re)
    } else {
        let re = x.map(|z| z.re);
        let im = x.map(|z| z.im);
        hstack(&[&re, &im])
    }
}

/// Groups eigenvalues that coincide to within a relative tolerance, closes
/// each group under conjugation, and orders groups by magnitude.
fn cluster_eigenvalues(eig: &[Complex64]) -> Vec<Vec<usize>> {
    let n = eig.len();
    let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-6 * rho.max(f64::MIN_POSITIVE);
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let union = |p: &mut Vec<usize>, i: usize, j: usize| {
        let (ri, rj) = (find(p, i), find(p, j));
        if ri != rj {
            p[ri.max(rj)] = ri.min(rj);
        }
    };
    for i in 0..n {
        for j in i + 1..n {
            if (eig[i] - eig[j]).norm() < tol {
                union(&mut parent, i, j);
            }
        }
        // conjugate partner
        let target = eig[i].conj();
        if let Some(j) = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| (eig[a] - target).norm().total_cmp(&(eig[b] - target).norm()))
        {
            if eig[i].im.abs() >= tol / 2.0 && (eig[j] - target).norm() < tol.max(1e-3 * eig[i].im.abs()) {
                union(&mut parent, i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_of[r] == usize::MAX {
            root_of[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_of[r]].push(i);
    }
    // conjugate pair first member has positive imaginary part
    for g in &mut groups {
        g.sort_by(|&a, &b| eig[b].im.total_cmp(&eig[a].im));
    }
    groups.sort_by(|a, b| {
        let ka = (eig[a[0]].norm(), eig[a[0]].im.abs());
        let kb = (eig[b[0]].norm(), eig[b[0]].im.abs());
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    groups
}

/// Brings the 2×2 diagonal block at `s` to `[[σ, ω], [−ω, σ]]` with ω > 0.
fn canonicalize_pair(
    am: &mut DMatrix<f64>,
    bm: &mut DMatrix<f64>,
    cm: &mut DMatrix<f64>,
    s: usize,
) {
    let (a, b, c, d) = (am[(s, s)], am[(s, s + 1)], am[(s + 1, s)], am[(s + 1, s + 1)]);
    let sigma = 0.5 * (a + d);
    let disc = (a - d) * (a - d) / 4.0 + b * c;
    if disc >= 0.0 {
        return;
    }
    let omega = (-disc).sqrt();
    // columns p, q with M p = σp − ωq, M q = ωp + σq
    let t = if b.abs() >= c.abs() {
        DMatrix::from_row_slice(2, 2, &[b, 0.0, sigma - a, omega])
    } else {
        DMatrix::from_row_slice(2, 2, &[sigma - d, omega, c, 0.0])
    };
    let t = &t / t.norm();
    let Some(tinv) = t.clone().try_inverse() else { return };
    let rows = tinv * bm.rows(s, 2);
    bm.rows_mut(s, 2).copy_from(&rows);
    let cols = cm.columns(s, 2) * &t;
    cm.columns_mut(s, 2).copy_from(&cols);
    am[(s, s)] = sigma;
    am[(s, s + 1)] = omega;
    am[(s + 1, s)] = -omega;
    am[(s + 1, s + 1)] = sigma;
}

/// `H(ω) = C (iωI − A)⁻¹ B + D` on the given grid (Hz).
pub fn synth_frf(m: &StateSpaceModel, freqs_hz: &[f64]) -> Result<FrfMatrix> {
    synth_frf_with(m, freqs_hz, Execution::default())
}

pub fn synth_frf_with(m: &StateSpaceModel, freqs_hz: &[f64], exec: Execution) -> Result<FrfMatrix> {
    let n = m.n_states();
    let (ar, br, cr) = balance_realization(&m.a, &m.b, &m.c);
    let dr = &m.d;
    let a = ar.map(|x| Complex64::new(x, 0.0));
    let b = br.map(|x| Complex64::new(x, 0.0));
    let data = par::try_map(exec, freqs_hz, |&f| {
        let w = 2.0 * std::f64::consts::PI * f;
        let res = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w) - &a;
        let lu = res.lu();
        let x = lu
            .solve(&b)
            .filter(|x| x.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
            .ok_or(Error::SingularResolvent { freq_hz: f })?;
        let x = refine_resolvent(&ar, &br, w, &lu, x);
        Ok::<_, Error>(output_compensated(&cr, dr, &x))
    })?;
    FrfMatrix::new(
        freqs_hz.to_vec(),
        data,
        m.output_kind.response_kind(),
        m.inputs.clone(),
        m.outputs.clone(),
    )
}

/// One refinement sweep of `X ≈ (iωI − A)⁻¹B` with the residual
/// `B − (iωI − A)X` accumulated in extended precision.
fn refine_resolvent(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    w: f64,
    lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    x: DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let n = a.nrows();
    let r = DMatrix::from_fn(n, b.ncols(), |i, j| {
        let re = dot2(
            std::iter::once((b[(i, j)], 1.0))
                .chain(std::iter::once((w, x[(i, j)].im)))
                .chain((0..n).map(|k| (a[(i, k)], x[(k, j)].re))),
        );
        let im = dot2(
            std::iter::once((-w, x[(i, j)].re)).chain((0..n).map(|k| (a[(i, k)], x[(k, j)].im))),
        );
        Complex64::new(re, im)
    });
    match lu.solve(&r) {
        Some(dx) => x + dx,
        None => x,
    }
}

/// `C X + D` with every entry accumulated in extended precision.
fn output_compensated(
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
    x: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let n = c.ncols();
    DMatrix::from_fn(c.nrows(), x.ncols(), |i, j| {
        let part = |f: fn(&Complex64) -> f64, dd: f64| {
            dot2(std::iter::once((dd, 1.0)).chain((0..n).map(|k| (c[(i, k)], f(&x[(k, j)])))))
        };
        Complex64::new(part(|z| z.re, d[(i, j)]), part(|z| z.im, 0.0))
    })
}

/// Adds independent `N(0, σ²)` noise to the real and imaginary part of every
/// entry. Deterministic for a given seed.
pub fn perturb_frf(f: &FrfMatrix, spec: NoiseSpec) -> Result<FrfMatrix> {
    if !(spec.sigma >= 0.0) {
        return Err(Error::Precondition("noise sigma must be non-negative".into()));
    }
    if spec.sigma == 0.0 {
        return Ok(f.clone());
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|e| Error::Precondition(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = f.clone();
    for h in &mut out.data {
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                let gamma = normal.sample(&mut rng);
                let theta = normal.sample(&mut rng);
                h[(i, j)] += Complex64::new(gamma, theta);
            }
        }
    }
    Ok(out)
}

/// Reorders inputs and outputs so the interface DOFs come first, in the order
/// given, followed by the remaining DOFs in their original order. Interface
/// labels are marked [`DofKind::Interface`].
pub fn partition_interface_first(
    m: &StateSpaceModel,
    interface: &[DofLabel],
) -> Result<(StateSpaceModel, IoPermutation)> {
    for (i, l) in interface.iter().enumerate() {
        if interface[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
        if m.input_index(l).is_none() && m.output_index(l).is_none() {
            return Err(Error::UnknownLabel(l.to_string()));
        }
    }
    let order = |list: &[DofLabel]| -> Vec<usize> {
        let mut idx: Vec<usize> = interface
            .iter()
            .filter_map(|l| list.iter().position(|x| x == l))
            .collect();
        idx.extend((0..list.len()).filter(|i| !interface.contains(&list[*i])));
        idx
    };
    let perm = IoPermutation {
        inputs: order(&m.inputs),
        outputs: order(&m.outputs),
    };
    let mut out = m.permute_io(&perm.inputs, &perm.outputs);
    for l in out.inputs.iter_mut().chain(out.outputs.iter_mut()) {
        if interface.contains(l) {
            l.kind = DofKind::Interface;
        }
    }
    Ok((out, perm))
}

/// Reorders a model's inputs and outputs to follow the given label lists.
/// Labels missing from the lists keep their relative order at the end.
pub fn reorder_io(
    m: &StateSpaceModel,
    inputs: &[DofLabel],
    outputs: &[DofLabel],
) -> StateSpaceModel {
    let order = |list: &[DofLabel], reference: &[DofLabel]| -> Vec<usize> {
        let mut idx: Vec<usize> = (0..list.len()).collect();
        idx.sort_by_key(|&i| reference.iter().position(|r| r == &list[i]).unwrap_or(usize::MAX));
        idx
    };
    m.permute_io(&order(&m.inputs, inputs), &order(&m.outputs, outputs))
}

/// Evenly spaced grid `fmin, fmin + df, …` up to and including `fmax`.
pub fn frequency_grid(fmin: f64, fmax: f64, df: f64) -> Result<Vec<f64>> {
    if !(df > 0.0) || !(fmax >= fmin) || !fmin.is_finite() || !fmax.is_finite() {
        return Err(Error::Precondition(format!(
            "invalid frequency grid {fmin}..{fmax} step {df}"
        )));
    }
    let count = ((fmax - fmin) / df + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| fmin + i as f64 * df).collect())
}
