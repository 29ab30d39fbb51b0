//! The two-component lumped example, its brute-force FRF oracle, and the
//! interface-solve timing benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factory::build_model;
use crate::interface::InterfacePairing;
use crate::linalg::{count_linear_solves, FactoredOperator};
use crate::lmsss::{couple_accel, CouplingProblem};
use crate::model::{DofLabel, FrfMatrix, MechanicalSystem, OutputKind, ResponseKind};
use crate::par::{self, Execution};
use crate::reference::{classical_couple, ClassicalCouplingMatrix};

/// Mass of a DOF and the damper/spring of the element named after it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofParams {
    pub m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub id: String,
    pub dofs: Vec<String>,
}

/// Spring/damper element between two DOFs (or a DOF and `"ground"`) using
/// the `c` and `k` of the DOF named in `param`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: String,
    pub to: String,
    pub param: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleConfig {
    pub components: Vec<ComponentSpec>,
    pub parameters: BTreeMap<String, DofParams>,
    pub connections: Vec<Connection>,
    /// `(dof of the first component, dof of the second)`.
    pub interface_pairs: Vec<(String, String)>,
}

pub const GROUND: &str = "ground";

impl Default for ExampleConfig {
    fn default() -> Self {
        let p = |m: f64, c: f64, k: f64| DofParams { m, c: Some(c), k: Some(k) };
        let parameters = BTreeMap::from([
            ("a1".to_string(), p(10.0, 30.0, 1.5e5)),
            ("a2".to_string(), p(3.0, 50.0, 5e5)),
            ("a3".to_string(), p(3.0, 50.0, 4.5e5)),
            ("p1".to_string(), p(5.0, 50.0, 1e5)),
            ("p2".to_string(), p(7.0, 50.0, 1.5e5)),
            ("p3".to_string(), p(10.0, 10.0, 5e3)),
            ("p4".to_string(), DofParams { m: 1.0, c: None, k: None }),
        ]);
        let conn = |from: &str, to: &str, param: &str| Connection {
            from: from.into(),
            to: to.into(),
            param: param.into(),
        };
        Self {
            components: vec![
                ComponentSpec { id: "A".into(), dofs: vec!["a1".into(), "a2".into(), "a3".into()] },
                ComponentSpec {
                    id: "B".into(),
                    dofs: vec!["p1".into(), "p2".into(), "p3".into(), "p4".into()],
                },
            ],
            parameters,
            connections: vec![
                conn(GROUND, "a1", "a1"),
                conn("a1", "a2", "a2"),
                conn("a1", "a3", "a3"),
                conn("p1", "p3", "p1"),
                conn("p2", "p3", "p2"),
                conn("p3", "p4", "p3"),
            ],
            interface_pairs: vec![("a2".into(), "p1".into()), ("a3".into(), "p2".into())],
        }
    }
}

impl ExampleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidConfig(s));
        if self.components.len() != 2 {
            return bad(format!("expected 2 components, found {}", self.components.len()));
        }
        let mut owner = BTreeMap::new();
        for (ci, comp) in self.components.iter().enumerate() {
            for d in &comp.dofs {
                if owner.insert(d.as_str(), ci).is_some() {
                    return bad(format!("DOF {d} listed twice"));
                }
                match self.parameters.get(d) {
                    Some(p) if p.m > 0.0 && p.m.is_finite() => {}
                    Some(_) => return bad(format!("mass of {d} must be positive")),
                    None => return bad(format!("no parameters for DOF {d}")),
                }
            }
        }
        for c in &self.connections {
            let side = |d: &str| -> Result<Option<usize>> {
                if d == GROUND {
                    Ok(None)
                } else {
                    owner.get(d).copied().map(Some).ok_or_else(|| {
                        Error::InvalidConfig(format!("connection to unknown DOF {d}"))
                    })
                }
            };
            let (f, t) = (side(&c.from)?, side(&c.to)?);
            if f.is_none() && t.is_none() {
                return bad("connection between ground and ground".into());
            }
            if let (Some(f), Some(t)) = (f, t) {
                if f != t {
                    return bad(format!("connection {}–{} spans components", c.from, c.to));
                }
            }
            match self.parameters.get(&c.param) {
                Some(DofParams { c: Some(cv), k: Some(kv), .. }) if *cv >= 0.0 && *kv >= 0.0 => {}
                _ => return bad(format!("element {} needs non-negative c and k", c.param)),
            }
        }
        for (a, b) in &self.interface_pairs {
            if owner.get(a.as_str()) != Some(&0) || owner.get(b.as_str()) != Some(&1) {
                return bad(format!("disconnected interface pair {a}–{b}"));
            }
        }
        Ok(())
    }
}

/// Systems produced by [`build_example`].
#[derive(Clone, Debug)]
pub struct ExampleSystems {
    pub a: MechanicalSystem,
    pub b: MechanicalSystem,
    /// DOFs of the first component, then unpaired DOFs of the second.
    pub assembled: MechanicalSystem,
    pub pairing: InterfacePairing,
}

fn stamp(k: &mut DMatrix<f64>, i: Option<usize>, j: Option<usize>, v: f64) {
    if let Some(i) = i {
        k[(i, i)] += v;
    }
    if let Some(j) = j {
        k[(j, j)] += v;
    }
    if let (Some(i), Some(j)) = (i, j) {
        k[(i, j)] -= v;
        k[(j, i)] -= v;
    }
}

/// Lumped M/K/V matrices for a DOF set, given where each DOF lands.
fn assemble(
    cfg: &ExampleConfig,
    n: usize,
    index: &BTreeMap<&str, usize>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut m = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    let mut v = DMatrix::zeros(n, n);
    for (d, &i) in index {
        m[(i, i)] += cfg.parameters[*d].m;
    }
    for c in &cfg.connections {
        let (Some(i), Some(j)) = (
            index.get(c.from.as_str()).copied().map(Some).or((c.from == GROUND).then_some(None)),
            index.get(c.to.as_str()).copied().map(Some).or((c.to == GROUND).then_some(None)),
        ) else {
            continue;
        };
        let p = cfg.parameters[&c.param];
        stamp(&mut k, i, j, p.k.unwrap_or(0.0));
        stamp(&mut v, i, j, p.c.unwrap_or(0.0));
    }
    (m, k, v)
}

pub fn build_example(cfg: &ExampleConfig) -> Result<ExampleSystems> {
    cfg.validate()?;
    let comp = |ci: usize| -> Result<MechanicalSystem> {
        let spec = &cfg.components[ci];
        let index: BTreeMap<&str, usize> =
            spec.dofs.iter().enumerate().map(|(i, d)| (d.as_str(), i)).collect();
        let (m, k, v) = assemble(cfg, spec.dofs.len(), &index);
        let dofs = spec.dofs.iter().map(|d| DofLabel::new(spec.id.as_str(), d.as_str())).collect();
        MechanicalSystem::new(m, k, v, dofs)
    };
    let (ca, cb) = (&cfg.components[0], &cfg.components[1]);
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dofs = Vec::new();
    for d in &ca.dofs {
        index.insert(d, dofs.len());
        dofs.push(DofLabel::new(ca.id.as_str(), d.as_str()));
    }
    for d in &cb.dofs {
        match cfg.interface_pairs.iter().find(|(_, b)| b == d) {
            Some((a, _)) => {
                index.insert(d, index[a.as_str()]);
            }
            None => {
                index.insert(d, dofs.len());
                dofs.push(DofLabel::new(cb.id.as_str(), d.as_str()));
            }
        }
    }
    let (m, k, v) = assemble(cfg, dofs.len(), &index);
    let pairing = InterfacePairing::new(cfg.interface_pairs.iter().map(|(a, b)| {
        (DofLabel::new(ca.id.as_str(), a.as_str()), DofLabel::new(cb.id.as_str(), b.as_str()))
    }));
    Ok(ExampleSystems {
        a: comp(0)?,
        b: comp(1)?,
        assembled: MechanicalSystem::new(m, k, v, dofs)?,
        pairing,
    })
}

/// Accelerance by direct inversion: `H = −ω²(−ω²M + iωV + K)⁻¹`.
pub fn oracle_frf(sys: &MechanicalSystem, freqs_hz: &[f64]) -> Result<FrfMatrix> {
    oracle_frf_with(sys, freqs_hz, Execution::default())
}

pub fn oracle_frf_with(sys: &MechanicalSystem, freqs_hz: &[f64], exec: Execution) -> Result<FrfMatrix> {
    let data = par::try_map(exec, freqs_hz, |&f| {
        let w = 2.0 * std::f64::consts::PI * f;
        let z = DMatrix::from_fn(sys.n_dof(), sys.n_dof(), |r, c| {
            Complex64::new(sys.stiffness[(r, c)] - w * w * sys.mass[(r, c)], w * sys.damping[(r, c)])
        });
        let inv = z.try_inverse().filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
        inv.map(|x| x * Complex64::new(-w * w, 0.0)).ok_or(Error::SingularAtFrequency {
            freq_hz: f,
            what: "dynamic stiffness matrix".into(),
        })
    })?;
    FrfMatrix::new(
        freqs_hz.to_vec(),
        data,
        ResponseKind::Accelerance,
        sys.dofs.clone(),
        sys.dofs.clone(),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub n_j: usize,
    pub trials: usize,
    pub lmsss_solves: usize,
    pub classical_solves: usize,
    pub lmsss_mean_ns: f64,
    pub lmsss_median_ns: f64,
    pub classical_mean_ns: f64,
    pub classical_median_ns: f64,
    /// Classical over LM-SSS, by median.
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub entries: Vec<BenchEntry>,
    /// Rank correlation between `n_J` and the ratio; absent below 2 entries.
    pub spearman_rho: Option<f64>,
}

/// Two chains of `n_j` grounded masses, paired DOF by DOF.
pub fn synthetic_pair_problem(n_j: usize) -> Result<(Vec<crate::model::StateSpaceModel>, InterfacePairing)> {
    let chain = |comp: &str, scale: f64| -> Result<MechanicalSystem> {
        let n = n_j;
        let m = DMatrix::from_fn(n, n, |r, c| if r == c { scale * (1.0 + 0.1 * r as f64) } else { 0.0 });
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            stamp(&mut k, Some(i), None, 1e3 * scale);
            if i + 1 < n {
                stamp(&mut k, Some(i), Some(i + 1), 5e2);
            }
        }
        let v = &k * 1e-3;
        let dofs = (0..n).map(|i| DofLabel::new(comp, format!("n{i}"))).collect();
        MechanicalSystem::new(m, k, v, dofs)
    };
    let a = build_model(&chain("A", 1.0)?, OutputKind::Acceleration)?;
    let b = build_model(&chain("B", 2.0)?, OutputKind::Acceleration)?;
    let pairing = InterfacePairing::new(a.inputs.iter().cloned().zip(b.inputs.iter().cloned()));
    Ok((vec![a, b], pairing))
}

fn mean_median(mut xs: Vec<f64>) -> (f64, f64) {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    let median = if xs.len().is_multiple_of(2) { 0.5 * (xs[mid - 1] + xs[mid]) } else { xs[mid] };
    (mean, median)
}

fn time_trials(trials: usize, mut f: impl FnMut()) -> Vec<f64> {
    for _ in 0..(trials / 10).max(10) {
        f();
    }
    (0..trials)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_nanos() as f64
        })
        .collect()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

/// Times the interface factorizations of both methods on a synthetic
/// `n_J`-pair problem: one `n_J × n_J` LU for LM-SSS against a `2n_J × 2n_J`
/// and an `n_J × n_J` LU for the classical method, each followed by a solve
/// for the identity. Solve counts are confirmed by running both couplings
/// first.
pub fn bench_inversions(njs: &[usize], trials: usize) -> Result<BenchReport> {
    if trials < 100 {
        return Err(Error::InvalidConfig("bench needs at least 100 trials".into()));
    }
    let mut entries = Vec::with_capacity(njs.len());
    for &n_j in njs {
        if n_j == 0 {
            return Err(Error::InvalidConfig("n_J must be positive".into()));
        }
        let (models, pairing) = synthetic_pair_problem(n_j)?;
        let problem = CouplingProblem::new(models.clone(), pairing.clone())?;
        let (r, lmsss_solves) = count_linear_solves(|| couple_accel(&problem));
        r?;
        let (r, classical_solves) = count_linear_solves(|| classical_couple(&models, &pairing));
        r?;

        let d = crate::linalg::block_diag(&[&models[0].d, &models[1].d]);
        let s_lm = &problem.output_map.b_m * &d * problem.input_map.b_m.transpose();
        let tsj = ClassicalCouplingMatrix::from_pairing(&pairing)?.t;
        let eye = |n: usize| DMatrix::<f64>::identity(n, n);
        let lm = time_trials(trials, || {
            let x = s_lm.clone().lu().solve(&eye(n_j));
            std::hint::black_box(x);
        });
        let cl = time_trials(trials, || {
            let djj_inv = d.clone().lu().solve(&eye(2 * n_j)).expect("nonsingular");
            let s = &tsj * &djj_inv * tsj.transpose();
            let x = s.lu().solve(&eye(n_j));
            std::hint::black_box(x);
        });
        // keeps the operator checks honest for the timed matrices
        FactoredOperator::new(&s_lm, "interface feed-through")?;
        let (lm_mean, lm_median) = mean_median(lm);
        let (cl_mean, cl_median) = mean_median(cl);
        entries.push(BenchEntry {
            n_j,
            trials,
            lmsss_solves,
            classical_solves,
            lmsss_mean_ns: lm_mean,
            lmsss_median_ns: lm_median,
            classical_mean_ns: cl_mean,
            classical_median_ns: cl_median,
            ratio: cl_median / lm_median.max(f64::MIN_POSITIVE),
        });
    }
    let x: Vec<f64> = entries.iter().map(|e| e.n_j as f64).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
    Ok(BenchReport {
        spearman_rho: spearman(&x, &y),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_masses() {
        let ex = build_example(&ExampleConfig::default()).unwrap();
        assert_eq!(ex.a.mass, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![10.0, 3.0, 3.0])));
        assert_eq!(
            ex.b.mass,
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 7.0, 10.0, 1.0]))
        );
        assert_eq!(ex.pairing.len(), 2);
    }

    #[test]
    fn hand_assembly() {
        let ex = build_example(&ExampleConfig::default()).unwrap();
        let diag: Vec<f64> = ex.assembled.mass.diagonal().iter().copied().collect();
        assert_eq!(diag, vec![10.0, 8.0, 10.0, 10.0, 1.0]);
        // a1: ground 1.5e5, to a2 5e5, to a3 4.5e5
        let k = &ex.assembled.stiffness;
        assert_eq!(k[(0, 0)], 1.5e5 + 5e5 + 4.5e5);
        // merged a2/p1: 5e5 + 1e5; coupled to p3 through p1's spring
        assert_eq!(k[(1, 1)], 6e5);
        assert_eq!(k[(1, 3)], -1e5);
        assert_eq!(k[(3, 3)], 1e5 + 1.5e5 + 5e3);
        assert_eq!(ex.assembled.damping[(4, 4)], 10.0);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ExampleConfig::default();
        cfg.interface_pairs.push(("a1".into(), "zz".into()));
        assert!(build_example(&cfg).is_err());
        let mut cfg = ExampleConfig::default();
        cfg.parameters.get_mut("a1").unwrap().m = 0.0;
        assert!(build_example(&cfg).is_err());
    }

    #[test]
    fn oracle_peak_and_reciprocity() {
        let k = (2.0 * std::f64::consts::PI * 10.0f64).powi(2);
        let e = |x: f64| DMatrix::from_element(1, 1, x);
        let sys = MechanicalSystem::new(e(1.0), e(k), e(0.0), vec![DofLabel::new("S", "x")]).unwrap();
        let h = oracle_frf(&sys, &[9.0, 9.9, 10.1, 11.0]).unwrap();
        let mags: Vec<f64> = h.data.iter().map(|x| x[(0, 0)].norm()).collect();
        assert!(mags[1] > mags[0] && mags[2] > mags[3]);
        let ex = build_example(&ExampleConfig::default()).unwrap();
        let h = oracle_frf(&ex.assembled, &[20.0, 133.0]).unwrap();
        for x in &h.data {
            assert!((x - x.transpose()).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12 * x.camax());
        }
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 9.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0], &[1.0]), None);
    }

    #[test]
    fn bench_small() {
        let r = bench_inversions(&[1], 100).unwrap();
        let e = &r.entries[0];
        assert_eq!((e.lmsss_solves, e.classical_solves), (1, 2));
        assert!(e.lmsss_mean_ns > 0.0 && e.classical_mean_ns > 0.0);
        assert!(bench_inversions(&[1], 10).is_err());
    }
}
