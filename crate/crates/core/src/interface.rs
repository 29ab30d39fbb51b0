//! Signed Boolean mapping matrices, their Boolean localization nullspaces,
//! and the state-level maps used to drop duplicated interface states.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DofLabel, StateTag};

/// Two DOFs forced to move together. `a` gets `+1` in `B_M` and is the DOF
/// kept when duplicates are removed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub a: DofLabel,
    pub b: DofLabel,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterfacePairing {
    pub pairs: Vec<Pair>,
}

impl InterfacePairing {
    pub fn new(pairs: impl IntoIterator<Item = (DofLabel, DofLabel)>) -> Self {
        Self {
            pairs: pairs.into_iter().map(|(a, b)| Pair { a, b }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Every label mentioned, `a` sides first.
    pub fn labels(&self) -> Vec<DofLabel> {
        self.pairs
            .iter()
            .map(|p| p.a.clone())
            .chain(self.pairs.iter().map(|p| p.b.clone()))
            .collect()
    }

    pub fn contains(&self, l: &DofLabel) -> bool {
        self.pairs.iter().any(|p| &p.a == l || &p.b == l)
    }

    /// Rejects a DOF listed in more than one pair (or paired with itself).
    pub fn check(&self) -> Result<()> {
        let mut seen: HashMap<&DofLabel, ()> = HashMap::new();
        for p in &self.pairs {
            for l in [&p.a, &p.b] {
                if seen.insert(l, ()).is_some() {
                    return Err(Error::DuplicatePairing(l.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn map_labels(&self, f: impl Fn(&DofLabel) -> DofLabel) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .map(|p| Pair { a: f(&p.a), b: f(&p.b) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceMap {
    /// `n_pairs × N`, one `+1`/`−1` per row.
    pub b_m: DMatrix<f64>,
    /// `N × (N − n_pairs)` Boolean nullspace basis of `b_m`.
    pub l: DMatrix<f64>,
    pub column_labels: Vec<DofLabel>,
    /// Label of each `l` column (the kept DOF).
    pub unique_labels: Vec<DofLabel>,
    /// Column index of the `a` and `b` DOF of every pair.
    pub pair_columns: Vec<(usize, usize)>,
}

impl InterfaceMap {
    pub fn n_pairs(&self) -> usize {
        self.b_m.nrows()
    }

    /// Same map with the sign of row `r` of `B_M` reversed.
    pub fn flip_row(&self, r: usize) -> Self {
        let mut out = self.clone();
        out.b_m.row_mut(r).neg_mut();
        out
    }
}

pub fn build_mapping(labels: &[DofLabel], pairing: &InterfacePairing) -> Result<InterfaceMap> {
    pairing.check()?;
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(l.to_string()));
        }
    }
    let find = |l: &DofLabel| {
        labels
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    let n = labels.len();
    let mut b_m = DMatrix::zeros(pairing.len(), n);
    let mut pair_columns = Vec::with_capacity(pairing.len());
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut dropped = vec![false; n];
    for (r, p) in pairing.pairs.iter().enumerate() {
        let (ia, ib) = (find(&p.a)?, find(&p.b)?);
        b_m[(r, ia)] = 1.0;
        b_m[(r, ib)] = -1.0;
        partner[ia] = Some(ib);
        dropped[ib] = true;
        pair_columns.push((ia, ib));
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !dropped[i]).collect();
    let mut l = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        l[(i, c)] = 1.0;
        if let Some(j) = partner[i] {
            l[(j, c)] = 1.0;
        }
    }
    Ok(InterfaceMap {
        b_m,
        l,
        column_labels: labels.to_vec(),
        unique_labels: kept.iter().map(|&i| labels[i].clone()).collect(),
        pair_columns,
    })
}

/// `L⁺ = (LᵀL)⁻¹Lᵀ` for a Boolean matrix with orthogonal columns.
pub fn boolean_pinv(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l.iter().any(|&x| x != 0.0 && x != 1.0) {
        return Err(Error::Precondition("matrix is not Boolean".into()));
    }
    let gram = l.transpose() * l;
    for j in 0..gram.ncols() {
        if gram[(j, j)] == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        if (0..gram.ncols()).any(|k| k != j && gram[(j, k)] != 0.0) {
            return Err(Error::Precondition("Boolean columns are not orthogonal".into()));
        }
    }
    let mut out = l.transpose();
    for j in 0..out.nrows() {
        let w = 1.0 / gram[(j, j)];
        out.row_mut(j).scale_mut(w);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateReductionMap {
    /// `2·n_pairs × n`: rows `e_α − e_β` for each pair's derivative state
    /// and then its output state.
    pub b_t: DMatrix<f64>,
    /// `n × (n − 2·n_pairs)`; the `α` state of each duplicate is kept.
    pub l_t: DMatrix<f64>,
    /// Original index of every kept state, in order.
    pub kept: Vec<usize>,
}

impl StateReductionMap {
    pub fn n_states(&self) -> usize {
        self.l_t.nrows()
    }

    pub fn n_reduced(&self) -> usize {
        self.l_t.ncols()
    }
}

pub fn build_state_reduction(
    tags: &[StateTag],
    pairing: &InterfacePairing,
) -> Result<StateReductionMap> {
    pairing.check()?;
    let n = tags.len();
    let locate = |l: &DofLabel, deriv: bool| {
        tags.iter()
            .position(|t| match t {
                StateTag::DerivInterfaceOutput(d) => deriv && d == l,
                StateTag::InterfaceOutput(d) => !deriv && d == l,
                StateTag::Internal => false,
            })
            .ok_or_else(|| Error::Structure(format!("no interface states tagged for DOF {l}")))
    };
    let mut rows = Vec::new();
    for p in &pairing.pairs {
        for deriv in [true, false] {
            rows.push((locate(&p.a, deriv)?, locate(&p.b, deriv)?));
        }
    }
    let mut b_t = DMatrix::zeros(rows.len(), n);
    let mut partner: Vec<Option<usize>> = vec![None; n];
    let mut dropped = vec![false; n];
    for (r, &(ia, ib)) in rows.iter().enumerate() {
        b_t[(r, ia)] = 1.0;
        b_t[(r, ib)] = -1.0;
        partner[ia] = Some(ib);
        dropped[ib] = true;
    }
    let kept: Vec<usize> = (0..n).filter(|&i| !dropped[i]).collect();
    let mut l_t = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        l_t[(i, c)] = 1.0;
        if let Some(j) = partner[i] {
            l_t[(j, c)] = 1.0;
        }
    }
    Ok(StateReductionMap { b_t, l_t, kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::pinv;

    fn labels(n: usize) -> Vec<DofLabel> {
        (0..n).map(|i| DofLabel::new("G", format!("n{i}"))).collect()
    }

    #[test]
    fn single_pair_mapping() {
        let l = labels(7);
        let p = InterfacePairing::new([(l[2].clone(), l[3].clone())]);
        let map = build_mapping(&l, &p).unwrap();
        assert_eq!(
            map.b_m,
            DMatrix::from_row_slice(1, 7, &[0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0])
        );
        assert_eq!(map.l.shape(), (7, 6));
        assert_eq!((&map.b_m * &map.l).amax(), 0.0);
        assert_eq!(map.unique_labels.len(), 6);
        assert!(!map.unique_labels.contains(&l[3]));
    }

    #[test]
    fn no_pairs_gives_identity() {
        let l = labels(3);
        let map = build_mapping(&l, &InterfacePairing::default()).unwrap();
        assert_eq!(map.b_m.nrows(), 0);
        assert_eq!(map.l, DMatrix::identity(3, 3));
    }

    #[test]
    fn mapping_errors() {
        let l = labels(3);
        let p = InterfacePairing::new([(l[0].clone(), DofLabel::new("X", "y"))]);
        assert!(matches!(build_mapping(&l, &p), Err(Error::UnknownLabel(_))));
        let p = InterfacePairing::new([(l[0].clone(), l[1].clone()), (l[1].clone(), l[2].clone())]);
        assert!(matches!(build_mapping(&l, &p), Err(Error::DuplicatePairing(_))));
    }

    #[test]
    fn pinv_of_doubled_column() {
        let l = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert_eq!(boolean_pinv(&l).unwrap(), DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        let i = DMatrix::<f64>::identity(4, 4);
        assert_eq!(boolean_pinv(&i).unwrap(), i);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(boolean_pinv(&z), Err(Error::ZeroColumn(1))));
    }

    #[test]
    fn pinv_matches_svd_pseudoinverse() {
        let l = labels(9);
        let p = InterfacePairing::new([
            (l[0].clone(), l[5].clone()),
            (l[7].clone(), l[2].clone()),
            (l[3].clone(), l[8].clone()),
        ]);
        let map = build_mapping(&l, &p).unwrap();
        let lp = boolean_pinv(&map.l).unwrap();
        let k = map.l.ncols();
        assert_eq!(&lp * &map.l, DMatrix::identity(k, k));
        assert!((lp - pinv(&map.l)).amax() < 1e-12);
    }

    #[test]
    fn state_reduction_one_pair() {
        let a = DofLabel::new("A", "a");
        let b = DofLabel::new("B", "b");
        let tags = vec![
            StateTag::DerivInterfaceOutput(a.clone()),
            StateTag::InterfaceOutput(a.clone()),
            StateTag::Internal,
            StateTag::DerivInterfaceOutput(b.clone()),
            StateTag::InterfaceOutput(b.clone()),
            StateTag::Internal,
        ];
        let red = build_state_reduction(&tags, &InterfacePairing::new([(a, b)])).unwrap();
        assert_eq!(
            red.b_t,
            DMatrix::from_row_slice(
                2,
                6,
                &[1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0]
            )
        );
        assert_eq!(red.l_t.shape(), (6, 4));
        assert_eq!((&red.b_t * &red.l_t).amax(), 0.0);
        assert_eq!(red.kept, vec![0, 1, 2, 5]);
    }

    #[test]
    fn state_reduction_without_pairs_and_with_missing_tags() {
        let tags = vec![StateTag::Internal; 3];
        let red = build_state_reduction(&tags, &InterfacePairing::default()).unwrap();
        assert_eq!(red.l_t, DMatrix::identity(3, 3));
        assert_eq!(red.b_t.nrows(), 0);
        let p = InterfacePairing::new([(DofLabel::new("A", "a"), DofLabel::new("B", "b"))]);
        assert!(matches!(build_state_reduction(&tags, &p), Err(Error::Structure(_))));
    }
}
