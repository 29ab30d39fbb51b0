//! Dense linear-algebra helpers on top of nalgebra.

use std::cell::Cell;

use nalgebra::{DMatrix, LU, SVD};

use crate::error::{Error, Result};

/// Condition number above which an interface operator is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

thread_local! {
    static LINEAR_SOLVES: Cell<usize> = const { Cell::new(0) };
}

/// Number of interface factorizations performed on this thread so far.
///
/// Coupling routines bump this once per factorized interface operator so
/// callers (tests, the benchmark) can confirm how many solves a method needs.
pub fn linear_solve_count() -> usize {
    LINEAR_SOLVES.with(|c| c.get())
}

/// Runs `f` and returns its result together with the number of interface
/// factorizations it performed.
pub fn count_linear_solves<T>(f: impl FnOnce() -> T) -> (T, usize) {
    let before = linear_solve_count();
    let out = f();
    (out, linear_solve_count() - before)
}

/// LU-factorized square operator, conditioning-checked on construction.
pub struct FactoredOperator {
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition: f64,
}

impl FactoredOperator {
    /// Factorizes `m`; `what` names the operator in the error if it is
    /// singular or its condition number exceeds [`MAX_CONDITION`].
    pub fn new(m: &DMatrix<f64>, what: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{what} is not square")));
        }
        let condition = condition_number(m);
        if !(condition <= MAX_CONDITION) {
            return Err(if what == "interface feed-through" {
                Error::InterfaceFeedthroughSingular { condition }
            } else {
                Error::SingularOperator {
                    what: what.to_string(),
                    condition,
                }
            });
        }
        LINEAR_SOLVES.with(|c| c.set(c.get() + 1));
        Ok(Self {
            lu: m.clone().lu(),
            condition,
        })
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu
            .solve(rhs)
            .expect("factorization was checked to be nonsingular")
    }
}

fn sorted_svd(m: &DMatrix<f64>, vectors: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let svd = SVD::new(m.clone(), false, vectors);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let vt = svd
        .v_t
        .map(|vt| DMatrix::from_fn(idx.len(), vt.ncols(), |r, c| vt[(idx[r], c)]));
    (s, vt)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    sorted_svd(m, false).0
}

pub fn rank_tolerance(m: &DMatrix<f64>, sigma_max: f64) -> f64 {
    m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    let tol = rank_tolerance(m, smax);
    s.iter().filter(|&&x| x > tol).count()
}

/// `σ_max / σ_min`; infinite for singular or non-square input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    if !m.is_square() {
        return f64::INFINITY;
    }
    let s = singular_values(m);
    let smin = *s.last().unwrap();
    if smin == 0.0 || !smin.is_finite() {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Orthonormal basis of the right nullspace of `m`, returned as rows:
/// `m · Nᵀ = 0`.
pub fn nullspace_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // Pad to at least n rows so the SVD yields a full set of right vectors.
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let (s, vt) = sorted_svd(&padded, true);
    let vt = vt.expect("requested right singular vectors");
    let tol = rank_tolerance(m, s[0]);
    let rank = s.iter().filter(|&&x| x > tol).count();
    vt.rows(rank, n - rank).into_owned()
}

/// The `k` right singular vectors of `m` with the smallest singular values,
/// as rows, along with those singular values and `σ_max`.
pub fn smallest_right_singular_rows(m: &DMatrix<f64>, k: usize) -> (DMatrix<f64>, Vec<f64>, f64) {
    let n = m.ncols();
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let (s, vt) = sorted_svd(&padded, true);
    let vt = vt.expect("requested right singular vectors");
    let tail = s[n - k..].to_vec();
    (vt.rows(n - k, k).into_owned(), tail, s[0])
}

/// Power-of-two diagonal similarity `(D⁻¹AD, D⁻¹B, CD)` that evens out row
/// and column norms of `A`. Exact in floating point; resolvent solves on the
/// result lose far less to scaling disparities between states.
pub fn balance_realization(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mut a = a.clone();
    let (mut b, mut c) = (b.clone(), c.clone());
    if a.is_empty() {
        return (a, b, c);
    }
    let d = nalgebra::linalg::balancing::balance_parlett_reinsch(&mut a);
    for (i, &s) in d.iter().enumerate() {
        b.row_mut(i).scale_mut(1.0 / s);
        c.column_mut(i).scale_mut(s);
    }
    (a, b, c)
}

/// Sum of products evaluated as if in twice the working precision
/// (error-free `TwoSum`/`TwoProduct` accumulation), then rounded once.
pub fn dot2(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (x, y) in terms {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += se + pe;
    }
    s + c
}

/// `Σ_l ±X_l·Y_l` with every entry computed by [`dot2`].
pub fn mul_sum_compensated(terms: &[(f64, &DMatrix<f64>, &DMatrix<f64>)]) -> DMatrix<f64> {
    let (rows, cols) = (terms[0].1.nrows(), terms[0].2.ncols());
    DMatrix::from_fn(rows, cols, |i, j| {
        dot2(terms.iter().flat_map(|&(sign, x, y)| {
            (0..x.ncols()).map(move |k| (sign * x[(i, k)], y[(k, j)]))
        }))
    })
}

/// Solves `V X = R` where `R = Σ_l ±X_l·Y_l`, refining the LU solution with
/// residuals accumulated in extended precision.
pub fn solve_refined(
    v: &DMatrix<f64>,
    lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: &[(f64, &DMatrix<f64>, &DMatrix<f64>)],
    sweeps: usize,
) -> Option<DMatrix<f64>> {
    let mut x = lu.solve(&mul_sum_compensated(rhs))?;
    for _ in 0..sweeps {
        let mut terms = rhs.to_vec();
        terms.push((-1.0, v, &x));
        let r = mul_sum_compensated(&terms);
        x += lu.solve(&r)?;
    }
    Some(x)
}

/// Moore–Penrose pseudoinverse via SVD.
pub fn pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.max();
    let tol = rank_tolerance(m, smax);
    svd.pseudo_inverse(tol).expect("pseudo-inverse with u and v_t")
}

pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn hstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

/// Largest absolute entry, zero for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        0.0
    } else {
        m.amax()
    }
}

pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |r, c| m[(idx[r], c)])
}

pub fn select_cols(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), idx.len(), |r, c| m[(r, idx[c])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nullspace_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
        let n = nullspace_rows(&m);
        assert_eq!(n.shape(), (2, 3));
        assert!((&m * n.transpose()).amax() < 1e-14);
        assert!((&n * n.transpose() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }

    #[test]
    fn nullspace_of_empty_rows_is_identity() {
        let m = DMatrix::<f64>::zeros(0, 3);
        assert_eq!(nullspace_rows(&m), DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn rank_and_condition() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(numerical_rank(&m), 1);
        assert!(condition_number(&m) > 1e15);
        let i = DMatrix::<f64>::identity(3, 3);
        assert_eq!(numerical_rank(&i), 3);
        assert!((condition_number(&i) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn factored_operator_counts_and_rejects() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let (op, n) = count_linear_solves(|| FactoredOperator::new(&m, "x").unwrap());
        assert_eq!(n, 1);
        let x = op.solve(&DMatrix::from_row_slice(2, 1, &[2.0, 4.0]));
        assert!((x - DMatrix::from_row_slice(2, 1, &[1.0, 1.0])).amax() < 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            FactoredOperator::new(&sing, "interface feed-through"),
            Err(Error::InterfaceFeedthroughSingular { .. })
        ));
    }

    #[test]
    fn stacking() {
        let a = DMatrix::from_element(1, 1, 1.0);
        let b = DMatrix::from_element(2, 1, 2.0);
        let d = block_diag(&[&a, &b]);
        assert_eq!(d.shape(), (3, 2));
        assert_eq!(d[(1, 1)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);
        assert_eq!(vstack(&[&a, &b]).shape(), (3, 1));
        assert_eq!(hstack(&[&b, &b]).shape(), (2, 2));
    }

    #[test]
    fn dot2_survives_cancellation() {
        // plain summation returns 0 here
        let terms = [(1e16, 1.0), (1.0, 1.0), (-1e16, 1.0)];
        assert_eq!(terms.iter().map(|(x, y)| x * y).sum::<f64>(), 0.0);
        assert_eq!(dot2(terms), 1.0);
        assert_eq!(dot2([(3.0, 7.0), (0.5, -2.0)]), 20.0);
    }

    #[test]
    fn refined_solve_matches_lu() {
        let v = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let r = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 2.0, 1.0, 3.0, -1.0]);
        let eye = DMatrix::identity(3, 3);
        let lu = v.clone().lu();
        let x = solve_refined(&v, &lu, &[(1.0, &eye, &r)], 2).unwrap();
        assert!((&v * &x - &r).amax() < 1e-15);
        let prod = mul_sum_compensated(&[(1.0, &v, &r), (-1.0, &v, &r)]);
        assert_eq!(prod.amax(), 0.0);
    }

    #[test]
    fn balancing_is_an_exact_similarity() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1e6, -1e-6, -2.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let (ab, bb, cb) = balance_realization(&a, &b, &c);
        assert!(ab.amax() < 1e3);
        // Markov parameters unchanged
        assert_eq!(&cb * &bb, &c * &b);
        assert!((&cb * &ab * &bb - &c * &a * &b).amax() < 1e-9);
    }
}
