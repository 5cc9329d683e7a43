//! Small linear-algebra kernel: dense Gaussian elimination over any
//! [`Scalar`], plus a Jacobi-preconditioned conjugate-gradient solver for the
//! sparse symmetric positive-definite systems that come out of graph
//! Laplacians.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Residual tolerance for double-mode dense solves.
pub const DOUBLE_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, S::one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(DenseMatrix {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &S {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: S) {
        self.data[r * self.cols + c] = value;
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    pub fn mul(&self, other: &DenseMatrix<S>) -> DenseMatrix<S> {
        assert_eq!(self.cols, other.rows);
        let mut out: DenseMatrix<S> = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if b.is_zero() {
                        continue;
                    }
                    let v = out.get(i, j).clone() + a.clone() * b.clone();
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

/// Solve `a · x = b` by Gaussian elimination with partial pivoting.
///
/// Rational inputs are solved exactly. Double inputs are followed by a
/// residual check against [`DOUBLE_RESIDUAL_TOL`].
pub fn solve<S: Scalar>(a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.cols,
        });
    }
    if b.rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.rows,
        });
    }
    let scale = a
        .data
        .iter()
        .map(|v| v.to_f64().abs())
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut m = a.clone();
    let mut x = b.clone();
    for col in 0..n {
        let pivot = (col..n)
            .filter(|&r| !m.get(r, col).is_negligible(scale))
            .max_by(|&r1, &r2| {
                m.get(r1, col)
                    .pivot_rank()
                    .partial_cmp(&m.get(r2, col).pivot_rank())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // prefer the earliest row on ties
                    .then(r2.cmp(&r1))
            })
            .ok_or_else(|| Error::Singular(format!("no pivot in column {col} of {n}")))?;
        m.swap_rows(col, pivot);
        x.swap_rows(col, pivot);
        let inv = S::one() / m.get(col, col).clone();
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m.get(r, col).clone();
            if factor.is_zero() {
                continue;
            }
            let factor = factor * inv.clone();
            for c in col..n {
                let pc = m.get(col, c).clone();
                if pc.is_zero() {
                    continue;
                }
                let v = m.get(r, c).clone() - factor.clone() * pc;
                m.set(r, c, v);
            }
            for c in 0..x.cols {
                let pc = x.get(col, c).clone();
                if pc.is_zero() {
                    continue;
                }
                let v = x.get(r, c).clone() - factor.clone() * pc;
                x.set(r, c, v);
            }
        }
        for c in col..n {
            let v = m.get(col, c).clone() * inv.clone();
            m.set(col, c, v);
        }
        for c in 0..x.cols {
            let v = x.get(col, c).clone() * inv.clone();
            x.set(col, c, v);
        }
    }
    if !S::is_exact() {
        let residual = max_residual(a, &x, b);
        let rhs_scale = b.data.iter().map(|v| v.to_f64().abs()).fold(1.0_f64, f64::max);
        if !(residual <= DOUBLE_RESIDUAL_TOL * rhs_scale) {
            return Err(Error::Residual(residual));
        }
    }
    Ok(x)
}

fn max_residual<S: Scalar>(a: &DenseMatrix<S>, x: &DenseMatrix<S>, b: &DenseMatrix<S>) -> f64 {
    let ax = a.mul(x);
    ax.data
        .iter()
        .zip(&b.data)
        .map(|(l, r)| (l.to_f64() - r.to_f64()).abs())
        .fold(0.0, f64::max)
}

/// Compressed sparse row matrix of doubles.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from per-row `(col, value)` lists. Rows need not be sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        CsrMatrix {
            n,
            offsets,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.offsets[i]..self.offsets[i + 1])
                    .filter(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .sum()
            })
            .collect()
    }
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite system. Iterates until the residual norm drops below
/// `rel_tol · ‖b‖`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    let diag = a.diagonal();
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(Error::Singular("non-positive diagonal in SPD system".into()));
    }
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let max_iter = 20 * n + 1000;
    for _ in 0..max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular("matrix is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= rel_tol * b_norm {
            // Recompute the true residual to guard against drift.
            a.mul_vec(&x, &mut ap);
            let true_res: f64 = norm(&b.iter().zip(&ap).map(|(b, ax)| b - ax).collect::<Vec<_>>());
            if true_res <= 10.0 * rel_tol * b_norm {
                return Ok(x);
            }
            r = b.iter().zip(&ap).map(|(b, ax)| b - ax).collect();
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Singular(format!(
        "conjugate gradient did not converge in {max_iter} iterations"
    )))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn exact_two_by_two_inverse() {
        // (I - Q) for the two-state chain with escape 1/2 each step.
        let a = DenseMatrix::from_rows(vec![vec![r(1, 1), r(-1, 2)], vec![r(-1, 2), r(1, 1)]]).unwrap();
        let inv = solve(&a, &DenseMatrix::identity(2)).unwrap();
        assert_eq!(*inv.get(0, 0), r(4, 3));
        assert_eq!(*inv.get(0, 1), r(2, 3));
    }

    #[test]
    fn exact_solution_satisfies_system() {
        // Diagonally dominant 4x4 with mixed signs, several right-hand sides.
        let rows: Vec<Vec<Rational>> = (0..4)
            .map(|i| (0..4).map(|j| if i == j { r(9, 1) } else { r((i as i64 * 3 + j as i64) % 5 - 2, 3) }).collect())
            .collect();
        let a = DenseMatrix::from_rows(rows).unwrap();
        let b = DenseMatrix::from_rows((0..4).map(|i| vec![r(i, 1), r(1, i + 1)]).collect()).unwrap();
        let x = solve(&a, &b).unwrap();
        assert_eq!(a.mul(&x), b);
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve(&a, &DenseMatrix::identity(2)), Err(Error::Singular(_))));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let b = DenseMatrix::from_rows(vec![vec![3.0], vec![5.0]]).unwrap();
        let x = solve(&a, &b).unwrap();
        assert_eq!(*x.get(0, 0), 5.0);
        assert_eq!(*x.get(1, 0), 3.0);
    }

    #[test]
    fn cg_matches_dense_on_path_laplacian() {
        // Reduced Laplacian of a unit path with both ends grounded.
        let n = 30;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut row = vec![(i, 2.0)];
                if i > 0 {
                    row.push((i - 1, -1.0));
                }
                if i + 1 < n {
                    row.push((i + 1, -1.0));
                }
                row
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let x = conjugate_gradient(&a, &b, 1e-14).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let expected = (i + 1) as f64 / (n + 1) as f64;
            assert!((xi - expected).abs() < 1e-12);
        }
    }
}
