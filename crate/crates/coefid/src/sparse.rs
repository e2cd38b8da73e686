//! Sparse symmetric matrices in compressed-row storage and the conjugate
//! gradient solver used by every time step.

use crate::error::{Error, Result};

/// Default relative residual tolerance for [`solve_spd`].
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Square sparse matrix in CSR format.
///
/// Column indices are strictly increasing within each row. The `symmetric`
/// flag is a promise checked on demand (and always before a solve).
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseMatrix {
    /// Build a matrix with an explicit sparsity pattern and all values zero.
    ///
    /// `pattern` lists the (row, col) positions, which may arrive unsorted but
    /// must be unique. Diagonal entries are added if absent so that Jacobi
    /// preconditioning is always defined.
    pub fn from_pattern(n: usize, pattern: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, j) in pattern {
            assert!(i < n && j < n, "pattern index out of range");
            by_row[i].push(j);
        }
        for (i, row) in by_row.iter_mut().enumerate() {
            row.push(i);
            row.sort_unstable();
            row.dedup();
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for row in &by_row {
            col_indices.extend_from_slice(row);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        SparseMatrix {
            n,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
            symmetric: false,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern(n, std::iter::empty());
        for i in 0..n {
            m.add(i, i, 1.0);
        }
        m.symmetric = true;
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn is_flagged_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn set_symmetric(&mut self, flag: bool) {
        self.symmetric = flag;
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|k| lo + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Accumulate into an existing pattern slot; panics if (i, j) is not in
    /// the pattern (assembly always builds the pattern first).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .slot(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            y[i] = acc;
        }
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |a_ij - a_ji| over the stored pattern.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                if j > i {
                    worst = worst.max((self.values[k] - self.get(j, i)).abs());
                }
            }
        }
        worst
    }

    /// Verify symmetry to a relative tolerance of 1e-13 and set the flag.
    pub fn verify_symmetric(&mut self) -> Result<()> {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        let asym = self.max_asymmetry();
        if asym > 1e-13 * scale {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
            });
        }
        self.symmetric = true;
        Ok(())
    }

    /// Coordinate text dump (`i j value` per line) for debugging.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.push_str(&format!(
                    "{} {} {:.16e}\n",
                    i, self.col_indices[k], self.values[k]
                ));
            }
        }
        out
    }
}

/// Entrywise linear combination `sum_k coeffs[k] * mats[k]`.
///
/// All matrices must share the dimension; patterns may differ (the result uses
/// the union). Symmetry of the inputs carries over to the result.
pub fn axpy_combine(coeffs: &[f64], mats: &[&SparseMatrix]) -> Result<SparseMatrix> {
    assert_eq!(coeffs.len(), mats.len(), "one coefficient per matrix");
    assert!(!mats.is_empty(), "need at least one matrix");
    let n = mats[0].n;
    for m in mats {
        if m.n != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.n,
            });
        }
    }

    let same_pattern = mats
        .iter()
        .all(|m| m.row_offsets == mats[0].row_offsets && m.col_indices == mats[0].col_indices);

    let mut out = if same_pattern {
        let mut out = mats[0].clone();
        out.values.iter_mut().for_each(|v| *v = 0.0);
        for (&c, m) in coeffs.iter().zip(mats) {
            for (o, v) in out.values.iter_mut().zip(&m.values) {
                *o += c * v;
            }
        }
        out
    } else {
        let pattern = mats.iter().flat_map(|m| {
            (0..n).flat_map(move |i| {
                m.col_indices[m.row_offsets[i]..m.row_offsets[i + 1]]
                    .iter()
                    .map(move |&j| (i, j))
            })
        });
        let mut out = SparseMatrix::from_pattern(n, pattern);
        for (&c, m) in coeffs.iter().zip(mats) {
            for i in 0..n {
                for k in m.row_offsets[i]..m.row_offsets[i + 1] {
                    out.add(i, m.col_indices[k], c * m.values[k]);
                }
            }
        }
        out
    };
    out.symmetric = mats.iter().all(|m| m.symmetric);
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` for symmetric positive definite `A` by Jacobi-preconditioned
/// conjugate gradients.
///
/// Returns `x` with `||A x - b|| <= rel_tol * ||b||`. Deterministic: fixed
/// starting point (zero) and a fixed iteration cap of `10 * n`.
pub fn solve_spd(a: &SparseMatrix, b: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = a.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    assert!(rel_tol > 0.0 && rel_tol < 1.0, "rel_tol must be in (0, 1)");

    {
        let scale = a.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let asym = a.max_asymmetry();
        if asym > 1e-13 * scale.max(1.0) {
            return Err(Error::NotSymmetric {
                max_asymmetry: asym,
            });
        }
    }

    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let target = rel_tol * b_norm;

    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| {
            if d <= 0.0 {
                Err(Error::IndefiniteSystem { step: 0, shift: d })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect::<Result<_>>()?;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let max_iter = 10 * n;

    for iter in 0..=max_iter {
        let r_norm = norm(&r);
        if r_norm <= target {
            return Ok(x);
        }
        if iter == max_iter {
            break;
        }
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::IndefiniteSystem {
                step: 0,
                shift: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
    }

    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: norm(&r),
        target,
    })
}
