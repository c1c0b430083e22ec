use num_traits::Zero;

use crate::error::{Error, Result};
use crate::scalar::{Cplx, Real};

/// Sparse `2^N x 2^N` operator in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator<T> {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<Cplx<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero `(column, value)` pairs of row `i`, columns ascending.
    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Cplx<T>)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Vec<Cplx<T>> {
        let mut out = vec![Cplx::zero(); self.dim * self.dim];
        for i in 0..self.dim {
            for (k, v) in self.row(i) {
                out[i * self.dim + k] = v;
            }
        }
        out
    }

    /// Entry-wise sum of two operators of equal dimension.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("operator dims {} and {}", self.dim, other.dim)));
        }
        let mut row_ptr = Vec::with_capacity(self.dim + 1);
        let mut cols = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        row_ptr.push(0);
        for i in 0..self.dim {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let next = match (a.peek(), b.peek()) {
                    (Some(&(ka, va)), Some(&(kb, vb))) => {
                        if ka == kb {
                            a.next();
                            b.next();
                            (ka, va + vb)
                        } else if ka < kb {
                            a.next();
                            (ka, va)
                        } else {
                            b.next();
                            (kb, vb)
                        }
                    }
                    (Some(&x), None) => {
                        a.next();
                        x
                    }
                    (None, Some(&x)) => {
                        b.next();
                        x
                    }
                    (None, None) => break,
                };
                cols.push(next.0);
                values.push(next.1);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { dim: self.dim, row_ptr, cols, values })
    }

    /// `max |A - A^dagger|`.
    pub fn hermiticity_residue(&self) -> T {
        let d = self.to_dense();
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                worst = worst.max((d[i * self.dim + j] - d[j * self.dim + i].conj()).norm());
            }
        }
        worst
    }
}

/// Coefficients of an operator built from single-atom ladder operators:
///
/// ```text
/// A = sum_{m,n} pair[m][n] s+_m s-_n + sum_n (raise[n] s+_n + lower[n] s-_n)
/// ```
pub struct CollectiveTerms<'a, T> {
    pub n_atoms: usize,
    /// Row-major `N x N`.
    pub pair: &'a [Cplx<T>],
    pub raise: &'a [Cplx<T>],
    pub lower: &'a [Cplx<T>],
}

impl<T: Real> CollectiveTerms<'_, T> {
    pub fn assemble(&self) -> Result<SparseOperator<T>> {
        let n = self.n_atoms;
        if self.pair.len() != n * n || self.raise.len() != n || self.lower.len() != n {
            return Err(Error::Dimension("collective term arrays do not match N".into()));
        }
        let dim = 1usize << n;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        let mut row: Vec<(usize, Cplx<T>)> = Vec::with_capacity(1 + n + n * n);
        row_ptr.push(0);
        for i in 0..dim {
            row.clear();
            // s+_m s-_n maps k -> i with k = i - e_m + e_n
            let mut diag = Cplx::zero();
            for m in 0..n {
                if i >> m & 1 == 0 {
                    continue;
                }
                diag = diag + self.pair[m * n + m];
                for k_atom in 0..n {
                    if k_atom == m || i >> k_atom & 1 == 1 {
                        continue;
                    }
                    let c = self.pair[m * n + k_atom];
                    if !c.is_zero() {
                        row.push((i ^ (1 << m) ^ (1 << k_atom), c));
                    }
                }
            }
            if !diag.is_zero() {
                row.push((i, diag));
            }
            for a in 0..n {
                if i >> a & 1 == 1 {
                    // s+_a |i - e_a> = |i>
                    if !self.raise[a].is_zero() {
                        row.push((i ^ (1 << a), self.raise[a]));
                    }
                } else if !self.lower[a].is_zero() {
                    // s-_a |i + e_a> = |i>
                    row.push((i | (1 << a), self.lower[a]));
                }
            }
            row.sort_by_key(|&(k, _)| k);
            for &(k, v) in &row {
                cols.push(k);
                values.push(v);
            }
            row_ptr.push(cols.len());
        }
        Ok(SparseOperator { dim, row_ptr, cols, values })
    }
}
