use std::io::Write;

use faer::sparse::{SparseColMat, SymbolicSparseColMat, Triplet};
use faer::Mat;

use crate::dd::Dd;
use crate::error::{PumError, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed in the order they appear, so the result
    /// does not depend on how the triplets were produced as long as the
    /// input order is fixed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            assert!(r < nrows && c < ncols, "entry ({r},{c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows)
            .map(|i| self.row_ptr[i + 1] - self.row_ptr[i])
            .max()
            .unwrap_or(0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `b - A x` with double-double accumulation, so small residuals of
    /// good fits are not swamped by rounding in `A x`.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                let mut acc = Dd::from(b[i]);
                for (&j, &a) in c.iter().zip(v) {
                    acc.mul_acc(Dd::from(-a), Dd::from(x[j]));
                }
                acc.to_f64()
            })
            .collect()
    }

    /// `b - A x` for a double-double `x`, accumulated in double-double.
    pub fn residual_dd(&self, x: &[Dd], b: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                let mut acc = Dd::from(b[i]);
                for (&j, &a) in c.iter().zip(v) {
                    acc.mul_acc(Dd::from(-a), x[j]);
                }
                acc.to_f64()
            })
            .collect()
    }

    /// `Aᵀ(b - A x)` with the residual never rounded: near a least-squares
    /// solution this product cancels almost completely.
    pub fn normal_residual_dd(&self, x: &[Dd], b: &[f64]) -> Vec<f64> {
        let mut out = vec![Dd::ZERO; self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            let mut r = Dd::from(b[i]);
            for (&j, &a) in c.iter().zip(v) {
                r -= x[j].mul_f64(a);
            }
            for (&j, &a) in c.iter().zip(v) {
                out[j] += r.mul_f64(a);
            }
        }
        out.into_iter().map(Dd::to_f64).collect()
    }

    /// `Aᵀ y` with double-double accumulation.
    pub fn matvec_t_accurate(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![Dd::ZERO; self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                out[j].mul_acc(Dd::from(a), Dd::from(y[i]));
            }
        }
        out.into_iter().map(Dd::to_f64).collect()
    }

    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                out[j] += a * y[i];
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut row_ptr = vec![0usize; self.ncols + 1];
        for &j in &self.cols {
            row_ptr[j + 1] += 1;
        }
        for j in 0..self.ncols {
            row_ptr[j + 1] += row_ptr[j];
        }
        let mut next = row_ptr.clone();
        let mut cols = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                cols[next[j]] = i;
                vals[next[j]] = a;
                next[j] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn scale_rows(&mut self, s: &[f64]) {
        for i in 0..self.nrows {
            for v in &mut self.vals[self.row_ptr[i]..self.row_ptr[i + 1]] {
                *v *= s[i];
            }
        }
    }

    /// Euclidean norm of every column.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut s = vec![0.0f64; self.ncols];
        for (&j, &a) in self.cols.iter().zip(&self.vals) {
            s[j] += a * a;
        }
        s.into_iter().map(f64::sqrt).collect()
    }

    /// Lower triangle of `(AD)ᵀ(AD)` with `D = diag(scale)`, in faer's
    /// compressed-column form.
    pub fn scaled_gram_lower(&self, scale: &[f64]) -> SparseColMat<usize, f64> {
        let t = self.transpose();
        let n = self.ncols;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        let mut acc = vec![0.0f64; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched = Vec::new();
        col_ptr.push(0);
        for j in 0..n {
            touched.clear();
            let (ri, rv) = t.row(j);
            for (&i, &a) in ri.iter().zip(rv) {
                let (ck, cv) = self.row(i);
                for (&k, &b) in ck.iter().zip(cv) {
                    if k < j {
                        continue;
                    }
                    if mark[k] != j {
                        mark[k] = j;
                        acc[k] = 0.0;
                        touched.push(k);
                    }
                    acc[k] += a * b;
                }
            }
            touched.sort_unstable();
            for &k in &touched {
                rows.push(k);
                vals.push(acc[k] * scale[j] * scale[k]);
            }
            col_ptr.push(rows.len());
        }
        let sym = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, rows);
        SparseColMat::new(sym, vals)
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                m[(i, j)] = a;
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &a)| (i, j, a))
        })
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let t: Vec<_> = self.triplets().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| PumError::Solver(format!("sparse matrix construction failed: {e:?}")))
    }

    /// Coordinate text format: `# M N nnz` header, then zero-based
    /// `row col value` lines.
    pub fn write_coo(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transpose_and_gram() {
        let m = SparseMatrix::from_triplets(3, 2, vec![(0, 0, 1.0), (1, 0, 2.0), (1, 1, -1.0), (2, 1, 3.0)]);
        let t = m.transpose();
        assert_eq!(t.to_dense(), m.to_dense().transpose().to_owned());
        assert_eq!(m.column_norms(), vec![5f64.sqrt(), 10f64.sqrt()]);
        let g = m.scaled_gram_lower(&[1.0, 2.0]).to_dense();
        // [[5, -2], [-2, 10]] scaled by D = diag(1, 2); lower triangle only.
        assert_eq!((g[(0, 0)], g[(1, 0)], g[(0, 1)], g[(1, 1)]), (5.0, -4.0, 0.0, 40.0));
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(1, 2, 1.0), (0, 0, 2.0), (1, 2, 0.5), (0, 1, -1.0)]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(1), (&[2usize][..], &[1.5][..]));
        assert_eq!(m.matvec(&[1.0, 1.0, 2.0]), vec![1.0, 3.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0]), vec![2.0, -1.0, 1.5]);
        assert_eq!(m.norm_inf(), 3.0);
    }

    #[test]
    fn export_format() {
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 2.5)]);
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# 2 2 2\n0 0 1e0\n1 1 2.5e0\n");
    }
}
