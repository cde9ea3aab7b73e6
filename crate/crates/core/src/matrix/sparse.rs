use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::{c64, DenseMatrix};

/// Magnitude below which assembled entries are treated as structural zeros.
pub const ZERO_PURGE_TOL: f64 = 1e-15;

/// Compressed sparse row matrix with canonical (sorted, duplicate-free) rows.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    /// Canonicalizes a triplet list: duplicates are summed, entries below
    /// [`ZERO_PURGE_TOL`] are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, Complex64)>,
    ) -> Result<Self> {
        rows.checked_mul(cols)
            .ok_or_else(|| Error::Size(format!("{rows}x{cols}")))?;
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= rows || *c >= cols) {
            return Err(Error::Dimension(format!(
                "triplet ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        if let Some(&(r, c, _)) = triplets
            .iter()
            .find(|(_, _, v)| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::NonFinite { row: r, col: c });
        }
        triplets.par_sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.norm() >= ZERO_PURGE_TOL {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![c64(1.0, 0.0); n],
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut triplets = Vec::new();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let v = m[(i, j)];
                if v.norm() >= ZERO_PURGE_TOL {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), triplets).expect("dense entries are finite and in range")
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            out[(i, j)] = v;
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => Complex64::default(),
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        self.iter().collect()
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![Complex64::default(); self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let row = |i: usize| -> Complex64 {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|p| self.values[p] * x[self.col_idx[p]])
                .sum()
        };
        if self.nnz() > 200_000 {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            y.iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        }
    }

    /// Row vector times matrix: returns `x^T A` (no conjugation).
    pub fn left_matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![Complex64::default(); self.cols];
        for (i, j, v) in self.iter() {
            y[j] += x[i] * v;
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let triplets = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("transpose of a valid matrix")
    }

    pub fn adjoint(&self) -> Self {
        let triplets = self.iter().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, triplets).expect("adjoint of a valid matrix")
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = v.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let triplets = self.iter().map(|(i, j, v)| (i, j, v * s)).collect();
        Self::from_triplets(self.rows, self.cols, triplets).expect("scaled valid matrix")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::Dimension(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let triplets = self.iter().chain(other.iter()).collect();
        Self::from_triplets(self.rows, self.cols, triplets)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(c64(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut triplets = Vec::new();
        for (i, k, a) in self.iter() {
            for (j, b) in other.row(k) {
                triplets.push((i, j, a * b));
            }
        }
        Self::from_triplets(self.rows, other.cols, triplets)
    }

    /// Principal submatrix on the given (sorted or unsorted) index set.
    pub fn submatrix(&self, indices: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.cols.max(self.rows)];
        for (k, &g) in indices.iter().enumerate() {
            local[g] = k;
        }
        let mut triplets = Vec::new();
        for (k, &g) in indices.iter().enumerate() {
            for (j, v) in self.row(g) {
                let lj = local[j];
                if lj != usize::MAX {
                    triplets.push((k, lj, v));
                }
            }
        }
        Self::from_triplets(indices.len(), indices.len(), triplets).expect("submatrix indices in range")
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Writes the triplet text format: a `rows cols nnz` header followed by
    /// one zero-based `row col re im` line per stored entry.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (i, j, v) in self.iter() {
            writeln!(w, "{i} {j} {:e} {:e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_triplets<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().filter(|l| {
            l.as_ref()
                .map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#'))
                .unwrap_or(true)
        });
        let parse_err = |msg: String| Error::Config {
            path: "triplets".into(),
            message: msg,
        };
        let header = lines.next().ok_or_else(|| parse_err("missing header".into()))??;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(format!("bad header `{header}`: {e}")))?;
        if head.len() != 3 {
            return Err(parse_err(format!("header `{header}` must be `rows cols nnz`")));
        }
        let (rows, cols, nnz) = (head[0], head[1], head[2]);
        let mut triplets = Vec::with_capacity(nnz);
        for line in lines {
            let line = line?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(parse_err(format!("bad entry line `{line}`")));
            }
            let i: usize = t[0].parse().map_err(|e| parse_err(format!("{e}")))?;
            let j: usize = t[1].parse().map_err(|e| parse_err(format!("{e}")))?;
            let re: f64 = t[2].parse().map_err(|e| parse_err(format!("{e}")))?;
            let im: f64 = t[3].parse().map_err(|e| parse_err(format!("{e}")))?;
            triplets.push((i, j, c64(re, im)));
        }
        if triplets.len() != nnz {
            return Err(parse_err(format!(
                "header announces {nnz} entries, found {}",
                triplets.len()
            )));
        }
        Self::from_triplets(rows, cols, triplets)
    }

    pub(crate) fn to_faer_csc_shifted(
        &self,
        shift: Complex64,
    ) -> Result<faer::sparse::SparseColMat<usize, Complex64>> {
        use faer::sparse::{SparseColMat, Triplet};
        let mut triplets: Vec<Triplet<usize, usize, Complex64>> = self
            .iter()
            .map(|(i, j, v)| Triplet::new(i, j, v))
            .collect();
        if shift != Complex64::default() {
            for i in 0..self.rows.min(self.cols) {
                triplets.push(Triplet::new(i, i, -shift));
            }
        }
        SparseColMat::try_new_from_triplets(self.rows, self.cols, &triplets)
            .map_err(|e| Error::Size(format!("{e:?}")))
    }
}

/// Kronecker product; `(a ⊗ b)[i·p + k, j·q + l] = a[i, j]·b[k, l]` where `b` is `p×q`.
pub fn kron(a: &SparseMatrix, b: &SparseMatrix) -> Result<SparseMatrix> {
    let rows = a
        .rows()
        .checked_mul(b.rows())
        .ok_or_else(|| Error::Size(format!("kron rows {}·{}", a.rows(), b.rows())))?;
    let cols = a
        .cols()
        .checked_mul(b.cols())
        .ok_or_else(|| Error::Size(format!("kron cols {}·{}", a.cols(), b.cols())))?;
    rows.checked_mul(cols)
        .ok_or_else(|| Error::Size(format!("kron {rows}x{cols}")))?;
    let (p, q) = (b.rows(), b.cols());
    let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
    for (i, j, va) in a.iter() {
        for (k, l, vb) in b.iter() {
            triplets.push((i * p + k, j * q + l, va * vb));
        }
    }
    SparseMatrix::from_triplets(rows, cols, triplets)
}

pub fn kron_dense(a: &DenseMatrix, b: &DenseMatrix) -> Result<SparseMatrix> {
    kron(&SparseMatrix::from_dense(a), &SparseMatrix::from_dense(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_zeros_purged() {
        let m = SparseMatrix::from_triplets(
            2,
            2,
            vec![
                (0, 1, c64(1.0, 0.0)),
                (0, 1, c64(2.0, 0.0)),
                (1, 0, c64(1e-17, 0.0)),
                (1, 1, c64(1.0, 0.0)),
                (1, 1, c64(-1.0, 0.0)),
            ],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c64(3.0, 0.0));
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(SparseMatrix::from_triplets(2, 2, vec![(2, 0, c64(1.0, 0.0))]).is_err());
    }

    #[test]
    fn triplet_text_round_trip() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 0, c64(1.5, -0.25)), (2, 1, c64(-3.0, 1e-3))],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3 2 2\n"));
        let back = SparseMatrix::read_triplets(&buf[..]).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn submatrix_keeps_principal_entries() {
        let m = SparseMatrix::from_dense(&DenseMatrix::from_fn(3, 3, |i, j| c64((3 * i + j) as f64, 0.0)));
        let s = m.submatrix(&[0, 2]);
        assert_eq!(s.to_dense(), DenseMatrix::from_real(2, 2, &[0.0, 2.0, 6.0, 8.0]).unwrap());
    }
}
