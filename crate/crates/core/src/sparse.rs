//! Sparse symmetric matrices and a direct solver sized for desk-scale FEM.
//!
//! Storage is plain CSR (full pattern, not triangular). The direct solver is
//! an envelope Cholesky factorization after reverse Cuthill-McKee reordering,
//! which is deterministic and accurate to machine precision on the band
//! profiles produced by structured surface meshes.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

/// Accumulates (i, j, v) triplets; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut self.rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut v = 0.0;
                while k < row.len() && row[k].0 == j {
                    v += row[k].1;
                    k += 1;
                }
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl CsrMatrix {
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                row_acc += v * y[j];
            }
            acc += x[i] * row_acc;
        }
        acc
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum::<f64>())
            .collect()
    }

    /// A + alpha * B, requiring identical dimensions (patterns may differ).
    pub fn add_scaled(&self, other: &CsrMatrix, alpha: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut b = TripletBuilder::new(self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.add(i, j, v);
            }
            let (cols, vals) = other.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                b.add(i, j, alpha * v);
            }
        }
        b.build()
    }

    /// Extract the square submatrix on `keep` (old index -> position order).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut b = TripletBuilder::new(keep.len());
        for (new_i, &old_i) in keep.iter().enumerate() {
            let (cols, vals) = self.row(old_i);
            for (&j, &v) in cols.iter().zip(vals) {
                if map[j] != usize::MAX {
                    b.add(new_i, map[j], v);
                }
            }
        }
        b.build()
    }
}

/// Reverse Cuthill-McKee ordering. Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(m: &CsrMatrix) -> Vec<usize> {
    let n = m.n;
    let degree: Vec<usize> = (0..n).map(|i| m.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_far = |start: usize| -> usize {
        let mut seen = vec![false; n];
        let mut frontier = vec![start];
        seen[start] = true;
        let mut last = start;
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in m.row(u).0 {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            if let Some(&u) = next.first() {
                last = u;
            }
            frontier = next;
        }
        last
    };

    while order.len() < n {
        // Pseudo-peripheral start: min-degree unvisited, pushed outward twice.
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .unwrap();
        let start = bfs_far(bfs_far(seed));
        let start = if visited[start] { seed } else { start };

        let mut queue = std::collections::VecDeque::new();
        queue.push_back(start);
        visited[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = m.row(u).0.iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_by_key(|&v| (degree[v], v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factorization of a symmetric positive-definite
/// matrix, with RCM pre-ordering.
pub struct EnvelopeCholesky {
    n: usize,
    /// perm[new] = old
    perm: Vec<usize>,
    /// first stored column of each (permuted) row
    first: Vec<usize>,
    /// prefix offsets into `vals`; row i occupies vals[off[i] .. off[i+1]]
    off: Vec<usize>,
    /// rows of L, columns first[i]..=i, contiguous
    vals: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(m: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(m);
        Self::factor_with_perm(m, perm)
    }

    pub fn factor_with_perm(m: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = m.n;
        let mut iperm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }

        let mut first = vec![0usize; n];
        for new_i in 0..n {
            let old_i = perm[new_i];
            let mut fi = new_i;
            for &old_j in m.row(old_i).0 {
                fi = fi.min(iperm[old_j]);
            }
            first[new_i] = fi;
        }

        let mut off = Vec::with_capacity(n + 1);
        off.push(0usize);
        for i in 0..n {
            off.push(off[i] + (i - first[i] + 1));
        }
        let mut vals = vec![0.0; off[n]];

        // Scatter permuted lower triangle into the envelope.
        for new_i in 0..n {
            let old_i = perm[new_i];
            let (cols, v) = m.row(old_i);
            for (&old_j, &val) in cols.iter().zip(v) {
                let new_j = iperm[old_j];
                if new_j <= new_i {
                    vals[off[new_i] + (new_j - first[new_i])] = val;
                }
            }
        }

        // Row-wise factorization: L[i][j] over the envelope.
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = vals[off[i] + (j - fi)];
                for k in lo..j {
                    s -= vals[off[i] + (k - fi)] * vals[off[j] + (k - fj)];
                }
                let djj = vals[off[j] + (j - fj)];
                vals[off[i] + (j - fi)] = s / djj;
            }
            let mut d = vals[off[i] + (i - fi)];
            for k in fi..i {
                let l = vals[off[i] + (k - fi)];
                d -= l * l;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::Factorization(format!(
                    "nonpositive pivot {d:.3e} at row {i} (matrix not positive-definite)"
                )));
            }
            vals[off[i] + (i - fi)] = d.sqrt();
        }

        Ok(Self {
            n,
            perm,
            first,
            off,
            vals,
        })
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = b[self.perm[i]];
        }
        // Forward: L y' = y
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.vals[self.off[i] + (k - fi)] * y[k];
            }
            y[i] = s / self.vals[self.off[i] + (i - fi)];
        }
        // Backward: L^T x' = y'
        for i in (0..n).rev() {
            let fi = self.first[i];
            let s = y[i] / self.vals[self.off[i] + (i - fi)];
            y[i] = s;
            for k in fi..i {
                y[k] -= self.vals[self.off[i] + (k - fi)] * s;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            if i > 0 {
                b.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let m = laplacian_1d(50);
        let f = EnvelopeCholesky::factor(&m).unwrap();
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = f.solve(&b);
        let r = m.apply(&x);
        let err: f64 = r.iter().zip(&b).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "residual {err}");
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(1, 1, -1.0);
        let m = b.build();
        assert!(EnvelopeCholesky::factor(&m).is_err());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.5);
        b.add(0, 1, -1.0);
        let m = b.build();
        assert_eq!(m.get(0, 0), 3.5);
        assert_eq!(m.get(0, 1), -1.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = laplacian_1d(17);
        let mut p = reverse_cuthill_mckee(&m);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }
}
