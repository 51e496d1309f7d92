//! Symmetric positive definite solves in envelope (profile) storage after a
//! reverse Cuthill–McKee reordering.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Symmetric sparse matrix given by its diagonal and strictly-lower entries.
#[derive(Debug, Clone)]
pub struct SparseSymmetric {
    n: usize,
    diag: Vec<f64>,
    /// `adj[i]` holds `(j, a_ij)` for every off-diagonal nonzero, both triangles.
    adj: Vec<Vec<(usize, f64)>>,
}

impl SparseSymmetric {
    pub fn new(diag: Vec<f64>) -> Self {
        let n = diag.len();
        SparseSymmetric {
            n,
            diag,
            adj: vec![Vec::new(); n],
        }
    }

    /// Adds the symmetric pair `a_ij = a_ji = v` (`i != j`).
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i != j);
        self.adj[i].push((j, v));
        self.adj[j].push((i, v));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.n + self.adj.iter().map(Vec::len).sum::<usize>()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.adj[i]
            .iter()
            .find(|(k, _)| *k == j)
            .map_or(0.0, |&(_, v)| v)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.diag[i] * x[i] + self.adj[i].iter().map(|&(j, v)| v * x[j]).sum::<f64>())
            .collect()
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseSymmetric) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = a.adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.adj[v]
                .iter()
                .map(|&(j, _)| j)
                .filter(|&j| !visited[j])
                .collect();
            next.sort_by_key(|&j| (degree[j], j));
            next.dedup();
            for j in next {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A P^T = L L^T` in envelope storage.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    /// Row `i` of `L` from column `first[i]` through the diagonal.
    rows: Vec<Vec<f64>>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSymmetric) -> Result<Self> {
        let n = a.n;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &(j, _) in &a.adj[old] {
                let nj = inv[j];
                if nj < first[new] {
                    first[new] = nj;
                }
            }
        }
        // scatter A into envelope rows
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for (new, &old) in perm.iter().enumerate() {
            rows[new][new - first[new]] = a.diag[old];
            for &(j, v) in &a.adj[old] {
                let nj = inv[j];
                if nj < new {
                    rows[new][nj - first[new]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let start = fi.max(fj);
                let (before, rest) = rows.split_at_mut(i);
                let lj = &before[j];
                let li = &mut rest[0];
                let mut s = li[j - fi];
                for k in start..j {
                    s -= li[k - fi] * lj[k - fj];
                }
                li[j - fi] = s / lj[j - fj];
            }
            let li = &mut rows[i];
            let orig = li[i - fi];
            let d = orig - li[..i - fi].iter().map(|v| v * v).sum::<f64>();
            if !(d > 1e-13 * orig.abs().max(f64::MIN_POSITIVE)) {
                return Err(Error::Singular(format!(
                    "non-positive pivot {d:e} at site {}",
                    perm[i]
                )));
            }
            li[i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            inv,
            first,
            rows,
        })
    }

    pub fn envelope_size(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        // L y = Pb
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.rows[i];
            let mut s = y[i];
            for k in fi..i {
                s -= row[k - fi] * y[k];
            }
            y[i] = s / row[i - fi];
        }
        // L^T x = y, column sweep
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.rows[i];
            y[i] /= row[i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= row[k - fi] * yi;
            }
        }
        (0..n).map(|old| y[self.inv[old]]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_banded_spd(n: usize, seed: u64) -> SparseSymmetric {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SparseSymmetric::new(vec![0.0; n]);
        let mut rowsum = vec![0.0; n];
        for i in 0..n {
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                if j != i && a.get(i, j) == 0.0 {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a.push(i, j, v);
                    rowsum[i] += v.abs();
                    rowsum[j] += v.abs();
                }
            }
        }
        for i in 0..n {
            a.diag[i] = rowsum[i] + 0.5;
        }
        a
    }

    #[test]
    fn solve_matches_dense() {
        for seed in 0..5 {
            let a = random_banded_spd(40, seed);
            let dense = DMatrix::from_fn(40, 40, |i, j| a.get(i, j));
            let b: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
            let x = EnvelopeCholesky::factor(&a).unwrap().solve(&b);
            let oracle = dense.cholesky().unwrap().solve(&DVector::from_vec(b));
            let err = x.iter().zip(oracle.iter()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = random_banded_spd(25, 3);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort();
        assert_eq!(p, (0..25).collect::<Vec<_>>());
    }

    #[test]
    fn rcm_shrinks_envelope_of_shuffled_path() {
        // path graph with scrambled labels
        let n = 30;
        let labels: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut a = SparseSymmetric::new(vec![4.0; n]);
        for w in labels.windows(2) {
            a.push(w[0], w[1], -1.0);
        }
        let f = EnvelopeCholesky::factor(&a).unwrap();
        assert!(f.envelope_size() <= 2 * n);
    }

    #[test]
    fn singular_matrix_reported() {
        let mut a = SparseSymmetric::new(vec![1.0, 1.0]);
        a.push(0, 1, 1.0);
        assert!(matches!(EnvelopeCholesky::factor(&a), Err(Error::Singular(_))));
    }
}
