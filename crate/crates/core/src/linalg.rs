//! Sparse solves for the Newton systems: ILU(0)-preconditioned BiCGSTAB,
//! backed by reverse Cuthill-McKee reordering and banded LU with partial
//! pivoting when the iteration does not converge.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Row-wise sparse matrix. Duplicate column entries within a row are summed.
#[derive(Clone, Debug, Default)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix {
            rows: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let row = &mut self.rows[i];
        match row.iter_mut().find(|(c, _)| *c == j) {
            Some(e) => e.1 += v,
            None => row.push((j, v)),
        }
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.len() {
            self.add(i, i, s);
        }
    }

    fn bandwidths(&self, perm_inv: &[usize]) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for (i, row) in self.rows.iter().enumerate() {
            let pi = perm_inv[i];
            for &(j, _) in row {
                let pj = perm_inv[j];
                if pj < pi {
                    kl = kl.max(pi - pj);
                } else {
                    ku = ku.max(pj - pi);
                }
            }
        }
        (kl, ku)
    }

    /// Solves `A x = b`: preconditioned BiCGSTAB to a relative residual of
    /// 1e-13, otherwise the direct solver.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if let Some(x) = Ilu0::new(self).and_then(|p| bicgstab(self, &p, b, 1e-13, 2000)) {
            return Ok(x);
        }
        self.solve_direct(b)
    }

    /// Solves `A x = b` by banded LU in the narrower of the natural and the
    /// reverse Cuthill-McKee order.
    pub fn solve_direct(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if b.len() != n {
            return Err(Error::Linear(format!(
                "right-hand side has length {}, expected {n}",
                b.len()
            )));
        }
        let identity: Vec<usize> = (0..n).collect();
        let rcm = reverse_cuthill_mckee(self);
        let rcm_inv = invert(&rcm);
        let (a, b_rcm) = (self.bandwidths(&identity), self.bandwidths(&rcm_inv));
        // keep the natural order unless the reordering narrows the band
        let (perm, perm_inv, (kl, ku)) = if b_rcm.0 + b_rcm.1 < a.0 + a.1 {
            (rcm, rcm_inv, b_rcm)
        } else {
            (identity.clone(), identity, a)
        };
        let mut lu = BandedLu::new(n, kl, ku);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                lu.set(perm_inv[i], perm_inv[j], v);
            }
        }
        lu.factor()?;
        let mut y: Vec<f64> = perm.iter().map(|&i| b[i]).collect();
        lu.solve_in_place(&mut y);
        let mut x = vec![0.0; n];
        for (pi, &i) in perm.iter().enumerate() {
            x[i] = y[pi];
        }
        Ok(x)
    }
}

/// Incomplete LU factorization with the sparsity pattern of `A` (rows sorted
/// by column, unit lower factor).
struct Ilu0 {
    ptr: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &SparseMatrix) -> Option<Self> {
        let n = a.len();
        let mut ptr = Vec::with_capacity(n + 1);
        let (mut col, mut val, mut diag) = (Vec::new(), Vec::new(), Vec::with_capacity(n));
        ptr.push(0);
        for i in 0..n {
            let mut row = a.row(i).to_vec();
            row.sort_unstable_by_key(|e| e.0);
            let start = col.len();
            diag.push(start + row.iter().position(|e| e.0 == i)?);
            for (j, v) in row {
                col.push(j);
                val.push(v);
            }
            ptr.push(col.len());
        }
        for i in 0..n {
            for p in ptr[i]..diag[i] {
                let k = col[p];
                let pivot = val[diag[k]];
                if pivot == 0.0 {
                    return None;
                }
                val[p] /= pivot;
                let l = val[p];
                // row i -= l * (upper part of row k), restricted to the pattern of row i
                let (mut q, end_q) = (diag[k] + 1, ptr[k + 1]);
                for r in p + 1..ptr[i + 1] {
                    while q < end_q && col[q] < col[r] {
                        q += 1;
                    }
                    if q < end_q && col[q] == col[r] {
                        val[r] -= l * val[q];
                    }
                }
            }
            if !(val[diag[i]].abs() > 0.0) || !val[diag[i]].is_finite() {
                return None;
            }
        }
        Some(Ilu0 {
            ptr,
            col,
            val,
            diag,
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for p in self.ptr[i]..self.diag[i] {
                s -= self.val[p] * z[self.col[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.ptr[i + 1] {
                s -= self.val[p] * z[self.col[p]];
            }
            z[i] = s / self.val[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned BiCGSTAB from a zero initial guess. `None` on
/// breakdown or when `max_iter` is exhausted.
fn bicgstab(a: &SparseMatrix, m: &Ilu0, b: &[f64], rtol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Some(x);
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let (mut v, mut p) = (vec![0.0; n], vec![0.0; n]);
    let (mut phat, mut shat) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return None;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut phat);
        v = a.mul_vec(&phat);
        let r0v = dot(&r0, &v);
        if r0v == 0.0 {
            return None;
        }
        alpha = rho / r0v;
        let s: Vec<f64> = r.iter().zip(&v).map(|(ri, vi)| ri - alpha * vi).collect();
        if dot(&s, &s).sqrt() <= rtol * bnorm {
            for i in 0..n {
                x[i] += alpha * phat[i];
            }
            return Some(x);
        }
        m.apply(&s, &mut shat);
        let t = a.mul_vec(&shat);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return None;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * phat[i] + omega * shat[i];
            r[i] = s[i] - omega * t[i];
        }
        let rn = dot(&r, &r).sqrt();
        if !rn.is_finite() {
            return None;
        }
        if rn <= rtol * bnorm {
            return Some(x);
        }
    }
    None
}

fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (p, &i) in perm.iter().enumerate() {
        inv[i] = p;
    }
    inv
}

/// Reverse Cuthill-McKee order of the symmetrized pattern. Each component is
/// started from a minimum-degree node; ties break on the lower index.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &(j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Banded LU with partial pivoting. Row `i` stores columns
/// `i - kl ..= i + kl + ku`; the extra `kl` superdiagonals hold pivoting fill.
#[derive(Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandedLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: Vec::new(),
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        self.pivots = vec![0; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Linear(format!("singular matrix at pivot {k}")));
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let row_k = self.idx(k, k + 1);
            let len = last_col - k;
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let row_i = self.idx(i, k + 1);
                for t in 0..len {
                    self.data[row_i + t] -= l * self.data[row_k + t];
                }
            }
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.mul_vec(x)
            .iter()
            .zip(b)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn periodic_laplacian_plus_shift() {
        let m = 12;
        let n = m * m;
        let mut a = SparseMatrix::new(n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                a.add(k, k, 4.5);
                for (di, dj) in [(1, 0), (m - 1, 0), (0, 1), (0, m - 1)] {
                    a.add(k, ((i + di) % m) * m + (j + dj) % m, -1.0);
                }
            }
        }
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = a.solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-12);
    }

    #[test]
    fn pivoting_on_random_nonsymmetric_band() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 60;
        let mut a = SparseMatrix::new(n);
        for i in 0..n {
            for j in i.saturating_sub(3)..(i + 5).min(n) {
                a.add(i, j, rng.random_range(-1.0..1.0));
            }
        }
        // zero diagonal forces row exchanges
        a.add(0, 0, -a.row(0).iter().find(|e| e.0 == 0).unwrap().1);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = a.solve_direct(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-9);
    }

    #[test]
    fn iterative_and_direct_agree() {
        let m = 20;
        let n = m * m;
        let mut a = SparseMatrix::new(n);
        for i in 0..m {
            for j in 0..m {
                let k = i * m + j;
                a.add(k, k, 4.1);
                a.add(k, ((i + 1) % m) * m + j, -1.3);
                a.add(k, ((i + m - 1) % m) * m + j, -0.7);
                a.add(k, i * m + (j + 1) % m, -1.0);
                a.add(k, i * m + (j + m - 1) % m, -1.0);
            }
        }
        let b: Vec<f64> = (0..n).map(|k| (k as f64).cos()).collect();
        let (x, y) = (a.solve(&b).unwrap(), a.solve_direct(&b).unwrap());
        assert!(x.iter().zip(&y).all(|(p, q)| (p - q).abs() < 1e-10));
        assert!(residual(&a, &x, &b) < 1e-10);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = SparseMatrix::new(3);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        assert!(matches!(a.solve(&[1.0, 1.0, 1.0]), Err(Error::Linear(_))));
    }

    #[test]
    fn rcm_is_a_permutation() {
        let mut a = SparseMatrix::new(10);
        for i in 0..10 {
            a.add(i, (i * 7) % 10, 1.0);
            a.add(i, i, 2.0);
        }
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..10).collect::<Vec<_>>());
    }
}
