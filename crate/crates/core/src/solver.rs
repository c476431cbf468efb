//! Sparse SPD solvers: envelope Cholesky on a reverse Cuthill–McKee ordering,
//! and conjugate gradients with optional Jacobi preconditioning.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMethod {
    DirectCholesky,
    Cg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    Jacobi,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub preconditioner: Preconditioner,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::DirectCholesky,
            cg_tol: 1e-12,
            cg_max_iter: 100_000,
            preconditioner: Preconditioner::Jacobi,
        }
    }
}

impl SolverConfig {
    pub fn cg() -> Self {
        SolverConfig {
            method: SolverMethod::Cg,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0 && self.cg_tol < 1.0) {
            return Err(Error::InvalidConfig(format!("cg_tol must lie in (0, 1), got {}", self.cg_tol)));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::InvalidConfig("cg_max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Residual certificate of a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// `‖Kx − b‖ / ‖b‖` (absolute residual when `b = 0`).
    pub relative_residual: f64,
    /// CG iterations (0 for the direct solver).
    pub iterations: usize,
    /// Stored entries of the Cholesky envelope (0 for CG).
    pub factor_entries: usize,
}

pub fn solve(matrix: &CsrMatrix, rhs: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, SolveStats)> {
    config.validate()?;
    assert_eq!(matrix.nrows, rhs.len());
    let (x, iterations, factor_entries) = match config.method {
        SolverMethod::DirectCholesky => {
            let factor = EnvelopeCholesky::factor(matrix)?;
            let entries = factor.values.len();
            (factor.solve(rhs), 0, entries)
        }
        SolverMethod::Cg => {
            let (x, it) = conjugate_gradient(matrix, rhs, config)?;
            (x, it, 0)
        }
    };
    let stats = SolveStats {
        relative_residual: relative_residual(matrix, &x, rhs),
        iterations,
        factor_entries,
    };
    Ok((x, stats))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn relative_residual(matrix: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let kx = matrix.mul_vec(x);
    let r: Vec<f64> = kx.iter().zip(b).map(|(a, b)| a - b).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(matrix: &CsrMatrix) -> Vec<usize> {
    let n = matrix.nrows;
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|r| matrix.row(r).map(|(c, _)| c).filter(|&c| c != r).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (eccentricity, a min-degree node of the last level)
        let mut dist = vec![usize::MAX; n];
        let mut queue = VecDeque::from([start]);
        dist[start] = 0;
        let mut last = start;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !visited[v] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
            if dist[u] > dist[last] || (dist[u] == dist[last] && degree[u] < degree[last]) {
                last = u;
            }
        }
        (dist[last], last)
    };

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let _ = far;
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| (degree[v], v));
            for v in next {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Row-oriented envelope (skyline) Cholesky factor `L` of `P K Pᵀ`.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.nrows;
        let perm = reverse_cuthill_mckee(matrix);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (c, _) in matrix.row(old) {
                let nc = inv[c];
                if nc < first[new] {
                    first[new] = nc;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut values = vec![0.0; total];
        for (new, &old) in perm.iter().enumerate() {
            for (c, v) in matrix.row(old) {
                let nc = inv[c];
                if nc <= new {
                    values[start[new] + nc - first[new]] += v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let lo = fi.max(fj);
                let mut sum = 0.0;
                let ri = &values[si + lo - fi..si + j - fi];
                let rj = &values[sj + lo - fj..sj + j - fj];
                for (a, b) in ri.iter().zip(rj) {
                    sum += a * b;
                }
                let djj = values[sj + j - fj];
                values[si + j - fi] = (values[si + j - fi] - sum) / djj;
            }
            let row = &values[si..si + i - fi];
            let d = values[si + i - fi] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    pivot: perm[i],
                    value: d,
                });
            }
            values[si + i - fi] = d.sqrt();
        }
        Ok(EnvelopeCholesky {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let row = &self.values[si..si + i - fi];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(a, b)| a * b).sum();
            y[i] = (y[i] - s) / self.values[si + i - fi];
        }
        // Lᵀ x = y, column sweep
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            y[i] /= self.values[si + i - fi];
            let yi = y[i];
            for (k, a) in self.values[si..si + i - fi].iter().enumerate() {
                y[fi + k] -= a * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }
}

fn conjugate_gradient(matrix: &CsrMatrix, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let diag = matrix.diagonal();
    if let Some((i, &d)) = diag.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot: i, value: d });
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        match config.preconditioner {
            Preconditioner::Jacobi => r.iter().zip(&diag).map(|(a, d)| a / d).collect(),
            Preconditioner::None => r.to_vec(),
        }
    };
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for it in 1..=config.cg_max_iter {
        let ap = matrix.mul_vec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: it, value: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= config.cg_tol * bnorm {
            return Ok((x, it));
        }
        z = precondition(&r);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: config.cg_max_iter,
        residual: norm(&r) / bnorm,
    })
}
