//! Sparse linear algebra for the discrete operators: row-list matrices,
//! direct LU with iterative refinement, and a Jacobi-preconditioned BiCGSTAB
//! for systems too large to factor.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Square sparse matrix stored as one `(column, value)` list per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for row in &rows {
            if row.iter().any(|&(c, v)| c >= n || !v.is_finite()) {
                return Err(Error::Input("matrix entry out of range or non-finite".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                out[c] += v * x[r];
            }
        }
        out
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut rows = vec![Vec::new(); self.size()];
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                rows[c].push((r, v));
            }
        }
        SparseMatrix { rows }
    }

    fn diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| row.iter().filter(|e| e.0 == r).map(|e| e.1).sum())
            .collect()
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let n = self.size();
        let triplets: Vec<Triplet<usize, usize, f64>> = self
            .rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| row.iter().map(move |&(c, v)| Triplet::new(r, c, v)))
            .collect();
        SparseColMat::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| Error::numerical(format!("sparse assembly failed: {e:?}"), vec![]))
    }
}

/// Systems up to this many unknowns are factored directly by default.
pub const DEFAULT_DIRECT_LIMIT: usize = 200_000;

const REFINEMENT_STEPS: usize = 2;
const ITERATIVE_TOLERANCE: f64 = 1e-10;

enum Backend {
    Direct(faer::sparse::linalg::solvers::Lu<usize, f64>),
    Iterative { transpose: SparseMatrix },
}

/// A prepared solver for `A x = b` and `Aᵀ x = b`.
pub struct LinearSolver {
    matrix: SparseMatrix,
    backend: Backend,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("size", &self.matrix.size())
            .field("direct", &matches!(self.backend, Backend::Direct(_)))
            .finish()
    }
}

impl LinearSolver {
    pub fn new(matrix: SparseMatrix, direct_limit: usize) -> Result<Self> {
        let backend = if matrix.size() <= direct_limit {
            faer::set_global_parallelism(faer::Par::Seq);
            let lu = matrix
                .to_faer()?
                .sp_lu()
                .map_err(|e| Error::numerical(format!("sparse LU failed: {e:?}"), vec![]))?;
            Backend::Direct(lu)
        } else {
            Backend::Iterative {
                transpose: matrix.transpose(),
            }
        };
        Ok(Self { matrix, backend })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_with(rhs, false)
    }

    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_with(rhs, true)
    }

    fn solve_with(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        if rhs.len() != self.matrix.size() {
            return Err(Error::Input("right-hand side length mismatch".into()));
        }
        let x = match &self.backend {
            Backend::Direct(lu) => {
                let apply = |v: &[f64]| {
                    if transpose {
                        self.matrix.mul_transpose(v)
                    } else {
                        self.matrix.mul(v)
                    }
                };
                let mut x = lu_solve(lu, rhs, transpose);
                for _ in 0..REFINEMENT_STEPS {
                    let ax = apply(&x);
                    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    let dx = lu_solve(lu, &r, transpose);
                    for (xi, d) in x.iter_mut().zip(dx) {
                        *xi += d;
                    }
                }
                x
            }
            Backend::Iterative { transpose: t } => {
                let m = if transpose { t } else { &self.matrix };
                bicgstab(m, rhs, ITERATIVE_TOLERANCE, 20 * m.size().max(100))?
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("linear solve produced non-finite values", vec![]));
        }
        Ok(x)
    }
}

fn lu_solve(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, rhs: &[f64], transpose: bool) -> Vec<f64> {
    let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    if transpose {
        lu.solve_transpose_in_place(b.as_mut());
    } else {
        lu.solve_in_place(b.as_mut());
    }
    (0..rhs.len()).map(|i| b[(i, 0)]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-Jacobi-preconditioned BiCGSTAB to relative residual `tolerance`.
pub fn bicgstab(a: &SparseMatrix, b: &[f64], tolerance: f64, max_iterations: usize) -> Result<Vec<f64>> {
    let n = a.size();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let precondition = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv_diag).map(|(x, d)| x * d).collect() };
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut history = Vec::new();
    for _ in 0..max_iterations {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precondition(&p);
        v = a.mul(&p_hat);
        alpha = rho_new / dot(&r_hat, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let s_hat = precondition(&s);
        let t = a.mul(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if rel <= tolerance {
            return Ok(x);
        }
        if !rel.is_finite() || omega == 0.0 {
            break;
        }
    }
    Err(Error::numerical("BiCGSTAB did not reach the requested residual", history))
}
