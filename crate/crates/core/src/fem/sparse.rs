use std::sync::Arc;

use super::{dot, norm, Element, FemError};

/// Symmetric compressed-row sparsity pattern with sorted columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrPattern {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    diag: Vec<usize>,
}

impl CsrPattern {
    pub(crate) fn from_elements(n: usize, elements: &[Element]) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for e in elements {
            for a in 0..e.n {
                for b in 0..e.n {
                    rows[e.nodes[a]].push(e.nodes[b]);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, mut cols) in rows.into_iter().enumerate() {
            cols.sort_unstable();
            cols.dedup();
            let start = col_idx.len();
            diag.push(start + cols.binary_search(&i).expect("diagonal present"));
            col_idx.extend(cols);
            row_ptr.push(col_idx.len());
        }
        Self { row_ptr, col_idx, diag }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn col(&self, k: usize) -> usize {
        self.col_idx[k]
    }

    pub(crate) fn diag_slot(&self, i: usize) -> usize {
        self.diag[i]
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row(i);
        self.col_idx[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &CsrPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn n(&self) -> usize {
        self.pattern.n_rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.pattern.diag.iter().map(|&k| self.values[k]).collect()
    }

    /// `self += scale * other` for matrices on the same pattern.
    pub fn add_scaled(&mut self, scale: f64, other: &CsrMatrix) {
        debug_assert!(Arc::ptr_eq(&self.pattern, &other.pattern) || *self.pattern == *other.pattern);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += scale * b;
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.pattern.row(i) {
                s += self.values[k] * x[self.pattern.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n()).all(|i| {
            self.pattern
                .row(i)
                .all(|k| (self.values[k] - self.get(self.pattern.col_idx[k], i)).abs() <= tol)
        })
    }
}

/// Matrix, right-hand side and prescribed values.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constrained: Vec<Option<f64>>,
}

impl SparseSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Self {
        let n = matrix.n();
        Self {
            matrix,
            rhs,
            constrained: vec![None; n],
        }
    }

    pub fn constrain(&mut self, dof: usize, value: f64) {
        self.constrained[dof] = Some(value);
    }

    /// Symmetric row/column elimination of the prescribed values: columns
    /// are moved to the right-hand side and the constrained rows become
    /// identity rows.
    pub fn eliminate_constraints(&mut self) {
        let pattern = Arc::clone(&self.matrix.pattern);
        let values = &mut self.matrix.values;
        for j in 0..pattern.n_rows() {
            let Some(g) = self.constrained[j] else { continue };
            for kj in pattern.row(j) {
                let i = pattern.col_idx[kj];
                if i == j {
                    continue;
                }
                let ki = pattern.position(i, j).expect("symmetric pattern");
                if self.constrained[i].is_none() {
                    self.rhs[i] -= values[ki] * g;
                }
                values[ki] = 0.0;
                values[kj] = 0.0;
            }
            values[pattern.diag[j]] = 1.0;
            self.rhs[j] = g;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients on an eliminated system.
/// Stops when `||r|| <= rel_tol * ||b||`.
pub fn solve_spd(
    system: &SparseSystem,
    rel_tol: f64,
    max_iter: usize,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveStats), FemError> {
    let a = &system.matrix;
    let b = &system.rhs;
    let n = a.n();
    super::check_len(n, b.len())?;
    let diag = a.diagonal();
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
        return Err(FemError::Indefinite(format!("diagonal entry {i} is {}", diag[i])));
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let b_norm = norm(b);
    let mut x = match initial {
        Some(x0) => {
            super::check_len(n, x0.len())?;
            let mut x = x0.to_vec();
            for (xi, c) in x.iter_mut().zip(&system.constrained) {
                if let Some(g) = c {
                    *xi = *g;
                }
            }
            x
        }
        None => vec![0.0; n],
    };
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats::default()));
    }
    let target = rel_tol * b_norm;
    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut r_norm = norm(&r);
    if r_norm <= target {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                relative_residual: r_norm / b_norm.max(f64::MIN_POSITIVE),
            },
        ));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::Indefinite(format!("p^T A p = {pap:e} at iteration {it}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        r_norm = norm(&r);
        if r_norm <= target {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    relative_residual: r_norm / b_norm.max(f64::MIN_POSITIVE),
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::NoConvergence {
        iterations: max_iter,
        residual: r_norm / b_norm.max(f64::MIN_POSITIVE),
    })
}

/// Direct solve for systems whose pattern is tridiagonal (1D chains).
pub fn solve_tridiagonal(system: &SparseSystem) -> Result<Vec<f64>, FemError> {
    let a = &system.matrix;
    let n = a.n();
    super::check_len(n, system.rhs.len())?;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        for k in a.pattern.row(i) {
            let j = a.pattern.col_idx[k];
            match j as isize - i as isize {
                -1 => lower[i] = a.values[k],
                0 => diag[i] = a.values[k],
                1 => upper[i] = a.values[k],
                _ if a.values[k] != 0.0 => {
                    return Err(FemError::InvalidArgument("matrix is not tridiagonal".into()));
                }
                _ => {}
            }
        }
    }
    // Thomas algorithm
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut x = vec![0.0; n];
    for i in 0..n {
        let m = diag[i] - if i > 0 { lower[i] * c[i - 1] } else { 0.0 };
        if !(m > 0.0) {
            return Err(FemError::Indefinite(format!("pivot {i} is {m}")));
        }
        c[i] = upper[i] / m;
        d[i] = (system.rhs[i] - if i > 0 { lower[i] * d[i - 1] } else { 0.0 }) / m;
    }
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}
