//! Dense symmetric matrices and a cyclic Jacobi eigensolver.
//!
//! The matrices in this crate are small (order K, the number of cliques),
//! so the Jacobi method is accurate and fast enough and yields orthonormal
//! eigenvectors even for clustered or repeated eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;
const REL_TOL: f64 = 1e-12;

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(order: usize) -> Self {
        SymMatrix {
            order,
            data: vec![0.0; order * order],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// Builds from `f(i, j)` evaluated on the upper triangle and mirrored.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in i..order {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// From nested rows; fails unless square and symmetric to 1e-12 (relative).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::invalid("matrix is not square"));
        }
        let scale = rows.iter().flatten().fold(1.0f64, |a, &b| a.max(b.abs()));
        for i in 0..order {
            for j in 0..i {
                if (rows[i][j] - rows[j][i]).abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self::from_fn(order, |i, j| rows[i][j]))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.order + j] = v;
        self.data[j * self.order + i] = v;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.order.max(1)).take(self.order).map(|r| r.to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        SymMatrix {
            order: self.order,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.order, other.order);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `selfᵀ self`, which for a symmetric matrix is its square.
    pub fn gram(&self) -> SymMatrix {
        let k = self.order;
        SymMatrix::from_fn(k, |i, j| (0..k).map(|t| self.get(t, i) * self.get(t, j)).sum())
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.order;
        (0..k).flat_map(move |i| (i + 1..k).map(move |j| self.get(i, j)))
    }
}

/// Eigendecomposition with eigenvalues ascending; `vectors[c]` is the unit
/// eigenvector for `values[c]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl Eigen {
    /// Reassembles `V diag(values) Vᵀ`.
    pub fn reconstruct(&self) -> SymMatrix {
        let k = self.values.len();
        SymMatrix::from_fn(k, |i, j| {
            (0..k).map(|c| self.values[c] * self.vectors[c][i] * self.vectors[c][j]).sum()
        })
    }
}

fn rotate_columns(a: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    for row in a.chunks_exact_mut(n) {
        let (xp, xq) = (row[p], row[q]);
        row[p] = c * xp - s * xq;
        row[q] = s * xp + c * xq;
    }
}

fn jacobi(w: &SymMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = w.order;
    let mut a = w.data.clone();
    let mut v = want_vectors.then(|| {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        v
    });
    let norm = w.frobenius();
    let target = REL_TOL * norm;

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = norm == 0.0 || off(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // negligible next to both diagonal entries: drop it
                if apq == 0.0 || (sweeps > 3 && app.abs() + 1e-3 * apq.abs() == app.abs() && aqq.abs() + 1e-3 * apq.abs() == aqq.abs()) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate_columns(&mut a, n, p, q, c, s);
                {
                    let (head, tail) = a.split_at_mut(q * n);
                    let rp = &mut head[p * n..p * n + n];
                    let rq = &mut tail[..n];
                    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
                        let (xp, xq) = (*x, *y);
                        *x = c * xp - s * xq;
                        *y = s * xp + c * xq;
                    }
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                if let Some(v) = v.as_mut() {
                    rotate_columns(v, n, p, q, c, s);
                }
            }
        }
        converged = off(&a) <= target;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            off_norm: off(&a),
        });
    }
    Ok(((0..n).map(|i| a[i * n + i]).collect(), v))
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn eig_sym(w: &SymMatrix) -> Result<Eigen> {
    let n = w.order;
    let (vals, v) = jacobi(w, true)?;
    let v = v.expect("vectors requested");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    Ok(Eigen {
        values: idx.iter().map(|&c| vals[c]).collect(),
        vectors: idx.iter().map(|&c| (0..n).map(|r| v[r * n + c]).collect()).collect(),
    })
}

/// Eigenvalues only, ascending. Skips eigenvector accumulation.
pub fn eigenvalues_sym(w: &SymMatrix) -> Result<Vec<f64>> {
    let (mut vals, _) = jacobi(w, false)?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Counts of positive, zero and negative eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

impl Signature {
    pub fn from_eigenvalues(values: &[f64], zero_tol: f64) -> Self {
        let mut s = Signature {
            positive: 0,
            zero: 0,
            negative: 0,
        };
        for &l in values {
            if l > zero_tol {
                s.positive += 1;
            } else if l < -zero_tol {
                s.negative += 1;
            } else {
                s.zero += 1;
            }
        }
        s
    }

    pub fn total(&self) -> usize {
        self.positive + self.zero + self.negative
    }
}

/// Default zero threshold: `1e-8 * max |lambda|`.
pub fn default_zero_tol(values: &[f64]) -> f64 {
    1e-8 * values.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Signature of `w`. A `zero_tol` of `None` uses [`default_zero_tol`].
pub fn signature_of(w: &SymMatrix, zero_tol: Option<f64>) -> Result<Signature> {
    let vals = eigenvalues_sym(w)?;
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(&vals));
    Ok(Signature::from_eigenvalues(&vals, tol))
}
