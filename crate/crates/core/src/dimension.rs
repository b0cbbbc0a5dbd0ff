//! Rank of `W_kappa` by the bootstrap ladle, and the rank-to-dimension map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GeometryKind;
use crate::linalg::{eig_sym, Eigen, SymMatrix};

pub const DEFAULT_LADLE_B: usize = 200;
pub const MIN_LADLE_B: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadleResult {
    pub r_hat: usize,
    /// Scree over `j = 0..K`.
    pub phi: Vec<f64>,
    /// Normalised eigenvector variability over `j = 0..=K-2`.
    pub f: Vec<f64>,
    /// `phi + f` over `j = 0..=K-2`.
    pub objective: Vec<f64>,
    pub b: usize,
    /// The objective was flat, so `r_hat` was set to `K - 2`.
    pub full_rank_warning: bool,
}

/// Eigenpairs sorted by decreasing eigenvalue magnitude.
fn by_magnitude(e: &Eigen) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut order: Vec<usize> = (0..e.values.len()).collect();
    order.sort_by(|&a, &b| e.values[b].abs().total_cmp(&e.values[a].abs()).then(b.cmp(&a)));
    (
        order.iter().map(|&i| e.values[i].abs()).collect(),
        order.iter().map(|&i| e.vectors[i].clone()).collect(),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Determinant by Gaussian elimination with partial pivoting.
fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let factor = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= factor * a[c][k];
            }
        }
    }
    d
}

fn working(w: &SymMatrix, psd_mode: bool) -> SymMatrix {
    if psd_mode {
        w.gram()
    } else {
        w.clone()
    }
}

/// Ladle rank estimate of `w_hat` given bootstrap replicates `boot_ws` of the
/// same matrix. With `psd_mode` the working matrix is `W^T W`, which has the
/// rank of `W`; use it for indefinite (hyperbolic) `W`.
///
/// When the objective is constant the estimate is `K - 2`, the top of the
/// search range, and `full_rank_warning` is set.
pub fn ladle_rank(w_hat: &SymMatrix, boot_ws: &[SymMatrix], psd_mode: bool) -> Result<LadleResult> {
    let k = w_hat.order();
    if k < 3 {
        return Err(Error::invalid(format!("ladle needs K >= 3, got {k}")));
    }
    if boot_ws.len() < MIN_LADLE_B {
        return Err(Error::invalid(format!(
            "ladle needs at least {MIN_LADLE_B} bootstrap matrices, got {}",
            boot_ws.len()
        )));
    }
    if let Some(w) = boot_ws.iter().find(|w| w.order() != k) {
        return Err(Error::invalid(format!("bootstrap matrix of order {} for K={k}", w.order())));
    }
    let (mags, vecs) = by_magnitude(&eig_sym(&working(w_hat, psd_mode))?);
    let total: f64 = mags.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("W is zero; rank undefined".into()));
    }
    let phi: Vec<f64> = mags.iter().map(|m| m / total).collect();

    let jmax = k - 2;
    let mut f0 = vec![0.0; jmax + 1];
    for wb in boot_ws {
        let (_, bvecs) = by_magnitude(&eig_sym(&working(wb, psd_mode))?);
        // sign-align each replicate eigenvector with its observed counterpart
        let aligned: Vec<Vec<f64>> = bvecs
            .into_iter()
            .zip(&vecs)
            .map(|(v, a)| if dot(&v, a) < 0.0 { v.iter().map(|x| -x).collect() } else { v })
            .collect();
        for (j, acc) in f0.iter_mut().enumerate().skip(1) {
            let block: Vec<Vec<f64>> = (0..j).map(|r| (0..j).map(|c| dot(&vecs[r], &aligned[c])).collect()).collect();
            *acc += 1.0 - det(block).abs().min(1.0);
        }
    }
    for x in &mut f0 {
        *x /= boot_ws.len() as f64;
    }
    let s: f64 = f0.iter().sum();
    let f: Vec<f64> = if s > 0.0 { f0.iter().map(|x| x / s).collect() } else { vec![0.0; jmax + 1] };
    let objective: Vec<f64> = (0..=jmax).map(|j| phi[j] + f[j]).collect();

    let lo = objective.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = objective.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let flat = hi - lo <= 1e-12;
    let r_hat = if flat {
        log::warn!("ladle objective is flat; W looks full rank, reporting K-2 = {jmax}");
        jmax
    } else {
        objective.iter().position(|&v| v == lo).unwrap()
    };
    Ok(LadleResult {
        r_hat,
        phi,
        f,
        objective,
        b: boot_ws.len(),
        full_rank_warning: flat,
    })
}

/// Ladle rank where the matrices are built from distance matrices.
pub fn ladle_rank_from_distances<F>(d_hat: &SymMatrix, boot_ds: &[SymMatrix], psd_mode: bool, w_builder: F) -> Result<LadleResult>
where
    F: Fn(&SymMatrix) -> Result<SymMatrix>,
{
    let w_hat = w_builder(d_hat)?;
    let boot_ws = boot_ds.iter().map(&w_builder).collect::<Result<Vec<_>>>()?;
    ladle_rank(&w_hat, &boot_ws, psd_mode)
}

/// Manifold dimension implied by the rank of `W_kappa`: the rank itself for
/// Euclidean space, one less for curved spaces. With `floor` the result is
/// at least 2.
pub fn dimension_from_rank(kind: GeometryKind, r_hat: usize, floor: bool) -> usize {
    let p = match kind {
        GeometryKind::Euclidean => r_hat,
        GeometryKind::Spherical | GeometryKind::Hyperbolic => r_hat.saturating_sub(1),
    };
    if floor {
        p.max(2)
    } else {
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copies(w: &SymMatrix, n: usize) -> Vec<SymMatrix> {
        vec![w.clone(); n]
    }

    #[test]
    fn diag_rank_one() {
        let mut v = vec![0.0; 6];
        v[0] = 1.0;
        let w = SymMatrix::diag(&v);
        let res = ladle_rank(&w, &copies(&w, 50), false).unwrap();
        assert_eq!(res.r_hat, 1);
        assert!(!res.full_rank_warning);
        assert_eq!(res.phi[0], 1.0);
        assert!(res.phi[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_caps_at_k_minus_two() {
        let w = SymMatrix::identity(7);
        let res = ladle_rank(&w, &copies(&w, 60), false).unwrap();
        assert_eq!(res.r_hat, 5);
        assert!(res.full_rank_warning);
    }

    #[test]
    fn preconditions() {
        let w = SymMatrix::identity(4);
        assert!(ladle_rank(&w, &copies(&w, 49), false).is_err());
        let w2 = SymMatrix::identity(2);
        assert!(ladle_rank(&w2, &copies(&w2, 50), false).is_err());
        let z = SymMatrix::zeros(4);
        assert!(matches!(ladle_rank(&z, &copies(&z, 50), false), Err(Error::Degenerate(_))));
    }

    #[test]
    fn psd_mode_sees_indefinite_rank() {
        let w = SymMatrix::diag(&[2.0, -1.0, 0.0, 0.0, 0.0]);
        let res = ladle_rank(&w, &copies(&w, 50), true).unwrap();
        assert_eq!(res.r_hat, 2);
    }

    #[test]
    fn f_is_normalised() {
        // perturbed replicates of a rank-2 matrix
        let w = SymMatrix::diag(&[3.0, 1.5, 0.0, 0.0, 0.0]);
        let boots: Vec<SymMatrix> = (0..50)
            .map(|b| {
                let e = 1e-3 * ((b % 7) as f64 - 3.0);
                SymMatrix::from_fn(5, |i, j| w.get(i, j) + if i + 1 == j { e } else { 0.0 })
            })
            .collect();
        let res = ladle_rank(&w, &boots, false).unwrap();
        let s: f64 = res.f.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(res.f.iter().all(|&x| x >= 0.0));
        assert_eq!(res.r_hat, 2);
    }

    #[test]
    fn determinant() {
        assert_eq!(det(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), -1.0);
        assert!((det(vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]]) - 18.0).abs() < 1e-12);
        assert_eq!(det(vec![vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn rank_to_dimension() {
        assert_eq!(dimension_from_rank(GeometryKind::Spherical, 3, false), 2);
        assert_eq!(dimension_from_rank(GeometryKind::Euclidean, 3, false), 3);
        assert_eq!(dimension_from_rank(GeometryKind::Hyperbolic, 3, false), 2);
        assert_eq!(dimension_from_rank(GeometryKind::Euclidean, 1, true), 2);
        assert_eq!(dimension_from_rank(GeometryKind::Spherical, 0, false), 0);
    }
}
