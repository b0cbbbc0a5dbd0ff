//! Curvature estimation.
//!
//! On the true curvature the Gram form `kappa W_kappa(D)` of points on a
//! sphere is singular, so its smallest eigenvalue vanishes; on a
//! hyperboloid the second largest eigenvalue vanishes. The estimator
//! minimises the magnitude of that eigenvalue, divided by `|kappa|`, over a
//! bracket derived from the observed distances. Without the division the
//! objective shrinks towards zero with `kappa` and noisy inputs drift to
//! the flat end of the bracket.
//!
//! * `b = (pi / max d)^2`, since spherical distances never exceed `pi / sqrt(kappa)`;
//! * `a = (1 / (3 min d))^2`, below which the space is effectively flat.
//!
//! The hyperbolic search uses `[-b, -a]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{scaled_w, GeometryKind};
use crate::linalg::{eigenvalues_sym, SymMatrix};

pub const DEFAULT_GRID: usize = 200;
const REFINE_REL_TOL: f64 = 1e-6;
const MAX_REFINED_MINIMA: usize = 5;
const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Search interval for the curvature magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBracket {
    pub a: f64,
    pub b: f64,
    /// Set when the plug-in lower bound was not below `b` and was replaced.
    #[serde(default)]
    pub widened: bool,
}

impl CurvatureBracket {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::invalid(format!("curvature bracket needs 0 < a < b, got a={a} b={b}")));
        }
        Ok(CurvatureBracket { a, b, widened: false })
    }

    /// Signed interval for `kind`.
    pub fn interval(&self, kind: GeometryKind) -> (f64, f64) {
        match kind {
            GeometryKind::Hyperbolic => (-self.b, -self.a),
            _ => (self.a, self.b),
        }
    }
}

/// Bracket from the distance matrix. Zero off-diagonal entries are skipped
/// when taking the minimum; if the plug-in `a` is not below `b` it is
/// replaced by `(1 / (3 max d))^2` and the bracket is marked as widened.
pub fn curvature_bounds(d: &SymMatrix) -> Result<CurvatureBracket> {
    if d.order() < 2 {
        return Err(Error::Degenerate("need at least two points".into()));
    }
    let mut max_d = 0.0f64;
    let mut min_d = f64::INFINITY;
    for x in d.off_diagonal() {
        max_d = max_d.max(x);
        if x > 0.0 {
            min_d = min_d.min(x);
        }
    }
    if max_d <= 0.0 {
        return Err(Error::Degenerate("all off-diagonal distances are zero".into()));
    }
    let b = (PI / max_d).powi(2);
    let a = (1.0 / (3.0 * min_d)).powi(2);
    if a < b {
        return Ok(CurvatureBracket { a, b, widened: false });
    }
    let a = (1.0 / (3.0 * max_d)).powi(2);
    log::debug!("curvature lower bound not below upper bound; widened to [{a}, {b}]");
    Ok(CurvatureBracket { a, b, widened: true })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureEstimate {
    pub kind: GeometryKind,
    pub kappa_hat: f64,
    /// Objective `|lambda(kappa W_kappa)| / |kappa|` of the first index at its minimiser.
    pub objective_at_min: f64,
    pub q_used: usize,
    /// Minimiser for each eigenvalue index `1..=q`; `kappa_hat` is their mean.
    pub per_index: Vec<f64>,
    pub bracket: CurvatureBracket,
    /// Grid samples `(kappa, objective)` for the first index.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureOptions {
    pub q: usize,
    pub grid: usize,
    /// Overrides the data-driven bracket.
    pub bracket: Option<CurvatureBracket>,
    pub keep_trace: bool,
}

impl Default for CurvatureOptions {
    fn default() -> Self {
        CurvatureOptions {
            q: 1,
            grid: DEFAULT_GRID,
            bracket: None,
            keep_trace: false,
        }
    }
}

/// Ascending eigenvalue position (0-based) probed for index `i` (1-based).
fn probed_position(kind: GeometryKind, k: usize, i: usize) -> usize {
    match kind {
        GeometryKind::Hyperbolic => k - 1 - i,
        _ => i - 1,
    }
}

/// `|lambda(kappa W_kappa(D))| / |kappa|` for eigenvalue index `index` (1-based):
/// the `index`-th smallest for spheres, the `(K - index)`-th for hyperboloids.
pub fn curvature_objective(d: &SymMatrix, kind: GeometryKind, kappa: f64, index: usize) -> Result<f64> {
    let k = d.order();
    if index == 0 || index >= k {
        return Err(Error::invalid(format!("eigenvalue index {index} out of range for K={k}")));
    }
    let vals = eigenvalues_sym(&scaled_w(d, kappa))?;
    Ok(vals[probed_position(kind, k, index)].abs() / kappa.abs())
}

fn golden_min(lo: f64, hi: f64, tol: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (lo, hi);
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Estimates the curvature of a spherical or hyperbolic configuration.
///
/// For each index `i = 1..=q` the objective is sampled on a uniform grid
/// over the bracket, the best local minima of the grid are refined by
/// golden-section search, and the overall minimiser is kept (lowest kappa
/// on ties). The estimate is the mean of the `q` minimisers.
pub fn estimate_curvature(d: &SymMatrix, kind: GeometryKind, opts: &CurvatureOptions) -> Result<CurvatureEstimate> {
    if kind == GeometryKind::Euclidean {
        return Err(Error::invalid("curvature is only estimated for spherical or hyperbolic geometry"));
    }
    let k = d.order();
    if opts.q == 0 || k <= opts.q {
        return Err(Error::invalid(format!("need 1 <= q < K, got q={} K={k}", opts.q)));
    }
    if k < 3 && kind == GeometryKind::Hyperbolic {
        return Err(Error::invalid("hyperbolic curvature needs K >= 3"));
    }
    let grid_n = opts.grid.max(3);
    let bracket = match opts.bracket {
        Some(b) => CurvatureBracket::new(b.a, b.b)?,
        None => curvature_bounds(d)?,
    };
    let (lo, hi) = bracket.interval(kind);
    let step = (hi - lo) / (grid_n - 1) as f64;
    let xs: Vec<f64> = (0..grid_n).map(|j| if j + 1 == grid_n { hi } else { lo + step * j as f64 }).collect();

    // one eigen-solve per grid point serves every index
    let spectra: Vec<Vec<f64>> = xs.iter().map(|&x| eigenvalues_sym(&scaled_w(d, x))).collect::<Result<_>>()?;
    let tol = REFINE_REL_TOL * (hi - lo);

    let mut per_index = Vec::with_capacity(opts.q);
    let mut first_obj = f64::NAN;
    let mut trace = Vec::new();
    for i in 1..=opts.q {
        let pos = probed_position(kind, k, i);
        let ys: Vec<f64> = spectra.iter().zip(&xs).map(|(v, x)| v[pos].abs() / x.abs()).collect();
        if i == 1 && opts.keep_trace {
            trace = xs.iter().copied().zip(ys.iter().copied()).collect();
        }
        let mut minima: Vec<usize> = (0..grid_n)
            .filter(|&j| (j == 0 || ys[j] <= ys[j - 1]) && (j + 1 == grid_n || ys[j] <= ys[j + 1]))
            .collect();
        minima.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]).then(a.cmp(&b)));
        minima.truncate(MAX_REFINED_MINIMA);

        let mut best = (xs[minima[0]], ys[minima[0]]);
        for &j in &minima {
            let a = xs[j.saturating_sub(1)];
            let b = xs[(j + 1).min(grid_n - 1)];
            let (x, y) = golden_min(a, b, tol, |x| {
                let v = eigenvalues_sym(&scaled_w(d, x))?;
                Ok(v[pos].abs() / x.abs())
            })?;
            let cand = if y < ys[j] || (y == ys[j] && x < xs[j]) { (x, y) } else { (xs[j], ys[j]) };
            if cand.1 < best.1 || (cand.1 == best.1 && cand.0 < best.0) {
                best = cand;
            }
        }
        if i == 1 {
            first_obj = best.1;
        }
        per_index.push(best.0);
    }
    let kappa_hat = per_index.iter().sum::<f64>() / per_index.len() as f64;
    Ok(CurvatureEstimate {
        kind,
        kappa_hat,
        objective_at_min: first_obj,
        q_used: opts.q,
        per_index,
        bracket,
        trace,
    })
}
