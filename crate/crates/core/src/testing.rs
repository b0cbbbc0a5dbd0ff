//! Subsampling bootstrap of the distance matrix, eigenvalue tests for the
//! three geometries, and classification.
//!
//! Under each null a particular eigenvalue of the transformed distance
//! matrix sits on a boundary:
//!
//! * Euclidean: `lambda_1(W_0) >= 0`;
//! * spherical: `lambda_1(kappa W_kappa) >= 0`;
//! * hyperbolic: `lambda_{K-1}(kappa W_kappa) <= 0`.
//!
//! The null distribution of the scaled eigenvalue is approximated by
//! resampling `m` nodes per clique and rescaling with `m^(2 rho)`.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cliques::CliqueSet;
use crate::curvature::{estimate_curvature, CurvatureOptions};
use crate::dimension::{dimension_from_rank, ladle_rank, LadleResult, MIN_LADLE_B};
use crate::distance::{estimate_d, estimate_e_nu, estimate_p, DistanceMatrix};
use crate::error::{Error, Result};
use crate::geometry::{build_w, scaled_w, GeometryKind};
use crate::graph::Graph;
use crate::linalg::{eigenvalues_sym, SymMatrix};
use crate::seeds;

pub const DEFAULT_B: usize = 200;
pub const DEFAULT_RATE: f64 = 1.0 / 3.0;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Subsample size used when none is configured.
pub fn default_m(ell: usize) -> usize {
    ell.div_ceil(2).max(2).min(ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub b: usize,
    /// Nodes drawn per clique; `None` means [`default_m`].
    pub m: Option<usize>,
    pub rate: f64,
    pub alpha: f64,
    pub seed: u64,
    pub with_replacement: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b: DEFAULT_B,
            m: None,
            rate: DEFAULT_RATE,
            alpha: DEFAULT_ALPHA,
            seed: 0,
            with_replacement: true,
        }
    }
}

impl BootstrapConfig {
    pub fn m_for(&self, ell: usize) -> usize {
        self.m.unwrap_or_else(|| default_m(ell))
    }

    pub fn validate(&self, ell: usize) -> Result<()> {
        let m = self.m_for(ell);
        if m < 1 || m > ell {
            return Err(Error::invalid(format!("subsample size m={m} must satisfy 1 <= m <= ell={ell}")));
        }
        if self.b < 1 {
            return Err(Error::invalid("bootstrap count B must be at least 1"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::invalid(format!("rate must be positive, got {}", self.rate)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

fn draw(rng: &mut seeds::Rng, clique: &[usize], m: usize, with_replacement: bool) -> Vec<usize> {
    if with_replacement {
        (0..m).map(|_| clique[rng.gen_range(0..clique.len())]).collect()
    } else {
        index::sample(rng, clique.len(), m).into_iter().map(|i| clique[i]).collect()
    }
}

/// One resampled probability matrix per replicate, floored at `1/ell^2`.
fn bootstrap_p(g: &Graph, cs: &CliqueSet, m: usize, with_replacement: bool, seed: u64) -> SymMatrix {
    let k = cs.k();
    let floor = 1.0 / (cs.ell * cs.ell) as f64;
    let mut rng = seeds::rng(seed);
    let mut p = SymMatrix::identity(k);
    for a in 0..k {
        for b in a + 1..k {
            let ia = draw(&mut rng, &cs.cliques[a], m, with_replacement);
            let ib = draw(&mut rng, &cs.cliques[b], m, with_replacement);
            let (mut edges, mut pairs) = (0usize, 0usize);
            for &i in &ia {
                for &j in &ib {
                    if i != j {
                        pairs += 1;
                        edges += usize::from(g.has_edge(i, j));
                    }
                }
            }
            let v = if pairs == 0 { floor } else { (edges as f64 / pairs as f64).max(floor) };
            p.set(a, b, v);
        }
    }
    p
}

/// `B` resampled distance matrices. For every replicate and clique pair,
/// `m` nodes are drawn from each clique, the sampled cross pairs give `p*`,
/// and `e_nu` is held at the supplied value.
pub fn bootstrap_distance(g: &Graph, cs: &CliqueSet, e_nu: f64, cfg: &BootstrapConfig) -> Result<Vec<DistanceMatrix>> {
    cfg.validate(cs.ell)?;
    let m = cfg.m_for(cs.ell);
    if let Some(&v) = cs.cliques.iter().flatten().find(|&&v| v >= g.n()) {
        return Err(Error::NodeOutOfRange { index: v, n: g.n() });
    }
    (0..cfg.b)
        .into_par_iter()
        .map(|r| {
            let p = bootstrap_p(g, cs, m, cfg.with_replacement, seeds::derive(cfg.seed, r as u64));
            estimate_d(&p, e_nu)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryTestResult {
    pub geometry: GeometryKind,
    /// 1-based ascending eigenvalue index tested.
    pub k_star: usize,
    /// Unscaled `lambda_{k*}` of the observed matrix.
    pub lambda_hat: f64,
    /// `ell^(2 rho) lambda_{k*}`.
    pub stat_observed: f64,
    /// `c(alpha)` for lower-tail nulls, `c(1 - alpha)` for the hyperbolic null.
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub kappa_used: Option<f64>,
    /// All bootstrap statistics coincide.
    pub degenerate: bool,
}

/// The statistic's matrix and eigenvalue under one null.
#[derive(Debug, Clone)]
pub struct NullFit {
    pub w: SymMatrix,
    pub lambda: f64,
    pub kappa: Option<f64>,
}

fn k_star(kind: GeometryKind, k: usize) -> usize {
    match kind {
        GeometryKind::Hyperbolic => k - 1,
        _ => 1,
    }
}

/// `W_0(D)` for the Euclidean null, `kappa_hat W_kappa_hat(D)` for curved
/// nulls with the curvature estimated from `d`. When every distance is zero
/// the curved matrix is the all-ones matrix whatever the curvature, and no
/// curvature is reported.
pub fn fit_null(d: &SymMatrix, kind: GeometryKind, curv: &CurvatureOptions) -> Result<NullFit> {
    let (w, kappa) = match kind {
        GeometryKind::Euclidean => (build_w(d, 0.0), None),
        _ if d.off_diagonal().all(|x| x == 0.0) => (SymMatrix::from_fn(d.order(), |_, _| 1.0), None),
        _ => {
            let est = estimate_curvature(d, kind, curv)?;
            (scaled_w(d, est.kappa_hat), Some(est.kappa_hat))
        }
    };
    let vals = eigenvalues_sym(&w)?;
    let lambda = vals[k_star(kind, d.order()) - 1];
    Ok(NullFit { w, lambda, kappa })
}

/// `c(q) = inf { x : L(x) >= q }` on sorted statistics.
fn quantile_inf(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let idx = ((q * b as f64).ceil() as usize).clamp(1, b) - 1;
    sorted[idx]
}

/// Outcome of one null test with the fitted matrices kept for reuse.
#[derive(Debug, Clone)]
pub struct NullTest {
    pub result: GeometryTestResult,
    pub fit: NullFit,
    pub boot: Vec<NullFit>,
}

/// Runs one null test given the observed and bootstrap distance matrices.
pub fn test_with_bootstrap(
    d_hat: &SymMatrix,
    boot: &[DistanceMatrix],
    kind: GeometryKind,
    ell: usize,
    cfg: &BootstrapConfig,
    curv: &CurvatureOptions,
) -> Result<NullTest> {
    cfg.validate(ell)?;
    let k = d_hat.order();
    if k < 3 {
        return Err(Error::invalid(format!("geometry tests need K >= 3, got {k}")));
    }
    if boot.is_empty() {
        return Err(Error::invalid("no bootstrap replicates"));
    }
    let m = cfg.m_for(ell) as f64;
    let fit = fit_null(d_hat, kind, curv)?;
    let boot_fits: Vec<NullFit> = boot.par_iter().map(|dm| fit_null(&dm.d, kind, curv)).collect::<Result<_>>()?;

    let scale_m = m.powf(2.0 * cfg.rate);
    let mut stats: Vec<f64> = boot_fits.iter().map(|bf| scale_m * (bf.lambda - fit.lambda)).collect();
    stats.sort_by(f64::total_cmp);
    let b = stats.len() as f64;
    let s = (ell as f64).powf(2.0 * cfg.rate) * fit.lambda;
    let degenerate = stats.first() == stats.last();
    let (p_value, critical_value) = match kind {
        GeometryKind::Hyperbolic => (
            stats.iter().filter(|&&x| x >= s).count() as f64 / b,
            quantile_inf(&stats, 1.0 - cfg.alpha),
        ),
        _ => (
            stats.iter().filter(|&&x| x <= s).count() as f64 / b,
            quantile_inf(&stats, cfg.alpha),
        ),
    };
    let result = GeometryTestResult {
        geometry: kind,
        k_star: k_star(kind, k),
        lambda_hat: fit.lambda,
        stat_observed: s,
        critical_value,
        p_value,
        reject: p_value <= cfg.alpha,
        kappa_used: fit.kappa,
        degenerate,
    };
    Ok(NullTest {
        result,
        fit,
        boot: boot_fits,
    })
}

/// Estimated distances for a clique set: `p_hat`, then `E[exp(nu)]` from the
/// almost-cliques with threshold `t`, then `D_hat`.
pub fn estimate_distances(g: &Graph, cs: &CliqueSet, t: usize) -> Result<DistanceMatrix> {
    let p = estimate_p(g, cs)?;
    let e = estimate_e_nu(g, cs, t)?;
    estimate_d(&p.p, e.value)
}

/// Tests one null on a graph: estimates `D_hat`, draws the bootstrap, and
/// compares the scaled eigenvalue with its bootstrap distribution.
pub fn test_geometry(
    g: &Graph,
    cs: &CliqueSet,
    null: GeometryKind,
    t: usize,
    cfg: &BootstrapConfig,
    curv: &CurvatureOptions,
) -> Result<GeometryTestResult> {
    let d_hat = estimate_distances(g, cs, t)?;
    let boot = bootstrap_distance(g, cs, d_hat.e_nu_hat, cfg)?;
    Ok(test_with_bootstrap(&d_hat.d, &boot, null, cs.ell, cfg, curv)?.result)
}

/// Empirical `alpha`-quantile of `||W*_b - W_hat||_F`.
pub fn weyl_threshold(boot_ws: &[SymMatrix], w_hat: &SymMatrix, alpha: f64) -> Result<f64> {
    if boot_ws.len() < 20 {
        return Err(Error::invalid(format!("Weyl threshold needs at least 20 matrices, got {}", boot_ws.len())));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let mut devs: Vec<f64> = boot_ws.iter().map(|w| w.distance(w_hat)).collect();
    devs.sort_by(f64::total_cmp);
    Ok(quantile_inf(&devs, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Euclidean,
    Spherical,
    Hyperbolic,
    #[serde(rename = "NA")]
    Na,
}

impl From<GeometryKind> for Classification {
    fn from(k: GeometryKind) -> Self {
        match k {
            GeometryKind::Euclidean => Classification::Euclidean,
            GeometryKind::Spherical => Classification::Spherical,
            GeometryKind::Hyperbolic => Classification::Hyperbolic,
        }
    }
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Classification::Euclidean => "euclidean",
            Classification::Spherical => "spherical",
            Classification::Hyperbolic => "hyperbolic",
            Classification::Na => "NA",
        })
    }
}

/// The non-rejected geometry with the largest p-value; `Na` when every null
/// is rejected. A p-value equal to `alpha` counts as rejected. Ties go to
/// the first geometry in Euclidean, spherical, hyperbolic order.
pub fn classify_from_pvalues(p: &[(GeometryKind, f64)], alpha: f64) -> Classification {
    let mut best: Option<(GeometryKind, f64)> = None;
    for kind in GeometryKind::ALL {
        for &(k, pv) in p {
            if k == kind && pv > alpha && best.is_none_or(|(_, b)| pv > b) {
                best = Some((k, pv));
            }
        }
    }
    best.map_or(Classification::Na, |(k, _)| k.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Almost-clique threshold for `E[exp(nu)]`.
    pub t: usize,
    pub curvature: CurvatureOptions,
    /// Run the ladle on the classified geometry.
    pub dimension: bool,
    /// Report `max(2, p_hat)`.
    pub dimension_floor: bool,
}

impl ClassifyOptions {
    pub fn for_ell(ell: usize) -> Self {
        ClassifyOptions {
            t: (ell - 1).max(1),
            curvature: CurvatureOptions::default(),
            dimension: true,
            dimension_floor: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub geometry: GeometryKind,
    pub r_hat: usize,
    pub p_hat: usize,
    pub ladle: LadleResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub tests: Vec<GeometryTestResult>,
    pub classification: Classification,
    pub kappa_spherical: Option<f64>,
    pub kappa_hyperbolic: Option<f64>,
    pub dimension: Option<DimensionReport>,
    /// Weyl thresholds per geometry, in test order.
    pub weyl_thresholds: Vec<Option<f64>>,
}

/// Ladle dimension estimate for `kind` from fitted null matrices.
pub fn dimension_for(kind: GeometryKind, fit: &NullFit, boot: &[NullFit], floor: bool) -> Result<DimensionReport> {
    let ws: Vec<SymMatrix> = boot.iter().map(|b| b.w.clone()).collect();
    let ladle = ladle_rank(&fit.w, &ws, kind == GeometryKind::Hyperbolic)?;
    Ok(DimensionReport {
        geometry: kind,
        r_hat: ladle.r_hat,
        p_hat: dimension_from_rank(kind, ladle.r_hat, floor),
        ladle,
    })
}

/// Runs all three tests on one shared bootstrap and classifies.
pub fn classify(g: &Graph, cs: &CliqueSet, cfg: &BootstrapConfig, opts: &ClassifyOptions) -> Result<GeometryReport> {
    let d_hat = estimate_distances(g, cs, opts.t)?;
    let boot = bootstrap_distance(g, cs, d_hat.e_nu_hat, cfg)?;
    classify_distances(&d_hat.d, &boot, cs.ell, cfg, opts)
}

/// Classification from precomputed observed and bootstrap distances.
pub fn classify_distances(
    d_hat: &SymMatrix,
    boot: &[DistanceMatrix],
    ell: usize,
    cfg: &BootstrapConfig,
    opts: &ClassifyOptions,
) -> Result<GeometryReport> {
    let runs = GeometryKind::ALL
        .iter()
        .map(|&kind| test_with_bootstrap(d_hat, boot, kind, ell, cfg, &opts.curvature))
        .collect::<Result<Vec<_>>>()?;
    let pvals: Vec<(GeometryKind, f64)> = runs.iter().map(|r| (r.result.geometry, r.result.p_value)).collect();
    let classification = classify_from_pvalues(&pvals, cfg.alpha);
    let dimension = match classification {
        Classification::Na => None,
        _ if !opts.dimension || boot.len() < MIN_LADLE_B => None,
        c => {
            let run = runs.iter().find(|r| Classification::from(r.result.geometry) == c).unwrap();
            Some(dimension_for(run.result.geometry, &run.fit, &run.boot, opts.dimension_floor)?)
        }
    };
    let weyl_thresholds = runs
        .iter()
        .map(|r| {
            let ws: Vec<SymMatrix> = r.boot.iter().map(|b| b.w.clone()).collect();
            weyl_threshold(&ws, &r.fit.w, cfg.alpha).ok()
        })
        .collect();
    let kappa = |k: GeometryKind| runs.iter().find(|r| r.result.geometry == k).and_then(|r| r.result.kappa_used);
    Ok(GeometryReport {
        kappa_spherical: kappa(GeometryKind::Spherical),
        kappa_hyperbolic: kappa(GeometryKind::Hyperbolic),
        tests: runs.into_iter().map(|r| r.result).collect(),
        classification,
        dimension,
        weyl_thresholds,
    })
}
