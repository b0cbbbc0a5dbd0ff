//! Simulation of latent positions and graphs from the latent space model
//! `P(G_ij = 1) = exp(nu_i + nu_j - d(z_i, z_j))`.
//!
//! Nodes are split evenly into groups around randomly placed centres:
//!
//! * Euclidean: centres `N(0, s^2 I_p)`, nodes `N(mu_c, spread^2 / K_c I_p)`.
//! * Spherical (S^2 only): centre angles `theta ~ U(0, pi)`, `phi ~ U(0, 2pi)`,
//!   node angles uniform within `+-spread` of the centre's.
//! * Hyperbolic (H^2 only): centre `(x, y) ~ U([-s, s]^2)`, nodes uniform in
//!   a `+-spread` box, lifted to the hyperboloid with
//!   `x0 = sqrt(1/|kappa| + x^2 + y^2)`.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_unchecked, AmbientPoint, GeometryKind, ManifoldSpec};
use crate::graph::Graph;
use crate::seeds;

/// Distribution of the node fixed effects, supported on `(-inf, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NuDist {
    /// `nu == 0` for every node.
    #[default]
    Zero,
    /// `nu ~ U(-width, 0)`.
    Uniform { width: f64 },
    /// `nu = -X` with `X ~ Exp(rate)`.
    NegExponential { rate: f64 },
}

impl NuDist {
    fn validate(&self) -> Result<()> {
        match *self {
            NuDist::Zero => Ok(()),
            NuDist::Uniform { width } if width > 0.0 && width.is_finite() => Ok(()),
            NuDist::NegExponential { rate } if rate > 0.0 && rate.is_finite() => Ok(()),
            other => Err(Error::invalid(format!("invalid fixed-effect distribution {other:?}"))),
        }
    }

    fn sample(&self, rng: &mut seeds::Rng) -> f64 {
        match *self {
            NuDist::Zero => 0.0,
            NuDist::Uniform { width } => -width * rng.gen::<f64>(),
            NuDist::NegExponential { rate } => -Exp::new(rate).expect("validated").sample(rng),
        }
    }

    /// `E[exp(nu)]`.
    pub fn mean_exp(&self) -> f64 {
        match *self {
            NuDist::Zero => 1.0,
            NuDist::Uniform { width } => (1.0 - (-width).exp()) / width,
            NuDist::NegExponential { rate } => rate / (rate + 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub manifold: ManifoldSpec,
    pub n: usize,
    pub n_centers: usize,
    /// Within-group dispersion: sigma (Euclidean) or the angle / box half-width delta.
    pub spread: f64,
    /// Centre dispersion: sigma (Euclidean) or box half-width s (hyperbolic); unused on the sphere.
    pub center_scale: f64,
    #[serde(default)]
    pub nu_dist: NuDist,
    pub seed: u64,
}

impl SimConfig {
    /// Defaults used in the simulation studies: 1200 nodes around 15 centres,
    /// sigma = 0.5 in Euclidean space, box scale 2.5 on the hyperboloid.
    pub fn defaults(manifold: ManifoldSpec, seed: u64) -> Self {
        let (spread, center_scale) = match manifold.kind {
            GeometryKind::Euclidean => (0.5, 0.5),
            GeometryKind::Spherical => (DEFAULT_SPHERE_SPREAD, 1.0),
            GeometryKind::Hyperbolic => (DEFAULT_HYPERBOLIC_SPREAD, 2.5),
        };
        SimConfig {
            manifold,
            n: 1200,
            n_centers: 15,
            spread,
            center_scale,
            nu_dist: NuDist::Zero,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.manifold;
        ManifoldSpec::new(m.kind, m.dim, m.curvature)?;
        if m.kind != GeometryKind::Euclidean && m.dim != 2 {
            return Err(Error::UnsupportedGeometry(format!(
                "{} simulation is only defined in dimension 2 (got {})",
                m.kind, m.dim
            )));
        }
        if self.n == 0 || self.n_centers == 0 || self.n_centers > self.n {
            return Err(Error::invalid(format!(
                "need 1 <= n_centers <= n, got n={} n_centers={}",
                self.n, self.n_centers
            )));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) {
            return Err(Error::invalid("spread must be finite and non-negative"));
        }
        if !(self.center_scale >= 0.0 && self.center_scale.is_finite()) {
            return Err(Error::invalid("center_scale must be finite and non-negative"));
        }
        self.nu_dist.validate()
    }
}

/// Angle half-width around each spherical centre.
pub const DEFAULT_SPHERE_SPREAD: f64 = 0.05;
/// Box half-width around each hyperbolic centre.
pub const DEFAULT_HYPERBOLIC_SPREAD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentConfiguration {
    pub manifold: ManifoldSpec,
    pub positions: Vec<AmbientPoint>,
    pub nu: Vec<f64>,
    /// Group (centre) index of every node.
    pub groups: Vec<usize>,
    pub centers: Vec<AmbientPoint>,
}

impl LatentConfiguration {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance_unchecked(&self.manifold, &self.positions[i].0, &self.positions[j].0)
    }

    /// `min(1, exp(nu_i + nu_j - d_ij))`.
    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        (self.nu[i] + self.nu[j] - self.distance(i, j)).exp().min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu.len() != self.positions.len() {
            return Err(Error::invalid("positions and fixed effects differ in length"));
        }
        if let Some(v) = self.nu.iter().find(|v| !(**v <= 0.0)) {
            return Err(Error::invalid(format!("fixed effect {v} is not <= 0")));
        }
        for p in &self.positions {
            self.manifold.check_point(p)?;
        }
        Ok(())
    }

    /// CSV dump `node,x0,x1,...,nu` for inspection.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for c in 0..self.manifold.ambient_len() {
            let _ = write!(out, ",x{c}");
        }
        out.push_str(",nu\n");
        for (i, (p, nu)) in self.positions.iter().zip(&self.nu).enumerate() {
            let _ = write!(out, "{i}");
            for c in &p.0 {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out, ",{nu}");
        }
        out
    }
}

/// Group sizes differ by at most one; the first `n mod K_c` groups get the extra node.
fn assign_groups(n: usize, k: usize) -> Vec<usize> {
    let base = n / k;
    let extra = n % k;
    (0..k).flat_map(|g| std::iter::repeat_n(g, base + usize::from(g < extra))).collect()
}

fn sphere_point(kappa: f64, theta: f64, phi: f64) -> AmbientPoint {
    let r = 1.0 / kappa.sqrt();
    AmbientPoint(vec![r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), r * theta.cos()])
}

/// Brings `(theta, phi)` into `[0, pi] x [0, 2pi)` without moving the point.
fn normalize_angles(mut theta: f64, mut phi: f64) -> (f64, f64) {
    theta = theta.rem_euclid(TAU);
    if theta > PI {
        theta = TAU - theta;
        phi += PI;
    }
    (theta, phi.rem_euclid(TAU))
}

fn hyperboloid_point(kappa: f64, x: f64, y: f64) -> AmbientPoint {
    AmbientPoint(vec![(1.0 / kappa.abs() + x * x + y * y).sqrt(), x, y])
}

pub fn sample_latent(cfg: &SimConfig) -> Result<LatentConfiguration> {
    cfg.validate()?;
    let mut rng = seeds::rng_for(cfg.seed, 0);
    let m = cfg.manifold;
    let kc = cfg.n_centers;
    let groups = assign_groups(cfg.n, kc);
    let kappa = m.curvature;

    let (centers, positions) = match m.kind {
        GeometryKind::Euclidean => {
            let center_dist = Normal::new(0.0, cfg.center_scale).map_err(|e| Error::invalid(e.to_string()))?;
            let node_sd = cfg.spread / (kc as f64).sqrt();
            let centers: Vec<Vec<f64>> =
                (0..kc).map(|_| (0..m.dim).map(|_| center_dist.sample(&mut rng)).collect()).collect();
            let noise = Normal::new(0.0, node_sd).map_err(|e| Error::invalid(e.to_string()))?;
            let positions = groups
                .iter()
                .map(|&g| AmbientPoint(centers[g].iter().map(|c| c + noise.sample(&mut rng)).collect()))
                .collect();
            (centers.into_iter().map(AmbientPoint).collect::<Vec<_>>(), positions)
        }
        GeometryKind::Spherical => {
            let angles: Vec<(f64, f64)> = (0..kc).map(|_| (rng.gen_range(0.0..PI), rng.gen_range(0.0..TAU))).collect();
            let d = cfg.spread;
            let positions = groups
                .iter()
                .map(|&g| {
                    let (t0, p0) = angles[g];
                    let t = t0 + d * (2.0 * rng.gen::<f64>() - 1.0);
                    let p = p0 + d * (2.0 * rng.gen::<f64>() - 1.0);
                    let (t, p) = normalize_angles(t, p);
                    sphere_point(kappa, t, p)
                })
                .collect();
            (angles.iter().map(|&(t, p)| sphere_point(kappa, t, p)).collect(), positions)
        }
        GeometryKind::Hyperbolic => {
            let s = cfg.center_scale;
            let xy: Vec<(f64, f64)> = (0..kc)
                .map(|_| (s * (2.0 * rng.gen::<f64>() - 1.0), s * (2.0 * rng.gen::<f64>() - 1.0)))
                .collect();
            let d = cfg.spread;
            let positions = groups
                .iter()
                .map(|&g| {
                    let (x0, y0) = xy[g];
                    let x = x0 + d * (2.0 * rng.gen::<f64>() - 1.0);
                    let y = y0 + d * (2.0 * rng.gen::<f64>() - 1.0);
                    hyperboloid_point(kappa, x, y)
                })
                .collect();
            (xy.iter().map(|&(x, y)| hyperboloid_point(kappa, x, y)).collect(), positions)
        }
    };

    let mut nu_rng = seeds::rng_for(cfg.seed, 1);
    let nu = (0..cfg.n).map(|_| cfg.nu_dist.sample(&mut nu_rng)).collect();
    Ok(LatentConfiguration {
        manifold: m,
        positions,
        nu,
        groups,
        centers,
    })
}

/// Independent Bernoulli edges with probability `min(1, exp(nu_i + nu_j - d_ij))`.
pub fn sample_graph(lat: &LatentConfiguration, seed: u64) -> Graph {
    let n = lat.n();
    let mut rng = seeds::rng(seed);
    let mut g = Graph::empty(n);
    for i in 0..n {
        for j in i + 1..n {
            let p = lat.edge_probability(i, j);
            if rng.gen::<f64>() < p {
                g.insert(i, j);
            }
        }
    }
    g
}
