//! Between-clique connection probabilities and the marginal distance matrix.
//!
//! Integrating the fixed effects out of the link model gives
//! `P(G_ij = 1 | z) = E[exp(nu)]^2 exp(-d(z_i, z_j))`, hence
//! `d = -log p + 2 log E[exp(nu)]`.

use serde::{Deserialize, Serialize};

use crate::cliques::{almost_clique, CliqueSet};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::SymMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMatrix {
    pub p: SymMatrix,
    /// Row-major K x K flags marking entries raised to the `1/ell^2` floor.
    pub floored: Vec<bool>,
}

impl ProbMatrix {
    pub fn order(&self) -> usize {
        self.p.order()
    }

    pub fn is_floored(&self, i: usize, j: usize) -> bool {
        self.floored[i * self.order() + j]
    }

    pub fn floor_count(&self) -> usize {
        self.floored.iter().filter(|&&f| f).count() / 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub d: SymMatrix,
    /// The `E[exp(nu)]` estimate used.
    pub e_nu_hat: f64,
    /// Off-diagonal pairs whose raw estimate was negative and clamped to zero.
    pub clamp_count: usize,
}

impl DistanceMatrix {
    pub fn order(&self) -> usize {
        self.d.order()
    }

    /// Wraps an exact distance matrix.
    pub fn exact(d: SymMatrix) -> Self {
        DistanceMatrix {
            d,
            e_nu_hat: 1.0,
            clamp_count: 0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.d.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// Counts edges between distinct nodes of `a` and `b` and the number of
/// such node pairs.
pub(crate) fn cross_counts(g: &Graph, a: &[usize], b: &[usize]) -> (usize, usize) {
    let mut edges = 0;
    let mut pairs = 0;
    for &i in a {
        for &j in b {
            if i != j {
                pairs += 1;
                edges += usize::from(g.has_edge(i, j));
            }
        }
    }
    (edges, pairs)
}

/// `p_hat[k][k'] = (edges between C_k and C_k') / ell^2`, with node pairs
/// `(i, i)` from shared members left out of both counts. Zero entries are
/// raised to `1/ell^2` and flagged; the diagonal is 1.
pub fn estimate_p(g: &Graph, cs: &CliqueSet) -> Result<ProbMatrix> {
    let k = cs.k();
    let ell = cs.ell;
    for c in &cs.cliques {
        if c.len() != ell {
            return Err(Error::CliqueSize {
                expected: ell,
                found: c.len(),
            });
        }
        if let Some(&v) = c.iter().find(|&&v| v >= g.n()) {
            return Err(Error::NodeOutOfRange { index: v, n: g.n() });
        }
    }
    let floor = 1.0 / (ell * ell) as f64;
    let mut p = SymMatrix::identity(k);
    let mut floored = vec![false; k * k];
    for a in 0..k {
        for b in a + 1..k {
            let (edges, pairs) = cross_counts(g, &cs.cliques[a], &cs.cliques[b]);
            let v = if edges == 0 || pairs == 0 {
                floored[a * k + b] = true;
                floored[b * k + a] = true;
                floor
            } else {
                edges as f64 / pairs as f64
            };
            p.set(a, b, v);
        }
    }
    Ok(ProbMatrix { p, floored })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ENuEstimate {
    pub value: f64,
    /// Almost-clique edge density per clique; `None` when `|I_k(t)| < 2`.
    pub per_clique: Vec<Option<f64>>,
    /// True when no clique had a usable almost-clique and 1.0 was returned.
    pub fallback: bool,
}

/// Average almost-clique edge density, an estimate of `E[exp(nu)]`.
pub fn estimate_e_nu(g: &Graph, cs: &CliqueSet, t: usize) -> Result<ENuEstimate> {
    let mut per_clique = Vec::with_capacity(cs.k());
    for c in &cs.cliques {
        let members = almost_clique(g, c, t)?;
        let m = members.len();
        if m < 2 {
            per_clique.push(None);
            continue;
        }
        let mut edges = 0usize;
        for (a, &i) in members.iter().enumerate() {
            edges += members[a + 1..].iter().filter(|&&j| g.has_edge(i, j)).count();
        }
        per_clique.push(Some(edges as f64 / (m * (m - 1) / 2) as f64));
    }
    let used: Vec<f64> = per_clique.iter().flatten().copied().collect();
    if used.is_empty() {
        log::warn!("no clique has an almost-clique with two or more nodes; using E[exp(nu)] = 1");
        return Ok(ENuEstimate {
            value: 1.0,
            per_clique,
            fallback: true,
        });
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    if mean <= 0.0 {
        log::warn!("almost-cliques contain no edges; using E[exp(nu)] = 1");
        return Ok(ENuEstimate {
            value: 1.0,
            per_clique,
            fallback: true,
        });
    }
    Ok(ENuEstimate {
        value: mean,
        per_clique,
        fallback: false,
    })
}

/// `d = max(0, -log p + 2 log e_nu)` off the diagonal, zero on it.
pub fn estimate_d(p: &SymMatrix, e_nu: f64) -> Result<DistanceMatrix> {
    if !(e_nu > 0.0 && e_nu <= 1.0) {
        return Err(Error::invalid(format!("E[exp(nu)] estimate {e_nu} outside (0, 1]")));
    }
    let shift = 2.0 * e_nu.ln();
    let k = p.order();
    let mut d = SymMatrix::zeros(k);
    let mut clamp_count = 0;
    for a in 0..k {
        for b in a + 1..k {
            let pv = p.get(a, b);
            if !(pv > 0.0 && pv <= 1.0) {
                return Err(Error::invalid(format!("probability {pv} at ({a}, {b}) outside (0, 1]")));
            }
            let raw = -pv.ln() + shift;
            if raw < 0.0 {
                clamp_count += 1;
            }
            d.set(a, b, raw.max(0.0));
        }
    }
    Ok(DistanceMatrix {
        d,
        e_nu_hat: e_nu,
        clamp_count,
    })
}
