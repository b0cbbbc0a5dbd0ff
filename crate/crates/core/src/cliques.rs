//! Clique enumeration, randomized selection of K well-separated cliques,
//! and almost-clique construction.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BitIter, Graph};
use crate::seeds;

/// Default size of the candidate pool the selector draws from.
pub const DEFAULT_CANDIDATE_CAP: usize = 50_000;
/// Default number of random K-subsets evaluated.
pub const DEFAULT_DRAWS: usize = 1_000_000;

/// K node sets of size `ell`, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueSet {
    pub ell: usize,
    pub cliques: Vec<Vec<usize>>,
    /// `sum_{i != j} |C_i ∩ C_j|` over ordered pairs.
    pub overlap_score: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub almost: Option<Vec<Vec<usize>>>,
}

impl CliqueSet {
    /// Wraps explicit node sets, checking sizes.
    pub fn new(cliques: Vec<Vec<usize>>) -> Result<Self> {
        let ell = cliques.first().map_or(0, Vec::len);
        if cliques.len() < 2 || ell < 2 {
            return Err(Error::invalid("a clique set needs K >= 2 cliques of size >= 2"));
        }
        let mut cliques = cliques;
        for c in &mut cliques {
            if c.len() != ell {
                return Err(Error::CliqueSize {
                    expected: ell,
                    found: c.len(),
                });
            }
            c.sort_unstable();
            if c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid("clique lists a node twice"));
            }
        }
        let overlap_score = overlap_score(&cliques.iter().collect::<Vec<_>>());
        Ok(CliqueSet {
            ell,
            cliques,
            overlap_score,
            almost: None,
        })
    }

    pub fn k(&self) -> usize {
        self.cliques.len()
    }

    /// Attaches the almost-cliques `I_k(t)` for every clique.
    pub fn with_almost(mut self, g: &Graph, t: usize) -> Result<Self> {
        self.almost = Some(self.cliques.iter().map(|c| almost_clique(g, c, t)).collect::<Result<_>>()?);
        Ok(self)
    }

    /// Sub-collection given by `indices`.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        CliqueSet::new(indices.iter().map(|&i| self.cliques[i].clone()).collect())
    }
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn overlap_score(cliques: &[&Vec<usize>]) -> usize {
    let mut s = 0;
    for i in 0..cliques.len() {
        for j in i + 1..cliques.len() {
            s += 2 * intersection_size(cliques[i], cliques[j]);
        }
    }
    s
}

/// At least one edge between distinct nodes of `a` and `b`.
fn has_cross_edge(g: &Graph, a: &[usize], b: &[usize]) -> bool {
    a.iter().any(|&i| b.iter().any(|&j| i != j && g.has_edge(i, j)))
}

pub fn is_clique(g: &Graph, nodes: &[usize]) -> bool {
    nodes
        .iter()
        .enumerate()
        .all(|(a, &u)| nodes[a + 1..].iter().all(|&v| g.has_edge(u, v)))
}

fn edge_density(g: &Graph, nodes: &[usize]) -> f64 {
    let k = nodes.len();
    if k < 2 {
        return 1.0;
    }
    let mut e = 0usize;
    for (a, &u) in nodes.iter().enumerate() {
        e += nodes[a + 1..].iter().filter(|&&v| g.has_edge(u, v)).count();
    }
    e as f64 / (k * (k - 1) / 2) as f64
}

/// Search steps allowed per root node. Looking for cliques larger than
/// any present in a dense region is exponential without it.
const ROOT_STEP_BUDGET: usize = 20_000;

struct Enumerator<'a> {
    g: &'a Graph,
    ell: usize,
    quota: usize,
    found_here: usize,
    truncated: bool,
    steps_here: usize,
    budget_hit: bool,
    stack: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl Enumerator<'_> {
    fn expand(&mut self, cand: &[u64]) {
        self.steps_here += 1;
        if self.steps_here > ROOT_STEP_BUDGET {
            self.budget_hit = true;
            return;
        }
        if self.stack.len() == self.ell {
            self.out.push(self.stack.clone());
            self.found_here += 1;
            return;
        }
        let avail: usize = cand.iter().map(|w| w.count_ones() as usize).sum();
        if self.stack.len() + avail < self.ell {
            return;
        }
        let words = cand.len();
        let mut next = vec![0u64; words];
        for w in BitIter::new(cand) {
            if self.steps_here > ROOT_STEP_BUDGET {
                return;
            }
            if self.found_here >= self.quota {
                self.truncated = true;
                return;
            }
            let row = self.g.row(w);
            // keep only candidates above w to visit each clique once
            for (k, slot) in next.iter_mut().enumerate() {
                let above = if k < w / 64 {
                    0
                } else if k == w / 64 {
                    if w % 64 == 63 {
                        0
                    } else {
                        !0u64 << (w % 64 + 1)
                    }
                } else {
                    !0u64
                };
                *slot = cand[k] & row[k] & above;
            }
            self.stack.push(w);
            self.expand(&next);
            self.stack.pop();
        }
    }
}

fn enumerate_with_quota(g: &Graph, ell: usize, quota: usize) -> (Vec<Vec<usize>>, bool, bool) {
    let n = g.n();
    let mut e = Enumerator {
        g,
        ell,
        quota,
        found_here: 0,
        truncated: false,
        steps_here: 0,
        budget_hit: false,
        stack: Vec::with_capacity(ell),
        out: Vec::new(),
    };
    let mut cand = vec![0u64; g.words()];
    for v in 0..n {
        if g.degree(v) + 1 < ell {
            continue;
        }
        for w in cand.iter_mut() {
            *w = 0;
        }
        for u in g.neighbors(v).filter(|&u| u > v) {
            cand[u / 64] |= 1 << (u % 64);
        }
        e.found_here = 0;
        e.steps_here = 0;
        e.stack.clear();
        e.stack.push(v);
        e.expand(&cand);
    }
    (e.out, e.truncated, e.budget_hit)
}

/// Up to `cap` distinct `ell`-cliques, each sorted ascending.
///
/// Each clique is found once by ordered expansion from its smallest node.
/// When the graph holds more than `cap` cliques, the budget is spread over
/// the root nodes (a per-root quota, doubled until the cap is reached) so
/// the pool covers the whole graph instead of the first dense region. The
/// search from each root is also capped at a fixed number of steps, so the
/// pool is not guaranteed complete in dense graphs. The output is
/// deterministic for a given graph.
pub fn enumerate_cliques(g: &Graph, ell: usize, cap: usize) -> Vec<Vec<usize>> {
    if ell < 1 || cap == 0 {
        return Vec::new();
    }
    if ell == 1 {
        return (0..g.n().min(cap)).map(|v| vec![v]).collect();
    }
    let roots = g.n().max(1);
    let mut quota = cap.div_ceil(roots).max(1);
    loop {
        let (mut out, truncated, budget_hit) = enumerate_with_quota(g, ell, quota);
        if !truncated || out.len() >= cap {
            if budget_hit {
                log::warn!("clique search from some roots stopped after {ROOT_STEP_BUDGET} steps; the pool may be incomplete");
            }
            out.truncate(cap);
            return out;
        }
        quota = quota.saturating_mul(2);
    }
}

/// Candidate node sets: exact `ell`-cliques, plus, when `density < 1`,
/// `(ell-1)`-cliques extended by one node such that the set keeps edge
/// density at least `density`.
pub fn candidate_sets(g: &Graph, ell: usize, cap: usize, density: f64) -> Vec<Vec<usize>> {
    let mut out = enumerate_cliques(g, ell, cap);
    if density >= 1.0 || ell < 3 || out.len() >= cap {
        return out;
    }
    let mut seen: std::collections::HashSet<Vec<usize>> = out.iter().cloned().collect();
    for base in enumerate_cliques(g, ell - 1, cap) {
        for w in 0..g.n() {
            if out.len() >= cap {
                return out;
            }
            if base.binary_search(&w).is_ok() || !base.iter().any(|&b| g.has_edge(b, w)) {
                continue;
            }
            let mut set = base.clone();
            set.push(w);
            set.sort_unstable();
            if edge_density(g, &set) >= density && seen.insert(set.clone()) {
                out.push(set);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub draws: usize,
    pub candidate_cap: usize,
    /// Minimum edge density of a candidate set; 1.0 means exact cliques.
    pub density: f64,
}

impl Default for SelectOptions {
    fn default() -> Self {
        SelectOptions {
            draws: DEFAULT_DRAWS,
            candidate_cap: DEFAULT_CANDIDATE_CAP,
            density: 1.0,
        }
    }
}

/// Randomized search for `k` cliques of size `ell` with minimal pairwise
/// overlap such that every pair of cliques is joined by at least one edge.
///
/// Each draw is a uniformly random `k`-subset of the candidate pool. Among
/// equally good draws the earliest wins, so a zero-overlap feasible draw
/// ends the search.
pub fn select_cliques(g: &Graph, k: usize, ell: usize, opts: &SelectOptions, seed: u64) -> Result<CliqueSet> {
    if k < 2 || ell < 2 {
        return Err(Error::invalid(format!("need K >= 2 and ell >= 2, got K={k} ell={ell}")));
    }
    if opts.draws == 0 {
        return Err(Error::invalid("draws must be at least 1"));
    }
    let pool = candidate_sets(g, ell, opts.candidate_cap, opts.density);
    select_from_pool(g, &pool, k, ell, opts.draws, seed)
}

pub(crate) fn select_from_pool(
    g: &Graph,
    pool: &[Vec<usize>],
    k: usize,
    ell: usize,
    draws: usize,
    seed: u64,
) -> Result<CliqueSet> {
    if pool.len() < k {
        return Err(Error::CliqueSelectionInfeasible(format!(
            "only {} candidate {ell}-cliques, need K={k}; lower K or ell",
            pool.len()
        )));
    }
    let mut rng = seeds::rng_for(seed, 0xC119);
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut picked: Vec<&Vec<usize>> = Vec::with_capacity(k);
    for _ in 0..draws {
        let idx = index::sample(&mut rng, pool.len(), k).into_vec();
        picked.clear();
        picked.extend(idx.iter().map(|&i| &pool[i]));
        let score = overlap_score(&picked);
        if best.as_ref().is_some_and(|(b, _)| score >= *b) {
            continue;
        }
        let feasible = (0..k).all(|a| (a + 1..k).all(|b| has_cross_edge(g, picked[a], picked[b])));
        if feasible {
            best = Some((score, idx));
            if score == 0 {
                break;
            }
        }
    }
    let (score, idx) = best.ok_or_else(|| {
        Error::CliqueSelectionInfeasible(format!(
            "no {k} cliques of size {ell} with every pair connected found in {draws} draws; lower K or ell"
        ))
    })?;
    let mut chosen: Vec<Vec<usize>> = idx.iter().map(|&i| pool[i].clone()).collect();
    chosen.sort();
    let mut cs = CliqueSet::new(chosen)?;
    debug_assert_eq!(cs.overlap_score, score);
    cs.overlap_score = score;
    Ok(cs)
}

/// `I(t)`: nodes outside `clique` adjacent to at least `t` and fewer than
/// `|clique|` of its members.
pub fn almost_clique(g: &Graph, clique: &[usize], t: usize) -> Result<Vec<usize>> {
    let ell = clique.len();
    if t < 1 || t >= ell {
        return Err(Error::invalid(format!("almost-clique threshold t={t} must satisfy 1 <= t < {ell}")));
    }
    let mut members = vec![false; g.n()];
    for &c in clique {
        if c >= g.n() {
            return Err(Error::NodeOutOfRange { index: c, n: g.n() });
        }
        members[c] = true;
    }
    Ok((0..g.n())
        .filter(|&j| !members[j])
        .filter(|&j| {
            let links = clique.iter().filter(|&&i| g.has_edge(i, j)).count();
            links >= t && links < ell
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_triangles_bridged() -> Graph {
        Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap()
    }

    fn brute_force_cliques(g: &Graph, ell: usize) -> Vec<Vec<usize>> {
        let n = g.n();
        let mut out = Vec::new();
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != ell {
                continue;
            }
            let nodes: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if is_clique(g, &nodes) {
                out.push(nodes);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate_cliques(&Graph::complete(3), 3, 100), vec![vec![0, 1, 2]]);
        let c4 = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert!(enumerate_cliques(&c4, 3, 100).is_empty());
        assert_eq!(enumerate_cliques(&Graph::complete(5), 3, 100).len(), 10);
    }

    #[test]
    fn enumerate_respects_cap() {
        let g = Graph::complete(12);
        let got = enumerate_cliques(&g, 4, 37);
        assert_eq!(got.len(), 37);
        assert!(got.iter().all(|c| is_clique(&g, c)));
        // quota spreads the pool over several roots
        let roots: std::collections::HashSet<usize> = got.iter().map(|c| c[0]).collect();
        assert!(roots.len() > 1);
    }

    #[test]
    fn select_bridged_triangles() {
        let g = two_triangles_bridged();
        let cs = select_cliques(&g, 2, 3, &SelectOptions { draws: 100, ..Default::default() }, 1).unwrap();
        assert_eq!(cs.cliques, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert_eq!(cs.overlap_score, 0);
    }

    #[test]
    fn select_in_complete_graph_finds_disjoint_triangles() {
        let g = Graph::complete(6);
        let cs = select_cliques(&g, 2, 3, &SelectOptions { draws: 1000, ..Default::default() }, 5).unwrap();
        assert_eq!(cs.overlap_score, 0);
        assert_eq!(intersection_size(&cs.cliques[0], &cs.cliques[1]), 0);
    }

    #[test]
    fn select_with_too_few_cliques() {
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]).unwrap();
        let err = select_cliques(&g, 2, 3, &SelectOptions::default(), 0).unwrap_err();
        assert!(matches!(err, Error::CliqueSelectionInfeasible(_)));
    }

    #[test]
    fn select_requires_cross_edges() {
        // two triangles with no edge between them
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let err = select_cliques(&g, 2, 3, &SelectOptions { draws: 50, ..Default::default() }, 0).unwrap_err();
        assert!(matches!(err, Error::CliqueSelectionInfeasible(_)));
    }

    #[test]
    fn almost_clique_definition() {
        // triangle 0,1,2; node 3 sees 0 and 1; node 4 sees all three
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (0, 2), (3, 0), (3, 1), (4, 0), (4, 1), (4, 2)]).unwrap();
        assert_eq!(almost_clique(&g, &[0, 1, 2], 2).unwrap(), vec![3]);
        assert_eq!(almost_clique(&g, &[0, 1, 2], 1).unwrap(), vec![3]);
        assert!(almost_clique(&g, &[0, 1, 2], 3).is_err());
        assert!(almost_clique(&g, &[0, 1, 2], 0).is_err());
    }

    #[test]
    fn near_clique_candidates() {
        // K4 minus one edge: no exact 4-clique, but density 5/6
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert!(candidate_sets(&g, 4, 100, 1.0).is_empty());
        assert_eq!(candidate_sets(&g, 4, 100, 0.8), vec![vec![0, 1, 2, 3]]);
        assert!(candidate_sets(&g, 4, 100, 0.9).is_empty());
    }

    #[test]
    fn selection_is_deterministic() {
        let g = Graph::complete(15);
        let o = SelectOptions { draws: 2000, ..Default::default() };
        assert_eq!(select_cliques(&g, 3, 4, &o, 9).unwrap(), select_cliques(&g, 3, 4, &o, 9).unwrap());
    }

    fn arb_graph() -> impl Strategy<Value = Graph> {
        (3usize..10, proptest::collection::vec(0.0f64..1.0, 45), 0.2f64..0.9).prop_map(|(n, u, p)| {
            let mut g = Graph::empty(n);
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if u[k] < p {
                        g.insert(i, j);
                    }
                    k += 1;
                }
            }
            g
        })
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(g in arb_graph(), ell in 2usize..5) {
            let mut got = enumerate_cliques(&g, ell, 10_000);
            got.sort();
            prop_assert_eq!(got, brute_force_cliques(&g, ell));
        }

        #[test]
        fn almost_clique_disjoint_from_clique(g in arb_graph(), t in 1usize..3) {
            for c in enumerate_cliques(&g, 3, 50) {
                let a = almost_clique(&g, &c, t).unwrap();
                prop_assert!(a.iter().all(|v| !c.contains(v)));
            }
        }

        #[test]
        fn selected_cliques_are_complete(g in arb_graph(), seed in 0u64..100) {
            let o = SelectOptions { draws: 200, ..Default::default() };
            if let Ok(cs) = select_cliques(&g, 2, 3, &o, seed) {
                for c in &cs.cliques {
                    prop_assert!(is_clique(&g, c));
                }
            }
        }
    }
}
