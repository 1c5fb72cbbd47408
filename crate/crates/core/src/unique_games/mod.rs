//! Unique Games instances over the label set `[N]`.
//!
//! An edge `(v, w, π)` is satisfied by `λ` when `λ(v) = π(λ(w))`.

pub(crate) mod format;
mod search;

pub use format::{parse_labeling, parse_permutation, parse_ug, write_labeling, write_permutation, write_ug};
pub use search::{opt_exhaustive, opt_search, plant_instance, PlantedInstance, DEFAULT_EXHAUSTIVE_BUDGET};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation(Vec<u32>);

impl Permutation {
    pub fn new(map: Vec<u32>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &x in &map {
            let x = x as usize;
            if x >= n || seen[x] {
                return invalid(format!("{map:?} is not a bijection on [{n}]"));
            }
            seen[x] = true;
        }
        Ok(Permutation(map))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n as u32).collect())
    }

    /// `l ↦ l ⊕ shift` on `[2^k]`.
    pub fn xor_shift(n: usize, shift: u32) -> Self {
        assert!(n.is_power_of_two() && (shift as usize) < n);
        Permutation((0..n as u32).map(|l| l ^ shift).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn apply(&self, i: u32) -> u32 {
        self.0[i as usize]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0u32; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p as usize] = i as u32;
        }
        Permutation(inv)
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &Self) -> Self {
        Permutation(other.0.iter().map(|&i| self.apply(i)).collect())
    }

    /// Image of a subset bitmask: `{π(j) : j ∈ set}`.
    pub fn map_subset(&self, set: usize) -> usize {
        let mut out = 0usize;
        let mut rest = set;
        while rest != 0 {
            let j = rest.trailing_zeros();
            out |= 1 << self.apply(j);
            rest &= rest - 1;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UgEdge {
    pub v: usize,
    pub w: usize,
    pub weight: f64,
    pub pi: Permutation,
}

impl UgEdge {
    #[inline]
    pub fn is_satisfied(&self, lam: &Labeling) -> bool {
        lam.get(self.v) == self.pi.apply(lam.get(self.w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UgInstance {
    labels: usize,
    vertices: usize,
    edges: Vec<UgEdge>,
    total: f64,
}

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

impl UgInstance {
    /// Validates vertex ids, bijections and `Σ weights = 1`.
    pub fn new(labels: usize, vertices: usize, edges: Vec<UgEdge>) -> Result<Self> {
        if labels == 0 || vertices == 0 {
            return invalid("instance needs at least one vertex and one label");
        }
        let mut total = 0.0;
        for (idx, e) in edges.iter().enumerate() {
            if e.v >= vertices || e.w >= vertices {
                return invalid(format!("edge {idx} references a vertex outside 0..{vertices}"));
            }
            if e.pi.len() != labels {
                return invalid(format!("edge {idx} permutation has length {}", e.pi.len()));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid(format!("edge {idx} has weight {}", e.weight));
            }
            total += e.weight;
        }
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return invalid(format!("edge weights sum to {total:.17}, expected 1"));
        }
        Ok(UgInstance { labels, vertices, edges, total })
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[UgEdge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// Weighted degrees; a self-loop counts towards its vertex twice.
    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.vertices];
        for e in &self.edges {
            deg[e.v] += e.weight;
            deg[e.w] += e.weight;
        }
        deg
    }

    /// `max − min` of the weighted degrees.
    pub fn regularity_deviation(&self) -> f64 {
        let deg = self.weighted_degrees();
        let max = deg.iter().copied().fold(f64::MIN, f64::max);
        let min = deg.iter().copied().fold(f64::MAX, f64::min);
        max - min
    }

    /// Satisfied weight, normalized by the total weight so that a labeling
    /// satisfying every edge has value exactly 1.
    pub fn value(&self, lam: &Labeling) -> Result<f64> {
        self.check_labeling(lam)?;
        Ok(self.value_unchecked(lam))
    }

    pub(crate) fn value_unchecked(&self, lam: &Labeling) -> f64 {
        self.edges
            .iter()
            .filter(|e| e.is_satisfied(lam))
            .map(|e| e.weight)
            .sum::<f64>()
            / self.total_weight()
    }

    pub fn check_labeling(&self, lam: &Labeling) -> Result<()> {
        if lam.len() != self.vertices {
            return Err(Error::ShapeMismatch(format!(
                "labeling covers {} vertices, instance has {}",
                lam.len(),
                self.vertices
            )));
        }
        if let Some(v) = lam.0.iter().position(|&l| l as usize >= self.labels) {
            return invalid(format!("vertex {v} has label {} outside [{}]", lam.0[v], self.labels));
        }
        Ok(())
    }

    /// Renames every label through the bijection `rho`: `π ↦ ρ∘π∘ρ⁻¹`.
    pub fn relabel(&self, rho: &Permutation) -> Result<Self> {
        if rho.len() != self.labels {
            return Err(Error::ShapeMismatch("relabeling has the wrong length".into()));
        }
        let inv = rho.inverse();
        let edges = self
            .edges
            .iter()
            .map(|e| UgEdge {
                v: e.v,
                w: e.w,
                weight: e.weight,
                pi: rho.compose(&e.pi).compose(&inv),
            })
            .collect();
        Ok(UgInstance { labels: self.labels, vertices: self.vertices, edges, total: self.total })
    }

    /// For each vertex, the indices of incident edges.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices];
        for (idx, e) in self.edges.iter().enumerate() {
            inc[e.v].push(idx);
            if e.w != e.v {
                inc[e.w].push(idx);
            }
        }
        inc
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(pub Vec<u32>);

impl Labeling {
    pub fn constant(vertices: usize, label: u32) -> Self {
        Labeling(vec![label; vertices])
    }

    #[inline]
    pub fn get(&self, v: usize) -> u32 {
        self.0[v]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn relabel(&self, rho: &Permutation) -> Self {
        Labeling(self.0.iter().map(|&l| rho.apply(l)).collect())
    }
}

/// Weighted undirected graph with per-edge weights; parallel edges allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.vertices];
        for &(a, b, w) in &self.edges {
            deg[a] += w;
            deg[b] += w;
        }
        deg
    }

    /// Parallel edges summed, endpoints ordered, sorted.
    pub fn merged(&self) -> Vec<((usize, usize), f64)> {
        let mut map = std::collections::BTreeMap::new();
        for &(a, b, w) in &self.edges {
            *map.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        map.into_iter().collect()
    }

    /// `1 − Φ(S)`: pick a uniform vertex of `S`, then an incident edge by weight.
    pub fn one_minus_expansion(&self, set: &[usize]) -> Result<f64> {
        if set.is_empty() {
            return invalid("expansion of the empty set");
        }
        let mut member = vec![false; self.vertices];
        for &s in set {
            if s >= self.vertices {
                return invalid(format!("vertex {s} out of range"));
            }
            member[s] = true;
        }
        let mut inside = vec![0.0; self.vertices];
        for &(a, b, w) in &self.edges {
            if member[a] && member[b] {
                inside[a] += w;
                inside[b] += w;
            }
        }
        let deg = self.degrees();
        let mut total = 0.0;
        let mut count = 0usize;
        for (s, &m) in member.iter().enumerate() {
            if m {
                count += 1;
                if deg[s] > 0.0 {
                    total += inside[s] / deg[s];
                }
            }
        }
        Ok(total / count as f64)
    }
}

/// Vertex `(v, i)` of the label-extended graph gets id `v·N + i`.
pub fn label_extended_graph(u: &UgInstance) -> WeightedGraph {
    let n = u.labels;
    let mut edges = Vec::with_capacity(u.edges.len() * n);
    for e in &u.edges {
        for i in 0..n as u32 {
            edges.push((e.v * n + e.pi.apply(i) as usize, e.w * n + i as usize, e.weight));
        }
    }
    WeightedGraph { vertices: u.vertices * n, edges }
}

/// Both sides of `val(λ) = 1 − Φ(S'_λ)`, computed independently.
pub fn labeling_set_expansion_identity(u: &UgInstance, lam: &Labeling) -> Result<(f64, f64)> {
    let val = u.value(lam)?;
    let graph = label_extended_graph(u);
    let set: Vec<usize> = (0..u.vertices).map(|v| v * u.labels + lam.get(v) as usize).collect();
    Ok((val, graph.one_minus_expansion(&set)?))
}
