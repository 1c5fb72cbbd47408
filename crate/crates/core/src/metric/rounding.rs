//! From a sparse-cut oracle to a `B/3`-balanced cut: peel sparse cuts,
//! erasing the demands they separate, then take the best XOR of the cuts
//! found.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::unique_games::format::{content_lines, parse_error, parse_field};
use crate::hypercube::NoisyHypercube;
use crate::rng;

/// Weighted edges and demands on `n` vertices; a cut is a side vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub demands: Vec<(usize, usize, f64)>,
}

impl DemandGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>, demands: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(a, b, w) in edges.iter().chain(&demands) {
            if a >= n || b >= n {
                return invalid(format!("pair ({a}, {b}) outside {n} vertices"));
            }
            if !(w.is_finite() && w >= 0.0) {
                return invalid(format!("pair ({a}, {b}) has weight {w}"));
            }
        }
        Ok(DemandGraph { n, edges, demands })
    }

    /// Every cube pair weighted by the noisy-hypercube step, normalized to
    /// total one, with unit demand on every pair.
    pub fn from_hypercube(cube: &NoisyHypercube) -> Result<Self> {
        let n = 1usize << cube.n();
        let total = cube.total_weight();
        let mut edges = Vec::new();
        let mut demands = Vec::new();
        for f in 0..n {
            for g in f + 1..n {
                let w = cube.pair_weight(f as u64, g as u64)?;
                if w > 0.0 {
                    edges.push((f, g, w / total));
                }
                demands.push((f, g, 1.0));
            }
        }
        DemandGraph::new(n, edges, demands)
    }

    pub fn total_demand(&self) -> f64 {
        self.demands.iter().map(|d| d.2).sum()
    }

    pub fn edge_weight(&self, cut: &[bool]) -> f64 {
        self.edges.iter().filter(|e| cut[e.0] != cut[e.1]).map(|e| e.2).sum()
    }

    pub fn demand_cut(&self, cut: &[bool]) -> f64 {
        self.demand_cut_with(cut, |i| self.demands[i].2)
    }

    fn demand_cut_with(&self, cut: &[bool], dem: impl Fn(usize) -> f64) -> f64 {
        self.demands
            .iter()
            .enumerate()
            .filter(|(_, d)| cut[d.0] != cut[d.1])
            .map(|(i, _)| dem(i))
            .sum()
    }
}

/// `(cut edge weight) / (cut demand)`
pub fn sparsity(graph: &DemandGraph, cut: &[bool]) -> Result<f64> {
    if cut.len() != graph.n {
        return invalid(format!("cut has {} sides, graph has {} vertices", cut.len(), graph.n));
    }
    if cut.iter().all(|&s| s) || cut.iter().all(|&s| !s) {
        return invalid("trivial cut");
    }
    let dem = graph.demand_cut(cut);
    if dem <= 0.0 {
        return invalid("cut separates no demand");
    }
    Ok(graph.edge_weight(cut) / dem)
}

/// Supplies cuts of low sparsity against the remaining demands.
pub trait SparseCutOracle {
    fn find(&mut self, graph: &DemandGraph, demands: &[f64]) -> Option<Vec<bool>>;
}

/// Replays a fixed list of cuts.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    pub cuts: Vec<Vec<bool>>,
    next: usize,
}

impl ScriptedOracle {
    pub fn new(cuts: Vec<Vec<bool>>) -> Self {
        ScriptedOracle { cuts, next: 0 }
    }
}

impl SparseCutOracle for ScriptedOracle {
    fn find(&mut self, _: &DemandGraph, _: &[f64]) -> Option<Vec<bool>> {
        let cut = self.cuts.get(self.next).cloned();
        self.next += 1;
        cut
    }
}

/// Random starts improved by single-vertex moves on the sparsity ratio.
#[derive(Debug, Clone)]
pub struct LocalSearchOracle {
    pub seed: u64,
    pub restarts: usize,
    pub max_passes: usize,
    calls: u64,
}

impl LocalSearchOracle {
    pub fn new(seed: u64, restarts: usize, max_passes: usize) -> Self {
        LocalSearchOracle { seed, restarts, max_passes, calls: 0 }
    }
}

fn ratio(graph: &DemandGraph, demands: &[f64], cut: &[bool]) -> f64 {
    let dem = graph.demand_cut_with(cut, |i| demands[i]);
    if dem <= 1e-15 {
        f64::INFINITY
    } else {
        graph.edge_weight(cut) / dem
    }
}

impl SparseCutOracle for LocalSearchOracle {
    fn find(&mut self, graph: &DemandGraph, demands: &[f64]) -> Option<Vec<bool>> {
        let call = self.calls;
        self.calls += 1;
        let mut best: Option<(f64, Vec<bool>)> = None;
        for r in 0..self.restarts.max(1) {
            let mut rng = rng::indexed_stream(self.seed, "sparse_cut", call * 1_000_003 + r as u64);
            let mut cut: Vec<bool> = (0..graph.n).map(|_| rng.gen()).collect();
            let mut score = ratio(graph, demands, &cut);
            for _ in 0..self.max_passes {
                let mut moved = false;
                for v in 0..graph.n {
                    cut[v] = !cut[v];
                    let s = ratio(graph, demands, &cut);
                    if s < score - 1e-15 {
                        score = s;
                        moved = true;
                    } else {
                        cut[v] = !cut[v];
                    }
                }
                if !moved {
                    break;
                }
            }
            if score.is_finite() && best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, cut));
            }
        }
        best.map(|b| b.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundingOptions {
    /// Target `B`; the result should separate at least `B/3`.
    pub balance: f64,
    /// Rounds without new demand before giving up.
    pub patience: usize,
    pub max_rounds: usize,
    /// Every nonempty subset is tried when at most this many cuts were found.
    pub xor_exhaustive_limit: usize,
    pub xor_samples: usize,
    pub seed: u64,
}

impl RoundingOptions {
    pub fn new(balance: f64) -> Self {
        RoundingOptions { balance, patience: 3, max_rounds: 64, xor_exhaustive_limit: 16, xor_samples: 4096, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct XorResult {
    pub cut: Vec<bool>,
    pub demand: f64,
    pub edge_weight: f64,
    pub subsets_evaluated: usize,
    /// Mean separated demand over the evaluated subsets, empty subset included.
    pub mean_demand: f64,
    /// Whether the chosen cut reaches the threshold.
    pub meets_threshold: bool,
}

/// Best `⊕_{i∈A} φ_i` by (demand at least `threshold`, least edge weight).
pub fn best_xor_combination(
    graph: &DemandGraph,
    cuts: &[Vec<bool>],
    threshold: f64,
    opts: &RoundingOptions,
) -> Result<XorResult> {
    if cuts.is_empty() {
        return invalid("no cuts to combine");
    }
    if cuts.len() > 63 {
        return invalid("at most 63 cuts can be combined");
    }
    let combine = |mask: u64| -> Vec<bool> {
        let mut side = vec![false; graph.n];
        for (i, c) in cuts.iter().enumerate() {
            if (mask >> i) & 1 == 1 {
                for (s, &v) in side.iter_mut().zip(c) {
                    *s ^= v;
                }
            }
        }
        side
    };
    let masks: Vec<u64> = if cuts.len() <= opts.xor_exhaustive_limit {
        (0..1u64 << cuts.len()).collect()
    } else {
        let mut rng = rng::stream(opts.seed, "xor_subsets");
        (0..opts.xor_samples).map(|_| rng.gen::<u64>() & ((1u64 << cuts.len()) - 1)).collect()
    };
    let mut best: Option<(bool, f64, f64, Vec<bool>)> = None;
    let mut total_demand = 0.0;
    for &mask in &masks {
        let side = combine(mask);
        let dem = graph.demand_cut(&side);
        total_demand += dem;
        let w = graph.edge_weight(&side);
        let meets = dem >= threshold - 1e-12;
        let better = match &best {
            None => true,
            Some((bm, bd, bw, _)) => (meets && !bm) || (meets == *bm && if meets { w < *bw } else { dem > *bd }),
        };
        if better {
            best = Some((meets, dem, w, side));
        }
    }
    let (meets_threshold, demand, edge_weight, cut) = best.expect("at least one subset");
    Ok(XorResult {
        cut,
        demand,
        edge_weight,
        subsets_evaluated: masks.len(),
        mean_demand: total_demand / masks.len() as f64,
        meets_threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingResult {
    pub cut: Vec<bool>,
    pub edge_weight: f64,
    pub demand_cut: f64,
    /// The first qualifying oracle cut was returned as is.
    pub early_exit: bool,
    /// The oracle stalled or the XOR step missed `B/3`.
    pub partial: bool,
    pub cuts_found: Vec<Vec<bool>>,
    /// Demand erased by the peeled cuts; never exceeds the total.
    pub accumulated_demand: f64,
    pub xor: Option<XorResult>,
}

pub fn round_to_balanced_cut(
    graph: &DemandGraph,
    oracle: &mut dyn SparseCutOracle,
    opts: &RoundingOptions,
) -> Result<RoundingResult> {
    let third = opts.balance / 3.0;
    let mut remaining: Vec<f64> = graph.demands.iter().map(|d| d.2).collect();
    let mut cuts = Vec::new();
    let mut accumulated = 0.0;
    let mut stalled = 0;
    let mut partial = false;
    for _ in 0..opts.max_rounds {
        if accumulated >= 2.0 * opts.balance / 3.0 {
            break;
        }
        let Some(cut) = oracle.find(graph, &remaining) else {
            partial = true;
            break;
        };
        if cut.len() != graph.n {
            return invalid(format!("oracle returned {} sides for {} vertices", cut.len(), graph.n));
        }
        if cuts.is_empty() && graph.demand_cut(&cut) >= third {
            let (edge_weight, demand_cut) = (graph.edge_weight(&cut), graph.demand_cut(&cut));
            return Ok(RoundingResult {
                cut: cut.clone(),
                edge_weight,
                demand_cut,
                early_exit: true,
                partial: false,
                cuts_found: vec![cut],
                accumulated_demand: demand_cut,
                xor: None,
            });
        }
        let mut gained = 0.0;
        for (i, d) in graph.demands.iter().enumerate() {
            if cut[d.0] != cut[d.1] {
                gained += remaining[i];
                remaining[i] = 0.0;
            }
        }
        accumulated += gained;
        cuts.push(cut);
        if gained <= 1e-15 {
            stalled += 1;
            if stalled >= opts.patience {
                partial = true;
                break;
            }
        } else {
            stalled = 0;
        }
    }
    if accumulated < 2.0 * opts.balance / 3.0 {
        partial = true;
    }
    if cuts.is_empty() {
        return invalid("oracle produced no cut");
    }
    let xor = best_xor_combination(graph, &cuts, third, opts)?;
    partial |= !xor.meets_threshold;
    Ok(RoundingResult {
        cut: xor.cut.clone(),
        edge_weight: xor.edge_weight,
        demand_cut: xor.demand,
        early_exit: false,
        partial,
        cuts_found: cuts,
        accumulated_demand: accumulated,
        xor: Some(xor),
    })
}

/// `DEMANDS n`, then `E a b weight` and `D a b demand` lines.
pub fn write_demand_graph(graph: &DemandGraph) -> String {
    let mut out = format!("DEMANDS {}\n", graph.n);
    for &(a, b, w) in &graph.edges {
        writeln!(out, "E {a} {b} {w:.16e}").unwrap();
    }
    for &(a, b, d) in &graph.demands {
        writeln!(out, "D {a} {b} {d:.16e}").unwrap();
    }
    out
}

pub fn parse_demand_graph(text: &str) -> Result<DemandGraph> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("DEMANDS") {
        return parse_error(ln, "expected header `DEMANDS n`");
    }
    let n: usize = parse_field(ln, tok.next(), "n")?;
    let (mut edges, mut demands) = (Vec::new(), Vec::new());
    for (ln, line) in lines {
        let mut tok = line.split_whitespace();
        let kind = tok.next();
        let a = parse_field(ln, tok.next(), "endpoint")?;
        let b = parse_field(ln, tok.next(), "endpoint")?;
        let w = parse_field(ln, tok.next(), "weight")?;
        match kind {
            Some("E") => edges.push((a, b, w)),
            Some("D") => demands.push((a, b, w)),
            _ => return parse_error(ln, "expected an `E` or `D` line"),
        }
    }
    DemandGraph::new(n, edges, demands)
}

/// One `±1` per line, `+1` for vertices on the `true` side.
pub fn write_side_vector(cut: &[bool]) -> String {
    cut.iter().map(|&s| if s { "1\n" } else { "-1\n" }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::WindowMode;

    fn sides(n: usize, members: &[usize]) -> Vec<bool> {
        (0..n).map(|i| members.contains(&i)).collect()
    }

    fn two_pairs() -> DemandGraph {
        DemandGraph::new(
            4,
            vec![(0, 1, 0.5), (2, 3, 0.25), (1, 2, 0.125)],
            vec![(0, 1, 1.0), (2, 3, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn xor_of_two_disjoint_cuts() {
        let g = two_pairs();
        let cuts = vec![sides(4, &[0]), sides(4, &[2])];
        let r = best_xor_combination(&g, &cuts, 1.0, &RoundingOptions::new(3.0)).unwrap();
        assert_eq!(r.subsets_evaluated, 4);
        assert_eq!(r.mean_demand, 1.0);
        assert!(r.meets_threshold);
        assert_eq!(r.cut, sides(4, &[2]));
        assert_eq!(r.edge_weight, 0.375);
        assert_eq!(parse_demand_graph(&write_demand_graph(&g)).unwrap(), g);
        assert_eq!(write_side_vector(&r.cut), "-1\n-1\n1\n-1\n");
    }

    #[test]
    fn early_exit_returns_first_cut() {
        let g = two_pairs();
        let first = sides(4, &[0, 2]);
        let mut oracle = ScriptedOracle::new(vec![first.clone()]);
        let r = round_to_balanced_cut(&g, &mut oracle, &RoundingOptions::new(2.0)).unwrap();
        assert!(r.early_exit);
        assert_eq!(r.cut, first);
    }

    #[test]
    fn peeling_reaches_xor_stage() {
        let n = 8;
        let demands = (0..4).map(|i| (2 * i, 2 * i + 1, 1.0)).collect();
        let edges = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
        let g = DemandGraph::new(n, edges, demands).unwrap();
        let cuts: Vec<Vec<bool>> = (0..3).map(|i| sides(n, &[2 * i])).collect();
        let mut oracle = ScriptedOracle::new(cuts);
        let r = round_to_balanced_cut(&g, &mut oracle, &RoundingOptions::new(4.0)).unwrap();
        assert!(!r.early_exit);
        assert_eq!(r.cuts_found.len(), 3);
        assert!(r.accumulated_demand <= g.total_demand());
        assert!(r.demand_cut >= 4.0 / 3.0);
        assert!(!r.partial);
    }

    #[test]
    fn stalled_oracle_is_flagged() {
        let g = two_pairs();
        let mut oracle = ScriptedOracle::new(vec![sides(4, &[0]); 5]);
        let mut opts = RoundingOptions::new(6.0);
        opts.patience = 2;
        let r = round_to_balanced_cut(&g, &mut oracle, &opts).unwrap();
        assert!(r.partial);
        assert_eq!(r.accumulated_demand, 1.0);
    }

    #[test]
    fn hypercube_dictator_sparsity() {
        let (n, eta) = (4u32, 0.2);
        let cube = NoisyHypercube::new(n, eta, WindowMode::Disabled, false).unwrap();
        let g = DemandGraph::from_hypercube(&cube).unwrap();
        let cut: Vec<bool> = (0..16).map(|x| x & 1 == 1).collect();
        let expected = eta / (1.0 - (1.0 - eta).powi(n as i32)) / (16.0 * 16.0 / 4.0);
        assert!((sparsity(&g, &cut).unwrap() - expected).abs() < 1e-12);
        assert!(sparsity(&g, &[true; 16]).is_err());
        let scale = |e: &[(usize, usize, f64)]| e.iter().map(|&(a, b, w)| (a, b, 3.0 * w)).collect::<Vec<_>>();
        let both = DemandGraph::new(16, scale(&g.edges), scale(&g.demands)).unwrap();
        assert!((sparsity(&both, &cut).unwrap() - expected).abs() < 1e-12);
        let heavier = DemandGraph::new(16, scale(&g.edges), g.demands.clone()).unwrap();
        assert!((sparsity(&heavier, &cut).unwrap() - 3.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn local_search_oracle_finds_a_cut() {
        let g = two_pairs();
        let mut oracle = LocalSearchOracle::new(1, 4, 10);
        let cut = oracle.find(&g, &[1.0, 1.0]).unwrap();
        assert!(g.demand_cut(&cut) > 0.0);
    }
}
