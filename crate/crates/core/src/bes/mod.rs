//! The Balanced Edge-Separator instance produced by replacing every proof
//! bit of the Long Code test by a vertex.
//!
//! Block `v` holds the `2^N` vertices `(v, x)`. An edge record `(e, x, μ)`
//! joins `(v, x)` to `(w, (xμ)∘π_e)` with weight
//! `wt(e)·2^{-N}·ε^{|μ|}(1-ε)^{N-|μ|}`. Every pair inside a block has
//! demand one. Edges are never materialized: exact mode enumerates
//! `(e, x, μ)` on the fly and sampled mode draws them.

mod sdp;
mod search;

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fourier::BooleanFunction;
use crate::hypercube::binomial;
use crate::kv::KvInstance;
use crate::pcp::{self, permute_bits, sample_noise, Proof};
use crate::rng::{self, Estimate};
use crate::unique_games::format::{content_lines, parse_error, parse_field};
use crate::unique_games::{write_ug, Labeling, UgInstance};

pub use sdp::{
    assign_sdp_solution, check_bes_feasibility, sdp_objective, sdp_objective_mc, BesSdpSolution, FeasibilityOptions,
    SdpObjectiveReport,
};
pub use search::{balanced_cut_search, CandidateRecord, CutSearchResult, SearchStrategy};

/// Largest `N` supported by exact enumeration (`k ≤ 3`).
pub const EXACT_MAX_LABELS: usize = 8;
/// Largest `N` for which a cut is stored as explicit block tables.
pub const EXPLICIT_MAX_LABELS: usize = 16;
/// Largest `N` whose edge list is written out in full by [`write_bes`].
pub const EXPANDED_EXPORT_MAX_LABELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct BesInstance {
    ug: UgInstance,
    epsilon: f64,
    mode: BesMode,
    eta: Option<f64>,
    /// `2^{-N}·ε^d(1-ε)^{N-d}` indexed by `d = |μ|`.
    noise_weights: Vec<f64>,
    /// Per edge, `z ↦ z∘π` over all `2^N` masks; exact mode only.
    targets: Vec<Vec<u32>>,
}

pub fn build_bes(u: &UgInstance, epsilon: f64, mode: BesMode) -> Result<BesInstance> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::OutOfRange(format!("epsilon={epsilon} outside (0, 1/2)")));
    }
    let n = u.labels();
    if n > 64 {
        return Err(Error::TooLarge { mode: "BES", detail: format!("N={n} exceeds 64 coordinates") });
    }
    if mode == BesMode::Exact && n > EXACT_MAX_LABELS {
        return Err(Error::TooLarge {
            mode: "exact enumeration",
            detail: format!("N={n} exceeds {EXACT_MAX_LABELS}; use sampled mode"),
        });
    }
    let scale = 0.5f64.powi(n as i32);
    let noise_weights = (0..=n)
        .map(|d| scale * epsilon.powi(d as i32) * (1.0 - epsilon).powi((n - d) as i32))
        .collect();
    let targets = if mode == BesMode::Exact {
        u.edges()
            .par_iter()
            .map(|e| (0..1u64 << n).map(|z| permute_bits(z, &e.pi) as u32).collect())
            .collect()
    } else {
        Vec::new()
    };
    let inst = BesInstance { ug: u.clone(), epsilon, mode, eta: None, noise_weights, targets };
    let total = inst.total_edge_weight();
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("edge weights sum to {total}"));
    }
    Ok(inst)
}

/// [`build_bes`] over a KV instance, remembering its `η`.
pub fn build_bes_from_kv(kv: &KvInstance, epsilon: f64, mode: BesMode) -> Result<BesInstance> {
    Ok(build_bes(&kv.ug, epsilon, mode)?.with_eta(kv.eta))
}

impl BesInstance {
    /// Attaches the noise rate `η` of the underlying UG instance.
    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn ug(&self) -> &UgInstance {
        &self.ug
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> BesMode {
        self.mode
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    pub fn labels(&self) -> usize {
        self.ug.labels()
    }

    pub fn num_blocks(&self) -> usize {
        self.ug.num_vertices()
    }

    /// `2^N`
    pub fn block_size(&self) -> u64 {
        1u64 << self.labels()
    }

    pub fn num_vertices(&self) -> u64 {
        self.num_blocks() as u64 * self.block_size()
    }

    pub fn vertex_id(&self, v: usize, x: u64) -> u64 {
        v as u64 * self.block_size() + x
    }

    /// `D = m·C(2^N, 2)`
    pub fn total_demand(&self) -> f64 {
        let size = self.block_size() as f64;
        self.num_blocks() as f64 * size * (size - 1.0) / 2.0
    }

    /// `B = D/2`
    pub fn balance_bound(&self) -> f64 {
        self.total_demand() / 2.0
    }

    /// Weight of one `(e, x, μ)` record.
    pub fn edge_weight(&self, edge: usize, mu: u64) -> f64 {
        self.ug.edges()[edge].weight * self.noise_weights[mu.count_ones() as usize]
    }

    pub fn noise_weight(&self, d: usize) -> f64 {
        self.noise_weights[d]
    }

    /// `Σ_e wt(e)·Σ_d C(N,d)·2^N·w_d`, summed by `|μ|` class.
    pub fn total_edge_weight(&self) -> f64 {
        let n = self.labels();
        let per_record: f64 = (0..=n)
            .map(|d| binomial(n as u32, d as u32) * self.noise_weights[d])
            .sum::<f64>()
            * self.block_size() as f64;
        self.ug.edges().iter().map(|e| e.weight).sum::<f64>() * per_record
    }

    /// Endpoint `y = (x ⊕ μ)∘π_e` in block `w` of edge `e`.
    #[inline]
    pub fn target(&self, edge: usize, x: u64, mu: u64) -> u64 {
        if self.targets.is_empty() {
            permute_bits(x ^ mu, &self.ug.edges()[edge].pi)
        } else {
            self.targets[edge][(x ^ mu) as usize] as u64
        }
    }

    /// Mass of `μ` with `|μ| > 2εN`.
    pub fn noise_exception_mass(&self) -> f64 {
        let n = self.labels();
        let scale = self.block_size() as f64;
        (0..=n)
            .filter(|&d| d as f64 > 2.0 * self.epsilon * n as f64)
            .map(|d| binomial(n as u32, d as u32) * self.noise_weights[d] * scale)
            .sum()
    }

    fn require_exact(&self, what: &'static str) -> Result<()> {
        if self.mode != BesMode::Exact {
            return Err(Error::TooLarge { mode: what, detail: "instance is in sampled mode".into() });
        }
        Ok(())
    }

    fn check_cut(&self, cut: &Cut) -> Result<()> {
        if cut.labels() != self.labels() || cut.num_blocks() != self.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "cut has {} blocks over N={}, instance has {} over N={}",
                cut.num_blocks(),
                cut.labels(),
                self.num_blocks(),
                self.labels()
            )));
        }
        Ok(())
    }
}

/// `A : V → {-1, 1}`, stored block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    proof: Proof,
}

impl Cut {
    pub fn from_blocks(labels: usize, blocks: Vec<BooleanFunction>) -> Result<Self> {
        if labels > EXPLICIT_MAX_LABELS {
            return Err(Error::TooLarge { mode: "explicit cut", detail: format!("N={labels}") });
        }
        Ok(Cut { proof: Proof::new(labels, blocks)? })
    }

    pub fn from_fn(inst: &BesInstance, mut side: impl FnMut(usize, u64) -> i8) -> Result<Self> {
        let n = inst.labels();
        let blocks = (0..inst.num_blocks())
            .map(|v| BooleanFunction::from_fn(n as u32, |x| side(v, x as u64)))
            .collect::<Result<_>>()?;
        Cut::from_blocks(n, blocks)
    }

    pub fn constant(inst: &BesInstance, value: i8) -> Result<Self> {
        Cut::from_fn(inst, |_, _| value)
    }

    /// `A(v, x) = x_{λ(v)}`
    pub fn dictator(inst: &BesInstance, lam: &Labeling) -> Result<Self> {
        Ok(Cut { proof: pcp::long_code_proof(lam, inst.labels())? })
    }

    /// Every block split exactly in half at random.
    pub fn random_balanced<R: Rng + ?Sized>(inst: &BesInstance, rng: &mut R) -> Result<Self> {
        use rand::seq::SliceRandom;
        let size = inst.block_size() as usize;
        let blocks = (0..inst.num_blocks())
            .map(|_| {
                let mut table: Vec<i8> = (0..size).map(|i| if i < size / 2 { 1 } else { -1 }).collect();
                table.shuffle(rng);
                BooleanFunction::from_table(table)
            })
            .collect::<Result<_>>()?;
        Cut::from_blocks(inst.labels(), blocks)
    }

    pub fn labels(&self) -> usize {
        self.proof.labels()
    }

    pub fn num_blocks(&self) -> usize {
        self.proof.num_vertices()
    }

    pub fn block(&self, v: usize) -> &BooleanFunction {
        self.proof.table(v)
    }

    pub fn side(&self, v: usize, x: u64) -> i8 {
        self.proof.table(v).eval(x as usize)
    }

    pub fn set_block(&mut self, v: usize, table: BooleanFunction) -> Result<()> {
        self.proof.set_table(v, table)
    }

    /// The cut read as a Long Code proof.
    pub fn as_proof(&self) -> &Proof {
        &self.proof
    }
}

/// Exact weight of cut edges by enumerating every `(e, x, μ)`.
pub fn cut_edge_weight(inst: &BesInstance, cut: &Cut) -> Result<f64> {
    inst.require_exact("exact cut weight")?;
    inst.check_cut(cut)?;
    let size = inst.block_size();
    let total: f64 = inst
        .ug
        .edges()
        .par_iter()
        .enumerate()
        .map(|(idx, e)| {
            let (a, b) = (cut.block(e.v), cut.block(e.w));
            let table = &inst.targets[idx];
            let mut acc = 0.0;
            for x in 0..size {
                let side = a.eval(x as usize);
                let mut row = 0.0;
                for mu in 0..size {
                    if side != b.eval(table[(x ^ mu) as usize] as usize) {
                        row += inst.noise_weights[mu.count_ones() as usize];
                    }
                }
                acc += row;
            }
            e.weight * acc
        })
        .sum();
    Ok(total / inst.ug.total_weight())
}

/// The same quantity as one minus the Long Code acceptance probability.
pub fn cut_edge_weight_fourier(inst: &BesInstance, cut: &Cut) -> Result<f64> {
    inst.check_cut(cut)?;
    Ok(1.0 - pcp::acceptance_probability_exact(&inst.ug, cut.as_proof(), inst.epsilon)?)
}

/// Samples `(e, x, μ)` from the edge distribution; `side` may be implicit.
pub fn cut_edge_weight_mc(
    inst: &BesInstance,
    side: impl Fn(usize, u64) -> i8 + Sync,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    if samples == 0 {
        return invalid("samples must be positive");
    }
    let edges = inst.ug.edges();
    let pick = WeightedIndex::new(edges.iter().map(|e| e.weight)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let n = inst.labels();
    let chunks = 32u64;
    let cut: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::indexed_stream(seed, "bes_cut_mc", chunk);
            let count = samples / chunks + u64::from(chunk < samples % chunks);
            let mut hits = 0u64;
            for _ in 0..count {
                let idx = pick.sample(&mut rng);
                let x = if n == 64 { rng.gen::<u64>() } else { rng.gen_range(0..1u64 << n) };
                let mu = sample_noise(n, inst.epsilon, &mut rng);
                let y = inst.target(idx, x, mu);
                if side(edges[idx].v, x) != side(edges[idx].w, y) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let hits = cut as f64;
    Ok(Estimate::from_moments(hits, hits, samples))
}

/// `Σ_i c_i (|V_i| - c_i)` with `c_i` the `+1` count of block `i`.
pub fn demand_cut(inst: &BesInstance, cut: &Cut) -> Result<f64> {
    inst.check_cut(cut)?;
    let size = inst.block_size() as f64;
    Ok((0..cut.num_blocks())
        .map(|v| {
            let plus = cut.block(v).count_plus() as f64;
            plus * (size - plus)
        })
        .sum())
}

/// `E_i |1 - 2p_i|`
pub fn piecewise_balance(inst: &BesInstance, cut: &Cut) -> Result<f64> {
    inst.check_cut(cut)?;
    Ok(pcp::piecewise_balance_stat(cut.as_proof()))
}

/// One row of the gap report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRow {
    pub k: u32,
    pub eta: f64,
    pub epsilon: f64,
    pub t: u32,
    pub sdp_objective: f64,
    pub best_cut_weight: f64,
    pub balance: f64,
}

impl GapRow {
    pub const HEADER: &'static str = "k\teta\tepsilon\tt\tsdp_objective\tbest_cut_weight\tratio\tbalance";

    pub fn ratio(&self) -> f64 {
        self.best_cut_weight / self.sdp_objective
    }

    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{:.16e}\t{:.16e}\t{}\t{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}",
            self.k,
            self.eta,
            self.epsilon,
            self.t,
            self.sdp_objective,
            self.best_cut_weight,
            self.ratio(),
            self.balance
        )
    }
}

/// `BES m N epsilon`, then either `EXPANDED count` with one
/// `v x w y weight` line per record, or `GENERATOR` followed by the UG
/// instance that generates the edge distribution.
pub fn write_bes(inst: &BesInstance) -> String {
    let n = inst.labels();
    let mut out = format!("BES {} {} {:.16e}\n", inst.num_blocks(), n, inst.epsilon);
    if n <= EXPANDED_EXPORT_MAX_LABELS {
        let size = inst.block_size();
        let records = inst.ug.edges().len() as u64 * size * size;
        writeln!(out, "EXPANDED {records}").unwrap();
        for (idx, e) in inst.ug.edges().iter().enumerate() {
            for x in 0..size {
                for mu in 0..size {
                    let y = inst.target(idx, x, mu);
                    writeln!(out, "{} {} {} {} {:.16e}", e.v, x, e.w, y, inst.edge_weight(idx, mu)).unwrap();
                }
            }
        }
    } else {
        out.push_str("GENERATOR\n");
        out.push_str(&write_ug(&inst.ug));
    }
    out
}

/// One `±1` per line, vertex `(v, x)` on line `v·2^N + x`.
pub fn write_cut(cut: &Cut) -> String {
    let mut out = String::new();
    for v in 0..cut.num_blocks() {
        for &s in cut.block(v).table() {
            out.push_str(if s > 0 { "1\n" } else { "-1\n" });
        }
    }
    out
}

pub fn parse_cut(text: &str, labels: usize, blocks: usize) -> Result<Cut> {
    if labels > EXPLICIT_MAX_LABELS {
        return Err(Error::TooLarge { mode: "explicit cut", detail: format!("N={labels}") });
    }
    let size = 1usize << labels;
    let mut values = Vec::with_capacity(size * blocks);
    for (ln, line) in content_lines(text) {
        let v: i8 = parse_field(ln, Some(line.trim()), "side")?;
        if v != 1 && v != -1 {
            return parse_error(ln, format!("side {v} is not ±1"));
        }
        values.push(v);
    }
    if values.len() != size * blocks {
        return parse_error(0, format!("expected {} sides, found {}", size * blocks, values.len()));
    }
    let tables = values
        .chunks(size)
        .map(|c| BooleanFunction::from_table(c.to_vec()))
        .collect::<Result<_>>()?;
    Cut::from_blocks(labels, tables)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::WindowMode;
    use crate::kv::build_kv_instance;
    use crate::unique_games::plant_instance;

    fn kv2(eps: f64) -> BesInstance {
        let kv = build_kv_instance(2, 0.3, WindowMode::Typical, true).unwrap();
        build_bes_from_kv(&kv, eps, BesMode::Exact).unwrap()
    }

    #[test]
    fn shape_and_weights() {
        let inst = kv2(0.1);
        assert_eq!(inst.num_vertices(), 64);
        assert_eq!(inst.total_demand(), 480.0);
        assert_eq!(inst.balance_bound(), 240.0);
        let e0 = inst.ug().edges()[0].weight;
        let expected = e0 / 16.0 * 0.1 * 0.9f64.powi(3);
        assert!((inst.edge_weight(0, 0b0100) - expected).abs() < 1e-18);
        let mut sum = 0.0;
        for idx in 0..inst.ug().edges().len() {
            for _x in 0..16u64 {
                for mu in 0..16u64 {
                    sum += inst.edge_weight(idx, mu);
                }
            }
        }
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let kv = build_kv_instance(2, 0.3, WindowMode::Typical, true).unwrap();
        assert!(build_bes(&kv.ug, 0.5, BesMode::Exact).is_err());
        assert!(build_bes(&kv.ug, 0.0, BesMode::Exact).is_err());
        let big = plant_instance(3, 9, 0.0, 1.0, 1).unwrap();
        assert!(matches!(build_bes(&big.instance, 0.1, BesMode::Exact), Err(Error::TooLarge { .. })));
        assert!(build_bes(&big.instance, 0.1, BesMode::Sampled).is_ok());
    }

    #[test]
    fn cut_measures() {
        let inst = kv2(0.2);
        let plus = Cut::constant(&inst, 1).unwrap();
        assert_eq!(cut_edge_weight(&inst, &plus).unwrap(), 0.0);
        assert_eq!(demand_cut(&inst, &plus).unwrap(), 0.0);
        assert_eq!(piecewise_balance(&inst, &plus).unwrap(), 1.0);
        let lam = Labeling::constant(4, 1);
        let dict = Cut::dictator(&inst, &lam).unwrap();
        assert_eq!(piecewise_balance(&inst, &dict).unwrap(), 0.0);
        assert_eq!(demand_cut(&inst, &dict).unwrap(), 4.0 * 64.0);
        let exact = cut_edge_weight(&inst, &dict).unwrap();
        let fast = cut_edge_weight_fourier(&inst, &dict).unwrap();
        assert!((exact - fast).abs() < 1e-12);
        let mut rng = rng::stream(4, "cut");
        let random = Cut::random_balanced(&inst, &mut rng).unwrap();
        let exact = cut_edge_weight(&inst, &random).unwrap();
        assert!((exact - cut_edge_weight_fourier(&inst, &random).unwrap()).abs() < 1e-12);
        let mc = cut_edge_weight_mc(&inst, |v, x| random.side(v, x), 200_000, 8).unwrap();
        assert!((mc.value - exact).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn planted_dictator_cut_is_small() {
        let planted = plant_instance(6, 4, 0.1, 1.0, 3).unwrap();
        let inst = build_bes(&planted.instance, 0.1, BesMode::Exact).unwrap();
        let cut = Cut::dictator(&inst, &planted.hidden).unwrap();
        let w = cut_edge_weight(&inst, &cut).unwrap();
        let value = planted.instance.value(&planted.hidden).unwrap();
        let eta = 1.0 - value;
        assert!(w <= eta + 0.1 + 1e-9);
        assert!((w - (eta / 2.0 + (1.0 - eta) * 0.1)).abs() < 1e-12);
    }

    #[test]
    fn cut_file_round_trip() {
        let inst = kv2(0.1);
        let mut rng = rng::stream(2, "file");
        let cut = Cut::random_balanced(&inst, &mut rng).unwrap();
        let text = write_cut(&cut);
        assert_eq!(text.lines().count(), 64);
        assert_eq!(parse_cut(&text, 4, 4).unwrap(), cut);
        assert!(parse_cut("1\n0\n", 1, 1).is_err());
        assert!(parse_cut("1\n", 1, 1).is_err());
        let export = write_bes(&inst);
        assert!(export.starts_with("BES 4 4 1.0000000000000001e-1\nEXPANDED "));
    }
}
