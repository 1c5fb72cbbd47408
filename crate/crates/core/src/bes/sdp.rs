//! Vectors `V_{v,x}^{⊗t}` on the BES vertices and their verification.

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use super::{BesInstance, BesMode};
use crate::error::{invalid, Error, Result};
use crate::kv::UgVectorSolution;
use crate::pcp::sample_noise;
use crate::report::{Check, CheckReport};
use crate::rng::{self, Estimate};
use crate::tensor::{
    apply_signs, clamp_unit, outer_power, signed_sums, BaseGram, BesVectorHandle, GramEngine, PowerConfig,
};

/// Handles `(v, x)` bound to a Gram engine.
#[derive(Debug)]
pub struct BesSdpSolution {
    engine: GramEngine,
    blocks: usize,
}

pub fn assign_sdp_solution(inst: &BesInstance, sol: Arc<UgVectorSolution>, config: PowerConfig) -> Result<BesSdpSolution> {
    if sol.n() != inst.labels() || sol.num_classes() != inst.num_blocks() {
        return Err(Error::ShapeMismatch(format!(
            "solution has {} classes over N={}, instance has {} blocks over N={}",
            sol.num_classes(),
            sol.n(),
            inst.num_blocks(),
            inst.labels()
        )));
    }
    Ok(BesSdpSolution { engine: GramEngine::new(sol, config), blocks: inst.num_blocks() })
}

impl BesSdpSolution {
    pub fn engine(&self) -> &GramEngine {
        &self.engine
    }

    pub fn config(&self) -> PowerConfig {
        self.engine.config()
    }

    pub fn handle(&self, v: usize, x: u64) -> BesVectorHandle {
        debug_assert!(v < self.blocks);
        BesVectorHandle::new(v, x)
    }

    pub fn inner(&self, a: &BesVectorHandle, b: &BesVectorHandle) -> f64 {
        self.engine.bes_inner(a, b)
    }

    /// `η_e = 1 - max_j ⟨u^v_{π(j)}, u^w_j⟩` for every UG edge.
    fn matched_eta(&self, inst: &BesInstance) -> Vec<f64> {
        let sol = self.engine.solution();
        inst.ug()
            .edges()
            .iter()
            .map(|e| {
                let best = (0..inst.labels())
                    .map(|j| sol.inner(e.v, e.pi.apply(j as u32) as usize, e.w, j))
                    .fold(f64::NEG_INFINITY, f64::max);
                1.0 - best
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpObjectiveReport {
    /// `(1/4)·Σ wt·‖V_{v,x} - V_{w,y}‖²`
    pub objective: f64,
    pub t: u32,
    pub l_in: u32,
    pub epsilon: f64,
    pub eta: Option<f64>,
    /// `objective / (η + ε)` when `η` is known.
    pub empirical_constant: Option<f64>,
    /// Distance of the base inner product outside
    /// `(1-η_e)^ℓ(1-2|μ|/N) ± (2η_e)^{ℓ/2}`, per enumerated term.
    pub bracket: Check,
    /// The objective evaluated at the lower end of every bracket.
    pub bracket_objective_bound: f64,
    /// Mass of noise patterns with `|μ| > 2εN`.
    pub noise_exception_mass: f64,
}

/// Exact enumeration over every `(e, x, μ)`.
pub fn sdp_objective(inst: &BesInstance, sol: &BesSdpSolution) -> Result<SdpObjectiveReport> {
    if inst.mode() != BesMode::Exact {
        return Err(Error::TooLarge { mode: "exact SDP objective", detail: "instance is in sampled mode".into() });
    }
    let config = sol.config();
    let n = inst.labels();
    let size = inst.block_size();
    let etas = sol.matched_eta(inst);
    let ell = config.l_in as i32;
    let parts: Vec<(f64, f64, Check)> = inst
        .ug()
        .edges()
        .par_iter()
        .enumerate()
        .map(|(idx, e)| {
            let gram = sol.engine.gram(e.v, e.w);
            let eta_e = etas[idx];
            let centre = (1.0 - eta_e).powi(ell);
            let radius = (2.0 * eta_e).max(0.0).powf(config.l_in as f64 / 2.0);
            let mut check = Check::new("inner_product_bracket");
            let (mut obj, mut bound) = (0.0, 0.0);
            for x in 0..size {
                let sums = signed_sums(&gram.project(x));
                for mu in 0..size {
                    let d = mu.count_ones() as usize;
                    let w = inst.noise_weight(d);
                    let y = inst.target(idx, x, mu);
                    let base = clamp_unit(sums[y as usize]);
                    obj += w * (1.0 - outer_power(base, config.t));
                    let mid = centre * (1.0 - 2.0 * d as f64 / n as f64);
                    let low = clamp_unit(mid - radius);
                    bound += w * (1.0 - outer_power(low, config.t));
                    let outside = (base - (mid + radius)).max(mid - radius - base).max(0.0);
                    check.observe(outside, || format!("edge={idx} x={x} mu={mu}"));
                }
            }
            (e.weight * obj, e.weight * bound, check)
        })
        .collect();
    let total = inst.ug().total_weight();
    let mut objective = 0.0;
    let mut bound = 0.0;
    let mut bracket = Check::new("inner_product_bracket");
    for (o, b, c) in parts {
        objective += o;
        bound += b;
        bracket = bracket.merge(c);
    }
    let objective = 0.5 * objective / total;
    let eta = inst.eta();
    Ok(SdpObjectiveReport {
        objective,
        t: config.t,
        l_in: config.l_in,
        epsilon: inst.epsilon(),
        eta,
        empirical_constant: eta.map(|h| objective / (h + inst.epsilon())),
        bracket,
        bracket_objective_bound: 0.5 * bound / total,
        noise_exception_mass: inst.noise_exception_mass(),
    })
}

/// Samples `(e, x, μ)`; works in either mode.
pub fn sdp_objective_mc(inst: &BesInstance, sol: &BesSdpSolution, samples: u64, seed: u64) -> Result<Estimate> {
    if samples == 0 {
        return invalid("samples must be positive");
    }
    let edges = inst.ug().edges();
    let pick = WeightedIndex::new(edges.iter().map(|e| e.weight)).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let n = inst.labels();
    let chunks = 32u64;
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::indexed_stream(seed, "bes_sdp_mc", chunk);
            let count = samples / chunks + u64::from(chunk < samples % chunks);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let idx = pick.sample(&mut rng);
                let e = &edges[idx];
                let x = if n == 64 { rng.gen::<u64>() } else { rng.gen_range(0..1u64 << n) };
                let mu = sample_noise(n, inst.epsilon(), &mut rng);
                let y = inst.target(idx, x, mu);
                let term = 0.5 * (1.0 - sol.inner(&sol.handle(e.v, x), &sol.handle(e.w, y)));
                s += term;
                s2 += term * term;
            }
            (s, s2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Estimate::from_moments(sum, sum_sq, samples))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityOptions {
    /// Uniform random triples when the exhaustive sweep is too large.
    pub triple_budget: u64,
    /// Exhaustive sweep when `n³` is at most this.
    pub exhaustive_limit: u64,
    /// Pairs with `|⟨⟩^t|` at least this seed the adversarial triples.
    pub adversarial_threshold: f64,
    pub seed: u64,
}

impl Default for FeasibilityOptions {
    fn default() -> Self {
        FeasibilityOptions { triple_budget: 1_000_000, exhaustive_limit: 1 << 20, adversarial_threshold: 1.0 / 3.0, seed: 0 }
    }
}

/// Largest of `ab + bc - 1 - ac` over the three choices of middle point.
#[inline]
fn triangle_violation(ab: f64, bc: f64, ac: f64) -> f64 {
    (ab + bc - 1.0 - ac).max(ab + ac - 1.0 - bc).max(ac + bc - 1.0 - ab)
}

/// Base inner products of every pair across blocks `v` and `w`.
fn block_matrix(gram: &BaseGram<f64>, size: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity((size * size) as usize);
    for x in 0..size {
        let p = gram.project(x);
        out.extend((0..size).map(|y| clamp_unit(apply_signs(&p, y))));
    }
    out
}

/// Unit norms, per-block well separatedness, the spreading constraint and
/// the triangle inequality at `t = 1` and at the configured `t`.
pub fn check_bes_feasibility(inst: &BesInstance, sol: &BesSdpSolution, opts: &FeasibilityOptions) -> Result<CheckReport> {
    if inst.mode() != BesMode::Exact {
        return Err(Error::TooLarge { mode: "feasibility check", detail: "instance is in sampled mode".into() });
    }
    let t = sol.config().t;
    let size = inst.block_size();
    let m = inst.num_blocks();
    let mut report = CheckReport::default();

    let blocks: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|v| block_matrix(&sol.engine.gram(v, v), size))
        .collect();

    let mut norms = Check::new("unit_norm");
    for (v, b) in blocks.iter().enumerate() {
        for x in 0..size {
            let r = (outer_power(b[(x * size + x) as usize], t) - 1.0).abs();
            norms.observe(r, || format!("v={v} x={x}"));
        }
    }
    report.push(norms);

    let mask = size - 1;
    let mut separated = Check::new("well_separatedness");
    let mut spreading = 0.0;
    for (v, b) in blocks.iter().enumerate() {
        let mut acc = 0.0;
        for x in 0..size {
            for y in 0..size / 2 {
                let a = outer_power(b[(x * size + y) as usize], t);
                let c = outer_power(b[(x * size + (y ^ mask)) as usize], t);
                acc += (1.0 - a) + (1.0 - c);
            }
        }
        let mean = acc / (size * size) as f64;
        separated.observe((mean - 1.0).abs(), || format!("v={v} mean={mean:.16e}"));
        spreading += 0.5 * acc / 2.0;
    }
    report.push(separated);

    let target = m as f64 * (size * size) as f64 / 4.0;
    let mut constraint = Check::new("spreading_constraint");
    constraint.observe((spreading - target).abs() / target, || format!("value={spreading:.16e} expected={target:.16e}"));
    report.push(constraint);
    let mut balance = Check::new("spreading_at_least_balance_bound");
    let b = inst.balance_bound();
    balance.observe((b - spreading).max(0.0), || format!("value={spreading:.16e} bound={b:.16e}"));
    report.push(balance);

    let nv = inst.num_vertices();
    let powers: Vec<u32> = if t == 1 { vec![1] } else { vec![1, t] };
    if nv.saturating_pow(3) <= opts.exhaustive_limit {
        for &p in &powers {
            report.push(triangle_exhaustive(inst, sol, p));
        }
    } else {
        for &p in &powers {
            report.push(triangle_sampled(inst, sol, p, opts));
        }
        for c in triangle_adversarial(inst, sol, &blocks, &powers, opts) {
            report.push(c);
        }
    }
    Ok(report)
}

fn triangle_exhaustive(inst: &BesInstance, sol: &BesSdpSolution, t: u32) -> Check {
    let size = inst.block_size();
    let handles: Vec<BesVectorHandle> = (0..inst.num_blocks())
        .flat_map(|v| (0..size).map(move |x| BesVectorHandle::new(v, x)))
        .collect();
    let n = handles.len();
    let mut g = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let val = outer_power(sol.engine.base_inner(&handles[i], &handles[j]), t);
            g[i * n + j] = val;
            g[j * n + i] = val;
        }
    }
    let mut check = Check::new(format!("triangle_exhaustive_t{t}"));
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let r = triangle_violation(g[i * n + j], g[j * n + k], g[i * n + k]).max(0.0);
                check.observe(r, || format!("triple=({i},{j},{k})"));
            }
        }
    }
    check
}

fn triangle_sampled(inst: &BesInstance, sol: &BesSdpSolution, t: u32, opts: &FeasibilityOptions) -> Check {
    let chunks = 64u64;
    let m = inst.num_blocks();
    let size = inst.block_size();
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::indexed_stream(opts.seed, "bes_triangle", chunk);
            let count = opts.triple_budget / chunks + u64::from(chunk < opts.triple_budget % chunks);
            let mut check = Check::new(format!("triangle_sampled_t{t}"));
            for _ in 0..count {
                let h: [BesVectorHandle; 3] =
                    std::array::from_fn(|_| BesVectorHandle::new(rng.gen_range(0..m), rng.gen_range(0..size)));
                let ip = |a: usize, b: usize| outer_power(sol.engine.base_inner(&h[a], &h[b]), t);
                let r = triangle_violation(ip(0, 1), ip(1, 2), ip(0, 2)).max(0.0);
                check.observe(r, || format!("triple={:?}", h.map(|x| (x.vertex, x.signs))));
            }
            check
        })
        .reduce(|| Check::new(format!("triangle_sampled_t{t}")), Check::merge)
}

/// Every pair `(a, b)` with `|⟨a, b⟩^t| ≥ threshold`, extended by each third
/// point of the blocks of `a` and `b`.
fn triangle_adversarial(
    inst: &BesInstance,
    sol: &BesSdpSolution,
    blocks: &[Vec<f64>],
    powers: &[u32],
    opts: &FeasibilityOptions,
) -> Vec<Check> {
    let m = inst.num_blocks();
    let size = inst.block_size();
    let t = sol.config().t;
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|v| (v..m).map(move |w| (v, w))).collect();
    let name = |p: u32| format!("triangle_adversarial_t{p}");
    pairs
        .par_iter()
        .map(|&(v, w)| {
            let cross = if v == w { blocks[v].clone() } else { block_matrix(&sol.engine.gram(v, w), size) };
            let (bv, bw) = (&blocks[v], &blocks[w]);
            let mut checks: Vec<Check> = powers.iter().map(|&p| Check::new(name(p))).collect();
            for x in 0..size {
                for y in 0..size {
                    if v == w && y <= x {
                        continue;
                    }
                    let ab = cross[(x * size + y) as usize];
                    if outer_power(ab, t).abs() < opts.adversarial_threshold {
                        continue;
                    }
                    for (side, third) in [(0u8, bv), (1u8, bw)] {
                        if side == 1 && v == w {
                            break;
                        }
                        for z in 0..size {
                            let (ac, bc) = if side == 0 {
                                (third[(x * size + z) as usize], cross[(z * size + y) as usize])
                            } else {
                                (cross[(x * size + z) as usize], third[(y * size + z) as usize])
                            };
                            for (check, &p) in checks.iter_mut().zip(powers) {
                                let r = triangle_violation(outer_power(ab, p), outer_power(bc, p), outer_power(ac, p))
                                    .max(0.0);
                                check.observe(r, || {
                                    let third_block = if side == 0 { v } else { w };
                                    format!("a=({v},{x}) b=({w},{y}) c=({third_block},{z})")
                                });
                            }
                        }
                    }
                }
            }
            checks
        })
        .reduce(
            || powers.iter().map(|&p| Check::new(name(p))).collect(),
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
        )
}
