//! The quotient of the noisy hypercube on `{-1,1}^{2^k}` by multiplication
//! with characters, viewed as a Unique Games instance, and its vector
//! solution.
//!
//! A point of the cube is a Boolean function `f : {-1,1}^k → {-1,1}`,
//! stored as a `2^k`-bit mask (bit `x` set iff `f(x) = -1`). Multiplying by
//! `χ_S` is xoring with the mask of `χ_S`, so every class `{f·χ_S}` has
//! exactly `N = 2^k` members. Labels are the subsets `S`, and the label
//! group is bitmask xor.

mod solution;

pub use solution::{
    check_orthonormality, check_ug_sdp_feasibility, suspect_rows, objective_bounds, parse_basis, ug_sdp_objective,
    verify_ulc_properties, write_basis, BasisDefect, ObjectiveBounds, SdpCheckOptions, UgVectorSolution,
};

use crate::error::{Error, Result};
use crate::fourier::BooleanFunction;
use crate::hypercube::{NoisyHypercube, WindowMode};
use crate::unique_games::{Labeling, Permutation, UgEdge, UgInstance};

pub const DEFAULT_MAX_K: u32 = 4;

/// Mask of `χ_S` over the `2^k` points.
pub fn character_mask(k: u32, subset: u32) -> u64 {
    (0..1u64 << k).fold(0u64, |m, x| {
        if (u64::from(subset) & x).count_ones() & 1 == 1 {
            m | (1 << x)
        } else {
            m
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuotientStructure {
    k: u32,
    characters: Vec<u64>,
    representatives: Vec<u64>,
}

impl QuotientStructure {
    /// `1 ≤ k ≤ 4`, or `k = 5` when `allow_k5` is set.
    pub fn build(k: u32, allow_k5: bool) -> Result<Self> {
        let max = if allow_k5 { 5 } else { DEFAULT_MAX_K };
        if k == 0 || k > max {
            return Err(Error::OutOfRange(format!(
                "k={k} outside 1..={max}{}",
                if k == 5 { " (k=5 needs the explicit opt-in)" } else { "" }
            )));
        }
        let characters: Vec<u64> = (0..1u32 << k).map(|s| character_mask(k, s)).collect();
        let n = 1u32 << k;
        let top: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        let mut representatives = Vec::with_capacity(((top >> k) + 1) as usize);
        let mut f: u64 = 0;
        loop {
            if characters.iter().all(|&c| f ^ c >= f) {
                representatives.push(f);
            }
            if f == top {
                break;
            }
            f += 1;
        }
        Ok(QuotientStructure { k, characters, representatives })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// `N = 2^k`
    pub fn n(&self) -> usize {
        1 << self.k
    }

    /// `m = 2^N / N`
    pub fn num_classes(&self) -> usize {
        self.representatives.len()
    }

    pub fn representatives(&self) -> &[u64] {
        &self.representatives
    }

    pub fn character(&self, s: u32) -> u64 {
        self.characters[s as usize]
    }

    /// The member `[P_i]·χ_S`.
    pub fn member(&self, class: usize, shift: u32) -> u64 {
        self.representatives[class] ^ self.characters[shift as usize]
    }

    pub fn member_function(&self, class: usize, shift: u32) -> BooleanFunction {
        BooleanFunction::from_mask(self.k, self.member(class, shift))
    }

    /// `(i, S)` with `f = [P_i]·χ_S`.
    pub fn class_of(&self, f: u64) -> (usize, u32) {
        let (shift, rep) = self
            .characters
            .iter()
            .enumerate()
            .map(|(s, &c)| (s as u32, f ^ c))
            .min_by_key(|&(_, g)| g)
            .unwrap();
        let class = self.representatives.binary_search(&rep).expect("representative listed");
        (class, shift)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvInstance {
    pub quotient: QuotientStructure,
    pub hypercube: NoisyHypercube,
    pub ug: UgInstance,
    /// Hamming distance of the cube pair generating each edge.
    pub distances: Vec<u32>,
    pub eta: f64,
}

/// Edge `(i, j, σ)` with `i ≤ j` collects the cube pairs
/// `{[P_i]χ_a, [P_j]χ_{a⊕σ}}`, carries `π(l) = l ⊕ σ` and weight equal
/// to the pair mass of its orbit: `N·wt'` for `i < j`, `(N/2)·wt'` for the
/// loops `i = j`, whose orbit has only `N/2` distinct pairs.
pub fn build_kv_instance(k: u32, eta: f64, mode: WindowMode, renormalize: bool) -> Result<KvInstance> {
    let quotient = QuotientStructure::build(k, false)?;
    build_kv_from_quotient(quotient, eta, mode, renormalize)
}

pub fn build_kv_from_quotient(
    quotient: QuotientStructure,
    eta: f64,
    mode: WindowMode,
    renormalize: bool,
) -> Result<KvInstance> {
    let n = quotient.n();
    let hypercube = NoisyHypercube::new(n as u32, eta, mode, renormalize)?;
    let m = quotient.num_classes();
    let mut edges = Vec::new();
    let mut distances = Vec::new();
    for i in 0..m {
        let f = quotient.representatives[i];
        for j in i..m {
            for sigma in 0..n as u32 {
                if i == j && sigma == 0 {
                    continue;
                }
                let g = quotient.member(j, sigma);
                let d = (f ^ g).count_ones();
                let wt = hypercube.distance_weight(d);
                if wt == 0.0 {
                    continue;
                }
                let orbit = if i == j { n as f64 / 2.0 } else { n as f64 };
                edges.push(UgEdge { v: i, w: j, weight: orbit * wt, pi: Permutation::xor_shift(n, sigma) });
                distances.push(d);
            }
        }
    }
    let ug = UgInstance::new(n, m, edges)?;
    Ok(KvInstance { quotient, hypercube, ug, distances, eta })
}

impl KvInstance {
    pub fn n(&self) -> usize {
        self.quotient.n()
    }

    /// Maps label-extended vertex `(i, l)` to the cube point `[P_i]·χ_l`.
    pub fn cube_point(&self, extended_vertex: usize) -> u64 {
        let n = self.n();
        self.quotient.member(extended_vertex / n, (extended_vertex % n) as u32)
    }

    /// Sub-cube set `S'_λ = {[P_v]·χ_{λ(v)}}` for a labeling.
    pub fn labeling_points(&self, lam: &Labeling) -> Vec<u64> {
        (0..self.quotient.num_classes())
            .map(|v| self.quotient.member(v, lam.get(v)))
            .collect()
    }

    /// The three reference curves for `opt`: `N^{-η}`, `N^{-(η+η²)}` and
    /// `log₂(m)^{-η}`.
    pub fn opt_reference_curves(&self) -> [f64; 3] {
        let n = self.n() as f64;
        let eta = self.eta;
        let log_m = (self.quotient.num_classes() as f64).log2();
        [n.powf(-eta), n.powf(-(eta + eta * eta)), log_m.powf(-eta)]
    }
}
