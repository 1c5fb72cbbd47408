//! Tensor-power inner products, evaluated through `⟨x^{⊗l}, z^{⊗l}⟩ = ⟨x,z⟩^l`.
//!
//! The vector attached to a Balanced Edge-Separator vertex `(v, x)` is
//! `V_{v,x} = (1/√N) Σ_i x_i v_i^{⊗ℓ}`, raised to the outer tensor power `t`.
//! Nothing is materialized: `⟨V_{v,x}, V_{w,y}⟩ = ((1/N) xᵀ M y)^t` where
//! `M[i][j] = ⟨v_i, w_j⟩^ℓ` is the base Gram matrix of the two bases.

use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;

use crate::error::{Error, Result};
use crate::kv::UgVectorSolution;
use crate::scalar::Scalar;

/// Outer power of the asymptotic construction, kept as metadata only:
/// any base value of modulus below one underflows at this power.
pub const REFERENCE_OUTER_POWER: &str = "2^240+1";

pub const CACHE_ENV: &str = "KVGAP_GRAM_CACHE";
pub const DEFAULT_CACHE_CAPACITY: usize = 4096;

/// `⟨x,z⟩^l`
pub fn tensor_inner<T: Scalar>(x: &[T], z: &[T], l: u32) -> Result<T> {
    if x.len() != z.len() {
        return Err(Error::ShapeMismatch(format!("dimensions {} and {}", x.len(), z.len())));
    }
    if l == 0 {
        return Err(Error::OutOfRange("tensor power must be at least 1".into()));
    }
    let dot: T = x.iter().zip(z).map(|(&a, &b)| a * b).sum();
    Ok(dot.powi(l as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerConfig {
    /// Inner power `ℓ`, even and at least 2.
    pub l_in: u32,
    /// Outer power `t`, odd.
    pub t: u32,
}

impl PowerConfig {
    pub fn new(l_in: u32, t: u32) -> Result<Self> {
        if l_in < 2 || !l_in.is_multiple_of(2) {
            return Err(Error::OutOfRange(format!("inner power {l_in} must be even and at least 2")));
        }
        if t.is_multiple_of(2) {
            return Err(Error::OutOfRange(format!("outer power {t} must be odd")));
        }
        Ok(PowerConfig { l_in, t })
    }

    pub fn with_t(self, t: u32) -> Result<Self> {
        PowerConfig::new(self.l_in, t)
    }
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig { l_in: 8, t: 3 }
    }
}

/// The vertex `(v, x)`; bit `i` of `signs` set means `x_i = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BesVectorHandle {
    pub vertex: usize,
    pub signs: u64,
}

impl BesVectorHandle {
    pub fn new(vertex: usize, signs: u64) -> Self {
        BesVectorHandle { vertex, signs }
    }

    #[inline]
    pub fn sign(&self, i: usize) -> f64 {
        if (self.signs >> i) & 1 == 1 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn antipode(&self, n: usize) -> Self {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        BesVectorHandle { vertex: self.vertex, signs: self.signs ^ mask }
    }
}

/// `M[i][j] = ⟨v_i, w_j⟩^ℓ`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseGram<T> {
    n: usize,
    entries: Vec<T>,
}

impl<T: Scalar> BaseGram<T> {
    pub fn from_inner_products(n: usize, l_in: u32, inner: impl Fn(usize, usize) -> T) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(inner(i, j).powi(l_in as i32));
            }
        }
        BaseGram { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let entries = (0..n * n).map(|idx| self.entries[(idx % n) * n + idx / n]).collect();
        BaseGram { n, entries }
    }

    /// `(1/N)·xᵀ M`, the left factor reused against many `y`.
    pub fn project(&self, x: u64) -> Vec<T> {
        let n = self.n;
        let scale = T::one() / T::from_count(n);
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            let neg = (x >> i) & 1 == 1;
            for (o, &m) in out.iter_mut().zip(row) {
                if neg {
                    *o -= m;
                } else {
                    *o += m;
                }
            }
        }
        for o in &mut out {
            *o *= scale;
        }
        out
    }

    /// `((1/N)·xᵀ M y)` clamped to `[-1, 1]`.
    #[inline]
    pub fn bilinear(&self, x: u64, y: u64) -> T {
        clamp_unit(apply_signs(&self.project(x), y))
    }
}

/// `Σ_j p_j y_j` for a sign mask `y`.
#[inline]
pub fn apply_signs<T: Scalar>(p: &[T], y: u64) -> T {
    let mut acc = T::zero();
    for (j, &v) in p.iter().enumerate() {
        if (y >> j) & 1 == 1 {
            acc -= v;
        } else {
            acc += v;
        }
    }
    acc
}

/// `apply_signs(p, y)` for every `y < 2^len(p)` by peeling the lowest set bit.
pub fn signed_sums<T: Scalar>(p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); 1 << p.len()];
    out[0] = p.iter().fold(T::zero(), |acc, &v| acc + v);
    let two = T::one() + T::one();
    for y in 1..out.len() {
        out[y] = out[y & (y - 1)] - two * p[y.trailing_zeros() as usize];
    }
    out
}

#[inline]
pub fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(-T::one()).min(T::one())
}

/// Odd powers preserve sign, so `powi` on the clamped base suffices.
#[inline]
pub fn outer_power(base: f64, t: u32) -> f64 {
    if t == 1 {
        base
    } else {
        base.powi(t as i32)
    }
}

fn cache_capacity_from_env() -> usize {
    std::env::var(CACHE_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&c| c > 0)
        .unwrap_or(DEFAULT_CACHE_CAPACITY)
}

/// Evaluates BES inner products with an LRU-bounded cache of base Gram
/// matrices keyed by unordered vertex pair.
pub struct GramEngine {
    solution: Arc<UgVectorSolution>,
    config: PowerConfig,
    cache: Mutex<LruCache<(usize, usize), Arc<BaseGram<f64>>>>,
}

impl std::fmt::Debug for GramEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GramEngine").field("config", &self.config).finish_non_exhaustive()
    }
}

impl GramEngine {
    /// Cache capacity comes from `KVGAP_GRAM_CACHE` when set.
    pub fn new(solution: Arc<UgVectorSolution>, config: PowerConfig) -> Self {
        Self::with_capacity(solution, config, cache_capacity_from_env())
    }

    pub fn with_capacity(solution: Arc<UgVectorSolution>, config: PowerConfig, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        GramEngine { solution, config, cache: Mutex::new(LruCache::new(cap)) }
    }

    pub fn config(&self) -> PowerConfig {
        self.config
    }

    pub fn n(&self) -> usize {
        self.solution.n()
    }

    pub fn solution(&self) -> &UgVectorSolution {
        &self.solution
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    fn compute(&self, v: usize, w: usize) -> BaseGram<f64> {
        let sol = &self.solution;
        BaseGram::from_inner_products(sol.n(), self.config.l_in, |i, j| sol.inner(v, i, w, j))
    }

    /// Base Gram of `(v, w)`; computed on a miss.
    pub fn gram(&self, v: usize, w: usize) -> Arc<BaseGram<f64>> {
        let key = (v.min(w), v.max(w));
        let stored = {
            let mut cache = self.cache.lock().unwrap();
            cache.get(&key).cloned()
        };
        let stored = match stored {
            Some(g) => g,
            None => {
                let g = Arc::new(self.compute(key.0, key.1));
                self.cache.lock().unwrap().put(key, g.clone());
                g
            }
        };
        if v <= w {
            stored
        } else {
            Arc::new(stored.transpose())
        }
    }

    /// `(1/N)·xᵀ M y` at outer power one.
    pub fn base_inner(&self, a: &BesVectorHandle, b: &BesVectorHandle) -> f64 {
        if a.vertex <= b.vertex {
            self.gram(a.vertex, b.vertex).bilinear(a.signs, b.signs)
        } else {
            self.gram(b.vertex, a.vertex).bilinear(b.signs, a.signs)
        }
    }

    /// `⟨V^{⊗t}_a, V^{⊗t}_b⟩`
    pub fn bes_inner(&self, a: &BesVectorHandle, b: &BesVectorHandle) -> f64 {
        outer_power(self.base_inner(a, b), self.config.t)
    }
}

/// Whether `1 + a^t ≥ b^t + c^t` given `1 + a ≥ b + c`, for odd `t`.
pub fn odd_power_triangle_transfer<T: Scalar>(a: T, b: T, c: T, t: u32) -> Result<bool> {
    if t.is_multiple_of(2) {
        return Err(Error::OutOfRange(format!("t={t} must be odd")));
    }
    let one = T::one();
    if [a, b, c].iter().any(|v| !(v.abs() <= one)) {
        return Err(Error::OutOfRange("arguments must lie in [-1, 1]".into()));
    }
    let tol = T::of(1e-12);
    if one + a < b + c - tol {
        return Err(Error::InvalidInput("precondition 1 + a ≥ b + c fails".into()));
    }
    let p = |v: T| v.powi(t as i32);
    Ok(one + p(a) >= p(b) + p(c) - tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::WindowMode;
    use crate::kv::build_kv_instance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tensor_power(x: &[f64], l: u32) -> Vec<f64> {
        let mut out = vec![1.0];
        for _ in 0..l {
            out = out.iter().flat_map(|&a| x.iter().map(move |&b| a * b)).collect();
        }
        out
    }

    #[test]
    fn signed_sums_match_direct() {
        let p = [0.5f64, -0.25, 0.125, 2.0];
        let sums = signed_sums(&p);
        for y in 0..16u64 {
            assert!((sums[y as usize] - apply_signs(&p, y)).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_inner_against_materialized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (tx, tz) = (tensor_power(&x, 3), tensor_power(&z, 3));
        assert_eq!(tx.len(), 64);
        let direct: f64 = tx.iter().zip(&tz).map(|(a, b)| a * b).sum();
        assert!((tensor_inner(&x, &z, 3).unwrap() - direct).abs() < 1e-12);
        assert_eq!(tensor_inner(&[1.0, 0.0], &[0.0, 1.0], 5).unwrap(), 0.0);
        let u = [0.6f64, 0.8];
        assert!((tensor_inner(&u, &u, 7).unwrap() - 1.0).abs() < 1e-12);
        assert!(tensor_inner(&[1.0], &[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn power_config_validation() {
        assert!(PowerConfig::new(8, 3).is_ok());
        assert!(PowerConfig::new(3, 3).is_err());
        assert!(PowerConfig::new(8, 4).is_err());
        assert_eq!(PowerConfig::default(), PowerConfig { l_in: 8, t: 3 });
    }

    #[test]
    fn unit_norm_antipode_and_symmetry() {
        let kv = build_kv_instance(2, 0.3, WindowMode::Typical, true).unwrap();
        let sol = Arc::new(crate::kv::UgVectorSolution::from_quotient(&kv.quotient));
        let engine = GramEngine::with_capacity(sol, PowerConfig::default(), 3);
        for v in 0..4 {
            for x in 0..16u64 {
                let a = BesVectorHandle::new(v, x);
                assert_eq!(engine.bes_inner(&a, &a), 1.0);
                assert_eq!(engine.bes_inner(&a, &a.antipode(4)), -1.0);
                for w in 0..4 {
                    for y in [0u64, 5, 9] {
                        let b = BesVectorHandle::new(w, y);
                        let ab = engine.bes_inner(&a, &b);
                        assert!((ab - engine.bes_inner(&b, &a)).abs() < 1e-15);
                        assert!(ab.abs() <= 1.0 + 1e-12);
                    }
                }
            }
        }
        assert!(engine.cache_len() <= 3);
    }

    #[test]
    fn transfer_examples() {
        assert!(odd_power_triangle_transfer(0.5, 0.9, 0.6, 3).unwrap());
        assert!(odd_power_triangle_transfer(1.0, 1.0, 1.0, 7).unwrap());
        assert!(odd_power_triangle_transfer(0.0, 0.9, 0.6, 3).is_err());
        assert!(odd_power_triangle_transfer(0.5, 0.9, 0.6, 2).is_err());
        assert!(odd_power_triangle_transfer(1.5f32, 0.0, 0.0, 3).is_err());
    }
}
