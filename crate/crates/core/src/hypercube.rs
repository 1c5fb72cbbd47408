//! The η-noisy hypercube on `{-1,1}^N`.
//!
//! Points are `N`-bit masks (`N ≤ 64`), bit `b` set meaning coordinate `b`
//! is `-1`. Every quantity is derived from the distance profile
//! `d ↦ w_d`, so edges are never listed.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::Estimate;

/// Inclusive range of retained Hamming distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub lo: u32,
    pub hi: u32,
}

impl Window {
    pub fn contains(&self, d: u32) -> bool {
        self.lo <= d && d <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

/// `[ceil(ηN/2), floor(2ηN)]`, possibly empty.
pub fn typical_window(n: u32, eta: f64) -> Window {
    let guard = 1e-9;
    let lo = ((eta * f64::from(n) / 2.0) - guard).ceil().max(1.0) as u32;
    let hi = ((2.0 * eta * f64::from(n)) + guard).floor().min(f64::from(n)) as u32;
    Window { lo, hi }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowMode {
    Typical,
    Disabled,
    Custom(Window),
}

pub fn binomial(n: u32, r: u32) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoisyHypercube {
    n: u32,
    eta: f64,
    window: Option<Window>,
    renormalized: bool,
    /// weight of one unordered pair at distance `d`
    profile: Vec<f64>,
    /// mass retained before renormalization
    retained: f64,
}

impl NoisyHypercube {
    pub fn new(n: u32, eta: f64, mode: WindowMode, renormalized: bool) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::OutOfRange(format!("N={n} must lie in 1..=64")));
        }
        if !(eta > 0.0 && eta < 0.5) {
            return Err(Error::OutOfRange(format!("eta={eta} must lie in (0, 1/2)")));
        }
        let window = match mode {
            WindowMode::Disabled => None,
            WindowMode::Typical => Some(typical_window(n, eta)),
            WindowMode::Custom(w) => Some(w),
        };
        if let Some(w) = window {
            if w.is_empty() {
                return Err(Error::EmptyWindow { n, eta, lo: w.lo, hi: w.hi });
            }
        }
        let scale = 2.0 * 0.5f64.powi(n as i32);
        let mut profile = vec![0.0; n as usize + 1];
        let mut retained = 0.0;
        for d in 1..=n {
            if window.is_some_and(|w| !w.contains(d)) {
                continue;
            }
            let p = eta.powi(d as i32) * (1.0 - eta).powi((n - d) as i32);
            profile[d as usize] = scale * p;
            retained += binomial(n, d) * p;
        }
        if retained <= 0.0 {
            return Err(Error::EmptyWindow {
                n,
                eta,
                lo: window.map_or(1, |w| w.lo),
                hi: window.map_or(n, |w| w.hi),
            });
        }
        if renormalized {
            for w in &mut profile {
                *w /= retained;
            }
        }
        Ok(NoisyHypercube { n, eta, window, renormalized, profile, retained })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn window(&self) -> Option<Window> {
        self.window
    }

    pub fn is_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Mass of pairs at distance ≥ 1 inside the window, before renormalization.
    pub fn retained_mass(&self) -> f64 {
        self.retained
    }

    pub fn distance_weight(&self, d: u32) -> f64 {
        self.profile.get(d as usize).copied().unwrap_or(0.0)
    }

    fn mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    pub fn pair_weight(&self, f: u64, g: u64) -> Result<f64> {
        let m = self.mask();
        if (f | g) & !m != 0 {
            return invalid(format!("points {f:#x}, {g:#x} exceed {} bits", self.n));
        }
        if f == g {
            return invalid("self-pairs carry no edge");
        }
        Ok(self.distance_weight((f ^ g).count_ones()))
    }

    /// Total pair weight summed over all unordered pairs.
    pub fn total_weight(&self) -> f64 {
        let pairs_per_distance = |d: u32| 2f64.powi(self.n as i32 - 1) * binomial(self.n, d);
        (1..=self.n).map(|d| pairs_per_distance(d) * self.distance_weight(d)).sum()
    }

    /// Weighted degree, identical for every point.
    pub fn degree(&self) -> f64 {
        (1..=self.n).map(|d| binomial(self.n, d) * self.distance_weight(d)).sum()
    }

    fn check_set(&self, set: &[u64]) -> Result<HashSet<u64>> {
        let m = self.mask();
        let members: HashSet<u64> = set.iter().copied().collect();
        if members.is_empty() {
            return invalid("expansion of the empty set");
        }
        if members.iter().any(|p| p & !m != 0) {
            return invalid("set contains points outside the cube");
        }
        if self.n < 64 && members.len() as u64 == 1u64 << self.n {
            return invalid("expansion of the full cube");
        }
        Ok(members)
    }

    /// `1 − Φ(S)` by exact enumeration (`N ≤ 14`).
    pub fn one_minus_expansion_exact(&self, set: &[u64]) -> Result<f64> {
        if self.n > 14 {
            return Err(Error::TooLarge {
                mode: "exact expansion",
                detail: format!("N={} > 14", self.n),
            });
        }
        let members = self.check_set(set)?;
        let points: Vec<u64> = members.into_iter().collect();
        let mut inside = 0.0;
        for (a, &f) in points.iter().enumerate() {
            for &g in &points[a + 1..] {
                inside += 2.0 * self.distance_weight((f ^ g).count_ones());
            }
        }
        Ok(inside / (points.len() as f64 * self.degree()))
    }

    pub fn expansion_exact(&self, set: &[u64]) -> Result<f64> {
        Ok(1.0 - self.one_minus_expansion_exact(set)?)
    }

    /// Draws a neighbour of `f` with probability proportional to its pair weight.
    pub fn sample_neighbor<R: Rng + ?Sized>(&self, f: u64, rng: &mut R) -> u64 {
        loop {
            let mut g = f;
            for b in 0..self.n {
                if rng.gen::<f64>() < self.eta {
                    g ^= 1 << b;
                }
            }
            if g == f {
                continue;
            }
            if self.window.is_some_and(|w| !w.contains((f ^ g).count_ones())) {
                continue;
            }
            return g;
        }
    }

    /// Monte Carlo estimate of `1 − Φ(S)`.
    pub fn one_minus_expansion_mc<R: Rng + ?Sized>(
        &self,
        set: &[u64],
        samples: u64,
        rng: &mut R,
    ) -> Result<Estimate> {
        if samples == 0 {
            return invalid("samples must be positive");
        }
        let members = self.check_set(set)?;
        let points: Vec<u64> = set.to_vec();
        let mut hits = 0.0;
        for _ in 0..samples {
            let f = points[rng.gen_range(0..points.len())];
            if members.contains(&self.sample_neighbor(f, rng)) {
                hits += 1.0;
            }
        }
        Ok(Estimate::from_moments(hits, hits, samples))
    }
}

/// `N^{-(η+η²)}`, the small-set bound before windowing.
pub fn small_set_bound(n: u32, eta: f64) -> f64 {
    f64::from(n).powf(-(eta + eta * eta))
}

/// `N^{-η}`, the bound quoted after windowing.
pub fn windowed_small_set_bound(n: u32, eta: f64) -> f64 {
    f64::from(n).powf(-eta)
}

/// A uniformly random subset of the cube of the given size.
pub fn random_subset<R: Rng + ?Sized>(n: u32, size: usize, rng: &mut R) -> Vec<u64> {
    assert!(n <= 20, "random_subset enumerates the cube");
    let all: Vec<u64> = (0..1u64 << n).collect();
    rand::seq::index::sample(rng, all.len(), size)
        .into_iter()
        .map(|i| all[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{apply_noise_operator, lp_norm, RealFunction};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plain(n: u32, eta: f64) -> NoisyHypercube {
        NoisyHypercube::new(n, eta, WindowMode::Disabled, false).unwrap()
    }

    #[test]
    fn windows() {
        assert_eq!(typical_window(8, 0.25), Window { lo: 1, hi: 4 });
        assert!(typical_window(4, 0.05).is_empty());
        assert_eq!(typical_window(256, 0.1), Window { lo: 13, hi: 51 });
        let err = NoisyHypercube::new(4, 0.05, WindowMode::Typical, true).unwrap_err();
        assert!(matches!(err, Error::EmptyWindow { .. }));
    }

    #[test]
    fn pair_weight_by_enumeration() {
        // with N=2, η=1/4: enumerate (h, μ) over the ordered experiment
        let h = plain(2, 0.25);
        let mut experiment = 0.0;
        for start in 0..4u64 {
            for mu in 0..4u64 {
                let flips = mu.count_ones() as i32;
                let p = 0.25 * 0.25f64.powi(flips) * 0.75f64.powi(2 - flips);
                let end = start ^ mu;
                if (start, end) == (0b00, 0b01) || (start, end) == (0b01, 0b00) {
                    experiment += p;
                }
            }
        }
        assert!((h.pair_weight(0b00, 0b01).unwrap() - experiment).abs() < 1e-15);
        assert!((experiment - 3.0 / 32.0).abs() < 1e-15);
        assert!(h.pair_weight(1, 1).is_err());
    }

    #[test]
    fn unnormalized_total_excludes_self_mass() {
        let h = plain(3, 0.1);
        let mut total = 0.0;
        for f in 0..8u64 {
            for g in f + 1..8 {
                total += h.pair_weight(f, g).unwrap();
            }
        }
        assert!((total - (1.0 - 0.9f64.powi(3))).abs() < 1e-12);
        let r = NoisyHypercube::new(8, 0.25, WindowMode::Typical, true).unwrap();
        assert!((r.total_weight() - 1.0).abs() < 1e-12);
        assert_eq!(r.pair_weight(0, 0b11111).unwrap(), 0.0);
    }

    #[test]
    fn shift_invariance_and_regularity() {
        let h = NoisyHypercube::new(6, 0.2, WindowMode::Typical, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let f = rng.gen_range(0..64u64);
            let g = rng.gen_range(0..64u64);
            let s = rng.gen_range(0..64u64);
            if f == g {
                continue;
            }
            let w = h.pair_weight(f, g).unwrap();
            assert_eq!(w, h.pair_weight(g, f).unwrap());
            assert_eq!(w, h.pair_weight(f ^ s, g ^ s).unwrap());
        }
        let degrees: Vec<f64> = (0..64u64)
            .map(|f| (0..64u64).filter(|&g| g != f).map(|g| h.pair_weight(f, g).unwrap()).sum())
            .collect();
        for d in &degrees {
            assert!((d - h.degree()).abs() < 1e-12);
        }
    }

    #[test]
    fn half_cube_closed_form() {
        for n in 2..=10 {
            let eta = 0.2;
            let h = plain(n, eta);
            let half: Vec<u64> = (0..1u64 << n).filter(|x| x & 1 == 0).collect();
            let exact = h.one_minus_expansion_exact(&half).unwrap();
            let stay = 1.0 - eta;
            let lazy = stay.powi(n as i32);
            assert!((exact - (stay - lazy) / (1.0 - lazy)).abs() < 1e-12, "N={n}");
        }
    }

    #[test]
    fn singleton_and_rejections() {
        let h = plain(5, 0.3);
        assert_eq!(h.one_minus_expansion_exact(&[7]).unwrap(), 0.0);
        assert!(h.one_minus_expansion_exact(&[]).is_err());
        let full: Vec<u64> = (0..32).collect();
        assert!(h.one_minus_expansion_exact(&full).is_err());
    }

    #[test]
    fn density_one_over_n_sets_obey_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = plain(8, 0.25);
        for _ in 0..100 {
            let set = random_subset(8, 32, &mut rng);
            let v = h.one_minus_expansion_exact(&set).unwrap();
            assert!(v <= small_set_bound(8, 0.25) + 1e-9);
        }
    }

    #[test]
    fn expansion_matches_noise_stability() {
        // with self-loops kept, 1-Φ(S)·μ(S) = <1_S, T_{1-2η} 1_S>; undo the loop mass
        let n = 6;
        let eta = 0.15;
        let h = plain(n, eta);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = random_subset(n, 9, &mut rng);
        let mut values = vec![0.0f64; 1 << n];
        for &p in &set {
            values[p as usize] = 1.0;
        }
        let indicator = RealFunction::new(values).unwrap();
        let smoothed = apply_noise_operator(&indicator, 1.0 - 2.0 * eta);
        let stability: f64 = indicator
            .values()
            .iter()
            .zip(smoothed.values())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / f64::from(1u32 << n);
        let density = set.len() as f64 / f64::from(1u32 << n);
        let lazy = (1.0 - eta).powi(n as i32);
        let with_loops = stability / density;
        let expected = (with_loops - lazy) / (1.0 - lazy);
        assert!((h.one_minus_expansion_exact(&set).unwrap() - expected).abs() < 1e-12);
        let half = apply_noise_operator(&indicator, (1.0 - 2.0 * eta).sqrt());
        let two = lp_norm(&half, 2.0).unwrap();
        assert!((two * two - stability).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_tracks_exact() {
        let h = NoisyHypercube::new(10, 0.2, WindowMode::Typical, true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let set = random_subset(10, 300, &mut rng);
        let exact = h.one_minus_expansion_exact(&set).unwrap();
        let est = h.one_minus_expansion_mc(&set, 200_000, &mut rng).unwrap();
        assert!((est.value - exact).abs() < 5.0 * est.stderr);
    }
}
