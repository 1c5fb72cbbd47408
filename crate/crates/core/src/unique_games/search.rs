use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::{Labeling, Permutation, UgEdge, UgInstance};
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const DEFAULT_EXHAUSTIVE_BUDGET: u64 = 100_000_000;

/// Maximum over all `N^{|V|}` labelings. The first maximizer in
/// lexicographic order (vertex 0 most significant) is returned.
pub fn opt_exhaustive(u: &UgInstance, budget: u64) -> Result<(Labeling, f64)> {
    let count = (u.labels() as f64).powi(u.num_vertices() as i32);
    if count > budget as f64 {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let n = u.labels() as u32;
    let vertices = u.num_vertices();
    let mut lam = Labeling(vec![0; vertices]);
    let mut best = (lam.clone(), u.value_unchecked(&lam));
    loop {
        // odometer with the last vertex fastest
        let mut pos = vertices;
        loop {
            if pos == 0 {
                return Ok(best);
            }
            pos -= 1;
            lam.0[pos] += 1;
            if lam.0[pos] < n {
                break;
            }
            lam.0[pos] = 0;
        }
        let val = u.value_unchecked(&lam);
        if val > best.1 {
            best = (lam.clone(), val);
        }
    }
}

fn local_search(u: &UgInstance, incidence: &[Vec<usize>], lam: &mut Labeling) -> f64 {
    let n = u.labels();
    let mut score = vec![0.0f64; n];
    loop {
        let mut improved = false;
        for v in 0..u.num_vertices() {
            score.iter_mut().for_each(|s| *s = 0.0);
            for &idx in &incidence[v] {
                let e = &u.edges()[idx];
                if e.v == e.w {
                    for l in 0..n as u32 {
                        if e.pi.apply(l) == l {
                            score[l as usize] += e.weight;
                        }
                    }
                } else if e.v == v {
                    score[e.pi.apply(lam.get(e.w)) as usize] += e.weight;
                } else {
                    let target = e.pi.as_slice().iter().position(|&p| p == lam.get(e.v)).unwrap();
                    score[target] += e.weight;
                }
            }
            let mut best = 0usize;
            for l in 1..n {
                if score[l] > score[best] {
                    best = l;
                }
            }
            let current = lam.get(v) as usize;
            if score[best] > score[current] + 1e-15 {
                lam.0[v] = best as u32;
                improved = true;
            }
        }
        if !improved {
            return u.value_unchecked(lam);
        }
    }
}

/// Greedy single-vertex relabelling from `restarts` random starts.
///
/// Restart `r` draws its start from stream `opt_search#r`, so the result for
/// `restarts + 1` is never worse than for `restarts`.
pub fn opt_search(u: &UgInstance, seed: u64, restarts: usize) -> (Labeling, f64) {
    let incidence = u.incidence();
    let n = u.labels() as u32;
    let runs: Vec<(Labeling, f64)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::indexed_stream(seed, "opt_search", r as u64);
            let mut lam = Labeling((0..u.num_vertices()).map(|_| rng.gen_range(0..n)).collect());
            let val = local_search(u, &incidence, &mut lam);
            (lam, val)
        })
        .collect();
    let mut best = runs[0].clone();
    for run in runs.into_iter().skip(1) {
        if run.1 > best.1 {
            best = run;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub instance: UgInstance,
    pub hidden: Labeling,
    /// Total weight of edges whose permutation was deranged.
    pub perturbed_mass: f64,
}

/// A weight-regular instance consistent with a hidden labeling, with
/// `floor(η·|E|)` edges deranged.
///
/// The graph is a union of `max(1, round(edge_density·|V|/2))` rounds; each
/// round joins every `v` to `σ(v)` for a fresh random permutation `σ` of the
/// vertices, so all weighted degrees agree exactly.
pub fn plant_instance(
    num_vertices: usize,
    labels: usize,
    eta: f64,
    edge_density: f64,
    seed: u64,
) -> Result<PlantedInstance> {
    if num_vertices == 0 || labels == 0 {
        return invalid("planted instance needs vertices and labels");
    }
    if !(0.0..1.0).contains(&eta) || !(edge_density > 0.0) {
        return invalid(format!("eta={eta}, edge_density={edge_density} out of range"));
    }
    let mut rng = rng::stream(seed, "plant_instance");
    let hidden = Labeling((0..num_vertices).map(|_| rng.gen_range(0..labels as u32)).collect());
    let rounds = ((edge_density * num_vertices as f64 / 2.0).round() as usize).max(1);
    let count = rounds * num_vertices;
    let weight = 1.0 / count as f64;
    let mut pairs = Vec::with_capacity(count);
    let mut order: Vec<usize> = (0..num_vertices).collect();
    for _ in 0..rounds {
        order.shuffle(&mut rng);
        for v in 0..num_vertices {
            pairs.push((v, order[v]));
        }
    }
    let perturbed = if labels > 1 { (eta * count as f64).floor() as usize } else { 0 };
    let deranged: std::collections::HashSet<usize> =
        rand::seq::index::sample(&mut rng, count, perturbed).into_iter().collect();
    let mut edges = Vec::with_capacity(count);
    for (idx, (v, w)) in pairs.into_iter().enumerate() {
        let mut map: Vec<u32> = (0..labels as u32).collect();
        map.shuffle(&mut rng);
        let src = hidden.get(w) as usize;
        let dst = hidden.get(v);
        let at = map.iter().position(|&p| p == dst).unwrap();
        map.swap(at, src);
        if deranged.contains(&idx) {
            let mut other = rng.gen_range(0..labels - 1);
            if other >= src {
                other += 1;
            }
            map.swap(src, other);
        }
        edges.push(UgEdge { v, w, weight, pi: Permutation::new(map)? });
    }
    let instance = UgInstance::new(labels, num_vertices, edges)?;
    Ok(PlantedInstance {
        instance,
        hidden,
        perturbed_mass: perturbed as f64 * weight,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exhaustive_two_vertices() {
        let u = UgInstance::new(
            2,
            2,
            vec![UgEdge { v: 0, w: 1, weight: 1.0, pi: Permutation::identity(2) }],
        )
        .unwrap();
        let (lam, val) = opt_exhaustive(&u, 100).unwrap();
        assert_eq!(val, 1.0);
        assert_eq!(lam, Labeling(vec![0, 0]));
        assert!(matches!(opt_exhaustive(&u, 3), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn planted_bookkeeping() {
        let clean = plant_instance(10, 4, 0.0, 0.8, 1).unwrap();
        assert_eq!(clean.instance.value(&clean.hidden).unwrap(), 1.0);
        let noisy = plant_instance(10, 4, 0.1, 0.8, 1).unwrap();
        let val = noisy.instance.value(&noisy.hidden).unwrap();
        assert!((val - (1.0 - noisy.perturbed_mass)).abs() < 1e-12);
        assert!((0.9..=1.0).contains(&val));
        let single = plant_instance(5, 1, 0.3, 1.0, 2).unwrap();
        assert_eq!(single.instance.value(&Labeling::constant(5, 0)).unwrap(), 1.0);
    }

    #[test]
    fn search_is_a_lower_bound_and_deterministic() {
        let planted = plant_instance(6, 3, 0.2, 0.7, 6).unwrap();
        let (_, exact) = opt_exhaustive(&planted.instance, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        let (lam, found) = opt_search(&planted.instance, 42, 8);
        assert!(found <= exact + 1e-12);
        assert_eq!(planted.instance.value(&lam).unwrap(), found);
        assert_eq!(opt_search(&planted.instance, 42, 8), (lam, found));
        let mut previous = 0.0;
        for r in 1..6 {
            let (_, v) = opt_search(&planted.instance, 42, r);
            assert!(v >= previous);
            previous = v;
        }
    }

    #[test]
    fn search_recovers_lightly_perturbed_plant() {
        let planted = plant_instance(40, 6, 0.05, 0.3, 11).unwrap();
        let (_, found) = opt_search(&planted.instance, 3, 20);
        assert!(found >= 0.95 - 0.05, "found {found}");
    }
}
