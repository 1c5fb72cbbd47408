//! The explicit vector solution `u_f = f/√N` and its verification.
//!
//! Entries are stored as signed integers with the `1/√N` scale implicit,
//! so every inner product is an integer divided by `N`.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use super::{KvInstance, QuotientStructure};
use crate::error::{Error, Result};
use crate::report::{Check, CheckReport};
use crate::rng;
use crate::unique_games::format::{content_lines, parse_error, parse_field};
use crate::unique_games::UgInstance;

#[derive(Debug, Clone, PartialEq)]
pub struct UgVectorSolution {
    n: usize,
    classes: usize,
    /// `classes × N × N`, row `S` of class `i` holds `N·(u_{[P_i]χ_S})`/√N.
    entries: Vec<i32>,
}

impl UgVectorSolution {
    pub fn from_quotient(q: &QuotientStructure) -> Self {
        let n = q.n();
        let mut entries = Vec::with_capacity(q.num_classes() * n * n);
        for class in 0..q.num_classes() {
            for s in 0..n as u32 {
                let f = q.member(class, s);
                entries.extend((0..n).map(|x| if (f >> x) & 1 == 1 { -1 } else { 1 }));
            }
        }
        UgVectorSolution { n, classes: q.num_classes(), entries }
    }

    pub fn from_entries(n: usize, classes: usize, entries: Vec<i32>) -> Result<Self> {
        if entries.len() != classes * n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for {classes} classes of {n}×{n}",
                entries.len()
            )));
        }
        Ok(UgVectorSolution { n, classes, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, class: usize, s: usize) -> &[i32] {
        let start = (class * self.n + s) * self.n;
        &self.entries[start..start + self.n]
    }

    pub fn row_mut(&mut self, class: usize, s: usize) -> &mut [i32] {
        let start = (class * self.n + s) * self.n;
        &mut self.entries[start..start + self.n]
    }

    /// The vector `u` itself, scaled by `1/√N`.
    pub fn vector(&self, class: usize, s: usize) -> Vec<f64> {
        let scale = 1.0 / (self.n as f64).sqrt();
        self.row(class, s).iter().map(|&e| f64::from(e) * scale).collect()
    }

    #[inline]
    pub fn inner_scaled(&self, i: usize, s: usize, j: usize, t: usize) -> i64 {
        self.row(i, s)
            .iter()
            .zip(self.row(j, t))
            .map(|(&a, &b)| i64::from(a) * i64::from(b))
            .sum()
    }

    /// `⟨u_{i,s}, u_{j,t}⟩`
    #[inline]
    pub fn inner(&self, i: usize, s: usize, j: usize, t: usize) -> f64 {
        self.inner_scaled(i, s, j, t) as f64 / self.n as f64
    }

    /// `N×N` matrix of `⟨u_{i,a}, u_{j,b}⟩`, row-major in `a`.
    pub fn cross_gram(&self, i: usize, j: usize) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                out.push(self.inner(i, a, j, b));
            }
        }
        out
    }

    fn check_shape(&self, u: &UgInstance) -> Result<()> {
        if u.labels() != self.n || u.num_vertices() != self.classes {
            return Err(Error::ShapeMismatch(format!(
                "instance has {} vertices × {} labels, solution {} classes × {}",
                u.num_vertices(),
                u.labels(),
                self.classes,
                self.n
            )));
        }
        Ok(())
    }
}

/// A defect in one basis: `⟨u_s, u_t⟩` deviating from `δ_{st}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisDefect {
    pub class: usize,
    pub s: usize,
    pub t: usize,
    pub inner: f64,
}

/// All orthonormality defects above `tol`, for pinpointing corrupted rows.
pub fn check_orthonormality(sol: &UgVectorSolution, tol: f64) -> Vec<BasisDefect> {
    let mut defects = Vec::new();
    for class in 0..sol.classes {
        for s in 0..sol.n {
            for t in s..sol.n {
                let inner = sol.inner(class, s, class, t);
                let target = if s == t { 1.0 } else { 0.0 };
                if (inner - target).abs() > tol {
                    defects.push(BasisDefect { class, s, t, inner });
                }
            }
        }
    }
    defects
}

/// Rows of the defect list ranked by how many defects they take part in.
pub fn suspect_rows(defects: &[BasisDefect]) -> Vec<((usize, usize), usize)> {
    let mut counts = std::collections::BTreeMap::new();
    for d in defects {
        *counts.entry((d.class, d.s)).or_insert(0) += 1;
        if d.t != d.s {
            *counts.entry((d.class, d.t)).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<_> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpCheckOptions {
    /// Base-vector triples; exhaustive when all ordered triples fit.
    pub triangle_triples: u64,
    /// Class pairs for the cross-sum check; exhaustive when all pairs fit.
    pub cross_pairs: u64,
    /// Random vectors for the basis-completeness check.
    pub completeness_samples: usize,
    pub seed: u64,
}

impl Default for SdpCheckOptions {
    fn default() -> Self {
        SdpCheckOptions {
            triangle_triples: 1_000_000,
            cross_pairs: 1_000_000,
            completeness_samples: 64,
            seed: 0,
        }
    }
}

fn triangle_residual(ab: f64, ac: f64, bc: f64) -> f64 {
    // all rotations, and sign flips of single vectors
    let mut worst = f64::NEG_INFINITY;
    for (sa, sb, sc) in [(1.0, 1.0, 1.0), (1.0, 1.0, -1.0), (1.0, -1.0, 1.0), (-1.0, 1.0, 1.0)] {
        let (ab, ac, bc) = (sa * sb * ab, sa * sc * ac, sb * sc * bc);
        worst = worst.max(ac + bc - 1.0 - ab).max(ab + bc - 1.0 - ac).max(ab + ac - 1.0 - bc);
    }
    worst.max(0.0)
}

fn base_triangle_check(sol: &UgVectorSolution, triples: u64, seed: u64, name: &str) -> Check {
    let n = sol.n;
    let total = (sol.classes * n) as u64;
    let split = |g: u64| ((g as usize) / n, (g as usize) % n);
    let eval = |a: u64, b: u64, c: u64, check: &mut Check| {
        let (ia, sa) = split(a);
        let (ib, sb) = split(b);
        let (ic, sc) = split(c);
        let ab = sol.inner(ia, sa, ib, sb);
        let ac = sol.inner(ia, sa, ic, sc);
        let bc = sol.inner(ib, sb, ic, sc);
        check.observe(triangle_residual(ab, ac, bc), || format!("({a},{b},{c})"));
    };
    if total.checked_pow(3).is_some_and(|t| t <= triples) {
        (0..total)
            .into_par_iter()
            .map(|a| {
                let mut check = Check::new(name);
                for b in 0..total {
                    for c in 0..total {
                        eval(a, b, c, &mut check);
                    }
                }
                check
            })
            .reduce(|| Check::new(name), Check::merge)
    } else {
        let chunks = 64u64;
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = rng::indexed_stream(seed, name, chunk);
                let mut check = Check::new(name);
                let count = triples / chunks + u64::from(chunk < triples % chunks);
                for _ in 0..count {
                    eval(rng.gen_range(0..total), rng.gen_range(0..total), rng.gen_range(0..total), &mut check);
                }
                check
            })
            .reduce(|| Check::new(name), Check::merge)
    }
}

fn class_pairs(classes: usize, budget: u64, seed: u64, label: &str) -> Vec<(usize, usize)> {
    let all = (classes * classes.saturating_sub(1) / 2) as u64;
    if all <= budget {
        (0..classes).flat_map(|i| (i + 1..classes).map(move |j| (i, j))).collect()
    } else {
        let mut rng = rng::stream(seed, label);
        (0..budget)
            .map(|_| {
                let i = rng.gen_range(0..classes);
                let mut j = rng.gen_range(0..classes - 1);
                if j >= i {
                    j += 1;
                }
                (i.min(j), i.max(j))
            })
            .collect()
    }
}

/// Constraint suite of the UG relaxation on the squared vectors:
/// norm sums, orthogonality within a vertex, nonnegativity and sums across
/// vertices, the base-vector triangle inequality, and `±1` entries.
pub fn check_ug_sdp_feasibility(sol: &UgVectorSolution, opts: &SdpCheckOptions) -> CheckReport {
    let n = sol.n;
    let nf = n as f64;
    let mut report = CheckReport::default();

    let mut entries = Check::new("entries_pm1");
    for (idx, &e) in sol.entries.iter().enumerate() {
        entries.observe(f64::from((e.abs() - 1).abs()), || format!("entry {idx}"));
    }
    report.push(entries);

    let mut norm_sum = Check::new("norm_sum");
    let mut orth = Check::new("intra_orthogonality");
    for class in 0..sol.classes {
        let mut total = 0.0;
        for s in 0..n {
            for t in 0..n {
                let sq = sol.inner(class, s, class, t).powi(2);
                if s == t {
                    total += sq;
                } else {
                    orth.observe(sq.abs(), || format!("class {class} rows {s},{t}"));
                }
            }
        }
        norm_sum.observe((total - nf).abs(), || format!("class {class}"));
    }
    report.push(norm_sum);
    report.push(orth);

    let pairs = class_pairs(sol.classes, opts.cross_pairs, opts.seed, "cross_pairs");
    let (nonneg, sums) = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut nonneg = Check::new("cross_nonnegativity");
            let mut sums = Check::new("cross_sum");
            let mut total = 0.0;
            for s in 0..n {
                for t in 0..n {
                    let sq = sol.inner(i, s, j, t).powi(2);
                    nonneg.observe((-sq).max(0.0), || format!("classes {i},{j} rows {s},{t}"));
                    total += sq;
                }
            }
            sums.observe((total - nf).abs(), || format!("classes {i},{j}"));
            (nonneg, sums)
        })
        .reduce(
            || (Check::new("cross_nonnegativity"), Check::new("cross_sum")),
            |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
        );
    report.push(nonneg);
    report.push(sums);
    report.push(base_triangle_check(sol, opts.triangle_triples, opts.seed, "triangle"));
    report
}

/// `Σ_e wt(e)·(1/N) Σ_l ⟨u^v_{π(l)}, u^w_l⟩²`.
pub fn ug_sdp_objective(u: &UgInstance, sol: &UgVectorSolution) -> Result<f64> {
    sol.check_shape(u)?;
    let n = sol.n;
    Ok(u.edges()
        .iter()
        .map(|e| {
            let inner: f64 = (0..n as u32)
                .map(|l| sol.inner(e.v, e.pi.apply(l) as usize, e.w, l as usize).powi(2))
                .sum();
            e.weight * inner / n as f64
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBounds {
    pub objective: f64,
    /// Smallest `⟨u^v_{π(l)}, u^w_l⟩` over edges and labels.
    pub min_matched_inner: f64,
    /// `1 − 4η`
    pub matched_bound: f64,
    pub min_matched_square: f64,
    /// `max(0, 1 − 4η)²`
    pub squared_bound: f64,
    /// `1 − 9η`
    pub overall_bound: f64,
}

impl ObjectiveBounds {
    pub fn matched_holds(&self, tol: f64) -> bool {
        self.min_matched_inner >= self.matched_bound - tol
    }

    pub fn squared_holds(&self, tol: f64) -> bool {
        self.min_matched_square >= self.squared_bound - tol
    }

    pub fn overall_holds(&self, tol: f64) -> bool {
        self.objective >= self.overall_bound - tol
    }
}

pub fn objective_bounds(kv: &KvInstance, sol: &UgVectorSolution) -> Result<ObjectiveBounds> {
    let objective = ug_sdp_objective(&kv.ug, sol)?;
    let n = sol.n;
    let mut min_inner = f64::INFINITY;
    for e in kv.ug.edges() {
        for l in 0..n as u32 {
            min_inner = min_inner.min(sol.inner(e.v, e.pi.apply(l) as usize, e.w, l as usize));
        }
    }
    let eta = kv.eta;
    Ok(ObjectiveBounds {
        objective,
        min_matched_inner: min_inner,
        matched_bound: 1.0 - 4.0 * eta,
        min_matched_square: min_inner.max(0.0).powi(2),
        squared_bound: (1.0 - 4.0 * eta).max(0.0).powi(2),
        overall_bound: 1.0 - 9.0 * eta,
    })
}

/// Orthonormal basis, triangle inequality, matching and closeness checks.
///
/// Matching is exhaustive over class pairs when `m(m-1)/2` fits in
/// `opts.cross_pairs`. Closeness reports, per edge, the shortfall of the best
/// `π`-compatible pair `(i₀, j₀)` below `1 − 4η`.
pub fn verify_ulc_properties(u: &UgInstance, sol: &UgVectorSolution, eta: f64, opts: &SdpCheckOptions) -> Result<CheckReport> {
    sol.check_shape(u)?;
    let n = sol.n;
    let mut report = CheckReport::default();

    let mut basis = Check::new("orthonormal_basis");
    let mut rng = rng::stream(opts.seed, "completeness");
    for sample in 0..opts.completeness_samples {
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm: f64 = w.iter().map(|x| x * x).sum();
        for class in 0..sol.classes {
            let proj: f64 = (0..n)
                .map(|s| sol.vector(class, s).iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().powi(2))
                .sum();
            basis.observe((proj - norm).abs() / norm, || format!("class {class} sample {sample}"));
        }
    }
    report.push(basis);

    report.push(base_triangle_check(sol, opts.triangle_triples, opts.seed, "triangle"));

    let mut pairs = class_pairs(sol.classes, opts.cross_pairs, opts.seed, "matching_pairs");
    pairs.extend((0..sol.classes).map(|i| (i, i)));
    let matching = pairs
        .par_iter()
        .map(|&(v, w)| {
            let gram = sol.cross_gram(v, w);
            let mut check = Check::new("matching");
            for i in 0..n {
                for j in 0..n {
                    for l in 1..n {
                        let dev = (gram[i * n + j] - gram[(i ^ l) * n + (j ^ l)]).abs();
                        check.observe(dev, || format!("classes {v},{w} i={i} j={j} l={l}"));
                    }
                }
            }
            check
        })
        .reduce(|| Check::new("matching"), Check::merge);
    report.push(matching);

    let target = 1.0 - 4.0 * eta;
    let mut closeness = Check::new("closeness");
    for (idx, e) in u.edges().iter().enumerate() {
        let mut best = f64::INFINITY;
        for i0 in 0..n {
            for j0 in 0..n {
                let compatible = (0..n).all(|l| e.pi.apply((j0 ^ l) as u32) as usize == i0 ^ l);
                if compatible {
                    best = best.min((target - sol.inner(e.v, i0, e.w, j0)).max(0.0));
                }
            }
        }
        closeness.observe(best, || format!("edge {idx}"));
    }
    report.push(closeness);
    Ok(report)
}

/// `BASIS m N`, then per class a `CLASS i` line and `N` rows of `N` signed
/// integers (row `S` is `√N·u_{[P_i]χ_S}`).
pub fn write_basis(sol: &UgVectorSolution) -> String {
    let mut out = format!("BASIS {} {}\n", sol.classes, sol.n);
    for class in 0..sol.classes {
        writeln!(out, "CLASS {class}").unwrap();
        for s in 0..sol.n {
            let row: Vec<String> = sol.row(class, s).iter().map(|e| e.to_string()).collect();
            writeln!(out, "{}", row.join(" ")).unwrap();
        }
    }
    out
}

pub fn parse_basis(text: &str) -> Result<UgVectorSolution> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("BASIS") {
        return parse_error(ln, "expected header `BASIS m N`");
    }
    let classes: usize = parse_field(ln, tok.next(), "m")?;
    let n: usize = parse_field(ln, tok.next(), "N")?;
    let mut entries = Vec::with_capacity(classes * n * n);
    for class in 0..classes {
        let Some((ln, line)) = lines.next() else {
            return parse_error(0, format!("missing block for class {class}"));
        };
        if line != format!("CLASS {class}") {
            return parse_error(ln, format!("expected `CLASS {class}`"));
        }
        for _ in 0..n {
            let Some((ln, line)) = lines.next() else {
                return parse_error(0, format!("class {class} has fewer than {n} rows"));
            };
            let row: Vec<i32> = line
                .split_whitespace()
                .map(|t| parse_field(ln, Some(t), "entry"))
                .collect::<Result<_>>()?;
            if row.len() != n {
                return parse_error(ln, format!("row has {} entries, expected {n}", row.len()));
            }
            entries.extend(row);
        }
    }
    if let Some((ln, _)) = lines.next() {
        return parse_error(ln, "trailing content after the last class");
    }
    UgVectorSolution::from_entries(n, classes, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypercube::WindowMode;
    use crate::kv::build_kv_instance;

    fn k2() -> (KvInstance, UgVectorSolution) {
        let kv = build_kv_instance(2, 0.3, WindowMode::Typical, true).unwrap();
        let sol = UgVectorSolution::from_quotient(&kv.quotient);
        (kv, sol)
    }

    #[test]
    fn squared_vectors_orthogonal_and_complete() {
        let (_, sol) = k2();
        for class in 0..4 {
            let mut diag = 0.0;
            for s in 0..4 {
                for t in 0..4 {
                    let sq = sol.inner(class, s, class, t).powi(2);
                    if s == t {
                        diag += sq;
                    } else {
                        assert_eq!(sq, 0.0);
                    }
                }
            }
            assert_eq!(diag, 4.0);
        }
        let cross: f64 = (0..4).flat_map(|s| (0..4).map(move |t| (s, t))).map(|(s, t)| sol.inner(0, s, 2, t).powi(2)).sum();
        assert_eq!(cross, 4.0);
    }

    #[test]
    fn feasibility_exact_at_k2() {
        let (kv, sol) = k2();
        let opts = SdpCheckOptions::default();
        let report = check_ug_sdp_feasibility(&sol, &opts);
        assert!(report.within(1e-12), "{}", report.to_tsv());
        assert_eq!(report.get("triangle").unwrap().checked, 16 * 16 * 16);
        let ulc = verify_ulc_properties(&kv.ug, &sol, kv.eta, &opts).unwrap();
        assert!(ulc.within(1e-12), "{}", ulc.to_tsv());
    }

    #[test]
    fn matched_terms_follow_distance() {
        let (kv, sol) = k2();
        let n = 4.0;
        let mut expected = 0.0;
        for (e, &d) in kv.ug.edges().iter().zip(&kv.distances) {
            expected += e.weight * (1.0 - 2.0 * f64::from(d) / n).powi(2);
        }
        let obj = ug_sdp_objective(&kv.ug, &sol).unwrap();
        assert!((obj - expected).abs() < 1e-15);
        let b = objective_bounds(&kv, &sol).unwrap();
        assert!(b.overall_holds(0.0) && b.squared_holds(0.0) && b.matched_holds(0.0));
    }

    #[test]
    fn basis_round_trip_and_corruption() {
        let (_, sol) = k2();
        let text = write_basis(&sol);
        assert_eq!(parse_basis(&text).unwrap(), sol);
        let mut bad = sol.clone();
        bad.row_mut(2, 1)[3] *= -1;
        let defects = check_orthonormality(&bad, 1e-12);
        assert!(!defects.is_empty());
        assert!(defects.iter().all(|d| d.class == 2));
        assert_eq!(suspect_rows(&defects)[0].0, (2, 1));
        assert!(check_orthonormality(&sol, 1e-12).is_empty());
        assert!(parse_basis("BASIS 1 2\nCLASS 0\n1 1\n").is_err());
    }

    #[test]
    fn triangle_residual_detects_violations() {
        assert_eq!(triangle_residual(1.0, 1.0, 1.0), 0.0);
        assert!(triangle_residual(-1.0, 1.0, 1.0) > 0.0);
    }
}
