//! The two-query Long Code test over a Unique Games instance.
//!
//! A proof assigns each vertex `v` a table `A^v : {-1,1}^N → {-1,1}`. The
//! verifier picks an edge `(v, w, π)` by weight, a uniform `x` and an
//! `ε`-noisy `μ`, and accepts iff `A^v(x) = A^w((xμ)∘π)` where
//! `((xμ)∘π)_j = (xμ)_{π(j)}`. Its acceptance probability is
//! `1/2 + 1/2 Σ_e wt(e) Σ_β Â^v_{π(β)} Â^w_β (1-2ε)^{|β|}`.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fourier::{BooleanFunction, FourierSpectrum};
use crate::rng::{self, Estimate};
use crate::unique_games::format::{content_lines, parse_error, parse_field};
use crate::unique_games::{Labeling, UgInstance};

/// Largest `N` for which per-vertex tables of length `2^N` are built.
pub const MAX_PROOF_LABELS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Proof {
    labels: usize,
    tables: Vec<BooleanFunction>,
}

impl Proof {
    pub fn new(labels: usize, tables: Vec<BooleanFunction>) -> Result<Self> {
        if labels == 0 || labels > MAX_PROOF_LABELS {
            return Err(Error::OutOfRange(format!("N={labels} outside 1..={MAX_PROOF_LABELS}")));
        }
        if let Some(v) = tables.iter().position(|t| t.k() as usize != labels) {
            return invalid(format!("table of vertex {v} is not over {{-1,1}}^{labels}"));
        }
        Ok(Proof { labels, tables })
    }

    /// Every vertex constant `value`.
    pub fn constant(vertices: usize, labels: usize, value: i8) -> Result<Self> {
        Proof::new(labels, vec![BooleanFunction::constant(labels as u32, value); vertices])
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    pub fn num_vertices(&self) -> usize {
        self.tables.len()
    }

    pub fn tables(&self) -> &[BooleanFunction] {
        &self.tables
    }

    pub fn table(&self, v: usize) -> &BooleanFunction {
        &self.tables[v]
    }

    pub fn set_table(&mut self, v: usize, table: BooleanFunction) -> Result<()> {
        if table.k() as usize != self.labels {
            return Err(Error::ShapeMismatch("table dimension differs from the proof".into()));
        }
        self.tables[v] = table;
        Ok(())
    }

    pub fn spectra(&self) -> Vec<FourierSpectrum<f64>> {
        self.tables.par_iter().map(|t| t.spectrum()).collect()
    }

    fn check_against(&self, u: &UgInstance) -> Result<()> {
        if self.labels != u.labels() || self.tables.len() != u.num_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "proof covers {} vertices over N={}, instance has {} over N={}",
                self.tables.len(),
                self.labels,
                u.num_vertices(),
                u.labels()
            )));
        }
        Ok(())
    }
}

/// `A^v = x ↦ x_{λ(v)}`.
pub fn long_code_proof(lam: &Labeling, labels: usize) -> Result<Proof> {
    if let Some(v) = lam.0.iter().position(|&l| l as usize >= labels) {
        return invalid(format!("vertex {v} has label {} outside [{labels}]", lam.0[v]));
    }
    let tables = lam.0.iter().map(|&l| BooleanFunction::dictator(labels as u32, l)).collect();
    Proof::new(labels, tables)
}

/// `E_v |Â^v_∅|`
pub fn piecewise_balance_stat(proof: &Proof) -> f64 {
    proof.tables.iter().map(|t| t.mean().abs()).sum::<f64>() / proof.tables.len() as f64
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::OutOfRange(format!("epsilon={eps} outside [0, 1/2)")));
    }
    Ok(())
}

/// Per-edge subset images `β ↦ π(β)` and the noise weights `(1-2ε)^{|β|}`.
#[derive(Debug, Clone)]
pub struct FourierTables {
    pub subset_images: Vec<Vec<u32>>,
    pub noise: Vec<f64>,
}

impl FourierTables {
    pub fn new(u: &UgInstance, eps: f64) -> Result<Self> {
        check_epsilon(eps)?;
        let n = u.labels();
        if n > MAX_PROOF_LABELS {
            return Err(Error::TooLarge { mode: "Fourier evaluation", detail: format!("N={n}") });
        }
        let rho = 1.0 - 2.0 * eps;
        let levels: Vec<f64> = (0..=n)
            .map(|d| if d == 0 { 1.0 } else { (d as f64 * rho.ln()).exp() })
            .collect();
        let noise = (0..1usize << n).map(|b| levels[b.count_ones() as usize]).collect();
        let subset_images = u
            .edges()
            .par_iter()
            .map(|e| (0..1usize << n).map(|b| e.pi.map_subset(b) as u32).collect())
            .collect();
        Ok(FourierTables { subset_images, noise })
    }

    /// `Σ_β Â^v_{π(β)} Â^w_β (1-2ε)^{|β|}` for edge `idx`.
    #[inline]
    pub fn edge_correlation(&self, idx: usize, spec_v: &[f64], spec_w: &[f64]) -> f64 {
        self.subset_images[idx]
            .iter()
            .zip(spec_w)
            .zip(&self.noise)
            .map(|((&img, &bw), &r)| spec_v[img as usize] * bw * r)
            .sum()
    }
}

pub fn acceptance_probability_exact(u: &UgInstance, proof: &Proof, eps: f64) -> Result<f64> {
    proof.check_against(u)?;
    let tables = FourierTables::new(u, eps)?;
    let spectra = proof.spectra();
    let corr: f64 = u
        .edges()
        .par_iter()
        .enumerate()
        .map(|(idx, e)| e.weight * tables.edge_correlation(idx, spectra[e.v].coeffs(), spectra[e.w].coeffs()))
        .sum();
    Ok(0.5 + 0.5 * corr / u.total_weight())
}

/// `y = (x ⊕ μ)∘π` on sign masks.
#[inline]
pub fn permute_bits(z: u64, pi: &crate::unique_games::Permutation) -> u64 {
    let mut y = 0u64;
    for j in 0..pi.len() {
        y |= ((z >> pi.apply(j as u32)) & 1) << j;
    }
    y
}

/// `μ` with each coordinate `-1` independently with probability `ε`.
pub fn sample_noise<R: Rng + ?Sized>(n: usize, eps: f64, rng: &mut R) -> u64 {
    let mut mu = 0u64;
    for j in 0..n {
        if rng.gen::<f64>() < eps {
            mu |= 1 << j;
        }
    }
    mu
}

/// Simulates the verifier; deterministic per seed.
pub fn acceptance_probability_mc(u: &UgInstance, proof: &Proof, eps: f64, samples: u64, seed: u64) -> Result<Estimate> {
    proof.check_against(u)?;
    check_epsilon(eps)?;
    if samples == 0 {
        return invalid("samples must be positive");
    }
    let pick = WeightedIndex::new(u.edges().iter().map(|e| e.weight))
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let n = u.labels();
    let chunks = 32u64;
    let accepted: u64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::indexed_stream(seed, "pcp_mc", chunk);
            let count = samples / chunks + u64::from(chunk < samples % chunks);
            let mut hits = 0u64;
            for _ in 0..count {
                let e = &u.edges()[pick.sample(&mut rng)];
                let x = rng.gen_range(0..1u64 << n);
                let mu = sample_noise(n, eps, &mut rng);
                let y = permute_bits(x ^ mu, &e.pi);
                if proof.tables[e.v].eval(x as usize) == proof.tables[e.w].eval(y as usize) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let hits = accepted as f64;
    Ok(Estimate::from_moments(hits, hits, samples))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub labeling: Labeling,
    pub value: f64,
    /// Vertices whose spectrum had no mass off `∅` and got a uniform label.
    pub fallback_vertices: Vec<usize>,
}

/// Draws `α` with probability `(Â^v_α)²` (redrawing `α = ∅`), then a
/// uniform element of `α`; keeps the best of `rounds` labelings.
pub fn decode_labeling(u: &UgInstance, proof: &Proof, seed: u64, rounds: usize) -> Result<DecodeResult> {
    proof.check_against(u)?;
    let n = proof.labels;
    let spectra = proof.spectra();
    let mut samplers = Vec::with_capacity(spectra.len());
    let mut fallback_vertices = Vec::new();
    for (v, spec) in spectra.iter().enumerate() {
        let weights: Vec<f64> = spec
            .coeffs()
            .iter()
            .enumerate()
            .map(|(s, &c)| if s == 0 { 0.0 } else { c * c })
            .collect();
        if weights.iter().sum::<f64>() < 1e-12 {
            fallback_vertices.push(v);
            samplers.push(None);
        } else {
            samplers.push(Some(WeightedIndex::new(weights).map_err(|e| Error::InvalidInput(e.to_string()))?));
        }
    }
    let mut best: Option<(Labeling, f64)> = None;
    for round in 0..rounds.max(1) {
        let mut rng = rng::indexed_stream(seed, "decode", round as u64);
        let lam = Labeling(
            samplers
                .iter()
                .map(|s| match s {
                    None => rng.gen_range(0..n as u32),
                    Some(dist) => {
                        let alpha = dist.sample(&mut rng);
                        let members: Vec<u32> = (0..n as u32).filter(|j| (alpha >> j) & 1 == 1).collect();
                        members[rng.gen_range(0..members.len())]
                    }
                })
                .collect(),
        );
        let value = u.value(&lam)?;
        if best.as_ref().is_none_or(|b| value > b.1) {
            best = Some((lam, value));
        }
    }
    let (labeling, value) = best.unwrap();
    Ok(DecodeResult { labeling, value, fallback_vertices })
}

/// `PROOF |V| N`, then one line of `2^N` entries `±1` per vertex.
pub fn write_proof(proof: &Proof) -> String {
    let mut out = format!("PROOF {} {}\n", proof.tables.len(), proof.labels);
    for t in &proof.tables {
        let row: Vec<&str> = t.table().iter().map(|&v| if v > 0 { "1" } else { "-1" }).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

pub fn parse_proof(text: &str) -> Result<Proof> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("PROOF") {
        return parse_error(ln, "expected header `PROOF |V| N`");
    }
    let vertices: usize = parse_field(ln, tok.next(), "|V|")?;
    let labels: usize = parse_field(ln, tok.next(), "N")?;
    if labels == 0 || labels > MAX_PROOF_LABELS {
        return parse_error(ln, format!("N={labels} outside 1..={MAX_PROOF_LABELS}"));
    }
    let mut tables = Vec::with_capacity(vertices);
    for (ln, line) in lines {
        let row: Vec<i8> = line
            .split_whitespace()
            .map(|t| parse_field(ln, Some(t), "entry"))
            .collect::<Result<_>>()?;
        if row.len() != 1 << labels {
            return parse_error(ln, format!("table has {} entries, expected {}", row.len(), 1usize << labels));
        }
        tables.push(BooleanFunction::from_table(row).or_else(|e| parse_error(ln, e.to_string()))?);
    }
    if tables.len() != vertices {
        return parse_error(0, format!("expected {vertices} tables, found {}", tables.len()));
    }
    Proof::new(labels, tables)
}
