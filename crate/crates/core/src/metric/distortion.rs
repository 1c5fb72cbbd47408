//! Least distortion of a finite metric into `ℓ1`, as an LP over the cut cone.

use super::lp::{certify, solve, write_lp_file, LinearProgram, LpCertificate, Relation};
use super::FiniteMetric;
use crate::error::{Error, Result};

/// `n ≤ 12` keeps the program at `2^{n-1}` columns.
pub const DEFAULT_MAX_POINTS: usize = 12;

/// `Σ_S λ_S δ_S` with each `S` a subset of the first `n - 1` points.
#[derive(Debug, Clone, PartialEq)]
pub struct CutDecomposition {
    pub n: usize,
    pub cuts: Vec<(u64, f64)>,
}

impl CutDecomposition {
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.cuts
            .iter()
            .filter(|(s, _)| ((s >> i) ^ (s >> j)) & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }

    /// The induced `ℓ1` metric.
    pub fn metric(&self) -> Result<FiniteMetric> {
        FiniteMetric::from_fn(self.n, |i, j| self.distance(i, j))
    }
}

#[derive(Debug, Clone)]
pub struct DistortionResult {
    /// `None` in export-only mode.
    pub gamma: Option<f64>,
    pub decomposition: Option<CutDecomposition>,
    pub certificate: Option<LpCertificate<f64>>,
    pub lp_text: String,
}

/// The program `min Γ` subject to
/// `d(i,j) ≤ Σ λ_S δ_S(i,j) ≤ Γ·d(i,j)` for every pair, `λ ≥ 0`.
pub fn distortion_program(m: &FiniteMetric) -> LinearProgram<f64> {
    let n = m.len();
    let cuts = (1u64 << n.saturating_sub(1)) - 1;
    let vars = cuts as usize + 1;
    let mut objective = vec![0.0; vars];
    objective[cuts as usize] = 1.0;
    let mut lp = LinearProgram::new(objective);
    lp.names = (1..=cuts).map(|s| format!("l{s}")).chain(std::iter::once("gamma".to_string())).collect();
    for i in 0..n {
        for j in i + 1..n {
            let d = m.get(i, j);
            let row: Vec<f64> =
                (1..=cuts).map(|s| if ((s >> i) ^ (s >> j)) & 1 == 1 { 1.0 } else { 0.0 }).collect();
            let mut lower = row.clone();
            lower.push(0.0);
            lp.add(lower, Relation::Ge, d).expect("row width");
            let mut upper = row;
            upper.push(-d);
            lp.add(upper, Relation::Le, 0.0).expect("row width");
        }
    }
    lp
}

/// Solves for `n ≤ n_max`; larger metrics only get the exported program.
pub fn l1_distortion_lp(m: &FiniteMetric, n_max: usize) -> Result<DistortionResult> {
    if m.len() < 2 {
        return Err(Error::InvalidInput("distortion needs at least two points".into()));
    }
    if m.len() > 63 {
        return Err(Error::TooLarge { mode: "cut-cone LP", detail: format!("n={}", m.len()) });
    }
    let lp = distortion_program(m);
    let lp_text = write_lp_file(&lp);
    if m.len() > n_max {
        return Ok(DistortionResult { gamma: None, decomposition: None, certificate: None, lp_text });
    }
    let sol = solve(&lp)?;
    let certificate = certify(&lp, &sol);
    let cuts = lp.num_vars() - 1;
    let decomposition = CutDecomposition {
        n: m.len(),
        cuts: (0..cuts).filter(|&s| sol.x[s] > 0.0).map(|s| (s as u64 + 1, sol.x[s])).collect(),
    };
    Ok(DistortionResult {
        gamma: Some(sol.x[cuts]),
        decomposition: Some(decomposition),
        certificate: Some(certificate),
        lp_text,
    })
}
