//! Finite metrics: validation, negative type, distance to `ℓ1` and the
//! rounding of sparse cuts into a balanced one.

mod distortion;
pub mod lp;
mod rounding;

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::bes::BesSdpSolution;
use crate::error::{invalid, Result};
use crate::tensor::BesVectorHandle;
use crate::unique_games::format::{content_lines, parse_error, parse_field};

pub use distortion::{distortion_program, l1_distortion_lp, CutDecomposition, DistortionResult, DEFAULT_MAX_POINTS};
pub use rounding::{
    best_xor_combination, parse_demand_graph, round_to_balanced_cut, sparsity, write_demand_graph,
    write_side_vector, DemandGraph, LocalSearchOracle, RoundingOptions,
    RoundingResult, ScriptedOracle, SparseCutOracle, XorResult,
};

pub const TRIANGLE_TOLERANCE: f64 = 1e-9;
pub const EIGEN_TOLERANCE: f64 = -1e-9;

/// Symmetric, nonnegative, zero diagonal, triangle inequality within
/// [`TRIANGLE_TOLERANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetric {
    n: usize,
    d: Vec<f64>,
}

impl FiniteMetric {
    pub fn new(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return invalid(format!("distance matrix has {} entries, expected {}", d.len(), n * n));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return invalid(format!("d({i},{i}) = {} is not zero", d[i * n + i]));
            }
            for j in 0..n {
                let v = d[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return invalid(format!("d({i},{j}) = {v} is not a nonnegative number"));
                }
                if v != d[j * n + i] {
                    return invalid(format!("d({i},{j}) differs from d({j},{i})"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let excess = d[i * n + k] - d[i * n + j] - d[j * n + k];
                    if excess > TRIANGLE_TOLERANCE {
                        return invalid(format!("triangle inequality fails at ({i},{j},{k}) by {excess:e}"));
                    }
                }
            }
        }
        Ok(FiniteMetric { n, d })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                d[i * n + j] = v;
                d[j * n + i] = v;
            }
        }
        FiniteMetric::new(n, d)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn submetric(&self, points: &[usize]) -> Result<Self> {
        FiniteMetric::from_fn(points.len(), |i, j| self.get(points[i], points[j]))
    }
}

/// Hamming distance on `{-1,1}^k`, points indexed by bitmask.
pub fn hamming_metric(k: u32) -> Result<FiniteMetric> {
    FiniteMetric::from_fn(1 << k, |i, j| (i ^ j).count_ones() as f64)
}

/// `‖V_a - V_b‖²` over the given handles.
pub fn bes_handle_metric(sol: &BesSdpSolution, handles: &[BesVectorHandle]) -> Result<FiniteMetric> {
    FiniteMetric::from_fn(handles.len(), |i, j| (2.0 - 2.0 * sol.inner(&handles[i], &handles[j])).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeTypeResult {
    pub is_negative_type: bool,
    pub base_point: usize,
    pub min_eigenvalue: f64,
    /// Eigenvector of the most negative eigenvalue when the verdict is false.
    pub witness: Option<Vec<f64>>,
    /// Points whose squared distances reproduce the metric when true.
    pub realization: Option<Vec<Vec<f64>>>,
}

impl NegativeTypeResult {
    /// Largest `|‖p_i - p_j‖² - d(i,j)|` of the realization.
    pub fn realization_error(&self, m: &FiniteMetric) -> Option<f64> {
        let pts = self.realization.as_ref()?;
        let mut worst: f64 = 0.0;
        for i in 0..m.len() {
            for j in 0..m.len() {
                let sq: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                worst = worst.max((sq - m.get(i, j)).abs());
            }
        }
        Some(worst)
    }
}

/// PSD test of `G[i][j] = (d(i,r) + d(j,r) - d(i,j))/2`.
pub fn is_negative_type(m: &FiniteMetric) -> NegativeTypeResult {
    is_negative_type_at(m, 0)
}

pub fn is_negative_type_at(m: &FiniteMetric, r: usize) -> NegativeTypeResult {
    let n = m.len();
    if n == 0 {
        return NegativeTypeResult {
            is_negative_type: true,
            base_point: r,
            min_eigenvalue: 0.0,
            witness: None,
            realization: Some(Vec::new()),
        };
    }
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, r) + m.get(j, r) - m.get(i, j)));
    let eig = SymmetricEigen::new(g);
    let (min_idx, &min_eigenvalue) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty spectrum");
    let scale = 1.0 + eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if min_eigenvalue < EIGEN_TOLERANCE * scale {
        let witness = eig.eigenvectors.column(min_idx).iter().copied().collect();
        return NegativeTypeResult {
            is_negative_type: false,
            base_point: r,
            min_eigenvalue,
            witness: Some(witness),
            realization: None,
        };
    }
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let realization = (0..n)
        .map(|i| (0..n).map(|c| eig.eigenvectors[(i, c)] * roots[c]).collect())
        .collect();
    NegativeTypeResult { is_negative_type: true, base_point: r, min_eigenvalue, witness: None, realization: Some(realization) }
}

/// Greedy farthest-point order starting at `start`; ties go to the lowest index.
pub fn farthest_point_sample(n: usize, count: usize, start: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let count = count.min(n);
    if count == 0 {
        return Vec::new();
    }
    let mut chosen = vec![start];
    let mut nearest: Vec<f64> = (0..n).map(|i| dist(start, i)).collect();
    while chosen.len() < count {
        let mut next = None;
        for i in 0..n {
            if chosen.contains(&i) {
                continue;
            }
            if next.is_none_or(|b: usize| nearest[i] > nearest[b]) {
                next = Some(i);
            }
        }
        let next = next.expect("points remain");
        chosen.push(next);
        for (i, v) in nearest.iter_mut().enumerate() {
            *v = v.min(dist(next, i));
        }
    }
    chosen
}

/// `METRIC n`, then row `i` holding `d(i, 0) .. d(i, i)`.
pub fn write_metric(m: &FiniteMetric) -> String {
    let mut out = format!("METRIC {}\n", m.len());
    for i in 0..m.len() {
        let row: Vec<String> = (0..=i).map(|j| format!("{:.16e}", m.get(i, j))).collect();
        writeln!(out, "{}", row.join(" ")).unwrap();
    }
    out
}

pub fn parse_metric(text: &str) -> Result<FiniteMetric> {
    let mut lines = content_lines(text);
    let Some((ln, header)) = lines.next() else {
        return parse_error(0, "empty input");
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("METRIC") {
        return parse_error(ln, "expected header `METRIC n`");
    }
    let n: usize = parse_field(ln, tok.next(), "n")?;
    let mut d = vec![0.0; n * n];
    let mut row = 0;
    for (ln, line) in lines {
        if row >= n {
            return parse_error(ln, "more rows than points");
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| parse_field(ln, Some(t), "distance"))
            .collect::<Result<_>>()?;
        if vals.len() != row + 1 {
            return parse_error(ln, format!("row {row} has {} entries, expected {}", vals.len(), row + 1));
        }
        for (j, &v) in vals.iter().enumerate() {
            d[row * n + j] = v;
            d[j * n + row] = v;
        }
        row += 1;
    }
    if row != n {
        return parse_error(0, format!("expected {n} rows, found {row}"));
    }
    FiniteMetric::new(n, d)
}
