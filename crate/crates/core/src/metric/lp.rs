//! Dense two-phase primal simplex.
//!
//! Problems are `minimize cᵀx` subject to rows `aᵢᵀx {≤,=,≥} bᵢ` and
//! `x ≥ 0`. The tableau keeps its artificial columns after phase one so
//! that the dual solution can be read off the columns that formed the
//! initial basis. Right-hand sides are shifted by a small generic amount
//! while pivoting and restored at the final basis, and the ratio test
//! prefers large pivots among near ties.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::Scalar;

pub const PIVOT_TOLERANCE: f64 = 1e-9;
/// Consecutive degenerate pivots after which [`PivotRule::Dantzig`]
/// prices by Bland's rule until the objective moves again.
/// Relative size of the right-hand-side shifts that break degenerate ties.
pub const PERTURBATION: f64 = 1e-7;
pub const DEGENERATE_STREAK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PivotRule {
    /// Lowest-index improving column.
    Bland,
    /// Most negative reduced cost, with Bland's rule on degenerate stalls.
    #[default]
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub relation: Relation,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub constraints: Vec<Constraint<T>>,
    pub names: Vec<String>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new(objective: Vec<T>) -> Self {
        let names = (0..objective.len()).map(|j| format!("x{j}")).collect();
        LinearProgram { objective, constraints: Vec::new(), names }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add(&mut self, coeffs: Vec<T>, relation: Relation, rhs: T) -> Result<()> {
        if coeffs.len() != self.num_vars() {
            return Err(Error::ShapeMismatch(format!(
                "constraint has {} coefficients, program has {} variables",
                coeffs.len(),
                self.num_vars()
            )));
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(())
    }

    pub fn row_value(&self, i: usize, x: &[T]) -> T {
        self.constraints[i].coeffs.iter().zip(x).map(|(&a, &v)| a * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// One multiplier per constraint: `≥` rows nonnegative, `≤` rows
    /// nonpositive, equality rows free.
    pub duals: Vec<T>,
    pub iterations: usize,
}

struct Tableau<T> {
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    cost: Vec<T>,
    cost_rhs: T,
    basis: Vec<usize>,
    tol: T,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in &mut self.rows[r] {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f != T::zero() {
                for (v, &pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
            }
        }
        let f = self.cost[c];
        if f != T::zero() {
            for (v, &pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost_rhs -= f * pivot_rhs;
        }
        self.basis[r] = c;
    }

    fn entering(&self, allowed: usize, bland: bool) -> Option<usize> {
        if bland {
            return (0..allowed).find(|&j| self.cost[j] < -self.tol);
        }
        let mut best: Option<usize> = None;
        for j in 0..allowed {
            if self.cost[j] < -self.tol && best.is_none_or(|b| self.cost[j] < self.cost[b]) {
                best = Some(j);
            }
        }
        best
    }

    /// Pivots over columns `< allowed` until optimal; returns iterations.
    fn run(&mut self, allowed: usize, limit: usize, rule: PivotRule) -> Result<usize> {
        let mut streak = 0;
        for it in 0..limit {
            let bland = rule == PivotRule::Bland || streak >= DEGENERATE_STREAK;
            let Some(c) = self.entering(allowed, bland) else {
                return Ok(it);
            };
            let mut bound: Option<T> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > self.tol {
                    let relaxed = (self.rhs[i].max(T::zero()) + self.tol) / a;
                    bound = Some(bound.map_or(relaxed, |b| b.min(relaxed)));
                }
            }
            let mut best: Option<(usize, T)> = None;
            if let Some(bound) = bound {
                for i in 0..self.rows.len() {
                    let a = self.rows[i][c];
                    if a > self.tol && self.rhs[i].max(T::zero()) / a <= bound {
                        let better = match best {
                            None => true,
                            Some((bi, _)) => {
                                let ab = self.rows[bi][c];
                                a > ab * T::of(1.0 + 1e-12)
                                    || (a >= ab * T::of(1.0 - 1e-12) && self.basis[i] < self.basis[bi])
                            }
                        };
                        if better {
                            best = Some((i, self.rhs[i].max(T::zero()) / a));
                        }
                    }
                }
            }
            let Some((r, ratio)) = best else {
                return Err(Error::Lp("unbounded"));
            };
            if ratio > self.tol {
                streak = 0;
            } else {
                streak += 1;
            }
            self.pivot(r, c);
        }
        Err(Error::Lp("not converged within the iteration limit"))
    }
}

/// Solves the program with the default [`PivotRule`]; errors with
/// [`Error::Lp`] when it is infeasible or unbounded.
pub fn solve<T: Scalar>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    solve_with(lp, PivotRule::default())
}

pub fn solve_with<T: Scalar>(lp: &LinearProgram<T>, rule: PivotRule) -> Result<LpSolution<T>> {
    match simplex(lp, rule, true) {
        Err(Error::Lp("perturbed basis infeasible")) => simplex(lp, rule, false),
        other => other,
    }
}

fn simplex<T: Scalar>(lp: &LinearProgram<T>, rule: PivotRule, perturb: bool) -> Result<LpSolution<T>> {
    let n = lp.num_vars();
    let m = lp.constraints.len();
    let tol = T::of(PIVOT_TOLERANCE);
    let mut flip = vec![false; m];
    let mut rel = Vec::with_capacity(m);
    for (i, c) in lp.constraints.iter().enumerate() {
        flip[i] = c.rhs < T::zero();
        rel.push(match (c.relation, flip[i]) {
            (Relation::Le, true) => Relation::Ge,
            (Relation::Ge, true) => Relation::Le,
            (r, _) => r,
        });
    }
    let slack_count = rel.iter().filter(|r| **r != Relation::Eq).count();
    let art_count = rel.iter().filter(|r| **r != Relation::Le).count();
    let width = n + slack_count + art_count;
    let mut rows = vec![vec![T::zero(); width]; m];
    let mut rhs = vec![T::zero(); m];
    let mut basis = vec![0; m];
    let mut origin = vec![0; m];
    let (mut s, mut a) = (n, n + slack_count);
    for i in 0..m {
        let sign = if flip[i] { -T::one() } else { T::one() };
        for (dst, &src) in rows[i].iter_mut().zip(&lp.constraints[i].coeffs) {
            *dst = sign * src;
        }
        rhs[i] = sign * lp.constraints[i].rhs;
        match rel[i] {
            Relation::Le => {
                rows[i][s] = T::one();
                basis[i] = s;
                origin[i] = s;
                s += 1;
            }
            Relation::Ge => {
                rows[i][s] = -T::one();
                s += 1;
                rows[i][a] = T::one();
                basis[i] = a;
                origin[i] = a;
                a += 1;
            }
            Relation::Eq => {
                rows[i][a] = T::one();
                basis[i] = a;
                origin[i] = a;
                a += 1;
            }
        }
    }
    let exact_rhs = rhs.clone();
    if perturb {
        let scale = T::of(PERTURBATION) * (T::one() + rhs.iter().fold(T::zero(), |a, b| a.max(b.abs())));
        for i in 0..m {
            let u = T::of(1.0 + (i as f64 * 0.618_033_988_749_895).fract());
            match rel[i] {
                Relation::Le => rhs[i] += scale * u,
                Relation::Ge => rhs[i] -= (scale * u).min(exact_rhs[i]),
                Relation::Eq => {}
            }
        }
    }
    let art_start = n + slack_count;
    let mut cost = vec![T::zero(); width];
    let mut cost_rhs = T::zero();
    for i in 0..m {
        if basis[i] >= art_start {
            for j in 0..art_start {
                cost[j] -= rows[i][j];
            }
            cost_rhs -= rhs[i];
        }
    }
    let mut tab = Tableau { rows, rhs, cost, cost_rhs, basis, tol };
    let limit = 50 * (width + m).max(100);
    let mut iterations = tab.run(art_start, limit, rule)?;
    if -tab.cost_rhs > T::of(1e-7) * (T::one() + lp.constraints.iter().map(|c| c.rhs.abs()).sum::<T>()) {
        return Err(Error::Lp("infeasible"));
    }
    for r in 0..m {
        if tab.basis[r] >= art_start {
            if let Some(c) = (0..art_start).find(|&j| tab.rows[r][j].abs() > tol) {
                tab.pivot(r, c);
                iterations += 1;
            }
        }
    }

    let mut cost = vec![T::zero(); width];
    cost[..n].copy_from_slice(&lp.objective);
    let mut cost_rhs = T::zero();
    for r in 0..m {
        let cb = cost[tab.basis[r]];
        if cb != T::zero() {
            for j in 0..width {
                cost[j] -= cb * tab.rows[r][j];
            }
            cost_rhs -= cb * tab.rhs[r];
        }
    }
    tab.cost = cost;
    tab.cost_rhs = cost_rhs;
    iterations += tab.run(art_start, limit, rule)?;
    if perturb {
        let feas = T::of(1e-9) * (T::one() + exact_rhs.iter().fold(T::zero(), |a, b| a.max(b.abs())));
        for r in 0..m {
            tab.rhs[r] = (0..m).map(|i| tab.rows[r][origin[i]] * exact_rhs[i]).sum();
            if tab.rhs[r] < -feas {
                return Err(Error::Lp("perturbed basis infeasible"));
            }
        }
    }

    let mut x = vec![T::zero(); n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs[r];
        }
    }
    let duals = (0..m)
        .map(|i| {
            let y = -tab.cost[origin[i]];
            if flip[i] {
                -y
            } else {
                y
            }
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
    Ok(LpSolution { x, objective, duals, iterations })
}

/// Residuals of the optimality conditions for a primal-dual pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpCertificate<T> {
    pub primal_infeasibility: T,
    /// Largest negative reduced cost `(c - Aᵀy)_j`.
    pub dual_infeasibility: T,
    /// Largest multiplier of the wrong sign.
    pub dual_sign_violation: T,
    /// Largest of `|x_j (c - Aᵀy)_j|` and `|y_i (aᵢᵀx - bᵢ)|`.
    pub complementary_slackness: T,
    pub duality_gap: T,
}

impl<T: Scalar> LpCertificate<T> {
    pub fn max_residual(&self) -> T {
        self.primal_infeasibility
            .max(self.dual_infeasibility)
            .max(self.dual_sign_violation)
            .max(self.complementary_slackness)
            .max(self.duality_gap)
    }
}

pub fn certify<T: Scalar>(lp: &LinearProgram<T>, sol: &LpSolution<T>) -> LpCertificate<T> {
    let zero = T::zero();
    let mut primal = sol.x.iter().fold(zero, |acc, &v| acc.max(-v));
    let mut cs = zero;
    let mut sign = zero;
    let mut dual_obj = zero;
    let mut reduced = lp.objective.clone();
    for (i, c) in lp.constraints.iter().enumerate() {
        let y = sol.duals[i];
        let slack = lp.row_value(i, &sol.x) - c.rhs;
        primal = primal.max(match c.relation {
            Relation::Le => slack,
            Relation::Ge => -slack,
            Relation::Eq => slack.abs(),
        });
        sign = sign.max(match c.relation {
            Relation::Le => y,
            Relation::Ge => -y,
            Relation::Eq => zero,
        });
        cs = cs.max((y * slack).abs());
        dual_obj += y * c.rhs;
        for (r, &a) in reduced.iter_mut().zip(&c.coeffs) {
            *r -= y * a;
        }
    }
    let dual = reduced.iter().fold(zero, |acc, &r| acc.max(-r));
    for (&x, &r) in sol.x.iter().zip(&reduced) {
        cs = cs.max((x * r).abs());
    }
    LpCertificate {
        primal_infeasibility: primal.max(zero),
        dual_infeasibility: dual,
        dual_sign_violation: sign,
        complementary_slackness: cs,
        duality_gap: (sol.objective - dual_obj).abs(),
    }
}

fn term<T: Scalar>(out: &mut String, coeff: T, name: &str, first: &mut bool) {
    if coeff == T::zero() {
        return;
    }
    let v = coeff.to_f64_lossy();
    if *first {
        write!(out, " {v:.16e} {name}").unwrap();
        *first = false;
    } else if v < 0.0 {
        write!(out, " - {:.16e} {name}", -v).unwrap();
    } else {
        write!(out, " + {v:.16e} {name}").unwrap();
    }
}

/// CPLEX LP text: `Minimize`, `Subject To` with rows `c0 .. cM`, `Bounds`
/// declaring every variable nonnegative, and `End`.
pub fn write_lp_file<T: Scalar>(lp: &LinearProgram<T>) -> String {
    let mut out = String::from("\\ generated linear program\nMinimize\n obj:");
    let mut first = true;
    for (j, &c) in lp.objective.iter().enumerate() {
        term(&mut out, c, &lp.names[j], &mut first);
    }
    if first {
        out.push_str(" 0 x0");
    }
    out.push_str("\nSubject To\n");
    for (i, c) in lp.constraints.iter().enumerate() {
        write!(out, " c{i}:").unwrap();
        let mut first = true;
        for (j, &a) in c.coeffs.iter().enumerate() {
            term(&mut out, a, &lp.names[j], &mut first);
        }
        if first {
            out.push_str(" 0 x0");
        }
        let op = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        writeln!(out, " {op} {:.16e}", c.rhs.to_f64_lossy()).unwrap();
    }
    out.push_str("Bounds\n");
    for name in &lp.names {
        writeln!(out, " {name} >= 0").unwrap();
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_program() {
        // min -3x - 5y s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18
        let mut lp = LinearProgram::new(vec![-3.0f64, -5.0]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0).unwrap();
        lp.add(vec![0.0, 2.0], Relation::Le, 12.0).unwrap();
        lp.add(vec![3.0, 2.0], Relation::Le, 18.0).unwrap();
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-12);
        assert!((sol.x[0] - 2.0).abs() < 1e-12 && (sol.x[1] - 6.0).abs() < 1e-12);
        let cert = certify(&lp, &sol);
        assert!(cert.max_residual() < 1e-12, "{cert:?}");
        assert!((sol.duals[1] + 1.5).abs() < 1e-12 && (sol.duals[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        // min x + 2y + 3z s.t. x + y + z = 1, y + z ≥ 0.5, -x ≥ -0.8
        let mut lp = LinearProgram::new(vec![1.0f64, 2.0, 3.0]);
        lp.add(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0).unwrap();
        lp.add(vec![0.0, 1.0, 1.0], Relation::Ge, 0.5).unwrap();
        lp.add(vec![-1.0, 0.0, 0.0], Relation::Ge, -0.8).unwrap();
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 1.5).abs() < 1e-12);
        assert!(certify(&lp, &sol).max_residual() < 1e-12);
        let sol32 = solve(&LinearProgram {
            objective: vec![1.0f32, 2.0, 3.0],
            constraints: lp
                .constraints
                .iter()
                .map(|c| Constraint { coeffs: c.coeffs.iter().map(|&v| v as f32).collect(), relation: c.relation, rhs: c.rhs as f32 })
                .collect(),
            names: lp.names.clone(),
        })
        .unwrap();
        assert!((sol32.objective - 1.5).abs() < 1e-5);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0f64]);
        lp.add(vec![1.0], Relation::Ge, 2.0).unwrap();
        lp.add(vec![1.0], Relation::Le, 1.0).unwrap();
        assert_eq!(solve(&lp).unwrap_err(), Error::Lp("infeasible"));
        let mut lp = LinearProgram::new(vec![-1.0f64, 0.0]);
        lp.add(vec![1.0, -1.0], Relation::Le, 1.0).unwrap();
        assert_eq!(solve(&lp).unwrap_err(), Error::Lp("unbounded"));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the largest-coefficient rule.
        let mut lp = LinearProgram::new(vec![-0.75f64, 150.0, -0.02, 6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0).unwrap();
        lp.add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0).unwrap();
        lp.add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0).unwrap();
        for rule in [PivotRule::Bland, PivotRule::Dantzig] {
            let sol = solve_with(&lp, rule).unwrap();
            assert!((sol.objective + 0.05).abs() < 1e-12);
            assert!(certify(&lp, &sol).max_residual() < 1e-12);
        }
    }

    #[test]
    fn pivot_rules_agree_on_random_programs() {
        use rand::Rng;
        let mut rng = crate::rng::stream(11, "lp");
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let mut lp = LinearProgram::<f64>::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
            for _ in 0..rng.gen_range(1..10) {
                let row = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                lp.add(row, Relation::Le, rng.gen_range(0.0..2.0)).unwrap();
            }
            lp.add(vec![1.0; n], Relation::Ge, 0.1).unwrap();
            let a = solve_with(&lp, PivotRule::Bland);
            let b = solve_with(&lp, PivotRule::Dantzig);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    assert!((a.objective - b.objective).abs() < 1e-9);
                    assert!(certify(&lp, &b).max_residual() < 1e-9);
                }
                (a, b) => assert_eq!(a.unwrap_err(), b.unwrap_err()),
            }
        }
    }

    #[test]
    fn lp_file_layout() {
        let mut lp = LinearProgram::new(vec![1.0f64, -2.0]);
        lp.add(vec![1.0, 1.0], Relation::Ge, 1.0).unwrap();
        let text = write_lp_file(&lp);
        assert!(text.contains("Minimize\n obj: 1.0000000000000000e0 x0 - 2.0000000000000000e0 x1\n"));
        assert!(text.contains(" c0: 1.0000000000000000e0 x0 + 1.0000000000000000e0 x1 >= 1.0000000000000000e0\n"));
        assert!(text.ends_with("Bounds\n x0 >= 0\n x1 >= 0\nEnd\n"));
    }
}
