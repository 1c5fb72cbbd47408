//! Residual bookkeeping shared by the verification suites.

use std::fmt::Write as _;

/// Largest residual seen by one check, with the location that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub checked: u64,
    pub worst: String,
}

impl Check {
    pub fn new(name: impl Into<String>) -> Self {
        Check { name: name.into(), max_residual: 0.0, checked: 0, worst: String::new() }
    }

    #[inline]
    pub fn observe(&mut self, residual: f64, location: impl FnOnce() -> String) {
        self.checked += 1;
        if residual > self.max_residual || residual.is_nan() {
            self.max_residual = residual;
            self.worst = location();
        }
    }

    pub fn merge(mut self, other: Check) -> Check {
        self.checked += other.checked;
        if other.max_residual > self.max_residual || other.max_residual.is_nan() {
            self.max_residual = other.max_residual;
            self.worst = other.worst;
        }
        self
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_residual <= tol
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
}

impl CheckReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.checks.iter().all(|c| c.within(tol))
    }

    /// Names of checks whose residual exceeds `tol`.
    pub fn failures(&self, tol: f64) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.within(tol)).collect()
    }

    /// `check  max_residual  checked  worst` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("check\tmax_residual\tchecked\tworst\n");
        for c in &self.checks {
            writeln!(out, "{}\t{:.16e}\t{}\t{}", c.name, c.max_residual, c.checked, c.worst).unwrap();
        }
        out
    }
}
