//! Run configuration: a TOML file, then command-line overrides.

use std::path::{Path, PathBuf};

use kvgap::hypercube::{Window, WindowMode};
use serde::Deserialize;

use crate::CliError;

/// Window selection as written in a config file: `"typical"`, `"disabled"`
/// or `"lo..hi"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec(pub WindowMode);

impl std::str::FromStr for WindowSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "typical" => Ok(WindowSpec(WindowMode::Typical)),
            "disabled" => Ok(WindowSpec(WindowMode::Disabled)),
            other => {
                let (lo, hi) = other
                    .split_once("..")
                    .ok_or_else(|| format!("window {other:?} is not `typical`, `disabled` or `lo..hi`"))?;
                let lo = lo.trim().parse().map_err(|_| format!("bad window start {lo:?}"))?;
                let hi = hi.trim().parse().map_err(|_| format!("bad window end {hi:?}"))?;
                Ok(WindowSpec(WindowMode::Custom(Window { lo, hi })))
            }
        }
    }
}

impl std::fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            WindowMode::Typical => f.write_str("typical"),
            WindowMode::Disabled => f.write_str("disabled"),
            WindowMode::Custom(w) => write!(f, "{}..{}", w.lo, w.hi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budgets {
    /// Triangle triples sampled when an exhaustive sweep does not fit.
    pub triples: u64,
    /// Monte Carlo samples.
    pub samples: u64,
    /// Local-search restarts.
    pub restarts: usize,
    /// Labelings enumerated before exhaustive search gives way to local search.
    pub exhaustive: u64,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { triples: 1_000_000, samples: 200_000, restarts: 32, exhaustive: 100_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: u32,
    pub eta: f64,
    pub epsilon: f64,
    /// Empty means just `epsilon`.
    pub epsilon_sweep: Vec<f64>,
    pub t: u32,
    pub l_in: u32,
    pub window: WindowSpec,
    pub renormalize: bool,
    pub allow_k5: bool,
    pub seed: u64,
    pub budgets: Budgets,
    pub distortion_points: usize,
    pub distortion_max_points: usize,
    /// Exponents `s` of the `ε^s` reference curves in the BES summary.
    pub cut_exponents: Vec<f64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            k: 2,
            eta: 0.3,
            epsilon: 0.3,
            epsilon_sweep: Vec::new(),
            t: 3,
            l_in: 8,
            window: WindowSpec(WindowMode::Typical),
            renormalize: true,
            allow_k5: false,
            seed: 0,
            budgets: Budgets::default(),
            distortion_points: 10,
            distortion_max_points: kvgap::metric::DEFAULT_MAX_POINTS,
            cut_exponents: vec![0.75],
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileBudgets {
    triples: Option<u64>,
    samples: Option<u64>,
    restarts: Option<usize>,
    exhaustive: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    k: Option<u32>,
    eta: Option<f64>,
    epsilon: Option<f64>,
    epsilon_sweep: Option<Vec<f64>>,
    t: Option<u32>,
    l_in: Option<u32>,
    window: Option<String>,
    renormalize: Option<bool>,
    allow_k5: Option<bool>,
    seed: Option<u64>,
    budgets: Option<FileBudgets>,
    distortion_points: Option<usize>,
    distortion_max_points: Option<usize>,
    cut_exponents: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k: Option<u32>,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub epsilon_sweep: Option<Vec<f64>>,
    pub t: Option<u32>,
    pub l_in: Option<u32>,
    pub window: Option<WindowSpec>,
    pub seed: Option<u64>,
    pub budget_triples: Option<u64>,
    pub budget_samples: Option<u64>,
    pub budget_restarts: Option<usize>,
    pub budget_exhaustive: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = file.$field { cfg.$field = v; })* };
        }
        take!(k, eta, epsilon, epsilon_sweep, t, l_in, renormalize, allow_k5, seed, distortion_points, distortion_max_points, cut_exponents, out);
        if let Some(w) = file.window {
            cfg.window = w.parse().map_err(CliError::Config)?;
        }
        if let Some(b) = file.budgets {
            cfg.budgets.triples = b.triples.unwrap_or(cfg.budgets.triples);
            cfg.budgets.samples = b.samples.unwrap_or(cfg.budgets.samples);
            cfg.budgets.restarts = b.restarts.unwrap_or(cfg.budgets.restarts);
            cfg.budgets.exhaustive = b.exhaustive.unwrap_or(cfg.budgets.exhaustive);
        }
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => RunConfig::from_toml(&crate::read_file(p)?)?,
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.k {
            self.k = v;
        }
        if let Some(v) = o.eta {
            self.eta = v;
        }
        if let Some(v) = o.epsilon {
            self.epsilon = v;
        }
        if let Some(v) = &o.epsilon_sweep {
            self.epsilon_sweep = v.clone();
        }
        if let Some(v) = o.t {
            self.t = v;
        }
        if let Some(v) = o.l_in {
            self.l_in = v;
        }
        if let Some(v) = o.window {
            self.window = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.budget_triples {
            self.budgets.triples = v;
        }
        if let Some(v) = o.budget_samples {
            self.budgets.samples = v;
        }
        if let Some(v) = o.budget_restarts {
            self.budgets.restarts = v;
        }
        if let Some(v) = o.budget_exhaustive {
            self.budgets.exhaustive = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let max_k = if self.allow_k5 { 5 } else { kvgap::kv::DEFAULT_MAX_K };
        if !(1..=max_k).contains(&self.k) {
            return Err(CliError::Usage(format!("k={} outside 1..={max_k}", self.k)));
        }
        let open_half = |x: f64| x > 0.0 && x < 0.5;
        if !open_half(self.eta) {
            return Err(CliError::Usage(format!("eta={} outside (0, 1/2)", self.eta)));
        }
        for &e in std::iter::once(&self.epsilon).chain(&self.epsilon_sweep) {
            if !open_half(e) {
                return Err(CliError::Usage(format!("epsilon={e} outside (0, 1/2)")));
            }
        }
        if self.t.is_multiple_of(2) {
            return Err(CliError::Usage(format!("t={} must be odd", self.t)));
        }
        if self.l_in == 0 || self.l_in % 2 == 1 {
            return Err(CliError::Usage(format!("l_in={} must be even and positive", self.l_in)));
        }
        if self.distortion_points < 2 {
            return Err(CliError::Usage("distortion_points must be at least 2".into()));
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        if self.epsilon_sweep.is_empty() {
            vec![self.epsilon]
        } else {
            self.epsilon_sweep.clone()
        }
    }

    /// Seed of the named random stream.
    pub fn stream_seed(&self, label: &str) -> u64 {
        kvgap::rng::derive_seed(self.seed, label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let cfg = RunConfig::from_toml("k = 3\neta = 0.2\nwindow = \"1..2\"\n[budgets]\nrestarts = 4\n").unwrap();
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.window, WindowSpec(WindowMode::Custom(Window { lo: 1, hi: 2 })));
        assert_eq!(cfg.budgets.restarts, 4);
        assert_eq!(cfg.budgets.triples, Budgets::default().triples);
        let mut cfg = cfg;
        cfg.apply(&Overrides { eta: Some(0.25), budget_restarts: Some(9), ..Overrides::default() });
        assert_eq!((cfg.eta, cfg.budgets.restarts), (0.25, 9));
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(RunConfig::from_toml("kk = 3").is_err());
        let bad = [
            RunConfig { t: 2, ..RunConfig::default() },
            RunConfig { l_in: 3, ..RunConfig::default() },
            RunConfig { eta: 0.5, ..RunConfig::default() },
            RunConfig { epsilon_sweep: vec![0.3, 0.0], ..RunConfig::default() },
            RunConfig { k: 0, ..RunConfig::default() },
            RunConfig { k: 5, ..RunConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(CliError::Usage(_))), "{cfg:?}");
        }
        assert_eq!("3..5".parse::<WindowSpec>().unwrap().to_string(), "3..5");
        assert!("3-5".parse::<WindowSpec>().is_err());
    }
}
