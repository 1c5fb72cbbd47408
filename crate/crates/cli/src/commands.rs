use std::path::PathBuf;
use std::sync::Arc;

use kvgap::bes::{
    self, assign_sdp_solution, balanced_cut_search, check_bes_feasibility, sdp_objective, sdp_objective_mc,
    write_bes, write_cut, BesInstance, BesMode, FeasibilityOptions, GapRow, SearchStrategy, EXACT_MAX_LABELS,
};
use kvgap::hypercube::{NoisyHypercube, WindowMode};
use kvgap::kv::{
    build_kv_from_quotient, check_orthonormality, check_ug_sdp_feasibility, objective_bounds, parse_basis,
    suspect_rows, verify_ulc_properties, write_basis, KvInstance, QuotientStructure, SdpCheckOptions, UgVectorSolution,
};
use kvgap::metric::{
    bes_handle_metric, farthest_point_sample, is_negative_type, is_negative_type_at, l1_distortion_lp,
    parse_demand_graph, parse_metric, round_to_balanced_cut, write_demand_graph, write_metric, write_side_vector,
    DemandGraph, FiniteMetric, LocalSearchOracle, RoundingOptions,
};
use kvgap::pcp::{
    acceptance_probability_exact, acceptance_probability_mc, decode_labeling, long_code_proof, parse_proof,
    piecewise_balance_stat, write_proof, Proof,
};
use kvgap::report::Check;
use kvgap::tensor::{BesVectorHandle, PowerConfig};
use kvgap::unique_games::{
    label_extended_graph, opt_exhaustive, opt_search, parse_labeling, parse_permutation, parse_ug, write_labeling,
    write_ug, Labeling, Permutation, UgInstance,
};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::{fmt_f64, load, CliError, Report, RunConfig};

/// Tolerance of the exact constraint suites at `k ≤ 2`.
pub const EXACT_TOLERANCE: f64 = 1e-12;
/// Tolerance of the constraint suites at `k ≥ 3`.
pub const SUITE_TOLERANCE: f64 = 1e-9;
pub const LP_TOLERANCE: f64 = 1e-7;
pub const BALANCE_THETA: f64 = 5.0 / 6.0;

fn suite_tolerance(k: u32) -> f64 {
    if k <= 2 {
        EXACT_TOLERANCE
    } else {
        SUITE_TOLERANCE
    }
}

fn build_kv(cfg: &RunConfig) -> Result<KvInstance, CliError> {
    let quotient = QuotientStructure::build(cfg.k, cfg.allow_k5)?;
    build_kv_from_quotient(quotient, cfg.eta, cfg.window.0, cfg.renormalize).map_err(|e| match e {
        kvgap::Error::EmptyWindow { .. } => CliError::Advisory(e),
        other => other.into(),
    })
}

fn sdp_options(cfg: &RunConfig) -> SdpCheckOptions {
    SdpCheckOptions {
        triangle_triples: cfg.budgets.triples,
        cross_pairs: cfg.budgets.triples,
        seed: cfg.stream_seed("sdp_checks"),
        ..SdpCheckOptions::default()
    }
}

/// `(labeling, value, method)`: exhaustive when `N^|V|` fits the budget.
fn best_labeling(u: &UgInstance, cfg: &RunConfig) -> Result<(Labeling, f64, &'static str), CliError> {
    let space = (u.labels() as f64).powi(u.num_vertices() as i32);
    if space <= cfg.budgets.exhaustive as f64 {
        let (lam, value) = opt_exhaustive(u, cfg.budgets.exhaustive)?;
        Ok((lam, value, "exhaustive"))
    } else {
        let (lam, value) = opt_search(u, cfg.stream_seed("opt_search"), cfg.budgets.restarts);
        Ok((lam, value, "local_search"))
    }
}

fn config_summary(report: &mut Report, cfg: &RunConfig) {
    report.text("k", cfg.k);
    report.value("eta", cfg.eta);
    report.text("window", cfg.window);
    report.text("renormalize", cfg.renormalize);
    report.text("seed", cfg.seed);
}

/// KV instance, quotient metadata, `opt` and the UG SDP suites.
pub fn build_ug(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut report = Report::new("build-ug");
    config_summary(&mut report, cfg);
    let kv = build_kv(cfg)?;
    let u = &kv.ug;
    let tol = suite_tolerance(cfg.k);
    report.text("labels", u.labels());
    report.text("vertices", u.num_vertices());
    report.text("edges", u.edges().len());
    if let Some(w) = kv.hypercube.window() {
        report.text("window_range", format!("{}..{}", w.lo, w.hi));
    }
    report.value("retained_mass", kv.hypercube.retained_mass());
    report.value("regularity_deviation", u.regularity_deviation());

    let (lam, opt, method) = best_labeling(u, cfg)?;
    report.text("opt_method", method);
    report.value("opt", opt);
    let [n_eta, n_eta_sq, log_m] = kv.opt_reference_curves();
    report.value("ref_n_pow_minus_eta", n_eta);
    report.value("ref_n_pow_minus_eta_eta2", n_eta_sq);
    report.value("ref_log_m_pow_minus_eta", log_m);
    if method == "exhaustive" {
        report.assert("opt_below_n_pow_minus_eta", opt <= n_eta + SUITE_TOLERANCE, || {
            format!("opt {} exceeds N^-eta {}", fmt_f64(opt), fmt_f64(n_eta))
        });
    }

    let sol = UgVectorSolution::from_quotient(&kv.quotient);
    let bounds = objective_bounds(&kv, &sol)?;
    report.value("sdp_objective", bounds.objective);
    report.value("min_matched_inner", bounds.min_matched_inner);
    report.assert("matched_pair_bound", bounds.matched_holds(tol), || {
        format!("min matched inner {} below {}", fmt_f64(bounds.min_matched_inner), fmt_f64(bounds.matched_bound))
    });
    report.assert("matched_square_bound", bounds.squared_holds(tol), || {
        format!("min matched square {} below {}", fmt_f64(bounds.min_matched_square), fmt_f64(bounds.squared_bound))
    });
    report.assert("objective_overall_bound", bounds.overall_holds(tol), || {
        format!("objective {} below {}", fmt_f64(bounds.objective), fmt_f64(bounds.overall_bound))
    });
    report.text("gap_witnessed", opt < bounds.objective);

    let opts = sdp_options(cfg);
    report.checks_from("sdp", check_ug_sdp_feasibility(&sol, &opts), tol);
    report.checks_from("ulc", verify_ulc_properties(u, &sol, cfg.eta, &opts)?, tol);

    report.file("ug.txt", write_ug(u));
    report.file("basis.txt", write_basis(&sol));
    report.file("labeling.txt", write_labeling(&lam));
    report.file("quotient.txt", quotient_metadata(&kv));
    Ok(report)
}

fn quotient_metadata(kv: &KvInstance) -> String {
    let q = &kv.quotient;
    let mut out = format!("QUOTIENT k={} N={} classes={}\n", q.k(), q.n(), q.num_classes());
    for (i, rep) in q.representatives().iter().enumerate() {
        out.push_str(&format!("{i} {rep:#x}\n"));
    }
    out
}

/// Input artifacts of `build-bes`, `verify`, `pcp`.
#[derive(Debug, Clone, Default)]
pub struct Inputs {
    pub ug: Option<PathBuf>,
    pub basis: Option<PathBuf>,
    pub labeling: Option<PathBuf>,
    pub proof: Option<PathBuf>,
    pub permuted_ug: Option<PathBuf>,
    pub label_map: Option<PathBuf>,
    pub metric: Option<PathBuf>,
    pub graph: Option<PathBuf>,
}

struct BesRun {
    row: GapRow,
    report: Report,
}

fn bes_run(
    cfg: &RunConfig,
    u: &UgInstance,
    eta: Option<f64>,
    sol: &Arc<UgVectorSolution>,
    labelings: &[Labeling],
    epsilon: f64,
) -> Result<BesRun, CliError> {
    let mut report = Report::new("build-bes");
    let tag = |name: &str| format!("eps={epsilon}.{name}");
    let mode = if u.labels() <= EXACT_MAX_LABELS { BesMode::Exact } else { BesMode::Sampled };
    let inst = bes::build_bes(u, epsilon, mode)?;
    let inst = match eta {
        Some(eta) => inst.with_eta(eta),
        None => inst,
    };
    let config = PowerConfig::new(cfg.l_in, cfg.t)?;
    let bes_sol = assign_sdp_solution(&inst, sol.clone(), config)?;
    let mut weight = Check::new(tag("edge_weight_sum"));
    weight.observe((inst.total_edge_weight() - 1.0).abs(), || "total".into());
    report.check(weight, SUITE_TOLERANCE);
    report.text(tag("mode"), format!("{mode:?}"));
    report.value(tag("noise_exception_mass"), inst.noise_exception_mass());

    let (objective, best_cut, balance) = if mode == BesMode::Exact {
        let feas = FeasibilityOptions {
            triple_budget: cfg.budgets.triples,
            seed: cfg.stream_seed("bes_triangle"),
            ..FeasibilityOptions::default()
        };
        let tol = suite_tolerance(cfg.k);
        let mut checks = check_bes_feasibility(&inst, &bes_sol, &feas)?;
        for c in &mut checks.checks {
            c.name = tag(&c.name);
        }
        for c in checks.checks {
            let tol = if c.name.contains("triangle") { SUITE_TOLERANCE } else { tol };
            report.check(c, tol);
        }
        let obj = sdp_objective(&inst, &bes_sol)?;
        report.value(tag("sdp_objective"), obj.objective);
        if let Some(c) = obj.empirical_constant {
            report.value(tag("empirical_constant"), c);
        }
        report.value(tag("bracket_objective_bound"), obj.bracket_objective_bound);
        let mut bracket = obj.bracket.clone();
        bracket.name = tag(&bracket.name);
        report.check(bracket, SUITE_TOLERANCE);

        let strategy = SearchStrategy { labelings: labelings.to_vec(), theta: BALANCE_THETA, ..SearchStrategy::default() };
        let search = balanced_cut_search(&inst, cfg.stream_seed("cut_search"), &strategy)?;
        report.value(tag("best_cut_weight"), search.edge_weight);
        report.value(tag("best_cut_balance"), search.balance);
        report.value(tag("best_cut_demand"), search.demand_cut);
        report.value(tag("balance_bound"), inst.balance_bound());
        for s in &cfg.cut_exponents {
            report.value(tag(&format!("eps_pow_{s}")), epsilon.powf(*s));
        }
        if search.edge_weight < obj.objective {
            report.flag(
                tag("relaxation_inequality"),
                format!("best cut {} below sdp objective {}", fmt_f64(search.edge_weight), fmt_f64(obj.objective)),
            );
        }
        report.file(format!("cut_eps{epsilon}.txt"), write_cut(&search.cut));
        (obj.objective, search.edge_weight, search.balance)
    } else {
        let est = sdp_objective_mc(&inst, &bes_sol, cfg.budgets.samples, cfg.stream_seed("bes_objective_mc"))?;
        report.value(tag("sdp_objective_mc"), est.value);
        report.value(tag("sdp_objective_stderr"), est.stderr);
        report.flag(tag("cut_search"), "skipped: sampled mode supports Monte Carlo estimates only");
        (est.value, f64::NAN, f64::NAN)
    };
    report.file(format!("bes_eps{epsilon}.txt"), write_bes(&inst));
    let row = GapRow {
        k: cfg.k,
        eta: eta.unwrap_or(f64::NAN),
        epsilon,
        t: cfg.t,
        sdp_objective: objective,
        best_cut_weight: best_cut,
        balance,
    };
    Ok(BesRun { row, report })
}

/// BES instances over the `ε` sweep with their SDP suites, cut search and
/// gap rows.
pub fn build_bes(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, CliError> {
    let (u, eta, sol) = match &inputs.ug {
        Some(path) => {
            let u = load(path, parse_ug)?;
            let sol = match &inputs.basis {
                Some(b) => load(b, parse_basis)?,
                None => UgVectorSolution::from_quotient(&QuotientStructure::build(cfg.k, cfg.allow_k5)?),
            };
            (u, None, sol)
        }
        None => {
            let kv = build_kv(cfg)?;
            let sol = UgVectorSolution::from_quotient(&kv.quotient);
            (kv.ug, Some(cfg.eta), sol)
        }
    };
    let sol = Arc::new(sol);
    let (lam, _, _) = best_labeling(&u, cfg)?;
    let labelings = vec![lam];
    let runs: Vec<Result<BesRun, CliError>> = cfg
        .epsilons()
        .par_iter()
        .map(|&eps| bes_run(cfg, &u, eta, &sol, &labelings, eps))
        .collect();

    let mut report = Report::new("build-bes");
    config_summary(&mut report, cfg);
    report.text("t", cfg.t);
    report.text("l_in", cfg.l_in);
    report.text("blocks", u.num_vertices());
    report.text("block_size", 1u64 << u.labels());
    let mut gap = format!("{}\n", GapRow::HEADER);
    let mut rows = Vec::new();
    for run in runs {
        let run = run?;
        report.summary.extend(run.report.summary);
        report.checks.extend(run.report.checks);
        report.records.extend(run.report.records);
        report.files.extend(run.report.files);
        gap.push_str(&run.row.to_tsv());
        gap.push('\n');
        rows.push(run.row);
    }
    let mut sorted = rows.clone();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let monotone = sorted.windows(2).all(|w| w[1].ratio() <= w[0].ratio());
    if sorted.len() > 1 {
        report.text("gap_ratio_monotone", monotone);
        if !monotone {
            let ratios: Vec<String> = sorted.iter().map(|r| format!("{}:{}", r.epsilon, fmt_f64(r.ratio()))).collect();
            report.flag("gap_ratio_monotone", format!("ratios not nonincreasing in epsilon: {}", ratios.join(",")));
        }
    }
    report.file("gap.tsv", gap);
    Ok(report)
}

/// Re-runs the invariant suites on serialized artifacts.
pub fn verify(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, CliError> {
    let mut report = Report::new("verify");
    let Some(path) = &inputs.ug else {
        return Err(CliError::Usage("verify needs --ug".into()));
    };
    report.text("ug", path.display());
    let u = load(path, parse_ug)?;
    report.text("labels", u.labels());
    report.text("vertices", u.num_vertices());
    report.text("edges", u.edges().len());
    let mut total = Check::new("weight_sum");
    total.observe((u.total_weight() - 1.0).abs(), || "total".into());
    report.check(total, SUITE_TOLERANCE);
    report.value("regularity_deviation", u.regularity_deviation());
    let mut extended = Check::new("label_extended_weight");
    extended.observe((label_extended_graph(&u).total_weight() - u.labels() as f64).abs(), || "total".into());
    report.check(extended, SUITE_TOLERANCE);

    if let Some(lp) = &inputs.labeling {
        let lam = load(lp, parse_labeling)?;
        let value = u.value(&lam)?;
        report.value("labeling_value", value);
        let mut rng = kvgap::rng::stream(cfg.seed, "verify_relabel");
        let mut invariance = Check::new("relabel_invariance");
        for trial in 0..8 {
            let mut map: Vec<u32> = (0..u.labels() as u32).collect();
            map.shuffle(&mut rng);
            let rho = Permutation::new(map)?;
            let moved = u.relabel(&rho)?.value(&lam.relabel(&rho))?;
            invariance.observe((moved - value).abs(), || format!("trial {trial}"));
        }
        report.check(invariance, EXACT_TOLERANCE);
        if let (Some(pu), Some(pm)) = (&inputs.permuted_ug, &inputs.label_map) {
            let other = load(pu, parse_ug)?;
            let rho = load(pm, parse_permutation)?;
            let moved = other.value(&lam.relabel(&rho))?;
            report.value("permuted_value", moved);
            let mut file_check = Check::new("permuted_file_invariance");
            file_check.observe((moved - value).abs(), || pu.display().to_string());
            report.check(file_check, EXACT_TOLERANCE);
        }
    } else if inputs.permuted_ug.is_some() {
        return Err(CliError::Usage("--permuted-ug needs --labeling and --label-map".into()));
    }

    if let Some(bp) = &inputs.basis {
        let sol = load(bp, parse_basis)?;
        let defects = check_orthonormality(&sol, EXACT_TOLERANCE);
        report.text("basis_defects", defects.len());
        for ((class, row), count) in suspect_rows(&defects).into_iter().take(8) {
            report.fail("orthonormal_basis", format!("class {class} row {row} in {count} defective inner products"));
        }
        let tol = if u.labels() <= 4 { EXACT_TOLERANCE } else { SUITE_TOLERANCE };
        let opts = sdp_options(cfg);
        report.checks_from("sdp", check_ug_sdp_feasibility(&sol, &opts), tol);
        report.checks_from("ulc", verify_ulc_properties(&u, &sol, cfg.eta, &opts)?, tol);
    }
    Ok(report)
}

/// Acceptance of a proof (or the Long Code of a labeling) and its decoding.
pub fn pcp(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, CliError> {
    let mut report = Report::new("pcp");
    let Some(path) = &inputs.ug else {
        return Err(CliError::Usage("pcp needs --ug".into()));
    };
    let u = load(path, parse_ug)?;
    let proof: Proof = match (&inputs.proof, &inputs.labeling) {
        (Some(p), _) => load(p, parse_proof)?,
        (None, Some(l)) => long_code_proof(&load(l, parse_labeling)?, u.labels())?,
        (None, None) => return Err(CliError::Usage("pcp needs --proof or --labeling".into())),
    };
    report.value("epsilon", cfg.epsilon);
    report.text("seed", cfg.seed);
    let exact = acceptance_probability_exact(&u, &proof, cfg.epsilon)?;
    report.value("acceptance_exact", exact);
    let mc = acceptance_probability_mc(&u, &proof, cfg.epsilon, cfg.budgets.samples, cfg.stream_seed("pcp_mc"))?;
    report.value("acceptance_mc", mc.value);
    report.value("acceptance_mc_stderr", mc.stderr);
    let mut agree = Check::new("exact_vs_mc_stderr_units");
    let units = if mc.stderr > 0.0 { (exact - mc.value).abs() / mc.stderr } else { (exact - mc.value).abs() * 1e12 };
    agree.observe(units, || format!("{} samples", mc.samples));
    report.check(agree, 4.0);
    report.value("piecewise_balance", piecewise_balance_stat(&proof));
    let decoded = decode_labeling(&u, &proof, cfg.stream_seed("decode"), cfg.budgets.restarts)?;
    report.value("decoded_value", decoded.value);
    report.text("decode_fallback_vertices", decoded.fallback_vertices.len());
    if !decoded.fallback_vertices.is_empty() {
        report.flag("decode_fallback", format!("{} vertices labeled uniformly", decoded.fallback_vertices.len()));
    }
    report.file("decoded_labeling.txt", write_labeling(&decoded.labeling));
    report.file("proof.txt", write_proof(&proof));
    Ok(report)
}

/// Metric of the BES handles at the configured `k`, `t`, `ℓ_in`.
fn bes_metric(cfg: &RunConfig) -> Result<(FiniteMetric, usize), CliError> {
    let kv = build_kv(cfg)?;
    let inst: BesInstance = bes::build_bes(&kv.ug, cfg.epsilon, BesMode::Sampled)?;
    let sol = assign_sdp_solution(
        &inst,
        Arc::new(UgVectorSolution::from_quotient(&kv.quotient)),
        PowerConfig::new(cfg.l_in, cfg.t)?,
    )?;
    let size = inst.block_size();
    let handles: Vec<BesVectorHandle> =
        (0..inst.num_blocks()).flat_map(|v| (0..size).map(move |x| BesVectorHandle::new(v, x))).collect();
    let dist = |i: usize, j: usize| (2.0 - 2.0 * sol.inner(&handles[i], &handles[j])).max(0.0);
    let picked = farthest_point_sample(handles.len(), cfg.distortion_points, 0, dist);
    let chosen: Vec<BesVectorHandle> = picked.iter().map(|&i| handles[i]).collect();
    Ok((bes_handle_metric(&sol, &chosen)?, handles.len()))
}

/// Negative type and `ℓ1` distortion of a metric file or of sampled BES handles.
pub fn distortion(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, CliError> {
    let mut report = Report::new("distortion");
    let m = match &inputs.metric {
        Some(p) => {
            report.text("metric", p.display());
            load(p, parse_metric)?
        }
        None => {
            config_summary(&mut report, cfg);
            report.text("t", cfg.t);
            report.text("l_in", cfg.l_in);
            let (m, population) = bes_metric(cfg)?;
            report.text("handles", population);
            m
        }
    };
    report.text("points", m.len());
    let neg = is_negative_type(&m);
    report.text("negative_type", neg.is_negative_type);
    report.value("min_eigenvalue", neg.min_eigenvalue);
    if m.len() > 1 {
        let other = is_negative_type_at(&m, 1);
        report.assert("base_point_independent", other.is_negative_type == neg.is_negative_type, || {
            "verdict changes with the base point".into()
        });
    }
    if let Some(err) = neg.realization_error(&m) {
        let mut c = Check::new("realization_error");
        c.observe(err / (1.0 + m.len() as f64), || "realization".into());
        report.check(c, SUITE_TOLERANCE);
    }
    let result = l1_distortion_lp(&m, cfg.distortion_max_points)?;
    match (result.gamma, result.certificate) {
        (Some(gamma), Some(cert)) => {
            report.value("gamma", gamma);
            let mut c = Check::new("lp_certificate");
            c.observe(cert.max_residual(), || "optimality conditions".into());
            report.check(c, LP_TOLERANCE);
            report.assert("gamma_at_least_one", gamma >= 1.0 - LP_TOLERANCE, || format!("gamma {}", fmt_f64(gamma)));
            if let Some(dec) = &result.decomposition {
                report.text("decomposition_cuts", dec.cuts.len());
            }
        }
        _ => report.text("gamma", "export-only"),
    }
    report.file("metric.txt", write_metric(&m));
    report.file("distortion.lp", result.lp_text);
    Ok(report)
}

/// Sparse-cut peeling and XOR rounding on a demand graph file or on the
/// noisy hypercube `{-1,1}^{2^k}` with unit demands.
pub fn round(cfg: &RunConfig, inputs: &Inputs) -> Result<Report, CliError> {
    let mut report = Report::new("round");
    let graph = match &inputs.graph {
        Some(p) => {
            report.text("graph", p.display());
            load(p, parse_demand_graph)?
        }
        None => {
            config_summary(&mut report, cfg);
            let bits = 1u32 << cfg.k;
            if bits > 10 {
                return Err(CliError::Usage(format!("hypercube fixture on {bits} bits is too large; pass --graph")));
            }
            let cube = NoisyHypercube::new(bits, cfg.eta, WindowMode::Disabled, false)?;
            DemandGraph::from_hypercube(&cube)?
        }
    };
    let balance = graph.total_demand() / 2.0;
    report.text("vertices", graph.n);
    report.value("total_demand", graph.total_demand());
    report.value("balance_target", balance);
    let mut opts = RoundingOptions::new(balance);
    opts.seed = cfg.stream_seed("xor");
    let mut oracle = LocalSearchOracle::new(cfg.stream_seed("sparse_cut"), cfg.budgets.restarts.max(1), 64);
    let res = round_to_balanced_cut(&graph, &mut oracle, &opts)?;
    report.value("edge_weight", res.edge_weight);
    report.value("demand_cut", res.demand_cut);
    report.text("early_exit", res.early_exit);
    report.text("cuts_found", res.cuts_found.len());
    report.value("accumulated_demand", res.accumulated_demand);
    let mut bookkeeping = Check::new("accumulated_demand_within_total");
    bookkeeping.observe((res.accumulated_demand - graph.total_demand()).max(0.0), || "accumulated".into());
    report.check(bookkeeping, SUITE_TOLERANCE);
    if res.partial {
        report.flag("partial", "oracle stalled or the XOR stage missed B/3");
    }
    report.assert("balanced_third", res.demand_cut >= balance / 3.0 - SUITE_TOLERANCE, || {
        format!("demand cut {} below B/3 = {}", fmt_f64(res.demand_cut), fmt_f64(balance / 3.0))
    });
    report.file("cut.txt", write_side_vector(&res.cut));
    if inputs.graph.is_none() {
        report.file("graph.txt", write_demand_graph(&graph));
    }
    Ok(report)
}
