use kvgap::bes::{build_bes_from_kv, demand_cut, piecewise_balance, BesMode, Cut};
use kvgap::fourier::{inverse_wht, wht, RealFunction};
use kvgap::hypercube::WindowMode;
use kvgap::kv::build_kv_instance;
use kvgap::metric::{is_negative_type, is_negative_type_at, FiniteMetric};
use kvgap::unique_games::{plant_instance, Labeling, Permutation};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn wht_round_trip_and_parseval(k in 0u32..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = RealFunction::from_fn(k, |_| rng.gen_range(-3.0..3.0));
        let spec = wht(&f);
        let energy: f64 = f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64;
        prop_assert!((spec.parseval_mass() - energy).abs() < 1e-9 * (1.0 + energy));
        prop_assert!(inverse_wht(&spec).max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn relabeling_preserves_value(seed in any::<u64>(), labels in 2usize..7, shuffle in any::<u64>()) {
        let planted = plant_instance(9, labels, 0.2, 1.5, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
        let mut map: Vec<u32> = (0..labels as u32).collect();
        for i in (1..labels).rev() {
            map.swap(i, rng.gen_range(0..=i));
        }
        let rho = Permutation::new(map).unwrap();
        let lam = Labeling((0..9).map(|_| rng.gen_range(0..labels as u32)).collect());
        let before = planted.instance.value(&lam).unwrap();
        let after = planted.instance.relabel(&rho).unwrap().value(&lam.relabel(&rho)).unwrap();
        prop_assert!((before - after).abs() < 1e-12);
    }

    #[test]
    fn a_third_of_the_demand_forces_piecewise_balance(seed in any::<u64>(), skew in 0.0f64..0.5) {
        let kv = build_kv_instance(2, 0.3, WindowMode::Typical, true).unwrap();
        let inst = build_bes_from_kv(&kv, 0.2, BesMode::Exact).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bias: Vec<f64> = (0..inst.num_blocks()).map(|_| rng.gen_range(0.0..skew)).collect();
        let cut = Cut::from_fn(&inst, |v, _| if rng.gen_bool(0.5 + bias[v]) { 1 } else { -1 }).unwrap();
        if demand_cut(&inst, &cut).unwrap() >= inst.balance_bound() / 3.0 {
            prop_assert!(piecewise_balance(&inst, &cut).unwrap() <= 5.0 / 6.0);
        }
    }
}

fn gram_min_eigenvalue(m: &FiniteMetric) -> f64 {
    let n = m.len();
    let g = DMatrix::from_fn(n, n, |i, j| 0.5 * (m.get(i, 0) + m.get(j, 0) - m.get(i, j)));
    SymmetricEigen::new(g).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn metric_from_gram(g: &DMatrix<f64>) -> Option<FiniteMetric> {
    let n = g.nrows();
    FiniteMetric::from_fn(n, |i, j| if i == j { 0.0 } else { (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0) }).ok()
}

/// Squared distances of random `±1` points plus an equilateral term are
/// metrics of negative type;
/// pushing one Gram eigenvalue below zero yields violators whenever the
/// triangle inequality survives.
#[test]
fn negative_type_agrees_with_gram_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(633);
    let (mut forward, mut reverse) = (0, 0);
    while forward < 10_000 {
        let n = rng.gen_range(2..=9);
        let dim = rng.gen_range(1..=6);
        let pts: Vec<Vec<f64>> =
            (0..n).map(|_| (0..dim).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()).collect();
        let lift = rng.gen_range(1.0..4.0);
        let g = DMatrix::from_fn(n, n, |i, j| {
            pts[i].iter().zip(&pts[j]).map(|(a, b)| a * b).sum::<f64>() + if i == j { lift / 2.0 } else { 0.0 }
        });
        let m = metric_from_gram(&g).expect("squared hypercube distances are a metric");
        let verdict = is_negative_type(&m);
        assert!(verdict.is_negative_type, "forward instance {forward}");
        assert!(verdict.realization_error(&m).unwrap() < 1e-9);
        assert!(is_negative_type_at(&m, n - 1).is_negative_type);
        forward += 1;

        if n < 3 {
            continue;
        }
        let sub = DMatrix::from_fn(n - 1, n - 1, |i, j| 0.5 * (m.get(i + 1, 0) + m.get(j + 1, 0) - m.get(i + 1, j + 1)));
        let eig = SymmetricEigen::new(sub.clone());
        let (idx, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let v = eig.eigenvectors.column(idx).into_owned();
        let shifted = &sub - (eig.eigenvalues[idx] + rng.gen_range(0.01..0.3)) * &v * v.transpose();
        let based = DMatrix::from_fn(n, n, |i, j| if i == 0 || j == 0 { 0.0 } else { shifted[(i - 1, j - 1)] });
        if let Some(bad) = metric_from_gram(&based) {
            if gram_min_eigenvalue(&bad) < -1e-6 {
                let verdict = is_negative_type(&bad);
                assert!(!verdict.is_negative_type, "reverse instance {reverse}");
                assert!(verdict.witness.is_some());
                reverse += 1;
            }
        }
    }
    assert!(reverse > 100, "only {reverse} violators survived the triangle inequality");
}
