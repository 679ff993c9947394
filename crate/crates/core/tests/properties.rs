use proptest::prelude::*;
use wslrr::datagen::channel_frequencies;
use wslrr::decontam::{mcl_block, mcl_block_inverse, reconstruction_error};
use wslrr::loss::loss_vector;
use wslrr::model::random_model;
use wslrr::risk::{corrected_losses, pcpl_half_identity};
use wslrr::scenarios::contamination_matrix;
use wslrr::train::{empirical_gradient, finite_difference_gradient, relative_gradient_error, supervised_objective, train_objective};
use wslrr::verify::{applicable_methods, random_instance};
use wslrr::*;

fn scenario_name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(ScenarioSpec::NAMES.to_vec())
}

fn shape(name: &str, k: usize) -> usize {
    let spec = ScenarioSpec::from_name(name, serde_json::json!({}));
    match spec {
        Ok(s) if s.is_binary() => 2,
        _ if matches!(name, "MCD" | "UU" | "CCN") => 2,
        _ => k,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_holds(name in scenario_name(), k in 2usize..=5, nx in 3usize..=8, seed in any::<u64>()) {
        let (spec, j) = random_instance(name, shape(name, k), nx, seed).unwrap();
        let cm = observed_distribution(&spec, &j).unwrap();
        for method in applicable_methods(&spec, j.k()) {
            let dr = wslrr::decontam::decontaminate_model(&cm, &j, method).unwrap();
            prop_assert!(reconstruction_error(&cm, &dr, &j).unwrap() <= 1e-12, "{} {:?}", name, method);
        }
    }

    #[test]
    fn rewrite_equals_risk(name in scenario_name(), k in 2usize..=5, nx in 3usize..=8, seed in any::<u64>(), zero_one in any::<bool>()) {
        let (spec, j) = random_instance(name, shape(name, k), nx, seed).unwrap();
        let g = random_model(j.k(), j.d_feat(), 1.0, seed);
        let ls = if zero_one { LossSpec::ZeroOne } else { LossSpec::Logistic };
        let exact = classification_risk(&j, &g, ls).unwrap();
        for method in applicable_methods(&spec, j.k()) {
            let r = rewritten_risk(&spec, &j, &g, ls, method).unwrap();
            prop_assert!((r - exact).abs() <= 1e-10, "{} {:?}: {} vs {}", name, method, r, exact);
        }
    }

    #[test]
    fn corrected_losses_are_linear(name in scenario_name(), seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (spec, j) = random_instance(name, shape(name, 3), 4, seed).unwrap();
        let dr = decontaminate(&spec, &j, Method::Auto).unwrap();
        let k = j.k();
        let l1: Vec<f64> = (0..k).map(|c| (c as f64 + 1.0) * 0.3).collect();
        let l2: Vec<f64> = (0..k).map(|c| 1.0 - c as f64 * 0.2).collect();
        let mix: Vec<f64> = l1.iter().zip(&l2).map(|(x, y)| a * x + b * y).collect();
        let md = &dr.mdagger[0];
        let lhs = corrected_losses(&mix, md).unwrap();
        let c1 = corrected_losses(&l1, md).unwrap();
        let c2 = corrected_losses(&l2, md).unwrap();
        for c in 0..lhs.len() {
            prop_assert!((lhs[c] - (a * c1[c] + b * c2[c])).abs() <= 1e-9 * (1.0 + lhs[c].abs()));
        }
    }

    #[test]
    fn mcd_family_rows_are_convex(name in prop::sample::select(vec!["MCD", "UU", "PU", "SU", "DU", "SD", "Pcomp"]), seed in any::<u64>()) {
        let (spec, j) = random_instance(name, 2, 4, seed).unwrap();
        let m = marginals(&j).unwrap();
        let mm = contamination_matrix(&spec, &m, 0).unwrap();
        for r in 0..2 {
            prop_assert!((mm.row(r).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(mm.row(r).iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn pcpl_half_identity_holds(k in 2usize..=5, nx in 3usize..=6, seed in any::<u64>()) {
        let (_, j) = random_instance("PCPL", k, nx, seed).unwrap();
        let g = random_model(k, j.d_feat(), 1.0, seed);
        let (lhs, rhs) = pcpl_half_identity(&j, &g, LossSpec::Logistic).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn mcl_blocks_invert(k in 2usize..=6, d_frac in 0.0f64..1.0) {
        let d = 1 + ((k - 1) as f64 * d_frac) as usize;
        let d = d.min(k - 1);
        let prod = mcl_block_inverse(k, d).unwrap().mul(&mcl_block(k, d).unwrap()).unwrap();
        prop_assert!(prod.max_abs_diff(&Matrix::identity(k)) <= 1e-12);
    }

    #[test]
    fn sampling_is_reproducible(name in scenario_name(), seed in any::<u64>()) {
        let (spec, j) = random_instance(name, shape(name, 3), 4, seed).unwrap();
        let n = SampleSizes::Total(30);
        let a = sample_weak_dataset(&spec, &j, &n, seed).unwrap();
        let b = sample_weak_dataset(&spec, &j, &n, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let back = dataset_from_json(&dataset_to_json(&a)).unwrap();
        prop_assert_eq!(back, a);
    }

    #[test]
    fn gradients_match_differences(name in scenario_name(), seed in any::<u64>()) {
        let (spec, j) = random_instance(name, shape(name, 3), 4, seed).unwrap();
        let ds = sample_weak_dataset(&spec, &j, &SampleSizes::Total(20), seed).unwrap();
        let obj = EmpiricalObjective::build(&ds, &j, Method::Auto).unwrap();
        let g = random_model(j.k(), j.d_feat(), 0.5, seed);
        let a = empirical_gradient(&obj, &j, &g, LossSpec::Logistic, 0.05).unwrap();
        let f = finite_difference_gradient(&obj, &j, &g, LossSpec::Logistic, 0.05, 1e-6).unwrap();
        prop_assert!(relative_gradient_error(&a, &f) <= 1e-5);
    }

    #[test]
    fn supervised_descent_never_increases(seed in any::<u64>(), k in 2usize..=4) {
        let (_, j) = random_instance("Soft", k, 5, seed).unwrap();
        let cfg = TrainConfig { lr: 0.05, epochs: 40, seed, l2: 0.0 };
        let out = train_objective(&supervised_objective(&j), &j, LossSpec::Logistic, &cfg, init_model(k, j.d_feat(), seed)).unwrap();
        prop_assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn json_round_trips(name in scenario_name(), seed in any::<u64>()) {
        let (spec, j) = random_instance(name, shape(name, 3), 4, seed).unwrap();
        prop_assert_eq!(ScenarioSpec::from_json(&spec.to_json()).unwrap(), spec);
        prop_assert_eq!(FiniteJoint::from_json(&j.to_json()).unwrap(), j.clone());
        let g = random_model(j.k(), j.d_feat(), 3.0, seed);
        prop_assert_eq!(LinearModel::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn zero_one_loss_has_one_zero(scores in prop::collection::vec(-5.0f64..5.0, 2..6)) {
        let l = loss_vector(LossSpec::ZeroOne, &scores).unwrap();
        prop_assert_eq!(l.iter().filter(|v| **v == 0.0).count(), 1);
        prop_assert_eq!(l.iter().sum::<f64>(), (scores.len() - 1) as f64);
    }
}

/// Channel frequencies at n = 10⁵ sit within 5 binomial standard errors of
/// the exact channel distributions.
#[test]
fn channel_frequencies_match_exact_masses() {
    let n = 100_000usize;
    for (name, k) in [("PU", 2), ("CL", 4), ("UU", 2), ("MCL", 3)] {
        let (spec, j) = random_instance(name, k, 5, 11).unwrap();
        let ds = sample_weak_dataset(&spec, &j, &SampleSizes::Total(n), 3).unwrap();
        let cm = observed_distribution(&spec, &j).unwrap();
        let nx = j.n_x();
        if spec.family() == Family::Mcd {
            for (c, ch) in ds.channels.iter().enumerate() {
                let freq = channel_frequencies(ch, nx);
                let total: f64 = (0..nx).map(|i| cm.corr_p[i][c]).sum();
                for i in 0..nx {
                    let p = cm.corr_p[i][c] / total;
                    assert!((freq[i] - p).abs() <= 5.0 * (p * (1.0 - p) / n as f64).sqrt(), "{name} {c} {i}");
                }
            }
        } else {
            for ch in &ds.channels {
                let c = cm.channels.iter().position(|l| *l == ch.label).unwrap();
                let counts = channel_frequencies(ch, nx);
                for i in 0..nx {
                    let p = cm.corr_p[i][c];
                    let f = counts[i] * ch.items.len() as f64 / n as f64;
                    assert!((f - p).abs() <= 5.0 * (p * (1.0 - p) / n as f64).sqrt(), "{name} {} {i}", ch.label);
                }
            }
        }
    }
}
