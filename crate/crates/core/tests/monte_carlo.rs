mod common;

use hawkscan::baseline::{glr_window, score_vector};
use hawkscan::estimation::{em_mle, fisher_info_mc, EmConfig};
use hawkscan::harness::{arl_mc, bench, edd_mc, BenchSpec, DetectorSpec, KappaPolicy, Scenario};
use hawkscan::networks::one_dim;
use hawkscan::reproduce::paper_fisher;
use hawkscan::simulate::{simulate, simulate_with_change, SimConfig};
use hawkscan::{ChangeSpec, HawkesModel, KernelSpec};

use common::batch_mean;

fn cusum_1d() -> (HawkesModel, DetectorSpec) {
    let pre = one_dim(1.0, 0.3, 1.0).unwrap();
    let post = one_dim(1.0, 0.6, 1.0).unwrap();
    (pre.clone(), DetectorSpec::Cusum { pre, post, gamma: 0.1, truncation: Some(20.0) })
}

#[test]
fn cusum_arl_grows_exponentially_in_the_threshold() {
    let (pre, det) = cusum_1d();
    let arl = |b: f64| arl_mc(&det, b, &pre, 400, 61, 1e6).unwrap().arl.mean;
    let (a3, a4) = (arl(3.0), arl(4.0));
    let ratio = a4 / a3;
    assert!((2.0..=4.0).contains(&ratio), "ARL(4)/ARL(3) = {a4}/{a3} = {ratio}");
}

#[test]
fn undetectable_change_has_a_much_longer_delay() {
    let (pre, det) = cusum_1d();
    let post = one_dim(1.0, 0.6, 1.0).unwrap();
    let kappa = KappaPolicy::Fixed(20.0);
    let real = edd_mc(&det, 3.0, &pre, &post, kappa, 200, 62, 1e5).unwrap().edd.unwrap();
    let none = edd_mc(&det, 3.0, &pre, &pre, kappa, 200, 62, 1e5).unwrap().edd.unwrap();
    assert!(none.mean > 3.0 * real.mean, "{none} vs {real}");
}

#[test]
fn bench_results_do_not_depend_on_the_thread_count() {
    let (pre, det) = cusum_1d();
    let spec = BenchSpec {
        detector: det,
        b: 2.5,
        scenario: Scenario::Change { pre: pre.clone(), post: one_dim(1.0, 0.6, 1.0).unwrap(), kappa: KappaPolicy::UniformInGridCell(10.0) },
        reps: 40,
        seed: 63,
        max_time: 1e4,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| bench(&spec).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.records, four.records);
    assert_eq!(one.arl, four.arl);
    // conditioning: false alarms plus delay samples account for every replication
    let fa = one.records.iter().filter(|r| r.false_alarm).count();
    assert_eq!(fa + one.edd.unwrap().n, spec.reps);
}

#[test]
fn fisher_information_is_psd_and_nearly_block_diagonal() {
    let fisher = paper_fisher(60.0, 2000, 64).unwrap();
    let min_eig = fisher.clone().symmetric_eigen().eigenvalues.min();
    assert!(min_eig >= -1e-10, "{min_eig}");
    let d = 8;
    let (mut diag, mut cross) = (0.0, 0.0);
    for p in 0..d * d {
        for q in 0..d * d {
            let v = fisher[(p, q)].powi(2);
            // coordinate i·D + j belongs to node i's block
            if p / d == q / d {
                diag += v;
            } else {
                cross += v;
            }
        }
    }
    let ratio = (cross / diag).sqrt();
    assert!(ratio <= 0.1, "cross/diagonal Frobenius ratio {ratio}");
}

#[test]
fn null_score_has_zero_mean() {
    let model = one_dim(1.0, 0.3, 1.0).unwrap();
    let scores: Vec<f64> = (0..500u64)
        .map(|r| {
            let events = simulate(&model, &SimConfig::new(300.0, 65).with_stream(r)).unwrap();
            score_vector(&model, &events, (100.0, 300.0)).unwrap()[0]
        })
        .collect();
    let (mean, se) = batch_mean(&scores);
    assert!(mean.abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn score_threshold_below_its_mean_alarms_within_a_window() {
    let model = one_dim(1.0, 0.3, 1.0).unwrap();
    let fisher = fisher_info_mc(&model, 100.0, 20.0, 500, 66).unwrap();
    let det = DetectorSpec::Score { pre: model.clone(), fisher, ridge: 0.0, w: 20.0, gamma: 0.1 };
    let r = arl_mc(&det, 0.05, &model, 100, 67, 1e4).unwrap();
    assert!(r.arl.mean <= 20.0, "{}", r.arl);
}

fn two_node(a: [[f64; 2]; 2]) -> HawkesModel {
    HawkesModel::new(vec![0.5, 0.7], a.iter().map(|r| r.to_vec()).collect(), KernelSpec::exponential(1.0).unwrap()).unwrap()
}

#[test]
fn em_error_shrinks_with_the_window() {
    let truth = two_node([[0.3, 0.2], [0.1, 0.4]]);
    let rmse = |len: f64| {
        let mut sq = 0.0;
        for r in 0..10u64 {
            let events = simulate(&truth, &SimConfig::new(len, 68).with_stream(r)).unwrap();
            let fit = em_mle(&events, (0.0, len), &truth, &EmConfig::default()).unwrap();
            sq += fit.alpha.iter().zip(truth.alpha_flat()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 4.0;
        }
        (sq / 10.0).sqrt()
    };
    let (short, long) = (rmse(500.0), rmse(5000.0));
    assert!(long < short, "RMSE {long} at 5000 vs {short} at 500");
}

#[test]
fn glr_estimate_tracks_the_post_change_matrix() {
    let pre = two_node([[0.2, 0.0], [0.0, 0.2]]);
    let post = two_node([[0.2, 0.5], [0.0, 0.2]]);
    let spec = ChangeSpec::new(pre.clone(), post.clone(), 0.0).unwrap();
    let events = simulate_with_change(&spec, &SimConfig::new(5000.0, 69)).unwrap();
    let (fit, _) = glr_window(&pre, &events, (0.0, 5000.0), &EmConfig::default()).unwrap();
    for (a, b) in fit.alpha.iter().zip(post.alpha_flat()) {
        assert!((a - b).abs() <= 0.1, "{:?}", fit.alpha);
    }
}

#[test]
fn glr_rate_is_small_before_and_larger_after_the_change() {
    let pre = two_node([[0.2, 0.0], [0.0, 0.2]]);
    let post = two_node([[0.2, 0.5], [0.0, 0.2]]);
    let w = 500.0;
    for r in 0..5u64 {
        let cfg = SimConfig::new(2.0 * w, 70).with_stream(r);
        let null = simulate(&pre, &cfg).unwrap();
        let changed = simulate_with_change(&ChangeSpec::new(pre.clone(), post.clone(), w).unwrap(), &cfg).unwrap();
        let (_, l0) = glr_window(&pre, &null, (w, 2.0 * w), &EmConfig::default()).unwrap();
        let (_, l1) = glr_window(&pre, &changed, (w, 2.0 * w), &EmConfig::default()).unwrap();
        assert!(l0 / w < 0.05, "null rate {}", l0 / w);
        assert!(l0 < l1, "{l0} >= {l1}");
    }
}
