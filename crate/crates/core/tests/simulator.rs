mod common;

use hawkscan::networks::one_dim;
use hawkscan::simulate::{simulate, simulate_with_change, SimConfig};
use hawkscan::{ChangeSpec, EventStream, HawkesModel, KernelSpec};
use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

use common::{batch_mean, chi_squared_sf, ks_two_sample};

fn batch_rates(events: &EventStream, node: Option<usize>, start: f64, batches: usize, len: f64) -> Vec<f64> {
    (0..batches)
        .map(|k| {
            let a = start + k as f64 * len;
            events.window(a, a + len).iter().filter(|e| node.is_none_or(|n| e.u == n)).count() as f64 / len
        })
        .collect()
}

#[test]
fn zero_influence_gives_independent_poisson_counts() {
    let mu = [0.8, 1.5];
    let model = HawkesModel::new(mu.to_vec(), vec![vec![0.0; 2]; 2], KernelSpec::exponential(1.0).unwrap()).unwrap();
    let horizon = 2000;
    let events = simulate(&model, &SimConfig::new(horizon as f64, 41)).unwrap();
    for (node, &rate) in mu.iter().enumerate() {
        let mut counts = vec![0usize; horizon];
        for e in events.events().iter().filter(|e| e.u == node) {
            counts[(e.t as usize).min(horizon - 1)] += 1;
        }
        let law = Poisson::new(rate).unwrap();
        // cells 0..top-1 and a tail cell, each with expected count >= 5
        let top = (0..).find(|&k| horizon as f64 * law.sf(k) < 5.0).unwrap() as usize;
        let mut stat = 0.0;
        for k in 0..=top {
            let expected = if k < top { law.pmf(k as u64) } else { law.sf(top as u64 - 1) } * horizon as f64;
            let observed = counts.iter().filter(|&&c| if k < top { c == k } else { c >= top }).count() as f64;
            stat += (observed - expected).powi(2) / expected;
        }
        let p = chi_squared_sf(stat, top as f64);
        assert!(p >= 0.01, "node {node}: χ² = {stat}, p = {p}");
    }
}

#[test]
fn one_dimensional_rate_matches_mean_field() {
    let model = one_dim(0.5, 0.5, 1.0).unwrap();
    let target = model.mean_field_intensity().unwrap()[0];
    assert!((target - 1.0).abs() < 1e-12);
    let events = simulate(&model, &SimConfig::new(10_100.0, 42)).unwrap();
    let (mean, se) = batch_mean(&batch_rates(&events, None, 100.0, 20, 500.0));
    assert!((mean - target).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn change_shifts_the_rate_to_the_post_change_mean_field() {
    let pre = one_dim(0.5, 0.0, 1.0).unwrap();
    let post = one_dim(0.5, 0.5, 1.0).unwrap();
    let spec = ChangeSpec::new(pre, post, 200.0).unwrap();
    let events = simulate_with_change(&spec, &SimConfig::new(10_000.0, 43)).unwrap();
    let before = events.window(0.0, 200.0).len() as f64 / 200.0;
    assert!((before - 0.5).abs() <= 3.0 * (0.5f64 / 200.0).sqrt(), "{before}");
    let (after, se) = batch_mean(&batch_rates(&events, None, 300.0, 20, 485.0));
    assert!((after - 1.0).abs() <= 3.0 * se, "{after} ± {se}");
}

#[test]
fn equal_pre_and_post_match_plain_simulation() {
    let model = HawkesModel::new(
        vec![0.6, 0.9],
        vec![vec![0.2, 0.1], vec![0.15, 0.25]],
        KernelSpec::exponential(1.0).unwrap(),
    )
    .unwrap();
    let spec = ChangeSpec::new(model.clone(), model.clone(), 50.0).unwrap();
    let gaps = |s: &EventStream| -> Vec<f64> { s.events().windows(2).map(|w| w[1].t - w[0].t).collect() };
    let (mut changed, mut plain) = (Vec::new(), Vec::new());
    for seed in 0..200u64 {
        changed.extend(gaps(&simulate_with_change(&spec, &SimConfig::new(100.0, 1000 + seed)).unwrap()));
        plain.extend(gaps(&simulate(&model, &SimConfig::new(100.0, 5000 + seed)).unwrap()));
    }
    let p = ks_two_sample(&changed, &plain);
    assert!(p >= 0.01, "p = {p}");
}

#[test]
fn node_rates_match_mean_field_on_the_eight_node_network() {
    let model = hawkscan::networks::paper_pre();
    let target = model.mean_field_intensity().unwrap();
    let events = simulate(&model, &SimConfig::new(10_100.0, 44)).unwrap();
    for (node, &lam) in target.iter().enumerate() {
        let (mean, se) = batch_mean(&batch_rates(&events, Some(node), 100.0, 20, 500.0));
        // Bonferroni over eight nodes at 1%
        assert!((mean - lam).abs() <= 3.23 * se, "node {node}: {mean} ± {se} vs {lam}");
    }
}
