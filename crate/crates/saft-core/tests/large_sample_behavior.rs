//! Asymptotic behavior: plug-in consistency, prior washout, and the decay
//! of the detectability threshold with group size.

use saft_core::bayes::bayes_test;
use saft_core::metrics::{builtin, sp_gradient, sp_value};
use saft_core::resolution::{min_reject_count, ResolutionConfig, SearchDirection};
use saft_core::sampling::uniform_open;
use saft_core::seeding::rng_from_seed;
use saft_core::types::{
    plug_in_probs, CellCounts, DirichletParams, MetricId, ProbVector, Reference, Sidedness,
};
use saft_core::wald::asymptotic_sigma;

fn sample_counts(p: &ProbVector, n: u64, seed: u64) -> CellCounts {
    let mut rng = rng_from_seed(seed);
    let mut cells = vec![0u64; 4];
    for _ in 0..n {
        let u = uniform_open(&mut rng);
        let mut acc = 0.0;
        let mut idx = cells.len() - 1;
        for (i, &pi) in p.as_slice().iter().enumerate() {
            acc += pi;
            if u < acc {
                idx = i;
                break;
            }
        }
        cells[idx] += 1;
    }
    CellCounts::from_cells(cells).unwrap()
}

#[test]
fn plug_in_estimate_and_sigma_are_consistent_at_large_n() {
    let p = ProbVector::new(vec![0.10, 0.10, 0.40, 0.40]).unwrap();
    let truth = sp_value(p.as_slice()).unwrap();
    let sigma = asymptotic_sigma(&p, &sp_gradient(p.as_slice()).unwrap()).unwrap();

    let n = 1_000_000u64;
    let counts = sample_counts(&p, n, 0x51);
    let p_hat = plug_in_probs(&counts).unwrap();
    let estimate = sp_value(p_hat.as_slice()).unwrap();
    let spread = sigma / (n as f64).sqrt();
    assert!(
        (estimate - truth).abs() < 4.0 * spread,
        "estimate {estimate} vs truth {truth} (4σ = {})",
        4.0 * spread
    );

    let sigma_hat = asymptotic_sigma(&p_hat, &sp_gradient(p_hat.as_slice()).unwrap()).unwrap();
    let rel = (sigma_hat - sigma).abs() / sigma;
    assert!(rel < 0.01, "plug-in sigma {sigma_hat} vs true {sigma} (rel {rel})");
}

#[test]
fn prior_choice_washes_out_at_large_counts() {
    let counts = CellCounts::four(5_000, 5_000, 20_000, 20_000);
    let metric = builtin(MetricId::Sp, Reference::Complement);
    let k = 50_000;
    let flat = DirichletParams::new(vec![1.0; 4]).unwrap();
    let opinionated = DirichletParams::new(vec![20.0, 5.0, 5.0, 20.0]).unwrap();

    let a = bayes_test(&counts, &metric, &flat, k, 0.05, 0xA1, Sidedness::TwoSided).unwrap();
    let b =
        bayes_test(&counts, &metric, &opinionated, k, 0.05, 0xB2, Sidedness::TwoSided).unwrap();

    let width_a = a.summary.interval.1 - a.summary.interval.0;
    let width_b = b.summary.interval.1 - b.summary.interval.0;
    let ratio = width_a / width_b;
    assert!((ratio - 1.0).abs() < 0.03, "width ratio {ratio} drifted from 1");
    assert!(
        (a.summary.mean - b.summary.mean).abs() < 0.005,
        "posterior means {} vs {} drifted",
        a.summary.mean,
        b.summary.mean
    );
}

#[test]
fn detectability_threshold_fraction_decays_with_group_size() {
    let config = ResolutionConfig { mc_draws: 20_000, ..ResolutionConfig::default() };
    let fraction = |n_s: u64| {
        min_reject_count(n_s, 0.5, 0.05, SearchDirection::Disadvantaged, &config)
            .unwrap()
            .map(|k| k as f64 / n_s as f64)
            .expect("these sizes all have power")
    };
    let f10 = fraction(10);
    let f20 = fraction(20);
    let f40 = fraction(40);
    assert!(f10 > 0.85, "ten-member groups must be nearly unanimous, got {f10}");
    assert!(f20 <= f10 + 1e-9 && f40 <= f20 + 1e-9, "{f10} -> {f20} -> {f40}");
    assert!(f40 < 0.8, "forty-member groups detect below 80% negative, got {f40}");
}
