mod common;

use common::validated;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use triagebench_core::domain::{RawAdvice, TriageLevel, Variant};
use triagebench_core::metrics::app_metrics;
use triagebench_core::pool::pool_study;
use triagebench_core::sim::{simulate_study, SimApp, SimSpec, StratumCounts};

const CONFUSION: [[f64; 3]; 3] = [[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.05, 0.15, 0.8]];

fn spec(per_level: usize, noise: f64, seed: u64) -> SimSpec {
    SimSpec {
        vignettes: StratumCounts::uniform(per_level),
        apps: vec![SimApp {
            id: "app".to_string(),
            confusion: CONFUSION,
            abstain_rate: 0.0,
        }],
        inputter_noise: noise,
        n_inputters: 2,
        seed,
    }
}

#[test]
fn advice_frequencies_fit_confusion_rows() {
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
    for seed in [1, 2, 3] {
        let study = simulate_study(&spec(2000, 0.0, seed)).unwrap();
        let gold = study.gold_by_id();
        let mut counts = [[0f64; 3]; 3];
        for r in study.records.iter().filter(|r| r.inputter_id == "inputter1") {
            let RawAdvice::Text(text) = &r.advice else {
                panic!("unexpected abstention")
            };
            let advice: TriageLevel = text.parse().unwrap();
            counts[gold[r.vignette_id.as_str()].code() as usize][advice.code() as usize] += 1.0;
        }
        for (row, probs) in counts.iter().zip(CONFUSION) {
            let n: f64 = row.iter().sum();
            assert_eq!(n, 2000.0);
            let stat: f64 = row.iter().zip(probs).map(|(o, p)| (o - n * p).powi(2) / (n * p)).sum();
            assert!(stat < critical, "seed {seed}: chi2 {stat} >= {critical}, row {row:?}");
        }
    }
}

#[test]
fn pooled_accuracy_converges_to_diagonal_mean() {
    let expected = (0.6 + 0.5 + 0.8) / 3.0;
    let study = validated(simulate_study(&spec(3000, 0.0, 9)).unwrap());
    let pooled = pool_study(&study, &Variant::default_variant()).unwrap();
    let m = &app_metrics(&pooled, &study.gold_by_id()).unwrap()[0];
    let acc = *m.accuracy.numer() as f64 / *m.accuracy.denom() as f64;
    // 4 standard errors of a proportion near 0.63 over 9000 cases.
    assert!(
        (acc - expected).abs() < 4.0 * (expected * (1.0 - expected) / 9000.0).sqrt(),
        "{acc}"
    );
}

#[test]
fn noise_rate_and_abstain_rate_are_honoured() {
    let mut s = spec(1000, 0.25, 4);
    s.apps[0].abstain_rate = 0.2;
    s.n_inputters = 5;
    let study = simulate_study(&s).unwrap();
    let n_pairs = 3000.0;
    let abstained = study.records.iter().filter(|r| r.advice == RawAdvice::Abstain).count() as f64 / 5.0;
    assert!((abstained / n_pairs - 0.2).abs() < 4.0 * (0.16f64 / n_pairs).sqrt());

    // Inputters of one pair disagree with each other only through noise.
    let mut disagreements = 0usize;
    let mut answered = 0usize;
    for chunk in study.records.chunks(5) {
        if chunk[0].advice == RawAdvice::Abstain {
            continue;
        }
        answered += 1;
        disagreements += usize::from(chunk[0].advice != chunk[1].advice);
    }
    // P(two noisy copies differ) = 2q(1-q) + q^2/2 for q = 0.25 over three levels.
    let q = 0.25;
    let expected = 2.0 * q * (1.0 - q) + q * q / 2.0;
    let observed = disagreements as f64 / answered as f64;
    assert!(
        (observed - expected).abs() < 4.0 * (expected * (1.0 - expected) / answered as f64).sqrt(),
        "{observed}"
    );
}
