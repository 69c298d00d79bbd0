//! Fixtures shared by the criterion benches.

use faultnet_core::classifiers::LabeledDataset;
use faultnet_core::features::{extract_rows, FeatureSpec};
use faultnet_core::sim::{simulate_faulted, FaultScenario, SimConfig, SwitchId, SwitchSet};

/// A default-length record with an open S1 switch.
pub fn faulted_record(seed: u64) -> faultnet_core::sim::WaveformRecord {
    let cfg = SimConfig {
        seed,
        ..SimConfig::default()
    };
    simulate_faulted(
        &cfg,
        &FaultScenario::with_switches(SwitchSet::single(SwitchId::S1)),
    )
    .expect("default scenario is valid")
}

/// Window features of one healthy and six single-switch records per seed.
pub fn single_switch_dataset(seeds: u64) -> LabeledDataset {
    let spec = FeatureSpec::default();
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for seed in 0..seeds {
        let cfg = SimConfig {
            seed,
            ..SimConfig::default()
        };
        for (label, switches) in std::iter::once(SwitchSet::empty())
            .chain(SwitchId::ALL.into_iter().map(SwitchSet::single))
            .enumerate()
        {
            let rec = simulate_faulted(&cfg, &FaultScenario::with_switches(switches))
                .expect("valid scenario");
            for row in extract_rows(&rec, &spec).expect("record longer than a window") {
                vectors.push(row);
                labels.push(label);
            }
        }
    }
    let names = std::iter::once("Healthy".to_string())
        .chain(SwitchId::ALL.iter().map(|s| s.to_string()))
        .collect();
    LabeledDataset::new(vectors, labels, names).expect("consistent dataset")
}
