#![allow(dead_code)]

use htd_core::harness::{BlobParams, DatasetSource, ExperimentConfig, ProgressUnit};
use htd_core::model::{NetworkSpec, ToyNetwork};
use htd_core::optimizer::OptimizerConfig;
use htd_core::schedule::ScheduleSpec;

/// Logistic regression (no hidden layer) on 3 separable blobs.
pub fn blob_logreg(schedule: ScheduleSpec, epochs: u32) -> ExperimentConfig {
    ExperimentConfig {
        schedule,
        optimizer: OptimizerConfig {
            momentum: 0.9,
            weight_decay: 1e-4,
            nesterov: true,
        },
        network: NetworkSpec::new(vec![2, 3], 17).unwrap(),
        dataset: DatasetSource::Blobs(BlobParams {
            n_per_class: 200,
            n_classes: 3,
            n_features: 2,
            spread: 0.3,
            seed: 39,
        }),
        epochs,
        batch_size: 32,
        seed: 7,
        train_fraction: 0.8,
        progress: ProgressUnit::Epoch,
    }
}

/// Central differences of the mean loss over `rows`, step `h`.
pub fn finite_difference_grad(
    net: &ToyNetwork,
    data: &htd_core::model::Dataset,
    rows: &[usize],
    h: f64,
) -> Vec<f64> {
    let mut probe = net.clone();
    (0..net.params.len())
        .map(|i| {
            let original = probe.params.0[i];
            probe.params.0[i] = original + h;
            let (plus, _) = probe.forward_loss(data, rows).unwrap();
            probe.params.0[i] = original - h;
            let (minus, _) = probe.forward_loss(data, rows).unwrap();
            probe.params.0[i] = original;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Passes when the absolute gap is under `floor` or the relative gap under `rel`.
pub fn grad_close(analytic: f64, numeric: f64, rel: f64, floor: f64) -> bool {
    let gap = (analytic - numeric).abs();
    gap <= floor || gap / analytic.abs().max(numeric.abs()) <= rel
}
