//! A small fully-connected ReLU classifier trained with softmax cross-entropy.
//!
//! Parameters live in one flat vector laid out layer by layer. For the layer
//! mapping `n_in → n_out` the block is `n_out * n_in` weights, row-major with
//! one row per output unit, followed by `n_out` biases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::ParameterVector;
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Input width, hidden widths, number of classes.
    pub layer_sizes: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Result<Self> {
        let spec = Self {
            layer_sizes,
            activation: Activation::Relu,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(format!(
                "network needs at least input and output layers, got {:?}",
                self.layer_sizes
            )));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        if self.output_size() < 2 {
            return Err(Error::Config(
                "output layer needs at least 2 classes".into(),
            ));
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().expect("validated layer sizes")
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// `(n_in, n_out, offset)` for every layer, in layout order.
    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.layer_sizes.windows(2).scan(0, |offset, w| {
            let start = *offset;
            *offset += w[0] * w[1] + w[1];
            Some((w[0], w[1], start))
        })
    }
}

/// Labeled samples, features stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if n_features == 0 || n_classes == 0 {
            return Err(Error::Config("dataset needs features and classes".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::Contract(format!(
                "{} feature values for {} samples of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&l| l >= n_classes) {
            return Err(Error::Config(format!(
                "label {} at sample {i} is not below n_classes = {n_classes}",
                labels[i]
            )));
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                index,
                what: "feature".into(),
            });
        }
        Ok(Self {
            features,
            n_features,
            labels,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Copies the given rows, in order, into a new dataset.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            n_classes: self.n_classes,
        }
    }

    /// Mean and population standard deviation over every feature value.
    pub fn value_stats(&self) -> (f64, f64) {
        let n = self.features.len().max(1) as f64;
        let mean = self.features.iter().sum::<f64>() / n;
        let var = self
            .features
            .iter()
            .map(|v| (v - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    }

    /// Applies `(v - mean) / std` to every feature value; a zero `std` only centers.
    pub fn standardize(&mut self, mean: f64, std: f64) {
        let scale = if std > 0.0 { 1.0 / std } else { 1.0 };
        for v in &mut self.features {
            *v = (*v - mean) * scale;
        }
    }

    /// Raises `n_classes` to at least `n`, for splits that miss the top labels.
    pub fn widen_classes(&mut self, n: usize) {
        self.n_classes = self.n_classes.max(n);
    }
}

/// Gaussian blobs around class centers on a sphere of radius `5 * spread`.
///
/// Centers are random directions (normalized standard-normal vectors) drawn
/// first, then samples class by class as `center + spread * N(0, I)`, all
/// from one [`SplitMix64`] stream seeded with `seed`.
pub fn make_blobs(
    n_per_class: usize,
    n_classes: usize,
    n_features: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || n_classes == 0 || n_features == 0 {
        return Err(Error::Config("blob counts must be positive".into()));
    }
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::Config(format!(
            "spread must be positive, got {spread}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let radius = 5.0 * spread;
    let mut centers = Vec::with_capacity(n_classes);
    for _ in 0..n_classes {
        let dir: Vec<f64> = (0..n_features).map(|_| rng.next_normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        centers.push(
            dir.into_iter()
                .map(|v| radius * v / norm)
                .collect::<Vec<_>>(),
        );
    }

    let mut features = Vec::with_capacity(n_per_class * n_classes * n_features);
    let mut labels = Vec::with_capacity(n_per_class * n_classes);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            features.extend(center.iter().map(|c| c + spread * rng.next_normal()));
            labels.push(class);
        }
    }
    Dataset::new(features, n_features, labels, n_classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetwork {
    pub spec: NetworkSpec,
    pub params: ParameterVector,
}

/// He-normal weights (`std = sqrt(2 / fan_in)`) and zero biases, drawn in
/// layout order from a [`SplitMix64`] seeded with `spec.seed`.
pub fn init_he(spec: &NetworkSpec) -> Result<ToyNetwork> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let mut params = Vec::with_capacity(spec.param_count());
    for (n_in, n_out, _) in spec.layers() {
        let std = (2.0 / n_in as f64).sqrt();
        params.extend((0..n_in * n_out).map(|_| std * rng.next_normal()));
        params.extend(std::iter::repeat_n(0.0, n_out));
    }
    Ok(ToyNetwork {
        spec: spec.clone(),
        params: ParameterVector(params),
    })
}

impl ToyNetwork {
    /// A network whose parameters are all zero.
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            params: ParameterVector::zeros(spec.param_count()),
        })
    }

    pub fn with_params(spec: &NetworkSpec, params: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if params.len() != spec.param_count() {
            return Err(Error::Contract(format!(
                "expected {} parameters, got {}",
                spec.param_count(),
                params.len()
            )));
        }
        Ok(Self {
            spec: spec.clone(),
            params: ParameterVector(params),
        })
    }

    fn check_width(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.spec.input_size() {
            return Err(Error::Contract(format!(
                "dataset has {} features, network expects {}",
                data.n_features(),
                self.spec.input_size()
            )));
        }
        if data.n_classes() > self.spec.output_size() {
            return Err(Error::Contract(format!(
                "dataset has {} classes, network outputs {}",
                data.n_classes(),
                self.spec.output_size()
            )));
        }
        Ok(())
    }

    /// Pre-activations of every layer for one input; the last entry holds the logits.
    fn forward(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let theta = self.params.as_slice();
        let n_layers = self.spec.layer_sizes.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut act: Vec<f64> = input.to_vec();
        for (layer, (n_in, n_out, offset)) in self.spec.layers().enumerate() {
            let weights = &theta[offset..offset + n_in * n_out];
            let biases = &theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let z: Vec<f64> = weights
                .chunks_exact(n_in)
                .zip(biases)
                .map(|(row, b)| row.iter().zip(&act).map(|(w, a)| w * a).sum::<f64>() + b)
                .collect();
            if layer + 1 < n_layers {
                act = z.iter().map(|&v| v.max(0.0)).collect();
            }
            pre.push(z);
        }
        pre
    }

    pub fn logits(&self, input: &[f64]) -> Vec<f64> {
        self.forward(input).pop().expect("at least one layer")
    }

    /// Mean softmax cross-entropy over `rows` of `data`, and its gradient
    /// with respect to every parameter (same layout as `params`).
    pub fn forward_loss(&self, data: &Dataset, rows: &[usize]) -> Result<(f64, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::Contract("batch is empty".into()));
        }
        self.check_width(data)?;
        let theta = self.params.as_slice();
        let layers: Vec<_> = self.spec.layers().collect();
        let mut grads = vec![0.0; theta.len()];
        let mut total = 0.0;
        let scale = 1.0 / rows.len() as f64;

        for &r in rows {
            let input = data.row(r);
            let label = data.labels()[r];
            let pre = self.forward(input);
            let logits = pre.last().expect("at least one layer");

            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = logits.iter().map(|z| (z - max).exp()).sum();
            let log_norm = max + sum_exp.ln();
            let loss = log_norm - logits[label];
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    index: r,
                    what: "sample loss".into(),
                });
            }
            total += loss;

            let mut delta: Vec<f64> = logits
                .iter()
                .enumerate()
                .map(|(k, z)| {
                    let p = (z - log_norm).exp();
                    scale * if k == label { p - 1.0 } else { p }
                })
                .collect();

            for l in (0..layers.len()).rev() {
                let (n_in, n_out, offset) = layers[l];
                let relu_below: Vec<f64>;
                let below: &[f64] = if l == 0 {
                    input
                } else {
                    relu_below = pre[l - 1].iter().map(|&v| v.max(0.0)).collect();
                    &relu_below
                };
                let (w_grad, rest) = grads[offset..].split_at_mut(n_in * n_out);
                for (row, d) in w_grad.chunks_exact_mut(n_in).zip(&delta) {
                    for (g, a) in row.iter_mut().zip(below) {
                        *g += d * a;
                    }
                }
                for (g, d) in rest[..n_out].iter_mut().zip(&delta) {
                    *g += d;
                }
                if l > 0 {
                    let weights = &theta[offset..offset + n_in * n_out];
                    let mut next = vec![0.0; n_in];
                    for (row, d) in weights.chunks_exact(n_in).zip(&delta) {
                        for (n, w) in next.iter_mut().zip(row) {
                            *n += w * d;
                        }
                    }
                    for (n, z) in next.iter_mut().zip(&pre[l - 1]) {
                        if *z <= 0.0 {
                            *n = 0.0;
                        }
                    }
                    delta = next;
                }
            }
        }

        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                index,
                what: "gradient".into(),
            });
        }
        Ok((total * scale, grads))
    }

    /// Class with the largest logit, lowest index on ties.
    pub fn predict(&self, input: &[f64]) -> usize {
        let logits = self.logits(input);
        let mut best = 0;
        for (k, &z) in logits.iter().enumerate().skip(1) {
            if z > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Fraction of misclassified samples.
    pub fn evaluate_error(&self, data: &Dataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Contract("dataset is empty".into()));
        }
        self.check_width(data)?;
        let wrong = (0..data.len())
            .filter(|&i| self.predict(data.row(i)) != data.labels()[i])
            .count();
        Ok(wrong as f64 / data.len() as f64)
    }
}
