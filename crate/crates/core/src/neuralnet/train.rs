use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::features::EncodedDataset;
use crate::metrics::{accuracy_pdt, DEFAULT_TOLERANCE_SEC};

use super::{mse_loss, Network, NetworkConfig};

/// Normalized features and scaled targets of one set.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a> {
    pub features: &'a [Vec<f64>],
    pub targets: &'a [f64],
}

impl<'a> From<&'a EncodedDataset> for TrainingData<'a> {
    fn from(d: &'a EncodedDataset) -> Self {
        TrainingData {
            features: &d.features,
            targets: &d.targets,
        }
    }
}

impl TrainingData<'_> {
    fn flatten(&self, dim: usize, what: &'static str) -> Result<Vec<f64>> {
        if self.features.is_empty() {
            return Err(Error::EmptyInput(what));
        }
        if self.features.len() != self.targets.len() {
            return Err(Error::LengthMismatch {
                left: self.features.len(),
                right: self.targets.len(),
            });
        }
        let mut flat = Vec::with_capacity(self.features.len() * dim);
        for x in self.features {
            if x.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: x.len(),
                });
            }
            flat.extend_from_slice(x);
        }
        if flat.iter().chain(self.targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{what} contains NaN or infinity")));
        }
        Ok(flat)
    }
}

/// Passed to the per-epoch hook after each update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Training loss before this epoch's update.
    pub train_loss: f64,
    pub validation_accuracy: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub config: NetworkConfig,
    pub loss_trace: Vec<f64>,
    /// Number of updates applied to the returned network.
    pub best_epoch: usize,
    pub best_validation_accuracy: f64,
    pub best_validation_mse: f64,
    pub final_validation_accuracy: f64,
    pub wall_time: Duration,
}

pub struct Trained {
    pub network: Network,
    pub report: TrainingReport,
}

pub fn train(
    config: &NetworkConfig,
    train_set: TrainingData<'_>,
    validation: TrainingData<'_>,
    target_scale: f64,
) -> Result<Trained> {
    train_with_hook(config, train_set, validation, target_scale, |_| {})
}

/// Full-batch momentum descent for `config.epochs` epochs. The returned
/// network is the snapshot with the best validation accuracy, ties broken
/// by lower validation MSE, then by the earlier epoch. The untrained network
/// (epoch 0) is a candidate too.
pub fn train_with_hook(
    config: &NetworkConfig,
    train_set: TrainingData<'_>,
    validation: TrainingData<'_>,
    target_scale: f64,
    mut hook: impl FnMut(&EpochStats),
) -> Result<Trained> {
    let start = Instant::now();
    let mut net = Network::init(config)?;
    let dim = config.input_dim;
    let train_x = train_set.flatten(dim, "training set")?;
    let val_x = validation.flatten(dim, "validation set")?;
    let (n_train, n_val) = (train_set.targets.len(), validation.targets.len());

    let val_labels: Vec<f64> = validation
        .targets
        .iter()
        .map(|t| t * target_scale)
        .collect();
    let score = |net: &Network, epoch: usize| -> Result<(f64, f64)> {
        let cache = net.forward_flat(val_x.clone(), n_val);
        let preds = cache.predictions();
        let mse = mse_loss(preds, validation.targets)?;
        if !mse.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        let seconds: Vec<f64> = preds.iter().map(|y| y * target_scale).collect();
        Ok((
            accuracy_pdt(&seconds, &val_labels, DEFAULT_TOLERANCE_SEC)?,
            mse,
        ))
    };

    let (mut best_acc, mut best_mse) = score(&net, 0)?;
    let mut best_epoch = 0;
    let mut best = net.clone();
    let mut last_acc = best_acc;
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let cache = net.forward_flat(train_x.clone(), n_train);
        let loss = mse_loss(cache.predictions(), train_set.targets)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        loss_trace.push(loss);
        let grads = net.backward(&cache, train_set.targets)?;
        net.momentum_step(&grads, config.learning_rate, config.momentum)?;

        let (acc, mse) = score(&net, epoch)?;
        last_acc = acc;
        hook(&EpochStats {
            epoch,
            train_loss: loss,
            validation_accuracy: acc,
            validation_mse: mse,
        });
        if acc > best_acc || (acc == best_acc && mse < best_mse) {
            best_acc = acc;
            best_mse = mse;
            best_epoch = epoch;
            best.clone_from(&net);
        }
    }

    Ok(Trained {
        network: best,
        report: TrainingReport {
            config: config.clone(),
            loss_trace,
            best_epoch,
            best_validation_accuracy: best_acc,
            best_validation_mse: best_mse,
            final_validation_accuracy: last_acc,
            wall_time: start.elapsed(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let ys = xs
            .iter()
            .map(|x| 0.2 + 0.3 * x[0] + 0.2 * x[1] * x[2])
            .collect();
        (xs, ys)
    }

    fn data<'a>(xs: &'a [Vec<f64>], ys: &'a [f64]) -> TrainingData<'a> {
        TrainingData {
            features: xs,
            targets: ys,
        }
    }

    #[test]
    fn zero_epochs_returns_initial_network() {
        let (xs, ys) = toy(10, 1);
        let config = NetworkConfig::custom(3, vec![4], 0, 7);
        let t = train(&config, data(&xs, &ys), data(&xs, &ys), 100.0).unwrap();
        assert_eq!(t.network, Network::init(&config).unwrap());
        assert_eq!(t.report.best_epoch, 0);
        assert!(t.report.loss_trace.is_empty());
    }

    #[test]
    fn deterministic() {
        let (xs, ys) = toy(20, 2);
        let config = NetworkConfig::custom(3, vec![6, 6], 50, 3);
        let a = train(&config, data(&xs, &ys), data(&xs[..5], &ys[..5]), 100.0).unwrap();
        let b = train(&config, data(&xs, &ys), data(&xs[..5], &ys[..5]), 100.0).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.report.loss_trace, b.report.loss_trace);
        assert_eq!(a.report.best_epoch, b.report.best_epoch);
    }

    #[test]
    fn small_step_descent_is_monotone() {
        let (xs, ys) = toy(16, 4);
        let mut config = NetworkConfig::custom(3, vec![], 100, 5);
        config.learning_rate = 1e-3;
        config.momentum = 0.0;
        let t = train(&config, data(&xs, &ys), data(&xs, &ys), 100.0).unwrap();
        for w in t.report.loss_trace.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn hook_sees_every_epoch() {
        let (xs, ys) = toy(8, 5);
        let config = NetworkConfig::custom(3, vec![3], 12, 0);
        let mut seen = Vec::new();
        let t = train_with_hook(&config, data(&xs, &ys), data(&xs, &ys), 100.0, |s| {
            seen.push(s.epoch)
        })
        .unwrap();
        assert_eq!(seen, (1..=12).collect::<Vec<_>>());
        assert_eq!(t.report.loss_trace.len(), 12);
        assert!(t.report.best_epoch <= 12);
    }

    #[test]
    fn divergence_is_reported() {
        let (xs, mut ys) = toy(8, 6);
        // Targets far outside the sigmoid range blow the weights up.
        ys.iter_mut().for_each(|y| *y = 1e300);
        let mut config = NetworkConfig::custom(3, vec![4], 20, 0);
        config.learning_rate = 1e3;
        let err = train(&config, data(&xs, &ys), data(&xs, &ys), 100.0)
            .err()
            .unwrap();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn rejects_empty_and_mismatched_sets() {
        let (xs, ys) = toy(4, 7);
        let config = NetworkConfig::custom(3, vec![2], 1, 0);
        assert!(matches!(
            train(&config, data(&[], &[]), data(&xs, &ys), 100.0)
                .err()
                .unwrap(),
            Error::EmptyInput(_)
        ));
        assert!(matches!(
            train(&config, data(&xs, &ys[..2]), data(&xs, &ys), 100.0)
                .err()
                .unwrap(),
            Error::LengthMismatch { .. }
        ));
        let wide = NetworkConfig::custom(5, vec![2], 1, 0);
        assert!(matches!(
            train(&wide, data(&xs, &ys), data(&xs, &ys), 100.0)
                .err()
                .unwrap(),
            Error::DimensionMismatch { .. }
        ));
    }
}
