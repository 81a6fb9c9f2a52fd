//! End-to-end glue: corpus → split → trained model → metrics.

use std::fmt::Write as _;

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::features::{FeatureCodec, Normalizer, RawDataset};
use crate::mdfis::{self, SplitConfig, SplitResult};
use crate::metrics::{self, EvaluationResult, DEFAULT_TOLERANCE_SEC};
use crate::neuralnet::{self, ModelFile, NetworkConfig, TrainingData, TrainingReport};

/// A corpus encoded with its own codec.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub codec: FeatureCodec,
    /// Labeled records only; row `r` is corpus record `raw.record_indices[r]`.
    pub raw: RawDataset,
}

impl Prepared {
    pub fn new(corpus: Corpus) -> Result<Prepared> {
        let codec = FeatureCodec::build(&corpus);
        let raw = RawDataset::encode(&corpus, &codec)?;
        Ok(Prepared { corpus, codec, raw })
    }

    pub fn bundled() -> Prepared {
        Prepared::new(Corpus::bundled()).expect("bundled corpus must encode")
    }

    /// Feature vectors scaled over all labeled rows. The splitter measures
    /// distances here, before any training set exists.
    pub fn split_points(&self) -> Result<Vec<Vec<f64>>> {
        if self.raw.is_empty() {
            return Err(Error::EmptyInput("labeled records"));
        }
        let normalizer = Normalizer::fit(&self.raw.features, self.codec.feature_names())?;
        self.raw
            .features
            .iter()
            .map(|x| normalizer.normalize(x))
            .collect()
    }

    /// Split in row space. `config.test_indices`, if any, are rows too.
    pub fn split(&self, config: &SplitConfig) -> Result<SplitResult> {
        let points = self.split_points()?;
        mdfis::split(&points, &self.raw.row_groups(&self.corpus), config)
    }

    /// Corpus record indices → rows. Unlabeled or unknown records are rejected.
    pub fn rows_of(&self, records: &[usize]) -> Result<Vec<usize>> {
        records
            .iter()
            .map(|&i| {
                self.raw.row_of(i).ok_or_else(|| {
                    Error::Config(format!("record {i} is not a labeled record of this corpus"))
                })
            })
            .collect()
    }

    pub fn split_to_records(&self, split: &SplitResult) -> SplitResult {
        split.map(|r| self.raw.record_indices[r])
    }

    /// Parses a split stated in record indices and checks it partitions the
    /// labeled rows.
    pub fn split_from_records(&self, split: &SplitResult) -> Result<SplitResult> {
        let rows = SplitResult {
            train: self.rows_of(&split.train)?,
            validation: self.rows_of(&split.validation)?,
            test: self.rows_of(&split.test)?,
        };
        rows.check_partition(self.raw.len())?;
        Ok(rows)
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: ModelFile,
    pub report: TrainingReport,
}

/// Fits the normalizer on the training rows and trains a network.
/// `config.input_dim` is overwritten with the codec dimension.
pub fn train_on_split(
    prepared: &Prepared,
    split: &SplitResult,
    config: &NetworkConfig,
) -> Result<TrainedModel> {
    let mut config = config.clone();
    config.input_dim = prepared.codec.dimension();
    let train_raw = prepared.raw.select(&split.train);
    if train_raw.is_empty() {
        return Err(Error::EmptyInput("training set"));
    }
    let normalizer = Normalizer::fit(&train_raw, prepared.codec.feature_names())?;
    let encoded = prepared.raw.normalized(&normalizer)?;
    let pick = |rows: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            rows.iter().map(|&r| encoded.features[r].clone()).collect(),
            rows.iter().map(|&r| encoded.targets[r]).collect(),
        )
    };
    let (train_x, train_y) = pick(&split.train);
    let (val_x, val_y) = pick(&split.validation);
    let trained = neuralnet::train(
        &config,
        TrainingData {
            features: &train_x,
            targets: &train_y,
        },
        TrainingData {
            features: &val_x,
            targets: &val_y,
        },
        normalizer.target_max,
    )?;
    Ok(TrainedModel {
        model: ModelFile {
            config,
            codec: prepared.codec.clone(),
            normalizer,
            network: trained.network,
        },
        report: trained.report,
    })
}

/// Predicted disintegration times (seconds) of the given corpus records,
/// encoded with the model's own codec.
pub fn predict_records(model: &ModelFile, corpus: &Corpus, records: &[usize]) -> Result<Vec<f64>> {
    let raw = records
        .iter()
        .map(|&i| {
            let record = corpus
                .records
                .get(i)
                .ok_or_else(|| Error::Config(format!("record {i} out of range")))?;
            model.codec.encode(record, corpus.descriptor_for(record)?)
        })
        .collect::<Result<Vec<_>>>()?;
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    model.network.predict_batch(&model.normalizer, &raw)
}

/// Scores the model on labeled corpus records. Sample row indices are corpus
/// record indices.
pub fn evaluate_records(
    model: &ModelFile,
    corpus: &Corpus,
    records: &[usize],
    tolerance: f64,
) -> Result<EvaluationResult> {
    let mut labels = Vec::with_capacity(records.len());
    for &i in records {
        let label = corpus
            .records
            .get(i)
            .and_then(|r| r.disintegration_time_sec)
            .ok_or_else(|| Error::Config(format!("record {i} has no disintegration time")))?;
        labels.push(label);
    }
    let predictions = predict_records(model, corpus, records)?;
    metrics::evaluate(&predictions, &labels, records, tolerance)
}

#[derive(Debug, Clone)]
pub struct SetEvaluations {
    pub train: EvaluationResult,
    pub validation: EvaluationResult,
    pub test: EvaluationResult,
}

impl SetEvaluations {
    pub fn csv(&self) -> String {
        let mut out = format!("{}\n", metrics::SAMPLE_CSV_HEADER);
        out.push_str(&self.train.csv_rows("train"));
        out.push_str(&self.validation.csv_rows("validation"));
        out.push_str(&self.test.csv_rows("test"));
        out
    }
}

/// Evaluates all three sets of a row-space split.
pub fn evaluate_split(
    model: &ModelFile,
    prepared: &Prepared,
    split: &SplitResult,
) -> Result<SetEvaluations> {
    let records = prepared.split_to_records(split);
    let eval = |r: &[usize]| evaluate_records(model, &prepared.corpus, r, DEFAULT_TOLERANCE_SEC);
    Ok(SetEvaluations {
        train: eval(&records.train)?,
        validation: eval(&records.validation)?,
        test: eval(&records.test)?,
    })
}

/// Deterministic training report (no timings), one `key<TAB>value` per line.
pub fn format_report(report: &TrainingReport, evals: &SetEvaluations) -> String {
    let c = &report.config;
    let mut out = String::new();
    let hidden: Vec<String> = c.hidden_layers.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "preset\t{}", c.preset);
    let _ = writeln!(out, "input_dim\t{}", c.input_dim);
    let _ = writeln!(out, "hidden_layers\t{}", hidden.join(","));
    let _ = writeln!(out, "learning_rate\t{}", c.learning_rate);
    let _ = writeln!(out, "momentum\t{}", c.momentum);
    let _ = writeln!(out, "epochs\t{}", c.epochs);
    let _ = writeln!(out, "seed\t{}", c.seed);
    let _ = writeln!(out, "best_epoch\t{}", report.best_epoch);
    if let Some(loss) = report.loss_trace.last() {
        let _ = writeln!(out, "final_train_loss\t{loss:.6e}");
    }
    let _ = writeln!(
        out,
        "best_validation_mse\t{:.6e}",
        report.best_validation_mse
    );
    for (name, e) in [
        ("train", &evals.train),
        ("validation", &evals.validation),
        ("test", &evals.test),
    ] {
        let _ = writeln!(
            out,
            "{name}\tn={}\taccuracy={:.2}\tmae={:.2}\trmse={:.2}",
            e.n,
            100.0 * e.accuracy_pdt,
            e.mae,
            e.rmse
        );
    }
    out
}
