//! Fixed-length feature vectors and min-max scaling.
//!
//! A formulation becomes, in order:
//!
//! 1. the nine API descriptors,
//! 2. the API dose,
//! 3. for each of the eight excipient slots, a one-hot block over the
//!    slot category's vocabulary followed by the slot dose,
//! 4. hardness, friability, thickness and punch diameter.
//!
//! Absent manufacture parameters are encoded as [`MISSING`] and replaced by
//! the training-set column mean when the [`Normalizer`] is applied.

use std::fmt::Write as _;

use crate::dataset::{
    ApiDescriptor, Corpus, ExcipientCategory, ExcipientVocab, FormulationRecord, SLOT_LAYOUT,
};
use crate::error::{Error, Result};

/// Sentinel for an absent manufacture parameter in a raw feature vector.
pub const MISSING: f64 = f64::NAN;

/// Disintegration times are scaled by this fixed constant (seconds).
pub const TARGET_MAX_SEC: f64 = 100.0;

const MANUFACTURE_NAMES: [&str; 4] = ["hardness_n", "friability_pct", "thickness_mm", "punch_mm"];

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCodec {
    vocab: ExcipientVocab,
    feature_names: Vec<String>,
}

impl FeatureCodec {
    /// Codec over the corpus excipient vocabulary.
    pub fn build(corpus: &Corpus) -> FeatureCodec {
        FeatureCodec::from_vocab(corpus.excipient_vocab.clone())
    }

    pub fn from_vocab(vocab: ExcipientVocab) -> FeatureCodec {
        let mut names: Vec<String> = ApiDescriptor::FEATURE_NAMES
            .iter()
            .map(|n| format!("api_{n}"))
            .collect();
        names.push("api_dose_mg".into());
        for (category, prefix) in SLOT_LAYOUT {
            for excipient in vocab.names(category) {
                names.push(format!("{prefix}={excipient}"));
            }
            names.push(format!("{prefix}_mg"));
        }
        names.extend(MANUFACTURE_NAMES.iter().map(|s| s.to_string()));
        FeatureCodec {
            vocab,
            feature_names: names,
        }
    }

    pub fn dimension(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn vocab(&self) -> &ExcipientVocab {
        &self.vocab
    }

    /// Index of the first manufacture-parameter column.
    pub fn manufacture_offset(&self) -> usize {
        self.dimension() - MANUFACTURE_NAMES.len()
    }

    /// Raw (unscaled) feature vector of one record.
    pub fn encode(&self, record: &FormulationRecord, api: &ApiDescriptor) -> Result<Vec<f64>> {
        if api.name != record.api_name {
            return Err(Error::Codec(format!(
                "descriptor `{}` does not belong to API `{}`",
                api.name, record.api_name
            )));
        }
        let mut x = Vec::with_capacity(self.dimension());
        x.extend_from_slice(&api.values());
        x.push(record.api_dose_mg);
        for ((category, _), slot) in SLOT_LAYOUT.iter().zip(&record.slots) {
            let width = self.vocab.names(*category).len();
            let start = x.len();
            x.resize(start + width, 0.0);
            match slot {
                Some(entry) => {
                    let k = self.vocab.position(*category, &entry.name).ok_or_else(|| {
                        Error::UnknownExcipient {
                            category: category.to_string(),
                            name: entry.name.clone(),
                        }
                    })?;
                    x[start + k] = 1.0;
                    x.push(entry.dose_mg);
                }
                None => x.push(0.0),
            }
        }
        x.extend(
            record
                .manufacture_parameters()
                .map(|p| p.unwrap_or(MISSING)),
        );
        debug_assert_eq!(x.len(), self.dimension());
        Ok(x)
    }

    /// Feature names one per line, for audit.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.feature_names.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{name}");
        }
        out
    }

    /// Serializes the vocabulary, one category per line (tab separated).
    pub(crate) fn vocab_lines(&self) -> Vec<String> {
        ExcipientCategory::ALL
            .iter()
            .map(|&c| {
                let mut line = format!("vocab\t{c}");
                for name in self.vocab.names(c) {
                    line.push('\t');
                    line.push_str(name);
                }
                line
            })
            .collect()
    }
}

/// Per-feature min-max scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub feature_names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Imputation value for [`MISSING`] entries (training column mean).
    pub fill: Vec<f64>,
    pub target_max: f64,
}

impl Normalizer {
    /// Fits column statistics on `rows` (raw vectors, possibly with
    /// [`MISSING`] entries). A column with no observed value gets fill 0.
    pub fn fit(rows: &[Vec<f64>], feature_names: &[String]) -> Result<Normalizer> {
        let first = rows
            .first()
            .ok_or(Error::EmptyInput("normalizer fit rows"))?;
        let d = first.len();
        if feature_names.len() != d {
            return Err(Error::DimensionMismatch {
                expected: feature_names.len(),
                found: d,
            });
        }
        let mut fill = vec![0.0; d];
        for (j, f) in fill.iter_mut().enumerate() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for row in rows {
                if row.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: row.len(),
                    });
                }
                if !row[j].is_nan() {
                    sum += row[j];
                    n += 1;
                }
            }
            if n > 0 {
                *f = sum / n as f64;
            }
        }
        let mut min = fill.clone();
        let mut max = fill.clone();
        for (j, (lo, hi)) in min.iter_mut().zip(max.iter_mut()).enumerate() {
            let mut first_seen = true;
            for row in rows {
                let v = if row[j].is_nan() { fill[j] } else { row[j] };
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("feature `{}`", feature_names[j])));
                }
                if first_seen {
                    *lo = v;
                    *hi = v;
                    first_seen = false;
                } else {
                    *lo = lo.min(v);
                    *hi = hi.max(v);
                }
            }
        }
        Ok(Normalizer {
            feature_names: feature_names.to_vec(),
            min,
            max,
            fill,
            target_max: TARGET_MAX_SEC,
        })
    }

    pub fn dimension(&self) -> usize {
        self.min.len()
    }

    /// Scales one feature value; degenerate columns map to 0 and values outside
    /// the fitted range clamp to [0, 1].
    pub fn normalize_value(&self, j: usize, value: f64) -> f64 {
        let v = if value.is_nan() { self.fill[j] } else { value };
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            return 0.0;
        }
        ((v - self.min[j]) / span).clamp(0.0, 1.0)
    }

    pub fn normalize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.normalize_value(j, v))
            .collect())
    }

    /// Inverse of [`Self::normalize_value`] inside the fitted range.
    pub fn denormalize_value(&self, j: usize, y: f64) -> f64 {
        self.min[j] + y * (self.max[j] - self.min[j])
    }

    pub fn normalize_target(&self, seconds: f64) -> f64 {
        (seconds / self.target_max).clamp(0.0, 1.0)
    }

    pub fn denormalize_target(&self, y: f64) -> f64 {
        y * self.target_max
    }

    /// Tab-separated text: a `target_max` line, a header, then one
    /// `name min max fill` line per feature.
    pub fn to_text(&self) -> String {
        let mut out = format!("target_max\t{}\nfeature\tmin\tmax\tfill\n", self.target_max);
        for j in 0..self.dimension() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.feature_names[j], self.min[j], self.max[j], self.fill[j]
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Normalizer> {
        const KIND: &str = "normalizer";
        let mut lines = text.lines().enumerate();
        let (_, first) = lines
            .next()
            .ok_or_else(|| Error::format(KIND, 1, "empty file"))?;
        let target_max = match first.split('\t').collect::<Vec<_>>()[..] {
            ["target_max", v] => parse_f64(KIND, 1, v)?,
            _ => return Err(Error::format(KIND, 1, "expected `target_max<TAB>value`")),
        };
        match lines.next() {
            Some((_, "feature\tmin\tmax\tfill")) => {}
            _ => return Err(Error::format(KIND, 2, "expected column header")),
        }
        let mut n = Normalizer {
            feature_names: Vec::new(),
            min: Vec::new(),
            max: Vec::new(),
            fill: Vec::new(),
            target_max,
        };
        for (i, line) in lines {
            let cells: Vec<&str> = line.split('\t').collect();
            if cells.len() != 4 {
                return Err(Error::format(
                    KIND,
                    i + 1,
                    "expected 4 tab-separated fields",
                ));
            }
            n.feature_names.push(cells[0].to_string());
            n.min.push(parse_f64(KIND, i + 1, cells[1])?);
            n.max.push(parse_f64(KIND, i + 1, cells[2])?);
            n.fill.push(parse_f64(KIND, i + 1, cells[3])?);
        }
        Ok(n)
    }
}

pub(crate) fn parse_f64(kind: &'static str, line: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::format(kind, line, format!("`{s}` is not a number")))
}

/// Raw feature vectors and labels (seconds) of every labeled record.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Vec<Vec<f64>>,
    pub targets_sec: Vec<f64>,
    /// Row → corpus record index.
    pub record_indices: Vec<usize>,
}

impl RawDataset {
    pub fn encode(corpus: &Corpus, codec: &FeatureCodec) -> Result<RawDataset> {
        let mut features = Vec::new();
        let mut targets_sec = Vec::new();
        let mut record_indices = Vec::new();
        for i in corpus.labeled_records() {
            let record = &corpus.records[i];
            let api = corpus.descriptor_for(record)?;
            features.push(codec.encode(record, api)?);
            targets_sec.push(record.disintegration_time_sec.unwrap_or_default());
            record_indices.push(i);
        }
        Ok(RawDataset {
            features,
            targets_sec,
            record_indices,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&r| self.features[r].clone()).collect()
    }

    /// Row-space API groups: API name → dataset rows.
    pub fn row_groups(&self, corpus: &Corpus) -> std::collections::BTreeMap<String, Vec<usize>> {
        let mut groups: std::collections::BTreeMap<String, Vec<usize>> = Default::default();
        for (row, &i) in self.record_indices.iter().enumerate() {
            groups
                .entry(corpus.records[i].api_name.clone())
                .or_default()
                .push(row);
        }
        groups
    }

    /// Row of a corpus record, if it is labeled.
    pub fn row_of(&self, record: usize) -> Option<usize> {
        self.record_indices.binary_search(&record).ok()
    }

    pub fn normalized(&self, normalizer: &Normalizer) -> Result<EncodedDataset> {
        let features = self
            .features
            .iter()
            .map(|x| normalizer.normalize(x))
            .collect::<Result<Vec<_>>>()?;
        let targets = self
            .targets_sec
            .iter()
            .map(|&t| normalizer.normalize_target(t))
            .collect();
        Ok(EncodedDataset {
            features,
            targets,
            record_indices: self.record_indices.clone(),
            normalizer: normalizer.clone(),
        })
    }
}

/// Normalized features and targets, every entry in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub record_indices: Vec<usize>,
    pub normalizer: Normalizer,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_corpus;
    use proptest::prelude::*;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|i| format!("f{i}")).collect()
    }

    /// Hand count: 9 + 1 + Σ slots (|vocab| + 1) + 4.
    fn expected_dimension(
        fillers: usize,
        binders: usize,
        disint: usize,
        lub: usize,
        sol: usize,
    ) -> usize {
        9 + 1 + 2 * (fillers + 1) + (binders + 1) + 2 * (disint + 1) + 2 * (lub + 1) + (sol + 1) + 4
    }

    #[test]
    fn dimension_matches_hand_count() {
        let mut vocab = ExcipientVocab::default();
        for n in ["F1", "F2"] {
            vocab.insert(ExcipientCategory::Filler, n);
        }
        vocab.insert(ExcipientCategory::Binder, "B1");
        for n in ["D1", "D2", "D3"] {
            vocab.insert(ExcipientCategory::Disintegrant, n);
        }
        for n in ["L1", "L2"] {
            vocab.insert(ExcipientCategory::Lubricant, n);
        }
        vocab.insert(ExcipientCategory::Solubilizer, "S1");
        let codec = FeatureCodec::from_vocab(vocab);
        assert_eq!(codec.dimension(), 38);
        assert_eq!(codec.dimension(), expected_dimension(2, 1, 3, 2, 1));
        assert_eq!(codec.feature_names().len(), 38);
    }

    #[test]
    fn empty_vocab_dimension() {
        let codec = FeatureCodec::from_vocab(ExcipientVocab::default());
        assert_eq!(codec.dimension(), 22);
    }

    #[test]
    fn bundled_dimension() {
        let codec = FeatureCodec::build(&Corpus::bundled());
        assert_eq!(codec.dimension(), expected_dimension(4, 3, 3, 2, 5));
        assert_eq!(codec.dimension(), 48);
    }

    #[test]
    fn codec_is_deterministic() {
        let a = FeatureCodec::build(&Corpus::bundled());
        let b = FeatureCodec::build(&Corpus::bundled());
        assert_eq!(a, b);
        assert_eq!(a.dump(), b.dump());
    }

    #[test]
    fn mirtazapine_encoding() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        let record = &corpus.records[0];
        let x = codec
            .encode(record, corpus.descriptor_for(record).unwrap())
            .unwrap();
        let col = |name: &str| {
            codec
                .feature_names()
                .iter()
                .position(|n| n == name)
                .unwrap_or_else(|| panic!("no feature {name}"))
        };
        assert_eq!(x[col("filler1=Mannitol")], 1.0);
        assert_eq!(x[col("filler1=MCC")], 0.0);
        assert_eq!(x[col("filler1_mg")], 285.0);
        assert_eq!(x[col("hardness_n")], 53.0);
        assert!(x[col("punch_mm")].is_nan());
        assert_eq!(x[col("api_dose_mg")], 45.0);
        // Encoding twice gives the same bits (NaN included).
        let again = codec
            .encode(record, corpus.descriptor_for(record).unwrap())
            .unwrap();
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&x), bits(&again));
    }

    #[test]
    fn record_without_excipients() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        let mut record = corpus.records[0].clone();
        record.slots = Default::default();
        let x = codec
            .encode(&record, corpus.descriptor_for(&record).unwrap())
            .unwrap();
        assert_eq!(x[0], 265.35);
        assert_eq!(x[9], 45.0);
        assert!(x[10..codec.manufacture_offset()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unknown_excipient_is_named() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        let mut record = corpus.records[0].clone();
        record.slots[0].as_mut().unwrap().name = "Unobtainium".into();
        match codec.encode(&record, corpus.descriptor_for(&record).unwrap()) {
            Err(Error::UnknownExcipient { name, .. }) => assert_eq!(name, "Unobtainium"),
            other => panic!("expected unknown excipient, got {other:?}"),
        }
    }

    #[test]
    fn one_hot_blocks_are_exclusive() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        for record in &corpus.records {
            let x = codec
                .encode(record, corpus.descriptor_for(record).unwrap())
                .unwrap();
            let mut offset = 10;
            for (category, _) in SLOT_LAYOUT {
                let w = codec.vocab().names(category).len();
                let s: f64 = x[offset..offset + w].iter().sum();
                assert!(s == 0.0 || s == 1.0);
                offset += w + 1;
            }
        }
    }

    #[test]
    fn single_row_fit_is_degenerate() {
        let n = Normalizer::fit(&[vec![3.0, -1.0]], &names(2)).unwrap();
        assert_eq!(n.min, n.max);
        assert_eq!(n.normalize(&[3.0, -1.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn column_min_max() {
        let rows = vec![vec![0.0], vec![50.0], vec![100.0]];
        let n = Normalizer::fit(&rows, &names(1)).unwrap();
        assert_eq!((n.min[0], n.max[0]), (0.0, 100.0));
        assert_eq!(n.normalize(&[120.0]).unwrap(), vec![1.0]);
        assert_eq!(n.normalize(&[-5.0]).unwrap(), vec![0.0]);
        assert_eq!(n.normalize(&[50.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn missing_values_take_training_mean() {
        let rows = vec![vec![10.0], vec![MISSING], vec![30.0]];
        let n = Normalizer::fit(&rows, &names(1)).unwrap();
        assert_eq!(n.fill[0], 20.0);
        assert_eq!(n.normalize(&[MISSING]).unwrap(), vec![0.5]);
    }

    #[test]
    fn target_scaling() {
        let n = Normalizer::fit(&[vec![0.0]], &names(1)).unwrap();
        assert_eq!(n.normalize_target(30.0), 0.30);
        assert_eq!(n.normalize_target(0.0), 0.0);
        assert_eq!(n.normalize_target(100.0), 1.0);
        assert_eq!(n.denormalize_target(0.3), 30.0);
    }

    #[test]
    fn empty_fit_is_error() {
        assert!(matches!(
            Normalizer::fit(&[], &names(0)),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn bundled_training_columns_are_finite() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        let raw = RawDataset::encode(&corpus, &codec).unwrap();
        let n = Normalizer::fit(&raw.features, codec.feature_names()).unwrap();
        assert!(n.min.iter().chain(&n.max).all(|v| v.is_finite()));
        let ds = raw.normalized(&n).unwrap();
        for row in &ds.features {
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(ds.targets.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn normalizer_text_round_trip() {
        let corpus = Corpus::bundled();
        let codec = FeatureCodec::build(&corpus);
        let raw = RawDataset::encode(&corpus, &codec).unwrap();
        let n = Normalizer::fit(&raw.features, codec.feature_names()).unwrap();
        assert_eq!(Normalizer::from_text(&n.to_text()).unwrap(), n);
    }

    #[test]
    fn header_only_corpus_encodes_nothing() {
        let corpus = parse_corpus(
            &format!("{}\n", crate::dataset::FORMULATION_COLUMNS.join(",")),
            crate::dataset::BUNDLED_APIS_CSV,
        )
        .unwrap();
        let codec = FeatureCodec::build(&corpus);
        assert_eq!(codec.dimension(), 22);
        assert!(RawDataset::encode(&corpus, &codec).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn round_trip_inside_fitted_range(
            lo in -1e3f64..1e3,
            span in 1e-3f64..1e3,
            t in 0.0f64..=1.0,
        ) {
            let hi = lo + span;
            let n = Normalizer::fit(&[vec![lo], vec![hi]], &names(1)).unwrap();
            let x = lo + t * span;
            let back = n.denormalize_value(0, n.normalize_value(0, x));
            prop_assert!((back - x).abs() <= 4.0 * f64::EPSILON * lo.abs().max(hi.abs()));
        }

        #[test]
        fn target_round_trip(t in 0.0f64..=100.0) {
            let n = Normalizer::fit(&[vec![0.0]], &names(1)).unwrap();
            let back = n.denormalize_target(n.normalize_target(t));
            prop_assert!((back - t).abs() <= 1e-12);
        }
    }
}
