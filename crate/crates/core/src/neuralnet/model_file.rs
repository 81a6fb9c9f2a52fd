//! Plain-text model files.
//!
//! Layout, one tab-separated record per line:
//!
//! ```text
//! ODTNET1
//! preset        dnn
//! input_dim     48
//! hidden        50 50 ...
//! learning_rate 0.01
//! momentum      0.8
//! epochs        2000
//! seed          0
//! vocab         filler Mannitol MCC ...      (one line per category)
//! normalizer_begin
//! ...                                         (Normalizer::to_text)
//! normalizer_end
//! layer         tanh 50 48
//! w             <fan_out * fan_in values, row-major>
//! b             <fan_out values>
//! ...
//! ```
//!
//! Floats are written with `Display`, which round-trips exactly. Momentum
//! velocities are training state and are not saved.

use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{ExcipientCategory, ExcipientVocab};
use crate::error::{Error, Result};
use crate::features::{parse_f64, FeatureCodec, Normalizer};

use super::{Activation, Layer, Network, NetworkConfig, Preset};

const MAGIC: &str = "ODTNET1";
const KIND: &str = "model";

/// Everything needed to predict from raw formulations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub config: NetworkConfig,
    pub codec: FeatureCodec,
    pub normalizer: Normalizer,
    pub network: Network,
}

fn join(values: impl IntoIterator<Item = impl std::fmt::Display>) -> String {
    let mut out = String::new();
    for v in values {
        let _ = write!(out, "\t{v}");
    }
    out
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "preset\t{}", c.preset);
        let _ = writeln!(out, "input_dim\t{}", c.input_dim);
        let _ = writeln!(out, "hidden{}", join(&c.hidden_layers));
        let _ = writeln!(out, "learning_rate\t{}", c.learning_rate);
        let _ = writeln!(out, "momentum\t{}", c.momentum);
        let _ = writeln!(out, "epochs\t{}", c.epochs);
        let _ = writeln!(out, "seed\t{}", c.seed);
        for line in self.codec.vocab_lines() {
            let _ = writeln!(out, "{line}");
        }
        out.push_str("normalizer_begin\n");
        out.push_str(&self.normalizer.to_text());
        out.push_str("normalizer_end\n");
        for layer in &self.network.layers {
            let _ = writeln!(
                out,
                "layer\t{}\t{}\t{}",
                layer.activation.as_str(),
                layer.fan_out,
                layer.fan_in
            );
            let _ = writeln!(out, "w{}", join(&layer.weights));
            let _ = writeln!(out, "b{}", join(&layer.biases));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        ModelFile::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn from_text(text: &str) -> Result<ModelFile> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            line: 0,
        };
        if lines.next_line()? != MAGIC {
            return Err(Error::format(KIND, 1, format!("missing `{MAGIC}` header")));
        }
        let preset: Preset = lines.single("preset")?.parse()?;
        let input_dim = lines.single("input_dim")?;
        let input_dim = lines.parse_usize(input_dim)?;
        let hidden = lines
            .record("hidden")?
            .iter()
            .map(|s| lines.parse_usize(s))
            .collect::<Result<Vec<_>>>()?;
        let learning_rate = lines.single("learning_rate")?;
        let learning_rate = parse_f64(KIND, lines.line, learning_rate)?;
        let momentum = lines.single("momentum")?;
        let momentum = parse_f64(KIND, lines.line, momentum)?;
        let epochs = lines.single("epochs")?;
        let epochs = lines.parse_usize(epochs)?;
        let seed = lines
            .single("seed")?
            .parse()
            .map_err(|_| Error::format(KIND, lines.line, "seed is not an integer"))?;
        let config = NetworkConfig {
            input_dim,
            hidden_layers: hidden,
            learning_rate,
            momentum,
            epochs,
            seed,
            preset,
        };

        let mut vocab = ExcipientVocab::default();
        for expected in ExcipientCategory::ALL {
            let cells = lines.record("vocab")?;
            let category: ExcipientCategory = cells
                .first()
                .ok_or_else(|| Error::format(KIND, lines.line, "vocab line without category"))?
                .parse()
                .map_err(|e: Error| Error::format(KIND, lines.line, e.to_string()))?;
            if category != expected {
                return Err(Error::format(
                    KIND,
                    lines.line,
                    format!("expected vocab for {expected}, found {category}"),
                ));
            }
            for name in &cells[1..] {
                vocab.insert(category, name);
            }
        }
        let codec = FeatureCodec::from_vocab(vocab);

        if lines.next_line()? != "normalizer_begin" {
            return Err(Error::format(
                KIND,
                lines.line,
                "expected `normalizer_begin`",
            ));
        }
        let mut normalizer_text = String::new();
        loop {
            let line = lines.next_line()?;
            if line == "normalizer_end" {
                break;
            }
            normalizer_text.push_str(line);
            normalizer_text.push('\n');
        }
        let normalizer = Normalizer::from_text(&normalizer_text)?;

        let mut layers = Vec::new();
        for (fan_out, fan_in) in config.layer_shapes() {
            let cells = lines.record("layer")?;
            let (activation, out, inp) = match cells[..] {
                [a, o, i] => (a, lines.parse_usize(o)?, lines.parse_usize(i)?),
                _ => {
                    return Err(Error::format(
                        KIND,
                        lines.line,
                        "expected `layer act out in`",
                    ))
                }
            };
            let activation = match activation {
                "tanh" => Activation::Tanh,
                "sigmoid" => Activation::Sigmoid,
                other => {
                    return Err(Error::format(
                        KIND,
                        lines.line,
                        format!("unknown activation `{other}`"),
                    ))
                }
            };
            if (out, inp) != (fan_out, fan_in) {
                return Err(Error::format(
                    KIND,
                    lines.line,
                    format!(
                        "layer shape {out}x{inp} does not match configuration {fan_out}x{fan_in}"
                    ),
                ));
            }
            let weights = lines.floats("w", fan_out * fan_in)?;
            let biases = lines.floats("b", fan_out)?;
            layers.push(Layer {
                fan_in,
                fan_out,
                weights,
                biases,
                activation,
                weight_velocity: vec![0.0; fan_out * fan_in],
                bias_velocity: vec![0.0; fan_out],
            });
        }
        if let Some((i, _)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::format(KIND, i + 1, "unexpected trailing content"));
        }

        if codec.dimension() != input_dim || normalizer.dimension() != input_dim {
            return Err(Error::Codec(format!(
                "model input dimension {input_dim}, codec {}, normalizer {}",
                codec.dimension(),
                normalizer.dimension()
            )));
        }
        if normalizer.feature_names != codec.feature_names() {
            return Err(Error::Codec(
                "normalizer feature names differ from the codec".into(),
            ));
        }
        Ok(ModelFile {
            config,
            codec,
            normalizer,
            network: Network { layers },
        })
    }
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    line: usize,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(Error::format(KIND, self.line + 1, "unexpected end of file")),
        }
    }

    /// Fields after the expected `key`.
    fn record(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.next_line()?;
        let mut cells = line.split('\t');
        if cells.next() != Some(key) {
            return Err(Error::format(
                KIND,
                self.line,
                format!("expected `{key}` record"),
            ));
        }
        Ok(cells.collect())
    }

    fn single(&mut self, key: &str) -> Result<&'a str> {
        match self.record(key)?[..] {
            [v] => Ok(v),
            _ => Err(Error::format(
                KIND,
                self.line,
                format!("`{key}` takes one value"),
            )),
        }
    }

    fn parse_usize(&self, s: &str) -> Result<usize> {
        s.parse()
            .map_err(|_| Error::format(KIND, self.line, format!("`{s}` is not a count")))
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>> {
        let cells = self.record(key)?;
        if cells.len() != n {
            return Err(Error::format(
                KIND,
                self.line,
                format!("expected {n} values, found {}", cells.len()),
            ));
        }
        let line = self.line;
        cells.iter().map(|s| parse_f64(KIND, line, s)).collect()
    }
}
