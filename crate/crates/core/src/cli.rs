//! The `odtnet` command line.
//!
//! Every option can also come from a flat `key = value` file passed with
//! `--config`; flags given on the command line win. Keys are the long flag
//! names, with `-` or `_`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dataset::{parse_corpus, Corpus, BUNDLED_APIS_CSV, BUNDLED_FORMULATIONS_CSV};
use crate::error::{Error, Result};
use crate::mdfis::{parse_index_list, SplitConfig, SplitResult, Strategy};
use crate::metrics::{self, DEFAULT_TOLERANCE_SEC};
use crate::neuralnet::{ModelFile, NetworkConfig, Preset};
use crate::pipeline::{self, Prepared};

#[derive(Debug, Parser)]
#[command(
    name = "odtnet",
    version,
    about = "Disintegration-time models for orally disintegrating tablets"
)]
struct Cli {
    /// Flat `key = value` settings file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Formulation table (CSV). Defaults to the bundled corpus.
    #[arg(long, global = true, value_name = "FILE")]
    formulations: Option<PathBuf>,
    /// API descriptor table (CSV). Defaults to the bundled table.
    #[arg(long, global = true, value_name = "FILE")]
    apis: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate the corpus and print a summary.
    Ingest {
        /// Warn about doses above ten times the median dose of their API group.
        #[arg(long)]
        strict: bool,
    },
    /// Divide labeled records into training, validation and test sets.
    Split {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Train a network and report accuracies on the three sets.
    Train {
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        net: NetArgs,
        /// Model file to write.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
        /// Per-sample CSV of every set.
        #[arg(long, value_name = "FILE")]
        predictions: Option<PathBuf>,
    },
    /// Score a saved model on one set of a split.
    Evaluate {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// train, validation, test or all.
        #[arg(long)]
        set: Option<String>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long, value_name = "FILE")]
        predictions: Option<PathBuf>,
    },
    /// Predict disintegration times for every row of a formulation CSV.
    Predict {
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        /// Formulation rows to score (labels may be blank).
        #[arg(long, value_name = "FILE")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Inspect the feature codec.
    Codec {
        #[command(subcommand)]
        action: CodecAction,
    },
}

#[derive(Debug, Subcommand)]
enum CodecAction {
    /// Print every feature column with its index.
    Dump,
}

#[derive(Debug, Args)]
struct SplitArgs {
    /// random, maximin or mdfis.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    n_validation: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// API groups smaller than this stay in training.
    #[arg(long)]
    threshold: Option<usize>,
    #[arg(long)]
    n_initial: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// File of record indices to use as the test set.
    #[arg(long, value_name = "FILE")]
    test_indices: Option<PathBuf>,
    /// Existing split file (record indices); overrides the options above.
    #[arg(long = "split", value_name = "FILE")]
    split_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NetArgs {
    /// ann, dnn or custom.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated hidden layer widths (custom preset).
    #[arg(long)]
    hidden: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    momentum: Option<f64>,
}

const CONFIG_KEYS: [&str; 23] = [
    "formulations",
    "apis",
    "strict",
    "strategy",
    "n_validation",
    "n_test",
    "threshold",
    "n_initial",
    "seed",
    "test_indices",
    "split",
    "preset",
    "hidden",
    "epochs",
    "lr",
    "momentum",
    "out",
    "report",
    "predictions",
    "model",
    "set",
    "tolerance",
    "input",
];

/// Settings file contents; lookups fall back to it when a flag is absent.
#[derive(Debug, Default)]
struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    fn load(path: Option<&Path>) -> Result<Settings> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    fn parse(text: &str) -> Result<Settings> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected `key = value`", i + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "config line {}: unknown key `{key}`",
                    i + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Settings { values })
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::Config(format!("config key `{key}`: {e}"))),
        }
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        flag.or_else(|| self.values.get(key).map(PathBuf::from))
    }

    fn flag(&self, flag: bool, key: &str) -> Result<bool> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }
}

/// Runs the tool with `args` (including the program name) and returns the
/// exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    0
                }
                _ => {
                    let _ = write!(err, "{text}");
                    1
                }
            };
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let settings = Settings::load(cli.config.as_deref())?;
    let formulations = settings.path(cli.formulations, "formulations");
    let apis = settings.path(cli.apis, "apis");
    let load = || load_corpus(formulations.as_deref(), apis.as_deref());

    match cli.command {
        Command::Ingest { strict } => ingest(&load()?, settings.flag(strict, "strict")?, out, err),
        Command::Split { split, out: path } => {
            let prepared = Prepared::new(load()?)?;
            let rows = resolve_split(&prepared, split, &settings)?;
            let text = prepared.split_to_records(&rows).to_file_text();
            emit(settings.path(path, "out").as_deref(), &text, out)
        }
        Command::Train {
            split,
            net,
            out: model_path,
            report,
            predictions,
        } => {
            let seed = settings.get(split.seed, "seed")?.unwrap_or(0);
            let prepared = Prepared::new(load()?)?;
            let rows = resolve_split(&prepared, split, &settings)?;
            let config = network_config(net, seed, prepared.codec.dimension(), &settings)?;
            let trained = pipeline::train_on_split(&prepared, &rows, &config)?;
            let evals = pipeline::evaluate_split(&trained.model, &prepared, &rows)?;
            let text = pipeline::format_report(&trained.report, &evals);
            let _ = writeln!(
                err,
                "trained in {:.1}s, best epoch {}",
                trained.report.wall_time.as_secs_f64(),
                trained.report.best_epoch
            );
            if let Some(path) = settings.path(model_path, "out") {
                trained.model.save(path)?;
            }
            if let Some(path) = settings.path(predictions, "predictions") {
                std::fs::write(path, evals.csv())?;
            }
            emit(settings.path(report, "report").as_deref(), &text, out)
        }
        Command::Evaluate {
            split,
            model,
            set,
            tolerance,
            predictions,
        } => {
            let model = load_model(settings.path(model, "model"))?;
            let prepared = Prepared::new(load()?)?;
            let rows = resolve_split(&prepared, split, &settings)?;
            let records = prepared.split_to_records(&rows);
            let tolerance = settings
                .get(tolerance, "tolerance")?
                .unwrap_or(DEFAULT_TOLERANCE_SEC);
            let set = settings
                .get(set, "set")?
                .unwrap_or_else(|| "test".to_string());
            let chosen: Vec<(&str, &[usize])> = match set.as_str() {
                "train" => vec![("train", &records.train)],
                "validation" => vec![("validation", &records.validation)],
                "test" => vec![("test", &records.test)],
                "all" => vec![
                    ("train", &records.train),
                    ("validation", &records.validation),
                    ("test", &records.test),
                ],
                other => {
                    return Err(Error::Config(format!(
                        "unknown set `{other}` (expected train, validation, test or all)"
                    )))
                }
            };
            let mut csv = format!("{}\n", metrics::SAMPLE_CSV_HEADER);
            for (name, recs) in chosen {
                let e = pipeline::evaluate_records(&model, &prepared.corpus, recs, tolerance)?;
                let _ = writeln!(
                    out,
                    "{name}\tn={}\taccuracy={:.2}\tmae={:.2}\trmse={:.2}",
                    e.n,
                    100.0 * e.accuracy_pdt,
                    e.mae,
                    e.rmse
                );
                csv.push_str(&e.csv_rows(name));
            }
            if let Some(path) = settings.path(predictions, "predictions") {
                std::fs::write(path, csv)?;
            }
            Ok(())
        }
        Command::Predict {
            model,
            input,
            out: path,
        } => {
            let model = load_model(settings.path(model, "model"))?;
            let apis_text = read_or(apis.as_deref(), BUNDLED_APIS_CSV)?;
            let input = settings.path(input, "input").or(formulations);
            let corpus = parse_corpus(
                &read_or(input.as_deref(), BUNDLED_FORMULATIONS_CSV)?,
                &apis_text,
            )?;
            let records: Vec<usize> = (0..corpus.len()).collect();
            let preds = pipeline::predict_records(&model, &corpus, &records)?;
            let mut text = String::from("record_index,api_name,prediction_sec\n");
            for (i, p) in records.iter().zip(preds) {
                text.push_str(&format!("{i},{},{p}\n", corpus.records[*i].api_name));
            }
            emit(settings.path(path, "out").as_deref(), &text, out)
        }
        Command::Codec {
            action: CodecAction::Dump,
        } => {
            let prepared = Prepared::new(load()?)?;
            emit(None, &prepared.codec.dump(), out)
        }
    }
}

fn ingest(corpus: &Corpus, strict: bool, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    if corpus.is_empty() {
        let _ = writeln!(err, "warning: the formulation table has no records");
    }
    let groups = corpus.api_groups();
    let _ = writeln!(out, "records\t{}", corpus.len());
    let _ = writeln!(out, "labeled\t{}", corpus.labeled_records().len());
    let _ = writeln!(out, "api_groups\t{}", groups.len());
    for (name, rows) in &groups {
        let _ = writeln!(out, "group\t{name}\t{}", rows.len());
    }
    let codec = crate::features::FeatureCodec::build(corpus);
    let _ = writeln!(out, "feature_dimension\t{}", codec.dimension());
    if strict {
        for w in corpus.dose_warnings() {
            let _ = writeln!(
                err,
                "warning: record {} `{}` = {} mg exceeds ten times the {} median ({} mg)",
                w.record, w.column, w.dose_mg, corpus.records[w.record].api_name, w.group_median_mg
            );
        }
    }
    Ok(())
}

fn resolve_split(prepared: &Prepared, args: SplitArgs, settings: &Settings) -> Result<SplitResult> {
    if let Some(path) = settings.path(args.split_file, "split") {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        return prepared.split_from_records(&SplitResult::from_file_text(&text)?);
    }
    let defaults = SplitConfig::default();
    let strategy = match settings.get::<String>(args.strategy, "strategy")? {
        Some(s) => s.parse::<Strategy>()?,
        None => defaults.strategy,
    };
    let test_indices = match settings.path(args.test_indices, "test_indices") {
        None => None,
        Some(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            let records = parse_index_list(&text).map_err(|m| Error::format("test index", 1, m))?;
            Some(prepared.rows_of(&records)?)
        }
    };
    let n_test = match (&test_indices, settings.get(args.n_test, "n_test")?) {
        (_, Some(n)) => n,
        (Some(t), None) => t.len(),
        (None, None) => defaults.n_test,
    };
    let config = SplitConfig {
        n_validation: settings
            .get(args.n_validation, "n_validation")?
            .unwrap_or(defaults.n_validation),
        n_test,
        small_group_threshold: settings
            .get(args.threshold, "threshold")?
            .unwrap_or(defaults.small_group_threshold),
        n_initial: settings
            .get(args.n_initial, "n_initial")?
            .unwrap_or(defaults.n_initial),
        seed: settings.get(args.seed, "seed")?.unwrap_or(defaults.seed),
        test_indices,
        strategy,
    };
    prepared.split(&config)
}

fn network_config(
    args: NetArgs,
    seed: u64,
    input_dim: usize,
    settings: &Settings,
) -> Result<NetworkConfig> {
    let preset = match settings.get::<String>(args.preset, "preset")? {
        Some(p) => p.parse::<Preset>()?,
        None => Preset::Ann,
    };
    let mut config = NetworkConfig::preset(preset, input_dim, seed);
    if let Some(hidden) = settings.get::<String>(args.hidden, "hidden")? {
        if preset != Preset::Custom {
            return Err(Error::Config("--hidden requires --preset custom".into()));
        }
        config.hidden_layers = parse_index_list(&hidden).map_err(Error::Config)?;
    }
    if let Some(epochs) = settings.get(args.epochs, "epochs")? {
        config.epochs = epochs;
    }
    if let Some(lr) = settings.get(args.lr, "lr")? {
        config.learning_rate = lr;
    }
    if let Some(m) = settings.get(args.momentum, "momentum")? {
        config.momentum = m;
    }
    config.validate()?;
    Ok(config)
}

fn load_corpus(formulations: Option<&Path>, apis: Option<&Path>) -> Result<Corpus> {
    parse_corpus(
        &read_or(formulations, BUNDLED_FORMULATIONS_CSV)?,
        &read_or(apis, BUNDLED_APIS_CSV)?,
    )
}

fn read_or(path: Option<&Path>, bundled: &str) -> Result<String> {
    match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display()))),
        None => Ok(bundled.to_string()),
    }
}

fn load_model(path: Option<PathBuf>) -> Result<ModelFile> {
    let path = path.ok_or_else(|| Error::Config("--model is required".into()))?;
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ModelFile::from_text(&text)
}

fn emit(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn settings_parse() {
        let s = Settings::parse("# comment\nseed = 4\nn-validation=10\n\n").unwrap();
        assert_eq!(s.get::<u64>(None, "seed").unwrap(), Some(4));
        assert_eq!(s.get::<u64>(Some(9), "seed").unwrap(), Some(9));
        assert_eq!(s.get::<usize>(None, "n_validation").unwrap(), Some(10));
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("seed 4").is_err());
        let s = Settings::parse("seed = four").unwrap();
        assert!(s.get::<u64>(None, "seed").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["odtnet", "frobnicate"], &mut out, &mut err), 1);
        assert_eq!(run(["odtnet", "--help"], &mut out, &mut err), 0);
    }
}
