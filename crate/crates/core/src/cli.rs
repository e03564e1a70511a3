//! Command-line entry point: `train`, `predict`, `eval` and `gradcheck`.
//!
//! Settings come from an optional flat config file (`key = value` lines,
//! `#` comments) and are overridden by flags. Config keys are the long flag
//! names without the leading dashes; `_` and `-` are interchangeable.
//!
//! Exit codes: 0 success, 1 internal or check failure, 2 usage or input error.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{
    apply_positional_tags, parse_conll, parse_segmented, write_conll, Representation, Sentence,
    TagScheme,
};
use crate::eval::{entity_surfaces, evaluate, EvalReport};
use crate::training::gradcheck::{gradcheck, GradcheckConfig};
use crate::training::{beta_sweep, load_model, save_model, sweep_table, train, Model, TrainConfig};
use crate::triggers::Trigger;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "mmner",
    version,
    about = "Max-margin BiLSTM named-entity tagger",
    args_override_self = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write it with its per-epoch log.
    Train(Box<TrainArgs>),
    /// Tag sentences with a trained model.
    Predict(PredictArgs),
    /// Score predictions against gold annotations.
    Eval(EvalArgs),
    /// Finite-difference check of the analytic gradients.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// hamming | fscore | integrated
    #[arg(long)]
    trigger: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    beam_k: Option<String>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    decay: Option<String>,
    #[arg(long)]
    l2: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    token_dim: Option<String>,
    #[arg(long)]
    feature_dim: Option<String>,
    #[arg(long)]
    hidden_dim: Option<String>,
    /// positional | segfeat
    #[arg(long)]
    mode: Option<String>,
    /// on | off
    #[arg(long)]
    bigrams: Option<String>,
    /// Comma-separated entity types, e.g. `PER.NAM,PER.NOM`.
    #[arg(long)]
    types: Option<String>,
    /// Comma-separated β values; trains one integrated model per value.
    #[arg(long)]
    beta_sweep: Option<String>,
    #[arg(long)]
    train: Option<String>,
    #[arg(long)]
    dev: Option<String>,
    #[arg(long)]
    test: Option<String>,
    /// word2vec text-format vectors for the token table.
    #[arg(long)]
    embeddings: Option<String>,
    #[arg(long)]
    model_out: Option<String>,
    /// Per-epoch metrics log (default: `<model-out>.log`).
    #[arg(long)]
    log: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CoNLL-style input; only the token column is used.
    #[arg(long, conflicts_with = "segmented")]
    input: Option<PathBuf>,
    /// Segmented text, one sentence per line, words separated by spaces.
    #[arg(long)]
    segmented: Option<PathBuf>,
    /// Entity types the caller expects; must match the model.
    #[arg(long)]
    types: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long, required_unless_present = "pred", conflicts_with = "pred")]
    model: Option<PathBuf>,
    /// Predictions as a labeled CoNLL file aligned with `--gold`.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Training corpus; enables OOV recall.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    types: Option<String>,
    /// Tab-separated output instead of the table.
    #[arg(long)]
    tsv: bool,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 24)]
    instances: usize,
    /// Test hook: perturbs the analytic gradient so the check must fail.
    #[arg(long, hide = true)]
    corrupt: bool,
}

/// Every setting of the `train` command.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub representation: Representation,
    pub bigrams: bool,
    pub types: Option<Vec<String>>,
    pub beta_sweep: Option<Vec<f64>>,
    pub train_path: Option<PathBuf>,
    pub dev_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub embeddings_path: Option<PathBuf>,
    pub model_out: Option<PathBuf>,
    pub log_path: Option<PathBuf>,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            train: TrainConfig::default(),
            representation: Representation::default(),
            bigrams: true,
            types: None,
            beta_sweep: None,
            train_path: None,
            dev_path: None,
            test_path: None,
            embeddings_path: None,
            model_out: None,
            log_path: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

impl CliConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let t = &mut self.train;
        match key.as_str() {
            "seed" => t.seed = parse_value(&key, value)?,
            "trigger" => t.trigger.kind = value.parse()?,
            "kappa" => t.trigger.kappa = parse_value(&key, value)?,
            "beta" => t.trigger.beta = parse_value(&key, value)?,
            "beam-k" => t.beam_k = parse_value(&key, value)?,
            "lr" => t.learning_rate = parse_value(&key, value)?,
            "decay" => t.decay = parse_value(&key, value)?,
            "l2" => t.l2_lambda = parse_value(&key, value)?,
            "epochs" => t.epochs = parse_value(&key, value)?,
            "window" => t.window = parse_value(&key, value)?,
            "token-dim" => t.token_dim = parse_value(&key, value)?,
            "feature-dim" => t.feature_dim = parse_value(&key, value)?,
            "hidden-dim" => t.hidden_dim = parse_value(&key, value)?,
            "mode" => self.representation = value.parse()?,
            "bigrams" => {
                self.bigrams = match value {
                    "on" => true,
                    "off" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "invalid value `{value}` for `bigrams` (on|off)"
                        )))
                    }
                }
            }
            "types" => self.types = Some(parse_list(value)),
            "beta-sweep" => {
                self.beta_sweep = Some(
                    parse_list(value)
                        .iter()
                        .map(|v| parse_value(&key, v))
                        .collect::<Result<_>>()?,
                )
            }
            "train" => self.train_path = Some(value.into()),
            "dev" => self.dev_path = Some(value.into()),
            "test" => self.test_path = Some(value.into()),
            "embeddings" => self.embeddings_path = Some(value.into()),
            "model-out" => self.model_out = Some(value.into()),
            "log" => self.log_path = Some(value.into()),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` config document.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("config line {}: expected `key = value`", i + 1))
            })?;
            self.set(key, value).map_err(|e| {
                Error::Config(format!("config line {}: {}", i + 1, strip_prefix(&e)))
            })?;
        }
        Ok(())
    }

    pub fn scheme(&self) -> Result<TagScheme> {
        scheme_from(self.types.as_deref())
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

fn scheme_from(types: Option<&[String]>) -> Result<TagScheme> {
    match types {
        Some(t) => TagScheme::from_entity_types(t),
        None => Ok(TagScheme::default()),
    }
}

/// Runs the CLI on `args` (including the program name), writing to the
/// process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let _ = write!(err, "{}", e.render());
            return EXIT_USAGE;
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(*a, out, err),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension(_)
        | Error::LengthMismatch { .. }
        | Error::EmptySequence
        | Error::StaleCache
        | Error::InvalidBio { .. } => EXIT_FAILURE,
        _ => EXIT_USAGE,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
        ));
    }
    Ok(())
}

fn load_corpus(path: &Path, scheme: &TagScheme) -> Result<Vec<Sentence>> {
    Ok(parse_conll(&read(path)?, scheme)?.sentences)
}

fn train_config(a: &TrainArgs) -> Result<CliConfig> {
    let mut cfg = CliConfig::default();
    if let Some(path) = &a.config {
        cfg.apply_file(&read(path)?)?;
    }
    let flags = [
        ("seed", &a.seed),
        ("trigger", &a.trigger),
        ("kappa", &a.kappa),
        ("beta", &a.beta),
        ("beam-k", &a.beam_k),
        ("lr", &a.lr),
        ("decay", &a.decay),
        ("l2", &a.l2),
        ("epochs", &a.epochs),
        ("window", &a.window),
        ("token-dim", &a.token_dim),
        ("feature-dim", &a.feature_dim),
        ("hidden-dim", &a.hidden_dim),
        ("mode", &a.mode),
        ("bigrams", &a.bigrams),
        ("types", &a.types),
        ("beta-sweep", &a.beta_sweep),
        ("train", &a.train),
        ("dev", &a.dev),
        ("test", &a.test),
        ("embeddings", &a.embeddings),
        ("model-out", &a.model_out),
        ("log", &a.log),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn cmd_train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let cfg = train_config(&a)?;
    cfg.train.validate()?;
    Trigger::new(
        cfg.train.trigger.kind,
        cfg.train.trigger.kappa,
        cfg.train.trigger.beta,
    )?;
    let train_path = cfg
        .train_path
        .as_deref()
        .ok_or_else(|| Error::Config("no training corpus (--train)".into()))?;
    for p in [
        Some(train_path),
        cfg.dev_path.as_deref(),
        cfg.test_path.as_deref(),
        cfg.embeddings_path.as_deref(),
    ]
    .into_iter()
    .flatten()
    {
        require_file(p)?;
    }
    if cfg.beta_sweep.is_none() && cfg.model_out.is_none() {
        return Err(Error::Config("no output path (--model-out)".into()));
    }

    let scheme = cfg.scheme()?;
    let train_sents = load_corpus(train_path, &scheme)?;
    if train_sents.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dev_sents = match &cfg.dev_path {
        Some(p) => load_corpus(p, &scheme)?,
        None => Vec::new(),
    };
    let pretrained = cfg.embeddings_path.as_deref().map(read).transpose()?;
    let build = |tc: &TrainConfig| {
        Model::build(
            &train_sents,
            scheme.clone(),
            tc.clone(),
            cfg.representation,
            cfg.bigrams,
            pretrained.as_deref(),
        )
    };

    if let Some(betas) = &cfg.beta_sweep {
        let points = beta_sweep(&train_sents, &dev_sents, &cfg.train, betas, build)?;
        let _ = write!(out, "{}", sweep_table(&points));
        return Ok(EXIT_OK);
    }

    let mut model = build(&cfg.train)?;
    let train_enc = model.encode_all(&train_sents)?;
    let dev_enc = model.encode_all(&dev_sents)?;
    let outcome = train(
        &train_enc,
        &dev_enc,
        &model.scheme,
        &cfg.train,
        model.params.clone(),
    )?;
    model.params = outcome.params.clone();

    let model_out = cfg.model_out.as_deref().expect("checked above");
    let log_path = cfg.log_path.clone().unwrap_or_else(|| {
        let mut name = model_out.as_os_str().to_os_string();
        name.push(".log");
        PathBuf::from(name)
    });
    save_model(&model, model_out)?;
    write_atomic(&log_path, outcome.log_text().as_bytes())?;
    let _ = writeln!(
        err,
        "best epoch {} of {}",
        outcome.best_epoch, cfg.train.epochs
    );

    if !dev_sents.is_empty() {
        let report = evaluate(&dev_sents, &model.predict(&dev_sents)?, &model.scheme, None)?;
        let _ = write!(out, "dev\n{}", report.to_table());
    }
    if let Some(test_path) = &cfg.test_path {
        let test_sents = load_corpus(test_path, &model.scheme)?;
        let vocab = entity_surfaces(&train_sents, &model.scheme)?;
        let report = evaluate(
            &test_sents,
            &model.predict(&test_sents)?,
            &model.scheme,
            Some(&vocab),
        )?;
        let _ = write!(out, "test\n{}", report.to_table());
    }
    Ok(EXIT_OK)
}

fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Result<i32> {
    let model = load_model(&a.model)?;
    if let Some(types) = &a.types {
        model.check_scheme(&scheme_from(Some(&parse_list(types)))?)?;
    }
    let sentences: Vec<Sentence> = match (&a.input, &a.segmented) {
        (Some(p), _) => load_corpus(p, &model.scheme)?
            .into_iter()
            .map(|s| Sentence::unlabeled(s.tokens))
            .collect(),
        (None, Some(p)) => parse_segmented(&read(p)?)
            .iter()
            .map(|words| apply_positional_tags(words).map(Sentence::unlabeled))
            .collect::<Result<_>>()?,
        (None, None) => return Err(Error::Config("no input (--input or --segmented)".into())),
    };
    let predicted = model.predict(&sentences)?;
    let text = write_conll(
        sentences
            .iter()
            .zip(&predicted)
            .map(|(s, p)| (s.tokens.as_slice(), p.as_slice())),
        &model.scheme,
    );
    match &a.output {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => {
            let _ = out.write_all(text.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let requested = a.types.as_deref().map(parse_list);
    let (scheme, gold, predicted) = match (&a.model, &a.pred) {
        (Some(model_path), _) => {
            let model = load_model(model_path)?;
            if let Some(types) = &requested {
                model.check_scheme(&scheme_from(Some(types))?)?;
            }
            let gold = load_corpus(&a.gold, &model.scheme)?;
            let predicted = model.predict(&gold)?;
            (model.scheme, gold, predicted)
        }
        (None, Some(pred_path)) => {
            let scheme = scheme_from(requested.as_deref())?;
            let gold = load_corpus(&a.gold, &scheme)?;
            let pred = load_corpus(pred_path, &scheme)?;
            if pred.len() != gold.len() {
                return Err(Error::LengthMismatch {
                    expected: gold.len(),
                    found: pred.len(),
                });
            }
            let predicted = pred
                .into_iter()
                .map(|s| s.gold_labels.ok_or(Error::MissingGold))
                .collect::<Result<Vec<_>>>()?;
            (scheme, gold, predicted)
        }
        (None, None) => return Err(Error::Config("either --model or --pred is required".into())),
    };
    let vocab: Option<HashSet<String>> = match &a.train {
        Some(p) => Some(entity_surfaces(&load_corpus(p, &scheme)?, &scheme)?),
        None => None,
    };
    let report: EvalReport = evaluate(&gold, &predicted, &scheme, vocab.as_ref())?;
    let _ = write!(
        out,
        "{}",
        if a.tsv {
            report.to_tsv()
        } else {
            report.to_table()
        }
    );
    Ok(EXIT_OK)
}

fn cmd_gradcheck(a: GradcheckArgs, out: &mut dyn Write) -> Result<i32> {
    let config = GradcheckConfig {
        seed: a.seed,
        instances: a.instances,
        corrupt: a.corrupt,
        ..GradcheckConfig::default()
    };
    let report = gradcheck(&config)?;
    let _ = writeln!(out, "{report}");
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_and_overrides() {
        let mut cfg = CliConfig::default();
        cfg.apply_file(
            "# comment\nepochs = 3\nbeam_k=4 # trailing\n\nmode = segfeat\nbigrams = off\n",
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 3);
        assert_eq!(cfg.train.beam_k, 4);
        assert_eq!(cfg.representation, Representation::SegFeatures);
        assert!(!cfg.bigrams);
        cfg.set("epochs", "7").unwrap();
        assert_eq!(cfg.train.epochs, 7);
        cfg.set("beta-sweep", "0, 0.1,0.2").unwrap();
        assert_eq!(cfg.beta_sweep, Some(vec![0.0, 0.1, 0.2]));
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut cfg = CliConfig::default();
        let e = cfg.apply_file("epoch = 3\n").unwrap_err();
        assert!(e.to_string().contains("unknown key `epoch`"), "{e}");
        assert!(cfg.apply_file("epochs 3\n").is_err());
        assert!(cfg.set("bigrams", "yes").is_err());
        assert!(cfg.set("trigger", "f1").is_err());
    }

    #[test]
    fn defaults() {
        let cfg = CliConfig::default();
        assert_eq!(cfg.train, TrainConfig::default());
        assert_eq!(cfg.scheme().unwrap().len(), 17);
    }
}
