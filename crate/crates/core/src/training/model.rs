//! A trained tagger (tag scheme, featurizer, config, parameters) and its
//! binary file format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "MMNERMDL"
//! version  u32      1
//! blocks   u32      number of blocks that follow
//! block:
//!   kind   u8       0 = string list, 1 = tensor
//!   name   u32 length + UTF-8 bytes
//!   string list: u64 count, then per item u32 length + UTF-8 bytes
//!   tensor:      u64 rows, u64 cols, u8 trainable, rows·cols f64 (row-major)
//! ```
//!
//! String blocks: `scheme` (outside label first, then every label in index
//! order), `meta` (`key=value` items), `vocab.tokens`, optional
//! `vocab.bigrams`. Tensor blocks use the names of [`ModelParams::tensors`].

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{EncodedSentence, Featurizer, Representation, Sentence, TagScheme, Vocab};
use crate::embeddings::{load_pretrained, EmbeddingTable, InputAssembly};
use crate::network::{BiLstm, LstmParams, ProjectionParams};
use crate::structured::TransitionMatrix;
use crate::tensor::Matrix;
use crate::triggers::{Trigger, TriggerKind};
use crate::{Error, Result};

use super::{ModelParams, TrainConfig};

pub const MAGIC: &[u8; 8] = b"MMNERMDL";
pub const FORMAT_VERSION: u32 = 1;

const STRINGS: u8 = 0;
const TENSOR: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub scheme: TagScheme,
    pub featurizer: Featurizer,
    pub config: TrainConfig,
    pub params: ModelParams,
}

impl Model {
    /// Fits the featurizer on `train` and initializes parameters from
    /// `config.seed`. With `pretrained` (word2vec text), the token table is
    /// loaded from it instead of drawn at random.
    pub fn build(
        train: &[Sentence],
        scheme: TagScheme,
        config: TrainConfig,
        representation: Representation,
        bigrams: bool,
        pretrained: Option<&str>,
    ) -> Result<Model> {
        config.validate()?;
        let featurizer = Featurizer::fit(train, representation, bigrams, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tokens = match pretrained {
            Some(text) => load_pretrained(text, &featurizer.tokens, config.token_dim, &mut rng)?,
            None => EmbeddingTable::random(featurizer.tokens.len(), config.token_dim, &mut rng),
        };
        let features = featurizer
            .feature_table_sizes()
            .into_iter()
            .map(|rows| EmbeddingTable::random(rows, config.feature_dim, &mut rng))
            .collect();
        let input =
            InputAssembly::new(config.window, tokens, features, featurizer.feature_slots())?;
        let params = ModelParams::init(input, config.hidden_dim, scheme.len(), &mut rng);
        Ok(Model {
            scheme,
            featurizer,
            config,
            params,
        })
    }

    pub fn encode(&self, sentence: &Sentence) -> Result<EncodedSentence> {
        if let Some(g) = &sentence.gold_labels {
            if let Some(&bad) = g.iter().find(|&&l| l >= self.scheme.len()) {
                return Err(Error::Dimension(format!(
                    "label index {bad} outside the tag set"
                )));
            }
        }
        Ok(self.featurizer.encode(sentence))
    }

    pub fn encode_all(&self, sentences: &[Sentence]) -> Result<Vec<EncodedSentence>> {
        sentences.iter().map(|s| self.encode(s)).collect()
    }

    /// Viterbi labels for every sentence, in input order.
    pub fn predict(&self, sentences: &[Sentence]) -> Result<Vec<Vec<usize>>> {
        super::predict_all(&self.encode_all(sentences)?, &self.params)
    }

    /// Errors unless `requested` has exactly this model's labels.
    pub fn check_scheme(&self, requested: &TagScheme) -> Result<()> {
        if requested.labels() != self.scheme.labels()
            || requested.outside() != self.scheme.outside()
        {
            return Err(Error::TagsetMismatch {
                model: self.scheme.to_string(),
                requested: requested.to_string(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        let tensors = self.params.tensors();
        let has_bigrams = self.featurizer.bigrams.is_some();
        let blocks = 3 + usize::from(has_bigrams) + tensors.len();
        w.buf.extend_from_slice(MAGIC);
        w.u32(FORMAT_VERSION);
        w.u32(blocks as u32);

        let mut scheme = vec![self.scheme.outside_label().to_string()];
        scheme.extend(self.scheme.labels().iter().cloned());
        w.strings("scheme", &scheme);
        w.strings("meta", &self.meta());
        w.strings("vocab.tokens", self.featurizer.tokens.items());
        if let Some(b) = &self.featurizer.bigrams {
            w.strings("vocab.bigrams", b.items());
        }
        for t in &tensors {
            w.tensor(&t.name, t.rows, t.cols, t.trainable, t.data);
        }
        w.buf
    }

    fn meta(&self) -> Vec<String> {
        let c = &self.config;
        vec![
            format!("representation={}", self.featurizer.representation),
            format!("trigger={}", c.trigger.kind),
            format!("kappa={}", c.trigger.kappa),
            format!("beta={}", c.trigger.beta),
            format!("learning_rate={}", c.learning_rate),
            format!("decay={}", c.decay),
            format!("l2_lambda={}", c.l2_lambda),
            format!("epochs={}", c.epochs),
            format!("beam_k={}", c.beam_k),
            format!("seed={}", c.seed),
            format!("window={}", c.window),
            format!("token_dim={}", c.token_dim),
            format!("feature_dim={}", c.feature_dim),
            format!("hidden_dim={}", c.hidden_dim),
        ]
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(MAGIC.len())? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let count = r.u32()?;
        let mut strings: HashMap<String, Vec<String>> = HashMap::new();
        let mut tensors: HashMap<String, (Matrix, bool)> = HashMap::new();
        for _ in 0..count {
            let kind = r.u8()?;
            let name = r.string()?;
            match kind {
                STRINGS => {
                    let n = r.u64()?;
                    let mut items = Vec::new();
                    for _ in 0..n {
                        items.push(r.string()?);
                    }
                    strings.insert(name, items);
                }
                TENSOR => {
                    let rows = r.u64()? as usize;
                    let cols = r.u64()? as usize;
                    let trainable = r.u8()? != 0;
                    let len = rows
                        .checked_mul(cols)
                        .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.remaining()))
                        .ok_or(Error::Truncated)?;
                    let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<f64>>>()?;
                    tensors.insert(name, (Matrix::from_vec(rows, cols, data), trainable));
                }
                other => {
                    return Err(Error::ShapeMismatch(format!(
                        "unknown block kind {other} for `{name}`"
                    )))
                }
            }
        }
        if r.remaining() != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        assemble(strings, tensors)
    }
}

fn missing(name: &str) -> Error {
    Error::ShapeMismatch(format!("missing block `{name}`"))
}

fn assemble(
    mut strings: HashMap<String, Vec<String>>,
    mut tensors: HashMap<String, (Matrix, bool)>,
) -> Result<Model> {
    let scheme_items = strings.remove("scheme").ok_or_else(|| missing("scheme"))?;
    let (outside, labels) = scheme_items
        .split_first()
        .ok_or_else(|| missing("scheme"))?;
    let scheme = TagScheme::from_labels(labels, outside)?;

    let meta: HashMap<String, String> = strings
        .remove("meta")
        .ok_or_else(|| missing("meta"))?
        .into_iter()
        .filter_map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
        })
        .collect();
    let get = |key: &str| {
        meta.get(key)
            .ok_or_else(|| Error::ShapeMismatch(format!("meta key `{key}` missing")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::ShapeMismatch(format!("meta key `{key}` is not a number")))
    };
    let int = |key: &str| -> Result<usize> {
        get(key)?
            .parse()
            .map_err(|_| Error::ShapeMismatch(format!("meta key `{key}` is not an integer")))
    };
    let kind: TriggerKind = get("trigger")?.parse()?;
    let config = TrainConfig {
        trigger: Trigger::new(kind, num("kappa")?, num("beta")?)?,
        learning_rate: num("learning_rate")?,
        decay: num("decay")?,
        l2_lambda: num("l2_lambda")?,
        epochs: int("epochs")?,
        beam_k: int("beam_k")?,
        seed: get("seed")?
            .parse()
            .map_err(|_| Error::ShapeMismatch("meta key `seed` is not an integer".into()))?,
        window: int("window")?,
        token_dim: int("token_dim")?,
        feature_dim: int("feature_dim")?,
        hidden_dim: int("hidden_dim")?,
    };
    let featurizer = Featurizer {
        representation: get("representation")?.parse()?,
        tokens: Vocab::from_items(
            strings
                .remove("vocab.tokens")
                .ok_or_else(|| missing("vocab.tokens"))?,
        ),
        bigrams: strings.remove("vocab.bigrams").map(Vocab::from_items),
    };

    let mut take = |name: &str| tensors.remove(name).ok_or_else(|| missing(name));
    let table =
        |(m, trainable): (Matrix, bool), rows: usize, name: &str| -> Result<EmbeddingTable> {
            if m.rows() != rows {
                return Err(Error::ShapeMismatch(format!(
                    "`{name}` has {} rows, vocabulary has {rows}",
                    m.rows()
                )));
            }
            Ok(EmbeddingTable {
                vectors: m,
                trainable,
            })
        };
    let tokens = table(
        take("embed.tokens")?,
        featurizer.tokens.len(),
        "embed.tokens",
    )?;
    let mut features = Vec::new();
    for (i, rows) in featurizer.feature_table_sizes().into_iter().enumerate() {
        let name = format!("embed.features.{i}");
        features.push(table(take(&name)?, rows, &name)?);
    }
    let input = InputAssembly::new(config.window, tokens, features, featurizer.feature_slots())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))?;

    let hidden = config.hidden_dim;
    let width = input.width();
    let mut lstm_dir = |dir: &str| -> Result<LstmParams> {
        let (weights, _) = take(&format!("lstm.{dir}.weights"))?;
        let (bias, _) = take(&format!("lstm.{dir}.bias"))?;
        if weights.shape() != (4 * hidden, width + hidden) || bias.as_slice().len() != 4 * hidden {
            return Err(Error::ShapeMismatch(format!(
                "lstm.{dir} is {}×{}, expected {}×{}",
                weights.rows(),
                weights.cols(),
                4 * hidden,
                width + hidden
            )));
        }
        Ok(LstmParams {
            input_dim: width,
            hidden_dim: hidden,
            weights,
            bias: bias.as_slice().to_vec(),
        })
    };
    let lstm = BiLstm {
        forward: lstm_dir("forward")?,
        backward: lstm_dir("backward")?,
    };
    let (weights, _) = take("projection.weights")?;
    let (bias, _) = take("projection.bias")?;
    let (transitions, _) = take("transitions")?;
    let y = scheme.len();
    if weights.shape() != (y, 2 * hidden) || bias.as_slice().len() != y {
        return Err(Error::ShapeMismatch(
            "projection does not match the tag set and hidden size".into(),
        ));
    }
    if transitions.shape() != (y + 1, y) {
        return Err(Error::ShapeMismatch(
            "transition matrix does not match the tag set".into(),
        ));
    }
    if let Some(extra) = tensors.keys().next() {
        return Err(Error::ShapeMismatch(format!("unexpected tensor `{extra}`")));
    }
    let projection = ProjectionParams {
        weights,
        bias: bias.as_slice().to_vec(),
    };
    let params = ModelParams::new(
        input,
        lstm,
        projection,
        TransitionMatrix::from_matrix(transitions),
    );
    Ok(Model {
        scheme,
        featurizer,
        config,
        params,
    })
}

/// Writes to a sibling temporary file and renames it into place, so a failed
/// save never leaves a partial model behind.
pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&model.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Model::from_bytes(&bytes)
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn string(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn strings(&mut self, name: &str, items: &[String]) {
        self.buf.push(STRINGS);
        self.string(name);
        self.u64(items.len() as u64);
        for s in items {
            self.string(s);
        }
    }

    fn tensor(&mut self, name: &str, rows: usize, cols: usize, trainable: bool, data: &[f64]) {
        self.buf.push(TENSOR);
        self.string(name);
        self.u64(rows as u64);
        self.u64(cols as u64);
        self.buf.push(u8::from(trainable));
        for v in data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if n > self.remaining() {
            return Err(Error::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::ShapeMismatch("invalid UTF-8 in string".into()))
    }
}
