//! Maps sentences to embedding indices for one of the two segmentation
//! representations.

use std::fmt;
use std::str::FromStr;

use super::conll::Sentence;
use super::positional::{extract_bigram_features, split_positional};
use super::vocab::Vocab;
use crate::{Error, Result};

/// How word segmentation reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Representation {
    /// Tokens are positional characters (`北#B`) with their own embeddings.
    #[default]
    Positional,
    /// Tokens are bare characters; the position tag is a discrete feature.
    SegFeatures,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::Positional => "positional",
            Representation::SegFeatures => "segfeat",
        })
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positional" => Ok(Representation::Positional),
            "segfeat" => Ok(Representation::SegFeatures),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (positional|segfeat)"
            ))),
        }
    }
}

pub const BIGRAM_SLOTS: usize = 5;

/// Segmentation feature vocabulary: reserved symbols then B, I, E, S.
pub fn segmentation_vocab() -> Vocab {
    Vocab::from_items(["<unk>", "<pad>", "B", "I", "E", "S"])
}

/// A sentence mapped to indices: token ids plus one id per feature slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedSentence {
    pub token_ids: Vec<usize>,
    pub feature_ids: Vec<Vec<usize>>,
    pub gold: Option<Vec<usize>>,
}

impl EncodedSentence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn gold(&self) -> Result<&[usize]> {
        self.gold.as_deref().ok_or(Error::MissingGold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Featurizer {
    pub representation: Representation,
    pub tokens: Vocab,
    /// Present when bigram features are enabled.
    pub bigrams: Option<Vocab>,
}

impl Featurizer {
    pub fn fit(
        sentences: &[Sentence],
        representation: Representation,
        bigrams: bool,
        min_count: usize,
    ) -> Self {
        let tokens = Vocab::build(
            sentences
                .iter()
                .flat_map(|s| s.tokens.iter().map(|t| token_key(representation, t))),
            min_count,
        );
        let bigrams = bigrams.then(|| {
            Vocab::build(
                sentences.iter().flat_map(|s| {
                    let chars = base_chars(&s.tokens);
                    (0..chars.len())
                        .flat_map(|t| extract_bigram_features(&chars, t))
                        .collect::<Vec<_>>()
                }),
                min_count,
            )
        });
        Featurizer {
            representation,
            tokens,
            bigrams,
        }
    }

    /// Feature-table vocab sizes, in table order.
    pub fn feature_table_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::new();
        if let Some(b) = &self.bigrams {
            sizes.push(b.len());
        }
        if self.representation == Representation::SegFeatures {
            sizes.push(segmentation_vocab().len());
        }
        sizes
    }

    /// Table index read by each feature slot.
    pub fn feature_slots(&self) -> Vec<usize> {
        let mut slots = Vec::new();
        if self.bigrams.is_some() {
            slots.extend([0; BIGRAM_SLOTS]);
        }
        if self.representation == Representation::SegFeatures {
            slots.push(usize::from(self.bigrams.is_some()));
        }
        slots
    }

    pub fn encode(&self, sentence: &Sentence) -> EncodedSentence {
        let token_ids = sentence
            .tokens
            .iter()
            .map(|t| self.tokens.id(token_key(self.representation, t)))
            .collect();
        let chars = base_chars(&sentence.tokens);
        let seg = segmentation_vocab();
        let feature_ids = (0..sentence.len())
            .map(|t| {
                let mut ids = Vec::new();
                if let Some(b) = &self.bigrams {
                    ids.extend(extract_bigram_features(&chars, t).iter().map(|f| b.id(f)));
                }
                if self.representation == Representation::SegFeatures {
                    let tag = split_positional(&sentence.tokens[t]).1;
                    ids.push(tag.map_or(super::vocab::UNK, |p| seg.id(p.as_str())));
                }
                ids
            })
            .collect();
        EncodedSentence {
            token_ids,
            feature_ids,
            gold: sentence.gold_labels.clone(),
        }
    }
}

fn token_key(representation: Representation, token: &str) -> &str {
    match representation {
        Representation::Positional => token,
        Representation::SegFeatures => split_positional(token).0,
    }
}

fn base_chars(tokens: &[String]) -> Vec<&str> {
    tokens.iter().map(|t| split_positional(t).0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(tokens: &[&str]) -> Sentence {
        Sentence::unlabeled(tokens.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn positional_mode_keys_full_token() {
        let s = sent(&["北#B", "京#E", "北#S"]);
        let f = Featurizer::fit(
            std::slice::from_ref(&s),
            Representation::Positional,
            false,
            1,
        );
        assert_eq!(f.tokens.len(), 5);
        let e = f.encode(&s);
        assert_eq!(e.token_ids, vec![2, 3, 4]);
        assert!(e.feature_ids.iter().all(Vec::is_empty));
        assert!(f.feature_slots().is_empty());
    }

    #[test]
    fn segfeat_mode_splits_tag() {
        let s = sent(&["北#B", "京#E", "北#S", "x"]);
        let f = Featurizer::fit(
            std::slice::from_ref(&s),
            Representation::SegFeatures,
            true,
            1,
        );
        let e = f.encode(&s);
        assert_eq!(e.token_ids, vec![2, 3, 2, 4]);
        assert_eq!(f.feature_slots(), vec![0, 0, 0, 0, 0, 1]);
        assert_eq!(f.feature_table_sizes()[1], 6);
        let seg: Vec<usize> = e.feature_ids.iter().map(|ids| ids[5]).collect();
        assert_eq!(seg, vec![2, 4, 5, 0]);
        // C0C1 at position 0 is the bigram of bare characters
        let bigrams = f.bigrams.as_ref().unwrap();
        assert_eq!(e.feature_ids[0][2], bigrams.id("北京"));
    }

    #[test]
    fn unseen_tokens_map_to_unk() {
        let f = Featurizer::fit(&[sent(&["a#S"])], Representation::Positional, true, 1);
        let e = f.encode(&sent(&["zz#S"]));
        assert_eq!(e.token_ids, vec![0]);
        assert_eq!(e.feature_ids[0][1], 0);
    }
}
