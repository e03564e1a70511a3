//! Two-column CoNLL-style files: `<token>\t<label>` per line, blank line
//! between sentences. Unlabeled files carry only the token column.

use std::fmt::Write as _;

use super::scheme::{repair_bio, TagScheme};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
    pub gold_labels: Option<Vec<usize>>,
}

impl Sentence {
    pub fn unlabeled(tokens: Vec<String>) -> Self {
        Sentence {
            tokens,
            gold_labels: None,
        }
    }

    pub fn labeled(tokens: Vec<String>, labels: Vec<usize>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::LengthMismatch {
                expected: tokens.len(),
                found: labels.len(),
            });
        }
        Ok(Sentence {
            tokens,
            gold_labels: Some(labels),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gold(&self) -> Result<&[usize]> {
        self.gold_labels.as_deref().ok_or(Error::MissingGold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCorpus {
    pub sentences: Vec<Sentence>,
    /// Number of `I-X` labels rewritten to `B-X` during BIO repair.
    pub repairs: usize,
}

/// Parses a CoNLL-style document. The first token line fixes whether the
/// file is labeled (two columns) or unlabeled (one column).
pub fn parse_conll(text: &str, scheme: &TagScheme) -> Result<ParsedCorpus> {
    let mut sentences = Vec::new();
    let mut repairs = 0;
    let mut columns: Option<usize> = None;
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();

    let mut flush = |tokens: &mut Vec<String>, labels: &mut Vec<usize>, labeled: bool| {
        if tokens.is_empty() {
            return;
        }
        let toks = std::mem::take(tokens);
        let sentence = if labeled {
            let mut l = std::mem::take(labels);
            repairs += repair_bio(&mut l, scheme);
            Sentence {
                tokens: toks,
                gold_labels: Some(l),
            }
        } else {
            Sentence::unlabeled(toks)
        };
        sentences.push(sentence);
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut tokens, &mut labels, columns == Some(2));
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let expected = *columns.get_or_insert(fields.len());
        if fields.len() != expected || expected > 2 {
            return Err(Error::ColumnMismatch {
                line: line_no,
                expected: expected.min(2),
                found: fields.len(),
            });
        }
        tokens.push(fields[0].to_string());
        if expected == 2 {
            let label = fields[1].trim();
            let idx = scheme
                .label_index(label)
                .ok_or_else(|| Error::UnknownLabel {
                    line: line_no,
                    label: label.to_string(),
                })?;
            labels.push(idx);
        }
    }
    flush(&mut tokens, &mut labels, columns == Some(2));
    Ok(ParsedCorpus { sentences, repairs })
}

/// Renders `token\tlabel` lines with a blank line after each sentence.
pub fn write_conll<'a, I>(sentences: I, scheme: &TagScheme) -> String
where
    I: IntoIterator<Item = (&'a [String], &'a [usize])>,
{
    let mut out = String::new();
    for (tokens, labels) in sentences {
        for (tok, &l) in tokens.iter().zip(labels) {
            let _ = writeln!(out, "{tok}\t{}", scheme.label_name(l));
        }
        out.push('\n');
    }
    out
}

/// One sentence per line, words separated by spaces.
pub fn parse_segmented(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
        .filter(|words| !words.is_empty())
        .collect()
}
