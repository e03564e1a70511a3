//! Shared fixtures: a synthetic corpus whose every character maps to exactly
//! one label.

#![allow(dead_code)]

use std::fmt::Write as _;

use mmner::corpus::{apply_positional_tags, parse_conll, Sentence, TagScheme};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TYPES: [&str; 4] = ["PER.NAM", "PER.NOM", "LOC.NAM", "LOC.NOM"];

/// (word, entity type) pairs; `None` marks non-entity filler.
const WORDS: [(&str, Option<&str>); 13] = [
    ("张三", Some("PER.NAM")),
    ("李小明", Some("PER.NAM")),
    ("老师", Some("PER.NOM")),
    ("医生", Some("PER.NOM")),
    ("北京", Some("LOC.NAM")),
    ("上海", Some("LOC.NAM")),
    ("城市", Some("LOC.NOM")),
    ("村庄", Some("LOC.NOM")),
    ("说", None),
    ("去", None),
    ("喜欢", None),
    ("今天", None),
    ("了", None),
];

pub fn scheme() -> TagScheme {
    TagScheme::from_entity_types(&TYPES).unwrap()
}

/// `count` sentences of 2–5 words as labeled CoNLL text with positional
/// tokens (`张#B`).
pub fn synthetic_conll(count: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for _ in 0..count {
        let len = rng.gen_range(2..=5);
        let words: Vec<(&str, Option<&str>)> =
            (0..len).map(|_| *WORDS.choose(&mut rng).unwrap()).collect();
        for (word, ty) in words {
            let tokens = apply_positional_tags(&[word]).unwrap();
            for (i, tok) in tokens.iter().enumerate() {
                let label = match (ty, i) {
                    (None, _) => "O".to_string(),
                    (Some(t), 0) => format!("B-{t}"),
                    (Some(t), _) => format!("I-{t}"),
                };
                let _ = writeln!(out, "{tok}\t{label}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn synthetic(count: usize, seed: u64) -> Vec<Sentence> {
    parse_conll(&synthetic_conll(count, seed), &scheme())
        .unwrap()
        .sentences
}

pub const TYPES_FLAG: &str = "PER.NAM,PER.NOM,LOC.NAM,LOC.NOM";
