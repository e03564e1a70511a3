//! Segmentation-derived token forms: positional characters (`北#B`) and
//! character bigram feature templates.

use crate::{Error, Result};

pub const BOUNDARY: &str = "</s>";
pub const POSITION_SEPARATOR: char = '#';

/// Position of a character inside its word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PositionTag {
    Begin,
    Inside,
    End,
    Single,
}

impl PositionTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionTag::Begin => "B",
            PositionTag::Inside => "I",
            PositionTag::End => "E",
            PositionTag::Single => "S",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "B" => Some(PositionTag::Begin),
            "I" => Some(PositionTag::Inside),
            "E" => Some(PositionTag::End),
            "S" => Some(PositionTag::Single),
            _ => None,
        }
    }
}

/// Turns segmented words into `<char>#<P>` tokens, P ∈ {B, I, E, S}.
pub fn apply_positional_tags<S: AsRef<str>>(words: &[S]) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for word in words {
        let chars: Vec<char> = word.as_ref().chars().collect();
        let n = chars.len();
        if n == 0 {
            return Err(Error::EmptyWord);
        }
        for (i, c) in chars.into_iter().enumerate() {
            let tag = match (i, n) {
                (_, 1) => PositionTag::Single,
                (0, _) => PositionTag::Begin,
                (i, n) if i == n - 1 => PositionTag::End,
                _ => PositionTag::Inside,
            };
            out.push(format!("{c}{POSITION_SEPARATOR}{}", tag.as_str()));
        }
    }
    Ok(out)
}

/// Splits `北#B` into (`北`, Some(Begin)). Tokens without a valid suffix
/// come back unchanged with no tag.
pub fn split_positional(token: &str) -> (&str, Option<PositionTag>) {
    match token.rsplit_once(POSITION_SEPARATOR) {
        Some((base, tag)) if !base.is_empty() => match PositionTag::parse(tag) {
            Some(t) => (base, Some(t)),
            None => (token, None),
        },
        _ => (token, None),
    }
}

/// The five bigram templates around position `t`:
/// `C-2C-1, C-1C0, C0C1, C1C2, C-1C1`, with [`BOUNDARY`] past either end.
pub fn extract_bigram_features<S: AsRef<str>>(tokens: &[S], t: usize) -> [String; 5] {
    let at = |offset: isize| -> &str {
        let i = t as isize + offset;
        if i < 0 || i as usize >= tokens.len() {
            BOUNDARY
        } else {
            tokens[i as usize].as_ref()
        }
    };
    [
        format!("{}{}", at(-2), at(-1)),
        format!("{}{}", at(-1), at(0)),
        format!("{}{}", at(0), at(1)),
        format!("{}{}", at(1), at(2)),
        format!("{}{}", at(-1), at(1)),
    ]
}
