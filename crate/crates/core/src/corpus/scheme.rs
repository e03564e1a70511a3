//! BIO tag inventory and conversion between label sequences and entity spans.

use std::collections::HashMap;
use std::fmt;

use crate::{Error, Result};

/// Whether an entity type covers proper names or common-noun references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MentionKind {
    Named,
    Nominal,
}

impl MentionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MentionKind::Named => "named",
            MentionKind::Nominal => "nominal",
        }
    }
}

/// An entity type such as `PER.NAM`: a category plus a mention kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityType {
    pub name: String,
    pub category: String,
    pub kind: MentionKind,
}

impl EntityType {
    /// `PER.NOM` is a nominal `PER`; anything not ending in `.NOM` is named.
    pub fn parse(name: &str) -> Self {
        let (category, kind) = match name.rsplit_once('.') {
            Some((cat, "NOM")) => (cat, MentionKind::Nominal),
            Some((cat, "NAM")) => (cat, MentionKind::Named),
            _ => (name, MentionKind::Named),
        };
        EntityType {
            name: name.to_string(),
            category: category.to_string(),
            kind,
        }
    }
}

/// Decoded meaning of one label index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Outside,
    Begin(usize),
    Inside(usize),
}

pub const DEFAULT_CATEGORIES: [&str; 4] = ["PER", "ORG", "LOC", "GPE"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagScheme {
    labels: Vec<String>,
    tags: Vec<Tag>,
    entity_types: Vec<EntityType>,
    outside: usize,
    index: HashMap<String, usize>,
}

impl Default for TagScheme {
    /// {PER, ORG, LOC, GPE} × {NAM, NOM}.
    fn default() -> Self {
        let names: Vec<String> = DEFAULT_CATEGORIES
            .iter()
            .flat_map(|c| [format!("{c}.NAM"), format!("{c}.NOM")])
            .collect();
        TagScheme::from_entity_types(&names).expect("default scheme is valid")
    }
}

impl TagScheme {
    /// Labels are laid out as `O, B-t0, I-t0, B-t1, I-t1, ...`.
    pub fn from_entity_types<S: AsRef<str>>(types: &[S]) -> Result<Self> {
        let mut labels = vec!["O".to_string()];
        for t in types {
            let t = t.as_ref();
            labels.push(format!("B-{t}"));
            labels.push(format!("I-{t}"));
        }
        Self::from_labels(&labels, "O")
    }

    /// Builds a scheme from an explicit ordered label list. Every label other
    /// than `outside` must be `B-<type>` or `I-<type>`, and each type needs both.
    pub fn from_labels<S: AsRef<str>>(labels: &[S], outside: &str) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|l| l.as_ref().to_string()).collect();
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Scheme(format!("duplicate label `{l}`")));
            }
        }
        let outside_idx = *index
            .get(outside)
            .ok_or_else(|| Error::Scheme(format!("outside label `{outside}` not in label list")))?;

        let mut entity_types: Vec<EntityType> = Vec::new();
        let mut type_index: HashMap<String, usize> = HashMap::new();
        let mut tags = Vec::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if i == outside_idx {
                tags.push(Tag::Outside);
                continue;
            }
            let (prefix, name) = l
                .split_once('-')
                .filter(|(p, n)| (*p == "B" || *p == "I") && !n.is_empty())
                .ok_or_else(|| Error::Scheme(format!("label `{l}` is not B-<type> or I-<type>")))?;
            let t = *type_index.entry(name.to_string()).or_insert_with(|| {
                entity_types.push(EntityType::parse(name));
                entity_types.len() - 1
            });
            tags.push(if prefix == "B" {
                Tag::Begin(t)
            } else {
                Tag::Inside(t)
            });
        }
        for (t, ty) in entity_types.iter().enumerate() {
            let has_b = tags.contains(&Tag::Begin(t));
            let has_i = tags.contains(&Tag::Inside(t));
            if !(has_b && has_i) {
                return Err(Error::Scheme(format!(
                    "type `{}` needs both B- and I- labels",
                    ty.name
                )));
            }
        }
        Ok(TagScheme {
            labels,
            tags,
            entity_types,
            outside: outside_idx,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_name(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn outside(&self) -> usize {
        self.outside
    }

    pub fn outside_label(&self) -> &str {
        &self.labels[self.outside]
    }

    pub fn entity_types(&self) -> &[EntityType] {
        &self.entity_types
    }

    pub fn tag(&self, idx: usize) -> Tag {
        self.tags[idx]
    }

    pub fn begin_label(&self, entity_type: usize) -> usize {
        self.tags
            .iter()
            .position(|&t| t == Tag::Begin(entity_type))
            .expect("type has B label")
    }

    pub fn inside_label(&self, entity_type: usize) -> usize {
        self.tags
            .iter()
            .position(|&t| t == Tag::Inside(entity_type))
            .expect("type has I label")
    }

    /// Is label `cur` allowed to follow `prev` (None = sentence start)?
    pub fn allowed(&self, prev: Option<usize>, cur: usize) -> bool {
        match self.tags[cur] {
            Tag::Inside(t) => matches!(
                prev.map(|p| self.tags[p]),
                Some(Tag::Begin(u)) | Some(Tag::Inside(u)) if u == t
            ),
            _ => true,
        }
    }
}

impl fmt::Display for TagScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.labels.join(","))
    }
}

/// A typed entity covering tokens `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntitySpan {
    pub entity_type: usize,
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(entity_type: usize, start: usize, end: usize) -> Self {
        EntitySpan {
            entity_type,
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// Replaces every `I-X` without a `B-X`/`I-X` predecessor by `B-X`.
/// Returns the number of labels changed.
pub fn repair_bio(labels: &mut [usize], scheme: &TagScheme) -> usize {
    let mut repaired = 0;
    let mut prev = None;
    for l in labels.iter_mut() {
        if !scheme.allowed(prev, *l) {
            if let Tag::Inside(t) = scheme.tag(*l) {
                *l = scheme.begin_label(t);
                repaired += 1;
            }
        }
        prev = Some(*l);
    }
    repaired
}

/// Maximal `B-X (I-X)*` runs become spans. Errors on an `I-X` that does not
/// continue an `X` entity.
pub fn entities_from_labels(labels: &[usize], scheme: &TagScheme) -> Result<Vec<EntitySpan>> {
    let mut spans = Vec::new();
    let mut open: Option<EntitySpan> = None;
    for (pos, &l) in labels.iter().enumerate() {
        if l >= scheme.len() {
            return Err(Error::InvalidBio {
                position: pos,
                reason: format!("label index {l} out of range"),
            });
        }
        match scheme.tag(l) {
            Tag::Outside => spans.extend(open.take()),
            Tag::Begin(t) => {
                spans.extend(open.take());
                open = Some(EntitySpan::new(t, pos, pos + 1));
            }
            Tag::Inside(t) => match open.as_mut() {
                Some(span) if span.entity_type == t => span.end = pos + 1,
                _ => {
                    return Err(Error::InvalidBio {
                        position: pos,
                        reason: format!("`{}` does not continue an entity", scheme.label_name(l)),
                    })
                }
            },
        }
    }
    spans.extend(open);
    Ok(spans)
}

/// Span extraction that reads an orphan `I-X` as `B-X`; equivalent to
/// [`repair_bio`] followed by [`entities_from_labels`].
pub fn entities_lenient(labels: &[usize], scheme: &TagScheme) -> Vec<EntitySpan> {
    let mut repaired = labels.to_vec();
    repair_bio(&mut repaired, scheme);
    entities_from_labels(&repaired, scheme).expect("repaired sequence is valid BIO")
}

pub fn labels_from_entities(
    spans: &[EntitySpan],
    length: usize,
    scheme: &TagScheme,
) -> Result<Vec<usize>> {
    let mut labels = vec![scheme.outside(); length];
    let mut covered = vec![false; length];
    for span in spans {
        if span.start >= span.end || span.end > length {
            return Err(Error::BadSpans(format!(
                "span {}..{} invalid for length {length}",
                span.start, span.end
            )));
        }
        if span.entity_type >= scheme.entity_types().len() {
            return Err(Error::BadSpans(format!(
                "unknown entity type {}",
                span.entity_type
            )));
        }
        if covered[span.start..span.end].iter().any(|&c| c) {
            return Err(Error::BadSpans(format!(
                "span {}..{} overlaps another",
                span.start, span.end
            )));
        }
        covered[span.start..span.end]
            .iter_mut()
            .for_each(|c| *c = true);
        labels[span.start] = scheme.begin_label(span.entity_type);
        for l in &mut labels[span.start + 1..span.end] {
            *l = scheme.inside_label(span.entity_type);
        }
    }
    Ok(labels)
}
