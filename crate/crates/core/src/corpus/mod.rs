//! Corpus ingestion: tag schemes, CoNLL files, segmentation-derived token
//! forms, vocabularies and sentence encoding.

pub mod conll;
pub mod features;
pub mod positional;
pub mod scheme;
pub mod vocab;

pub use conll::{parse_conll, parse_segmented, write_conll, ParsedCorpus, Sentence};
pub use features::{EncodedSentence, Featurizer, Representation};
pub use positional::{
    apply_positional_tags, extract_bigram_features, split_positional, PositionTag,
};
pub use scheme::{
    entities_from_labels, entities_lenient, labels_from_entities, repair_bio, EntitySpan,
    EntityType, MentionKind, Tag, TagScheme,
};
pub use vocab::Vocab;
