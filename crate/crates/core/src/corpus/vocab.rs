use std::collections::HashMap;

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub const UNK_SYMBOL: &str = "<unk>";
pub const PAD_SYMBOL: &str = "<pad>";

/// Dense string → index map. Index 0 is always the unknown symbol and
/// index 1 padding; the rest follow first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::from_items([UNK_SYMBOL, PAD_SYMBOL])
    }
}

impl Vocab {
    /// Keeps every item seen at least `min_count` times (min_count 0 acts as 1).
    pub fn build<I, S>(items: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut order: Vec<String> = Vec::new();
        for item in items {
            let item = item.as_ref();
            match counts.get_mut(item) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(item.to_string(), 1);
                    order.push(item.to_string());
                }
            }
        }
        let mut vocab = Vocab::default();
        for item in order {
            if counts[&item] >= min_count.max(1) {
                vocab.insert(&item);
            }
        }
        vocab
    }

    /// Rebuilds a vocabulary from its full item list (including the two
    /// reserved symbols), e.g. when loading a model.
    pub fn from_items<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab {
            items: Vec::new(),
            index: HashMap::new(),
        };
        for item in items {
            vocab.insert(item.as_ref());
        }
        vocab
    }

    fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        self.items.push(item.to_string());
        self.index.insert(item.to_string(), self.items.len() - 1);
        self.items.len() - 1
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    /// Index of `item`, or [`UNK`].
    pub fn id(&self, item: &str) -> usize {
        self.get(item).unwrap_or(UNK)
    }

    pub fn item(&self, idx: usize) -> &str {
        &self.items[idx]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}
