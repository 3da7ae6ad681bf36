//! Structural key sets and the syntactic similarity score.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::KeySetError;

/// Set of `(key, nesting level)` pairs found in a JSON document.
///
/// Root keys sit at level 0. Arrays do not add a level: a key inside an
/// object inside an array sits one level below the key holding the array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyNestingSet {
    pub entries: BTreeSet<(String, usize)>,
}

impl KeyNestingSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str, depth: usize) -> bool {
        self.entries.contains(&(key.to_owned(), depth))
    }

    pub fn union_with(&mut self, other: &KeyNestingSet) {
        self.entries.extend(other.entries.iter().cloned());
    }
}

impl FromIterator<(String, usize)> for KeyNestingSet {
    fn from_iter<I: IntoIterator<Item = (String, usize)>>(iter: I) -> Self {
        KeyNestingSet {
            entries: iter.into_iter().collect(),
        }
    }
}

pub fn key_nesting_set(doc: &Value) -> KeyNestingSet {
    let mut set = KeyNestingSet::default();
    collect(doc, 0, &mut set.entries);
    set
}

fn collect(value: &Value, depth: usize, out: &mut BTreeSet<(String, usize)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                out.insert((k.clone(), depth));
                collect(v, depth + 1, out);
            }
        }
        Value::Array(items) => {
            for v in items {
                collect(v, depth, out);
            }
        }
        _ => {}
    }
}

/// Jaccard similarity `|A ∩ B| / |A ∪ B|` against a non-empty reference.
pub fn syntactic_similarity(
    candidate: &KeyNestingSet,
    reference: &KeyNestingSet,
) -> Result<f64, KeySetError> {
    if reference.is_empty() {
        return Err(KeySetError::EmptyReference);
    }
    let inter = candidate.entries.intersection(&reference.entries).count();
    let union = candidate.len() + reference.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Union of the key sets of every document.
pub fn build_reference_keyset<'a, I>(docs: I) -> Result<KeyNestingSet, KeySetError>
where
    I: IntoIterator<Item = &'a Value>,
{
    let mut any = false;
    let mut set = KeyNestingSet::default();
    for doc in docs {
        any = true;
        set.union_with(&key_nesting_set(doc));
    }
    if any {
        Ok(set)
    } else {
        Err(KeySetError::NoDocuments)
    }
}
