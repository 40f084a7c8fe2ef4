//! In-memory (subject, predicate, object) store with wildcard pattern queries.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }
}

/// `None` positions match anything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Pattern<'a> {
    pub subject: Option<&'a str>,
    pub predicate: Option<&'a str>,
    pub object: Option<&'a str>,
}

impl Pattern<'_> {
    pub fn matches(&self, t: &Triple) -> bool {
        self.subject.is_none_or(|s| s == t.subject)
            && self.predicate.is_none_or(|p| p == t.predicate)
            && self.object.is_none_or(|o| o == t.object)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleStore {
    triples: BTreeSet<Triple>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the triple was already stored.
    pub fn insert(&mut self, triple: Triple) -> bool {
        self.triples.insert(triple)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Matching triples in sorted order.
    pub fn query(&self, pattern: &Pattern<'_>) -> Vec<Triple> {
        self.triples.iter().filter(|t| pattern.matches(t)).cloned().collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.triples).expect("triples serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        Ok(Self {
            triples: serde_json::from_str(text)?,
        })
    }
}

impl Extend<Triple> for TripleStore {
    fn extend<I: IntoIterator<Item = Triple>>(&mut self, iter: I) {
        self.triples.extend(iter);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn store() -> TripleStore {
        let mut s = TripleStore::new();
        s.insert(Triple::new("rec:a", "derived-from", "model:classifier"));
        s.insert(Triple::new("rec:a", "derived-from", "doc:x"));
        s.insert(Triple::new("project:p", "has-document", "doc:x"));
        s
    }

    #[test]
    fn empty_store_matches_nothing() {
        assert!(TripleStore::new().query(&Pattern::default()).is_empty());
    }

    #[test]
    fn exact_pattern_returns_that_triple() {
        let s = store();
        let got = s.query(&Pattern {
            subject: Some("rec:a"),
            predicate: Some("derived-from"),
            object: Some("doc:x"),
        });
        assert_eq!(got, vec![Triple::new("rec:a", "derived-from", "doc:x")]);
    }

    #[test]
    fn wildcards_and_duplicates() {
        let mut s = store();
        assert!(!s.insert(Triple::new("rec:a", "derived-from", "doc:x")));
        assert_eq!(s.len(), 3);
        let by_pred = s.query(&Pattern {
            predicate: Some("derived-from"),
            ..Default::default()
        });
        assert_eq!(by_pred.len(), 2);
        let by_obj = s.query(&Pattern {
            object: Some("doc:x"),
            ..Default::default()
        });
        assert_eq!(by_obj.len(), 2);
    }

    #[test]
    fn json_round_trip() {
        let s = store();
        assert_eq!(TripleStore::from_json(&s.to_json()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn query_equals_filter(
            triples in prop::collection::vec(("[ab]", "[pq]", "[xy]"), 0..20),
            s in prop::option::of("[ab]"),
            p in prop::option::of("[pq]"),
        ) {
            let mut store = TripleStore::new();
            for (a, b, c) in &triples {
                store.insert(Triple::new(a.as_str(), b.as_str(), c.as_str()));
            }
            let pattern = Pattern { subject: s.as_deref(), predicate: p.as_deref(), object: None };
            let mut want: Vec<Triple> = triples
                .iter()
                .map(|(a, b, c)| Triple::new(a.as_str(), b.as_str(), c.as_str()))
                .filter(|t| s.as_ref().is_none_or(|x| *x == t.subject) && p.as_ref().is_none_or(|x| *x == t.predicate))
                .collect();
            want.sort();
            want.dedup();
            prop_assert_eq!(store.query(&pattern), want);
        }
    }
}
