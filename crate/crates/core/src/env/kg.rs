//! In-memory triple store with head-entity adjacency.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::EnvError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

/// Knowledge graph keyed by entity handle (e.g. a Wikidata id). Every handle
/// that appears in a triple has a display label; it defaults to the handle
/// itself.
#[derive(Clone, Debug, Default)]
pub struct KgStore {
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    by_head: HashMap<String, Vec<usize>>,
    labels: BTreeMap<String, String>,
}

impl KgStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a triple; returns false for a duplicate.
    pub fn insert(&mut self, head: &str, relation: &str, tail: &str) -> bool {
        let t = Triple {
            head: head.to_owned(),
            relation: relation.to_owned(),
            tail: tail.to_owned(),
        };
        if self.seen.contains(&t) {
            return false;
        }
        for h in [head, tail] {
            self.labels.entry(h.to_owned()).or_insert_with(|| h.to_owned());
        }
        self.by_head.entry(t.head.clone()).or_default().push(self.triples.len());
        self.seen.insert(t.clone());
        self.triples.push(t);
        true
    }

    pub fn set_label(&mut self, handle: &str, label: &str) {
        self.labels.insert(handle.to_owned(), label.to_owned());
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains_entity(&self, handle: &str) -> bool {
        self.labels.contains_key(handle)
    }

    pub fn has_outgoing(&self, handle: &str) -> bool {
        self.by_head.contains_key(handle)
    }

    pub fn label<'a>(&'a self, handle: &'a str) -> &'a str {
        self.labels.get(handle).map(String::as_str).unwrap_or(handle)
    }

    /// Finds a handle by exact handle or exact label match.
    pub fn resolve(&self, handle_or_label: &str) -> Option<&str> {
        if let Some((k, _)) = self.labels.get_key_value(handle_or_label) {
            return Some(k.as_str());
        }
        self.labels
            .iter()
            .find(|(_, l)| l.as_str() == handle_or_label)
            .map(|(h, _)| h.as_str())
    }

    /// All triples whose head is `entity`, in insertion order.
    pub fn neighbors(&self, entity: &str) -> Result<Vec<&Triple>, EnvError> {
        if !self.contains_entity(entity) {
            return Err(EnvError::UnknownEntity(entity.to_owned()));
        }
        Ok(self
            .by_head
            .get(entity)
            .map(|ix| ix.iter().map(|&i| &self.triples[i]).collect())
            .unwrap_or_default())
    }

    /// `"head, relation, tail"` with labels substituted for handles.
    pub fn render(&self, t: &Triple) -> String {
        format!("{}, {}, {}", self.label(&t.head), t.relation, self.label(&t.tail))
    }

    /// Reads tab-separated `head  relation  tail` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn read_tsv<R: BufRead>(&mut self, reader: R) -> Result<usize, EnvError> {
        let mut added = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(EnvError::Parse(format!(
                    "triple line {}: expected 3 tab-separated columns, got {}",
                    lineno + 1,
                    cols.len()
                )));
            }
            if self.insert(cols[0].trim(), cols[1].trim(), cols[2].trim()) {
                added += 1;
            }
        }
        Ok(added)
    }

    /// Reads tab-separated `handle  label` lines.
    pub fn read_labels<R: BufRead>(&mut self, reader: R) -> Result<usize, EnvError> {
        let mut n = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (h, l) = line.split_once('\t').ok_or_else(|| {
                EnvError::Parse(format!("label line {}: expected handle<TAB>label", lineno + 1))
            })?;
            self.set_label(h.trim(), l.trim());
            n += 1;
        }
        Ok(n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dedups_and_defaults_labels() {
        let mut kg = KgStore::new();
        assert!(kg.insert("Q1", "mother", "Q2"));
        assert!(!kg.insert("Q1", "mother", "Q2"));
        assert_eq!(kg.len(), 1);
        assert_eq!(kg.label("Q2"), "Q2");
        kg.set_label("Q2", "Małgorzata Braunek");
        assert_eq!(kg.render(&kg.triples()[0]), "Q1, mother, Małgorzata Braunek");
        assert_eq!(kg.resolve("Małgorzata Braunek"), Some("Q2"));
    }

    #[test]
    fn neighbor_edge_cases() {
        let mut kg = KgStore::new();
        kg.insert("a", "r", "b");
        assert!(kg.neighbors("b").unwrap().is_empty());
        assert!(matches!(kg.neighbors("zzz"), Err(EnvError::UnknownEntity(_))));
    }

    #[test]
    fn tsv_rejects_bad_rows() {
        let mut kg = KgStore::new();
        let err = kg.read_tsv("a\tb\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EnvError::Parse(_)));
        assert_eq!(kg.read_tsv("# c\na\tr\tb\n\na\tr\tb\n".as_bytes()).unwrap(), 1);
    }

    proptest! {
        #[test]
        fn neighbors_equal_head_filter(edges in prop::collection::vec((0u8..5, 0u8..3, 0u8..5), 0..30), probe in 0u8..5) {
            let mut kg = KgStore::new();
            let mut raw = Vec::new();
            for (h, r, t) in &edges {
                let tr = (format!("e{h}"), format!("r{r}"), format!("e{t}"));
                if !raw.contains(&tr) { raw.push(tr.clone()); }
                kg.insert(&tr.0, &tr.1, &tr.2);
            }
            let probe = format!("e{probe}");
            let expected: Vec<_> = raw.iter().filter(|t| t.0 == probe).cloned().collect();
            match kg.neighbors(&probe) {
                Ok(got) => {
                    let got: Vec<_> = got.iter().map(|t| (t.head.clone(), t.relation.clone(), t.tail.clone())).collect();
                    prop_assert_eq!(got, expected);
                }
                Err(_) => prop_assert!(raw.iter().all(|t| t.0 != probe && t.2 != probe)),
            }
        }
    }
}
