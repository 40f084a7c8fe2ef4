//! Exact cosine k-nearest-neighbour search over document embeddings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::DocVector;
use crate::model_io::{Matrix, ModelFile, ModelIoError, Persist};

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("zero vector for `{0}`")]
    ZeroVector(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("k must be >= 1")]
    InvalidK,
    #[error("index is empty")]
    EmptyIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub score: f64,
}

/// What to search for.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    /// A stored document; it is excluded from its own results.
    Id(&'a str),
    Vector(&'a DocVector),
}

/// Stored rows are L2-normalized, so a dot product is the cosine.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchIndex {
    ids: Vec<String>,
    rows: Vec<f64>,
    dim: usize,
    positions: HashMap<String, usize>,
}

pub fn build_index<I, S>(entries: I) -> Result<SearchIndex, SearchError>
where
    I: IntoIterator<Item = (S, DocVector)>,
    S: Into<String>,
{
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut positions = HashMap::new();
    let mut dim = None;
    for (id, v) in entries {
        let id: String = id.into();
        let d = *dim.get_or_insert(v.dim());
        if v.dim() != d {
            return Err(SearchError::DimensionMismatch {
                expected: d,
                got: v.dim(),
            });
        }
        let n = v.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(SearchError::ZeroVector(id));
        }
        if positions.insert(id.clone(), ids.len()).is_some() {
            return Err(SearchError::DuplicateId(id));
        }
        rows.extend(v.0.iter().map(|x| x / n));
        ids.push(id);
    }
    Ok(SearchIndex {
        ids,
        rows,
        dim: dim.unwrap_or(0),
        positions,
    })
}

impl SearchIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.positions.contains_key(id)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    /// Unit-norm stored vector of `id`.
    pub fn vector(&self, id: &str) -> Option<DocVector> {
        self.positions.get(id).map(|&i| DocVector(self.row(i).to_vec()))
    }

    /// Top `k` neighbours by cosine, best first, ties by id ascending.
    pub fn query_knn(&self, query: Query<'_>, k: usize) -> Result<Vec<Neighbor>, SearchError> {
        if k == 0 {
            return Err(SearchError::InvalidK);
        }
        let (q, skip): (Vec<f64>, Option<usize>) = match query {
            Query::Id(id) => {
                let &i = self
                    .positions
                    .get(id)
                    .ok_or_else(|| SearchError::UnknownId(id.to_string()))?;
                (self.row(i).to_vec(), Some(i))
            }
            Query::Vector(v) => {
                if self.is_empty() {
                    return Err(SearchError::EmptyIndex);
                }
                if v.dim() != self.dim {
                    return Err(SearchError::DimensionMismatch {
                        expected: self.dim,
                        got: v.dim(),
                    });
                }
                let n = v.norm();
                if n == 0.0 || !n.is_finite() {
                    return Err(SearchError::ZeroVector("<query>".into()));
                }
                (v.0.iter().map(|x| x / n).collect(), None)
            }
        };
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .filter(|&i| Some(i) != skip)
            .map(|i| {
                let s: f64 = self.row(i).iter().zip(&q).map(|(a, b)| a * b).sum();
                (s.clamp(-1.0, 1.0), i)
            })
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| {
            b.0.total_cmp(&a.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1]))
        };
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .map(|(score, i)| Neighbor {
                id: self.ids[i].clone(),
                score,
            })
            .collect())
    }
}

pub fn query_knn(index: &SearchIndex, query: Query<'_>, k: usize) -> Result<Vec<Neighbor>, SearchError> {
    index.query_knn(query, k)
}

/// JSON array of `{id, score}` objects.
pub fn neighbors_to_json(neighbors: &[Neighbor]) -> String {
    serde_json::to_string_pretty(neighbors).expect("neighbors serialize")
}

#[derive(Serialize, Deserialize)]
struct StoredIndex {
    ids: Vec<String>,
    dim: usize,
}

/// Rows are stored already normalized and loaded back as-is.
impl Persist for SearchIndex {
    const KIND: &'static str = "search-index";

    fn to_model_file(&self) -> ModelFile {
        let header = StoredIndex {
            ids: self.ids.clone(),
            dim: self.dim,
        };
        ModelFile::new(Self::KIND, serde_json::to_value(header).expect("index header serializes"))
            .with_matrix(Matrix::f64("rows", self.ids.len(), self.dim, self.rows.clone()))
    }

    fn from_model_file(mut file: ModelFile) -> Result<Self, ModelIoError> {
        let h: StoredIndex = file.params()?;
        let rows = file.take_matrix("rows")?.into_f64(h.ids.len(), h.dim)?;
        let mut positions = HashMap::new();
        for (i, id) in h.ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(ModelIoError::InvalidParams(format!("duplicate id {id:?}")));
            }
        }
        Ok(Self {
            ids: h.ids,
            rows,
            dim: h.dim,
            positions,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DocVector {
        DocVector(x.to_vec())
    }

    fn small() -> SearchIndex {
        build_index([
            ("a", v(&[1.0, 0.0])),
            ("b", v(&[0.0, 2.0])),
            ("c", v(&[3.0, 3.0])),
        ])
        .unwrap()
    }

    #[test]
    fn build_errors() {
        assert_eq!(small().len(), 3);
        assert_eq!(
            build_index([("a", v(&[1.0])), ("z", v(&[0.0]))]).unwrap_err(),
            SearchError::ZeroVector("z".into())
        );
        assert_eq!(
            build_index([("a", v(&[1.0])), ("a", v(&[2.0]))]).unwrap_err(),
            SearchError::DuplicateId("a".into())
        );
        assert!(matches!(
            build_index([("a", v(&[1.0])), ("b", v(&[2.0, 1.0]))]),
            Err(SearchError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn rows_are_unit_norm() {
        let idx = small();
        for id in idx.ids() {
            assert!((idx.vector(id).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn query_by_id_excludes_self_and_caps_k() {
        let idx = small();
        let r = idx.query_knn(Query::Id("a"), 10).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].id, "c");
        assert!((r[0].score - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(r[1].id, "b");
        assert_eq!(idx.query_knn(Query::Id("nope"), 1).unwrap_err(), SearchError::UnknownId("nope".into()));
        assert_eq!(idx.query_knn(Query::Id("a"), 0).unwrap_err(), SearchError::InvalidK);
        assert!(matches!(
            idx.query_knn(Query::Vector(&v(&[0.0, 0.0])), 1),
            Err(SearchError::ZeroVector(_))
        ));
    }

    #[test]
    fn ties_break_by_id() {
        let idx = build_index([("z", v(&[1.0, 0.0])), ("m", v(&[2.0, 0.0])), ("q", v(&[0.0, 1.0]))]).unwrap();
        let r = idx.query_knn(Query::Vector(&v(&[1.0, 0.0])), 3).unwrap();
        let ids: Vec<&str> = r.iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["m", "z", "q"]);
    }

    #[test]
    fn json_output() {
        let r = small().query_knn(Query::Id("b"), 1).unwrap();
        let parsed: Vec<Neighbor> = serde_json::from_str(&neighbors_to_json(&r)).unwrap();
        assert_eq!(parsed, r);
    }

    fn index_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 2..40)
            .prop_filter("nonzero rows", |rows| rows.iter().all(|r| r.iter().any(|x| x.abs() > 1e-3)))
    }

    proptest! {
        #[test]
        fn results_match_brute_force(rows in index_strategy(), k in 1usize..8, scale in 0.01f64..100.0) {
            let entries: Vec<(String, DocVector)> =
                rows.iter().enumerate().map(|(i, r)| (format!("d{i:03}"), DocVector(r.clone()))).collect();
            let idx = build_index(entries.clone()).unwrap();
            let q = DocVector(rows[0].iter().map(|x| x * 0.5 + 0.1).collect());
            prop_assume!(q.norm() > 1e-6);
            let got = idx.query_knn(Query::Vector(&q), k).unwrap();
            let mut oracle: Vec<(f64, String)> =
                entries.iter().map(|(id, v)| (crate::util::cosine(&v.0, &q.0), id.clone())).collect();
            oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            prop_assert_eq!(got.len(), k.min(rows.len()));
            for (n, (s, _)) in got.iter().zip(&oracle) {
                prop_assert!((n.score - s).abs() < 1e-12);
            }
            for w in got.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            let scaled = DocVector(q.0.iter().map(|x| x * scale).collect());
            let again = idx.query_knn(Query::Vector(&scaled), k).unwrap();
            let a: Vec<&str> = got.iter().map(|n| n.id.as_str()).collect();
            let b: Vec<&str> = again.iter().map(|n| n.id.as_str()).collect();
            prop_assert_eq!(a, b);

            let by_id = idx.query_knn(Query::Id("d000"), rows.len()).unwrap();
            prop_assert!(by_id.iter().all(|n| n.id != "d000"));
            prop_assert_eq!(by_id.len(), rows.len() - 1);
        }
    }

    #[test]
    fn saved_index_answers_the_same() {
        let index = build_index(vec![
            ("a", DocVector(vec![1.0, 0.2])),
            ("b", DocVector(vec![0.3, 1.0])),
            ("c", DocVector(vec![-1.0, 0.5])),
        ])
        .unwrap();
        let back = SearchIndex::from_bytes(&index.to_bytes()).unwrap();
        assert_eq!(back, index);
        assert_eq!(
            back.query_knn(Query::Id("a"), 2).unwrap(),
            index.query_knn(Query::Id("a"), 2).unwrap()
        );
    }
}
