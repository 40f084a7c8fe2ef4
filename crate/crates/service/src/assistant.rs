//! Project state, questions, recommendations and the events that change
//! them.
//!
//! Every change is an [`Event`]. Commands validate against the current
//! [`Project`] and return events; [`Project::apply`] is the only place state
//! changes, so replaying a journal of events rebuilds the same projects.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use autoeng::hwrec::{recommend_top_k, RandomRecommender, Recommender};
use autoeng::pipeline::{HwrecModel, PipelineError};
use autoeng::search::{Neighbor, SearchError};
use autoeng::{CodeDocument, HardwareConfig};

use crate::knowledge::Triple;
use crate::models::Models;

/// Completions offered per hardware recommendation.
pub const HARDWARE_TOP_K: usize = 3;
/// Neighbours listed per similar-code recommendation.
pub const SIMILAR_TOP_K: usize = 3;

/// Attributes a project should have, with the question asked when one is
/// missing.
pub const REQUIRED_ATTRIBUTES: &[(&str, &str)] = &[(
    "safety_integrity_level",
    "What is the safety integrity level of this project?",
)];

#[derive(Debug, Error)]
pub enum AssistantError {
    #[error("unknown project {0:?}")]
    UnknownProject(String),
    #[error("project {0:?} already exists")]
    ProjectExists(String),
    #[error("unknown recommendation {0:?}")]
    UnknownRecommendation(String),
    #[error("recommendation {0:?} was already decided")]
    AlreadyDecided(String),
    #[error("unknown question {0:?}")]
    UnknownQuestion(String),
    #[error("question {0:?} was already answered")]
    AlreadyAnswered(String),
    #[error("models not loaded: {}", .0.join(", "))]
    ModelsMissing(Vec<&'static str>),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectState {
    pub project_id: String,
    pub documents: Vec<CodeDocument>,
    pub hardware: HardwareConfig,
    pub attributes: BTreeMap<String, String>,
    pub revision: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionStatus {
    Pending,
    Answered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub attribute_key: String,
    pub text: String,
    pub status: QuestionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommendationKind {
    Classification,
    SimilarCode,
    Hardware,
}

impl RecommendationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecommendationKind::Classification => "classification",
            RecommendationKind::SimilarCode => "similar_code",
            RecommendationKind::Hardware => "hardware",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecommendationStatus {
    Proposed,
    Accepted,
    Rejected,
}

impl FromStr for RecommendationStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" => Ok(Self::Proposed),
            "accepted" => Ok(Self::Accepted),
            "rejected" => Ok(Self::Rejected),
            other => Err(format!("unknown status {other:?} (proposed, accepted, rejected)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub category: String,
    pub slot: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Payload {
    Classification {
        document_id: String,
        label: String,
        confidence: f64,
    },
    SimilarCode {
        document_id: String,
        neighbors: Vec<Neighbor>,
    },
    Hardware {
        components: Vec<ComponentScore>,
    },
}

impl Payload {
    pub fn kind(&self) -> RecommendationKind {
        match self {
            Payload::Classification { .. } => RecommendationKind::Classification,
            Payload::SimilarCode { .. } => RecommendationKind::SimilarCode,
            Payload::Hardware { .. } => RecommendationKind::Hardware,
        }
    }

    /// SHA-256 over the canonical JSON of the kind and the payload's
    /// identity. Scores are left out so a retrained model proposing the same
    /// thing with a slightly different confidence is still recognised.
    pub fn dedup_key(&self) -> String {
        let identity = match self {
            Payload::Classification { document_id, label, .. } => json!({"document_id": document_id, "label": label}),
            Payload::SimilarCode { document_id, neighbors } => json!({
                "document_id": document_id,
                "neighbors": neighbors.iter().map(|n| n.id.as_str()).collect::<Vec<_>>(),
            }),
            Payload::Hardware { components } => {
                json!({"components": components.iter().map(|c| c.category.as_str()).collect::<Vec<_>>()})
            }
        };
        let canonical = json!({"kind": self.kind().as_str(), "identity": identity}).to_string();
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub id: String,
    pub kind: RecommendationKind,
    pub payload: Payload,
    pub status: RecommendationStatus,
    pub revision_created: u64,
    pub dedup_key: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Created {
        state: ProjectState,
    },
    Proposed {
        project_id: String,
        recommendation: Recommendation,
    },
    Asked {
        project_id: String,
        question: Question,
    },
    Decided {
        project_id: String,
        recommendation_id: String,
        decision: Decision,
        /// Hardware category added on acceptance.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        component: Option<String>,
    },
    Answered {
        project_id: String,
        question_id: String,
        value: String,
    },
}

impl Event {
    pub fn project_id(&self) -> &str {
        match self {
            Event::Created { state } => &state.project_id,
            Event::Proposed { project_id, .. }
            | Event::Asked { project_id, .. }
            | Event::Decided { project_id, .. }
            | Event::Answered { project_id, .. } => project_id,
        }
    }
}

/// Recommendations of one analysis pass, before ids are assigned.
///
/// Deterministic in `(state, models)`: inference uses fixed seeds and the
/// random hardware baseline starts a fresh permutation stream every pass.
pub fn analyze_project(state: &ProjectState, models: &Models) -> Result<Vec<Payload>, AssistantError> {
    let missing = models.missing();
    let (Some(classifier), Some(embedding), Some(hwrec)) = (&models.classifier, &models.embedding, &models.hwrec)
    else {
        return Err(AssistantError::ModelsMissing(missing));
    };
    let mut out = Vec::new();
    for doc in state.documents.iter().filter(|d| d.label.is_none()) {
        let p = classifier.predict_document(doc)?;
        out.push(Payload::Classification {
            document_id: doc.id.clone(),
            label: p.label,
            confidence: p.confidence,
        });
    }
    for doc in &state.documents {
        let neighbors = match embedding.search_document(doc, SIMILAR_TOP_K) {
            Ok(n) => n,
            // nothing in the document overlaps the embedding vocabulary
            Err(PipelineError::Search(SearchError::ZeroVector(_))) => continue,
            Err(e) => return Err(e.into()),
        };
        if !neighbors.is_empty() {
            out.push(Payload::SimilarCode {
                document_id: doc.id.clone(),
                neighbors,
            });
        }
    }
    let ranked = complete_hardware(hwrec, &state.hardware, HARDWARE_TOP_K)?;
    if !ranked.is_empty() {
        let tax = models.taxonomy(state.hardware.level);
        out.push(Payload::Hardware {
            components: ranked
                .into_iter()
                .map(|(slot, score)| ComponentScore {
                    category: tax.categories()[slot].clone(),
                    slot,
                    score,
                })
                .collect(),
        });
    }
    Ok(out)
}

/// Top `k` absent components. The random baseline gets a fresh stream per
/// call so the answer depends only on its inputs.
pub fn complete_hardware(
    model: &HwrecModel,
    partial: &HardwareConfig,
    k: usize,
) -> Result<Vec<(usize, f64)>, AssistantError> {
    if model.level() != partial.level {
        return Err(AssistantError::Invalid(format!(
            "hardware is {} but the model completes {} configurations",
            partial.level,
            model.level()
        )));
    }
    if k == 0 {
        return Err(AssistantError::Invalid("k must be >= 1".into()));
    }
    Ok(match model {
        HwrecModel::Random(r) => recommend_top_k(
            &RandomRecommender::new(r.level, r.seed)
                .score(partial)
                .map_err(PipelineError::from)?,
            k,
        ),
        other => other.complete(partial, k)?,
    })
}

/// One project with its question and recommendation history.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub state: ProjectState,
    pub questions: Vec<Question>,
    pub recommendations: Vec<Recommendation>,
    rejected: BTreeSet<String>,
}

fn project_node(id: &str) -> String {
    format!("project:{id}")
}

fn doc_node(project: &str, doc: &str) -> String {
    format!("doc:{project}/{doc}")
}

fn rec_node(id: &str) -> String {
    format!("rec:{id}")
}

impl Project {
    pub fn new(state: ProjectState) -> Self {
        Self {
            state,
            questions: Vec::new(),
            recommendations: Vec::new(),
            rejected: BTreeSet::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.state.project_id
    }

    pub fn recommendation(&self, id: &str) -> Option<&Recommendation> {
        self.recommendations.iter().find(|r| r.id == id)
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.questions.iter().find(|q| q.id == id)
    }

    pub fn pending_questions(&self) -> Vec<Question> {
        self.questions
            .iter()
            .filter(|q| q.status == QuestionStatus::Pending)
            .cloned()
            .collect()
    }

    /// Whether `key` was rejected before in this project.
    pub fn is_rejected(&self, key: &str) -> bool {
        self.rejected.contains(key)
    }

    /// Events of one analysis pass: new recommendations, skipping payloads
    /// that were rejected, are still awaiting a decision, or were already
    /// proposed at this revision; plus a question for every missing
    /// required attribute without one pending.
    pub fn plan_analysis(&self, models: &Models) -> Result<Vec<Event>, AssistantError> {
        let proposals = analyze_project(&self.state, models)?;
        let revision = self.state.revision;
        let mut seen: BTreeSet<String> = self
            .recommendations
            .iter()
            .filter(|r| r.status == RecommendationStatus::Proposed || r.revision_created == revision)
            .map(|r| r.dedup_key.clone())
            .collect();
        seen.extend(self.rejected.iter().cloned());
        let mut events = Vec::new();
        let mut next = self.recommendations.len();
        for payload in proposals {
            let key = payload.dedup_key();
            if !seen.insert(key.clone()) {
                continue;
            }
            next += 1;
            events.push(Event::Proposed {
                project_id: self.id().to_string(),
                recommendation: Recommendation {
                    id: format!("{}-r{next}", self.id()),
                    kind: payload.kind(),
                    payload,
                    status: RecommendationStatus::Proposed,
                    revision_created: revision,
                    dedup_key: key,
                },
            });
        }
        let mut next_q = self.questions.len();
        for (key, text) in REQUIRED_ATTRIBUTES {
            let asked = self
                .questions
                .iter()
                .any(|q| q.attribute_key == *key && q.status == QuestionStatus::Pending);
            if self.state.attributes.contains_key(*key) || asked {
                continue;
            }
            next_q += 1;
            events.push(Event::Asked {
                project_id: self.id().to_string(),
                question: Question {
                    id: format!("{}-q{next_q}", self.id()),
                    attribute_key: key.to_string(),
                    text: text.to_string(),
                    status: QuestionStatus::Pending,
                },
            });
        }
        Ok(events)
    }

    /// Validates a decision. Accepting a hardware recommendation adds
    /// `component` when given (it must be one of the listed categories) and
    /// the best-ranked one otherwise.
    pub fn plan_decision(
        &self,
        rec_id: &str,
        decision: Decision,
        component: Option<&str>,
    ) -> Result<Event, AssistantError> {
        let rec = self
            .recommendation(rec_id)
            .ok_or_else(|| AssistantError::UnknownRecommendation(rec_id.to_string()))?;
        if rec.status != RecommendationStatus::Proposed {
            return Err(AssistantError::AlreadyDecided(rec_id.to_string()));
        }
        let component = match (&rec.payload, decision) {
            (Payload::Hardware { components }, Decision::Accept) => {
                let chosen = match component {
                    Some(name) => components.iter().find(|c| c.category == name).ok_or_else(|| {
                        AssistantError::Invalid(format!("{name:?} is not offered by {rec_id}"))
                    })?,
                    None => &components[0],
                };
                Some(chosen.category.clone())
            }
            (_, _) if component.is_some() => {
                return Err(AssistantError::Invalid(
                    "component is only accepted with an accepted hardware recommendation".into(),
                ))
            }
            _ => None,
        };
        Ok(Event::Decided {
            project_id: self.id().to_string(),
            recommendation_id: rec_id.to_string(),
            decision,
            component,
        })
    }

    pub fn plan_answer(&self, question_id: &str, value: &str) -> Result<Event, AssistantError> {
        let q = self
            .question(question_id)
            .ok_or_else(|| AssistantError::UnknownQuestion(question_id.to_string()))?;
        if q.status == QuestionStatus::Answered {
            return Err(AssistantError::AlreadyAnswered(question_id.to_string()));
        }
        if value.trim().is_empty() {
            return Err(AssistantError::Invalid("answer must not be empty".into()));
        }
        Ok(Event::Answered {
            project_id: self.id().to_string(),
            question_id: question_id.to_string(),
            value: value.to_string(),
        })
    }

    /// Triples describing a freshly created project.
    pub fn creation_triples(state: &ProjectState, tax: &autoeng::Taxonomy) -> Vec<Triple> {
        let p = project_node(&state.project_id);
        let mut out = Vec::new();
        for doc in &state.documents {
            let d = doc_node(&state.project_id, &doc.id);
            out.push(Triple::new(&p, "has-document", &d));
            if let Some(label) = &doc.label {
                out.push(Triple::new(&d, "has-label", label));
            }
        }
        for name in state.hardware.category_names(tax) {
            out.push(Triple::new(&p, "has-component", name));
        }
        for (k, v) in &state.attributes {
            out.push(Triple::new(&p, k, v));
        }
        out
    }

    /// Applies an event that does not create the project. Returns the
    /// knowledge triples it produces.
    pub fn apply(&mut self, event: &Event, tax: &autoeng::Taxonomy) -> Result<Vec<Triple>, AssistantError> {
        let pid = self.id().to_string();
        let p = project_node(&pid);
        match event {
            Event::Created { .. } => Err(AssistantError::ProjectExists(pid)),
            Event::Proposed { recommendation, .. } => {
                let r = rec_node(&recommendation.id);
                let mut out = vec![Triple::new(&p, "has-recommendation", &r)];
                let model = match recommendation.kind {
                    RecommendationKind::Classification => "model:classifier",
                    RecommendationKind::SimilarCode => "model:embedding",
                    RecommendationKind::Hardware => "model:hwrec",
                };
                out.push(Triple::new(&r, "derived-from", model));
                match &recommendation.payload {
                    Payload::Classification { document_id, label, .. } => {
                        out.push(Triple::new(&r, "derived-from", doc_node(&pid, document_id)));
                        out.push(Triple::new(&r, "suggests-label", label));
                    }
                    Payload::SimilarCode { document_id, neighbors } => {
                        out.push(Triple::new(&r, "derived-from", doc_node(&pid, document_id)));
                        for n in neighbors {
                            out.push(Triple::new(&r, "suggests-neighbor", format!("doc:{}", n.id)));
                        }
                    }
                    Payload::Hardware { components } => {
                        out.push(Triple::new(&r, "derived-from", format!("{p}/hardware")));
                        for c in components {
                            out.push(Triple::new(&r, "suggests-component", &c.category));
                        }
                    }
                }
                self.recommendations.push(recommendation.clone());
                Ok(out)
            }
            Event::Asked { question, .. } => {
                self.questions.push(question.clone());
                Ok(vec![Triple::new(&p, "asks", &question.attribute_key)])
            }
            Event::Decided {
                recommendation_id,
                decision,
                component,
                ..
            } => {
                let idx = self
                    .recommendations
                    .iter()
                    .position(|r| r.id == *recommendation_id)
                    .ok_or_else(|| AssistantError::UnknownRecommendation(recommendation_id.clone()))?;
                let r = rec_node(recommendation_id);
                let mut out = Vec::new();
                match decision {
                    Decision::Reject => {
                        let rec = &mut self.recommendations[idx];
                        rec.status = RecommendationStatus::Rejected;
                        self.rejected.insert(rec.dedup_key.clone());
                        out.push(Triple::new(&r, "has-status", "rejected"));
                    }
                    Decision::Accept => {
                        self.recommendations[idx].status = RecommendationStatus::Accepted;
                        out.push(Triple::new(&r, "has-status", "accepted"));
                        let payload = self.recommendations[idx].payload.clone();
                        out.extend(self.mutate(&payload, component.as_deref(), tax)?);
                        self.state.revision += 1;
                    }
                }
                Ok(out)
            }
            Event::Answered { question_id, value, .. } => {
                let q = self
                    .questions
                    .iter_mut()
                    .find(|q| q.id == *question_id)
                    .ok_or_else(|| AssistantError::UnknownQuestion(question_id.clone()))?;
                q.status = QuestionStatus::Answered;
                let key = q.attribute_key.clone();
                self.state.attributes.insert(key.clone(), value.clone());
                self.state.revision += 1;
                Ok(vec![Triple::new(&p, key, value)])
            }
        }
    }

    /// The single change an accepted recommendation makes.
    fn mutate(
        &mut self,
        payload: &Payload,
        component: Option<&str>,
        tax: &autoeng::Taxonomy,
    ) -> Result<Vec<Triple>, AssistantError> {
        let pid = self.id().to_string();
        match payload {
            Payload::Classification { document_id, label, .. } => {
                let doc = self
                    .state
                    .documents
                    .iter_mut()
                    .find(|d| d.id == *document_id)
                    .ok_or_else(|| AssistantError::Invalid(format!("no document {document_id:?}")))?;
                doc.label = Some(label.clone());
                Ok(vec![Triple::new(doc_node(&pid, document_id), "has-label", label)])
            }
            Payload::SimilarCode { document_id, neighbors } => {
                let ids: Vec<&str> = neighbors.iter().map(|n| n.id.as_str()).collect();
                self.state
                    .attributes
                    .insert(format!("similar_code.{document_id}"), ids.join(","));
                let d = doc_node(&pid, document_id);
                Ok(ids.iter().map(|n| Triple::new(&d, "similar-to", format!("doc:{n}"))).collect())
            }
            Payload::Hardware { .. } => {
                let name = component.ok_or_else(|| AssistantError::Invalid("no component chosen".into()))?;
                let slot = tax
                    .category_index(name)
                    .ok_or_else(|| AssistantError::Invalid(format!("unknown category {name:?}")))?;
                self.state.hardware.set(slot, true);
                Ok(vec![Triple::new(project_node(&pid), "has-component", name)])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use autoeng::corpus::{Dialect, SourceFile};
    use autoeng::hwrec::RandomRecommender;
    use autoeng::pipeline::{train_classifier, train_embedding, ClassifierConfig, EmbedConfig, EmbedderKind};
    use autoeng::{Level, Taxonomy};

    fn doc(id: &str, text: &str, label: Option<&str>) -> CodeDocument {
        CodeDocument {
            id: id.into(),
            dialect: Dialect::Arduino,
            sources: vec![SourceFile {
                name: "a.ino".into(),
                text: text.into(),
            }],
            title: None,
            tags: vec![],
            description: None,
            label: label.map(str::to_string),
            raw_components: vec![],
        }
    }

    fn models() -> Models {
        let corpus = autoeng::corpus::generate_synthetic_corpus(&autoeng::corpus::SyntheticCorpusSpec {
            n_classes: 2,
            docs_per_class: 10,
            vocab_per_class: 10,
            shared_vocab: 10,
            doc_len: 30,
            class_token_rate: 0.6,
            seed: 1,
        });
        let mut cc = ClassifierConfig::default();
        cc.embed.embedder = EmbedderKind::Tfidf;
        let classifier = train_classifier(&corpus, &cc).unwrap().model;
        let ec = EmbedConfig {
            embedder: EmbedderKind::Tfidf,
            ..Default::default()
        };
        let embedding = train_embedding(&corpus, &ec, 0).unwrap();
        Models::new(
            Some(classifier),
            Some(embedding),
            Some(HwrecModel::Random(RandomRecommender::new(Level::L1, 5))),
        )
    }

    fn project() -> Project {
        Project::new(ProjectState {
            project_id: "p1".into(),
            documents: vec![
                doc("a", "void setup() { k00w001(); }\nvoid loop() { k00w002(); }", None),
                doc("b", "void setup() { k01w001(); }\nvoid loop() {}", Some("class_01")),
            ],
            hardware: HardwareConfig::from_slots(Level::L1, &[1]),
            attributes: BTreeMap::new(),
            revision: 0,
        })
    }

    fn run(p: &mut Project, events: &[Event]) {
        let tax = Taxonomy::builtin(Level::L1);
        for e in events {
            p.apply(e, &tax).unwrap();
        }
    }

    #[test]
    fn analysis_emits_each_kind_and_the_sil_question() {
        let m = models();
        let mut p = project();
        let events = p.plan_analysis(&m).unwrap();
        run(&mut p, &events);
        let kinds: Vec<_> = p.recommendations.iter().map(|r| r.kind).collect();
        assert_eq!(kinds.iter().filter(|k| **k == RecommendationKind::Classification).count(), 1);
        assert_eq!(kinds.iter().filter(|k| **k == RecommendationKind::SimilarCode).count(), 2);
        assert_eq!(kinds.iter().filter(|k| **k == RecommendationKind::Hardware).count(), 1);
        let pending = p.pending_questions();
        assert_eq!(pending.len(), 1);
        assert_eq!(pending[0].attribute_key, "safety_integrity_level");
        assert_eq!(pending[0].text, "What is the safety integrity level of this project?");
        // unchanged revision: nothing new
        assert!(p.plan_analysis(&m).unwrap().is_empty());
    }

    #[test]
    fn analysis_is_deterministic() {
        let m = models();
        let p = project();
        assert_eq!(
            analyze_project(&p.state, &m).unwrap(),
            analyze_project(&p.state, &m).unwrap()
        );
    }

    #[test]
    fn missing_models_are_reported() {
        let err = analyze_project(&project().state, &Models::default()).unwrap_err();
        assert!(matches!(err, AssistantError::ModelsMissing(ref v) if v.len() == 3));
    }

    #[test]
    fn accepting_hardware_sets_the_bit_and_bumps_revision() {
        let m = models();
        let mut p = project();
        let events = p.plan_analysis(&m).unwrap();
        run(&mut p, &events);
        let hw = p
            .recommendations
            .iter()
            .find(|r| r.kind == RecommendationKind::Hardware)
            .unwrap()
            .clone();
        let Payload::Hardware { components } = &hw.payload else { unreachable!() };
        let pick = components[1].clone();
        let e = p.plan_decision(&hw.id, Decision::Accept, Some(&pick.category)).unwrap();
        run(&mut p, &[e]);
        assert!(p.state.hardware.get(pick.slot));
        assert_eq!(p.state.revision, 1);
        assert!(matches!(
            p.plan_decision(&hw.id, Decision::Reject, None),
            Err(AssistantError::AlreadyDecided(_))
        ));
        assert!(matches!(
            p.plan_decision("nope", Decision::Accept, None),
            Err(AssistantError::UnknownRecommendation(_))
        ));
    }

    #[test]
    fn accepting_a_label_updates_the_document() {
        let m = models();
        let mut p = project();
        let events = p.plan_analysis(&m).unwrap();
        run(&mut p, &events);
        let rec = p
            .recommendations
            .iter()
            .find(|r| r.kind == RecommendationKind::Classification)
            .unwrap()
            .clone();
        let e = p.plan_decision(&rec.id, Decision::Accept, None).unwrap();
        run(&mut p, &[e]);
        let Payload::Classification { label, .. } = &rec.payload else { unreachable!() };
        assert_eq!(p.state.documents[0].label.as_ref(), Some(label));
        // the document is labeled now, so no new classification
        let again = p.plan_analysis(&m).unwrap();
        assert!(again.iter().all(|e| !matches!(
            e,
            Event::Proposed { recommendation, .. } if recommendation.kind == RecommendationKind::Classification
        )));
    }

    #[test]
    fn rejected_payloads_never_come_back() {
        let m = models();
        let mut p = project();
        let events = p.plan_analysis(&m).unwrap();
        run(&mut p, &events);
        let rec = p.recommendations[0].clone();
        let e = p.plan_decision(&rec.id, Decision::Reject, None).unwrap();
        run(&mut p, &[e]);
        assert_eq!(p.state.revision, 0);
        // move to a later revision by answering the question
        let q = p.pending_questions()[0].clone();
        let e = p.plan_answer(&q.id, "2").unwrap();
        run(&mut p, &[e]);
        assert_eq!(p.state.revision, 1);
        assert_eq!(p.state.attributes["safety_integrity_level"], "2");
        let events = p.plan_analysis(&m).unwrap();
        for e in &events {
            if let Event::Proposed { recommendation, .. } = e {
                assert_ne!(recommendation.dedup_key, rec.dedup_key);
            }
        }
        assert!(matches!(p.plan_answer(&q.id, "3"), Err(AssistantError::AlreadyAnswered(_))));
        assert!(matches!(p.plan_answer("zz", "3"), Err(AssistantError::UnknownQuestion(_))));
    }

    #[test]
    fn dedup_key_ignores_scores() {
        let a = Payload::Classification {
            document_id: "d".into(),
            label: "x".into(),
            confidence: 0.5,
        };
        let b = Payload::Classification {
            document_id: "d".into(),
            label: "x".into(),
            confidence: 0.9,
        };
        let c = Payload::Classification {
            document_id: "d".into(),
            label: "y".into(),
            confidence: 0.5,
        };
        assert_eq!(a.dedup_key(), b.dedup_key());
        assert_ne!(a.dedup_key(), c.dedup_key());
        assert_eq!(a.dedup_key().len(), 64);
    }

    #[test]
    fn payloads_round_trip_through_json() {
        let m = models();
        let p = project();
        for payload in analyze_project(&p.state, &m).unwrap() {
            let back: Payload = serde_json::from_str(&serde_json::to_string(&payload).unwrap()).unwrap();
            assert_eq!(back, payload);
        }
    }
}
