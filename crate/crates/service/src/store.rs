//! Projects, the knowledge store and the event journal behind them.
//!
//! Writes to one project are serialized by that project's lock; different
//! projects proceed in parallel. Reads clone a snapshot under the lock. The
//! journal is append-only JSONL, one [`Event`] per line, and replaying it
//! rebuilds every project and the knowledge store.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use autoeng::{CodeDocument, HardwareConfig};

use crate::assistant::{AssistantError, Decision, Event, Project, ProjectState, Question, Recommendation};
use crate::knowledge::{Pattern, Triple, TripleStore};
use crate::models::Models;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error(transparent)]
    Assistant(#[from] AssistantError),
    #[error("journal: {0}")]
    Journal(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Journal(e.to_string())
    }
}

/// What a new project starts from.
#[derive(Debug, Clone, Default)]
pub struct NewProject {
    pub project_id: Option<String>,
    pub documents: Vec<CodeDocument>,
    pub hardware: Option<HardwareConfig>,
    pub attributes: BTreeMap<String, String>,
}

/// Everything a client sees of one project.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: ProjectState,
    pub questions: Vec<Question>,
    pub recommendations: Vec<Recommendation>,
}

pub struct Store {
    models: Arc<Models>,
    projects: RwLock<BTreeMap<String, Arc<Mutex<Project>>>>,
    knowledge: RwLock<TripleStore>,
    journal: Mutex<Option<File>>,
    journal_path: Option<PathBuf>,
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Store {
    /// A store without persistence.
    pub fn in_memory(models: Arc<Models>) -> Self {
        Self {
            models,
            projects: RwLock::new(BTreeMap::new()),
            knowledge: RwLock::new(TripleStore::new()),
            journal: Mutex::new(None),
            journal_path: None,
        }
    }

    /// Replays `path` if it exists and appends new events to it.
    pub fn open(models: Arc<Models>, path: &Path) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(models);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            let mut n = 0;
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: Event = serde_json::from_str(&line)
                    .map_err(|e| StoreError::Journal(format!("line {}: {e}", i + 1)))?;
                store
                    .apply(&event)
                    .map_err(|e| StoreError::Journal(format!("line {}: {e}", i + 1)))?;
                n += 1;
            }
            log::info!("replayed {n} events from {}", path.display());
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        store.journal = Mutex::new(Some(OpenOptions::new().create(true).append(true).open(path)?));
        store.journal_path = Some(path.to_path_buf());
        Ok(store)
    }

    pub fn models(&self) -> &Models {
        &self.models
    }

    pub fn journal_path(&self) -> Option<&Path> {
        self.journal_path.as_deref()
    }

    /// Updates in-memory state; used by replay and after journaling.
    fn apply(&self, event: &Event) -> Result<(), AssistantError> {
        let triples = match event {
            Event::Created { state } => {
                let mut projects = self.projects.write().unwrap_or_else(|e| e.into_inner());
                if projects.contains_key(&state.project_id) {
                    return Err(AssistantError::ProjectExists(state.project_id.clone()));
                }
                projects.insert(state.project_id.clone(), Arc::new(Mutex::new(Project::new(state.clone()))));
                Project::creation_triples(state, self.models.taxonomy(state.hardware.level))
            }
            other => {
                let project = self.project(other.project_id())?;
                let mut p = lock(&project);
                let tax = self.models.taxonomy(p.state.hardware.level);
                p.apply(other, tax)?
            }
        };
        self.knowledge.write().unwrap_or_else(|e| e.into_inner()).extend(triples);
        Ok(())
    }

    fn journal(&self, event: &Event) -> Result<(), StoreError> {
        let mut guard = lock(&self.journal);
        if let Some(file) = guard.as_mut() {
            let mut line = serde_json::to_string(event).map_err(|e| StoreError::Journal(e.to_string()))?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
        }
        Ok(())
    }

    fn project(&self, id: &str) -> Result<Arc<Mutex<Project>>, AssistantError> {
        self.projects
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| AssistantError::UnknownProject(id.to_string()))
    }

    /// Journals and applies events for a project whose lock is held.
    fn commit(&self, project: &mut Project, events: &[Event]) -> Result<(), StoreError> {
        for event in events {
            self.journal(event)?;
            let triples = project.apply(event, self.models.taxonomy(project.state.hardware.level))?;
            self.knowledge.write().unwrap_or_else(|e| e.into_inner()).extend(triples);
        }
        Ok(())
    }

    pub fn create_project(&self, new: NewProject) -> Result<Snapshot, StoreError> {
        let mut seen = std::collections::BTreeSet::new();
        for doc in &new.documents {
            doc.validate().map_err(AssistantError::Invalid)?;
            if !seen.insert(doc.id.as_str()) {
                return Err(AssistantError::Invalid(format!("duplicate document id {:?}", doc.id)).into());
            }
        }
        let level = new.hardware.map_or_else(|| self.models.default_level(), |h| h.level);
        let hardware = new.hardware.unwrap_or_else(|| HardwareConfig::empty(level));
        let state = {
            // the write lock makes id allocation and insertion atomic
            let mut projects = self.projects.write().unwrap_or_else(|e| e.into_inner());
            let id = match new.project_id {
                Some(id) if id.is_empty() || id.contains('/') => {
                    return Err(AssistantError::Invalid(format!("bad project id {id:?}")).into())
                }
                Some(id) => id,
                None => (projects.len() + 1..)
                    .map(|n| format!("p{n:04}"))
                    .find(|id| !projects.contains_key(id))
                    .expect("free id"),
            };
            if projects.contains_key(&id) {
                return Err(AssistantError::ProjectExists(id).into());
            }
            let state = ProjectState {
                project_id: id.clone(),
                documents: new.documents,
                hardware,
                attributes: new.attributes,
                revision: 0,
            };
            self.journal(&Event::Created { state: state.clone() })?;
            projects.insert(id, Arc::new(Mutex::new(Project::new(state.clone()))));
            state
        };
        let triples = Project::creation_triples(&state, self.models.taxonomy(level));
        self.knowledge.write().unwrap_or_else(|e| e.into_inner()).extend(triples);
        self.snapshot(&state.project_id)
    }

    pub fn project_ids(&self) -> Vec<String> {
        self.projects.read().unwrap_or_else(|e| e.into_inner()).keys().cloned().collect()
    }

    pub fn snapshot(&self, id: &str) -> Result<Snapshot, StoreError> {
        let project = self.project(id)?;
        let p = lock(&project);
        Ok(Snapshot {
            state: p.state.clone(),
            questions: p.questions.clone(),
            recommendations: p.recommendations.clone(),
        })
    }

    /// Runs an analysis pass. Returns the recommendations it added and the
    /// pending questions.
    pub fn analyze(&self, id: &str) -> Result<(Vec<Recommendation>, Vec<Question>), StoreError> {
        let project = self.project(id)?;
        let mut p = lock(&project);
        let events = p.plan_analysis(&self.models)?;
        self.commit(&mut p, &events)?;
        let added = events
            .into_iter()
            .filter_map(|e| match e {
                Event::Proposed { recommendation, .. } => Some(recommendation),
                _ => None,
            })
            .collect();
        Ok((added, p.pending_questions()))
    }

    /// Re-analysis after a mutation. Without models there is nothing to
    /// analyze, which is not an error for the mutation itself.
    fn reanalyze(&self, p: &mut Project) -> Result<(), StoreError> {
        match p.plan_analysis(&self.models) {
            Ok(events) => self.commit(p, &events),
            Err(AssistantError::ModelsMissing(missing)) => {
                log::warn!("skipping re-analysis of {}: missing {}", p.id(), missing.join(", "));
                Ok(())
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn decide(
        &self,
        id: &str,
        rec_id: &str,
        decision: Decision,
        component: Option<&str>,
    ) -> Result<Snapshot, StoreError> {
        let project = self.project(id)?;
        {
            let mut p = lock(&project);
            let event = p.plan_decision(rec_id, decision, component)?;
            self.commit(&mut p, &[event])?;
            if decision == Decision::Accept {
                self.reanalyze(&mut p)?;
            }
        }
        self.snapshot(id)
    }

    pub fn answer(&self, id: &str, question_id: &str, value: &str) -> Result<Snapshot, StoreError> {
        let project = self.project(id)?;
        {
            let mut p = lock(&project);
            let event = p.plan_answer(question_id, value)?;
            self.commit(&mut p, &[event])?;
            self.reanalyze(&mut p)?;
        }
        self.snapshot(id)
    }

    pub fn knowledge(&self, pattern: &Pattern<'_>) -> Vec<Triple> {
        self.knowledge.read().unwrap_or_else(|e| e.into_inner()).query(pattern)
    }
}
