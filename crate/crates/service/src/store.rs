//! In-memory registry of tasks, compiled plan spaces and sessions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use planspace_core::{CompileOptions, LengthBound, NavSession, PlanSpace, PlanningTask, ReasoningError};
use tokio::sync::Semaphore;
use uuid::Uuid;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub compile: CompileOptions,
    /// Compilations allowed to run at the same time.
    pub max_concurrent_compiles: usize,
    /// Sessions untouched for this long are dropped.
    pub session_idle: Duration,
    /// Plans sampled into each snapshot.
    pub sample_k: usize,
    /// Upper limit for `n` in sampling requests.
    pub max_samples: usize,
    /// Allowed CORS origin; any origin when unset.
    pub allowed_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            compile: CompileOptions::default(),
            max_concurrent_compiles: 2,
            session_idle: Duration::from_secs(3600),
            sample_k: 3,
            max_samples: 10_000,
            allowed_origin: None,
        }
    }
}

#[derive(Debug)]
pub struct SessionSlot {
    pub session: NavSession,
    pub last_access: Instant,
}

/// Tasks are keyed by their content digest and plan spaces by
/// `<digest>-<ℓ>`, so uploading a task twice or requesting the same bound
/// again reuses the compiled form.
#[derive(Debug)]
pub struct SessionStore {
    pub config: ServiceConfig,
    tasks: RwLock<HashMap<String, Arc<PlanningTask>>>,
    spaces: RwLock<HashMap<String, Arc<PlanSpace>>>,
    sessions: RwLock<HashMap<Uuid, Arc<Mutex<SessionSlot>>>>,
    compile_jobs: Semaphore,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("{0}")]
    BadBound(String),
    #[error(transparent)]
    Reasoning(#[from] ReasoningError),
}

pub fn space_id(task_id: &str, bound: usize) -> String {
    format!("{task_id}-{bound}")
}

impl SessionStore {
    pub fn new(config: ServiceConfig) -> Self {
        let jobs = config.max_concurrent_compiles.max(1);
        Self {
            config,
            tasks: RwLock::default(),
            spaces: RwLock::default(),
            sessions: RwLock::default(),
            compile_jobs: Semaphore::new(jobs),
        }
    }

    pub fn add_task(&self, task: PlanningTask) -> String {
        let id = task.digest();
        self.tasks
            .write()
            .expect("task map lock")
            .entry(id.clone())
            .or_insert_with(|| Arc::new(task));
        id
    }

    pub fn task(&self, id: &str) -> Option<Arc<PlanningTask>> {
        self.tasks.read().expect("task map lock").get(id).cloned()
    }

    pub fn space(&self, id: &str) -> Option<Arc<PlanSpace>> {
        self.spaces.read().expect("space map lock").get(id).cloned()
    }

    /// Returns the plan space of `task_id` at `bound`, compiling it on a
    /// blocking thread if it is not cached yet.
    pub async fn get_or_build_space(
        &self,
        task_id: &str,
        bound: usize,
    ) -> Result<(String, Arc<PlanSpace>), StoreError> {
        let id = space_id(task_id, bound);
        if let Some(ps) = self.space(&id) {
            return Ok((id, ps));
        }
        let task = self
            .task(task_id)
            .ok_or_else(|| StoreError::UnknownTask(task_id.to_string()))?;
        let b = LengthBound::new(&task, bound).map_err(|e| StoreError::BadBound(e.to_string()))?;
        let _permit = self.compile_jobs.acquire().await.expect("semaphore is never closed");
        if let Some(ps) = self.space(&id) {
            return Ok((id, ps));
        }
        let options = self.config.compile.clone();
        let built = tokio::task::spawn_blocking(move || PlanSpace::build(task, b, &options))
            .await
            .expect("compile job panicked")?;
        let ps = self
            .spaces
            .write()
            .expect("space map lock")
            .entry(id.clone())
            .or_insert_with(|| Arc::new(built))
            .clone();
        Ok((id, ps))
    }

    pub fn insert_session(&self, session: NavSession) -> Uuid {
        self.evict_idle();
        let id = session.id();
        let slot = SessionSlot {
            session,
            last_access: Instant::now(),
        };
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id, Arc::new(Mutex::new(slot)));
        id
    }

    pub fn session(&self, id: Uuid) -> Option<Arc<Mutex<SessionSlot>>> {
        self.sessions.read().expect("session map lock").get(&id).cloned()
    }

    pub fn num_sessions(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    /// Drops sessions idle for longer than the configured limit. Sessions
    /// currently locked by a request are in use and kept.
    pub fn evict_idle(&self) {
        let limit = self.config.session_idle;
        self.sessions
            .write()
            .expect("session map lock")
            .retain(|_, slot| match slot.try_lock() {
                Ok(s) => s.last_access.elapsed() <= limit,
                Err(_) => true,
            });
    }
}
