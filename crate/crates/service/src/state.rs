use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard, RwLockWriteGuard};

use switchlens_core::cues::{mine_sequences_for_type, CueSequenceRule};
use switchlens_core::lexicon::LexiconError;
use switchlens_core::pattern::{mine, MiningError};
use switchlens_core::store::StoreError;
use switchlens_core::{AssociationRule, Lexicon, MiningParams, Store, TaskType, Threshold};
use thiserror::Error;

use crate::config::Config;
use crate::error::ApiError;

#[derive(Debug, Error)]
pub enum StartError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read lexicon {path}: {source}")]
    LexiconIo {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

type RuleKey = (TaskType, Threshold, Threshold, String);

/// Mined rules are cached per store watermark; any accepted line invalidates them.
#[derive(Default)]
struct Cache {
    watermark: u64,
    rules: HashMap<RuleKey, Arc<Vec<AssociationRule>>>,
    cues: HashMap<TaskType, Arc<Vec<CueSequenceRule>>>,
}

impl Cache {
    fn sync(&mut self, watermark: u64) {
        if self.watermark != watermark {
            self.rules.clear();
            self.cues.clear();
            self.watermark = watermark;
        }
    }
}

pub struct AppState {
    pub config: Config,
    pub lexicon: Lexicon,
    store: RwLock<Store>,
    cache: Mutex<Cache>,
}

impl AppState {
    pub fn new(config: Config, store: Store, lexicon: Lexicon) -> Self {
        AppState {
            config,
            lexicon,
            store: RwLock::new(store),
            cache: Mutex::default(),
        }
    }

    /// Opens the configured store file and lexicon.
    pub fn open(config: Config) -> Result<Self, StartError> {
        let store = Store::open(&config.store)?.with_offset(config.timezone);
        let lexicon = match &config.lexicon {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| StartError::LexiconIo {
                    path: path.clone(),
                    source,
                })?;
                Lexicon::parse(&text)?
            }
            None => Lexicon::default(),
        };
        Ok(AppState::new(config, store, lexicon))
    }

    pub fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|p| p.into_inner())
    }

    pub fn write(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().unwrap_or_else(|p| p.into_inner())
    }

    fn cache(&self, watermark: u64) -> std::sync::MutexGuard<'_, Cache> {
        let mut c = self.cache.lock().unwrap_or_else(|p| p.into_inner());
        c.sync(watermark);
        c
    }

    /// Disruptiveness rules for `params`; a type without records has none.
    pub fn rules(&self, store: &Store, params: &MiningParams) -> Result<Arc<Vec<AssociationRule>>, ApiError> {
        let key = (
            params.task_type,
            params.min_support,
            params.min_confidence,
            params.discretization.to_string(),
        );
        if let Some(hit) = self.cache(store.watermark()).rules.get(&key) {
            return Ok(hit.clone());
        }
        let rules = match mine(&store.raw_records(), params) {
            Ok(r) => r,
            Err(MiningError::NoRecords(_) | MiningError::EmptyInput) => Vec::new(),
            Err(e) => return Err(ApiError::internal(e.to_string())),
        };
        let rules = Arc::new(rules);
        self.cache(store.watermark()).rules.insert(key, rules.clone());
        Ok(rules)
    }

    /// Rules at the configured thresholds and discretization.
    pub fn default_rules(&self, store: &Store, task_type: TaskType) -> Result<Arc<Vec<AssociationRule>>, ApiError> {
        let params = MiningParams::new(task_type, self.config.min_support, self.config.min_confidence)
            .with_discretization(self.config.discretization);
        self.rules(store, &params)
    }

    /// Cue sequence rules for `task_type` at the configured support and length.
    pub fn cue_rules(&self, store: &Store, task_type: TaskType) -> Result<Arc<Vec<CueSequenceRule>>, ApiError> {
        if let Some(hit) = self.cache(store.watermark()).cues.get(&task_type) {
            return Ok(hit.clone());
        }
        let rules = mine_sequences_for_type(
            task_type,
            &store.sessions(),
            self.config.cue_min_support,
            self.config.cue_max_len,
        )
        .map_err(|e| ApiError::internal(e.to_string()))?;
        let rules = Arc::new(rules);
        self.cache(store.watermark()).cues.insert(task_type, rules.clone());
        Ok(rules)
    }
}
