use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde_json::Value;
use thiserror::Error;

use super::{export_audit, AdherenceTrail, AuditDocument, ChainError, ConsentChain};
use crate::canonical::{canonicalize_serializable, CanonicalError};
use crate::hash::tagged_sha256;
use crate::model::{AdherenceEvent, ConsentRecord, PolicyDocument};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("journal i/o: {0}")]
    Io(#[from] io::Error),
    #[error("journal {path}:{line}: {detail}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AppendOutcome {
    Appended,
    /// An identical item with the same id was already stored.
    AlreadyPresent,
}

type ChainKey = (String, String);

struct Shard {
    chain: ConsentChain,
    trails: HashMap<String, AdherenceTrail>,
    journal: Option<File>,
}

impl Shard {
    fn write(&mut self, bytes: &[u8]) -> io::Result<()> {
        if let Some(file) = &mut self.journal {
            let mut line = Vec::with_capacity(bytes.len() + 1);
            line.extend_from_slice(bytes);
            line.push(b'\n');
            file.write_all(&line)?;
            file.flush()?;
        }
        Ok(())
    }
}

/// Consent chains keyed by (caller, callee) plus their adherence trails.
///
/// Appends to one key are serialized by that key's lock; different keys
/// proceed independently. With a journal directory every accepted append
/// is written as one canonical JSON line to the key's file before the call
/// returns, and [`ChainStore::open`] replays those files.
#[derive(Default)]
pub struct ChainStore {
    dir: Option<PathBuf>,
    shards: RwLock<HashMap<ChainKey, Arc<Mutex<Shard>>>>,
    record_index: RwLock<HashMap<String, ChainKey>>,
}

impl std::fmt::Debug for ChainStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ChainStore")
            .field("dir", &self.dir)
            .field("chains", &self.shards.read().expect("store lock").len())
            .finish()
    }
}

impl ChainStore {
    /// A store that keeps everything in memory.
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (creating if needed) a journal directory and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        let store = ChainStore {
            dir: None,
            ..Self::default()
        };
        for path in &paths {
            store.replay(path)?;
        }
        // reopen every shard's journal for appending
        for (key, shard) in store.shards.read().expect("store lock").iter() {
            let file = OpenOptions::new()
                .append(true)
                .open(journal_path(&dir, key))?;
            shard.lock().expect("shard lock").journal = Some(file);
        }
        Ok(ChainStore {
            dir: Some(dir),
            ..store
        })
    }

    fn replay(&self, path: &Path) -> Result<(), StoreError> {
        let reader = BufReader::new(File::open(path)?);
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |detail: String| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: n + 1,
                detail,
            };
            let value: Value = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            let result = if value.get("parsed_claims").is_some() {
                let record: ConsentRecord =
                    serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
                self.insert_record(record, None)
            } else {
                let event: AdherenceEvent =
                    serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
                self.append_adherence(event)
            };
            result.map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(())
    }

    pub fn journal_dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn shard(&self, caller: &str, callee: &str) -> Option<Arc<Mutex<Shard>>> {
        let key = (caller.to_owned(), callee.to_owned());
        self.shards.read().expect("store lock").get(&key).cloned()
    }

    fn shard_or_create(&self, caller: &str, callee: &str) -> Result<Arc<Mutex<Shard>>, StoreError> {
        if let Some(shard) = self.shard(caller, callee) {
            return Ok(shard);
        }
        let key = (caller.to_owned(), callee.to_owned());
        let mut shards = self.shards.write().expect("store lock");
        if let Some(shard) = shards.get(&key) {
            return Ok(shard.clone());
        }
        let journal = match &self.dir {
            Some(dir) => Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(journal_path(dir, &key))?,
            ),
            None => None,
        };
        let shard = Arc::new(Mutex::new(Shard {
            chain: ConsentChain::new(caller, callee),
            trails: HashMap::new(),
            journal,
        }));
        shards.insert(key, shard.clone());
        Ok(shard)
    }

    /// Validates `record` against `doc` and appends it to its chain.
    pub fn append_consent(
        &self,
        record: ConsentRecord,
        doc: &PolicyDocument,
    ) -> Result<AppendOutcome, StoreError> {
        self.insert_record(record, Some(doc))
    }

    /// Appends a record checking only its link; used for replay and import
    /// where the record was validated when first stored.
    pub fn append_consent_linked(
        &self,
        record: ConsentRecord,
    ) -> Result<AppendOutcome, StoreError> {
        self.insert_record(record, None)
    }

    fn insert_record(
        &self,
        record: ConsentRecord,
        doc: Option<&PolicyDocument>,
    ) -> Result<AppendOutcome, StoreError> {
        let shard = self.shard_or_create(&record.caller, &record.callee)?;
        let mut shard = shard.lock().expect("shard lock");
        if let Some(existing) = shard.chain.get(&record.id) {
            if *existing == record {
                return Ok(AppendOutcome::AlreadyPresent);
            }
            return Err(ChainError::DuplicateId(record.id).into());
        }
        let bytes = canonicalize_serializable(&record)?;
        let key = (record.caller.clone(), record.callee.clone());
        let id = record.id.clone();
        match doc {
            Some(doc) => shard.chain.append(record, doc)?,
            None => shard.chain.append_linked(record)?,
        }
        shard.write(&bytes)?;
        self.record_index
            .write()
            .expect("index lock")
            .insert(id, key);
        Ok(AppendOutcome::Appended)
    }

    /// Appends an event to the trail of the consent record it names.
    pub fn append_adherence(&self, event: AdherenceEvent) -> Result<AppendOutcome, StoreError> {
        let key = self
            .record_index
            .read()
            .expect("index lock")
            .get(&event.consent_record_id)
            .cloned()
            .ok_or_else(|| ChainError::UnanchoredEvent(event.consent_record_id.clone()))?;
        let shard = self.shard(&key.0, &key.1).expect("indexed shard exists");
        let mut shard = shard.lock().expect("shard lock");
        let trail = shard
            .trails
            .entry(event.consent_record_id.clone())
            .or_insert_with(|| AdherenceTrail::new(event.consent_record_id.clone()));
        if let Some(existing) = trail.get(&event.id) {
            if *existing == event {
                return Ok(AppendOutcome::AlreadyPresent);
            }
            return Err(ChainError::DuplicateId(event.id).into());
        }
        let bytes = canonicalize_serializable(&event)?;
        trail.append(event)?;
        shard.write(&bytes)?;
        Ok(AppendOutcome::Appended)
    }

    /// Runs `f` over a consistent snapshot of one key's chain and trails.
    pub fn read<R>(
        &self,
        caller: &str,
        callee: &str,
        f: impl FnOnce(&ConsentChain, &HashMap<String, AdherenceTrail>) -> R,
    ) -> Option<R> {
        let shard = self.shard(caller, callee)?;
        let shard = shard.lock().expect("shard lock");
        Some(f(&shard.chain, &shard.trails))
    }

    pub fn chain(&self, caller: &str, callee: &str) -> Option<ConsentChain> {
        self.read(caller, callee, |chain, _| chain.clone())
    }

    pub fn tail(&self, caller: &str, callee: &str) -> Option<ConsentRecord> {
        self.read(caller, callee, |chain, _| chain.tail().cloned())
            .flatten()
    }

    fn key_of(&self, record_id: &str) -> Option<ChainKey> {
        self.record_index
            .read()
            .expect("index lock")
            .get(record_id)
            .cloned()
    }

    pub fn record(&self, record_id: &str) -> Option<ConsentRecord> {
        let (caller, callee) = self.key_of(record_id)?;
        self.read(&caller, &callee, |chain, _| chain.get(record_id).cloned())
            .flatten()
    }

    pub fn trail(&self, record_id: &str) -> Option<AdherenceTrail> {
        let (caller, callee) = self.key_of(record_id)?;
        self.read(&caller, &callee, |chain, trails| {
            chain.contains(record_id).then(|| {
                trails
                    .get(record_id)
                    .cloned()
                    .unwrap_or_else(|| AdherenceTrail::new(record_id))
            })
        })
        .flatten()
    }

    pub fn event(&self, record_id: &str, event_id: &str) -> Option<AdherenceEvent> {
        let (caller, callee) = self.key_of(record_id)?;
        self.read(&caller, &callee, |_, trails| {
            trails.get(record_id).and_then(|t| t.get(event_id)).cloned()
        })
        .flatten()
    }

    /// Audit export for one key; a missing key exports empty lists.
    pub fn export(&self, caller: &str, callee: &str) -> AuditDocument {
        self.read(caller, callee, |chain, trails| {
            export_audit(chain, trails.values())
        })
        .unwrap_or_else(|| export_audit(&ConsentChain::new(caller, callee), []))
    }

    /// Appends everything in `audit` that is not yet stored, in order.
    pub fn import(&self, audit: &AuditDocument) -> Result<usize, StoreError> {
        let mut appended = 0;
        for entry in &audit.consent_chain {
            if self.append_consent_linked(entry.record.clone())? == AppendOutcome::Appended {
                appended += 1;
            }
        }
        for trail in &audit.adherence_trails {
            for entry in &trail.events {
                if self.append_adherence(entry.event.clone())? == AppendOutcome::Appended {
                    appended += 1;
                }
            }
        }
        Ok(appended)
    }

    pub fn keys(&self) -> Vec<(String, String)> {
        let mut keys: Vec<_> = self
            .shards
            .read()
            .expect("store lock")
            .keys()
            .cloned()
            .collect();
        keys.sort();
        keys
    }

    /// Chains whose caller is `caller`, across callees.
    pub fn callees_of(&self, caller: &str) -> Vec<String> {
        self.keys()
            .into_iter()
            .filter(|(c, _)| c == caller)
            .map(|(_, callee)| callee)
            .collect()
    }
}

fn journal_path(dir: &Path, key: &ChainKey) -> PathBuf {
    let digest = tagged_sha256(format!("{}\n{}", key.0, key.1).as_bytes());
    let hex = digest.trim_start_matches(crate::hash::HASH_PREFIX);
    dir.join(format!("{}.jsonl", &hex[..32]))
}
