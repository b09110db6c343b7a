//! Simulated target system: a hierarchical registry-like store, a
//! table-driven script engine, and a connectivity-disruption model.
//!
//! A disruptor is a store triple whose write severs the connection. The
//! triggering write itself succeeds; every operation after it fails with
//! [`TargetError::ConnectionLost`], so a one-by-one apply observes the
//! failure on the operation following the culprit rule's write. A disruptor
//! fires once; [`TargetState::reset_connection`] starts a new session with
//! fired disruptors disarmed.

use crate::automation::{ConfigScope, TypedAction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("connection to target lost")]
    ConnectionLost,
    #[error("script failed: {0}")]
    ScriptError(String),
    #[error("no behavior registered for script")]
    UnknownScript,
    #[error("malformed target fixture: {0}")]
    Fixture(String),
}

/// Address of one registry value on the target.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegistryPath {
    pub config: ConfigScope,
    pub registry_key: String,
    pub value_name: String,
}

impl RegistryPath {
    pub fn new(config: ConfigScope, key: impl Into<String>, name: impl Into<String>) -> Self {
        RegistryPath {
            config,
            registry_key: key.into(),
            value_name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptBehavior {
    Output { output: String },
    Failure { failure: String },
}

static TARGETS_CREATED: AtomicU64 = AtomicU64::new(0);

/// Number of target states constructed so far in this process. Snapshots and
/// clones do not count; only fresh constructions do.
pub fn creation_count() -> u64 {
    TARGETS_CREATED.load(Ordering::SeqCst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    store: BTreeMap<RegistryPath, TypedAction>,
    scripts: BTreeMap<String, ScriptBehavior>,
    disruptors: BTreeSet<RegistryPath>,
    connected: bool,
}

fn script_hash(script: &str) -> String {
    let digest = Sha256::digest(script.as_bytes());
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

impl Default for TargetState {
    fn default() -> Self {
        Self::new()
    }
}

impl TargetState {
    pub fn new() -> Self {
        TARGETS_CREATED.fetch_add(1, Ordering::SeqCst);
        TargetState {
            store: BTreeMap::new(),
            scripts: BTreeMap::new(),
            disruptors: BTreeSet::new(),
            connected: true,
        }
    }

    /// Build a target from a declarative fixture document.
    pub fn from_fixture_str(text: &str) -> Result<Self, TargetError> {
        #[derive(Deserialize)]
        struct ScriptFixture {
            script: String,
            behavior: ScriptBehavior,
        }
        #[derive(Deserialize)]
        struct StoreFixture {
            #[serde(flatten)]
            path: RegistryPath,
            action: TypedAction,
        }
        #[derive(Deserialize)]
        struct Fixture {
            #[serde(default)]
            initial_store: Vec<StoreFixture>,
            #[serde(default)]
            scripts: Vec<ScriptFixture>,
            #[serde(default)]
            disruptors: Vec<RegistryPath>,
        }

        let fixture: Fixture =
            serde_yaml::from_str(text).map_err(|e| TargetError::Fixture(e.to_string()))?;
        let mut target = TargetState::new();
        for entry in fixture.initial_store {
            target.store.insert(entry.path, entry.action);
        }
        for script in fixture.scripts {
            target
                .scripts
                .insert(script_hash(&script.script), script.behavior);
        }
        target.disruptors = fixture.disruptors.into_iter().collect();
        Ok(target)
    }

    pub fn from_fixture_path(path: &Path) -> Result<Self, TargetError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TargetError::Fixture(format!("{}: {e}", path.display())))?;
        Self::from_fixture_str(&text)
    }

    pub fn register_script(&mut self, script: &str, behavior: ScriptBehavior) {
        self.scripts.insert(script_hash(script), behavior);
    }

    pub fn add_disruptor(&mut self, path: RegistryPath) {
        self.disruptors.insert(path);
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Re-establish the connection and disarm any disruptor that already
    /// fired. Starts a new session for the disruption-monotonicity rule.
    pub fn reset_connection(&mut self) {
        self.connected = true;
    }

    fn ensure_connected(&self) -> Result<(), TargetError> {
        if self.connected {
            Ok(())
        } else {
            Err(TargetError::ConnectionLost)
        }
    }

    pub fn read_value(&self, path: &RegistryPath) -> Result<Option<&TypedAction>, TargetError> {
        self.ensure_connected()?;
        Ok(self.store.get(path))
    }

    /// Write a value and return the previous one, if any. If the path is a
    /// disruptor, the connection drops after this write succeeds.
    pub fn write_value(
        &mut self,
        path: RegistryPath,
        action: TypedAction,
    ) -> Result<Option<TypedAction>, TargetError> {
        self.ensure_connected()?;
        let disrupt = self.disruptors.remove(&path);
        let previous = self.store.insert(path, action);
        if disrupt {
            self.connected = false;
        }
        Ok(previous)
    }

    pub fn delete_value(
        &mut self,
        path: &RegistryPath,
    ) -> Result<Option<TypedAction>, TargetError> {
        self.ensure_connected()?;
        Ok(self.store.remove(path))
    }

    pub fn run_script(&self, script: &str) -> Result<String, TargetError> {
        self.ensure_connected()?;
        match self.scripts.get(&script_hash(script)) {
            Some(ScriptBehavior::Output { output }) => Ok(output.clone()),
            Some(ScriptBehavior::Failure { failure }) => {
                Err(TargetError::ScriptError(failure.clone()))
            }
            None => Err(TargetError::UnknownScript),
        }
    }

    /// All stored values; used by evaluators that match keys structurally.
    pub fn entries(
        &self,
    ) -> Result<impl Iterator<Item = (&RegistryPath, &TypedAction)>, TargetError> {
        self.ensure_connected()?;
        Ok(self.store.iter())
    }

    pub fn store_snapshot(&self) -> BTreeMap<RegistryPath, TypedAction> {
        self.store.clone()
    }

    pub fn snapshot(&self) -> TargetState {
        self.clone()
    }

    pub fn restore(&mut self, snapshot: &TargetState) {
        *self = snapshot.clone();
    }
}
