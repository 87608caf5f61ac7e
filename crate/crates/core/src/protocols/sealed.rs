// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    Guarded,
    LeakDemo,
}

impl fmt::Display for AccessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessMode::Guarded => "guarded",
            AccessMode::LeakDemo => "leak-demo",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Before the trainer has handed over its completion token.
    Training,
    Scoring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SealState {
    Sealed,
    Unsealed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEntry {
    pub fold_key: String,
    /// Position in this set's log. Logical, so reports stay reproducible.
    pub timestamp: u64,
    pub operation: String,
    pub phase: Phase,
    pub permitted: bool,
}

/// Proof that training for a fold has finished. Only the trainer issues these.
#[derive(Debug)]
pub struct CompletionToken {
    fold_key: String,
}

impl CompletionToken {
    pub(crate) fn issue(fold_key: &str) -> Self {
        CompletionToken { fold_key: fold_key.to_string() }
    }

    pub fn fold_key(&self) -> &str {
        &self.fold_key
    }
}

/// Test features and labels of one fold behind an audited gate.
#[derive(Debug)]
pub struct SealedTestSet<T> {
    fold_key: String,
    mode: AccessMode,
    payload: T,
    state: SealState,
    log: Vec<AccessEntry>,
}

impl<T> SealedTestSet<T> {
    pub fn seal(fold_key: impl Into<String>, payload: T, mode: AccessMode) -> Self {
        SealedTestSet { fold_key: fold_key.into(), mode, payload, state: SealState::Sealed, log: Vec::new() }
    }

    pub fn fold_key(&self) -> &str {
        &self.fold_key
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    pub fn state(&self) -> SealState {
        self.state
    }

    pub fn log(&self) -> &[AccessEntry] {
        &self.log
    }

    fn record(&mut self, operation: &str, phase: Phase, permitted: bool) {
        let timestamp = self.log.len() as u64;
        self.log.push(AccessEntry {
            fold_key: self.fold_key.clone(),
            timestamp,
            operation: operation.to_string(),
            phase,
            permitted,
        });
    }

    /// Reads the hidden payload. While sealed this is refused in guarded
    /// mode and allowed but logged in leak-demo mode.
    pub fn read(&mut self, operation: &str) -> Result<&T, ProtocolError> {
        match (self.state, self.mode) {
            (SealState::Unsealed, _) => {
                self.record(operation, Phase::Scoring, true);
                Ok(&self.payload)
            }
            (SealState::Sealed, AccessMode::LeakDemo) => {
                self.record(operation, Phase::Training, true);
                Ok(&self.payload)
            }
            (SealState::Sealed, AccessMode::Guarded) => {
                self.record(operation, Phase::Training, false);
                Err(ProtocolError::SealedRead { fold: self.fold_key.clone(), operation: operation.to_string() })
            }
        }
    }

    /// One-way transition to the scoring phase.
    pub fn unseal(&mut self, token: Option<CompletionToken>) -> Result<&T, ProtocolError> {
        let token = token.ok_or_else(|| ProtocolError::MissingToken(self.fold_key.clone()))?;
        if token.fold_key != self.fold_key {
            return Err(ProtocolError::WrongToken { expected: self.fold_key.clone(), got: token.fold_key });
        }
        if self.state == SealState::Unsealed {
            return Err(ProtocolError::AlreadyUnsealed(self.fold_key.clone()));
        }
        self.state = SealState::Unsealed;
        self.record("unseal", Phase::Scoring, true);
        Ok(&self.payload)
    }

    pub fn audit(&self) -> LeakVerdict {
        let violations: Vec<AccessEntry> = self.log.iter().filter(|e| e.phase == Phase::Training).cloned().collect();
        LeakVerdict::new(self.mode, violations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakVerdict {
    pub clean: bool,
    pub mode: AccessMode,
    pub violations: Vec<AccessEntry>,
}

impl LeakVerdict {
    pub fn new(mode: AccessMode, violations: Vec<AccessEntry>) -> Self {
        LeakVerdict { clean: mode == AccessMode::Guarded && violations.is_empty(), mode, violations }
    }

    /// Verdict over several folds, in the given order. Leak-demo anywhere
    /// makes the whole verdict leak-demo.
    pub fn combine<'a>(verdicts: impl IntoIterator<Item = &'a LeakVerdict>) -> LeakVerdict {
        let mut mode = AccessMode::Guarded;
        let mut violations = Vec::new();
        for v in verdicts {
            if v.mode == AccessMode::LeakDemo {
                mode = AccessMode::LeakDemo;
            }
            violations.extend(v.violations.iter().cloned());
        }
        LeakVerdict::new(mode, violations)
    }
}
