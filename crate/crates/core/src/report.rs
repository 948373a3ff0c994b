//! Pass/fail reports shared by the hypothesis validators.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The condition involves a limit that a finite check cannot decide.
    Indeterminate,
}

impl Status {
    pub fn from_bool(ok: bool) -> Status {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub name: String,
    pub status: Status,
    /// Numeric witness (an extremum, a constant, a node value), if any.
    pub value: Option<f64>,
    pub witness: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn push(&mut self, name: &str, status: Status, value: Option<f64>, witness: impl Into<String>) {
        self.entries.push(ValidationEntry { name: name.to_string(), status, value, witness: witness.into() });
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.entries.extend(other.entries);
    }

    /// No entry failed. Indeterminate entries do not count as failures.
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    pub fn status_of(&self, name: &str) -> Option<Status> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.status)
    }

    pub fn value_of(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).and_then(|e| e.value)
    }

    pub fn summary(&self) -> String {
        self.failures().map(|e| format!("{} ({})", e.name, e.witness)).collect::<Vec<_>>().join("; ")
    }
}
